//! Discrete and analytic measures on punctured Euclidean space.
//!
//! A [`DiscreteMeasure`] is a finite weighted point cloud that never charges
//! the origin. A [`HomogeneousMeasure`] is an exact α-homogeneous measure in
//! polar form: an angular part times the Pareto radial density
//! `α r^{-α-1} dr`, normalised so that the mass of `{‖x‖ > 1}` equals
//! `angular_mass`. Because such measures have infinite total mass, mass
//! queries only ever ask about sets bounded away from the origin; infinite
//! masses of cones are reported symbolically through [`ConeMass`].

use std::f64::consts::PI;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::quad::adaptive_simpson;

/// Angular cell masses below this value count as outside the support.
pub const SUPPORT_THRESHOLD: f64 = 1e-12;

const ANGULAR_QUAD_TOL: f64 = 1e-13;

/// A point of R^d with finite coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidPoint("zero-dimensional point".into()));
        }
        if let Some(c) = coords.iter().find(|c| !c.is_finite()) {
            return Err(Error::InvalidPoint(format!("non-finite coordinate {c}")));
        }
        Ok(Point(coords))
    }

    pub fn origin(dim: usize) -> Self {
        Point(vec![0.0; dim])
    }

    /// Unit vector along axis `axis`.
    pub fn unit(dim: usize, axis: usize) -> Self {
        let mut c = vec![0.0; dim];
        c[axis] = 1.0;
        Point(c)
    }

    pub fn from_polar(r: f64, theta: f64) -> Self {
        Point(vec![r * theta.cos(), r * theta.sin()])
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn dot(&self, other: &Point) -> f64 {
        dot(&self.0, &other.0)
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn is_origin(&self) -> bool {
        self.0.iter().all(|&c| c == 0.0)
    }

    pub fn scale(&self, s: f64) -> Point {
        Point(self.0.iter().map(|c| c * s).collect())
    }

    pub fn sub(&self, other: &Point) -> Point {
        Point(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn add(&self, other: &Point) -> Point {
        Point(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn dist_sq(&self, other: &Point) -> f64 {
        dist_sq(&self.0, &other.0)
    }

    /// Returns `self / ‖self‖`, or `None` at the origin.
    pub fn normalized(&self) -> Option<Point> {
        let n = self.norm();
        (n > 0.0).then(|| self.scale(1.0 / n))
    }

    /// Polar angle in `[-π, π]`; only meaningful for `d = 2`.
    pub fn angle(&self) -> f64 {
        self.0[1].atan2(self.0[0])
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Bookkeeping attached to generated measures.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Provenance {
    pub truncation_radius: Option<f64>,
    pub sample_size: Option<usize>,
    pub seed: Option<u64>,
    /// Atoms dropped while building the measure (for example, rescaled
    /// samples that land too close to the origin).
    pub dropped: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Atom {
    pub point: Point,
    pub weight: f64,
}

/// Weighted point cloud on R^d \ {0}.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteMeasure {
    dim: usize,
    atoms: Vec<Atom>,
    pub meta: Option<Provenance>,
}

impl DiscreteMeasure {
    /// Validates positivity of weights, dimensions and the punctured-space
    /// constraint. Atoms at the origin are rejected, not dropped.
    pub fn new(dim: usize, atoms: Vec<Atom>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidMeasure("dimension must be positive".into()));
        }
        for (i, a) in atoms.iter().enumerate() {
            if a.point.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: a.point.dim(),
                });
            }
            if !(a.weight > 0.0) || !a.weight.is_finite() {
                return Err(Error::InvalidMeasure(format!(
                    "atom {i} has non-positive or non-finite weight {}",
                    a.weight
                )));
            }
            if a.point.is_origin() {
                return Err(Error::InvalidMeasure(format!(
                    "atom {i} sits at the origin"
                )));
            }
        }
        Ok(DiscreteMeasure {
            dim,
            atoms,
            meta: None,
        })
    }

    /// Convenience constructor from `(coords, weight)` pairs.
    pub fn from_pairs(dim: usize, pairs: Vec<(Vec<f64>, f64)>) -> Result<Self> {
        let atoms = pairs
            .into_iter()
            .map(|(c, w)| {
                Ok(Atom {
                    point: Point::new(c)?,
                    weight: w,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(dim, atoms)
    }

    pub fn empty(dim: usize) -> Self {
        DiscreteMeasure {
            dim,
            atoms: Vec::new(),
            meta: None,
        }
    }

    pub fn with_meta(mut self, meta: Provenance) -> Self {
        self.meta = Some(meta);
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn point(&self, i: usize) -> &Point {
        &self.atoms[i].point
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.atoms[i].weight
    }

    /// Total weight, summed left to right in atom order.
    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().fold(0.0, |acc, a| acc + a.weight)
    }

    /// Keeps the atoms for which `keep` returns true.
    pub fn restrict<F: Fn(&Point) -> bool>(&self, keep: F) -> DiscreteMeasure {
        DiscreteMeasure {
            dim: self.dim,
            atoms: self
                .atoms
                .iter()
                .filter(|a| keep(&a.point))
                .cloned()
                .collect(),
            meta: self.meta.clone(),
        }
    }

    /// Mass of the atoms inside `cone` with `r_lo ≤ ‖x‖ < r_hi`.
    pub fn mass_sector(&self, cone: &Cone, r_lo: f64, r_hi: f64) -> Result<f64> {
        check_radii(r_lo, r_hi)?;
        Ok(self
            .atoms
            .iter()
            .filter(|a| {
                let r = a.point.norm();
                r >= r_lo && r < r_hi && cone.contains(&a.point)
            })
            .fold(0.0, |acc, a| acc + a.weight))
    }

    pub(crate) fn push_atom(&mut self, atom: Atom) {
        self.atoms.push(atom);
    }
}

fn check_radii(r_lo: f64, r_hi: f64) -> Result<()> {
    if !(r_lo > 0.0) {
        return Err(Error::TouchesOrigin(r_lo));
    }
    if r_hi.is_nan() || r_hi < r_lo {
        return Err(Error::InvalidArgument(format!(
            "annulus [{r_lo}, {r_hi}) is empty or reversed"
        )));
    }
    Ok(())
}

/// Masses of annuli `{r_lo ≤ ‖x‖ < r_hi}`; `r_hi` may be `f64::INFINITY`.
pub trait RadialMass {
    fn mass_annulus(&self, r_lo: f64, r_hi: f64) -> Result<f64>;
}

impl RadialMass for DiscreteMeasure {
    fn mass_annulus(&self, r_lo: f64, r_hi: f64) -> Result<f64> {
        check_radii(r_lo, r_hi)?;
        Ok(self
            .atoms
            .iter()
            .filter(|a| {
                let r = a.point.norm();
                r >= r_lo && r < r_hi
            })
            .fold(0.0, |acc, a| acc + a.weight))
    }
}

/// Open cone `{x ≠ 0 : ⟨x/‖x‖, b/‖b‖⟩ > ε}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Cone {
    direction: Point,
    aperture: f64,
}

impl Cone {
    pub fn new(direction: Point, aperture: f64) -> Result<Self> {
        let direction = direction
            .normalized()
            .ok_or_else(|| Error::InvalidArgument("cone direction must be nonzero".into()))?;
        if !(aperture > 0.0 && aperture < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "cone aperture {aperture} not in (0, 1)"
            )));
        }
        Ok(Cone {
            direction,
            aperture,
        })
    }

    /// Unit direction of the cone axis.
    pub fn direction(&self) -> &Point {
        &self.direction
    }

    pub fn aperture(&self) -> f64 {
        self.aperture
    }

    pub fn contains(&self, x: &Point) -> bool {
        match x.normalized() {
            Some(u) => u.dot(&self.direction) > self.aperture,
            None => false,
        }
    }
}

/// Mass of a cone under a homogeneous measure.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConeMass {
    /// Angular mass of the spherical cap cut out by the cone; equals the
    /// mass of the cone intersected with `{‖x‖ > 1}`.
    pub cap_mass: f64,
    /// True when the cone has infinite total mass.
    pub infinite: bool,
}

/// Closed-form angular densities on the circle (d = 2) or sphere (d = 3).
///
/// Values are with respect to arc length (or surface area) and need not be
/// normalised; the owning measure rescales them to its `angular_mass`.
#[derive(Clone, Debug, PartialEq)]
pub enum AngularDensity {
    /// Rotation-invariant density; supported for d = 2 and d = 3.
    Uniform,
    /// `cos(θ)^3` on `(-π/2, π/2)`, zero elsewhere.
    CosCubedRight,
    /// `64|cos θ|^3 / (1 + 3cos²θ)^3` on `(π/2, 3π/2)`, zero elsewhere:
    /// the angular part of the push-forward of [`AngularDensity::CosCubedRight`]
    /// through the gradient of `y⁴/x²`.
    PushedLeft,
    /// Uniform on the arc of half-width `half_width` around angle `center`.
    Arc { center: f64, half_width: f64 },
}

impl AngularDensity {
    /// Raw density at polar angle `theta` (d = 2 only).
    pub fn value_at_angle(&self, theta: f64) -> f64 {
        match self {
            AngularDensity::Uniform => 1.0,
            AngularDensity::CosCubedRight => {
                let c = theta.cos();
                if c > 0.0 {
                    c * c * c
                } else {
                    0.0
                }
            }
            AngularDensity::PushedLeft => {
                let c = theta.cos();
                if c < 0.0 {
                    let a = c.abs();
                    64.0 * a * a * a / (1.0 + 3.0 * c * c).powi(3)
                } else {
                    0.0
                }
            }
            AngularDensity::Arc { center, half_width } => {
                let d = wrap_angle(theta - center).abs();
                if d < *half_width {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Raw integral of the density over the angle interval `[a, b]`, `a ≤ b`.
    fn arc_integral(&self, a: f64, b: f64) -> f64 {
        match self {
            AngularDensity::Uniform => b - a,
            AngularDensity::Arc { center, half_width } => {
                // The arc may appear in several 2π-periods of [a, b].
                let mut total = 0.0;
                let k0 = ((a - center - half_width) / (2.0 * PI)).floor() as i64;
                let k1 = ((b - center + half_width) / (2.0 * PI)).ceil() as i64;
                for k in k0..=k1 {
                    let c = center + 2.0 * PI * k as f64;
                    let lo = (c - half_width).max(a);
                    let hi = (c + half_width).min(b);
                    if hi > lo {
                        total += hi - lo;
                    }
                }
                total
            }
            _ => {
                let f = |t: f64| self.value_at_angle(t);
                adaptive_simpson(&f, a, b, ANGULAR_QUAD_TOL)
            }
        }
    }

    fn max_value(&self) -> f64 {
        match self {
            AngularDensity::Uniform | AngularDensity::Arc { .. } => 1.0,
            AngularDensity::CosCubedRight => 1.0,
            // maximum at |cos θ| = 1/√3
            AngularDensity::PushedLeft => 8.0 / (3.0 * 3f64.sqrt()),
        }
    }

    fn supports_dim(&self, dim: usize) -> bool {
        match self {
            AngularDensity::Uniform => dim == 2 || dim == 3,
            _ => dim == 2,
        }
    }
}

/// Wraps an angle into `(-π, π]`.
pub(crate) fn wrap_angle(t: f64) -> f64 {
    let mut r = t.rem_euclid(2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    }
    r
}

/// Angular component of a homogeneous measure.
#[derive(Clone, Debug, PartialEq)]
pub enum AngularPart {
    /// Point masses on unit directions.
    Discrete(Vec<(Point, f64)>),
    /// Density on the sphere; `resolution` is the default quadrature grid size
    /// used when the support has to be enumerated.
    Density {
        density: AngularDensity,
        resolution: usize,
    },
}

/// Exact α-homogeneous measure `ν(dx) = Θ(dθ) α r^{-α-1} dr`.
#[derive(Clone, Debug, PartialEq)]
pub struct HomogeneousMeasure {
    dim: usize,
    alpha: f64,
    angular: AngularPart,
    angular_mass: f64,
    smooth: bool,
    /// Raw integral of the angular shape (sum of weights, or density integral).
    raw_total: f64,
}

impl HomogeneousMeasure {
    /// `smooth` records that the measure vanishes on sets of Hausdorff
    /// dimension at most d − 1; it is accepted only for density angular parts
    /// in dimension ≥ 2.
    pub fn new(
        dim: usize,
        alpha: f64,
        angular: AngularPart,
        angular_mass: f64,
        smooth: bool,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidMeasure("dimension must be positive".into()));
        }
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::InvalidMeasure(format!(
                "tail index {alpha} must be positive"
            )));
        }
        if !(angular_mass > 0.0) || !angular_mass.is_finite() {
            return Err(Error::InvalidMeasure(format!(
                "angular mass {angular_mass} must be positive"
            )));
        }
        let (angular, raw_total) = match angular {
            AngularPart::Discrete(atoms) => {
                if smooth {
                    return Err(Error::InvalidMeasure(
                        "discrete angular parts cannot be smooth".into(),
                    ));
                }
                if atoms.is_empty() {
                    return Err(Error::InvalidMeasure("empty angular part".into()));
                }
                let mut normed = Vec::with_capacity(atoms.len());
                for (u, w) in atoms {
                    if u.dim() != dim {
                        return Err(Error::DimensionMismatch {
                            expected: dim,
                            found: u.dim(),
                        });
                    }
                    if !(w > 0.0) || !w.is_finite() {
                        return Err(Error::InvalidMeasure(format!(
                            "angular weight {w} must be positive"
                        )));
                    }
                    let u = u.normalized().ok_or_else(|| {
                        Error::InvalidMeasure("angular atom at the origin".into())
                    })?;
                    normed.push((u, w));
                }
                let total = normed.iter().fold(0.0, |acc, (_, w)| acc + w);
                (AngularPart::Discrete(normed), total)
            }
            AngularPart::Density {
                density,
                resolution,
            } => {
                if !density.supports_dim(dim) {
                    return Err(Error::Unsupported(format!(
                        "angular density {density:?} in dimension {dim}"
                    )));
                }
                if smooth && dim < 2 {
                    return Err(Error::InvalidMeasure("smooth flag requires d ≥ 2".into()));
                }
                if resolution < 1 {
                    return Err(Error::BadResolution);
                }
                let total = match (&density, dim) {
                    (AngularDensity::Uniform, 3) => 4.0 * PI,
                    _ => density.arc_integral(-PI, PI),
                };
                if !(total > 0.0) {
                    return Err(Error::InvalidMeasure(
                        "angular density integrates to zero".into(),
                    ));
                }
                (
                    AngularPart::Density {
                        density,
                        resolution,
                    },
                    total,
                )
            }
        };
        Ok(HomogeneousMeasure {
            dim,
            alpha,
            angular,
            angular_mass,
            smooth,
            raw_total,
        })
    }

    /// Uniform angular law on the circle or sphere.
    pub fn spherical(dim: usize, alpha: f64, angular_mass: f64) -> Result<Self> {
        if dim == 1 {
            let ang = vec![
                (Point::unit(1, 0), 1.0),
                (Point::unit(1, 0).scale(-1.0), 1.0),
            ];
            return Self::new(1, alpha, AngularPart::Discrete(ang), angular_mass, false);
        }
        Self::new(
            dim,
            alpha,
            AngularPart::Density {
                density: AngularDensity::Uniform,
                resolution: 64,
            },
            angular_mass,
            true,
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn angular(&self) -> &AngularPart {
        &self.angular
    }

    pub fn angular_mass(&self) -> f64 {
        self.angular_mass
    }

    pub fn smooth(&self) -> bool {
        self.smooth
    }

    /// Angular mass of the directions `θ` with `⟨θ, b̂⟩ > ε`.
    pub fn angular_cap_mass(&self, cone: &Cone) -> Result<f64> {
        if cone.direction().dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: cone.direction().dim(),
            });
        }
        let b = cone.direction();
        let eps = cone.aperture();
        let scale = self.angular_mass / self.raw_total;
        let raw = match &self.angular {
            AngularPart::Discrete(atoms) => atoms
                .iter()
                .filter(|(u, _)| u.dot(b) > eps)
                .fold(0.0, |acc, (_, w)| acc + w),
            AngularPart::Density { density, .. } => match self.dim {
                2 => {
                    let half = eps.acos();
                    let c = b.angle();
                    density.arc_integral(c - half, c + half)
                }
                3 => {
                    // only the uniform density is admitted in d = 3
                    2.0 * PI * (1.0 - eps)
                }
                _ => unreachable!("density parts are validated to d = 2 or 3"),
            },
        };
        Ok(raw * scale)
    }

    pub fn mass_cone(&self, cone: &Cone) -> Result<ConeMass> {
        let cap_mass = self.angular_cap_mass(cone)?;
        let infinite = match &self.angular {
            AngularPart::Discrete(_) => cap_mass > 0.0,
            AngularPart::Density { .. } => cap_mass > SUPPORT_THRESHOLD,
        };
        Ok(ConeMass { cap_mass, infinite })
    }

    /// Mass of `cone ∩ {r_lo ≤ ‖x‖ < r_hi}`.
    pub fn mass_sector(&self, cone: &Cone, r_lo: f64, r_hi: f64) -> Result<f64> {
        check_radii(r_lo, r_hi)?;
        Ok(self.angular_cap_mass(cone)? * self.radial_fraction(r_lo, r_hi))
    }

    fn radial_fraction(&self, r_lo: f64, r_hi: f64) -> f64 {
        let hi = if r_hi.is_infinite() {
            0.0
        } else {
            r_hi.powf(-self.alpha)
        };
        r_lo.powf(-self.alpha) - hi
    }

    /// Angular partition: unit directions at cell midpoints with the exact
    /// angular mass of each cell. Cells below [`SUPPORT_THRESHOLD`] are dropped.
    ///
    /// d = 2 uses `resolution` equal arcs starting at angle −π; d = 3 uses
    /// `resolution` equal-area latitude bands with `2·resolution` longitude
    /// cells each. Discrete angular parts return their atoms unchanged.
    pub fn angular_grid(&self, resolution: usize) -> Result<Vec<(Point, f64)>> {
        if resolution < 1 {
            return Err(Error::BadResolution);
        }
        let scale = self.angular_mass / self.raw_total;
        let cells: Vec<(Point, f64)> = match &self.angular {
            AngularPart::Discrete(atoms) => {
                atoms.iter().map(|(u, w)| (u.clone(), w * scale)).collect()
            }
            AngularPart::Density { density, .. } => match self.dim {
                2 => {
                    let h = 2.0 * PI / resolution as f64;
                    let raw: Vec<(Point, f64)> = (0..resolution)
                        .map(|k| {
                            let a = -PI + h * k as f64;
                            let b = -PI + h * (k + 1) as f64;
                            (
                                Point::from_polar(1.0, 0.5 * (a + b)),
                                density.arc_integral(a, b),
                            )
                        })
                        .collect();
                    let sum = raw.iter().fold(0.0, |acc, (_, w)| acc + w);
                    let s = self.angular_mass / sum;
                    raw.into_iter().map(|(u, w)| (u, w * s)).collect()
                }
                3 => sphere_grid(resolution)
                    .into_iter()
                    .map(|u| (u, self.angular_mass / (2 * resolution * resolution) as f64))
                    .collect(),
                _ => unreachable!(),
            },
        };
        Ok(cells
            .into_iter()
            .filter(|(_, w)| *w > SUPPORT_THRESHOLD)
            .collect())
    }

    /// Directions carrying positive angular mass on the given grid.
    pub fn support_directions(&self, resolution: usize) -> Result<Vec<Point>> {
        Ok(self
            .angular_grid(resolution)?
            .into_iter()
            .map(|(u, _)| u)
            .collect())
    }

    /// Draws one direction from the normalised angular law.
    pub fn sample_direction<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        match &self.angular {
            AngularPart::Discrete(atoms) => {
                let idx = WeightedIndex::new(atoms.iter().map(|(_, w)| *w))
                    .expect("weights validated positive")
                    .sample(rng);
                atoms[idx].0.clone()
            }
            AngularPart::Density { density, .. } => match density {
                AngularDensity::Uniform => uniform_direction(self.dim, rng),
                AngularDensity::Arc { center, half_width } => {
                    let t = center + half_width * (2.0 * rng.random::<f64>() - 1.0);
                    Point::from_polar(1.0, t)
                }
                _ => {
                    let bound = density.max_value() * 1.000001;
                    loop {
                        let t = -PI + 2.0 * PI * rng.random::<f64>();
                        if rng.random::<f64>() * bound < density.value_at_angle(t) {
                            return Point::from_polar(1.0, t);
                        }
                    }
                }
            },
        }
    }

    /// Finite proxy of the measure restricted to the annulus `[r_lo, r_hi)`.
    pub fn discretize(
        &self,
        r_lo: f64,
        r_hi: f64,
        params: &Discretization,
    ) -> Result<DiscreteMeasure> {
        if !(r_lo > 0.0) {
            return Err(Error::TouchesOrigin(r_lo));
        }
        if !(r_hi > r_lo) || !r_hi.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "annulus ({r_lo}, {r_hi}) must be bounded and nonempty"
            )));
        }
        if params.resolution < 1 {
            return Err(Error::BadResolution);
        }
        let total_radial = self.radial_fraction(r_lo, r_hi);
        let mut out = DiscreteMeasure::empty(self.dim);
        match params.mode {
            DiscretizationMode::Quadrature => {
                let cells = radial_cells(self.alpha, r_lo, r_hi, params.resolution, params.radial);
                for (u, aw) in self.angular_grid(params.resolution)? {
                    for &(r, rw) in &cells {
                        out.push_atom(Atom {
                            point: u.scale(r),
                            weight: aw * rw,
                        });
                    }
                }
            }
            DiscretizationMode::MonteCarlo => {
                let n = params.resolution;
                let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
                let w = self.angular_mass * total_radial / n as f64;
                let lo = r_lo.powf(-self.alpha);
                let hi = r_hi.powf(-self.alpha);
                for _ in 0..n {
                    let u: f64 = rng.random();
                    let r = (lo - u * (lo - hi)).powf(-1.0 / self.alpha);
                    let dir = self.sample_direction(&mut rng);
                    out.push_atom(Atom {
                        point: dir.scale(r),
                        weight: w,
                    });
                }
            }
        }
        Ok(out.with_meta(Provenance {
            truncation_radius: Some(r_lo),
            sample_size: Some(params.resolution),
            seed: (params.mode == DiscretizationMode::MonteCarlo).then_some(params.seed),
            dropped: 0,
        }))
    }
}

impl RadialMass for HomogeneousMeasure {
    fn mass_annulus(&self, r_lo: f64, r_hi: f64) -> Result<f64> {
        check_radii(r_lo, r_hi)?;
        Ok(self.angular_mass * self.radial_fraction(r_lo, r_hi))
    }
}

/// Uniform direction on S^{d-1} via normalised Gaussians.
pub fn uniform_direction<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Point {
    if dim == 1 {
        return Point(vec![if rng.random::<bool>() { 1.0 } else { -1.0 }]);
    }
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let n = dot(&v, &v).sqrt();
        if n > 1e-12 {
            return Point(v.into_iter().map(|c| c / n).collect());
        }
    }
}

/// Midpoints of the equal-area partition of S^2 into `res` bands of
/// `2·res` cells.
fn sphere_grid(res: usize) -> Vec<Point> {
    let mut pts = Vec::with_capacity(2 * res * res);
    for i in 0..res {
        let z = -1.0 + (2.0 * i as f64 + 1.0) / res as f64;
        let rho = (1.0 - z * z).max(0.0).sqrt();
        for j in 0..2 * res {
            let phi = -PI + PI * (2.0 * j as f64 + 1.0) / (2 * res) as f64;
            pts.push(Point(vec![rho * phi.cos(), rho * phi.sin(), z]));
        }
    }
    pts
}

/// Radial partition of `[r_lo, r_hi)` for the Pareto(α) density.
///
/// Each cell is represented by its conditional median radius and carries its
/// exact mass `a^{-α} − b^{-α}`.
fn radial_cells(alpha: f64, r_lo: f64, r_hi: f64, k: usize, grid: RadialGrid) -> Vec<(f64, f64)> {
    let lo = r_lo.powf(-alpha);
    let hi = r_hi.powf(-alpha);
    let bounds: Vec<f64> = match grid {
        RadialGrid::EqualMass => (0..=k)
            .map(|i| {
                if i == 0 {
                    lo
                } else if i == k {
                    hi
                } else {
                    lo - (lo - hi) * i as f64 / k as f64
                }
            })
            .collect(),
        RadialGrid::LogUniform => {
            let ratio = r_hi / r_lo;
            (0..=k)
                .map(|i| {
                    if i == 0 {
                        lo
                    } else if i == k {
                        hi
                    } else {
                        (r_lo * ratio.powf(i as f64 / k as f64)).powf(-alpha)
                    }
                })
                .collect()
        }
    };
    bounds
        .windows(2)
        .map(|w| {
            let r = (0.5 * (w[0] + w[1])).powf(-1.0 / alpha);
            (r, w[0] - w[1])
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DiscretizationMode {
    Quadrature,
    MonteCarlo,
}

/// Placement of radial cell boundaries in quadrature mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RadialGrid {
    /// Equal-mass cells from the Pareto inverse CDF.
    EqualMass,
    /// Geometrically spaced cells; keeps the discretization exactly
    /// homogeneous under scalings by powers of the cell ratio.
    LogUniform,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Discretization {
    pub mode: DiscretizationMode,
    /// Angular and radial cell count (quadrature) or sample size (Monte Carlo).
    pub resolution: usize,
    pub seed: u64,
    pub radial: RadialGrid,
    /// Outer truncation radius used by [`truncate_and_balance`] for analytic
    /// inputs; defaults to `n`.
    pub r_hi: Option<f64>,
}

impl Discretization {
    pub fn quadrature(resolution: usize) -> Self {
        Discretization {
            mode: DiscretizationMode::Quadrature,
            resolution,
            seed: 0,
            radial: RadialGrid::EqualMass,
            r_hi: None,
        }
    }

    pub fn monte_carlo(resolution: usize, seed: u64) -> Self {
        Discretization {
            mode: DiscretizationMode::MonteCarlo,
            resolution,
            seed,
            radial: RadialGrid::EqualMass,
            r_hi: None,
        }
    }

    pub fn log_uniform(mut self) -> Self {
        self.radial = RadialGrid::LogUniform;
        self
    }
}

/// Either kind of measure, as accepted by [`truncate_and_balance`].
#[derive(Clone, Copy, Debug)]
pub enum MeasureRef<'a> {
    Discrete(&'a DiscreteMeasure),
    Homogeneous(&'a HomogeneousMeasure),
}

impl MeasureRef<'_> {
    fn dim(&self) -> usize {
        match self {
            MeasureRef::Discrete(m) => m.dim(),
            MeasureRef::Homogeneous(m) => m.dim(),
        }
    }

    fn truncate(&self, n: usize, params: &Discretization) -> Result<DiscreteMeasure> {
        let r_lo = 1.0 / n as f64;
        match self {
            MeasureRef::Discrete(m) => Ok(m.restrict(|p| p.norm() > r_lo)),
            MeasureRef::Homogeneous(m) => {
                let r_hi = params.r_hi.unwrap_or(n as f64);
                m.discretize(r_lo, r_hi, params)
            }
        }
    }
}

/// Equally spaced directions used for the balancing shell.
///
/// d = 1 gives `±1`, d = 2 gives `resolution` arc midpoints, d = 3 the
/// equal-area sphere grid and higher dimensions the `2d` signed axes.
pub fn shell_directions(dim: usize, resolution: usize) -> Vec<Point> {
    match dim {
        1 => vec![Point(vec![1.0]), Point(vec![-1.0])],
        2 => {
            let h = 2.0 * PI / resolution as f64;
            (0..resolution)
                .map(|k| Point::from_polar(1.0, -PI + h * (k as f64 + 0.5)))
                .collect()
        }
        3 => sphere_grid(resolution),
        _ => (0..dim)
            .flat_map(|i| [Point::unit(dim, i), Point::unit(dim, i).scale(-1.0)])
            .collect(),
    }
}

/// Restricts both measures to `{‖x‖ > 1/n}` and tops up the lighter one with
/// a uniform shell of mass at radius `1/(2n)` so that both totals agree
/// bit for bit under left-to-right summation.
pub fn truncate_and_balance(
    mu: MeasureRef<'_>,
    nu: MeasureRef<'_>,
    n: usize,
    params: &Discretization,
) -> Result<(DiscreteMeasure, DiscreteMeasure)> {
    if n < 1 {
        return Err(Error::InvalidArgument(
            "truncation level n must be at least 1".into(),
        ));
    }
    if mu.dim() != nu.dim() {
        return Err(Error::DimensionMismatch {
            expected: mu.dim(),
            found: nu.dim(),
        });
    }
    if params.resolution < 1 {
        return Err(Error::BadResolution);
    }
    let mut a = mu.truncate(n, params)?;
    let mut b = nu.truncate(n, params)?;
    if a.is_empty() && b.is_empty() {
        return Err(Error::EmptyTruncation);
    }
    let (ta, tb) = (a.total_mass(), b.total_mass());
    if ta != tb {
        let (light, target) = if ta < tb { (&mut a, tb) } else { (&mut b, ta) };
        add_balance_shell(light, target, 0.5 / n as f64, params.resolution);
    }
    Ok((a, b))
}

fn add_balance_shell(m: &mut DiscreteMeasure, target: f64, radius: f64, resolution: usize) {
    let dirs = shell_directions(m.dim(), resolution);
    let k = dirs.len();
    let delta = target - m.total_mass();
    let mut partial = m.total_mass();
    for u in dirs.iter().take(k - 1) {
        let w = delta / k as f64;
        m.push_atom(Atom {
            point: u.scale(radius),
            weight: w,
        });
        partial += w;
    }
    // last weight absorbs rounding so the running sum lands exactly on target
    let mut w = target - partial;
    for _ in 0..64 {
        let s = partial + w;
        if s == target {
            break;
        }
        w = if s < target {
            w.next_up()
        } else {
            w.next_down()
        };
    }
    m.push_atom(Atom {
        point: dirs[k - 1].scale(radius),
        weight: w,
    });
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn pareto_circle(alpha: f64, mass: f64) -> HomogeneousMeasure {
        HomogeneousMeasure::spherical(2, alpha, mass).unwrap()
    }

    fn remark_source() -> HomogeneousMeasure {
        HomogeneousMeasure::new(
            2,
            1.0,
            AngularPart::Density {
                density: AngularDensity::CosCubedRight,
                resolution: 64,
            },
            4.0 / 3.0,
            true,
        )
        .unwrap()
    }

    #[test]
    fn annulus_closed_forms() {
        let m = pareto_circle(1.0, 1.0);
        assert_eq!(m.mass_annulus(1.0, f64::INFINITY).unwrap(), 1.0);
        assert_relative_eq!(m.mass_annulus(2.0, 4.0).unwrap(), 0.25, epsilon = 1e-15);
        let d = DiscreteMeasure::from_pairs(2, vec![(vec![1.0, 0.0], 0.5), (vec![3.0, 0.0], 2.0)])
            .unwrap();
        assert_eq!(d.mass_annulus(2.0, f64::INFINITY).unwrap(), 2.0);
    }

    #[test]
    fn annulus_rejects_origin() {
        let m = pareto_circle(1.0, 1.0);
        assert_eq!(m.mass_annulus(0.0, 1.0), Err(Error::TouchesOrigin(0.0)));
        assert!(m.mass_annulus(-1.0, 1.0).is_err());
    }

    #[test]
    fn origin_atoms_are_rejected() {
        let r = DiscreteMeasure::from_pairs(2, vec![(vec![0.0, 0.0], 1.0)]);
        assert!(matches!(r, Err(Error::InvalidMeasure(_))));
        let r = DiscreteMeasure::from_pairs(1, vec![(vec![1.0], 0.0)]);
        assert!(r.is_err());
        assert!(Point::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn homogeneity_of_annuli() {
        for alpha in [0.5, 1.0, 2.5] {
            let m = pareto_circle(alpha, 1.7);
            for lambda in [0.5, 2.0, 10.0] {
                let base = m.mass_annulus(1.0, 3.0).unwrap();
                let scaled = m.mass_annulus(lambda, 3.0 * lambda).unwrap();
                assert_relative_eq!(scaled, lambda.powf(-alpha) * base, max_relative = 1e-14);
            }
        }
    }

    #[test]
    fn cone_masses() {
        let m = pareto_circle(1.0, 1.0);
        for eps in [0.01, 0.5, 0.99] {
            let c = Cone::new(Point::new(vec![0.3, -2.0]).unwrap(), eps).unwrap();
            assert!(m.mass_cone(&c).unwrap().infinite);
            assert_relative_eq!(
                m.mass_cone(&c).unwrap().cap_mass,
                eps.acos() / PI,
                max_relative = 1e-12
            );
        }
        let atom = HomogeneousMeasure::new(
            2,
            1.0,
            AngularPart::Discrete(vec![(Point::unit(2, 0), 1.0)]),
            1.0,
            false,
        )
        .unwrap();
        let c = Cone::new(Point::unit(2, 0).scale(-1.0), 0.5).unwrap();
        assert_eq!(
            atom.mass_cone(&c).unwrap(),
            ConeMass {
                cap_mass: 0.0,
                infinite: false
            }
        );
        let c = Cone::new(Point::unit(2, 0), 0.1).unwrap();
        assert!(remark_source().mass_cone(&c).unwrap().infinite);
    }

    #[test]
    fn cone_mass_ignores_direction_scale() {
        let m = remark_source();
        let a = Cone::new(Point::new(vec![1.0, 1.0]).unwrap(), 0.3).unwrap();
        let b = Cone::new(Point::new(vec![7.0, 7.0]).unwrap(), 0.3).unwrap();
        assert_eq!(m.mass_cone(&a).unwrap(), m.mass_cone(&b).unwrap());
    }

    #[test]
    fn quadrature_total_is_exact() {
        let m = pareto_circle(1.0, 1.0);
        let d = m
            .discretize(1.0, 2.0, &Discretization::quadrature(16))
            .unwrap();
        assert_eq!(d.len(), 256);
        assert!((d.total_mass() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn sphere_quadrature_total() {
        let m = HomogeneousMeasure::spherical(3, 2.0, 1.0).unwrap();
        let d = m
            .discretize(1.0, 2.0, &Discretization::quadrature(6))
            .unwrap();
        assert_eq!(d.len(), 2 * 36 * 6);
        assert!((d.total_mass() - 0.75).abs() < 1e-12);
    }

    #[test]
    fn monte_carlo_is_seeded() {
        let m = pareto_circle(1.0, 1.0);
        let p = Discretization::monte_carlo(10_000, 42);
        let a = m.discretize(1.0, 5.0, &p).unwrap();
        let b = m.discretize(1.0, 5.0, &p).unwrap();
        assert_eq!(a, b);
        let c = m
            .discretize(1.0, 5.0, &Discretization::monte_carlo(10_000, 43))
            .unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn resolution_zero_rejected() {
        let m = pareto_circle(1.0, 1.0);
        assert_eq!(
            m.discretize(1.0, 2.0, &Discretization::quadrature(0)),
            Err(Error::BadResolution)
        );
    }

    #[test]
    fn balance_bookkeeping() {
        let mu = DiscreteMeasure::from_pairs(1, vec![(vec![1.0], 1.0), (vec![-2.0], 2.0)]).unwrap();
        let nu = DiscreteMeasure::from_pairs(1, vec![(vec![3.0], 5.0)]).unwrap();
        let p = Discretization::quadrature(4);
        let (a, b) =
            truncate_and_balance(MeasureRef::Discrete(&mu), MeasureRef::Discrete(&nu), 2, &p)
                .unwrap();
        assert_eq!(a.total_mass(), b.total_mass());
        assert_eq!(b, nu);
        let added: Vec<_> = a.atoms()[2..].to_vec();
        assert_eq!(added.len(), 2);
        assert!(added.iter().all(|at| at.point.norm() == 0.25));
        assert_relative_eq!(
            added.iter().map(|at| at.weight).sum::<f64>(),
            2.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn balance_identity_adds_nothing() {
        let mu = DiscreteMeasure::from_pairs(2, vec![(vec![1.0, 1.0], 0.1), (vec![2.0, 0.0], 0.7)])
            .unwrap();
        let (a, b) = truncate_and_balance(
            MeasureRef::Discrete(&mu),
            MeasureRef::Discrete(&mu),
            3,
            &Discretization::quadrature(8),
        )
        .unwrap();
        assert_eq!(a, mu);
        assert_eq!(b, mu);
    }

    #[test]
    fn balance_pareto_pair() {
        // masses on (1, 1]: truncation at 1/n = 1 with r_hi = 2 gives angular_mass/2 each
        let mu = pareto_circle(1.0, 1.0);
        let nu = pareto_circle(1.0, 2.0);
        let mut p = Discretization::quadrature(8);
        p.r_hi = Some(f64::INFINITY);
        assert!(truncate_and_balance(
            MeasureRef::Homogeneous(&mu),
            MeasureRef::Homogeneous(&nu),
            1,
            &p
        )
        .is_err());
        p.r_hi = Some(1e12);
        let (a, b) = truncate_and_balance(
            MeasureRef::Homogeneous(&mu),
            MeasureRef::Homogeneous(&nu),
            1,
            &p,
        )
        .unwrap();
        assert_eq!(a.total_mass(), b.total_mass());
        let balance: f64 = a
            .atoms()
            .iter()
            .filter(|at| at.point.norm() < 0.6)
            .map(|at| at.weight)
            .sum();
        assert_relative_eq!(balance, 1.0, max_relative = 1e-9);
    }

    #[test]
    fn empty_truncation() {
        let mu = DiscreteMeasure::from_pairs(1, vec![(vec![0.1], 1.0)]).unwrap();
        let r = truncate_and_balance(
            MeasureRef::Discrete(&mu),
            MeasureRef::Discrete(&mu),
            2,
            &Discretization::quadrature(4),
        );
        assert_eq!(r, Err(Error::EmptyTruncation));
    }
}
