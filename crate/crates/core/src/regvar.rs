//! Regularly varying samplers, rescaling, and the tail-coupling experiment.
//!
//! A model draws `X = R·Θ` with `Θ` from an angular law and `R` Pareto(α),
//! optionally with tail `P(R > r) = r^{-α} / (1 + log r)`. With the
//! auxiliary function `b`, `t·P(X/b(t) ∈ ·)` converges to the exponent
//! measure: the same angular law with `α r^{-α-1} dr` and angular mass 1.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::measures::{
    shell_directions, Atom, Cone, DiscreteMeasure, Discretization, HomogeneousMeasure, MeasureRef,
    Point, RadialMass,
};
use crate::monotone::GradientMap;
use crate::transport::kdtree::KdTree;
use crate::transport::{solve_zero_coupling, SupportSet, ZeroCoupling};

/// Increment of the seed splitting rule `seed_k = master ⊕ k·GOLDEN`.
pub const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
pub const DEFAULT_MASTER_SEED: u64 = 0xC0FFEE;
/// Atoms closer to the origin than this are dropped after rescaling.
const MIN_RADIUS: f64 = 1e-12;

pub fn split_seed(master: u64, k: u64) -> u64 {
    master ^ k.wrapping_mul(GOLDEN)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SlowlyVarying {
    None,
    /// Extra factor `1/(1 + log r)` in the radial tail.
    Log,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RVModel {
    exponent: HomogeneousMeasure,
    slowly_varying: SlowlyVarying,
}

impl RVModel {
    /// Uses the angular law and tail index of `shape`; its angular mass is
    /// irrelevant since directions are drawn from the normalised law.
    pub fn new(shape: &HomogeneousMeasure, slowly_varying: SlowlyVarying) -> Result<Self> {
        let exponent = HomogeneousMeasure::new(
            shape.dim(),
            shape.alpha(),
            shape.angular().clone(),
            1.0,
            shape.smooth(),
        )?;
        Ok(RVModel {
            exponent,
            slowly_varying,
        })
    }

    pub fn spherical(dim: usize, alpha: f64) -> Result<Self> {
        Self::new(
            &HomogeneousMeasure::spherical(dim, alpha, 1.0)?,
            SlowlyVarying::None,
        )
    }

    pub fn dim(&self) -> usize {
        self.exponent.dim()
    }

    pub fn alpha(&self) -> f64 {
        self.exponent.alpha()
    }

    pub fn slowly_varying(&self) -> SlowlyVarying {
        self.slowly_varying
    }

    /// Limit measure of `t·P(X/b(t) ∈ ·)`.
    pub fn exponent_measure(&self) -> &HomogeneousMeasure {
        &self.exponent
    }

    /// `P(R > r)` for `r ≥ 1`.
    pub fn radial_tail(&self, r: f64) -> f64 {
        if r <= 1.0 {
            return 1.0;
        }
        let p = r.powf(-self.alpha());
        match self.slowly_varying {
            SlowlyVarying::None => p,
            SlowlyVarying::Log => p / (1.0 + r.ln()),
        }
    }

    /// Radius with `P(R > r) = u`, `u ∈ (0, 1]`.
    pub fn radial_quantile(&self, u: f64) -> f64 {
        let a = self.alpha();
        match self.slowly_varying {
            SlowlyVarying::None => u.powf(-1.0 / a),
            SlowlyVarying::Log => {
                // solve α s + ln(1 + s) = −ln u for s = ln r by Newton; the
                // left side is increasing and concave, so iterates from the
                // pure-Pareto guess decrease monotonically to the root
                let target = -u.ln();
                let mut s = target / a;
                for _ in 0..100 {
                    let f = a * s + (1.0 + s).ln() - target;
                    let step = f / (a + 1.0 / (1.0 + s));
                    s -= step;
                    if step.abs() <= 1e-15 * (1.0 + s) {
                        break;
                    }
                }
                s.exp()
            }
        }
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        // 1 − U lies in (0, 1]
        let u = 1.0 - rng.random::<f64>();
        let r = self.radial_quantile(u);
        self.exponent.sample_direction(rng).scale(r)
    }
}

/// `n` i.i.d. draws with weight `1/n` each.
pub fn sample(model: &RVModel, n: usize, seed: u64) -> Result<DiscreteMeasure> {
    sample_stream(model, n, seed, 0)
}

fn sample_stream(model: &RVModel, n: usize, seed: u64, stream: u64) -> Result<DiscreteMeasure> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "sample size must be positive".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let w = 1.0 / n as f64;
    let atoms = (0..n)
        .map(|_| Atom {
            point: model.draw(&mut rng),
            weight: w,
        })
        .collect();
    Ok(
        DiscreteMeasure::new(model.dim(), atoms)?.with_meta(crate::measures::Provenance {
            truncation_radius: None,
            sample_size: Some(n),
            seed: Some(seed),
            dropped: 0,
        }),
    )
}

/// Auxiliary function `b` with `t·P(‖X‖ > b(t)) ≈ 1`.
#[derive(Clone, Debug, PartialEq)]
pub enum Auxiliary {
    /// `b(t) = t^{1/α}`, exact for Pareto radii.
    Closed { alpha: f64 },
    /// Empirical `(1 − 1/t)`-quantile of a calibration sample of norms.
    Empirical { sorted_norms: Vec<f64> },
}

impl Auxiliary {
    /// Closed form for exact Pareto models; otherwise calibrated on
    /// `calibration_size` fresh draws.
    pub fn for_model(model: &RVModel, calibration_size: usize, seed: u64) -> Result<Self> {
        match model.slowly_varying {
            SlowlyVarying::None => Ok(Auxiliary::Closed {
                alpha: model.alpha(),
            }),
            SlowlyVarying::Log => {
                let s = sample_stream(model, calibration_size, seed, 7)?;
                let mut sorted_norms: Vec<f64> = s.atoms().iter().map(|a| a.point.norm()).collect();
                sorted_norms.sort_by(f64::total_cmp);
                Ok(Auxiliary::Empirical { sorted_norms })
            }
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Auxiliary::Closed { alpha } => t.powf(1.0 / alpha),
            Auxiliary::Empirical { sorted_norms } => {
                let n = sorted_norms.len();
                let p = (1.0 - 1.0 / t).clamp(0.0, 1.0);
                let k = ((p * n as f64).ceil() as usize).clamp(1, n);
                sorted_norms[k - 1]
            }
        }
    }
}

/// Atoms `x/b`, weights multiplied by `t`; atoms closer to the origin than
/// `1e−12` are dropped and counted in the provenance.
pub fn rescaled_empirical(s: &DiscreteMeasure, t: f64, b: f64) -> Result<DiscreteMeasure> {
    if !(t > 0.0) || !(b > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "t = {t} and b = {b} must be positive"
        )));
    }
    let mut kept = Vec::with_capacity(s.len());
    let mut dropped = 0;
    for a in s.atoms() {
        let p = a.point.scale(1.0 / b);
        if p.norm() < MIN_RADIUS {
            dropped += 1;
        } else {
            kept.push(Atom {
                point: p,
                weight: a.weight * t,
            });
        }
    }
    let mut meta = s.meta.clone().unwrap_or_default();
    meta.dropped += dropped;
    Ok(DiscreteMeasure::new(s.dim(), kept)?.with_meta(meta))
}

/// `B(t) = diag(b₁(t)·1_d, b₂(t)·1_d)` with exponents `E = diag(1/α₁, 1/α₂)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalingMatrix {
    pub b1: f64,
    pub b2: f64,
    pub alpha1: f64,
    pub alpha2: f64,
}

impl ScalingMatrix {
    pub fn new(b1: f64, b2: f64, alpha1: f64, alpha2: f64) -> Result<Self> {
        if !(b1 > 0.0 && b2 > 0.0 && alpha1 > 0.0 && alpha2 > 0.0) {
            return Err(Error::InvalidArgument(
                "scaling entries and exponents must be positive".into(),
            ));
        }
        Ok(ScalingMatrix {
            b1,
            b2,
            alpha1,
            alpha2,
        })
    }

    /// `B^{-1}(x, y) = (x/b₁, y/b₂)`.
    pub fn apply_inverse(&self, x: &Point, y: &Point) -> (Point, Point) {
        (x.scale(1.0 / self.b1), y.scale(1.0 / self.b2))
    }

    /// `λ^E = diag(λ^{1/α₁}, λ^{1/α₂})` as a pair of factors.
    pub fn power(&self, lambda: f64) -> (f64, f64) {
        (
            lambda.powf(1.0 / self.alpha1),
            lambda.powf(1.0 / self.alpha2),
        )
    }
}

/// `(x, y) ↦ (x/b₁, y/b₂)`: the graph of `x ↦ b₂⁻¹ ∂ψ(b₁ x)`.
pub fn scaled_subdifferential(s: &SupportSet, b1: f64, b2: f64) -> Result<SupportSet> {
    if !(b1 > 0.0 && b2 > 0.0) {
        return Err(Error::InvalidArgument("b1 and b2 must be positive".into()));
    }
    let pairs = s
        .pairs()
        .iter()
        .map(|(x, y)| (x.scale(1.0 / b1), y.scale(1.0 / b2)))
        .collect();
    SupportSet::new(s.dim(), pairs)
}

/// Pairs `(x, map(x))` for the given points.
pub fn graph_support(map: &dyn GradientMap, points: &[Point]) -> Result<SupportSet> {
    let pairs = points
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let y = map.apply(x).ok_or_else(|| Error::DomainViolation {
                index: i,
                detail: format!("{:?}", x.coords()),
            })?;
            Ok((x.clone(), y))
        })
        .collect::<Result<Vec<_>>>()?;
    SupportSet::new(map.dim(), pairs)
}

/// Largest `‖map(x) − y‖ / max(1, ‖y‖)` over the pairs of `s`.
pub fn graph_deviation(s: &SupportSet, map: &dyn GradientMap) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for (i, (x, y)) in s.pairs().iter().enumerate() {
        let g = map.apply(x).ok_or_else(|| Error::DomainViolation {
            index: i,
            detail: format!("{:?}", x.coords()),
        })?;
        worst = worst.max(g.sub(y).norm() / y.norm().max(1.0));
    }
    Ok(worst)
}

/// Product window `{r_lo ≤ ‖x‖ ≤ r_hi, ‖y‖ ≤ y_max}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Window {
    pub r_lo: f64,
    pub r_hi: f64,
    pub y_max: f64,
}

impl Window {
    pub fn contains(&self, x: &Point, y: &Point) -> bool {
        let r = x.norm();
        r >= self.r_lo && r <= self.r_hi && y.norm() <= self.y_max
    }
}

/// Symmetric Hausdorff distance in `R^{2d}` between `S ∩ W` and `T ∩ W`:
/// `+∞` if exactly one restriction is empty, 0 if both are.
pub fn fell_window_distance(s: &SupportSet, t: &SupportSet, w: &Window) -> f64 {
    let restrict = |u: &SupportSet| -> Vec<Vec<f64>> {
        u.pairs()
            .iter()
            .filter(|(x, y)| w.contains(x, y))
            .map(|(x, y)| x.coords().iter().chain(y.coords()).copied().collect())
            .collect()
    };
    let (a, b) = (restrict(s), restrict(t));
    match (a.is_empty(), b.is_empty()) {
        (true, true) => return 0.0,
        (true, false) | (false, true) => return f64::INFINITY,
        _ => {}
    }
    directed_hausdorff(&a, &b).max(directed_hausdorff(&b, &a))
}

/// `max_{p ∈ a} min_{q ∈ b} ‖p − q‖`.
fn directed_hausdorff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let refs: Vec<&[f64]> = b.iter().map(|v| v.as_slice()).collect();
    let tree = KdTree::new(b[0].len(), &refs);
    a.iter()
        .map(|p| {
            let k = tree.nearest(p, 1)[0];
            b[k].iter()
                .zip(p)
                .map(|(u, v)| (u - v) * (u - v))
                .sum::<f64>()
                .sqrt()
        })
        .fold(0.0, f64::max)
}

fn ramp(z: f64, s: f64) -> f64 {
    (z / s).clamp(0.0, 1.0)
}

/// Bounded-Lipschitz surrogate distance between two measures on `R^D`.
///
/// `Σ_k e^{−r_k} · BL_k / (1 + BL_k)`, where `BL_k` is the largest
/// `|μ(f) − ν(f)|` over a fixed dictionary of test functions living on
/// `{‖x‖ > r_k}`: annulus and cone indicators with edges smoothed at scale
/// `r_k/10`. Since `z ↦ z/(1 + z)` is increasing and subadditive, the result
/// is a pseudo-metric.
pub fn m0_distance(mu: &DiscreteMeasure, nu: &DiscreteMeasure, r_grid: &[f64]) -> Result<f64> {
    if mu.dim() != nu.dim() {
        return Err(Error::DimensionMismatch {
            expected: mu.dim(),
            found: nu.dim(),
        });
    }
    if r_grid.is_empty() || r_grid[0] <= 0.0 || r_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(
            "r_grid must be positive and increasing".into(),
        ));
    }
    let dim = mu.dim();
    let dirs: Vec<Point> = if dim == 2 {
        shell_directions(2, 8)
    } else {
        (0..dim)
            .flat_map(|i| [Point::unit(dim, i), Point::unit(dim, i).scale(-1.0)])
            .collect()
    };
    let mut total = 0.0;
    for &r in r_grid {
        let s = r / 10.0;
        let mut tests: Vec<Box<dyn Fn(&Point) -> f64>> = Vec::new();
        tests.push(Box::new(move |x: &Point| ramp(x.norm() - r, s)));
        for j in 0..6 {
            let a = r * 2f64.powi(j);
            let b = 2.0 * a;
            tests.push(Box::new(move |x: &Point| {
                let n = x.norm();
                ramp(n - a, s) * ramp(b - n, s)
            }));
        }
        for u in &dirs {
            let u = u.clone();
            tests.push(Box::new(move |x: &Point| {
                let n = x.norm();
                if n == 0.0 {
                    return 0.0;
                }
                ramp(n - r, s) * ramp(x.dot(&u) / n - 0.5, 0.1)
            }));
        }
        let integrate = |m: &DiscreteMeasure, f: &dyn Fn(&Point) -> f64| {
            m.atoms()
                .iter()
                .fold(0.0, |acc, a| acc + a.weight * f(&a.point))
        };
        let bl = tests
            .iter()
            .map(|f| (integrate(mu, f.as_ref()) - integrate(nu, f.as_ref())).abs())
            .fold(0.0, f64::max);
        total += (-r).exp() * bl / (1.0 + bl);
    }
    Ok(total)
}

/// Test set `{r_lo ≤ ‖x‖ < r_hi}`, optionally intersected with a cone.
#[derive(Clone, Debug, PartialEq)]
pub struct TestSet {
    pub r_lo: f64,
    pub r_hi: f64,
    pub cone: Option<Cone>,
}

impl TestSet {
    fn mass(&self, m: MeasureRef<'_>) -> Result<f64> {
        match (m, &self.cone) {
            (MeasureRef::Discrete(d), None) => d.mass_annulus(self.r_lo, self.r_hi),
            (MeasureRef::Discrete(d), Some(c)) => d.mass_sector(c, self.r_lo, self.r_hi),
            (MeasureRef::Homogeneous(h), None) => h.mass_annulus(self.r_lo, self.r_hi),
            (MeasureRef::Homogeneous(h), Some(c)) => h.mass_sector(c, self.r_lo, self.r_hi),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PortmanteauReport {
    /// `errors[s][k] = |μ_k(A_s) − μ(A_s)|`.
    pub errors: Vec<Vec<f64>>,
    /// Largest error of the last sequence element.
    pub last_max: f64,
}

pub fn portmanteau_check(
    seq: &[DiscreteMeasure],
    target: MeasureRef<'_>,
    sets: &[TestSet],
) -> Result<PortmanteauReport> {
    let mut errors = Vec::with_capacity(sets.len());
    for set in sets {
        if !(set.r_lo > 0.0) {
            return Err(Error::TouchesOrigin(set.r_lo));
        }
        let want = set.mass(target)?;
        errors.push(
            seq.iter()
                .map(|m| Ok((set.mass(MeasureRef::Discrete(m))? - want).abs()))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    let last_max = errors
        .iter()
        .filter_map(|e| e.last().copied())
        .fold(0.0, f64::max);
    Ok(PortmanteauReport { errors, last_max })
}

/// Product annulus `{x_lo ≤ ‖x‖ < x_hi, y_lo ≤ ‖y‖ < y_hi}`; the origin has
/// norm 0.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProductAnnulus {
    pub x: (f64, f64),
    pub y: (f64, f64),
}

impl ProductAnnulus {
    /// Image under `(x, y) ↦ (a·x, b·y)`.
    pub fn scaled(&self, a: f64, b: f64) -> ProductAnnulus {
        ProductAnnulus {
            x: (a * self.x.0, a * self.x.1),
            y: (b * self.y.0, b * self.y.1),
        }
    }

    pub fn contains(&self, x: &Point, y: &Point) -> bool {
        let (rx, ry) = (x.norm(), y.norm());
        rx >= self.x.0 && rx < self.x.1 && ry >= self.y.0 && ry < self.y.1
    }
}

/// `γ(A)` for a product annulus.
pub fn coupling_mass(g: &ZeroCoupling, a: &ProductAnnulus) -> f64 {
    g.entries().iter().fold(0.0, |acc, e| {
        if a.contains(&g.source_point(e.src), &g.target_point(e.dst)) {
            acc + e.mass
        } else {
            acc
        }
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct HomogeneityRow {
    pub lambda: f64,
    pub annulus: ProductAnnulus,
    /// `γ(λ^{−E} A)`.
    pub scaled_mass: f64,
    /// `λ · γ(A)`.
    pub expected: f64,
    pub rel_error: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CouplingHomogeneityReport {
    pub rows: Vec<HomogeneityRow>,
    pub max_rel_error: f64,
    pub support_ok: bool,
    pub holds: bool,
}

/// Settings of [`check_coupling_homogeneity`].
#[derive(Clone, Debug, PartialEq)]
pub struct HomogeneityCheck {
    pub alpha1: f64,
    pub alpha2: f64,
    pub lambdas: Vec<f64>,
    pub annuli: Vec<ProductAnnulus>,
    /// Relative tolerance on the mass law.
    pub tol: f64,
    /// Relative Hausdorff tolerance of the support part.
    pub support_tol: f64,
    /// Source-norm window of the support part.
    pub support_window: Option<(f64, f64)>,
}

/// Checks `γ(λ^{−E}·) = λγ` on product annuli and `λ^E supp γ = supp γ`
/// with `E = diag(1/α₁, 1/α₂)`.
pub fn check_coupling_homogeneity(
    g: &ZeroCoupling,
    c: &HomogeneityCheck,
) -> Result<CouplingHomogeneityReport> {
    if g.entries().is_empty() {
        return Err(Error::EmptySupport);
    }
    let mut rows = Vec::new();
    for &lambda in &c.lambdas {
        let (a, b) = (lambda.powf(-1.0 / c.alpha1), lambda.powf(-1.0 / c.alpha2));
        for ann in &c.annuli {
            let scaled_mass = coupling_mass(g, &ann.scaled(a, b));
            let expected = lambda * coupling_mass(g, ann);
            let rel_error = if expected == scaled_mass {
                0.0
            } else if expected == 0.0 {
                f64::INFINITY
            } else {
                (scaled_mass - expected).abs() / expected
            };
            rows.push(HomogeneityRow {
                lambda,
                annulus: *ann,
                scaled_mass,
                expected,
                rel_error,
            });
        }
    }
    let max_rel_error = rows.iter().map(|r| r.rel_error).fold(0.0, f64::max);
    let support_ok = crate::proper::check_homogeneous_support(
        &g.support(),
        (1.0 / c.alpha1, 1.0 / c.alpha2),
        &c.lambdas,
        c.support_tol,
        c.support_window,
    )?;
    Ok(CouplingHomogeneityReport {
        holds: max_rel_error <= c.tol && support_ok,
        rows,
        max_rel_error,
        support_ok,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradientHomogeneityReport {
    pub max_grad_deviation: f64,
    pub max_potential_deviation: Option<f64>,
    pub holds: bool,
}

/// Checks `∇ψ(λx) = λ^{α₁/α₂} ∇ψ(x)` and, when `potential` is given,
/// `ψ(λx) = λ^{α₁/α₂ + 1} ψ(x)`; deviations are relative to
/// `max(1, ‖∇ψ(x)‖)` and `max(1, |ψ(x)|)`.
pub fn check_gradient_homogeneity(
    grad: &dyn GradientMap,
    potential: Option<&dyn Fn(&Point) -> f64>,
    alphas: (f64, f64),
    points: &[Point],
    lambdas: &[f64],
    tol: f64,
) -> Result<GradientHomogeneityReport> {
    let kappa = alphas.0 / alphas.1;
    let mut worst_g: f64 = 0.0;
    let mut worst_p: f64 = 0.0;
    let outside = |i: usize, x: &Point| Error::DomainViolation {
        index: i,
        detail: format!("{:?}", x.coords()),
    };
    for (i, x) in points.iter().enumerate() {
        let g = grad.apply(x).ok_or_else(|| outside(i, x))?;
        for &lambda in lambdas {
            let xl = x.scale(lambda);
            let gl = grad.apply(&xl).ok_or_else(|| outside(i, &xl))?;
            let dev = gl.sub(&g.scale(lambda.powf(kappa))).norm() / g.norm().max(1.0);
            worst_g = worst_g.max(dev);
            if let Some(psi) = potential {
                let (v, vl) = (psi(x), psi(&xl));
                worst_p = worst_p.max((vl - lambda.powf(kappa + 1.0) * v).abs() / v.abs().max(1.0));
            }
        }
    }
    let max_potential_deviation = potential.map(|_| worst_p);
    let holds = worst_g <= tol && max_potential_deviation.is_none_or(|p| p <= tol);
    Ok(GradientHomogeneityReport {
        max_grad_deviation: worst_g,
        max_potential_deviation,
        holds,
    })
}

/// Settings of [`tail_coupling_experiment`].
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub n: usize,
    pub t_grid: Vec<f64>,
    pub seeds: usize,
    pub master_seed: u64,
    pub window: Window,
    /// Quadrature resolution of the reference coupling.
    pub reference_resolution: usize,
    /// Radii of the smoothed test functions in [`m0_distance`].
    pub m0_grid: Vec<f64>,
}

impl ExperimentConfig {
    pub fn new(n: usize, t_grid: Vec<f64>) -> Self {
        ExperimentConfig {
            n,
            t_grid,
            seeds: 10,
            master_seed: DEFAULT_MASTER_SEED,
            window: Window {
                r_lo: 1.0,
                r_hi: 3.0,
                y_max: 6.0,
            },
            reference_resolution: 128,
            m0_grid: vec![1.0, 2.0, 4.0],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentRow {
    pub t: f64,
    pub seed: u64,
    pub n: usize,
    pub fell_dist: f64,
    pub m0_dist: f64,
    pub left_residual: f64,
    /// Cost of the rescaled plan.
    pub cost: f64,
    /// Pairs of the rescaled plan inside the window.
    pub surviving: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    /// Ordered by `t`, then by seed index.
    pub rows: Vec<ExperimentRow>,
    pub median_fell: Vec<f64>,
    pub median_m0: Vec<f64>,
    /// Reference pairs inside the window.
    pub reference_pairs: usize,
    /// Largest `‖x − y‖` over reference pairs in the window.
    pub reference_offdiagonal: f64,
}

impl ExperimentReport {
    pub fn fell_non_increasing(&self) -> bool {
        self.median_fell.windows(2).all(|w| w[1] <= w[0])
    }
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else if v[n / 2 - 1].is_infinite() || v[n / 2].is_infinite() {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Reference limit coupling: the reservoir solution between quadrature
/// discretizations of both exponent measures on an annulus covering the window.
pub fn reference_coupling(
    p: &RVModel,
    q: &RVModel,
    window: &Window,
    resolution: usize,
) -> Result<ZeroCoupling> {
    let r_lo = 0.5 * window.r_lo;
    let r_hi = 2.0 * window.r_hi.max(window.y_max);
    let params = Discretization::quadrature(resolution);
    let a = p.exponent_measure().discretize(r_lo, r_hi, &params)?;
    let b = q.exponent_measure().discretize(r_lo, r_hi, &params)?;
    solve_zero_coupling(&a, &b, true)
}

/// Pairs `(x/b₁, y/b₂)` with weights `t·mass`.
fn rescale_plan(g: &ZeroCoupling, t: f64, b1: f64, b2: f64) -> Vec<(Point, Point, f64)> {
    g.entries()
        .iter()
        .map(|e| {
            (
                g.source_point(e.src).scale(1.0 / b1),
                g.target_point(e.dst).scale(1.0 / b2),
                t * e.mass,
            )
        })
        .collect()
}

/// Pairs as points of `R^{2d}`.
fn joined(pairs: &[(Point, Point, f64)], dim: usize) -> Result<DiscreteMeasure> {
    let atoms = pairs
        .iter()
        .map(|(x, y, w)| {
            Ok(Atom {
                point: Point::new(x.coords().iter().chain(y.coords()).copied().collect())?,
                weight: *w,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    DiscreteMeasure::new(2 * dim, atoms)
}

/// For every seed: draws `n` points from each model, solves the empirical
/// coupling once (balanced, no reservoir), and for every `t` compares its
/// `B(t)^{-1}`-rescaled support with the reference limit coupling inside the
/// window.
pub fn tail_coupling_experiment(
    p: &RVModel,
    q: &RVModel,
    cfg: &ExperimentConfig,
) -> Result<ExperimentReport> {
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            found: q.dim(),
        });
    }
    if cfg.seeds == 0 || cfg.t_grid.is_empty() {
        return Err(Error::InvalidArgument(
            "need at least one seed and one t".into(),
        ));
    }
    if cfg.t_grid.iter().any(|&t| !(t >= 1.0 && t <= cfg.n as f64)) {
        return Err(Error::InvalidArgument(format!(
            "t values must lie in [1, {}]",
            cfg.n
        )));
    }
    let dim = p.dim();
    let w = cfg.window;
    let reference = reference_coupling(p, q, &w, cfg.reference_resolution)?;
    let ref_pairs: Vec<(Point, Point, f64)> = reference
        .entries()
        .iter()
        .map(|e| {
            (
                reference.source_point(e.src),
                reference.target_point(e.dst),
                e.mass,
            )
        })
        .filter(|(x, y, _)| w.contains(x, y))
        .collect();
    let ref_support = SupportSet::new(
        dim,
        ref_pairs
            .iter()
            .map(|(x, y, _)| (x.clone(), y.clone()))
            .collect(),
    )?;
    let ref_measure = joined(&ref_pairs, dim)?;
    let reference_offdiagonal = ref_pairs
        .iter()
        .map(|(x, y, _)| x.sub(y).norm())
        .fold(0.0, f64::max);

    let per_seed: Vec<Result<Vec<ExperimentRow>>> = (0..cfg.seeds)
        .into_par_iter()
        .map(|k| {
            let seed = split_seed(cfg.master_seed, k as u64);
            let xs = sample_stream(p, cfg.n, seed, 0)?;
            let ys = sample_stream(q, cfg.n, seed, 1)?;
            let aux_p = Auxiliary::for_model(p, 10 * cfg.n, seed)?;
            let aux_q = Auxiliary::for_model(q, 10 * cfg.n, split_seed(seed, 1))?;
            let plan = solve_zero_coupling(&xs, &ys, false)?;
            let left_residual = crate::proper::residual_decomposition(&plan).left_residual;
            let mut rows = Vec::new();
            for &t in &cfg.t_grid {
                let all = rescale_plan(&plan, t, aux_p.eval(t), aux_q.eval(t));
                let cost = all
                    .iter()
                    .fold(0.0, |acc, (x, y, m)| acc + m * x.dist_sq(y));
                let inside: Vec<(Point, Point, f64)> = all
                    .into_iter()
                    .filter(|(x, y, _)| w.contains(x, y))
                    .collect();
                let support = SupportSet::new(
                    dim,
                    inside
                        .iter()
                        .map(|(x, y, _)| (x.clone(), y.clone()))
                        .collect(),
                )?;
                let fell_dist = fell_window_distance(&support, &ref_support, &w);
                let m0_dist = m0_distance(&joined(&inside, dim)?, &ref_measure, &cfg.m0_grid)?;
                rows.push(ExperimentRow {
                    t,
                    seed,
                    n: cfg.n,
                    fell_dist,
                    m0_dist,
                    left_residual: t * left_residual,
                    cost,
                    surviving: inside.len(),
                });
            }
            Ok(rows)
        })
        .collect();
    let per_seed = per_seed.into_iter().collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    let mut median_fell = Vec::new();
    let mut median_m0 = Vec::new();
    for (ti, _) in cfg.t_grid.iter().enumerate() {
        let at_t: Vec<&ExperimentRow> = per_seed.iter().map(|r| &r[ti]).collect();
        median_fell.push(median(
            &at_t.iter().map(|r| r.fell_dist).collect::<Vec<_>>(),
        ));
        median_m0.push(median(&at_t.iter().map(|r| r.m0_dist).collect::<Vec<_>>()));
        rows.extend(at_t.into_iter().cloned());
    }
    Ok(ExperimentReport {
        config: cfg.clone(),
        rows,
        median_fell,
        median_m0,
        reference_pairs: ref_pairs.len(),
        reference_offdiagonal,
    })
}
