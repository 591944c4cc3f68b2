//! Properness of zero-couplings and criteria on measure descriptions.
//!
//! A zero-coupling is proper when no mass is fed from the origin, i.e. its
//! left residual `γ({0} × R^d∖{0})` vanishes.

use std::cmp::Ordering;
use std::f64::consts::PI;
use std::fmt;

use crate::error::{Error, Result};
use crate::measures::{AngularPart, Cone, DiscreteMeasure, HomogeneousMeasure, Point};
use crate::transport::kdtree::KdTree;
use crate::transport::{Endpoint, SupportSet, ZeroCoupling};

/// Default apertures for the cone condition, largest first.
pub const DEFAULT_EPS_GRID: [f64; 5] = [0.5, 0.25, 0.1, 0.05, 0.01];

#[derive(Clone, Debug, PartialEq)]
pub struct Residuals {
    /// Mass fed from the origin, `γ({0} × R^d∖{0})`.
    pub left_residual: f64,
    /// Mass sent to the origin, `γ(R^d∖{0} × {0})`.
    pub right_residual: f64,
    /// `γ({0} × {y_j})` for every target atom.
    pub from_origin: Vec<f64>,
    /// `γ({x_i} × {0})` for every source atom.
    pub to_origin: Vec<f64>,
}

pub fn residual_decomposition(g: &ZeroCoupling) -> Residuals {
    let mut r = Residuals {
        left_residual: 0.0,
        right_residual: 0.0,
        from_origin: vec![0.0; g.targets().len()],
        to_origin: vec![0.0; g.sources().len()],
    };
    for e in g.entries() {
        match (e.src, e.dst) {
            (Endpoint::Origin, Endpoint::Atom(j)) => {
                r.left_residual += e.mass;
                r.from_origin[j] += e.mass;
            }
            (Endpoint::Atom(i), Endpoint::Origin) => {
                r.right_residual += e.mass;
                r.to_origin[i] += e.mass;
            }
            _ => {}
        }
    }
    r
}

/// `left_residual ≤ tol · total mass of the plan`.
pub fn check_proper(g: &ZeroCoupling, tol: f64) -> bool {
    residual_decomposition(g).left_residual <= tol * g.total_mass()
}

/// Finite-mass existence condition `ν(R^d∖{0}) ≤ μ(R^d∖{0}) < ∞`.
pub fn check_finite_mass(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> bool {
    let (a, b) = (mu.total_mass(), nu.total_mass());
    a.is_finite() && b <= a
}

/// One angular cell of a support grid: its direction and, in the plane, the
/// arc it stands for.
struct Cell {
    dir: Point,
    arc: Option<(f64, f64)>,
}

fn support_cells(m: &HomogeneousMeasure, resolution: usize) -> Result<Vec<Cell>> {
    let grid = m.angular_grid(resolution)?;
    let planar_density = matches!(m.angular(), AngularPart::Density { .. }) && m.dim() == 2;
    let h = 2.0 * PI / resolution as f64;
    Ok(grid
        .into_iter()
        .map(|(u, _)| {
            let arc = planar_density.then(|| {
                let c = u.angle();
                (c - 0.5 * h, c + 0.5 * h)
            });
            Cell { dir: u, arc }
        })
        .collect())
}

/// Whether some direction of the cell has positive inner product with `y`.
/// For an arc shorter than π this happens iff an endpoint or the midpoint
/// lies strictly inside the open half-circle around `y`.
fn cell_meets_half_space(cell: &Cell, y: &Point) -> bool {
    match cell.arc {
        None => cell.dir.dot(y) > 0.0,
        Some((a, b)) => {
            let t = y.angle();
            [a, b, 0.5 * (a + b)]
                .iter()
                .any(|&s| (s - t).cos() * y.norm() > 0.0)
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NecessaryReport {
    pub holds: bool,
    pub failing_direction: Option<Point>,
}

/// For every support direction `y` of `ν` on the grid, looks for a support
/// cell of `μ` containing some `x` with `⟨x, y⟩ > 0`.
pub fn check_necessary(
    mu: &HomogeneousMeasure,
    nu: &HomogeneousMeasure,
    resolution: usize,
) -> Result<NecessaryReport> {
    if mu.dim() != nu.dim() {
        return Err(Error::DimensionMismatch {
            expected: mu.dim(),
            found: nu.dim(),
        });
    }
    let cells = support_cells(mu, resolution)?;
    let ys = nu.support_directions(resolution)?;
    if cells.is_empty() || ys.is_empty() {
        return Err(Error::EmptySupport);
    }
    for y in ys {
        if !cells.iter().any(|c| cell_meets_half_space(c, &y)) {
            return Ok(NecessaryReport {
                holds: false,
                failing_direction: Some(y),
            });
        }
    }
    Ok(NecessaryReport {
        holds: true,
        failing_direction: None,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CriterionStatus {
    Holds,
    Fails,
    /// No aperture in the grid works, but the open half-space still carries
    /// mass, so a smaller aperture might.
    Undetermined,
}

impl fmt::Display for CriterionStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CriterionStatus::Holds => "holds",
            CriterionStatus::Fails => "fails",
            CriterionStatus::Undetermined => "undetermined",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConeDirectionReport {
    pub direction: Point,
    /// Largest aperture in the grid whose cone has infinite `μ`-mass.
    pub eps: Option<f64>,
    /// Angular mass of that cone, or of the open half-space if none works.
    pub cap_mass: f64,
    pub status: CriterionStatus,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConeConditionReport {
    pub holds: bool,
    pub status: CriterionStatus,
    pub directions: Vec<ConeDirectionReport>,
}

/// For every support direction `y` of `ν`, searches `eps_grid` for an
/// aperture `ε` with `μ(H₊(y, ε)) = ∞`, where `H₊(y, ε)` is the cone of
/// points making angle cosine above `ε` with `y`.
pub fn check_cone_condition(
    mu: &HomogeneousMeasure,
    nu: &HomogeneousMeasure,
    eps_grid: &[f64],
    resolution: usize,
) -> Result<ConeConditionReport> {
    if mu.dim() != nu.dim() {
        return Err(Error::DimensionMismatch {
            expected: mu.dim(),
            found: nu.dim(),
        });
    }
    let mut eps_sorted = eps_grid.to_vec();
    eps_sorted.sort_by(|a, b| b.total_cmp(a));
    let mut directions = Vec::new();
    for y in nu.support_directions(resolution)? {
        let mut found = None;
        for &eps in &eps_sorted {
            let m = mu.mass_cone(&Cone::new(y.clone(), eps)?)?;
            if m.infinite {
                found = Some((eps, m.cap_mass));
                break;
            }
        }
        let report = match found {
            Some((eps, cap_mass)) => ConeDirectionReport {
                direction: y,
                eps: Some(eps),
                cap_mass,
                status: CriterionStatus::Holds,
            },
            None => {
                let half = mu.mass_cone(&Cone::new(y.clone(), f64::MIN_POSITIVE)?)?;
                let status = if half.infinite {
                    CriterionStatus::Undetermined
                } else {
                    CriterionStatus::Fails
                };
                ConeDirectionReport {
                    direction: y,
                    eps: None,
                    cap_mass: half.cap_mass,
                    status,
                }
            }
        };
        directions.push(report);
    }
    let status = if directions
        .iter()
        .any(|d| d.status == CriterionStatus::Fails)
    {
        CriterionStatus::Fails
    } else if directions
        .iter()
        .any(|d| d.status == CriterionStatus::Undetermined)
    {
        CriterionStatus::Undetermined
    } else {
        CriterionStatus::Holds
    };
    Ok(ConeConditionReport {
        holds: status == CriterionStatus::Holds,
        status,
        directions,
    })
}

/// Finite surrogate of the cone property `(λ^α x, λ^β y) ∈ supp γ`.
///
/// Every pair whose scaled source norm falls inside `window` (all pairs when
/// `None`) must have a pair of `S` within `tol · max(1, ‖(λ^α x, λ^β y)‖)` in
/// the Euclidean norm of `R^{2d}`.
pub fn check_homogeneous_support(
    s: &SupportSet,
    alphas: (f64, f64),
    lambdas: &[f64],
    tol: f64,
    window: Option<(f64, f64)>,
) -> Result<bool> {
    if s.is_empty() {
        return Err(Error::EmptySupport);
    }
    let joined: Vec<Vec<f64>> = s
        .pairs()
        .iter()
        .map(|(x, y)| x.coords().iter().chain(y.coords()).copied().collect())
        .collect();
    let refs: Vec<&[f64]> = joined.iter().map(|v| v.as_slice()).collect();
    let tree = KdTree::new(2 * s.dim(), &refs);
    for &lambda in lambdas {
        let (fx, fy) = (lambda.powf(alphas.0), lambda.powf(alphas.1));
        for (x, y) in s.pairs() {
            let xs = x.scale(fx);
            if let Some((lo, hi)) = window {
                let r = xs.norm();
                if r < lo || r > hi {
                    continue;
                }
            }
            let q: Vec<f64> = xs
                .coords()
                .iter()
                .chain(y.scale(fy).coords())
                .copied()
                .collect();
            let norm = q.iter().map(|c| c * c).sum::<f64>().sqrt();
            let k = tree.nearest(&q, 1)[0];
            let d = joined[k]
                .iter()
                .zip(&q)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            if d > tol * norm.max(1.0) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// A mass on the extended half-line `[0, ∞]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ExtMass {
    Finite(f64),
    Infinite,
}

impl PartialOrd for ExtMass {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self, other) {
            (ExtMass::Infinite, ExtMass::Infinite) => Some(Ordering::Equal),
            (ExtMass::Infinite, ExtMass::Finite(_)) => Some(Ordering::Greater),
            (ExtMass::Finite(_), ExtMass::Infinite) => Some(Ordering::Less),
            (ExtMass::Finite(a), ExtMass::Finite(b)) => a.partial_cmp(b),
        }
    }
}

impl fmt::Display for ExtMass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtMass::Finite(v) => write!(f, "{v}"),
            ExtMass::Infinite => f.write_str("inf"),
        }
    }
}

/// Masses of `R_{>0}` and `R_{<0}` for a measure on the line.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HalfLineMasses {
    pub pos: ExtMass,
    pub neg: ExtMass,
}

impl HalfLineMasses {
    pub fn of_discrete(m: &DiscreteMeasure) -> Result<Self> {
        if m.dim() != 1 {
            return Err(Error::InvalidArgument("half-line masses need d = 1".into()));
        }
        let (mut pos, mut neg) = (0.0, 0.0);
        for a in m.atoms() {
            if a.point.coords()[0] > 0.0 {
                pos += a.weight;
            } else {
                neg += a.weight;
            }
        }
        Ok(HalfLineMasses {
            pos: ExtMass::Finite(pos),
            neg: ExtMass::Finite(neg),
        })
    }

    /// A homogeneous measure on the line has infinite mass on every side
    /// that carries angular weight.
    pub fn of_homogeneous(m: &HomogeneousMeasure) -> Result<Self> {
        if m.dim() != 1 {
            return Err(Error::InvalidArgument("half-line masses need d = 1".into()));
        }
        let side = |sign: f64| -> Result<ExtMass> {
            let c = m.mass_cone(&Cone::new(Point::new(vec![sign])?, 0.5)?)?;
            Ok(if c.infinite {
                ExtMass::Infinite
            } else {
                ExtMass::Finite(0.0)
            })
        };
        Ok(HalfLineMasses {
            pos: side(1.0)?,
            neg: side(-1.0)?,
        })
    }
}

/// `μ(R_{>0}) ≥ ν(R_{>0})` and `μ(R_{<0}) ≥ ν(R_{<0})` in the extended reals.
pub fn check_1d_criterion(mu: &HalfLineMasses, nu: &HalfLineMasses) -> bool {
    mu.pos >= nu.pos && mu.neg >= nu.neg
}

#[derive(Clone, Debug, PartialEq)]
pub struct HalfSpaceRow {
    pub direction: Point,
    pub mu_mass: ExtMass,
    pub nu_mass: ExtMass,
    pub holds: bool,
}

/// Experimental: compares `μ(⟨x, u⟩ > 0)` with `ν(⟨x, u⟩ > 0)` along grid
/// directions `u`, the half-space version of the one-dimensional criterion.
/// Whether this is sufficient in d ≥ 2 is not known; the rows are reported
/// and never used as a decision.
pub fn half_space_probe(
    mu: &HomogeneousMeasure,
    nu: &HomogeneousMeasure,
    resolution: usize,
) -> Result<Vec<HalfSpaceRow>> {
    if mu.dim() != nu.dim() {
        return Err(Error::DimensionMismatch {
            expected: mu.dim(),
            found: nu.dim(),
        });
    }
    let mass = |m: &HomogeneousMeasure, u: &Point| -> Result<ExtMass> {
        let c = m.mass_cone(&Cone::new(u.clone(), f64::MIN_POSITIVE)?)?;
        Ok(if c.infinite {
            ExtMass::Infinite
        } else {
            ExtMass::Finite(0.0)
        })
    };
    crate::measures::shell_directions(mu.dim(), resolution)
        .into_iter()
        .map(|u| {
            let (a, b) = (mass(mu, &u)?, mass(nu, &u)?);
            Ok(HalfSpaceRow {
                direction: u,
                mu_mass: a,
                nu_mass: b,
                holds: a >= b,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::AngularDensity;
    use crate::transport::trivial_zero_coupling;

    fn line(points: &[(f64, f64)]) -> DiscreteMeasure {
        DiscreteMeasure::from_pairs(1, points.iter().map(|&(x, w)| (vec![x], w)).collect()).unwrap()
    }

    fn atom_measure(dir: Vec<f64>) -> HomogeneousMeasure {
        HomogeneousMeasure::new(
            dir.len(),
            1.0,
            AngularPart::Discrete(vec![(Point::new(dir).unwrap(), 1.0)]),
            1.0,
            false,
        )
        .unwrap()
    }

    #[test]
    fn trivial_plan_residuals() {
        let mu = line(&[(1.0, 0.5), (2.0, 1.5)]);
        let nu = line(&[(-1.0, 3.0)]);
        let r = residual_decomposition(&trivial_zero_coupling(&mu, &nu).unwrap());
        assert_eq!((r.left_residual, r.right_residual), (3.0, 2.0));
        assert_eq!(r.to_origin, vec![0.5, 1.5]);
        assert_eq!(r.from_origin, vec![3.0]);
    }

    #[test]
    fn opposite_atoms_fail_necessary_condition() {
        let r = check_necessary(&atom_measure(vec![1.0]), &atom_measure(vec![-1.0]), 8).unwrap();
        assert!(!r.holds);
        assert_eq!(r.failing_direction.unwrap().coords(), &[-1.0]);
    }

    #[test]
    fn orthogonal_atom_fails_cone_condition() {
        let r = check_cone_condition(
            &atom_measure(vec![1.0, 0.0]),
            &atom_measure(vec![0.0, 1.0]),
            &DEFAULT_EPS_GRID,
            16,
        )
        .unwrap();
        assert_eq!(r.status, CriterionStatus::Fails);
        assert!(!r.holds);
    }

    #[test]
    fn narrow_arc_is_undetermined_outside_the_grid() {
        // μ lives on the arc [π/2 − 0.045, π/2 − 0.035]; the cone around e₁
        // reaches it only for apertures below sin(0.045) ≈ 0.045
        let mu = HomogeneousMeasure::new(
            2,
            1.0,
            AngularPart::Density {
                density: AngularDensity::Arc {
                    center: PI / 2.0 - 0.04,
                    half_width: 0.005,
                },
                resolution: 64,
            },
            1.0,
            true,
        )
        .unwrap();
        let r = check_cone_condition(&mu, &atom_measure(vec![1.0, 0.0]), &[0.5, 0.25, 0.1], 64)
            .unwrap();
        assert_eq!(r.status, CriterionStatus::Undetermined);
        let r = check_cone_condition(&mu, &atom_measure(vec![1.0, 0.0]), &DEFAULT_EPS_GRID, 64)
            .unwrap();
        assert_eq!(r.status, CriterionStatus::Holds);
        assert_eq!(r.directions[0].eps, Some(0.01));
    }

    #[test]
    fn extended_real_comparisons() {
        use ExtMass::*;
        assert!(Infinite >= Finite(1e300));
        assert!(!(Finite(1e300) >= Infinite));
        assert!(Infinite >= Infinite);
        let sep_mu = HalfLineMasses {
            pos: Infinite,
            neg: Finite(0.0),
        };
        let sep_nu = HalfLineMasses {
            pos: Finite(0.0),
            neg: Infinite,
        };
        assert!(!check_1d_criterion(&sep_mu, &sep_nu));
        assert!(check_1d_criterion(&sep_mu, &sep_mu));
    }

    #[test]
    fn off_ray_pair_is_not_homogeneous() {
        let s = SupportSet::from_coords(1, vec![(vec![1.0], vec![2.0])]).unwrap();
        assert!(!check_homogeneous_support(&s, (1.0, 1.0), &[2.0], 1e-9, None).unwrap());
        assert!(check_homogeneous_support(&s, (1.0, 1.0), &[1.0], 0.0, None).unwrap());
    }
}
