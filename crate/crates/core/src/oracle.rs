//! Closed-form ground truth for the planar potential `ψ(x, y) = y⁴/x²`.
//!
//! `ψ` is convex on `{x > 0}`, zero at the origin and `+∞` elsewhere. Its
//! gradient `(−2y⁴/x³, 4y³/x²)` pushes the 1-homogeneous measure
//! `μ(dx dy) = x³/(x² + y²)³ dx dy` on the right half-plane forward to
//! `ν(du dv) = 64|u|³/(4u² + v²)³ du dv` on the left half-plane.
//!
//! In polar coordinates `μ = cos³θ dθ · r⁻² dr` on `|θ| < π/2` and
//! `ν = 64|cos φ|³/(1 + 3cos²φ)³ dφ · ρ⁻² dρ` on `π/2 < φ < 3π/2`.
//! Writing `t = tan θ`, the gradient is `r cos θ · t³ · (−2t, 4)`, so a point
//! at angle `θ` and radius `r` lands at radius `r · g(θ)` with
//! `g(θ) = 2|t|³ √(t² + 4) cos θ`, and the image angle satisfies
//! `tan φ = −2/t`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::measures::{AngularDensity, AngularPart, Discretization, HomogeneousMeasure, Point};
use crate::monotone::{push_forward, ClosedFormGradient};
use crate::quad::adaptive_simpson;
use crate::regvar::{
    check_coupling_homogeneity, coupling_mass, CouplingHomogeneityReport, HomogeneityCheck,
    ProductAnnulus,
};
use crate::transport::{Endpoint, Entry, ZeroCoupling};

/// Absolute tolerance of the angular integrals.
const ORACLE_QUAD_TOL: f64 = 1e-10;
const FD_STEP: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PsiValue {
    /// `+∞` outside the closed domain.
    pub value: f64,
    /// Present on the open half-plane `x > 0`.
    pub grad: Option<[f64; 2]>,
}

pub fn psi55(p: &[f64]) -> PsiValue {
    let (x, y) = (p[0], p[1]);
    if x > 0.0 {
        let v = y.powi(4) / (x * x);
        PsiValue {
            value: v,
            grad: Some(psi55_grad(p)),
        }
    } else if x == 0.0 && y == 0.0 {
        PsiValue {
            value: 0.0,
            grad: None,
        }
    } else {
        PsiValue {
            value: f64::INFINITY,
            grad: None,
        }
    }
}

/// `(−2y⁴/x³, 4y³/x²)`; meaningful for `x > 0` only.
pub fn psi55_grad(p: &[f64]) -> [f64; 2] {
    let (x, y) = (p[0], p[1]);
    let y3 = y * y * y;
    [-2.0 * y3 * y / (x * x * x), 4.0 * y3 / (x * x)]
}

pub fn in_domain55(p: &[f64]) -> bool {
    p[0] > 0.0
}

pub fn mu55_density(x: f64, y: f64) -> f64 {
    if x > 0.0 {
        let r2 = x * x + y * y;
        x * x * x / (r2 * r2 * r2)
    } else {
        0.0
    }
}

pub fn nu55_density(u: f64, v: f64) -> f64 {
    if u < 0.0 {
        let q = 4.0 * u * u + v * v;
        64.0 * (-u).powi(3) / (q * q * q)
    } else {
        0.0
    }
}

/// Density of `μ` with respect to `dr dθ`.
pub fn mu55_polar(r: f64, theta: f64) -> f64 {
    AngularDensity::CosCubedRight.value_at_angle(theta) / (r * r)
}

/// Density of `ν` with respect to `dρ dφ`.
pub fn nu55_polar(rho: f64, phi: f64) -> f64 {
    AngularDensity::PushedLeft.value_at_angle(phi) / (rho * rho)
}

/// `∫ cos³θ dθ` over the right half-circle.
pub const MU55_ANGULAR_MASS: f64 = 4.0 / 3.0;

/// `∫ 64|cos φ|³/(1 + 3cos²φ)³ dφ` over the left half-circle.
pub fn nu55_angular_mass() -> f64 {
    adaptive_simpson(
        &|p: f64| AngularDensity::PushedLeft.value_at_angle(p),
        PI / 2.0,
        1.5 * PI,
        1e-13,
    )
}

pub fn mu55() -> HomogeneousMeasure {
    HomogeneousMeasure::new(
        2,
        1.0,
        AngularPart::Density {
            density: AngularDensity::CosCubedRight,
            resolution: 64,
        },
        MU55_ANGULAR_MASS,
        true,
    )
    .expect("valid closed-form measure")
}

pub fn nu55() -> HomogeneousMeasure {
    HomogeneousMeasure::new(
        2,
        1.0,
        AngularPart::Density {
            density: AngularDensity::PushedLeft,
            resolution: 64,
        },
        nu55_angular_mass(),
        true,
    )
    .expect("valid closed-form measure")
}

/// Radial stretch `g(θ)` of the gradient, `|θ| < π/2`.
pub fn radial_factor(theta: f64) -> f64 {
    let t = theta.tan().abs();
    2.0 * t * t * t * (t * t + 4.0).sqrt() * theta.cos()
}

/// Angle of `∇ψ` at polar angle `θ`, in `(−π, −π/2] ∪ [π/2, π)`.
pub fn image_angle(theta: f64) -> f64 {
    let t = theta.tan();
    if theta >= 0.0 {
        (4.0f64).atan2(-2.0 * t)
    } else {
        (-4.0f64).atan2(2.0 * t)
    }
}

/// Preimage angle `θ ∈ (−π/2, π/2)` of an image angle `φ` in the left
/// half-plane.
pub fn preimage_angle(phi: f64) -> f64 {
    (-2.0 / phi.tan()).atan()
}

/// One set of the test dictionary: the image under `∇ψ` of the polar box
/// `θ ∈ [θ_lo, θ_hi), r ∈ [r_lo, r_hi)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PushedSet {
    pub label: String,
    pub theta: (f64, f64),
    pub radius: (f64, f64),
    pub pushed_mass: f64,
    pub closed_form: f64,
    pub rel_error: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PushforwardReport {
    pub resolution: usize,
    pub tol: f64,
    pub sets: Vec<PushedSet>,
    pub max_rel_error: f64,
    /// Pushed mass on `{u ≥ 0}`; the image lies in `{u < 0}`.
    pub right_half_mass: f64,
    /// Largest relative gap between the gradient and central differences.
    pub max_fd_error: f64,
    /// Largest relative deviation from `ψ(λx) = λ²ψ(x)`.
    pub max_value_homogeneity_error: f64,
    pub pass: bool,
}

/// Checks `ν = (∇ψ)_# μ` with the closed-form gradient.
pub fn verify_pushforward_55(resolution: usize, tol: f64) -> Result<PushforwardReport> {
    verify_pushforward_55_with(&|p: &[f64]| psi55_grad(p).to_vec(), resolution, tol)
}

/// Same check with an arbitrary candidate gradient, used for negative
/// controls.
///
/// `μ` is discretized by quadrature on the annulus `[1, 10]` and pushed
/// through `grad`. Each test set is the image of a union of quadrature cells,
/// so the pushed atoms fall on one side of every boundary and the pushed
/// mass is exact up to rounding. The closed form integrates `ν`'s polar
/// density over the same image,
/// `(1/r_lo − 1/r_hi) ∫ ν_ang(φ) / g(θ(φ)) dφ` over the image angles.
pub fn verify_pushforward_55_with(
    grad: &dyn Fn(&[f64]) -> Vec<f64>,
    resolution: usize,
    tol: f64,
) -> Result<PushforwardReport> {
    if resolution < 16 || resolution % 8 != 0 {
        return Err(Error::InvalidArgument(format!(
            "resolution {resolution} must be a multiple of 8 and at least 16"
        )));
    }
    let (r_in, r_out) = (1.0, 10.0);
    let mu = mu55();
    let atoms = mu.discretize(r_in, r_out, &Discretization::quadrature(resolution))?;
    let map = ClosedFormGradient {
        dim: 2,
        grad,
        in_domain: &in_domain55,
    };
    let pushed = push_forward(&map, &atoms)?;

    // cell boundaries of the quadrature grid
    let h = 2.0 * PI / resolution as f64;
    let theta_at = |k: usize| -PI + h * k as f64;
    let radius_at = |k: usize| {
        if k == resolution {
            r_out
        } else {
            1.0 / (1.0 / r_in - (1.0 / r_in - 1.0 / r_out) * k as f64 / resolution as f64)
        }
    };
    let (q, e) = (resolution / 4, resolution / 8);
    let theta_groups: Vec<(f64, f64)> = (0..4)
        .map(|j| (theta_at(q + j * e), theta_at(q + (j + 1) * e)))
        .collect();
    let radius_groups: Vec<(f64, f64)> = (0..4)
        .map(|j| (radius_at(j * q), radius_at((j + 1) * q)))
        .collect();

    let mut boxes = Vec::new();
    boxes.push(("full".to_string(), (-PI / 2.0, PI / 2.0), (r_in, r_out)));
    for (j, &rg) in radius_groups.iter().enumerate() {
        boxes.push((format!("annulus{j}"), (-PI / 2.0, PI / 2.0), rg));
    }
    for (i, &tg) in theta_groups.iter().enumerate() {
        boxes.push((format!("cone{i}"), tg, (r_in, r_out)));
        for (j, &rg) in radius_groups.iter().enumerate() {
            boxes.push((format!("sector{i}.{j}"), tg, rg));
        }
    }

    // classify each pushed atom by its preimage coordinates
    let located: Vec<(f64, f64, f64)> = pushed
        .measure
        .atoms()
        .iter()
        .filter(|a| a.point.coords()[0] < 0.0)
        .map(|a| {
            let th = preimage_angle(a.point.angle());
            (th, a.point.norm() / radial_factor(th), a.weight)
        })
        .collect();
    let right_half_mass = pushed
        .measure
        .atoms()
        .iter()
        .filter(|a| a.point.coords()[0] >= 0.0)
        .fold(0.0, |acc, a| acc + a.weight);

    let mut sets = Vec::new();
    for (label, theta, radius) in boxes {
        let pushed_mass = located
            .iter()
            .filter(|(th, r, _)| *th >= theta.0 && *th < theta.1 && *r >= radius.0 && *r < radius.1)
            .fold(0.0, |acc, (_, _, w)| acc + w);
        let closed_form = image_mass(theta, radius);
        let rel_error = (pushed_mass - closed_form).abs() / closed_form;
        sets.push(PushedSet {
            label,
            theta,
            radius,
            pushed_mass,
            closed_form,
            rel_error,
        });
    }
    let max_rel_error = sets.iter().map(|s| s.rel_error).fold(0.0, f64::max);
    let max_fd_error = fd_gradient_error(grad);
    let max_value_homogeneity_error = value_homogeneity_error();
    let pass = max_rel_error <= tol
        && right_half_mass == 0.0
        && max_fd_error <= 1e-6
        && max_value_homogeneity_error <= 1e-12;
    Ok(PushforwardReport {
        resolution,
        tol,
        sets,
        max_rel_error,
        right_half_mass,
        max_fd_error,
        max_value_homogeneity_error,
        pass,
    })
}

/// `ν`-mass of the image of the polar box, by integration over image angles.
/// The box must not straddle `θ = 0`, where the image splits in two.
pub fn image_mass(theta: (f64, f64), radius: (f64, f64)) -> f64 {
    let f = |phi: f64| {
        AngularDensity::PushedLeft.value_at_angle(phi) / radial_factor(preimage_angle(phi))
    };
    let integral = if theta.0 < 0.0 && theta.1 > 0.0 {
        angular_piece(&f, (theta.0, 0.0)) + angular_piece(&f, (0.0, theta.1))
    } else {
        angular_piece(&f, theta)
    };
    (1.0 / radius.0 - 1.0 / radius.1) * integral
}

fn angular_piece(f: &dyn Fn(f64) -> f64, theta: (f64, f64)) -> f64 {
    // image angle of θ ≥ 0 increases from π/2 to π; of θ < 0 from −π to −π/2
    let (a, b) = if theta.1 <= 0.0 {
        let lo = if theta.0 <= -PI / 2.0 {
            -PI
        } else {
            image_angle(theta.0)
        };
        let hi = if theta.1 == 0.0 {
            -PI / 2.0
        } else {
            image_angle(theta.1)
        };
        (lo, hi)
    } else {
        let lo = if theta.0 == 0.0 {
            PI / 2.0
        } else {
            image_angle(theta.0)
        };
        let hi = if theta.1 >= PI / 2.0 {
            PI
        } else {
            image_angle(theta.1)
        };
        (lo, hi)
    };
    adaptive_simpson(&f, a, b, ORACLE_QUAD_TOL)
}

/// Points of the standard check grid inside `{x > 0}`.
pub fn check_grid() -> Vec<[f64; 2]> {
    let mut pts = Vec::new();
    for &r in &[0.5, 1.0, 2.0, 5.0] {
        for k in 0..25 {
            let th = -1.2 + 2.4 * k as f64 / 24.0;
            pts.push([r * th.cos(), r * th.sin()]);
        }
    }
    pts
}

/// Largest `‖FD − grad‖ / max(1, ‖grad‖)` over [`check_grid`], with central
/// differences of `ψ` at step `1e−5 · ‖x‖`.
pub fn fd_gradient_error(grad: &dyn Fn(&[f64]) -> Vec<f64>) -> f64 {
    let mut worst: f64 = 0.0;
    for p in check_grid() {
        let h = FD_STEP * (p[0] * p[0] + p[1] * p[1]).sqrt();
        let g = grad(&p);
        let mut err2 = 0.0;
        for k in 0..2 {
            let (mut a, mut b) = (p, p);
            a[k] += h;
            b[k] -= h;
            let fd = (psi55(&a).value - psi55(&b).value) / (2.0 * h);
            err2 += (fd - g[k]).powi(2);
        }
        let gn = g.iter().map(|c| c * c).sum::<f64>().sqrt();
        worst = worst.max(err2.sqrt() / gn.max(1.0));
    }
    worst
}

/// Largest `|ψ(λx) − λ²ψ(x)| / max(1, λ²|ψ(x)|)` for λ ∈ {0.5, 2, 10}.
pub fn value_homogeneity_error() -> f64 {
    let mut worst: f64 = 0.0;
    for p in check_grid() {
        let v = psi55(&p).value;
        for lambda in [0.5, 2.0, 10.0] {
            let s = psi55(&[lambda * p[0], lambda * p[1]]).value;
            let want = lambda * lambda * v;
            worst = worst.max((s - want).abs() / want.abs().max(1.0));
        }
    }
    worst
}

/// The gradient as a map on points.
pub fn grad_point(p: &Point) -> Option<Point> {
    in_domain55(p.coords())
        .then(|| Point::new(psi55_grad(p.coords()).to_vec()).ok())
        .flatten()
}

/// `θ ∈ (0, π/2)` with `g(θ) = v`; `g` increases from 0 to `∞` there.
pub fn radial_factor_inverse(v: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, PI / 2.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if radial_factor(mid) < v {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Mass of `{x_lo ≤ ‖x‖ < x_hi, y_lo ≤ ‖y‖ < y_hi}` under
/// `γ = (Id × ∇ψ)_# μ`.
///
/// A point at angle `θ` and radius `r` counts iff `x_lo ≤ r < x_hi` and
/// `y_lo ≤ r·g(θ) < y_hi`, so the radial integral of `r⁻²` is
/// `[1/max(x_lo, y_lo/g) − 1/min(x_hi, y_hi/g)]₊`. The angular integral is
/// split where `g` crosses the ratios `y/x`, leaving smooth pieces.
pub fn map_coupling_mass(x: (f64, f64), y: (f64, f64)) -> f64 {
    let f = |th: f64| {
        let g = radial_factor(th);
        let lo = x.0.max(if y.0 > 0.0 { y.0 / g } else { 0.0 });
        let hi = x.1.min(y.1 / g);
        if hi <= lo {
            return 0.0;
        }
        th.cos().powi(3) * (1.0 / lo - 1.0 / hi)
    };
    let mut cuts = vec![0.0, PI / 2.0];
    for &yv in &[y.0, y.1] {
        for &xv in &[x.0, x.1] {
            if yv > 0.0 && xv > 0.0 && yv.is_finite() && xv.is_finite() {
                cuts.push(radial_factor_inverse(yv / xv));
            }
        }
    }
    cuts.sort_by(f64::total_cmp);
    // ψ is even in the second coordinate, so both half-angles contribute equally
    2.0 * cuts
        .windows(2)
        .map(|w| adaptive_simpson(&f, w[0], w[1], ORACLE_QUAD_TOL))
        .sum::<f64>()
}

/// `(Id × ∇ψ)_# μ̂` for the quadrature discretization `μ̂` of `μ` on
/// `[r_lo, r_hi)` with a log-uniform radial grid: atom `k` goes to its image.
pub fn map_coupling_55(resolution: usize, r_lo: f64, r_hi: f64) -> Result<ZeroCoupling> {
    let mu = mu55().discretize(
        r_lo,
        r_hi,
        &Discretization::quadrature(resolution).log_uniform(),
    )?;
    let map = ClosedFormGradient {
        dim: 2,
        grad: &|p: &[f64]| psi55_grad(p).to_vec(),
        in_domain: &in_domain55,
    };
    let pushed = push_forward(&map, &mu)?;
    let entries = (0..mu.len())
        .map(|k| Entry {
            src: Endpoint::Atom(k),
            dst: Endpoint::Atom(k),
            mass: mu.weight(k),
        })
        .collect();
    ZeroCoupling::new(mu, pushed.measure, entries)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CouplingHomogeneity55 {
    pub resolution: usize,
    /// Largest relative gap between `γ̂(A)` and the closed form over the
    /// annuli and their scalings.
    pub quadrature_error: f64,
    pub tol: f64,
    pub report: CouplingHomogeneityReport,
}

/// Homogeneity of the discretized map coupling on `[1/16, 16)` for
/// λ ∈ {0.5, 2}; the tolerance is twice the measured quadrature error.
///
/// The radial grid has `resolution` cells, so a scaling by 2 moves atoms
/// onto atoms when `resolution` is a multiple of 8.
pub fn coupling_homogeneity_55(resolution: usize) -> Result<CouplingHomogeneity55> {
    if resolution < 16 || resolution % 8 != 0 {
        return Err(Error::InvalidArgument(format!(
            "resolution {resolution} must be a multiple of 8 and at least 16"
        )));
    }
    let g = map_coupling_55(resolution, 1.0 / 16.0, 16.0)?;
    let lambdas = vec![0.5, 2.0];
    let xs = [(0.5, 1.0), (1.0, 2.0), (2.0, 4.0)];
    let ys = [(0.0, f64::INFINITY), (0.25, 1.0), (1.0, 4.0), (4.0, 16.0)];
    let annuli: Vec<ProductAnnulus> = xs
        .iter()
        .flat_map(|&x| ys.iter().map(move |&y| ProductAnnulus { x, y }))
        .collect();
    let mut quadrature_error: f64 = 0.0;
    for a in &annuli {
        for s in [1.0, 0.5, 2.0] {
            let b = a.scaled(s, s);
            let want = map_coupling_mass(b.x, b.y);
            if want > 0.0 {
                quadrature_error =
                    quadrature_error.max((coupling_mass(&g, &b) - want).abs() / want);
            }
        }
    }
    let tol = 2.0 * quadrature_error;
    let check = HomogeneityCheck {
        alpha1: 1.0,
        alpha2: 1.0,
        lambdas,
        annuli,
        tol,
        support_tol: 1e-9,
        support_window: Some((0.5, 4.0)),
    };
    let report = check_coupling_homogeneity(&g, &check)?;
    Ok(CouplingHomogeneity55 {
        resolution,
        quadrature_error,
        tol,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn level_curve_and_origin() {
        let y: f64 = 0.5;
        assert_eq!(psi55(&[y * y, y]).value, 1.0);
        assert_eq!(
            psi55(&[0.0, 0.0]),
            PsiValue {
                value: 0.0,
                grad: None
            }
        );
        assert_eq!(psi55(&[-1.0, 0.0]).value, f64::INFINITY);
        assert_eq!(psi55(&[0.0, 1.0]).value, f64::INFINITY);
        assert_eq!(psi55_grad(&[1.0, 1.0]), [-2.0, 4.0]);
    }

    #[test]
    fn densities_at_unit_points() {
        assert_eq!(mu55_density(1.0, 0.0), 1.0);
        assert_eq!(nu55_density(-1.0, 0.0), 1.0);
        assert_eq!(mu55_density(-1.0, 0.0), 0.0);
        assert_eq!(nu55_density(1.0, 0.0), 0.0);
    }

    #[test]
    fn cartesian_and_polar_forms_agree() {
        for i in 0..10 {
            for j in 0..10 {
                for k in 0..10 {
                    let r = 0.3 + 0.5 * i as f64;
                    let th = -PI + 2.0 * PI * (j as f64 + 0.37) / 10.0 + 0.01 * k as f64;
                    let (x, y) = (r * th.cos(), r * th.sin());
                    assert_relative_eq!(
                        mu55_density(x, y) * r,
                        mu55_polar(r, th),
                        max_relative = 1e-10,
                        epsilon = 1e-300
                    );
                    assert_relative_eq!(
                        nu55_density(x, y) * r,
                        nu55_polar(r, th),
                        max_relative = 1e-10,
                        epsilon = 1e-300
                    );
                }
            }
        }
    }

    #[test]
    fn angle_maps_invert_each_other() {
        for k in 1..40 {
            let th = -PI / 2.0 + PI * k as f64 / 40.0;
            if th == 0.0 {
                continue;
            }
            let g = psi55_grad(&[th.cos(), th.sin()]);
            assert_relative_eq!(image_angle(th), g[1].atan2(g[0]), max_relative = 1e-12);
            assert_relative_eq!(preimage_angle(image_angle(th)), th, max_relative = 1e-12);
            assert_relative_eq!(radial_factor(th), g[0].hypot(g[1]), max_relative = 1e-12);
        }
    }

    #[test]
    fn angular_masses_match_through_the_map() {
        // ν({ρ > 1}) = μ({r > 1/g(θ)}) = ∫ cos³θ g(θ) dθ for α = 1
        let via_mu = adaptive_simpson(
            &|t: f64| t.cos().powi(3) * radial_factor(t),
            -PI / 2.0,
            PI / 2.0,
            1e-12,
        );
        assert_relative_eq!(via_mu, nu55_angular_mass(), max_relative = 1e-9);
    }

    #[test]
    fn closed_form_image_of_everything() {
        // the image of the whole right half-plane annulus [1, 10] carries
        // μ-mass (4/3)·(1 − 1/10)
        let m = image_mass((-PI / 2.0, PI / 2.0), (1.0, 10.0));
        assert_relative_eq!(m, 4.0 / 3.0 * 0.9, max_relative = 1e-9);
    }

    #[test]
    fn pushforward_passes_and_scaled_gradient_fails() {
        let r = verify_pushforward_55(32, 1e-3).unwrap();
        assert!(r.pass, "{r:?}");
        assert_eq!(r.right_half_mass, 0.0);
        let bad = |p: &[f64]| psi55_grad(p).iter().map(|c| 1.01 * c).collect::<Vec<_>>();
        let r = verify_pushforward_55_with(&bad, 32, 1e-3).unwrap();
        assert!(!r.pass);
        assert!(r.max_fd_error > 1e-3);
    }

    #[test]
    fn map_coupling_mass_margins_and_scaling() {
        let whole = map_coupling_mass((1.0, 2.0), (0.0, f64::INFINITY));
        assert_relative_eq!(whole, MU55_ANGULAR_MASS * 0.5, max_relative = 1e-9);
        let a = map_coupling_mass((1.0, 2.0), (0.5, 3.0));
        let b = map_coupling_mass((2.0, 4.0), (1.0, 6.0));
        assert_relative_eq!(b, 0.5 * a, max_relative = 1e-9);
    }

    #[test]
    fn map_coupling_mass_against_polar_sum() {
        // midpoint sum of the polar density over the region, in log radius
        let (x, y): ((f64, f64), (f64, f64)) = ((1.0, 2.0), (0.5, 3.0));
        let (nt, nr) = (4000, 2000);
        let mut sum = 0.0;
        for i in 0..nt {
            let th = -PI / 2.0 + PI * (i as f64 + 0.5) / nt as f64;
            let g = radial_factor(th);
            for k in 0..nr {
                let s = x.0.ln() + (x.1 / x.0).ln() * (k as f64 + 0.5) / nr as f64;
                let r = s.exp();
                let rho = r * g;
                if rho >= y.0 && rho < y.1 {
                    // dr = r ds
                    sum += mu55_polar(r, th) * r;
                }
            }
        }
        sum *= (PI / nt as f64) * ((x.1 / x.0).ln() / nr as f64);
        assert_relative_eq!(sum, map_coupling_mass(x, y), max_relative = 2e-3);
    }

    #[test]
    fn coupling_homogeneity_suite() {
        let r = coupling_homogeneity_55(64).unwrap();
        assert!(r.report.holds, "{r:?}");
        assert!(r.quadrature_error > 0.0 && r.quadrature_error < 1e-1);
    }
}
