//! One-dimensional zero-couplings by sign-preserving monotone rearrangement.
//!
//! Mass never crosses the origin. On each half-line the sources and targets
//! are matched quantile by quantile from the outer end inwards; whatever is
//! left over near the origin goes to, or comes from, the origin. Anchoring
//! at the outer end keeps the support cyclically monotone together with
//! `(0, 0)` and makes the plan optimal among plans that do not cross zero.
//!
//! This is a fixed convention and not always a global minimiser: a plan that
//! carries mass across the origin can be cheaper (see [`fixtures`]).

use crate::error::{Error, Result};
use crate::measures::DiscreteMeasure;
use crate::transport::{Endpoint, Entry, ZeroCoupling};

/// Sign-preserving outward rearrangement of two measures on the line.
pub fn solve_1d(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<ZeroCoupling> {
    if mu.dim() != 1 || nu.dim() != 1 {
        return Err(Error::InvalidArgument(
            "solve_1d needs measures on the line".into(),
        ));
    }
    let mut entries = Vec::new();
    for positive in [true, false] {
        let side = |m: &DiscreteMeasure| {
            let mut idx: Vec<usize> = (0..m.len())
                .filter(|&i| (m.point(i).coords()[0] > 0.0) == positive)
                .collect();
            // outermost first; ties by index
            idx.sort_by(|&a, &b| {
                let (xa, xb) = (m.point(a).coords()[0].abs(), m.point(b).coords()[0].abs());
                xb.total_cmp(&xa).then(a.cmp(&b))
            });
            idx
        };
        match_side(mu, nu, &side(mu), &side(nu), &mut entries);
    }
    entries.sort_by(|a, b| (a.src, a.dst).cmp(&(b.src, b.dst)));
    ZeroCoupling::new(mu.clone(), nu.clone(), entries)
}

fn match_side(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    src: &[usize],
    dst: &[usize],
    out: &mut Vec<Entry>,
) {
    let (mut a, mut b) = (0, 0);
    let mut ra = src.first().map(|&i| mu.weight(i)).unwrap_or(0.0);
    let mut rb = dst.first().map(|&j| nu.weight(j)).unwrap_or(0.0);
    while a < src.len() && b < dst.len() {
        let (i, j) = (src[a], dst[b]);
        // treat remainders equal up to rounding as exhausting both atoms
        let close = (ra - rb).abs() <= 4.0 * f64::EPSILON * ra.max(rb);
        let t = if close { ra.max(rb) } else { ra.min(rb) };
        out.push(Entry {
            src: Endpoint::Atom(i),
            dst: Endpoint::Atom(j),
            mass: t,
        });
        let (done_a, done_b) = (close || ra < rb, close || rb < ra);
        ra -= t;
        rb -= t;
        if done_a {
            a += 1;
            ra = src.get(a).map(|&i| mu.weight(i)).unwrap_or(0.0);
        }
        if done_b {
            b += 1;
            rb = dst.get(b).map(|&j| nu.weight(j)).unwrap_or(0.0);
        }
    }
    // leftovers sit nearest the origin
    while a < src.len() {
        if ra > 0.0 {
            out.push(Entry {
                src: Endpoint::Atom(src[a]),
                dst: Endpoint::Origin,
                mass: ra,
            });
        }
        a += 1;
        ra = src.get(a).map(|&i| mu.weight(i)).unwrap_or(0.0);
    }
    while b < dst.len() {
        if rb > 0.0 {
            out.push(Entry {
                src: Endpoint::Origin,
                dst: Endpoint::Atom(dst[b]),
                mass: rb,
            });
        }
        b += 1;
        rb = dst.get(b).map(|&j| nu.weight(j)).unwrap_or(0.0);
    }
}

/// Named one-dimensional instances.
pub mod fixtures {
    use super::*;

    /// Midpoint grid with `resolution` atoms of equal weight on `(lo, hi)`,
    /// total mass `mass`.
    pub fn grid(lo: f64, hi: f64, resolution: usize, mass: f64) -> Result<DiscreteMeasure> {
        if resolution == 0 {
            return Err(Error::BadResolution);
        }
        let h = (hi - lo) / resolution as f64;
        let w = mass / resolution as f64;
        DiscreteMeasure::from_pairs(
            1,
            (0..resolution)
                .map(|k| (vec![lo + h * (k as f64 + 0.5)], w))
                .collect(),
        )
    }

    /// Sources on `(0, 1]`, targets on `[−1, 0)`, unit mass each. Every
    /// zero-coupling routes all mass through the origin.
    pub fn sign_separated(resolution: usize) -> Result<(DiscreteMeasure, DiscreteMeasure)> {
        Ok((
            grid(0.0, 1.0, resolution, 1.0)?,
            grid(-1.0, 0.0, resolution, 1.0)?,
        ))
    }

    /// Sources uniform on `[−1, 0]`, targets uniform on `[0, 1]`.
    pub fn shifted_intervals(resolution: usize) -> Result<(DiscreteMeasure, DiscreteMeasure)> {
        Ok((
            grid(-1.0, 0.0, resolution, 1.0)?,
            grid(0.0, 1.0, resolution, 1.0)?,
        ))
    }

    /// The proper plan `x ↦ x + 1` on [`shifted_intervals`], atom `k` to atom `k`.
    /// Its cost is 1, against about 2/3 for the origin-routed plan.
    pub fn shift_plan(resolution: usize) -> Result<ZeroCoupling> {
        let (mu, nu) = shifted_intervals(resolution)?;
        let entries = (0..resolution)
            .map(|k| Entry {
                src: Endpoint::Atom(k),
                dst: Endpoint::Atom(k),
                mass: mu.weight(k),
            })
            .collect();
        ZeroCoupling::new(mu, nu, entries)
    }

    /// Everything through the origin on [`shifted_intervals`].
    pub fn origin_routed_plan(resolution: usize) -> Result<ZeroCoupling> {
        let (mu, nu) = shifted_intervals(resolution)?;
        solve_1d(&mu, &nu)
    }
}
