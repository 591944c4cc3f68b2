//! Monotonicity of finite supports, Rockafellar potentials and push-forwards.
//!
//! Tolerances passed to this module are relative: they are multiplied by
//! [`SupportSet::scale`], i.e. `max(1, max‖x‖ · max‖y‖)`, because inner
//! products grow quadratically with the coordinates.

use crate::error::{Error, Result};
use crate::measures::{dot, Atom, DiscreteMeasure, Point};
use crate::transport::SupportSet;

pub const DEFAULT_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct MonotoneReport {
    pub ok: bool,
    pub witness: Option<(usize, usize)>,
}

/// Checks `⟨x_i − x_j, y_i − y_j⟩ ≥ −tol` for every pair; the first violating
/// pair in lexicographic order is returned as witness.
pub fn is_monotone(s: &SupportSet, tol: f64) -> MonotoneReport {
    let tol_abs = tol * s.scale();
    let p = s.pairs();
    for i in 0..p.len() {
        for j in i + 1..p.len() {
            let v = p[i].0.sub(&p[j].0).dot(&p[i].1.sub(&p[j].1));
            if v < -tol_abs {
                return MonotoneReport {
                    ok: false,
                    witness: Some((i, j)),
                };
            }
        }
    }
    MonotoneReport {
        ok: true,
        witness: None,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CyclicReport {
    pub ok: bool,
    /// Indices `i_1, …, i_k` with `Σ ⟨x_{i_l}, y_{i_l} − y_{i_{l+1}}⟩ < −tol`
    /// (indices taken cyclically).
    pub witness_cycle: Option<Vec<usize>>,
}

/// `Σ ⟨x_{c_l}, y_{c_l} − y_{c_{l+1}}⟩` around the cycle.
pub fn cycle_gap(s: &SupportSet, cycle: &[usize]) -> f64 {
    let p = s.pairs();
    let k = cycle.len();
    (0..k).fold(0.0, |acc, l| {
        let (i, j) = (cycle[l], cycle[(l + 1) % k]);
        acc + p[i].0.dot(&p[i].1) - p[i].0.dot(&p[j].1)
    })
}

/// Negative-cycle search on the complete digraph with edge weights
/// `⟨x_i, y_i − y_j⟩ + tol`.
///
/// Label-correcting relaxation from a virtual source, sweeping targets and
/// then sources in index order; after every sweep the predecessor graph is
/// searched for a cycle.
pub fn is_cyclically_monotone(s: &SupportSet, tol: f64) -> CyclicReport {
    let n = s.len();
    let tol_abs = tol * s.scale();
    let p = s.pairs();
    let xs: Vec<&[f64]> = p.iter().map(|(x, _)| x.coords()).collect();
    let ys: Vec<&[f64]> = p.iter().map(|(_, y)| y.coords()).collect();
    let self_dot: Vec<f64> = (0..n).map(|i| dot(xs[i], ys[i])).collect();
    let mut dist = vec![0.0; n];
    let mut pred = vec![usize::MAX; n];

    for _round in 0..2 * n + 1 {
        let mut changed = false;
        for j in 0..n {
            for i in 0..n {
                if i == j {
                    continue;
                }
                let cand = dist[i] + self_dot[i] - dot(xs[i], ys[j]) + tol_abs;
                if cand < dist[j] {
                    dist[j] = cand;
                    pred[j] = i;
                    changed = true;
                }
            }
        }
        if !changed {
            return CyclicReport {
                ok: true,
                witness_cycle: None,
            };
        }
        if let Some(cycle) = pred_cycle(&pred) {
            if cycle_gap(s, &cycle) < -tol_abs * cycle.len() as f64 {
                return CyclicReport {
                    ok: false,
                    witness_cycle: Some(cycle),
                };
            }
        }
    }
    // relaxation that never settles implies a negative cycle even if rounding
    // kept it out of the predecessor graph
    CyclicReport {
        ok: false,
        witness_cycle: pred_cycle(&pred),
    }
}

/// A cycle of the predecessor graph in forward edge order, starting at its
/// smallest index.
fn pred_cycle(pred: &[usize]) -> Option<Vec<usize>> {
    let n = pred.len();
    let mut state = vec![0u8; n]; // 0 unseen, 1 on current walk, 2 done
    for start in 0..n {
        let mut walk = Vec::new();
        let mut v = start;
        while v != usize::MAX && state[v] == 0 {
            state[v] = 1;
            walk.push(v);
            v = pred[v];
        }
        if v != usize::MAX && state[v] == 1 {
            // walk follows predecessors; reverse to get edge order pred → node
            let pos = walk.iter().position(|&u| u == v).expect("v is on the walk");
            let mut cycle: Vec<usize> = walk[pos..].iter().rev().copied().collect();
            let rot = cycle
                .iter()
                .enumerate()
                .min_by_key(|(_, &u)| u)
                .map(|(k, _)| k)
                .unwrap_or(0);
            cycle.rotate_left(rot);
            return Some(cycle);
        }
        for u in walk {
            state[u] = 2;
        }
    }
    None
}

#[derive(Clone, Debug, PartialEq)]
pub struct PotentialNode {
    pub x: Point,
    pub psi: f64,
    pub grad: Point,
}

/// Finitely many values and subgradients of a convex function.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscretePotential {
    dim: usize,
    nodes: Vec<PotentialNode>,
    base_index: usize,
}

impl DiscretePotential {
    pub fn new(dim: usize, nodes: Vec<PotentialNode>, base_index: usize) -> Result<Self> {
        if !nodes.is_empty() && base_index >= nodes.len() {
            return Err(Error::InvalidArgument(format!(
                "base index {base_index} out of range"
            )));
        }
        for nd in &nodes {
            for p in [&nd.x, &nd.grad] {
                if p.dim() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        found: p.dim(),
                    });
                }
            }
            if !nd.psi.is_finite() {
                return Err(Error::InvalidArgument(
                    "potential value is not finite".into(),
                ));
            }
        }
        Ok(DiscretePotential {
            dim,
            nodes,
            base_index,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nodes(&self) -> &[PotentialNode] {
        &self.nodes
    }

    pub fn base_index(&self) -> usize {
        self.base_index
    }

    /// `max(1, max‖x‖ · max‖grad‖)` over the nodes.
    pub fn scale(&self) -> f64 {
        let mx = self.nodes.iter().map(|n| n.x.norm()).fold(0.0, f64::max);
        let mg = self.nodes.iter().map(|n| n.grad.norm()).fold(0.0, f64::max);
        (mx * mg).max(1.0)
    }

    /// Largest violation of `ψ_j ≥ ψ_i + ⟨x_j − x_i, grad_i⟩` over all node
    /// pairs (0 when the invariant holds exactly).
    pub fn max_violation(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for a in &self.nodes {
            for b in &self.nodes {
                let gap = b.psi - a.psi - b.x.sub(&a.x).dot(&a.grad);
                worst = worst.max(-gap);
            }
        }
        worst
    }

    /// Gradient assigned to a node whose point equals `x` exactly.
    pub fn gradient_at(&self, x: &Point) -> Option<&Point> {
        self.nodes.iter().find(|n| &n.x == x).map(|n| &n.grad)
    }
}

/// Finite Rockafellar construction: `ψ_j` is the longest chain
/// `base → … → j` with step weights `⟨y_i, x_k − x_i⟩`, and `grad_i = y_i`.
///
/// Moving the base shifts every value by the same constant.
pub fn rockafellar_potential(
    s: &SupportSet,
    base_index: usize,
    tol: f64,
) -> Result<DiscretePotential> {
    let n = s.len();
    if n == 0 {
        return DiscretePotential::new(s.dim(), Vec::new(), 0);
    }
    if base_index >= n {
        return Err(Error::InvalidArgument(format!(
            "base index {base_index} out of range"
        )));
    }
    if !is_cyclically_monotone(s, tol).ok {
        return Err(Error::NotCyclicallyMonotone);
    }
    let p = s.pairs();
    let xs: Vec<&[f64]> = p.iter().map(|(x, _)| x.coords()).collect();
    let ys: Vec<&[f64]> = p.iter().map(|(_, y)| y.coords()).collect();
    let xy: Vec<f64> = (0..n).map(|i| dot(ys[i], xs[i])).collect();
    let mut psi = vec![f64::NEG_INFINITY; n];
    psi[base_index] = 0.0;
    // a longest simple chain has at most n − 1 steps
    for _ in 0..n.saturating_sub(1) {
        let mut changed = false;
        for j in 0..n {
            for i in 0..n {
                if i == j || psi[i] == f64::NEG_INFINITY {
                    continue;
                }
                let cand = psi[i] + dot(ys[i], xs[j]) - xy[i];
                if cand > psi[j] {
                    psi[j] = cand;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    psi[base_index] = 0.0;
    let nodes = p
        .iter()
        .zip(psi)
        .map(|((x, y), v)| PotentialNode {
            x: x.clone(),
            psi: v,
            grad: y.clone(),
        })
        .collect();
    DiscretePotential::new(s.dim(), nodes, base_index)
}

/// Whether `(x, v)` can join the potential: some value `ψ_x` satisfies the
/// subgradient inequality against every node in both directions, up to
/// `tol · scale`.
pub fn subdifferential_contains(
    pot: &DiscretePotential,
    pair: (&Point, &Point),
    tol: f64,
) -> Result<bool> {
    let (x, v) = pair;
    if x.dim() != pot.dim || v.dim() != pot.dim {
        return Err(Error::DimensionMismatch {
            expected: pot.dim,
            found: x.dim().max(v.dim()),
        });
    }
    let scale = pot.scale().max(x.norm() * v.norm());
    let tol_abs = tol * scale;
    // ψ_x ≥ ψ_i + ⟨x − x_i, g_i⟩ and ψ_i ≥ ψ_x + ⟨x_i − x, v⟩
    let lower = pot
        .nodes
        .iter()
        .map(|n| n.psi + x.sub(&n.x).dot(&n.grad))
        .fold(f64::NEG_INFINITY, f64::max);
    let upper = pot
        .nodes
        .iter()
        .map(|n| n.psi - n.x.sub(x).dot(v))
        .fold(f64::INFINITY, f64::min);
    Ok(lower <= upper + tol_abs)
}

/// A gradient map that can push measures forward.
pub trait GradientMap {
    fn dim(&self) -> usize;
    /// `None` when `x` lies outside the domain of the map.
    fn apply(&self, x: &Point) -> Option<Point>;
}

impl GradientMap for DiscretePotential {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &Point) -> Option<Point> {
        self.gradient_at(x).cloned()
    }
}

/// Gradient given by a formula, with an explicit domain test.
pub struct ClosedFormGradient<'a> {
    pub dim: usize,
    pub grad: &'a dyn Fn(&[f64]) -> Vec<f64>,
    pub in_domain: &'a dyn Fn(&[f64]) -> bool,
}

impl GradientMap for ClosedFormGradient<'_> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &Point) -> Option<Point> {
        if !(self.in_domain)(x.coords()) {
            return None;
        }
        let g = (self.grad)(x.coords());
        g.iter()
            .all(|c| c.is_finite())
            .then(|| Point::new(g).ok())
            .flatten()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PushForward {
    pub measure: DiscreteMeasure,
    /// Mass of atoms sent exactly to the origin.
    pub origin_residual: f64,
}

/// Image of `m` under `map`, atom by atom and in order.
pub fn push_forward(map: &dyn GradientMap, m: &DiscreteMeasure) -> Result<PushForward> {
    if map.dim() != m.dim() {
        return Err(Error::DimensionMismatch {
            expected: m.dim(),
            found: map.dim(),
        });
    }
    let mut out = DiscreteMeasure::empty(m.dim());
    let mut residual = 0.0;
    for (i, a) in m.atoms().iter().enumerate() {
        let y = map.apply(&a.point).ok_or_else(|| Error::DomainViolation {
            index: i,
            detail: format!(
                "atom {:?} is outside the domain of the map",
                a.point.coords()
            ),
        })?;
        if y.is_origin() {
            residual += a.weight;
        } else {
            out.push_atom(Atom {
                point: y,
                weight: a.weight,
            });
        }
    }
    if let Some(meta) = &m.meta {
        out.meta = Some(meta.clone());
    }
    Ok(PushForward {
        measure: out,
        origin_residual: residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn support(pairs: &[(Vec<f64>, Vec<f64>)]) -> SupportSet {
        let dim = pairs.first().map(|p| p.0.len()).unwrap_or(1);
        SupportSet::from_coords(dim, pairs.to_vec()).unwrap()
    }

    #[test]
    fn swapped_pair_is_not_monotone() {
        let s = support(&[(vec![0.0], vec![1.0]), (vec![1.0], vec![0.0])]);
        let r = is_monotone(&s, DEFAULT_TOL);
        assert!(!r.ok);
        assert_eq!(r.witness, Some((0, 1)));
        assert!(!is_cyclically_monotone(&s, DEFAULT_TOL).ok);
    }

    #[test]
    fn rotation_by_quarter_turn() {
        // three points on the unit circle mapped by a 90 degree rotation
        let pts: Vec<(f64, f64)> = (0..3)
            .map(|k| (2.0 * std::f64::consts::PI * k as f64 / 3.0).sin_cos())
            .collect();
        let s = support(
            &pts.iter()
                .map(|&(s, c)| (vec![c, s], vec![-s, c]))
                .collect::<Vec<_>>(),
        );
        let r = is_cyclically_monotone(&s, DEFAULT_TOL);
        assert!(!r.ok);
        let cycle = r.witness_cycle.unwrap();
        assert!(cycle_gap(&s, &cycle) < -DEFAULT_TOL);
    }

    #[test]
    fn identity_support_is_cyclically_monotone() {
        let s = support(&[
            (vec![1.0, 2.0], vec![1.0, 2.0]),
            (vec![-3.0, 0.5], vec![-3.0, 0.5]),
            (vec![0.2, -1.0], vec![0.2, -1.0]),
        ]);
        assert!(is_cyclically_monotone(&s, 0.0).ok);
        assert!(is_monotone(&s, 0.0).ok);
    }

    #[test]
    fn potential_of_single_pair() {
        let s = support(&[(vec![1.0, 1.0], vec![2.0, 0.0])]);
        let p = rockafellar_potential(&s, 0, DEFAULT_TOL).unwrap();
        assert_eq!(p.nodes().len(), 1);
        assert_eq!(p.nodes()[0].psi, 0.0);
    }

    #[test]
    fn potential_rejects_non_monotone_support() {
        let s = support(&[(vec![0.0], vec![1.0]), (vec![1.0], vec![0.0])]);
        assert_eq!(
            rockafellar_potential(&s, 0, DEFAULT_TOL).unwrap_err(),
            Error::NotCyclicallyMonotone
        );
    }

    fn half_square_nodes() -> DiscretePotential {
        // ψ(x) = x²/2 sampled at 0 and 1
        let nodes = [0.0, 1.0]
            .iter()
            .map(|&x| PotentialNode {
                x: Point::new(vec![x]).unwrap(),
                psi: 0.5 * x * x,
                grad: Point::new(vec![x]).unwrap(),
            })
            .collect();
        DiscretePotential::new(1, nodes, 0).unwrap()
    }

    #[test]
    fn subdifferential_membership_by_hand() {
        let pot = half_square_nodes();
        let x = Point::new(vec![0.5]).unwrap();
        assert!(!subdifferential_contains(
            &pot,
            (&x, &Point::new(vec![-10.0]).unwrap()),
            DEFAULT_TOL
        )
        .unwrap());
        assert!(subdifferential_contains(&pot, (&x, &x), DEFAULT_TOL).unwrap());
        for n in pot.nodes() {
            assert!(subdifferential_contains(&pot, (&n.x, &n.grad), 0.0).unwrap());
        }
    }

    #[test]
    fn push_forward_through_nodes_and_origin() {
        let pot = DiscretePotential::new(
            1,
            vec![
                PotentialNode {
                    x: Point::new(vec![1.0]).unwrap(),
                    psi: 0.0,
                    grad: Point::new(vec![0.0]).unwrap(),
                },
                PotentialNode {
                    x: Point::new(vec![2.0]).unwrap(),
                    psi: 0.0,
                    grad: Point::new(vec![3.0]).unwrap(),
                },
            ],
            0,
        )
        .unwrap();
        let m = DiscreteMeasure::from_pairs(1, vec![(vec![1.0], 0.25), (vec![2.0], 0.5)]).unwrap();
        let pf = push_forward(&pot, &m).unwrap();
        assert_eq!(pf.origin_residual, 0.25);
        assert_eq!(pf.measure.len(), 1);
        assert_eq!(pf.measure.point(0).coords(), &[3.0]);
        let bad = DiscreteMeasure::from_pairs(1, vec![(vec![5.0], 1.0)]).unwrap();
        assert!(matches!(
            push_forward(&pot, &bad),
            Err(Error::DomainViolation { index: 0, .. })
        ));
    }
}
