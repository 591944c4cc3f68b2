//! Discrete zero-couplings with an origin reservoir.
//!
//! A [`ZeroCoupling`] moves mass between the atoms of two discrete measures,
//! and may also send source mass to the origin or feed target mass from it.
//! The quadratic cost of an entry is `mass · ‖x − y‖²`, with the origin
//! standing in for a missing endpoint. Minimisers of this cost have
//! cyclically monotone support once the pair `(0, 0)` is added.
//!
//! Optimal plans are not canonical: when several optimal bases exist the
//! solver returns whichever one its fixed pivoting rule reaches.

mod brute;
pub(crate) mod kdtree;
mod simplex;

use std::fmt;

use crate::error::{Error, Result};
use crate::measures::{DiscreteMeasure, Point};
use kdtree::KdTree;
use simplex::NetworkSimplex;

pub use brute::brute_force_min_cost;

/// Relative tolerance for margins and optimality.
pub const MARGIN_TOL: f64 = 1e-9;

/// Instances with at most this many atom pairs are solved with every arc
/// present; larger ones start from nearest-neighbour candidates and add arcs
/// by full pricing until no arc has negative reduced cost.
const DENSE_LIMIT: usize = 250_000;
const CANDIDATES_PER_ATOM: usize = 16;

/// One endpoint of a coupling entry.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Endpoint {
    Atom(usize),
    Origin,
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Endpoint::Atom(i) => write!(f, "{i}"),
            Endpoint::Origin => write!(f, "O"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Entry {
    pub src: Endpoint,
    pub dst: Endpoint,
    pub mass: f64,
}

/// Finite list of pairs `(x, y)`, typically the support of a coupling.
#[derive(Clone, Debug, PartialEq)]
pub struct SupportSet {
    dim: usize,
    pairs: Vec<(Point, Point)>,
}

impl SupportSet {
    pub fn new(dim: usize, pairs: Vec<(Point, Point)>) -> Result<Self> {
        for (x, y) in &pairs {
            for p in [x, y] {
                if p.dim() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        found: p.dim(),
                    });
                }
            }
        }
        Ok(SupportSet { dim, pairs })
    }

    pub fn from_coords(dim: usize, pairs: Vec<(Vec<f64>, Vec<f64>)>) -> Result<Self> {
        let pairs = pairs
            .into_iter()
            .map(|(x, y)| Ok((Point::new(x)?, Point::new(y)?)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(dim, pairs)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn pairs(&self) -> &[(Point, Point)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn push(&mut self, x: Point, y: Point) -> Result<()> {
        if x.dim() != self.dim || y.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: x.dim().max(y.dim()),
            });
        }
        self.pairs.push((x, y));
        Ok(())
    }

    /// Copy with `(0, 0)` appended.
    pub fn with_origin(&self) -> SupportSet {
        let mut s = self.clone();
        s.pairs
            .push((Point::origin(self.dim), Point::origin(self.dim)));
        s
    }

    /// `max(1, max‖x‖ · max‖y‖)`, the scale for inner-product tolerances.
    pub fn scale(&self) -> f64 {
        let mx = self.pairs.iter().map(|(x, _)| x.norm()).fold(0.0, f64::max);
        let my = self.pairs.iter().map(|(_, y)| y.norm()).fold(0.0, f64::max);
        (mx * my).max(1.0)
    }
}

/// Sparse transport plan between two discrete measures and the origin.
#[derive(Clone, Debug, PartialEq)]
pub struct ZeroCoupling {
    sources: DiscreteMeasure,
    targets: DiscreteMeasure,
    entries: Vec<Entry>,
    cost: f64,
}

impl ZeroCoupling {
    /// Validates indices, positivity of masses and the absence of
    /// origin-to-origin entries. Margins are not enforced here; see
    /// [`check_margins`].
    pub fn new(
        sources: DiscreteMeasure,
        targets: DiscreteMeasure,
        entries: Vec<Entry>,
    ) -> Result<Self> {
        if sources.dim() != targets.dim() {
            return Err(Error::DimensionMismatch {
                expected: sources.dim(),
                found: targets.dim(),
            });
        }
        for (k, e) in entries.iter().enumerate() {
            if e.src == Endpoint::Origin && e.dst == Endpoint::Origin {
                return Err(Error::InvalidArgument(format!(
                    "entry {k} joins the origin to itself"
                )));
            }
            if !(e.mass > 0.0) || !e.mass.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "entry {k} has non-positive mass {}",
                    e.mass
                )));
            }
            if let Endpoint::Atom(i) = e.src {
                if i >= sources.len() {
                    return Err(Error::InvalidArgument(format!(
                        "entry {k}: source index {i} out of range"
                    )));
                }
            }
            if let Endpoint::Atom(j) = e.dst {
                if j >= targets.len() {
                    return Err(Error::InvalidArgument(format!(
                        "entry {k}: target index {j} out of range"
                    )));
                }
            }
        }
        let mut g = ZeroCoupling {
            sources,
            targets,
            entries,
            cost: 0.0,
        };
        g.cost = coupling_cost(&g);
        Ok(g)
    }

    pub fn dim(&self) -> usize {
        self.sources.dim()
    }

    pub fn sources(&self) -> &DiscreteMeasure {
        &self.sources
    }

    pub fn targets(&self) -> &DiscreteMeasure {
        &self.targets
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn cost(&self) -> f64 {
        self.cost
    }

    pub fn source_point(&self, e: Endpoint) -> Point {
        match e {
            Endpoint::Atom(i) => self.sources.point(i).clone(),
            Endpoint::Origin => Point::origin(self.dim()),
        }
    }

    pub fn target_point(&self, e: Endpoint) -> Point {
        match e {
            Endpoint::Atom(j) => self.targets.point(j).clone(),
            Endpoint::Origin => Point::origin(self.dim()),
        }
    }

    /// Support pairs in entry order, origin endpoints as the zero vector.
    pub fn support(&self) -> SupportSet {
        let pairs = self
            .entries
            .iter()
            .map(|e| (self.source_point(e.src), self.target_point(e.dst)))
            .collect();
        SupportSet {
            dim: self.dim(),
            pairs,
        }
    }

    /// Total mass carried by the entries.
    pub fn total_mass(&self) -> f64 {
        self.entries.iter().fold(0.0, |acc, e| acc + e.mass)
    }
}

/// `Σ mass · ‖x − y‖²` over entries, in entry order.
pub fn coupling_cost(g: &ZeroCoupling) -> f64 {
    g.entries.iter().fold(0.0, |acc, e| {
        let c = entry_cost(&g.sources, &g.targets, e.src, e.dst);
        acc + e.mass * c
    })
}

fn entry_cost(mu: &DiscreteMeasure, nu: &DiscreteMeasure, src: Endpoint, dst: Endpoint) -> f64 {
    match (src, dst) {
        (Endpoint::Atom(i), Endpoint::Atom(j)) => mu.point(i).dist_sq(nu.point(j)),
        (Endpoint::Atom(i), Endpoint::Origin) => mu.point(i).norm_sq(),
        (Endpoint::Origin, Endpoint::Atom(j)) => nu.point(j).norm_sq(),
        (Endpoint::Origin, Endpoint::Origin) => 0.0,
    }
}

/// Routes every source atom to the origin and feeds every target atom from it.
pub fn trivial_zero_coupling(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<ZeroCoupling> {
    let mut entries = Vec::with_capacity(mu.len() + nu.len());
    for (i, a) in mu.atoms().iter().enumerate() {
        entries.push(Entry {
            src: Endpoint::Atom(i),
            dst: Endpoint::Origin,
            mass: a.weight,
        });
    }
    for (j, a) in nu.atoms().iter().enumerate() {
        entries.push(Entry {
            src: Endpoint::Origin,
            dst: Endpoint::Atom(j),
            mass: a.weight,
        });
    }
    ZeroCoupling::new(mu.clone(), nu.clone(), entries)
}

/// Worst per-atom relative margin errors.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MarginReport {
    pub max_left_violation: f64,
    pub max_right_violation: f64,
}

pub fn check_margins(g: &ZeroCoupling) -> MarginReport {
    let mut left = vec![0.0; g.sources.len()];
    let mut right = vec![0.0; g.targets.len()];
    for e in &g.entries {
        if let Endpoint::Atom(i) = e.src {
            left[i] += e.mass;
        }
        if let Endpoint::Atom(j) = e.dst {
            right[j] += e.mass;
        }
    }
    let worst = |sums: &[f64], m: &DiscreteMeasure| {
        sums.iter()
            .zip(m.atoms())
            .map(|(s, a)| (s - a.weight).abs() / a.weight)
            .fold(0.0, f64::max)
    };
    MarginReport {
        max_left_violation: worst(&left, &g.sources),
        max_right_violation: worst(&right, &g.targets),
    }
}

/// Minimum-cost zero-coupling by network simplex.
///
/// With `reservoir = true` the origin acts as an unbounded source and sink
/// at quadratic cost, so any pair of measures is feasible. With
/// `reservoir = false` the total masses must agree within [`MARGIN_TOL`]
/// and the output is an ordinary coupling.
pub fn solve_zero_coupling(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    reservoir: bool,
) -> Result<ZeroCoupling> {
    if mu.dim() != nu.dim() {
        return Err(Error::DimensionMismatch {
            expected: mu.dim(),
            found: nu.dim(),
        });
    }
    let (sm, sn) = (mu.total_mass(), nu.total_mass());
    if !reservoir && (sm - sn).abs() > MARGIN_TOL * sm.max(sn) {
        return Err(Error::Unbalanced {
            source_mass: sm,
            target_mass: sn,
        });
    }
    if mu.is_empty() && nu.is_empty() {
        return ZeroCoupling::new(mu.clone(), nu.clone(), Vec::new());
    }
    let (m, n) = (mu.len(), nu.len());
    let max_x = mu
        .atoms()
        .iter()
        .map(|a| a.point.norm())
        .fold(0.0, f64::max);
    let max_y = nu
        .atoms()
        .iter()
        .map(|a| a.point.norm())
        .fold(0.0, f64::max);
    let cost_bound = (max_x + max_y).powi(2).max(f64::MIN_POSITIVE);

    let supplies: Vec<f64> = mu.atoms().iter().map(|a| a.weight).collect();
    let demands: Vec<f64> = nu.atoms().iter().map(|a| a.weight).collect();
    let (to_sink, from_source): (Vec<f64>, Vec<f64>) = if reservoir {
        (
            mu.atoms().iter().map(|a| a.point.norm_sq()).collect(),
            nu.atoms().iter().map(|a| a.point.norm_sq()).collect(),
        )
    } else {
        // any plan routing mass through the origin is beaten by a direct one
        let big = cost_bound + 1.0;
        (vec![big; m], vec![big; n])
    };
    let mut ns = NetworkSimplex::new(
        &supplies,
        &demands,
        &to_sink,
        &from_source,
        cost_bound + 1.0,
    );

    let cost = |i: usize, j: usize| mu.point(i).dist_sq(nu.point(j));
    if m * n <= DENSE_LIMIT {
        for i in 0..m {
            for j in 0..n {
                ns.add_arc(i, j, cost(i, j));
            }
        }
        ns.run();
    } else {
        let mut trees = build_trees(mu, nu);
        for (i, j) in nearest_candidates(&trees, mu, nu, CANDIDATES_PER_ATOM) {
            ns.add_arc(i, j, cost(i, j));
        }
        loop {
            ns.run();
            if price_all(&mut ns, &mut trees, mu, nu) == 0 {
                break;
            }
        }
    }
    extract(&ns, mu, nu, reservoir)
}

/// Adds, for every source and every target, its most negative reduced-cost
/// arc over the full bipartite graph. Returns the number of arcs added.
///
/// The reduced cost of `i → j` is `‖x_i − y_j‖² + π_i − π_j`, so the best
/// target of a source is a weighted nearest-point query with weights `−π_j`,
/// and symmetrically for targets.
fn price_all(
    ns: &mut NetworkSimplex,
    trees: &mut (KdTree, KdTree),
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
) -> usize {
    let (m, n) = (mu.len(), nu.len());
    let eps = ns.eps();
    let (by_target, by_source) = trees;
    let neg_pi_tgt: Vec<f64> = (0..n).map(|j| -ns.potential(m + j)).collect();
    let pi_src: Vec<f64> = (0..m).map(|i| ns.potential(i)).collect();
    by_target.set_weights(&neg_pi_tgt);
    by_source.set_weights(&pi_src);
    let mut new_arcs = Vec::new();
    for i in 0..m {
        if let Some((_, j)) = by_target.min_weighted(mu.point(i).coords(), -eps - pi_src[i]) {
            new_arcs.push((i, j));
        }
    }
    for j in 0..n {
        if let Some((_, i)) = by_source.min_weighted(nu.point(j).coords(), -eps - neg_pi_tgt[j]) {
            new_arcs.push((i, j));
        }
    }
    let mut added = 0;
    for (i, j) in new_arcs {
        if ns.add_arc(i, j, mu.point(i).dist_sq(nu.point(j))) {
            added += 1;
        }
    }
    added
}

/// Trees over the target and source atoms.
fn build_trees(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> (KdTree, KdTree) {
    let xs: Vec<&[f64]> = mu.atoms().iter().map(|a| a.point.coords()).collect();
    let ys: Vec<&[f64]> = nu.atoms().iter().map(|a| a.point.coords()).collect();
    (KdTree::new(nu.dim(), &ys), KdTree::new(mu.dim(), &xs))
}

/// `k` nearest targets of every source and `k` nearest sources of every target.
fn nearest_candidates(
    trees: &(KdTree, KdTree),
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    k: usize,
) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity((mu.len() + nu.len()) * k);
    for i in 0..mu.len() {
        out.extend(
            trees
                .0
                .nearest(mu.point(i).coords(), k)
                .into_iter()
                .map(|j| (i, j)),
        );
    }
    for j in 0..nu.len() {
        out.extend(
            trees
                .1
                .nearest(nu.point(j).coords(), k)
                .into_iter()
                .map(|i| (i, j)),
        );
    }
    out
}

fn extract(
    ns: &NetworkSimplex,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    reservoir: bool,
) -> Result<ZeroCoupling> {
    let m = mu.len();
    let s_o = ns.source_reservoir();
    let t_o = ns.sink_reservoir();
    // flows this small are cancellation residue of degenerate pivots
    let residue = 1e-14 * (mu.total_mass() + nu.total_mass());
    let mut entries = Vec::new();
    for (a, arc) in ns.arcs.iter().enumerate() {
        let f = ns.flow[a];
        if f <= residue {
            continue;
        }
        let src = if arc.tail == s_o {
            Endpoint::Origin
        } else {
            Endpoint::Atom(arc.tail)
        };
        let dst = if arc.head == t_o {
            Endpoint::Origin
        } else {
            Endpoint::Atom(arc.head - m)
        };
        if src == Endpoint::Origin && dst == Endpoint::Origin {
            continue;
        }
        entries.push(Entry { src, dst, mass: f });
    }
    if !reservoir {
        // rounding residue on the reservoir arcs of a balanced problem
        let total = mu.total_mass().max(nu.total_mass());
        let leaked: f64 = entries
            .iter()
            .filter(|e| e.src == Endpoint::Origin || e.dst == Endpoint::Origin)
            .map(|e| e.mass)
            .sum();
        if leaked > MARGIN_TOL * total {
            return Err(Error::Unbalanced {
                source_mass: mu.total_mass(),
                target_mass: nu.total_mass(),
            });
        }
        entries.retain(|e| e.src != Endpoint::Origin && e.dst != Endpoint::Origin);
    }
    entries.sort_by(|a, b| (a.src, a.dst).cmp(&(b.src, b.dst)));
    ZeroCoupling::new(mu.clone(), nu.clone(), entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn line(points: &[(f64, f64)]) -> DiscreteMeasure {
        DiscreteMeasure::from_pairs(1, points.iter().map(|&(x, w)| (vec![x], w)).collect()).unwrap()
    }

    #[test]
    fn trivial_plan_of_sign_separated_pair() {
        let mu = line(&[(1.0, 1.0), (2.0, 1.0)]);
        let nu = line(&[(-1.0, 1.0), (-2.0, 1.0)]);
        let g = trivial_zero_coupling(&mu, &nu).unwrap();
        assert_eq!(g.cost(), 10.0);
        assert_eq!(g.entries().len(), 4);
        assert_eq!(
            check_margins(&g),
            MarginReport {
                max_left_violation: 0.0,
                max_right_violation: 0.0
            }
        );
    }

    #[test]
    fn empty_inputs() {
        let e = DiscreteMeasure::empty(2);
        let g = trivial_zero_coupling(&e, &e).unwrap();
        assert!(g.entries().is_empty());
        assert_eq!(g.cost(), 0.0);
        let g = solve_zero_coupling(&e, &e, false).unwrap();
        assert!(g.entries().is_empty());
    }

    #[test]
    fn identical_measures_cost_nothing() {
        let mu = DiscreteMeasure::from_pairs(
            2,
            vec![
                (vec![1.0, 0.0], 0.3),
                (vec![0.0, 2.0], 0.5),
                (vec![-1.0, -1.0], 0.2),
            ],
        )
        .unwrap();
        for reservoir in [false, true] {
            let g = solve_zero_coupling(&mu, &mu, reservoir).unwrap();
            assert_eq!(g.cost(), 0.0);
            assert!(g.entries().iter().all(|e| match (e.src, e.dst) {
                (Endpoint::Atom(i), Endpoint::Atom(j)) => i == j,
                _ => false,
            }));
        }
    }

    #[test]
    fn reservoir_beats_crossing() {
        let mu = line(&[(1.0, 1.0), (2.0, 1.0)]);
        let nu = line(&[(-1.0, 1.0), (-2.0, 1.0)]);
        let g = solve_zero_coupling(&mu, &nu, true).unwrap();
        assert_relative_eq!(g.cost(), 10.0, max_relative = 1e-12);
        assert!(g
            .entries()
            .iter()
            .all(|e| e.src == Endpoint::Origin || e.dst == Endpoint::Origin));
    }

    #[test]
    fn order_preserving_matching() {
        let mu = line(&[(1.0, 1.0), (2.0, 1.0)]);
        let nu = line(&[(1.5, 1.0), (3.0, 1.0)]);
        let g = solve_zero_coupling(&mu, &nu, false).unwrap();
        assert_relative_eq!(g.cost(), 1.25, max_relative = 1e-12);
        let pairs: Vec<_> = g.entries().iter().map(|e| (e.src, e.dst)).collect();
        assert_eq!(
            pairs,
            vec![
                (Endpoint::Atom(0), Endpoint::Atom(0)),
                (Endpoint::Atom(1), Endpoint::Atom(1))
            ]
        );
    }

    #[test]
    fn unbalanced_without_reservoir() {
        let mu = line(&[(1.0, 1.0)]);
        let nu = line(&[(1.0, 2.0)]);
        assert!(matches!(
            solve_zero_coupling(&mu, &nu, false),
            Err(Error::Unbalanced { .. })
        ));
    }

    #[test]
    fn dropped_arc_shows_in_margins() {
        let mu = line(&[(1.0, 2.0)]);
        let nu = line(&[(1.0, 2.0)]);
        let g = ZeroCoupling::new(
            mu,
            nu,
            vec![Entry {
                src: Endpoint::Atom(0),
                dst: Endpoint::Atom(0),
                mass: 1.5,
            }],
        )
        .unwrap();
        let r = check_margins(&g);
        assert_relative_eq!(r.max_left_violation, 0.25);
        assert_relative_eq!(r.max_right_violation, 0.25);
    }

    #[test]
    fn single_entry_cost() {
        let mu = DiscreteMeasure::from_pairs(2, vec![(vec![3.0, 4.0], 2.0)]).unwrap();
        let g = ZeroCoupling::new(
            mu,
            DiscreteMeasure::empty(2),
            vec![Entry {
                src: Endpoint::Atom(0),
                dst: Endpoint::Origin,
                mass: 2.0,
            }],
        )
        .unwrap();
        assert_eq!(coupling_cost(&g), 50.0);
    }

    #[test]
    fn origin_to_origin_rejected() {
        let e = DiscreteMeasure::empty(1);
        let r = ZeroCoupling::new(
            e.clone(),
            e,
            vec![Entry {
                src: Endpoint::Origin,
                dst: Endpoint::Origin,
                mass: 1.0,
            }],
        );
        assert!(r.is_err());
    }
}
