//! Exhaustive optimum over basic feasible solutions.
//!
//! Every basis of a balanced transportation tableau with `R` rows and `C`
//! columns is a spanning tree of the complete bipartite graph `K_{R,C}`; its
//! flows follow by peeling leaves. Enumerating all spanning trees therefore
//! visits every vertex of the transportation polytope. The reservoir adds a
//! row for the origin as a source (supply `Σν`) and a column for the origin
//! as a sink (demand `Σμ`).

use super::{Endpoint, Entry, ZeroCoupling, MARGIN_TOL};
use crate::error::{Error, Result};
use crate::measures::DiscreteMeasure;

const MAX_CELLS: usize = 30;

struct Tableau {
    rows: usize,
    cols: usize,
    supply: Vec<f64>,
    demand: Vec<f64>,
    cost: Vec<f64>,
}

struct Search<'a> {
    t: &'a Tableau,
    chosen: Vec<usize>,
    uf: UnionFind,
    best_cost: f64,
    best_flow: Option<Vec<(usize, f64)>>,
    feas_tol: f64,
}

/// Exact optimum by vertex enumeration; returns the cost and one optimal plan.
///
/// Limited to `(#sources + 1) · (#targets + 1) ≤ 30`.
pub fn brute_force_min_cost(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    reservoir: bool,
) -> Result<(f64, ZeroCoupling)> {
    if mu.dim() != nu.dim() {
        return Err(Error::DimensionMismatch {
            expected: mu.dim(),
            found: nu.dim(),
        });
    }
    let (m, n) = (mu.len(), nu.len());
    let cells = (m + 1) * (n + 1);
    if cells > MAX_CELLS {
        return Err(Error::OracleLimitExceeded { cells });
    }
    let (sm, sn) = (mu.total_mass(), nu.total_mass());
    if !reservoir && (sm - sn).abs() > MARGIN_TOL * sm.max(sn) {
        return Err(Error::Unbalanced {
            source_mass: sm,
            target_mass: sn,
        });
    }
    if m + n == 0 || (!reservoir && (m == 0 || n == 0)) {
        return Ok((0.0, ZeroCoupling::new(mu.clone(), nu.clone(), Vec::new())?));
    }

    let (rows, cols) = if reservoir { (m + 1, n + 1) } else { (m, n) };
    let mut supply: Vec<f64> = mu.atoms().iter().map(|a| a.weight).collect();
    let mut demand: Vec<f64> = nu.atoms().iter().map(|a| a.weight).collect();
    if reservoir {
        supply.push(sn);
        demand.push(sm);
    }
    let mut cost = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            cost[r * cols + c] = match (r < m, c < n) {
                (true, true) => mu.point(r).dist_sq(nu.point(c)),
                (true, false) => mu.point(r).norm_sq(),
                (false, true) => nu.point(c).norm_sq(),
                (false, false) => 0.0,
            };
        }
    }
    let t = Tableau {
        rows,
        cols,
        supply,
        demand,
        cost,
    };
    let mut s = Search {
        t: &t,
        chosen: Vec::new(),
        uf: UnionFind::new(rows + cols),
        best_cost: f64::INFINITY,
        best_flow: None,
        feas_tol: 1e-12 * (sm + sn),
    };
    s.enumerate(0);
    let flows = s.best_flow.expect("the trivial plan is a feasible basis");

    let mut entries = Vec::new();
    for (cell, f) in flows {
        if f <= 0.0 {
            continue;
        }
        let (r, c) = (cell / cols, cell % cols);
        let src = if r < m {
            Endpoint::Atom(r)
        } else {
            Endpoint::Origin
        };
        let dst = if c < n {
            Endpoint::Atom(c)
        } else {
            Endpoint::Origin
        };
        if src == Endpoint::Origin && dst == Endpoint::Origin {
            continue;
        }
        entries.push(Entry { src, dst, mass: f });
    }
    entries.sort_by(|a, b| (a.src, a.dst).cmp(&(b.src, b.dst)));
    let plan = ZeroCoupling::new(mu.clone(), nu.clone(), entries)?;
    Ok((s.best_cost, plan))
}

impl Search<'_> {
    fn enumerate(&mut self, next: usize) {
        let need = self.t.rows + self.t.cols - 1;
        let total = self.t.rows * self.t.cols;
        if self.chosen.len() == need {
            self.evaluate();
            return;
        }
        if total - next < need - self.chosen.len() {
            return;
        }
        let (r, c) = (next / self.t.cols, next % self.t.cols);
        let (a, b) = (r, self.t.rows + c);
        if self.uf.find(a) != self.uf.find(b) {
            let mark = self.uf.union(a, b);
            self.chosen.push(next);
            self.enumerate(next + 1);
            self.chosen.pop();
            self.uf.undo(mark);
        }
        self.enumerate(next + 1);
    }

    /// Peels leaves of the chosen tree to obtain its unique flows.
    fn evaluate(&mut self) {
        let t = self.t;
        let mut rem_s = t.supply.clone();
        let mut rem_d = t.demand.clone();
        let mut alive = vec![true; self.chosen.len()];
        let mut deg = vec![0usize; t.rows + t.cols];
        for &cell in &self.chosen {
            deg[cell / t.cols] += 1;
            deg[t.rows + cell % t.cols] += 1;
        }
        let mut flows = Vec::with_capacity(self.chosen.len());
        for _ in 0..self.chosen.len() {
            let mut peeled = false;
            for (k, &cell) in self.chosen.iter().enumerate() {
                if !alive[k] {
                    continue;
                }
                let (r, c) = (cell / t.cols, cell % t.cols);
                let f = if deg[r] == 1 {
                    rem_s[r]
                } else if deg[t.rows + c] == 1 {
                    rem_d[c]
                } else {
                    continue;
                };
                if f < -self.feas_tol {
                    return;
                }
                let f = f.max(0.0);
                rem_s[r] -= f;
                rem_d[c] -= f;
                deg[r] -= 1;
                deg[t.rows + c] -= 1;
                alive[k] = false;
                flows.push((cell, f));
                peeled = true;
                break;
            }
            debug_assert!(peeled, "a tree always has a leaf");
        }
        let cost: f64 = flows.iter().map(|&(cell, f)| f * t.cost[cell]).sum();
        if cost < self.best_cost {
            self.best_cost = cost;
            flows.sort_by_key(|&(cell, _)| cell);
            self.best_flow = Some(flows);
        }
    }
}

/// Union-find with union by size and an undo log (no path compression).
struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
    log: Vec<(usize, usize)>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            size: vec![1; n],
            log: Vec::new(),
        }
    }

    fn find(&self, mut x: usize) -> usize {
        while self.parent[x] != x {
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> usize {
        let mark = self.log.len();
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        self.log.push((ra, rb));
        mark
    }

    fn undo(&mut self, mark: usize) {
        while self.log.len() > mark {
            let (ra, rb) = self.log.pop().unwrap();
            self.parent[rb] = rb;
            self.size[ra] -= self.size[rb];
        }
    }
}
