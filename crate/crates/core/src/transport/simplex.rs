//! Primal network simplex for the uncapacitated bipartite transportation
//! problem with the two origin-reservoir nodes.
//!
//! Node layout: sources `0..m`, targets `m..m+n`, the source-side reservoir
//! `m+n` (supply `Σν`) and the sink-side reservoir `m+n+1` (demand `Σμ`).
//! The first `m + n + 1` arcs are the reservoir arcs `i → T_O`, `S_O → j`
//! and the slack `S_O → T_O`; they form the initial spanning tree, which is
//! strongly feasible when rooted at `S_O`. Leaving arcs follow Cunningham's
//! last-blocking-arc rule, so degenerate pivots cannot cycle.

use std::collections::HashSet;

const NONE: usize = usize::MAX;

#[derive(Clone, Copy, Debug)]
pub(crate) struct Arc {
    pub tail: usize,
    pub head: usize,
    pub cost: f64,
}

pub(crate) struct NetworkSimplex {
    m: usize,
    n: usize,
    pub arcs: Vec<Arc>,
    pub flow: Vec<f64>,
    pi: Vec<f64>,
    parent: Vec<usize>,
    pred: Vec<usize>,
    depth: Vec<u32>,
    first_child: Vec<usize>,
    next_sib: Vec<usize>,
    prev_sib: Vec<usize>,
    in_tree: Vec<bool>,
    present: HashSet<(u32, u32)>,
    eps: f64,
    cursor: usize,
}

impl NetworkSimplex {
    /// `to_sink[i]` is the cost of `i → T_O`, `from_source[j]` that of `S_O → j`.
    pub fn new(
        supplies: &[f64],
        demands: &[f64],
        to_sink: &[f64],
        from_source: &[f64],
        cost_scale: f64,
    ) -> Self {
        let (m, n) = (supplies.len(), demands.len());
        let nodes = m + n + 2;
        let s_o = m + n;
        let t_o = m + n + 1;
        let mut arcs = Vec::with_capacity(m + n + 1);
        let mut flow = Vec::with_capacity(m + n + 1);
        for i in 0..m {
            arcs.push(Arc {
                tail: i,
                head: t_o,
                cost: to_sink[i],
            });
            flow.push(supplies[i]);
        }
        for j in 0..n {
            arcs.push(Arc {
                tail: s_o,
                head: m + j,
                cost: from_source[j],
            });
            flow.push(demands[j]);
        }
        arcs.push(Arc {
            tail: s_o,
            head: t_o,
            cost: 0.0,
        });
        flow.push(0.0);

        let mut ns = NetworkSimplex {
            m,
            n,
            in_tree: vec![true; arcs.len()],
            arcs,
            flow,
            pi: vec![0.0; nodes],
            parent: vec![NONE; nodes],
            pred: vec![NONE; nodes],
            depth: vec![0; nodes],
            first_child: vec![NONE; nodes],
            next_sib: vec![NONE; nodes],
            prev_sib: vec![NONE; nodes],
            present: HashSet::new(),
            eps: 1e-12 * cost_scale.max(f64::MIN_POSITIVE),
            cursor: 0,
        };
        let slack = m + n;
        ns.attach(t_o, s_o, slack);
        for j in 0..n {
            ns.attach(m + j, s_o, m + j);
        }
        for i in 0..m {
            ns.attach(i, t_o, i);
        }
        ns.recompute_potentials();
        ns
    }

    pub fn source_reservoir(&self) -> usize {
        self.m + self.n
    }

    pub fn sink_reservoir(&self) -> usize {
        self.m + self.n + 1
    }

    /// Adds the real arc `source i → target j` unless already present.
    pub fn add_arc(&mut self, i: usize, j: usize, cost: f64) -> bool {
        if !self.present.insert((i as u32, j as u32)) {
            return false;
        }
        self.arcs.push(Arc {
            tail: i,
            head: self.m + j,
            cost,
        });
        self.flow.push(0.0);
        self.in_tree.push(false);
        true
    }

    pub fn potential(&self, node: usize) -> f64 {
        self.pi[node]
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    fn attach(&mut self, child: usize, parent: usize, arc: usize) {
        self.parent[child] = parent;
        self.pred[child] = arc;
        self.prev_sib[child] = NONE;
        let head = self.first_child[parent];
        self.next_sib[child] = head;
        if head != NONE {
            self.prev_sib[head] = child;
        }
        self.first_child[parent] = child;
    }

    fn detach(&mut self, child: usize) {
        let p = self.parent[child];
        let (prev, next) = (self.prev_sib[child], self.next_sib[child]);
        if prev != NONE {
            self.next_sib[prev] = next;
        } else {
            self.first_child[p] = next;
        }
        if next != NONE {
            self.prev_sib[next] = prev;
        }
        self.prev_sib[child] = NONE;
        self.next_sib[child] = NONE;
    }

    /// Recomputes potentials and depths from the root along tree arcs,
    /// discarding accumulated rounding drift.
    pub fn recompute_potentials(&mut self) {
        let root = self.source_reservoir();
        self.pi[root] = 0.0;
        self.depth[root] = 0;
        let mut stack = vec![root];
        while let Some(u) = stack.pop() {
            let mut c = self.first_child[u];
            while c != NONE {
                self.set_from_parent(c);
                stack.push(c);
                c = self.next_sib[c];
            }
        }
    }

    fn set_from_parent(&mut self, c: usize) {
        let p = self.parent[c];
        let a = self.arcs[self.pred[c]];
        // tree arcs have zero reduced cost: π_head = π_tail + cost
        self.pi[c] = if a.tail == p {
            self.pi[p] + a.cost
        } else {
            self.pi[p] - a.cost
        };
        self.depth[c] = self.depth[p] + 1;
    }

    #[inline]
    fn reduced_cost(&self, a: usize) -> f64 {
        let arc = &self.arcs[a];
        arc.cost + self.pi[arc.tail] - self.pi[arc.head]
    }

    /// Block-search pricing: scans arcs cyclically in blocks of about √A and
    /// returns the most negative candidate of the first block that has one.
    fn find_entering(&mut self) -> Option<usize> {
        let total = self.arcs.len();
        let block = ((total as f64).sqrt().ceil() as usize).max(10);
        let mut best = NONE;
        let mut best_rc = -self.eps;
        let mut scanned = 0;
        let mut in_block = 0;
        let mut a = self.cursor % total;
        while scanned < total {
            if !self.in_tree[a] {
                let rc = self.reduced_cost(a);
                if rc < best_rc {
                    best_rc = rc;
                    best = a;
                }
            }
            scanned += 1;
            in_block += 1;
            a += 1;
            if a == total {
                a = 0;
            }
            if in_block == block {
                if best != NONE {
                    self.cursor = a;
                    return Some(best);
                }
                in_block = 0;
            }
        }
        self.cursor = a;
        (best != NONE).then_some(best)
    }

    fn pivot(&mut self, e: usize) {
        let Arc {
            tail: first,
            head: second,
            ..
        } = self.arcs[e];
        // join node of the cycle
        let (mut a, mut b) = (first, second);
        while a != b {
            if self.depth[a] >= self.depth[b] {
                a = self.parent[a];
            } else {
                b = self.parent[b];
            }
        }
        let join = a;

        // Cycle orientation: first → second along e, up to join, down to first.
        // Last blocking arc in that orientation leaves (strongly feasible tree).
        let mut delta = f64::INFINITY;
        let mut u_out = NONE;
        let mut out_on_first = false;
        let mut x = first;
        while x != join {
            let arc = self.arcs[self.pred[x]];
            // traversed parent → x
            if arc.tail == x {
                let d = self.flow[self.pred[x]];
                if d < delta {
                    delta = d;
                    u_out = x;
                    out_on_first = true;
                }
            }
            x = self.parent[x];
        }
        let mut x = second;
        while x != join {
            let arc = self.arcs[self.pred[x]];
            // traversed x → parent
            if arc.head == x {
                let d = self.flow[self.pred[x]];
                if d <= delta {
                    delta = d;
                    u_out = x;
                    out_on_first = false;
                }
            }
            x = self.parent[x];
        }
        debug_assert!(u_out != NONE, "bipartite network has no directed cycles");

        if delta > 0.0 {
            self.flow[e] += delta;
            let mut x = first;
            while x != join {
                let pa = self.pred[x];
                if self.arcs[pa].tail == x {
                    self.flow[pa] -= delta;
                } else {
                    self.flow[pa] += delta;
                }
                x = self.parent[x];
            }
            let mut x = second;
            while x != join {
                let pa = self.pred[x];
                if self.arcs[pa].head == x {
                    self.flow[pa] -= delta;
                } else {
                    self.flow[pa] += delta;
                }
                x = self.parent[x];
            }
            // the blocking arc leaves with exactly zero flow
            self.flow[self.pred[u_out]] = 0.0;
        }

        let leaving = self.pred[u_out];
        self.in_tree[leaving] = false;
        self.in_tree[e] = true;

        let (q, other) = if out_on_first {
            (first, second)
        } else {
            (second, first)
        };

        // reverse the path q → u_out so that q roots the detached subtree
        let mut path = vec![q];
        let mut x = q;
        while x != u_out {
            x = self.parent[x];
            path.push(x);
        }
        self.detach(u_out);
        for i in (1..path.len()).rev() {
            let (lower, upper) = (path[i - 1], path[i]);
            let arc = self.pred[lower];
            self.detach(lower);
            self.attach(upper, lower, arc);
        }
        self.attach(q, other, e);

        // shift potentials of the moved subtree
        let old = self.pi[q];
        self.set_from_parent(q);
        let shift = self.pi[q] - old;
        let mut stack = vec![q];
        while let Some(u) = stack.pop() {
            let mut c = self.first_child[u];
            while c != NONE {
                self.pi[c] += shift;
                self.depth[c] = self.depth[u] + 1;
                stack.push(c);
                c = self.next_sib[c];
            }
        }
    }

    /// Pivots until no arc in the current arc set prices out.
    pub fn run(&mut self) {
        let mut since_refresh = 0usize;
        loop {
            match self.find_entering() {
                Some(e) => {
                    self.pivot(e);
                    since_refresh += 1;
                    if since_refresh == 50_000 {
                        self.recompute_potentials();
                        since_refresh = 0;
                    }
                }
                None => {
                    self.recompute_potentials();
                    if self.find_entering().is_none() {
                        return;
                    }
                }
            }
        }
    }
}
