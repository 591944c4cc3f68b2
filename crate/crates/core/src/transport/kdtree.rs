//! Static kd-tree for weighted nearest-point queries.
//!
//! A query at `q` minimises `‖q − p‖² + w_p` over the stored points, where the
//! weights `w` can be replaced between queries. Nodes keep their bounding box
//! and the smallest weight below them. A second bound comes from writing the
//! objective as `‖q‖² − 2⟨q, p⟩ + (‖p‖² + w_p)`; it is the sharper one when
//! the weights nearly cancel `‖p‖²`, as dual potentials of heavy-tailed
//! transport problems tend to do.

const LEAF: usize = 16;

struct Node {
    lo: usize,
    hi: usize,
    left: usize,
    right: usize,
}

pub(crate) struct KdTree {
    dim: usize,
    /// point coordinates in tree order, `dim` values per point
    coords: Vec<f64>,
    /// original index of each point in tree order
    index: Vec<usize>,
    nodes: Vec<Node>,
    bbox: Vec<f64>,
    min_w: Vec<f64>,
    /// smallest `‖p‖² + w_p` below each node
    min_h: Vec<f64>,
    w: Vec<f64>,
}

const NO_CHILD: usize = usize::MAX;

impl KdTree {
    pub fn new(dim: usize, points: &[&[f64]]) -> Self {
        let mut index: Vec<usize> = (0..points.len()).collect();
        let mut t = KdTree {
            dim,
            coords: Vec::new(),
            index: Vec::new(),
            nodes: Vec::new(),
            bbox: Vec::new(),
            min_w: Vec::new(),
            min_h: Vec::new(),
            w: vec![0.0; points.len()],
        };
        if !points.is_empty() {
            t.build(points, &mut index, 0, points.len());
        }
        t.coords = index
            .iter()
            .flat_map(|&i| points[i].iter().copied())
            .collect();
        t.index = index;
        t.min_w = vec![0.0; t.nodes.len()];
        t.min_h = vec![0.0; t.nodes.len()];
        t
    }

    fn build(&mut self, points: &[&[f64]], index: &mut [usize], lo: usize, hi: usize) -> usize {
        let d = self.dim;
        let id = self.nodes.len();
        self.nodes.push(Node {
            lo,
            hi,
            left: NO_CHILD,
            right: NO_CHILD,
        });
        let mut lower = vec![f64::INFINITY; d];
        let mut upper = vec![f64::NEG_INFINITY; d];
        for &i in &index[lo..hi] {
            for k in 0..d {
                lower[k] = lower[k].min(points[i][k]);
                upper[k] = upper[k].max(points[i][k]);
            }
        }
        self.bbox.extend_from_slice(&lower);
        self.bbox.extend_from_slice(&upper);
        if hi - lo > LEAF {
            let axis = (0..d)
                .max_by(|&a, &b| (upper[a] - lower[a]).total_cmp(&(upper[b] - lower[b])))
                .unwrap_or(0);
            let mid = lo + (hi - lo) / 2;
            index[lo..hi].select_nth_unstable_by(mid - lo, |&a, &b| {
                points[a][axis].total_cmp(&points[b][axis])
            });
            let left = self.build(points, index, lo, mid);
            let right = self.build(points, index, mid, hi);
            self.nodes[id].left = left;
            self.nodes[id].right = right;
        }
        id
    }

    /// Replaces the weights; `w[i]` belongs to the `i`-th input point.
    pub fn set_weights(&mut self, w: &[f64]) {
        for (pos, &i) in self.index.iter().enumerate() {
            self.w[pos] = w[i];
        }
        for id in (0..self.nodes.len()).rev() {
            let node = &self.nodes[id];
            if node.left == NO_CHILD {
                let (mut mw, mut mh) = (f64::INFINITY, f64::INFINITY);
                for pos in node.lo..node.hi {
                    let p = &self.coords[pos * self.dim..(pos + 1) * self.dim];
                    let sq: f64 = p.iter().map(|v| v * v).sum();
                    mw = mw.min(self.w[pos]);
                    mh = mh.min(sq + self.w[pos]);
                }
                self.min_w[id] = mw;
                self.min_h[id] = mh;
            } else {
                self.min_w[id] = self.min_w[node.left].min(self.min_w[node.right]);
                self.min_h[id] = self.min_h[node.left].min(self.min_h[node.right]);
            }
        }
    }

    /// Lower bound for the weighted objective over node `id`.
    fn lower_bound(&self, id: usize, q: &[f64], q_sq: f64) -> f64 {
        let d = self.dim;
        let b = &self.bbox[2 * d * id..2 * d * (id + 1)];
        let mut s = 0.0;
        let mut lin = 0.0;
        let mut mag = 0.0;
        for k in 0..d {
            let g = if q[k] < b[k] {
                b[k] - q[k]
            } else if q[k] > b[d + k] {
                q[k] - b[d + k]
            } else {
                0.0
            };
            s += g * g;
            let c = (q[k] * b[k]).max(q[k] * b[d + k]);
            lin += c;
            mag += c.abs();
        }
        let near = s + self.min_w[id];
        let h = self.min_h[id];
        // slack for cancellation in the expanded form
        let lifted = q_sq - 2.0 * lin + h - 8.0 * f64::EPSILON * (q_sq + 2.0 * mag + h.abs());
        near.max(lifted)
    }

    fn box_dist_sq(&self, id: usize, q: &[f64]) -> f64 {
        let d = self.dim;
        let b = &self.bbox[2 * d * id..2 * d * (id + 1)];
        let mut s = 0.0;
        for k in 0..d {
            let g = if q[k] < b[k] {
                b[k] - q[k]
            } else if q[k] > b[d + k] {
                q[k] - b[d + k]
            } else {
                0.0
            };
            s += g * g;
        }
        s
    }

    fn point_dist_sq(&self, pos: usize, q: &[f64]) -> f64 {
        let p = &self.coords[pos * self.dim..(pos + 1) * self.dim];
        p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum()
    }

    /// Point minimising `‖q − p‖² + w_p` among those with value below
    /// `bound`, as `(value, original index)`.
    pub fn min_weighted(&self, q: &[f64], bound: f64) -> Option<(f64, usize)> {
        if self.nodes.is_empty() {
            return None;
        }
        let mut best = (bound, usize::MAX);
        let q_sq: f64 = q.iter().map(|v| v * v).sum();
        self.descend(0, q, q_sq, &mut best);
        (best.1 != usize::MAX).then_some(best)
    }

    fn descend(&self, id: usize, q: &[f64], q_sq: f64, best: &mut (f64, usize)) {
        let node = &self.nodes[id];
        if node.left == NO_CHILD {
            for pos in node.lo..node.hi {
                let v = self.point_dist_sq(pos, q) + self.w[pos];
                if v < best.0 {
                    *best = (v, self.index[pos]);
                }
            }
            return;
        }
        let (l, r) = (node.left, node.right);
        let bl = self.lower_bound(l, q, q_sq);
        let br = self.lower_bound(r, q, q_sq);
        let (first, fb, second, sb) = if bl <= br {
            (l, bl, r, br)
        } else {
            (r, br, l, bl)
        };
        if fb < best.0 {
            self.descend(first, q, q_sq, best);
        }
        if sb < best.0 {
            self.descend(second, q, q_sq, best);
        }
    }

    /// Original indices of the `k` points nearest to `q`, ignoring weights.
    pub fn nearest(&self, q: &[f64], k: usize) -> Vec<usize> {
        let mut heap: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
        if !self.nodes.is_empty() && k > 0 {
            self.knn(0, q, k, &mut heap);
        }
        heap.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        heap.into_iter().map(|(_, i)| i).collect()
    }

    fn knn(&self, id: usize, q: &[f64], k: usize, found: &mut Vec<(f64, usize)>) {
        let worst = |found: &Vec<(f64, usize)>| {
            if found.len() < k {
                f64::INFINITY
            } else {
                found.iter().fold(f64::NEG_INFINITY, |m, e| m.max(e.0))
            }
        };
        let node = &self.nodes[id];
        if node.left == NO_CHILD {
            for pos in node.lo..node.hi {
                let v = self.point_dist_sq(pos, q);
                if found.len() < k {
                    found.push((v, self.index[pos]));
                } else if v < worst(found) {
                    let w = found
                        .iter()
                        .enumerate()
                        .max_by(|a, b| a.1 .0.total_cmp(&b.1 .0))
                        .map(|(i, _)| i)
                        .unwrap();
                    found[w] = (v, self.index[pos]);
                }
            }
            return;
        }
        let (l, r) = (node.left, node.right);
        let (bl, br) = (self.box_dist_sq(l, q), self.box_dist_sq(r, q));
        let (first, second, sb) = if bl <= br { (l, r, br) } else { (r, l, bl) };
        if bl.min(br) < worst(found) {
            self.knn(first, q, k, found);
        }
        if sb < worst(found) {
            self.knn(second, q, k, found);
        }
    }
}
