//! Exact nearest-neighbour search over static 3-D point sets.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::geometry::Point3;

const LEAF_SIZE: usize = 8;

#[derive(Debug, Clone)]
enum Node {
    Leaf { start: u32, end: u32 },
    Split { axis: u8, value: f64, left: u32, right: u32 },
}

/// Balanced k-d tree built once over a point slice.
#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<[f64; 3]>,
    index: Vec<u32>,
    nodes: Vec<Node>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub dist_sq: f64,
}

impl Eq for Neighbor {}

impl PartialOrd for Neighbor {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Neighbor {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist_sq
            .total_cmp(&other.dist_sq)
            .then(self.index.cmp(&other.index))
    }
}

impl KdTree {
    pub fn new(points: &[Point3]) -> Self {
        let pts: Vec<[f64; 3]> = points.iter().map(|p| [p.x, p.y, p.z]).collect();
        let mut index: Vec<u32> = (0..pts.len() as u32).collect();
        let mut nodes = Vec::with_capacity(2 * pts.len() / LEAF_SIZE + 1);
        if !pts.is_empty() {
            build(&pts, &mut index, 0, pts.len(), &mut nodes);
        }
        Self {
            points: pts,
            index,
            nodes,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> Point3 {
        Point3::from(self.points[i])
    }

    pub fn nearest(&self, query: &Point3) -> Option<Neighbor> {
        if self.is_empty() {
            return None;
        }
        let q = [query.x, query.y, query.z];
        let mut best = Neighbor {
            index: usize::MAX,
            dist_sq: f64::INFINITY,
        };
        self.nearest_rec(0, &q, &mut best);
        Some(best)
    }

    /// Whether some point lies within `sqrt(radius_sq)` of `query`; stops at
    /// the first hit.
    pub fn any_within(&self, query: &Point3, radius_sq: f64) -> bool {
        if self.is_empty() {
            return false;
        }
        let q = [query.x, query.y, query.z];
        self.any_within_rec(0, &q, radius_sq)
    }

    /// The `k` nearest points, closest first. Ties break on index.
    pub fn knn(&self, query: &Point3, k: usize) -> Vec<Neighbor> {
        if k == 0 || self.is_empty() {
            return Vec::new();
        }
        let q = [query.x, query.y, query.z];
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.knn_rec(0, &q, k, &mut heap);
        heap.into_sorted_vec()
    }

    fn nearest_rec(&self, node: usize, q: &[f64; 3], best: &mut Neighbor) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.index[start as usize..end as usize] {
                    let d = dist_sq(&self.points[i as usize], q);
                    let cand = Neighbor {
                        index: i as usize,
                        dist_sq: d,
                    };
                    if cand < *best {
                        *best = cand;
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis as usize] - value;
                let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                self.nearest_rec(near as usize, q, best);
                if diff * diff <= best.dist_sq {
                    self.nearest_rec(far as usize, q, best);
                }
            }
        }
    }

    fn any_within_rec(&self, node: usize, q: &[f64; 3], r2: f64) -> bool {
        match self.nodes[node] {
            Node::Leaf { start, end } => self.index[start as usize..end as usize]
                .iter()
                .any(|&i| dist_sq(&self.points[i as usize], q) <= r2),
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis as usize] - value;
                let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                self.any_within_rec(near as usize, q, r2)
                    || (diff * diff <= r2 && self.any_within_rec(far as usize, q, r2))
            }
        }
    }

    fn knn_rec(&self, node: usize, q: &[f64; 3], k: usize, heap: &mut BinaryHeap<Neighbor>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.index[start as usize..end as usize] {
                    let cand = Neighbor {
                        index: i as usize,
                        dist_sq: dist_sq(&self.points[i as usize], q),
                    };
                    if heap.len() < k {
                        heap.push(cand);
                    } else if cand < *heap.peek().unwrap() {
                        heap.pop();
                        heap.push(cand);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis as usize] - value;
                let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                self.knn_rec(near as usize, q, k, heap);
                let worst = if heap.len() < k {
                    f64::INFINITY
                } else {
                    heap.peek().unwrap().dist_sq
                };
                if diff * diff <= worst {
                    self.knn_rec(far as usize, q, k, heap);
                }
            }
        }
    }
}

fn dist_sq(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

fn build(pts: &[[f64; 3]], index: &mut [u32], start: usize, end: usize, nodes: &mut Vec<Node>) -> u32 {
    let id = nodes.len() as u32;
    if end - start <= LEAF_SIZE {
        nodes.push(Node::Leaf {
            start: start as u32,
            end: end as u32,
        });
        return id;
    }
    // Split the widest axis at the median.
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for &i in &index[start..end] {
        for a in 0..3 {
            lo[a] = lo[a].min(pts[i as usize][a]);
            hi[a] = hi[a].max(pts[i as usize][a]);
        }
    }
    let axis = (0..3)
        .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
        .unwrap();
    let mid = (start + end) / 2;
    index[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
        pts[a as usize][axis].total_cmp(&pts[b as usize][axis])
    });
    let value = pts[index[mid] as usize][axis];
    nodes.push(Node::Leaf { start: 0, end: 0 });
    let left = build(pts, index, start, mid, nodes);
    let right = build(pts, index, mid, end, nodes);
    nodes[id as usize] = Node::Split {
        axis: axis as u8,
        value,
        left,
        right,
    };
    id
}

/// Greedy farthest-point subsample of `count` indices, seeded at index 0.
pub fn farthest_point_sample(points: &[Point3], count: usize) -> Vec<usize> {
    if count >= points.len() {
        return (0..points.len()).collect();
    }
    if count == 0 {
        return Vec::new();
    }
    let mut chosen = Vec::with_capacity(count);
    let mut dist = vec![f64::INFINITY; points.len()];
    let mut current = 0usize;
    for _ in 0..count {
        chosen.push(current);
        let c = points[current];
        let mut next = 0usize;
        let mut far = -1.0;
        for (i, p) in points.iter().enumerate() {
            let d = (p - c).norm_squared();
            if d < dist[i] {
                dist[i] = d;
            }
            if dist[i] > far {
                far = dist[i];
                next = i;
            }
        }
        current = next;
    }
    chosen
}

const MAX_GRID_CELLS: f64 = 4.0e6;

/// Fixed-radius membership test over a static point set: answers "is any
/// point within `radius`?" with one cell lookup and, near the boundary of the
/// covered region, a short scan.
#[derive(Debug, Clone)]
pub struct RadiusGrid {
    radius_sq: f64,
    origin: [f64; 3],
    cell: f64,
    dims: [usize; 3],
    /// Per cell: 0 nothing in reach, 1 every location covered, 2 scan needed.
    state: Vec<u8>,
    offsets: Vec<u32>,
    items: Vec<[f64; 3]>,
}

impl RadiusGrid {
    pub fn new(points: &[Point3], radius: f64) -> Self {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in points {
            for a in 0..3 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        if points.is_empty() || !(radius >= 0.0) {
            return Self {
                radius_sq: radius * radius,
                origin: [0.0; 3],
                cell: 1.0,
                dims: [0; 3],
                state: Vec::new(),
                offsets: vec![0],
                items: Vec::new(),
            };
        }
        let extent = (0..3).map(|a| hi[a] - lo[a]).fold(0.0, f64::max);
        let mut cell = radius.max(extent * 1e-3).max(1e-9);
        let (reach, dims) = loop {
            let reach = radius + cell * 0.5 * 3f64.sqrt() * (1.0 + 1e-9) + 1e-12;
            let dims = [0, 1, 2].map(|a| ((hi[a] - lo[a] + 2.0 * reach) / cell).floor() as usize + 1);
            let cells = dims.iter().map(|&d| d as f64).product::<f64>();
            if cells <= MAX_GRID_CELLS {
                break (reach, dims);
            }
            cell *= (cells / MAX_GRID_CELLS).cbrt() * 1.01;
        };
        let origin = [0, 1, 2].map(|a| lo[a] - reach);
        let half_diag = cell * 0.5 * 3f64.sqrt();
        let inner = radius - half_diag * (1.0 + 1e-9) - 1e-12;
        let n_cells = dims[0] * dims[1] * dims[2];
        let mut state = vec![0u8; n_cells];
        let mut counts = vec![0u32; n_cells + 1];
        let visit = |p: &Point3, f: &mut dyn FnMut(usize, f64)| {
            let range = |a: usize| {
                let a0 = ((p[a] - reach - origin[a]) / cell).floor().max(0.0) as usize;
                let a1 = (((p[a] + reach - origin[a]) / cell).floor() as usize).min(dims[a] - 1);
                a0..=a1
            };
            for x in range(0) {
                for y in range(1) {
                    for z in range(2) {
                        let c = [x, y, z].map(|k| k as f64 + 0.5);
                        let d2 = (0..3)
                            .map(|a| (origin[a] + c[a] * cell - p[a]).powi(2))
                            .sum::<f64>();
                        f((x * dims[1] + y) * dims[2] + z, d2);
                    }
                }
            }
        };
        let reach_sq = reach * reach;
        for p in points {
            visit(p, &mut |k, d2| {
                if d2 <= reach_sq {
                    if inner > 0.0 && d2 <= inner * inner {
                        state[k] = 1;
                    } else if state[k] == 0 {
                        state[k] = 2;
                    }
                    counts[k + 1] += 1;
                }
            });
        }
        // Covered cells need no scan list.
        for k in 0..n_cells {
            if state[k] != 2 {
                counts[k + 1] = 0;
            }
            counts[k + 1] += counts[k];
        }
        let mut fill = counts.clone();
        let mut items = vec![[0.0; 3]; counts[n_cells] as usize];
        for p in points {
            visit(p, &mut |k, d2| {
                if d2 <= reach_sq && state[k] == 2 {
                    items[fill[k] as usize] = [p.x, p.y, p.z];
                    fill[k] += 1;
                }
            });
        }
        Self {
            radius_sq: radius * radius,
            origin,
            cell,
            dims,
            state,
            offsets: counts,
            items,
        }
    }

    /// Whether some point lies within the radius of `q`.
    pub fn any_within(&self, q: &Point3) -> bool {
        let mut idx = [0usize; 3];
        for a in 0..3 {
            let f = ((q[a] - self.origin[a]) / self.cell).floor();
            if !(f >= 0.0 && f < self.dims[a] as f64) {
                return false;
            }
            idx[a] = f as usize;
        }
        let k = (idx[0] * self.dims[1] + idx[1]) * self.dims[2] + idx[2];
        match self.state[k] {
            0 => false,
            1 => true,
            _ => self.items[self.offsets[k] as usize..self.offsets[k + 1] as usize]
                .iter()
                .any(|c| (c[0] - q.x).powi(2) + (c[1] - q.y).powi(2) + (c[2] - q.z).powi(2) <= self.radius_sq),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cloud(rng: &mut ChaCha8Rng, n: usize) -> Vec<Point3> {
        (0..n)
            .map(|_| Point3::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0), rng.gen_range(-1.0..1.0)))
            .collect()
    }

    #[test]
    fn nearest_and_knn_match_linear_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts = cloud(&mut rng, 700);
        let tree = KdTree::new(&pts);
        for _ in 0..200 {
            let q = Point3::new(rng.gen_range(-6.0..6.0), rng.gen_range(-6.0..6.0), rng.gen_range(-2.0..2.0));
            let mut all: Vec<Neighbor> = pts
                .iter()
                .enumerate()
                .map(|(i, p)| Neighbor {
                    index: i,
                    dist_sq: (p - q).norm_squared(),
                })
                .collect();
            all.sort();
            assert_eq!(tree.nearest(&q).unwrap(), all[0]);
            assert_eq!(tree.knn(&q, 30), all[..30].to_vec());
            let r2 = all[3].dist_sq;
            assert!(tree.any_within(&q, r2));
            assert!(!tree.any_within(&q, all[0].dist_sq * 0.999));
        }
    }

    #[test]
    fn duplicate_points_are_handled() {
        let pts = vec![Point3::new(1.0, 1.0, 1.0); 50];
        let tree = KdTree::new(&pts);
        assert_eq!(tree.knn(&Point3::origin(), 10).len(), 10);
        assert_eq!(tree.nearest(&Point3::new(1.0, 1.0, 1.0)).unwrap().dist_sq, 0.0);
    }

    #[test]
    fn farthest_point_sample_spreads_out() {
        let pts: Vec<Point3> = (0..100).map(|i| Point3::new(i as f64, 0.0, 0.0)).collect();
        let s = farthest_point_sample(&pts, 3);
        assert_eq!(s, vec![0, 99, 49]);
        assert_eq!(farthest_point_sample(&pts, 200).len(), 100);
    }

    #[test]
    fn empty_tree() {
        let tree = KdTree::new(&[]);
        assert!(tree.nearest(&Point3::origin()).is_none());
        assert!(tree.knn(&Point3::origin(), 3).is_empty());
        assert!(!tree.any_within(&Point3::origin(), 1.0));
    }

    #[test]
    fn radius_grid_matches_tree() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for (n, radius) in [(0usize, 0.3), (1, 0.5), (500, 0.2), (2000, 0.7), (300, 3.0)] {
            let pts = cloud(&mut rng, n);
            let tree = KdTree::new(&pts);
            let grid = RadiusGrid::new(&pts, radius);
            for _ in 0..3000 {
                let q = Point3::new(rng.gen_range(-7.0..7.0), rng.gen_range(-7.0..7.0), rng.gen_range(-3.0..3.0));
                assert_eq!(grid.any_within(&q), tree.any_within(&q, radius * radius), "{q:?}");
            }
            // Queries exactly at the data points and just around them.
            for p in pts.iter().take(200) {
                assert!(grid.any_within(p));
                let shifted = p + nalgebra::Vector3::new(radius * 0.999, 0.0, 0.0);
                assert_eq!(grid.any_within(&shifted), tree.any_within(&shifted, radius * radius));
            }
        }
    }
}
