//! Static 3-D R-tree over points, bulk loaded with sort-tile-recursive packing.

const NODE_CAPACITY: usize = 16;

#[derive(Debug, Clone, Copy)]
struct NodeBox {
    min: [f64; 3],
    max: [f64; 3],
    /// Child range in the level below, or item range for leaves.
    start: u32,
    end: u32,
}

impl NodeBox {
    fn overlaps(&self, lo: &[f64; 3], hi: &[f64; 3]) -> bool {
        (0..3).all(|a| self.min[a] <= hi[a] && self.max[a] >= lo[a])
    }
}

#[derive(Debug, Clone, Default)]
pub struct PackedRTree {
    coords: Vec<[f64; 3]>,
    ids: Vec<u32>,
    /// `levels[0]` holds the leaves; the last level holds the root.
    levels: Vec<Vec<NodeBox>>,
}

impl PackedRTree {
    pub fn bulk_load(points: &[[f64; 3]]) -> Self {
        let n = points.len();
        if n == 0 {
            return Self::default();
        }
        let mut ids: Vec<u32> = (0..n as u32).collect();
        let leaf_count = n.div_ceil(NODE_CAPACITY);
        let slices = (leaf_count as f64).cbrt().ceil() as usize;
        let by = |axis: usize| move |a: &u32, b: &u32| points[*a as usize][axis].total_cmp(&points[*b as usize][axis]);
        ids.sort_by(by(0));
        let x_run = NODE_CAPACITY * slices * slices;
        let y_run = NODE_CAPACITY * slices;
        for xs in ids.chunks_mut(x_run) {
            xs.sort_by(by(1));
            for ys in xs.chunks_mut(y_run) {
                ys.sort_by(by(2));
            }
        }
        let coords: Vec<[f64; 3]> = ids.iter().map(|&i| points[i as usize]).collect();

        let mut leaves = Vec::with_capacity(leaf_count);
        for (k, chunk) in coords.chunks(NODE_CAPACITY).enumerate() {
            let start = k * NODE_CAPACITY;
            let mut b = NodeBox {
                min: [f64::INFINITY; 3],
                max: [f64::NEG_INFINITY; 3],
                start: start as u32,
                end: (start + chunk.len()) as u32,
            };
            for c in chunk {
                for a in 0..3 {
                    b.min[a] = b.min[a].min(c[a]);
                    b.max[a] = b.max[a].max(c[a]);
                }
            }
            leaves.push(b);
        }
        let mut levels = vec![leaves];
        while levels.last().unwrap().len() > 1 {
            let below = levels.last().unwrap();
            let parents = below
                .chunks(NODE_CAPACITY)
                .enumerate()
                .map(|(k, chunk)| {
                    let start = k * NODE_CAPACITY;
                    let mut b = NodeBox {
                        min: [f64::INFINITY; 3],
                        max: [f64::NEG_INFINITY; 3],
                        start: start as u32,
                        end: (start + chunk.len()) as u32,
                    };
                    for c in chunk {
                        for a in 0..3 {
                            b.min[a] = b.min[a].min(c.min[a]);
                            b.max[a] = b.max[a].max(c.max[a]);
                        }
                    }
                    b
                })
                .collect();
            levels.push(parents);
        }
        Self { coords, ids, levels }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Hands back the storage order of the input items and renumbers them
    /// `0..n` in that order, so callers can lay their payload out to match.
    pub fn take_order(&mut self) -> Vec<u32> {
        let n = self.ids.len() as u32;
        std::mem::replace(&mut self.ids, (0..n).collect())
    }

    /// Calls `visit` with the original index of every point inside the closed
    /// box `[lo, hi]`.
    pub fn query_box(&self, lo: &[f64; 3], hi: &[f64; 3], mut visit: impl FnMut(usize)) {
        if self.is_empty() {
            return;
        }
        let top = self.levels.len() - 1;
        let mut stack = vec![(top, 0usize)];
        while let Some((level, node)) = stack.pop() {
            let b = &self.levels[level][node];
            if !b.overlaps(lo, hi) {
                continue;
            }
            if level == 0 {
                for k in b.start as usize..b.end as usize {
                    let c = &self.coords[k];
                    if (0..3).all(|a| lo[a] <= c[a] && c[a] <= hi[a]) {
                        visit(self.ids[k] as usize);
                    }
                }
            } else {
                stack.extend((b.start as usize..b.end as usize).map(|c| (level - 1, c)));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn box_queries_match_linear_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in [0usize, 1, 15, 16, 17, 300, 5000] {
            let pts: Vec<[f64; 3]> = (0..n)
                .map(|_| [rng.gen_range(0.0..10.0), rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5)])
                .collect();
            let tree = PackedRTree::bulk_load(&pts);
            assert_eq!(tree.len(), n);
            for _ in 0..50 {
                let lo = [rng.gen_range(0.0..10.0), rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5)];
                let hi = [lo[0] + rng.gen_range(0.0..3.0), lo[1] + 1.0, lo[2] + 0.7];
                let mut got = Vec::new();
                tree.query_box(&lo, &hi, |i| got.push(i));
                got.sort_unstable();
                let expected: Vec<usize> = (0..n)
                    .filter(|&i| (0..3).all(|a| lo[a] <= pts[i][a] && pts[i][a] <= hi[a]))
                    .collect();
                assert_eq!(got, expected);
            }
        }
    }
}
