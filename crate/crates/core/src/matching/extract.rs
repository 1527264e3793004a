//! Linear-time extraction of congruent pairs for same-kind registration.

use std::collections::HashMap;

use super::conditions::check_conditions_cc;
use super::index::{CorrespondenceOrder, MatchCandidate, PairRecord};
use crate::differential::OrientedCloud;
use crate::geometry::{compute_descriptor, Descriptor, DescriptorGuards, Point3, PointVectorTuple};

type Cell = (i64, i64, i64);

/// Uniform grid whose cell edge bounds the largest baseline searched, so all
/// partners of a point sit in its 27-cell neighbourhood.
struct PairGrid {
    cell: f64,
    cells: HashMap<Cell, Vec<u32>>,
}

impl PairGrid {
    fn new(points: &[Point3], cell: f64) -> Self {
        let mut cells: HashMap<Cell, Vec<u32>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            cells.entry(Self::key(p, cell)).or_default().push(i as u32);
        }
        Self { cell, cells }
    }

    fn key(p: &Point3, cell: f64) -> Cell {
        (
            (p.x / cell).floor() as i64,
            (p.y / cell).floor() as i64,
            (p.z / cell).floor() as i64,
        )
    }

    fn neighbourhood<'a>(&'a self, p: &Point3) -> impl Iterator<Item = u32> + 'a {
        let (cx, cy, cz) = Self::key(p, self.cell);
        (-1..=1).flat_map(move |dx| {
            (-1..=1).flat_map(move |dy| {
                (-1..=1).flat_map(move |dz| {
                    self.cells
                        .get(&(cx + dx, cy + dy, cz + dz))
                        .into_iter()
                        .flatten()
                        .copied()
                })
            })
        })
    }
}

/// Target pairs at distance `λ ± tol_len` whose descriptor (in either point
/// order) satisfies the equality conditions; sorted by `(i, j, order)`.
pub fn extract_pairs_cc(
    target: &OrientedCloud,
    g: &Descriptor,
    tol_len: f64,
    tol_ang: f64,
    guards: &DescriptorGuards,
) -> Vec<MatchCandidate> {
    let mut out = Vec::new();
    if target.len() < 2 || !(g.lambda > 0.0) {
        return out;
    }
    let r_lo = (g.lambda - tol_len).max(0.0);
    let r_hi = g.lambda + tol_len;
    let grid = PairGrid::new(&target.points, r_hi);
    let guards = DescriptorGuards {
        d_min: 0.0,
        elevation_margin: guards.elevation_margin,
    };
    for (i, p) in target.points.iter().enumerate() {
        for j in grid.neighbourhood(p) {
            let j = j as usize;
            if j <= i {
                continue;
            }
            let dist = (target.points[j] - p).norm();
            if dist < r_lo || dist > r_hi {
                continue;
            }
            let t = PointVectorTuple::new(*p, target.points[j], target.dirs[i], target.dirs[j], target.kind);
            for (tuple, order, mirrored) in [
                (t, CorrespondenceOrder::Direct, false),
                (t.swapped(), CorrespondenceOrder::Switched, true),
            ] {
                let Ok(gamma) = compute_descriptor(&tuple, &guards) else {
                    continue;
                };
                if check_conditions_cc(g, &gamma, tol_len, tol_ang) {
                    out.push(MatchCandidate {
                        record: PairRecord {
                            i: i as u32,
                            j: j as u32,
                            gamma,
                            mirrored,
                        },
                        order,
                    });
                }
            }
        }
    }
    out.sort_unstable_by_key(|c| c.key());
    out
}

/// Every target pair up to `max_len`, in both point orders, sorted by
/// baseline. Answers the same queries as [`extract_pairs_cc`] with one
/// binary search and a slab scan, for many queries against one target.
#[derive(Debug, Clone)]
pub struct SameKindPairs<'a> {
    target: &'a OrientedCloud,
    guards: DescriptorGuards,
    max_len: f64,
    entries: Vec<PairRecord>,
}

impl<'a> SameKindPairs<'a> {
    /// Largest table built; bigger targets are answered by extraction.
    pub const MAX_ENTRIES: usize = 4_000_000;

    pub fn build(target: &'a OrientedCloud, max_len: f64, guards: &DescriptorGuards) -> Self {
        let guards = DescriptorGuards {
            d_min: 0.0,
            elevation_margin: guards.elevation_margin,
        };
        let n = target.len();
        let mut entries = Vec::new();
        if n.saturating_mul(n.saturating_sub(1)) <= Self::MAX_ENTRIES {
            for i in 0..n {
                for j in i + 1..n {
                    let t = PointVectorTuple::new(target.points[i], target.points[j], target.dirs[i], target.dirs[j], target.kind);
                    if t.length() > max_len {
                        continue;
                    }
                    for (tuple, mirrored) in [(t, false), (t.swapped(), true)] {
                        if let Ok(gamma) = compute_descriptor(&tuple, &guards) {
                            entries.push(PairRecord {
                                i: i as u32,
                                j: j as u32,
                                gamma,
                                mirrored,
                            });
                        }
                    }
                }
            }
            entries.sort_unstable_by(|a, b| a.gamma.lambda.total_cmp(&b.gamma.lambda));
        } else {
            // Queries fall through to extraction.
            return Self {
                target,
                guards,
                max_len: f64::NEG_INFINITY,
                entries,
            };
        }
        Self {
            target,
            guards,
            max_len,
            entries,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn query(&self, g: &Descriptor, tol_len: f64, tol_ang: f64) -> Vec<MatchCandidate> {
        let r_hi = g.lambda + tol_len;
        if !(g.lambda > 0.0) || r_hi > self.max_len {
            return extract_pairs_cc(self.target, g, tol_len, tol_ang, &self.guards);
        }
        let r_lo = (g.lambda - tol_len).max(0.0);
        let from = self.entries.partition_point(|e| e.gamma.lambda < r_lo);
        let mut out: Vec<MatchCandidate> = self.entries[from..]
            .iter()
            .take_while(|e| e.gamma.lambda <= r_hi)
            .filter(|e| check_conditions_cc(g, &e.gamma, tol_len, tol_ang))
            .map(|&record| MatchCandidate {
                record,
                order: if record.mirrored {
                    CorrespondenceOrder::Switched
                } else {
                    CorrespondenceOrder::Direct
                },
            })
            .collect();
        out.sort_unstable_by_key(|c| c.key());
        out
    }
}

/// Tuple on the target ordered to correspond with the source's `(P, Q)`.
pub fn target_tuple(target: &OrientedCloud, cand: &MatchCandidate) -> PointVectorTuple {
    let (a, b) = cand.target_indices();
    PointVectorTuple::new(
        target.points[a],
        target.points[b],
        target.dirs[a],
        target.dirs[b],
        target.kind,
    )
}
