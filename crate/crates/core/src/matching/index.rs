//! Offline pair table over a surface and its online query.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::conditions::{
    elevation_bounds, necessary_cs_with_slack, simultaneous_residual_cs, simultaneous_residual_terms, SimultaneityTerms,
};
use super::rtree::PackedRTree;
use crate::differential::SurfaceSamples;
use crate::error::MatchingError;
use crate::geometry::{
    compute_descriptor, Descriptor, DescriptorGuards, Point3, PointVectorTuple, UnitVec3, VectorKind,
};
use crate::spatial::farthest_point_sample;

pub const DEFAULT_SUBSAMPLE_SIZE: usize = 1500;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairIndexConfig {
    pub d_min: f64,
    pub d_max: f64,
    pub subsample_size: usize,
    pub elevation_margin: f64,
}

impl PairIndexConfig {
    /// `d_min` at 5% of the diameter, no upper cull, 1500-point subsample.
    pub fn for_diameter(diameter: f64) -> Self {
        Self {
            d_min: 0.05 * diameter,
            d_max: diameter,
            subsample_size: DEFAULT_SUBSAMPLE_SIZE,
            elevation_margin: DescriptorGuards::DEFAULT_ELEVATION_MARGIN,
        }
    }

    pub fn guards(&self) -> DescriptorGuards {
        DescriptorGuards {
            d_min: self.d_min,
            elevation_margin: self.elevation_margin,
        }
    }
}

/// One indexed pair. A mirrored record describes the tuple `(j, i)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub i: u32,
    pub j: u32,
    pub gamma: Descriptor,
    pub mirrored: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrespondenceOrder {
    /// `(P, Q) ↔ (point i, point j)`.
    Direct,
    /// `(P, Q) ↔ (point j, point i)`.
    Switched,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchCandidate {
    pub record: PairRecord,
    pub order: CorrespondenceOrder,
}

impl MatchCandidate {
    /// Target indices corresponding to `(P, Q)`.
    pub fn target_indices(&self) -> (usize, usize) {
        let (i, j) = (self.record.i as usize, self.record.j as usize);
        match self.order {
            CorrespondenceOrder::Direct => (i, j),
            CorrespondenceOrder::Switched => (j, i),
        }
    }

    pub fn key(&self) -> (u32, u32, CorrespondenceOrder) {
        (self.record.i, self.record.j, self.order)
    }
}

/// Query-time tolerances for curve vs surface matching.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueryParams {
    /// Baseline tolerance.
    pub eps: f64,
    /// Widening of the elevation bounds (rad).
    pub angular_slack: f64,
    /// Tolerance on the cosine mismatch of the simultaneity test.
    pub simultaneous_tol: f64,
}

impl QueryParams {
    pub fn exact(eps: f64) -> Self {
        Self {
            eps,
            angular_slack: 0.0,
            simultaneous_tol: 1e-6,
        }
    }
}

/// Whether a record passes the same predicates the R-tree query applies.
pub fn record_matches(g: &Descriptor, record: &PairRecord, params: &QueryParams) -> bool {
    necessary_cs_with_slack(g, &record.gamma, params.eps, params.angular_slack)
        && simultaneous_residual_cs(g, &record.gamma).is_some_and(|r| r <= params.simultaneous_tol)
}

#[derive(Debug, Clone)]
pub struct PairIndex {
    pub config: PairIndexConfig,
    /// Subsampled surface points the records refer to.
    pub points: Vec<Point3>,
    pub normals: Vec<UnitVec3>,
    /// Full-resolution surface used to score hypotheses.
    pub scoring_points: Vec<Point3>,
    /// In tree storage order, so leaf scans read memory sequentially.
    records: Vec<PairRecord>,
    terms: Vec<SimultaneityTerms>,
    tree: PackedRTree,
}

impl PairIndex {
    /// Reassembles an index from its stored parts, rebuilding the tree. The
    /// record order is canonicalised first, so it does not depend on the
    /// order the parts arrive in.
    pub fn from_parts(
        config: PairIndexConfig,
        points: Vec<Point3>,
        normals: Vec<UnitVec3>,
        scoring_points: Vec<Point3>,
        mut records: Vec<PairRecord>,
    ) -> Self {
        records.sort_unstable_by_key(|r| (r.i, r.j, r.mirrored));
        let keys: Vec<[f64; 3]> = records
            .iter()
            .map(|r| [r.gamma.lambda, r.gamma.phi_p, r.gamma.phi_q])
            .collect();
        let mut tree = PackedRTree::bulk_load(&keys);
        let records: Vec<PairRecord> = tree.take_order().iter().map(|&k| records[k as usize]).collect();
        let terms = records.iter().map(|r| SimultaneityTerms::from(&r.gamma)).collect();
        Self {
            config,
            points,
            normals,
            scoring_points,
            records,
            terms,
            tree,
        }
    }

    pub fn records(&self) -> &[PairRecord] {
        &self.records
    }

    pub fn tree_len(&self) -> usize {
        self.tree.len()
    }

    /// Surface tuple ordered to correspond with the curve's `(P, Q)`.
    pub fn surface_tuple(&self, cand: &MatchCandidate) -> PointVectorTuple {
        let (a, b) = cand.target_indices();
        PointVectorTuple::new(
            self.points[a],
            self.points[b],
            self.normals[a],
            self.normals[b],
            VectorKind::Normals,
        )
    }

    pub fn query(&self, g: &Descriptor, params: &QueryParams) -> Vec<MatchCandidate> {
        query_pair_index(self, g, params)
    }
}

/// Builds the pair table and R-tree keyed on `(λ, φp̂, φq̂)`. Every pair
/// contributes a direct entry and a mirrored entry for the swapped tuple.
pub fn build_pair_index(surface: &SurfaceSamples, cfg: &PairIndexConfig) -> Result<PairIndex, MatchingError> {
    if surface.points.is_empty() {
        return Err(MatchingError::EmptySurface);
    }
    let normals = surface.normals.as_ref().ok_or(MatchingError::MissingNormals)?;
    let keep = farthest_point_sample(&surface.points, cfg.subsample_size);
    let points: Vec<Point3> = keep.iter().map(|&i| surface.points[i]).collect();
    let normals: Vec<UnitVec3> = keep.iter().map(|&i| normals[i]).collect();
    let guards = DescriptorGuards {
        d_min: cfg.d_min,
        elevation_margin: cfg.elevation_margin,
    };
    let n = points.len();
    let records: Vec<PairRecord> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let (points, normals) = (&points, &normals);
            (i + 1..n).flat_map(move |j| {
                let t = PointVectorTuple::new(points[i], points[j], normals[i], normals[j], VectorKind::Normals);
                let lambda = t.length();
                if lambda < cfg.d_min || lambda > cfg.d_max {
                    return None;
                }
                let direct = compute_descriptor(&t, &guards).ok()?;
                let swapped = compute_descriptor(&t.swapped(), &guards).ok()?;
                let (i, j) = (i as u32, j as u32);
                Some([
                    PairRecord {
                        i,
                        j,
                        gamma: direct,
                        mirrored: false,
                    },
                    PairRecord {
                        i,
                        j,
                        gamma: swapped,
                        mirrored: true,
                    },
                ])
            })
            .flatten()
        })
        .collect();
    if records.is_empty() {
        return Err(MatchingError::NoValidPairs);
    }
    Ok(PairIndex::from_parts(
        *cfg,
        points,
        normals,
        surface.points.clone(),
        records,
    ))
}

/// Records in the box `λ ± eps`, `φ̂ ∈ [|φ| - π/2, π/2 - |φ|]` (widened by the
/// slack) that also pass the simultaneity test; sorted by `(i, j, order)`.
pub fn query_pair_index(index: &PairIndex, g: &Descriptor, params: &QueryParams) -> Vec<MatchCandidate> {
    let (p_lo, p_hi) = elevation_bounds(g.phi_p, params.angular_slack);
    let (q_lo, q_hi) = elevation_bounds(g.phi_q, params.angular_slack);
    let lo = [g.lambda - params.eps, p_lo, q_lo];
    let hi = [g.lambda + params.eps, p_hi, q_hi];
    let terms = SimultaneityTerms::from(g);
    let mut out = Vec::new();
    index.tree.query_box(&lo, &hi, |k| {
        if simultaneous_residual_terms(&terms, &index.terms[k]).is_some_and(|r| r <= params.simultaneous_tol) {
            let record = index.records[k];
            out.push(MatchCandidate {
                record,
                order: if record.mirrored {
                    CorrespondenceOrder::Switched
                } else {
                    CorrespondenceOrder::Direct
                },
            });
        }
    });
    out.sort_unstable_by_key(|c| c.key());
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Unit;

    fn triangle() -> SurfaceSamples {
        SurfaceSamples {
            points: vec![
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(4.0, 0.0, 0.0),
                Point3::new(0.0, 3.0, 0.0),
            ],
            normals: Some(vec![
                Unit::new_normalize(nalgebra::Vector3::new(0.0, 0.2, 1.0)),
                Unit::new_normalize(nalgebra::Vector3::new(0.1, 0.0, 1.0)),
                Unit::new_normalize(nalgebra::Vector3::new(0.0, 0.0, 1.0)),
            ]),
        }
    }

    #[test]
    fn triangle_has_three_pairs_six_entries() {
        let cfg = PairIndexConfig {
            d_min: 0.0,
            d_max: 100.0,
            subsample_size: 10,
            elevation_margin: 1e-3,
        };
        let index = build_pair_index(&triangle(), &cfg).unwrap();
        assert_eq!(index.records().len(), 6);
        assert_eq!(index.tree_len(), 6);
        assert_eq!(index.records().iter().filter(|r| r.mirrored).count(), 3);
    }

    #[test]
    fn gates_and_errors() {
        let cfg = PairIndexConfig {
            d_min: 4.5,
            d_max: 100.0,
            subsample_size: 10,
            elevation_margin: 1e-3,
        };
        let index = build_pair_index(&triangle(), &cfg).unwrap();
        assert_eq!(index.records().len(), 2);
        let cfg = PairIndexConfig { d_min: 6.0, ..cfg };
        assert!(matches!(build_pair_index(&triangle(), &cfg), Err(MatchingError::NoValidPairs)));
        assert!(matches!(
            build_pair_index(&SurfaceSamples::default(), &cfg),
            Err(MatchingError::EmptySurface)
        ));
        let bare = SurfaceSamples::new(triangle().points);
        assert!(matches!(build_pair_index(&bare, &cfg), Err(MatchingError::MissingNormals)));
    }

    #[test]
    fn query_beyond_d_max_is_empty() {
        let cfg = PairIndexConfig {
            d_min: 0.0,
            d_max: 100.0,
            subsample_size: 10,
            elevation_margin: 1e-3,
        };
        let index = build_pair_index(&triangle(), &cfg).unwrap();
        let g = Descriptor::new(200.0, 0.0, 0.0, 0.0);
        assert!(index.query(&g, &QueryParams::exact(0.5)).is_empty());
    }
}
