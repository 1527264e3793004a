//! Normals on sampled surfaces and tangents along polylines.

use nalgebra::{Matrix3, SymmetricEigen, Unit};
use rayon::prelude::*;

use crate::error::DifferentialError;
use crate::geometry::{Point3, UnitVec3, Vec3, VectorKind};
use crate::spatial::KdTree;

pub const DEFAULT_NORMAL_NEIGHBORS: usize = 30;

/// Points paired with one unit vector each, flattened for matching.
#[derive(Debug, Clone, PartialEq)]
pub struct OrientedCloud {
    pub points: Vec<Point3>,
    pub dirs: Vec<UnitVec3>,
    pub kind: VectorKind,
}

impl OrientedCloud {
    pub fn new(points: Vec<Point3>, dirs: Vec<UnitVec3>, kind: VectorKind) -> Self {
        assert_eq!(points.len(), dirs.len(), "one vector per point");
        Self { points, dirs, kind }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SurfaceSamples {
    pub points: Vec<Point3>,
    pub normals: Option<Vec<UnitVec3>>,
}

impl SurfaceSamples {
    pub fn new(points: Vec<Point3>) -> Self {
        Self {
            points,
            normals: None,
        }
    }

    /// Fills `normals` by local PCA, dropping points whose neighbourhood is
    /// degenerate.
    pub fn estimate_normals(&mut self, k: usize) -> Result<(), DifferentialError> {
        let flagged = estimate_normals_flagged(&self.points, k)?;
        let (points, normals): (Vec<_>, Vec<_>) = self
            .points
            .iter()
            .zip(flagged)
            .filter_map(|(p, n)| n.map(|n| (*p, n)))
            .unzip();
        self.points = points;
        self.normals = Some(normals);
        Ok(())
    }

    pub fn oriented(&self) -> Option<OrientedCloud> {
        self.normals
            .as_ref()
            .map(|n| OrientedCloud::new(self.points.clone(), n.clone(), VectorKind::Normals))
    }
}

/// A set of polylines, optionally carrying per-point tangents.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Curve {
    pub segments: Vec<Vec<Point3>>,
    pub tangents: Option<Vec<Vec<UnitVec3>>>,
}

impl Curve {
    pub fn new(segments: Vec<Vec<Point3>>) -> Self {
        Self {
            segments,
            tangents: None,
        }
    }

    pub fn point_count(&self) -> usize {
        self.segments.iter().map(Vec::len).sum()
    }

    pub fn points(&self) -> impl Iterator<Item = &Point3> {
        self.segments.iter().flatten()
    }

    /// Tangents for every segment; `window` > 0 averages the raw difference
    /// vectors over `±window` neighbours before normalising.
    pub fn estimate_tangents(&mut self, window: usize) -> Result<(), DifferentialError> {
        let t = self
            .segments
            .iter()
            .map(|s| estimate_tangents_smoothed(s, window))
            .collect::<Result<Vec<_>, _>>()?;
        self.tangents = Some(t);
        Ok(())
    }

    pub fn oriented(&self) -> Option<OrientedCloud> {
        let t = self.tangents.as_ref()?;
        let points = self.segments.iter().flatten().copied().collect();
        let dirs = t.iter().flatten().copied().collect();
        Some(OrientedCloud::new(points, dirs, VectorKind::Tangents))
    }
}

/// PCA normals over the `k` nearest neighbours (the point included).
pub fn estimate_normals(points: &[Point3], k: usize) -> Result<Vec<UnitVec3>, DifferentialError> {
    estimate_normals_flagged(points, k)?
        .into_iter()
        .enumerate()
        .map(|(i, n)| n.ok_or(DifferentialError::DegenerateNeighborhood { index: i }))
        .collect()
}

/// Like [`estimate_normals`], returning `None` for points whose covariance has
/// two vanishing eigenvalues.
pub fn estimate_normals_flagged(points: &[Point3], k: usize) -> Result<Vec<Option<UnitVec3>>, DifferentialError> {
    if points.len() <= k || k < 3 {
        return Err(DifferentialError::TooFewPoints {
            k,
            got: points.len(),
        });
    }
    let tree = KdTree::new(points);
    Ok(points
        .par_iter()
        .map(|p| {
            let nb = tree.knn(p, k);
            let idx: Vec<usize> = nb.iter().map(|n| n.index).collect();
            plane_normal(points, &idx)
        })
        .collect())
}

fn plane_normal(points: &[Point3], idx: &[usize]) -> Option<UnitVec3> {
    let n = idx.len() as f64;
    let centroid = idx.iter().fold(Vec3::zeros(), |acc, &i| acc + points[i].coords) / n;
    let mut cov = Matrix3::zeros();
    for &i in idx {
        let d = points[i].coords - centroid;
        cov += d * d.transpose();
    }
    cov /= n;
    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let largest = eig.eigenvalues[order[2]];
    let middle = eig.eigenvalues[order[1]];
    if largest <= 0.0 || middle <= 1e-10 * largest {
        return None;
    }
    let v = eig.eigenvectors.column(order[0]).into_owned();
    Some(Unit::new_normalize(v))
}

/// Central differences inside the segment, one-sided at the ends.
pub fn estimate_tangents(segment: &[Point3]) -> Result<Vec<UnitVec3>, DifferentialError> {
    estimate_tangents_smoothed(segment, 0)
}

pub fn estimate_tangents_smoothed(segment: &[Point3], window: usize) -> Result<Vec<UnitVec3>, DifferentialError> {
    let n = segment.len();
    if n < 3 {
        return Err(DifferentialError::SegmentTooShort { got: n });
    }
    if let Some(i) = segment.windows(2).position(|w| (w[1] - w[0]).norm_squared() == 0.0) {
        return Err(DifferentialError::DuplicatePoints { index: i });
    }
    let raw: Vec<Vec3> = (0..n)
        .map(|i| {
            let (a, b) = match i {
                0 => (0, 1),
                i if i == n - 1 => (n - 2, n - 1),
                i => (i - 1, i + 1),
            };
            segment[b] - segment[a]
        })
        .collect();
    (0..n)
        .map(|i| {
            let v = if window == 0 {
                raw[i]
            } else {
                // Least-squares slope of position against sample index; on a
                // symmetric window the curvature term cancels.
                let lo = i.saturating_sub(window);
                let hi = (i + window).min(n - 1);
                let mid = (lo + hi) as f64 / 2.0;
                let mut v = Vec3::zeros();
                for (k, p) in segment.iter().enumerate().take(hi + 1).skip(lo) {
                    v += p.coords * (k as f64 - mid);
                }
                v
            };
            Unit::try_new(v, 0.0).ok_or(DifferentialError::DuplicatePoints { index: i })
        })
        .collect()
}
