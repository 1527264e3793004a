//! Hypothesise-and-test registration driven by single matching tuple pairs.
//!
//! Every engine follows the same loop: draw a random source pair, describe it,
//! collect matching target pairs, turn each into a closed-form pose and keep
//! the pose with the most inliers. The run stops once the inlier target is
//! met, the time budget is spent, or the source-pair budget runs out.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::differential::OrientedCloud;
use crate::error::RegistrationError;
use crate::geometry::{
    compute_descriptor, pose_from_match_cc, pose_from_match_cs, Descriptor, DescriptorGuards, Point3,
    PointVectorTuple, RigidTransform, VectorKind,
};
use crate::matching::{target_tuple, PairIndex, QueryParams, SameKindPairs};
use crate::spatial::{KdTree, RadiusGrid};

/// Tolerances used while matching and validating pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchTolerances {
    /// Baseline tolerance (model units).
    pub eps: f64,
    /// Widening of the curve-vs-surface elevation bounds (rad).
    pub angular_slack: f64,
    /// Curve-vs-surface simultaneity tolerance (cosine mismatch).
    pub simultaneous_tol: f64,
    /// Accepted `|c² + s² - 1|` for the null vector of M.
    pub consistency_tol: f64,
    /// Same-kind descriptor angle tolerance (rad).
    pub angle_tol: f64,
    /// Same-kind vector alignment tolerance (chord length of unit vectors).
    pub vector_tol: f64,
}

impl MatchTolerances {
    /// Defaults for point noise of standard deviation `sigma` on a model of the
    /// given diameter.
    pub fn for_noise(diameter: f64, sigma: f64) -> Self {
        let eps = (3.0 * sigma).max(0.002 * diameter);
        if sigma > 0.0 {
            Self {
                eps,
                angular_slack: 0.1,
                simultaneous_tol: 0.15,
                consistency_tol: 0.25,
                angle_tol: 0.15,
                vector_tol: 0.3,
            }
        } else {
            Self {
                eps,
                angular_slack: 0.05,
                simultaneous_tol: 0.05,
                consistency_tol: 0.1,
                angle_tol: 0.02,
                vector_tol: 0.04,
            }
        }
    }

    pub fn query_params(&self) -> QueryParams {
        QueryParams {
            eps: self.eps,
            angular_slack: self.angular_slack,
            simultaneous_tol: self.simultaneous_tol,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RansacParams {
    pub inlier_threshold: f64,
    /// Seconds.
    pub max_time: f64,
    pub target_inlier_ratio: f64,
    pub tolerances: MatchTolerances,
    /// Gates on drawn source pairs.
    pub guards: DescriptorGuards,
    pub seed: u64,
    /// Stop after this many source pairs (`exhausted`).
    pub max_source_pairs: Option<usize>,
    /// Evaluate at most this many candidates per source pair.
    pub max_candidates_per_pair: Option<usize>,
}

impl RansacParams {
    /// Threshold at 0.5% of the target diameter, 5 s budget, 95% inliers.
    pub fn for_diameter(diameter: f64, sigma: f64) -> Self {
        Self {
            inlier_threshold: 0.005 * diameter,
            max_time: 5.0,
            target_inlier_ratio: 0.95,
            tolerances: MatchTolerances::for_noise(diameter, sigma),
            guards: DescriptorGuards::for_diameter(diameter),
            seed: 0,
            max_source_pairs: None,
            max_candidates_per_pair: None,
        }
    }

    fn validate(&self) -> Result<(), RegistrationError> {
        let bad = |m: &str| Err(RegistrationError::InvalidParams(m.to_string()));
        if !(self.inlier_threshold > 0.0) {
            return bad("inlier threshold must be positive");
        }
        if !(self.max_time >= 0.0) {
            return bad("max time must be non-negative");
        }
        if !(self.target_inlier_ratio > 0.0 && self.target_inlier_ratio <= 1.0) {
            return bad("target inlier ratio must be in (0, 1]");
        }
        if !(self.tolerances.eps > 0.0) {
            return bad("eps must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    InlierTarget,
    TimeBudget,
    Exhausted,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::InlierTarget => "inlier_target",
            Termination::TimeBudget => "time_budget",
            Termination::Exhausted => "exhausted",
        }
    }
}

impl std::fmt::Display for Termination {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegistrationResult {
    pub transform: RigidTransform,
    pub inlier_count: usize,
    pub inlier_ratio: f64,
    pub hypotheses_tested: usize,
    pub source_pairs_drawn: usize,
    /// Seconds.
    pub elapsed: f64,
    pub terminated_by: Termination,
    /// Best inlier count after each improvement.
    pub best_history: Vec<usize>,
}

impl RegistrationResult {
    /// Equality ignoring wall-clock time.
    pub fn same_outcome(&self, other: &RegistrationResult) -> bool {
        self.transform == other.transform
            && self.inlier_count == other.inlier_count
            && self.hypotheses_tested == other.hypotheses_tested
            && self.source_pairs_drawn == other.source_pairs_drawn
            && self.terminated_by == other.terminated_by
            && self.best_history == other.best_history
    }
}

/// Source points whose transformed nearest-target distance is within
/// `threshold`.
pub fn count_inliers(t: &RigidTransform, source: &[Point3], target: &KdTree, threshold: f64) -> usize {
    let r2 = threshold * threshold;
    source.iter().filter(|p| target.any_within(&t.apply(p), r2)).count()
}

/// Prefix lengths at which a hypothesis is screened against the best so far.
const SCREEN_AT: [usize; 4] = [16, 32, 64, 128];
/// Standard deviations below the expected prefix count that reject.
const SCREEN_Z: f64 = 3.5;

/// Inlier count if it exceeds `beat`, abandoning as soon as it cannot.
///
/// `source` is in random order, so the hits in a prefix of length k are close
/// to binomial(k, ρ) for a pose whose inlier ratio is ρ. At each screening
/// length the hypothesis is also dropped when its hits fall `SCREEN_Z`
/// deviations below what a pose just matching `beat` would show. That
/// rejects a pose able to win with probability about 2e-4 per screen, and
/// it cuts the points scored for a losing pose several-fold.
fn count_inliers_above(t: &RigidTransform, source: &[Point3], target: &RadiusGrid, beat: usize) -> Option<usize> {
    let n = source.len();
    let rho = beat as f64 / n as f64;
    let mut screens = SCREEN_AT.iter().copied().filter(|&k| k < n).peekable();
    let mut inliers = 0usize;
    for (k, p) in source.iter().enumerate() {
        if target.any_within(&t.apply(p)) {
            inliers += 1;
        }
        let seen = k + 1;
        if inliers + (n - seen) <= beat {
            return None;
        }
        if screens.next_if_eq(&seen).is_some() {
            let mean = rho * seen as f64;
            if (inliers as f64) < mean - SCREEN_Z * (mean * (1.0 - rho)).sqrt() {
                return None;
            }
        }
    }
    (inliers > beat).then_some(inliers)
}

const MAX_DRAW_ATTEMPTS: usize = 10_000;

fn draw_pair(rng: &mut ChaCha8Rng, source: &OrientedCloud, guards: &DescriptorGuards) -> Option<(PointVectorTuple, Descriptor)> {
    let n = source.len();
    for _ in 0..MAX_DRAW_ATTEMPTS {
        let i = rng.gen_range(0..n);
        let j = rng.gen_range(0..n);
        if i == j {
            continue;
        }
        let t = PointVectorTuple::new(source.points[i], source.points[j], source.dirs[i], source.dirs[j], source.kind);
        if let Ok(g) = compute_descriptor(&t, guards) {
            return Some((t, g));
        }
    }
    None
}

fn run_ransac<C, Q, P>(
    source: &OrientedCloud,
    scoring: &[Point3],
    params: &RansacParams,
    mut candidates: Q,
    mut pose: P,
) -> Result<RegistrationResult, RegistrationError>
where
    Q: FnMut(&Descriptor) -> Vec<C>,
    P: FnMut(&PointVectorTuple, &C) -> Option<RigidTransform>,
{
    params.validate()?;
    let n = source.len();
    if n < 2 {
        return Err(RegistrationError::TooFewSourcePoints);
    }
    if scoring.is_empty() {
        return Err(RegistrationError::EmptyTarget);
    }
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut order: Vec<Point3> = source.points.clone();
    order.shuffle(&mut rng);
    let scoring = RadiusGrid::new(scoring, params.inlier_threshold);
    let needed = ((params.target_inlier_ratio * n as f64).ceil() as usize).max(1);

    let mut best: Option<(usize, RigidTransform)> = None;
    let mut history = Vec::new();
    let mut hypotheses = 0usize;
    let mut drawn = 0usize;

    let finish = |best: Option<(usize, RigidTransform)>, history, hypotheses, drawn, why| {
        let (count, transform) = best.ok_or(RegistrationError::NoHypothesisFound)?;
        Ok(RegistrationResult {
            transform,
            inlier_count: count,
            inlier_ratio: count as f64 / n as f64,
            hypotheses_tested: hypotheses,
            source_pairs_drawn: drawn,
            elapsed: start.elapsed().as_secs_f64(),
            terminated_by: why,
            best_history: history,
        })
    };

    loop {
        let Some((tuple, g)) = draw_pair(&mut rng, source, &params.guards) else {
            return finish(best, history, hypotheses, drawn, Termination::Exhausted);
        };
        drawn += 1;
        let mut cands = candidates(&g);
        if let Some(cap) = params.max_candidates_per_pair {
            cands.truncate(cap);
        }
        for c in &cands {
            if let Some(t) = pose(&tuple, c) {
                hypotheses += 1;
                let beat = best.as_ref().map_or(0, |b| b.0);
                if let Some(count) = count_inliers_above(&t, &order, &scoring, beat) {
                    best = Some((count, t));
                    history.push(count);
                    if count >= needed {
                        return finish(best, history, hypotheses, drawn, Termination::InlierTarget);
                    }
                }
            }
            if start.elapsed().as_secs_f64() >= params.max_time && best.is_some() {
                return finish(best, history, hypotheses, drawn, Termination::TimeBudget);
            }
        }
        if start.elapsed().as_secs_f64() >= params.max_time {
            return finish(best, history, hypotheses, drawn, Termination::TimeBudget);
        }
        if params.max_source_pairs.is_some_and(|m| drawn >= m) {
            return finish(best, history, hypotheses, drawn, Termination::Exhausted);
        }
    }
}

/// Registers a curve (with tangents) onto the surface behind `index`.
pub fn register_curve_to_surface(
    curve: &OrientedCloud,
    index: &PairIndex,
    params: &RansacParams,
) -> Result<RegistrationResult, RegistrationError> {
    if curve.kind != VectorKind::Tangents {
        return Err(RegistrationError::InvalidParams("curve must carry tangents".into()));
    }
    let query = params.tolerances.query_params();
    let consistency = params.tolerances.consistency_tol;
    run_ransac(
        curve,
        &index.scoring_points,
        params,
        |g| index.query(g, &query),
        |tuple, cand| pose_from_match_cs(tuple, &index.surface_tuple(cand), consistency).ok(),
    )
}

fn bounding_diagonal(points: &[Point3]) -> f64 {
    let Some(first) = points.first() else { return 0.0 };
    let (lo, hi) = points.iter().fold((*first, *first), |(lo, hi), p| (lo.inf(p), hi.sup(p)));
    (hi - lo).norm()
}

fn register_same_kind(
    source: &OrientedCloud,
    target: &OrientedCloud,
    params: &RansacParams,
) -> Result<RegistrationResult, RegistrationError> {
    if target.is_empty() {
        return Err(RegistrationError::EmptyTarget);
    }
    let tol = params.tolerances;
    let guards = params.guards;
    // No drawn source pair is longer than the source's bounding diagonal.
    let reach = bounding_diagonal(&source.points) + 2.0 * tol.eps;
    // Built on the first query so that its cost counts against the budget.
    let mut table: Option<SameKindPairs> = None;
    run_ransac(
        source,
        &target.points,
        params,
        |g| {
            table
                .get_or_insert_with(|| SameKindPairs::build(target, reach, &guards))
                .query(g, tol.eps, tol.angle_tol)
        },
        |tuple, cand| pose_from_match_cc(tuple, &target_tuple(target, cand), tol.vector_tol).ok(),
    )
}

/// Registers one curve onto another; there is no offline stage.
pub fn register_curve_to_curve(
    source: &OrientedCloud,
    target: &OrientedCloud,
    params: &RansacParams,
) -> Result<RegistrationResult, RegistrationError> {
    if source.kind != VectorKind::Tangents || target.kind != VectorKind::Tangents {
        return Err(RegistrationError::InvalidParams("curves must carry tangents".into()));
    }
    register_same_kind(source, target, params)
}

/// Registers two surfaces through their normals.
pub fn register_surface_to_surface(
    source: &OrientedCloud,
    target: &OrientedCloud,
    params: &RansacParams,
) -> Result<RegistrationResult, RegistrationError> {
    if source.kind != VectorKind::Normals || target.kind != VectorKind::Normals {
        return Err(RegistrationError::InvalidParams("surfaces must carry normals".into()));
    }
    register_same_kind(source, target, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn plane_patch(n: usize, spacing: f64) -> Vec<Point3> {
        (0..n * n)
            .map(|k| Point3::new((k % n) as f64 * spacing, (k / n) as f64 * spacing, 0.0))
            .collect()
    }

    #[test]
    fn inliers_on_ground_truth_and_displaced() {
        let target = plane_patch(20, 0.5);
        let tree = KdTree::new(&target);
        let id = RigidTransform::identity();
        assert_eq!(count_inliers(&id, &target, &tree, 0.1), target.len());
        for axis in [nalgebra::Vector3::x(), nalgebra::Vector3::y(), nalgebra::Vector3::z()] {
            let off = RigidTransform::new(nalgebra::Rotation3::identity(), axis * 100.0);
            assert_eq!(count_inliers(&off, &target, &tree, 0.1), 0);
        }
        let up = RigidTransform::new(nalgebra::Rotation3::identity(), nalgebra::Vector3::z() * 1.0);
        assert_eq!(count_inliers(&up, &target, &tree, 0.1), 0);
    }

    #[test]
    fn inliers_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let target: Vec<Point3> = (0..400)
            .map(|_| Point3::new(rng.gen_range(0.0..10.0), rng.gen_range(0.0..10.0), rng.gen_range(0.0..1.0)))
            .collect();
        let source: Vec<Point3> = (0..300)
            .map(|_| Point3::new(rng.gen_range(0.0..10.0), rng.gen_range(0.0..10.0), rng.gen_range(0.0..1.0)))
            .collect();
        let tree = KdTree::new(&target);
        for _ in 0..20 {
            let t = crate::random::random_transform(&mut rng, 1.0);
            let th = rng.gen_range(0.1..1.0);
            let brute = source
                .iter()
                .filter(|p| {
                    let q = t.apply(p);
                    target.iter().map(|x| (x - q).norm()).fold(f64::INFINITY, f64::min) <= th
                })
                .count();
            assert_eq!(count_inliers(&t, &source, &tree, th), brute);
        }
    }

    #[test]
    fn invalid_params_are_rejected() {
        let mut p = RansacParams::for_diameter(75.0, 0.0);
        p.target_inlier_ratio = 0.0;
        assert!(p.validate().is_err());
        p.target_inlier_ratio = 1.0;
        p.inlier_threshold = 0.0;
        assert!(p.validate().is_err());
    }
}
