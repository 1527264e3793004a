//! Synthetic registration experiments: model normalisation, trial
//! generation, sweeps and CSV output.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::differential::{Curve, OrientedCloud, SurfaceSamples, DEFAULT_NORMAL_NEIGHBORS};
use crate::error::{BenchError, IoError};
use crate::geometry::{rotation_error, translation_error, DescriptorGuards, Point3, RigidTransform};
use crate::io::{load_curve, load_mesh, Mesh};
use crate::matching::{build_pair_index, PairIndex, PairIndexConfig, DEFAULT_SUBSAMPLE_SIZE};
use crate::random::random_rotation;
use crate::registration::{
    register_curve_to_curve, register_curve_to_surface, register_surface_to_surface, MatchTolerances,
    RansacParams, RegistrationResult,
};
use crate::synth::{blob_mesh, densify_surface, trace_curves, BlobKind};

pub const DEFAULT_DIAMETER: f64 = 75.0;

/// Axis-aligned bounding box `(min, max)`.
pub fn bounding_box(points: &[Point3]) -> Option<(Point3, Point3)> {
    let first = *points.first()?;
    Some(points.iter().fold((first, first), |(lo, hi), p| (lo.inf(p), hi.sup(p))))
}

/// Bounding-box diagonal.
pub fn diameter(points: &[Point3]) -> f64 {
    bounding_box(points).map_or(0.0, |(lo, hi)| (hi - lo).norm())
}

/// Uniform scaling about a fixed centre.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalization {
    pub centroid: Point3,
    pub scale: f64,
}

impl Normalization {
    pub fn apply(&self, p: &Point3) -> Point3 {
        self.centroid + (p - self.centroid) * self.scale
    }
}

/// Scaling about the centroid that makes the bounding-box diagonal `target`.
pub fn diameter_normalization(points: &[Point3], target: f64) -> Result<Normalization, BenchError> {
    let d = diameter(points);
    if points.len() < 2 || !(d > 0.0) || !d.is_finite() {
        return Err(BenchError::DegenerateModel);
    }
    let sum = points.iter().fold(nalgebra::Vector3::zeros(), |acc, p| acc + p.coords);
    Ok(Normalization {
        centroid: Point3::from(sum / points.len() as f64),
        scale: target / d,
    })
}

pub fn normalize_diameter(points: &[Point3], target: f64) -> Result<Vec<Point3>, BenchError> {
    let n = diameter_normalization(points, target)?;
    Ok(points.iter().map(|p| n.apply(p)).collect())
}

/// Segments kept for a curve subset of the given fraction: 2 of 6 for 25%,
/// 4 of 6 for 50%, all for 100%.
fn segments_for_fraction(total: usize, fraction: f64) -> Result<usize, BenchError> {
    let share = if fraction == 1.0 {
        return Ok(total);
    } else if fraction == 0.5 {
        4.0 / 6.0
    } else if fraction == 0.25 {
        2.0 / 6.0
    } else {
        return Err(BenchError::FractionUnsupported(fraction));
    };
    Ok(((total as f64 * share).round() as usize).clamp(1, total))
}

/// Random contiguous runs from randomly chosen segments totalling about
/// `fraction` of all curve points.
pub fn subset_curve<R: Rng + ?Sized>(curve: &Curve, fraction: f64, rng: &mut R) -> Result<Vec<Vec<Point3>>, BenchError> {
    if curve.segments.is_empty() {
        return Err(BenchError::NoCurves);
    }
    let k = segments_for_fraction(curve.segments.len(), fraction)?;
    if k == curve.segments.len() {
        return Ok(curve.segments.clone());
    }
    let mut chosen: Vec<usize> = (0..curve.segments.len()).collect();
    chosen.shuffle(rng);
    chosen.truncate(k);
    chosen.sort_unstable();
    let total = curve.point_count() as f64;
    let available: usize = chosen.iter().map(|&s| curve.segments[s].len()).sum();
    let wanted = fraction * total;
    Ok(chosen
        .iter()
        .map(|&s| {
            let seg = &curve.segments[s];
            let len = ((wanted * seg.len() as f64 / available as f64).round() as usize).clamp(3.min(seg.len()), seg.len());
            let start = rng.gen_range(0..=seg.len() - len);
            seg[start..start + len].to_vec()
        })
        .collect())
}

/// Uniform rotation and a translation uniform in a cube of side `side`.
pub fn random_displacement<R: Rng + ?Sized>(rng: &mut R, side: f64) -> RigidTransform {
    let rotation = random_rotation(rng);
    let h = side / 2.0;
    let t = nalgebra::Vector3::new(rng.gen_range(-h..=h), rng.gen_range(-h..=h), rng.gen_range(-h..=h));
    RigidTransform::new(rotation, t)
}

/// Adds i.i.d. Gaussian noise of std `sigma` to every coordinate.
pub fn add_noise<R: Rng + ?Sized>(points: &mut [Point3], sigma: f64, rng: &mut R) {
    if sigma <= 0.0 {
        return;
    }
    let normal = Normal::new(0.0, sigma).expect("finite sigma");
    for p in points {
        p.x += normal.sample(rng);
        p.y += normal.sample(rng);
        p.z += normal.sample(rng);
    }
}

#[derive(Debug, Clone)]
pub struct Trial {
    /// Displaced input; outliers, if any, form the last segment.
    pub curve: Curve,
    /// Transform registering the input onto the model.
    pub ground_truth: RigidTransform,
    pub outliers: usize,
}

/// Builds one trial input from the model-frame curve: subset, rigid
/// displacement, noise and appended outliers within 1.2× the model box.
pub fn make_trial<R: Rng + ?Sized>(
    curve: &Curve,
    model_box: (Point3, Point3),
    fraction: f64,
    sigma: f64,
    outlier_fraction: f64,
    rng: &mut R,
) -> Result<Trial, BenchError> {
    let mut segments = subset_curve(curve, fraction, rng)?;
    let inliers: usize = segments.iter().map(Vec::len).sum();
    let outliers = if outlier_fraction > 0.0 {
        (outlier_fraction * inliers as f64 / (1.0 - outlier_fraction)).round() as usize
    } else {
        0
    };
    if outliers > 0 {
        let (lo, hi) = model_box;
        let c = nalgebra::center(&lo, &hi);
        let half = (hi - lo) * 0.6;
        segments.push(
            (0..outliers)
                .map(|_| {
                    Point3::new(
                        c.x + rng.gen_range(-half.x..=half.x),
                        c.y + rng.gen_range(-half.y..=half.y),
                        c.z + rng.gen_range(-half.z..=half.z),
                    )
                })
                .collect(),
        );
    }
    let side = (model_box.1 - model_box.0).norm();
    let g = random_displacement(rng, side);
    for seg in &mut segments {
        for p in seg.iter_mut() {
            *p = g.apply(p);
        }
        add_noise(seg, sigma, rng);
    }
    Ok(Trial {
        curve: Curve::new(segments),
        ground_truth: g.inverse(),
        outliers,
    })
}

/// Crop of the surface keeping the `fraction` of points with the smallest
/// height along a random direction, displaced and perturbed.
pub fn make_surface_trial<R: Rng + ?Sized>(
    points: &[Point3],
    fraction: f64,
    sigma: f64,
    rng: &mut R,
) -> Result<(Vec<Point3>, RigidTransform), BenchError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(BenchError::FractionUnsupported(fraction));
    }
    let (lo, hi) = bounding_box(points).ok_or(BenchError::DegenerateModel)?;
    let u = crate::random::random_unit(rng);
    let mut order: Vec<(f64, usize)> = points.iter().enumerate().map(|(i, p)| (p.coords.dot(&u), i)).collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0));
    let keep = ((fraction * points.len() as f64).round() as usize).max(1);
    let mut idx: Vec<usize> = order[..keep].iter().map(|&(_, i)| i).collect();
    idx.sort_unstable();
    let g = random_displacement(rng, (hi - lo).norm());
    let mut out: Vec<Point3> = idx.iter().map(|&i| g.apply(&points[i])).collect();
    add_noise(&mut out, sigma, rng);
    Ok((out, g.inverse()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    CurveVsSurface,
    CurveVsCurve,
    SurfaceVsSurface,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    /// PLY or point text file; a procedural model is used when absent.
    pub model_path: Option<PathBuf>,
    pub synthetic_model: BlobKind,
    pub mesh_frequency: usize,
    /// Curve segments in model coordinates; traced on the model when absent.
    pub curve_path: Option<PathBuf>,
    pub n_trials: usize,
    pub fractions: Vec<f64>,
    pub noise_sigmas: Vec<f64>,
    pub diameter_target: f64,
    pub seed: u64,
    pub variant: Variant,
    pub outlier_fraction: f64,
    pub n_segments: usize,
    pub segment_length: f64,
    pub subsample_size: usize,
    pub normal_neighbors: usize,
    /// Face subdivisions of the scoring surface (meshes only; 1 = vertices).
    pub scoring_density: usize,
    pub max_time: f64,
    pub target_inlier_ratio: f64,
    pub tangent_window: usize,
    pub tangent_window_noisy: usize,
    /// Overrides the noise-derived defaults.
    pub inlier_threshold: Option<f64>,
    pub tolerances: Option<MatchTolerances>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model_path: None,
            synthetic_model: BlobKind::Bumpy,
            mesh_frequency: 36,
            curve_path: None,
            n_trials: 25,
            fractions: vec![0.25, 0.5, 1.0],
            noise_sigmas: vec![0.0, 1.0],
            diameter_target: DEFAULT_DIAMETER,
            seed: 0,
            variant: Variant::CurveVsSurface,
            outlier_fraction: 0.0,
            n_segments: 6,
            segment_length: 50.0,
            subsample_size: DEFAULT_SUBSAMPLE_SIZE,
            normal_neighbors: DEFAULT_NORMAL_NEIGHBORS,
            scoring_density: 1,
            max_time: 5.0,
            target_inlier_ratio: 0.95,
            tangent_window: 0,
            tangent_window_noisy: 8,
            inlier_threshold: None,
            tolerances: None,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, IoError> {
        let text = std::fs::read_to_string(path).map_err(|e| IoError::from_io(path, e))?;
        serde_json::from_str(&text).map_err(|source| IoError::Json {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn tangent_window_for(&self, sigma: f64) -> usize {
        if sigma > 0.0 {
            self.tangent_window_noisy
        } else {
            self.tangent_window
        }
    }

    /// Inlier threshold per unit of noise. Distances to a surface see one
    /// noise component, distances to a curve see two, so curve targets
    /// need a wider band to reach the inlier target.
    fn noise_threshold_factor(&self) -> f64 {
        match self.variant {
            Variant::CurveVsSurface => 1.5,
            Variant::CurveVsCurve | Variant::SurfaceVsSurface => 2.5,
        }
    }

    /// RANSAC parameters for one noise level on the normalised model.
    pub fn ransac_params(&self, diameter: f64, sigma: f64, seed: u64) -> RansacParams {
        let mut p = RansacParams::for_diameter(diameter, sigma);
        p.inlier_threshold = self
            .inlier_threshold
            .unwrap_or_else(|| (diameter / 300.0).max(self.noise_threshold_factor() * sigma));
        if let Some(t) = self.tolerances {
            p.tolerances = t;
        }
        p.max_time = self.max_time;
        p.target_inlier_ratio = self.target_inlier_ratio;
        p.guards = DescriptorGuards::for_diameter(diameter);
        p.seed = seed;
        p
    }
}

/// Model, curves and (for curve vs surface) the pair index, shared by every
/// trial of a sweep.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub mesh: Mesh,
    pub surface: SurfaceSamples,
    pub curve: Curve,
    pub diameter: f64,
    pub model_box: (Point3, Point3),
    pub index: Option<PairIndex>,
    pub prep_seconds: Option<f64>,
}

pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared, BenchError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut mesh = match &cfg.model_path {
        Some(p) => load_mesh(p)?,
        None => blob_mesh(cfg.synthetic_model, cfg.mesh_frequency, &mut rng),
    };
    let norm = diameter_normalization(&mesh.points, cfg.diameter_target)?;
    for p in &mut mesh.points {
        *p = norm.apply(p);
    }
    let curve = match &cfg.curve_path {
        Some(p) => {
            let mut c = load_curve(p)?;
            for seg in &mut c.segments {
                for q in seg.iter_mut() {
                    *q = norm.apply(q);
                }
            }
            c
        }
        None => trace_curves(&mesh, cfg.n_segments, cfg.segment_length, &mut rng),
    };
    if curve.segments.is_empty() {
        return Err(BenchError::NoCurves);
    }
    let mut surface = SurfaceSamples::new(mesh.points.clone());
    surface.estimate_normals(cfg.normal_neighbors)?;
    let diameter = diameter(&surface.points);
    let model_box = bounding_box(&surface.points).ok_or(BenchError::DegenerateModel)?;
    let (index, prep_seconds) = if cfg.variant == Variant::CurveVsSurface {
        let mut icfg = PairIndexConfig::for_diameter(diameter);
        icfg.subsample_size = cfg.subsample_size;
        let start = Instant::now();
        let mut index = build_pair_index(&surface, &icfg)?;
        if !mesh.faces.is_empty() {
            index.scoring_points = densify_surface(&mesh, cfg.scoring_density);
        }
        let secs = start.elapsed().as_secs_f64();
        log::info!("offline index: {} records in {:.2} s", index.records().len(), secs);
        (Some(index), Some(secs))
    } else {
        (None, None)
    };
    Ok(Prepared {
        mesh,
        surface,
        curve,
        diameter,
        model_box,
        index,
        prep_seconds,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub fraction: f64,
    pub sigma: f64,
    pub outlier_fraction: f64,
    /// `None` when the trial failed.
    pub rotation_error: Option<f64>,
    pub translation_error: Option<f64>,
    pub elapsed: f64,
    pub terminated_by: String,
    pub inlier_ratio: Option<f64>,
}

impl TrialRecord {
    pub fn failed(&self) -> bool {
        self.rotation_error.is_none()
    }
}

fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64 + 1);
    rng
}

fn oriented_curve(segments: Curve, window: usize) -> Result<OrientedCloud, BenchError> {
    let mut c = segments;
    c.estimate_tangents(window)?;
    Ok(c.oriented().expect("tangents estimated"))
}

fn run_variant(
    cfg: &ExperimentConfig,
    prep: &Prepared,
    rng: &mut ChaCha8Rng,
    fraction: f64,
    sigma: f64,
) -> Result<(RegistrationResult, RigidTransform), BenchError> {
    let window = cfg.tangent_window_for(sigma);
    let seed = rng.gen::<u64>();
    let params = cfg.ransac_params(prep.diameter, sigma, seed);
    match cfg.variant {
        Variant::CurveVsSurface => {
            let trial = make_trial(&prep.curve, prep.model_box, fraction, sigma, cfg.outlier_fraction, rng)?;
            let source = oriented_curve(trial.curve, window)?;
            let index = prep.index.as_ref().expect("index prepared");
            let res = register_curve_to_surface(&source, index, &params)?;
            Ok((res, trial.ground_truth))
        }
        Variant::CurveVsCurve => {
            let trial = make_trial(&prep.curve, prep.model_box, fraction, sigma, cfg.outlier_fraction, rng)?;
            let source = oriented_curve(trial.curve, window)?;
            let target = oriented_curve(prep.curve.clone(), window)?;
            let res = register_curve_to_curve(&source, &target, &params)?;
            Ok((res, trial.ground_truth))
        }
        Variant::SurfaceVsSurface => {
            let (points, gt) = make_surface_trial(&prep.surface.points, fraction, sigma, rng)?;
            let mut source = SurfaceSamples::new(points);
            source.estimate_normals(cfg.normal_neighbors)?;
            let source = source.oriented().ok_or(BenchError::DegenerateModel)?;
            let target = prep.surface.oriented().expect("normals estimated");
            let res = register_surface_to_surface(&source, &target, &params)?;
            Ok((res, gt))
        }
    }
}

/// Runs one seeded trial; failures become records without errors.
pub fn run_trial(cfg: &ExperimentConfig, prep: &Prepared, trial: usize, fraction: f64, sigma: f64) -> TrialRecord {
    let mut rng = trial_rng(cfg.seed, trial);
    let start = Instant::now();
    let outcome = run_variant(cfg, prep, &mut rng, fraction, sigma);
    let mut rec = TrialRecord {
        trial,
        fraction,
        sigma,
        outlier_fraction: cfg.outlier_fraction,
        rotation_error: None,
        translation_error: None,
        elapsed: start.elapsed().as_secs_f64(),
        terminated_by: String::new(),
        inlier_ratio: None,
    };
    match outcome {
        Ok((res, gt)) => {
            rec.rotation_error = Some(rotation_error(&res.transform.rotation, &gt.rotation));
            rec.translation_error = Some(translation_error(&res.transform.translation, &gt.translation));
            rec.elapsed = res.elapsed;
            rec.terminated_by = res.terminated_by.as_str().to_string();
            rec.inlier_ratio = Some(res.inlier_ratio);
        }
        Err(e) => {
            log::warn!("trial {trial} failed: {e}");
            rec.terminated_by = "failed".to_string();
        }
    }
    rec
}

#[derive(Debug, Clone)]
pub struct BenchReport {
    pub records: Vec<TrialRecord>,
    pub prep_seconds: Option<f64>,
}

/// Every (fraction, sigma) cell for `n_trials` trials, in that order.
pub fn run_benchmark(cfg: &ExperimentConfig) -> Result<BenchReport, BenchError> {
    let prep = prepare(cfg)?;
    Ok(run_prepared(cfg, &prep))
}

pub fn run_prepared(cfg: &ExperimentConfig, prep: &Prepared) -> BenchReport {
    let mut records = Vec::new();
    let mut trial = 0;
    for &fraction in &cfg.fractions {
        for &sigma in &cfg.noise_sigmas {
            for _ in 0..cfg.n_trials {
                records.push(run_trial(cfg, prep, trial, fraction, sigma));
                trial += 1;
            }
        }
    }
    BenchReport {
        records,
        prep_seconds: prep.prep_seconds,
    }
}

pub const CSV_HEADER: [&str; 8] = [
    "trial",
    "fraction",
    "sigma",
    "outlier_fraction",
    "rot_err_deg",
    "trans_err",
    "elapsed_s",
    "terminated_by",
];

pub fn write_csv<W: Write>(w: W, records: &[TrialRecord]) -> Result<(), BenchError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(CSV_HEADER)?;
    let opt = |v: Option<f64>| v.map_or_else(String::new, |x| x.to_string());
    for r in records {
        out.write_record([
            r.trial.to_string(),
            r.fraction.to_string(),
            r.sigma.to_string(),
            r.outlier_fraction.to_string(),
            opt(r.rotation_error),
            opt(r.translation_error),
            format!("{:.6}", r.elapsed),
            r.terminated_by.clone(),
        ])?;
    }
    out.flush().map_err(|e| BenchError::Io(IoError::Io {
        path: PathBuf::from("<csv>"),
        source: e,
    }))?;
    Ok(())
}
