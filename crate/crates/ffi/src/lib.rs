//! C interface: an opaque surface index handle, curve registration calls and
//! integer status codes. Every call returns a [`CrStatus`]; on failure the
//! message is available from [`cr_last_error`] on the same thread.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use curvereg::bench::diameter;
use curvereg::differential::{Curve, OrientedCloud, SurfaceSamples, DEFAULT_NORMAL_NEIGHBORS};
use curvereg::error::{DifferentialError, IoError, MatchingError, RegistrationError};
use curvereg::geometry::{Point3, UnitVec3, Vec3};
use curvereg::io::{load_index, save_index};
use curvereg::matching::{build_pair_index, PairIndex, PairIndexConfig};
use curvereg::registration::{
    register_curve_to_curve, register_curve_to_surface, RansacParams, RegistrationResult, Termination,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    Geometry = 5,
    NoHypothesis = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrTermination {
    InlierTarget = 0,
    TimeBudget = 1,
    Exhausted = 2,
}

/// Search settings. Non-positive `inlier_threshold` and `eps` select the
/// defaults derived from the target diameter and `sigma`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct CrParams {
    pub max_time: f64,
    pub target_inlier_ratio: f64,
    pub inlier_threshold: f64,
    pub eps: f64,
    pub sigma: f64,
    pub seed: u64,
    /// Half-width of the tangent smoothing window, in samples.
    pub tangent_window: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct CrResult {
    /// Row-major rotation mapping source into target coordinates.
    pub rotation: [f64; 9],
    pub translation: [f64; 3],
    pub inlier_count: usize,
    pub inlier_ratio: f64,
    pub hypotheses_tested: usize,
    pub elapsed: f64,
    pub terminated_by: CrTermination,
}

/// Opaque surface index.
pub struct CrIndex {
    inner: PairIndex,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(CrStatus, String);

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        let status = if e.is_parse() { CrStatus::Parse } else { CrStatus::Io };
        Failure(status, e.to_string())
    }
}

impl From<MatchingError> for Failure {
    fn from(e: MatchingError) -> Self {
        Failure(CrStatus::Geometry, e.to_string())
    }
}

impl From<DifferentialError> for Failure {
    fn from(e: DifferentialError) -> Self {
        Failure(CrStatus::Geometry, e.to_string())
    }
}

impl From<RegistrationError> for Failure {
    fn from(e: RegistrationError) -> Self {
        let status = match e {
            RegistrationError::NoHypothesisFound => CrStatus::NoHypothesis,
            RegistrationError::InvalidParams(_) => CrStatus::InvalidArgument,
            _ => CrStatus::Geometry,
        };
        Failure(status, e.to_string())
    }
}

fn invalid(msg: &str) -> Failure {
    Failure(CrStatus::InvalidArgument, msg.to_string())
}

fn null(name: &str) -> Failure {
    Failure(CrStatus::NullArgument, format!("{name} is null"))
}

fn set_error(msg: Option<String>) {
    LAST_ERROR.with(|e| {
        *e.borrow_mut() = msg.map(|m| CString::new(m.replace('\0', " ")).unwrap_or_default());
    });
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(None);
            CrStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(Some(msg));
            status
        }
        Err(_) => {
            set_error(Some("internal panic".into()));
            CrStatus::Panic
        }
    }
}

unsafe fn slice<'a, T>(p: *const T, n: usize, name: &str) -> Result<&'a [T], Failure> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(name));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

fn points_from(flat: &[f64]) -> Vec<Point3> {
    flat.chunks_exact(3).map(|c| Point3::new(c[0], c[1], c[2])).collect()
}

unsafe fn path_from(p: *const c_char) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(null("path"));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid("path is not valid UTF-8"))?;
    Ok(PathBuf::from(s))
}

/// Splits `points` (3 doubles each) into segments of the given lengths and
/// estimates tangents.
unsafe fn curve_from(
    points: *const f64,
    segment_lengths: *const usize,
    n_segments: usize,
    window: usize,
) -> Result<OrientedCloud, Failure> {
    let lens = slice(segment_lengths, n_segments, "segment_lengths")?;
    let total: usize = lens.iter().sum();
    let flat = slice(points, total * 3, "points")?;
    let pts = points_from(flat);
    let mut segments = Vec::with_capacity(lens.len());
    let mut at = 0;
    for &len in lens {
        segments.push(pts[at..at + len].to_vec());
        at += len;
    }
    let mut curve = Curve::new(segments);
    curve.estimate_tangents(window)?;
    curve.oriented().ok_or_else(|| invalid("curve has no points"))
}

fn ransac_params(p: &CrParams, diameter: f64) -> RansacParams {
    let mut r = RansacParams::for_diameter(diameter, p.sigma.max(0.0));
    r.max_time = p.max_time;
    r.target_inlier_ratio = p.target_inlier_ratio;
    r.seed = p.seed;
    if p.inlier_threshold > 0.0 {
        r.inlier_threshold = p.inlier_threshold;
    } else if p.sigma > 0.0 {
        r.inlier_threshold = r.inlier_threshold.max(1.5 * p.sigma);
    }
    if p.eps > 0.0 {
        r.tolerances.eps = p.eps;
    }
    r
}

fn write_result(res: &RegistrationResult, out: &mut CrResult) {
    let r = res.transform.rotation.matrix();
    for i in 0..3 {
        for j in 0..3 {
            out.rotation[3 * i + j] = r[(i, j)];
        }
    }
    out.translation = [res.transform.translation.x, res.transform.translation.y, res.transform.translation.z];
    out.inlier_count = res.inlier_count;
    out.inlier_ratio = res.inlier_ratio;
    out.hypotheses_tested = res.hypotheses_tested;
    out.elapsed = res.elapsed;
    out.terminated_by = match res.terminated_by {
        Termination::InlierTarget => CrTermination::InlierTarget,
        Termination::TimeBudget => CrTermination::TimeBudget,
        Termination::Exhausted => CrTermination::Exhausted,
    };
}

/// Message of the last failed call on this thread, or null after a success.
/// Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn cr_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Static description of a status code.
#[no_mangle]
pub extern "C" fn cr_status_str(status: CrStatus) -> *const c_char {
    let s: &'static CStr = match status {
        CrStatus::Ok => c"ok",
        CrStatus::NullArgument => c"null argument",
        CrStatus::InvalidArgument => c"invalid argument",
        CrStatus::Io => c"i/o error",
        CrStatus::Parse => c"parse error",
        CrStatus::Geometry => c"degenerate input",
        CrStatus::NoHypothesis => c"no hypothesis found",
        CrStatus::Panic => c"internal panic",
    };
    s.as_ptr()
}

/// Defaults: 5 s budget, 95% inlier target, noise-free tolerances.
#[no_mangle]
pub extern "C" fn cr_params_default() -> CrParams {
    CrParams {
        max_time: 5.0,
        target_inlier_ratio: 0.95,
        inlier_threshold: 0.0,
        eps: 0.0,
        sigma: 0.0,
        seed: 0,
        tangent_window: 0,
    }
}

/// Builds an index over `n` surface points (3 doubles each). `normals` may
/// be null, in which case they are estimated from the points. A
/// `subsample` of 0 selects the default size.
#[no_mangle]
pub unsafe extern "C" fn cr_index_build(
    points: *const f64,
    normals: *const f64,
    n: usize,
    subsample: usize,
    out: *mut *mut CrIndex,
) -> CrStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        if n == 0 {
            return Err(invalid("surface has no points"));
        }
        let pts = points_from(slice(points, 3 * n, "points")?);
        let mut surface = SurfaceSamples::new(pts);
        if normals.is_null() {
            surface.estimate_normals(DEFAULT_NORMAL_NEIGHBORS.min(n.saturating_sub(1)).max(3))?;
        } else {
            let ns = slice(normals, 3 * n, "normals")?;
            let units: Option<Vec<UnitVec3>> = ns
                .chunks_exact(3)
                .map(|c| UnitVec3::try_new(Vec3::new(c[0], c[1], c[2]), 1e-12))
                .collect();
            surface.normals = Some(units.ok_or_else(|| invalid("zero-length normal"))?);
        }
        let mut cfg = PairIndexConfig::for_diameter(diameter(&surface.points));
        if subsample > 0 {
            cfg.subsample_size = subsample;
        }
        let index = build_pair_index(&surface, &cfg)?;
        *out = Box::into_raw(Box::new(CrIndex { inner: index }));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn cr_index_load(path: *const c_char, out: *mut *mut CrIndex) -> CrStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let index = load_index(&path_from(path)?)?;
        *out = Box::into_raw(Box::new(CrIndex { inner: index }));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn cr_index_save(index: *const CrIndex, path: *const c_char) -> CrStatus {
    guard(|| {
        let index = index.as_ref().ok_or_else(|| null("index"))?;
        save_index(&path_from(path)?, &index.inner)?;
        Ok(())
    })
}

/// Number of subsampled points the index refers to, or 0 for null.
#[no_mangle]
pub unsafe extern "C" fn cr_index_point_count(index: *const CrIndex) -> usize {
    index.as_ref().map_or(0, |i| i.inner.points.len())
}

/// Releases an index; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn cr_index_free(index: *mut CrIndex) {
    if !index.is_null() {
        drop(Box::from_raw(index));
    }
}

/// Registers a curve onto the indexed surface. The curve is `n_segments`
/// polylines stored back to back in `points`.
#[no_mangle]
pub unsafe extern "C" fn cr_register_curve_surface(
    index: *const CrIndex,
    points: *const f64,
    segment_lengths: *const usize,
    n_segments: usize,
    params: *const CrParams,
    out: *mut CrResult,
) -> CrStatus {
    guard(|| {
        let index = index.as_ref().ok_or_else(|| null("index"))?;
        let params = params.as_ref().ok_or_else(|| null("params"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let curve = curve_from(points, segment_lengths, n_segments, params.tangent_window)?;
        let rp = ransac_params(params, diameter(&index.inner.scoring_points));
        let res = register_curve_to_surface(&curve, &index.inner, &rp)?;
        write_result(&res, out);
        Ok(())
    })
}

/// Registers a source curve onto a target curve.
#[no_mangle]
pub unsafe extern "C" fn cr_register_curve_curve(
    source_points: *const f64,
    source_segment_lengths: *const usize,
    source_segments: usize,
    target_points: *const f64,
    target_segment_lengths: *const usize,
    target_segments: usize,
    params: *const CrParams,
    out: *mut CrResult,
) -> CrStatus {
    guard(|| {
        let params = params.as_ref().ok_or_else(|| null("params"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let source = curve_from(source_points, source_segment_lengths, source_segments, params.tangent_window)?;
        let target = curve_from(target_points, target_segment_lengths, target_segments, params.tangent_window)?;
        let rp = ransac_params(params, diameter(&target.points));
        let res = register_curve_to_curve(&source, &target, &rp)?;
        write_result(&res, out);
        Ok(())
    })
}
