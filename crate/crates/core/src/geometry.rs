//! Point+vector pairs, their invariant descriptor and the closed-form poses
//! recovered from a single matching pair.
//!
//! A pair couples two points `P`, `Q` with unit vectors `p`, `q` that are
//! either curve tangents or surface normals. The signs of those vectors carry
//! no information; every routine here gives the same answer when any of them
//! is negated.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Rotation3, Unit, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::GeometryError;

pub type Point3 = nalgebra::Point3<f64>;
pub type Vec3 = Vector3<f64>;
pub type UnitVec3 = Unit<Vector3<f64>>;

/// What the per-point vectors of a tuple represent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VectorKind {
    Tangents,
    Normals,
}

/// Two points, each carrying a unit tangent or unit normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointVectorTuple {
    pub p_pos: Point3,
    pub q_pos: Point3,
    pub p_dir: UnitVec3,
    pub q_dir: UnitVec3,
    pub kind: VectorKind,
}

impl PointVectorTuple {
    pub fn new(p_pos: Point3, q_pos: Point3, p_dir: UnitVec3, q_dir: UnitVec3, kind: VectorKind) -> Self {
        Self {
            p_pos,
            q_pos,
            p_dir,
            q_dir,
            kind,
        }
    }

    /// `d = Q - P`.
    pub fn baseline(&self) -> Vec3 {
        self.q_pos - self.p_pos
    }

    pub fn length(&self) -> f64 {
        self.baseline().norm()
    }

    /// The same tuple with the roles of the two points exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            p_pos: self.q_pos,
            q_pos: self.p_pos,
            p_dir: self.q_dir,
            q_dir: self.p_dir,
            kind: self.kind,
        }
    }

    pub fn transformed(&self, t: &RigidTransform) -> Self {
        Self {
            p_pos: t.apply(&self.p_pos),
            q_pos: t.apply(&self.q_pos),
            p_dir: Unit::new_unchecked(t.rotation * self.p_dir.into_inner()),
            q_dir: Unit::new_unchecked(t.rotation * self.q_dir.into_inner()),
            kind: self.kind,
        }
    }

    pub fn with_flipped(&self, flip_p: bool, flip_q: bool) -> Self {
        let mut out = *self;
        if flip_p {
            out.p_dir = -out.p_dir;
        }
        if flip_q {
            out.q_dir = -out.q_dir;
        }
        out
    }
}

/// Rotation- and translation-invariant description `(λ, φp, φq, θq)` of a tuple.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Descriptor {
    pub lambda: f64,
    pub phi_p: f64,
    pub phi_q: f64,
    pub theta_q: f64,
}

impl Descriptor {
    pub fn new(lambda: f64, phi_p: f64, phi_q: f64, theta_q: f64) -> Self {
        Self {
            lambda,
            phi_p,
            phi_q,
            theta_q,
        }
    }

    /// Largest component difference, with `θ` compared on the circle.
    pub fn max_deviation(&self, other: &Descriptor) -> f64 {
        (self.lambda - other.lambda)
            .abs()
            .max((self.phi_p - other.phi_p).abs())
            .max((self.phi_q - other.phi_q).abs())
            .max(angle_diff(self.theta_q, other.theta_q).abs())
    }
}

/// Gates that keep descriptors well conditioned.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DescriptorGuards {
    /// Minimum baseline length.
    pub d_min: f64,
    /// Minimum angle (rad) between either vector and the baseline.
    pub elevation_margin: f64,
}

impl DescriptorGuards {
    pub const DEFAULT_ELEVATION_MARGIN: f64 = 1e-3;

    /// `d_min` at 5% of the model diameter.
    pub fn for_diameter(diameter: f64) -> Self {
        Self {
            d_min: 0.05 * diameter,
            elevation_margin: Self::DEFAULT_ELEVATION_MARGIN,
        }
    }

    pub fn permissive() -> Self {
        Self {
            d_min: 0.0,
            elevation_margin: Self::DEFAULT_ELEVATION_MARGIN,
        }
    }
}

/// Wraps an angle to `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    }
    r
}

/// Signed circular difference `a - b` in `(-π, π]`.
pub fn angle_diff(a: f64, b: f64) -> f64 {
    wrap_angle(a - b)
}

/// Elevation of `v` above the plane orthogonal to `axis` (both unnormalised ok).
fn elevation(v: &Vec3, axis: &Vec3) -> f64 {
    let along = v.dot(axis);
    let across = v.cross(axis).norm();
    along.atan2(across)
}

/// Computes `Γ = (λ, φp, φq, θq)`.
///
/// Elevations are `asin(v·d/λ)`; the azimuth of `q` is
/// `sign(p·(d×q)) · ∠(q×d, p×d)`, with a zero sign treated as positive so that
/// `θ = π` is representable. Both are evaluated with `atan2` for accuracy.
pub fn compute_descriptor(
    tuple: &PointVectorTuple,
    guards: &DescriptorGuards,
) -> Result<Descriptor, GeometryError> {
    let d = tuple.baseline();
    let lambda = d.norm();
    if lambda < guards.d_min || lambda == 0.0 {
        return Err(GeometryError::DegenerateBaseline {
            length: lambda,
            d_min: guards.d_min,
        });
    }
    let p = tuple.p_dir.as_ref();
    let q = tuple.q_dir.as_ref();
    let cos_limit = guards.elevation_margin.cos();
    if (p.dot(&d) / lambda).abs() > cos_limit || (q.dot(&d) / lambda).abs() > cos_limit {
        return Err(GeometryError::DegenerateElevation {
            margin: guards.elevation_margin,
        });
    }
    let pxd = p.cross(&d);
    let qxd = q.cross(&d);
    if pxd.norm() == 0.0 || qxd.norm() == 0.0 {
        return Err(GeometryError::DegenerateElevation {
            margin: guards.elevation_margin,
        });
    }
    let phi_p = elevation(p, &d);
    let phi_q = elevation(q, &d);
    let cos_t = qxd.dot(&pxd);
    let sin_t = qxd.cross(&pxd).norm();
    let mut theta_q = sin_t.atan2(cos_t);
    if p.dot(&d.cross(q)) < 0.0 {
        theta_q = -theta_q;
    }
    if theta_q <= -PI {
        theta_q = PI;
    }
    Ok(Descriptor {
        lambda,
        phi_p,
        phi_q,
        theta_q,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: Rotation3<f64>,
    pub translation: Vec3,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn new(rotation: Rotation3<f64>, translation: Vec3) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn identity() -> Self {
        Self::new(Rotation3::identity(), Vec3::zeros())
    }

    pub fn from_rotation(rotation: Rotation3<f64>) -> Self {
        Self::new(rotation, Vec3::zeros())
    }

    pub fn apply(&self, p: &Point3) -> Point3 {
        self.rotation * p + self.translation
    }

    pub fn apply_vector(&self, v: &Vec3) -> Vec3 {
        self.rotation * v
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform::new(
            self.rotation * other.rotation,
            self.rotation * other.translation + self.translation,
        )
    }

    pub fn inverse(&self) -> RigidTransform {
        let r = self.rotation.inverse();
        RigidTransform::new(r, -(r * self.translation))
    }

    /// `max |RᵀR - I|` and `|det R - 1|`.
    pub fn orthonormality_defect(&self) -> (f64, f64) {
        let m = self.rotation.matrix();
        let e = (m.transpose() * m - Matrix3::identity()).abs().max();
        (e, (m.determinant() - 1.0).abs())
    }

    /// Row-major rotation entries.
    pub fn rotation_row_major(&self) -> [f64; 9] {
        let m = self.rotation.matrix();
        [
            m[(0, 0)],
            m[(0, 1)],
            m[(0, 2)],
            m[(1, 0)],
            m[(1, 1)],
            m[(1, 2)],
            m[(2, 0)],
            m[(2, 1)],
            m[(2, 2)],
        ]
    }

    pub fn from_row_major(r: &[f64; 9], t: &[f64; 3]) -> Self {
        let m = Matrix3::new(r[0], r[1], r[2], r[3], r[4], r[5], r[6], r[7], r[8]);
        RigidTransform::new(Rotation3::from_matrix_unchecked(m), Vec3::new(t[0], t[1], t[2]))
    }
}

/// Rotation taking direction `d` onto direction `d_hat` about their common
/// normal. Antiparallel inputs rotate by π about `normalize(d × e)`, with `e`
/// the canonical axis least aligned with `d`.
pub fn rotation_aligning(d: &Vec3, d_hat: &Vec3) -> Result<Rotation3<f64>, GeometryError> {
    let nd = d.norm();
    let nh = d_hat.norm();
    if nd == 0.0 || nh == 0.0 || !nd.is_finite() || !nh.is_finite() {
        return Err(GeometryError::ZeroVector);
    }
    let a = d / nd;
    let b = d_hat / nh;
    let axis = a.cross(&b);
    let sin_a = axis.norm();
    let cos_a = a.dot(&b);
    let alpha = sin_a.atan2(cos_a);
    if sin_a < 1e-15 {
        if cos_a > 0.0 {
            return Ok(Rotation3::identity());
        }
        let e = least_aligned_axis(&a);
        let w = Unit::new_normalize(a.cross(&e));
        return Ok(Rotation3::from_axis_angle(&w, PI));
    }
    Ok(Rotation3::from_axis_angle(&Unit::new_unchecked(axis / sin_a), alpha))
}

fn least_aligned_axis(v: &Vec3) -> Vec3 {
    let (ax, ay, az) = (v.x.abs(), v.y.abs(), v.z.abs());
    if ax <= ay && ax <= az {
        Vec3::x()
    } else if ay <= az {
        Vec3::y()
    } else {
        Vec3::z()
    }
}

fn skew(v: &Vec3) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// β recovered from the null space of `M`, along with how far the null vector
/// is from a valid `(cos β, sin β, 1)` triple.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaSolution {
    pub beta: f64,
    pub consistency: f64,
}

/// Default acceptance for `|c² + s² - 1|` on noise-free data.
pub const EXACT_CONSISTENCY_TOL: f64 = 1e-6;

/// Solves for the rotation angle β about `d̂` that places the curve tangents
/// into the planes of the surface normals once `r1` has aligned the baselines.
pub fn solve_beta_cs(
    curve: &PointVectorTuple,
    surface: &PointVectorTuple,
    r1: &Rotation3<f64>,
    consistency_tol: f64,
) -> Result<BetaSolution, GeometryError> {
    let d_hat = surface.baseline();
    let lambda_sq = d_hat.norm_squared();
    if lambda_sq == 0.0 {
        return Err(GeometryError::ZeroVector);
    }
    let lambda = lambda_sq.sqrt();
    let dd = d_hat * d_hat.transpose() / lambda_sq;
    let i_minus_d = Matrix3::identity() - dd;
    let k = skew(&d_hat) / lambda;

    let row = |v: &UnitVec3, n: &UnitVec3| -> Vec3 {
        let rv = r1 * v.as_ref();
        let n = n.as_ref();
        Vec3::new(rv.dot(&(i_minus_d * n)), -rv.dot(&(k * n)), rv.dot(&(dd * n)))
    };
    let r_p = row(&curve.p_dir, &surface.p_dir);
    let r_q = row(&curve.q_dir, &surface.q_dir);

    let null = r_p.cross(&r_q);
    let scale = r_p.norm() * r_q.norm();
    if scale == 0.0 || null.norm() <= 1e-12 * scale {
        return Err(GeometryError::RankDeficientM);
    }
    if null.z.abs() <= 1e-12 * null.norm() {
        return Err(GeometryError::NoConsistentSolution {
            consistency: f64::INFINITY,
        });
    }
    let c = null.x / null.z;
    let s = null.y / null.z;
    let consistency = (c * c + s * s - 1.0).abs();
    if consistency > consistency_tol || !consistency.is_finite() {
        return Err(GeometryError::NoConsistentSolution { consistency });
    }
    Ok(BetaSolution {
        beta: s.atan2(c),
        consistency,
    })
}

/// Pose aligning a curve tuple (tangents) with a surface tuple (normals), with
/// `P ↔ P̂` and `Q ↔ Q̂`.
pub fn pose_from_match_cs(
    curve: &PointVectorTuple,
    surface: &PointVectorTuple,
    consistency_tol: f64,
) -> Result<RigidTransform, GeometryError> {
    let d = curve.baseline();
    let d_hat = surface.baseline();
    let r1 = rotation_aligning(&d, &d_hat)?;
    let sol = solve_beta_cs(curve, surface, &r1, consistency_tol)?;
    let axis = Unit::new_normalize(d_hat);
    let r2 = Rotation3::from_axis_angle(&axis, sol.beta);
    let rotation = r2 * r1;
    let translation = surface.p_pos.coords - rotation * curve.p_pos.coords;
    Ok(RigidTransform::new(rotation, translation))
}

/// Pose aligning two tuples of the same kind from both points and the first
/// vector; the second vector only validates the result. Vector signs are free.
pub fn pose_from_match_cc(
    a: &PointVectorTuple,
    b: &PointVectorTuple,
    vector_tol: f64,
) -> Result<RigidTransform, GeometryError> {
    if a.kind != b.kind {
        return Err(GeometryError::KindMismatch);
    }
    let d = a.baseline();
    let d_hat = b.baseline();
    let r1 = rotation_aligning(&d, &d_hat)?;
    let u = Unit::new_normalize(d_hat);
    let perp = |v: &Vec3| v - u.as_ref() * v.dot(&u);

    let v = perp(&(r1 * a.p_dir.as_ref()));
    if v.norm() < 1e-12 {
        return Err(GeometryError::DegenerateElevation { margin: 0.0 });
    }
    let mut best: Option<(f64, RigidTransform)> = None;
    for sign in [1.0, -1.0] {
        let target = b.p_dir.as_ref() * sign;
        let w = perp(&target);
        if w.norm() < 1e-12 {
            continue;
        }
        let beta = u.dot(&v.cross(&w)).atan2(v.dot(&w));
        let rotation = Rotation3::from_axis_angle(&u, beta) * r1;
        let residual = (rotation * a.p_dir.as_ref() - target).norm();
        if best.as_ref().is_none_or(|(r, _)| residual < *r) {
            let translation = b.p_pos.coords - rotation * a.p_pos.coords;
            best = Some((residual, RigidTransform::new(rotation, translation)));
        }
    }
    let (p_residual, transform) = best.ok_or(GeometryError::DegenerateElevation { margin: 0.0 })?;
    if p_residual > vector_tol {
        return Err(GeometryError::MisalignedFirstVector {
            residual: p_residual,
        });
    }
    let rq = transform.rotation * a.q_dir.as_ref();
    let q_hat = b.q_dir.as_ref();
    let q_residual = (rq - q_hat).norm().min((rq + q_hat).norm());
    if q_residual > vector_tol {
        return Err(GeometryError::InconsistentSecondVector {
            residual: q_residual,
        });
    }
    Ok(transform)
}

/// Geodesic angle between two rotations, in degrees.
pub fn rotation_error(ra: &Rotation3<f64>, rb: &Rotation3<f64>) -> f64 {
    let m = (ra.inverse() * rb).into_inner();
    let sin_half2 = Vec3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)]).norm() / 2.0;
    let cos_t = (m.trace() - 1.0) / 2.0;
    sin_half2.atan2(cos_t).to_degrees()
}

pub fn translation_error(ta: &Vec3, tb: &Vec3) -> f64 {
    (ta - tb).norm()
}
