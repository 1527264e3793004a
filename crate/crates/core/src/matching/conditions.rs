//! Necessary conditions for two descriptors to belong to matching tuples.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::geometry::{angle_diff, Descriptor};

/// Curve (tangent) vs surface (normal): equal baselines within `eps` and
/// elevations that allow each tangent cone to meet its normal plane.
pub fn check_necessary_cs(g: &Descriptor, gh: &Descriptor, eps: f64) -> bool {
    necessary_cs_with_slack(g, gh, eps, 0.0)
}

/// [`check_necessary_cs`] with the elevation bounds widened by `slack` rad.
pub fn necessary_cs_with_slack(g: &Descriptor, gh: &Descriptor, eps: f64, slack: f64) -> bool {
    (g.lambda - gh.lambda).abs() <= eps
        && elevation_reachable(g.phi_p, gh.phi_p, slack)
        && elevation_reachable(g.phi_q, gh.phi_q, slack)
}

fn elevation_reachable(phi: f64, phi_hat: f64, slack: f64) -> bool {
    let bound = FRAC_PI_2 - phi.abs() + slack;
    -bound <= phi_hat && phi_hat <= bound
}

/// Range of surface elevations compatible with a curve elevation.
pub fn elevation_bounds(phi: f64, slack: f64) -> (f64, f64) {
    let b = FRAC_PI_2 - phi.abs() + slack;
    (-b, b)
}

/// Trigonometric terms of a descriptor used by the simultaneity test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimultaneityTerms {
    pub tan_phi_p: f64,
    pub tan_phi_q: f64,
    pub cos_theta: f64,
    pub sin_theta: f64,
}

impl From<&Descriptor> for SimultaneityTerms {
    fn from(g: &Descriptor) -> Self {
        let (sin_theta, cos_theta) = g.theta_q.sin_cos();
        Self {
            tan_phi_p: g.phi_p.tan(),
            tan_phi_q: g.phi_q.tan(),
            cos_theta,
            sin_theta,
        }
    }
}

/// Mismatch of the second orthogonality constraint, `|cos(β + θ̂q - θq) - c₂|`
/// with `c₂ = -tan φq tan φq̂`, minimised over the two rotation angles `±β`
/// that solve the first. `None` when the first constraint has no real
/// solution.
pub fn simultaneous_residual_cs(g: &Descriptor, gh: &Descriptor) -> Option<f64> {
    simultaneous_residual_terms(&g.into(), &gh.into())
}

/// [`simultaneous_residual_cs`] on precomputed terms (curve first).
///
/// With `cos β = c₁` and `s = θ̂q - θq`, `cos(±β + s) = c₁ cos s ∓ sin β sin s`,
/// so the smaller of the two mismatches is `||c₁ cos s - c₂| - |sin β sin s||`.
#[inline]
pub fn simultaneous_residual_terms(a: &SimultaneityTerms, b: &SimultaneityTerms) -> Option<f64> {
    let c1 = -a.tan_phi_p * b.tan_phi_p;
    if !(c1.abs() <= 1.0) {
        return None;
    }
    let c2 = -a.tan_phi_q * b.tan_phi_q;
    let sin_beta = (1.0 - c1 * c1).sqrt();
    let cos_s = b.cos_theta * a.cos_theta + b.sin_theta * a.sin_theta;
    let sin_s = b.sin_theta * a.cos_theta - b.cos_theta * a.sin_theta;
    Some(((c1 * cos_s - c2).abs() - (sin_beta * sin_s).abs()).abs())
}

/// Whether one rotation about the common baseline makes both tangents
/// orthogonal to their normals, to within `tol`.
pub fn check_simultaneous_cs(g: &Descriptor, gh: &Descriptor, tol: f64) -> bool {
    simultaneous_residual_cs(g, gh).is_some_and(|r| r <= tol)
}

/// Sign choices `(p̂ ↦ ±p, q̂ ↦ ±q)` under which two same-kind descriptors
/// agree. Flipping exactly one vector moves `θ` by π.
pub fn cc_sign_choices(
    g: &Descriptor,
    gh: &Descriptor,
    tol_len: f64,
    tol_ang: f64,
) -> impl Iterator<Item = (bool, bool)> {
    let (g, gh) = (*g, *gh);
    let len_ok = (g.lambda - gh.lambda).abs() <= tol_len;
    [(false, false), (true, true), (true, false), (false, true)]
        .into_iter()
        .filter(move |&(flip_p, flip_q)| {
            let sp = if flip_p { -1.0 } else { 1.0 };
            let sq = if flip_q { -1.0 } else { 1.0 };
            let offset = if flip_p != flip_q { PI } else { 0.0 };
            len_ok
                && (g.phi_p - sp * gh.phi_p).abs() <= tol_ang
                && (g.phi_q - sq * gh.phi_q).abs() <= tol_ang
                && angle_diff(g.theta_q, gh.theta_q + offset).abs() <= tol_ang
        })
}

/// Equality conditions for curve vs curve (or surface vs surface).
pub fn check_conditions_cc(g: &Descriptor, gh: &Descriptor, tol_len: f64, tol_ang: f64) -> bool {
    cc_sign_choices(g, gh, tol_len, tol_ang).next().is_some()
}
