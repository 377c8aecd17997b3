//! Bounded velocity generator: a saturation-aware first-order filter whose
//! output `ω_v` stays strictly inside `(−B_ω, B_ω)` on every axis.

use crate::attitude::Vec3;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BvgParams {
    pub c_d: f64,
    /// Filter bandwidth, 1/s.
    pub c_f: f64,
    /// Output bound, rad/s.
    pub b_omega: f64,
    /// Floor applied when the controller inverts the gain matrix.
    pub kappa_min: f64,
}

/// Gain shaping `𝒦 = 1 − (ω/B)²`; vanishes on the bound.
pub fn kappa(omega: f64, b: f64) -> f64 {
    let r = omega / b;
    if r.abs() > 1.0 {
        log::warn!("velocity generator output {omega} outside bound {b}");
        return 0.0;
    }
    1.0 - r * r
}

/// `ω̇_v = −C_d C_f ω_v + C_f 𝒦(ω_v) v`, per axis.
pub fn bvg_deriv(omega_v: Vec3, v: Vec3, p: &BvgParams) -> Vec3 {
    let axis = |w: f64, vi: f64| -p.c_d * p.c_f * w + p.c_f * kappa(w, p.b_omega) * vi;
    Vec3::new(
        axis(omega_v.x, v.x),
        axis(omega_v.y, v.y),
        axis(omega_v.z, v.z),
    )
}

/// Exact flow of one axis over `dt` with the input `v` held.
///
/// With `a = C_d C_f` and `c = C_f v` the axis obeys the Riccati equation
/// `ω̇ = c − aω − (c/B²)ω²`, whose roots are `r₁ = 2c/(a + D)` inside the
/// bound and `r₂ = −B²/r₁` outside it, `D = √(a² + 4c²/B²)`. The ratio
/// `(ω − r₁)/(ω − r₂)` decays as `e^{−Dt}`, which keeps `|ω| < B`.
pub fn flow_axis(omega: f64, v: f64, p: &BvgParams, dt: f64) -> f64 {
    let a = p.c_d * p.c_f;
    let c = p.c_f * v;
    let b2 = p.b_omega * p.b_omega;
    let d = (a * a + 4.0 * c * c / b2).sqrt();
    let r1 = 2.0 * c / (a + d);
    let e = (-d * dt).exp();
    let den = r1 * omega + b2;
    let num = r1 + e * (omega - r1) * b2 / den;
    let out = num / (1.0 - e * (omega - r1) * r1 / den);
    // rounding can land exactly on the bound when the input is enormous
    let lim = p.b_omega * (1.0 - f64::EPSILON);
    out.clamp(-lim, lim)
}

/// Advances all three axes with held input.
pub fn advance(omega_v: Vec3, v: Vec3, p: &BvgParams, dt: f64) -> Vec3 {
    Vec3::new(
        flow_axis(omega_v.x, v.x, p, dt),
        flow_axis(omega_v.y, v.y, p, dt),
        flow_axis(omega_v.z, v.z, p, dt),
    )
}
