//! Ground-truth rigid spacecraft: time-varying inertia, environmental
//! disturbance, actuator saturation and the error-dynamics right-hand side.

use crate::attitude::{Mat3, UnitQuaternion, Vec3, Vech6};
use thiserror::Error;

pub const DEG: f64 = std::f64::consts::PI / 180.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlantFault {
    #[error("non-finite plant state at t = {t}")]
    NonFinite { t: f64 },
    #[error("inertia matrix singular at t = {t}")]
    SingularInertia { t: f64 },
}

/// Sinusoidal inertia variation used in the simulation campaign.
pub fn delta_inertia(t: f64) -> Vech6 {
    let c = (0.2 * t + 10.0).cos();
    Vech6([
        0.2 * (0.1 * t + 20.0).sin() + 0.3 * c,
        0.1 * (0.6 * t + 10.0).sin() + 0.2 * c + 0.2,
        0.1 * (0.5 * t).sin() + 0.1 * c + 0.2,
        0.3 * (0.5 * t).sin() + 0.3 * c,
        0.1 * (0.3 * t + 20.0).sin() + 0.1 * c + 0.2,
        0.4 * (0.2 * t).sin() + 0.3 * c,
    ])
}

/// Time derivative of [`delta_inertia`].
pub fn delta_inertia_rate(t: f64) -> Vech6 {
    let s = -0.2 * (0.2 * t + 10.0).sin();
    Vech6([
        0.02 * (0.1 * t + 20.0).cos() + 0.3 * s,
        0.06 * (0.6 * t + 10.0).cos() + 0.2 * s,
        0.05 * (0.5 * t).cos() + 0.1 * s,
        0.15 * (0.5 * t).cos() + 0.3 * s,
        0.03 * (0.3 * t + 20.0).cos() + 0.1 * s,
        0.08 * (0.2 * t).cos() + 0.3 * s,
    ])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InertiaVariation {
    Constant,
    Sinusoidal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InertiaModel {
    pub j0: Mat3,
    pub variation: InertiaVariation,
}

impl InertiaModel {
    pub fn delta(&self, t: f64) -> Vech6 {
        match self.variation {
            InertiaVariation::Constant => Vech6::default(),
            InertiaVariation::Sinusoidal => delta_inertia(t),
        }
    }

    pub fn total(&self, t: f64) -> Mat3 {
        self.j0.add(&self.delta(t).to_symmetric())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DisturbanceModel {
    None,
    /// Biased multi-tone torque with base frequency `omega_p` (rad/s),
    /// multiplied by `scale`.
    MultiTone {
        omega_p: f64,
        scale: f64,
    },
}

/// Environmental torque `d_e(t)` in N·m.
pub fn disturbance(t: f64, omega_p: f64) -> Vec3 {
    let w = omega_p * t;
    Vec3::new(
        1e-3 * (4.0 * (3.0 * w).sin() + 3.0 * (10.0 * w).cos() - 40.0),
        1e-3 * (-1.5 * (2.0 * w).sin() + 3.0 * (5.0 * w).cos() + 40.0),
        1e-3 * (3.0 * (10.0 * w).sin() - 8.0 * (4.0 * w).cos() + 45.0),
    )
}

impl DisturbanceModel {
    pub fn eval(&self, t: f64) -> Vec3 {
        match *self {
            DisturbanceModel::None => Vec3::ZERO,
            DisturbanceModel::MultiTone { omega_p, scale } => disturbance(t, omega_p) * scale,
        }
    }
}

/// Per-axis actuator clamp. Returns `(τ, Δu = τ − u_c)`.
pub fn saturate(u_c: Vec3, u_max: f64) -> (Vec3, Vec3) {
    let tau = u_c.map(|u| {
        if u.abs() <= u_max {
            u
        } else {
            u_max.copysign(u)
        }
    });
    (tau, tau - u_c)
}

/// Desired angular velocity of the target frame, expressed in the target frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DesiredMotion {
    /// Inertially fixed target.
    Rest,
    /// `ω_d = A [cos(t/c1), sin(t/c2), −cos(t/c3)]`, amplitude in rad/s.
    Tracking { amplitude: f64, c: [f64; 3] },
}

impl DesiredMotion {
    pub fn omega(&self, t: f64) -> Vec3 {
        match *self {
            DesiredMotion::Rest => Vec3::ZERO,
            DesiredMotion::Tracking { amplitude, c } => {
                Vec3::new((t / c[0]).cos(), (t / c[1]).sin(), -(t / c[2]).cos()) * amplitude
            }
        }
    }

    pub fn omega_dot(&self, t: f64) -> Vec3 {
        match *self {
            DesiredMotion::Rest => Vec3::ZERO,
            DesiredMotion::Tracking { amplitude, c } => {
                Vec3::new(
                    -(t / c[0]).sin() / c[0],
                    (t / c[1]).cos() / c[1],
                    (t / c[2]).sin() / c[2],
                ) * amplitude
            }
        }
    }

    /// Largest `|ω_di(t)|` over `[0, horizon]`, sampled at 0.01 s.
    pub fn max_component(&self, horizon: f64) -> f64 {
        self.sample_max(horizon, Vec3::max_abs)
    }

    /// Largest `‖ω_d(t)‖` over `[0, horizon]`, sampled at 0.01 s.
    pub fn max_norm(&self, horizon: f64) -> f64 {
        self.sample_max(horizon, Vec3::norm)
    }

    fn sample_max(&self, horizon: f64, f: fn(Vec3) -> f64) -> f64 {
        match *self {
            DesiredMotion::Rest => 0.0,
            DesiredMotion::Tracking { .. } => {
                let n = (horizon / 0.01).ceil() as usize;
                (0..=n)
                    .map(|k| f(self.omega(k as f64 * 0.01)))
                    .fold(0.0, f64::max)
            }
        }
    }
}

/// Ground-truth state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantTruth {
    pub q_s: UnitQuaternion,
    pub q_d: UnitQuaternion,
    pub omega_e: Vec3,
    pub t: f64,
}

pub const PLANT_DIM: usize = 11;

impl PlantTruth {
    pub fn c_e(&self) -> Mat3 {
        self.q_d.inverse().mul(self.q_s).to_dcm()
    }

    /// `ω_s = ω_e + C_e ω_d`.
    pub fn omega_s(&self, desired: &DesiredMotion) -> Vec3 {
        self.omega_e + self.c_e().mul_vec(desired.omega(self.t))
    }

    pub fn pack(&self) -> [f64; PLANT_DIM] {
        let mut x = [0.0; PLANT_DIM];
        x[..4].copy_from_slice(&self.q_s.to_array());
        x[4..8].copy_from_slice(&self.q_d.to_array());
        x[8..].copy_from_slice(&self.omega_e.to_array());
        x
    }

    /// Unpacks and renormalises both quaternions.
    pub fn unpack(x: &[f64], t: f64) -> Self {
        Self {
            q_s: UnitQuaternion::from_array_normalized([x[0], x[1], x[2], x[3]]),
            q_d: UnitQuaternion::from_array_normalized([x[4], x[5], x[6], x[7]]),
            omega_e: Vec3::new(x[8], x[9], x[10]),
            t,
        }
    }
}

/// Truth models driving [`plant_deriv`].
#[derive(Debug, Clone, PartialEq)]
pub struct PlantModel {
    pub inertia: InertiaModel,
    pub disturbance: DisturbanceModel,
    pub desired: DesiredMotion,
}

/// Right-hand side over the packed state `[q_s, q_d, ω_e]` (unnormalised
/// quaternions are accepted, as occur inside Runge–Kutta stages).
///
/// `J ω̇_e = J ω_e× C_e ω_d − J C_e ω̇_d − ω_s× J ω_s + τ + d_e`
pub fn plant_deriv(
    model: &PlantModel,
    t: f64,
    x: &[f64],
    tau: Vec3,
    out: &mut [f64],
) -> Result<(), PlantFault> {
    if x.iter().any(|v| !v.is_finite()) || !tau.is_finite() {
        return Err(PlantFault::NonFinite { t });
    }
    let q_s = UnitQuaternion::from_parts_unchecked(Vec3::new(x[0], x[1], x[2]), x[3]);
    let q_d = UnitQuaternion::from_parts_unchecked(Vec3::new(x[4], x[5], x[6]), x[7]);
    let omega_e = Vec3::new(x[8], x[9], x[10]);
    let omega_d = model.desired.omega(t);
    let omega_d_dot = model.desired.omega_dot(t);

    // C_e from the normalised error quaternion
    let c_e = q_d.normalized().inverse().mul(q_s.normalized()).to_dcm();
    let c_wd = c_e.mul_vec(omega_d);
    let omega_s = omega_e + c_wd;
    let j = model.inertia.total(t);

    let rhs = j.mul_vec(omega_e.cross(c_wd))
        - j.mul_vec(c_e.mul_vec(omega_d_dot))
        - omega_s.cross(j.mul_vec(omega_s))
        + tau
        + model.disturbance.eval(t);
    let omega_e_dot = j.solve(rhs).ok_or(PlantFault::SingularInertia { t })?;

    out[..4].copy_from_slice(&q_s.kinematics(omega_s));
    out[4..8].copy_from_slice(&q_d.kinematics(omega_d));
    out[8..11].copy_from_slice(&omega_e_dot.to_array());
    if out[..PLANT_DIM].iter().any(|v| !v.is_finite()) {
        return Err(PlantFault::NonFinite { t });
    }
    Ok(())
}
