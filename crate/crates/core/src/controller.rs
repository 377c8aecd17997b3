//! Adaptive compatible performance controller.
//!
//! One call to [`controller_step`] evaluates the complete control law at a
//! sampling instant: error transformation, bounded-velocity input, command
//! torque, the three anti-windup auxiliaries and the projection-governed
//! adaptive subsystem. [`ControllerState::advance`] then propagates the
//! controller's internal states over one control period.

use crate::attitude::{
    build_regressor_w, error_attitude, gamma_jacobian, regressor_wj, skew, Mat3, Mat3x9,
    UnitQuaternion, Vec3, Vech6,
};
use crate::bvg::{self, bvg_deriv, kappa, BvgParams};
use crate::envelope::{
    self, admissible_limit, eval_f_rho, excitation, indicator, judgment, modification_deriv,
    nominal_pf, rho_max_rate, DetectionParams, EnvelopeSignals, ModificationParams, PerfFnParams,
};
use crate::plant::saturate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControllerFault {
    #[error("envelope violated on axis {axis} at t = {t}: |ε| = {eps}")]
    EnvelopeViolation { axis: usize, eps: f64, t: f64 },
    #[error("velocity-generator input diverged at t = {t}: |v| = {norm}")]
    InputDiverged { norm: f64, t: f64 },
    #[error("non-finite controller signal at t = {t}")]
    NonFinite { t: f64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GainError {
    #[error("nominal inertia is not positive definite (λ_min = {0})")]
    InvalidInertia(f64),
}

/// Controller gains, adaptive bounds and regularisation floors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerGains {
    pub k_b: f64,
    pub k_q: f64,
    pub k_xi: f64,
    pub k_2: f64,
    pub k_delta: f64,
    pub k_gamma: f64,
    pub k_zeta: f64,
    pub lambda_zeta: f64,
    pub lambda_chi: f64,
    pub p_1: f64,
    pub p_2: f64,
    pub p_xi: f64,
    pub p_c: f64,
    pub n_1: f64,
    pub n_2: f64,
    pub n_delta: f64,
    pub g_1: f64,
    pub g_2: f64,
    pub g_gamma: f64,
    pub g_c: f64,
    pub a_1: f64,
    pub a_2: f64,
    pub a_3: f64,
    pub b_1: f64,
    pub zeta_0: f64,
    pub zeta_max: f64,
    pub sigma_zeta: f64,
    pub chi_0: f64,
    pub theta_lm: f64,
    pub sigma_theta: f64,
    pub eps_omega: f64,
    pub eps_aux: f64,
    /// Fault threshold on ‖v‖.
    pub v_ceiling: f64,
}

/// `L_ρ = (3(C_v + 1)/2)(1 + σ_ρ)²`.
pub fn l_rho(c_v: f64, sigma_rho: f64) -> f64 {
    1.5 * (c_v + 1.0) * (1.0 + sigma_rho).powi(2)
}

/// How the uncertainty is handled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "kebab-case")]
pub enum Variant {
    /// Time-varying adaptive gain.
    Acpc,
    /// Adaptive law with the gain frozen at `zeta`.
    ConstantGain { zeta: f64 },
    /// Exact inertia coupling plus `K_s D_m tanh(z₂/φ)` disturbance rejection.
    Nominal { d_m: f64, phi: f64, k_s: f64 },
}

impl Variant {
    pub fn name(&self) -> &'static str {
        match self {
            Variant::Acpc => "acpc",
            Variant::ConstantGain { .. } => "constant-gain",
            Variant::Nominal { .. } => "nominal",
        }
    }
}

/// Everything the control law needs besides measurements.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerConfig {
    pub perf: [PerfFnParams; 3],
    pub detection: DetectionParams,
    pub modification: ModificationParams,
    pub bvg: BvgParams,
    pub gains: ControllerGains,
    pub j0: Mat3,
    pub u_max: f64,
    pub variant: Variant,
    /// RK4 sub-steps for the envelope modification within one period.
    pub modification_substeps: usize,
    /// Control period. When positive, the `J₀ω̇_v` feedforward uses the
    /// change of `ω_v` over one period under the exact generator flow instead
    /// of the instantaneous rate.
    pub sample_time: f64,
}

/// Sensor-side inputs at a sampling instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurements {
    pub t: f64,
    pub q_s: UnitQuaternion,
    pub q_d: UnitQuaternion,
    pub omega_s: Vec3,
    pub omega_d: Vec3,
    pub omega_d_dot: Vec3,
    /// True inertia offset, consumed only by the nominal variant.
    pub true_delta_j: Option<Vech6>,
}

/// Dynamic states of the controller.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerState {
    pub omega_v: Vec3,
    pub delta_rho: [f64; 3],
    pub xi: Vec3,
    pub delta: Vec3,
    pub gamma_eps: Vec3,
    pub theta_hat: [f64; 9],
    pub zeta: f64,
    pub chi: f64,
    /// ϖ from the previous sample; breaks the Λ → v → ϖ → Δρ̇ loop.
    pub varpi_prev: Vec3,
}

impl ControllerState {
    /// Quiescent start: everything zero except `ζ(t₀)` and `χ(t₀)`.
    pub fn initial(cfg: &ControllerConfig) -> Self {
        let zeta = match cfg.variant {
            Variant::ConstantGain { zeta } => zeta,
            _ => cfg.gains.zeta_0,
        };
        Self {
            omega_v: Vec3::ZERO,
            delta_rho: [0.0; 3],
            xi: Vec3::ZERO,
            delta: Vec3::ZERO,
            gamma_eps: Vec3::ZERO,
            theta_hat: [0.0; 9],
            zeta,
            chi: cfg.gains.chi_0,
            varpi_prev: Vec3::ZERO,
        }
    }
}

/// Error transformation at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorTransform {
    pub eps: Vec3,
    /// `diag(1/ρ)`
    pub psi: Mat3,
    /// `diag(ρ̇/ρ)`
    pub lambda: Mat3,
    /// `diag(k_B/(1 − ε²))`
    pub g_eps: Mat3,
}

/// `ε = q/ρ` and the associated diagonal gains. Fails when `|ε_i| ≥ 1`.
pub fn transform_error(
    q_ev: Vec3,
    rho: [f64; 3],
    rho_dot: [f64; 3],
    k_b: f64,
    t: f64,
) -> Result<ErrorTransform, ControllerFault> {
    let mut eps = Vec3::ZERO;
    for i in 0..3 {
        eps[i] = q_ev[i] / rho[i];
        if !(eps[i].abs() < 1.0) {
            return Err(ControllerFault::EnvelopeViolation {
                axis: i,
                eps: eps[i].abs(),
                t,
            });
        }
    }
    let r = Vec3::from_array(rho);
    Ok(ErrorTransform {
        eps,
        psi: Mat3::diag(r.map(|x| 1.0 / x)),
        lambda: Mat3::diag(Vec3::from_array(rho_dot).hadamard(r.map(|x| 1.0 / x))),
        g_eps: Mat3::diag(eps.map(|e| k_b / (1.0 - e * e))),
    })
}

/// `P_ε = Γᵀ(G_ε Ψ ε + K_q q_ev)`.
pub fn coupling_p_eps(gamma_e: &Mat3, tr: &ErrorTransform, q_ev: Vec3, k_q: f64) -> Vec3 {
    gamma_e
        .transpose()
        .mul_vec(tr.g_eps.mul_vec(tr.psi.mul_vec(tr.eps)) + q_ev * k_q)
}

/// Input of the velocity generator:
/// `v = −(1/C_f) K_f⁻¹ [Γᵀ(ΨG_εε + K_q q) − ω_v εᵀG_εΛε/(‖ω_v‖² + ε_ω) − K_ξ ξ]`
/// with each `𝒦` floored at `κ_min` before inversion.
pub fn virtual_input_v(
    tr: &ErrorTransform,
    gamma_e: &Mat3,
    q_ev: Vec3,
    omega_v: Vec3,
    xi: Vec3,
    gains: &ControllerGains,
    bvg: &BvgParams,
) -> Vec3 {
    let shaped = tr.psi.mul_vec(tr.g_eps.mul_vec(tr.eps)) + q_ev * gains.k_q;
    let quad = tr.eps.dot(tr.g_eps.mul_vec(tr.lambda.mul_vec(tr.eps)));
    let inner = gamma_e.transpose().mul_vec(shaped)
        - omega_v * (quad / (omega_v.norm_squared() + gains.eps_omega))
        - xi * gains.k_xi;
    let mut v = Vec3::ZERO;
    for i in 0..3 {
        let k = kappa(omega_v[i], bvg.b_omega).max(bvg.kappa_min);
        v[i] = -inner[i] / (bvg.c_f * k);
    }
    v
}

/// Linear auxiliary flow `ẋ = −c x + drive` with a state-dependent gain
/// frozen at the sampling instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuxFlow {
    pub gain: f64,
    pub drive: Vec3,
}

impl AuxFlow {
    pub fn deriv(&self, x: Vec3) -> Vec3 {
        x * -self.gain + self.drive
    }

    /// Exponential-Euler step, exact for the frozen gain.
    pub fn advance(&self, x: Vec3, dt: f64) -> Vec3 {
        let e = (-self.gain * dt).exp();
        let phi = if self.gain * dt > 1e-12 {
            (1.0 - e) / self.gain
        } else {
            dt
        };
        x * e + self.drive * phi
    }
}

/// `ξ̇ = −[p₁ + p_ξ(‖Δς‖² + ‖w‖² + p_c/p_ξ)/‖ξ‖²] ξ + p₂(Δς + w)`.
pub fn aux_xi_flow(xi: Vec3, varsigma: Vec3, w: Vec3, g: &ControllerGains) -> AuxFlow {
    let num = g.p_xi * (varsigma.norm_squared() + w.norm_squared()) + g.p_c;
    AuxFlow {
        gain: g.p_1 + num / (xi.norm_squared() + g.eps_aux),
        drive: (varsigma + w) * g.p_2,
    }
}

pub fn aux_xi_deriv(xi: Vec3, varsigma: Vec3, w: Vec3, g: &ControllerGains) -> Vec3 {
    aux_xi_flow(xi, varsigma, w, g).deriv(xi)
}

/// `δ̇ = −[n₁ + n_δ‖Δu‖²/‖δ‖²] δ + n₂ Δu`.
pub fn aux_delta_flow(delta: Vec3, du: Vec3, g: &ControllerGains) -> AuxFlow {
    AuxFlow {
        gain: g.n_1 + g.n_delta * du.norm_squared() / (delta.norm_squared() + g.eps_aux),
        drive: du * g.n_2,
    }
}

pub fn aux_delta_deriv(delta: Vec3, du: Vec3, g: &ControllerGains) -> Vec3 {
    aux_delta_flow(delta, du, g).deriv(delta)
}

/// `γ̇ = −[g₁ + g_γ(‖z₂‖²‖P_ε‖² + g_c/g_γ)/‖γ‖²] γ + g₂‖P_ε‖ z₂`.
pub fn aux_gamma_flow(gamma: Vec3, z2: Vec3, p_eps: Vec3, g: &ControllerGains) -> AuxFlow {
    let num = g.g_gamma * z2.norm_squared() * p_eps.norm_squared() + g.g_c;
    AuxFlow {
        gain: g.g_1 + num / (gamma.norm_squared() + g.eps_aux),
        drive: z2 * (g.g_2 * p_eps.norm()),
    }
}

pub fn aux_gamma_deriv(gamma: Vec3, z2: Vec3, p_eps: Vec3, g: &ControllerGains) -> Vec3 {
    aux_gamma_flow(gamma, z2, p_eps, g).deriv(gamma)
}

/// Computable coupling `Ω_e = J₀ω_e×C_eω_d − J₀C_eω̇_d − ω_s×J₀ω_s`.
pub fn omega_e_coupling(
    j0: &Mat3,
    omega_e: Vec3,
    omega_s: Vec3,
    c_e: &Mat3,
    omega_d: Vec3,
    omega_d_dot: Vec3,
) -> Vec3 {
    j0.mul_vec(omega_e.cross(c_e.mul_vec(omega_d)))
        - j0.mul_vec(c_e.mul_vec(omega_d_dot))
        - skew(omega_s).mul_vec(j0.mul_vec(omega_s))
}

/// Terms entering the command torque.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorqueTerms<'a> {
    pub w: &'a Mat3x9,
    pub theta_hat: &'a [f64; 9],
    pub omega_e_coupling: Vec3,
    pub omega_v_dot: Vec3,
    pub z2: Vec3,
    pub delta: Vec3,
    pub gamma_eps: Vec3,
}

/// `u_c = −WΘ̂ + J₀ω̇_v − Ω_e + K_δδ − K₂J₀z₂ + K_γγ_ε`.
pub fn control_law_uc(terms: &TorqueTerms<'_>, gains: &ControllerGains, j0: &Mat3) -> Vec3 {
    -terms.w.mul_vec(terms.theta_hat) + j0.mul_vec(terms.omega_v_dot) - terms.omega_e_coupling
        + terms.delta * gains.k_delta
        - j0.mul_vec(terms.z2) * gains.k_2
        + terms.gamma_eps * gains.k_gamma
}

/// Convex evaluation function `f(L) = (‖L‖² − L_m²)/(2σL_m + σ²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelFn {
    pub l_m: f64,
    pub sigma: f64,
}

impl LevelFn {
    fn den(&self) -> f64 {
        2.0 * self.sigma * self.l_m + self.sigma * self.sigma
    }

    pub fn value<const N: usize>(&self, l: &[f64; N]) -> f64 {
        let n2: f64 = l.iter().map(|x| x * x).sum();
        (n2 - self.l_m * self.l_m) / self.den()
    }

    pub fn gradient<const N: usize>(&self, l: &[f64; N]) -> [f64; N] {
        let k = 2.0 / self.den();
        l.map(|x| k * x)
    }

    /// Norm at which `f = 1`.
    pub fn outer_radius(&self) -> f64 {
        self.l_m + self.sigma
    }

    /// `Proj(L, Y, f)`.
    pub fn project<const N: usize>(&self, l: &[f64; N], y: [f64; N]) -> [f64; N] {
        proj(y, self.value(l), self.gradient(l))
    }

    /// Radially pulls `l` back onto `f ≤ 1`.
    pub fn restrict<const N: usize>(&self, l: [f64; N]) -> [f64; N] {
        let n = l.iter().map(|x| x * x).sum::<f64>().sqrt();
        let r = self.outer_radius();
        if n > r {
            l.map(|x| x * (r / n))
        } else {
            l
        }
    }
}

/// Projection operator: removes the outward component of `y` scaled by `f`
/// when `f > 0` and `∇fᵀy > 0`; otherwise returns `y`.
pub fn proj<const N: usize>(y: [f64; N], f: f64, grad: [f64; N]) -> [f64; N] {
    let gy: f64 = grad.iter().zip(&y).map(|(a, b)| a * b).sum();
    let gg: f64 = grad.iter().map(|a| a * a).sum();
    if f > 0.0 && gy > 0.0 && gg > 0.0 {
        let k = f * gy / gg;
        let mut out = y;
        for i in 0..N {
            out[i] -= k * grad[i];
        }
        out
    } else {
        y
    }
}

/// `Θ̂̇ = Proj(Θ̂, ζWᵀz₂, f_Θ)`.
pub fn adapt_theta_deriv(
    theta_hat: &[f64; 9],
    zeta: f64,
    w: &Mat3x9,
    z2: Vec3,
    level: &LevelFn,
) -> [f64; 9] {
    let drive = w.transpose_mul(z2).map(|x| zeta * x);
    level.project(theta_hat, drive)
}

/// Adaptive-gain rate and its projection factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZetaRate {
    pub zeta_dot: f64,
    pub mu: f64,
    pub f_zeta: f64,
    /// `𝒵 = 2(ζ − K_ζχζ²)`
    pub drive: f64,
}

/// `ζ̇ = λ_ζ μ 𝒵` with `μ = 1 − f_ζ` on the projection branch, else 1.
pub fn adapt_zeta_deriv(zeta: f64, chi: f64, g: &ControllerGains) -> ZetaRate {
    let level = LevelFn {
        l_m: g.zeta_max,
        sigma: g.sigma_zeta,
    };
    let drive = 2.0 * (zeta - g.k_zeta * chi * zeta * zeta);
    let f = level.value(&[zeta]);
    let grad = level.gradient(&[zeta])[0];
    let mu = if f > 0.0 && grad * drive > 0.0 {
        1.0 - f
    } else {
        1.0
    };
    ZetaRate {
        zeta_dot: g.lambda_zeta * mu * drive,
        mu,
        f_zeta: f,
        drive,
    }
}

/// `‖W‖²/(1 + ‖W‖²)`, the fixed point of the damping state.
pub fn chi_target(w: &Mat3x9) -> f64 {
    let n2 = w.spectral_norm().powi(2);
    n2 / (1.0 + n2)
}

/// `χ̇ = −λ_χ χ + λ_χ ‖W‖²/(1 + ‖W‖²)`.
pub fn adapt_chi_deriv(chi: f64, w: &Mat3x9, lambda_chi: f64) -> f64 {
    -lambda_chi * chi + lambda_chi * chi_target(w)
}

/// One named positivity condition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GainCondition {
    pub name: &'static str,
    pub value: f64,
    pub pass: bool,
}

/// Stability-condition evaluation for a gain set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GainReport {
    pub lambda_j0_min: f64,
    pub conditions: Vec<GainCondition>,
    pub p_c: f64,
    pub g_c: f64,
    pub l_rho: f64,
}

impl GainReport {
    pub fn all_pass(&self) -> bool {
        self.conditions.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> Vec<&'static str> {
        self.conditions
            .iter()
            .filter(|c| !c.pass)
            .map(|c| c.name)
            .collect()
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.conditions
            .iter()
            .find(|c| c.name == name)
            .map(|c| c.value)
    }
}

/// Evaluates the closed-loop positivity conditions for a gain set.
pub fn validate_gains(
    g: &ControllerGains,
    j0: &Mat3,
    bvg: &BvgParams,
    m: &ModificationParams,
) -> Result<GainReport, GainError> {
    let lam = j0.symmetric_eigenvalues()[0];
    if !(lam > 0.0) {
        return Err(GainError::InvalidInertia(lam));
    }
    let list = [
        (
            "G_2",
            2.0 * g.k_2 - (g.a_1 * g.k_delta + g.a_2 * g.k_gamma + g.a_3) / lam,
        ),
        ("G_xi", 2.0 * g.p_1 - 2.0 * g.p_2 - g.k_xi),
        ("G_varsigma", g.p_xi - (g.p_2 + m.c_v) / 2.0),
        ("G_w", g.p_xi - (g.p_2 + 1.0) / 2.0),
        ("G_delta", 2.0 * g.n_1 - g.n_2 - g.k_delta / g.a_1),
        ("G_gamma", 2.0 * g.g_1 - g.g_2 - g.k_gamma / g.a_2),
        ("G_P", g.g_gamma - g.g_2 / 2.0 - 1.0 / (2.0 * g.b_1)),
        ("G_u", g.n_delta - g.n_2 / 2.0 - 1.0 / (2.0 * g.a_3)),
        ("C_dC_f-K_xi/2", bvg.c_d * bvg.c_f - g.k_xi / 2.0),
    ];
    let mut conditions: Vec<GainCondition> = list
        .iter()
        .map(|&(name, value)| GainCondition {
            name,
            value,
            pass: value > 0.0,
        })
        .collect();
    let positives = [
        ("k_B", g.k_b),
        ("K_q", g.k_q),
        ("K_xi", g.k_xi),
        ("K_2", g.k_2),
        ("K_delta", g.k_delta),
        ("K_gamma", g.k_gamma),
        ("K_zeta", g.k_zeta),
        ("lambda_zeta", g.lambda_zeta),
        ("lambda_chi", g.lambda_chi),
        ("zeta_0", g.zeta_0),
        ("p_c", g.p_c),
        ("g_c", g.g_c),
    ];
    conditions.extend(positives.iter().map(|&(name, value)| GainCondition {
        name,
        value,
        pass: value > 0.0,
    }));
    Ok(GainReport {
        lambda_j0_min: lam,
        conditions,
        p_c: g.p_c,
        g_c: g.g_c,
        l_rho: l_rho(m.c_v, m.sigma_rho),
    })
}

/// Controller-side signals at a sampling instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlOutputs {
    pub q_ev: Vec3,
    pub q_e0: f64,
    pub omega_e: Vec3,
    pub v: Vec3,
    pub u_c: Vec3,
    pub tau: Vec3,
    pub delta_u: Vec3,
    pub p_eps: Vec3,
    pub eps: Vec3,
    pub z2: Vec3,
    pub varpi: Vec3,
    pub omega_v_dot: Vec3,
    pub envelope: [EnvelopeSignals; 3],
    pub f_theta: f64,
    pub f_zeta: f64,
    pub mu: f64,
    pub w_norm: f64,
}

/// State rates at a sampling instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerDerivs {
    pub omega_v: Vec3,
    pub delta_rho: [f64; 3],
    pub xi: Vec3,
    pub delta: Vec3,
    pub gamma_eps: Vec3,
    pub theta_hat: [f64; 9],
    pub zeta: f64,
    pub chi: f64,
}

/// Quantities held over the control period by [`ControllerState::advance`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeldInputs {
    pub v: Vec3,
    /// Δρ after restriction to the admissible set of the current bound.
    pub delta_rho: [f64; 3],
    pub excitation: [f64; 3],
    pub rho_max: [f64; 3],
    pub rho_max_dot: [f64; 3],
    pub xi_flow: AuxFlow,
    pub delta_flow: AuxFlow,
    pub gamma_flow: AuxFlow,
    pub mu: f64,
    pub chi_target: f64,
    pub varpi: Vec3,
    /// Axes whose Δρ had to be pulled back onto the moving bound.
    pub rho_resets: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlStep {
    pub outputs: ControlOutputs,
    pub derivs: ControllerDerivs,
    pub held: HeldInputs,
}

/// Evaluates the full control law at one sampling instant.
pub fn controller_step(
    meas: &Measurements,
    state: &ControllerState,
    cfg: &ControllerConfig,
) -> Result<ControlStep, ControllerFault> {
    let t = meas.t;
    let g = &cfg.gains;
    let m = &cfg.modification;

    // (1) error attitude and kinematics
    let err = error_attitude(meas.q_s, meas.q_d, meas.omega_s, meas.omega_d);
    let q_ev = err.q_e.v;
    let gamma_e = gamma_jacobian(err.q_e);
    let q_ev_dot = gamma_e.mul_vec(err.omega_e);

    // (2)-(4) envelope: nominal function, detection, modification
    let mut env = [EnvelopeSignals::default(); 3];
    let mut held_rho = [0.0; 3];
    let mut exc = [0.0; 3];
    let mut rmax = [0.0; 3];
    let mut rmax_dot = [0.0; 3];
    let mut resets = 0;
    let mut rho = [0.0; 3];
    let mut rho_dot = [0.0; 3];
    for i in 0..3 {
        let (rho_n, rho_n_dot) = nominal_pf(t, &cfg.perf[i]);
        let (rm, _) = envelope::rho_max(q_ev[i], rho_n, m.sigma_rho, m.sigma_s);
        let rm_dot = rho_max_rate(q_ev[i], q_ev_dot[i], rho_n, rho_n_dot, m);
        let limit = admissible_limit(rm, m.sigma);
        let mut dr = state.delta_rho[i].max(0.0);
        if dr > limit {
            dr = limit;
            resets += 1;
        }
        let j = judgment(q_ev[i], q_ev_dot[i], rho_n, rho_n_dot, cfg.detection.alpha);
        let s = indicator(j.beta, &cfg.detection);
        let e = excitation(s, state.varpi_prev[i], m.f_v);
        let r = modification_deriv(dr, e, rm, rm_dot, m);
        rho[i] = rho_n + dr;
        rho_dot[i] = rho_n_dot + r.rate;
        env[i] = EnvelopeSignals {
            rho_n,
            rho_n_dot,
            delta_rho: dr,
            delta_rho_dot: r.rate,
            rho: rho[i],
            rho_dot: rho_dot[i],
            d: j.d,
            d_dot: j.d_dot,
            beta: j.beta,
            s,
            rho_max: rm,
            rho_max_dot: rm_dot,
            f: r.eval.f,
            g: r.g,
            w: r.w,
            excitation: e,
        };
        held_rho[i] = dr;
        exc[i] = e;
        rmax[i] = rm;
        rmax_dot[i] = rm_dot;
    }

    // (5) error transformation
    let tr = transform_error(q_ev, rho, rho_dot, g.k_b, t)?;

    // (6)-(8) velocity generator
    let v = virtual_input_v(&tr, &gamma_e, q_ev, state.omega_v, state.xi, g, &cfg.bvg);
    if !v.is_finite() {
        return Err(ControllerFault::NonFinite { t });
    }
    if v.norm() > g.v_ceiling {
        return Err(ControllerFault::InputDiverged { norm: v.norm(), t });
    }
    let varpi = state.omega_v - v * (1.0 / cfg.bvg.c_d);
    let omega_v_dot = bvg_deriv(state.omega_v, v, &cfg.bvg);
    let omega_v_ff = if cfg.sample_time > 0.0 {
        (bvg::advance(state.omega_v, v, &cfg.bvg, cfg.sample_time) - state.omega_v)
            * (1.0 / cfg.sample_time)
    } else {
        omega_v_dot
    };

    // (9) regressor and computable coupling
    let w = build_regressor_w(
        err.omega_e,
        meas.omega_s,
        &err.c_e,
        meas.omega_d,
        meas.omega_d_dot,
    );
    let coupling = omega_e_coupling(
        &cfg.j0,
        err.omega_e,
        meas.omega_s,
        &err.c_e,
        meas.omega_d,
        meas.omega_d_dot,
    );
    let z2 = err.omega_e - state.omega_v;

    // (10)-(11) command torque and saturation
    let terms = TorqueTerms {
        w: &w,
        theta_hat: &state.theta_hat,
        omega_e_coupling: coupling,
        omega_v_dot: omega_v_ff,
        z2,
        delta: state.delta,
        gamma_eps: state.gamma_eps,
    };
    let u_c = match cfg.variant {
        Variant::Nominal { d_m, phi, k_s } => {
            let theta_j = meas.true_delta_j.unwrap_or_default();
            let wj = regressor_wj(
                err.omega_e,
                meas.omega_s,
                &err.c_e,
                meas.omega_d,
                meas.omega_d_dot,
            );
            let zero = [0.0; 9];
            let base = control_law_uc(
                &TorqueTerms {
                    theta_hat: &zero,
                    ..terms
                },
                g,
                &cfg.j0,
            );
            base - wj.mul_vech(&theta_j) - z2.map(|z| k_s * d_m * (z / phi).tanh())
        }
        _ => control_law_uc(&terms, g, &cfg.j0),
    };
    if !u_c.is_finite() {
        return Err(ControllerFault::NonFinite { t });
    }
    let (tau, delta_u) = saturate(u_c, cfg.u_max);

    // (12) auxiliary and adaptive rates
    let p_eps = coupling_p_eps(&gamma_e, &tr, q_ev, g.k_q);
    let varsigma = Vec3::from_array(exc);
    let w_comp = Vec3::new(env[0].w, env[1].w, env[2].w);
    let xi_flow = aux_xi_flow(state.xi, varsigma, w_comp, g);
    let delta_flow = aux_delta_flow(state.delta, delta_u, g);
    let gamma_flow = aux_gamma_flow(state.gamma_eps, z2, p_eps, g);

    let theta_level = LevelFn {
        l_m: g.theta_lm,
        sigma: g.sigma_theta,
    };
    let zeta_rate = adapt_zeta_deriv(state.zeta, state.chi, g);
    let (theta_dot, zeta_dot, mu) = match cfg.variant {
        Variant::Acpc => (
            adapt_theta_deriv(&state.theta_hat, state.zeta, &w, z2, &theta_level),
            zeta_rate.zeta_dot,
            zeta_rate.mu,
        ),
        Variant::ConstantGain { .. } => (
            adapt_theta_deriv(&state.theta_hat, state.zeta, &w, z2, &theta_level),
            0.0,
            0.0,
        ),
        Variant::Nominal { .. } => ([0.0; 9], 0.0, 0.0),
    };
    let chi_t = chi_target(&w);

    let outputs = ControlOutputs {
        q_ev,
        q_e0: err.q_e.s,
        omega_e: err.omega_e,
        v,
        u_c,
        tau,
        delta_u,
        p_eps,
        eps: tr.eps,
        z2,
        varpi,
        omega_v_dot,
        envelope: env,
        f_theta: theta_level.value(&state.theta_hat),
        f_zeta: zeta_rate.f_zeta,
        mu,
        w_norm: w.spectral_norm(),
    };
    let derivs = ControllerDerivs {
        omega_v: omega_v_dot,
        delta_rho: [
            env[0].delta_rho_dot,
            env[1].delta_rho_dot,
            env[2].delta_rho_dot,
        ],
        xi: xi_flow.deriv(state.xi),
        delta: delta_flow.deriv(state.delta),
        gamma_eps: gamma_flow.deriv(state.gamma_eps),
        theta_hat: theta_dot,
        zeta: zeta_dot,
        chi: g.lambda_chi * (chi_t - state.chi),
    };
    let held = HeldInputs {
        v,
        delta_rho: held_rho,
        excitation: exc,
        rho_max: rmax,
        rho_max_dot: rmax_dot,
        xi_flow,
        delta_flow,
        gamma_flow,
        mu,
        chi_target: chi_t,
        varpi,
        rho_resets: resets,
    };
    Ok(ControlStep {
        outputs,
        derivs,
        held,
    })
}

impl ControllerState {
    /// Propagates the internal states over one control period with the
    /// sampled inputs held. Each state uses a flow that preserves its
    /// invariant: exact Riccati flow for `ω_v`, sub-stepped projection flow
    /// for Δρ, exponential Euler for the auxiliaries, an exact flow of `1/ζ`
    /// and of `χ`, and a projected Euler step for `Θ̂`.
    pub fn advance(&self, step: &ControlStep, cfg: &ControllerConfig, dt: f64) -> ControllerState {
        let h = &step.held;
        let g = &cfg.gains;
        let mut next = *self;

        next.omega_v = bvg::advance(self.omega_v, h.v, &cfg.bvg, dt);
        for i in 0..3 {
            next.delta_rho[i] = envelope::advance_modification(
                h.delta_rho[i],
                h.excitation[i],
                h.rho_max[i],
                h.rho_max_dot[i],
                &cfg.modification,
                dt,
                cfg.modification_substeps,
            );
        }
        next.xi = h.xi_flow.advance(self.xi, dt);
        next.delta = h.delta_flow.advance(self.delta, dt);
        next.gamma_eps = h.gamma_flow.advance(self.gamma_eps, dt);

        let level = LevelFn {
            l_m: g.theta_lm,
            sigma: g.sigma_theta,
        };
        let mut theta = self.theta_hat;
        for (th, d) in theta.iter_mut().zip(step.derivs.theta_hat.iter()) {
            *th += dt * d;
        }
        next.theta_hat = level.restrict(theta);

        if let Variant::Acpc = cfg.variant {
            // 1/ζ relaxes towards K_ζ χ at rate 2 λ_ζ μ
            let y0 = 1.0 / self.zeta;
            let target = g.k_zeta * self.chi;
            let y = target + (y0 - target) * (-2.0 * g.lambda_zeta * h.mu * dt).exp();
            next.zeta = (1.0 / y).min(g.zeta_max + g.sigma_zeta);
        }
        next.chi = h.chi_target + (self.chi - h.chi_target) * (-g.lambda_chi * dt).exp();
        next.varpi_prev = h.varpi;
        next
    }
}

/// Level value of the modification for logging.
pub fn modification_level(delta_rho: f64, rho_max: f64, sigma: f64) -> f64 {
    eval_f_rho(delta_rho, rho_max, sigma).f
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn gains() -> ControllerGains {
        ControllerGains {
            k_b: 1.0,
            k_q: 1.0,
            k_xi: 1.0,
            k_2: 10.0,
            k_delta: 1.0,
            k_gamma: 1.0,
            k_zeta: 0.2,
            lambda_zeta: 0.2,
            lambda_chi: 0.01,
            p_1: 6.0,
            p_2: 1.0,
            p_xi: 6.0,
            p_c: l_rho(10.0, 0.1),
            n_1: 6.0,
            n_2: 1.0,
            n_delta: 2.0,
            g_1: 6.0,
            g_2: 1.0,
            g_gamma: 2.0,
            g_c: 0.5,
            a_1: 1.0,
            a_2: 1.0,
            a_3: 1.0,
            b_1: 1.0,
            zeta_0: 2.0,
            zeta_max: 30.0,
            sigma_zeta: 1.0,
            chi_0: 0.0,
            theta_lm: 2.0,
            sigma_theta: 0.5,
            eps_omega: 1e-8,
            eps_aux: 1e-9,
            v_ceiling: 1e6,
        }
    }

    fn bvg() -> BvgParams {
        BvgParams {
            c_d: 1.0,
            c_f: 4.0,
            b_omega: 0.0157,
            kappa_min: 1e-3,
        }
    }

    fn modp() -> ModificationParams {
        ModificationParams {
            c_rho: 0.2,
            c_v: 10.0,
            f_v: 8.0,
            sigma: 0.05,
            sigma_rho: 0.1,
            sigma_s: 0.1,
        }
    }

    fn arb_vec(r: f64) -> impl Strategy<Value = Vec3> {
        prop::array::uniform3(-r..r).prop_map(Vec3::from_array)
    }

    #[test]
    fn transform_cases() {
        let tr = transform_error(Vec3::ZERO, [0.5; 3], [-0.1; 3], 1.0, 0.0).unwrap();
        assert_eq!(tr.eps, Vec3::ZERO);
        assert_eq!(tr.g_eps, Mat3::identity());
        let q = Vec3::new(0.25, -0.1, 0.0);
        let tr = transform_error(q, [0.5, 0.2, 1.0], [0.0; 3], 2.0, 0.0).unwrap();
        assert_eq!(tr.eps.x, 0.5);
        assert!((tr.g_eps.m[0][0] - 2.0 / 0.75).abs() < 1e-15);
        assert!((tr.psi.mul_vec(q) - tr.eps).norm() < 1e-16);
        assert!(matches!(
            transform_error(Vec3::new(0.5, 0.0, 0.0), [0.5; 3], [0.0; 3], 1.0, 3.0),
            Err(ControllerFault::EnvelopeViolation { axis: 0, .. })
        ));
    }

    #[test]
    fn virtual_input_cases() {
        let g = gains();
        let b = bvg();
        let gam = gamma_jacobian(UnitQuaternion::identity());
        let tr = transform_error(Vec3::ZERO, [0.5; 3], [-0.1; 3], g.k_b, 0.0).unwrap();
        assert_eq!(
            virtual_input_v(&tr, &gam, Vec3::ZERO, Vec3::ZERO, Vec3::ZERO, &g, &b),
            Vec3::ZERO
        );
        // single-axis positive error drives ω_v negative
        let q = Vec3::new(0.1, 0.0, 0.0);
        let qe = UnitQuaternion::from_parts_unchecked(q, (1.0f64 - 0.01).sqrt());
        let gam = gamma_jacobian(qe);
        let tr = transform_error(q, [0.5; 3], [-0.1; 3], g.k_b, 0.0).unwrap();
        let v = virtual_input_v(&tr, &gam, q, Vec3::ZERO, Vec3::ZERO, &g, &b);
        assert!(v.x < 0.0 && v.y.abs() < 1e-15 && v.z.abs() < 1e-15);
        assert!(bvg_deriv(Vec3::ZERO, v, &b).x < 0.0);
    }

    #[test]
    fn coupling_cases() {
        let q = Vec3::ZERO;
        let gam = gamma_jacobian(UnitQuaternion::identity());
        let tr = transform_error(q, [0.5; 3], [0.0; 3], 1.0, 0.0).unwrap();
        assert_eq!(coupling_p_eps(&gam, &tr, q, 1.0), Vec3::ZERO);
        // linear in k_B when K_q = 0
        let q = Vec3::new(0.1, -0.05, 0.2);
        let qe = UnitQuaternion::from_parts_unchecked(q, (1.0 - q.norm_squared()).sqrt());
        let gam = gamma_jacobian(qe);
        let t1 = transform_error(q, [0.5; 3], [0.0; 3], 1.0, 0.0).unwrap();
        let t3 = transform_error(q, [0.5; 3], [0.0; 3], 3.0, 0.0).unwrap();
        let a = coupling_p_eps(&gam, &t1, q, 0.0);
        let b = coupling_p_eps(&gam, &t3, q, 0.0);
        assert!((a * 3.0 - b).norm() < 1e-15);
    }

    #[test]
    fn level_gradient_matches_finite_difference() {
        let lf = LevelFn {
            l_m: 2.0,
            sigma: 0.5,
        };
        let l = [0.3, -1.1, 0.7, 0.05, 1.4, -0.2, 0.9, -0.6, 0.1];
        let g = lf.gradient(&l);
        let h = 1e-6;
        for i in 0..9 {
            let (mut a, mut b) = (l, l);
            a[i] += h;
            b[i] -= h;
            let fd = (lf.value(&a) - lf.value(&b)) / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-8, "component {i}: {fd} vs {}", g[i]);
        }
        let mut at_lm = [0.0; 9];
        at_lm[4] = 2.0;
        assert!(lf.value(&at_lm).abs() < 1e-12);
        at_lm[4] = 2.5;
        assert!((lf.value(&at_lm) - 1.0).abs() < 1e-12);
    }

    fn unit9(raw: [f64; 9]) -> [f64; 9] {
        let n = raw.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
        raw.map(|x| x / n)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn level_set_gradient_points_outward(
            d0 in prop::array::uniform9(-1.0..1.0f64),
            d1 in prop::array::uniform9(-1.0..1.0f64),
            delta in 0.0..1.0f64,
            frac in 0.0..1.0f64,
        ) {
            // L0 on the δ-level set, L1 anywhere inside it
            let lf = LevelFn { l_m: 2.0, sigma: 0.5 };
            let r_delta = (lf.l_m * lf.l_m + delta * lf.den()).sqrt();
            let l0 = unit9(d0).map(|x| x * r_delta);
            let l1 = unit9(d1).map(|x| x * r_delta * frac);
            prop_assert!((lf.value(&l0) - delta).abs() < 1e-12);
            prop_assert!(lf.value(&l1) <= delta + 1e-12);
            let g = lf.gradient(&l0);
            let ip: f64 = (0..9).map(|i| g[i] * (l0[i] - l1[i])).sum();
            prop_assert!(ip >= -1e-9);
        }
    }

    proptest! {
        #[test]
        fn coupling_matches_bilinear_form(
            qv in arb_vec(0.5), rho in prop::array::uniform3(0.6..2.0f64), z2 in arb_vec(1.0), kq in 0.0..3.0f64
        ) {
            // z₂ coefficient of V̇₁: (εᵀG_εΨ + K_q q_evᵀ)Γ_e z₂ = z₂ᵀP_ε
            let qe = UnitQuaternion::from_parts_unchecked(qv, (1.0 - qv.norm_squared()).sqrt());
            let gam = gamma_jacobian(qe);
            let tr = transform_error(qv, rho, [0.0; 3], 1.3, 0.0).unwrap();
            let row = tr.psi.transpose().mul_vec(tr.g_eps.transpose().mul_vec(tr.eps)) + qv * kq;
            let lhs = row.dot(gam.mul_vec(z2));
            let rhs = z2.dot(coupling_p_eps(&gam, &tr, qv, kq));
            prop_assert!((lhs - rhs).abs() < 1e-12);
        }

        #[test]
        fn aux_states_decay_without_excitation(x in arb_vec(2.0)) {
            prop_assume!(x.norm() > 1e-6);
            let g = gains();
            let xi = aux_xi_deriv(x, Vec3::ZERO, Vec3::ZERO, &g);
            let de = aux_delta_deriv(x, Vec3::ZERO, &g);
            let ga = aux_gamma_deriv(x, Vec3::ZERO, Vec3::new(1.0, 0.0, 0.0), &g);
            prop_assert!(x.dot(xi) < 0.0 && x.dot(de) < 0.0 && x.dot(ga) < 0.0);
            for f in [
                aux_xi_flow(x, Vec3::ZERO, Vec3::ZERO, &g),
                aux_delta_flow(x, Vec3::ZERO, &g),
                aux_gamma_flow(x, Vec3::ZERO, Vec3::ZERO, &g),
            ] {
                prop_assert!(f.advance(x, 0.1).norm() < x.norm());
            }
        }

        #[test]
        fn projection_is_tangent_at_unit_level(dir in prop::array::uniform9(-1.0..1.0f64), y in prop::array::uniform9(-1.0..1.0f64)) {
            let n = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
            prop_assume!(n > 1e-3);
            let lv = LevelFn { l_m: 2.0, sigma: 0.5 };
            let l = dir.map(|x| x / n * lv.outer_radius());
            prop_assert!((lv.value(&l) - 1.0).abs() < 1e-12);
            let grad = lv.gradient(&l);
            let out = lv.project(&l, y);
            let gy: f64 = grad.iter().zip(&y).map(|(a, b)| a * b).sum();
            let go: f64 = grad.iter().zip(&out).map(|(a, b)| a * b).sum();
            if gy > 0.0 {
                prop_assert!(go.abs() < 1e-12);
            } else {
                prop_assert_eq!(out, y);
            }
        }
    }

    #[test]
    fn projection_branches() {
        let lv = LevelFn {
            l_m: 2.0,
            sigma: 0.5,
        };
        let inside = [0.5; 9];
        let y = [1.0; 9];
        assert!(lv.value(&inside) <= 0.0);
        assert_eq!(lv.project(&inside, y), y);
        let mut out = [0.0; 9];
        out[0] = 2.3;
        assert!(lv.value(&out) > 0.0);
        let inward = [-1.0, 0.3, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        assert_eq!(lv.project(&out, inward), inward);
    }

    #[test]
    fn theta_rate_cases() {
        let lv = LevelFn {
            l_m: 2.0,
            sigma: 0.5,
        };
        let w = build_regressor_w(
            Vec3::new(0.01, 0.0, 0.02),
            Vec3::new(0.01, 0.01, 0.0),
            &Mat3::identity(),
            Vec3::ZERO,
            Vec3::ZERO,
        );
        assert_eq!(
            adapt_theta_deriv(&[0.1; 9], 3.0, &w, Vec3::ZERO, &lv),
            [0.0; 9]
        );
        let z2 = Vec3::new(0.1, -0.2, 0.05);
        let interior = adapt_theta_deriv(&[0.1; 9], 3.0, &w, z2, &lv);
        assert_eq!(interior, w.transpose_mul(z2).map(|x| 3.0 * x));
        // at the outer level with outward drive the norm cannot grow
        let mut th = [0.0; 9];
        th[6] = lv.outer_radius();
        let rate = adapt_theta_deriv(&th, 3.0, &w, Vec3::new(1.0, 0.0, 0.0), &lv);
        let radial: f64 = th.iter().zip(&rate).map(|(a, b)| a * b).sum();
        assert!(radial.abs() < 1e-12);
    }

    #[test]
    fn zeta_rate_cases() {
        let g = gains();
        let r = adapt_zeta_deriv(5.0, 0.0, &g);
        assert_eq!(r.zeta_dot, 2.0 * g.lambda_zeta * 5.0);
        assert_eq!(r.mu, 1.0);
        let chi = 0.4;
        let r = adapt_zeta_deriv(1.0 / (g.k_zeta * chi), chi, &g);
        assert!(r.zeta_dot.abs() < 1e-12);
        let cap = g.zeta_max + g.sigma_zeta;
        let r = adapt_zeta_deriv(cap, 0.0, &g);
        assert!((r.f_zeta - 1.0).abs() < 1e-12);
        assert!(r.zeta_dot.abs() < 1e-12 && r.mu.abs() < 1e-12);
    }

    #[test]
    fn chi_rate_cases() {
        let w0 = Mat3x9::default();
        assert_eq!(adapt_chi_deriv(0.3, &w0, 0.01), -0.003);
        let w = build_regressor_w(
            Vec3::ZERO,
            Vec3::ZERO,
            &Mat3::identity(),
            Vec3::ZERO,
            Vec3::ZERO,
        );
        // ‖[0 | I]‖₂ = 1, so the fixed point is ½
        assert!((chi_target(&w) - 0.5).abs() < 1e-12);
        assert!(adapt_chi_deriv(0.5, &w, 0.01).abs() < 1e-12);
    }

    #[test]
    fn gamma_excitation_vanishes_with_z2() {
        let g = gains();
        let f = aux_gamma_flow(
            Vec3::ZERO,
            Vec3::new(1e-9, 0.0, 0.0),
            Vec3::new(1e6, 0.0, 0.0),
            &g,
        );
        assert!(f.drive.norm() <= 1e-3 + 1e-15);
        assert!((f.drive.norm() - g.g_2 * 1e-3).abs() < 1e-15);
        let f0 = aux_gamma_flow(Vec3::ZERO, Vec3::ZERO, Vec3::new(1e6, 0.0, 0.0), &g);
        assert_eq!(f0.drive, Vec3::ZERO);
    }

    #[test]
    fn xi_bounded_under_step_input() {
        // scalar bound ‖ξ‖ ≤ p₂‖Δς + w‖/p₁ holds for the regularised flow
        let g = ControllerGains {
            p_c: 0.0,
            ..gains()
        };
        let step = Vec3::new(0.8, 0.0, 0.0);
        let mut x = Vec3::ZERO;
        for _ in 0..2000 {
            x = aux_xi_flow(x, step, Vec3::ZERO, &g).advance(x, 0.01);
            assert!(x.norm() <= g.p_2 * step.norm() / g.p_1 + 1e-12);
        }
    }

    #[test]
    fn delta_bounded_under_saturation() {
        let g = gains();
        let du = Vec3::new(-0.02, 0.01, 0.0);
        let mut x = Vec3::ZERO;
        for _ in 0..2000 {
            x = aux_delta_flow(x, du, &g).advance(x, 0.1);
            assert!(x.norm() <= g.n_2 * du.norm() / g.n_1 + 1e-12);
        }
    }

    #[test]
    fn uc_cases() {
        let g = gains();
        let j0 = Mat3::diag(Vec3::splat(2.0));
        let w = Mat3x9::default();
        let th = [0.0; 9];
        let zero = TorqueTerms {
            w: &w,
            theta_hat: &th,
            omega_e_coupling: Vec3::ZERO,
            omega_v_dot: Vec3::ZERO,
            z2: Vec3::ZERO,
            delta: Vec3::ZERO,
            gamma_eps: Vec3::ZERO,
        };
        assert_eq!(control_law_uc(&zero, &g, &j0), Vec3::ZERO);
        let ws = Vec3::new(0.01, -0.02, 0.03);
        let c = omega_e_coupling(&j0, ws, ws, &Mat3::identity(), Vec3::ZERO, Vec3::ZERO);
        assert!((c + ws.cross(j0.mul_vec(ws))).norm() < 1e-18);
    }

    #[test]
    fn single_axis_closed_loop_decays() {
        // exact Θ̂, no saturation, δ = γ = 0: J₀ż₂ = −K₂J₀z₂ gives z₂(t) = z₂(0)e^{−K₂t}
        let g = gains();
        let j0 = Mat3::diag(Vec3::splat(2.0));
        let theta = [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.01, 0.0, 0.0];
        let w = build_regressor_w(
            Vec3::ZERO,
            Vec3::ZERO,
            &Mat3::identity(),
            Vec3::ZERO,
            Vec3::ZERO,
        );
        let mut z2 = Vec3::new(0.01, 0.0, 0.0);
        let h = 1e-4;
        for _ in 0..1000 {
            let u = control_law_uc(
                &TorqueTerms {
                    w: &w,
                    theta_hat: &theta,
                    omega_e_coupling: Vec3::ZERO,
                    omega_v_dot: Vec3::ZERO,
                    z2,
                    delta: Vec3::ZERO,
                    gamma_eps: Vec3::ZERO,
                },
                &g,
                &j0,
            );
            // J₀ż₂ = WΘ + u_c with ω_v held
            let z2_dot = j0.solve(w.mul_vec(&theta) + u).unwrap();
            z2 += z2_dot * h;
        }
        let expect = 0.01 * (-g.k_2 * 0.1f64).exp();
        assert!((z2.x - expect).abs() / expect < 1e-3);
    }

    #[test]
    fn default_gains_pass_validation() {
        let g = gains();
        let j0 = Mat3::diag(Vec3::splat(2.0));
        let r = validate_gains(&g, &j0, &bvg(), &modp()).unwrap();
        assert!(r.all_pass(), "{:?}", r.failures());
        assert!((r.l_rho - 19.965).abs() < 1e-12);
        assert!((r.get("G_2").unwrap() - 18.5).abs() < 1e-12);
        let bad = validate_gains(&ControllerGains { k_2: 0.0, ..g }, &j0, &bvg(), &modp()).unwrap();
        assert!(bad.failures().contains(&"G_2"));
        let bad = validate_gains(&ControllerGains { p_2: 6.0, ..g }, &j0, &bvg(), &modp()).unwrap();
        assert_eq!(bad.get("G_xi").unwrap(), -g.k_xi);
        assert!(matches!(
            validate_gains(&g, &Mat3::diag(Vec3::new(1.0, 0.0, 1.0)), &bvg(), &modp()),
            Err(GainError::InvalidInertia(_))
        ));
    }
}
