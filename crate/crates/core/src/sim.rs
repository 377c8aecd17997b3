//! Closed-loop fixed-step simulation, telemetry capture and run metrics.

use crate::attitude::Mat3;
use crate::attitude::{UnitQuaternion, Vec3};
use crate::bvg::BvgParams;
use crate::controller::{
    controller_step, validate_gains, ControlStep, ControllerConfig, ControllerFault,
    ControllerGains, ControllerState, GainError, GainReport, LevelFn, Measurements, Variant,
};
use crate::envelope::{DetectionParams, ModificationParams, PerfFnParams};
use crate::plant::{
    plant_deriv, DesiredMotion, DisturbanceModel, InertiaModel, InertiaVariation, PlantFault,
    PlantModel, PlantTruth, DEG,
};
use serde::Serialize;
use thiserror::Error;

/// Non-finite value produced inside an integrator stage.
#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("non-finite state at t = {t}")]
pub struct NonFiniteState {
    pub t: f64,
}

impl From<NonFiniteState> for PlantFault {
    fn from(e: NonFiniteState) -> Self {
        PlantFault::NonFinite { t: e.t }
    }
}

/// Classical four-stage Runge–Kutta step for `ẋ = f(t, x)`.
pub fn rk4_step<F, E>(x: &[f64], t: f64, dt: f64, mut f: F) -> Result<Vec<f64>, E>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<(), E>,
    E: From<NonFiniteState>,
{
    let n = x.len();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut y = vec![0.0; n];
    f(t, x, &mut k1)?;
    for i in 0..n {
        y[i] = x[i] + 0.5 * dt * k1[i];
    }
    f(t + 0.5 * dt, &y, &mut k2)?;
    for i in 0..n {
        y[i] = x[i] + 0.5 * dt * k2[i];
    }
    f(t + 0.5 * dt, &y, &mut k3)?;
    for i in 0..n {
        y[i] = x[i] + dt * k3[i];
    }
    f(t + dt, &y, &mut k4)?;
    for i in 0..n {
        y[i] = x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(NonFiniteState { t: t + dt }.into());
    }
    Ok(y)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    Tracking,
    Reorientation,
}

/// A complete simulation setup.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    /// Scalar-last `[x, y, z, w]`; normalised on use.
    pub q_s0: [f64; 4],
    pub q_d0: [f64; 4],
    pub omega_s0: Vec3,
    pub desired: DesiredMotion,
    pub j0: Mat3,
    pub inertia_variation: InertiaVariation,
    pub disturbance: DisturbanceModel,
    pub omega_max: f64,
    pub u_max: f64,
    pub perf: PerfFnParams,
    pub detection: DetectionParams,
    pub modification: ModificationParams,
    pub c_d: f64,
    pub c_f: f64,
    pub kappa_min: f64,
    /// Explicit velocity-generator bound; derived from `omega_max` when absent.
    pub b_omega: Option<f64>,
    pub b_omega_margin: f64,
    pub gains: ControllerGains,
    pub variant: Variant,
    pub dt: f64,
    pub t_end: f64,
    pub plant_substeps: usize,
    pub modification_substeps: usize,
    pub steady_window: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("invalid value for `{key}`: {reason}")]
    Invalid { key: &'static str, reason: String },
    #[error(transparent)]
    Gain(#[from] GainError),
    #[error("gain conditions not satisfied: {}", .0.join(", "))]
    GainConditions(Vec<&'static str>),
}

/// Default controller gains.
pub fn default_gains() -> ControllerGains {
    ControllerGains {
        k_b: 1e-3,
        k_q: 1.5,
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
        p_c: crate::controller::l_rho(10.0, 0.1),
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

impl ScenarioConfig {
    /// Tracking a slowly rotating target under a 1.5°/s rate limit.
    pub fn fundamental() -> Self {
        Self {
            kind: ScenarioKind::Tracking,
            q_s0: [-0.432, 0.34, -0.696, -0.459],
            q_d0: [0.0, 0.0, 0.0, 1.0],
            omega_s0: Vec3::ZERO,
            desired: DesiredMotion::Tracking {
                amplitude: 0.5 * DEG,
                c: [80.0, 150.0, 100.0],
            },
            j0: Mat3::diag(Vec3::splat(2.0)),
            inertia_variation: InertiaVariation::Sinusoidal,
            disturbance: DisturbanceModel::MultiTone {
                omega_p: 0.01,
                scale: 1.0,
            },
            omega_max: 0.0262,
            u_max: 0.05,
            perf: PerfFnParams {
                rho_0: 1.0,
                rho_inf: 5e-3,
                gamma: 0.08,
            },
            detection: DetectionParams::from_epsilon(1.0, 1e-3),
            modification: ModificationParams {
                c_rho: 0.2,
                c_v: 10.0,
                f_v: 8.0,
                sigma: 0.05,
                sigma_rho: 0.1,
                sigma_s: 0.1,
            },
            c_d: 1.0,
            c_f: 4.0,
            kappa_min: 1e-3,
            b_omega: None,
            b_omega_margin: 0.9,
            gains: default_gains(),
            variant: Variant::Acpc,
            dt: 0.1,
            t_end: 200.0,
            plant_substeps: 1,
            modification_substeps: 10,
            steady_window: 20.0,
        }
    }

    /// Rest-to-rest slew with the given rate limit.
    pub fn reorientation(omega_max: f64) -> Self {
        Self {
            kind: ScenarioKind::Reorientation,
            q_s0: [0.552, -0.627, 0.200, -0.510],
            desired: DesiredMotion::Rest,
            omega_max,
            ..Self::fundamental()
        }
    }

    /// `B_ω`, explicit or `margin·(Ω_max − max_t ‖ω_d‖)`. The norm is used
    /// because `C_e` can rotate the whole of `ω_d` onto a single body axis.
    pub fn b_omega(&self) -> f64 {
        self.b_omega.unwrap_or_else(|| {
            self.b_omega_margin * (self.omega_max - self.desired.max_norm(self.t_end))
        })
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }

    pub fn bvg_params(&self) -> BvgParams {
        BvgParams {
            c_d: self.c_d,
            c_f: self.c_f,
            b_omega: self.b_omega(),
            kappa_min: self.kappa_min,
        }
    }

    pub fn controller_config(&self) -> ControllerConfig {
        ControllerConfig {
            perf: [self.perf; 3],
            detection: self.detection,
            modification: self.modification,
            bvg: self.bvg_params(),
            gains: self.gains,
            j0: self.j0,
            u_max: self.u_max,
            variant: self.variant,
            modification_substeps: self.modification_substeps,
            sample_time: self.dt,
        }
    }

    pub fn plant_model(&self) -> PlantModel {
        PlantModel {
            inertia: InertiaModel {
                j0: self.j0,
                variation: self.inertia_variation,
            },
            disturbance: self.disturbance,
            desired: self.desired,
        }
    }

    pub fn gain_report(&self) -> Result<GainReport, GainError> {
        validate_gains(
            &self.gains,
            &self.j0,
            &self.bvg_params(),
            &self.modification,
        )
    }

    /// Structural checks plus the gain conditions.
    pub fn validate(&self) -> Result<GainReport, ScenarioError> {
        let bad = |key: &'static str, reason: &str| {
            Err(ScenarioError::Invalid {
                key,
                reason: reason.to_string(),
            })
        };
        if !(self.dt > 0.0) {
            return bad("sim.dt", "must be positive");
        }
        if !(self.t_end > self.dt) {
            return bad("sim.t_end", "must exceed sim.dt");
        }
        if self.plant_substeps == 0 {
            return bad("sim.plant_substeps", "must be at least 1");
        }
        if self.modification_substeps == 0 {
            return bad("sim.modification_substeps", "must be at least 1");
        }
        if !self.perf.is_valid() {
            return bad("envelope.rho_0", "need rho_0 > rho_inf > 0 and gamma > 0");
        }
        if !self.detection.is_valid() {
            return bad(
                "envelope.epsilon",
                "indicator thresholds must be increasing",
            );
        }
        let m = &self.modification;
        if [m.c_rho, m.c_v, m.f_v, m.sigma, m.sigma_rho, m.sigma_s]
            .iter()
            .any(|v| !(*v > 0.0))
        {
            return bad("envelope.sigma", "modification parameters must be positive");
        }
        if !(self.u_max > 0.0) {
            return bad("plant.U_max", "must be positive");
        }
        if !(self.b_omega() > 0.0) {
            return bad("controller.B_omega", "velocity bound must be positive");
        }
        if !(self.kappa_min > 0.0 && self.kappa_min < 1.0) {
            return bad("controller.kappa_min", "must lie in (0, 1)");
        }
        if let Variant::ConstantGain { zeta } = self.variant {
            if !(zeta > 0.0) {
                return bad("controller.zeta_const", "must be positive");
            }
        }
        let report = self.gain_report()?;
        if !report.all_pass() {
            return Err(ScenarioError::GainConditions(report.failures()));
        }
        Ok(report)
    }
}

/// Column names of [`TelemetryRow`] in serialisation order.
pub fn telemetry_header() -> Vec<String> {
    let mut h = vec!["t".to_string()];
    let vec3 = |h: &mut Vec<String>, name: &str| {
        for i in 1..=3 {
            h.push(format!("{name}_{i}"));
        }
    };
    for name in [
        "q_ev",
        "rho_n",
        "delta_rho",
        "rho",
        "rho_max",
        "omega_s",
        "omega_v",
        "omega_e",
        "z2",
        "v",
        "u_c",
        "tau",
        "delta_u",
        "beta",
        "s",
        "xi",
        "delta",
        "gamma_eps",
    ] {
        vec3(&mut h, name);
    }
    for i in 1..=9 {
        h.push(format!("theta_hat_{i}"));
    }
    for name in [
        "zeta",
        "chi",
        "mu",
        "f_theta",
        "f_zeta",
        "envelope_ok",
        "velocity_ok",
        "torque_ok",
    ] {
        h.push(name.to_string());
    }
    h
}

/// One logged sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TelemetryRow {
    pub t: f64,
    pub q_ev: [f64; 3],
    pub rho_n: [f64; 3],
    pub delta_rho: [f64; 3],
    pub rho: [f64; 3],
    pub rho_max: [f64; 3],
    pub omega_s: [f64; 3],
    pub omega_v: [f64; 3],
    pub omega_e: [f64; 3],
    pub z2: [f64; 3],
    pub v: [f64; 3],
    pub u_c: [f64; 3],
    pub tau: [f64; 3],
    pub delta_u: [f64; 3],
    pub beta: [f64; 3],
    pub s: [f64; 3],
    pub xi: [f64; 3],
    pub delta: [f64; 3],
    pub gamma_eps: [f64; 3],
    pub theta_hat: [f64; 9],
    pub zeta: f64,
    pub chi: f64,
    pub mu: f64,
    pub f_theta: f64,
    pub f_zeta: f64,
    pub envelope_ok: bool,
    pub velocity_ok: bool,
    pub torque_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RowParseError {
    #[error("expected {expected} fields, found {found}")]
    Width { expected: usize, found: usize },
    #[error("column `{column}`: cannot parse `{value}`")]
    Value { column: String, value: String },
}

impl TelemetryRow {
    fn float_groups(&self) -> Vec<&[f64]> {
        vec![
            &self.q_ev,
            &self.rho_n,
            &self.delta_rho,
            &self.rho,
            &self.rho_max,
            &self.omega_s,
            &self.omega_v,
            &self.omega_e,
            &self.z2,
            &self.v,
            &self.u_c,
            &self.tau,
            &self.delta_u,
            &self.beta,
            &self.s,
            &self.xi,
            &self.delta,
            &self.gamma_eps,
            &self.theta_hat,
        ]
    }

    /// Fields as strings; floats in shortest round-trip form, flags as 0/1.
    pub fn to_record(&self) -> Vec<String> {
        let mut r = vec![format!("{:?}", self.t)];
        for g in self.float_groups() {
            r.extend(g.iter().map(|v| format!("{v:?}")));
        }
        for v in [self.zeta, self.chi, self.mu, self.f_theta, self.f_zeta] {
            r.push(format!("{v:?}"));
        }
        for f in [self.envelope_ok, self.velocity_ok, self.torque_ok] {
            r.push(if f { "1" } else { "0" }.to_string());
        }
        r
    }

    pub fn from_record<S: AsRef<str>>(rec: &[S]) -> Result<Self, RowParseError> {
        let header = telemetry_header();
        if rec.len() != header.len() {
            return Err(RowParseError::Width {
                expected: header.len(),
                found: rec.len(),
            });
        }
        let vals: Vec<f64> = rec
            .iter()
            .zip(&header)
            .map(|(s, c)| {
                s.as_ref()
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| RowParseError::Value {
                        column: c.clone(),
                        value: s.as_ref().to_string(),
                    })
            })
            .collect::<Result<_, _>>()?;
        let mut k = 1;
        let mut take3 = || {
            let a = [vals[k], vals[k + 1], vals[k + 2]];
            k += 3;
            a
        };
        let mut row = TelemetryRow {
            t: vals[0],
            q_ev: take3(),
            rho_n: take3(),
            delta_rho: take3(),
            rho: take3(),
            rho_max: take3(),
            omega_s: take3(),
            omega_v: take3(),
            omega_e: take3(),
            z2: take3(),
            v: take3(),
            u_c: take3(),
            tau: take3(),
            delta_u: take3(),
            beta: take3(),
            s: take3(),
            xi: take3(),
            delta: take3(),
            gamma_eps: take3(),
            theta_hat: [0.0; 9],
            zeta: 0.0,
            chi: 0.0,
            mu: 0.0,
            f_theta: 0.0,
            f_zeta: 0.0,
            envelope_ok: false,
            velocity_ok: false,
            torque_ok: false,
        };
        let k0 = 1 + 18 * 3;
        row.theta_hat.copy_from_slice(&vals[k0..k0 + 9]);
        let k1 = k0 + 9;
        row.zeta = vals[k1];
        row.chi = vals[k1 + 1];
        row.mu = vals[k1 + 2];
        row.f_theta = vals[k1 + 3];
        row.f_zeta = vals[k1 + 4];
        row.envelope_ok = vals[k1 + 5] != 0.0;
        row.velocity_ok = vals[k1 + 6] != 0.0;
        row.torque_ok = vals[k1 + 7] != 0.0;
        Ok(row)
    }
}

/// Thresholds used by [`compute_metrics`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricLimits {
    pub omega_max: f64,
    pub u_max: f64,
    pub b_omega: f64,
    pub zeta_min: f64,
    pub zeta_cap: f64,
    pub sigma: f64,
    pub steady_window: f64,
    /// Threshold on ‖z₂‖ that starts the overshoot window.
    pub z2_entry: f64,
}

impl MetricLimits {
    pub fn from_config(cfg: &ScenarioConfig) -> Self {
        let g = &cfg.gains;
        let (zeta_min, zeta_cap) = match cfg.variant {
            Variant::Acpc => (1.0 / (1.0 / g.zeta_0 + g.k_zeta), g.zeta_max + g.sigma_zeta),
            Variant::ConstantGain { zeta } => (zeta, zeta),
            Variant::Nominal { .. } => (g.zeta_0, g.zeta_0),
        };
        Self {
            omega_max: cfg.omega_max,
            u_max: cfg.u_max,
            b_omega: cfg.b_omega(),
            zeta_min,
            zeta_cap,
            sigma: cfg.modification.sigma,
            steady_window: cfg.steady_window,
            z2_entry: 1e-3,
        }
    }
}

/// End-of-run summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics {
    pub rows: usize,
    pub t_final: f64,
    pub max_omega_s: f64,
    pub max_tau: f64,
    pub steady_state_accuracy: f64,
    pub final_accuracy: f64,
    pub envelope_violations: usize,
    pub velocity_violations: usize,
    pub torque_violations: usize,
    pub bvg_violations: usize,
    pub peak_delta_rho: [f64; 3],
    pub first_modification_time: Option<f64>,
    pub final_delta_rho: [f64; 3],
    pub delta_rho_settled: bool,
    pub delta_rho_bound_violations: usize,
    pub z2_entry_time: Option<f64>,
    pub z2_overshoot: f64,
    pub chi_violations: usize,
    pub zeta_violations: usize,
    pub mu_violations: usize,
    pub theta_level_violations: usize,
    pub zeta_range: [f64; 2],
}

/// Aggregates a telemetry trace.
pub fn compute_metrics(rows: &[TelemetryRow], lim: &MetricLimits) -> Metrics {
    let last = rows.last().map(|r| r.t).unwrap_or(0.0);
    let amax = |a: &[f64]| a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let norm = |a: &[f64; 3]| (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
    let mut m = Metrics {
        rows: rows.len(),
        t_final: last,
        max_omega_s: 0.0,
        max_tau: 0.0,
        steady_state_accuracy: 0.0,
        final_accuracy: rows.last().map(|r| amax(&r.q_ev)).unwrap_or(0.0),
        envelope_violations: 0,
        velocity_violations: 0,
        torque_violations: 0,
        bvg_violations: 0,
        peak_delta_rho: [0.0; 3],
        first_modification_time: None,
        final_delta_rho: rows.last().map(|r| r.delta_rho).unwrap_or([0.0; 3]),
        delta_rho_settled: false,
        delta_rho_bound_violations: 0,
        z2_entry_time: None,
        z2_overshoot: 0.0,
        chi_violations: 0,
        zeta_violations: 0,
        mu_violations: 0,
        theta_level_violations: 0,
        zeta_range: [f64::INFINITY, f64::NEG_INFINITY],
    };
    for r in rows {
        m.max_omega_s = m.max_omega_s.max(amax(&r.omega_s));
        m.max_tau = m.max_tau.max(amax(&r.tau));
        if r.t >= last - lim.steady_window - 1e-9 {
            m.steady_state_accuracy = m.steady_state_accuracy.max(amax(&r.q_ev));
        }
        if !r.envelope_ok {
            m.envelope_violations += 1;
        }
        if amax(&r.omega_s) > lim.omega_max {
            m.velocity_violations += 1;
        }
        if amax(&r.tau) > lim.u_max {
            m.torque_violations += 1;
        }
        if amax(&r.omega_v) >= lim.b_omega {
            m.bvg_violations += 1;
        }
        for i in 0..3 {
            m.peak_delta_rho[i] = m.peak_delta_rho[i].max(r.delta_rho[i]);
            let bound = r.rho_max[i] + lim.sigma + 1e-6;
            if r.delta_rho[i] > bound {
                m.delta_rho_bound_violations += 1;
            }
        }
        if m.first_modification_time.is_none() && r.delta_rho.iter().any(|d| *d > 0.0) {
            m.first_modification_time = Some(r.t);
        }
        let z = norm(&r.z2);
        match m.z2_entry_time {
            None if z < lim.z2_entry => m.z2_entry_time = Some(r.t),
            Some(_) => m.z2_overshoot = m.z2_overshoot.max(z),
            None => {}
        }
        if !(r.chi >= 0.0 && r.chi < 1.0) {
            m.chi_violations += 1;
        }
        if !(r.zeta >= lim.zeta_min - 1e-9 && r.zeta <= lim.zeta_cap + 1e-9) {
            m.zeta_violations += 1;
        }
        if !(r.mu >= 0.0 && r.mu <= 1.0) {
            m.mu_violations += 1;
        }
        if !(r.f_theta <= 1.0 + 1e-9) {
            m.theta_level_violations += 1;
        }
        m.zeta_range[0] = m.zeta_range[0].min(r.zeta);
        m.zeta_range[1] = m.zeta_range[1].max(r.zeta);
    }
    m.delta_rho_settled = m.final_delta_rho.iter().all(|d| *d < 1e-4);
    m
}

/// Reason a run stopped early.
#[derive(Debug, Clone, PartialEq, Error, Serialize)]
pub enum RunFault {
    #[error("controller: {0}")]
    Controller(String),
    #[error("plant: {0}")]
    Plant(String),
}

impl From<ControllerFault> for RunFault {
    fn from(e: ControllerFault) -> Self {
        RunFault::Controller(e.to_string())
    }
}

impl From<PlantFault> for RunFault {
    fn from(e: PlantFault) -> Self {
        RunFault::Plant(e.to_string())
    }
}

/// Everything a run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub telemetry: Vec<TelemetryRow>,
    pub metrics: Metrics,
    pub fault: Option<RunFault>,
    /// Times the modification had to be pulled back onto a shrinking bound.
    pub rho_resets: u64,
}

/// Initial truth with the error quaternion placed on the `q_e0 ≥ 0` hemisphere.
pub fn initial_truth(cfg: &ScenarioConfig) -> PlantTruth {
    let q_d = UnitQuaternion::from_array_normalized(cfg.q_d0);
    let mut q_s = UnitQuaternion::from_array_normalized(cfg.q_s0);
    if q_d.inverse().mul(q_s).s < 0.0 {
        q_s = q_s.negated();
    }
    let c_e = q_d.inverse().mul(q_s).to_dcm();
    PlantTruth {
        q_s,
        q_d,
        omega_e: cfg.omega_s0 - c_e.mul_vec(cfg.desired.omega(0.0)),
        t: 0.0,
    }
}

pub fn measure(truth: &PlantTruth, cfg: &ScenarioConfig, model: &PlantModel) -> Measurements {
    Measurements {
        t: truth.t,
        q_s: truth.q_s,
        q_d: truth.q_d,
        omega_s: truth.omega_s(&cfg.desired),
        omega_d: cfg.desired.omega(truth.t),
        omega_d_dot: cfg.desired.omega_dot(truth.t),
        true_delta_j: Some(model.inertia.delta(truth.t)),
    }
}

fn record(
    truth: &PlantTruth,
    meas: &Measurements,
    state: &ControllerState,
    step: &ControlStep,
    cfg: &ScenarioConfig,
) -> TelemetryRow {
    let o = &step.outputs;
    let env = &o.envelope;
    let per = |f: &dyn Fn(usize) -> f64| [f(0), f(1), f(2)];
    let theta_level = LevelFn {
        l_m: cfg.gains.theta_lm,
        sigma: cfg.gains.sigma_theta,
    };
    let q = o.q_ev.to_array();
    let rho = per(&|i| env[i].rho);
    TelemetryRow {
        t: truth.t,
        q_ev: q,
        rho_n: per(&|i| env[i].rho_n),
        delta_rho: per(&|i| env[i].delta_rho),
        rho,
        rho_max: per(&|i| env[i].rho_max),
        omega_s: meas.omega_s.to_array(),
        omega_v: state.omega_v.to_array(),
        omega_e: o.omega_e.to_array(),
        z2: o.z2.to_array(),
        v: o.v.to_array(),
        u_c: o.u_c.to_array(),
        tau: o.tau.to_array(),
        delta_u: o.delta_u.to_array(),
        beta: per(&|i| env[i].beta),
        s: per(&|i| env[i].s),
        xi: state.xi.to_array(),
        delta: state.delta.to_array(),
        gamma_eps: state.gamma_eps.to_array(),
        theta_hat: state.theta_hat,
        zeta: state.zeta,
        chi: state.chi,
        mu: o.mu,
        f_theta: theta_level.value(&state.theta_hat),
        f_zeta: o.f_zeta,
        envelope_ok: (0..3).all(|i| q[i].abs() < rho[i]),
        velocity_ok: meas.omega_s.max_abs() <= cfg.omega_max,
        torque_ok: o.tau.max_abs() <= cfg.u_max,
    }
}

/// Runs a scenario to `t_end` or the first fault. The configuration is
/// assumed validated.
pub fn run(cfg: &ScenarioConfig) -> RunResult {
    let model = cfg.plant_model();
    let ccfg = cfg.controller_config();
    let mut truth = initial_truth(cfg);
    let mut state = ControllerState::initial(&ccfg);
    let n = cfg.steps();
    let mut telemetry = Vec::with_capacity(n + 1);
    let mut fault = None;
    let mut resets = 0u64;
    let h = cfg.dt / cfg.plant_substeps as f64;

    for k in 0..=n {
        truth.t = k as f64 * cfg.dt;
        let meas = measure(&truth, cfg, &model);
        let step = match controller_step(&meas, &state, &ccfg) {
            Ok(s) => s,
            Err(e) => {
                fault = Some(e.into());
                break;
            }
        };
        resets += step.held.rho_resets as u64;
        telemetry.push(record(&truth, &meas, &state, &step, cfg));
        if k == n {
            break;
        }
        let tau = step.outputs.tau;
        let mut x = truth.pack().to_vec();
        let mut failed = None;
        for j in 0..cfg.plant_substeps {
            let t = truth.t + j as f64 * h;
            match rk4_step(&x, t, h, |t, y, out| plant_deriv(&model, t, y, tau, out)) {
                Ok(y) => x = y,
                Err(e) => {
                    failed = Some(e);
                    break;
                }
            }
        }
        if let Some(e) = failed {
            fault = Some(e.into());
            break;
        }
        truth = PlantTruth::unpack(&x, (k + 1) as f64 * cfg.dt);
        state = state.advance(&step, &ccfg, cfg.dt);
    }

    let metrics = compute_metrics(&telemetry, &MetricLimits::from_config(cfg));
    RunResult {
        telemetry,
        metrics,
        fault,
        rho_resets: resets,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decay(_t: f64, y: &[f64], out: &mut [f64]) -> Result<(), NonFiniteState> {
        out[0] = -y[0];
        Ok(())
    }

    #[test]
    fn rk4_constant_and_exponential() {
        let x = rk4_step(&[1.5, -2.0], 0.0, 0.1, |_, _, o: &mut [f64]| {
            o.fill(0.0);
            Ok::<(), NonFiniteState>(())
        })
        .unwrap();
        assert_eq!(x, vec![1.5, -2.0]);
        let y = rk4_step(&[1.0], 0.0, 0.1, decay).unwrap();
        // local error of the classical scheme is dt⁵/120 for ẋ = −x
        assert!((y[0] - (-0.1f64).exp()).abs() < 1e-7);
    }

    #[test]
    fn rk4_fourth_order_convergence() {
        let global = |dt: f64| {
            let n = (2.0 / dt).round() as usize;
            let mut x = vec![1.0];
            for k in 0..n {
                x = rk4_step(&x, k as f64 * dt, dt, decay).unwrap();
            }
            (x[0] - (-2.0f64).exp()).abs()
        };
        let ratio = global(0.1) / global(0.05);
        assert!((ratio - 16.0).abs() < 1.0, "ratio {ratio}");
    }

    #[test]
    fn rk4_reports_non_finite() {
        let r = rk4_step(&[1.0], 0.0, 0.1, |_, _, o: &mut [f64]| {
            o[0] = f64::INFINITY;
            Ok::<(), NonFiniteState>(())
        });
        assert!(r.is_err());
    }

    #[test]
    fn header_matches_record_width() {
        let cfg = ScenarioConfig::reorientation(0.0175);
        let r = run(&ScenarioConfig { t_end: 0.3, ..cfg });
        assert_eq!(r.telemetry.len(), 4);
        let rec = r.telemetry[2].to_record();
        assert_eq!(rec.len(), telemetry_header().len());
        assert_eq!(TelemetryRow::from_record(&rec).unwrap(), r.telemetry[2]);
    }

    #[test]
    fn zero_error_start_stays_put() {
        let cfg = ScenarioConfig {
            q_s0: [0.0, 0.0, 0.0, 1.0],
            disturbance: DisturbanceModel::None,
            inertia_variation: InertiaVariation::Constant,
            t_end: 20.0,
            ..ScenarioConfig::reorientation(0.0175)
        };
        let r = run(&cfg);
        assert!(r.fault.is_none());
        assert!(r.metrics.steady_state_accuracy < 1e-15);
        assert_eq!(
            r.metrics.velocity_violations + r.metrics.torque_violations,
            0
        );
        assert_eq!(r.metrics.envelope_violations, 0);
    }

    #[test]
    fn initial_flip_keeps_scalar_nonnegative() {
        let cfg = ScenarioConfig::fundamental();
        let t = initial_truth(&cfg);
        assert!(t.q_d.inverse().mul(t.q_s).s >= 0.0);
        assert!(t.q_s.v.x > 0.0);
    }

    fn flat_row(t: f64) -> TelemetryRow {
        TelemetryRow {
            t,
            q_ev: [1e-5, -2e-5, 0.0],
            rho_n: [0.01; 3],
            delta_rho: [0.0; 3],
            rho: [0.01; 3],
            rho_max: [0.1; 3],
            omega_s: [0.001, 0.0, -0.002],
            omega_v: [0.0; 3],
            omega_e: [0.0; 3],
            z2: [0.0; 3],
            v: [0.0; 3],
            u_c: [0.01, 0.0, 0.0],
            tau: [0.01, 0.0, 0.0],
            delta_u: [0.0; 3],
            beta: [1.0; 3],
            s: [0.0; 3],
            xi: [0.0; 3],
            delta: [0.0; 3],
            gamma_eps: [0.0; 3],
            theta_hat: [0.0; 9],
            zeta: 2.0,
            chi: 0.0,
            mu: 1.0,
            f_theta: -1.0,
            f_zeta: -1.0,
            envelope_ok: true,
            velocity_ok: true,
            torque_ok: true,
        }
    }

    fn limits() -> MetricLimits {
        MetricLimits::from_config(&ScenarioConfig::fundamental())
    }

    #[test]
    fn metrics_of_constant_trace() {
        let rows: Vec<_> = (0..50).map(|k| flat_row(k as f64 * 0.1)).collect();
        let m = compute_metrics(&rows, &limits());
        assert_eq!(m.max_omega_s, 0.002);
        assert_eq!(m.max_tau, 0.01);
        assert_eq!(m.steady_state_accuracy, 2e-5);
        assert_eq!(m.velocity_violations, 0);
    }

    #[test]
    fn metrics_count_velocity_violation() {
        let mut rows: Vec<_> = (0..10).map(|k| flat_row(k as f64 * 0.1)).collect();
        rows[4].omega_s[0] = 0.0262 + 0.01;
        let m = compute_metrics(&rows, &limits());
        assert_eq!(m.velocity_violations, 1);
    }

    #[test]
    fn metrics_overshoot_after_entry() {
        let trace = [0.1, 0.01, 5e-4, 2e-4, 7e-4, 3e-4, 1e-4];
        let rows: Vec<_> = trace
            .iter()
            .enumerate()
            .map(|(k, z)| TelemetryRow {
                z2: [0.0, *z, 0.0],
                ..flat_row(k as f64)
            })
            .collect();
        let m = compute_metrics(&rows, &limits());
        assert_eq!(m.z2_entry_time, Some(2.0));
        assert_eq!(m.z2_overshoot, 7e-4);
    }
}
