//! Performance envelope: nominal performance function, barrier-based
//! contradiction detection and the projection-bounded envelope modification.

use serde::{Deserialize, Serialize};

/// Exponentially converging nominal performance function for one axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerfFnParams {
    pub rho_0: f64,
    pub rho_inf: f64,
    /// Convergence rate, 1/s.
    pub gamma: f64,
}

impl PerfFnParams {
    pub fn is_valid(&self) -> bool {
        self.rho_0 > self.rho_inf && self.rho_inf > 0.0 && self.gamma > 0.0
    }
}

/// `(ρ_n, ρ̇_n)` at time `t`.
pub fn nominal_pf(t: f64, p: &PerfFnParams) -> (f64, f64) {
    let e = (p.rho_0 - p.rho_inf) * (-p.gamma * t).exp();
    (e + p.rho_inf, -p.gamma * e)
}

/// Switching thresholds of the mollified indicator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionParams {
    /// Class-K gain of the barrier condition, 1/s.
    pub alpha: f64,
    pub s0: f64,
    pub sm: f64,
    pub s1: f64,
    /// Steepness; must satisfy `m ≥ 1/(S₁ − S₀)`.
    pub m: f64,
}

impl DetectionParams {
    /// `S₀ = 0`, `S_m = ε`, `S₁ = 2ε` and `m = 2/(S₁ − S₀)`.
    pub fn from_epsilon(alpha: f64, eps: f64) -> Self {
        Self {
            alpha,
            s0: 0.0,
            sm: eps,
            s1: 2.0 * eps,
            m: 1.0 / eps,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.s0 < self.sm
            && self.sm < self.s1
            && self.m >= 1.0 / (self.s1 - self.s0)
            && self.alpha > 0.0
    }
}

/// Barrier `D = ρ_n² − q²`, its rate and `β = Ḋ + αD`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Judgment {
    pub d: f64,
    pub d_dot: f64,
    pub beta: f64,
}

pub fn judgment(q: f64, q_dot: f64, rho_n: f64, rho_n_dot: f64, alpha: f64) -> Judgment {
    let d = rho_n * rho_n - q * q;
    let d_dot = 2.0 * rho_n * rho_n_dot - 2.0 * q * q_dot;
    Judgment {
        d,
        d_dot,
        beta: d_dot + alpha * d,
    }
}

/// Smooth 1→0 indicator; 1 flags a contradiction.
pub fn indicator(beta: f64, p: &DetectionParams) -> f64 {
    if beta < p.s0 {
        1.0
    } else if beta >= p.s1 {
        0.0
    } else if beta == p.s0 {
        1.0
    } else {
        let arg = p.m * (p.s1 - p.s0) * (beta - p.sm) / ((beta - p.s0) * (p.s1 - beta)).sqrt();
        (-0.5 * (arg.tanh() - 1.0)).clamp(0.0, 1.0)
    }
}

/// Gains of the envelope modification dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModificationParams {
    pub c_rho: f64,
    pub c_v: f64,
    pub f_v: f64,
    /// Width of the projection boundary layer.
    pub sigma: f64,
    pub sigma_rho: f64,
    pub sigma_s: f64,
}

/// Moving upper bound of the modification and whether the floor is active.
pub fn rho_max(q: f64, rho_n: f64, sigma_rho: f64, sigma_s: f64) -> (f64, bool) {
    let raw = q.abs() + sigma_rho - rho_n;
    if raw >= sigma_s {
        (raw, false)
    } else {
        (sigma_s, true)
    }
}

/// Rate of [`rho_max`]; zero on the floor and at the switching point.
pub fn rho_max_rate(q: f64, q_dot: f64, rho_n: f64, rho_n_dot: f64, p: &ModificationParams) -> f64 {
    let raw = q.abs() + p.sigma_rho - rho_n;
    if raw > p.sigma_s {
        q.signum() * q_dot - rho_n_dot
    } else {
        0.0
    }
}

/// Projection evaluation function of the modification and its partials.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeEval {
    pub f: f64,
    /// ∂f/∂Δρ
    pub grad_rho: f64,
    /// ∂f/∂ρ_max
    pub grad_rho_max: f64,
}

/// `f = (Δρ² − ρ_max²)/(2σρ_max + σ²)`.
pub fn eval_f_rho(delta_rho: f64, rho_max: f64, sigma: f64) -> EnvelopeEval {
    let den = 2.0 * sigma * rho_max + sigma * sigma;
    let num = delta_rho * delta_rho - rho_max * rho_max;
    EnvelopeEval {
        f: num / den,
        grad_rho: 2.0 * delta_rho / den,
        grad_rho_max: (-2.0 * rho_max * den - 2.0 * sigma * num) / (den * den),
    }
}

/// Result of one evaluation of the modification vector field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModificationRate {
    /// Δρ̇
    pub rate: f64,
    /// Efficiency factor `g ∈ [0, 1]`.
    pub g: f64,
    /// Moving-bound compensation 𝒲.
    pub w: f64,
    pub eval: EnvelopeEval,
    pub projecting: bool,
}

/// Excitation `Δς = S(β)·|tanh(F_v ϖ)|`.
pub fn excitation(s: f64, varpi: f64, f_v: f64) -> f64 {
    s * (f_v * varpi).tanh().abs()
}

/// `Δρ̇ = g ℳ − 𝒲` with `ℳ = −C_ρ Δρ + C_v Δς`.
///
/// The projection branch (`g = 1 − f`, 𝒲 active) applies when `f > 0` and
/// `∇_ρ ℳ + ∇_ρmax ρ̇_max > 0`; otherwise `g = 1` and 𝒲 = 0.
pub fn modification_deriv(
    delta_rho: f64,
    excitation: f64,
    rho_max: f64,
    rho_max_dot: f64,
    p: &ModificationParams,
) -> ModificationRate {
    let drive = -p.c_rho * delta_rho + p.c_v * excitation;
    let eval = eval_f_rho(delta_rho, rho_max, p.sigma);
    let outward = eval.grad_rho * drive + eval.grad_rho_max * rho_max_dot;
    if eval.f > 0.0 && outward > 0.0 && eval.grad_rho != 0.0 {
        let g = 1.0 - eval.f;
        let w = eval.grad_rho_max * rho_max_dot / eval.grad_rho;
        ModificationRate {
            rate: g * drive - w,
            g,
            w,
            eval,
            projecting: true,
        }
    } else {
        ModificationRate {
            rate: drive,
            g: 1.0,
            w: 0.0,
            eval,
            projecting: false,
        }
    }
}

/// Largest admissible modification for a bound, i.e. the `f = 1` level.
pub fn admissible_limit(rho_max: f64, sigma: f64) -> f64 {
    rho_max + sigma
}

/// Advances Δρ over one control period with the excitation held and the
/// bound moving linearly at `rho_max_dot` (floored at `σ_s`). The flow is
/// stiff near `f = 1` when `C_v` is large, so it is sub-stepped with RK4.
pub fn advance_modification(
    delta_rho: f64,
    excitation: f64,
    rho_max0: f64,
    rho_max_dot: f64,
    p: &ModificationParams,
    dt: f64,
    substeps: usize,
) -> f64 {
    let h = dt / substeps as f64;
    let bound = |tau: f64| (rho_max0 + rho_max_dot * tau).max(p.sigma_s);
    let rate_at = |tau: f64, x: f64| {
        let slope = if bound(tau) > p.sigma_s {
            rho_max_dot
        } else {
            0.0
        };
        modification_deriv(x, excitation, bound(tau), slope, p).rate
    };
    let mut x = delta_rho;
    for k in 0..substeps {
        let tau = k as f64 * h;
        let k1 = rate_at(tau, x);
        let k2 = rate_at(tau + 0.5 * h, x + 0.5 * h * k1);
        let k3 = rate_at(tau + 0.5 * h, x + 0.5 * h * k2);
        let k4 = rate_at(tau + h, x + h * k3);
        x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        x = x.clamp(0.0, admissible_limit(bound(tau + h), p.sigma));
    }
    x
}

/// Per-axis envelope quantities for one control step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnvelopeSignals {
    pub rho_n: f64,
    pub rho_n_dot: f64,
    pub delta_rho: f64,
    pub delta_rho_dot: f64,
    pub rho: f64,
    pub rho_dot: f64,
    pub d: f64,
    pub d_dot: f64,
    pub beta: f64,
    /// Indicator value.
    pub s: f64,
    pub rho_max: f64,
    pub rho_max_dot: f64,
    pub f: f64,
    /// Efficiency factor.
    pub g: f64,
    /// Moving-bound compensation.
    pub w: f64,
    /// Excitation Δς.
    pub excitation: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn default_pf() -> PerfFnParams {
        PerfFnParams {
            rho_0: 1.0,
            rho_inf: 5e-3,
            gamma: 0.08,
        }
    }

    fn default_mod() -> ModificationParams {
        ModificationParams {
            c_rho: 0.2,
            c_v: 10.0,
            f_v: 8.0,
            sigma: 0.05,
            sigma_rho: 0.1,
            sigma_s: 0.1,
        }
    }

    #[test]
    fn nominal_pf_values() {
        let p = default_pf();
        assert_eq!(nominal_pf(0.0, &p).0, 1.0);
        assert!((nominal_pf(1e4, &p).0 - 5e-3).abs() < 1e-15);
        let (r, _) = nominal_pf(12.5, &p);
        let oracle = 0.995 * (-1.0f64).exp() + 0.005;
        assert!((r - oracle).abs() < 1e-15);
        assert!((r - 0.37104).abs() < 1e-5);
        let h = 1e-6;
        let fd = (nominal_pf(12.5 + h, &p).0 - nominal_pf(12.5 - h, &p).0) / (2.0 * h);
        assert!((fd - nominal_pf(12.5, &p).1).abs() < 1e-9);
    }

    #[test]
    fn judgment_cases() {
        let j = judgment(0.0, 0.0, 0.5, -0.04, 1.0);
        assert_eq!(j.d, 0.25);
        assert_eq!(j.beta, 2.0 * 0.5 * -0.04 + 0.25);
        let j = judgment(0.3, -0.02, 0.3, -0.02, 1.0);
        assert_eq!((j.d, j.d_dot, j.beta), (0.0, 0.0, 0.0));
    }

    #[test]
    fn judgment_rate_matches_trajectory_difference() {
        // q(t) = 0.4 e^{-0.05 t} cos(0.3 t) against the nominal envelope
        let p = default_pf();
        let q = |t: f64| 0.4 * (-0.05 * t).exp() * (0.3 * t).cos();
        let qd =
            |t: f64| 0.4 * (-0.05 * t).exp() * (-0.05 * (0.3 * t).cos() - 0.3 * (0.3 * t).sin());
        let d_at = |t: f64| {
            let (r, rd) = nominal_pf(t, &p);
            judgment(q(t), qd(t), r, rd, 1.0)
        };
        let mut errs = vec![];
        for h in [1e-2, 5e-3] {
            let t = 7.0;
            let fd = (d_at(t + h).d - d_at(t - h).d) / (2.0 * h);
            errs.push((fd - d_at(t).d_dot).abs());
        }
        assert!(errs[0] < 1e-5);
        let ratio = errs[0] / errs[1];
        assert!(ratio > 3.5 && ratio < 4.5, "ratio {ratio}");
    }

    #[test]
    fn indicator_branches() {
        let p = DetectionParams::from_epsilon(1.0, 0.001);
        assert!(p.is_valid());
        assert_eq!(indicator(-0.5, &p), 1.0);
        assert_eq!(indicator(p.s0, &p), 1.0);
        assert_eq!(indicator(p.sm, &p), 0.5);
        assert_eq!(indicator(p.s1, &p), 0.0);
        assert_eq!(indicator(p.s1 + 0.01, &p), 0.0);
        // continuity at the joins
        assert!(indicator(p.s0 + 1e-12, &p) > 0.999_999);
        assert!(indicator(p.s1 - 1e-12, &p) < 1e-6);
    }

    #[test]
    fn indicator_monotone_on_buffer() {
        let p = DetectionParams::from_epsilon(1.0, 0.001);
        let n = 10_000;
        let mut prev = 1.0;
        for k in 0..=n {
            let b = p.s0 + (p.s1 - p.s0) * k as f64 / n as f64;
            let s = indicator(b, &p);
            assert!((0.0..=1.0).contains(&s));
            assert!(s <= prev + 1e-15, "non-monotone at {b}");
            prev = s;
        }
    }

    #[test]
    fn rho_max_cases() {
        assert_eq!(rho_max(0.0, 1.0, 0.1, 0.1), (0.1, true));
        let (v, floor) = rho_max(0.9, 0.5, 0.1, 0.1);
        assert!((v - 0.5).abs() < 1e-15 && !floor);
        // continuity at the switch
        let (a, _) = rho_max(0.1, 0.1, 0.1, 0.1);
        assert!((a - 0.1).abs() < 1e-15);
    }

    #[test]
    fn eval_endpoints_and_gradients() {
        for &(rm, s) in &[(0.1, 0.05), (0.7, 0.1), (2.0, 0.5)] {
            assert!(eval_f_rho(rm, rm, s).f.abs() < 1e-12);
            assert!((eval_f_rho(rm + s, rm, s).f - 1.0).abs() < 1e-12);
            let h = 1e-6;
            for dr in [0.0, 0.3 * rm, rm + 0.5 * s] {
                let e = eval_f_rho(dr, rm, s);
                let fd = (eval_f_rho(dr + h, rm, s).f - eval_f_rho(dr - h, rm, s).f) / (2.0 * h);
                assert!((fd - e.grad_rho).abs() < 1e-8);
                let fd = (eval_f_rho(dr, rm + h, s).f - eval_f_rho(dr, rm - h, s).f) / (2.0 * h);
                assert!((fd - e.grad_rho_max).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn modification_quiescent_and_recovery() {
        let p = default_mod();
        let r = modification_deriv(0.0, 0.0, 0.1, 0.0, &p);
        assert_eq!(r.rate, 0.0);
        let r = modification_deriv(0.05, 0.0, 0.1, 0.0, &p);
        assert!(!r.projecting);
        assert_eq!(r.rate, -p.c_rho * 0.05);
    }

    #[test]
    fn modification_is_tangent_at_boundary() {
        let p = default_mod();
        for &(rm, rmd) in &[(0.3, 0.0), (0.3, 0.02), (0.3, -0.05), (0.5, 0.1)] {
            let dr = rm + p.sigma;
            let r = modification_deriv(dr, 1.0, rm, rmd, &p);
            assert!(r.projecting);
            assert!((r.eval.f - 1.0).abs() < 1e-12);
            let f_dot = r.eval.grad_rho * r.rate + r.eval.grad_rho_max * rmd;
            assert!(f_dot.abs() < 1e-10, "f_dot = {f_dot}");
        }
    }

    #[test]
    fn advance_respects_limit() {
        let p = default_mod();
        let mut x = 0.0;
        for _ in 0..100 {
            x = advance_modification(x, 1.0, 0.3, 0.0, &p, 0.1, 40);
            assert!(x >= 0.0 && eval_f_rho(x, 0.3, p.sigma).f <= 1.0 + 1e-12);
        }
        assert!(x > 0.3);
        // exponential recovery once the excitation vanishes
        let x0 = 0.02;
        let x1 = advance_modification(x0, 0.0, 0.3, 0.0, &p, 1.0, 40);
        assert!((x1 - x0 * (-p.c_rho).exp()).abs() < 1e-10);
    }

    proptest! {
        #[test]
        fn indicator_in_unit_interval(b in -10.0..10.0f64, eps in 1e-4..1.0f64) {
            let p = DetectionParams::from_epsilon(1.0, eps);
            let s = indicator(b, &p);
            prop_assert!((0.0..=1.0).contains(&s));
        }
    }
}
