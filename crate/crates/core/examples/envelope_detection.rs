//! Single-axis envelope: an error that outruns the nominal funnel trips the
//! indicator, the modification opens the envelope, then decays once the
//! error is back inside.

use acpc::envelope::{
    advance_modification, excitation, indicator, judgment, nominal_pf, rho_max, rho_max_rate,
    DetectionParams, ModificationParams, PerfFnParams,
};

fn main() {
    let pf = PerfFnParams {
        rho_0: 1.0,
        rho_inf: 5e-3,
        gamma: 0.08,
    };
    let det = DetectionParams::from_epsilon(1.0, 1e-3);
    let p = ModificationParams {
        c_rho: 0.2,
        c_v: 10.0,
        f_v: 8.0,
        sigma: 0.05,
        sigma_rho: 0.1,
        sigma_s: 0.1,
    };

    // error held near 0.6 for 30 s, then an exponential approach
    let q_at = |t: f64| {
        if t < 30.0 {
            0.6 - 0.002 * t
        } else {
            0.54 * (-(t - 30.0) / 8.0).exp()
        }
    };
    let dt = 0.1;
    let mut dr = 0.0;
    println!(
        "{:>6} {:>9} {:>9} {:>9} {:>6} {:>9}",
        "t", "q", "rho_n", "delta_rho", "S", "rho"
    );
    for k in 0..=900 {
        let t = k as f64 * dt;
        let (q, q_dot) = (q_at(t), (q_at(t + 1e-6) - q_at(t - 1e-6)) / 2e-6);
        let (rho_n, rho_n_dot) = nominal_pf(t, &pf);
        let j = judgment(q, q_dot, rho_n, rho_n_dot, det.alpha);
        let s = indicator(j.beta, &det);
        let (rmax, _) = rho_max(q, rho_n, p.sigma_rho, p.sigma_s);
        let rmax_dot = rho_max_rate(q, q_dot, rho_n, rho_n_dot, &p);
        // a persistently demanding virtual input
        let exc = excitation(s, 0.5, p.f_v);
        if k % 50 == 0 {
            println!(
                "{t:6.1} {q:9.4} {rho_n:9.4} {dr:9.4} {s:6.3} {:9.4}",
                rho_n + dr
            );
        }
        dr = advance_modification(dr, exc, rmax, rmax_dot, &p, dt, 10);
    }
}
