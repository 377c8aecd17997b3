//! How much of the environmental torque the actuator budget can absorb.
//! The third disturbance component peaks above the torque limit; scaling it
//! down shows where the tracking case becomes feasible.

use acpc::plant::{disturbance, DisturbanceModel};
use acpc::sim::{run, ScenarioConfig};

fn main() {
    let base = ScenarioConfig::fundamental();
    let peak = (0..=2000)
        .map(|k| disturbance(k as f64 * 0.1, 0.01).max_abs())
        .fold(0.0, f64::max);
    println!(
        "peak |d| over 200 s = {peak:.4} N m, U_max = {}",
        base.u_max
    );
    println!(
        "{:>6} {:>12} {:>10} {:>10}",
        "scale", "accuracy", "vel viol", "final drho"
    );
    for scale in [1.0, 0.8, 0.6, 0.4, 0.2] {
        let cfg = ScenarioConfig {
            disturbance: DisturbanceModel::MultiTone {
                omega_p: 0.01,
                scale,
            },
            ..base.clone()
        };
        let m = run(&cfg).metrics;
        println!(
            "{scale:6.1} {:12.3e} {:10} {:10.2e}",
            m.steady_state_accuracy,
            m.velocity_violations,
            m.final_delta_rho.iter().cloned().fold(0.0, f64::max)
        );
    }
}
