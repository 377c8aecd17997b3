//! Tracking a rotating target under a 1.5°/s rate limit.
//!
//!     cargo run --release --example fundamental_tracking [telemetry.csv]

use acpc::cli::write_telemetry;
use acpc::sim::{run, ScenarioConfig};
use std::path::Path;

fn main() {
    let cfg = ScenarioConfig::fundamental();
    let report = cfg.validate().expect("default gains are valid");
    println!(
        "B_omega = {:.5} rad/s, lambda_min(J0) = {}",
        cfg.b_omega(),
        report.lambda_j0_min
    );

    let res = run(&cfg);
    let m = &res.metrics;
    println!("steps          {}", m.rows);
    println!(
        "accuracy       {:.3e} (max |q_ev| over the last {} s)",
        m.steady_state_accuracy, cfg.steady_window
    );
    println!(
        "max |omega_s|  {:.4e} (limit {})",
        m.max_omega_s, cfg.omega_max
    );
    println!("max |tau|      {:.4e} (limit {})", m.max_tau, cfg.u_max);
    println!(
        "violations     velocity {}, torque {}, envelope {}",
        m.velocity_violations, m.torque_violations, m.envelope_violations
    );
    println!(
        "peak delta_rho {:?}, first at {:?} s",
        m.peak_delta_rho, m.first_modification_time
    );
    println!("final delta_rho {:?}", m.final_delta_rho);
    if let Some(f) = &res.fault {
        println!("fault: {f}");
    }

    for r in res.telemetry.iter().step_by(200) {
        println!(
            "t={:6.1}  q_ev=[{:+.3e} {:+.3e} {:+.3e}]  rho=[{:.3e} {:.3e} {:.3e}]  zeta={:.2}",
            r.t, r.q_ev[0], r.q_ev[1], r.q_ev[2], r.rho[0], r.rho[1], r.rho[2], r.zeta
        );
    }

    if let Some(path) = std::env::args().nth(1) {
        write_telemetry(Path::new(&path), &res.telemetry).expect("write telemetry");
        println!("telemetry written to {path}");
    }
}
