//! Rest-to-rest slews under a tight and a loose rate limit.

use acpc::sim::{run, ScenarioConfig};

fn main() {
    for omega_max in [0.0175, 0.0873] {
        let cfg = ScenarioConfig::reorientation(omega_max);
        cfg.validate().expect("valid scenario");
        let m = run(&cfg).metrics;
        println!(
            "Omega_max = {omega_max} rad/s (B_omega = {:.4})",
            cfg.b_omega()
        );
        println!("  accuracy        {:.3e}", m.steady_state_accuracy);
        println!(
            "  max |omega_s|   {:.4e}, violations {}",
            m.max_omega_s, m.velocity_violations
        );
        println!(
            "  max |tau|       {:.4e}, violations {}",
            m.max_tau, m.torque_violations
        );
        println!("  envelope        violations {}", m.envelope_violations);
        println!(
            "  peak delta_rho  {:.3e} {:.3e} {:.3e}",
            m.peak_delta_rho[0], m.peak_delta_rho[1], m.peak_delta_rho[2]
        );
    }
}
