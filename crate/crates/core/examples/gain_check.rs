//! Gain conditions for the default set and for a deliberately broken one.

use acpc::sim::ScenarioConfig;

fn main() {
    let cfg = ScenarioConfig::fundamental();
    let report = cfg.gain_report().expect("J0 is positive definite");
    for c in &report.conditions {
        println!(
            "{:<16} {:>10.4}  {}",
            c.name,
            c.value,
            if c.pass { "pass" } else { "FAIL" }
        );
    }
    println!("L_rho = {:.3}", report.l_rho);

    let mut broken = ScenarioConfig::fundamental();
    broken.gains.p_2 = broken.gains.p_1;
    broken.gains.k_2 = 0.0;
    match broken.validate() {
        Ok(_) => println!("unexpectedly valid"),
        Err(e) => println!("broken set rejected: {e}"),
    }
}
