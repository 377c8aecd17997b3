//! Time-varying adaptive gain against a frozen gain and a controller that
//! knows the inertia variation exactly.

use acpc::controller::Variant;
use acpc::sim::{run, ScenarioConfig};

fn main() {
    let variants = [
        Variant::Acpc,
        Variant::ConstantGain { zeta: 30.0 },
        Variant::ConstantGain { zeta: 2.0 },
        Variant::Nominal {
            d_m: 0.06,
            phi: 0.01,
            k_s: 1.0,
        },
    ];
    println!(
        "{:<28} {:>12} {:>12} {:>16}",
        "variant", "z2 overshoot", "accuracy", "zeta range"
    );
    for variant in variants {
        let cfg = ScenarioConfig {
            variant,
            ..ScenarioConfig::fundamental()
        };
        let m = run(&cfg).metrics;
        println!(
            "{:<28} {:>12.4e} {:>12.4e} {:>7.2} .. {:<6.2}",
            format!("{variant:?}"),
            m.z2_overshoot,
            m.steady_state_accuracy,
            m.zeta_range[0],
            m.zeta_range[1]
        );
    }
}
