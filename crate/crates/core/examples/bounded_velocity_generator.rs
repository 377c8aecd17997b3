//! The velocity generator tracks its input as a first-order filter but never
//! leaves `|ω_v| < B_ω`, however large the input.

use acpc::bvg::{advance, BvgParams};
use acpc::Vec3;

fn main() {
    let p = BvgParams {
        c_d: 1.0,
        c_f: 4.0,
        b_omega: 0.0125,
        kappa_min: 1e-3,
    };
    let dt = 0.1;
    for v in [0.001, 0.01, 1.0, 1e6] {
        let mut w = Vec3::ZERO;
        let mut peak = 0.0f64;
        for _ in 0..100 {
            w = advance(w, Vec3::new(v, -v, 0.5 * v), &p, dt);
            peak = peak.max(w.max_abs());
        }
        println!(
            "v = {v:>8.0e}: omega_v after 10 s = [{:+.6} {:+.6} {:+.6}], peak {:.6} (bound {}), linear target {:.3e}",
            w.x,
            w.y,
            w.z,
            peak,
            p.b_omega,
            v / p.c_d
        );
    }
}
