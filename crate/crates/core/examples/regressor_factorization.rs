//! The uncertain part of the error dynamics is linear in the unknown
//! inertia increment and the disturbance: `W_J vech(ΔJ) + d = W Θ`.

use acpc::attitude::{build_regressor_w, Vec3};
use acpc::plant::{delta_inertia, disturbance, DesiredMotion, DEG};
use acpc::UnitQuaternion;

fn main() {
    let desired = DesiredMotion::Tracking {
        amplitude: 0.5 * DEG,
        c: [80.0, 150.0, 100.0],
    };
    let q_e = UnitQuaternion::from_axis_angle(Vec3::new(1.0, -2.0, 0.5), 0.3);
    let c_e = q_e.to_dcm().transpose();
    let omega_e = Vec3::new(0.004, -0.002, 0.01);

    for t in [0.0, 50.0, 120.0] {
        let (wd, wdd) = (desired.omega(t), desired.omega_dot(t));
        let omega_s = omega_e + c_e.mul_vec(wd);
        let dj = delta_inertia(t);
        let d = disturbance(t, 0.01);

        let dj_m = dj.to_symmetric();
        let a = omega_e.cross(c_e.mul_vec(wd)) - c_e.mul_vec(wdd);
        let direct = dj_m.mul_vec(a) - omega_s.cross(dj_m.mul_vec(omega_s)) + d;

        let mut theta = [0.0; 9];
        theta[..6].copy_from_slice(&dj.0);
        theta[6..].copy_from_slice(&d.to_array());
        let w = build_regressor_w(omega_e, omega_s, &c_e, wd, wdd);
        let factored = w.mul_vec(&theta);
        println!(
            "t={t:5.1}  direct=[{:+.6e} {:+.6e} {:+.6e}]  |W Theta - direct| = {:.1e}  ||W|| = {:.3}",
            direct.x,
            direct.y,
            direct.z,
            (factored - direct).max_abs(),
            w.spectral_norm()
        );
    }
}
