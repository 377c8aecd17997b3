//! Small dense linear algebra, unit quaternions and the inertia regressor.
//!
//! Quaternions are stored scalar-last, `[qv, q0]`, and compose with the
//! Hamilton product. A quaternion `q` is read as the rotation taking body
//! coordinates to reference coordinates, so its kinematics are
//! `q̇ = ½ q ⊗ [ω, 0]` with `ω` in body axes, and [`UnitQuaternion::to_dcm`]
//! returns the frame transformation `C(q)` mapping reference-frame
//! components into body-frame components.

use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

/// Three-component real vector.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 {
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub const fn from_array(a: [f64; 3]) -> Self {
        Self {
            x: a[0],
            y: a[1],
            z: a[2],
        }
    }

    pub const fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn splat(v: f64) -> Self {
        Self::new(v, v, v)
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn max_abs(self) -> f64 {
        self.x.abs().max(self.y.abs()).max(self.z.abs())
    }

    pub fn map(self, f: impl Fn(f64) -> f64) -> Vec3 {
        Vec3::new(f(self.x), f(self.y), f(self.z))
    }

    /// Component-wise product.
    pub fn hadamard(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x * o.x, self.y * o.y, self.z * o.z)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl Index<usize> for Vec3 {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        match i {
            0 => &self.x,
            1 => &self.y,
            2 => &self.z,
            _ => panic!("Vec3 index {i} out of range"),
        }
    }
}

impl IndexMut<usize> for Vec3 {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        match i {
            0 => &mut self.x,
            1 => &mut self.y,
            2 => &mut self.z,
            _ => panic!("Vec3 index {i} out of range"),
        }
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl SubAssign for Vec3 {
    fn sub_assign(&mut self, o: Vec3) {
        *self = *self - o;
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Mul<Vec3> for f64 {
    type Output = Vec3;
    fn mul(self, v: Vec3) -> Vec3 {
        v * self
    }
}

/// 3×3 real matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Mat3 {
    pub m: [[f64; 3]; 3],
}

impl Mat3 {
    pub const ZERO: Mat3 = Mat3 { m: [[0.0; 3]; 3] };

    pub const fn from_rows(m: [[f64; 3]; 3]) -> Self {
        Self { m }
    }

    pub fn identity() -> Self {
        Self::diag(Vec3::splat(1.0))
    }

    pub fn diag(d: Vec3) -> Self {
        Self::from_rows([[d.x, 0.0, 0.0], [0.0, d.y, 0.0], [0.0, 0.0, d.z]])
    }

    pub fn row(&self, i: usize) -> Vec3 {
        Vec3::from_array(self.m[i])
    }

    pub fn transpose(&self) -> Mat3 {
        let mut t = Mat3::ZERO;
        for i in 0..3 {
            for j in 0..3 {
                t.m[i][j] = self.m[j][i];
            }
        }
        t
    }

    pub fn mul_vec(&self, v: Vec3) -> Vec3 {
        Vec3::new(self.row(0).dot(v), self.row(1).dot(v), self.row(2).dot(v))
    }

    pub fn mul_mat(&self, o: &Mat3) -> Mat3 {
        let mut r = Mat3::ZERO;
        for i in 0..3 {
            for j in 0..3 {
                r.m[i][j] = (0..3).map(|k| self.m[i][k] * o.m[k][j]).sum();
            }
        }
        r
    }

    pub fn scale(&self, s: f64) -> Mat3 {
        let mut r = *self;
        r.m.iter_mut().flatten().for_each(|e| *e *= s);
        r
    }

    pub fn add(&self, o: &Mat3) -> Mat3 {
        let mut r = *self;
        for i in 0..3 {
            for j in 0..3 {
                r.m[i][j] += o.m[i][j];
            }
        }
        r
    }

    pub fn sub(&self, o: &Mat3) -> Mat3 {
        self.add(&o.scale(-1.0))
    }

    pub fn determinant(&self) -> f64 {
        let m = &self.m;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Solves `self · x = b` by Cramer's rule; `None` when singular.
    pub fn solve(&self, b: Vec3) -> Option<Vec3> {
        let det = self.determinant();
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let mut x = Vec3::ZERO;
        for c in 0..3 {
            let mut a = *self;
            for r in 0..3 {
                a.m[r][c] = b[r];
            }
            x[c] = a.determinant() / det;
        }
        Some(x)
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.m.iter().flatten().map(|e| e * e).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.m.iter().flatten().all(|e| e.is_finite())
    }

    /// Eigenvalues of the symmetric part, ascending.
    pub fn symmetric_eigenvalues(&self) -> [f64; 3] {
        let a = nalgebra::Matrix3::from_fn(|i, j| 0.5 * (self.m[i][j] + self.m[j][i]));
        let mut ev: Vec<f64> = a.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        [ev[0], ev[1], ev[2]]
    }
}

/// Cross-product matrix: `skew(v) · u = v × u`.
pub fn skew(v: Vec3) -> Mat3 {
    Mat3::from_rows([[0.0, -v.z, v.y], [v.z, 0.0, -v.x], [-v.y, v.x, 0.0]])
}

/// Half-vectorisation of a symmetric 3×3 matrix ordered (11,12,13,22,23,33).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vech6(pub [f64; 6]);

impl Vech6 {
    pub fn from_symmetric(a: &Mat3) -> Self {
        let m = &a.m;
        Self([m[0][0], m[0][1], m[0][2], m[1][1], m[1][2], m[2][2]])
    }

    pub fn to_symmetric(&self) -> Mat3 {
        let v = &self.0;
        Mat3::from_rows([[v[0], v[1], v[2]], [v[1], v[3], v[4]], [v[2], v[4], v[5]]])
    }
}

/// Dense 3×6 matrix.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Mat3x6 {
    pub m: [[f64; 6]; 3],
}

impl Mat3x6 {
    pub fn mul_vech(&self, p: &Vech6) -> Vec3 {
        let row = |i: usize| self.m[i].iter().zip(p.0.iter()).map(|(a, b)| a * b).sum();
        Vec3::new(row(0), row(1), row(2))
    }

    /// Left-multiplies by a 3×3 matrix.
    pub fn premul(&self, a: &Mat3) -> Mat3x6 {
        let mut r = Mat3x6::default();
        for i in 0..3 {
            for j in 0..6 {
                r.m[i][j] = (0..3).map(|k| a.m[i][k] * self.m[k][j]).sum();
            }
        }
        r
    }

    pub fn sub(&self, o: &Mat3x6) -> Mat3x6 {
        let mut r = *self;
        for i in 0..3 {
            for j in 0..6 {
                r.m[i][j] -= o.m[i][j];
            }
        }
        r
    }
}

/// The 3×9 regressor `[W_J | I₃]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Mat3x9 {
    pub m: [[f64; 9]; 3],
}

impl Mat3x9 {
    pub fn mul_vec(&self, p: &[f64; 9]) -> Vec3 {
        let row = |i: usize| self.m[i].iter().zip(p.iter()).map(|(a, b)| a * b).sum();
        Vec3::new(row(0), row(1), row(2))
    }

    /// `selfᵀ · v`.
    pub fn transpose_mul(&self, v: Vec3) -> [f64; 9] {
        let mut out = [0.0; 9];
        for (j, o) in out.iter_mut().enumerate() {
            *o = self.m[0][j] * v.x + self.m[1][j] * v.y + self.m[2][j] * v.z;
        }
        out
    }

    /// Induced 2-norm (largest singular value).
    pub fn spectral_norm(&self) -> f64 {
        let mut g = Mat3::ZERO;
        for i in 0..3 {
            for j in 0..3 {
                g.m[i][j] = (0..9).map(|k| self.m[i][k] * self.m[j][k]).sum();
            }
        }
        g.symmetric_eigenvalues()[2].max(0.0).sqrt()
    }
}

/// Unit quaternion stored scalar-last.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitQuaternion {
    /// Vector part.
    pub v: Vec3,
    /// Scalar part.
    pub s: f64,
}

impl Default for UnitQuaternion {
    fn default() -> Self {
        Self::identity()
    }
}

impl UnitQuaternion {
    pub fn identity() -> Self {
        Self {
            v: Vec3::ZERO,
            s: 1.0,
        }
    }

    /// Builds from `[x, y, z, w]` and renormalises. Panics on a zero quaternion.
    pub fn from_array_normalized(a: [f64; 4]) -> Self {
        Self::from_parts_unchecked(Vec3::new(a[0], a[1], a[2]), a[3]).normalized()
    }

    pub fn from_parts_unchecked(v: Vec3, s: f64) -> Self {
        Self { v, s }
    }

    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Self {
        let n = axis.norm();
        assert!(n > 0.0, "rotation axis must be non-zero");
        let (sh, ch) = (0.5 * angle).sin_cos();
        Self {
            v: axis * (sh / n),
            s: ch,
        }
        .normalized()
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.v.x, self.v.y, self.v.z, self.s]
    }

    pub fn norm(&self) -> f64 {
        (self.v.norm_squared() + self.s * self.s).sqrt()
    }

    pub fn normalized(self) -> Self {
        let n = self.norm();
        assert!(
            n > 0.0 && n.is_finite(),
            "cannot normalise quaternion of norm {n}"
        );
        Self {
            v: self.v * (1.0 / n),
            s: self.s / n,
        }
    }

    pub fn conjugate(self) -> Self {
        Self {
            v: -self.v,
            s: self.s,
        }
    }

    /// Inverse of a unit quaternion.
    pub fn inverse(self) -> Self {
        self.conjugate()
    }

    /// Same rotation, opposite sign.
    pub fn negated(self) -> Self {
        Self {
            v: -self.v,
            s: -self.s,
        }
    }

    /// Raw Hamilton product, no renormalisation.
    pub fn hamilton(self, b: Self) -> Self {
        Self {
            v: b.v * self.s + self.v * b.s + self.v.cross(b.v),
            s: self.s * b.s - self.v.dot(b.v),
        }
    }

    /// Hamilton product `self ⊗ b`, renormalised.
    pub fn mul(self, b: Self) -> Self {
        self.hamilton(b).normalized()
    }

    /// Frame transformation `C(q) = (q0² − qvᵀqv)I + 2 qv qvᵀ − 2 q0 qv×`.
    pub fn to_dcm(self) -> Mat3 {
        let (v, s) = (self.v, self.s);
        let mut c = Mat3::identity().scale(s * s - v.norm_squared());
        for i in 0..3 {
            for j in 0..3 {
                c.m[i][j] += 2.0 * v[i] * v[j];
            }
        }
        c.sub(&skew(v).scale(2.0 * s))
    }

    /// `½ q ⊗ [ω, 0]` as `[x, y, z, w]`.
    pub fn kinematics(self, omega: Vec3) -> [f64; 4] {
        let dv = gamma_jacobian(self).mul_vec(omega);
        let ds = -0.5 * self.v.dot(omega);
        [dv.x, dv.y, dv.z, ds]
    }

    /// Rotates reference-frame components into body-frame components.
    pub fn to_body(self, r: Vec3) -> Vec3 {
        self.to_dcm().mul_vec(r)
    }
}

/// Hamilton product with renormalised output.
pub fn quat_mul(a: UnitQuaternion, b: UnitQuaternion) -> UnitQuaternion {
    a.mul(b)
}

pub fn quat_to_dcm(q: UnitQuaternion) -> Mat3 {
    q.to_dcm()
}

/// Relative attitude of the body with respect to the target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorAttitude {
    pub q_e: UnitQuaternion,
    /// Target-frame to body-frame transformation.
    pub c_e: Mat3,
    pub omega_e: Vec3,
}

/// `q_e = q_d⁻¹ ⊗ q_s`, `C_e = C(q_e)`, `ω_e = ω_s − C_e ω_d`.
pub fn error_attitude(
    q_s: UnitQuaternion,
    q_d: UnitQuaternion,
    omega_s: Vec3,
    omega_d: Vec3,
) -> ErrorAttitude {
    let q_e = q_d.inverse().mul(q_s);
    let c_e = q_e.to_dcm();
    ErrorAttitude {
        q_e,
        c_e,
        omega_e: omega_s - c_e.mul_vec(omega_d),
    }
}

/// Kinematic Jacobian `Γ = ½ (q0 I + qv×)`.
pub fn gamma_jacobian(q: UnitQuaternion) -> Mat3 {
    Mat3::identity().scale(q.s).add(&skew(q.v)).scale(0.5)
}

/// Linear operator with `L(x) · vech(A) = A x` for symmetric `A`.
///
/// ```text
///        11  12  13  22  23  33
/// row 1 [x1  x2  x3   0   0   0]
/// row 2 [ 0  x1   0  x2  x3   0]
/// row 3 [ 0   0  x1   0  x2  x3]
/// ```
pub fn regressor_l(x: Vec3) -> Mat3x6 {
    Mat3x6 {
        m: [
            [x.x, x.y, x.z, 0.0, 0.0, 0.0],
            [0.0, x.x, 0.0, x.y, x.z, 0.0],
            [0.0, 0.0, x.x, 0.0, x.y, x.z],
        ],
    }
}

/// Inertia-coupling regressor `W_J = L(ω_e× C_e ω_d − C_e ω̇_d) − ω_s× L(ω_s)`.
pub fn regressor_wj(
    omega_e: Vec3,
    omega_s: Vec3,
    c_e: &Mat3,
    omega_d: Vec3,
    omega_d_dot: Vec3,
) -> Mat3x6 {
    let a = omega_e.cross(c_e.mul_vec(omega_d)) - c_e.mul_vec(omega_d_dot);
    regressor_l(a).sub(&regressor_l(omega_s).premul(&skew(omega_s)))
}

/// Expanded regressor `W = [W_J | I₃]`.
pub fn build_regressor_w(
    omega_e: Vec3,
    omega_s: Vec3,
    c_e: &Mat3,
    omega_d: Vec3,
    omega_d_dot: Vec3,
) -> Mat3x9 {
    let wj = regressor_wj(omega_e, omega_s, c_e, omega_d, omega_d_dot);
    let mut w = Mat3x9::default();
    for i in 0..3 {
        w.m[i][..6].copy_from_slice(&wj.m[i]);
        w.m[i][6 + i] = 1.0;
    }
    w
}
