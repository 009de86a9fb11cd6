//! Rotation algebra: skew maps, the exponential map, and a checked rotation
//! matrix type used by every other module.

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

use crate::num::{real, Real};

/// A matrix counts as orthonormal when `‖RᵀR − I‖_F` stays below this.
pub const ORTHONORMALITY_TOL: f64 = 1e-9;

/// `vee` rejects inputs whose symmetric part exceeds this Frobenius norm.
pub const VEE_ASYMMETRY_TOL: f64 = 1e-6;

/// Rotation angles below this are treated as zero by [`rotation_exp`].
pub const EXP_ZERO_ANGLE: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum So3Error {
    #[error("matrix is not orthonormal: ‖RᵀR − I‖_F = {defect}")]
    NotOrthonormal { defect: f64 },
    #[error("matrix has determinant {det}, not a proper rotation")]
    NotProperRotation { det: f64 },
    #[error("symmetric part of skew input has Frobenius norm {asymmetry}")]
    AsymmetricInput { asymmetry: f64 },
    #[error("matrix is singular, polar factor undefined")]
    Singular,
}

/// Skew-symmetric (cross-product) matrix of `v`: `hat(v) w = v × w`.
#[inline]
pub fn hat<T: Real>(v: Vector3<T>) -> Matrix3<T> {
    let z = T::zero();
    Matrix3::new(z, -v.z, v.y, v.z, z, -v.x, -v.y, v.x, z)
}

/// Inverse of [`hat`]. The symmetric part of `m` must be negligible; anything
/// above [`VEE_ASYMMETRY_TOL`] is rejected rather than silently discarded.
pub fn vee<T: Real>(m: &Matrix3<T>) -> Result<Vector3<T>, So3Error> {
    let half = real::<T>(0.5);
    let sym = (m + m.transpose()) * half;
    let asymmetry = sym.norm();
    if asymmetry > real(VEE_ASYMMETRY_TOL) {
        return Err(So3Error::AsymmetricInput {
            asymmetry: asymmetry.to_f64().unwrap_or(f64::NAN),
        });
    }
    let anti = (m - m.transpose()) * half;
    Ok(Vector3::new(anti[(2, 1)], anti[(0, 2)], anti[(1, 0)]))
}

/// A proper rotation matrix (world-from-body unless stated otherwise).
///
/// Construction through [`RotationMatrix::from_matrix`] enforces orthonormality
/// and positive determinant; the unchecked path exists for code that has just
/// re-orthonormalized and for compositions of already-valid rotations.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RotationMatrix<T: Real>(Matrix3<T>);

impl<T: Real> RotationMatrix<T> {
    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    /// Validates `m` as a proper rotation.
    pub fn from_matrix(m: Matrix3<T>) -> Result<Self, So3Error> {
        let defect = (m.transpose() * m - Matrix3::identity()).norm();
        if defect > real(ORTHONORMALITY_TOL) {
            return Err(So3Error::NotOrthonormal {
                defect: defect.to_f64().unwrap_or(f64::NAN),
            });
        }
        let det = m.determinant();
        if det <= T::zero() {
            return Err(So3Error::NotProperRotation {
                det: det.to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(Self(m))
    }

    /// Wraps without validation. Caller guarantees the invariant.
    pub fn from_matrix_unchecked(m: Matrix3<T>) -> Self {
        Self(m)
    }

    pub fn matrix(&self) -> &Matrix3<T> {
        &self.0
    }

    pub fn into_inner(self) -> Matrix3<T> {
        self.0
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    /// `‖RᵀR − I‖_F`, the orthonormality defect.
    pub fn orthonormality_defect(&self) -> T {
        (self.0.transpose() * self.0 - Matrix3::identity()).norm()
    }

    /// Rotation about the world z axis.
    pub fn rot_z(angle: T) -> Self {
        let (s, c) = angle.sin_cos();
        let (o, z) = (T::one(), T::zero());
        Self(Matrix3::new(c, -s, z, s, c, z, z, z, o))
    }

    /// Rotation about the world x axis.
    pub fn rot_x(angle: T) -> Self {
        let (s, c) = angle.sin_cos();
        let (o, z) = (T::one(), T::zero());
        Self(Matrix3::new(o, z, z, z, c, -s, z, s, c))
    }

    /// Rotation about the world y axis.
    pub fn rot_y(angle: T) -> Self {
        let (s, c) = angle.sin_cos();
        let (o, z) = (T::one(), T::zero());
        Self(Matrix3::new(c, z, s, z, o, z, -s, z, c))
    }
}

impl<T: Real> core::ops::Mul for RotationMatrix<T> {
    type Output = RotationMatrix<T>;
    fn mul(self, rhs: Self) -> Self {
        RotationMatrix(self.0 * rhs.0)
    }
}

impl<T: Real> core::ops::Mul<Vector3<T>> for RotationMatrix<T> {
    type Output = Vector3<T>;
    fn mul(self, rhs: Vector3<T>) -> Vector3<T> {
        self.0 * rhs
    }
}

/// Rodrigues' formula: the rotation advancing by `omega_dt` (axis times angle).
///
/// Angles below [`EXP_ZERO_ANGLE`] return the identity; small angles use series
/// expansions of `sinθ/θ` and `(1−cosθ)/θ²` to avoid cancellation.
pub fn rotation_exp<T: Real>(omega_dt: Vector3<T>) -> RotationMatrix<T> {
    let theta_sq = omega_dt.norm_squared();
    let theta = theta_sq.sqrt();
    if theta < real(EXP_ZERO_ANGLE) {
        return RotationMatrix::identity();
    }
    let (a, b) = if theta < real(1e-4) {
        // sinθ/θ = 1 − θ²/6 + θ⁴/120…,  (1−cosθ)/θ² = ½ − θ²/24 + θ⁴/720…
        let sixth = real::<T>(1.0 / 6.0);
        let half = real::<T>(0.5);
        (
            T::one() - theta_sq * sixth,
            half - theta_sq * real(1.0 / 24.0),
        )
    } else {
        ((theta.sin()) / theta, (T::one() - theta.cos()) / theta_sq)
    };
    let k = hat(omega_dt);
    RotationMatrix(Matrix3::identity() + k * a + k * k * b)
}

/// Nearest rotation to `m` in the Frobenius sense (the polar factor), via the
/// Newton iteration `Q ← ½(Q + Q⁻ᵀ)`, which converges quadratically for any
/// full-rank `m` with positive determinant.
pub fn polar_orthonormalize<T: Real>(m: &Matrix3<T>) -> Result<RotationMatrix<T>, So3Error> {
    let det = m.determinant();
    if det.abs() < real(1e-12) {
        return Err(So3Error::Singular);
    }
    if det < T::zero() {
        return Err(So3Error::NotProperRotation {
            det: det.to_f64().unwrap_or(f64::NAN),
        });
    }
    let half = real::<T>(0.5);
    let tol = real::<T>(1e-12);
    let mut q = *m;
    for _ in 0..24 {
        let defect = (q.transpose() * q - Matrix3::identity()).norm();
        if defect <= tol {
            return Ok(RotationMatrix(q));
        }
        let inv_t = q.try_inverse().ok_or(So3Error::Singular)?.transpose();
        q = (q + inv_t) * half;
    }
    // Converged-enough fallback: accept if within the type invariant.
    RotationMatrix::from_matrix(q)
}

/// Intrinsic z-y-x (yaw, pitch, roll) angles of a rotation, returned as
/// `(roll, pitch, yaw)`. Pitch is clamped at the gimbal singularity.
pub fn euler_zyx<T: Real>(r: &RotationMatrix<T>) -> (T, T, T) {
    let m = r.matrix();
    let sin_pitch = (-m[(2, 0)]).clamp(-T::one(), T::one());
    let roll = m[(2, 1)].atan2(m[(2, 2)]);
    let pitch = sin_pitch.asin();
    let yaw = m[(1, 0)].atan2(m[(0, 0)]);
    (roll, pitch, yaw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn hat_of_one_two_three() {
        let m = hat(Vector3::new(1.0, 2.0, 3.0));
        let expected = Matrix3::new(0.0, -3.0, 2.0, 3.0, 0.0, -1.0, -2.0, 1.0, 0.0);
        assert_eq!(m, expected);
    }

    #[test]
    fn hat_matches_cross_product() {
        let v = Vector3::new(0.3, -1.2, 2.5);
        let w = Vector3::new(-0.7, 0.4, 1.1);
        assert_relative_eq!(hat(v) * w, v.cross(&w), epsilon = 1e-15);
    }

    #[test]
    fn vee_rejects_asymmetric_input() {
        let mut m = hat(Vector3::new(1.0, 2.0, 3.0));
        m[(0, 1)] += 1e-3;
        assert!(matches!(vee(&m), Err(So3Error::AsymmetricInput { .. })));
    }

    #[test]
    fn vee_accepts_asymmetry_below_tolerance() {
        let mut m = hat(Vector3::new(1.0, 2.0, 3.0));
        m[(0, 1)] += 1e-8;
        let v = vee(&m).unwrap();
        assert_relative_eq!(v, Vector3::new(1.0, 2.0, 3.0), epsilon = 1e-7);
    }

    #[test]
    fn exp_of_zero_is_identity() {
        let r = rotation_exp(Vector3::new(0.0, 0.0, 0.0));
        assert_eq!(*r.matrix(), Matrix3::identity());
        let r = rotation_exp(Vector3::new(1e-13, -1e-13, 1e-14));
        assert_eq!(*r.matrix(), Matrix3::identity());
    }

    #[test]
    fn exp_quarter_turn_about_z() {
        let r = rotation_exp(Vector3::new(0.0, 0.0, std::f64::consts::FRAC_PI_2));
        let expected = Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
        assert_relative_eq!(*r.matrix(), expected, epsilon = 1e-12);
    }

    #[test]
    fn exp_matches_axis_angle_constructors() {
        for angle in [-2.1, -0.4, 0.3, 1.7] {
            assert_relative_eq!(
                *rotation_exp(Vector3::new(0.0, 0.0, angle)).matrix(),
                *RotationMatrix::rot_z(angle).matrix(),
                epsilon = 1e-14
            );
            assert_relative_eq!(
                *rotation_exp(Vector3::new(angle, 0.0, 0.0)).matrix(),
                *RotationMatrix::rot_x(angle).matrix(),
                epsilon = 1e-14
            );
        }
    }

    #[test]
    fn small_angle_series_is_continuous() {
        // Straddle the series switchover with nearly identical angles; any
        // jump between the Taylor and closed-form branches would dwarf the
        // true difference between the two rotations.
        let axis = Vector3::new(1.0, -2.0, 2.0).normalize();
        let below = rotation_exp(axis * (1.0e-4 * (1.0 - 1e-9)));
        let above = rotation_exp(axis * (1.0e-4 * (1.0 + 1e-9)));
        let gap = (below.matrix() - above.matrix()).abs().max();
        assert!(gap < 1e-12, "series gap {gap:e}");
    }

    #[test]
    fn from_matrix_rejects_scaled_and_reflected() {
        let scaled = Matrix3::identity() * 1.001;
        assert!(matches!(
            RotationMatrix::from_matrix(scaled),
            Err(So3Error::NotOrthonormal { .. })
        ));
        let reflected = Matrix3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -1.0);
        assert!(matches!(
            RotationMatrix::from_matrix(reflected),
            Err(So3Error::NotProperRotation { .. })
        ));
    }

    #[test]
    fn polar_restores_drifted_rotation() {
        let r = rotation_exp(Vector3::new(0.4, -0.8, 1.3));
        let drifted = r.matrix() + Matrix3::new(1e-6, 2e-6, 0.0, 0.0, -1e-6, 1e-6, 2e-6, 0.0, 1e-6);
        let fixed = polar_orthonormalize(&drifted).unwrap();
        assert!(fixed.orthonormality_defect() <= 1e-12);
        assert!((fixed.matrix() - r.matrix()).norm() < 1e-5);
    }

    #[test]
    fn polar_rejects_reflection() {
        let reflected = Matrix3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -1.0);
        assert!(polar_orthonormalize(&reflected).is_err());
    }

    #[test]
    fn generic_scalar_instantiates_at_f32() {
        let r = rotation_exp(Vector3::new(0.0f32, 0.0, std::f32::consts::FRAC_PI_2));
        assert!((r.matrix()[(1, 0)] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn euler_angles_recover_factored_rotation() {
        let (roll, pitch, yaw) = (0.1, -0.2, 0.7);
        let r = RotationMatrix::rot_z(yaw) * RotationMatrix::rot_y(pitch) * RotationMatrix::rot_x(roll);
        let (got_roll, got_pitch, got_yaw) = euler_zyx(&r);
        assert_relative_eq!(got_roll, roll, epsilon = 1e-12);
        assert_relative_eq!(got_pitch, pitch, epsilon = 1e-12);
        assert_relative_eq!(got_yaw, yaw, epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn vee_inverts_hat(x in -10.0f64..10.0, y in -10.0f64..10.0, z in -10.0f64..10.0) {
            let v = Vector3::new(x, y, z);
            let back = vee(&hat(v)).unwrap();
            prop_assert!((back - v).norm() <= 1e-12 * v.norm().max(1.0));
        }

        #[test]
        fn hat_is_antisymmetric(x in -10.0f64..10.0, y in -10.0f64..10.0, z in -10.0f64..10.0) {
            let m = hat(Vector3::new(x, y, z));
            prop_assert!((m + m.transpose()).norm() == 0.0);
        }

        #[test]
        fn exp_lands_on_the_group(x in -3.0f64..3.0, y in -3.0f64..3.0, z in -3.0f64..3.0) {
            let r = rotation_exp(Vector3::new(x, y, z));
            prop_assert!(r.orthonormality_defect() <= 1e-12);
            prop_assert!((r.matrix().determinant() - 1.0).abs() <= 1e-12);
        }
    }
}
