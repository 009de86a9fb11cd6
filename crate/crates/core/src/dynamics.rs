//! Rigid-body flight dynamics in the body frame, integrated with RK4, plus
//! the first-order motor response and battery voltage droop.

use nalgebra::{Matrix3, SVector, Vector3};
use thiserror::Error;

use crate::num::{real, Real};
use crate::so3::{hat, polar_orthonormalize, RotationMatrix, So3Error};
use crate::vehicle::{VehicleParams, PROPELLER_COUNT};

#[derive(Debug, Error, PartialEq)]
pub enum DynamicsError {
    #[error("attitude left the rotation group: {0}")]
    Attitude(#[from] So3Error),
    #[error("inertia is not invertible")]
    SingularInertia,
}

/// Body force and torque acting at the body origin.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Wrench<T: Real> {
    pub force_b: Vector3<T>,
    pub torque_b: Vector3<T>,
}

impl<T: Real> Wrench<T> {
    pub fn zero() -> Self {
        Self {
            force_b: Vector3::zeros(),
            torque_b: Vector3::zeros(),
        }
    }

    pub fn new(force_b: Vector3<T>, torque_b: Vector3<T>) -> Self {
        Self { force_b, torque_b }
    }

    pub fn from_vector(u: &SVector<T, 6>) -> Self {
        Self {
            force_b: Vector3::new(u[0], u[1], u[2]),
            torque_b: Vector3::new(u[3], u[4], u[5]),
        }
    }

    pub fn to_vector(&self) -> SVector<T, 6> {
        SVector::<T, 6>::from_iterator(self.force_b.iter().chain(self.torque_b.iter()).copied())
    }
}

/// Rigid-body state: world position, body-to-world attitude, and body-frame
/// linear and angular velocity.
#[derive(Clone, Debug, PartialEq)]
pub struct RigidState<T: Real> {
    pub position_w: Vector3<T>,
    pub attitude: RotationMatrix<T>,
    pub velocity_b: Vector3<T>,
    pub angular_velocity_b: Vector3<T>,
}

impl<T: Real> RigidState<T> {
    /// At rest at the given world position, level attitude.
    pub fn at_rest(position_w: Vector3<T>) -> Self {
        Self {
            position_w,
            attitude: RotationMatrix::identity(),
            velocity_b: Vector3::zeros(),
            angular_velocity_b: Vector3::zeros(),
        }
    }

    /// World-frame velocity `R v_b`.
    pub fn velocity_w(&self) -> Vector3<T> {
        self.attitude.matrix() * self.velocity_b
    }

    /// Largest absolute entry across position and velocities, for divergence
    /// detection.
    pub fn max_abs(&self) -> T {
        let mut m = T::zero();
        for v in [
            &self.position_w,
            &self.velocity_b,
            &self.angular_velocity_b,
        ] {
            m = m.max(v.amax());
        }
        m
    }

    pub fn is_finite(&self) -> bool {
        self.position_w.iter().all(|x| x.is_finite())
            && self.attitude.matrix().iter().all(|x| x.is_finite())
            && self.velocity_b.iter().all(|x| x.is_finite())
            && self.angular_velocity_b.iter().all(|x| x.is_finite())
    }
}

/// Raw time derivative of [`RigidState`], attitude represented as the full
/// matrix derivative so the integrator can treat the state as a flat vector.
#[derive(Clone, Debug)]
pub struct RigidDerivative<T: Real> {
    pub position_dot_w: Vector3<T>,
    pub attitude_dot: Matrix3<T>,
    pub velocity_dot_b: Vector3<T>,
    pub angular_velocity_dot_b: Vector3<T>,
}

/// Newton-Euler dynamics about the body origin:
///
/// ```text
/// m v'    = f - omega x (m v) - m R^T g_w
/// J omega' = tau - omega x (J omega) - x_com x f
/// p'      = R v
/// R'      = R hat(omega)
/// ```
///
/// The `x_com x f` term is the moment the offset weight and thrust pair
/// produce about the origin when the center of mass is displaced.
pub fn newton_euler_derivative<T: Real>(
    state: &RigidState<T>,
    params: &VehicleParams<T>,
    wrench: &Wrench<T>,
) -> Result<RigidDerivative<T>, DynamicsError> {
    let r = state.attitude.matrix();
    let omega = state.angular_velocity_b;
    let v = state.velocity_b;

    let gravity_b = r.transpose() * params.gravity_w;
    let velocity_dot_b =
        wrench.force_b / params.mass - omega.cross(&v) - gravity_b;

    let j_omega = params.inertia_b * omega;
    let torque_net =
        wrench.torque_b - omega.cross(&j_omega) - params.com_offset_b.cross(&wrench.force_b);
    let chol = nalgebra::Cholesky::new(params.inertia_b.symmetric_part())
        .ok_or(DynamicsError::SingularInertia)?;
    let angular_velocity_dot_b = chol.solve(&torque_net);

    Ok(RigidDerivative {
        position_dot_w: r * v,
        attitude_dot: r * hat(omega),
        velocity_dot_b,
        angular_velocity_dot_b,
    })
}

/// One fourth-order Runge-Kutta step under a wrench held constant over the
/// step. The attitude is integrated as a raw matrix and snapped back onto the
/// rotation group afterwards, which preserves the integrator order because
/// the off-group drift of a single step is below the truncation error.
pub fn rk4_step<T: Real>(
    state: &RigidState<T>,
    params: &VehicleParams<T>,
    wrench: &Wrench<T>,
    dt: T,
) -> Result<RigidState<T>, DynamicsError> {
    let half = real::<T>(0.5);
    let sixth = real::<T>(1.0 / 6.0);
    let two = real::<T>(2.0);

    let advance = |k: &RigidDerivative<T>, h: T| -> RigidState<T> {
        RigidState {
            position_w: state.position_w + k.position_dot_w * h,
            attitude: RotationMatrix::from_matrix_unchecked(
                state.attitude.matrix() + k.attitude_dot * h,
            ),
            velocity_b: state.velocity_b + k.velocity_dot_b * h,
            angular_velocity_b: state.angular_velocity_b + k.angular_velocity_dot_b * h,
        }
    };

    let k1 = newton_euler_derivative(state, params, wrench)?;
    let k2 = newton_euler_derivative(&advance(&k1, dt * half), params, wrench)?;
    let k3 = newton_euler_derivative(&advance(&k2, dt * half), params, wrench)?;
    let k4 = newton_euler_derivative(&advance(&k3, dt), params, wrench)?;

    let combine3 = |a: &Vector3<T>, b: &Vector3<T>, c: &Vector3<T>, d: &Vector3<T>| {
        (*a + *b * two + *c * two + *d) * sixth
    };
    let attitude_raw = state.attitude.matrix()
        + (k1.attitude_dot + k2.attitude_dot * two + k3.attitude_dot * two + k4.attitude_dot)
            * (sixth * dt);

    Ok(RigidState {
        position_w: state.position_w
            + combine3(
                &k1.position_dot_w,
                &k2.position_dot_w,
                &k3.position_dot_w,
                &k4.position_dot_w,
            ) * dt,
        attitude: polar_orthonormalize(&attitude_raw)?,
        velocity_b: state.velocity_b
            + combine3(
                &k1.velocity_dot_b,
                &k2.velocity_dot_b,
                &k3.velocity_dot_b,
                &k4.velocity_dot_b,
            ) * dt,
        angular_velocity_b: state.angular_velocity_b
            + combine3(
                &k1.angular_velocity_dot_b,
                &k2.angular_velocity_dot_b,
                &k3.angular_velocity_dot_b,
                &k4.angular_velocity_dot_b,
            ) * dt,
    })
}

/// Rotor speed states in rad/s, one per propeller, mains first.
#[derive(Clone, Debug, PartialEq)]
pub struct MotorBank<T: Real> {
    pub speeds: SVector<T, PROPELLER_COUNT>,
}

impl<T: Real> MotorBank<T> {
    /// Bank spinning at the given squared speeds.
    pub fn at_speeds_sq(speeds_sq: &SVector<T, PROPELLER_COUNT>) -> Self {
        Self {
            speeds: speeds_sq.map(|w| w.max(T::zero()).sqrt()),
        }
    }

    pub fn speeds_sq(&self) -> SVector<T, PROPELLER_COUNT> {
        self.speeds.map(|s| s * s)
    }

    /// First-order response toward `target_speeds` using the exact discrete
    /// update `s += (1 - exp(-dt/tau)) (s_t - s)`, then clamped to each
    /// propeller's speed range.
    pub fn step(
        &mut self,
        target_speeds: &SVector<T, PROPELLER_COUNT>,
        params: &VehicleParams<T>,
        dt: T,
    ) {
        for (i, p) in params.propellers.iter().enumerate() {
            let alpha = T::one() - (-dt / p.motor_time_constant).exp();
            let mut s = self.speeds[i] + (target_speeds[i] - self.speeds[i]) * alpha;
            let lo = p.speed_sq_min.sqrt();
            let hi = p.speed_sq_max.sqrt();
            s = s.clamp(lo, hi);
            self.speeds[i] = s;
        }
    }
}

/// Supply voltage model: linear droop from nominal, clamped at a floor below
/// which the pack is considered sagged flat.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BatteryParams<T: Real> {
    /// Fresh pack voltage, V.
    pub voltage_nominal: T,
    /// Lowest modeled voltage, V.
    pub voltage_floor: T,
    /// Droop rate, V/s.
    pub sag_rate: T,
}

impl<T: Real> BatteryParams<T> {
    pub fn validate(&self) -> Result<(), String> {
        if self.voltage_nominal <= T::zero() {
            return Err("nominal voltage must be positive".into());
        }
        if self.voltage_floor <= T::zero() || self.voltage_floor > self.voltage_nominal {
            return Err("need 0 < voltage_floor <= voltage_nominal".into());
        }
        if self.sag_rate < T::zero() {
            return Err("sag rate must be non-negative".into());
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BatteryState<T: Real> {
    pub voltage: T,
}

impl<T: Real> BatteryState<T> {
    pub fn fresh(params: &BatteryParams<T>) -> Self {
        Self {
            voltage: params.voltage_nominal,
        }
    }

    pub fn step(&mut self, params: &BatteryParams<T>, dt: T) {
        self.voltage = (self.voltage - params.sag_rate * dt).max(params.voltage_floor);
    }
}
