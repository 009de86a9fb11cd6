//! Full-pose geometric controller on SE(3): position PID with velocity and
//! acceleration feedforward, attitude PD on the rotation group, and the
//! feedforward terms that cancel the body-frame coupling of the dynamics.

use nalgebra::Vector3;
use thiserror::Error;

use crate::dynamics::{RigidState, Wrench};
use crate::num::{real, Real};
use crate::so3::{vee, RotationMatrix};
use crate::vehicle::VehicleParams;

/// Per-axis bound on the accumulated position integral, m s. Sized so the
/// integral can trim a steady force of `m ki` newtons per axis without being
/// able to wind up past it.
pub const INTEGRAL_LIMIT: f64 = 1.0;

#[derive(Debug, Error, PartialEq)]
pub enum ControlError {
    #[error("gain {name} must be positive, got {value}")]
    NonPositiveGain { name: &'static str, value: f64 },
}

/// Controller gains. Position, velocity, and integral act on mass-normalized
/// acceleration; attitude and rate act on inertia-normalized angular
/// acceleration, so stability margins stay put when inertia changes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ControlGains<T: Real> {
    pub position: T,
    pub velocity: T,
    pub integral: T,
    pub attitude: T,
    pub rate: T,
}

impl<T: Real> ControlGains<T> {
    pub fn validate(&self) -> Result<(), ControlError> {
        let checks = [
            ("position", self.position),
            ("velocity", self.velocity),
            ("attitude", self.attitude),
            ("rate", self.rate),
        ];
        for (name, value) in checks {
            if value <= T::zero() {
                return Err(ControlError::NonPositiveGain {
                    name,
                    value: value.to_f64().unwrap_or(f64::NAN),
                });
            }
        }
        if self.integral < T::zero() {
            return Err(ControlError::NonPositiveGain {
                name: "integral",
                value: self.integral.to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(())
    }

    /// Gains after a rigid payload changes the mass. The translational loop
    /// commands accelerations, so extra mass softens the same gain set; this
    /// keeps the closed-loop force stiffness constant instead.
    pub fn scaled_for_mass(&self, design_mass: T, actual_mass: T) -> Self {
        let ratio = design_mass / actual_mass;
        Self {
            position: self.position * ratio,
            velocity: self.velocity * ratio,
            integral: self.integral,
            attitude: self.attitude,
            rate: self.rate,
        }
    }
}

/// Pose and first-derivative targets for one control tick.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Setpoint<T: Real> {
    pub position_w: Vector3<T>,
    pub velocity_w: Vector3<T>,
    pub acceleration_w: Vector3<T>,
    pub yaw: T,
    pub yaw_rate: T,
}

impl<T: Real> Setpoint<T> {
    pub fn hold(position_w: Vector3<T>, yaw: T) -> Self {
        Self {
            position_w,
            velocity_w: Vector3::zeros(),
            acceleration_w: Vector3::zeros(),
            yaw,
            yaw_rate: T::zero(),
        }
    }

    pub fn desired_attitude(&self) -> RotationMatrix<T> {
        RotationMatrix::rot_z(self.yaw)
    }
}

/// Tracking errors of one control tick.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PoseErrors<T: Real> {
    /// World position error `p - p_des`, m.
    pub position: Vector3<T>,
    /// World velocity error, m/s.
    pub velocity: Vector3<T>,
    /// Attitude error on the group, `1/2 (R_des^T R - R^T R_des)` unhatted.
    pub attitude: Vector3<T>,
    /// Body rate error against the transported desired rate, rad/s.
    pub rate: Vector3<T>,
}

pub fn compute_errors<T: Real>(state: &RigidState<T>, setpoint: &Setpoint<T>) -> PoseErrors<T> {
    let r = state.attitude.matrix();
    let r_des = setpoint.desired_attitude();
    let m = r_des.matrix().transpose() * r;
    let skew = (m - m.transpose()) * real::<T>(0.5);
    let attitude = vee(&skew).expect("antisymmetric by construction");
    let omega_des = Vector3::new(T::zero(), T::zero(), setpoint.yaw_rate);
    PoseErrors {
        position: state.position_w - setpoint.position_w,
        velocity: state.velocity_w() - setpoint.velocity_w,
        attitude,
        rate: state.angular_velocity_b - r.transpose() * (r_des.matrix() * omega_des),
    }
}

/// Integral channel with a hold flag for grip transients, when contact forces
/// make position error a lie the integrator must not learn from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ControllerState<T: Real> {
    pub integral: Vector3<T>,
    pub frozen: bool,
}

impl<T: Real> Default for ControllerState<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> ControllerState<T> {
    pub fn new() -> Self {
        Self {
            integral: Vector3::zeros(),
            frozen: false,
        }
    }

    /// Accumulates position error unless frozen, clamped per axis.
    pub fn update_integral(&mut self, position_error: &Vector3<T>, dt: T) {
        if self.frozen {
            return;
        }
        let limit = real::<T>(INTEGRAL_LIMIT);
        self.integral = (self.integral + position_error * dt).map(|x| x.clamp(-limit, limit));
    }
}

/// Body wrench realizing the commanded accelerations:
///
/// ```text
/// f   = m (R^T (a_cmd + g_w) + omega x v_b)
/// tau = J (-k_R e_R - k_w e_w) + omega x (J omega) + x_com x f
/// ```
///
/// with `a_cmd = -k_p e_p - k_v e_v - k_i e_i + a_des`. The `omega x v_b` and
/// `x_com x f` terms cancel the matching terms of the plant, so the loop
/// behaves like independent double integrators near hover.
pub fn compute_wrench<T: Real>(
    params: &VehicleParams<T>,
    gains: &ControlGains<T>,
    state: &RigidState<T>,
    setpoint: &Setpoint<T>,
    errors: &PoseErrors<T>,
    integral: &Vector3<T>,
) -> Wrench<T> {
    let r = state.attitude.matrix();
    let omega = state.angular_velocity_b;

    let a_cmd = -errors.position * gains.position
        - errors.velocity * gains.velocity
        - integral * gains.integral
        + setpoint.acceleration_w;
    let force_b = (r.transpose() * (a_cmd + params.gravity_w)
        + omega.cross(&state.velocity_b))
        * params.mass;

    let ang_cmd = -errors.attitude * gains.attitude - errors.rate * gains.rate;
    let torque_b = params.inertia_b * ang_cmd
        + omega.cross(&(params.inertia_b * omega))
        + params.com_offset_b.cross(&force_b);

    Wrench::new(force_b, torque_b)
}


#[cfg(test)]
mod tests {
    use super::test_support::reference_gains;
    use super::*;
    use crate::dynamics::newton_euler_derivative;
    use crate::so3::rotation_exp;
    use crate::vehicle::test_support::reference_vehicle;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    fn hover_setpoint() -> Setpoint<f64> {
        Setpoint::hold(Vector3::new(0.0, 0.0, 1.0), 0.0)
    }

    #[test]
    fn hover_force_balances_weight() {
        let mut params = reference_vehicle();
        params.com_offset_b = Vector3::zeros();
        let state = RigidState::at_rest(Vector3::new(0.0, 0.0, 1.0));
        let sp = hover_setpoint();
        let e = compute_errors(&state, &sp);
        let w = compute_wrench(&params, &reference_gains(), &state, &sp, &e, &Vector3::zeros());
        assert_relative_eq!(w.force_b.z, 81.0306, epsilon = 1e-9);
        assert_relative_eq!(w.force_b.x, 0.0, epsilon = 1e-12);
        assert!(w.torque_b.norm() < 1e-12);
    }

    #[test]
    fn com_offset_feedforward_torque() {
        let mut params = reference_vehicle();
        params.com_offset_b = Vector3::new(0.01, 0.0, 0.0);
        let state = RigidState::at_rest(Vector3::new(0.0, 0.0, 1.0));
        let sp = hover_setpoint();
        let e = compute_errors(&state, &sp);
        let w = compute_wrench(&params, &reference_gains(), &state, &sp, &e, &Vector3::zeros());
        assert_relative_eq!(w.torque_b.y, -0.810306, epsilon = 1e-9);
        assert_relative_eq!(w.torque_b.x, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn position_error_pulls_back() {
        let mut params = reference_vehicle();
        params.com_offset_b = Vector3::zeros();
        let mut gains = reference_gains();
        gains.position = 5.0;
        let state = RigidState::at_rest(Vector3::new(0.1, 0.0, 1.0));
        let sp = hover_setpoint();
        let e = compute_errors(&state, &sp);
        assert_relative_eq!(e.position.x, 0.1, epsilon = 1e-15);
        let w = compute_wrench(&params, &gains, &state, &sp, &e, &Vector3::zeros());
        assert_relative_eq!(w.force_b.x, -4.13, epsilon = 1e-9);
    }

    #[test]
    fn attitude_error_for_pure_yaw_offset() {
        let mut state = RigidState::at_rest(Vector3::zeros());
        state.attitude = RotationMatrix::rot_z(0.2);
        let sp = Setpoint::hold(Vector3::zeros(), 0.0);
        let e = compute_errors(&state, &sp);
        assert_relative_eq!(e.attitude.z, 0.2f64.sin(), epsilon = 1e-12);
        assert_relative_eq!(e.attitude.x, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn rate_error_transports_desired_rate() {
        let state = RigidState::at_rest(Vector3::zeros());
        let mut sp = Setpoint::hold(Vector3::zeros(), 0.0);
        sp.yaw_rate = 0.3;
        let e = compute_errors(&state, &sp);
        assert_relative_eq!(e.rate.z, -0.3, epsilon = 1e-15);
    }

    #[test]
    fn integral_clamps_and_freezes() {
        let mut cs = ControllerState::<f64>::new();
        let big = Vector3::new(2.0, 0.0, -2.0);
        for _ in 0..1000 {
            cs.update_integral(&big, 1e-2);
        }
        assert_relative_eq!(cs.integral.x, INTEGRAL_LIMIT, epsilon = 1e-12);
        assert_relative_eq!(cs.integral.z, -INTEGRAL_LIMIT, epsilon = 1e-12);

        cs.frozen = true;
        let before = cs.integral;
        cs.update_integral(&big, 1e-2);
        assert_eq!(cs.integral, before);
    }

    #[test]
    fn mass_scaling_keeps_force_stiffness() {
        let gains = reference_gains();
        let scaled = gains.scaled_for_mass(8.26, 11.26);
        assert_relative_eq!(scaled.position * 11.26, gains.position * 8.26, epsilon = 1e-12);
        assert_relative_eq!(scaled.position, 4.401421, epsilon = 1e-4);
        assert_relative_eq!(scaled.velocity, 3.301066, epsilon = 1e-4);
        assert_eq!(scaled.attitude, gains.attitude);
        assert_eq!(scaled.rate, gains.rate);
    }

    #[test]
    fn gain_validation_rejects_nonpositive() {
        let mut g = reference_gains();
        g.rate = 0.0;
        assert!(g.validate().is_err());
        let mut g = reference_gains();
        g.integral = 0.0;
        assert!(g.validate().is_ok());
        g.integral = -0.1;
        assert!(g.validate().is_err());
    }

    /// Closed-loop vector field around hover: state is
    /// `[p, theta, v_b, omega, e_i]` with `R = exp(hat(theta))`. At the
    /// equilibrium `theta = omega = 0` the rotation-vector rate equals omega
    /// exactly, so the Jacobian of this field is the true linearization.
    fn closed_loop_field(params: &VehicleParams<f64>, x: &[f64; 15]) -> [f64; 15] {
        let gains = reference_gains();
        let sp = Setpoint::hold(Vector3::new(0.0, 0.0, 1.0), 0.0);
        let state = RigidState {
            position_w: Vector3::new(x[0], x[1], x[2]),
            attitude: rotation_exp(Vector3::new(x[3], x[4], x[5])),
            velocity_b: Vector3::new(x[6], x[7], x[8]),
            angular_velocity_b: Vector3::new(x[9], x[10], x[11]),
        };
        let integral = Vector3::new(x[12], x[13], x[14]);
        let e = compute_errors(&state, &sp);
        let w = compute_wrench(params, &gains, &state, &sp, &e, &integral);
        let d = newton_euler_derivative(&state, params, &w).unwrap();
        let mut out = [0.0; 15];
        out[..3].copy_from_slice(d.position_dot_w.as_slice());
        out[3..6].copy_from_slice(state.angular_velocity_b.as_slice());
        out[6..9].copy_from_slice(d.velocity_dot_b.as_slice());
        out[9..12].copy_from_slice(d.angular_velocity_dot_b.as_slice());
        out[12..15].copy_from_slice(e.position.as_slice());
        out
    }

    #[test]
    fn hover_linearization_is_strictly_stable() {
        let mut params = reference_vehicle();
        params.com_offset_b = Vector3::new(0.005, -0.003, -0.02);
        let x0 = {
            let mut x = [0.0; 15];
            x[2] = 1.0;
            x
        };
        let h = 1e-6;
        let mut jac = DMatrix::<f64>::zeros(15, 15);
        for j in 0..15 {
            let mut plus = x0;
            let mut minus = x0;
            plus[j] += h;
            minus[j] -= h;
            let fp = closed_loop_field(&params, &plus);
            let fm = closed_loop_field(&params, &minus);
            for i in 0..15 {
                jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        let eig = jac.complex_eigenvalues();
        let max_re = eig.iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max);
        assert!(max_re < -1e-3, "slowest closed-loop pole at {max_re}");
    }

    #[test]
    fn loaded_gain_set_is_also_stable() {
        let base = reference_vehicle();
        let load = crate::vehicle::PayloadSpec::tube(3.0, 2.0, 0.06, Vector3::new(0.0, 0.0, -0.4))
            .unwrap();
        let loaded = crate::vehicle::compose_payload(&base, &load);
        // Reuse the hover Jacobian with the loaded plant and scaled gains by
        // checking a time-domain decay instead: perturb and watch the errors
        // shrink under the scaled gain set.
        let gains = reference_gains().scaled_for_mass(base.mass, loaded.mass);
        let sp = Setpoint::hold(Vector3::new(0.0, 0.0, 1.0), 0.0);
        let mut cs = ControllerState::new();
        let mut state = RigidState::at_rest(Vector3::new(0.15, -0.1, 1.1));
        state.attitude = rotation_exp(Vector3::new(0.05, -0.04, 0.1));
        let dt = 1e-3;
        // The heavier plant with mass-scaled gains has its slowest pole near
        // -0.15 rad/s, so 40 s leaves a small but nonzero position residual.
        for step in 0..40_000 {
            if step % 5 == 0 {
                let e = compute_errors(&state, &sp);
                cs.update_integral(&e.position, 5.0 * dt);
            }
            let e = compute_errors(&state, &sp);
            let w = compute_wrench(&loaded, &gains, &state, &sp, &e, &cs.integral);
            state = crate::dynamics::rk4_step(&state, &loaded, &w, dt).unwrap();
        }
        let e = compute_errors(&state, &sp);
        assert!(e.position.norm() < 5e-3, "residual {}", e.position.norm());
        assert!(e.attitude.norm() < 1e-4);
    }
}
