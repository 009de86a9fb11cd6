//! Point-to-point reference trajectories.
//!
//! Each leg is a straight line in space traversed by a degree-9 smoothstep,
//! the unique ninth-order polynomial with zero velocity, acceleration, jerk
//! and snap at both ends. Smooth snap keeps the attitude reference continuous
//! through the differential flatness of the position loop, so legs can be
//! chained without torque spikes at the joints.

use nalgebra::Vector3;
use thiserror::Error;

use crate::control::Setpoint;
use crate::num::{real, Real};

/// Peak of `S'(s)` over a unit leg; scales distance over duration into the
/// true top speed of the profile.
pub const PEAK_PROFILE_SPEED: f64 = 2.4609375;

/// Peak of `|S''(s)|` over a unit leg (attained near `s = 0.31`); scales
/// `distance / duration^2` into the true top acceleration.
pub const PEAK_PROFILE_ACCEL: f64 = 9.372;

#[derive(Debug, Error, PartialEq)]
pub enum TrajectoryError {
    #[error("segment duration must be positive and finite, got {0}")]
    InvalidDuration(f64),
    #[error("segment endpoint is not finite")]
    NonFiniteEndpoint,
}

/// Normalized profile value and its first two derivatives at `s` in [0, 1].
///
/// `S(s) = 126 s^5 - 420 s^6 + 540 s^7 - 315 s^8 + 70 s^9`, with the compact
/// derivative forms `S' = 630 s^4 (1-s)^4` and
/// `S'' = 2520 s^3 (1-s)^3 (1-2s)`.
pub fn smoothstep<T: Real>(s: T) -> (T, T, T) {
    let s2 = s * s;
    let s3 = s2 * s;
    let s4 = s2 * s2;
    let s5 = s4 * s;
    let value = s5
        * (real::<T>(126.0)
            + s * (real::<T>(-420.0)
                + s * (real::<T>(540.0) + s * (real::<T>(-315.0) + s * real::<T>(70.0)))));
    let oms = T::one() - s;
    let slope = real::<T>(630.0) * s4 * oms * oms * oms * oms;
    let curve = real::<T>(2520.0) * s3 * oms * oms * oms * (T::one() - real::<T>(2.0) * s);
    (value, slope, curve)
}

/// Duration that keeps a leg of the given length within an average-speed
/// budget and a peak-acceleration budget, but never below `min_duration`.
pub fn segment_duration<T: Real>(
    distance: T,
    average_speed: T,
    peak_accel: T,
    min_duration: T,
) -> T {
    let by_speed = distance / average_speed;
    let by_accel = (real::<T>(PEAK_PROFILE_ACCEL) * distance / peak_accel).sqrt();
    by_speed.max(by_accel).max(min_duration)
}

/// One straight-line leg with smoothstep timing on both translation and yaw.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PolySegment<T: Real> {
    start_w: Vector3<T>,
    end_w: Vector3<T>,
    start_yaw: T,
    yaw_span: T,
    duration: T,
}

/// Wraps an angle difference into `(-pi, pi]` so yaw always takes the short
/// way around.
pub fn wrap_angle<T: Real>(angle: T) -> T {
    let two_pi = real::<T>(std::f64::consts::TAU);
    let mut a = angle % two_pi;
    if a > real::<T>(std::f64::consts::PI) {
        a -= two_pi;
    } else if a <= real::<T>(-std::f64::consts::PI) {
        a += two_pi;
    }
    a
}

impl<T: Real> PolySegment<T> {
    pub fn fit(
        start_w: Vector3<T>,
        end_w: Vector3<T>,
        start_yaw: T,
        end_yaw: T,
        duration: T,
    ) -> Result<Self, TrajectoryError> {
        if !(duration > T::zero()) || !duration.is_finite() {
            return Err(TrajectoryError::InvalidDuration(
                duration.to_f64().unwrap_or(f64::NAN),
            ));
        }
        let finite = |v: &Vector3<T>| v.iter().all(|x| x.is_finite());
        if !finite(&start_w) || !finite(&end_w) || !start_yaw.is_finite() || !end_yaw.is_finite() {
            return Err(TrajectoryError::NonFiniteEndpoint);
        }
        Ok(Self {
            start_w,
            end_w,
            start_yaw,
            yaw_span: wrap_angle(end_yaw - start_yaw),
            duration,
        })
    }

    /// Leg that parks at one pose, for dwell phases.
    pub fn hold(position_w: Vector3<T>, yaw: T, duration: T) -> Result<Self, TrajectoryError> {
        Self::fit(position_w, position_w, yaw, yaw, duration)
    }

    pub fn duration(&self) -> T {
        self.duration
    }

    pub fn end_position(&self) -> Vector3<T> {
        self.end_w
    }

    pub fn end_yaw(&self) -> T {
        wrap_angle(self.start_yaw + self.yaw_span)
    }

    /// Reference pose at `t` seconds into the leg. Time clamps to the ends,
    /// so sampling past the duration parks at the goal with zero rates.
    pub fn sample(&self, t: T) -> Setpoint<T> {
        let s = (t / self.duration).clamp(T::zero(), T::one());
        let (value, slope, curve) = smoothstep(s);
        let span = self.end_w - self.start_w;
        let inv_t = T::one() / self.duration;
        Setpoint {
            position_w: self.start_w + span * value,
            velocity_w: span * (slope * inv_t),
            acceleration_w: span * (curve * inv_t * inv_t),
            yaw: wrap_angle(self.start_yaw + self.yaw_span * value),
            yaw_rate: self.yaw_span * slope * inv_t,
        }
    }
}
