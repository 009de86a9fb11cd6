//! Precision metrics for hover and stacking runs.
//!
//! The quantities of interest are horizontal: a pole seats correctly when its
//! lower tip meets the mount axis, so errors are measured radially in the
//! world xy plane, both at the vehicle and projected down the pole.

use nalgebra::Vector3;

use crate::dynamics::RigidState;
use crate::num::{real, Real};

/// Horizontal distance between a position and a target, ignoring altitude.
pub fn radial_error<T: Real>(position_w: &Vector3<T>, target_w: &Vector3<T>) -> T {
    let dx = position_w.x - target_w.x;
    let dy = position_w.y - target_w.y;
    (dx * dx + dy * dy).sqrt()
}

/// First-order displacement of a pole tip hanging `half_length` below the
/// body, combining translation error with the lever arm of attitude error.
pub fn tip_error<T: Real>(
    position_error: &Vector3<T>,
    attitude_error: &Vector3<T>,
    half_length: T,
) -> Vector3<T> {
    // hat(e_R) * e_z = (e_y, -e_x, 0); the tip hangs below, so it swings
    // opposite to that lever.
    let lever = Vector3::new(
        attitude_error.y * half_length,
        -attitude_error.x * half_length,
        T::zero(),
    );
    position_error - lever
}

/// Exact world position of the lower tip of a gripped pole whose center sits
/// `grip_offset` along body z from the vehicle origin.
pub fn pole_tip_position<T: Real>(
    state: &RigidState<T>,
    grip_offset: T,
    half_length: T,
) -> Vector3<T> {
    let tip_b = Vector3::new(T::zero(), T::zero(), grip_offset - half_length);
    state.position_w + state.attitude.matrix() * tip_b
}

/// Running mean and extreme of one scalar signal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampleStats<T: Real> {
    pub count: u64,
    pub sum: T,
    pub max: T,
}

impl<T: Real> Default for SampleStats<T> {
    fn default() -> Self {
        Self {
            count: 0,
            sum: T::zero(),
            max: T::zero(),
        }
    }
}

impl<T: Real> SampleStats<T> {
    pub fn record(&mut self, value: T) {
        self.count += 1;
        self.sum += value;
        self.max = self.max.max(value);
    }

    pub fn mean(&self) -> T {
        if self.count == 0 {
            T::zero()
        } else {
            self.sum / real::<T>(self.count as f64)
        }
    }
}

/// Precision summary over one contiguous stretch of a run, usually a mission
/// phase instance.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseAggregate<T: Real> {
    pub label: String,
    pub start_time: T,
    pub end_time: T,
    pub radial: SampleStats<T>,
    pub tip_radial: SampleStats<T>,
    pub roll_abs: SampleStats<T>,
    pub pitch_abs: SampleStats<T>,
}

/// Splits a run into labeled stretches and aggregates each one.
#[derive(Clone, Debug, Default)]
pub struct MetricsCollector<T: Real> {
    phases: Vec<PhaseAggregate<T>>,
}

impl<T: Real> MetricsCollector<T> {
    pub fn new() -> Self {
        Self { phases: Vec::new() }
    }

    /// Feeds one sample; opens a new aggregate whenever the label changes.
    pub fn record(
        &mut self,
        label: &str,
        time: T,
        radial: T,
        tip_radial: T,
        roll: T,
        pitch: T,
    ) {
        let open_new = self.phases.last().map_or(true, |p| p.label != label);
        if open_new {
            self.phases.push(PhaseAggregate {
                label: label.to_owned(),
                start_time: time,
                end_time: time,
                radial: SampleStats::default(),
                tip_radial: SampleStats::default(),
                roll_abs: SampleStats::default(),
                pitch_abs: SampleStats::default(),
            });
        }
        let phase = self.phases.last_mut().expect("just ensured non-empty");
        phase.end_time = time;
        phase.radial.record(radial);
        phase.tip_radial.record(tip_radial);
        phase.roll_abs.record(roll.abs());
        phase.pitch_abs.record(pitch.abs());
    }

    pub fn phases(&self) -> &[PhaseAggregate<T>] {
        &self.phases
    }

    /// Aggregate over every sample regardless of phase.
    pub fn overall(&self) -> PhaseAggregate<T> {
        let mut total = PhaseAggregate {
            label: "overall".to_owned(),
            start_time: self.phases.first().map_or(T::zero(), |p| p.start_time),
            end_time: self.phases.last().map_or(T::zero(), |p| p.end_time),
            radial: SampleStats::default(),
            tip_radial: SampleStats::default(),
            roll_abs: SampleStats::default(),
            pitch_abs: SampleStats::default(),
        };
        for p in &self.phases {
            for (into, from) in [
                (&mut total.radial, &p.radial),
                (&mut total.tip_radial, &p.tip_radial),
                (&mut total.roll_abs, &p.roll_abs),
                (&mut total.pitch_abs, &p.pitch_abs),
            ] {
                into.count += from.count;
                into.sum += from.sum;
                into.max = into.max.max(from.max);
            }
        }
        total
    }
}
