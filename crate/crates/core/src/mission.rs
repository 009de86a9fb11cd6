//! Two-pole pickup and stacking mission.
//!
//! The mission is a phase machine fed at the planner rate with the latest
//! state estimate. It owns the reference trajectory, the grip sequencer, and
//! the precision gates, and tells the caller when to freeze the position
//! integrator and when to swap the plant model between bare and loaded.
//!
//! Poles thread through the open center of the vehicle, so a pickup is a
//! vertical descent over the standing pole until the grip plane reaches the
//! pole middle, and a placement is a vertical descent that seats the pole
//! bottom on the stack before the wedge can let go.

use nalgebra::Vector3;
use thiserror::Error;

use crate::control::Setpoint;
use crate::dynamics::RigidState;
use crate::gripper::{GripEvent, GripSequencer, GripState, GripperError};
use crate::metrics::{pole_tip_position, radial_error};
use crate::num::{real, Real};
use crate::trajectory::{segment_duration, PolySegment, TrajectoryError};
use crate::vehicle::PayloadSpec;

#[derive(Debug, Error)]
pub enum MissionError {
    #[error("invalid mission parameter: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Gripper(#[from] GripperError),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
}

/// One pole standing in the field, waiting to be stacked.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PoleTask<T: Real> {
    /// World point where the pole base rests before pickup.
    pub stand_w: Vector3<T>,
    pub length: T,
    pub mass: T,
    pub radius: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MissionParams<T: Real> {
    /// Start and final landing position.
    pub home_w: Vector3<T>,
    /// Mount axis; `z` is the seat height of the empty mount.
    pub mount_w: Vector3<T>,
    pub poles: Vec<PoleTask<T>>,
    /// Average-speed budget for a leg, peak is 2.46 times higher.
    pub cruise_speed: T,
    pub lateral_accel: T,
    pub vertical_accel: T,
    pub min_leg_duration: T,
    /// Transit margin above the fully stacked mount.
    pub clearance: T,
    /// Grip plane relative to the pole middle, along body z.
    pub grip_plane_offset: T,
    /// Horizontal capture radius of the centering funnel.
    pub gate_radius: T,
    pub gate_dwell: T,
    pub gate_timeout: T,
    pub max_attempts: u32,
    /// One mechanical stage of the gripper.
    pub stage_duration: T,
    /// Extra hold after lock or open completes, also the integral thaw delay.
    pub settle_duration: T,
    /// Pole bottom must be this close to the seat to count as touched down.
    pub touchdown_threshold: T,
    /// Commanded gap between pole bottom and seat while the wedge opens.
    pub seat_clearance: T,
    pub yaw: T,
}

impl<T: Real> MissionParams<T> {
    pub fn validate(&self) -> Result<(), MissionError> {
        let bad = |msg: &str| Err(MissionError::InvalidParams(msg.into()));
        if self.poles.is_empty() {
            return bad("at least one pole is required");
        }
        for p in &self.poles {
            if !(p.length > T::zero()) || !(p.mass > T::zero()) || !(p.radius > T::zero()) {
                return bad("pole length, mass, and radius must be positive");
            }
        }
        if !(self.cruise_speed > T::zero())
            || !(self.lateral_accel > T::zero())
            || !(self.vertical_accel > T::zero())
            || !(self.min_leg_duration > T::zero())
        {
            return bad("speed and acceleration budgets must be positive");
        }
        if !(self.clearance > T::zero()) {
            return bad("clearance must be positive");
        }
        if !(self.gate_radius > T::zero())
            || !(self.gate_dwell > T::zero())
            || !(self.gate_timeout > self.gate_dwell)
        {
            return bad("gate needs positive radius and dwell shorter than timeout");
        }
        if self.max_attempts == 0 {
            return bad("at least one gate attempt is required");
        }
        if !(self.stage_duration > T::zero()) || !(self.settle_duration > T::zero()) {
            return bad("grip stage and settle durations must be positive");
        }
        if !(self.touchdown_threshold > self.seat_clearance) || !(self.seat_clearance > T::zero())
        {
            return bad("touchdown threshold must exceed the seat clearance");
        }
        Ok(())
    }

    /// Altitude for every lateral leg: above the finished stack by the
    /// clearance margin.
    pub fn transit_altitude(&self) -> T {
        let stack = self
            .poles
            .iter()
            .fold(self.mount_w.z, |acc, p| acc + p.length);
        stack + self.clearance
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MissionPhase {
    Takeoff,
    FlyOverPole,
    Descend,
    Grasp,
    Lift,
    Transport,
    Place,
    Release,
    Ascend,
    ReturnHome,
    Land,
}

impl MissionPhase {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Takeoff => "Takeoff",
            Self::FlyOverPole => "FlyOverPole",
            Self::Descend => "Descend",
            Self::Grasp => "Grasp",
            Self::Lift => "Lift",
            Self::Transport => "Transport",
            Self::Place => "Place",
            Self::Release => "Release",
            Self::Ascend => "Ascend",
            Self::ReturnHome => "ReturnHome",
            Self::Land => "Land",
        }
    }
}

/// Plant model swap the simulator must apply atomically with the gains.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ModelChange<T: Real> {
    Attach(PayloadSpec<T>),
    Detach,
}

#[derive(Clone, Debug, PartialEq)]
pub enum MissionOutcome {
    Success,
    Aborted {
        phase: &'static str,
        reason: String,
    },
}

/// Where the placed pole tip actually landed relative to the mount axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlacementRecord<T: Real> {
    pub pole_index: usize,
    pub time: T,
    pub tip_radial_error: T,
    pub body_radial_error: T,
}

/// Everything the control and simulation layers need from one planner tick.
#[derive(Clone, Debug)]
pub struct MissionCommand<T: Real> {
    pub setpoint: Setpoint<T>,
    pub integral_freeze: bool,
    pub model_change: Option<ModelChange<T>>,
    pub events: Vec<GripEvent<T>>,
    pub phase: MissionPhase,
    pub grip: GripState,
    pub finished: Option<MissionOutcome>,
}

/// Continuation after a climb back to transit altitude.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum AfterAscend {
    ApproachPole,
    ApproachMount,
    GoHome,
}

#[derive(Clone, Debug)]
pub struct MissionState<T: Real> {
    phase: MissionPhase,
    segment: PolySegment<T>,
    segment_start: T,
    phase_started: T,
    pole_index: usize,
    attempts: u32,
    after_ascend: AfterAscend,
    gate_entered: Option<T>,
    gate_below_since: Option<T>,
    sequencer: GripSequencer<T>,
    freeze_until: Option<T>,
    attach_sent: bool,
    seat_z: T,
    records: Vec<PlacementRecord<T>>,
    outcome: Option<MissionOutcome>,
}

impl<T: Real> MissionState<T> {
    pub fn new(params: &MissionParams<T>, start_w: Vector3<T>, t0: T) -> Result<Self, MissionError> {
        params.validate()?;
        let top = Vector3::new(start_w.x, start_w.y, params.transit_altitude());
        let segment = vertical_leg(params, start_w, top)?;
        Ok(Self {
            phase: MissionPhase::Takeoff,
            segment,
            segment_start: t0,
            phase_started: t0,
            pole_index: 0,
            attempts: 0,
            after_ascend: AfterAscend::ApproachPole,
            gate_entered: None,
            gate_below_since: None,
            sequencer: GripSequencer::new(params.stage_duration)?,
            freeze_until: None,
            attach_sent: false,
            seat_z: params.mount_w.z,
            records: Vec::new(),
            outcome: None,
        })
    }

    pub fn phase(&self) -> MissionPhase {
        self.phase
    }

    pub fn grip_state(&self) -> GripState {
        self.sequencer.state()
    }

    pub fn placements(&self) -> &[PlacementRecord<T>] {
        &self.records
    }

    pub fn outcome(&self) -> Option<&MissionOutcome> {
        self.outcome.as_ref()
    }

    fn pole(&self, params: &MissionParams<T>) -> PoleTask<T> {
        params.poles[self.pole_index.min(params.poles.len() - 1)]
    }

    /// Body altitude that puts the grip plane at the middle of the standing
    /// pole.
    fn grasp_altitude(&self, params: &MissionParams<T>) -> T {
        let p = self.pole(params);
        p.stand_w.z + p.length / real::<T>(2.0) - params.grip_plane_offset
    }

    /// Body altitude that holds the gripped pole bottom just above the seat.
    fn place_altitude(&self, params: &MissionParams<T>) -> T {
        let p = self.pole(params);
        self.seat_z + params.seat_clearance + p.length / real::<T>(2.0)
            - params.grip_plane_offset
    }

    fn enter(&mut self, phase: MissionPhase, segment: PolySegment<T>, t: T) {
        self.phase = phase;
        self.segment = segment;
        self.segment_start = t;
        self.phase_started = t;
        self.gate_entered = None;
        self.gate_below_since = None;
    }

    fn segment_done(&self, t: T) -> bool {
        t - self.segment_start >= self.segment.duration()
    }

    fn abort(&mut self, reason: String) {
        self.outcome = Some(MissionOutcome::Aborted {
            phase: self.phase.name(),
            reason,
        });
    }

    /// Runs the gate that demands `gate_dwell` of continuous centering within
    /// `gate_radius` of `target_xy`. Returns `Some(true)` on pass and
    /// `Some(false)` on timeout.
    fn gate(&mut self, params: &MissionParams<T>, t: T, error: T) -> Option<bool> {
        let entered = *self.gate_entered.get_or_insert(t);
        if error < params.gate_radius {
            let since = *self.gate_below_since.get_or_insert(t);
            if t - since >= params.gate_dwell {
                return Some(true);
            }
        } else {
            self.gate_below_since = None;
        }
        if t - entered >= params.gate_timeout {
            return Some(false);
        }
        None
    }

    /// Climb from the current reference pose back to transit altitude, used
    /// both for gate retries and for the regular leg changes.
    fn climb_segment(&self, params: &MissionParams<T>) -> Result<PolySegment<T>, MissionError> {
        let from = self.segment.end_position();
        let to = Vector3::new(from.x, from.y, params.transit_altitude());
        vertical_leg(params, from, to)
    }

    fn retry_or_abort(&mut self, params: &MissionParams<T>, t: T, what: &str) {
        self.attempts += 1;
        if self.attempts >= params.max_attempts {
            self.abort(format!(
                "{what} gate timed out on attempt {} of {}",
                self.attempts, params.max_attempts
            ));
            return;
        }
        let after = match self.phase {
            MissionPhase::Place => AfterAscend::ApproachMount,
            _ => AfterAscend::ApproachPole,
        };
        match self.climb_segment(params) {
            Ok(seg) => {
                self.after_ascend = after;
                self.enter(MissionPhase::Ascend, seg, t);
            }
            Err(e) => self.abort(format!("retry climb failed: {e}")),
        }
    }

    /// Advances the mission one planner tick.
    ///
    /// `measured` is the noisy estimate the gates act on; `truth` is only
    /// read at the instant a placement is recorded, because the record states
    /// where the pole really landed.
    pub fn step(
        &mut self,
        params: &MissionParams<T>,
        t: T,
        measured: &RigidState<T>,
        truth: &RigidState<T>,
    ) -> MissionCommand<T> {
        self.sequencer.update(t);
        let mut events = Vec::new();
        let mut model_change = None;

        if self.outcome.is_none() {
            match self.phase {
                MissionPhase::Takeoff | MissionPhase::Ascend => {
                    if self.segment_done(t) {
                        let continuation = if self.phase == MissionPhase::Takeoff {
                            AfterAscend::ApproachPole
                        } else {
                            self.after_ascend
                        };
                        let from = self.segment.end_position();
                        let result = match continuation {
                            AfterAscend::ApproachPole => {
                                let p = self.pole(params);
                                let to = Vector3::new(p.stand_w.x, p.stand_w.y, from.z);
                                lateral_leg(params, from, to)
                                    .map(|s| (MissionPhase::FlyOverPole, s))
                            }
                            AfterAscend::ApproachMount => {
                                let to =
                                    Vector3::new(params.mount_w.x, params.mount_w.y, from.z);
                                lateral_leg(params, from, to)
                                    .map(|s| (MissionPhase::Transport, s))
                            }
                            AfterAscend::GoHome => {
                                let to =
                                    Vector3::new(params.home_w.x, params.home_w.y, from.z);
                                lateral_leg(params, from, to)
                                    .map(|s| (MissionPhase::ReturnHome, s))
                            }
                        };
                        match result {
                            Ok((phase, seg)) => self.enter(phase, seg, t),
                            Err(e) => self.abort(format!("leg planning failed: {e}")),
                        }
                    }
                }
                MissionPhase::FlyOverPole => {
                    if self.segment_done(t) {
                        let from = self.segment.end_position();
                        let to = Vector3::new(from.x, from.y, self.grasp_altitude(params));
                        match vertical_leg(params, from, to) {
                            Ok(seg) => self.enter(MissionPhase::Descend, seg, t),
                            Err(e) => self.abort(format!("leg planning failed: {e}")),
                        }
                    }
                }
                MissionPhase::Descend => {
                    if self.segment_done(t) {
                        let p = self.pole(params);
                        let error = radial_error(&measured.position_w, &p.stand_w);
                        match self.gate(params, t, error) {
                            Some(true) => match self.sequencer.begin_grasp(t) {
                                Ok(scheduled) => {
                                    events.extend_from_slice(&scheduled);
                                    self.attempts = 0;
                                    let two = real::<T>(2.0);
                                    let dwell =
                                        two * params.stage_duration + params.settle_duration;
                                    self.freeze_until = Some(t + dwell);
                                    self.attach_sent = false;
                                    let pose = self.segment.end_position();
                                    match PolySegment::hold(pose, params.yaw, dwell) {
                                        Ok(seg) => self.enter(MissionPhase::Grasp, seg, t),
                                        Err(e) => {
                                            self.abort(format!("grasp hold failed: {e}"))
                                        }
                                    }
                                }
                                Err(e) => self.abort(format!("grasp sequencing failed: {e}")),
                            },
                            Some(false) => self.retry_or_abort(params, t, "centering"),
                            None => {}
                        }
                    }
                }
                MissionPhase::Grasp => {
                    if self.sequencer.is_locked() && !self.attach_sent {
                        let p = self.pole(params);
                        let offset =
                            Vector3::new(T::zero(), T::zero(), params.grip_plane_offset);
                        match PayloadSpec::tube(p.mass, p.length, p.radius, offset) {
                            Ok(spec) => {
                                model_change = Some(ModelChange::Attach(spec));
                                self.attach_sent = true;
                            }
                            Err(e) => self.abort(format!("payload composition failed: {e}")),
                        }
                    }
                    if self.attach_sent && self.segment_done(t) {
                        let from = self.segment.end_position();
                        let to = Vector3::new(from.x, from.y, params.transit_altitude());
                        match vertical_leg(params, from, to) {
                            Ok(seg) => self.enter(MissionPhase::Lift, seg, t),
                            Err(e) => self.abort(format!("leg planning failed: {e}")),
                        }
                    }
                }
                MissionPhase::Lift => {
                    if self.segment_done(t) {
                        let from = self.segment.end_position();
                        let to = Vector3::new(params.mount_w.x, params.mount_w.y, from.z);
                        match lateral_leg(params, from, to) {
                            Ok(seg) => self.enter(MissionPhase::Transport, seg, t),
                            Err(e) => self.abort(format!("leg planning failed: {e}")),
                        }
                    }
                }
                MissionPhase::Transport => {
                    if self.segment_done(t) {
                        let from = self.segment.end_position();
                        let to = Vector3::new(from.x, from.y, self.place_altitude(params));
                        match vertical_leg(params, from, to) {
                            Ok(seg) => self.enter(MissionPhase::Place, seg, t),
                            Err(e) => self.abort(format!("leg planning failed: {e}")),
                        }
                    }
                }
                MissionPhase::Place => {
                    if self.segment_done(t) {
                        let p = self.pole(params);
                        let half = p.length / real::<T>(2.0);
                        let error = radial_error(&measured.position_w, &params.mount_w);
                        let bottom =
                            measured.position_w.z + params.grip_plane_offset - half;
                        let touched =
                            bottom - self.seat_z <= params.touchdown_threshold;
                        let centered = if touched { error } else { params.gate_radius };
                        match self.gate(params, t, centered) {
                            Some(true) => {
                                let tip =
                                    pole_tip_position(truth, params.grip_plane_offset, half);
                                self.records.push(PlacementRecord {
                                    pole_index: self.pole_index,
                                    time: t,
                                    tip_radial_error: radial_error(&tip, &params.mount_w),
                                    body_radial_error: radial_error(
                                        &truth.position_w,
                                        &params.mount_w,
                                    ),
                                });
                                model_change = Some(ModelChange::Detach);
                                match self.sequencer.begin_release(t, true) {
                                    Ok(scheduled) => {
                                        events.extend_from_slice(&scheduled);
                                        self.attempts = 0;
                                        let two = real::<T>(2.0);
                                        let dwell = two * params.stage_duration
                                            + params.settle_duration;
                                        self.freeze_until = Some(t + dwell);
                                        let pose = self.segment.end_position();
                                        match PolySegment::hold(pose, params.yaw, dwell) {
                                            Ok(seg) => {
                                                self.enter(MissionPhase::Release, seg, t)
                                            }
                                            Err(e) => self
                                                .abort(format!("release hold failed: {e}")),
                                        }
                                    }
                                    Err(e) => {
                                        self.abort(format!("release sequencing failed: {e}"))
                                    }
                                }
                            }
                            Some(false) => self.retry_or_abort(params, t, "placement"),
                            None => {}
                        }
                    }
                }
                MissionPhase::Release => {
                    if self.segment_done(t) && self.sequencer.state() == GripState::Open {
                        self.seat_z += self.pole(params).length;
                        self.pole_index += 1;
                        self.attempts = 0;
                        self.after_ascend = if self.pole_index < params.poles.len() {
                            AfterAscend::ApproachPole
                        } else {
                            AfterAscend::GoHome
                        };
                        match self.climb_segment(params) {
                            Ok(seg) => self.enter(MissionPhase::Ascend, seg, t),
                            Err(e) => self.abort(format!("leg planning failed: {e}")),
                        }
                    }
                }
                MissionPhase::ReturnHome => {
                    if self.segment_done(t) {
                        let from = self.segment.end_position();
                        match vertical_leg(params, from, params.home_w) {
                            Ok(seg) => self.enter(MissionPhase::Land, seg, t),
                            Err(e) => self.abort(format!("leg planning failed: {e}")),
                        }
                    }
                }
                MissionPhase::Land => {
                    if t - self.segment_start
                        >= self.segment.duration() + params.settle_duration
                        && self.outcome.is_none()
                    {
                        self.outcome = Some(MissionOutcome::Success);
                    }
                }
            }
        }

        let setpoint = self.segment.sample(t - self.segment_start);
        let integral_freeze = self.freeze_until.map_or(false, |until| t < until);
        MissionCommand {
            setpoint,
            integral_freeze,
            model_change,
            events,
            phase: self.phase,
            grip: self.sequencer.state(),
            finished: self.outcome.clone(),
        }
    }
}

fn lateral_leg<T: Real>(
    params: &MissionParams<T>,
    from: Vector3<T>,
    to: Vector3<T>,
) -> Result<PolySegment<T>, MissionError> {
    let duration = segment_duration(
        (to - from).norm(),
        params.cruise_speed,
        params.lateral_accel,
        params.min_leg_duration,
    );
    Ok(PolySegment::fit(from, to, params.yaw, params.yaw, duration)?)
}

fn vertical_leg<T: Real>(
    params: &MissionParams<T>,
    from: Vector3<T>,
    to: Vector3<T>,
) -> Result<PolySegment<T>, MissionError> {
    let duration = segment_duration(
        (to - from).norm(),
        params.cruise_speed,
        params.vertical_accel,
        params.min_leg_duration,
    );
    Ok(PolySegment::fit(from, to, params.yaw, params.yaw, duration)?)
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;

    /// Two short poles, close targets, the same proportions the demo run
    /// uses, scaled down so unit tests stay fast.
    pub fn reference_mission() -> MissionParams<f64> {
        MissionParams {
            home_w: Vector3::new(0.0, 0.0, 0.15),
            mount_w: Vector3::new(0.5, -1.9, 0.30),
            poles: vec![
                PoleTask {
                    stand_w: Vector3::new(2.0, 1.2, 0.0),
                    length: 1.0,
                    mass: 2.5,
                    radius: 0.06,
                },
                PoleTask {
                    stand_w: Vector3::new(-1.8, 1.6, 0.0),
                    length: 1.0,
                    mass: 2.5,
                    radius: 0.06,
                },
            ],
            cruise_speed: 2.5,
            lateral_accel: 0.35,
            vertical_accel: 1.5,
            min_leg_duration: 1.5,
            clearance: 0.8,
            grip_plane_offset: -0.05,
            gate_radius: 0.05,
            gate_dwell: 1.0,
            gate_timeout: 12.0,
            max_attempts: 3,
            stage_duration: 2.0,
            settle_duration: 1.0,
            touchdown_threshold: 0.01,
            seat_clearance: 0.005,
            yaw: 0.0,
        }
    }
}
