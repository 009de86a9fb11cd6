//! Closed-loop simulation: plant, battery, estimator noise, controller,
//! allocator, and mission planner wired together at fixed rates.
//!
//! All three loops tick off one integer counter, so a run is a pure function
//! of the scenario text. The estimator draws the same number of noise
//! variates every control tick whether noise is enabled or not, which keeps
//! runs with different noise settings sample-aligned under the same seed.

use std::io::{self, Write};

use nalgebra::{Rotation3, SVector, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::allocation::{build_problem, ActiveSetQp, AllocationError};
use crate::control::{
    compute_errors, compute_wrench, ControlError, ControllerState, Setpoint,
};
use crate::dynamics::{
    rk4_step, BatteryState, DynamicsError, MotorBank, RigidState, Wrench,
};
use crate::metrics::{pole_tip_position, radial_error, MetricsCollector, PhaseAggregate};
use crate::mission::{
    MissionError, MissionOutcome, MissionParams, MissionState, ModelChange, PlacementRecord,
};
use crate::report::{RunOutcome, SummaryReport};
use crate::runlog::{RunLogError, RunLogRow, RunLogWriter};
use crate::scenario::{Scenario, ScenarioError};
use crate::so3::{euler_zyx, rotation_exp, RotationMatrix};
use crate::vehicle::{
    compose_payload, AllocationMatrix, PayloadSpec, VehicleError, PROPELLER_COUNT,
};
use crate::voltage::{plant_speed_fraction, training_sweep, VoltageError, VoltageMap};

/// Any state component beyond this magnitude ends the run as diverged.
pub const DIVERGENCE_LIMIT: f64 = 1.0e6;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Vehicle(#[from] VehicleError),
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error(transparent)]
    Mission(#[from] MissionError),
    #[error(transparent)]
    Allocation(#[from] AllocationError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Voltage(#[from] VoltageError),
    #[error(transparent)]
    RunLog(#[from] RunLogError),
}

/// Something worth remembering about a run: phase entries, grip hardware
/// stages, model swaps.
#[derive(Clone, Debug, PartialEq)]
pub struct SimEvent {
    pub time: f64,
    pub label: String,
}

/// One plant-model swap, recorded with the gain set that became active in
/// the same control tick.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelSwitch {
    pub time: f64,
    pub mass_before: f64,
    pub mass_after: f64,
    /// Position gain active immediately after the swap.
    pub position_gain: f64,
}

#[derive(Clone, Debug)]
pub struct SimResult {
    pub outcome: RunOutcome,
    /// Simulated seconds at termination.
    pub sim_time: f64,
    pub placements: Vec<PlacementRecord<f64>>,
    pub phases: Vec<PhaseAggregate<f64>>,
    pub overall: PhaseAggregate<f64>,
    pub final_voltage: f64,
    pub config_hash: String,
    pub events: Vec<SimEvent>,
    pub model_switches: Vec<ModelSwitch>,
    /// Largest integral movement observed while the freeze was active;
    /// anything above zero means the freeze leaked.
    pub frozen_integral_drift: f64,
    pub max_slack_norm: f64,
}

impl SimResult {
    pub fn report(&self) -> SummaryReport {
        SummaryReport {
            outcome: self.outcome.clone(),
            config_hash: self.config_hash.clone(),
            sim_time: self.sim_time,
            placements: self.placements.clone(),
            phases: self.phases.clone(),
            overall: self.overall.clone(),
            final_voltage: self.final_voltage,
        }
    }
}

/// Pole currently in the gripper, as far as the metrics are concerned.
#[derive(Clone, Copy, Debug)]
struct AttachedPole {
    half_length: f64,
    grip_offset: f64,
}

/// What the planner hands the inner loops each planner tick.
struct PlannerOut {
    setpoint: Setpoint<f64>,
    freeze: bool,
    model_change: Option<ModelChange<f64>>,
    events: Vec<crate::gripper::GripEvent<f64>>,
    phase: &'static str,
    finished: Option<RunOutcome>,
}

/// Reference source: a full mission, or a bare position hold with an
/// optional setpoint step partway through.
enum Director {
    Mission {
        mission: MissionState<f64>,
        params: MissionParams<f64>,
    },
    Hold {
        base: Setpoint<f64>,
        stepped: Option<(f64, Setpoint<f64>)>,
    },
}

impl Director {
    fn tick(&mut self, t: f64, measured: &RigidState<f64>, truth: &RigidState<f64>) -> PlannerOut {
        match self {
            Self::Mission { mission, params } => {
                let cmd = mission.step(params, t, measured, truth);
                PlannerOut {
                    setpoint: cmd.setpoint,
                    freeze: cmd.integral_freeze,
                    model_change: cmd.model_change,
                    events: cmd.events,
                    phase: cmd.phase.name(),
                    finished: cmd.finished.map(|o| match o {
                        MissionOutcome::Success => RunOutcome::Success,
                        MissionOutcome::Aborted { phase, reason } => RunOutcome::Aborted {
                            phase: phase.to_owned(),
                            reason,
                        },
                    }),
                }
            }
            Self::Hold { base, stepped } => {
                let setpoint = match stepped {
                    Some((at, to)) if t >= *at => *to,
                    _ => *base,
                };
                PlannerOut {
                    setpoint,
                    freeze: false,
                    model_change: None,
                    events: Vec::new(),
                    phase: "Hold",
                    finished: None,
                }
            }
        }
    }

    fn placements(&self) -> Vec<PlacementRecord<f64>> {
        match self {
            Self::Mission { mission, .. } => mission.placements().to_vec(),
            Self::Hold { .. } => Vec::new(),
        }
    }

    /// Geometry of the pole being grasped right now: the one after the last
    /// recorded placement.
    fn grasped_pole(&self) -> Option<AttachedPole> {
        match self {
            Self::Mission { mission, params } => {
                params.poles.get(mission.placements().len()).map(|p| AttachedPole {
                    half_length: 0.5 * p.length,
                    grip_offset: params.grip_plane_offset,
                })
            }
            Self::Hold { .. } => None,
        }
    }
}

/// Runs a validated scenario to completion, optionally streaming the run log.
pub fn run_scenario<W: Write>(
    scenario: &Scenario,
    mut log: Option<&mut RunLogWriter<W>>,
) -> Result<SimResult, SimError> {
    scenario.validate()?;
    let config_hash = scenario.config_hash()?;

    let params_bare = scenario.vehicle_params()?;
    let gains_design = scenario.control_gains();
    gains_design.validate()?;
    let battery_params = scenario.battery_params();
    let weights = scenario.allocation_weights();

    // The allocation geometry and speed boxes depend only on the propellers,
    // which a payload never touches, so the QP is built once and survives
    // every model swap.
    let matrix = AllocationMatrix::from_params(&params_bare)?;
    let problem = build_problem(&matrix, &params_bare, &weights)?;
    let mut solver = ActiveSetQp::new();

    let rates = &scenario.rates;
    let dt_phys = 1.0 / f64::from(rates.physics_hz);
    let dt_ctrl = 1.0 / f64::from(rates.control_hz);
    let phys_per_ctrl = u64::from(rates.physics_hz / rates.control_hz);
    let ctrl_per_plan = u64::from(rates.control_hz / rates.planner_hz);

    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let (sigma_p, sigma_r) = if scenario.noise.enabled {
        (
            scenario.noise.position_sigma,
            scenario.noise.attitude_sigma_deg.to_radians(),
        )
    } else {
        (0.0, 0.0)
    };

    let map = if scenario.compensation.voltage {
        Some(VoltageMap::fit(&training_sweep())?)
    } else {
        None
    };
    let omega_max: SVector<f64, PROPELLER_COUNT> =
        SVector::from_fn(|i, _| params_bare.propellers[i].speed_sq_max.sqrt());

    let mut params_cur = params_bare.clone();
    let mut gains_cur = gains_design;
    let mut attached: Option<AttachedPole> = None;

    let (mut director, limit, start) = if let Some(m) = scenario.mission_params() {
        let cfg = scenario.mission.as_ref().expect("mission params imply config");
        let start = m.home_w;
        let mission = MissionState::new(&m, start, 0.0)?;
        (
            Director::Mission { mission, params: m },
            cfg.time_limit,
            start,
        )
    } else {
        let h = scenario.hold.as_ref().expect("validated scenarios have mission or hold");
        let base_pos = Vector3::from_column_slice(&h.position);
        let base = Setpoint::hold(base_pos, h.yaw);
        let stepped = match (h.step_to, h.step_at) {
            (Some(to), Some(at)) => {
                Some((at, Setpoint::hold(Vector3::from_column_slice(&to), h.yaw)))
            }
            _ => None,
        };
        if let Some(p) = &h.pole {
            let spec = PayloadSpec::tube(
                p.mass,
                p.length,
                p.radius,
                Vector3::new(0.0, 0.0, h.grip_plane_offset),
            )?;
            params_cur = compose_payload(&params_bare, &spec);
            gains_cur = gains_design.scaled_for_mass(params_bare.mass, params_cur.mass);
            attached = Some(AttachedPole {
                half_length: 0.5 * p.length,
                grip_offset: h.grip_plane_offset,
            });
        }
        (Director::Hold { base, stepped }, h.duration, base_pos)
    };

    let mut state = RigidState::at_rest(start);
    let mut motors = MotorBank::at_speeds_sq(&SVector::zeros());
    let mut battery = BatteryState::fresh(&battery_params);
    let mut ctrl = ControllerState::new();
    let mut collector = MetricsCollector::new();
    let mut events: Vec<SimEvent> = Vec::new();
    let mut model_switches: Vec<ModelSwitch> = Vec::new();

    let mut setpoint = Setpoint::hold(start, 0.0);
    let mut phase: &'static str = "";
    let mut freeze = false;
    let mut omega_targets = SVector::<f64, PROPELLER_COUNT>::zeros();
    let mut freeze_anchor: Option<Vector3<f64>> = None;
    let mut frozen_drift = 0.0_f64;
    let mut max_slack = 0.0_f64;
    let mut slack_force = Vector3::<f64>::zeros();
    let mut outcome: Option<RunOutcome> = None;
    let mut sim_time = 0.0_f64;

    let total_ticks = (limit * f64::from(rates.physics_hz)).ceil() as u64;

    'run: for tick in 0..total_ticks {
        let t = tick as f64 * dt_phys;

        if tick % phys_per_ctrl == 0 {
            // Estimator sample. Drawn unconditionally to keep the stream
            // aligned across noise settings.
            let mut draw = || -> f64 { rng.sample(StandardNormal) };
            let eta_p = Vector3::new(draw(), draw(), draw()) * sigma_p;
            let eta_r = Vector3::new(draw(), draw(), draw()) * sigma_r;
            let measured = RigidState {
                position_w: state.position_w + eta_p,
                attitude: RotationMatrix::from_matrix_unchecked(
                    state.attitude.matrix() * rotation_exp(eta_r).matrix(),
                ),
                velocity_b: state.velocity_b,
                angular_velocity_b: state.angular_velocity_b,
            };

            let ctrl_tick = tick / phys_per_ctrl;
            if ctrl_tick % ctrl_per_plan == 0 {
                let out = director.tick(t, &measured, &state);
                setpoint = out.setpoint;
                freeze = out.freeze;
                if phase != out.phase {
                    phase = out.phase;
                    events.push(SimEvent {
                        time: t,
                        label: format!("phase {phase}"),
                    });
                }
                for e in &out.events {
                    events.push(SimEvent {
                        time: e.time,
                        label: format!("grip {:?}", e.kind),
                    });
                }
                if let Some(change) = out.model_change {
                    // The plant parameters and the gain set move together in
                    // the same tick; the controller never sees one without
                    // the other.
                    let mass_before = params_cur.mass;
                    match change {
                        ModelChange::Attach(spec) => {
                            attached = director.grasped_pole();
                            params_cur = compose_payload(&params_bare, &spec);
                            events.push(SimEvent {
                                time: t,
                                label: "model attach".to_owned(),
                            });
                        }
                        ModelChange::Detach => {
                            attached = None;
                            params_cur = params_bare.clone();
                            events.push(SimEvent {
                                time: t,
                                label: "model detach".to_owned(),
                            });
                        }
                    }
                    gains_cur =
                        gains_design.scaled_for_mass(params_bare.mass, params_cur.mass);
                    model_switches.push(ModelSwitch {
                        time: t,
                        mass_before,
                        mass_after: params_cur.mass,
                        position_gain: gains_cur.position,
                    });
                }
                if let Some(done) = out.finished {
                    outcome = Some(done);
                    sim_time = t;
                    break 'run;
                }
            }

            ctrl.frozen = freeze;
            if freeze {
                let anchor = *freeze_anchor.get_or_insert(ctrl.integral);
                frozen_drift = frozen_drift.max((ctrl.integral - anchor).norm());
            } else {
                freeze_anchor = None;
            }

            let errors = compute_errors(&measured, &setpoint);
            ctrl.update_integral(&errors.position, dt_ctrl);
            let mut wrench =
                compute_wrench(&params_cur, &gains_cur, &measured, &setpoint, &errors, &ctrl.integral);
            // The com-offset feedforward inside the wrench cancels a plant
            // torque proportional to the force the rotors actually make.
            // Whatever the allocator handed to slack last tick never reached
            // the plant, so its share of the cancellation must come back out
            // or a saturated lateral command pitches the vehicle over.
            wrench.torque_b -= params_cur.com_offset_b.cross(&slack_force);
            let requested = wrench.to_vector();

            let solution = solver.solve(&problem, &requested)?;
            slack_force = Vector3::new(solution.slack[0], solution.slack[1], solution.slack[2]);
            let slack_norm = solution.slack.norm();
            max_slack = max_slack.max(slack_norm);

            // Command chain: desired speed fraction, optional inversion of
            // the voltage droop, then the plant's actual steady-state speed
            // for the motor lag to chase.
            let v_frac = battery.voltage / battery_params.voltage_nominal;
            for i in 0..PROPELLER_COUNT {
                let desired = solution.speeds_sq[i].max(0.0).sqrt() / omega_max[i];
                let cmd = match &map {
                    Some(m) => m.command_for(desired, v_frac),
                    None => desired.min(1.0),
                };
                omega_targets[i] = plant_speed_fraction(cmd, v_frac) * omega_max[i];
            }
            if tick == 0 {
                // Launch from trim: motors already at the first commanded
                // steady state instead of spinning up from zero.
                motors = MotorBank::at_speeds_sq(&omega_targets.map(|w| w * w));
            }

            let (half, gpo) = attached.map_or((0.0, 0.0), |a| (a.half_length, a.grip_offset));
            let tip = pole_tip_position(&state, gpo, half);
            let e_tip = radial_error(&tip, &setpoint.position_w);
            let e_r = radial_error(&state.position_w, &setpoint.position_w);
            let (roll, pitch, _) = euler_zyx(&state.attitude);
            collector.record(phase, t, e_r, e_tip, roll, pitch);

            if let Some(writer) = log.as_mut() {
                let q = UnitQuaternion::from_rotation_matrix(
                    &Rotation3::from_matrix_unchecked(*state.attitude.matrix()),
                );
                writer.write(&RunLogRow {
                    t,
                    position: state.position_w.into(),
                    quaternion: [q.w, q.i, q.j, q.k],
                    velocity: state.velocity_b.into(),
                    angular_velocity: state.angular_velocity_b.into(),
                    speeds_sq_cmd: solution.speeds_sq.into(),
                    speeds_sq_act: motors.speeds_sq().into(),
                    wrench: requested.into(),
                    slack_norm,
                    radial_error: e_r,
                    tip_radial_error: e_tip,
                    phase: phase.to_owned(),
                    voltage: battery.voltage,
                    position_des: setpoint.position_w.into(),
                    yaw_des: setpoint.yaw,
                })?;
            }
        }

        motors.step(&omega_targets, &params_cur, dt_phys);
        let applied = Wrench::from_vector(&matrix.wrench_vector(&motors.speeds_sq()));
        state = rk4_step(&state, &params_cur, &applied, dt_phys)?;
        battery.step(&battery_params, dt_phys);
        sim_time = (tick + 1) as f64 * dt_phys;

        if !state.is_finite() || state.max_abs() > DIVERGENCE_LIMIT {
            outcome = Some(RunOutcome::Diverged { time: sim_time });
            break 'run;
        }
    }

    let outcome = outcome.unwrap_or_else(|| match &director {
        Director::Mission { .. } => RunOutcome::Aborted {
            phase: phase.to_owned(),
            reason: format!("time limit of {limit} s reached"),
        },
        Director::Hold { .. } => RunOutcome::Success,
    });

    Ok(SimResult {
        outcome,
        sim_time,
        placements: director.placements(),
        phases: collector.phases().to_vec(),
        overall: collector.overall(),
        final_voltage: battery.voltage,
        config_hash,
        events,
        model_switches,
        frozen_integral_drift: frozen_drift,
        max_slack_norm: max_slack,
    })
}

/// [`run_scenario`] without a log sink.
pub fn run_scenario_quiet(scenario: &Scenario) -> Result<SimResult, SimError> {
    run_scenario::<io::Sink>(scenario, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn scenario(extra: &str) -> Scenario {
        let prefix = crate::scenario::test_support::MISSION_TOML
            .split("[mission]")
            .next()
            .unwrap();
        Scenario::from_toml_str(&format!("{prefix}{extra}")).unwrap()
    }

    #[test]
    fn quiet_hold_stays_on_the_spot() {
        let s = scenario(
            "[noise]\nenabled = false\n\n[hold]\nposition = [0.0, 0.0, 1.2]\nduration = 4.0\n",
        );
        let r = run_scenario_quiet(&s).unwrap();
        assert_eq!(r.outcome, RunOutcome::Success);
        assert_relative_eq!(r.sim_time, 4.0, epsilon = 1e-9);
        assert!(r.overall.radial.max < 0.01, "radial max {}", r.overall.radial.max);
        assert!(r.overall.roll_abs.max < 1e-3);
        assert_eq!(r.frozen_integral_drift, 0.0);
        assert!(r.placements.is_empty());
        assert_relative_eq!(r.final_voltage, 25.2 - 0.007 * 4.0, epsilon = 1e-9);
        assert_eq!(r.events.len(), 1, "only the initial phase entry: {:?}", r.events);
    }

    #[test]
    fn held_pole_shows_up_in_tip_metrics() {
        let s = scenario(
            "[noise]\nenabled = false\n\n[hold]\nposition = [0.0, 0.0, 1.5]\nduration = 3.0\ngrip_plane_offset = -0.05\n\n[hold.pole]\nlength = 2.0\nmass = 3.0\nradius = 0.06\n",
        );
        let r = run_scenario_quiet(&s).unwrap();
        assert_eq!(r.outcome, RunOutcome::Success);
        assert!(r.overall.tip_radial.max < 0.01);
        // Pre-attached load is part of the initial model, not a swap.
        assert!(r.model_switches.is_empty());
    }

    #[test]
    fn insane_state_trips_the_divergence_guard() {
        let s = scenario("[hold]\nposition = [0.0, 0.0, 2.0e6]\nduration = 1.0\n");
        let r = run_scenario_quiet(&s).unwrap();
        match &r.outcome {
            RunOutcome::Diverged { time } => assert!(*time <= 0.01),
            other => panic!("expected divergence, got {other}"),
        }
        assert_eq!(r.outcome.exit_code(), 3);
    }

    #[test]
    fn runs_are_byte_deterministic() {
        let s = scenario("[hold]\nposition = [0.2, -0.1, 1.0]\nduration = 2.0\n");
        let run = || {
            let mut w = RunLogWriter::new(Vec::new()).unwrap();
            let r = run_scenario(&s, Some(&mut w)).unwrap();
            (r, String::from_utf8(w.into_inner()).unwrap())
        };
        let (a, log_a) = run();
        let (b, log_b) = run();
        assert_eq!(a.outcome, b.outcome);
        assert_eq!(log_a, log_b);
        assert!(log_a.lines().count() > 100);
    }

    #[test]
    fn disabled_noise_equals_zeroed_noise() {
        let hold = "\n[hold]\nposition = [0.0, 0.0, 1.0]\nduration = 1.0\n";
        let off = scenario(&format!("[noise]\nenabled = false\n{hold}"));
        let zeroed = scenario(&format!(
            "[noise]\nenabled = true\nposition_sigma = 0.0\nattitude_sigma_deg = 0.0\n{hold}"
        ));
        let log = |s: &Scenario| {
            let mut w = RunLogWriter::new(Vec::new()).unwrap();
            run_scenario(s, Some(&mut w)).unwrap();
            String::from_utf8(w.into_inner()).unwrap()
        };
        assert_eq!(log(&off), log(&zeroed));
    }
}
