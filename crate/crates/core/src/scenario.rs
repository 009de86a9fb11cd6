//! Scenario files: the single TOML document that pins a run.
//!
//! A scenario carries everything that affects the trajectory of a run, so a
//! file plus a build of this crate reproduces a log byte for byte. Optional
//! sections default to the reference stack; the effective configuration,
//! defaults filled in, re-serializes canonically and is hashed so reports can
//! state exactly what ran.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::allocation::AllocationWeights;
use crate::control::ControlGains;
use crate::dynamics::BatteryParams;
use crate::gripper::GripperGeometry;
use crate::mission::{MissionParams, PoleTask};
use crate::vehicle::{ring_octocopter, RingLayout, RotorRing, VehicleParams};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("scenario parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("scenario serialize error: {0}")]
    Serialize(#[from] toml::ser::Error),
    #[error("invalid scenario at {path}: {message}")]
    Invalid { path: String, message: String },
}

fn invalid(path: &str, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid {
        path: path.into(),
        message: message.into(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RotorRingConfig {
    pub radius: f64,
    pub thrust_coeff: f64,
    pub drag_coeff: f64,
    pub speed_sq_min: f64,
    pub speed_sq_max: f64,
    pub motor_time_constant: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleConfig {
    pub mass: f64,
    pub inertia_diag: [f64; 3],
    pub com_offset: [f64; 3],
    pub gravity: f64,
    /// Inward tilt of the side rotors, radians; zero means fully lateral.
    #[serde(default)]
    pub aux_tilt: f64,
    pub main_ring: RotorRingConfig,
    pub aux_ring: RotorRingConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GripperConfig {
    pub guide_radius: f64,
    pub pole_radius_min: f64,
    pub pole_radius_max: f64,
    pub wedge_angle_deg: f64,
    pub friction_coeff: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatteryConfig {
    pub voltage_nominal: f64,
    pub voltage_floor: f64,
    pub sag_rate: f64,
}

/// Controller gains as plain numbers; see [`ControlGains`] for their units.
///
/// The defaults fit the reference vehicle. After an airframe change, retune
/// by raising `position` until a one meter step overshoots by about ten
/// percent, then backing it off twenty percent. A `[hold]` scenario with
/// `step_to` set is the measurement rig for that step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GainsConfig {
    pub position: f64,
    pub velocity: f64,
    pub integral: f64,
    pub attitude: f64,
    pub rate: f64,
}

impl Default for GainsConfig {
    fn default() -> Self {
        Self {
            position: 6.0,
            velocity: 4.5,
            integral: 0.6,
            attitude: 12.0,
            rate: 4.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AllocationConfig {
    pub main_effort: f64,
    pub aux_effort: f64,
    pub slack_penalty: f64,
    pub slack_bound: f64,
}

impl Default for AllocationConfig {
    fn default() -> Self {
        let w = AllocationWeights::<f64>::default();
        Self {
            main_effort: w.main_effort,
            aux_effort: w.aux_effort,
            slack_penalty: w.slack_penalty,
            slack_bound: w.slack_bound,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RatesConfig {
    pub physics_hz: u32,
    pub control_hz: u32,
    pub planner_hz: u32,
}

impl Default for RatesConfig {
    fn default() -> Self {
        Self {
            physics_hz: 1000,
            control_hz: 200,
            planner_hz: 100,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    pub enabled: bool,
    pub position_sigma: f64,
    pub attitude_sigma_deg: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            position_sigma: 0.002,
            attitude_sigma_deg: 0.2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompensationConfig {
    /// Invert the measured supply voltage out of the motor commands.
    pub voltage: bool,
}

impl Default for CompensationConfig {
    fn default() -> Self {
        Self { voltage: true }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoleConfig {
    /// Ground point where the pole stands, world xy; the base rests at z 0.
    pub stand: [f64; 2],
    pub length: f64,
    pub mass: f64,
    pub radius: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MissionConfig {
    pub home: [f64; 3],
    /// Mount axis, world xy.
    pub mount: [f64; 2],
    /// Seat height of the empty mount above the ground.
    pub mount_base_height: f64,
    pub cruise_speed: f64,
    #[serde(default = "defaults::grip_plane_offset")]
    pub grip_plane_offset: f64,
    #[serde(default = "defaults::time_limit")]
    pub time_limit: f64,
    #[serde(default = "defaults::clearance")]
    pub clearance: f64,
    #[serde(default = "defaults::lateral_accel")]
    pub lateral_accel: f64,
    #[serde(default = "defaults::vertical_accel")]
    pub vertical_accel: f64,
    #[serde(default = "defaults::min_leg_duration")]
    pub min_leg_duration: f64,
    /// Defaults to the gripper centering tolerance when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gate_radius: Option<f64>,
    #[serde(default = "defaults::gate_dwell")]
    pub gate_dwell: f64,
    #[serde(default = "defaults::gate_timeout")]
    pub gate_timeout: f64,
    #[serde(default = "defaults::max_attempts")]
    pub max_attempts: u32,
    #[serde(default = "defaults::stage_duration")]
    pub stage_duration: f64,
    #[serde(default = "defaults::settle_duration")]
    pub settle_duration: f64,
    #[serde(default = "defaults::touchdown_threshold")]
    pub touchdown_threshold: f64,
    #[serde(default = "defaults::seat_clearance")]
    pub seat_clearance: f64,
    #[serde(default)]
    pub yaw: f64,
    pub poles: Vec<PoleConfig>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HoldPoleConfig {
    pub length: f64,
    pub mass: f64,
    pub radius: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HoldConfig {
    pub position: [f64; 3],
    pub duration: f64,
    #[serde(default)]
    pub yaw: f64,
    #[serde(default = "defaults::grip_plane_offset")]
    pub grip_plane_offset: f64,
    /// Step target for disturbance-response runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_to: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_at: Option<f64>,
    /// Pole gripped from the first tick, already part of the plant.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pole: Option<HoldPoleConfig>,
}

mod defaults {
    pub fn grip_plane_offset() -> f64 {
        -0.05
    }
    pub fn time_limit() -> f64 {
        360.0
    }
    pub fn clearance() -> f64 {
        0.8
    }
    pub fn lateral_accel() -> f64 {
        0.35
    }
    pub fn vertical_accel() -> f64 {
        1.5
    }
    pub fn min_leg_duration() -> f64 {
        1.5
    }
    pub fn gate_dwell() -> f64 {
        1.0
    }
    pub fn gate_timeout() -> f64 {
        12.0
    }
    pub fn max_attempts() -> u32 {
        3
    }
    pub fn stage_duration() -> f64 {
        2.0
    }
    pub fn settle_duration() -> f64 {
        1.0
    }
    pub fn touchdown_threshold() -> f64 {
        0.01
    }
    pub fn seat_clearance() -> f64 {
        0.005
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub seed: u64,
    pub vehicle: VehicleConfig,
    pub gripper: GripperConfig,
    pub battery: BatteryConfig,
    #[serde(default)]
    pub gains: GainsConfig,
    #[serde(default)]
    pub allocation: AllocationConfig,
    #[serde(default)]
    pub rates: RatesConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub compensation: CompensationConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mission: Option<MissionConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hold: Option<HoldConfig>,
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self, ScenarioError> {
        let scenario: Self = toml::from_str(text)?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        match (&self.mission, &self.hold) {
            (Some(_), Some(_)) => {
                return Err(invalid("mission", "choose either [mission] or [hold], not both"))
            }
            (None, None) => {
                return Err(invalid("mission", "one of [mission] or [hold] is required"))
            }
            _ => {}
        }

        let positive = |path: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(invalid(path, format!("must be positive and finite, got {v}")))
            }
        };

        positive("vehicle.mass", self.vehicle.mass)?;
        positive("vehicle.gravity", self.vehicle.gravity)?;
        for (i, j) in self.vehicle.inertia_diag.iter().enumerate() {
            positive(&format!("vehicle.inertia_diag[{i}]"), *j)?;
        }
        for (path, ring) in [
            ("vehicle.main_ring", &self.vehicle.main_ring),
            ("vehicle.aux_ring", &self.vehicle.aux_ring),
        ] {
            positive(&format!("{path}.radius"), ring.radius)?;
            positive(&format!("{path}.thrust_coeff"), ring.thrust_coeff)?;
            positive(&format!("{path}.drag_coeff"), ring.drag_coeff)?;
            positive(&format!("{path}.speed_sq_min"), ring.speed_sq_min)?;
            positive(&format!("{path}.speed_sq_max"), ring.speed_sq_max)?;
            positive(&format!("{path}.motor_time_constant"), ring.motor_time_constant)?;
            if ring.speed_sq_min >= ring.speed_sq_max {
                return Err(invalid(
                    &format!("{path}.speed_sq_min"),
                    "idle speed must be below the speed ceiling",
                ));
            }
        }
        if !(self.vehicle.aux_tilt.abs() < std::f64::consts::FRAC_PI_2) {
            return Err(invalid(
                "vehicle.aux_tilt",
                "tilt must stay below a quarter turn",
            ));
        }

        positive("gripper.guide_radius", self.gripper.guide_radius)?;
        positive("gripper.pole_radius_min", self.gripper.pole_radius_min)?;
        positive("gripper.pole_radius_max", self.gripper.pole_radius_max)?;
        positive("gripper.wedge_angle_deg", self.gripper.wedge_angle_deg)?;
        positive("gripper.friction_coeff", self.gripper.friction_coeff)?;
        self.gripper_geometry()
            .validate()
            .map_err(|e| invalid("gripper", e.to_string()))?;

        positive("battery.voltage_nominal", self.battery.voltage_nominal)?;
        positive("battery.voltage_floor", self.battery.voltage_floor)?;
        if self.battery.sag_rate < 0.0 || !self.battery.sag_rate.is_finite() {
            return Err(invalid("battery.sag_rate", "must be non-negative"));
        }
        if self.battery.voltage_floor >= self.battery.voltage_nominal {
            return Err(invalid(
                "battery.voltage_floor",
                "floor must sit below the nominal voltage",
            ));
        }

        for (path, v) in [
            ("gains.position", self.gains.position),
            ("gains.velocity", self.gains.velocity),
            ("gains.integral", self.gains.integral),
            ("gains.attitude", self.gains.attitude),
            ("gains.rate", self.gains.rate),
        ] {
            positive(path, v)?;
        }

        positive("allocation.main_effort", self.allocation.main_effort)?;
        positive("allocation.aux_effort", self.allocation.aux_effort)?;
        positive("allocation.slack_penalty", self.allocation.slack_penalty)?;
        positive("allocation.slack_bound", self.allocation.slack_bound)?;

        let r = &self.rates;
        if r.physics_hz == 0 || r.control_hz == 0 || r.planner_hz == 0 {
            return Err(invalid("rates", "all rates must be positive"));
        }
        if r.physics_hz % r.control_hz != 0 {
            return Err(invalid(
                "rates.control_hz",
                "physics rate must be an integer multiple of the control rate",
            ));
        }
        if r.control_hz % r.planner_hz != 0 {
            return Err(invalid(
                "rates.planner_hz",
                "control rate must be an integer multiple of the planner rate",
            ));
        }

        if self.noise.position_sigma < 0.0 || self.noise.attitude_sigma_deg < 0.0 {
            return Err(invalid("noise", "sigmas must be non-negative"));
        }

        if let Some(m) = &self.mission {
            if m.poles.is_empty() {
                return Err(invalid("mission.poles", "at least one pole is required"));
            }
            for (i, p) in m.poles.iter().enumerate() {
                let path = format!("mission.poles[{i}]");
                positive(&format!("{path}.length"), p.length)?;
                positive(&format!("{path}.mass"), p.mass)?;
                positive(&format!("{path}.radius"), p.radius)?;
                if p.radius < self.gripper.pole_radius_min
                    || p.radius > self.gripper.pole_radius_max
                {
                    return Err(invalid(
                        &format!("{path}.radius"),
                        format!(
                            "outside the gripper capture range [{}, {}]",
                            self.gripper.pole_radius_min, self.gripper.pole_radius_max
                        ),
                    ));
                }
            }
            positive("mission.cruise_speed", m.cruise_speed)?;
            positive("mission.mount_base_height", m.mount_base_height)?;
            positive("mission.time_limit", m.time_limit)?;
            self.mission_params()
                .expect("mission config present")
                .validate()
                .map_err(|e| invalid("mission", e.to_string()))?;
        }

        if let Some(h) = &self.hold {
            positive("hold.duration", h.duration)?;
            if let Some(p) = &h.pole {
                positive("hold.pole.length", p.length)?;
                positive("hold.pole.mass", p.mass)?;
                positive("hold.pole.radius", p.radius)?;
                if p.radius < self.gripper.pole_radius_min
                    || p.radius > self.gripper.pole_radius_max
                {
                    return Err(invalid(
                        "hold.pole.radius",
                        format!(
                            "outside the gripper capture range [{}, {}]",
                            self.gripper.pole_radius_min, self.gripper.pole_radius_max
                        ),
                    ));
                }
            }
            if h.step_at.is_some() && h.step_to.is_none() {
                return Err(invalid("hold.step_at", "step_at requires step_to"));
            }
            if h.step_to.is_some() {
                let at = h
                    .step_at
                    .ok_or_else(|| invalid("hold.step_to", "step_to requires step_at"))?;
                if !(at > 0.0 && at < h.duration) {
                    return Err(invalid(
                        "hold.step_at",
                        "step time must fall inside the hold duration",
                    ));
                }
            }
        }
        Ok(())
    }

    /// Canonical serialization of the effective configuration, defaults
    /// included. Parsing this text again yields an identical scenario.
    pub fn canonical_toml(&self) -> Result<String, ScenarioError> {
        Ok(toml::to_string(self)?)
    }

    /// Hex SHA-256 of the canonical serialization; the identity of a run.
    pub fn config_hash(&self) -> Result<String, ScenarioError> {
        let text = self.canonical_toml()?;
        let digest = Sha256::digest(text.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }

    pub fn vehicle_params(&self) -> Result<VehicleParams<f64>, crate::vehicle::VehicleError> {
        let v = &self.vehicle;
        let ring = |r: &RotorRingConfig| RotorRing {
            radius: r.radius,
            thrust_coeff: r.thrust_coeff,
            drag_coeff: r.drag_coeff,
            speed_sq_min: r.speed_sq_min,
            speed_sq_max: r.speed_sq_max,
            motor_time_constant: r.motor_time_constant,
        };
        ring_octocopter(
            v.mass,
            Matrix3::from_diagonal(&Vector3::from_column_slice(&v.inertia_diag)),
            Vector3::from_column_slice(&v.com_offset),
            v.gravity,
            &RingLayout {
                main: ring(&v.main_ring),
                aux: ring(&v.aux_ring),
                aux_tilt: v.aux_tilt,
            },
        )
    }

    pub fn gripper_geometry(&self) -> GripperGeometry<f64> {
        GripperGeometry {
            guide_radius: self.gripper.guide_radius,
            pole_radius_min: self.gripper.pole_radius_min,
            pole_radius_max: self.gripper.pole_radius_max,
            wedge_angle: self.gripper.wedge_angle_deg.to_radians(),
            friction_coeff: self.gripper.friction_coeff,
        }
    }

    pub fn battery_params(&self) -> BatteryParams<f64> {
        BatteryParams {
            voltage_nominal: self.battery.voltage_nominal,
            voltage_floor: self.battery.voltage_floor,
            sag_rate: self.battery.sag_rate,
        }
    }

    pub fn control_gains(&self) -> ControlGains<f64> {
        ControlGains {
            position: self.gains.position,
            velocity: self.gains.velocity,
            integral: self.gains.integral,
            attitude: self.gains.attitude,
            rate: self.gains.rate,
        }
    }

    pub fn allocation_weights(&self) -> AllocationWeights<f64> {
        AllocationWeights {
            main_effort: self.allocation.main_effort,
            aux_effort: self.allocation.aux_effort,
            slack_penalty: self.allocation.slack_penalty,
            slack_bound: self.allocation.slack_bound,
        }
    }

    /// Mission parameters, `None` for hold scenarios.
    pub fn mission_params(&self) -> Option<MissionParams<f64>> {
        let m = self.mission.as_ref()?;
        Some(MissionParams {
            home_w: Vector3::from_column_slice(&m.home),
            mount_w: Vector3::new(m.mount[0], m.mount[1], m.mount_base_height),
            poles: m
                .poles
                .iter()
                .map(|p| PoleTask {
                    stand_w: Vector3::new(p.stand[0], p.stand[1], 0.0),
                    length: p.length,
                    mass: p.mass,
                    radius: p.radius,
                })
                .collect(),
            cruise_speed: m.cruise_speed,
            lateral_accel: m.lateral_accel,
            vertical_accel: m.vertical_accel,
            min_leg_duration: m.min_leg_duration,
            clearance: m.clearance,
            grip_plane_offset: m.grip_plane_offset,
            gate_radius: m
                .gate_radius
                .unwrap_or_else(|| self.gripper_geometry().centering_tolerance()),
            gate_dwell: m.gate_dwell,
            gate_timeout: m.gate_timeout,
            max_attempts: m.max_attempts,
            stage_duration: m.stage_duration,
            settle_duration: m.settle_duration,
            touchdown_threshold: m.touchdown_threshold,
            seat_clearance: m.seat_clearance,
            yaw: m.yaw,
        })
    }
}


#[cfg(test)]
mod tests {
    use super::test_support::MISSION_TOML;
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    pub fn parses_and_fills_defaults() {
        let s = Scenario::from_toml_str(MISSION_TOML).unwrap();
        assert_eq!(s.seed, 0);
        assert_eq!(s.rates, RatesConfig::default());
        assert!(s.noise.enabled);
        assert!(s.compensation.voltage);
        let m = s.mission.as_ref().unwrap();
        assert_relative_eq!(m.time_limit, 360.0);
        assert_relative_eq!(m.grip_plane_offset, -0.05);
        let params = s.mission_params().unwrap();
        // Gate radius falls back to the gripper centering tolerance.
        assert_relative_eq!(params.gate_radius, 0.05, epsilon = 1e-12);
        assert_eq!(params.poles.len(), 2);
        s.vehicle_params().unwrap().validate().unwrap();
    }

    #[test]
    pub fn canonical_round_trip_is_stable() {
        let s = Scenario::from_toml_str(MISSION_TOML).unwrap();
        let canon = s.canonical_toml().unwrap();
        let reparsed = Scenario::from_toml_str(&canon).unwrap();
        assert_eq!(s, reparsed);
        assert_eq!(canon, reparsed.canonical_toml().unwrap());
        let hash = s.config_hash().unwrap();
        assert_eq!(hash.len(), 64);
        assert_eq!(hash, reparsed.config_hash().unwrap());
        // Defaults are materialized in the echo.
        assert!(canon.contains("[gains]"));
        assert!(canon.contains("[rates]"));
    }

    #[test]
    pub fn hash_tracks_content() {
        let s = Scenario::from_toml_str(MISSION_TOML).unwrap();
        let mut t = s.clone();
        t.seed = 1;
        assert_ne!(s.config_hash().unwrap(), t.config_hash().unwrap());
    }

    #[test]
    pub fn rejects_unknown_keys_with_location() {
        let bad = MISSION_TOML.replace("cruise_speed = 2.5", "cruise_speed = 2.5\nwarp = 9");
        let err = Scenario::from_toml_str(&bad).unwrap_err();
        assert!(matches!(err, ScenarioError::Parse(_)));
        assert!(err.to_string().contains("warp"), "message: {err}");
    }

    #[test]
    pub fn rejects_mission_and_hold_together() {
        let both = format!(
            "{MISSION_TOML}\n[hold]\nposition = [0.0, 0.0, 1.0]\nduration = 10.0\n"
        );
        let err = Scenario::from_toml_str(&both).unwrap_err();
        assert!(err.to_string().contains("not both"), "message: {err}");
    }

    #[test]
    pub fn rejects_pole_outside_gripper_range() {
        let bad = MISSION_TOML.replace("radius = 0.06", "radius = 0.09");
        let err = Scenario::from_toml_str(&bad).unwrap_err();
        assert!(
            err.to_string().contains("mission.poles[0].radius"),
            "message: {err}"
        );
    }

    #[test]
    pub fn rejects_held_pole_outside_gripper_range() {
        let hold = MISSION_TOML
            .split("[mission]")
            .next()
            .unwrap()
            .to_string()
            + "[hold]\nposition = [0.0, 0.0, 1.0]\nduration = 60.0\n\
               [hold.pole]\nlength = 2.0\nmass = 3.0\nradius = 0.09\n";
        let err = Scenario::from_toml_str(&hold).unwrap_err();
        assert!(err.to_string().contains("hold.pole.radius"), "message: {err}");
    }

    #[test]
    pub fn hold_step_requires_both_fields() {
        let hold = MISSION_TOML
            .split("[mission]")
            .next()
            .unwrap()
            .to_string()
            + "[hold]\nposition = [0.0, 0.0, 1.0]\nduration = 60.0\nstep_at = 5.0\n";
        let err = Scenario::from_toml_str(&hold).unwrap_err();
        assert!(err.to_string().contains("hold.step_at"), "message: {err}");
    }

    #[test]
    pub fn rejects_incompatible_rates() {
        let bad = format!("{MISSION_TOML}\n[rates]\nphysics_hz = 1000\ncontrol_hz = 300\nplanner_hz = 100\n");
        let err = Scenario::from_toml_str(&bad).unwrap_err();
        assert!(err.to_string().contains("control_hz"), "message: {err}");
    }
}
