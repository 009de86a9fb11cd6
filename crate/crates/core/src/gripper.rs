//! Passive wedge gripper: centering funnel geometry, self-locking statics,
//! and the timed engage/release sequence.

use nalgebra::Vector3;
use thiserror::Error;

use crate::num::{real, Real};

#[derive(Debug, Error, PartialEq)]
pub enum GripperError {
    #[error("gripper geometry: {0}")]
    InvalidGeometry(String),
    #[error("gripper sequence: cannot {action} while {state:?}")]
    BadTransition { state: GripState, action: &'static str },
    #[error("self-locking cannot release under load")]
    ReleaseUnderLoad,
}

/// Funnel-and-wedge gripper geometry with its contact friction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GripperGeometry<T: Real> {
    /// Radius of the centering funnel mouth, m.
    pub guide_radius: T,
    /// Smallest pole radius the fingers can close on, m.
    pub pole_radius_min: T,
    /// Largest pole radius that fits the funnel, m.
    pub pole_radius_max: T,
    /// Wedge half-angle of the locking fingers, rad.
    pub wedge_angle: T,
    /// Coulomb friction coefficient at the finger contact.
    pub friction_coeff: T,
}

impl<T: Real> GripperGeometry<T> {
    pub fn validate(&self) -> Result<(), GripperError> {
        if self.pole_radius_min <= T::zero() || self.pole_radius_min > self.pole_radius_max {
            return Err(GripperError::InvalidGeometry(
                "need 0 < pole_radius_min <= pole_radius_max".into(),
            ));
        }
        if self.pole_radius_max >= self.guide_radius {
            return Err(GripperError::InvalidGeometry(
                "funnel must be wider than the largest pole".into(),
            ));
        }
        if self.wedge_angle <= T::zero() || self.wedge_angle >= T::frac_pi_2() {
            return Err(GripperError::InvalidGeometry(
                "wedge angle must lie in (0, pi/2)".into(),
            ));
        }
        if self.friction_coeff < T::zero() {
            return Err(GripperError::InvalidGeometry(
                "friction coefficient must be non-negative".into(),
            ));
        }
        Ok(())
    }

    /// Lateral slack between funnel mouth and the largest pole. The approach
    /// controller must center the pole within this radius before descending,
    /// and it doubles as the guaranteed placement accuracy of the mechanism.
    pub fn centering_tolerance(&self) -> T {
        self.guide_radius - self.pole_radius_max
    }

    /// A wedge contact holds without active force when friction beats the
    /// wedge slope, `mu >= tan(alpha)`. Equality counts: the marginal wedge
    /// still sticks.
    pub fn is_self_locking(&self) -> bool {
        self.friction_coeff >= self.wedge_angle.tan()
    }

    /// Static finger loads while hanging a pole of the given weight. Each of
    /// the three fingers carries a third of the weight through friction, and
    /// the wedge converts that into an inward normal force `f / tan(alpha)`.
    /// Normals at 120 degree spacing cancel, so the pole feels pure lift.
    pub fn finger_loads(&self, load_weight: T) -> Result<[FingerLoad<T>; 3], GripperError> {
        self.validate()?;
        if load_weight < T::zero() {
            return Err(GripperError::InvalidGeometry(
                "load weight must be non-negative".into(),
            ));
        }
        let third = real::<T>(1.0 / 3.0);
        let axial = load_weight * third;
        let normal = axial / self.wedge_angle.tan();
        let mut out = [FingerLoad {
            azimuth: T::zero(),
            inward_b: Vector3::zeros(),
            axial_force: axial,
            normal_force: normal,
        }; 3];
        for (i, load) in out.iter_mut().enumerate() {
            let azimuth = real::<T>(i as f64) * T::two_pi() * third;
            load.azimuth = azimuth;
            load.inward_b = -Vector3::new(azimuth.cos(), azimuth.sin(), T::zero());
        }
        Ok(out)
    }
}

/// Static load on one finger contact.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FingerLoad<T: Real> {
    /// Contact azimuth about the pole axis, rad.
    pub azimuth: T,
    /// Unit direction from the contact toward the pole axis.
    pub inward_b: Vector3<T>,
    /// Friction force supporting the pole, along +z, N.
    pub axial_force: T,
    /// Wedge normal force pressing inward, N.
    pub normal_force: T,
}

impl<T: Real> FingerLoad<T> {
    /// Net force this finger applies to the pole.
    pub fn force_on_pole(&self) -> Vector3<T> {
        self.inward_b * self.normal_force + Vector3::z() * self.axial_force
    }
}

/// Gripper mechanism state.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GripState {
    Open,
    Grasping,
    Locked,
    Releasing,
}

/// Mechanical stage of the grip sequence, stamped with its actuation time.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GripEventKind {
    CenterEngage,
    LockEngage,
    LockRelease,
    CenterRelease,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GripEvent<T: Real> {
    pub time: T,
    pub kind: GripEventKind,
}

/// Two-stage grip sequencer. Each stage takes `stage_duration`; a grasp or
/// release is complete one stage after its second event fires.
#[derive(Clone, Debug, PartialEq)]
pub struct GripSequencer<T: Real> {
    state: GripState,
    stage_duration: T,
    complete_at: Option<T>,
}

impl<T: Real> GripSequencer<T> {
    pub fn new(stage_duration: T) -> Result<Self, GripperError> {
        if stage_duration <= T::zero() {
            return Err(GripperError::InvalidGeometry(
                "stage duration must be positive".into(),
            ));
        }
        Ok(Self {
            state: GripState::Open,
            stage_duration,
            complete_at: None,
        })
    }

    pub fn state(&self) -> GripState {
        self.state
    }

    pub fn is_locked(&self) -> bool {
        self.state == GripState::Locked
    }

    /// Starts closing on a centered pole. Returns the centering and locking
    /// events; the grasp is complete two stages after `now`.
    pub fn begin_grasp(&mut self, now: T) -> Result<[GripEvent<T>; 2], GripperError> {
        if self.state != GripState::Open {
            return Err(GripperError::BadTransition {
                state: self.state,
                action: "grasp",
            });
        }
        self.state = GripState::Grasping;
        self.complete_at = Some(now + self.stage_duration + self.stage_duration);
        Ok([
            GripEvent {
                time: now,
                kind: GripEventKind::CenterEngage,
            },
            GripEvent {
                time: now + self.stage_duration,
                kind: GripEventKind::LockEngage,
            },
        ])
    }

    /// Starts opening. A self-locking wedge can only let go once the pole
    /// weight is off the fingers, so the pole must already rest on the ground.
    pub fn begin_release(
        &mut self,
        now: T,
        pole_on_ground: bool,
    ) -> Result<[GripEvent<T>; 2], GripperError> {
        if self.state != GripState::Locked {
            return Err(GripperError::BadTransition {
                state: self.state,
                action: "release",
            });
        }
        if !pole_on_ground {
            return Err(GripperError::ReleaseUnderLoad);
        }
        self.state = GripState::Releasing;
        self.complete_at = Some(now + self.stage_duration + self.stage_duration);
        Ok([
            GripEvent {
                time: now,
                kind: GripEventKind::LockRelease,
            },
            GripEvent {
                time: now + self.stage_duration,
                kind: GripEventKind::CenterRelease,
            },
        ])
    }

    /// Advances the sequencer clock; returns the state after the update.
    pub fn update(&mut self, now: T) -> GripState {
        if let Some(t_done) = self.complete_at {
            if now >= t_done {
                self.state = match self.state {
                    GripState::Grasping => GripState::Locked,
                    GripState::Releasing => GripState::Open,
                    s => s,
                };
                self.complete_at = None;
            }
        }
        self.state
    }
}


#[cfg(test)]
mod tests {
    use super::test_support::reference_gripper;
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn centering_tolerance_is_funnel_slack() {
        let g = reference_gripper();
        assert_relative_eq!(g.centering_tolerance(), 0.05, epsilon = 1e-15);
    }

    #[test]
    fn reference_gripper_is_self_locking() {
        let g = reference_gripper();
        // tan(25 deg) = 0.466 < 0.5.
        assert!(g.is_self_locking());
    }

    #[test]
    fn self_locking_boundary_is_inclusive() {
        let mut g = reference_gripper();
        g.friction_coeff = g.wedge_angle.tan();
        assert!(g.is_self_locking());
        g.friction_coeff *= 0.999;
        assert!(!g.is_self_locking());
    }

    #[test]
    fn finger_loads_frozen_example() {
        let g = reference_gripper();
        let loads = g.finger_loads(29.43).unwrap();
        for l in &loads {
            assert_relative_eq!(l.axial_force, 9.81, epsilon = 1e-12);
            assert_relative_eq!(l.normal_force, 21.0375, epsilon = 1e-3);
            assert_relative_eq!(l.normal_force, 9.81 / 25f64.to_radians().tan(), epsilon = 1e-12);
        }
    }

    #[test]
    fn finger_forces_balance_weight() {
        let g = reference_gripper();
        let weight = 29.43;
        let loads = g.finger_loads(weight).unwrap();
        let total: Vector3<f64> = loads.iter().map(|l| l.force_on_pole()).sum();
        assert!((total - Vector3::new(0.0, 0.0, weight)).norm() < 1e-12 * weight);
    }

    #[test]
    fn load_scaling_is_linear() {
        let g = reference_gripper();
        let small = g.finger_loads(29.43).unwrap();
        let big = g.finger_loads(29.43e6).unwrap();
        for (s, b) in small.iter().zip(&big) {
            assert_relative_eq!(b.axial_force / s.axial_force, 1e6, epsilon = 1e-6);
            assert_relative_eq!(b.normal_force / s.normal_force, 1e6, epsilon = 1e-6);
        }
    }

    #[test]
    fn geometry_validation() {
        let mut g = reference_gripper();
        g.pole_radius_max = 0.2;
        assert!(g.validate().is_err());

        let mut g = reference_gripper();
        g.wedge_angle = 0.0;
        assert!(g.validate().is_err());

        let mut g = reference_gripper();
        g.friction_coeff = -0.1;
        assert!(g.validate().is_err());
    }

    #[test]
    fn grasp_sequence_times_and_states() {
        let mut seq = GripSequencer::new(2.0).unwrap();
        assert_eq!(seq.state(), GripState::Open);

        let events = seq.begin_grasp(10.0).unwrap();
        assert_eq!(events[0].kind, GripEventKind::CenterEngage);
        assert_relative_eq!(events[0].time, 10.0);
        assert_eq!(events[1].kind, GripEventKind::LockEngage);
        assert_relative_eq!(events[1].time, 12.0);

        assert_eq!(seq.update(13.9), GripState::Grasping);
        assert_eq!(seq.update(14.0), GripState::Locked);
        assert!(seq.is_locked());
    }

    #[test]
    fn release_requires_ground_contact() {
        let mut seq = GripSequencer::new(2.0).unwrap();
        seq.begin_grasp(0.0).unwrap();
        seq.update(4.0);

        let err = seq.begin_release(5.0, false).unwrap_err();
        assert_eq!(err, GripperError::ReleaseUnderLoad);
        assert_eq!(err.to_string(), "self-locking cannot release under load");
        assert!(seq.is_locked());

        let events = seq.begin_release(5.0, true).unwrap();
        assert_eq!(events[0].kind, GripEventKind::LockRelease);
        assert_eq!(events[1].kind, GripEventKind::CenterRelease);
        assert_relative_eq!(events[1].time, 7.0);
        assert_eq!(seq.update(9.0), GripState::Open);
    }

    #[test]
    fn invalid_transitions_are_rejected() {
        let mut seq = GripSequencer::new(1.0).unwrap();
        assert!(matches!(
            seq.begin_release(0.0, true),
            Err(GripperError::BadTransition { .. })
        ));
        seq.begin_grasp(0.0).unwrap();
        assert!(matches!(
            seq.begin_grasp(0.5),
            Err(GripperError::BadTransition { .. })
        ));
    }

    proptest! {
        #[test]
        fn self_locking_matches_friction_cone(
            mu in 0.0f64..1.5,
            alpha_deg in 1.0f64..80.0,
        ) {
            let mut g = reference_gripper();
            g.friction_coeff = mu;
            g.wedge_angle = alpha_deg.to_radians();
            prop_assert_eq!(g.is_self_locking(), mu >= g.wedge_angle.tan());
        }

        #[test]
        fn statics_balance_for_any_load(
            weight in 0.0f64..500.0,
            alpha_deg in 5.0f64..80.0,
        ) {
            let mut g = reference_gripper();
            g.wedge_angle = alpha_deg.to_radians();
            let loads = g.finger_loads(weight).unwrap();
            let total: Vector3<f64> = loads.iter().map(|l| l.force_on_pole()).sum();
            let scale = weight.max(1.0);
            prop_assert!((total - Vector3::new(0.0, 0.0, weight)).norm() < 1e-12 * scale);

            // Torque about the grip center, contacts on the pole surface.
            let r_pole = 0.06;
            let torque: Vector3<f64> = loads
                .iter()
                .map(|l| (-l.inward_b * r_pole).cross(&l.force_on_pole()))
                .sum();
            prop_assert!(torque.norm() < 1e-12 * scale);
        }
    }
}
