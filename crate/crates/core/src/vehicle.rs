//! Vehicle parameters: propeller geometry, the wrench allocation matrix it
//! generates, and rigid-body composition with a gripped payload.

use nalgebra::{Matrix3, SMatrix, SVector, Vector3};
use thiserror::Error;

use crate::num::{real, Real};
use crate::so3::hat;

/// Number of propellers on the vehicle. The allocation matrix is 6 x 8.
pub const PROPELLER_COUNT: usize = 8;

#[derive(Debug, Error, PartialEq)]
pub enum VehicleError {
    #[error("mass must be positive and finite, got {0}")]
    InvalidMass(f64),
    #[error("inertia must be a symmetric positive definite matrix")]
    InvalidInertia,
    #[error("propeller {index}: {reason}")]
    InvalidPropeller { index: usize, reason: String },
    #[error("expected 4 main propellers followed by 4 auxiliary, got {0}")]
    InvalidLayout(String),
    #[error("payload: {0}")]
    InvalidPayload(String),
}

/// Rotor spin direction as seen from the thrust-axis side.
///
/// The reaction drag torque on the body acts along the thrust axis with sign
/// `+1` for counter-clockwise rotors and `-1` for clockwise ones.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpinDirection {
    Ccw,
    Cw,
}

impl SpinDirection {
    #[inline]
    pub fn drag_sign<T: Real>(self) -> T {
        match self {
            SpinDirection::Ccw => T::one(),
            SpinDirection::Cw => -T::one(),
        }
    }
}

/// Large lifting rotor or small lateral rotor.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PropellerClass {
    Main,
    Auxiliary,
}

/// One propeller: mounting geometry, aerodynamic coefficients, and actuator
/// limits. Speeds are always handled as squared angular velocity `w = omega^2`
/// because both thrust and drag are linear in `w`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PropellerSpec<T: Real> {
    /// Mounting point in the body frame, m.
    pub position_b: Vector3<T>,
    /// Unit thrust axis in the body frame.
    pub axis_b: Vector3<T>,
    /// Thrust coefficient c_f, N s^2/rad^2.
    pub thrust_coeff: T,
    /// Drag torque coefficient c_m (non-negative), N m s^2/rad^2.
    pub drag_coeff: T,
    pub spin: SpinDirection,
    pub class: PropellerClass,
    /// Lower squared-speed limit (idle), rad^2/s^2.
    pub speed_sq_min: T,
    /// Upper squared-speed limit, rad^2/s^2.
    pub speed_sq_max: T,
    /// First-order motor response time constant, s.
    pub motor_time_constant: T,
}

impl<T: Real> PropellerSpec<T> {
    pub fn validate(&self) -> Result<(), String> {
        if (self.axis_b.norm() - T::one()).abs() > real(1e-9) {
            return Err("thrust axis must be a unit vector".into());
        }
        if self.thrust_coeff <= T::zero() {
            return Err("thrust coefficient must be positive".into());
        }
        if self.drag_coeff < T::zero() {
            return Err("drag coefficient must be non-negative".into());
        }
        if self.speed_sq_min < T::zero() || self.speed_sq_min >= self.speed_sq_max {
            return Err("need 0 <= speed_sq_min < speed_sq_max".into());
        }
        if self.motor_time_constant <= T::zero() {
            return Err("motor time constant must be positive".into());
        }
        Ok(())
    }

    /// Wrench produced per unit of squared speed: force `c_f xi` stacked on
    /// torque `c_f r x xi + s c_m xi`, with `s` the spin drag sign.
    pub fn wrench_column(&self) -> SVector<T, 6> {
        let force = self.axis_b * self.thrust_coeff;
        let torque = self.position_b.cross(&self.axis_b) * self.thrust_coeff
            + self.axis_b * (self.spin.drag_sign::<T>() * self.drag_coeff);
        SVector::<T, 6>::from_iterator(force.iter().chain(torque.iter()).copied())
    }

    /// Maximum steady thrust magnitude, N.
    pub fn max_thrust(&self) -> T {
        self.thrust_coeff * self.speed_sq_max
    }
}

/// Rigid-body and actuator parameters of the (possibly loaded) vehicle.
#[derive(Clone, Debug, PartialEq)]
pub struct VehicleParams<T: Real> {
    /// Total mass, kg.
    pub mass: T,
    /// Inertia about the body origin, kg m^2.
    pub inertia_b: Matrix3<T>,
    /// Offset from the body origin to the center of mass, m.
    pub com_offset_b: Vector3<T>,
    /// Gravity in the world frame, typically (0, 0, 9.81) m/s^2; the dynamics
    /// subtract `m R^T g_w`, so a positive z entry pulls the vehicle down.
    pub gravity_w: Vector3<T>,
    /// Exactly four main propellers followed by four auxiliary ones.
    pub propellers: Vec<PropellerSpec<T>>,
}

impl<T: Real> VehicleParams<T> {
    pub fn validate(&self) -> Result<(), VehicleError> {
        let mass = self.mass.to_f64().unwrap_or(f64::NAN);
        if !(mass.is_finite() && mass > 0.0) {
            return Err(VehicleError::InvalidMass(mass));
        }
        let j = &self.inertia_b;
        let sym_defect = (j - j.transpose()).norm();
        if sym_defect > real::<T>(1e-9) * j.norm().max(T::one()) {
            return Err(VehicleError::InvalidInertia);
        }
        if nalgebra::Cholesky::new(j.symmetric_part()).is_none() {
            return Err(VehicleError::InvalidInertia);
        }
        if self.propellers.len() != PROPELLER_COUNT {
            return Err(VehicleError::InvalidLayout(format!(
                "{} propellers",
                self.propellers.len()
            )));
        }
        for (i, p) in self.propellers.iter().enumerate() {
            let expected = if i < 4 {
                PropellerClass::Main
            } else {
                PropellerClass::Auxiliary
            };
            if p.class != expected {
                return Err(VehicleError::InvalidLayout(format!(
                    "propeller {i} has class {:?}",
                    p.class
                )));
            }
            p.validate()
                .map_err(|reason| VehicleError::InvalidPropeller { index: i, reason })?;
        }
        Ok(())
    }

    /// Sum of main-propeller max thrust projected on body z: the collinear
    /// hover envelope, N. Zero-width speed ranges contribute nothing.
    pub fn actuation_envelope(&self) -> T {
        let z = Vector3::z();
        self.propellers
            .iter()
            .filter(|p| p.class == PropellerClass::Main)
            .map(|p| (p.thrust_coeff * p.speed_sq_max * p.axis_b.dot(&z)).max(T::zero()))
            .fold(T::zero(), |a, b| a + b)
    }
}

/// Inertial description of a gripped load about its own center of mass.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PayloadSpec<T: Real> {
    /// Load mass, kg.
    pub mass: T,
    /// Load inertia about the load center of mass, kg m^2.
    pub inertia_com: Matrix3<T>,
    /// Body-frame vector from the vehicle geometric center to the load
    /// center of mass, m.
    pub offset_b: Vector3<T>,
}

impl<T: Real> PayloadSpec<T> {
    /// Payload for a thin-walled cylindrical tube gripped so that its center
    /// of mass sits at `offset_b` with its axis along body z.
    pub fn tube(
        mass: T,
        length: T,
        radius: T,
        offset_b: Vector3<T>,
    ) -> Result<Self, VehicleError> {
        Ok(Self {
            mass,
            inertia_com: tube_inertia(mass, length, radius)?,
            offset_b,
        })
    }
}

/// Inertia of a thin-walled tube of the given mass about its center of mass,
/// axis along z: `I_xx = I_yy = m (r^2/2 + L^2/12)`, `I_zz = m r^2`.
/// `length = 0` degenerates to a hoop.
pub fn tube_inertia<T: Real>(mass: T, length: T, radius: T) -> Result<Matrix3<T>, VehicleError> {
    if mass <= T::zero() {
        return Err(VehicleError::InvalidPayload("mass must be positive".into()));
    }
    if radius <= T::zero() {
        return Err(VehicleError::InvalidPayload(
            "radius must be positive".into(),
        ));
    }
    if length < T::zero() {
        return Err(VehicleError::InvalidPayload(
            "length must be non-negative".into(),
        ));
    }
    let r_sq = radius * radius;
    let half = real::<T>(0.5);
    let twelfth = real::<T>(1.0 / 12.0);
    let transverse = mass * (r_sq * half + length * length * twelfth);
    let axial = mass * r_sq;
    Ok(Matrix3::from_diagonal(&Vector3::new(
        transverse, transverse, axial,
    )))
}

/// Composite parameters after rigidly attaching `load` to `base`.
///
/// The load inertia moves to the body origin through the parallel axis
/// theorem, `J += J_com - m_load hat(d)^2`, and the center of mass is the
/// mass-weighted mean. Propellers and gravity are untouched.
pub fn compose_payload<T: Real>(base: &VehicleParams<T>, load: &PayloadSpec<T>) -> VehicleParams<T> {
    let d = load.offset_b;
    let hd = hat(d);
    let total_mass = base.mass + load.mass;
    let mut out = base.clone();
    out.mass = total_mass;
    out.inertia_b = base.inertia_b + load.inertia_com - hd * hd * load.mass;
    out.com_offset_b = (base.com_offset_b * base.mass + d * load.mass) / total_mass;
    out
}

/// Exact inverse of [`compose_payload`] for the same `load`.
pub fn remove_payload<T: Real>(
    loaded: &VehicleParams<T>,
    load: &PayloadSpec<T>,
) -> Result<VehicleParams<T>, VehicleError> {
    let base_mass = loaded.mass - load.mass;
    if base_mass <= T::zero() {
        return Err(VehicleError::InvalidPayload(
            "removing payload leaves non-positive mass".into(),
        ));
    }
    let d = load.offset_b;
    let hd = hat(d);
    let mut out = loaded.clone();
    out.mass = base_mass;
    out.inertia_b = loaded.inertia_b - load.inertia_com + hd * hd * load.mass;
    out.com_offset_b = (loaded.com_offset_b * loaded.mass - d * load.mass) / base_mass;
    Ok(out)
}

/// Body wrench per unit squared rotor speed, columns ordered like
/// `VehicleParams::propellers` (mains first).
#[derive(Clone, Debug, PartialEq)]
pub struct AllocationMatrix<T: Real> {
    matrix: SMatrix<T, 6, 8>,
}

impl<T: Real> AllocationMatrix<T> {
    pub fn from_params(params: &VehicleParams<T>) -> Result<Self, VehicleError> {
        params.validate()?;
        let mut matrix = SMatrix::<T, 6, 8>::zeros();
        for (i, p) in params.propellers.iter().enumerate() {
            matrix.set_column(i, &p.wrench_column());
        }
        Ok(Self { matrix })
    }

    pub fn matrix(&self) -> &SMatrix<T, 6, 8> {
        &self.matrix
    }

    pub fn column(&self, i: usize) -> SVector<T, 6> {
        self.matrix.column(i).into_owned()
    }

    /// Body wrench `[f; tau]` for the given squared speeds.
    pub fn wrench_vector(&self, speeds_sq: &SVector<T, 8>) -> SVector<T, 6> {
        self.matrix * speeds_sq
    }

    /// The eight singular values of the matrix (descending), computed from the
    /// spectrum of `A^T A` so the nullspace directions show up explicitly.
    pub fn singular_values(&self) -> [T; 8] {
        let gram = self.matrix.transpose() * self.matrix;
        let eig = nalgebra::SymmetricEigen::new(gram);
        let mut out = [T::zero(); 8];
        for (slot, lambda) in out.iter_mut().zip(eig.eigenvalues.iter()) {
            *slot = lambda.max(T::zero()).sqrt();
        }
        out.sort_by(|a, b| b.partial_cmp(a).expect("finite singular values"));
        out
    }

    /// Rank with singular values below `rel_tol * sigma_max` treated as zero.
    pub fn rank(&self, rel_tol: T) -> usize {
        let sv = self.singular_values();
        let cutoff = sv[0] * rel_tol;
        sv.iter().filter(|s| **s > cutoff).count()
    }

    /// Orthonormal basis of the nullspace in speed space.
    pub fn nullspace_basis(&self, rel_tol: T) -> Vec<SVector<T, 8>> {
        let gram = self.matrix.transpose() * self.matrix;
        let eig = nalgebra::SymmetricEigen::new(gram);
        let sigma_max = eig
            .eigenvalues
            .iter()
            .fold(T::zero(), |a, b| a.max(b.max(T::zero()).sqrt()));
        let cutoff = sigma_max * rel_tol;
        let mut basis = Vec::new();
        for (i, lambda) in eig.eigenvalues.iter().enumerate() {
            if lambda.max(T::zero()).sqrt() <= cutoff {
                basis.push(eig.eigenvectors.column(i).into_owned());
            }
        }
        basis
    }
}

/// One rotor class of the reference ring layout.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RotorRing<T: Real> {
    /// Mounting radius from the body origin, m.
    pub radius: T,
    pub thrust_coeff: T,
    pub drag_coeff: T,
    pub speed_sq_min: T,
    pub speed_sq_max: T,
    pub motor_time_constant: T,
}

/// Reference eight-rotor ring: four lifting mains in an X arrangement plus
/// four lateral auxiliaries on the body axes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RingLayout<T: Real> {
    pub main: RotorRing<T>,
    pub aux: RotorRing<T>,
    /// Elevation of the auxiliary thrust axes out of the body xy plane, rad.
    /// Zero keeps them horizontal, pointing radially inward.
    pub aux_tilt: T,
}

/// Builds the reference vehicle:
/// mains at 45/135/225/315 degrees with +z thrust and alternating spin, and
/// auxiliaries at +x/+y/-x/-y thrusting inward, with each opposite pair
/// spinning the same way so that a uniform pair speed-up produces no wrench.
pub fn ring_octocopter<T: Real>(
    mass: T,
    inertia_b: Matrix3<T>,
    com_offset_b: Vector3<T>,
    gravity: T,
    layout: &RingLayout<T>,
) -> Result<VehicleParams<T>, VehicleError> {
    let h = real::<T>(0.5).sqrt();
    let main_dirs = [[h, h], [-h, h], [-h, -h], [h, -h]];
    let aux_dirs = [
        [T::one(), T::zero()],
        [T::zero(), T::one()],
        [-T::one(), T::zero()],
        [T::zero(), -T::one()],
    ];

    let mut propellers = Vec::with_capacity(PROPELLER_COUNT);
    for (i, [x, y]) in main_dirs.iter().enumerate() {
        let ring = &layout.main;
        propellers.push(PropellerSpec {
            position_b: Vector3::new(*x, *y, T::zero()) * ring.radius,
            axis_b: Vector3::z(),
            thrust_coeff: ring.thrust_coeff,
            drag_coeff: ring.drag_coeff,
            spin: if i % 2 == 0 {
                SpinDirection::Ccw
            } else {
                SpinDirection::Cw
            },
            class: PropellerClass::Main,
            speed_sq_min: ring.speed_sq_min,
            speed_sq_max: ring.speed_sq_max,
            motor_time_constant: ring.motor_time_constant,
        });
    }
    let (tilt_sin, tilt_cos) = layout.aux_tilt.sin_cos();
    for (i, [x, y]) in aux_dirs.iter().enumerate() {
        let ring = &layout.aux;
        let radial = Vector3::new(*x, *y, T::zero());
        let axis = -radial * tilt_cos + Vector3::z() * tilt_sin;
        propellers.push(PropellerSpec {
            position_b: radial * ring.radius,
            axis_b: axis.normalize(),
            thrust_coeff: ring.thrust_coeff,
            drag_coeff: ring.drag_coeff,
            // Opposite pairs share a spin direction: +x/-x ccw, +y/-y cw.
            spin: if i % 2 == 0 {
                SpinDirection::Ccw
            } else {
                SpinDirection::Cw
            },
            class: PropellerClass::Auxiliary,
            speed_sq_min: ring.speed_sq_min,
            speed_sq_max: ring.speed_sq_max,
            motor_time_constant: ring.motor_time_constant,
        });
    }

    let params = VehicleParams {
        mass,
        inertia_b,
        com_offset_b,
        gravity_w: Vector3::new(T::zero(), T::zero(), gravity),
        propellers,
    };
    params.validate()?;
    Ok(params)
}
