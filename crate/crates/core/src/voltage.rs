//! Supply-voltage compensation for the motor command path.
//!
//! The speed controllers are open-loop in voltage: a command fraction `c`
//! yields rotor speed `c * omega_max * (V / V_nominal)`, so a sagging pack
//! slows every rotor by the same fraction. The compensation map learns the
//! inverse, `c = g(s, v)`, from swept samples and is applied identically to
//! both propeller classes because all quantities are normalized.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::num::{real, Real};

/// Terms of the bivariate cubic `[1, s, v, s^2, sv, v^2, s^3, s^2 v, s v^2, v^3]`.
pub const BASIS_SIZE: usize = 10;

#[derive(Debug, Error, PartialEq)]
pub enum VoltageError {
    #[error("need at least {BASIS_SIZE} samples to fit the map, got {0}")]
    NotEnoughSamples(usize),
    #[error("sweep does not excite all basis terms; the fit is rank deficient")]
    RankDeficient,
    #[error("samples must be finite fractions in [0, 1] with positive voltage")]
    InvalidSample,
}

fn basis<T: Real>(s: T, v: T) -> [T; BASIS_SIZE] {
    [
        T::one(),
        s,
        v,
        s * s,
        s * v,
        v * v,
        s * s * s,
        s * s * v,
        s * v * v,
        v * v * v,
    ]
}

/// Achieved speed fraction of the open-loop ESC: proportional to command and
/// to the voltage fraction, saturated at full speed.
pub fn plant_speed_fraction<T: Real>(command_fraction: T, voltage_fraction: T) -> T {
    (command_fraction * voltage_fraction).min(T::one())
}

/// One logged point of the speed sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VoltageSample<T: Real> {
    /// Speed fraction the plant actually reached.
    pub achieved_fraction: T,
    /// Pack voltage over nominal at that moment.
    pub voltage_fraction: T,
    /// Command fraction that produced it.
    pub command_fraction: T,
}

/// Deterministic command sweep over the operating voltage band, excluding
/// saturated points where the inverse is not unique.
pub fn training_sweep<T: Real>() -> Vec<VoltageSample<T>> {
    let mut samples = Vec::new();
    for ic in 1..=20 {
        let cmd = real::<T>(ic as f64 * 0.05);
        for iv in 0..=18 {
            let v = real::<T>(0.82 + iv as f64 * 0.01);
            if cmd * v > T::one() {
                continue;
            }
            samples.push(VoltageSample {
                achieved_fraction: plant_speed_fraction(cmd, v),
                voltage_fraction: v,
                command_fraction: cmd,
            });
        }
    }
    samples
}

/// Least-squares cubic surface mapping desired speed fraction and voltage
/// fraction to the command fraction that reaches it.
#[derive(Clone, Debug, PartialEq)]
pub struct VoltageMap<T: Real> {
    coefficients: [T; BASIS_SIZE],
    /// Largest command-fraction misfit over the training set.
    pub fit_residual_max: T,
}

impl<T: Real> VoltageMap<T> {
    pub fn fit(samples: &[VoltageSample<T>]) -> Result<Self, VoltageError> {
        if samples.len() < BASIS_SIZE {
            return Err(VoltageError::NotEnoughSamples(samples.len()));
        }
        for s in samples {
            let ok = |x: T| x.is_finite() && x >= T::zero() && x <= real(1.5);
            if !(ok(s.achieved_fraction) && ok(s.command_fraction))
                || !(s.voltage_fraction > T::zero() && s.voltage_fraction.is_finite())
            {
                return Err(VoltageError::InvalidSample);
            }
        }

        let n = samples.len();
        let mut design = DMatrix::<T>::zeros(n, BASIS_SIZE);
        let mut rhs = DVector::<T>::zeros(n);
        for (row, s) in samples.iter().enumerate() {
            let b = basis(s.achieved_fraction, s.voltage_fraction);
            for (col, term) in b.iter().enumerate() {
                design[(row, col)] = *term;
            }
            rhs[row] = s.command_fraction;
        }

        let svd = design.clone().svd(true, true);
        let sigma_max = svd.singular_values.max();
        let cutoff = sigma_max * real(1e-10);
        if svd.singular_values.iter().any(|s| *s <= cutoff) {
            return Err(VoltageError::RankDeficient);
        }
        let solution = svd
            .solve(&rhs, cutoff)
            .map_err(|_| VoltageError::RankDeficient)?;

        let mut coefficients = [T::zero(); BASIS_SIZE];
        for (c, s) in coefficients.iter_mut().zip(solution.iter()) {
            *c = *s;
        }
        let residual = design * solution - rhs;
        let fit_residual_max = residual.amax();
        Ok(Self {
            coefficients,
            fit_residual_max,
        })
    }

    /// Command fraction predicted to reach `desired_fraction` at the given
    /// voltage fraction, clamped to the valid command range.
    pub fn command_for(&self, desired_fraction: T, voltage_fraction: T) -> T {
        let b = basis(desired_fraction, voltage_fraction);
        let mut cmd = T::zero();
        for (c, term) in self.coefficients.iter().zip(b.iter()) {
            cmd += *c * *term;
        }
        cmd.clamp(T::zero(), T::one())
    }

    pub fn coefficients(&self) -> &[T; BASIS_SIZE] {
        &self.coefficients
    }
}
