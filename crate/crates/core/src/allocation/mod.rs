//! Wrench allocation: distributing a commanded body wrench over eight rotors
//! by solving a box-constrained weighted least-effort problem with slack.
//!
//! The decision vector is `y = [w; d]` with squared rotor speeds `w` and a
//! slack wrench `d`, coupled by the equality `A w + d = u`. Minimizing
//! `y^T H y` with a crushing slack penalty returns the least-effort exact
//! allocation whenever `u` is reachable and degrades to the closest
//! reachable wrench when it is not, without a separate feasibility phase.

mod kkt;
pub mod reference;
mod solver;

pub use kkt::{verify_kkt, KktReport};
pub use solver::{ActiveSetQp, QpSolution, VarState};

use nalgebra::{SMatrix, SVector};
use thiserror::Error;

use crate::num::{real, Real};
use crate::vehicle::{AllocationMatrix, PropellerClass, VehicleParams, PROPELLER_COUNT};

/// Total decision variables: eight squared speeds plus six slack components.
pub const VAR_COUNT: usize = PROPELLER_COUNT + 6;

/// Active-set iteration cap, ten sweeps over the variable count.
pub const MAX_ITERATIONS: usize = 10 * VAR_COUNT;

#[derive(Debug, Error, PartialEq)]
pub enum AllocationError {
    #[error("allocation problem: {0}")]
    InvalidProblem(String),
    #[error("target wrench cannot be bracketed by the slack bound")]
    SlackBoundExceeded,
    #[error("active set did not settle within {MAX_ITERATIONS} iterations")]
    IterationLimit,
    #[error("allocation linear algebra failed: {0}")]
    NumericalFailure(String),
}

/// Effort and slack weighting of the allocation objective.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AllocationWeights<T: Real> {
    /// Effort weight on each main rotor's squared speed.
    pub main_effort: T,
    /// Effort weight on each auxiliary rotor's squared speed.
    pub aux_effort: T,
    /// Penalty on the slack wrench; large enough that slack engages only
    /// when the speed box leaves no alternative.
    pub slack_penalty: T,
    /// Bound on each slack component, effectively infinite.
    pub slack_bound: T,
}

impl<T: Real> Default for AllocationWeights<T> {
    fn default() -> Self {
        Self {
            main_effort: T::one(),
            aux_effort: real(4.0),
            slack_penalty: real(1e13),
            slack_bound: real(1e6),
        }
    }
}

impl<T: Real> AllocationWeights<T> {
    pub fn validate(&self) -> Result<(), AllocationError> {
        for (name, v) in [
            ("main_effort", self.main_effort),
            ("aux_effort", self.aux_effort),
            ("slack_penalty", self.slack_penalty),
            ("slack_bound", self.slack_bound),
        ] {
            if !(v > T::zero() && v.is_finite()) {
                return Err(AllocationError::InvalidProblem(format!(
                    "{name} must be positive and finite"
                )));
            }
        }
        Ok(())
    }
}

/// Fully assembled box-constrained allocation QP.
#[derive(Clone, Debug, PartialEq)]
pub struct QpProblem<T: Real> {
    /// Equality columns `C = [A | I]`, so `C y = u`.
    pub columns: SMatrix<T, 6, VAR_COUNT>,
    /// Diagonal of `H`.
    pub weights: SVector<T, VAR_COUNT>,
    pub lower: SVector<T, VAR_COUNT>,
    pub upper: SVector<T, VAR_COUNT>,
}

impl<T: Real> QpProblem<T> {
    /// Objective `y^T H y` of a full decision vector.
    pub fn objective(&self, y: &SVector<T, VAR_COUNT>) -> T {
        y.zip_map(&self.weights, |yi, hi| hi * yi * yi).sum()
    }

    pub fn validate(&self) -> Result<(), AllocationError> {
        for i in 0..VAR_COUNT {
            if !(self.weights[i] > T::zero() && self.weights[i].is_finite()) {
                return Err(AllocationError::InvalidProblem(format!(
                    "weight {i} must be positive"
                )));
            }
            if !(self.lower[i] < self.upper[i]) {
                return Err(AllocationError::InvalidProblem(format!(
                    "bounds of variable {i} are not ordered"
                )));
            }
        }
        Ok(())
    }

    /// Splits a decision vector into squared speeds and slack.
    pub fn split(
        y: &SVector<T, VAR_COUNT>,
    ) -> (SVector<T, PROPELLER_COUNT>, SVector<T, 6>) {
        let mut w = SVector::<T, PROPELLER_COUNT>::zeros();
        let mut d = SVector::<T, 6>::zeros();
        for i in 0..PROPELLER_COUNT {
            w[i] = y[i];
        }
        for r in 0..6 {
            d[r] = y[PROPELLER_COUNT + r];
        }
        (w, d)
    }

    /// Joins speeds and slack back into a decision vector.
    pub fn join(
        w: &SVector<T, PROPELLER_COUNT>,
        d: &SVector<T, 6>,
    ) -> SVector<T, VAR_COUNT> {
        let mut y = SVector::<T, VAR_COUNT>::zeros();
        for i in 0..PROPELLER_COUNT {
            y[i] = w[i];
        }
        for r in 0..6 {
            y[PROPELLER_COUNT + r] = d[r];
        }
        y
    }
}

/// Assembles the allocation QP for a vehicle.
pub fn build_problem<T: Real>(
    matrix: &AllocationMatrix<T>,
    params: &VehicleParams<T>,
    weights: &AllocationWeights<T>,
) -> Result<QpProblem<T>, AllocationError> {
    weights.validate()?;
    let mut columns = SMatrix::<T, 6, VAR_COUNT>::zeros();
    let mut h = SVector::<T, VAR_COUNT>::zeros();
    let mut lower = SVector::<T, VAR_COUNT>::zeros();
    let mut upper = SVector::<T, VAR_COUNT>::zeros();

    for (i, p) in params.propellers.iter().enumerate() {
        columns.set_column(i, &matrix.column(i));
        h[i] = match p.class {
            PropellerClass::Main => weights.main_effort,
            PropellerClass::Auxiliary => weights.aux_effort,
        };
        lower[i] = p.speed_sq_min;
        upper[i] = p.speed_sq_max;
    }
    for r in 0..6 {
        let i = PROPELLER_COUNT + r;
        columns[(r, i)] = T::one();
        h[i] = weights.slack_penalty;
        lower[i] = -weights.slack_bound;
        upper[i] = weights.slack_bound;
    }

    let problem = QpProblem {
        columns,
        weights: h,
        lower,
        upper,
    };
    problem.validate()?;
    Ok(problem)
}
