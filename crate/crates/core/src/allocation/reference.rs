//! Independent reference solver for the allocation problem: accelerated
//! projected gradient descent on the reduced speed-space objective
//! `phi(w) = w^T H_w w + (u - A w)^T H_d (u - A w)`, whose minimizer equals
//! the full QP's because the slack enters the equality only through
//! `d = u - A w` and its box never binds in practice.
//!
//! It shares no linear algebra with the active-set path, which makes it the
//! arbiter when certifying that solver: slow, simple, and hard to fool.

use nalgebra::{SMatrix, SVector, Vector6};

use super::{AllocationError, QpProblem, VAR_COUNT};
use crate::num::{real, Real};
use crate::vehicle::PROPELLER_COUNT;

#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceSolution<T: Real> {
    pub speeds_sq: SVector<T, PROPELLER_COUNT>,
    pub slack: Vector6<T>,
    pub objective: T,
    pub iterations: usize,
}

impl<T: Real> ReferenceSolution<T> {
    pub fn decision_vector(&self) -> SVector<T, VAR_COUNT> {
        QpProblem::join(&self.speeds_sq, &self.slack)
    }
}

/// Solves the allocation problem by accelerated projected gradient with a
/// monotone restart. `tol` bounds the infinity-norm of the final projected
/// step relative to the iterate scale; `1e-8` reproduces the active-set
/// objective to well below one part per million.
pub fn solve_reference<T: Real>(
    problem: &QpProblem<T>,
    target: &Vector6<T>,
    tol: T,
    max_iterations: usize,
) -> Result<ReferenceSolution<T>, AllocationError> {
    problem.validate()?;
    let two = real::<T>(2.0);

    let mut a = SMatrix::<T, 6, PROPELLER_COUNT>::zeros();
    let mut h_w = SVector::<T, PROPELLER_COUNT>::zeros();
    let mut h_d = Vector6::<T>::zeros();
    for i in 0..PROPELLER_COUNT {
        a.set_column(i, &problem.columns.column(i).clone_owned());
        h_w[i] = problem.weights[i];
    }
    for r in 0..6 {
        h_d[r] = problem.weights[PROPELLER_COUNT + r];
    }

    // Lipschitz constant of the gradient: top eigenvalue of the Hessian
    // 2 (H_w + A^T H_d A).
    let mut hessian = SMatrix::<T, PROPELLER_COUNT, PROPELLER_COUNT>::zeros();
    for r in 0..6 {
        let row = a.row(r).transpose();
        hessian += row * row.transpose() * (two * h_d[r]);
    }
    for i in 0..PROPELLER_COUNT {
        hessian[(i, i)] += two * h_w[i];
    }
    let lipschitz = nalgebra::SymmetricEigen::new(hessian).eigenvalues.max();
    if !(lipschitz > T::zero() && lipschitz.is_finite()) {
        return Err(AllocationError::NumericalFailure(
            "gradient Lipschitz constant is not positive".into(),
        ));
    }

    let project = |w: &SVector<T, PROPELLER_COUNT>| -> SVector<T, PROPELLER_COUNT> {
        SVector::from_fn(|i, _| w[i].clamp(problem.lower[i], problem.upper[i]))
    };
    let phi = |w: &SVector<T, PROPELLER_COUNT>| -> T {
        let d = target - a * w;
        w.zip_map(&h_w, |wi, hi| hi * wi * wi).sum()
            + d.zip_map(&h_d, |di, hi| hi * di * di).sum()
    };
    let grad = |w: &SVector<T, PROPELLER_COUNT>| -> SVector<T, PROPELLER_COUNT> {
        let d = target - a * w;
        w.component_mul(&h_w) * two - a.transpose() * d.component_mul(&h_d) * two
    };

    let mut x = project(&SVector::from_fn(|i, _| {
        (problem.lower[i] + problem.upper[i]) * real::<T>(0.5)
    }));
    let mut y = x;
    let mut t = T::one();
    let mut phi_x = phi(&x);
    let mut iterations = 0;

    while iterations < max_iterations {
        iterations += 1;
        let mut x_next = project(&(y - grad(&y) / lipschitz));
        let mut phi_next = phi(&x_next);
        if phi_next > phi_x {
            // Momentum overshot: restart from the best point.
            t = T::one();
            x_next = project(&(x - grad(&x) / lipschitz));
            phi_next = phi(&x_next);
        }
        let step = (x_next - x).amax();
        let t_next = (T::one() + (T::one() + real::<T>(4.0) * t * t).sqrt()) * real(0.5);
        y = x_next + (x_next - x) * ((t - T::one()) / t_next);
        t = t_next;
        x = x_next;
        phi_x = phi_next;
        if step <= tol * (T::one() + x.amax()) {
            break;
        }
    }

    let slack = target - a * x;
    for r in 0..6 {
        if slack[r].abs() > problem.upper[PROPELLER_COUNT + r] {
            return Err(AllocationError::SlackBoundExceeded);
        }
    }
    Ok(ReferenceSolution {
        speeds_sq: x,
        slack,
        objective: phi_x,
        iterations,
    })
}
