//! Optimality certificate for allocation solutions, computed from scratch:
//! the multipliers are re-estimated by least squares over the free-variable
//! stationarity rows rather than taken from the solver, so agreement means
//! two different deductions of the same optimum.
//!
//! All residuals are reported relative to the size of the terms that formed
//! them. The slack penalty puts gradients near 1e9, where a fixed absolute
//! tolerance would be meaningless.

use nalgebra::{DMatrix, DVector, SVector, Vector6};

use super::{AllocationError, QpProblem, VAR_COUNT};
use crate::num::{real, Real};

/// Normalized Karush-Kuhn-Tucker residuals of a candidate solution.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KktReport<T: Real> {
    /// Largest stationarity misfit over free variables.
    pub stationarity: T,
    /// Largest wrong-signed bound multiplier.
    pub dual_feasibility: T,
    /// Equality violation `||C y - u||` over the target scale.
    pub primal_equality: T,
    /// Largest box-bound violation over the bound scale.
    pub bound_violation: T,
}

impl<T: Real> KktReport<T> {
    pub fn worst(&self) -> T {
        self.stationarity
            .max(self.dual_feasibility)
            .max(self.primal_equality)
            .max(self.bound_violation)
    }

    pub fn passes(&self, tol: T) -> bool {
        self.worst() <= tol
    }
}

/// Checks a decision vector against the first-order optimality conditions of
/// the problem. Variables within `1e-9` (relative) of a bound are treated as
/// active; everything else must be stationary under one common multiplier.
pub fn verify_kkt<T: Real>(
    problem: &QpProblem<T>,
    target: &Vector6<T>,
    y: &SVector<T, VAR_COUNT>,
) -> Result<KktReport<T>, AllocationError> {
    problem.validate()?;
    let two = real::<T>(2.0);
    let near = |value: T, bound: T| (value - bound).abs() <= real::<T>(1e-9) * bound.abs().max(T::one());

    #[derive(Clone, Copy, PartialEq)]
    enum Side {
        Free,
        Lower,
        Upper,
    }
    let mut side = [Side::Free; VAR_COUNT];
    let mut bound_violation = T::zero();
    for i in 0..VAR_COUNT {
        let range = (problem.upper[i] - problem.lower[i]).max(T::one());
        let below = (problem.lower[i] - y[i]).max(T::zero());
        let above = (y[i] - problem.upper[i]).max(T::zero());
        bound_violation = bound_violation.max((below + above) / range);
        if near(y[i], problem.lower[i]) {
            side[i] = Side::Lower;
        } else if near(y[i], problem.upper[i]) {
            side[i] = Side::Upper;
        }
    }

    // Re-derive the equality multiplier from the free rows alone.
    let free: Vec<usize> = (0..VAR_COUNT).filter(|i| side[*i] == Side::Free).collect();
    let mut rows = DMatrix::<T>::zeros(free.len().max(1), 6);
    let mut rhs = DVector::<T>::zeros(free.len().max(1));
    for (row, &i) in free.iter().enumerate() {
        for r in 0..6 {
            rows[(row, r)] = problem.columns[(r, i)];
        }
        rhs[row] = -two * problem.weights[i] * y[i];
    }
    // Normal equations are the accurate route here, not a shortcut: the free
    // rows always include the identity block of the free slacks, so the
    // system is near-orthonormal, and the Gram accumulation cancels the
    // symmetric couplings exactly. A dense orthogonal factorization instead
    // smears rounding of the largest right-hand side across every multiplier
    // component, which swamps the rows whose own terms are tiny.
    let nu: Vector6<T> = if free.is_empty() {
        Vector6::zeros()
    } else {
        let gram = rows.transpose() * &rows;
        let projected = rows.transpose() * &rhs;
        let solved = match gram.clone().cholesky() {
            Some(chol) => chol.solve(&projected),
            None => {
                let svd = gram.svd(true, true);
                let cutoff = svd.singular_values.max() * real(1e-12);
                svd.solve(&projected, cutoff)
                    .map_err(|e| AllocationError::NumericalFailure(e.to_string()))?
            }
        };
        Vector6::from_iterator(solved.iter().copied())
    };

    let mut stationarity = T::zero();
    let mut dual_feasibility = T::zero();
    for i in 0..VAR_COUNT {
        let coupled = problem.columns.column(i).dot(&nu);
        let gradient_term = two * problem.weights[i] * y[i];
        let scale = T::one() + gradient_term.abs() + coupled.abs();
        let grad = gradient_term + coupled;
        match side[i] {
            Side::Free => {
                stationarity = stationarity.max(grad.abs() / scale);
            }
            Side::Lower => {
                dual_feasibility = dual_feasibility.max((-grad).max(T::zero()) / scale);
            }
            Side::Upper => {
                dual_feasibility = dual_feasibility.max(grad.max(T::zero()) / scale);
            }
        }
    }

    let primal = (problem.columns * y - target).norm() / target.norm().max(T::one());

    Ok(KktReport {
        stationarity,
        dual_feasibility,
        primal_equality: primal,
        bound_violation,
    })
}

#[cfg(test)]
mod tests {
    use super::super::{build_problem, ActiveSetQp, AllocationWeights};
    use super::*;
    use crate::vehicle::test_support::reference_vehicle;
    use crate::vehicle::AllocationMatrix;

    fn reference_problem() -> QpProblem<f64> {
        let v = reference_vehicle();
        let a = AllocationMatrix::from_params(&v).unwrap();
        build_problem(&a, &v, &AllocationWeights::default()).unwrap()
    }

    #[test]
    fn solver_output_certifies() {
        let p = reference_problem();
        let mut qp = ActiveSetQp::new();
        for u in [
            Vector6::new(0.0, 0.0, 81.0306, 0.0, 0.0, 0.0),
            Vector6::new(1.5, -0.8, 120.0, 0.2, -0.3, 0.4),
            Vector6::new(0.0, 0.0, 400.0, 0.0, 0.0, 0.0),
            Vector6::new(-3.0, 2.0, 30.0, -0.5, 0.1, -0.6),
        ] {
            let s = qp.solve(&p, &u).unwrap();
            let report = verify_kkt(&p, &u, &s.decision_vector()).unwrap();
            assert!(report.passes(1e-8), "u {u:?} report {report:?}");
        }
    }

    #[test]
    fn perturbed_solution_fails_certification() {
        let p = reference_problem();
        let mut qp = ActiveSetQp::new();
        let u = Vector6::new(0.0, 0.0, 81.0306, 0.0, 0.0, 0.0);
        let s = qp.solve(&p, &u).unwrap();
        let mut y = s.decision_vector();
        // Shift thrust between two mains: equality holds, optimality breaks.
        y[0] += 500.0;
        y[1] -= 500.0;
        let report = verify_kkt(&p, &u, &y).unwrap();
        assert!(!report.passes(1e-8));
        assert!(report.stationarity > 1e-6);
    }

    #[test]
    fn out_of_bounds_point_is_flagged() {
        let p = reference_problem();
        let mut y = SVector::<f64, VAR_COUNT>::zeros();
        y[0] = p.upper[0] + 1e4;
        let u = p.columns * y;
        let report = verify_kkt(&p, &u, &y).unwrap();
        assert!(report.bound_violation > 1e-3);
    }

    #[test]
    fn equality_violation_is_flagged() {
        let p = reference_problem();
        let mut qp = ActiveSetQp::new();
        let u = Vector6::new(0.0, 0.0, 81.0306, 0.0, 0.0, 0.0);
        let s = qp.solve(&p, &u).unwrap();
        let off_target = u + Vector6::new(0.0, 0.0, 5.0, 0.0, 0.0, 0.0);
        let report = verify_kkt(&p, &off_target, &s.decision_vector()).unwrap();
        assert!(report.primal_equality > 1e-3);
    }
}
