//! Primal active-set method for the allocation QP. The only inequalities are
//! variable bounds, so the working set is just a bound state per variable and
//! each equality-constrained subproblem reduces to a 6 x 6 solve in the
//! multiplier space of the wrench constraint.

use nalgebra::{Matrix6, SVector, Vector6};

use super::{AllocationError, QpProblem, MAX_ITERATIONS, VAR_COUNT};
use crate::num::{real, Real};
use crate::vehicle::PROPELLER_COUNT;

/// Bound state of one decision variable in the working set.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarState {
    Free,
    AtLower,
    AtUpper,
}

/// Result of one allocation solve.
#[derive(Clone, Debug, PartialEq)]
pub struct QpSolution<T: Real> {
    pub speeds_sq: SVector<T, PROPELLER_COUNT>,
    pub slack: Vector6<T>,
    pub objective: T,
    pub iterations: usize,
}

impl<T: Real> QpSolution<T> {
    pub fn decision_vector(&self) -> SVector<T, VAR_COUNT> {
        QpProblem::join(&self.speeds_sq, &self.slack)
    }
}

/// Warm-startable active-set solver. Keeping the previous working set and
/// speeds across calls makes consecutive control ticks converge in one or
/// two iterations because the active bounds rarely change between ticks.
#[derive(Clone, Debug)]
pub struct ActiveSetQp<T: Real> {
    working: [VarState; VAR_COUNT],
    previous_speeds: Option<SVector<T, PROPELLER_COUNT>>,
}

impl<T: Real> Default for ActiveSetQp<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> ActiveSetQp<T> {
    pub fn new() -> Self {
        Self {
            working: [VarState::Free; VAR_COUNT],
            previous_speeds: None,
        }
    }

    pub fn working_set(&self) -> &[VarState; VAR_COUNT] {
        &self.working
    }

    /// Solves `min y^T H y` over `C y = target` within the bounds.
    pub fn solve(
        &mut self,
        problem: &QpProblem<T>,
        target: &SVector<T, 6>,
    ) -> Result<QpSolution<T>, AllocationError> {
        problem.validate()?;
        let half = real::<T>(0.5);
        let two = real::<T>(2.0);

        // Feasible start: speeds from the warm start clamped into their box,
        // slack set to whatever closes the equality exactly.
        let mut y = SVector::<T, VAR_COUNT>::zeros();
        for i in 0..PROPELLER_COUNT {
            let fallback = (problem.lower[i] + problem.upper[i]) * half;
            let raw = match self.working[i] {
                VarState::AtLower => problem.lower[i],
                VarState::AtUpper => problem.upper[i],
                VarState::Free => self.previous_speeds.map_or(fallback, |w| w[i]),
            };
            y[i] = raw.clamp(problem.lower[i], problem.upper[i]);
        }
        let mut residual = *target;
        for i in 0..PROPELLER_COUNT {
            residual -= problem.columns.column(i) * y[i];
        }
        for r in 0..6 {
            let i = PROPELLER_COUNT + r;
            if residual[r].abs() > problem.upper[i] {
                return Err(AllocationError::SlackBoundExceeded);
            }
            y[i] = residual[r];
            self.working[i] = VarState::Free;
        }

        let mut iterations = 0;
        loop {
            if iterations >= MAX_ITERATIONS {
                return Err(AllocationError::IterationLimit);
            }
            iterations += 1;

            // Equality subproblem on the free variables via the wrench-space
            // normal matrix M = sum c_i c_i^T / (2 h_i).
            let mut m = Matrix6::<T>::zeros();
            let mut b = *target;
            for i in 0..VAR_COUNT {
                let c = problem.columns.column(i);
                match self.working[i] {
                    VarState::Free => {
                        m += c * c.transpose() / (two * problem.weights[i]);
                    }
                    _ => {
                        b -= c * y[i];
                    }
                }
            }
            let chol = nalgebra::Cholesky::new(m).ok_or_else(|| {
                AllocationError::NumericalFailure("free-set normal matrix lost rank".into())
            })?;
            let nu = -chol.solve(&b);

            // Ratio test toward the subproblem optimum.
            let mut alpha = T::one();
            let mut blocking: Option<(usize, VarState)> = None;
            for i in 0..VAR_COUNT {
                if self.working[i] != VarState::Free {
                    continue;
                }
                let y_star = -problem.columns.column(i).dot(&nu) / (two * problem.weights[i]);
                let delta = y_star - y[i];
                if delta.abs() <= real::<T>(1e-14) * (T::one() + y[i].abs()) {
                    continue;
                }
                let (limit, side) = if delta > T::zero() {
                    (problem.upper[i], VarState::AtUpper)
                } else {
                    (problem.lower[i], VarState::AtLower)
                };
                let step = (limit - y[i]) / delta;
                if step < alpha {
                    alpha = step.max(T::zero());
                    blocking = Some((i, side));
                }
            }

            // Advance every free variable by the permitted fraction. A full
            // step lands exactly on the subproblem optimum; the incremental
            // form would smear ulp-level error through the slack rows, where
            // the penalty weight amplifies it.
            for i in 0..VAR_COUNT {
                if self.working[i] != VarState::Free {
                    continue;
                }
                let y_star = -problem.columns.column(i).dot(&nu) / (two * problem.weights[i]);
                if blocking.is_none() {
                    y[i] = y_star;
                } else {
                    let delta = y_star - y[i];
                    y[i] += delta * alpha;
                }
            }
            if let Some((i, side)) = blocking {
                y[i] = match side {
                    VarState::AtLower => problem.lower[i],
                    VarState::AtUpper => problem.upper[i],
                    VarState::Free => unreachable!(),
                };
                self.working[i] = side;
                continue;
            }

            // Full step taken: release the bound whose multiplier says the
            // objective improves by moving inward, if any.
            let mut worst: Option<(usize, T)> = None;
            for i in 0..VAR_COUNT {
                let side = self.working[i];
                if side == VarState::Free {
                    continue;
                }
                let coupled = problem.columns.column(i).dot(&nu);
                let grad = two * problem.weights[i] * y[i] + coupled;
                let scale = T::one() + (two * problem.weights[i] * y[i]).abs() + coupled.abs();
                let violation = match side {
                    VarState::AtLower => -grad,
                    VarState::AtUpper => grad,
                    VarState::Free => unreachable!(),
                } / scale;
                if violation > real(1e-10) && worst.map_or(true, |(_, v)| violation > v) {
                    worst = Some((i, violation));
                }
            }
            match worst {
                Some((i, _)) => {
                    self.working[i] = VarState::Free;
                }
                None => break,
            }
        }

        let (speeds_sq, slack) = QpProblem::split(&y);
        self.previous_speeds = Some(speeds_sq);
        Ok(QpSolution {
            speeds_sq,
            slack,
            objective: problem.objective(&y),
            iterations,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::super::{build_problem, AllocationWeights};
    use super::*;
    use crate::vehicle::test_support::reference_vehicle;
    use crate::vehicle::AllocationMatrix;
    use approx::assert_relative_eq;

    fn reference_problem() -> QpProblem<f64> {
        let v = reference_vehicle();
        let a = AllocationMatrix::from_params(&v).unwrap();
        build_problem(&a, &v, &AllocationWeights::default()).unwrap()
    }

    fn equality_residual(p: &QpProblem<f64>, s: &QpSolution<f64>, u: &Vector6<f64>) -> f64 {
        (p.columns * s.decision_vector() - u).norm()
    }

    #[test]
    fn hover_thrust_splits_evenly_over_mains() {
        let p = reference_problem();
        let mut qp = ActiveSetQp::new();
        let u = Vector6::new(0.0, 0.0, 81.0306, 0.0, 0.0, 0.0);
        let s = qp.solve(&p, &u).unwrap();

        let w_hover = 81.0306 / (4.0 * 1.6e-4);
        for i in 0..4 {
            assert_relative_eq!(s.speeds_sq[i], w_hover, max_relative = 1e-4);
        }
        // Auxiliaries idle: they cannot help a pure thrust wrench.
        for i in 4..8 {
            assert_eq!(s.speeds_sq[i], 8.8e4);
        }
        assert!(s.slack.norm() <= 1e-6 * 81.0306);
        assert!(equality_residual(&p, &s, &u) < 1e-9);
    }

    #[test]
    fn saturated_thrust_pins_mains_and_spills_to_slack() {
        let p = reference_problem();
        let mut qp = ActiveSetQp::new();
        let u = Vector6::new(0.0, 0.0, 2.0 * 177.76, 0.0, 0.0, 0.0);
        let s = qp.solve(&p, &u).unwrap();
        for i in 0..4 {
            assert_eq!(s.speeds_sq[i], 2.7775e5);
        }
        assert_relative_eq!(s.slack[2], 177.76, max_relative = 1e-6);
        assert!(equality_residual(&p, &s, &u) < 1e-9);
    }

    #[test]
    fn lateral_force_engages_one_aux_side() {
        let p = reference_problem();
        let mut qp = ActiveSetQp::new();
        let u = Vector6::new(1.0, 0.0, 81.0306, 0.0, 0.0, 0.0);
        let s = qp.solve(&p, &u).unwrap();
        assert!(equality_residual(&p, &s, &u) < 1e-9);
        // The rotor on -x blows along +x and must carry the force.
        assert!(s.speeds_sq[6] > s.speeds_sq[4]);
        // With the opposing rotor pinned at idle, one weak lateral column
        // balances the slack penalty at roughly a quarter of the request.
        assert!(s.slack[0] > 0.1 && s.slack[0] < 0.4, "slack {}", s.slack[0]);
    }

    #[test]
    fn warm_start_resolves_in_few_iterations() {
        let p = reference_problem();
        let mut qp = ActiveSetQp::new();
        let u = Vector6::new(0.3, -0.2, 81.0, 0.1, -0.1, 0.05);
        let cold = qp.solve(&p, &u).unwrap();
        let warm = qp.solve(&p, &u).unwrap();
        assert!(warm.iterations <= 2, "warm {} cold {}", warm.iterations, cold.iterations);
        assert_relative_eq!(warm.objective, cold.objective, max_relative = 1e-9);
    }

    #[test]
    fn speeds_always_respect_bounds() {
        let p = reference_problem();
        let mut qp = ActiveSetQp::new();
        for k in 0..50 {
            let t = k as f64 / 49.0;
            let u = Vector6::new(
                6.0 * (t - 0.5),
                4.0 * (0.5 - t),
                40.0 + 300.0 * t,
                0.6 * (t - 0.2),
                -0.5 * t,
                0.8 * (t - 0.6),
            );
            let s = qp.solve(&p, &u).unwrap();
            for i in 0..8 {
                assert!(s.speeds_sq[i] >= p.lower[i] - 1e-9);
                assert!(s.speeds_sq[i] <= p.upper[i] + 1e-9);
            }
            assert!(equality_residual(&p, &s, &u) < 1e-8);
        }
    }

    #[test]
    fn oversized_target_exceeds_slack_bound() {
        let v = reference_vehicle();
        let a = AllocationMatrix::from_params(&v).unwrap();
        let mut weights = AllocationWeights::default();
        weights.slack_bound = 1e-3;
        let p = build_problem(&a, &v, &weights).unwrap();
        let mut qp = ActiveSetQp::new();
        let u = Vector6::new(0.0, 0.0, 500.0, 0.0, 0.0, 0.0);
        assert_eq!(qp.solve(&p, &u), Err(AllocationError::SlackBoundExceeded));
    }
}
