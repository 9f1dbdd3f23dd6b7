use super::{check_loss, projection_tolerance, LearnerError, Schedule, Start, StepAudit};
use crate::convex_opt::{fixed_point, project, TOLERANCES};
use crate::linmap::{
    canonicalize_with_cap, check_membership, compile_self_map_system, DeviationMatrix, LinMapSystem, ReducedSystem,
    VERTEX_CHECK_CAP,
};
use crate::sequence_form::{minimize_over_q, sequence_form_polytope, uniform_strategy, SequenceIndex, StandardPolytope};
use nalgebra::{DMatrix, DVector};

/// No-linear-swap-regret learner: projected gradient descent on the
/// matrices of M(Q → Q) with losses `ℓ xᵀ`, playing a fixed point of the
/// current matrix.
#[derive(Debug, Clone)]
pub struct LinearSwapLearner {
    system: LinMapSystem,
    reduced: ReducedSystem,
    q: StandardPolytope,
    schedule: Schedule,
    a: DMatrix<f64>,
    x: DVector<f64>,
    t: usize,
    fixed_point_residual: f64,
    membership_residual: f64,
    cumulative_loss: f64,
}

impl LinearSwapLearner {
    /// Starts from the identity map and the uniform strategy.
    pub fn new(index: &SequenceIndex, schedule: Schedule) -> Result<Self, LearnerError> {
        Self::with_start(index, schedule, Start::Identity)
    }

    pub fn with_start(index: &SequenceIndex, schedule: Schedule, start: Start) -> Result<Self, LearnerError> {
        let system = compile_self_map_system(index);
        let reduced = system.reduced();
        let q = sequence_form_polytope(index);
        let n = index.num_sequences();
        let (b, x) = match start {
            Start::Identity => (DMatrix::identity(n, n), uniform_strategy(index)),
            Start::FirstPlan => {
                let (_, plan) = minimize_over_q(index, &vec![0.0; n]);
                let mut constant = DMatrix::zeros(n, n);
                constant.set_column(0, &plan);
                (constant, plan)
            }
        };
        let a = canonicalize_with_cap(&DeviationMatrix::external(b), &system, VERTEX_CHECK_CAP)?.matrix;
        let membership_residual = check_membership(&a, &system, TOLERANCES.audit)?.residual;
        let fixed_point_residual = (&a * &x - &x).amax();
        Ok(LinearSwapLearner {
            system,
            reduced,
            q,
            schedule,
            a,
            x,
            t: 1,
            fixed_point_residual,
            membership_residual,
            cumulative_loss: 0.0,
        })
    }

    pub fn strategy(&self) -> &DVector<f64> {
        &self.x
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn system(&self) -> &LinMapSystem {
        &self.system
    }

    pub fn iteration(&self) -> usize {
        self.t
    }

    /// Σ_τ ⟨ℓ^τ, x^τ⟩ over the losses observed so far.
    pub fn cumulative_loss(&self) -> f64 {
        self.cumulative_loss
    }

    pub fn observe_loss(&mut self, loss: &DVector<f64>) -> Result<StepAudit, LearnerError> {
        check_loss(loss, self.x.len())?;
        let audit = StepAudit {
            matrix_loss: loss.dot(&(&self.a * &self.x)),
            fixed_point_residual: self.fixed_point_residual,
            membership_residual: self.membership_residual,
        };
        self.cumulative_loss += loss.dot(&self.x);
        let eta = self.schedule.eta(self.t);
        let step = &self.a - loss * self.x.transpose() * eta;
        let proj = project(&self.reduced.set, &self.reduced.from_matrix(&step), projection_tolerance(self.t))?;
        let a = self.reduced.to_matrix(&proj.y);
        let x = fixed_point(&a, &self.q, &TOLERANCES)?;
        self.membership_residual = check_membership(&a, &self.system, TOLERANCES.audit)?.residual;
        self.fixed_point_residual = (&a * &x - &x).amax();
        self.a = a;
        self.x = x;
        self.t += 1;
        Ok(audit)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::efg_model::build_decision_process_game;
    use crate::sequence_form::{derive_sequence_index, enumerate_reduced_plans};

    fn simplex_index(n: usize) -> SequenceIndex {
        let actions = (1..=n).map(|a| a.to_string()).collect();
        SequenceIndex::from_infosets(0, &[("s".to_string(), actions, 0)])
    }

    #[test]
    fn starts_at_identity_and_uniform() {
        let idx = derive_sequence_index(&build_decision_process_game(), 0);
        let l = LinearSwapLearner::new(&idx, Schedule::InvSqrt).unwrap();
        assert!(check_membership(l.matrix(), l.system(), 1e-9).unwrap().ok);
        for p in enumerate_reduced_plans(&idx, 100).unwrap() {
            let v = p.to_vector();
            assert!((l.matrix() * &v - &v).amax() < 1e-12);
        }

        let s = LinearSwapLearner::new(&simplex_index(3), Schedule::InvSqrt).unwrap();
        let third = 1.0 / 3.0;
        assert_eq!(s.strategy().as_slice(), &[1.0, third, third, third]);
    }

    #[test]
    fn first_plan_start() {
        let idx = derive_sequence_index(&build_decision_process_game(), 0);
        let l = LinearSwapLearner::with_start(&idx, Schedule::InvSqrt, Start::FirstPlan).unwrap();
        let first = enumerate_reduced_plans(&idx, 100).unwrap()[0].to_vector();
        assert_eq!(l.strategy(), &first);
        assert!(check_membership(l.matrix(), l.system(), 1e-9).unwrap().ok);
        assert!((l.matrix() * l.strategy() - l.strategy()).amax() < 1e-12);

        let s = LinearSwapLearner::with_start(&simplex_index(3), Schedule::InvSqrt, Start::FirstPlan).unwrap();
        assert_eq!(s.strategy().as_slice(), &[1.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn zero_loss_keeps_matrix() {
        let idx = derive_sequence_index(&build_decision_process_game(), 0);
        let mut l = LinearSwapLearner::new(&idx, Schedule::InvSqrt).unwrap();
        let a0 = l.matrix().clone();
        l.observe_loss(&DVector::zeros(10)).unwrap();
        assert!((l.matrix() - a0).amax() < 1e-9);
        assert!((l.matrix() * l.strategy() - l.strategy()).amax() <= 1e-8);
    }

    #[test]
    fn ledger_accumulates_played_loss() {
        let idx = simplex_index(2);
        let mut l = LinearSwapLearner::new(&idx, Schedule::InvSqrt).unwrap();
        let mut expected = 0.0;
        for t in 0..20 {
            let loss = DVector::from_vec(vec![0.0, (t % 2) as f64, ((t + 1) % 2) as f64]);
            expected += loss.dot(l.strategy());
            let audit = l.observe_loss(&loss).unwrap();
            assert!(audit.fixed_point_residual <= 1e-8 && audit.membership_residual <= 1e-7);
        }
        assert!((l.cumulative_loss() - expected).abs() < 1e-12);
    }

    #[test]
    fn rejects_out_of_range_loss() {
        let mut l = LinearSwapLearner::new(&simplex_index(2), Schedule::InvSqrt).unwrap();
        assert!(matches!(
            l.observe_loss(&DVector::from_vec(vec![0.0, 2.0, 0.0])),
            Err(LearnerError::LossRange { .. })
        ));
    }
}
