use super::{check_loss, projection_tolerance, LearnerError, Schedule, StepAudit};
use crate::convex_opt::{fixed_point, project, AffineBoxSet, TOLERANCES};
use crate::linmap::{canonicalize_with_cap, compile_self_map_system, DeviationMatrix, LinMapSystem};
use crate::sequence_form::{minimize_over_q, sequence_form_polytope, SequenceIndex, StandardPolytope};
use nalgebra::{DMatrix, DVector};
use std::ops::Range;

/// Convex hull of the trigger maps, parametrized by a distribution λ over
/// trigger sequences σ̂ (∅ included) and scaled continuations
/// `z_σ̂ ∈ λ_σ̂ Q_j`:
/// `A(θ) = Σ λ_σ̂ (I − D_σ̂) + Σ z_σ̂ e_σ̂ᵀ`.
#[derive(Debug, Clone)]
pub struct TriggerSet {
    pub index: SequenceIndex,
    pub set: AffineBoxSet,
    /// Sequences covered by each continuation block.
    pub blocks: Vec<Range<usize>>,
    /// Offset of each block in θ.
    pub offsets: Vec<usize>,
}

impl TriggerSet {
    pub fn new(index: &SequenceIndex) -> Self {
        let n = index.num_sequences();
        let mut blocks = Vec::with_capacity(n);
        let mut offsets = Vec::with_capacity(n);
        let mut dim = n;
        for s in 0..n {
            let block = match index.seq_infoset(s) {
                None => 0..n,
                Some(j) => index.subtree(j),
            };
            offsets.push(dim);
            dim += block.len();
            blocks.push(block);
        }
        let mut rows = vec![(0..n).map(|s| (s, 1.0)).collect::<Vec<_>>()];
        let mut rhs = vec![1.0];
        for s in 0..n {
            let (block, off) = (&blocks[s], offsets[s]);
            let z = |t: usize| off + t - block.start;
            let top = index.seq_infoset(s);
            if top.is_none() {
                rows.push(vec![(z(0), 1.0), (s, -1.0)]);
                rhs.push(0.0);
            }
            for i in 0..index.num_infosets() {
                if !block.contains(&index.infoset(i).first_seq) {
                    continue;
                }
                let mut row: Vec<(usize, f64)> = index.actions(i).map(|t| (z(t), 1.0)).collect();
                if Some(i) == top {
                    row.push((s, -1.0));
                } else {
                    row.push((z(index.parent(i)), -1.0));
                }
                rows.push(row);
                rhs.push(0.0);
            }
        }
        TriggerSet {
            index: index.clone(),
            set: AffineBoxSet {
                rows,
                rhs,
                lo: vec![0.0; dim],
                hi: vec![1.0; dim],
            },
            blocks,
            offsets,
        }
    }

    pub fn dim(&self) -> usize {
        self.set.dim()
    }

    /// θ for the constant map onto `plan`.
    pub fn constant(&self, plan: &DVector<f64>) -> DVector<f64> {
        let mut theta = DVector::zeros(self.dim());
        theta[0] = 1.0;
        for s in 0..plan.len() {
            theta[self.offsets[0] + s] = plan[s];
        }
        theta
    }

    pub fn matrix(&self, theta: &DVector<f64>) -> DMatrix<f64> {
        let n = self.index.num_sequences();
        let mut a = DMatrix::zeros(n, n);
        for s in 0..n {
            let lam = theta[s];
            if lam != 0.0 {
                for r in 0..n {
                    if !self.index.is_descendant(r, s) {
                        a[(r, r)] += lam;
                    }
                }
            }
            for (k, r) in self.blocks[s].clone().enumerate() {
                a[(r, s)] += theta[self.offsets[s] + k];
            }
        }
        a
    }

    /// Gradient of `θ ↦ ⟨ℓ xᵀ, A(θ)⟩`.
    pub fn gradient(&self, loss: &DVector<f64>, x: &DVector<f64>) -> DVector<f64> {
        let n = self.index.num_sequences();
        let diag: Vec<f64> = (0..n).map(|s| loss[s] * x[s]).collect();
        let total: f64 = diag.iter().sum();
        let mut g = DVector::zeros(self.dim());
        for s in 0..n {
            let below: f64 = diag[s] + self.index.below(s).map(|r| diag[r]).sum::<f64>();
            g[s] = total - below;
            for (k, r) in self.blocks[s].clone().enumerate() {
                g[self.offsets[s] + k] = loss[r] * x[s];
            }
        }
        g
    }
}

/// Projected gradient descent over the trigger hull followed by a fixed
/// point, the trigger-regret counterpart of the linear-swap learner.
#[derive(Debug, Clone)]
pub struct TriggerLearner {
    triggers: TriggerSet,
    system: LinMapSystem,
    q: StandardPolytope,
    schedule: Schedule,
    theta: DVector<f64>,
    a: DMatrix<f64>,
    x: DVector<f64>,
    t: usize,
    fixed_point_residual: f64,
    membership_residual: f64,
}

impl TriggerLearner {
    pub fn new(index: &SequenceIndex, schedule: Schedule) -> Result<Self, LearnerError> {
        let triggers = TriggerSet::new(index);
        let system = compile_self_map_system(index);
        let q = sequence_form_polytope(index);
        let (_, plan) = minimize_over_q(index, &vec![0.0; index.num_sequences()]);
        let theta = triggers.constant(&plan);
        let a = triggers.matrix(&theta);
        let mut l = TriggerLearner {
            triggers,
            system,
            q,
            schedule,
            theta,
            a,
            x: plan,
            t: 1,
            fixed_point_residual: 0.0,
            membership_residual: 0.0,
        };
        l.refresh_audit()?;
        Ok(l)
    }

    fn refresh_audit(&mut self) -> Result<(), LearnerError> {
        let canonical = canonicalize_with_cap(&DeviationMatrix::external(self.a.clone()), &self.system, 0)?;
        self.membership_residual = crate::linmap::check_membership(&canonical.matrix, &self.system, TOLERANCES.audit)?.residual;
        self.fixed_point_residual = (&self.a * &self.x - &self.x).amax();
        Ok(())
    }

    pub fn strategy(&self) -> &DVector<f64> {
        &self.x
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn theta(&self) -> &DVector<f64> {
        &self.theta
    }

    pub fn trigger_set(&self) -> &TriggerSet {
        &self.triggers
    }

    pub fn observe_loss(&mut self, loss: &DVector<f64>) -> Result<StepAudit, LearnerError> {
        check_loss(loss, self.x.len())?;
        let audit = StepAudit {
            matrix_loss: loss.dot(&(&self.a * &self.x)),
            fixed_point_residual: self.fixed_point_residual,
            membership_residual: self.membership_residual,
        };
        let eta = self.schedule.eta(self.t);
        let step = &self.theta - self.triggers.gradient(loss, &self.x) * eta;
        let proj = project(&self.triggers.set, &step, projection_tolerance(self.t))?;
        self.theta = proj.y;
        self.a = self.triggers.matrix(&self.theta);
        self.x = fixed_point(&self.a, &self.q, &TOLERANCES)?;
        self.t += 1;
        self.refresh_audit()?;
        Ok(audit)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::efg_model::build_decision_process_game;
    use crate::linmap::raw_trigger_matrix;
    use crate::sequence_form::{derive_sequence_index, enumerate_reduced_plans};
    use rand::{Rng, SeedableRng};

    #[test]
    fn vertices_of_theta_are_trigger_maps() {
        let idx = derive_sequence_index(&build_decision_process_game(), 0);
        let ts = TriggerSet::new(&idx);
        let b3 = idx.find_seq("B", "3").unwrap();
        let b4 = idx.find_seq("B", "4").unwrap();
        let mut theta = DVector::zeros(ts.dim());
        theta[b3] = 1.0;
        theta[ts.offsets[b3] + (b4 - ts.blocks[b3].start)] = 1.0;
        assert!(ts.set.residual(&theta) < 1e-12);
        let mut cont = DVector::zeros(10);
        cont[b4] = 1.0;
        let raw = raw_trigger_matrix(&idx, b3, &cont).unwrap();
        assert!((ts.matrix(&theta) - raw).amax() < 1e-12);
    }

    #[test]
    fn gradient_matches_inner_product() {
        let idx = derive_sequence_index(&build_decision_process_game(), 0);
        let ts = TriggerSet::new(&idx);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let theta = DVector::from_fn(ts.dim(), |_, _| rng.gen::<f64>());
        let loss = DVector::from_fn(10, |_, _| rng.gen::<f64>());
        let x = enumerate_reduced_plans(&idx, 100).unwrap()[2].to_vector();
        let lhs = (&loss * x.transpose()).dot(&ts.matrix(&theta));
        assert!((lhs - ts.gradient(&loss, &x).dot(&theta)).abs() < 1e-10);
    }

    #[test]
    fn learner_postconditions() {
        let idx = derive_sequence_index(&build_decision_process_game(), 0);
        let mut l = TriggerLearner::new(&idx, Schedule::Constant(0.1)).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10 {
            let loss = DVector::from_fn(10, |_, _| rng.gen::<f64>());
            let audit = l.observe_loss(&loss).unwrap();
            assert!(audit.fixed_point_residual <= 1e-8);
            assert!(audit.membership_residual <= 1e-7);
        }
        let theta0 = l.theta().clone();
        l.observe_loss(&DVector::zeros(10)).unwrap();
        assert!((l.theta() - theta0).amax() < 1e-9);
    }
}
