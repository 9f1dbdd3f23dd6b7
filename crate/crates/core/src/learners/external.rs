use super::{check_loss, projection_tolerance, LearnerError, Schedule, StepAudit};
use crate::convex_opt::{project, AffineBoxSet};
use crate::sequence_form::{minimize_over_q, sequence_form_polytope, SequenceIndex};
use nalgebra::DVector;

/// Projected gradient descent directly on Q.
#[derive(Debug, Clone)]
pub struct ExternalLearner {
    set: AffineBoxSet,
    schedule: Schedule,
    x: DVector<f64>,
    t: usize,
}

impl ExternalLearner {
    pub fn new(index: &SequenceIndex, schedule: Schedule) -> Self {
        let q = sequence_form_polytope(index);
        let rows = (0..q.num_rows())
            .map(|r| (0..q.dim()).filter(|&c| q.matrix[(r, c)] != 0.0).map(|c| (c, q.matrix[(r, c)])).collect())
            .collect();
        let set = AffineBoxSet {
            rows,
            rhs: q.rhs.iter().cloned().collect(),
            lo: vec![0.0; q.dim()],
            hi: vec![1.0; q.dim()],
        };
        let (_, x) = minimize_over_q(index, &vec![0.0; index.num_sequences()]);
        ExternalLearner { set, schedule, x, t: 1 }
    }

    pub fn strategy(&self) -> &DVector<f64> {
        &self.x
    }

    pub fn observe_loss(&mut self, loss: &DVector<f64>) -> Result<StepAudit, LearnerError> {
        check_loss(loss, self.x.len())?;
        let audit = StepAudit {
            matrix_loss: loss.dot(&self.x),
            ..StepAudit::default()
        };
        let step = &self.x - loss * self.schedule.eta(self.t);
        self.x = project(&self.set, &step, projection_tolerance(self.t))?.y;
        self.t += 1;
        Ok(audit)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moves_toward_lower_loss() {
        let idx = SequenceIndex::from_infosets(0, &[("s".into(), vec!["a".into(), "b".into()], 0)]);
        let mut l = ExternalLearner::new(&idx, Schedule::Constant(0.5));
        l.observe_loss(&DVector::from_vec(vec![0.0, 1.0, 0.0])).unwrap();
        assert!((l.strategy()[1] - 0.75).abs() < 1e-9);
        assert!((l.strategy()[2] - 0.25).abs() < 1e-9);
    }
}
