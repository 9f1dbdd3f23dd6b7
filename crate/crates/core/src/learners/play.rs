use super::{Learner, LearnerConfig, LearnerKind, LossModel, StepAudit};
use crate::efg_model::GameTree;
use crate::sequence_form::sample_plan;
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Everything one player saw and did during self-play. Index `t − 1` holds
/// iteration t.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PlayerTrace {
    pub kind: Option<LearnerKind>,
    pub strategies: Vec<Vec<f64>>,
    pub losses: Vec<Vec<f64>>,
    /// Expected utility of x^t against the co-players, in game units.
    pub payoffs: Vec<f64>,
    pub audits: Vec<StepAudit>,
    /// `(t, A^t)` with A^t in column-major order, every `thin` iterations.
    pub matrices: Vec<(usize, Vec<f64>)>,
    /// Sampled reduced plan (selected sequences) per iteration, if enabled.
    pub sampled_plans: Vec<Vec<usize>>,
}

impl PlayerTrace {
    pub fn strategy(&self, t: usize) -> DVector<f64> {
        DVector::from_column_slice(&self.strategies[t])
    }

    pub fn loss(&self, t: usize) -> DVector<f64> {
        DVector::from_column_slice(&self.losses[t])
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PlayTrace {
    pub players: Vec<PlayerTrace>,
    /// Number of completed iterations.
    pub iterations: usize,
    /// Set when a solver error stopped the run early.
    pub aborted: Option<String>,
}

/// Simultaneous-update self-play for `iterations` rounds.
///
/// Solver errors do not panic: the trace up to the failing round is
/// returned with `aborted` set.
pub fn self_play(game: &GameTree, configs: &[LearnerConfig], iterations: usize, seed: u64) -> PlayTrace {
    let model = LossModel::new(game);
    let n = game.num_players();
    assert_eq!(configs.len(), n, "one learner configuration per player");
    let mut trace = PlayTrace {
        players: configs
            .iter()
            .map(|c| PlayerTrace {
                kind: Some(c.kind),
                ..PlayerTrace::default()
            })
            .collect(),
        iterations: 0,
        aborted: None,
    };
    let mut learners = Vec::with_capacity(n);
    for (p, c) in configs.iter().enumerate() {
        match Learner::new(&model.game.indices[p], c) {
            Ok(l) => learners.push(l),
            Err(e) => {
                trace.aborted = Some(format!("player {}: {e}", p + 1));
                return trace;
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for t in 1..=iterations {
        let xs: Vec<DVector<f64>> = learners.iter().map(|l| l.strategy().clone()).collect();
        let refs: Vec<&DVector<f64>> = xs.iter().collect();
        let mut losses = Vec::with_capacity(n);
        for p in 0..n {
            losses.push(model.loss_vector(p, &refs));
            let pt = &mut trace.players[p];
            pt.payoffs.push(model.game.utility(p, &refs));
            pt.strategies.push(xs[p].iter().cloned().collect());
            pt.losses.push(losses[p].iter().cloned().collect());
            let c = &configs[p];
            if c.thin > 0 && (t - 1) % c.thin == 0 {
                if let Some(a) = learners[p].matrix() {
                    pt.matrices.push((t, a.as_slice().to_vec()));
                }
            }
            if c.sample_plans {
                match sample_plan(&model.game.indices[p], &xs[p], &mut rng) {
                    Ok(plan) => pt.sampled_plans.push(plan.selected()),
                    Err(e) => {
                        trace.aborted = Some(format!("t = {t}, player {}: {e}", p + 1));
                        return trace;
                    }
                }
            }
        }
        for p in 0..n {
            match learners[p].observe_loss(&losses[p]) {
                Ok(audit) => trace.players[p].audits.push(audit),
                Err(e) => {
                    trace.aborted = Some(format!("t = {t}, player {}: {e}", p + 1));
                    return trace;
                }
            }
        }
        trace.iterations = t;
    }
    trace
}
