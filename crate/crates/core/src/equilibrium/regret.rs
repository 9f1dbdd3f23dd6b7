use super::gaps::{external_gap, linear_swap_gap, trigger_gap};
use super::{DeviationClass, EquilibriumError, GapCertificate};
use crate::convex_opt::{solve_lp_within, TOLERANCES, Sense};
use crate::learners::PlayTrace;
use crate::linmap::LinMapSystem;
use crate::sequence_form::SequenceIndex;
use nalgebra::{DMatrix, DVector};

/// Running sums `G = Σ_t ℓ^t (x^t)ᵀ` and `B = Σ_t ⟨ℓ^t, x^t⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretAccumulator {
    pub g: DMatrix<f64>,
    pub baseline: f64,
    pub t: usize,
}

impl RegretAccumulator {
    pub fn new(d: usize) -> Self {
        RegretAccumulator {
            g: DMatrix::zeros(d, d),
            baseline: 0.0,
            t: 0,
        }
    }

    pub fn add(&mut self, loss: &DVector<f64>, x: &DVector<f64>) {
        self.g.ger(1.0, loss, x, 1.0);
        self.baseline += loss.dot(x);
        self.t += 1;
    }

    fn average(&self, mut c: GapCertificate) -> GapCertificate {
        c.gap /= self.t.max(1) as f64;
        c
    }

    pub fn external(&self, index: &SequenceIndex, player: usize) -> GapCertificate {
        self.average(external_gap(index, &self.g, self.baseline, player))
    }

    pub fn trigger(&self, index: &SequenceIndex, player: usize) -> GapCertificate {
        self.average(trigger_gap(index, &self.g, self.baseline, player))
    }

    pub fn linear_swap(&self, system: &LinMapSystem, player: usize) -> Result<GapCertificate, EquilibriumError> {
        Ok(self.average(linear_swap_gap(system, &self.g, self.baseline, player)?))
    }
}

fn accumulator(trace: &PlayTrace, player: usize) -> Result<RegretAccumulator, EquilibriumError> {
    let pt = trace.players.get(player).ok_or(EquilibriumError::EmptyTrace(player))?;
    if pt.strategies.is_empty() {
        return Err(EquilibriumError::EmptyTrace(player));
    }
    let mut acc = RegretAccumulator::new(pt.strategies[0].len());
    for t in 0..pt.strategies.len().min(pt.losses.len()) {
        acc.add(&pt.loss(t), &pt.strategy(t));
    }
    Ok(acc)
}

/// Average external regret `(1/T) max_{y ∈ Q} Σ ⟨ℓ^t, x^t − y⟩`.
pub fn external_regret(trace: &PlayTrace, player: usize, index: &SequenceIndex) -> Result<GapCertificate, EquilibriumError> {
    Ok(accumulator(trace, player)?.external(index, player))
}

/// Average trigger regret over all trigger sequences and continuations.
pub fn trigger_regret(trace: &PlayTrace, player: usize, index: &SequenceIndex) -> Result<GapCertificate, EquilibriumError> {
    Ok(accumulator(trace, player)?.trigger(index, player))
}

/// Average linear-swap regret `(1/T) max_{A ∈ M} Σ ⟨ℓ^t, x^t − A x^t⟩`.
pub fn linear_swap_regret(
    trace: &PlayTrace,
    player: usize,
    system: &LinMapSystem,
) -> Result<GapCertificate, EquilibriumError> {
    accumulator(trace, player)?.linear_swap(system, player)
}

/// Average external regret of the matrix-level learner, which played A^t
/// against the losses `ℓ^t (x^t)ᵀ`: `(1/T)(Σ ⟨ℓ^t, A^t x^t⟩ − min_{A ∈ M} ⟨G, A⟩)`.
/// Requires the per-iteration audits of a matrix learner.
pub fn matrix_regret(trace: &PlayTrace, player: usize, system: &LinMapSystem) -> Result<f64, EquilibriumError> {
    let acc = accumulator(trace, player)?;
    let pt = &trace.players[player];
    let played: f64 = pt.audits.iter().take(acc.t).map(|a| a.matrix_loss).sum();
    let best = solve_lp_within(&system.to_lp(&acc.g, Sense::Minimize), TOLERANCES.audit)?.objective;
    Ok((played - best) / acc.t as f64)
}

/// Average regrets after iteration t.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegretPoint {
    pub t: usize,
    pub external: Option<f64>,
    pub trigger: Option<f64>,
    pub linear_swap: Option<f64>,
    pub payoff: f64,
}

/// Regret curve of one player. Gaps are evaluated at t = 1, every `every`
/// iterations and at the end; other rows carry only the payoff.
pub fn regret_curve(
    trace: &PlayTrace,
    player: usize,
    system: &LinMapSystem,
    every: usize,
    classes: &[DeviationClass],
) -> Result<Vec<RegretPoint>, EquilibriumError> {
    let pt = trace.players.get(player).ok_or(EquilibriumError::EmptyTrace(player))?;
    let horizon = pt.strategies.len().min(pt.losses.len());
    if horizon == 0 {
        return Err(EquilibriumError::EmptyTrace(player));
    }
    let mut acc = RegretAccumulator::new(pt.strategies[0].len());
    let mut out = Vec::with_capacity(horizon);
    for t in 0..horizon {
        acc.add(&pt.loss(t), &pt.strategy(t));
        let step = t + 1;
        let due = step == 1 || step == horizon || (every > 0 && step % every == 0);
        let mut point = RegretPoint {
            t: step,
            external: None,
            trigger: None,
            linear_swap: None,
            payoff: pt.payoffs.get(t).cloned().unwrap_or(f64::NAN),
        };
        if due {
            if classes.contains(&DeviationClass::External) {
                point.external = Some(acc.external(&system.source, player).gap);
            }
            if classes.contains(&DeviationClass::Trigger) {
                point.trigger = Some(acc.trigger(&system.source, player).gap);
            }
            if classes.contains(&DeviationClass::LinearSwap) {
                point.linear_swap = Some(acc.linear_swap(system, player)?.gap);
            }
        }
        out.push(point);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::efg_model::build_signaling_game;
    use crate::learners::{self_play, LearnerConfig, LearnerKind, PlayerTrace, Schedule};
    use crate::linmap::compile_self_map_system;
    use crate::sequence_form::derive_sequence_index;

    #[test]
    fn constant_vertex_play_with_zero_loss() {
        let idx = SequenceIndex::from_infosets(0, &[("s".into(), vec!["a".into(), "b".into()], 0)]);
        let sys = compile_self_map_system(&idx);
        let trace = PlayTrace {
            players: vec![PlayerTrace {
                strategies: vec![vec![1.0, 1.0, 0.0]; 4],
                losses: vec![vec![0.0; 3]; 4],
                ..PlayerTrace::default()
            }],
            iterations: 4,
            aborted: None,
        };
        assert!(linear_swap_regret(&trace, 0, &sys).unwrap().gap.abs() < 1e-12);
        assert!(trigger_regret(&trace, 0, &idx).unwrap().gap.abs() < 1e-12);
    }

    #[test]
    fn curve_and_gordon_identity_on_self_play() {
        let game = build_signaling_game();
        let cfg = LearnerConfig::new(LearnerKind::LinearSwap, Schedule::InvSqrt);
        let trace = self_play(&game, &[cfg.clone(), cfg], 30, 1);
        for p in 0..2 {
            let idx = derive_sequence_index(&game, p);
            let sys = compile_self_map_system(&idx);
            let lin = linear_swap_regret(&trace, p, &sys).unwrap().gap;
            let mat = matrix_regret(&trace, p, &sys).unwrap();
            assert!((lin - mat).abs() <= 2e-6);
            let all = [DeviationClass::External, DeviationClass::Trigger, DeviationClass::LinearSwap];
            let curve = regret_curve(&trace, p, &sys, 10, &all).unwrap();
            assert_eq!(curve.len(), 30);
            assert!(curve[4].linear_swap.is_none() && curve[9].linear_swap.is_some());
            let last = curve.last().unwrap();
            assert!((last.linear_swap.unwrap() - lin).abs() < 1e-12);
            assert!(last.external.unwrap() <= last.trigger.unwrap() + 1e-9);
        }
    }
}
