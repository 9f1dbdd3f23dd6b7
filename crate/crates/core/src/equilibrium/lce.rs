use super::gaps::{accumulate, external_gap, linear_swap_gap, trigger_gap};
use super::{DeviationClass, EquilibriumError, GapCertificate, JointDistribution, Witness};
use crate::convex_opt::{solve_lp_within, TOLERANCES, Cmp, LpError, Sense};
use crate::efg_model::GameTree;
use crate::linmap::{compile_self_map_system, raw_trigger_matrix, LinMapSystem};
use crate::sequence_form::{enumerate_reduced_plans, ReducedPlan, SequenceGame, SequenceIndex};
use nalgebra::{DMatrix, DVector};

/// Brute-force limit for full-swap audits, in plans per player.
pub const FULL_SWAP_PLAN_CAP: usize = 6;

/// Tolerance on `A π = swap(π)` accepted by [`is_linear_swap`].
const SWAP_MATCH_TOL: f64 = 1e-8;

/// Deviation audits of joint plan distributions for one game.
#[derive(Debug, Clone)]
pub struct Auditor {
    pub game: SequenceGame,
    pub systems: Vec<LinMapSystem>,
}

/// Utility change from applying a plan swap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwapGain {
    /// `Σ_π μ(π) [u_i(swap(π_i), π_{−i}) − u_i(π)]`.
    pub expected: f64,
    /// Sum over the swapped plans p of the expected gain conditioned on p
    /// being recommended.
    pub per_recommendation: f64,
}

impl Auditor {
    pub fn new(game: &GameTree) -> Self {
        Self::from_sequence_game(SequenceGame::new(game))
    }

    pub fn from_sequence_game(game: SequenceGame) -> Self {
        let systems = game.indices.iter().map(compile_self_map_system).collect();
        Auditor { game, systems }
    }

    fn check(&self, mu: &JointDistribution, player: usize) -> Result<(), EquilibriumError> {
        if mu.num_players() != self.game.num_players() || player >= mu.num_players() {
            return Err(EquilibriumError::InvalidJoint(format!(
                "distribution over {} players, game has {}",
                mu.num_players(),
                self.game.num_players()
            )));
        }
        for (p, plans) in mu.plans.iter().enumerate() {
            let n = self.game.indices[p].num_sequences();
            if plans.iter().any(|q| q.len() != n) {
                return Err(EquilibriumError::InvalidJoint(format!("plans of player {} have the wrong length", p + 1)));
            }
        }
        Ok(())
    }

    fn vectors(mu: &JointDistribution, profile: &[usize]) -> Vec<DVector<f64>> {
        profile.iter().enumerate().map(|(p, &k)| mu.plans[p][k].to_vector()).collect()
    }

    /// `∇_i u_i` at every support profile, paired with its probability.
    fn gradients(&self, mu: &JointDistribution, player: usize) -> Vec<(f64, usize, DVector<f64>)> {
        mu.support
            .iter()
            .map(|(profile, w)| {
                let xs = Self::vectors(mu, profile);
                let refs: Vec<&DVector<f64>> = xs.iter().collect();
                (*w, profile[player], self.game.utility_gradient(player, &refs))
            })
            .collect()
    }

    /// `G = Σ μ(π) ℓ π_iᵀ` and `B = Σ μ(π) ⟨ℓ, π_i⟩` with `ℓ = −∇_i u_i(π_{−i})`.
    pub fn loss_matrix(&self, mu: &JointDistribution, player: usize) -> Result<(DMatrix<f64>, f64), EquilibriumError> {
        self.check(mu, player)?;
        let d = self.game.indices[player].num_sequences();
        let items: Vec<(f64, DVector<f64>, DVector<f64>)> = self
            .gradients(mu, player)
            .into_iter()
            .map(|(w, k, g)| (w, -g, mu.plans[player][k].to_vector()))
            .collect();
        Ok(accumulate(d, items.iter().map(|(w, l, x)| (*w, l, x))))
    }

    pub fn lce_gap(&self, mu: &JointDistribution, player: usize) -> Result<GapCertificate, EquilibriumError> {
        let (g, b) = self.loss_matrix(mu, player)?;
        linear_swap_gap(&self.systems[player], &g, b, player)
    }

    pub fn external_gap(&self, mu: &JointDistribution, player: usize) -> Result<GapCertificate, EquilibriumError> {
        let (g, b) = self.loss_matrix(mu, player)?;
        Ok(external_gap(&self.game.indices[player], &g, b, player))
    }

    pub fn trigger_gap(&self, mu: &JointDistribution, player: usize) -> Result<GapCertificate, EquilibriumError> {
        let (g, b) = self.loss_matrix(mu, player)?;
        Ok(trigger_gap(&self.game.indices[player], &g, b, player))
    }

    /// Best plan-to-plan swap by enumerating every table.
    pub fn full_swap_gap(&self, mu: &JointDistribution, player: usize) -> Result<GapCertificate, EquilibriumError> {
        self.check(mu, player)?;
        let plans = &mu.plans[player];
        let m = plans.len();
        if m > FULL_SWAP_PLAN_CAP {
            return Err(EquilibriumError::TooManyPlans {
                count: m,
                cap: FULL_SWAP_PLAN_CAP,
            });
        }
        let d = self.game.indices[player].num_sequences();
        let mut h = vec![DVector::zeros(d); m];
        for (w, k, g) in self.gradients(mu, player) {
            h[k] += g * w;
        }
        let vecs: Vec<DVector<f64>> = plans.iter().map(|p| p.to_vector()).collect();
        let value: Vec<Vec<f64>> = (0..m).map(|p| vecs.iter().map(|v| h[p].dot(v)).collect()).collect();
        let mut table = vec![0; m];
        let mut best = (f64::NEG_INFINITY, table.clone());
        loop {
            let gain: f64 = (0..m).map(|p| value[p][table[p]] - value[p][p]).sum();
            if gain > best.0 {
                best = (gain, table.clone());
            }
            let mut pos = 0;
            while pos < m && table[pos] + 1 == m {
                table[pos] = 0;
                pos += 1;
            }
            if pos == m {
                break;
            }
            table[pos] += 1;
        }
        if m == 0 {
            best.0 = 0.0;
        }
        Ok(GapCertificate {
            player,
            class: DeviationClass::FullSwap,
            gap: best.0,
            witness: Witness::SwapTable(best.1),
        })
    }

    pub fn gap(&self, mu: &JointDistribution, player: usize, class: DeviationClass) -> Result<GapCertificate, EquilibriumError> {
        match class {
            DeviationClass::External => self.external_gap(mu, player),
            DeviationClass::Trigger => self.trigger_gap(mu, player),
            DeviationClass::LinearSwap => self.lce_gap(mu, player),
            DeviationClass::FullSwap => self.full_swap_gap(mu, player),
        }
    }

    /// Expected utility gain of a witness, computed leaf by leaf through
    /// the game's utility function rather than through G.
    pub fn evaluate_witness(&self, mu: &JointDistribution, player: usize, witness: &Witness) -> Result<f64, EquilibriumError> {
        self.check(mu, player)?;
        let index = &self.game.indices[player];
        let deviate = |x: &DVector<f64>, k: usize| -> Result<DVector<f64>, EquilibriumError> {
            Ok(match witness {
                Witness::Point(y) => y.clone(),
                Witness::Trigger { sequence, continuation } => raw_trigger_matrix(index, *sequence, continuation)? * x,
                Witness::Matrix(a) => a * x,
                Witness::SwapTable(t) => mu.plans[player][t[k]].to_vector(),
            })
        };
        let mut total = 0.0;
        for (profile, w) in &mu.support {
            let mut xs = Self::vectors(mu, profile);
            let before = self.game.utility(player, &xs.iter().collect::<Vec<_>>());
            xs[player] = deviate(&xs[player], profile[player])?;
            let after = self.game.utility(player, &xs.iter().collect::<Vec<_>>());
            total += w * (after - before);
        }
        Ok(total)
    }

    pub fn swap_gain(
        &self,
        mu: &JointDistribution,
        player: usize,
        swap: &[(ReducedPlan, ReducedPlan)],
    ) -> Result<SwapGain, EquilibriumError> {
        self.check(mu, player)?;
        let index = &self.game.indices[player];
        let plans = &mu.plans[player];
        let find = |p: &ReducedPlan| {
            plans
                .iter()
                .position(|q| q == p)
                .ok_or_else(|| EquilibriumError::UnknownPlan(p.label(index)))
        };
        let mut table: Vec<usize> = (0..plans.len()).collect();
        for (from, to) in swap {
            table[find(from)?] = find(to)?;
        }
        let mut per_plan = vec![0.0; plans.len()];
        for (profile, w) in &mu.support {
            let k = profile[player];
            if table[k] == k {
                continue;
            }
            let mut xs = Self::vectors(mu, profile);
            let before = self.game.utility(player, &xs.iter().collect::<Vec<_>>());
            xs[player] = plans[table[k]].to_vector();
            let after = self.game.utility(player, &xs.iter().collect::<Vec<_>>());
            per_plan[k] += w * (after - before);
        }
        let expected = per_plan.iter().sum();
        let per_recommendation = (0..plans.len())
            .filter(|&k| table[k] != k)
            .map(|k| {
                let p = mu.plan_probability(player, k);
                if p > 0.0 {
                    per_plan[k] / p
                } else {
                    0.0
                }
            })
            .sum();
        Ok(SwapGain {
            expected,
            per_recommendation,
        })
    }
}

/// Largest gain of `player` over linear deviations under μ, in game units.
pub fn lce_gap(mu: &JointDistribution, game: &GameTree, player: usize) -> Result<GapCertificate, EquilibriumError> {
    Auditor::new(game).lce_gap(mu, player)
}

pub fn swap_gain(
    mu: &JointDistribution,
    game: &GameTree,
    player: usize,
    swap: &[(ReducedPlan, ReducedPlan)],
) -> Result<SwapGain, EquilibriumError> {
    Auditor::new(game).swap_gain(mu, player, swap)
}

/// Searches M(Q → Q) for a matrix reproducing the swap on every reduced
/// plan. Plans absent from `swap` map to themselves. Returns the matrix, or
/// `None` when no linear map agrees with the swap.
pub fn is_linear_swap(
    index: &SequenceIndex,
    swap: &[(ReducedPlan, ReducedPlan)],
    cap: usize,
) -> Result<Option<DMatrix<f64>>, EquilibriumError> {
    let plans = enumerate_reduced_plans(index, cap)?;
    let n = index.num_sequences();
    for (from, to) in swap {
        for p in [from, to] {
            if !plans.contains(p) {
                return Err(EquilibriumError::UnknownPlan(p.label(index)));
            }
        }
    }
    let image = |p: &ReducedPlan| swap.iter().find(|(f, _)| f == p).map_or(p, |(_, t)| t).to_vector();
    let system = compile_self_map_system(index);
    let mut lp = system.to_lp(&DMatrix::zeros(n, n), Sense::Minimize);
    for p in &plans {
        let target = image(p);
        let on: Vec<usize> = p.selected();
        for r in 0..n {
            let terms = on.iter().map(|&s| (system.var_a(r, s), 1.0)).collect();
            lp.add_row(terms, Cmp::Eq, target[r]);
        }
    }
    let sol = match solve_lp_within(&lp, TOLERANCES.audit) {
        Ok(s) => s,
        Err(LpError::Infeasible) => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    let a = system.matrix_from_solution(&sol.x);
    let worst = plans
        .iter()
        .map(|p| (&a * p.to_vector() - image(p)).amax())
        .fold(0.0, f64::max);
    Ok((worst <= SWAP_MATCH_TOL).then_some(a))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::efg_model::{build_counterexample_game, build_signaling_game};
    use crate::equilibrium::fixtures::{counterexample_lce, counterexample_swap, signaling_efce, signaling_swap};

    #[test]
    fn efce_table_is_not_linear_equilibrium() {
        let aud = Auditor::new(&build_signaling_game());
        let mu = signaling_efce(&aud.game).unwrap();
        let cert = aud.lce_gap(&mu, 0).unwrap();
        assert!((cert.gap - 1.5).abs() < 1e-6);
        let direct = aud.evaluate_witness(&mu, 0, &cert.witness).unwrap();
        assert!((direct - cert.gap).abs() < 1e-6);
        assert!(aud.trigger_gap(&mu, 0).unwrap().gap.abs() < 1e-9);
    }

    #[test]
    fn efce_swap_is_linear_and_gains() {
        let aud = Auditor::new(&build_signaling_game());
        let idx = &aud.game.indices[0];
        let swap = signaling_swap(idx).unwrap();
        let gain = aud.swap_gain(&signaling_efce(&aud.game).unwrap(), 0, &swap).unwrap();
        assert!((gain.expected - 1.5).abs() < 1e-12);
        assert!(is_linear_swap(idx, &swap, 100).unwrap().is_some());
        assert!(is_linear_swap(idx, &[], 100).unwrap().is_some());
    }

    #[test]
    fn counterexample_table_is_linear_equilibrium() {
        let aud = Auditor::new(&build_counterexample_game());
        let mu = counterexample_lce(&aud.game).unwrap();
        for p in 0..2 {
            assert!(aud.lce_gap(&mu, p).unwrap().gap.abs() < 1e-7);
        }
        let idx = &aud.game.indices[0];
        let swap = counterexample_swap(idx).unwrap();
        let gain = aud.swap_gain(&mu, 0, &swap).unwrap();
        assert!((gain.per_recommendation - 50.5).abs() < 1e-9);
        assert!((gain.expected - 10.1).abs() < 1e-9);
        assert!(is_linear_swap(idx, &swap, 100).unwrap().is_none());
        let full = aud.full_swap_gap(&mu, 0).unwrap();
        assert!(full.gap >= gain.expected - 1e-9);
        let direct = aud.evaluate_witness(&mu, 0, &full.witness).unwrap();
        assert!((direct - full.gap).abs() < 1e-9);
    }

    #[test]
    fn identity_swap_gains_nothing() {
        let aud = Auditor::new(&build_counterexample_game());
        let mu = counterexample_lce(&aud.game).unwrap();
        let gain = aud.swap_gain(&mu, 1, &[]).unwrap();
        assert_eq!(gain.expected, 0.0);
        assert_eq!(gain.per_recommendation, 0.0);
    }

    #[test]
    fn unknown_plan_is_rejected() {
        let aud = Auditor::new(&build_counterexample_game());
        let mu = counterexample_lce(&aud.game).unwrap();
        let bogus = ReducedPlan::from_sequences(5, &[1, 2]);
        let ok = mu.plans[0][0].clone();
        assert!(matches!(
            aud.swap_gain(&mu, 0, &[(bogus, ok)]),
            Err(EquilibriumError::UnknownPlan(_))
        ));
    }
}
