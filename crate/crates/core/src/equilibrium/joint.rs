use super::EquilibriumError;
use crate::learners::PlayTrace;
use crate::sequence_form::{enumerate_reduced_plans, plan_mixture, sample_plan, ReducedPlan, SequenceIndex};
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, HashMap};

/// Probability distribution over profiles of reduced plans. Profiles are
/// tuples of indices into each player's plan list.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDistribution {
    pub plans: Vec<Vec<ReducedPlan>>,
    pub support: Vec<(Vec<usize>, f64)>,
}

impl JointDistribution {
    /// Validates and merges duplicate profiles; zero-probability entries are
    /// dropped.
    pub fn new(plans: Vec<Vec<ReducedPlan>>, entries: Vec<(Vec<usize>, f64)>) -> Result<Self, EquilibriumError> {
        let mut merged: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
        for (profile, p) in entries {
            if profile.len() != plans.len() {
                return Err(EquilibriumError::InvalidJoint(format!(
                    "profile {profile:?} has {} entries for {} players",
                    profile.len(),
                    plans.len()
                )));
            }
            if profile.iter().zip(&plans).any(|(&k, list)| k >= list.len()) {
                return Err(EquilibriumError::InvalidJoint(format!("profile {profile:?} out of range")));
            }
            if !(p >= 0.0) {
                return Err(EquilibriumError::InvalidJoint(format!("negative probability {p}")));
            }
            *merged.entry(profile).or_insert(0.0) += p;
        }
        let total: f64 = merged.values().sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(EquilibriumError::InvalidJoint(format!("probabilities sum to {total}")));
        }
        Ok(JointDistribution {
            plans,
            support: merged.into_iter().filter(|e| e.1 > 0.0).collect(),
        })
    }

    pub fn point_mass(plans: Vec<Vec<ReducedPlan>>, profile: Vec<usize>) -> Result<Self, EquilibriumError> {
        Self::new(plans, vec![(profile, 1.0)])
    }

    pub fn num_players(&self) -> usize {
        self.plans.len()
    }

    pub fn total(&self) -> f64 {
        self.support.iter().map(|e| e.1).sum()
    }

    /// Expected sequence-form strategy of `player`.
    pub fn marginal(&self, player: usize) -> DVector<f64> {
        let n = self.plans[player].first().map_or(0, |p| p.len());
        let mut x = DVector::zeros(n);
        for (profile, p) in &self.support {
            x += self.plans[player][profile[player]].to_vector() * *p;
        }
        x
    }

    /// Probability that `player` is recommended plan `k`.
    pub fn plan_probability(&self, player: usize, k: usize) -> f64 {
        self.support.iter().filter(|e| e.0[player] == k).map(|e| e.1).sum()
    }
}

fn plan_tables(indices: &[SequenceIndex], cap: usize) -> Result<(Vec<Vec<ReducedPlan>>, Vec<HashMap<ReducedPlan, usize>>), EquilibriumError> {
    let mut plans = Vec::new();
    let mut lookup = Vec::new();
    for idx in indices {
        let list = enumerate_reduced_plans(idx, cap)?;
        lookup.push(list.iter().cloned().enumerate().map(|(k, p)| (p, k)).collect());
        plans.push(list);
    }
    Ok((plans, lookup))
}

/// `μ = (1/T) Σ_t ⊗_i mixture(x_i^t)` with the canonical top-down plan
/// decomposition of each x_i^t.
pub fn empirical_joint(trace: &PlayTrace, indices: &[SequenceIndex], cap: usize) -> Result<JointDistribution, EquilibriumError> {
    let (plans, lookup) = plan_tables(indices, cap)?;
    let horizon = trace.players.iter().map(|p| p.strategies.len()).min().unwrap_or(0);
    if horizon == 0 {
        return Err(EquilibriumError::EmptyTrace(0));
    }
    let mut acc: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
    for t in 0..horizon {
        let mut profiles: Vec<(Vec<usize>, f64)> = vec![(Vec::new(), 1.0 / horizon as f64)];
        for (p, idx) in indices.iter().enumerate() {
            let mix = plan_mixture(idx, &trace.players[p].strategy(t), cap)?;
            let mut next = Vec::with_capacity(profiles.len() * mix.len());
            for (prefix, w) in &profiles {
                for (plan, q) in &mix {
                    let mut v = prefix.clone();
                    v.push(lookup[p][plan]);
                    next.push((v, w * q));
                }
            }
            profiles = next;
        }
        for (profile, w) in profiles {
            *acc.entry(profile).or_insert(0.0) += w;
        }
    }
    let total: f64 = acc.values().sum();
    let entries = acc.into_iter().map(|(k, v)| (k, v / total)).collect();
    JointDistribution::new(plans, entries)
}

/// Empirical frequency of `samples_per_step` independent plan profiles
/// drawn from every x^t.
pub fn sampled_joint(
    trace: &PlayTrace,
    indices: &[SequenceIndex],
    cap: usize,
    samples_per_step: usize,
    seed: u64,
) -> Result<JointDistribution, EquilibriumError> {
    let (plans, lookup) = plan_tables(indices, cap)?;
    let horizon = trace.players.iter().map(|p| p.strategies.len()).min().unwrap_or(0);
    if horizon == 0 || samples_per_step == 0 {
        return Err(EquilibriumError::EmptyTrace(0));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = 1.0 / (horizon * samples_per_step) as f64;
    let mut entries = Vec::new();
    for t in 0..horizon {
        for _ in 0..samples_per_step {
            let mut profile = Vec::with_capacity(indices.len());
            for (p, idx) in indices.iter().enumerate() {
                let plan = sample_plan(idx, &trace.players[p].strategy(t), &mut rng)?;
                profile.push(lookup[p][&plan]);
            }
            entries.push((profile, w));
        }
    }
    JointDistribution::new(plans, entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::efg_model::build_kuhn_poker;
    use crate::learners::{self_play, LearnerConfig, LearnerKind, Schedule};
    use crate::sequence_form::derive_sequence_index;

    #[test]
    fn marginals_match_average_play() {
        let game = build_kuhn_poker(3, 2).unwrap();
        let cfg = LearnerConfig::new(LearnerKind::External, Schedule::Constant(0.3));
        let trace = self_play(&game, &[cfg.clone(), cfg], 8, 0);
        let indices: Vec<SequenceIndex> = (0..2).map(|p| derive_sequence_index(&game, p)).collect();
        let mu = empirical_joint(&trace, &indices, 1000).unwrap();
        assert!((mu.total() - 1.0).abs() < 1e-10);
        for p in 0..2 {
            let avg = (0..8).fold(DVector::zeros(13), |acc, t| acc + trace.players[p].strategy(t)) / 8.0;
            assert!((mu.marginal(p) - avg).amax() < 1e-9);
        }
    }

    #[test]
    fn vertex_play_gives_point_mass() {
        let game = build_kuhn_poker(3, 2).unwrap();
        let cfg = LearnerConfig::new(LearnerKind::Trigger, Schedule::InvSqrt);
        let trace = self_play(&game, &[cfg.clone(), cfg], 1, 0);
        let indices: Vec<SequenceIndex> = (0..2).map(|p| derive_sequence_index(&game, p)).collect();
        let mu = empirical_joint(&trace, &indices, 1000).unwrap();
        assert_eq!(mu.support.len(), 1);
        assert_eq!(mu.support[0].1, 1.0);
        let sampled = sampled_joint(&trace, &indices, 1000, 3, 9).unwrap();
        assert_eq!(sampled.support, mu.support);
    }

    #[test]
    fn rejects_bad_tables() {
        let plans = vec![vec![ReducedPlan::from_sequences(1, &[])]];
        assert!(JointDistribution::new(plans.clone(), vec![(vec![0], 0.5)]).is_err());
        assert!(JointDistribution::new(plans.clone(), vec![(vec![1], 1.0)]).is_err());
        assert!(JointDistribution::new(plans, vec![(vec![0], 1.0)]).is_ok());
    }
}
