use super::{GameError, GameTree};
use crate::sequence_form::{enumerate_reduced_plans, ReducedPlan, SequenceGame};

/// Enumerated reduced plans per player and the expected-utility tensor over
/// plan profiles (row-major, player 1 most significant).
#[derive(Debug, Clone)]
pub struct NormalFormView {
    pub plans: Vec<Vec<ReducedPlan>>,
    pub plan_labels: Vec<Vec<String>>,
    utilities: Vec<Vec<f64>>,
}

impl NormalFormView {
    pub fn num_profiles(&self) -> usize {
        self.utilities.len()
    }

    pub fn profile_index(&self, profile: &[usize]) -> usize {
        profile
            .iter()
            .zip(&self.plans)
            .fold(0, |acc, (&p, plans)| acc * plans.len() + p)
    }

    pub fn profile(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.plans.len()];
        for (i, plans) in self.plans.iter().enumerate().rev() {
            out[i] = index % plans.len();
            index /= plans.len();
        }
        out
    }

    pub fn utility(&self, profile: &[usize]) -> &[f64] {
        &self.utilities[self.profile_index(profile)]
    }

    /// Plan index of `player` whose chosen action labels are exactly `actions`.
    pub fn plan_by_actions(&self, player: usize, actions: &[&str]) -> Option<usize> {
        let want: Vec<&str> = actions.to_vec();
        self.plan_labels[player]
            .iter()
            .position(|l| l.split(' ').collect::<Vec<_>>() == want)
    }
}

pub fn normal_form_view(game: &GameTree, max_profiles: usize) -> Result<NormalFormView, GameError> {
    let sg = SequenceGame::new(game);
    let mut plans = Vec::new();
    let mut total: usize = 1;
    for idx in &sg.indices {
        let p = enumerate_reduced_plans(idx, max_profiles)
            .map_err(|e| GameError::InvalidParameter(e.to_string()))?;
        total = total.saturating_mul(p.len());
        if total > max_profiles {
            return Err(GameError::InvalidParameter(format!(
                "normal form has more than {max_profiles} profiles"
            )));
        }
        plans.push(p);
    }
    let plan_labels: Vec<Vec<String>> = plans
        .iter()
        .zip(&sg.indices)
        .map(|(ps, idx)| ps.iter().map(|p| p.label(idx)).collect())
        .collect();
    let n = game.num_players();
    let mut utilities = Vec::with_capacity(total);
    let mut profile = vec![0usize; n];
    for _ in 0..total {
        let mut u = vec![0.0; n];
        for leaf in &sg.leaves {
            if leaf
                .seqs
                .iter()
                .zip(&profile)
                .enumerate()
                .all(|(i, (&s, &p))| plans[i][p].contains(s))
            {
                for (k, uk) in u.iter_mut().enumerate() {
                    *uk += leaf.chance * leaf.utilities[k];
                }
            }
        }
        utilities.push(u);
        for i in (0..n).rev() {
            profile[i] += 1;
            if profile[i] < plans[i].len() {
                break;
            }
            profile[i] = 0;
        }
    }
    Ok(NormalFormView {
        plans,
        plan_labels,
        utilities,
    })
}
