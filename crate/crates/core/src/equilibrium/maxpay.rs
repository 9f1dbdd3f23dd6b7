use super::{Auditor, EquilibriumError, JointDistribution, Witness};
use crate::convex_opt::{solve_lp_within, TOLERANCES, Cmp, LinearProgram, Sense};
use crate::efg_model::GameTree;
use crate::sequence_form::enumerate_reduced_plans;
use nalgebra::DVector;

/// Gap below which a candidate counts as a linear-deviation equilibrium.
pub const MAXPAY_GAP_TOL: f64 = 1e-7;

const MAX_ROUNDS: usize = 1000;

#[derive(Debug, Clone)]
pub struct MaxPayResult {
    /// Weighted welfare `Σ_i w_i E_μ[u_i]` of the returned distribution.
    pub welfare: f64,
    pub mu: JointDistribution,
    /// Number of welfare LPs solved.
    pub rounds: usize,
    /// Deviation cuts added, one per violated player and round.
    pub cuts: usize,
    /// Final per-player linear-deviation gaps of `mu`.
    pub gaps: Vec<f64>,
}

/// Maximum-welfare linear-deviation correlated equilibrium by constraint
/// generation.
///
/// Variables are the probabilities of all plan profiles (at most `cap` of
/// them). Each round maximizes welfare subject to the cuts found so far,
/// then asks [`Auditor::lce_gap`] for each player's best linear deviation;
/// a deviation gaining more than [`MAXPAY_GAP_TOL`] becomes the cut
/// `Σ_π μ(π) [u_i(A π_i, π_{−i}) − u_i(π)] ≤ 0`.
pub fn maxpay_search(game: &GameTree, weights: &[f64], cap: usize) -> Result<MaxPayResult, EquilibriumError> {
    let auditor = Auditor::new(game);
    let n = auditor.game.num_players();
    if weights.len() != n {
        return Err(EquilibriumError::InvalidJoint(format!("{} weights for {n} players", weights.len())));
    }
    let mut plans = Vec::with_capacity(n);
    let mut count: usize = 1;
    for idx in &auditor.game.indices {
        let list = enumerate_reduced_plans(idx, cap)?;
        count = count.saturating_mul(list.len());
        if count > cap {
            return Err(EquilibriumError::TooManyPlans { count, cap });
        }
        plans.push(list);
    }
    let vectors: Vec<Vec<DVector<f64>>> = plans.iter().map(|l| l.iter().map(|p| p.to_vector()).collect()).collect();

    let mut profiles: Vec<Vec<usize>> = vec![Vec::new()];
    for list in &plans {
        profiles = profiles
            .into_iter()
            .flat_map(|pre| {
                (0..list.len()).map(move |k| {
                    let mut v = pre.clone();
                    v.push(k);
                    v
                })
            })
            .collect();
    }
    // ∇_i u_i at every profile, for building cuts.
    let mut grads: Vec<Vec<DVector<f64>>> = vec![Vec::with_capacity(profiles.len()); n];
    let mut lp = LinearProgram::new(Sense::Maximize);
    for profile in &profiles {
        let xs: Vec<&DVector<f64>> = profile.iter().enumerate().map(|(p, &k)| &vectors[p][k]).collect();
        let mut welfare = 0.0;
        for p in 0..n {
            welfare += weights[p] * auditor.game.utility(p, &xs);
            grads[p].push(auditor.game.utility_gradient(p, &xs));
        }
        lp.add_var(welfare, 0.0, 1.0);
    }
    lp.add_row((0..profiles.len()).map(|v| (v, 1.0)).collect(), Cmp::Eq, 1.0);

    let mut cuts = 0;
    for round in 1..=MAX_ROUNDS {
        let sol = solve_lp_within(&lp, TOLERANCES.audit)?;
        let entries: Vec<(Vec<usize>, f64)> = profiles
            .iter()
            .zip(&sol.x)
            .filter(|(_, &w)| w > 0.0)
            .map(|(p, &w)| (p.clone(), w))
            .collect();
        let total: f64 = entries.iter().map(|e| e.1).sum();
        let entries = entries.into_iter().map(|(p, w)| (p, w / total)).collect();
        let mu = JointDistribution::new(plans.clone(), entries)?;
        let mut gaps = Vec::with_capacity(n);
        let mut violated = false;
        for p in 0..n {
            let cert = auditor.lce_gap(&mu, p)?;
            gaps.push(cert.gap);
            if cert.gap > MAXPAY_GAP_TOL {
                let Witness::Matrix(a) = cert.witness else { unreachable!("linear gaps carry matrices") };
                let terms = profiles
                    .iter()
                    .enumerate()
                    .map(|(v, profile)| {
                        let x = &vectors[p][profile[p]];
                        (v, grads[p][v].dot(&(&a * x - x)))
                    })
                    .collect();
                lp.add_row(terms, Cmp::Le, 0.0);
                cuts += 1;
                violated = true;
            }
        }
        if !violated {
            return Ok(MaxPayResult {
                welfare: sol.objective,
                mu,
                rounds: round,
                cuts,
                gaps,
            });
        }
    }
    Err(EquilibriumError::InvalidJoint(format!(
        "constraint generation did not converge in {MAX_ROUNDS} rounds"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::efg_model::{build_sat_reduction, build_signaling_game, GameBuilder, Literal};

    #[test]
    fn satisfiable_single_clause() {
        let g = build_sat_reduction(&[vec![Literal::pos(1)]]).unwrap();
        let r = maxpay_search(&g, &[1.0, 1.0], 10_000).unwrap();
        assert!((r.welfare - 2.0).abs() < 1e-9);
    }

    #[test]
    fn contradiction_caps_welfare() {
        let g = build_sat_reduction(&[vec![Literal::pos(1)], vec![Literal::neg(1)]]).unwrap();
        let r = maxpay_search(&g, &[1.0, 1.0], 10_000).unwrap();
        assert!(r.welfare <= 1.0 + 1e-7);
        assert!(r.gaps.iter().all(|&x| x <= MAXPAY_GAP_TOL));
    }

    #[test]
    fn single_profile_game() {
        let mut b = GameBuilder::new(2);
        let root = b.reserve();
        let z = b.leaf(vec![3.0, -1.0]);
        b.set_decision(root, 0, "only", vec![(z, "a".into())]).unwrap();
        let r = maxpay_search(&b.finish().unwrap(), &[1.0, 1.0], 10).unwrap();
        assert!((r.welfare - 2.0).abs() < 1e-12);
        assert_eq!(r.rounds, 1);
    }

    #[test]
    fn signaling_welfare_is_an_equilibrium() {
        let g = build_signaling_game();
        let r = maxpay_search(&g, &[1.0, 1.0], 10_000).unwrap();
        let aud = Auditor::new(&g);
        for p in 0..2 {
            assert!(aud.lce_gap(&r.mu, p).unwrap().gap <= MAXPAY_GAP_TOL);
        }
        let direct: f64 = r
            .mu
            .support
            .iter()
            .map(|(profile, w)| {
                let xs: Vec<DVector<f64>> = profile.iter().enumerate().map(|(p, &k)| r.mu.plans[p][k].to_vector()).collect();
                let refs: Vec<&DVector<f64>> = xs.iter().collect();
                w * (aud.game.utility(0, &refs) + aud.game.utility(1, &refs))
            })
            .sum();
        assert!((direct - r.welfare).abs() < 1e-7);
    }
}
