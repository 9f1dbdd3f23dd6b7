use super::{sequence_form_polytope, SeqFormError, SequenceIndex};
use nalgebra::DVector;
use rand::Rng;

/// Feasibility tolerance for points handed to the samplers.
const FEAS_TOL: f64 = 1e-9;

/// Deterministic strategy as a 0/1 vector over Σ; infosets that the plan
/// does not reach select no action.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ReducedPlan {
    seqs: Vec<bool>,
}

impl ReducedPlan {
    /// Plan selecting ∅ and the given action sequences.
    pub fn from_sequences(num_sequences: usize, selected: &[usize]) -> Self {
        let mut seqs = vec![false; num_sequences];
        seqs[0] = true;
        for &s in selected {
            seqs[s] = true;
        }
        ReducedPlan { seqs }
    }

    pub fn contains(&self, seq: usize) -> bool {
        self.seqs[seq]
    }

    pub fn len(&self) -> usize {
        self.seqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seqs.is_empty()
    }

    pub fn selected(&self) -> Vec<usize> {
        (0..self.seqs.len()).filter(|&s| self.seqs[s]).collect()
    }

    pub fn to_vector(&self) -> DVector<f64> {
        DVector::from_iterator(self.seqs.len(), self.seqs.iter().map(|&b| if b { 1.0 } else { 0.0 }))
    }

    /// Chosen action labels in sequence order, space separated.
    pub fn label(&self, index: &SequenceIndex) -> String {
        self.selected()
            .into_iter()
            .filter_map(|s| index.seq_infoset(s).map(|j| (s, j)))
            .map(|(s, j)| index.infoset(j).actions[s - index.infoset(j).first_seq].clone())
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Number of reduced plans: a leaf infoset contributes |A_j| and an action
/// contributes the product over its child infosets. Saturates at u128::MAX.
pub fn count_reduced_plans(index: &SequenceIndex) -> u128 {
    let mut at = vec![0u128; index.num_infosets()];
    for j in (0..index.num_infosets()).rev() {
        at[j] = index
            .actions(j)
            .map(|s| product(index.children(s).iter().map(|&c| at[c])))
            .fold(0u128, |a, b| a.saturating_add(b));
    }
    product(index.children(0).iter().map(|&c| at[c]))
}

fn product(it: impl Iterator<Item = u128>) -> u128 {
    it.fold(1u128, |a, b| a.saturating_mul(b))
}

/// All vertices of Q in lexicographic order of choices (earlier infosets
/// vary slowest, first actions first).
pub fn enumerate_reduced_plans(index: &SequenceIndex, cap: usize) -> Result<Vec<ReducedPlan>, SeqFormError> {
    let count = count_reduced_plans(index);
    if count > cap as u128 {
        return Err(SeqFormError::CapExceeded { count, cap });
    }
    let lists = plans_under(index, 0);
    let n = index.num_sequences();
    let q = sequence_form_polytope(index);
    let plans: Vec<ReducedPlan> = lists
        .into_iter()
        .map(|mut sel| {
            sel.push(0);
            ReducedPlan::from_sequences(n, &sel)
        })
        .collect();
    debug_assert!(plans.iter().all(|p| q.residual(&p.to_vector()) == 0.0));
    Ok(plans)
}

/// Selected sequence lists for the part of a plan below `seq`.
fn plans_under(index: &SequenceIndex, seq: usize) -> Vec<Vec<usize>> {
    let mut acc: Vec<Vec<usize>> = vec![Vec::new()];
    for &j in index.children(seq) {
        let mut options = Vec::new();
        for s in index.actions(j) {
            for mut rest in plans_under(index, s) {
                rest.insert(0, s);
                options.push(rest);
            }
        }
        let mut next = Vec::with_capacity(acc.len() * options.len());
        for a in &acc {
            for o in &options {
                let mut v = a.clone();
                v.extend_from_slice(o);
                next.push(v);
            }
        }
        acc = next;
    }
    acc
}

/// Local behavior probability of the sequence `s` given its infoset is
/// reached; zero-mass infosets put everything on their first action.
fn behavior(index: &SequenceIndex, x: &DVector<f64>, s: usize) -> f64 {
    let j = index.seq_infoset(s).expect("non-empty sequence");
    let acts = index.actions(j);
    let total: f64 = acts.clone().map(|t| x[t].max(0.0)).sum();
    if total <= 0.0 {
        if s == acts.start {
            1.0
        } else {
            0.0
        }
    } else {
        x[s].max(0.0) / total
    }
}

/// Samples a plan top-down, choosing `a` at a reached infoset j with
/// probability `x[ja] / Σ_b x[jb]`, so that the plan equals x in expectation.
pub fn sample_plan<R: Rng + ?Sized>(index: &SequenceIndex, x: &DVector<f64>, rng: &mut R) -> Result<ReducedPlan, SeqFormError> {
    sequence_form_polytope(index).check(x, FEAS_TOL)?;
    let mut chosen = vec![false; index.num_sequences()];
    chosen[0] = true;
    for j in 0..index.num_infosets() {
        if !chosen[index.parent(j)] {
            continue;
        }
        let acts = index.actions(j);
        let mut u: f64 = rng.gen();
        let mut pick = acts.start;
        for s in acts.clone() {
            let p = behavior(index, x, s);
            pick = s;
            if u < p {
                break;
            }
            u -= p;
        }
        // Round-off can exhaust the loop; fall back to the last positive action.
        if behavior(index, x, pick) == 0.0 {
            pick = acts.clone().rev().find(|&s| behavior(index, x, s) > 0.0).unwrap_or(acts.start);
        }
        chosen[pick] = true;
    }
    Ok(ReducedPlan { seqs: chosen })
}

/// Probability of each given plan under top-down sampling from x.
pub fn plan_mixture_weights(index: &SequenceIndex, plans: &[ReducedPlan], x: &DVector<f64>) -> Vec<f64> {
    plans
        .iter()
        .map(|p| {
            p.selected()
                .into_iter()
                .filter(|&s| s != 0)
                .map(|s| behavior(index, x, s))
                .product()
        })
        .collect()
}

/// Exact decomposition of x into reduced plans, matching [`sample_plan`].
/// Only plans with positive weight are returned.
pub fn plan_mixture(index: &SequenceIndex, x: &DVector<f64>, cap: usize) -> Result<Vec<(ReducedPlan, f64)>, SeqFormError> {
    sequence_form_polytope(index).check(x, FEAS_TOL)?;
    let plans = enumerate_reduced_plans(index, cap)?;
    let w = plan_mixture_weights(index, &plans, x);
    Ok(plans.into_iter().zip(w).filter(|(_, q)| *q > 0.0).collect())
}

/// Best-response dynamic program over the subtree polytope Q_j:
/// returns `min ⟨c, y⟩` over y ∈ Q_j and a minimizing vertex (as a vector
/// over all of Σ, zero outside Σ_{⪰j}). Ties go to the first action.
pub fn minimize_over_subtree(index: &SequenceIndex, c: &[f64], j: usize) -> (f64, DVector<f64>) {
    let (values, choice) = best_response_tables(index, c, index.subtree(j).start);
    let mut y = DVector::zeros(index.num_sequences());
    select_below(index, &choice, j, &mut y);
    (values[j], y)
}

/// Sequence form of the behavioral strategy mixing uniformly at every
/// infoset.
pub fn uniform_strategy(index: &SequenceIndex) -> DVector<f64> {
    let mut x = DVector::zeros(index.num_sequences());
    x[0] = 1.0;
    for j in 0..index.num_infosets() {
        let actions = index.actions(j);
        let share = x[index.parent(j)] / actions.len() as f64;
        for s in actions {
            x[s] = share;
        }
    }
    x
}

/// `min ⟨c, x⟩` over Q and a minimizing vertex.
pub fn minimize_over_q(index: &SequenceIndex, c: &[f64]) -> (f64, DVector<f64>) {
    let (values, choice) = best_response_tables(index, c, 1);
    let mut y = DVector::zeros(index.num_sequences());
    y[0] = 1.0;
    let mut v = c[0];
    for &j in index.children(0) {
        v += values[j];
        select_below(index, &choice, j, &mut y);
    }
    (v, y)
}

fn best_response_tables(index: &SequenceIndex, c: &[f64], from_seq: usize) -> (Vec<f64>, Vec<usize>) {
    let nj = index.num_infosets();
    let mut values = vec![0.0; nj];
    let mut choice = vec![0; nj];
    for j in (0..nj).rev() {
        if index.infoset(j).first_seq < from_seq {
            break;
        }
        let mut best = f64::INFINITY;
        for s in index.actions(j) {
            let v = c[s] + index.children(s).iter().map(|&k| values[k]).sum::<f64>();
            if v < best {
                best = v;
                choice[j] = s;
            }
        }
        values[j] = best;
    }
    (values, choice)
}

fn select_below(index: &SequenceIndex, choice: &[usize], j: usize, y: &mut DVector<f64>) {
    let s = choice[j];
    y[s] = 1.0;
    for &k in index.children(s) {
        select_below(index, choice, k, y);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::efg_model::{build_decision_process_game, build_signaling_game, parse_game};
    use crate::sequence_form::{derive_sequence_index, subtree_polytope};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn two_action() -> SequenceIndex {
        let g = parse_game("players 1\nnode 0 player 1 infoset j 1:a 2:b\nnode 1 leaf 0\nnode 2 leaf 1\n").unwrap();
        derive_sequence_index(&g, 0)
    }

    #[test]
    fn decision_process_has_seven_plans() {
        let idx = derive_sequence_index(&build_decision_process_game(), 0);
        assert_eq!(count_reduced_plans(&idx), 2 * 2 + 3);
        let plans = enumerate_reduced_plans(&idx, 100).unwrap();
        assert_eq!(plans.len(), 7);
        let q = sequence_form_polytope(&idx);
        for p in &plans {
            assert_eq!(q.residual(&p.to_vector()), 0.0);
        }
        assert!(enumerate_reduced_plans(&idx, 6).is_err());
    }

    #[test]
    fn two_action_plans() {
        let idx = two_action();
        let plans = enumerate_reduced_plans(&idx, 10).unwrap();
        let v: Vec<Vec<f64>> = plans.iter().map(|p| p.to_vector().iter().cloned().collect()).collect();
        assert_eq!(v, vec![vec![1.0, 1.0, 0.0], vec![1.0, 0.0, 1.0]]);
    }

    #[test]
    fn signaling_plans_in_table_order() {
        let idx = derive_sequence_index(&build_signaling_game(), 0);
        let labels: Vec<String> = enumerate_reduced_plans(&idx, 10)
            .unwrap()
            .iter()
            .map(|p| p.label(&idx))
            .collect();
        assert_eq!(labels, ["X_G X_B", "X_G Y_B", "Y_G X_B", "Y_G Y_B"]);
    }

    #[test]
    fn vertex_samples_itself() {
        let idx = derive_sequence_index(&build_decision_process_game(), 0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for p in enumerate_reduced_plans(&idx, 100).unwrap() {
            for _ in 0..5 {
                assert_eq!(sample_plan(&idx, &p.to_vector(), &mut rng).unwrap(), p);
            }
            let mix = plan_mixture(&idx, &p.to_vector(), 100).unwrap();
            assert_eq!(mix, vec![(p.clone(), 1.0)]);
        }
    }

    #[test]
    fn sampling_frequencies_match_binomial() {
        let idx = two_action();
        let x = DVector::from_vec(vec![1.0, 0.3, 0.7]);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 100_000;
        let hits = (0..n)
            .filter(|_| sample_plan(&idx, &x, &mut rng).unwrap().contains(1))
            .count();
        let sigma = (0.3f64 * 0.7 / n as f64).sqrt();
        assert!((hits as f64 / n as f64 - 0.3).abs() < 3.0 * sigma);
        let mix = plan_mixture(&idx, &x, 10).unwrap();
        assert!((mix[0].1 - 0.3).abs() < 1e-15 && (mix[1].1 - 0.7).abs() < 1e-15);
    }

    #[test]
    fn uniform_sampling_is_unbiased() {
        let idx = derive_sequence_index(&build_decision_process_game(), 0);
        let x = uniform_strategy(&idx);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 100_000;
        let mut mean = DVector::zeros(idx.num_sequences());
        for _ in 0..n {
            mean += sample_plan(&idx, &x, &mut rng).unwrap().to_vector();
        }
        mean /= n as f64;
        for s in 0..idx.num_sequences() {
            let sigma = (x[s] * (1.0 - x[s]) / n as f64).sqrt();
            assert!((mean[s] - x[s]).abs() <= 3.0 * sigma + 1e-12, "seq {s}");
        }
        let mix = plan_mixture(&idx, &x, 100).unwrap();
        let rebuilt = mix.iter().fold(DVector::zeros(x.len()), |acc, (p, q)| acc + p.to_vector() * *q);
        assert!((rebuilt - x).amax() < 1e-9);
    }

    #[test]
    fn infeasible_point_rejected() {
        let idx = two_action();
        let x = DVector::from_vec(vec![1.0, 0.5, 0.6]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(sample_plan(&idx, &x, &mut rng).is_err());
    }

    #[test]
    fn best_response_matches_enumeration() {
        let idx = derive_sequence_index(&build_decision_process_game(), 0);
        let plans = enumerate_reduced_plans(&idx, 100).unwrap();
        let c: Vec<f64> = (0..idx.num_sequences()).map(|s| ((s * 7919) % 13) as f64 - 6.0).collect();
        let cv = DVector::from_vec(c.clone());
        let brute = plans.iter().map(|p| p.to_vector().dot(&cv)).fold(f64::INFINITY, f64::min);
        let (v, y) = minimize_over_q(&idx, &c);
        assert!((v - brute).abs() < 1e-12);
        assert!((y.dot(&cv) - v).abs() < 1e-12);
        let a = idx.infoset_by_label("A").unwrap();
        let (vs, ys) = minimize_over_subtree(&idx, &c, a);
        assert!((vs + c[0] - v).abs() < 1e-12);
        let (qa, seqs) = subtree_polytope(&idx, a).unwrap();
        let local = DVector::from_iterator(seqs.len(), seqs.iter().map(|&s| ys[s]));
        assert_eq!(qa.residual(&local), 0.0);
    }
}
