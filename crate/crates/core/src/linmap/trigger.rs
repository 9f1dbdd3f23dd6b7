use super::{canonicalize, DeviationMatrix, LinMapError, LinMapSystem, Provenance};
use crate::sequence_form::{sequence_form_polytope, subtree_polytope, SequenceIndex};
use nalgebra::{DMatrix, DVector};

/// Sequences that can trigger a deviation: ∅ (whose trigger maps are the
/// constant maps) followed by every action sequence.
pub fn trigger_sequences(index: &SequenceIndex) -> Vec<usize> {
    (0..index.num_sequences()).collect()
}

fn check_continuation(index: &SequenceIndex, trigger: usize, y: &DVector<f64>) -> Result<(), LinMapError> {
    if trigger >= index.num_sequences() {
        return Err(LinMapError::BadTrigger(trigger));
    }
    if y.len() != index.num_sequences() {
        return Err(crate::sequence_form::SeqFormError::Dimension {
            expected: index.num_sequences(),
            got: y.len(),
        }
        .into());
    }
    let residual = match index.seq_infoset(trigger) {
        None => sequence_form_polytope(index).residual(y),
        Some(j) => {
            let (poly, seqs) = subtree_polytope(index, j)?;
            let local = DVector::from_iterator(seqs.len(), seqs.iter().map(|&s| y[s]));
            let outside = (0..index.num_sequences())
                .filter(|s| !index.subtree(j).contains(s))
                .fold(0.0f64, |m, s| m.max(y[s].abs()));
            poly.residual(&local).max(outside)
        }
    };
    if residual > 1e-9 {
        return Err(LinMapError::InfeasibleContinuation { residual });
    }
    Ok(())
}

/// `I − D + ŷ e_σ̂ᵀ`, with D the diagonal indicator of σ̂ and the sequences
/// below it and ŷ the continuation (a point of Q_j for σ̂ = ja, of Q for
/// σ̂ = ∅), given over all of Σ.
pub fn raw_trigger_matrix(index: &SequenceIndex, trigger: usize, continuation: &DVector<f64>) -> Result<DMatrix<f64>, LinMapError> {
    check_continuation(index, trigger, continuation)?;
    let n = index.num_sequences();
    let mut m = DMatrix::identity(n, n);
    for s in 0..n {
        if index.is_descendant(s, trigger) {
            m[(s, s)] = 0.0;
        }
    }
    for r in 0..n {
        m[(r, trigger)] += continuation[r];
    }
    Ok(m)
}

/// Trigger deviation in canonical form: plans playing σ̂ have their
/// behavior at and below σ̂'s infoset replaced by the continuation, all
/// other plans are left alone.
pub fn trigger_deviation_matrix(
    system: &LinMapSystem,
    trigger: usize,
    continuation: &DVector<f64>,
) -> Result<DeviationMatrix, LinMapError> {
    let raw = raw_trigger_matrix(&system.source, trigger, continuation)?;
    let mut a = canonicalize(&DeviationMatrix::new(raw, Provenance::Trigger), system)?;
    a.provenance = Provenance::Trigger;
    Ok(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::efg_model::{build_decision_process_game, build_signaling_game};
    use crate::linmap::{check_membership, compile_self_map_system};
    use crate::sequence_form::{derive_sequence_index, enumerate_reduced_plans, ReducedPlan};

    fn plan(idx: &SequenceIndex, labels: &[(&str, &str)]) -> ReducedPlan {
        let seqs: Vec<usize> = labels.iter().map(|(i, a)| idx.find_seq(i, a).unwrap()).collect();
        ReducedPlan::from_sequences(idx.num_sequences(), &seqs)
    }

    #[test]
    fn signaling_trigger_rewrites_only_triggered_plans() {
        let idx = derive_sequence_index(&build_signaling_game(), 0);
        let sys = compile_self_map_system(&idx);
        let xg = idx.find_seq("G", "X_G").unwrap();
        let yg = idx.find_seq("G", "Y_G").unwrap();
        let mut cont = DVector::zeros(5);
        cont[yg] = 1.0;
        let a = trigger_deviation_matrix(&sys, xg, &cont).unwrap();
        assert_eq!(a.provenance, Provenance::Trigger);
        assert!(check_membership(&a.matrix, &sys, 1e-9).unwrap().ok);
        let cases = [
            ([("G", "X_G"), ("B", "X_B")], [("G", "Y_G"), ("B", "X_B")]),
            ([("G", "X_G"), ("B", "Y_B")], [("G", "Y_G"), ("B", "Y_B")]),
            ([("G", "Y_G"), ("B", "X_B")], [("G", "Y_G"), ("B", "X_B")]),
            ([("G", "Y_G"), ("B", "Y_B")], [("G", "Y_G"), ("B", "Y_B")]),
        ];
        for (from, to) in cases {
            let got = &a.matrix * plan(&idx, &from).to_vector();
            assert!((got - plan(&idx, &to).to_vector()).amax() < 1e-12);
        }
    }

    #[test]
    fn untriggered_plans_are_fixed() {
        let idx = derive_sequence_index(&build_decision_process_game(), 0);
        let sys = compile_self_map_system(&idx);
        let b3 = idx.find_seq("B", "3").unwrap();
        let mut cont = DVector::zeros(10);
        cont[idx.find_seq("B", "4").unwrap()] = 1.0;
        let a = trigger_deviation_matrix(&sys, b3, &cont).unwrap();
        for p in enumerate_reduced_plans(&idx, 100).unwrap() {
            let x = p.to_vector();
            let y = &a.matrix * &x;
            if p.contains(b3) {
                assert!((y[b3]).abs() < 1e-12 && (y[b3 + 1] - 1.0).abs() < 1e-12);
            } else {
                assert!((y - x).amax() < 1e-12);
            }
        }
    }

    #[test]
    fn every_trigger_is_a_member() {
        let idx = derive_sequence_index(&build_decision_process_game(), 0);
        let sys = compile_self_map_system(&idx);
        for s in trigger_sequences(&idx) {
            let cont = match idx.seq_infoset(s) {
                None => enumerate_reduced_plans(&idx, 100).unwrap()[3].to_vector(),
                Some(j) => {
                    let mut c = vec![0.0; 10];
                    for t in idx.subtree(j) {
                        c[t] = (t * 7 % 5) as f64;
                    }
                    crate::sequence_form::minimize_over_subtree(&idx, &c, j).1
                }
            };
            let a = trigger_deviation_matrix(&sys, s, &cont).unwrap();
            assert!(check_membership(&a.matrix, &sys, 1e-9).unwrap().ok, "trigger {s}");
        }
    }

    #[test]
    fn infeasible_continuation() {
        let idx = derive_sequence_index(&build_decision_process_game(), 0);
        let sys = compile_self_map_system(&idx);
        let cont = DVector::from_element(10, 0.5);
        assert!(matches!(
            trigger_deviation_matrix(&sys, 1, &cont),
            Err(LinMapError::InfeasibleContinuation { .. })
        ));
    }
}
