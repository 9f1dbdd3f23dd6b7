use super::{check_membership, DeviationMatrix, LinMapError, LinMapSystem, Provenance, VERTEX_CHECK_CAP};
use crate::sequence_form::{count_reduced_plans, enumerate_reduced_plans, minimize_over_subtree, SequenceIndex};
use nalgebra::DMatrix;

/// Terminal sequences below j such that every vertex of Q_j selects exactly
/// one of them: each action of j, or recursively the cover of the first
/// child infoset when the action is not terminal.
pub fn terminal_cover(index: &SequenceIndex, j: usize) -> Vec<usize> {
    let mut out = Vec::new();
    for s in index.actions(j) {
        match index.children(s).first() {
            None => out.push(s),
            Some(&c) => out.extend(terminal_cover(index, c)),
        }
    }
    out
}

/// Rewrites a matrix that maps Q into P as an equivalent member of M.
pub fn canonicalize(b: &DeviationMatrix, system: &LinMapSystem) -> Result<DeviationMatrix, LinMapError> {
    canonicalize_with_cap(b, system, VERTEX_CHECK_CAP)
}

/// As [`canonicalize`]; vertex checks run only when Q has at most `cap`
/// reduced plans.
pub fn canonicalize_with_cap(
    b: &DeviationMatrix,
    system: &LinMapSystem,
    cap: usize,
) -> Result<DeviationMatrix, LinMapError> {
    let idx = &system.source;
    let input = &b.matrix;
    let report = check_membership(input, system, 1e-12)?;
    let plans = if count_reduced_plans(idx) <= cap as u128 {
        Some(enumerate_reduced_plans(idx, cap)?)
    } else {
        None
    };
    if let Some(plans) = &plans {
        for p in plans {
            let residual = system.target.residual(&(input * p.to_vector()));
            if residual > 1e-7 {
                return Err(LinMapError::NotIntoTarget {
                    plan: p.label(idx),
                    residual,
                });
            }
        }
    }
    if report.ok {
        return Ok(DeviationMatrix::new(input.clone(), Provenance::Canonicalized));
    }

    let mut a = input.clone();
    spread_columns(idx, &mut a);
    shift_siblings(idx, &mut a);
    for v in a.iter_mut() {
        if *v < 0.0 && *v > -1e-12 {
            *v = 0.0;
        }
    }

    if let Some(plans) = &plans {
        for p in plans {
            let x = p.to_vector();
            let residual = (&a * &x - input * &x).amax();
            if residual > 1e-7 {
                return Err(LinMapError::NotIntoTarget {
                    plan: p.label(idx),
                    residual,
                });
            }
        }
    }
    let report = check_membership(&a, system, 1e-7)?;
    if !report.ok {
        return Err(LinMapError::Membership {
            residual: report.residual,
        });
    }
    Ok(DeviationMatrix::new(a, Provenance::Canonicalized))
}

/// Moves every non-terminal column onto the actions of its first child
/// infoset, top-down, so only terminal columns remain.
fn spread_columns(idx: &SequenceIndex, a: &mut DMatrix<f64>) {
    for s in 0..idx.num_sequences() {
        let Some(&j) = idx.children(s).first() else { continue };
        let col = a.column(s).into_owned();
        if col.iter().all(|&v| v == 0.0) {
            continue;
        }
        for t in idx.actions(j) {
            let mut c = a.column_mut(t);
            c += &col;
        }
        a.column_mut(s).fill(0.0);
    }
}

/// For sequences with several child infosets, moves the row-wise minimum of
/// each sibling block's output onto the last sibling so every block maps its
/// own subtree polytope into the nonnegative orthant.
fn shift_siblings(idx: &SequenceIndex, a: &mut DMatrix<f64>) {
    let n = idx.num_sequences();
    for s in 0..n {
        let kids = idx.children(s);
        if kids.len() < 2 {
            continue;
        }
        let (&last, rest) = kids.split_last().unwrap();
        let mut total = vec![0.0; a.nrows()];
        for &j in rest {
            let cover = terminal_cover(idx, j);
            for (r, tot) in total.iter_mut().enumerate() {
                let mut c = vec![0.0; n];
                for t in idx.subtree(j) {
                    c[t] = a[(r, t)];
                }
                let (beta, _) = minimize_over_subtree(idx, &c, j);
                if beta == 0.0 {
                    continue;
                }
                for &t in &cover {
                    a[(r, t)] -= beta;
                }
                *tot += beta;
            }
        }
        let cover = terminal_cover(idx, last);
        for (r, &tot) in total.iter().enumerate() {
            for &t in &cover {
                a[(r, t)] += tot;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::efg_model::{build_decision_process_game, build_signaling_game};
    use crate::linmap::compile_self_map_system;
    use crate::sequence_form::derive_sequence_index;

    fn vertex_equivalent(a: &DMatrix<f64>, b: &DMatrix<f64>, idx: &SequenceIndex) -> f64 {
        enumerate_reduced_plans(idx, 1000)
            .unwrap()
            .iter()
            .map(|p| (a * p.to_vector() - b * p.to_vector()).amax())
            .fold(0.0, f64::max)
    }

    #[test]
    fn identity_canonicalizes() {
        for game in [build_decision_process_game(), build_signaling_game()] {
            let idx = derive_sequence_index(&game, 0);
            let sys = compile_self_map_system(&idx);
            let id = DMatrix::identity(idx.num_sequences(), idx.num_sequences());
            let a = canonicalize(&DeviationMatrix::external(id.clone()), &sys).unwrap();
            assert!(check_membership(&a.matrix, &sys, 1e-9).unwrap().ok);
            assert!(vertex_equivalent(&a.matrix, &id, &idx) < 1e-12);
            assert_eq!(a.provenance, Provenance::Canonicalized);
        }
    }

    #[test]
    fn canonical_input_is_a_fixpoint() {
        let idx = derive_sequence_index(&build_decision_process_game(), 0);
        let sys = compile_self_map_system(&idx);
        let id = DMatrix::identity(10, 10);
        let a = canonicalize(&DeviationMatrix::external(id), &sys).unwrap();
        let again = canonicalize(&a, &sys).unwrap();
        assert!((again.matrix - &a.matrix).amax() <= 1e-12);
    }

    #[test]
    fn constant_map_with_mass_on_first_sibling() {
        // Root of the signaling process has two child infosets; a constant
        // map stored entirely in the ∅ column must be spread and shifted.
        let idx = derive_sequence_index(&build_signaling_game(), 0);
        let sys = compile_self_map_system(&idx);
        let mut b = DMatrix::zeros(5, 5);
        for r in [0, 1, 3] {
            b[(r, 0)] = 1.0;
        }
        let a = canonicalize(&DeviationMatrix::external(b.clone()), &sys).unwrap();
        assert!(check_membership(&a.matrix, &sys, 1e-12).unwrap().ok);
        assert!(vertex_equivalent(&a.matrix, &b, &idx) < 1e-12);
    }

    #[test]
    fn map_outside_target_is_reported() {
        let idx = derive_sequence_index(&build_signaling_game(), 0);
        let sys = compile_self_map_system(&idx);
        let b = DMatrix::from_element(5, 5, 1.0);
        assert!(matches!(
            canonicalize(&DeviationMatrix::external(b), &sys),
            Err(LinMapError::NotIntoTarget { .. })
        ));
    }

    #[test]
    fn cover_of_decision_process() {
        let idx = derive_sequence_index(&build_decision_process_game(), 0);
        let a = idx.infoset_by_label("A").unwrap();
        let labels: Vec<&str> = terminal_cover(&idx, a).iter().map(|&s| idx.seq_label(s)).collect();
        assert_eq!(labels, ["B.3", "B.4", "D.7", "D.8", "D.9"]);
    }
}
