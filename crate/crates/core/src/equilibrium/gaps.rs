use super::{DeviationClass, EquilibriumError, GapCertificate, Witness};
use crate::convex_opt::{solve_lp_within, TOLERANCES, Sense};
use crate::linmap::LinMapSystem;
use crate::sequence_form::{minimize_over_q, minimize_over_subtree, SequenceIndex};
use nalgebra::{DMatrix, DVector};

/// Best constant deviation: `B − min_{y ∈ Q} ⟨G[:, ∅], y⟩`.
pub fn external_gap(index: &SequenceIndex, g: &DMatrix<f64>, baseline: f64, player: usize) -> GapCertificate {
    let c: Vec<f64> = g.column(0).iter().cloned().collect();
    let (value, y) = minimize_over_q(index, &c);
    GapCertificate {
        player,
        class: DeviationClass::External,
        gap: baseline - value,
        witness: Witness::Point(y),
    }
}

/// Best trigger deviation. For σ̂ = ja the map `I − D + ŷ e_σ̂ᵀ` gains
/// `Σ_{σ ⪰ σ̂} G[σ, σ] − ⟨G[Σ_{⪰j}, σ̂], ŷ⟩`, minimized over ŷ ∈ Q_j by
/// dynamic programming; σ̂ = ∅ gives the external gap.
pub fn trigger_gap(index: &SequenceIndex, g: &DMatrix<f64>, baseline: f64, player: usize) -> GapCertificate {
    let ext = external_gap(index, g, baseline, player);
    let mut best = GapCertificate {
        class: DeviationClass::Trigger,
        witness: match ext.witness {
            Witness::Point(y) => Witness::Trigger {
                sequence: 0,
                continuation: y,
            },
            w => w,
        },
        ..ext
    };
    let n = index.num_sequences();
    for s in 1..n {
        let j = index.seq_infoset(s).expect("action sequence");
        let removed: f64 = g[(s, s)] + index.below(s).map(|r| g[(r, r)]).sum::<f64>();
        let mut c = vec![0.0; n];
        for r in index.subtree(j) {
            c[r] = g[(r, s)];
        }
        let (value, y) = minimize_over_subtree(index, &c, j);
        let gap = removed - value;
        if gap > best.gap {
            best.gap = gap;
            best.witness = Witness::Trigger {
                sequence: s,
                continuation: y,
            };
        }
    }
    best
}

/// Best linear deviation: `B − min_{A ∈ M} ⟨G, A⟩` by linear programming.
pub fn linear_swap_gap(
    system: &LinMapSystem,
    g: &DMatrix<f64>,
    baseline: f64,
    player: usize,
) -> Result<GapCertificate, EquilibriumError> {
    let sol = solve_lp_within(&system.to_lp(g, Sense::Minimize), TOLERANCES.audit)?;
    let a = system.matrix_from_solution(&sol.x);
    Ok(GapCertificate {
        player,
        class: DeviationClass::LinearSwap,
        gap: baseline - sol.objective,
        witness: Witness::Matrix(a),
    })
}

/// `Σ w ℓ xᵀ` and `Σ w ⟨ℓ, x⟩` for weighted (ℓ, x) pairs.
pub(crate) fn accumulate<'a>(d: usize, items: impl Iterator<Item = (f64, &'a DVector<f64>, &'a DVector<f64>)>) -> (DMatrix<f64>, f64) {
    let mut g = DMatrix::zeros(d, d);
    let mut base = 0.0;
    for (w, l, x) in items {
        g.ger(w, l, x, 1.0);
        base += w * l.dot(x);
    }
    (g, base)
}
