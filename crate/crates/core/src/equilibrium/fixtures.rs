//! Joint distributions and plan swaps for the signaling game and the
//! counterexample game, addressed by infoset and action labels.

use super::{EquilibriumError, JointDistribution};
use crate::sequence_form::{enumerate_reduced_plans, ReducedPlan, SequenceGame, SequenceIndex};

/// One `(infoset, action)` choice per reached infoset.
pub type PlanSpec<'a> = &'a [(&'a str, &'a str)];

pub fn plan_from_labels(index: &SequenceIndex, picks: PlanSpec) -> Result<ReducedPlan, EquilibriumError> {
    let seqs = picks
        .iter()
        .map(|(i, a)| {
            index
                .find_seq(i, a)
                .ok_or_else(|| EquilibriumError::UnknownPlan(format!("{i}.{a}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ReducedPlan::from_sequences(index.num_sequences(), &seqs))
}

/// Distribution with the given probability on each listed profile.
pub fn joint_from_cells(game: &SequenceGame, cells: &[(Vec<PlanSpec>, f64)]) -> Result<JointDistribution, EquilibriumError> {
    let plans: Vec<Vec<ReducedPlan>> = game
        .indices
        .iter()
        .map(|idx| enumerate_reduced_plans(idx, 4096))
        .collect::<Result<_, _>>()?;
    let mut entries = Vec::with_capacity(cells.len());
    for (specs, w) in cells {
        let mut profile = Vec::with_capacity(specs.len());
        for (p, spec) in specs.iter().enumerate() {
            let idx = game
                .indices
                .get(p)
                .ok_or_else(|| EquilibriumError::InvalidJoint(format!("no player {}", p + 1)))?;
            let plan = plan_from_labels(idx, spec)?;
            let k = plans[p]
                .iter()
                .position(|q| *q == plan)
                .ok_or_else(|| EquilibriumError::UnknownPlan(plan.label(idx)))?;
            profile.push(k);
        }
        entries.push((profile, *w));
    }
    JointDistribution::new(plans, entries)
}

/// Signaling game: the extensive-form correlated equilibrium with 1/4 on
/// each of four cells.
pub fn signaling_efce(game: &SequenceGame) -> Result<JointDistribution, EquilibriumError> {
    let (xg, yg, xb, yb) = (("G", "X_G"), ("G", "Y_G"), ("B", "X_B"), ("B", "Y_B"));
    let (lx, rx, ly, ry) = (("X", "l_X"), ("X", "r_X"), ("Y", "l_Y"), ("Y", "r_Y"));
    joint_from_cells(
        game,
        &[
            (vec![&[xg, xb], &[lx, ry]], 0.25),
            (vec![&[xg, yb], &[lx, ry]], 0.25),
            (vec![&[yg, xb], &[rx, ly]], 0.25),
            (vec![&[yg, yb], &[rx, ly]], 0.25),
        ],
    )
}

/// Signaling game, sender: `X_G Y_B ↦ X_G X_B` and `Y_G X_B ↦ Y_G Y_B`.
pub fn signaling_swap(index: &SequenceIndex) -> Result<Vec<(ReducedPlan, ReducedPlan)>, EquilibriumError> {
    let p = |g: &str, b: &str| plan_from_labels(index, &[("G", g), ("B", b)]);
    Ok(vec![(p("X_G", "Y_B")?, p("X_G", "X_B")?), (p("Y_G", "X_B")?, p("Y_G", "Y_B")?)])
}

/// Counterexample game: the linear-deviation equilibrium with 1/5 on each
/// of five cells.
pub fn counterexample_lce(game: &SequenceGame) -> Result<JointDistribution, EquilibriumError> {
    let (a1, a2, b1, b2) = (("a", "A1"), ("a", "A2"), ("b", "B1"), ("b", "B2"));
    let (ql, qr, wl, wr) = (("Q", "Ql"), ("Q", "Qr"), ("W", "Wl"), ("W", "Wr"));
    joint_from_cells(
        game,
        &[
            (vec![&[a1, b1], &[ql, wl]], 0.2),
            (vec![&[a1, b2], &[ql, wr]], 0.2),
            (vec![&[a2, b1], &[ql, wl]], 0.2),
            (vec![&[a2, b2], &[qr, wl]], 0.2),
            (vec![&[a2, b2], &[qr, wr]], 0.2),
        ],
    )
}

/// Counterexample game, player 1: `A1 B2 ↦ A1 B1` and `A2 B1 ↦ A1 B1`.
pub fn counterexample_swap(index: &SequenceIndex) -> Result<Vec<(ReducedPlan, ReducedPlan)>, EquilibriumError> {
    let p = |a: &str, b: &str| plan_from_labels(index, &[("a", a), ("b", b)]);
    let target = p("A1", "B1")?;
    Ok(vec![(p("A1", "B2")?, target.clone()), (p("A2", "B1")?, target)])
}
