//! Sequence-form representation of each player's decision problem.

mod plans;
mod polytope;

pub use plans::{
    count_reduced_plans, enumerate_reduced_plans, minimize_over_q, minimize_over_subtree,
    plan_mixture, plan_mixture_weights, sample_plan, uniform_strategy, ReducedPlan,
};
pub use polytope::{sequence_form_polytope, subtree_polytope, StandardPolytope};

use crate::efg_model::{GameTree, Node};
use nalgebra::DVector;
use std::collections::HashMap;
use std::ops::Range;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SeqFormError {
    #[error("{count} reduced plans exceed the cap of {cap}")]
    CapExceeded { count: u128, cap: usize },
    #[error("point violates the sequence-form constraints by {residual:e}")]
    Infeasible { residual: f64 },
    #[error("unknown infoset {0}")]
    UnknownInfoset(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct InfosetEntry {
    pub label: String,
    pub actions: Vec<String>,
    /// Parent sequence p_j.
    pub parent: usize,
    /// Index of the first action sequence; actions are contiguous.
    pub first_seq: usize,
    /// End (exclusive) of the contiguous range of sequences at or below j.
    pub subtree_end: usize,
    /// Infoset id in the originating game.
    pub game_infoset: usize,
}

/// Sequences, infosets and parent/child maps of one player.
///
/// Layout: sequence 0 is the empty sequence; infosets are numbered in
/// depth-first order of the player's decision process (children in
/// discovery order), each owning a contiguous block of action sequences.
/// Consequently parents precede children and the sequences at or below any
/// infoset form a contiguous range.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceIndex {
    pub player: usize,
    infosets: Vec<InfosetEntry>,
    seq_infoset: Vec<Option<usize>>,
    seq_labels: Vec<String>,
    children: Vec<Vec<usize>>,
    below: Vec<Range<usize>>,
}

impl SequenceIndex {
    /// Builds an index directly from a decision process description:
    /// each infoset is `(label, actions, parent sequence)` and must be listed
    /// so that parents appear before children in depth-first order.
    pub fn from_infosets(player: usize, specs: &[(String, Vec<String>, usize)]) -> Self {
        let mut infosets: Vec<InfosetEntry> = Vec::new();
        let mut seq_infoset = vec![None];
        let mut seq_labels = vec!["∅".to_string()];
        for (gi, (label, actions, parent)) in specs.iter().enumerate() {
            assert!(*parent < seq_infoset.len(), "parent sequence must precede its child");
            let first_seq = seq_infoset.len();
            for a in actions {
                seq_infoset.push(Some(gi));
                seq_labels.push(format!("{label}.{a}"));
            }
            infosets.push(InfosetEntry {
                label: label.clone(),
                actions: actions.clone(),
                parent: *parent,
                first_seq,
                subtree_end: 0,
                game_infoset: gi,
            });
        }
        Self::finish(player, infosets, seq_infoset, seq_labels)
    }

    fn finish(
        player: usize,
        mut infosets: Vec<InfosetEntry>,
        seq_infoset: Vec<Option<usize>>,
        seq_labels: Vec<String>,
    ) -> Self {
        let n = seq_infoset.len();
        let mut children = vec![Vec::new(); n];
        for (j, info) in infosets.iter().enumerate() {
            children[info.parent].push(j);
        }
        // Bottom-up subtree extents; children have larger indices.
        for j in (0..infosets.len()).rev() {
            let mut end = infosets[j].first_seq + infosets[j].actions.len();
            for s in infosets[j].first_seq..infosets[j].first_seq + infosets[j].actions.len() {
                for &c in &children[s] {
                    end = end.max(infosets[c].subtree_end);
                }
            }
            infosets[j].subtree_end = end;
        }
        let mut below = vec![0..0; n];
        below[0] = 1..n;
        for s in 1..n {
            let kids = &children[s];
            below[s] = match (kids.first(), kids.last()) {
                (Some(&f), Some(&l)) => infosets[f].first_seq..infosets[l].subtree_end,
                _ => 0..0,
            };
        }
        SequenceIndex {
            player,
            infosets,
            seq_infoset,
            seq_labels,
            children,
            below,
        }
    }

    pub fn num_sequences(&self) -> usize {
        self.seq_infoset.len()
    }

    pub fn num_infosets(&self) -> usize {
        self.infosets.len()
    }

    pub fn infosets(&self) -> &[InfosetEntry] {
        &self.infosets
    }

    pub fn infoset(&self, j: usize) -> &InfosetEntry {
        &self.infosets[j]
    }

    pub fn parent(&self, j: usize) -> usize {
        self.infosets[j].parent
    }

    /// Action sequences ja for a in A_j.
    pub fn actions(&self, j: usize) -> Range<usize> {
        let i = &self.infosets[j];
        i.first_seq..i.first_seq + i.actions.len()
    }

    /// Sequences Σ_{⪰j} at or below infoset j.
    pub fn subtree(&self, j: usize) -> Range<usize> {
        self.infosets[j].first_seq..self.infosets[j].subtree_end
    }

    /// Sequences strictly below σ (all sequences of its child infosets).
    pub fn below(&self, seq: usize) -> Range<usize> {
        self.below[seq].clone()
    }

    /// Whether `desc` equals `seq` or lies below it.
    pub fn is_descendant(&self, desc: usize, seq: usize) -> bool {
        desc == seq || self.below[seq].contains(&desc)
    }

    /// Child infosets C_σ in ascending order.
    pub fn children(&self, seq: usize) -> &[usize] {
        &self.children[seq]
    }

    pub fn is_terminal(&self, seq: usize) -> bool {
        self.children[seq].is_empty()
    }

    pub fn terminal_sequences(&self) -> Vec<usize> {
        (0..self.num_sequences()).filter(|&s| self.is_terminal(s)).collect()
    }

    /// Infoset owning a non-empty sequence.
    pub fn seq_infoset(&self, seq: usize) -> Option<usize> {
        self.seq_infoset[seq]
    }

    pub fn seq_label(&self, seq: usize) -> &str {
        &self.seq_labels[seq]
    }

    pub fn seq_labels(&self) -> &[String] {
        &self.seq_labels
    }

    pub fn infoset_by_label(&self, label: &str) -> Option<usize> {
        self.infosets.iter().position(|i| i.label == label)
    }

    pub fn find_seq(&self, infoset: &str, action: &str) -> Option<usize> {
        let j = self.infoset_by_label(infoset)?;
        let a = self.infosets[j].actions.iter().position(|x| x == action)?;
        Some(self.infosets[j].first_seq + a)
    }

    /// Infoset with a given id in the originating game.
    pub fn local_infoset(&self, game_infoset: usize) -> Option<usize> {
        self.infosets.iter().position(|i| i.game_infoset == game_infoset)
    }
}

/// Derives the sequence index of `player` from a validated game.
pub fn derive_sequence_index(game: &GameTree, player: usize) -> SequenceIndex {
    // Discovery pass: parent sequence of each infoset as (infoset, action).
    let mut parent_of: HashMap<usize, Option<(usize, usize)>> = HashMap::new();
    let mut kids: HashMap<Option<(usize, usize)>, Vec<usize>> = HashMap::new();
    let mut stack: Vec<(usize, Option<(usize, usize)>)> = vec![(0, None)];
    while let Some((id, last)) = stack.pop() {
        match game.node(id) {
            Node::Terminal { .. } => {}
            Node::Chance { outcomes } => {
                for &(c, _) in outcomes.iter().rev() {
                    stack.push((c, last));
                }
            }
            Node::Decision {
                player: p,
                infoset,
                children,
            } => {
                if *p == player && !parent_of.contains_key(infoset) {
                    parent_of.insert(*infoset, last);
                    kids.entry(last).or_default().push(*infoset);
                }
                for (a, &c) in children.iter().enumerate().rev() {
                    let next = if *p == player { Some((*infoset, a)) } else { last };
                    stack.push((c, next));
                }
            }
        }
    }
    let mut infosets = Vec::new();
    let mut seq_infoset = vec![None];
    let mut seq_labels = vec!["∅".to_string()];
    fn visit(
        game: &GameTree,
        gi: usize,
        parent: usize,
        kids: &HashMap<Option<(usize, usize)>, Vec<usize>>,
        infosets: &mut Vec<InfosetEntry>,
        seq_infoset: &mut Vec<Option<usize>>,
        seq_labels: &mut Vec<String>,
    ) {
        let info = game.infoset(gi);
        let j = infosets.len();
        let first_seq = seq_infoset.len();
        for a in &info.actions {
            seq_infoset.push(Some(j));
            seq_labels.push(format!("{}.{}", info.label, a));
        }
        infosets.push(InfosetEntry {
            label: info.label.clone(),
            actions: info.actions.clone(),
            parent,
            first_seq,
            subtree_end: 0,
            game_infoset: gi,
        });
        for a in 0..info.actions.len() {
            if let Some(cs) = kids.get(&Some((gi, a))) {
                for &c in cs {
                    visit(game, c, first_seq + a, kids, infosets, seq_infoset, seq_labels);
                }
            }
        }
    }
    if let Some(roots) = kids.get(&None) {
        for &r in roots {
            visit(
                game,
                r,
                0,
                &kids,
                &mut infosets,
                &mut seq_infoset,
                &mut seq_labels,
            );
        }
    }
    SequenceIndex::finish(player, infosets, seq_infoset, seq_labels)
}

/// One leaf seen through the sequence form: chance reach, the sequence of
/// each player on the root path and the utilities.
#[derive(Debug, Clone, PartialEq)]
pub struct LeafRecord {
    pub node: usize,
    pub chance: f64,
    pub seqs: Vec<usize>,
    pub utilities: Vec<f64>,
}

/// Sequence indices of all players plus the leaf table, which together
/// express every player's utility as a multilinear function of the
/// sequence-form strategies.
#[derive(Debug, Clone)]
pub struct SequenceGame {
    pub indices: Vec<SequenceIndex>,
    pub leaves: Vec<LeafRecord>,
}

impl SequenceGame {
    pub fn new(game: &GameTree) -> Self {
        let n = game.num_players();
        let indices: Vec<SequenceIndex> = (0..n).map(|p| derive_sequence_index(game, p)).collect();
        let mut local: Vec<HashMap<usize, usize>> = vec![HashMap::new(); n];
        for (p, idx) in indices.iter().enumerate() {
            for (j, info) in idx.infosets().iter().enumerate() {
                local[p].insert(info.game_infoset, j);
            }
        }
        let mut leaves = Vec::new();
        let mut stack: Vec<(usize, f64, Vec<usize>)> = vec![(0, 1.0, vec![0; n])];
        while let Some((id, reach, seqs)) = stack.pop() {
            match game.node(id) {
                Node::Terminal { utilities } => leaves.push(LeafRecord {
                    node: id,
                    chance: reach,
                    seqs,
                    utilities: utilities.clone(),
                }),
                Node::Chance { outcomes } => {
                    for &(c, p) in outcomes.iter().rev() {
                        stack.push((c, reach * p, seqs.clone()));
                    }
                }
                Node::Decision {
                    player,
                    infoset,
                    children,
                } => {
                    let j = local[*player][infoset];
                    let first = indices[*player].infoset(j).first_seq;
                    for (a, &c) in children.iter().enumerate().rev() {
                        let mut s = seqs.clone();
                        s[*player] = first + a;
                        stack.push((c, reach, s));
                    }
                }
            }
        }
        SequenceGame { indices, leaves }
    }

    pub fn num_players(&self) -> usize {
        self.indices.len()
    }

    /// Expected utility of `player` under sequence-form strategies of all players.
    pub fn utility(&self, player: usize, strategies: &[&DVector<f64>]) -> f64 {
        self.leaves
            .iter()
            .map(|z| {
                let reach: f64 = z.seqs.iter().zip(strategies).map(|(&s, x)| x[s]).product();
                z.chance * reach * z.utilities[player]
            })
            .sum()
    }

    /// Gradient of `player`'s utility with respect to their own sequence-form
    /// strategy, given the others' strategies. The entry for `player` in
    /// `strategies` is ignored.
    pub fn utility_gradient(&self, player: usize, strategies: &[&DVector<f64>]) -> DVector<f64> {
        self.weighted_gradient(player, strategies, |u| u)
    }

    /// Like [`SequenceGame::utility_gradient`] with each leaf utility first
    /// transformed by `f`.
    pub fn weighted_gradient(
        &self,
        player: usize,
        strategies: &[&DVector<f64>],
        f: impl Fn(f64) -> f64,
    ) -> DVector<f64> {
        let mut g = DVector::zeros(self.indices[player].num_sequences());
        for z in &self.leaves {
            let mut w = z.chance;
            for (k, (&s, x)) in z.seqs.iter().zip(strategies).enumerate() {
                if k != player {
                    w *= x[s];
                }
            }
            if w != 0.0 {
                g[z.seqs[player]] += w * f(z.utilities[player]);
            }
        }
        g
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::efg_model::{build_decision_process_game, build_kuhn_poker, build_signaling_game, parse_game};

    #[test]
    fn decision_process_layout() {
        let idx = derive_sequence_index(&build_decision_process_game(), 0);
        assert_eq!(idx.num_sequences(), 10);
        let labels: Vec<&str> = idx.seq_labels().iter().map(|s| s.as_str()).collect();
        assert_eq!(labels, ["∅", "A.1", "A.2", "B.3", "B.4", "C.5", "C.6", "D.7", "D.8", "D.9"]);
        let a2 = idx.find_seq("A", "2").unwrap();
        let a1 = idx.find_seq("A", "1").unwrap();
        assert_eq!(idx.parent(idx.infoset_by_label("D").unwrap()), a2);
        assert_eq!(idx.parent(idx.infoset_by_label("B").unwrap()), a1);
        assert_eq!(idx.parent(idx.infoset_by_label("C").unwrap()), a1);
        assert_eq!(idx.parent(idx.infoset_by_label("A").unwrap()), 0);
        assert_eq!(idx.terminal_sequences(), vec![3, 4, 5, 6, 7, 8, 9]);
        assert_eq!(idx.below(a1), 3..7);
        assert_eq!(idx.below(a2), 7..10);
        assert_eq!(idx.subtree(0), 1..10);
    }

    #[test]
    fn single_infoset_player() {
        let g = parse_game("players 1\nnode 0 player 1 infoset j 1:a 2:b\nnode 1 leaf 0\nnode 2 leaf 1\n").unwrap();
        let idx = derive_sequence_index(&g, 0);
        assert_eq!(idx.num_sequences(), 3);
        assert_eq!(idx.terminal_sequences(), vec![1, 2]);
        assert!(!idx.is_terminal(0));
    }

    #[test]
    fn player_without_infosets() {
        let g = parse_game("players 2\nnode 0 player 1 infoset j 1:a 2:b\nnode 1 leaf 0 0\nnode 2 leaf 1 0\n").unwrap();
        let idx = derive_sequence_index(&g, 1);
        assert_eq!(idx.num_sequences(), 1);
        assert!(idx.is_terminal(0));
    }

    /// Independent count: distinct (player, infoset label) pairs seen in a
    /// recursive walk, and one sequence per (infoset, action) plus ∅.
    fn walk_counts(g: &GameTree, player: usize) -> (usize, usize) {
        fn rec(g: &GameTree, id: usize, player: usize, seen: &mut std::collections::BTreeSet<String>, seqs: &mut usize) {
            if let Node::Decision { player: p, infoset, .. } = g.node(id) {
                let info = g.infoset(*infoset);
                if *p == player && seen.insert(info.label.clone()) {
                    *seqs += info.actions.len();
                }
            }
            for c in g.children(id) {
                rec(g, c, player, seen, seqs);
            }
        }
        let mut seen = Default::default();
        let mut seqs = 1;
        rec(g, 0, player, &mut seen, &mut seqs);
        (seen.len(), seqs)
    }

    #[test]
    fn kuhn_counts_match_tree_walk() {
        let g = build_kuhn_poker(3, 2).unwrap();
        for p in 0..2 {
            let idx = derive_sequence_index(&g, p);
            let (j, s) = walk_counts(&g, p);
            assert_eq!((idx.num_infosets(), idx.num_sequences()), (j, s));
            assert_eq!((j, s), (6, 13));
        }
    }

    #[test]
    fn leaf_table_reproduces_expected_utility() {
        let g = build_signaling_game();
        let sg = SequenceGame::new(&g);
        let x1 = DVector::from_vec(vec![1.0, 1.0, 0.0, 1.0, 0.0]);
        let x2 = DVector::from_vec(vec![1.0, 1.0, 0.0, 1.0, 0.0]);
        assert!((sg.utility(0, &[&x1, &x2]) - 5.0).abs() < 1e-12);
        assert!((sg.utility(1, &[&x1, &x2]) - 5.0).abs() < 1e-12);
        let grad = sg.utility_gradient(0, &[&x1, &x2]);
        assert!((grad.dot(&x1) - 5.0).abs() < 1e-12);
    }
}
