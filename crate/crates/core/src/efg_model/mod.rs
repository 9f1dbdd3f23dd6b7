//! Extensive-form games: tree representation, text format, generators and
//! the normal-form view used by brute-force audits.

mod format;
mod generators;
mod normal_form;

pub use format::{parse_game, serialize_game};
pub use generators::{
    build_counterexample_game, build_decision_process_game, build_kuhn_poker,
    build_sat_reduction, build_signaling_game, parse_dimacs, Literal,
};
pub use normal_form::{normal_form_view, NormalFormView};

use std::collections::HashMap;
use thiserror::Error;

pub type NodeId = usize;

/// Probability-sum tolerance for chance nodes.
pub const CHANCE_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GameError {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("perfect recall violated at infoset '{infoset}' of player {player}")]
    PerfectRecall { player: usize, infoset: String },
    #[error("infoset '{infoset}' of player {player}: nodes disagree on actions")]
    ActionMismatch { player: usize, infoset: String },
    #[error("chance node {node}: probabilities sum to {sum}")]
    ProbabilitySum { node: NodeId, sum: f64 },
    #[error("malformed tree: {0}")]
    Structure(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Chance {
        outcomes: Vec<(NodeId, f64)>,
    },
    Decision {
        player: usize,
        infoset: usize,
        children: Vec<NodeId>,
    },
    Terminal {
        utilities: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Infoset {
    pub player: usize,
    pub label: String,
    pub actions: Vec<String>,
}

/// Validated perfect-recall game. Players are 0-based; node 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct GameTree {
    num_players: usize,
    nodes: Vec<Node>,
    infosets: Vec<Infoset>,
}

impl GameTree {
    pub fn num_players(&self) -> usize {
        self.num_players
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id]
    }

    pub fn infosets(&self) -> &[Infoset] {
        &self.infosets
    }

    pub fn infoset(&self, id: usize) -> &Infoset {
        &self.infosets[id]
    }

    pub fn num_infosets(&self, player: usize) -> usize {
        self.infosets.iter().filter(|i| i.player == player).count()
    }

    pub fn num_terminals(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Terminal { .. }))
            .count()
    }

    /// Children of a node in action/outcome order.
    pub fn children(&self, id: NodeId) -> Vec<NodeId> {
        match &self.nodes[id] {
            Node::Chance { outcomes } => outcomes.iter().map(|(c, _)| *c).collect(),
            Node::Decision { children, .. } => children.clone(),
            Node::Terminal { .. } => Vec::new(),
        }
    }

    /// Smallest and largest utility of each player over all leaves.
    pub fn utility_range(&self, player: usize) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for n in &self.nodes {
            if let Node::Terminal { utilities } = n {
                lo = lo.min(utilities[player]);
                hi = hi.max(utilities[player]);
            }
        }
        (lo, hi)
    }

    /// Returns a copy with one leaf's utilities replaced.
    pub fn with_leaf_utilities(&self, leaf: NodeId, utilities: Vec<f64>) -> Result<Self, GameError> {
        let mut g = self.clone();
        match g.nodes.get_mut(leaf) {
            Some(Node::Terminal { utilities: u }) if u.len() == utilities.len() => *u = utilities,
            _ => return Err(GameError::InvalidParameter(format!("node {leaf} is not a matching leaf"))),
        }
        Ok(g)
    }
}

/// Incremental constructor; nodes may be added in any order as long as
/// node 0 ends up being the root.
#[derive(Debug, Default)]
pub struct GameBuilder {
    num_players: usize,
    nodes: Vec<Option<Node>>,
    infosets: Vec<Infoset>,
    infoset_ids: HashMap<(usize, String), usize>,
}

impl GameBuilder {
    pub fn new(num_players: usize) -> Self {
        GameBuilder {
            num_players,
            ..Default::default()
        }
    }

    /// Reserves a node id to be filled later with [`GameBuilder::set`].
    pub fn reserve(&mut self) -> NodeId {
        self.nodes.push(None);
        self.nodes.len() - 1
    }

    pub fn set(&mut self, id: NodeId, node: Node) {
        if id >= self.nodes.len() {
            self.nodes.resize(id + 1, None);
        }
        self.nodes[id] = Some(node);
    }

    pub fn is_set(&self, id: NodeId) -> bool {
        self.nodes.get(id).is_some_and(|n| n.is_some())
    }

    pub fn leaf(&mut self, utilities: Vec<f64>) -> NodeId {
        self.nodes.push(Some(Node::Terminal { utilities }));
        self.nodes.len() - 1
    }

    pub fn chance(&mut self, outcomes: Vec<(NodeId, f64)>) -> NodeId {
        self.nodes.push(Some(Node::Chance { outcomes }));
        self.nodes.len() - 1
    }

    /// Decision node; `actions` pairs each child with its action label.
    pub fn decision(&mut self, player: usize, infoset: &str, actions: Vec<(NodeId, String)>) -> Result<NodeId, GameError> {
        let id = self.reserve();
        self.set_decision(id, player, infoset, actions)?;
        Ok(id)
    }

    pub fn set_decision(
        &mut self,
        id: NodeId,
        player: usize,
        infoset: &str,
        actions: Vec<(NodeId, String)>,
    ) -> Result<(), GameError> {
        if player >= self.num_players {
            return Err(GameError::Structure(format!(
                "node {id}: player {} out of range",
                player + 1
            )));
        }
        let labels: Vec<String> = actions.iter().map(|(_, a)| a.clone()).collect();
        let key = (player, infoset.to_string());
        let info = match self.infoset_ids.get(&key) {
            Some(&i) => {
                if self.infosets[i].actions != labels {
                    return Err(GameError::ActionMismatch {
                        player: player + 1,
                        infoset: infoset.to_string(),
                    });
                }
                i
            }
            None => {
                let mut seen = std::collections::HashSet::new();
                if labels.is_empty() || !labels.iter().all(|l| seen.insert(l.as_str())) {
                    return Err(GameError::Structure(format!(
                        "infoset '{infoset}' needs distinct, non-empty action labels"
                    )));
                }
                self.infosets.push(Infoset {
                    player,
                    label: infoset.to_string(),
                    actions: labels,
                });
                self.infoset_ids.insert(key, self.infosets.len() - 1);
                self.infosets.len() - 1
            }
        };
        let children = actions.into_iter().map(|(c, _)| c).collect();
        self.set(
            id,
            Node::Decision {
                player,
                infoset: info,
                children,
            },
        );
        Ok(())
    }

    /// Validates and renumbers the tree in depth-first preorder from node 0.
    pub fn finish(self) -> Result<GameTree, GameError> {
        if self.num_players == 0 {
            return Err(GameError::InvalidParameter("at least one player required".into()));
        }
        let raw: Vec<Node> = self
            .nodes
            .into_iter()
            .enumerate()
            .map(|(i, n)| n.ok_or_else(|| GameError::Structure(format!("node {i} referenced but never defined"))))
            .collect::<Result<_, _>>()?;
        if raw.is_empty() {
            return Err(GameError::Structure("empty game".into()));
        }
        let mut new_id = vec![usize::MAX; raw.len()];
        let mut order = Vec::with_capacity(raw.len());
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            if id >= raw.len() {
                return Err(GameError::Structure(format!("unknown node {id}")));
            }
            if new_id[id] != usize::MAX {
                return Err(GameError::Structure(format!("node {id} has more than one parent")));
            }
            new_id[id] = order.len();
            order.push(id);
            let kids: Vec<NodeId> = match &raw[id] {
                Node::Chance { outcomes } => outcomes.iter().map(|(c, _)| *c).collect(),
                Node::Decision { children, .. } => children.clone(),
                Node::Terminal { .. } => vec![],
            };
            stack.extend(kids.into_iter().rev());
        }
        if order.len() != raw.len() {
            let orphan = new_id.iter().position(|&v| v == usize::MAX).unwrap_or(0);
            return Err(GameError::Structure(format!("node {orphan} unreachable from root")));
        }
        let mut infoset_id = vec![usize::MAX; self.infosets.len()];
        let mut infosets = Vec::with_capacity(self.infosets.len());
        for &old in &order {
            if let Node::Decision { infoset, .. } = &raw[old] {
                if infoset_id[*infoset] == usize::MAX {
                    infoset_id[*infoset] = infosets.len();
                    infosets.push(self.infosets[*infoset].clone());
                }
            }
        }
        let nodes: Vec<Node> = order
            .iter()
            .map(|&old| match &raw[old] {
                Node::Chance { outcomes } => Node::Chance {
                    outcomes: outcomes.iter().map(|&(c, p)| (new_id[c], p)).collect(),
                },
                Node::Decision {
                    player,
                    infoset,
                    children,
                } => Node::Decision {
                    player: *player,
                    infoset: infoset_id[*infoset],
                    children: children.iter().map(|&c| new_id[c]).collect(),
                },
                Node::Terminal { utilities } => Node::Terminal {
                    utilities: utilities.clone(),
                },
            })
            .collect();
        let game = GameTree {
            num_players: self.num_players,
            nodes,
            infosets,
        };
        validate(&game)?;
        Ok(game)
    }
}

fn validate(game: &GameTree) -> Result<(), GameError> {
    for (id, node) in game.nodes.iter().enumerate() {
        match node {
            Node::Chance { outcomes } => {
                if outcomes.is_empty() {
                    return Err(GameError::Structure(format!("chance node {id} has no outcomes")));
                }
                let sum: f64 = outcomes.iter().map(|(_, p)| p).sum();
                if outcomes.iter().any(|(_, p)| !p.is_finite() || *p < 0.0) || (sum - 1.0).abs() > CHANCE_SUM_TOL {
                    return Err(GameError::ProbabilitySum { node: id, sum });
                }
            }
            Node::Decision { infoset, children, .. } => {
                if children.len() != game.infosets[*infoset].actions.len() {
                    let i = &game.infosets[*infoset];
                    return Err(GameError::ActionMismatch {
                        player: i.player + 1,
                        infoset: i.label.clone(),
                    });
                }
            }
            Node::Terminal { utilities } => {
                if utilities.len() != game.num_players || utilities.iter().any(|u| !u.is_finite()) {
                    return Err(GameError::Structure(format!(
                        "leaf {id} needs {} finite utilities",
                        game.num_players
                    )));
                }
            }
        }
    }
    // Perfect recall: every node of an infoset sees the same own history.
    let mut seen: Vec<Option<Vec<(usize, usize)>>> = vec![None; game.infosets.len()];
    let mut histories: Vec<Vec<(usize, usize)>> = vec![Vec::new(); game.num_players];
    check_recall(game, 0, &mut histories, &mut seen)
}

fn check_recall(
    game: &GameTree,
    id: NodeId,
    histories: &mut Vec<Vec<(usize, usize)>>,
    seen: &mut Vec<Option<Vec<(usize, usize)>>>,
) -> Result<(), GameError> {
    match &game.nodes[id] {
        Node::Terminal { .. } => Ok(()),
        Node::Chance { outcomes } => {
            for &(c, _) in outcomes {
                check_recall(game, c, histories, seen)?;
            }
            Ok(())
        }
        Node::Decision {
            player,
            infoset,
            children,
        } => {
            match &seen[*infoset] {
                Some(h) if *h != histories[*player] => {
                    return Err(GameError::PerfectRecall {
                        player: player + 1,
                        infoset: game.infosets[*infoset].label.clone(),
                    })
                }
                Some(_) => {}
                None => seen[*infoset] = Some(histories[*player].clone()),
            }
            for (a, &c) in children.iter().enumerate() {
                histories[*player].push((*infoset, a));
                let r = check_recall(game, c, histories, seen);
                histories[*player].pop();
                r?;
            }
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builder_renumbers_in_preorder() {
        let mut b = GameBuilder::new(1);
        let l1 = b.leaf(vec![1.0]);
        let l2 = b.leaf(vec![2.0]);
        let root = b.reserve();
        b.set_decision(root, 0, "r", vec![(l1, "a".into()), (l2, "b".into())]).unwrap();
        // root was id 2, so node 0 is a leaf that has a parent: not a valid root
        assert!(b.finish().is_err());

        let mut b = GameBuilder::new(1);
        let root = b.reserve();
        let l1 = b.leaf(vec![1.0]);
        let l2 = b.leaf(vec![2.0]);
        b.set_decision(root, 0, "r", vec![(l2, "a".into()), (l1, "b".into())]).unwrap();
        let g = b.finish().unwrap();
        assert_eq!(g.children(0), vec![1, 2]);
        assert_eq!(g.node(1), &Node::Terminal { utilities: vec![2.0] });
    }

    #[test]
    fn chance_sum_checked() {
        let mut b = GameBuilder::new(1);
        let root = b.reserve();
        let a = b.leaf(vec![0.0]);
        let c = b.leaf(vec![0.0]);
        b.set(root, Node::Chance { outcomes: vec![(a, 0.5), (c, 0.6)] });
        assert!(matches!(b.finish(), Err(GameError::ProbabilitySum { .. })));
    }

    #[test]
    fn forgetting_own_action_is_rejected() {
        let mut b = GameBuilder::new(1);
        let root = b.reserve();
        let n1 = b.reserve();
        let n2 = b.reserve();
        let leaves: Vec<_> = (0..4).map(|i| b.leaf(vec![i as f64])).collect();
        b.set_decision(root, 0, "r", vec![(n1, "a".into()), (n2, "b".into())]).unwrap();
        b.set_decision(n1, 0, "s", vec![(leaves[0], "x".into()), (leaves[1], "y".into())]).unwrap();
        b.set_decision(n2, 0, "s", vec![(leaves[2], "x".into()), (leaves[3], "y".into())]).unwrap();
        assert!(matches!(b.finish(), Err(GameError::PerfectRecall { .. })));
    }

    #[test]
    fn action_mismatch_is_rejected() {
        let mut b = GameBuilder::new(2);
        let root = b.reserve();
        let n1 = b.reserve();
        let n2 = b.reserve();
        let l: Vec<_> = (0..3).map(|_| b.leaf(vec![0.0, 0.0])).collect();
        b.set(root, Node::Chance { outcomes: vec![(n1, 0.5), (n2, 0.5)] });
        b.set_decision(n1, 0, "s", vec![(l[0], "x".into()), (l[1], "y".into())]).unwrap();
        let err = b.set_decision(n2, 0, "s", vec![(l[2], "x".into())]).unwrap_err();
        assert!(matches!(err, GameError::ActionMismatch { .. }));
    }
}
