//! Built-in games: Kuhn poker, the two-player signaling game, the
//! counterexample separating linear deviations from swap deviations, the
//! SAT-reduction family and a small single-player decision process.

use super::{GameBuilder, GameError, GameTree, Node, NodeId};

/// Kuhn poker with `ranks` distinct cards and 2 or 3 players.
///
/// Chance deals one card to each player (all ordered deals equally likely).
/// Every player antes 1. Players act in turn and may check (`p`) or bet 1
/// (`b`); once someone bets, each other player in turn order calls (`c`) or
/// folds (`f`). The highest card among the players who did not fold wins
/// the pot.
pub fn build_kuhn_poker(ranks: usize, players: usize) -> Result<GameTree, GameError> {
    if !(2..=3).contains(&players) {
        return Err(GameError::InvalidParameter(format!(
            "Kuhn poker supports 2 or 3 players, got {players}"
        )));
    }
    if ranks < players {
        return Err(GameError::InvalidParameter(format!(
            "cannot deal {players} distinct cards from {ranks} ranks"
        )));
    }
    let mut deals = Vec::new();
    let mut current = Vec::new();
    enumerate_deals(ranks, players, &mut current, &mut deals);
    let prob = 1.0 / deals.len() as f64;

    let mut b = GameBuilder::new(players);
    let root = b.reserve();
    let mut outcomes = Vec::with_capacity(deals.len());
    for deal in &deals {
        let child = kuhn_subtree(&mut b, deal, &mut String::new())?;
        outcomes.push((child, prob));
    }
    b.set(root, Node::Chance { outcomes });
    b.finish()
}

fn enumerate_deals(ranks: usize, players: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if current.len() == players {
        out.push(current.clone());
        return;
    }
    for r in 0..ranks {
        if !current.contains(&r) {
            current.push(r);
            enumerate_deals(ranks, players, current, out);
            current.pop();
        }
    }
}

fn kuhn_subtree(b: &mut GameBuilder, deal: &[usize], hist: &mut String) -> Result<NodeId, GameError> {
    let n = deal.len();
    let acted = hist.len();
    let actor = match hist.find('b') {
        None if acted == n => return Ok(b.leaf(kuhn_payoff(deal, hist))),
        None => acted,
        Some(bettor) => {
            let responses = acted - bettor - 1;
            if responses == n - 1 {
                return Ok(b.leaf(kuhn_payoff(deal, hist)));
            }
            (bettor + 1 + responses) % n
        }
    };
    let actions: &[&str] = if hist.contains('b') { &["c", "f"] } else { &["p", "b"] };
    let label = format!("{}:{}", deal[actor], hist);
    let mut children = Vec::new();
    for a in actions {
        hist.push_str(a);
        let c = kuhn_subtree(b, deal, hist)?;
        hist.pop();
        children.push((c, a.to_string()));
    }
    b.decision(actor, &label, children)
}

fn kuhn_payoff(deal: &[usize], hist: &str) -> Vec<f64> {
    let n = deal.len();
    let mut contrib = vec![1.0; n];
    let mut folded = vec![false; n];
    if let Some(bettor) = hist.find('b') {
        contrib[bettor] += 1.0;
        for (k, ch) in hist[bettor + 1..].chars().enumerate() {
            let p = (bettor + 1 + k) % n;
            match ch {
                'c' => contrib[p] += 1.0,
                _ => folded[p] = true,
            }
        }
    }
    let pot: f64 = contrib.iter().sum();
    let winner = (0..n)
        .filter(|&p| !folded[p])
        .max_by_key(|&p| deal[p])
        .expect("the bettor never folds");
    (0..n)
        .map(|p| if p == winner { pot - contrib[p] } else { -contrib[p] })
        .collect()
}

/// Two-player signaling game: chance picks a good (`G`) or bad (`B`) type,
/// the sender suggests `X` or `Y`, and the receiver, observing only the
/// suggestion, picks left or right.
pub fn build_signaling_game() -> GameTree {
    let mut b = GameBuilder::new(2);
    let root = b.reserve();
    let receiver = |b: &mut GameBuilder, info: &str, left: (f64, f64), right: (f64, f64)| {
        let l = b.leaf(vec![left.0, left.1]);
        let r = b.leaf(vec![right.0, right.1]);
        b.decision(1, info, vec![(l, format!("l_{info}")), (r, format!("r_{info}"))])
            .unwrap()
    };
    let xg = receiver(&mut b, "X", (4.0, 10.0), (0.0, 6.0));
    let yg = receiver(&mut b, "Y", (4.0, 10.0), (0.0, 6.0));
    let g = b.decision(0, "G", vec![(xg, "X_G".into()), (yg, "Y_G".into())]).unwrap();
    let xb = receiver(&mut b, "X", (6.0, 0.0), (0.0, 6.0));
    let yb = receiver(&mut b, "Y", (6.0, 0.0), (0.0, 6.0));
    let bad = b.decision(0, "B", vec![(xb, "X_B".into()), (yb, "Y_B".into())]).unwrap();
    b.set(root, Node::Chance { outcomes: vec![(g, 0.5), (bad, 0.5)] });
    b.finish().expect("static game is valid")
}

/// Two-player game admitting a linear-deviation correlated equilibrium that
/// is not a correlated equilibrium.
///
/// Chance picks one of four branches uniformly. Player 1 decides at
/// infoset `a` (actions `A1`, `A2`) or `b` (actions `B1`, `B2`); depending on
/// the branch, the action leads to player 2's infoset `Q` or `W`, both with
/// actions left/right.
pub fn build_counterexample_game() -> GameTree {
    let mut b = GameBuilder::new(2);
    let root = b.reserve();
    let p2 = |b: &mut GameBuilder, info: &str, left: (f64, f64), right: (f64, f64)| {
        let l = b.leaf(vec![left.0, left.1]);
        let r = b.leaf(vec![right.0, right.1]);
        b.decision(1, info, vec![(l, format!("{info}l")), (r, format!("{info}r"))])
            .unwrap()
    };
    let q1 = p2(&mut b, "Q", (0.0, 0.0), (-3.0, 0.0));
    let w1 = p2(&mut b, "W", (0.0, 2.0), (0.0, 0.0));
    let a1 = b.decision(0, "a", vec![(q1, "A1".into()), (w1, "A2".into())]).unwrap();
    let w2 = p2(&mut b, "W", (0.0, 0.0), (2.0, 4.0));
    let q2 = p2(&mut b, "Q", (-2.0, 0.0), (0.0, 0.0));
    let a2 = b.decision(0, "a", vec![(w2, "A1".into()), (q2, "A2".into())]).unwrap();
    let q3 = p2(&mut b, "Q", (0.0, 0.0), (-310.0, -315.0));
    let w3 = p2(&mut b, "W", (0.0, 0.0), (0.0, 0.0));
    let b1 = b.decision(0, "b", vec![(q3, "B1".into()), (w3, "B2".into())]).unwrap();
    let w4 = p2(&mut b, "W", (202.0, 0.0), (200.0, -3.0));
    let q4 = p2(&mut b, "Q", (0.0, 0.0), (0.0, 0.0));
    let b2 = b.decision(0, "b", vec![(w4, "B1".into()), (q4, "B2".into())]).unwrap();
    b.set(
        root,
        Node::Chance {
            outcomes: vec![(a1, 0.25), (a2, 0.25), (b1, 0.25), (b2, 0.25)],
        },
    );
    b.finish().expect("static game is valid")
}

/// A decision process for player 1 with four infosets: `A` (actions 1, 2)
/// at the root; after 1 an opponent move leads to `B` (3, 4) or `C` (5, 6);
/// after 2 an opponent move leads to one of two nodes of `D` (7, 8, 9).
/// All payoffs are zero.
pub fn build_decision_process_game() -> GameTree {
    let mut b = GameBuilder::new(2);
    let root = b.reserve();
    let p1 = |b: &mut GameBuilder, info: &str, acts: &[&str]| {
        let kids = acts.iter().map(|a| (b.leaf(vec![0.0, 0.0]), a.to_string())).collect();
        b.decision(0, info, kids).unwrap()
    };
    let nb = p1(&mut b, "B", &["3", "4"]);
    let nc = p1(&mut b, "C", &["5", "6"]);
    let d1 = p1(&mut b, "D", &["7", "8", "9"]);
    let d2 = p1(&mut b, "D", &["7", "8", "9"]);
    let x = b.decision(1, "P", vec![(nb, "p1".into()), (nc, "p2".into())]).unwrap();
    let y = b.decision(1, "Q", vec![(d1, "q1".into()), (d2, "q2".into())]).unwrap();
    b.set_decision(root, 0, "A", vec![(x, "1".into()), (y, "2".into())]).unwrap();
    b.finish().expect("static game is valid")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Literal {
    /// 1-based variable index.
    pub var: usize,
    pub negated: bool,
}

impl Literal {
    pub fn pos(var: usize) -> Self {
        Literal { var, negated: false }
    }

    pub fn neg(var: usize) -> Self {
        Literal { var, negated: true }
    }

    pub fn satisfied_by(&self, value: bool) -> bool {
        value != self.negated
    }

    fn label(&self) -> String {
        if self.negated {
            format!("-x{}", self.var)
        } else {
            format!("x{}", self.var)
        }
    }
}

/// Parses a DIMACS CNF document into clauses.
pub fn parse_dimacs(text: &str) -> Result<Vec<Vec<Literal>>, GameError> {
    let mut clauses = Vec::new();
    let mut current = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('c') || t.starts_with('p') || t.starts_with('%') {
            continue;
        }
        for (col, tok) in t.split_whitespace().enumerate() {
            let v: i64 = tok.parse().map_err(|_| GameError::Syntax {
                line: ln + 1,
                column: col + 1,
                message: format!("bad literal '{tok}'"),
            })?;
            if v == 0 {
                clauses.push(std::mem::take(&mut current));
            } else {
                current.push(Literal {
                    var: v.unsigned_abs() as usize,
                    negated: v < 0,
                });
            }
        }
    }
    if !current.is_empty() {
        clauses.push(current);
    }
    Ok(clauses)
}

/// Game whose maximum-welfare linear-deviation equilibrium reveals whether
/// the formula is satisfiable.
///
/// Chance picks a clause uniformly; player 2 picks one of its literals
/// (one singleton infoset per clause); player 1 assigns the literal's
/// variable without seeing which clause was drawn (one infoset per
/// variable). Both players get 1 if the literal is satisfied, else 0.
pub fn build_sat_reduction(clauses: &[Vec<Literal>]) -> Result<GameTree, GameError> {
    if clauses.is_empty() {
        return Err(GameError::InvalidParameter("formula has no clauses".into()));
    }
    let prob = 1.0 / clauses.len() as f64;
    let mut b = GameBuilder::new(2);
    let root = b.reserve();
    let mut outcomes = Vec::new();
    for (ci, clause) in clauses.iter().enumerate() {
        if clause.is_empty() {
            return Err(GameError::InvalidParameter(format!("clause {} is empty", ci + 1)));
        }
        let mut lits: Vec<Literal> = Vec::new();
        for l in clause {
            if l.var == 0 {
                return Err(GameError::InvalidParameter("variables are 1-based".into()));
            }
            if !lits.contains(l) {
                lits.push(*l);
            }
        }
        let mut picks = Vec::new();
        for lit in &lits {
            let t = b.leaf(if lit.satisfied_by(true) { vec![1.0, 1.0] } else { vec![0.0, 0.0] });
            let f = b.leaf(if lit.satisfied_by(false) { vec![1.0, 1.0] } else { vec![0.0, 0.0] });
            let assign = b.decision(0, &format!("x{}", lit.var), vec![(t, "T".into()), (f, "F".into())])?;
            picks.push((assign, lit.label()));
        }
        let pick = b.decision(1, &format!("c{}", ci + 1), picks)?;
        outcomes.push((pick, prob));
    }
    b.set(root, Node::Chance { outcomes });
    b.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn count_infosets_by_walk(g: &GameTree) -> usize {
        let mut labels = std::collections::HashSet::new();
        for n in g.nodes() {
            if let Node::Decision { player, infoset, .. } = n {
                labels.insert((*player, g.infoset(*infoset).label.clone()));
            }
        }
        labels.len()
    }

    #[test]
    fn kuhn_3_2_matches_classic_counts() {
        let g = build_kuhn_poker(3, 2).unwrap();
        assert_eq!(g.num_infosets(0), 6);
        assert_eq!(g.num_infosets(1), 6);
        assert_eq!(count_infosets_by_walk(&g), 12);
        // 6 deals times 5 terminal histories (pp, pbc, pbf, bc, bf)
        assert_eq!(g.num_terminals(), 30);
    }

    #[test]
    fn kuhn_rejects_too_few_ranks() {
        assert!(build_kuhn_poker(2, 3).is_err());
        assert!(build_kuhn_poker(5, 4).is_err());
    }

    #[test]
    fn kuhn_payoffs_are_zero_sum() {
        let g = build_kuhn_poker(4, 3).unwrap();
        for n in g.nodes() {
            if let Node::Terminal { utilities } = n {
                assert!(utilities.iter().sum::<f64>().abs() < 1e-12);
            }
        }
    }

    #[test]
    fn kuhn_showdown_and_fold() {
        assert_eq!(kuhn_payoff(&[2, 0], "pp"), vec![1.0, -1.0]);
        assert_eq!(kuhn_payoff(&[0, 2], "pbf"), vec![-1.0, 1.0]);
        assert_eq!(kuhn_payoff(&[0, 2], "pbc"), vec![-2.0, 2.0]);
        assert_eq!(kuhn_payoff(&[0, 1, 2], "pbcf"), vec![-1.0, -2.0, 3.0]);
        assert_eq!(kuhn_payoff(&[0, 1, 2], "bff"), vec![2.0, -1.0, -1.0]);
    }

    #[test]
    fn dimacs_parses_clauses() {
        let cnf = parse_dimacs("c demo\np cnf 2 2\n1 2 0\n-1 0\n").unwrap();
        assert_eq!(cnf, vec![vec![Literal::pos(1), Literal::pos(2)], vec![Literal::neg(1)]]);
    }

    #[test]
    fn sat_rejects_empty_clause() {
        assert!(build_sat_reduction(&[vec![]]).is_err());
        assert!(build_sat_reduction(&[]).is_err());
    }

    #[test]
    fn sat_game_shape() {
        let g = build_sat_reduction(&[vec![Literal::pos(1), Literal::pos(2)], vec![Literal::neg(1)]]).unwrap();
        assert_eq!(g.num_infosets(0), 2);
        assert_eq!(g.num_infosets(1), 2);
    }
}
