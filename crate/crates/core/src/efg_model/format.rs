//! Line-oriented text format.
//!
//! ```text
//! players 2
//! node 0 chance 1:0.5 2:0.5
//! node 1 player 1 infoset G 3:X 4:Y
//! node 3 leaf 4 10
//! ```
//!
//! Players are 1-based in the file. Blank lines and lines starting with `#`
//! are ignored.

use super::{GameBuilder, GameError, GameTree, Node, NodeId};
use std::collections::HashMap;
use std::fmt::Write;

struct Token<'a> {
    text: &'a str,
    column: usize,
}

fn tokens(line: &str) -> Vec<Token<'_>> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, ch) in line.char_indices() {
        if ch.is_whitespace() {
            if let Some(s) = start.take() {
                out.push(Token { text: &line[s..i], column: s + 1 });
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push(Token { text: &line[s..], column: s + 1 });
    }
    out
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> GameError {
    GameError::Syntax {
        line,
        column,
        message: message.into(),
    }
}

enum Body {
    Chance(Vec<(u64, f64, usize)>),
    Player(usize, String, Vec<(u64, String, usize)>),
    Leaf(Vec<f64>),
}

struct NodeLine {
    line: usize,
    id: u64,
    body: Body,
}

fn number<T: std::str::FromStr>(tok: &Token, line: usize, what: &str) -> Result<T, GameError> {
    tok.text
        .parse()
        .map_err(|_| syntax(line, tok.column, format!("expected {what}, found '{}'", tok.text)))
}

fn split_pair<'a>(tok: &Token<'a>, line: usize) -> Result<(u64, &'a str), GameError> {
    let (id, rest) = tok
        .text
        .split_once(':')
        .ok_or_else(|| syntax(line, tok.column, format!("expected 'child:value', found '{}'", tok.text)))?;
    let id = id
        .parse()
        .map_err(|_| syntax(line, tok.column, format!("bad child id in '{}'", tok.text)))?;
    if rest.is_empty() {
        return Err(syntax(line, tok.column, "empty value after ':'"));
    }
    Ok((id, rest))
}

pub fn parse_game(text: &str) -> Result<GameTree, GameError> {
    let mut players: Option<usize> = None;
    let mut lines = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let ln = ln + 1;
        let toks = tokens(raw);
        if toks.is_empty() || toks[0].text.starts_with('#') {
            continue;
        }
        match toks[0].text {
            "players" => {
                if players.is_some() {
                    return Err(syntax(ln, toks[0].column, "duplicate players header"));
                }
                if toks.len() != 2 {
                    return Err(syntax(ln, toks[0].column, "expected 'players <n>'"));
                }
                let n: usize = number(&toks[1], ln, "player count")?;
                if n == 0 {
                    return Err(syntax(ln, toks[1].column, "player count must be positive"));
                }
                players = Some(n);
            }
            "node" => {
                let n = players.ok_or_else(|| syntax(ln, 1, "node before players header"))?;
                lines.push(parse_node_line(&toks, ln, n)?);
            }
            other => return Err(syntax(ln, toks[0].column, format!("unknown directive '{other}'"))),
        }
    }
    let n = players.ok_or_else(|| syntax(1, 1, "missing players header"))?;

    let mut ids: HashMap<u64, NodeId> = HashMap::new();
    ids.insert(0, 0);
    let mut defined: HashMap<u64, usize> = HashMap::new();
    for nl in &lines {
        if let Some(prev) = defined.insert(nl.id, nl.line) {
            return Err(syntax(nl.line, 6, format!("node {} already defined on line {prev}", nl.id)));
        }
        let next = ids.len();
        ids.entry(nl.id).or_insert(next);
    }
    if !defined.contains_key(&0) {
        return Err(GameError::Structure("root node 0 is missing".into()));
    }
    let resolve = |id: u64, line: usize, col: usize| -> Result<NodeId, GameError> {
        if defined.contains_key(&id) {
            Ok(ids[&id])
        } else {
            Err(syntax(line, col, format!("child {id} is never defined")))
        }
    };

    let mut b = GameBuilder::new(n);
    for nl in &lines {
        let me = ids[&nl.id];
        match &nl.body {
            Body::Chance(outs) => {
                let outcomes = outs
                    .iter()
                    .map(|&(c, p, col)| Ok((resolve(c, nl.line, col)?, p)))
                    .collect::<Result<Vec<_>, GameError>>()?;
                b.set(me, Node::Chance { outcomes });
            }
            Body::Player(p, label, acts) => {
                let actions = acts
                    .iter()
                    .map(|(c, a, col)| Ok((resolve(*c, nl.line, *col)?, a.clone())))
                    .collect::<Result<Vec<_>, GameError>>()?;
                b.set_decision(me, *p, label, actions).map_err(|e| match e {
                    GameError::Structure(m) => syntax(nl.line, 1, m),
                    other => other,
                })?;
            }
            Body::Leaf(u) => b.set(me, Node::Terminal { utilities: u.clone() }),
        }
    }
    b.finish()
}

fn parse_node_line(toks: &[Token], ln: usize, players: usize) -> Result<NodeLine, GameError> {
    if toks.len() < 3 {
        return Err(syntax(ln, 1, "expected 'node <id> <kind> ...'"));
    }
    let id: u64 = number(&toks[1], ln, "node id")?;
    let body = match toks[2].text {
        "chance" => {
            if toks.len() < 4 {
                return Err(syntax(ln, toks[2].column, "chance node needs outcomes"));
            }
            let mut outs = Vec::new();
            for t in &toks[3..] {
                let (c, p) = split_pair(t, ln)?;
                let prob: f64 = p
                    .parse()
                    .map_err(|_| syntax(ln, t.column, format!("bad probability '{p}'")))?;
                outs.push((c, prob, t.column));
            }
            Body::Chance(outs)
        }
        "player" => {
            if toks.len() < 7 || toks[4].text != "infoset" {
                return Err(syntax(
                    ln,
                    toks[2].column,
                    "expected 'player <p> infoset <label> <child:action ...>'",
                ));
            }
            let p: usize = number(&toks[3], ln, "player number")?;
            if p == 0 || p > players {
                return Err(syntax(ln, toks[3].column, format!("player {p} outside 1..={players}")));
            }
            let mut acts = Vec::new();
            for t in &toks[6..] {
                let (c, a) = split_pair(t, ln)?;
                acts.push((c, a.to_string(), t.column));
            }
            Body::Player(p - 1, toks[5].text.to_string(), acts)
        }
        "leaf" => {
            if toks.len() != 3 + players {
                return Err(syntax(ln, toks[2].column, format!("leaf needs {players} utilities")));
            }
            let u = toks[3..]
                .iter()
                .map(|t| number::<f64>(t, ln, "utility"))
                .collect::<Result<Vec<_>, _>>()?;
            Body::Leaf(u)
        }
        other => return Err(syntax(ln, toks[2].column, format!("unknown node kind '{other}'"))),
    };
    Ok(NodeLine { line: ln, id, body })
}

/// Writes the game in preorder; parsing the output reproduces the tree.
pub fn serialize_game(game: &GameTree) -> String {
    let mut s = String::new();
    writeln!(s, "players {}", game.num_players()).unwrap();
    for (id, node) in game.nodes().iter().enumerate() {
        write!(s, "node {id}").unwrap();
        match node {
            Node::Chance { outcomes } => {
                s.push_str(" chance");
                for (c, p) in outcomes {
                    write!(s, " {c}:{p}").unwrap();
                }
            }
            Node::Decision {
                player,
                infoset,
                children,
            } => {
                let info = game.infoset(*infoset);
                write!(s, " player {} infoset {}", player + 1, info.label).unwrap();
                for (c, a) in children.iter().zip(&info.actions) {
                    write!(s, " {c}:{a}").unwrap();
                }
            }
            Node::Terminal { utilities } => {
                s.push_str(" leaf");
                for u in utilities {
                    write!(s, " {u}").unwrap();
                }
            }
        }
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trivial_single_leaf() {
        let g = parse_game("players 2\nnode 0 leaf 0 0\n").unwrap();
        assert_eq!(g.num_terminals(), 1);
        assert_eq!(g.infosets().len(), 0);
    }

    #[test]
    fn syntax_errors_carry_position() {
        let err = parse_game("players 1\nnode 0 player 1 infoset r 1:a 2\n").unwrap_err();
        assert_eq!(
            err,
            GameError::Syntax {
                line: 2,
                column: 31,
                message: "expected 'child:value', found '2'".into()
            }
        );
        let err = parse_game("players 1\nnode 0 chance 1:x\nnode 1 leaf 0\n").unwrap_err();
        assert!(matches!(err, GameError::Syntax { line: 2, column: 15, .. }));
        let err = parse_game("node 0 leaf 1\n").unwrap_err();
        assert!(matches!(err, GameError::Syntax { line: 1, .. }));
    }

    #[test]
    fn undefined_child_is_reported() {
        let err = parse_game("players 1\nnode 0 player 1 infoset r 1:a 7:b\nnode 1 leaf 0\n").unwrap_err();
        assert!(matches!(err, GameError::Syntax { line: 2, column: 31, .. }));
    }

    #[test]
    fn mismatched_actions_across_infoset() {
        let text = "players 2
node 0 chance 1:0.5 2:0.5
node 1 player 1 infoset s 3:x 4:y
node 2 player 1 infoset s 5:x
node 3 leaf 0 0
node 4 leaf 0 0
node 5 leaf 0 0
";
        assert!(matches!(parse_game(text), Err(GameError::ActionMismatch { .. })));
    }

    #[test]
    fn out_of_order_ids_round_trip() {
        let text = "players 1
# comment
node 10 leaf 3
node 0 player 1 infoset r 10:a 4:b
node 4 leaf -1.5
";
        let g = parse_game(text).unwrap();
        let again = parse_game(&serialize_game(&g)).unwrap();
        assert_eq!(g, again);
        assert_eq!(g.node(1), &Node::Terminal { utilities: vec![3.0] });
    }
}
