use anyhow::{bail, Context, Result};
use linswap::efg_model::{
    build_counterexample_game, build_decision_process_game, build_kuhn_poker, build_sat_reduction,
    build_signaling_game, parse_dimacs, parse_game, serialize_game, GameTree,
};
use sha2::{Digest, Sha256};
use std::path::Path;

/// Resolves a game source: a built-in name (`kuhn:R:P`, `signaling`,
/// `counterexample`, `decision-process`, `sat:FILE.cnf`) or a game file.
/// Relative paths are taken from `base`.
pub fn load_game(spec: &str, base: &Path) -> Result<GameTree> {
    let spec = spec.trim();
    let mut parts = spec.splitn(2, ':');
    let head = parts.next().unwrap_or_default();
    let rest = parts.next();
    let game = match (head, rest) {
        ("signaling", None) => build_signaling_game(),
        ("counterexample", None) => build_counterexample_game(),
        ("decision-process", None) => build_decision_process_game(),
        ("kuhn", Some(args)) => {
            let nums: Vec<&str> = args.split(':').collect();
            if nums.len() != 2 {
                bail!("expected kuhn:RANKS:PLAYERS, got `{spec}`");
            }
            let ranks = nums[0].parse().with_context(|| format!("bad rank count in `{spec}`"))?;
            let players = nums[1].parse().with_context(|| format!("bad player count in `{spec}`"))?;
            build_kuhn_poker(ranks, players)?
        }
        ("sat", Some(file)) => {
            let path = base.join(file);
            let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
            build_sat_reduction(&parse_dimacs(&text)?)?
        }
        _ => {
            let path = base.join(spec);
            let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
            parse_game(&text).with_context(|| format!("parsing {}", path.display()))?
        }
    };
    Ok(game)
}

/// SHA-256 of the canonical text form, hex encoded.
pub fn game_hash(game: &GameTree) -> String {
    let digest = Sha256::digest(serialize_game(game).as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn file_hash(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}
