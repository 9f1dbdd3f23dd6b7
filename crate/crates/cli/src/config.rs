use anyhow::{anyhow, bail, Context, Result};
use linswap::equilibrium::DeviationClass;
use linswap::learners::{LearnerConfig, LearnerKind, Schedule, Start};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

const KEYS: &[&str] = &[
    "game",
    "iterations",
    "seed",
    "learner",
    "eta",
    "start",
    "every",
    "thin",
    "sample_plans",
    "classes",
    "out",
];

/// Parsed `key = value` run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    /// Entries exactly as written, for the manifest.
    pub entries: BTreeMap<String, String>,
    pub base: PathBuf,
    pub game: String,
    pub iterations: usize,
    pub seed: u64,
    pub learners: BTreeMap<usize, LearnerKind>,
    pub default_learner: LearnerKind,
    pub schedule: Schedule,
    pub start: Start,
    pub every: usize,
    pub thin: usize,
    pub sample_plans: bool,
    pub classes: Vec<DeviationClass>,
    pub out: PathBuf,
}

pub fn parse_entries(text: &str) -> Result<BTreeMap<String, String>> {
    let mut entries = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or_default().trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("line {}: expected `key = value`", n + 1))?;
        let (k, v) = (k.trim().to_string(), v.trim().to_string());
        let known = KEYS.contains(&k.as_str()) || k.strip_prefix("learner.").is_some_and(|p| p.parse::<usize>().is_ok());
        if !known {
            bail!("line {}: unknown key `{k}`", n + 1);
        }
        if entries.insert(k.clone(), v).is_some() {
            bail!("line {}: duplicate key `{k}`", n + 1);
        }
    }
    Ok(entries)
}

fn kind(v: &str) -> Result<LearnerKind> {
    LearnerKind::parse(v).ok_or_else(|| anyhow!("unknown learner `{v}` (linear-swap, trigger, external)"))
}

fn number<T: std::str::FromStr>(entries: &BTreeMap<String, String>, key: &str, default: T) -> Result<T> {
    match entries.get(key) {
        None => Ok(default),
        Some(v) => v.parse().map_err(|_| anyhow!("`{key}` must be a number, got `{v}`")),
    }
}

pub fn parse_classes(v: &str) -> Result<Vec<DeviationClass>> {
    v.split(',')
        .map(|c| DeviationClass::parse(c.trim()).ok_or_else(|| anyhow!("unknown deviation class `{}`", c.trim())))
        .collect()
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let full = std::fs::canonicalize(path).with_context(|| format!("resolving {}", path.display()))?;
        let base = full.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_entries(parse_entries(&text)?, base)
    }

    pub fn from_entries(entries: BTreeMap<String, String>, base: PathBuf) -> Result<Self> {
        let game = entries.get("game").cloned().ok_or_else(|| anyhow!("missing `game`"))?;
        let default_learner = kind(entries.get("learner").map_or("linear-swap", String::as_str))?;
        let mut learners = BTreeMap::new();
        for (k, v) in &entries {
            if let Some(p) = k.strip_prefix("learner.") {
                let p: usize = p.parse()?;
                if p == 0 {
                    bail!("players are numbered from 1");
                }
                learners.insert(p, kind(v)?);
            }
        }
        let schedule = match entries.get("eta").map(String::as_str) {
            None | Some("inv-sqrt") => Schedule::InvSqrt,
            Some(v) => {
                let eta: f64 = v.parse().map_err(|_| anyhow!("`eta` must be a number or `inv-sqrt`, got `{v}`"))?;
                if !(eta > 0.0 && eta.is_finite()) {
                    bail!("`eta` must be positive");
                }
                Schedule::Constant(eta)
            }
        };
        let start = match entries.get("start") {
            None => Start::Identity,
            Some(v) => Start::parse(v).ok_or_else(|| anyhow!("`start` must be identity or first-plan, got `{v}`"))?,
        };
        let sample_plans = match entries.get("sample_plans").map(String::as_str) {
            None | Some("false") => false,
            Some("true") => true,
            Some(v) => bail!("`sample_plans` must be true or false, got `{v}`"),
        };
        let classes = parse_classes(entries.get("classes").map_or("external,trigger,linear-swap", String::as_str))?;
        let out = base.join(entries.get("out").map_or("out", String::as_str));
        Ok(RunConfig {
            iterations: number(&entries, "iterations", 1000)?,
            seed: number(&entries, "seed", 0)?,
            every: number(&entries, "every", 10)?,
            thin: number(&entries, "thin", 0)?,
            game,
            learners,
            default_learner,
            schedule,
            start,
            sample_plans,
            classes,
            out,
            base,
            entries,
        })
    }

    pub fn learner_configs(&self, players: usize) -> Result<Vec<LearnerConfig>> {
        if let Some(&p) = self.learners.keys().find(|&&p| p > players) {
            bail!("`learner.{p}` given for a {players}-player game");
        }
        Ok((1..=players)
            .map(|p| {
                let mut c = LearnerConfig::new(*self.learners.get(&p).unwrap_or(&self.default_learner), self.schedule);
                c.start = self.start;
                c.thin = self.thin;
                c.sample_plans = self.sample_plans;
                c
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_keys_and_overrides() {
        let text = "game = kuhn:3:2  # small\niterations = 50\neta = 0.1\nlearner.2 = trigger\nstart = first-plan\n";
        let c = RunConfig::from_entries(parse_entries(text).unwrap(), PathBuf::from("/tmp")).unwrap();
        assert_eq!(c.iterations, 50);
        assert_eq!(c.schedule, Schedule::Constant(0.1));
        let l = c.learner_configs(2).unwrap();
        assert_eq!(l[0].kind, LearnerKind::LinearSwap);
        assert_eq!(l[1].kind, LearnerKind::Trigger);
        assert_eq!(l[0].start, Start::FirstPlan);
        assert!(c.learner_configs(1).is_err());
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(parse_entries("game kuhn").is_err());
        assert!(parse_entries("colour = red").is_err());
        assert!(parse_entries("seed = 1\nseed = 2").is_err());
        let e = parse_entries("game = signaling\niterations = many").unwrap();
        assert!(RunConfig::from_entries(e, PathBuf::new()).is_err());
        let e = parse_entries("game = signaling\nstart = random").unwrap();
        assert!(RunConfig::from_entries(e, PathBuf::new()).is_err());
    }
}
