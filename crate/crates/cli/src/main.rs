//! `linswap` command-line front end.

mod config;
mod source;
mod verify;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use config::{parse_classes, RunConfig};
use linswap::efg_model::{serialize_game, GameTree};
use linswap::equilibrium::{regret_curve, DeviationClass, RegretAccumulator, RegretPoint, Witness};
use linswap::learners::{self_play, PlayTrace};
use linswap::linmap::compile_self_map_system;
use linswap::sequence_form::{count_reduced_plans, derive_sequence_index, SequenceIndex};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

#[derive(Parser)]
#[command(name = "linswap", version, about = "Linear-swap regret dynamics and equilibrium audits for extensive-form games")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a game in the text format.
    Gen {
        /// kuhn:RANKS:PLAYERS, signaling, counterexample, decision-process or sat:FILE.cnf
        source: String,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Print sizes of a game and its sequence forms.
    Inspect { source: String },
    /// Print the linear-map constraint system of one player in LP format.
    DumpSystem {
        source: String,
        /// 1-based player number.
        #[arg(short, long, default_value_t = 1)]
        player: usize,
    },
    /// Run self-play from a `key = value` config or a previous manifest.
    Run {
        config: PathBuf,
        /// Output directory, overriding the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute regret certificates of a stored trace.
    Audit {
        trace: PathBuf,
        #[arg(long)]
        game: String,
        #[arg(long, default_value = "external,trigger,linear-swap")]
        classes: String,
        /// Extra iterations at which to report gaps, comma separated.
        #[arg(long)]
        at: Option<String>,
        /// Directory for witness CSV files.
        #[arg(long)]
        witness_dir: Option<PathBuf>,
    },
    /// Check the pinned signaling and counterexample results.
    VerifyExamples {
        /// Added to one player-2 payoff of the counterexample game.
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        perturb: f64,
    },
}

/// Outcome of a command that completed without I/O or usage errors.
enum Status {
    Ok,
    CheckFailed,
}

#[derive(Serialize, Deserialize)]
struct TraceFile {
    game_hash: String,
    seed: u64,
    trace: PlayTrace,
}

#[derive(Serialize, Deserialize)]
struct RunManifest {
    config: BTreeMap<String, String>,
    base_dir: PathBuf,
    game_hash: String,
    seed: u64,
    version: String,
    phases: Vec<(String, f64)>,
    outputs: BTreeMap<String, String>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match dispatch(cli.command) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::CheckFailed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cmd: Command) -> Result<Status> {
    let cwd = PathBuf::from(".");
    match cmd {
        Command::Gen { source, output } => {
            let text = serialize_game(&source::load_game(&source, &cwd)?);
            match output {
                Some(p) => std::fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?,
                None => print!("{text}"),
            }
            Ok(Status::Ok)
        }
        Command::Inspect { source } => {
            print!("{}", inspect(&source::load_game(&source, &cwd)?));
            Ok(Status::Ok)
        }
        Command::DumpSystem { source, player } => {
            let game = source::load_game(&source, &cwd)?;
            if player == 0 || player > game.num_players() {
                bail!("player must be between 1 and {}", game.num_players());
            }
            let index = derive_sequence_index(&game, player - 1);
            print!("{}", compile_self_map_system(&index).dump());
            Ok(Status::Ok)
        }
        Command::Run { config, out } => run(&config, out),
        Command::Audit {
            trace,
            game,
            classes,
            at,
            witness_dir,
        } => audit(&trace, &game, &classes, at.as_deref(), witness_dir.as_deref()),
        Command::VerifyExamples { perturb } => {
            let checks = verify::run_checks(&verify::perturbed_counterexample(perturb)?)?;
            let mut all = true;
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
                all &= c.passed;
            }
            println!("{}/{} checks passed", checks.iter().filter(|c| c.passed).count(), checks.len());
            Ok(if all { Status::Ok } else { Status::CheckFailed })
        }
    }
}

fn inspect(game: &GameTree) -> String {
    let mut s = String::new();
    writeln!(s, "players {}", game.num_players()).unwrap();
    writeln!(s, "nodes {}", game.nodes().len()).unwrap();
    writeln!(s, "terminals {}", game.num_terminals()).unwrap();
    writeln!(s, "infosets {}", game.infosets().len()).unwrap();
    for p in 0..game.num_players() {
        let idx = derive_sequence_index(game, p);
        let (lo, hi) = game.utility_range(p);
        writeln!(
            s,
            "player {}: infosets {}, sequences {}, reduced plans {}, utility range [{lo}, {hi}]",
            p + 1,
            idx.num_infosets(),
            idx.num_sequences(),
            count_reduced_plans(&idx)
        )
        .unwrap();
    }
    writeln!(s, "sha256 {}", source::game_hash(game)).unwrap();
    s
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn run(config_path: &Path, out_override: Option<PathBuf>) -> Result<Status> {
    let mut phases = Vec::new();
    let clock = Instant::now();
    let mut cfg = if config_path.extension().is_some_and(|e| e == "json") {
        let text = std::fs::read_to_string(config_path).with_context(|| format!("reading {}", config_path.display()))?;
        let m: RunManifest = serde_json::from_str(&text).with_context(|| format!("parsing {}", config_path.display()))?;
        RunConfig::from_entries(m.config, m.base_dir)?
    } else {
        RunConfig::from_file(config_path)?
    };
    if let Some(o) = out_override {
        cfg.out = o;
    }
    let game = source::load_game(&cfg.game, &cfg.base)?;
    let hash = source::game_hash(&game);
    let learners = cfg.learner_configs(game.num_players())?;
    phases.push(("load".to_string(), clock.elapsed().as_secs_f64()));

    let clock = Instant::now();
    let trace = self_play(&game, &learners, cfg.iterations, cfg.seed);
    phases.push(("play".to_string(), clock.elapsed().as_secs_f64()));

    let clock = Instant::now();
    let mut curves: Vec<Vec<RegretPoint>> = Vec::new();
    if trace.iterations > 0 {
        for p in 0..game.num_players() {
            let system = compile_self_map_system(&derive_sequence_index(&game, p));
            curves.push(regret_curve(&trace, p, &system, cfg.every, &cfg.classes)?);
        }
    }
    phases.push(("audit".to_string(), clock.elapsed().as_secs_f64()));

    let clock = Instant::now();
    std::fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    let mut csv = String::from("t,player,avg_external_regret,avg_trigger_regret,avg_linear_swap_regret,payoff\n");
    for t in 0..trace.iterations {
        for (p, curve) in curves.iter().enumerate() {
            let r = &curve[t];
            writeln!(
                csv,
                "{},{},{},{},{},{}",
                r.t,
                p + 1,
                fmt_opt(r.external),
                fmt_opt(r.trigger),
                fmt_opt(r.linear_swap),
                r.payoff
            )
            .unwrap();
        }
    }
    let csv_path = cfg.out.join("regret.csv");
    write_file(&csv_path, &csv)?;
    let trace_path = cfg.out.join("trace.json");
    let file = TraceFile {
        game_hash: hash.clone(),
        seed: cfg.seed,
        trace,
    };
    write_file(&trace_path, &serde_json::to_string(&file)?)?;
    phases.push(("write".to_string(), clock.elapsed().as_secs_f64()));

    let mut outputs = BTreeMap::new();
    for p in [&csv_path, &trace_path] {
        let name = p.file_name().unwrap_or_default().to_string_lossy().into_owned();
        outputs.insert(name, source::file_hash(p)?);
    }
    let manifest = RunManifest {
        config: cfg.entries.clone(),
        base_dir: cfg.base.clone(),
        game_hash: hash,
        seed: cfg.seed,
        version: linswap::VERSION.to_string(),
        phases,
        outputs,
    };
    write_file(&cfg.out.join("manifest.json"), &serde_json::to_string_pretty(&manifest)?)?;

    for (p, curve) in curves.iter().enumerate() {
        if let Some(last) = curve.last() {
            println!(
                "player {} ({}): T = {}, external {}, trigger {}, linear-swap {}",
                p + 1,
                file.trace.players[p].kind.map_or("?", |k| k.name()),
                last.t,
                fmt_opt(last.external),
                fmt_opt(last.trigger),
                fmt_opt(last.linear_swap)
            );
        }
    }
    if let Some(reason) = &file.trace.aborted {
        bail!("run stopped after {} iterations: {reason}", file.trace.iterations);
    }
    println!("wrote {}", cfg.out.display());
    Ok(Status::Ok)
}

fn witness_csv(index: &SequenceIndex, w: &Witness) -> String {
    let labels = index.seq_labels();
    let mut s = String::new();
    match w {
        Witness::Matrix(a) => {
            writeln!(s, "row,{}", labels.join(",")).unwrap();
            for r in 0..a.nrows() {
                let row: Vec<String> = a.row(r).iter().map(|v| v.to_string()).collect();
                writeln!(s, "{},{}", labels[r], row.join(",")).unwrap();
            }
        }
        Witness::Point(y) | Witness::Trigger { continuation: y, .. } => {
            if let Witness::Trigger { sequence, .. } = w {
                writeln!(s, "# trigger {}", labels[*sequence]).unwrap();
            }
            writeln!(s, "sequence,value").unwrap();
            for (l, v) in labels.iter().zip(y.iter()) {
                writeln!(s, "{l},{v}").unwrap();
            }
        }
        Witness::SwapTable(t) => {
            writeln!(s, "from,to").unwrap();
            for (a, b) in t.iter().enumerate() {
                writeln!(s, "{a},{b}").unwrap();
            }
        }
    }
    s
}

fn audit(trace_path: &Path, game_src: &str, classes: &str, at: Option<&str>, witness_dir: Option<&Path>) -> Result<Status> {
    let text = std::fs::read_to_string(trace_path).with_context(|| format!("reading {}", trace_path.display()))?;
    let file: TraceFile = serde_json::from_str(&text).with_context(|| format!("parsing {}", trace_path.display()))?;
    let game = source::load_game(game_src, Path::new("."))?;
    let hash = source::game_hash(&game);
    if hash != file.game_hash {
        bail!("game hash {hash} does not match the trace ({})", file.game_hash);
    }
    let classes = parse_classes(classes)?;
    if classes.contains(&DeviationClass::FullSwap) {
        bail!("full-swap audits apply to joint distributions, not traces");
    }
    let trace = &file.trace;
    if trace.players.len() != game.num_players() {
        bail!("trace has {} players, game has {}", trace.players.len(), game.num_players());
    }
    let horizon = trace.iterations;
    if horizon == 0 {
        bail!("trace has no iterations");
    }
    let mut checkpoints: Vec<usize> = match at {
        Some(list) => list
            .split(',')
            .map(|v| v.trim().parse::<usize>().with_context(|| format!("bad iteration `{v}`")))
            .collect::<Result<_>>()?,
        None => Vec::new(),
    };
    checkpoints.retain(|&t| t >= 1 && t < horizon);
    checkpoints.push(horizon);
    checkpoints.sort_unstable();
    checkpoints.dedup();

    if let Some(dir) = witness_dir {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    println!("player,t,class,gap");
    let mut chain_ok = true;
    for p in 0..game.num_players() {
        let index = derive_sequence_index(&game, p);
        let system = compile_self_map_system(&index);
        let pt = &trace.players[p];
        let mut acc = RegretAccumulator::new(index.num_sequences());
        let mut next = 0;
        for t in 0..horizon {
            acc.add(&pt.loss(t), &pt.strategy(t));
            if t + 1 != checkpoints[next] {
                continue;
            }
            next += 1;
            let mut gaps = Vec::new();
            for &c in &classes {
                let cert = match c {
                    DeviationClass::External => acc.external(&index, p),
                    DeviationClass::Trigger => acc.trigger(&index, p),
                    _ => acc.linear_swap(&system, p)?,
                };
                println!("{},{},{},{}", p + 1, t + 1, c.name(), cert.gap);
                if let (Some(dir), true) = (witness_dir, t + 1 == horizon) {
                    write_file(
                        &dir.join(format!("player{}_{}.csv", p + 1, c.name())),
                        &witness_csv(&index, &cert.witness),
                    )?;
                }
                gaps.push((c, cert.gap));
            }
            let order = |c: DeviationClass| match c {
                DeviationClass::External => 0,
                DeviationClass::Trigger => 1,
                _ => 2,
            };
            gaps.sort_by_key(|g| order(g.0));
            if gaps.windows(2).any(|w| w[0].1 > w[1].1 + 1e-6) {
                chain_ok = false;
                eprintln!("player {} at t = {}: gaps violate the inclusion chain", p + 1, t + 1);
            }
        }
    }
    Ok(if chain_ok { Status::Ok } else { Status::CheckFailed })
}
