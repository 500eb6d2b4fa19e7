//! `qdhj`: command-line front end for the grid difference-set toolkit.
//!
//! Every run is first resolved into a [`RunConfig`], which is echoed in the
//! output next to the result; `qdhj replay --in out.json` re-executes it.
//! Exit status: 0 success, 1 nothing found or not verified, 2 bad usage or
//! malformed input.

mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qdhj::extremal::ShapeFamily;
use qdhj::search::SearchMode;
use qdhj::SetSource;
use serde_json::Value;

use config::{parse_ratio, parse_size_range, Command, RunConfig};
use run::{execute, Body};

#[derive(Parser)]
#[command(name = "qdhj", version, about = "Square and rectangle difference sets in {0,1}^(n×n)")]
struct Cli {
    /// Worker threads for parallel searches.
    #[arg(long, global = true, env = "QDHJ_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build the spiral basis and check its parity description.
    Subspace(Common),
    /// Classify the grid read from --in (or stdin).
    Classify(Common),
    /// Find a pair whose difference is γ₁ × γ₂ with |γ₂| ≤ 2.
    RectPair(Common),
    /// Pairs differing by a square γ × γ.
    SquarePairs(Common),
    /// Oriented square pairs (combinatorial lines with square wildcard).
    Lines(Common),
    /// Power-set cancellation checks over a range of |γ|.
    Identities(Common),
    /// Representation counts of pairwise sums.
    Repcounts(Common),
    /// Slice decompositions and subspace composition over [k]^(N×N).
    Mdqhj {
        #[arg(value_enum)]
        action: MdqhjAction,
        #[command(flatten)]
        common: Common,
    },
    /// Largest set with no forbidden difference.
    Extremal(Common),
    /// Re-check every certificate in --in.
    Verify(Common),
    /// Re-run the config stored in --in (a config or a previous output).
    Replay {
        #[arg(long = "in")]
        input: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum MdqhjAction {
    Decompose,
    Good,
    Compose,
    Verify,
    FromLine,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Auto,
    Exhaustive,
    Sampled,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Square,
    Rect,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Exact,
    Greedy,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

#[derive(Args, Default)]
struct Common {
    #[arg(long)]
    n: Option<usize>,
    /// Alphabet size (mdqhj).
    #[arg(long)]
    k: Option<u8>,
    /// Block size (mdqhj) or subspace dimension (repcounts).
    #[arg(long)]
    m: Option<usize>,
    /// Density of a random set, as 0.25 or 1/4.
    #[arg(long)]
    delta: Option<String>,
    #[arg(long)]
    eps: Option<String>,
    /// Comma-separated indices, e.g. 1,3.
    #[arg(long, value_delimiter = ',')]
    gamma: Option<Vec<usize>>,
    /// Inclusive size range, e.g. 3..6.
    #[arg(long = "gamma-size")]
    gamma_size: Option<String>,
    /// P coordinates (0-based, comma-separated) for mdqhj.
    #[arg(long, value_delimiter = ',')]
    p: Option<Vec<usize>>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long)]
    limit: Option<usize>,
    /// Random probes in sampled mode.
    #[arg(long)]
    budget: Option<u64>,
    /// full | spiral | even | odd | random | file:PATH
    #[arg(long)]
    set: Option<String>,
    /// Size of a random set.
    #[arg(long)]
    size: Option<u64>,
    #[arg(long, value_enum)]
    family: Option<FamilyArg>,
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    /// Warm start for greedy extremal search (same syntax as --set).
    #[arg(long)]
    warm: Option<String>,
    /// Seconds before the exact extremal search gives up.
    #[arg(long = "time-limit")]
    time_limit: Option<u64>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    #[arg(long = "in")]
    input: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn universe_count(k: u64, cells: usize) -> Option<i128> {
    let total = (k as i128).checked_pow(cells as u32)?;
    (total < 1 << 100).then_some(total)
}

fn resolve_set(c: &Common, name: &str) -> Result<SetSource, String> {
    if let Some(path) = name.strip_prefix("file:") {
        return Ok(SetSource::File { path: path.into() });
    }
    let n = c.n.ok_or("--n is required for generated sets")?;
    Ok(match name {
        "full" => SetSource::Full { n },
        "spiral" => SetSource::Spiral { n },
        "even" => SetSource::EvenWeight { n },
        "odd" => SetSource::OddWeight { n },
        "random" => {
            let size = match (c.size, &c.delta) {
                (Some(s), _) => s,
                (None, Some(d)) => {
                    let delta = parse_ratio(d)?;
                    let total = universe_count(c.k.unwrap_or(2) as u64, n * n)
                        .ok_or("universe too large for --delta; pass --size")?;
                    let scaled = delta * total;
                    scaled.ceil().to_integer().max(0) as u64
                }
                (None, None) => return Err("a random set needs --size or --delta".into()),
            };
            SetSource::Random { n, size, seed: c.seed }
        }
        other => return Err(format!("unknown set {other:?}")),
    })
}

fn build_config(command: Command, c: &Common, action: Option<&str>) -> Result<RunConfig, String> {
    let mut cfg = RunConfig::new(command);
    cfg.action = action.map(str::to_string);
    cfg.n = c.n;
    cfg.k = c.k;
    cfg.m = c.m;
    cfg.delta = c.delta.clone();
    cfg.eps = c.eps.clone();
    if let Some(e) = &c.eps {
        parse_ratio(e)?;
    }
    cfg.gamma = c.gamma.clone();
    cfg.gamma_size = c.gamma_size.as_deref().map(parse_size_range).transpose()?;
    cfg.p = c.p.clone();
    cfg.seed = c.seed;
    cfg.mode = c.mode.map(|m| match m {
        ModeArg::Auto => SearchMode::Auto,
        ModeArg::Exhaustive => SearchMode::Exhaustive,
        ModeArg::Sampled => SearchMode::Sampled,
    });
    cfg.limit = c.limit;
    cfg.budget = c.budget;
    let wants_set = matches!(
        command,
        Command::RectPair | Command::SquarePairs | Command::Lines | Command::Mdqhj
    );
    let name = match &c.set {
        Some(s) => Some(s.as_str()),
        None if wants_set && action != Some("from-line") => {
            Some(if c.size.is_some() || c.delta.is_some() { "random" } else { "spiral" })
        }
        None => None,
    };
    cfg.set = name.map(|s| resolve_set(c, s)).transpose()?;
    cfg.family = c.family.map(|f| match f {
        FamilyArg::Square => ShapeFamily::SquareShapes,
        FamilyArg::Rect => ShapeFamily::RectShapes,
    });
    if command == Command::Extremal {
        cfg.action = c.method.map(|m| match m {
            MethodArg::Exact => "exact".to_string(),
            MethodArg::Greedy => "greedy".to_string(),
        });
    }
    cfg.warm = c.warm.as_deref().map(|s| resolve_set(c, s)).transpose()?;
    cfg.time_limit = c.time_limit;
    cfg.format = c.format.map(|f| match f {
        FormatArg::Json => "json".to_string(),
        FormatArg::Csv => "csv".to_string(),
    });
    cfg.input = c.input.clone();
    cfg.output = c.out.clone();
    Ok(cfg)
}

fn load_replay(path: &PathBuf) -> Result<RunConfig, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let v: Value = serde_json::from_str(&text)
        .map_err(|e| format!("{}:{}:{}: {e}", path.display(), e.line(), e.column()))?;
    let v = match v.get("config") {
        Some(c) => c.clone(),
        None => v,
    };
    serde_json::from_value(v).map_err(|e| format!("{}: not a run config: {e}", path.display()))
}

fn fail(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if t == 0 {
            return fail("--threads must be at least 1");
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            return fail(e);
        }
    }
    let resolved = match &cli.command {
        Cmd::Subspace(c) => build_config(Command::Subspace, c, None),
        Cmd::Classify(c) => build_config(Command::Classify, c, None),
        Cmd::RectPair(c) => build_config(Command::RectPair, c, None),
        Cmd::SquarePairs(c) => build_config(Command::SquarePairs, c, None),
        Cmd::Lines(c) => build_config(Command::Lines, c, None),
        Cmd::Identities(c) => build_config(Command::Identities, c, None),
        Cmd::Repcounts(c) => build_config(Command::Repcounts, c, None),
        Cmd::Mdqhj { action, common } => {
            let a = action.to_possible_value().expect("named action");
            build_config(Command::Mdqhj, common, Some(a.get_name()))
        }
        Cmd::Extremal(c) => build_config(Command::Extremal, c, None),
        Cmd::Verify(c) => build_config(Command::Verify, c, None),
        Cmd::Replay { input } => load_replay(input),
    };
    let cfg = match resolved {
        Ok(cfg) => cfg,
        Err(e) => return fail(e),
    };
    let outcome = match execute(&cfg) {
        Ok(o) => o,
        Err(e) => return fail(e),
    };
    let text = match outcome.body {
        Body::Text(t) => t,
        Body::Json(result) => {
            let doc = serde_json::json!({ "config": cfg, "result": result });
            let mut t = serde_json::to_string_pretty(&doc).expect("json output");
            t.push('\n');
            t
        }
    };
    match &cfg.output {
        Some(path) => {
            if let Err(e) = std::fs::write(path, &text) {
                return fail(format!("cannot write {}: {e}", path.display()));
            }
        }
        None => print!("{text}"),
    }
    if outcome.ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
