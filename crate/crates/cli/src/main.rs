use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use red10_cli::config::Config;
use red10_cli::service::{self, AppState};
use red10_core::agents::{AgentKind, Models};
use red10_core::engine::Replay;
use red10_core::evaluation::{evaluate, export_curves, run_ablation, Ablation, MatchOptions};
use red10_core::features::{identify_layout, q_layout};
use red10_core::identify::Identifier;
use red10_core::policy::PolicyBank;
use red10_core::training::{run_phase, Phase};

#[derive(Parser)]
#[command(name = "red10", version, about = "Train, evaluate and play identity-aware Red-10 agents")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Master seed; overrides `seed` in the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output path: checkpoint directory for training, report or curve file otherwise.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Budget {
    /// Decks to play in this phase.
    #[arg(long)]
    decks: Option<u64>,
    /// Wall-clock cap in seconds.
    #[arg(long)]
    max_seconds: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Phase 1: train the eight policy heads into `--out`.
    TrainPolicy(Budget),
    /// Phase 2: train the relation and danger networks against the bank in `--out`.
    TrainIdentify(Budget),
    /// Phase 3: fine-tune identification on the intrinsic reward, in place in `--out`.
    Finetune(Budget),
    /// Paired-deck tournament between two agent kinds.
    Eval {
        /// Agent X: idrl, random, rule, mc, mc:<bits> or nu:<value>.
        #[arg(long)]
        a: String,
        /// Agent Y.
        #[arg(long)]
        b: String,
        #[arg(long)]
        decks: Option<u64>,
        /// Checkpoint directory (needed by learned agents).
        #[arg(long)]
        models: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Full agent against its ablations: no identification and constant risk.
    Ablate {
        #[arg(long)]
        decks: Option<u64>,
        #[arg(long)]
        models: Option<PathBuf>,
        /// Constant risk values to test.
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.2f32, 0.4, 0.6, 0.8])]
        nu: Vec<f32>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Per-turn identification curves of self-play decks as CSV.
    ExportCurves {
        #[arg(long, default_value_t = 10)]
        decks: u64,
        #[arg(long)]
        models: Option<PathBuf>,
    },
    /// Feature zone offsets and widths as JSON.
    Layout,
    /// Runs the HTTP game service.
    Serve {
        #[arg(long)]
        models: Option<PathBuf>,
        #[arg(long)]
        bind: Option<String>,
        #[arg(long)]
        port: Option<u16>,
        /// Expose the identification insight endpoint.
        #[arg(long)]
        insight: bool,
    },
    /// Re-deals a replay file and re-checks every move.
    Replay { file: PathBuf },
}

fn load_config(common: &Common) -> Result<Config> {
    let mut config = match &common.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    Ok(config)
}

fn require_out(common: &Common) -> Result<&Path> {
    match &common.out {
        Some(p) => Ok(p),
        None => bail!("--out is required for this command"),
    }
}

fn load_models(config: &Config, flag: &Option<PathBuf>) -> Result<Option<Models>> {
    let Some(dir) = flag.as_ref().or(config.paths.models.as_ref()) else {
        return Ok(None);
    };
    let bank = PolicyBank::load(dir).with_context(|| format!("loading policy bank from {}", dir.display()))?;
    let identifier = Identifier::load(dir).with_context(|| format!("loading identifier from {}", dir.display()))?;
    Ok(Some(Models { bank, identifier }))
}

/// Writes to `--out` when given, otherwise to stdout.
fn emit(common: &Common, text: &str) -> Result<()> {
    match &common.out {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent)?;
            }
            fs::write(path, text).with_context(|| format!("writing {}", path.display()))
        }
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn train(common: &Common, phase: Phase, budget: &Budget) -> Result<()> {
    let config = load_config(common)?;
    let out = require_out(common)?;
    let mut run = config.train_run(phase, out);
    if let Some(d) = budget.decks {
        run.decks = d;
    }
    if let Some(s) = budget.max_seconds {
        if !(s > 0.0) {
            bail!("--max-seconds must be positive");
        }
        run.max_seconds = Some(s);
    }
    let report = run_phase(&run)?;
    let last = report.log.last().map(|r| r.loss);
    println!(
        "{}",
        serde_json::json!({
            "phase": phase,
            "decks": report.decks,
            "moves": report.moves,
            "updates": report.updates,
            "seconds": report.seconds,
            "last_loss": last,
            "out": out,
        })
    );
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let common = &cli.common;
    match &cli.command {
        Command::TrainPolicy(b) => train(common, Phase::Policy, b),
        Command::TrainIdentify(b) => train(common, Phase::Identify, b),
        Command::Finetune(b) => train(common, Phase::Finetune, b),
        Command::Eval { a, b, decks, models, threads } => {
            let config = load_config(common)?;
            let x: AgentKind = a.parse()?;
            let y: AgentKind = b.parse()?;
            let models = load_models(&config, models)?;
            let opts = MatchOptions { threads: threads.unwrap_or(config.eval.threads), ..MatchOptions::default() };
            let report = evaluate(x, y, models.as_ref(), decks.unwrap_or(config.eval.decks), config.seed, &opts)?;
            emit(common, &format!("{}\n", serde_json::to_string_pretty(&report)?))
        }
        Command::Ablate { decks, models, nu, threads } => {
            let config = load_config(common)?;
            let Some(models) = load_models(&config, models)? else {
                bail!("ablate needs --models or paths.models");
            };
            let decks = decks.unwrap_or(config.eval.decks);
            let opts = MatchOptions { threads: threads.unwrap_or(config.eval.threads), ..MatchOptions::default() };
            let mut reports = vec![run_ablation(&models, Ablation::NoIdentification, decks, config.seed, &opts)?];
            for &v in nu {
                if !(0.0..=1.0).contains(&v) {
                    bail!("--nu values must lie in [0, 1], got {v}");
                }
                reports.push(run_ablation(&models, Ablation::DangerConstant(v), decks, config.seed, &opts)?);
            }
            emit(common, &format!("{}\n", serde_json::to_string_pretty(&reports)?))
        }
        Command::ExportCurves { decks, models } => {
            let config = load_config(common)?;
            let Some(models) = load_models(&config, models)? else {
                bail!("export-curves needs --models or paths.models");
            };
            let mut buf = Vec::new();
            export_curves(&models, *decks, config.seed, &mut buf)?;
            emit(common, &String::from_utf8(buf)?)
        }
        Command::Layout => {
            let layout = serde_json::json!({ "q": q_layout(), "identify": identify_layout() });
            emit(common, &format!("{}\n", serde_json::to_string_pretty(&layout)?))
        }
        Command::Serve { models, bind, port, insight } => {
            let config = load_config(common)?;
            let models = load_models(&config, models)?;
            let bind = bind.clone().unwrap_or(config.service.bind.clone());
            let port = port.unwrap_or(config.service.port);
            let state = AppState::new(models, *insight || config.service.expose_insight);
            let rt = tokio::runtime::Runtime::new()?;
            eprintln!("serving on http://{bind}:{port}/v1");
            rt.block_on(service::serve(state, &bind, port))?;
            Ok(())
        }
        Command::Replay { file } => {
            let text = fs::read_to_string(file).with_context(|| format!("reading {}", file.display()))?;
            let replay = Replay::parse(&text)?;
            let end = replay.verify()?;
            let winner = end.winner.map(|w| format!("seat {w} ({:?})", end.pattern.team_of(w)));
            println!(
                "seed {}: {} moves verified, pattern {}, winner {}",
                replay.seed,
                replay.moves.len(),
                end.pattern.id,
                winner.unwrap_or_else(|| "none (unfinished)".into())
            );
            Ok(())
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
