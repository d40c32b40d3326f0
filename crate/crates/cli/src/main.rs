use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use cibnet::prune::Strategy;
use cibnet::traces::TraceKind;
use cibnet_cli::commands::{self, Outcome};
use cibnet_cli::config::{RunConfig, WindowSpec};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "cibnet", version, about = "Detect coordinated account networks in short-video data")]
struct Cli {
    /// JSON run configuration; paths inside resolve against its directory.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Analysis window: `all`, `YYYY-MM`, or `START..END` in epoch seconds.
    #[arg(long = "window", global = true)]
    windows: Vec<String>,
    /// Restrict to these traces (repeatable).
    #[arg(long = "trace", global = true, value_parser = parse_trace)]
    traces: Vec<TraceKind>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Pruning strategy for every selected trace: `node` or `edge+node`.
    #[arg(long, global = true, value_parser = parse_strategy)]
    strategy: Option<Strategy>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse the inputs and list rejected or flagged lines.
    IngestCheck,
    /// Build, prune and report every trace network per window.
    Detect,
    /// Gap densities and cross-trace NMI over a finished detect run.
    Report,
    /// Generate a synthetic corpus with planted campaigns.
    Synth {
        #[arg(long)]
        preset: Option<String>,
    },
    /// Score a detect run against ground truth.
    Eval,
    /// Cluster retention under random post loss.
    Robustness {
        /// Fraction of posts removed (repeatable).
        #[arg(long = "fraction")]
        fractions: Vec<f64>,
        /// Generate the corpus from a preset instead of reading inputs.
        #[arg(long)]
        preset: Option<String>,
    },
    /// Cluster speakers from a directory of WAV clips.
    AudioCluster,
}

fn parse_trace(s: &str) -> Result<TraceKind, String> {
    s.parse::<TraceKind>().map_err(|e| e.to_string())
}

fn parse_strategy(s: &str) -> Result<Strategy, String> {
    s.parse::<Strategy>().map_err(|e| e.to_string())
}

fn build_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if !cli.windows.is_empty() {
        cfg.windows = cli.windows.iter().map(|w| WindowSpec::Label(w.clone())).collect();
    }
    if !cli.traces.is_empty() {
        cfg.traces = cli.traces.clone();
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.out = Some(std::env::current_dir()?.join(o));
    }
    if let Some(s) = cli.strategy {
        for t in cfg.trace_list() {
            let mut p = cfg.detect.prune_for(t);
            p.strategy = s;
            cfg.detect.prune.insert(t, p);
        }
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<Outcome> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(cibnet::Error::Config("--threads must be positive".into()).into());
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let cfg = build_config(cli)?;
    match &cli.command {
        Command::IngestCheck => commands::ingest_check(&cfg),
        Command::Detect => commands::detect(&cfg),
        Command::Report => commands::report(&cfg),
        Command::Synth { preset } => commands::synth(&cfg, preset.as_deref()),
        Command::Eval => commands::eval(&cfg),
        Command::Robustness { fractions, preset } => commands::robustness_cmd(&cfg, fractions, preset.as_deref()),
        Command::AudioCluster => commands::audio_cluster(&cfg),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("CIBNET_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(Outcome::Success | Outcome::NoData) => ExitCode::SUCCESS,
        Ok(Outcome::Partial(code)) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e) as u8)
        }
    }
}
