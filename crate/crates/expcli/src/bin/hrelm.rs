use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hrelm_exp::config::{EnvKind, ExperimentConfig, Method};
use hrelm_exp::experiment::{run_experiment_with, summarize_dir};
use hrelm_exp::sweep::{
    emit_sweep, parse_grid_log, parse_mode, parse_orders, parse_strategy, ProblemSource,
};
use hrelm_exp::{ExpError, Result};

#[derive(Parser)]
#[command(
    name = "hrelm",
    version,
    about = "Regularized ELM Q-learning experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train agents on cart-pole over several seeded runs.
    Train(TrainArgs),
    /// Tabulate Obj, Cond and the residual norm over a μ̄ grid.
    Sweep(SweepArgs),
    /// Recompute summary statistics from a results directory.
    Summarize {
        #[arg(long = "in", value_name = "DIR")]
        input: PathBuf,
    },
}

#[derive(Args)]
struct TrainArgs {
    /// Key-value configuration file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// hr, eqlm or gradq. Resets hyperparameters to the method's preset.
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    episodes: Option<usize>,
    /// 200-step episodes (default).
    #[arg(long, conflicts_with = "uncapped")]
    capped: bool,
    /// Episodes limited only by the safety cap.
    #[arg(long)]
    uncapped: bool,
    /// Base seed; run i uses seed + i.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads (0 = available parallelism).
    #[arg(long)]
    workers: Option<usize>,
    /// Also write each ELM run's final gram as gram_XXX.csv.
    #[arg(long)]
    save_gram: bool,
}

#[derive(Args)]
struct SweepArgs {
    /// Strategy families, comma separated: scalar, shift-clamp, complement, offset.
    #[arg(long, default_value = "scalar,offset")]
    strategy: String,
    /// Orders as a..b, a..=b or a comma list.
    #[arg(long, default_value = "0..=5")]
    orders: String,
    /// Base-10 exponent range and point count, lo:hi:steps.
    #[arg(long, default_value = "-3:1:41", allow_hyphen_values = true)]
    grid_log: String,
    /// standard or swapped.
    #[arg(long, default_value = "standard")]
    mode: String,
    /// Synthetic problem dimension.
    #[arg(long, default_value_t = 10)]
    dim: usize,
    /// Synthetic design rows.
    #[arg(long, default_value_t = 1000)]
    rows: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Headerless CSV gram instead of the synthetic problem.
    #[arg(long)]
    gram: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

fn train(args: TrainArgs) -> Result<()> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| ExpError::Config(format!("{}: {e}", path.display())))?;
            ExperimentConfig::parse(&text)?
        }
        None => ExperimentConfig::new(Method::Hr),
    };
    if let Some(m) = &args.method {
        let method: Method = m.parse()?;
        if method != cfg.method {
            cfg = cfg.with_method(method);
        }
    }
    if let Some(v) = args.runs {
        cfg.runs = v;
    }
    if let Some(v) = args.episodes {
        cfg.episodes = v;
    }
    if args.capped {
        cfg.env = EnvKind::Capped;
    }
    if args.uncapped {
        cfg.env = EnvKind::Uncapped;
    }
    if let Some(v) = args.seed {
        cfg.base_seed = v;
    }
    if let Some(v) = args.out {
        cfg.output_dir = v;
    }
    if let Some(v) = args.workers {
        cfg.workers = v;
    }
    let (_, summary) = run_experiment_with(&cfg, args.save_gram)?;
    print_summary(&summary)
}

fn sweep(args: SweepArgs) -> Result<()> {
    let strategies = args
        .strategy
        .split(',')
        .map(parse_strategy)
        .collect::<Result<Vec<_>>>()?;
    let source = match args.gram {
        Some(p) => ProblemSource::GramFile(p),
        None => ProblemSource::Synthetic {
            dim: args.dim,
            rows: args.rows,
            seed: args.seed,
        },
    };
    let n = emit_sweep(
        &source,
        &strategies,
        &parse_orders(&args.orders)?,
        &parse_grid_log(&args.grid_log)?,
        parse_mode(&args.mode)?,
        &args.out,
    )?;
    eprintln!("wrote {n} rows to {}", args.out.display());
    Ok(())
}

fn print_summary<T: serde::Serialize>(summary: &T) -> Result<()> {
    let text =
        serde_json::to_string_pretty(summary).map_err(|e| ExpError::Runtime(e.to_string()))?;
    println!("{text}");
    Ok(())
}

fn main() -> ExitCode {
    // Usage errors count as configuration errors.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Train(args) => train(args),
        Command::Sweep(args) => sweep(args),
        Command::Summarize { input } => summarize_dir(&input).and_then(|s| print_summary(&s)),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
