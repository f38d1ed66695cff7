//! `qdgen`: dataset augmentation, hybrid training, sampling, evaluation and
//! the qubit-count sweep.

mod commands;
mod exit;
mod runconfig;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use exit::{Failure, CONFIG, OK};

#[derive(Parser)]
#[command(name = "qdgen", version, about = "QCBM-prior LSTM molecule generator")]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Expand seed molecules with STONED mutations.
    Augment {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        per_seed: usize,
        #[arg(long, default_value_t = 500)]
        max_attempts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Keep mutants that fail the structural filter.
        #[arg(long)]
        no_filter: bool,
    },
    /// Run the hybrid training loop.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides master_seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Generate molecules from a checkpoint.
    Sample {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 1000)]
        count: usize,
        #[arg(long, default_value_t = 1.0)]
        temperature: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// SR, UF and DF of a SMILES file.
    Eval {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        train_set: PathBuf,
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        svg: Option<PathBuf>,
        /// Count unparsable lines as failures instead of stopping.
        #[arg(long)]
        lenient: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train once per qubit count and tabulate the metrics.
    Scaling {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated qubit counts, e.g. 4,6,8.
        #[arg(long, default_value = "")]
        qubits: String,
        #[arg(long)]
        out: PathBuf,
        /// Defaults to the table path with an .svg extension.
        #[arg(long)]
        svg: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn init_threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var("QDGEN_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::new(CONFIG, format!("QDGEN_THREADS: `{v}` is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::new(CONFIG, format!("QDGEN_THREADS: {e}")))
}

fn parse_counts(list: &str) -> Result<Vec<usize>, Failure> {
    list.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse()
                .map_err(|_| Failure::new(CONFIG, format!("config key `qubits`: `{t}` is not a qubit count")))
        })
        .collect()
}

fn run(cli: Cli) -> Result<(), Failure> {
    init_threads()?;
    match cli.command {
        Command::Augment {
            input,
            out,
            per_seed,
            max_attempts,
            seed,
            no_filter,
        } => commands::augment(&commands::AugmentArgs {
            input: &input,
            output: &out,
            per_seed,
            max_attempts,
            seed,
            filter: !no_filter,
        }),
        Command::Train { config, out, seed } => commands::train(&config, out.as_deref(), seed),
        Command::Sample {
            checkpoint,
            count,
            temperature,
            out,
            seed,
        } => commands::sample(&checkpoint, count, temperature, &out, seed),
        Command::Eval {
            input,
            train_set,
            report,
            svg,
            lenient,
            seed,
        } => commands::eval(&input, &train_set, &report, svg.as_deref(), lenient, seed),
        Command::Scaling {
            config,
            qubits,
            out,
            svg,
            seed,
        } => commands::scaling(&config, &parse_counts(&qubits)?, &out, svg.as_deref(), seed),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).format_timestamp(None).init();
    match run(cli) {
        Ok(()) => ExitCode::from(OK),
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code)
        }
    }
}
