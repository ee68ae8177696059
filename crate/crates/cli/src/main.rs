//! `fsmwt`: secrecy capacities, delay sweeps, capacity-equivocation regions
//! and toy codec runs for wiretap channels whose state follows a Markov chain.
//!
//! Exit codes: 0 success, 2 config or validation error, 3 numerical flag
//! (artifacts are still written), 4 size guardrail refusal.

mod commands;
mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::Mode;

#[derive(Debug)]
pub struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        Self::config(format!("cannot write {}: {e}", path.display()))
    }

    pub fn csv(e: csv::Error) -> Self {
        Self::config(format!("csv: {e}"))
    }
}

impl From<fsmwt_core::Error> for Failure {
    fn from(e: fsmwt_core::Error) -> Self {
        let code = match e {
            fsmwt_core::Error::Guardrail { .. } => 4,
            _ => 2,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "fsmwt", version, about = "Secrecy capacity tools for wiretap channels driven by a Markov state")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug)]
struct Common {
    /// Experiment config (TOML).
    config: PathBuf,
    /// Override a config key, e.g. `--set chain.u=0.5` or `--set d=inf`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory (overrides `output` in the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; falls back to FSMWT_THREADS.
    #[arg(long, env = "FSMWT_THREADS")]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Secrecy capacity at one delay; prints bits per use with 6 decimals.
    Capacity {
        #[command(flatten)]
        common: Common,
        /// Use the feedback (key-generation) capacity.
        #[arg(long)]
        feedback: bool,
    },
    /// Capacity over a (u, d, sigma_w^2, feedback) grid; writes CSV and a plot script.
    Sweep {
        #[command(flatten)]
        common: Common,
    },
    /// Capacity-equivocation boundary of a degraded discrete channel.
    Region {
        #[command(flatten)]
        common: Common,
    },
    /// Toy wiretap code runs; one JSON report per seed.
    Codec {
        #[command(flatten)]
        common: Common,
    },
    /// Dispatch on the config's `mode`.
    Run {
        #[command(flatten)]
        common: Common,
    },
}

fn run(cli: Cli) -> Result<commands::Outcome, Failure> {
    let (common, forced) = match &cli.command {
        Command::Capacity { common, feedback } => (
            common,
            Some(if *feedback { Mode::CapacityFeedback } else { Mode::Capacity }),
        ),
        Command::Sweep { common } => (common, Some(Mode::Sweep)),
        Command::Region { common } => (common, Some(Mode::Region)),
        Command::Codec { common } => (common, Some(Mode::Codec)),
        Command::Run { common } => (common, None),
    };
    if let Some(t) = common.threads {
        if t == 0 {
            return Err(Failure::config("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Failure::config(format!("thread pool: {e}")))?;
    }
    let mut loaded = config::load(&common.config, &common.set)?;
    if let Some(mode) = forced {
        // `capacity` keeps a feedback mode chosen in the file
        let keep = mode == Mode::Capacity && loaded.config.mode == Mode::CapacityFeedback;
        if !keep {
            loaded.config.mode = mode;
        }
    }
    let dir = match &common.out {
        Some(out) => out.clone(),
        None if loaded.config.output.is_absolute() => loaded.config.output.clone(),
        None => loaded.base.join(&loaded.config.output),
    };
    match loaded.config.mode {
        Mode::Capacity | Mode::CapacityFeedback => commands::capacity(&loaded, &dir),
        Mode::Sweep => commands::sweep_cmd(&loaded, &dir),
        Mode::Region => commands::region(&loaded, &dir),
        Mode::Codec => commands::codec(&loaded, &dir),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(outcome) if outcome.numerical_flag => {
            eprintln!("warning: result carries a numerical flag (see artifacts)");
            ExitCode::from(3)
        }
        Ok(_) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
