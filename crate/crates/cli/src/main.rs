//! `polysample`: batch front end for polytope sampling.
//!
//! Exit codes: 0 on success, 1 when a computation fails, 2 for usage or
//! input errors.

mod commands;
mod input;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use polysample::{Error, Form, WalkConfig, WalkKind};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "POLYSAMPLE_OUT_DIR";

#[derive(Parser)]
#[command(name = "polysample", version, about = "Uniform MCMC sampling over convex polytopes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Facial reduction and interior-point initialization.
    Preprocess {
        /// Generator spec (simplex:N, hypercube:M, birkhoff:M) or polytope file.
        input: String,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Run one chain and write samples.csv and report.json.
    Sample {
        input: String,
        #[command(flatten)]
        walk: WalkArgs,
        /// Kept samples.
        #[arg(long, default_value_t = 1000)]
        steps: usize,
        #[arg(long, default_value_t = 1)]
        thin: usize,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Time per step or steps per effective sample across inputs.
    Bench {
        #[arg(required = true)]
        inputs: Vec<String>,
        #[command(flatten)]
        walk: WalkArgs,
        #[arg(long, value_enum, default_value_t = BenchMode::PerIteration)]
        mode: BenchMode,
        /// Independent chains per input (per-iteration mode).
        #[arg(long, default_value_t = 10)]
        trials: usize,
        /// Steps per trial (per-iteration mode).
        #[arg(long, default_value_t = 500)]
        steps: usize,
        /// Minimum ESS to reach (mixing mode).
        #[arg(long, default_value_t = 500)]
        target_ess: usize,
        /// Thinning of the mixing-mode chain.
        #[arg(long, default_value_t = 10)]
        mixing_thin: usize,
        /// Transition budget per input (mixing mode).
        #[arg(long, default_value_t = 10_000_000)]
        max_steps: usize,
        /// Wall-clock budget in seconds for the whole sweep.
        #[arg(long, default_value_t = 86_400.0)]
        time_limit: f64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Radial uniformity test; writes uniformity.json and ecdf.csv.
    Uniformity {
        input: String,
        #[command(flatten)]
        walk: WalkArgs,
        #[arg(long, default_value_t = 500)]
        target_ess: usize,
        #[arg(long, default_value_t = 10_000_000)]
        max_steps: usize,
        /// Test samples from a CSV file (input coordinates) instead of running a chain.
        #[arg(long)]
        samples: Option<PathBuf>,
        #[command(flatten)]
        out: OutArgs,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum BenchMode {
    PerIteration,
    Mixing,
}

#[derive(Args, Clone)]
struct OutArgs {
    /// Output directory; defaults to $POLYSAMPLE_OUT_DIR, then ./polysample-out.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

impl OutArgs {
    fn resolve(&self) -> std::io::Result<PathBuf> {
        let dir = self
            .out_dir
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("polysample-out"));
        std::fs::create_dir_all(&dir)?;
        Ok(dir)
    }
}

#[derive(Args, Clone)]
struct WalkArgs {
    /// ball, hit_and_run, dikin, vaidya, john or lee_sidford.
    #[arg(long, default_value = "dikin")]
    walk: String,
    /// dense (inequality form) or sparse (equality form).
    #[arg(long, default_value = "sparse")]
    form: String,
    #[arg(long, default_value_t = 0.5)]
    r: f64,
    /// Regularization of the sparse metric, relative to its largest entry.
    #[arg(long, default_value_t = 1e-12)]
    epsilon: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    burn_in: usize,
    /// Override the walk's variance correction constant.
    #[arg(long)]
    c: Option<f64>,
    /// Allow walks whose weight solver is slow to converge (lee_sidford).
    #[arg(long)]
    experimental: bool,
}

impl WalkArgs {
    fn config(&self) -> Result<WalkConfig, Error> {
        let kind: WalkKind = self.walk.parse()?;
        if kind == WalkKind::LeeSidford && !self.experimental {
            return Err(Error::InvalidArgument(
                "the lee_sidford walk solves for its weights by gradient descent at every step, \
                 which converges slowly; pass --experimental to run it anyway"
                    .into(),
            ));
        }
        let form: Form = self.form.parse()?;
        let mut cfg = WalkConfig::new(kind, form);
        cfg.r = self.r;
        cfg.epsilon = self.epsilon;
        cfg.seed = self.seed;
        cfg.burn_in = self.burn_in;
        cfg.c_override = self.c;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Preprocess { input, out } => commands::preprocess(&input, &out.resolve()?),
        Command::Sample {
            input,
            walk,
            steps,
            thin,
            out,
        } => {
            let mut cfg = walk.config()?;
            cfg.steps = steps;
            cfg.thin = thin;
            cfg.validate()?;
            commands::sample(&input, &cfg, &out.resolve()?)
        }
        Command::Bench {
            inputs,
            walk,
            mode,
            trials,
            steps,
            target_ess,
            mixing_thin,
            max_steps,
            time_limit,
            out,
        } => {
            let cfg = walk.config()?;
            if !(time_limit > 0.0) {
                return Err(Error::InvalidArgument("--time-limit must be positive".into()));
            }
            let bench = commands::BenchOptions {
                mixing: mode == BenchMode::Mixing,
                trials: trials.max(1),
                steps,
                target_ess,
                mixing_thin: mixing_thin.max(1),
                max_steps,
                time_limit: std::time::Duration::from_secs_f64(time_limit),
            };
            commands::bench(&inputs, &cfg, &bench, &out.resolve()?)
        }
        Command::Uniformity {
            input,
            walk,
            target_ess,
            max_steps,
            samples,
            out,
        } => {
            let cfg = walk.config()?;
            commands::uniformity(&input, &cfg, target_ess, max_steps, samples.as_deref(), &out.resolve()?)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_input_error() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
