//! `fairtrade`: command surface for the causal-fairness pipeline.
//!
//! Eight subcommands cover the pipeline end to end: sample ground-truth data
//! (`gen-data`), fit the causal-effect VAE (`train-cevae`), fit input-
//! selection predictors (`train-aux`, `sweep`), score them (`eval`), query
//! the ground truth (`pse`, `identifiability`), and audit black-box models
//! (`audit`).
//!
//! Every run resolves its settings from an optional `--config` file (TOML,
//! with JSON accepted) overridden by command-line flags, then writes the
//! resolved document next to its outputs; re-running with that file alone
//! reproduces the run. All randomness derives from the single `--seed`.
//!
//! Exit codes: 0 success, 2 validation or usage error, 3 numerical abort.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{ArgAction, Args, Parser, Subcommand};

use config::PipelineConfig;

#[derive(Parser)]
#[command(name = "fairtrade", version, about = "Causal-fairness pipeline: fair predictors from causal-effect VAEs, and counterfactual audits of black-box models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a data-generating process to `<out>.csv` + `<out>.schema.json`
    GenData(GenDataArgs),
    /// Train the causal-effect VAE; emits checkpoint JSON and epoch CSVs
    TrainCevae(TrainCevaeArgs),
    /// Train one auxiliary predictor from an input selection
    TrainAux(TrainAuxArgs),
    /// Train the selection ladder over repeated splits; tabulate accuracy vs parity
    Sweep(SweepArgs),
    /// Score a trained auxiliary model (accuracy, parity, oracle scores)
    Eval(EvalArgs),
    /// Monte-Carlo path-specific effect on a ground-truth SCM
    Pse(PseArgs),
    /// Check a path set for recanting witnesses
    Identifiability(IdentifiabilityArgs),
    /// Counterfactually audit a black-box model via reconstruction
    Audit(AuditArgs),
}

#[derive(Args)]
struct Common {
    /// Config file (TOML or JSON); flags override its fields
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed; stage randomness derives from it by name
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn resolve(&self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(path) => PipelineConfig::load(path)?,
            None => PipelineConfig::default(),
        };
        set(&mut cfg.seed, &self.seed);
        if cfg.seed > i64::MAX as u64 {
            anyhow::bail!("--seed must fit in 63 bits so the config file stays TOML-representable");
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct GenDataArgs {
    #[command(flatten)]
    common: Common,
    /// DGP name: appendix, fig1c-synthetic, fig1c-linear, fig2-default,
    /// fig2-null, or chain:<alpha>,<beta>,<gamma>
    #[arg(long)]
    dgp: Option<String>,
    /// Records to sample
    #[arg(long)]
    n: Option<usize>,
    /// Output stem (writes <out>.csv, <out>.schema.json, <out>.config.toml)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write retained noise columns
    #[arg(long, action = ArgAction::SetTrue)]
    with_noise: bool,
}

#[derive(Args)]
struct TrainCevaeArgs {
    #[command(flatten)]
    common: Common,
    /// Dataset stem or CSV path (expects a .schema.json sidecar)
    #[arg(long)]
    data: Option<PathBuf>,
    /// Output directory (checkpoint.json, epochs.csv, latent_gap.csv)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Training epochs
    #[arg(long)]
    epochs: Option<usize>,
    /// Adam step size
    #[arg(long)]
    learning_rate: Option<f64>,
    /// Minibatch size
    #[arg(long)]
    batch_size: Option<usize>,
    /// Latent dimension
    #[arg(long)]
    d_z: Option<usize>,
    /// Hidden width of every network
    #[arg(long)]
    hidden: Option<usize>,
}

#[derive(Args)]
struct TrainAuxArgs {
    #[command(flatten)]
    common: Common,
    /// VAE checkpoint JSON
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Dataset stem or CSV path
    #[arg(long)]
    data: Option<PathBuf>,
    /// Input selection, e.g. "Z,B,R*" (sources: Z, B, R, R*, X, A)
    #[arg(long)]
    selection: Option<String>,
    /// Base sensitive value for R* decodes (0 or 1)
    #[arg(long)]
    base_a: Option<f64>,
    /// Output directory (aux.json, report.json, loss.csv)
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    aux: AuxOverrides,
}

/// Auxiliary-classifier hyperparameter overrides shared by several commands.
#[derive(Args)]
struct AuxOverrides {
    /// Aux training epochs
    #[arg(long)]
    aux_epochs: Option<usize>,
    /// Aux hidden width
    #[arg(long)]
    aux_hidden: Option<usize>,
    /// Aux RMSprop step size
    #[arg(long)]
    aux_learning_rate: Option<f64>,
    /// Aux minibatch size
    #[arg(long)]
    aux_batch_size: Option<usize>,
}

impl AuxOverrides {
    fn apply(&self, cfg: &mut PipelineConfig) {
        set(&mut cfg.aux.epochs, &self.aux_epochs);
        set(&mut cfg.aux.hidden, &self.aux_hidden);
        set(&mut cfg.aux.learning_rate, &self.aux_learning_rate);
        set(&mut cfg.aux.batch_size, &self.aux_batch_size);
    }
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// VAE checkpoint JSON
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Dataset stem or CSV path
    #[arg(long)]
    data: Option<PathBuf>,
    /// Semicolon-separated selections (default: Z;Z,B;Z,B,R*;Z,B,R,X;Z,B,R,X,A)
    #[arg(long, value_delimiter = ';')]
    selections: Option<Vec<String>>,
    /// Base sensitive value for R* decodes (0 or 1)
    #[arg(long)]
    base_a: Option<f64>,
    /// Repetitions with fresh train/test splits (default 5)
    #[arg(long)]
    reps: Option<usize>,
    /// Train share of each split
    #[arg(long)]
    train_frac: Option<f64>,
    /// Worker threads for the repetition loop
    #[arg(long)]
    jobs: Option<usize>,
    /// Output directory (sweep.csv, curve.csv)
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    aux: AuxOverrides,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    common: Common,
    /// VAE checkpoint JSON
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Auxiliary-model checkpoint JSON (from train-aux)
    #[arg(long)]
    aux_model: Option<PathBuf>,
    /// Dataset stem or CSV path
    #[arg(long)]
    data: Option<PathBuf>,
    /// Comma-separated metrics: accuracy, sp, oracle-cf, oracle-pscf
    #[arg(long, value_delimiter = ',')]
    metrics: Option<Vec<String>>,
    /// Ground-truth DGP for the oracle metrics
    #[arg(long)]
    dgp: Option<String>,
    /// Active path set for oracle-pscf, e.g. "A>Y,A>X>Y"
    #[arg(long)]
    paths: Option<String>,
    /// Oracle sample size (default 1000)
    #[arg(long)]
    n: Option<usize>,
    /// Output directory (metrics.json)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PseArgs {
    #[command(flatten)]
    common: Common,
    /// Ground-truth DGP (builtin name or chain:<alpha>,<beta>,<gamma>)
    #[arg(long)]
    dgp: Option<String>,
    /// Active path set, e.g. "A>X>Y" (empty = no active paths)
    #[arg(long)]
    paths: Option<String>,
    /// Sensitive value on the active paths
    #[arg(long)]
    a_active: Option<f64>,
    /// Sensitive value everywhere else
    #[arg(long)]
    a_base: Option<f64>,
    /// Monte-Carlo sample size (default 100000)
    #[arg(long)]
    n: Option<usize>,
    /// Optional JSON output file (report also prints to stdout)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct IdentifiabilityArgs {
    #[command(flatten)]
    common: Common,
    /// Builtin graph (fig1a, fig1b, fig1c, fig2) or a graph JSON file
    #[arg(long)]
    graph: Option<String>,
    /// Path set to check, e.g. "A>X>Y"; empty = the empty set
    #[arg(long)]
    paths: Option<String>,
    /// Optional JSON output file (report also prints to stdout)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AuditArgs {
    #[command(flatten)]
    common: Common,
    /// VAE checkpoint JSON
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Dataset stem or CSV path to audit on
    #[arg(long)]
    data: Option<PathBuf>,
    /// Adapter: builtin:lr | builtin:lr_fixed_a | builtin:random_forest |
    /// cmd:<command line> (CSV on stdin, one probability per line on stdout)
    #[arg(long)]
    adapter: Option<String>,
    /// Audit repetitions (default 20)
    #[arg(long)]
    reps: Option<usize>,
    /// Train share for fitting builtin adapters (audit runs on the rest)
    #[arg(long)]
    train_frac: Option<f64>,
    /// External-adapter timeout in seconds
    #[arg(long)]
    timeout_secs: Option<u64>,
    /// Report JSON file
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    aux: AuxOverrides,
}

/// Overwrite `slot` when the flag was given.
fn set<T: Clone>(slot: &mut T, flag: &Option<T>) {
    if let Some(v) = flag {
        *slot = v.clone();
    }
}

fn set_opt<T: Clone>(slot: &mut Option<T>, flag: &Option<T>) {
    if flag.is_some() {
        *slot = flag.clone();
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::GenData(a) => {
            let mut cfg = a.common.resolve()?;
            set_opt(&mut cfg.dgp, &a.dgp);
            set_opt(&mut cfg.n, &a.n);
            set_opt(&mut cfg.out, &a.out);
            if a.with_noise {
                cfg.with_noise = true;
            }
            commands::gen_data(cfg)
        }
        Command::TrainCevae(a) => {
            let mut cfg = a.common.resolve()?;
            set_opt(&mut cfg.data, &a.data);
            set_opt(&mut cfg.out, &a.out);
            set(&mut cfg.train.epochs, &a.epochs);
            set(&mut cfg.train.learning_rate, &a.learning_rate);
            set(&mut cfg.train.batch_size, &a.batch_size);
            set(&mut cfg.train.d_z, &a.d_z);
            set(&mut cfg.train.hidden, &a.hidden);
            commands::train_cevae(cfg)
        }
        Command::TrainAux(a) => {
            let mut cfg = a.common.resolve()?;
            set_opt(&mut cfg.checkpoint, &a.checkpoint);
            set_opt(&mut cfg.data, &a.data);
            set_opt(&mut cfg.selection, &a.selection);
            set_opt(&mut cfg.base_a, &a.base_a);
            set_opt(&mut cfg.out, &a.out);
            a.aux.apply(&mut cfg);
            commands::train_aux(cfg)
        }
        Command::Sweep(a) => {
            let mut cfg = a.common.resolve()?;
            set_opt(&mut cfg.checkpoint, &a.checkpoint);
            set_opt(&mut cfg.data, &a.data);
            if let Some(s) = &a.selections {
                cfg.selections = s.clone();
            }
            set_opt(&mut cfg.base_a, &a.base_a);
            set_opt(&mut cfg.reps, &a.reps);
            set(&mut cfg.train_frac, &a.train_frac);
            set(&mut cfg.jobs, &a.jobs);
            set_opt(&mut cfg.out, &a.out);
            a.aux.apply(&mut cfg);
            commands::sweep(cfg)
        }
        Command::Eval(a) => {
            let mut cfg = a.common.resolve()?;
            set_opt(&mut cfg.checkpoint, &a.checkpoint);
            set_opt(&mut cfg.aux_model, &a.aux_model);
            set_opt(&mut cfg.data, &a.data);
            if let Some(m) = &a.metrics {
                cfg.metrics = m.clone();
            }
            set_opt(&mut cfg.dgp, &a.dgp);
            set_opt(&mut cfg.paths, &a.paths);
            set_opt(&mut cfg.n, &a.n);
            set_opt(&mut cfg.out, &a.out);
            commands::eval(cfg)
        }
        Command::Pse(a) => {
            let mut cfg = a.common.resolve()?;
            set_opt(&mut cfg.dgp, &a.dgp);
            set_opt(&mut cfg.paths, &a.paths);
            set(&mut cfg.a_active, &a.a_active);
            set(&mut cfg.a_base, &a.a_base);
            set_opt(&mut cfg.n, &a.n);
            set_opt(&mut cfg.out, &a.out);
            commands::pse(cfg)
        }
        Command::Identifiability(a) => {
            let mut cfg = a.common.resolve()?;
            set_opt(&mut cfg.graph, &a.graph);
            set_opt(&mut cfg.paths, &a.paths);
            set_opt(&mut cfg.out, &a.out);
            commands::identifiability(cfg)
        }
        Command::Audit(a) => {
            let mut cfg = a.common.resolve()?;
            set_opt(&mut cfg.checkpoint, &a.checkpoint);
            set_opt(&mut cfg.data, &a.data);
            set_opt(&mut cfg.adapter, &a.adapter);
            set_opt(&mut cfg.reps, &a.reps);
            set(&mut cfg.train_frac, &a.train_frac);
            set(&mut cfg.timeout_secs, &a.timeout_secs);
            set_opt(&mut cfg.out, &a.out);
            a.aux.apply(&mut cfg);
            commands::audit(cfg)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            let numeric = err.chain().any(|cause| {
                cause
                    .downcast_ref::<fairtrade_core::Error>()
                    .is_some_and(fairtrade_core::Error::is_numeric)
            });
            ExitCode::from(if numeric { 3 } else { 2 })
        }
    }
}
