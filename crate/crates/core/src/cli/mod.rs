//! Command-line front end: `generate`, `train`, `eval`, `grad-check` and
//! `reproduce`. Every file is written atomically.

mod files;
mod grad;
mod grid;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

pub use files::{load_checkpoint, save_checkpoint, write_atomic, METADATA_FILE, PARAMS_FILE};
pub use grad::{
    check_model, format_table, grad_check_suite, GradCheckCase, CONV_DENSE_THRESHOLD,
    LSTM_THRESHOLD,
};
pub use grid::{default_grid, run_grid, run_job, GridCell, GridOutcome, JobOutcome};

use crate::error::{Error, Result};
use crate::lorenz::{generate_raw, Scenario, Series};
use crate::models::ModelKind;
use crate::nn::Parameters;
use crate::train_eval::{
    evaluate, parse_pairs, train, EvalReport, Evaluation, SamplingMode, TrainConfig, DEFAULT_SEEDS,
};

pub const OUT_ENV: &str = "LORENZCAST_OUT";

pub const EXIT_USAGE: u8 = 1;
pub const EXIT_NUMERICAL: u8 = 2;
pub const EXIT_IO: u8 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "lorenzcast",
    version,
    about = "Lorenz trajectories and one-step-ahead neural forecasters"
)]
pub struct Cli {
    /// Output directory
    #[arg(long, global = true, env = OUT_ENV, default_value = "lorenzcast-out")]
    pub out: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate a scenario and write the trajectory plus pairwise plot data
    Generate {
        #[arg(long, default_value = "A")]
        scenario: Scenario,
    },
    /// Train one model, then write a checkpoint, report and predictions
    Train(TrainArgs),
    /// Evaluate a checkpoint on its test set
    Eval {
        /// Directory holding params.csv and metadata.txt
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Finite-difference gradient checks for every model family
    GradCheck {
        #[arg(long, default_value_t = 1234)]
        seed: u64,
        #[arg(long, default_value_t = 1e-5)]
        eps: f64,
        /// Scale analytic gradients by 1.01 (negative control)
        #[arg(long, hide = true)]
        corrupt_backward: bool,
    },
    /// Run the full experiment grid over several seeds
    Reproduce {
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_SEEDS)]
        seeds: Vec<u64>,
        /// Only run the named cells
        #[arg(long, value_delimiter = ',')]
        cells: Vec<String>,
        /// Override every cell's epoch count
        #[arg(long)]
        epochs: Option<usize>,
    },
}

#[derive(Debug, Args, Default)]
pub struct TrainArgs {
    /// Flat `key = value` config file
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<ModelKind>,
    #[arg(long)]
    pub conditional: bool,
    #[arg(long)]
    pub multitask: bool,
    #[arg(long)]
    pub series: Option<Series>,
    #[arg(long)]
    pub scenario: Option<Scenario>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub sampling: Option<SamplingMode>,
    /// Any other config key, as KEY=VALUE
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub sets: Vec<String>,
}

impl TrainArgs {
    /// Config file first, then command-line overrides.
    pub fn resolve(&self) -> Result<TrainConfig> {
        let mut map: BTreeMap<String, String> = BTreeMap::new();
        if let Some(path) = &self.config {
            for (k, v) in parse_pairs(&files::read_text(path)?)? {
                if map.insert(k.clone(), v).is_some() {
                    return Err(Error::InvalidConfig(format!(
                        "{}: key '{k}' given twice",
                        path.display()
                    )));
                }
            }
        }
        for s in &self.sets {
            let (k, v) = s.split_once('=').ok_or_else(|| {
                Error::InvalidConfig(format!("--set expects KEY=VALUE, got '{s}'"))
            })?;
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
        let mut put = |k: &str, v: String| {
            map.insert(k.to_string(), v);
        };
        if let Some(m) = self.model {
            put("model", m.name().into());
        }
        if self.conditional {
            put("conditional", "true".into());
        }
        if self.multitask {
            put("multitask", "true".into());
        }
        if let Some(s) = self.series {
            put("series", s.name().into());
        }
        if let Some(s) = self.scenario {
            put("scenario", s.name().into());
        }
        if let Some(s) = self.seed {
            put("seed", s.to_string());
        }
        if let Some(e) = self.epochs {
            put("epochs", e.to_string());
        }
        if let Some(s) = self.sampling {
            put("sampling", s.name().into());
        }
        let config = TrainConfig::from_pairs(map.iter().map(|(k, v)| (k.as_str(), v.as_str())))?;
        config.validate()?;
        Ok(config)
    }
}

/// Process exit status for an error: usage, numerical or IO failure.
pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::InvalidParams(_) | Error::InvalidConfig(_) | Error::WeightMismatch(_) => EXIT_USAGE,
        Error::Io { .. } | Error::Parse { .. } => EXIT_IO,
        Error::NonFinite { .. }
        | Error::DegenerateSeries { .. }
        | Error::InsufficientData { .. }
        | Error::ShapeMismatch(_)
        | Error::EmptyBatch
        | Error::Diverged { .. } => EXIT_NUMERICAL,
    }
}

/// Parse `args` (including the program name) and run the command.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// Run a parsed command; returns the exit status on success paths that may
/// still fail a check (grad-check, reproduce).
pub fn run(cli: &Cli) -> Result<u8> {
    let out = cli.out.as_path();
    match &cli.command {
        Command::Generate { scenario } => cmd_generate(*scenario, out).map(|_| 0),
        Command::Train(args) => cmd_train(&args.resolve()?, out).map(|_| 0),
        Command::Eval { checkpoint } => cmd_eval(checkpoint, out).map(|_| 0),
        Command::GradCheck {
            seed,
            eps,
            corrupt_backward,
        } => {
            if !eps.is_finite() || *eps <= 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "eps must be positive, got {eps}"
                )));
            }
            let cases = grad_check_suite(*seed, *eps, *corrupt_backward)?;
            print!("{}", format_table(&cases));
            Ok(if cases.iter().all(GradCheckCase::passed) {
                0
            } else {
                EXIT_NUMERICAL
            })
        }
        Command::Reproduce {
            seeds,
            cells,
            epochs,
        } => {
            let outcome = cmd_reproduce(out, seeds, cells, *epochs)?;
            Ok(if outcome.failures().is_empty() {
                0
            } else {
                EXIT_NUMERICAL
            })
        }
    }
}

fn write_pairs(path: &Path, a: &[f64], b: &[f64], names: (&str, &str)) -> Result<()> {
    write_atomic(path, |w| {
        writeln!(w, "{},{}", names.0, names.1)?;
        for (u, v) in a.iter().zip(b) {
            writeln!(w, "{u:.16e},{v:.16e}")?;
        }
        Ok(())
    })
}

/// `trajectory.csv` (raw units) and the x-y, x-z, y-z pair files.
pub fn cmd_generate(scenario: Scenario, out: &Path) -> Result<()> {
    let set = generate_raw(scenario)?;
    write_atomic(&out.join("trajectory.csv"), |w| set.write_csv(w))?;
    write_pairs(&out.join("xy.csv"), &set.x, &set.y, ("x", "y"))?;
    write_pairs(&out.join("xz.csv"), &set.x, &set.z, ("x", "z"))?;
    write_pairs(&out.join("yz.csv"), &set.y, &set.z, ("y", "z"))?;
    println!(
        "wrote {} steps of scenario {scenario} to {}",
        set.len(),
        out.display()
    );
    Ok(())
}

fn write_eval_outputs(
    out: &Path,
    config: &TrainConfig,
    eval: &Evaluation,
    seconds: f64,
) -> Result<EvalReport> {
    let report = EvalReport::from_evaluation(config, eval, seconds);
    write_atomic(&out.join("report.csv"), |w| report.write_csv(w))?;
    write_atomic(&out.join("predictions.csv"), |w| {
        eval.write_predictions_csv(w)
    })?;
    for r in &report.rows {
        println!(
            "{} {} rmse_scaled={:.6} rmse_raw={:.6}",
            r.model, r.series, r.rmse_scaled, r.rmse_raw
        );
    }
    Ok(report)
}

/// Train, then write the checkpoint, loss history, report and predictions.
pub fn cmd_train(config: &TrainConfig, out: &Path) -> Result<EvalReport> {
    let start = Instant::now();
    let outcome = train(config)?;
    let carry = config.sampling == SamplingMode::Adjacent;
    let eval = evaluate(
        &outcome.model,
        &outcome.data.test,
        outcome.data.scaled.scale.as_ref(),
        carry,
    )?;
    save_checkpoint(out, &outcome.model, &outcome.metadata)?;
    write_atomic(&out.join("loss.csv"), |w| {
        writeln!(w, "epoch,loss")?;
        for (e, l) in outcome.history.iter().enumerate() {
            writeln!(w, "{e},{l:.16e}")?;
        }
        Ok(())
    })?;
    println!(
        "{} parameters, {} epochs",
        outcome.model.param_count(),
        outcome.history.len()
    );
    write_eval_outputs(out, config, &eval, start.elapsed().as_secs_f64())
}

/// Evaluate a saved checkpoint on the test split its config describes.
pub fn cmd_eval(checkpoint: &Path, out: &Path) -> Result<EvalReport> {
    let start = Instant::now();
    let (config, model) = load_checkpoint(checkpoint)?;
    let data = crate::train_eval::prepare_data(&config)?;
    let carry = config.sampling == SamplingMode::Adjacent;
    let eval = evaluate(&model, &data.test, data.scaled.scale.as_ref(), carry)?;
    write_eval_outputs(out, &config, &eval, start.elapsed().as_secs_f64())
}

/// Run the grid and write `results.csv` (one row per cell, seed and
/// series) and `summary.csv` (mean, std and best per cell and series).
pub fn cmd_reproduce(
    out: &Path,
    seeds: &[u64],
    only: &[String],
    epochs: Option<usize>,
) -> Result<GridOutcome> {
    if seeds.is_empty() {
        return Err(Error::InvalidConfig("at least one seed is required".into()));
    }
    let mut cells = default_grid();
    if !only.is_empty() {
        if let Some(bad) = only.iter().find(|n| !cells.iter().any(|c| &c.name == *n)) {
            let known: Vec<&str> = cells.iter().map(|c| c.name.as_str()).collect();
            return Err(Error::InvalidConfig(format!(
                "unknown cell '{bad}' (known: {})",
                known.join(", ")
            )));
        }
        cells.retain(|c| only.contains(&c.name));
    }
    let outcome = run_grid(cells, seeds, epochs);
    write_atomic(&out.join("results.csv"), |w| outcome.report().write_csv(w))?;
    let summary = outcome.summary_csv();
    write_atomic(&out.join("summary.csv"), |w| {
        w.write_all(summary.as_bytes())
    })?;
    for (ci, cell) in outcome.cells.iter().enumerate() {
        println!("{:<22} {:>8.1}s", cell.name, outcome.cell_seconds(ci));
    }
    for (cell, seed, err) in outcome.failures() {
        eprintln!("cell {} seed {seed} failed: {err}", cell.name);
    }
    print!("{summary}");
    Ok(outcome)
}
