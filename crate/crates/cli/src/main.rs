use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use cfrep_core::data::{generate_synthetic, write_synthetic_csv};
use cfrep_core::experiment::{
    build_backends, build_scm, load_dataset, run_experiment, seed_data, verify, Backends, ExperimentConfig,
    ExperimentError, ResolvedExperiment,
};
use cfrep_core::genmodel::VaeCheckpoint;
use cfrep_core::metrics::MetricsReport;

#[derive(Parser)]
#[command(name = "cfrep", version, about = "Counterfactually fair representation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Csv,
    Table,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic CSV and its exogenous ground truth.
    Synth {
        #[arg(long, env = "CFREP_N", default_value_t = 3000)]
        n: usize,
        #[arg(long, env = "CFREP_SEED", default_value_t = 1)]
        seed: u64,
        #[arg(long, env = "CFREP_OUT")]
        out: PathBuf,
    },
    /// Train the configured CVAE or DCEVAE (with and without the label) and save checkpoints.
    TrainBackend {
        #[arg(long, env = "CFREP_CONFIG")]
        config: PathBuf,
        #[arg(long, env = "CFREP_OUT")]
        out: PathBuf,
        /// Seed to train with; defaults to the first configured seed.
        #[arg(long, env = "CFREP_SEED")]
        seed: Option<u64>,
    },
    /// Run a full experiment.
    Run {
        #[arg(long, env = "CFREP_CONFIG")]
        config: PathBuf,
        #[arg(long, env = "CFREP_OUT")]
        out: PathBuf,
        #[arg(long, env = "CFREP_JOBS", default_value_t = 1)]
        jobs: usize,
        /// Replace a non-empty output directory.
        #[arg(long, env = "CFREP_FORCE")]
        force: bool,
    },
    /// Print a metrics report as CSV or a table.
    Report {
        /// A report.csv file or a run directory holding one.
        #[arg(long = "in", env = "CFREP_IN")]
        input: PathBuf,
        #[arg(long, env = "CFREP_FORMAT", value_enum, default_value_t = ReportFormat::Table)]
        format: ReportFormat,
    },
    /// Check the representation invariants against the configured backend.
    Verify {
        #[arg(long, env = "CFREP_CONFIG")]
        config: PathBuf,
    },
}

fn load(config: &Path) -> Result<ResolvedExperiment, ExperimentError> {
    ExperimentConfig::load(config)
}

fn synth(n: usize, seed: u64, out: &Path) -> Result<(), ExperimentError> {
    if let Some(dir) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| ExperimentError::Io(format!("{}: {e}", dir.display())))?;
    }
    let exo = write_synthetic_csv(&generate_synthetic(n, seed), out)?;
    println!("wrote {} and {}", out.display(), exo.display());
    Ok(())
}

fn train_backend(config: &Path, out: &Path, seed: Option<u64>) -> Result<(), ExperimentError> {
    let cfg = load(config)?;
    let seed = seed.unwrap_or(cfg.seeds[0]);
    if !matches!(cfg.backend, cfrep_core::experiment::ResolvedBackend::Vae { .. }) {
        return Err(ExperimentError::Config {
            path: "backend.kind".into(),
            message: "train-backend needs a `cvae` or `dcevae` backend".into(),
        });
    }
    let loaded = load_dataset(&cfg)?;
    let data = seed_data(&cfg, loaded.as_ref(), seed)?;
    let Backends::Vae {
        family,
        full,
        no_label,
        histories,
    } = build_backends(&cfg, build_scm(&cfg)?.as_ref(), &data, seed)?
    else {
        unreachable!("checked above")
    };
    fs::create_dir_all(out).map_err(|e| ExperimentError::Io(format!("{}: {e}", out.display())))?;
    let hash = data.train.schema.hash();
    for ((model, h), with_label) in [full, no_label].iter().zip(&histories).zip([true, false]) {
        let tag = family.tag(with_label);
        let path = out.join(format!("{tag}.json"));
        VaeCheckpoint::from_model(model, &hash).save(&path)?;
        println!(
            "{tag}: best epoch {} of {}, validation loss {:.6} -> {}",
            h.best_epoch,
            h.epochs.len(),
            h.best_val_loss,
            path.display()
        );
    }
    Ok(())
}

fn run(config: &Path, out: &Path, jobs: usize, force: bool) -> Result<(), ExperimentError> {
    let cfg = load(config)?;
    let artifacts = run_experiment(&cfg, jobs.max(1))?;
    artifacts.write(out, force)?;
    print!("{}", artifacts.report.to_table());
    Ok(())
}

fn report(input: &Path, format: ReportFormat) -> Result<(), ExperimentError> {
    let path = if input.is_dir() {
        input.join("report.csv")
    } else {
        input.to_path_buf()
    };
    let text = fs::read_to_string(&path).map_err(|e| ExperimentError::Io(format!("{}: {e}", path.display())))?;
    let r = MetricsReport::from_csv(&text)?;
    match format {
        ReportFormat::Csv => print!("{}", r.to_csv()),
        ReportFormat::Table => print!("{}", r.to_table()),
    }
    Ok(())
}

fn verify_cmd(config: &Path) -> Result<bool, ExperimentError> {
    let cfg = load(config)?;
    let checks = verify(&cfg)?;
    for c in &checks {
        println!(
            "{} {} max_deviation={:e} tolerance={:e}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.max_deviation,
            c.tolerance
        );
    }
    Ok(checks.iter().all(|c| c.passed))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("CFREP_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Synth { n, seed, out } => synth(*n, *seed, out).map(|_| true),
        Command::TrainBackend { config, out, seed } => train_backend(config, out, *seed).map(|_| true),
        Command::Run {
            config,
            out,
            jobs,
            force,
        } => run(config, out, *jobs, *force).map(|_| true),
        Command::Report { input, format } => report(input, *format).map(|_| true),
        Command::Verify { config } => verify_cmd(config),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: invariant check failed");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 3 })
        }
    }
}
