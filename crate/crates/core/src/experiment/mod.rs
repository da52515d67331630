//! Config-driven experiments: per seed, split the data, build or train the
//! causal backend, train every method and score it on the test split.

mod config;
mod output;
mod verify;

pub use config::{
    BackendConfig, BackendKind, DatasetConfig, DatasetKind, ExperimentConfig, FitOverrides, MethodConfig, MethodName,
    OutputConfig, ResolvedBackend, ResolvedExperiment, ResolvedMethod, ScenarioConfig, SplitConfig, VaePreset,
    CONFIG_FORMAT,
};
pub use output::RunArtifacts;
pub use verify::{verify, InvariantCheck, VERIFY_TOLERANCE};

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

use crate::data::{generate_synthetic, load_csv, split, DataError, Dataset, Exogenous, Schema, Task};
use crate::fairlearn::{prepare, train_method, FairError, Prepared, TrainContext, TrainedMethod};
use crate::genmodel::{train_vae_with_validation, GenError, TrainHistory, VaeCheckpoint, VaeFamily, VaeModel};
use crate::metrics::{self, MetricsError, SeedMetrics};
use crate::repr::{Abduction, CausalModel, ReprError, ResolvedPath, Sample, ScmBackend};
use crate::scm::{read_scm_file, synthetic_scm, Scm, ScmError};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config error{}: {message}", at(path))]
    Config { path: String, message: String },
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Scm(#[from] ScmError),
    #[error(transparent)]
    Gen(#[from] GenError),
    #[error(transparent)]
    Repr(#[from] ReprError),
    #[error(transparent)]
    Fair(#[from] FairError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("io: {0}")]
    Io(String),
}

fn at(path: &str) -> String {
    if path.is_empty() {
        String::new()
    } else {
        format!(" at `{path}`")
    }
}

impl ExperimentError {
    pub fn is_config(&self) -> bool {
        matches!(self, ExperimentError::Config { .. })
    }
}

/// Causal backends for one seed. VAE experiments train one model with the
/// label (UF, CA, ICA, CR) and one without it (CE, OURS).
pub enum Backends {
    Scm(ScmBackend),
    Vae {
        family: VaeFamily,
        full: Box<VaeModel>,
        no_label: Box<VaeModel>,
        histories: [TrainHistory; 2],
    },
}

impl Backends {
    pub fn for_method(&self, label_free: bool) -> &dyn CausalModel {
        match self {
            Backends::Scm(b) => b,
            Backends::Vae { full, no_label, .. } => {
                if label_free {
                    no_label.as_ref()
                } else {
                    full.as_ref()
                }
            }
        }
    }
}

/// Train, optional validation and test partitions of one seed.
pub struct SeedData {
    pub train: Dataset,
    pub val: Option<Dataset>,
    pub test: Dataset,
}

/// Everything a seed produced.
pub struct SeedResult {
    pub seed: u64,
    pub metrics: Vec<SeedMetrics>,
    /// Factual and counterfactual test predictions per method.
    pub predictions: Vec<(Vec<f64>, Vec<f64>)>,
    pub trained: Vec<TrainedMethod>,
    pub checkpoints: Vec<(String, String)>,
    pub log: Vec<String>,
}

fn read_exogenous(path: &Path, rows: usize) -> Result<Exogenous, ExperimentError> {
    let mut reader = ::csv::Reader::from_path(path).map_err(|e| ExperimentError::Io(format!("{}: {e}", path.display())))?;
    let names: Vec<String> = reader
        .headers()
        .map_err(|e| ExperimentError::Io(e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let mut values = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| ExperimentError::Io(e.to_string()))?;
        for (name, cell) in names.iter().zip(rec.iter()) {
            values.push(cell.trim().parse::<f64>().map_err(|_| DataError::Parse {
                column: name.clone(),
                value: cell.to_string(),
                line: i + 2,
            })?);
        }
    }
    if values.len() != rows * names.len() {
        return Err(ExperimentError::Io(format!(
            "{}: expected {rows} complete rows of exogenous values",
            path.display()
        )));
    }
    Ok(Exogenous {
        values: ndarray::Array2::from_shape_vec((rows, names.len()), values).expect("checked length"),
        names,
    })
}

/// Loads a CSV dataset once; synthetic data is generated per seed.
pub fn load_dataset(cfg: &ResolvedExperiment) -> Result<Option<Dataset>, ExperimentError> {
    let d = &cfg.dataset;
    if d.kind == DatasetKind::Synthetic {
        return Ok(None);
    }
    let schema = Schema::read(d.schema.as_ref().expect("resolved"))?;
    let mut data = load_csv(d.path.as_ref().expect("resolved"), &schema)?;
    if data.dropped > 0 {
        log::warn!("dropped {} rows with missing cells", data.dropped);
    }
    if let Some(p) = &d.exogenous {
        if data.dropped > 0 {
            return Err(ExperimentError::Config {
                path: "dataset.exogenous".into(),
                message: "exogenous rows cannot be aligned once rows with missing cells are dropped".into(),
            });
        }
        data.exogenous = Some(read_exogenous(p, data.len())?);
    }
    if data.is_empty() {
        return Err(DataError::Empty.into());
    }
    Ok(Some(data))
}

pub fn seed_data(cfg: &ResolvedExperiment, loaded: Option<&Dataset>, seed: u64) -> Result<SeedData, ExperimentError> {
    let data = match loaded {
        Some(d) => d.clone(),
        None => generate_synthetic(cfg.dataset.n.expect("resolved"), cfg.dataset.seed.unwrap_or(seed)),
    };
    let parts = split(data.len(), &cfg.split_spec(seed))?;
    let mut sets: Vec<Dataset> = parts.iter().map(|p| data.subset(p)).collect();
    if cfg.standardize {
        let s = sets[0].fit_standardizer();
        for d in &mut sets {
            d.standardize(&s)?;
        }
    }
    let test = sets.pop().expect("at least two parts");
    let val = (sets.len() == 2).then(|| sets.pop().expect("three parts"));
    let train = sets.pop().expect("train part");
    Ok(SeedData { train, val, test })
}

pub fn build_scm(cfg: &ResolvedExperiment) -> Result<Option<Scm>, ExperimentError> {
    match &cfg.backend {
        ResolvedBackend::Scm { builtin: Some(_), .. } => Ok(Some(synthetic_scm())),
        ResolvedBackend::Scm { file: Some(f), .. } => Ok(Some(read_scm_file(f)?)),
        ResolvedBackend::Scm { .. } => unreachable!("resolved"),
        ResolvedBackend::Vae { .. } => Ok(None),
    }
}

pub fn build_backends(
    cfg: &ResolvedExperiment,
    scm: Option<&Scm>,
    data: &SeedData,
    seed: u64,
) -> Result<Backends, ExperimentError> {
    match &cfg.backend {
        ResolvedBackend::Scm { abduction, .. } => {
            let scm = scm.expect("built for scm backends").clone();
            let columns: Vec<String> = data.train.columns.iter().map(|c| c.name.clone()).collect();
            if data.train.columns.iter().any(|c| c.width != 1) {
                return Err(ExperimentError::Config {
                    path: "backend".into(),
                    message: "an exact SCM needs single-width feature columns".into(),
                });
            }
            let exo = match (&data.train.exogenous, abduction) {
                (Some(e), _) => e.names.clone(),
                (None, Abduction::GroundTruth) => {
                    return Err(ExperimentError::Config {
                        path: "backend.abduction".into(),
                        message: "ground-truth abduction needs exogenous values with the dataset".into(),
                    })
                }
                (None, Abduction::Additive) => vec![],
            };
            Ok(Backends::Scm(ScmBackend::with_columns(scm, *abduction, &columns, &exo)?))
        }
        ResolvedBackend::Vae { family, full, no_label } => {
            let val = data.val.as_ref().unwrap_or(&data.test);
            let a = train_vae_with_validation(*family, true, &data.train, val, full, seed)?;
            let b = train_vae_with_validation(*family, false, &data.train, val, no_label, seed ^ 0x9e37_79b9_7f4a_7c15)?;
            Ok(Backends::Vae {
                family: *family,
                full: Box::new(a.model),
                no_label: Box::new(b.model),
                histories: [a.history, b.history],
            })
        }
    }
}

fn task_metric(task: Task) -> &'static str {
    match task {
        Task::Regression => "mse",
        Task::Classification => "acc",
    }
}

/// Runs one seed end to end.
pub fn run_seed(
    cfg: &ResolvedExperiment,
    loaded: Option<&Dataset>,
    scm: Option<&Scm>,
    seed: u64,
) -> Result<SeedResult, ExperimentError> {
    let data = seed_data(cfg, loaded, seed)?;
    let mut log = vec![format!(
        "seed {seed}: {} train rows, {} validation rows, {} test rows",
        data.train.len(),
        data.val.as_ref().map_or(0, Dataset::len),
        data.test.len()
    )];
    let backends = build_backends(cfg, scm, &data, seed)?;
    let mut checkpoints = Vec::new();
    if let Backends::Vae {
        family,
        full,
        no_label,
        histories,
    } = &backends
    {
        let hash = data.train.schema.hash();
        for ((model, h), with_label) in [full.as_ref(), no_label.as_ref()].into_iter().zip(histories).zip([true, false]) {
            let tag = family.tag(with_label);
            log.push(format!(
                "seed {seed}: {tag} best epoch {} of {}, validation loss {:.6} (initial {:.6})",
                h.best_epoch,
                h.epochs.len(),
                h.best_val_loss,
                h.initial_val_loss
            ));
            checkpoints.push((format!("seed{seed}_{tag}.json"), VaeCheckpoint::from_model(model, &hash).to_json()));
        }
    }
    let task = data.train.task();
    let levels = data.train.schema.sensitive_levels();
    let mut prepared: BTreeMap<bool, (ResolvedPath, Vec<Prepared>, Vec<Prepared>)> = BTreeMap::new();
    let mut metrics_out = Vec::new();
    let mut predictions = Vec::new();
    let mut trained = Vec::new();
    for m in &cfg.methods {
        let label_free = m.method.uses_label_free_backend();
        let model = backends.for_method(label_free);
        if !prepared.contains_key(&label_free) {
            let path = cfg.path_spec().resolve(model)?;
            let train = prepare(model, &Sample::all(&data.train), &path)?;
            let test = prepare(model, &Sample::all(&data.test), &path)?;
            prepared.insert(label_free, (path, train, test));
        }
        let (path, train, test) = &prepared[&label_free];
        let ctx = TrainContext {
            task,
            fit: cfg.fit_config(
                match task {
                    Task::Regression => crate::fairlearn::ModelKind::Linear,
                    Task::Classification => crate::fairlearn::ModelKind::Logistic,
                },
                seed,
            ),
            cf_label: cfg.scenario.cf_label,
            path: path.clone(),
        };
        let tm = train_method(&m.method, model, train, &ctx)?;
        let f = test.iter().map(|p| tm.predict(p)).collect::<Result<Vec<_>, _>>()?;
        let cf = test.iter().map(|p| tm.predict_counterfactual(p)).collect::<Result<Vec<_>, _>>()?;
        let perf = match task {
            Task::Regression => metrics::mse(&f, &data.test.y)?,
            Task::Classification => metrics::accuracy(&f, &data.test.y)?,
        };
        let te = metrics::total_effect(&f, &cf)?;
        let te_group = metrics::group_total_effect(&f, &cf, &data.test.a)?
            .into_iter()
            .map(|(l, v)| (levels[l].clone(), v))
            .collect();
        log.push(format!(
            "seed {seed}: {} {} {perf:.6} te {te:.6}",
            m.label,
            task_metric(task)
        ));
        metrics_out.push(SeedMetrics {
            method: m.label.clone(),
            perf_metric: task_metric(task).into(),
            perf,
            te,
            te_group,
        });
        checkpoints.push((
            format!("seed{seed}_{}.json", output::file_stem(&m.label)),
            serde_json::to_string_pretty(&tm).expect("predictor serializes"),
        ));
        predictions.push((f, cf));
        trained.push(tm);
    }
    Ok(SeedResult {
        seed,
        metrics: metrics_out,
        predictions,
        trained,
        checkpoints,
        log,
    })
}

/// Runs every seed (in parallel when `jobs > 1`) and aggregates.
pub fn run_experiment(cfg: &ResolvedExperiment, jobs: usize) -> Result<RunArtifacts, ExperimentError> {
    let loaded = load_dataset(cfg)?;
    let scm = build_scm(cfg)?;
    let run = |seed: &u64| run_seed(cfg, loaded.as_ref(), scm.as_ref(), *seed);
    let results: Vec<SeedResult> = if jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| ExperimentError::Io(e.to_string()))?;
        pool.install(|| cfg.seeds.par_iter().map(run).collect::<Result<Vec<_>, _>>())?
    } else {
        cfg.seeds.iter().map(run).collect::<Result<Vec<_>, _>>()?
    };
    RunArtifacts::assemble(cfg, results)
}
