//! The `cardiodx` command line.

pub mod pipeline;

use std::fs;
use std::io::{BufRead, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use cardiodx_core::data::{
    parse_inference_csv, records_to_csv, RowStatus, DEFAULT_SPLIT_SEED, DEFAULT_TRAIN_COUNT, N_FEATURES,
};
use cardiodx_core::evaluation::{apply_combination, cross_validate, HyperGrid, DEFAULT_FOLDS};
use cardiodx_core::neuralnet::{epoch_sweep, sweep_to_csv, DEFAULT_SWEEP_EPOCHS};
use cardiodx_core::store::{ModelMetadata, MODEL_EXTENSION};
use cardiodx_core::{load_model, save_model, LearnerConfig, LearnerSpec, Matrix, ModelEnvelope, ModelType};
use cardiodx_service::auth::{UserCredential, UserStore, DEFAULT_ITERATIONS};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::pipeline::{
    compare, fit_and_evaluate, load_dataset, params_to_json, read_params, tune_forest, Dataset, ROC_SET,
};

#[derive(Debug, Parser)]
#[command(name = "cardiodx", version, about = "Train, evaluate and serve heart-disease classifiers")]
pub struct Cli {
    /// Worker threads for parallel training (defaults to all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load, clean, split and scale the dataset and print a summary.
    Prep(PrepArgs),
    /// Fit the eight classical learners and write metrics and ROC curves.
    Compare(CompareArgs),
    /// Random forest grid search with k-fold cross-validation.
    Gridsearch(GridArgs),
    /// k-fold cross-validation of one learner.
    Crossval(CrossvalArgs),
    /// Fit a learner and write a model file.
    Train(TrainArgs),
    /// Train the network at several epoch counts and record accuracies.
    SweepEpochs(SweepArgs),
    /// Score a CSV of patients with a model file.
    Predict(PredictArgs),
    /// Run the REST service.
    Serve(ServeArgs),
    /// Append a user to a users file. The password is read from stdin.
    AddUser(AddUserArgs),
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Processed Cleveland CSV.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = DEFAULT_SPLIT_SEED)]
    pub seed: u64,
    /// Records assigned to the training split.
    #[arg(long, default_value_t = DEFAULT_TRAIN_COUNT)]
    pub train_count: usize,
}

#[derive(Debug, Args)]
pub struct PrepArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Also write train.csv, test.csv and prep.toml here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_FOLDS)]
    pub folds: usize,
    /// Write ROC curves for every learner, SVM margins included.
    #[arg(long)]
    pub roc_all: bool,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub out: PathBuf,
    /// JSON object mapping parameter names to value lists.
    #[arg(long)]
    pub grid: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_FOLDS)]
    pub folds: usize,
}

#[derive(Debug, Args)]
pub struct CrossvalArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value = "random_forest")]
    pub model: ModelType,
    /// JSON object of hyperparameters, e.g. written by `gridsearch`.
    #[arg(long)]
    pub params: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_FOLDS)]
    pub folds: usize,
    /// Cross-validate on every clean record instead of the training split.
    #[arg(long)]
    pub full: bool,
    /// Write crossval.csv here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value = "dnn")]
    pub model: ModelType,
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Training epochs for the network.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Model file, or a directory to write `<model>.model` into.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub out: PathBuf,
    /// Comma-separated epoch counts.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_SWEEP_EPOCHS)]
    pub epochs: Vec<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// CSV with a header naming the 13 features and an optional `id` column.
    #[arg(long)]
    pub input: PathBuf,
    /// Results CSV; stdout when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = "CARDIODX_MODEL")]
    pub model: Option<PathBuf>,
    #[arg(long, env = "CARDIODX_USERS")]
    pub users: PathBuf,
    #[arg(long, env = "CARDIODX_BIND", default_value = "127.0.0.1:8080")]
    pub bind: SocketAddr,
    /// Session lifetime in seconds.
    #[arg(long, env = "CARDIODX_TOKEN_TTL", default_value_t = 86_400)]
    pub token_ttl: u64,
    /// Largest accepted upload in bytes.
    #[arg(long, env = "CARDIODX_UPLOAD_LIMIT", default_value_t = cardiodx_service::DEFAULT_UPLOAD_LIMIT)]
    pub upload_limit: usize,
}

#[derive(Debug, Args)]
pub struct AddUserArgs {
    #[arg(long)]
    pub users: PathBuf,
    #[arg(long)]
    pub username: String,
    #[arg(long, default_value_t = DEFAULT_ITERATIONS)]
    pub iterations: u32,
}

pub fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("cannot configure the thread pool")?;
    }
    match cli.command {
        Command::Prep(a) => prep(&a),
        Command::Compare(a) => compare_cmd(&a),
        Command::Gridsearch(a) => gridsearch(&a),
        Command::Crossval(a) => crossval(&a),
        Command::Train(a) => train(&a),
        Command::SweepEpochs(a) => sweep(&a),
        Command::Predict(a) => predict(&a),
        Command::Serve(a) => serve(a),
        Command::AddUser(a) => add_user(&a, std::io::stdin().lock()),
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))?;
    log::info!("wrote {}", path.display());
    Ok(())
}

#[derive(Serialize)]
struct RunInfo<'a> {
    command: &'a str,
    version: &'a str,
    generated_at: String,
}

/// Wall-clock details live here so the reports themselves stay reproducible.
fn write_run_info(dir: &Path, command: &str) -> Result<()> {
    let info = RunInfo {
        command,
        version: env!("CARGO_PKG_VERSION"),
        generated_at: chrono::Utc::now().to_rfc3339(),
    };
    write(&dir.join("run_info.toml"), &toml::to_string(&info)?)
}

fn load(a: &DataArgs) -> Result<(Dataset, cardiodx_core::data::SplitDataset)> {
    let data = load_dataset(&a.data)?;
    let split = data.split(a.seed, a.train_count)?;
    Ok((data, split))
}

#[derive(Serialize)]
struct PrepSummary {
    raw_rows: usize,
    clean_records: usize,
    dropped: usize,
    train_rows: usize,
    test_rows: usize,
    train_positive: usize,
    test_positive: usize,
    seed: u64,
    dataset_fingerprint: String,
    scaler_min: Vec<f64>,
    scaler_max: Vec<f64>,
}

fn prep(a: &PrepArgs) -> Result<()> {
    let (data, split) = load(&a.data)?;
    let scaler = cardiodx_core::data::fit_minmax(&split.x_train)?;
    let summary = PrepSummary {
        raw_rows: data.raw_rows,
        clean_records: data.records.len(),
        dropped: data.dropped,
        train_rows: split.y_train.len(),
        test_rows: split.y_test.len(),
        train_positive: split.y_train.iter().filter(|&&y| y == 1).count(),
        test_positive: split.y_test.iter().filter(|&&y| y == 1).count(),
        seed: split.seed,
        dataset_fingerprint: data.fingerprint.clone(),
        scaler_min: scaler.mins.clone(),
        scaler_max: scaler.maxs.clone(),
    };
    let text = toml::to_string(&summary)?;
    print!("{text}");
    if let Some(dir) = &a.out {
        ensure_dir(dir)?;
        let pick = |idx: &[usize]| idx.iter().map(|&i| data.records[i].clone()).collect::<Vec<_>>();
        write(&dir.join("train.csv"), &records_to_csv(&pick(&split.train_index)))?;
        write(&dir.join("test.csv"), &records_to_csv(&pick(&split.test_index)))?;
        write(&dir.join("prep.toml"), &text)?;
        write_run_info(dir, "prep")?;
    }
    Ok(())
}

fn compare_cmd(a: &CompareArgs) -> Result<()> {
    let (data, split) = load(&a.data)?;
    ensure_dir(&a.out)?;
    let report = compare(&data, &split, a.folds)?;
    write(&a.out.join("metrics.txt"), &toml::to_string(&report)?)?;
    for (t, curve) in &report.curves {
        if a.roc_all || ROC_SET.contains(t) {
            write(&a.out.join(format!("roc_{t}.csv")), &curve.to_csv())?;
        }
    }
    write_run_info(&a.out, "compare")?;
    println!("{:<18} {:>8} {:>8} {:>8} {:>8}", "learner", "accuracy", "mcc", "auc", "cv_mean");
    let cell = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"));
    for (name, r) in &report.learners {
        println!(
            "{name:<18} {:>8.4} {:>8} {:>8} {:>8.4}",
            r.accuracy,
            cell(r.mcc),
            cell(r.auc),
            r.mean
        );
    }
    Ok(())
}

fn gridsearch(a: &GridArgs) -> Result<()> {
    let (_, split) = load(&a.data)?;
    let grid = match &a.grid {
        Some(p) => HyperGrid::from_json(
            &fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?,
        )?,
        None => HyperGrid::default_forest(),
    };
    ensure_dir(&a.out)?;
    let (result, winner) = tune_forest(&split, &grid, a.folds)?;
    write(&a.out.join("gridsearch.csv"), &result.to_csv())?;
    write(&a.out.join("best_params.json"), &params_to_json(&result.best_params))?;
    write_run_info(&a.out, "gridsearch")?;
    let (_, eval) = fit_and_evaluate(&winner, &split)?;
    println!("combinations: {} ({} after removing duplicates)", result.raw_combinations, result.table.len());
    for (k, v) in &result.best_params {
        println!("best {k} = {v}");
    }
    println!("best cv mean: {:.4}", result.best_mean_score);
    println!("test accuracy of best: {:.4}", eval.accuracy);
    Ok(())
}

fn spec_from(model: ModelType, seed: u64, params: Option<&Path>) -> Result<LearnerSpec> {
    let base = LearnerSpec::default_for(model, seed);
    match params {
        Some(p) => Ok(apply_combination(&base, &read_params(p)?)?),
        None => Ok(base),
    }
}

fn crossval(a: &CrossvalArgs) -> Result<()> {
    let (data, split) = load(&a.data)?;
    let spec = spec_from(a.model, a.data.seed, a.params.as_deref())?;
    let cv = if a.full {
        let (x, y) = cardiodx_core::data::to_xy(&data.records)?;
        cross_validate(&spec, &x, &y, a.folds, a.data.seed)?
    } else {
        cross_validate(&spec, &split.x_train, &split.y_train, a.folds, a.data.seed)?
    };
    let mut csv = String::from("fold,accuracy\n");
    for (i, s) in cv.fold_scores.iter().enumerate() {
        csv.push_str(&format!("{},{s}\n", i + 1));
        println!("fold {:>2}: {s:.4}", i + 1);
    }
    csv.push_str(&format!("mean,{}\n", cv.mean));
    println!("mean: {:.4}", cv.mean);
    if let Some(dir) = &a.out {
        ensure_dir(dir)?;
        write(&dir.join("crossval.csv"), &csv)?;
        write_run_info(dir, "crossval")?;
    }
    Ok(())
}

fn train(a: &TrainArgs) -> Result<()> {
    let (data, split) = load(&a.data)?;
    let mut spec = spec_from(a.model, a.data.seed, a.params.as_deref())?;
    if let Some(e) = a.epochs {
        match &mut spec.config {
            LearnerConfig::Dnn { train, .. } => train.epochs = e,
            _ => bail!("--epochs applies to the dnn model only"),
        }
    }
    let (model, eval) = fit_and_evaluate(&spec, &split)?;
    let mut metrics = std::collections::BTreeMap::new();
    metrics.insert("accuracy".to_string(), eval.accuracy);
    if a.model != ModelType::LinearSvm {
        metrics.insert("mcc".to_string(), eval.mcc);
        metrics.insert("auc".to_string(), eval.roc.auc);
    }
    let metadata = ModelMetadata {
        trained_at: chrono::Utc::now().to_rfc3339(),
        seed: a.data.seed,
        metrics,
        dataset_fingerprint: data.fingerprint.clone(),
    };
    let envelope = ModelEnvelope::new(model, metadata)?;
    let path = if a.out.is_dir() || a.out.extension().is_none() {
        ensure_dir(&a.out)?;
        a.out.join(format!("{}.{MODEL_EXTENSION}", a.model))
    } else {
        if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
            ensure_dir(parent)?;
        }
        a.out.clone()
    };
    save_model(&envelope, &path)?;
    println!("{} test accuracy {:.4}; saved {}", a.model, eval.accuracy, path.display());
    Ok(())
}

fn sweep(a: &SweepArgs) -> Result<()> {
    let (_, split) = load(&a.data)?;
    let (net_spec, mut cfg) = match LearnerConfig::default_for(ModelType::Dnn) {
        LearnerConfig::Dnn { spec, train } => (spec, train),
        _ => unreachable!("dnn defaults are a dnn config"),
    };
    cfg.seed = a.data.seed;
    if let Some(lr) = a.learning_rate {
        cfg.learning_rate = lr;
    }
    if let Some(b) = a.batch_size {
        cfg.batch_size = b;
    }
    let scaler = cardiodx_core::data::fit_minmax(&split.x_train)?;
    let x_train = scaler.transform(&split.x_train)?;
    let x_test = scaler.transform(&split.x_test)?;
    let rows = epoch_sweep(
        &net_spec,
        (&x_train, &split.y_train),
        (&x_test, &split.y_test),
        &a.epochs,
        &cfg,
    )?;
    ensure_dir(&a.out)?;
    write(&a.out.join("sweep.csv"), &sweep_to_csv(&rows))?;
    write_run_info(&a.out, "sweep-epochs")?;
    for r in &rows {
        println!("epochs {:>5}: train {:.4} test {:.4} loss {:.4}", r.epochs, r.train_accuracy, r.test_accuracy, r.final_loss);
    }
    Ok(())
}

#[derive(Serialize)]
struct ResultRow<'a> {
    patient_id: &'a str,
    label: Option<u8>,
    probability: Option<f64>,
    row_status: RowStatus,
}

fn predict(a: &PredictArgs) -> Result<()> {
    let envelope = load_model(&a.model)?;
    let text = fs::read_to_string(&a.input).with_context(|| format!("cannot read {}", a.input.display()))?;
    let rows = parse_inference_csv(&text)?;
    let ready: Vec<[f64; N_FEATURES]> = rows.iter().filter_map(|r| r.features).collect();
    let mut scored = if ready.is_empty() {
        Vec::new()
    } else {
        let p = envelope.model.predict(&Matrix::from_rows(&ready)?)?;
        p.labels.into_iter().zip(p.scores).collect()
    }
    .into_iter();

    let sink: Box<dyn Write> = match &a.output {
        Some(p) => Box::new(fs::File::create(p).with_context(|| format!("cannot create {}", p.display()))?),
        None => Box::new(std::io::stdout().lock()),
    };
    let mut out = csv::Writer::from_writer(sink);
    for r in &rows {
        let (label, probability) = match r.features {
            Some(_) => scored.next().map(|(l, p)| (Some(l), Some(p))).unwrap_or_default(),
            None => (None, None),
        };
        out.serialize(ResultRow { patient_id: &r.patient_id, label, probability, row_status: r.status })?;
    }
    out.flush()?;
    Ok(())
}

fn serve(a: ServeArgs) -> Result<()> {
    let config = cardiodx_service::ServiceConfig {
        model_path: a.model,
        users_file: a.users,
        bind: a.bind,
        token_ttl: Duration::from_secs(a.token_ttl),
        upload_limit: a.upload_limit,
    };
    let runtime = tokio::runtime::Runtime::new().context("cannot start the async runtime")?;
    runtime.block_on(cardiodx_service::serve(config))?;
    Ok(())
}

/// Appends a credential line for `a.username`, reading the password from the
/// first line of `input`.
pub fn add_user(a: &AddUserArgs, mut input: impl BufRead) -> Result<()> {
    let existing = match fs::read_to_string(&a.users) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => String::new(),
        Err(e) => return Err(e).with_context(|| format!("cannot read {}", a.users.display())),
    };
    UserStore::parse(&existing)?;
    let taken = existing
        .lines()
        .any(|l| l.split(':').next() == Some(a.username.as_str()));
    if taken {
        bail!("user `{}` already exists in {}", a.username, a.users.display());
    }
    let mut password = String::new();
    input.read_line(&mut password).context("cannot read password")?;
    let password = password.trim_end_matches(['\r', '\n']);
    if password.is_empty() {
        bail!("empty password");
    }
    let cred = UserCredential::create(&a.username, password, a.iterations).map_err(anyhow::Error::msg)?;
    let mut file = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(&a.users)
        .with_context(|| format!("cannot open {}", a.users.display()))?;
    if !existing.is_empty() && !existing.ends_with('\n') {
        writeln!(file)?;
    }
    writeln!(file, "{}", cred.to_line())?;
    println!("added user {}", a.username);
    Ok(())
}
