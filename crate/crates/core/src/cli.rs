//! `miattn` command-line interface.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use thiserror::Error;

use crate::featurize::featurize;
use crate::model::{load_model, save_model, ModelError, MultiInputModel};
use crate::nn::OptimizerKind;
use crate::report::{extract_attention_weights, map_weights_to_atoms, render_smiles_heatmap, ReportError};
use crate::train::{
    cross_validate, grid_csv, grid_search, load_dataset_csv, loss_log_csv, predict, prepare, prepare_record,
    stratified_kfold, train_fold, worker_pool, Dataset, GridSpec, Record, Sample, TrainConfig, TrainError,
    DEFAULT_FOLDS,
};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::Io { .. } => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Data(_) => "data",
            CliError::Io { .. } => "io",
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Io(source) => CliError::Io {
                context: "dataset".into(),
                source,
            },
            TrainError::InvalidConfig(m) => CliError::Usage(m),
            TrainError::EmptyGrid(m) => CliError::Usage(format!("grid dimension `{m}` is empty")),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Io(source) => CliError::Io {
                context: "model file".into(),
                source,
            },
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<ReportError> for CliError {
    fn from(e: ReportError) -> Self {
        match e {
            ReportError::Io(source) => CliError::Io {
                context: "report".into(),
                source,
            },
            ReportError::Model(m) => m.into(),
            other => CliError::Data(other.to_string()),
        }
    }
}

fn io_err(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> CliError {
    let context = context.into();
    move |source| CliError::Io { context, source }
}

#[derive(Parser, Debug)]
#[command(name = "miattn", version, about = "Multi-input attention network for SMILES bioactivity classification")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write the 150×42 feature matrix of each molecule.
    Featurize(FeaturizeArgs),
    /// Train one model (stratified 80/20 split for early stopping).
    Train(TrainArgs),
    /// Stratified k-fold cross-validation.
    Cv(TrainArgs),
    /// Cross-validate every configuration of the hyperparameter grid.
    Gridsearch(TrainArgs),
    /// Score molecules with a saved model.
    Predict(PredictArgs),
    /// Attention heatmaps for molecules.
    Explain(ExplainArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FeatureFormat {
    Csv,
    Bin,
}

#[derive(Args, Debug)]
pub struct InputArgs {
    /// CSV with `id` and `smiles` columns (`label` optional).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// A single SMILES string.
    #[arg(long, conflicts_with = "data")]
    pub smiles: Option<String>,
    /// Name for a single --smiles input.
    #[arg(long, default_value = "molecule", requires = "smiles")]
    pub name: String,
}

#[derive(Args, Debug)]
pub struct FeaturizeArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: FeatureFormat,
}

#[derive(Args, Debug, Default)]
pub struct TrainArgs {
    /// Dataset CSV with `id,smiles,label`.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// `key=value` file supplying any of these flags; command-line flags win.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub dropout: Option<f64>,
    /// `sgd` or `adam`.
    #[arg(long)]
    pub opt: Option<String>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub max_epochs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub folds: Option<usize>,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// CSV with `id,smiles` (a `label` column is ignored).
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides the threshold stored in the model.
    #[arg(long)]
    pub threshold: Option<f64>,
}

#[derive(Args, Debug)]
pub struct ExplainArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn required<T: Clone>(v: &Option<T>, flag: &str) -> Result<T, CliError> {
    v.clone()
        .ok_or_else(|| CliError::Usage(format!("missing required option --{flag}")))
}

/// Parses a `key=value` config file; blank lines and `#` comments are skipped.
pub fn read_config_file(path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let text = std::fs::read_to_string(path).map_err(io_err(format!("config {}", path.display())))?;
    let mut out = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("{}:{}: expected key=value", path.display(), n + 1)))?;
        out.insert(k.trim().replace('_', "-"), v.trim().to_string());
    }
    Ok(out)
}

const CONFIG_KEYS: &[&str] = &[
    "data", "out", "batch", "dropout", "opt", "lr", "threshold", "patience", "max-epochs", "seed", "folds",
];

/// Fully resolved options of a training-type command.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub data: PathBuf,
    pub out: PathBuf,
    pub train: TrainConfig,
    pub folds: usize,
}

impl TrainArgs {
    /// Merges command-line flags over the config file over defaults.
    pub fn resolve(&self) -> Result<Resolved, CliError> {
        let file = match &self.config {
            Some(p) => read_config_file(p)?,
            None => BTreeMap::new(),
        };
        if let Some(k) = file.keys().find(|k| !CONFIG_KEYS.contains(&k.as_str())) {
            return Err(CliError::Usage(format!("unknown config key `{k}`")));
        }
        fn pick<T: std::str::FromStr + Clone>(
            flag: &Option<T>,
            file: &BTreeMap<String, String>,
            key: &str,
            default: T,
        ) -> Result<T, CliError> {
            if let Some(v) = flag {
                return Ok(v.clone());
            }
            match file.get(key) {
                Some(s) => s
                    .parse()
                    .map_err(|_| CliError::Usage(format!("config `{key}`: cannot parse `{s}`"))),
                None => Ok(default),
            }
        }
        let d = TrainConfig::default();
        let opt_name: String = pick(&self.opt, &file, "opt", d.optimizer.name().to_string())?;
        let optimizer = OptimizerKind::parse(&opt_name)
            .ok_or_else(|| CliError::Usage(format!("unknown optimizer `{opt_name}` (use sgd or adam)")))?;
        let train = TrainConfig {
            batch_size: pick(&self.batch, &file, "batch", d.batch_size)?,
            dropout: pick(&self.dropout, &file, "dropout", d.dropout)?,
            optimizer,
            learning_rate: pick(&self.lr, &file, "lr", d.learning_rate)?,
            threshold: pick(&self.threshold, &file, "threshold", d.threshold)?,
            patience: pick(&self.patience, &file, "patience", d.patience)?,
            max_epochs: pick(&self.max_epochs, &file, "max-epochs", d.max_epochs)?,
            seed: pick(&self.seed, &file, "seed", d.seed)?,
            target_train_loss: None,
        };
        train.validate()?;
        let data = pick(&self.data.clone().map(|p| p.display().to_string()), &file, "data", String::new())?;
        let out = pick(&self.out.clone().map(|p| p.display().to_string()), &file, "out", String::new())?;
        if data.is_empty() {
            return Err(CliError::Usage("missing required option --data".into()));
        }
        if out.is_empty() {
            return Err(CliError::Usage("missing required option --out".into()));
        }
        let folds = pick(&self.folds, &file, "folds", DEFAULT_FOLDS)?;
        if folds < 2 {
            return Err(CliError::Usage("--folds must be at least 2".into()));
        }
        Ok(Resolved {
            data: PathBuf::from(data),
            out: PathBuf::from(out),
            train,
            folds,
        })
    }
}

/// Provenance carried by every artifact.
#[derive(Clone, Debug, Serialize)]
pub struct Provenance {
    pub tool_version: &'static str,
    pub seed: u64,
    pub config_hash: String,
    pub dataset_rows: usize,
}

impl Provenance {
    pub fn new(seed: u64, config_hash: String, dataset_rows: usize) -> Provenance {
        Provenance {
            tool_version: TOOL_VERSION,
            seed,
            config_hash,
            dataset_rows,
        }
    }

    pub fn pairs(&self) -> Vec<(String, String)> {
        vec![
            ("tool_version".into(), self.tool_version.into()),
            ("seed".into(), self.seed.to_string()),
            ("config_hash".into(), self.config_hash.clone()),
            ("dataset_rows".into(), self.dataset_rows.to_string()),
        ]
    }

    /// `# key=value` lines for the top of CSV artifacts.
    pub fn csv_header(&self) -> String {
        self.pairs().iter().map(|(k, v)| format!("# {k}={v}\n")).collect()
    }
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(io_err(format!("create {}", dir.display())))
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(io_err(format!("write {}", path.display())))
}

fn load_training_data(path: &Path) -> Result<(Dataset, Vec<Sample>), CliError> {
    let ds = load_dataset_csv(path)?;
    for r in &ds.rejects {
        eprintln!("skip row={} id={} reason={}", r.row, r.id, r.reason);
    }
    if ds.is_empty() {
        return Err(CliError::Data(format!("{}: no usable rows", path.display())));
    }
    let samples = prepare(&ds)?;
    Ok((ds, samples))
}

/// Records of an unlabelled (or labelled) input CSV or a single SMILES.
fn read_inputs(input: &InputArgs) -> Result<Vec<Record>, CliError> {
    if let Some(s) = &input.smiles {
        return Ok(vec![Record {
            id: input.name.clone(),
            smiles: s.clone(),
            label: 0.0,
        }]);
    }
    let path = input
        .data
        .as_ref()
        .ok_or_else(|| CliError::Usage("one of --data or --smiles is required".into()))?;
    read_id_smiles(path)
}

fn read_id_smiles(path: &Path) -> Result<Vec<Record>, CliError> {
    let file = std::fs::File::open(path).map_err(io_err(format!("open {}", path.display())))?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let data_err = |e: csv::Error| CliError::Data(format!("{}: {e}", path.display()));
    let headers = rdr.headers().map_err(data_err)?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| CliError::Data(format!("{}: missing `{name}` column", path.display())))
    };
    let (ci, cs) = (col("id")?, col("smiles")?);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(data_err)?;
        out.push(Record {
            id: rec.get(ci).unwrap_or("").to_string(),
            smiles: rec.get(cs).unwrap_or("").to_string(),
            label: 0.0,
        });
    }
    Ok(out)
}

/// Keeps ids usable as file names.
fn file_stem(id: &str) -> String {
    let s: String = id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' })
        .collect();
    if s.is_empty() || s.starts_with('.') {
        format!("_{s}")
    } else {
        s
    }
}

fn cmd_featurize(a: &FeaturizeArgs) -> Result<(), CliError> {
    let records = read_inputs(&a.input)?;
    ensure_dir(&a.out)?;
    let prov = Provenance::new(0, "none".into(), records.len());
    let mut matrices = Vec::with_capacity(records.len());
    for r in &records {
        let (_, m) = featurize(&r.smiles).map_err(|e| CliError::Data(format!("{}: {e}", r.id)))?;
        matrices.push(m);
    }
    match a.format {
        FeatureFormat::Csv => {
            for (r, m) in records.iter().zip(&matrices) {
                let mut text = prov.csv_header();
                text.push_str(&format!("# id={}\n# smiles={}\n# valid_rows={}\n", r.id, r.smiles, m.valid_rows));
                text.push_str(&m.to_csv());
                write(&a.out.join(format!("{}.csv", file_stem(&r.id))), text)?;
            }
        }
        FeatureFormat::Bin => {
            let mut bytes = Vec::new();
            let mut index = prov.csv_header();
            index.push_str("index,id,smiles,valid_rows\n");
            for (i, (r, m)) in records.iter().zip(&matrices).enumerate() {
                bytes.extend(m.to_le_bytes());
                index.push_str(&format!("{i},{},{},{}\n", csv_field(&r.id), csv_field(&r.smiles), m.valid_rows));
            }
            write(&a.out.join("features.bin"), bytes)?;
            write(&a.out.join("features.index.csv"), index)?;
        }
    }
    println!("featurized={}", records.len());
    Ok(())
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn cmd_train(a: &TrainArgs) -> Result<(), CliError> {
    let cfg = a.resolve()?;
    let (ds, samples) = load_training_data(&cfg.data)?;
    ensure_dir(&cfg.out)?;
    let labels = ds.labels();
    let plan = stratified_kfold(&labels, cfg.folds, cfg.train.seed)?;
    let val_idx = &plan.test[0];
    let train: Vec<&Sample> = plan.train_indices(0).iter().map(|&i| &samples[i]).collect();
    let val: Vec<&Sample> = val_idx.iter().map(|&i| &samples[i]).collect();
    let outcome = worker_pool().install(|| train_fold(&train, &val, &cfg.train))?;
    let prov = Provenance::new(cfg.train.seed, cfg.train.hash(), ds.len());
    let mut model = outcome.model;
    model.provenance = prov.pairs().into_iter().collect();
    model
        .provenance
        .insert("train_config".into(), cfg.train.canonical().trim_end().replace('\n', ";"));
    save_model(&model, cfg.out.join("model.miattn"))?;
    let mut log = prov.csv_header();
    log.push_str(&loss_log_csv(&outcome.epochs));
    write(&cfg.out.join("loss_log.csv"), log)?;
    println!(
        "class_ratio={} epochs={} best_epoch={} best_val_loss={}",
        ds.class_ratio_report(),
        outcome.epochs.len(),
        outcome.best_epoch,
        outcome.best_val_loss
    );
    Ok(())
}

#[derive(Serialize)]
struct CvDoc<'a> {
    provenance: &'a Provenance,
    config: &'a TrainConfig,
    class_ratio: String,
    report: &'a crate::train::CvReport,
}

fn cmd_cv(a: &TrainArgs) -> Result<(), CliError> {
    let cfg = a.resolve()?;
    let (ds, samples) = load_training_data(&cfg.data)?;
    ensure_dir(&cfg.out)?;
    let report = worker_pool().install(|| cross_validate(&samples, &cfg.train, cfg.folds))?;
    let prov = Provenance::new(cfg.train.seed, cfg.train.hash(), ds.len());
    let mut csv = prov.csv_header();
    csv.push_str(&report.to_csv());
    write(&cfg.out.join("cv_report.csv"), csv)?;
    let doc = CvDoc {
        provenance: &prov,
        config: &cfg.train,
        class_ratio: ds.class_ratio_report(),
        report: &report,
    };
    let mut json = serde_json::to_string_pretty(&doc).expect("serializable");
    json.push('\n');
    write(&cfg.out.join("cv_report.json"), json)?;
    let m = &report.mean;
    println!(
        "folds={} mcc={} auc={} sensitivity={} specificity={} accuracy={} loss={}",
        report.k, m.mcc, m.auc, m.sensitivity, m.specificity, m.accuracy, m.loss
    );
    Ok(())
}

fn cmd_gridsearch(a: &TrainArgs) -> Result<(), CliError> {
    let cfg = a.resolve()?;
    let (ds, samples) = load_training_data(&cfg.data)?;
    ensure_dir(&cfg.out)?;
    let grid = GridSpec::default();
    let rows = worker_pool().install(|| grid_search(&samples, &grid, &cfg.train, cfg.folds))?;
    let prov = Provenance::new(cfg.train.seed, cfg.train.hash(), ds.len());
    let mut csv = prov.csv_header();
    csv.push_str(&grid_csv(&rows));
    write(&cfg.out.join("grid_report.csv"), csv)?;
    #[derive(Serialize)]
    struct GridDoc<'a> {
        provenance: &'a Provenance,
        rows: &'a [crate::train::GridRow],
    }
    let mut json = serde_json::to_string_pretty(&GridDoc {
        provenance: &prov,
        rows: &rows,
    })
    .expect("serializable");
    json.push('\n');
    write(&cfg.out.join("grid_report.json"), json)?;
    if let Some(best) = rows.first() {
        println!(
            "configs={} best_batch={} best_dropout={} best_opt={} best_lr={} best_threshold={} best_mcc={}",
            rows.len(),
            best.batch_size,
            best.dropout,
            best.optimizer,
            best.learning_rate,
            best.threshold,
            best.mean.mcc
        );
    }
    Ok(())
}

fn model_provenance(model: &MultiInputModel, rows: usize) -> Provenance {
    let hash = model.provenance.get("config_hash").cloned().unwrap_or_else(|| "none".into());
    Provenance::new(model.seed, hash, rows)
}

fn cmd_predict(a: &PredictArgs) -> Result<(), CliError> {
    let model_path = required(&a.model, "model")?;
    let data = required(&a.data, "data")?;
    let out = required(&a.out, "out")?;
    let model = load_model(&model_path)?;
    let threshold = a.threshold.unwrap_or(model.config.threshold);
    if !(0.0..=1.0).contains(&threshold) {
        return Err(CliError::Usage(format!("threshold {threshold} outside [0, 1]")));
    }
    let records = read_id_smiles(&data)?;
    let samples = records
        .iter()
        .map(prepare_record)
        .collect::<Result<Vec<_>, _>>()?;
    let refs: Vec<&Sample> = samples.iter().collect();
    let probs = worker_pool().install(|| predict(&model, &refs))?;
    ensure_dir(&out)?;
    let prov = model_provenance(&model, records.len());
    let mut csv = prov.csv_header();
    csv.push_str(&format!("# threshold={threshold}\nid,probability,label\n"));
    for (r, p) in records.iter().zip(&probs) {
        csv.push_str(&format!("{},{},{}\n", csv_field(&r.id), p, u8::from(*p >= threshold)));
    }
    write(&out.join("predictions.csv"), csv)?;
    println!("predicted={}", records.len());
    Ok(())
}

fn cmd_explain(a: &ExplainArgs) -> Result<(), CliError> {
    let model_path = required(&a.model, "model")?;
    let out = required(&a.out, "out")?;
    let model = load_model(&model_path)?;
    let records = read_inputs(&a.input)?;
    ensure_dir(&out)?;
    let meta = model_provenance(&model, records.len()).pairs();
    for r in &records {
        let (map, g) = extract_attention_weights(&model, &r.smiles)
            .map_err(|e| CliError::Data(format!("{}: {e}", r.id)))?;
        let atoms = map_weights_to_atoms(&map, &g)?;
        render_smiles_heatmap(&map, &atoms, &meta, &out, &file_stem(&r.id))?;
    }
    println!("explained={}", records.len());
    Ok(())
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Featurize(a) => cmd_featurize(a),
        Command::Train(a) => cmd_train(a),
        Command::Cv(a) => cmd_cv(a),
        Command::Gridsearch(a) => cmd_gridsearch(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Explain(a) => cmd_explain(a),
    }
}

/// Parses `args`, runs the command and maps failures to exit codes
/// (2 usage, 3 data, 4 I/O).
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.kind());
            ExitCode::from(e.exit_code())
        }
    }
}
