use rayon::prelude::*;
use serde::Serialize;

use super::dataset::Sample;
use super::folds::{stratified_kfold, FoldPlan};
use super::metrics::{roc_auc, select_threshold, MetricReport, ThresholdChoice};
use super::trainer::{predict, train_fold, EpochRecord, StopReason, TrainConfig};
use super::TrainError;
use crate::model::MultiInputModel;
use crate::nn::OptimizerKind;

pub const DEFAULT_FOLDS: usize = 5;

#[derive(Clone, Debug, Serialize)]
pub struct FoldResult {
    pub fold: usize,
    pub seed: u64,
    pub train_size: usize,
    pub test_size: usize,
    pub epochs_trained: usize,
    pub best_epoch: usize,
    pub stop: StopReason,
    pub metrics: MetricReport,
    /// ROC operating point nearest the top-left corner on this fold.
    pub roc_threshold: Option<ThresholdChoice>,
    #[serde(skip)]
    pub epochs: Vec<EpochRecord>,
    /// Held-out dataset indices and their predicted probabilities.
    #[serde(skip)]
    pub predictions: Vec<(usize, f64)>,
    /// The fold's best-validation-loss model.
    #[serde(skip)]
    pub model: MultiInputModel,
}

#[derive(Clone, Debug, Serialize)]
pub struct CvReport {
    pub k: usize,
    pub threshold: f64,
    pub folds: Vec<FoldResult>,
    pub mean: MetricReport,
}

/// Rayon pool sized by `MIATTN_THREADS` (default: all logical cores).
pub fn worker_pool() -> rayon::ThreadPool {
    let n = std::env::var("MIATTN_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .expect("thread pool")
}

fn metrics_at(fold: &FoldResult, labels: &[f64], threshold: f64) -> Result<MetricReport, TrainError> {
    let probs: Vec<f64> = fold.predictions.iter().map(|&(_, p)| p).collect();
    let ys: Vec<f64> = fold.predictions.iter().map(|&(i, _)| labels[i]).collect();
    MetricReport::evaluate(&probs, &ys, threshold, fold.metrics.loss)
}

fn run_fold(samples: &[Sample], plan: &FoldPlan, fold: usize, cfg: &TrainConfig) -> Result<FoldResult, TrainError> {
    let train_idx = plan.train_indices(fold);
    let test_idx = &plan.test[fold];
    let train: Vec<&Sample> = train_idx.iter().map(|&i| &samples[i]).collect();
    let test: Vec<&Sample> = test_idx.iter().map(|&i| &samples[i]).collect();
    let fold_cfg = TrainConfig {
        seed: cfg.seed.wrapping_add(fold as u64),
        ..cfg.clone()
    };
    // the held-out fold also serves as the early-stopping validation set
    let outcome = train_fold(&train, &test, &fold_cfg)?;
    let probs = predict(&outcome.model, &test)?;
    let labels: Vec<f64> = test.iter().map(|s| s.label).collect();
    let metrics = MetricReport::evaluate(&probs, &labels, cfg.threshold, outcome.best_val_loss)?;
    let (points, _) = roc_auc(&probs, &labels)?;
    Ok(FoldResult {
        fold,
        seed: fold_cfg.seed,
        train_size: train.len(),
        test_size: test.len(),
        epochs_trained: outcome.epochs.len(),
        best_epoch: outcome.best_epoch,
        stop: outcome.stop,
        metrics,
        roc_threshold: select_threshold(&points),
        epochs: outcome.epochs,
        predictions: test_idx.iter().copied().zip(probs).collect(),
        model: outcome.model,
    })
}

/// Stratified k-fold cross-validation. Folds train in parallel on the current rayon pool;
/// results are reduced in fold order.
pub fn cross_validate(samples: &[Sample], cfg: &TrainConfig, k: usize) -> Result<CvReport, TrainError> {
    cfg.validate()?;
    let labels: Vec<f64> = samples.iter().map(|s| s.label).collect();
    let plan = stratified_kfold(&labels, k, cfg.seed)?;
    let folds = (0..k)
        .into_par_iter()
        .map(|f| run_fold(samples, &plan, f, cfg))
        .collect::<Result<Vec<_>, _>>()?;
    let mean = MetricReport::mean(&folds.iter().map(|f| f.metrics).collect::<Vec<_>>());
    Ok(CvReport {
        k,
        threshold: cfg.threshold,
        folds,
        mean,
    })
}

impl CvReport {
    /// Mean metrics re-evaluated at another threshold from the stored probabilities.
    pub fn mean_at(&self, samples: &[Sample], threshold: f64) -> Result<MetricReport, TrainError> {
        let labels: Vec<f64> = samples.iter().map(|s| s.label).collect();
        let per_fold = self
            .folds
            .iter()
            .map(|f| metrics_at(f, &labels, threshold))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(MetricReport::mean(&per_fold))
    }

    /// Per-fold metrics as CSV with a trailing `mean` row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "fold,seed,train_size,test_size,epochs_trained,best_epoch,stop,threshold,loss,sensitivity,specificity,accuracy,mcc,auc,roc_threshold\n",
        );
        let stop_name = |s: StopReason| match s {
            StopReason::Patience => "patience",
            StopReason::MaxEpochs => "max_epochs",
            StopReason::TargetReached => "target_reached",
        };
        let metrics = |m: &MetricReport| {
            format!(
                "{},{},{},{},{},{}",
                m.loss, m.sensitivity, m.specificity, m.accuracy, m.mcc, m.auc
            )
        };
        for f in &self.folds {
            let roc = f.roc_threshold.map_or(String::new(), |t| t.threshold.to_string());
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                f.fold,
                f.seed,
                f.train_size,
                f.test_size,
                f.epochs_trained,
                f.best_epoch,
                stop_name(f.stop),
                self.threshold,
                metrics(&f.metrics),
                roc
            ));
        }
        out.push_str(&format!(
            "mean,,,,,,,{},{},\n",
            self.threshold,
            metrics(&self.mean)
        ));
        out
    }
}

/// Hyperparameter grid; thresholds are applied to stored probabilities, not retrained.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    pub batch_sizes: Vec<usize>,
    pub dropouts: Vec<f64>,
    pub optimizers: Vec<OptimizerKind>,
    pub learning_rates: Vec<f64>,
    pub thresholds: Vec<f64>,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            batch_sizes: vec![32, 64, 128, 512],
            dropouts: vec![0.0, 0.2, 0.5],
            optimizers: vec![OptimizerKind::Sgd, OptimizerKind::Adam],
            learning_rates: vec![1e-4, 1e-5, 1e-6],
            thresholds: vec![0.2, 0.5, 0.8],
        }
    }
}

impl GridSpec {
    /// Every training configuration, batch size varying slowest.
    pub fn configs(&self, base: &TrainConfig) -> Result<Vec<TrainConfig>, TrainError> {
        let dims = [
            ("batch_size", self.batch_sizes.len()),
            ("dropout", self.dropouts.len()),
            ("optimizer", self.optimizers.len()),
            ("learning_rate", self.learning_rates.len()),
            ("threshold", self.thresholds.len()),
        ];
        if let Some((name, _)) = dims.iter().find(|(_, n)| *n == 0) {
            return Err(TrainError::EmptyGrid(name.to_string()));
        }
        let mut out = Vec::new();
        for &batch_size in &self.batch_sizes {
            for &dropout in &self.dropouts {
                for &optimizer in &self.optimizers {
                    for &learning_rate in &self.learning_rates {
                        out.push(TrainConfig {
                            batch_size,
                            dropout,
                            optimizer,
                            learning_rate,
                            ..base.clone()
                        });
                    }
                }
            }
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct GridRow {
    pub rank: usize,
    pub batch_size: usize,
    pub dropout: f64,
    pub optimizer: &'static str,
    pub learning_rate: f64,
    /// Grid threshold with the highest mean MCC for this configuration.
    pub threshold: f64,
    pub mean: MetricReport,
}

/// Cross-validates every grid configuration and ranks them by mean MCC at each
/// configuration's best threshold (ties keep enumeration order).
pub fn grid_search(samples: &[Sample], grid: &GridSpec, base: &TrainConfig, k: usize) -> Result<Vec<GridRow>, TrainError> {
    let configs = grid.configs(base)?;
    let mut rows = Vec::with_capacity(configs.len());
    for cfg in &configs {
        let report = cross_validate(samples, cfg, k)?;
        let mut best: Option<(f64, MetricReport)> = None;
        for &t in &grid.thresholds {
            let m = report.mean_at(samples, t)?;
            if best.is_none_or(|(bt, b)| m.mcc > b.mcc || (m.mcc == b.mcc && t > bt)) {
                best = Some((t, m));
            }
        }
        let (threshold, mean) = best.expect("thresholds non-empty");
        rows.push(GridRow {
            rank: 0,
            batch_size: cfg.batch_size,
            dropout: cfg.dropout,
            optimizer: cfg.optimizer.name(),
            learning_rate: cfg.learning_rate,
            threshold,
            mean,
        });
    }
    rows.sort_by(|a, b| b.mean.mcc.total_cmp(&a.mean.mcc));
    for (i, r) in rows.iter_mut().enumerate() {
        r.rank = i + 1;
    }
    Ok(rows)
}

pub fn grid_csv(rows: &[GridRow]) -> String {
    let mut out =
        String::from("rank,batch_size,dropout,optimizer,learning_rate,threshold,loss,sensitivity,specificity,accuracy,mcc,auc\n");
    for r in rows {
        let m = &r.mean;
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.rank,
            r.batch_size,
            r.dropout,
            r.optimizer,
            r.learning_rate,
            r.threshold,
            m.loss,
            m.sensitivity,
            m.specificity,
            m.accuracy,
            m.mcc,
            m.auc
        ));
    }
    out
}
