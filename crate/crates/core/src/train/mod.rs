//! Dataset loading, cross-validation, early stopping, grid search and metrics.

mod cv;
mod dataset;
mod early;
mod folds;
pub mod metrics;
mod trainer;

use thiserror::Error;

use crate::descriptors::DescriptorError;
use crate::model::ModelError;
use crate::nn::NnError;

pub use cv::{
    cross_validate, grid_csv, grid_search, worker_pool, CvReport, FoldResult, GridRow, GridSpec,
    DEFAULT_FOLDS,
};
pub use dataset::{load_dataset_csv, prepare, prepare_record, read_dataset, Dataset, Record, Reject, Sample};
pub use early::{early_stopping_check, EarlyStopper};
pub use folds::{stratified_kfold, FoldPlan};
pub use metrics::{
    confusion_at_threshold, mcc, roc_auc, roc_curve, select_threshold, ConfusionMatrix, MetricReport, RocPoint,
    ThresholdChoice,
};
pub use trainer::{
    batches, loss_log_csv, mean_bce, predict, scaled_descriptors, train_fold, EpochRecord, StopReason, TrainConfig,
    TrainOutcome,
};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("dataset is missing the `{0}` column")]
    MissingColumn(String),
    #[error("row {row}: label `{value}` is not 0 or 1")]
    BadLabel { row: usize, value: String },
    #[error("row {row}: duplicate id `{id}`")]
    DuplicateId { row: usize, id: String },
    #[error("{id}: {message}")]
    Featurize { id: String, message: String },
    #[error("{k}-fold split needs at least {k} samples per class (have {positives} positive, {negatives} negative)")]
    TooFewSamples {
        k: usize,
        positives: usize,
        negatives: usize,
    },
    #[error("{probs} predictions but {labels} labels")]
    LengthMismatch { probs: usize, labels: usize },
    #[error("both classes are needed for a ROC curve")]
    SingleClass,
    #[error("grid dimension `{0}` is empty")]
    EmptyGrid(String),
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("training diverged at epoch {epoch} (non-finite loss or weights)")]
    Diverged { epoch: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Descriptor(#[from] DescriptorError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<NnError> for TrainError {
    fn from(e: NnError) -> Self {
        TrainError::Model(ModelError::Nn(e))
    }
}
