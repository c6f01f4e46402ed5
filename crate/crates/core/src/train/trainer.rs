use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::dataset::Sample;
use super::early::EarlyStopper;
use super::TrainError;
use crate::descriptors::{apply_scaler, fit_scaler, DescriptorVector, ScalerParams};
use crate::featurize::{FEATURE_COLS, MAX_ROWS};
use crate::model::{ModelConfig, MultiInputModel};
use crate::nn::{bce_batch, bce_loss, ForwardCtx, Mode, OptimizerKind, OptimizerState, Tensor};

/// Samples per eval-mode inference call.
const INFER_CHUNK: usize = 256;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub dropout: f64,
    #[serde(serialize_with = "ser_optimizer")]
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub threshold: f64,
    pub patience: usize,
    pub max_epochs: usize,
    pub seed: u64,
    /// Stop as soon as the epoch's mean training loss falls below this value.
    pub target_train_loss: Option<f64>,
}

fn ser_optimizer<S: serde::Serializer>(k: &OptimizerKind, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(k.name())
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 128,
            dropout: 0.5,
            optimizer: OptimizerKind::Adam,
            learning_rate: 1e-5,
            threshold: 0.2,
            patience: 30,
            max_epochs: 1000,
            seed: 0,
            target_train_loss: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: String| Err(TrainError::InvalidConfig(m));
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout {} outside [0, 1)", self.dropout));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate {} must be positive", self.learning_rate));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return bad(format!("threshold {} outside [0, 1]", self.threshold));
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be positive".into());
        }
        Ok(())
    }

    /// Canonical `key=value` lines; the basis of [`hash`](Self::hash).
    pub fn canonical(&self) -> String {
        let target = self.target_train_loss.map_or("none".to_string(), |t| t.to_string());
        format!(
            "batch_size={}\ndropout={}\noptimizer={}\nlearning_rate={}\nthreshold={}\npatience={}\nmax_epochs={}\nseed={}\ntarget_train_loss={}\n",
            self.batch_size,
            self.dropout,
            self.optimizer.name(),
            self.learning_rate,
            self.threshold,
            self.patience,
            self.max_epochs,
            self.seed,
            target
        )
    }

    /// CRC32 of the canonical form, as 8 hex digits.
    pub fn hash(&self) -> String {
        format!("{:08x}", crc32fast::hash(self.canonical().as_bytes()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Patience,
    MaxEpochs,
    TargetReached,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Weights from the epoch with the lowest validation loss.
    pub model: MultiInputModel,
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub stop: StopReason,
}

/// Scaled descriptor rows as one `[N, width]` tensor.
pub fn scaled_descriptors(descs: &[&DescriptorVector], scaler: &ScalerParams) -> Result<Tensor, TrainError> {
    let width = scaler.kept_count();
    let mut data = Vec::with_capacity(descs.len() * width);
    for d in descs {
        data.extend(apply_scaler(d, scaler)?.values);
    }
    Ok(Tensor::new(&[descs.len(), width], data)?)
}

fn batch_tensors(samples: &[&Sample], idx: &[usize], scaled: &Tensor) -> Result<(Tensor, Tensor, Vec<f64>), TrainError> {
    let width = scaled.shape()[1];
    let mut r = Vec::with_capacity(idx.len() * MAX_ROWS * FEATURE_COLS);
    let mut d = Vec::with_capacity(idx.len() * width);
    let mut y = Vec::with_capacity(idx.len());
    for &i in idx {
        r.extend_from_slice(&samples[i].features);
        d.extend_from_slice(&scaled.data[i * width..(i + 1) * width]);
        y.push(samples[i].label);
    }
    Ok((
        Tensor::new(&[idx.len(), MAX_ROWS, FEATURE_COLS], r)?,
        Tensor::new(&[idx.len(), width], d)?,
        y,
    ))
}

/// Mini-batch index lists; a trailing batch of one joins the previous batch because
/// batch statistics are degenerate for a single sample.
pub fn batches(order: &[usize], size: usize) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = order.chunks(size).map(<[usize]>::to_vec).collect();
    if out.len() > 1 && out.last().is_some_and(|b| b.len() == 1) {
        let last = out.pop().expect("len > 1");
        out.last_mut().expect("len > 0").extend(last);
    }
    out
}

/// Eval-mode probabilities for `samples`, using the model's own scaler.
pub fn predict(model: &MultiInputModel, samples: &[&Sample]) -> Result<Vec<f64>, TrainError> {
    let descs: Vec<&DescriptorVector> = samples.iter().map(|s| &s.descriptors).collect();
    let scaled = scaled_descriptors(&descs, &model.scaler)?;
    let all: Vec<usize> = (0..samples.len()).collect();
    let mut out = Vec::with_capacity(samples.len());
    for chunk in all.chunks(INFER_CHUNK) {
        let (r, d, _) = batch_tensors(samples, chunk, &scaled)?;
        out.extend(model.infer(&r, &d)?.probabilities);
    }
    Ok(out)
}

pub fn mean_bce(probs: &[f64], labels: &[f64]) -> Result<f64, TrainError> {
    let mut total = 0.0;
    for (&p, &y) in probs.iter().zip(labels) {
        total += bce_loss(p, y)?;
    }
    Ok(total / probs.len().max(1) as f64)
}

/// Trains one model on `train`, early-stopping on the loss over `val`.
///
/// The descriptor scaler is fitted on `train` only. Shuffling and dropout draw from
/// separate streams of a generator seeded with `cfg.seed`.
pub fn train_fold(train: &[&Sample], val: &[&Sample], cfg: &TrainConfig) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    if train.len() < 2 || val.is_empty() {
        return Err(TrainError::InvalidConfig(format!(
            "need at least 2 training and 1 validation samples, got {} and {}",
            train.len(),
            val.len()
        )));
    }
    let train_desc: Vec<DescriptorVector> = train.iter().map(|s| s.descriptors.clone()).collect();
    let scaler = fit_scaler(&train_desc)?;
    let mut config = ModelConfig::new(scaler.kept_count(), cfg.dropout);
    config.threshold = cfg.threshold;
    let mut model = MultiInputModel::new(config, scaler, cfg.seed)?;

    let refs: Vec<&DescriptorVector> = train_desc.iter().collect();
    let scaled = scaled_descriptors(&refs, &model.scaler)?;
    let val_labels: Vec<f64> = val.iter().map(|s| s.label).collect();

    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    shuffle_rng.set_stream(1);
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    dropout_rng.set_stream(2);
    let mut opt = OptimizerState::new(cfg.optimizer, cfg.learning_rate);
    let mut stopper = EarlyStopper::new(cfg.patience);
    let mut best = model.snapshot();
    let mut epochs = Vec::new();
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut stop = StopReason::MaxEpochs;

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut shuffle_rng);
        let mut batch_losses = Vec::new();
        for idx in batches(&order, cfg.batch_size) {
            let (r, d, y) = batch_tensors(train, &idx, &scaled)?;
            model.zero_grad();
            let out = model.forward(&r, &d, &mut ForwardCtx::new(Mode::Train, &mut dropout_rng))?;
            let (loss, grad) = bce_batch(&out.probabilities, &y)?;
            model.backward(&grad)?;
            opt.step(&mut model.params_mut())?;
            batch_losses.push(loss);
        }
        let train_loss = batch_losses.iter().sum::<f64>() / batch_losses.len() as f64;
        let val_probs = predict(&model, val)?;
        let val_loss = mean_bce(&val_probs, &val_labels)?;
        if !train_loss.is_finite() || !model.is_finite() {
            return Err(TrainError::Diverged { epoch });
        }
        epochs.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
        });
        let patience_hit = stopper.observe(val_loss);
        if stopper.improved() {
            best = model.snapshot();
        }
        if cfg.target_train_loss.is_some_and(|t| train_loss < t) {
            stop = StopReason::TargetReached;
            break;
        }
        if patience_hit {
            stop = StopReason::Patience;
            break;
        }
    }
    let mut frozen = model.frozen();
    frozen.restore(&best)?;
    Ok(TrainOutcome {
        model: frozen,
        epochs,
        best_epoch: stopper.best_epoch(),
        best_val_loss: stopper.best_loss(),
        stop,
    })
}

/// Epoch log as `epoch,train_loss,val_loss` CSV.
pub fn loss_log_csv(epochs: &[EpochRecord]) -> String {
    let mut out = String::from("epoch,train_loss,val_loss\n");
    for e in epochs {
        out.push_str(&format!("{},{},{}\n", e.epoch, e.train_loss, e.val_loss));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn batch_remainder_merges() {
        let order: Vec<usize> = (0..9).collect();
        let b = batches(&order, 4);
        assert_eq!(b.len(), 2);
        assert_eq!(b[1].len(), 5);
        assert_eq!(batches(&order, 3).len(), 3);
        assert_eq!(batches(&[0], 4), vec![vec![0]]);
    }

    #[test]
    fn config_hash_tracks_values() {
        let a = TrainConfig::default();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.seed = 1;
        assert_ne!(a.hash(), b.hash());
    }
}
