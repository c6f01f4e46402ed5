/// Patience counter over validation losses: stops once `patience` consecutive epochs
/// pass without a strictly lower loss than the best so far.
#[derive(Clone, Debug, PartialEq)]
pub struct EarlyStopper {
    pub patience: usize,
    best: f64,
    best_epoch: usize,
    epoch: usize,
}

impl EarlyStopper {
    pub fn new(patience: usize) -> EarlyStopper {
        EarlyStopper {
            patience,
            best: f64::INFINITY,
            best_epoch: 0,
            epoch: 0,
        }
    }

    /// Records the next epoch's loss (epochs are numbered from 1). Returns `true` when
    /// training should stop.
    pub fn observe(&mut self, loss: f64) -> bool {
        self.epoch += 1;
        if loss < self.best || self.best_epoch == 0 {
            self.best = loss;
            self.best_epoch = self.epoch;
        }
        self.epochs_since_best() >= self.patience
    }

    /// True when the last observed epoch set a new best.
    pub fn improved(&self) -> bool {
        self.best_epoch == self.epoch && self.epoch > 0
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub fn best_loss(&self) -> f64 {
        self.best
    }

    pub fn epochs_since_best(&self) -> usize {
        self.epoch - self.best_epoch
    }
}

/// Whether training should stop after the last of `val_losses`.
pub fn early_stopping_check(val_losses: &[f64], patience: usize) -> bool {
    let mut s = EarlyStopper::new(patience);
    val_losses.iter().map(|&l| s.observe(l)).last().unwrap_or(false)
}
