use serde::Serialize;

use super::TrainError;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    /// True positive rate (recall).
    pub fn sensitivity(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn specificity(&self) -> f64 {
        ratio(self.tn, self.tn + self.fp)
    }

    pub fn accuracy(&self) -> f64 {
        ratio(self.tp + self.tn, self.total())
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn false_positive_rate(&self) -> f64 {
        ratio(self.fp, self.fp + self.tn)
    }
}

/// `num / den`, or 0 for an empty denominator.
fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn check_lengths(probs: &[f64], labels: &[f64]) -> Result<(), TrainError> {
    if probs.len() != labels.len() {
        return Err(TrainError::LengthMismatch {
            probs: probs.len(),
            labels: labels.len(),
        });
    }
    Ok(())
}

/// Counts outcomes, predicting positive when `p >= threshold`.
pub fn confusion_at_threshold(probs: &[f64], labels: &[f64], threshold: f64) -> Result<ConfusionMatrix, TrainError> {
    check_lengths(probs, labels)?;
    let mut c = ConfusionMatrix::default();
    for (&p, &y) in probs.iter().zip(labels) {
        match (p >= threshold, y == 1.0) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c)
}

/// Matthews correlation coefficient; 0 when any marginal sum is zero.
pub fn mcc(c: &ConfusionMatrix) -> f64 {
    let (tp, tn, fp, fn_) = (c.tp as f64, c.tn as f64, c.fp as f64, c.fn_ as f64);
    let den = (tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_);
    if den == 0.0 {
        return 0.0;
    }
    (tp * tn - fp * fn_) / den.sqrt()
}

/// One operating point; `threshold` is `+inf` for the all-negative origin.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub confusion: ConfusionMatrix,
}

impl RocPoint {
    pub fn fpr(&self) -> f64 {
        self.confusion.false_positive_rate()
    }

    pub fn tpr(&self) -> f64 {
        self.confusion.sensitivity()
    }
}

/// ROC points at every distinct score, from the strictest threshold down.
pub fn roc_curve(probs: &[f64], labels: &[f64]) -> Result<Vec<RocPoint>, TrainError> {
    check_lengths(probs, labels)?;
    let pos = labels.iter().filter(|&&y| y == 1.0).count() as u64;
    let neg = labels.len() as u64 - pos;
    if pos == 0 || neg == 0 {
        return Err(TrainError::SingleClass);
    }
    let mut order: Vec<usize> = (0..probs.len()).collect();
    order.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]));
    let mut c = ConfusionMatrix {
        tp: 0,
        tn: neg,
        fp: 0,
        fn_: pos,
    };
    let mut points = vec![RocPoint {
        threshold: f64::INFINITY,
        confusion: c,
    }];
    let mut i = 0;
    while i < order.len() {
        let score = probs[order[i]];
        while i < order.len() && probs[order[i]] == score {
            if labels[order[i]] == 1.0 {
                c.tp += 1;
                c.fn_ -= 1;
            } else {
                c.fp += 1;
                c.tn -= 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            threshold: score,
            confusion: c,
        });
    }
    Ok(points)
}

/// Trapezoidal area under ROC points ordered by increasing FPR.
pub fn auc_from_points(points: &[RocPoint]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].fpr() - w[0].fpr()) * (w[1].tpr() + w[0].tpr()) / 2.0)
        .sum()
}

pub fn roc_auc(probs: &[f64], labels: &[f64]) -> Result<(Vec<RocPoint>, f64), TrainError> {
    let points = roc_curve(probs, labels)?;
    let auc = auc_from_points(&points);
    Ok((points, auc))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ThresholdChoice {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
    /// Euclidean distance from `(fpr, tpr)` to the ideal corner `(0, 1)`.
    pub distance: f64,
    pub precision: f64,
    pub recall: f64,
    /// `|precision − recall|`, reported as a balance diagnostic.
    pub pr_gap: f64,
}

/// Picks the ROC point nearest the top-left corner; ties go to the larger threshold.
pub fn select_threshold(points: &[RocPoint]) -> Option<ThresholdChoice> {
    let mut best: Option<ThresholdChoice> = None;
    for p in points.iter().filter(|p| p.threshold.is_finite()) {
        let (fpr, tpr) = (p.fpr(), p.tpr());
        let distance = (fpr * fpr + (1.0 - tpr) * (1.0 - tpr)).sqrt();
        let better = match &best {
            None => true,
            Some(b) => {
                distance < b.distance - 1e-12
                    || ((distance - b.distance).abs() <= 1e-12 && p.threshold > b.threshold)
            }
        };
        if better {
            let (precision, recall) = (p.confusion.precision(), tpr);
            best = Some(ThresholdChoice {
                threshold: p.threshold,
                fpr,
                tpr,
                distance,
                precision,
                recall,
                pr_gap: (precision - recall).abs(),
            });
        }
    }
    best
}

/// Summary metrics for one evaluation, or the mean over several.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct MetricReport {
    pub loss: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub accuracy: f64,
    pub mcc: f64,
    pub auc: f64,
}

impl MetricReport {
    pub fn evaluate(probs: &[f64], labels: &[f64], threshold: f64, loss: f64) -> Result<MetricReport, TrainError> {
        let c = confusion_at_threshold(probs, labels, threshold)?;
        let (_, auc) = roc_auc(probs, labels)?;
        Ok(MetricReport {
            loss,
            sensitivity: c.sensitivity(),
            specificity: c.specificity(),
            accuracy: c.accuracy(),
            mcc: mcc(&c),
            auc,
        })
    }

    /// Field-wise mean, summed in slice order.
    pub fn mean(reports: &[MetricReport]) -> MetricReport {
        let n = reports.len().max(1) as f64;
        let sum = |f: fn(&MetricReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
        MetricReport {
            loss: sum(|r| r.loss),
            sensitivity: sum(|r| r.sensitivity),
            specificity: sum(|r| r.specificity),
            accuracy: sum(|r| r.accuracy),
            mcc: sum(|r| r.mcc),
            auc: sum(|r| r.auc),
        }
    }
}
