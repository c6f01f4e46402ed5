use super::NnError;

/// Probabilities are clamped to `[BCE_CLAMP, 1 - BCE_CLAMP]` before taking logs.
pub const BCE_CLAMP: f64 = 1e-7;

/// Binary cross-entropy of one prediction.
pub fn bce_loss(p: f64, y: f64) -> Result<f64, NnError> {
    if y != 0.0 && y != 1.0 {
        return Err(NnError::LabelOutOfDomain(y));
    }
    let p = if p.is_nan() { 0.5 } else { p.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP) };
    Ok(-(y * p.ln() + (1.0 - y) * (1.0 - p).ln()))
}

/// Mean loss over a batch and its gradient with respect to each pre-sigmoid logit.
///
/// The gradient is the unclamped `(p - y) / n`, so saturated predictions keep learning.
pub fn bce_batch(probs: &[f64], labels: &[f64]) -> Result<(f64, Vec<f64>), NnError> {
    if probs.len() != labels.len() || probs.is_empty() {
        return Err(NnError::ShapeMismatch {
            expected: format!("{} labels", probs.len()),
            found: format!("{}", labels.len()),
        });
    }
    let n = probs.len() as f64;
    let mut total = 0.0;
    let mut grad = Vec::with_capacity(probs.len());
    for (&p, &y) in probs.iter().zip(labels) {
        total += bce_loss(p, y)?;
        grad.push((p - y) / n);
    }
    Ok((total / n, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert!((bce_loss(0.5, 1.0).unwrap() - 2f64.ln()).abs() < 1e-12);
        assert!(bce_loss(1.0, 1.0).unwrap() < 1e-6);
        assert!((bce_loss(0.9, 0.0).unwrap() - 2.302585).abs() < 1e-6);
        assert_eq!(bce_loss(0.3, 2.0), Err(NnError::LabelOutOfDomain(2.0)));
    }

    #[test]
    fn clamped_loss_is_finite() {
        for p in [0.0, 1.0, -1.0, 2.0, f64::NAN] {
            for y in [0.0, 1.0] {
                assert!(bce_loss(p, y).unwrap().is_finite());
            }
        }
    }

    #[test]
    fn batch_mean() {
        let (loss, grad) = bce_batch(&[0.5, 0.5], &[1.0, 0.0]).unwrap();
        assert!((loss - 2f64.ln()).abs() < 1e-12);
        assert_eq!(grad, vec![-0.25, 0.25]);
    }
}
