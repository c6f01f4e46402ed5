use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::TrainError;

/// Held-out index sets of a k-fold split.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FoldPlan {
    pub k: usize,
    pub test: Vec<Vec<usize>>,
}

impl FoldPlan {
    /// Every index outside fold `fold`, ascending.
    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .test
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != fold)
            .flat_map(|(_, t)| t.iter().copied())
            .collect();
        out.sort_unstable();
        out
    }
}

/// Shuffles each class with `seed` and deals it round-robin into `k` folds, continuing
/// the deal across classes so fold sizes differ by at most one.
pub fn stratified_kfold(labels: &[f64], k: usize, seed: u64) -> Result<FoldPlan, TrainError> {
    let mut pos: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == 1.0).collect();
    let mut neg: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] != 1.0).collect();
    if k < 2 || pos.len() < k || neg.len() < k {
        return Err(TrainError::TooFewSamples {
            k,
            positives: pos.len(),
            negatives: neg.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);
    let mut test = vec![Vec::new(); k];
    for (slot, &i) in pos.iter().chain(&neg).enumerate() {
        test[slot % k].push(i);
    }
    for t in &mut test {
        t.sort_unstable();
    }
    Ok(FoldPlan { k, test })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn balanced_small() {
        let labels = [1.0, 1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let plan = stratified_kfold(&labels, 5, 3).unwrap();
        for t in &plan.test {
            assert_eq!(t.len(), 2);
            assert_eq!(t.iter().filter(|&&i| labels[i] == 1.0).count(), 1);
        }
        assert_eq!(plan, stratified_kfold(&labels, 5, 3).unwrap());
    }

    #[test]
    fn too_few() {
        let labels = [1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        assert!(matches!(
            stratified_kfold(&labels, 5, 0),
            Err(TrainError::TooFewSamples { .. })
        ));
    }
}
