use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{train, RotationForestConfig};
use crate::features::{Class, FeatureTable};
use crate::{Error, Result};

// keeps fold assignment independent of the member RNG streams
const FOLD_STREAM: u64 = 0x5eed_f01d;

#[derive(Debug, Clone, PartialEq)]
pub struct CvReport {
    pub fold_accuracies: Vec<f64>,
    pub mean_accuracy: f64,
}

/// Stratified fold index per row: each class is shuffled and dealt
/// round-robin, continuing the deal across classes.
pub fn stratified_folds(labels: &[Class], folds: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(FOLD_STREAM);
    let mut assignment = vec![0; labels.len()];
    let mut dealt = 0;
    for class in Class::ALL {
        let mut rows: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        rows.shuffle(&mut rng);
        for i in rows {
            assignment[i] = dealt % folds;
            dealt += 1;
        }
    }
    assignment
}

pub fn cross_validate(table: &FeatureTable, config: &RotationForestConfig, folds: usize) -> Result<CvReport> {
    if folds < 2 {
        return Err(Error::Parameter(format!("need at least 2 folds, got {folds}")));
    }
    if table.len() < folds {
        return Err(Error::Parameter(format!("{} rows cannot fill {folds} folds", table.len())));
    }
    let assignment = stratified_folds(table.labels(), folds, config.seed);
    let mut fold_accuracies = Vec::with_capacity(folds);
    for fold in 0..folds {
        let (test, train_idx): (Vec<usize>, Vec<usize>) = (0..table.len()).partition(|&i| assignment[i] == fold);
        let model = train(&table.subset(&train_idx), config)?;
        let mut correct = 0;
        for &i in &test {
            if model.predict(&table.rows()[i])?.0 == table.labels()[i] {
                correct += 1;
            }
        }
        fold_accuracies.push(correct as f64 / test.len() as f64);
    }
    let mean_accuracy = fold_accuracies.iter().sum::<f64>() / folds as f64;
    Ok(CvReport { fold_accuracies, mean_accuracy })
}
