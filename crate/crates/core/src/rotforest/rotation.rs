use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::RotationForestConfig;
use crate::features::{Class, FeatureTable};
use crate::mspca::fit_pca;
use crate::{Error, Result};

/// `p × p` block rotation; columns are orthonormal.
#[derive(Debug, Clone, PartialEq)]
pub struct RotationMatrix(pub Array2<f64>);

impl RotationMatrix {
    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    /// `row · R`. Zero entries are skipped; the sum order is fixed so
    /// training and prediction see bit-identical rotated values.
    pub fn rotate(&self, row: &[f64]) -> Vec<f64> {
        let r = &self.0;
        (0..r.ncols())
            .map(|j| {
                let mut s = 0.0;
                for (i, x) in row.iter().enumerate() {
                    let w = r[[i, j]];
                    if w != 0.0 {
                        s += x * w;
                    }
                }
                s
            })
            .collect()
    }
}

/// Independent RNG stream for ensemble member `tree_index`.
pub fn member_rng(seed: u64, tree_index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tree_index as u64);
    rng
}

/// Random feature partition with one PCA block per subset.
///
/// Features are shuffled and cut into `ceil(p / M)` subsets (the last may be
/// smaller). For each subset a non-empty random set of classes is drawn and
/// a bootstrap sample of `pca_sample_fraction` of those classes' rows fits
/// a PCA that keeps every component. Subset blocks whose sample has no
/// variance, or fewer than two rows, fall back to the identity.
pub fn build_rotation(
    table: &FeatureTable,
    config: &RotationForestConfig,
    rng: &mut ChaCha8Rng,
) -> Result<RotationMatrix> {
    let p = table.n_features();
    if p == 0 {
        return Err(Error::Parameter("rotation needs at least one feature".into()));
    }
    if table.len() < 2 {
        return Err(Error::InsufficientData(format!("rotation needs 2 rows, table has {}", table.len())));
    }
    let m = config.features_per_subset.max(1);

    let mut order: Vec<usize> = (0..p).collect();
    order.shuffle(rng);
    let mut rot = Array2::zeros((p, p));

    for subset in order.chunks(m) {
        let classes = loop {
            let pick: Vec<Class> = Class::ALL.into_iter().filter(|_| rng.random_bool(0.5)).collect();
            if !pick.is_empty() {
                break pick;
            }
        };
        let pool: Vec<usize> = (0..table.len()).filter(|&i| classes.contains(&table.labels()[i])).collect();
        let size = (config.pca_sample_fraction * pool.len() as f64).ceil() as usize;
        let sample: Vec<usize> = (0..size).map(|_| pool[rng.random_range(0..pool.len())]).collect();

        let block = if sample.len() < 2 {
            None
        } else {
            let data = Array2::from_shape_fn((sample.len(), subset.len()), |(r, c)| {
                table.rows()[sample[r]][subset[c]]
            });
            let model = fit_pca(data.view())?;
            (model.eigenvalues.iter().sum::<f64>() > 0.0).then_some(model.loadings)
        };

        for (a, &fa) in subset.iter().enumerate() {
            for (b, &fb) in subset.iter().enumerate() {
                rot[[fa, fb]] = match &block {
                    Some(l) => l[[a, b]],
                    None => f64::from(u8::from(a == b)),
                };
            }
        }
    }
    Ok(RotationMatrix(rot))
}
