use ndarray::{Array1, Array2, ArrayView2, Axis};

use super::eigen::symmetric_eigen;
use crate::{Error, Result};

/// Principal axes of a data matrix `X = T·Pᵀ` (after centering).
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    pub mean: Array1<f64>,
    /// `p × r`, orthonormal columns, one per retained component.
    pub loadings: Array2<f64>,
    /// Descending, clamped at zero, length `r`.
    pub eigenvalues: Vec<f64>,
    pub n_samples: usize,
}

impl PcaModel {
    pub fn features(&self) -> usize {
        self.mean.len()
    }

    pub fn retained(&self) -> usize {
        self.loadings.ncols()
    }

    /// Keep the leading `r` components (clamped to `1..=p`).
    pub fn truncated(&self, r: usize) -> PcaModel {
        let r = r.clamp(1, self.retained());
        PcaModel {
            mean: self.mean.clone(),
            loadings: self.loadings.slice(ndarray::s![.., ..r]).to_owned(),
            eigenvalues: self.eigenvalues[..r].to_vec(),
            n_samples: self.n_samples,
        }
    }

    /// Scores `T = (X − mean)·P`.
    pub fn transform(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.features() {
            return Err(Error::Shape(format!(
                "data has {} columns, model expects {}",
                x.ncols(),
                self.features()
            )));
        }
        let centered = &x - &self.mean.view().insert_axis(Axis(0));
        Ok(centered.dot(&self.loadings))
    }

    /// `X̂ = T·Pᵀ + mean`.
    pub fn inverse_transform(&self, scores: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if scores.ncols() != self.retained() {
            return Err(Error::Shape(format!(
                "scores have {} columns, model retains {}",
                scores.ncols(),
                self.retained()
            )));
        }
        let mut out = scores.dot(&self.loadings.t());
        out += &self.mean.view().insert_axis(Axis(0));
        Ok(out)
    }

    /// Project onto the retained subspace and map back.
    pub fn reconstruct(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let scores = self.transform(x)?;
        self.inverse_transform(scores.view())
    }
}

/// Fit all `p` components of `x` (`n × p`, `n ≥ 2`).
///
/// Covariance uses divisor `n − 1`. Each loading is signed so that its
/// largest-magnitude entry is positive (first such entry on ties).
pub fn fit_pca(x: ArrayView2<'_, f64>) -> Result<PcaModel> {
    let (n, p) = x.dim();
    if n < 2 {
        return Err(Error::Parameter(format!("PCA needs at least 2 rows, got {n}")));
    }
    if p < 1 {
        return Err(Error::Parameter("PCA needs at least 1 column".into()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("PCA input contains non-finite values".into()));
    }
    let mean = x.mean_axis(Axis(0)).expect("n >= 2");
    let centered = &x - &mean.view().insert_axis(Axis(0));
    let mut cov = centered.t().dot(&centered);
    cov /= (n - 1) as f64;
    // exact symmetry for the solver
    for i in 0..p {
        for j in 0..i {
            let s = 0.5 * (cov[[i, j]] + cov[[j, i]]);
            cov[[i, j]] = s;
            cov[[j, i]] = s;
        }
    }

    let (vals, vecs) = symmetric_eigen(&cov);
    let mut loadings = Array2::zeros((p, p));
    let mut eigenvalues = Vec::with_capacity(p);
    for (out, src) in (0..p).rev().enumerate() {
        eigenvalues.push(vals[src].max(0.0));
        let mut col = vecs.column(src).to_owned();
        let mut best = 0;
        for (i, v) in col.iter().enumerate() {
            if v.abs() > col[best].abs() {
                best = i;
            }
        }
        if col[best] < 0.0 {
            col.mapv_inplace(|v| -v);
        }
        loadings.column_mut(out).assign(&col);
    }
    Ok(PcaModel {
        mean,
        loadings,
        eigenvalues,
        n_samples: n,
    })
}

/// How many components survive a PCA stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SelectionPolicy {
    /// Keep every eigenvalue at or above the mean eigenvalue.
    #[default]
    Kaiser,
    RetainAll,
    /// Keep at most this many (at least one).
    Fixed(usize),
}

impl std::fmt::Display for SelectionPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SelectionPolicy::Kaiser => f.write_str("kaiser"),
            SelectionPolicy::RetainAll => f.write_str("all"),
            SelectionPolicy::Fixed(n) => write!(f, "fixed:{n}"),
        }
    }
}

impl std::str::FromStr for SelectionPolicy {
    type Err = Error;

    /// `kaiser`, `all` or `fixed:<n>`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kaiser" => Ok(SelectionPolicy::Kaiser),
            "all" => Ok(SelectionPolicy::RetainAll),
            _ => s
                .strip_prefix("fixed:")
                .and_then(|n| n.parse().ok())
                .map(SelectionPolicy::Fixed)
                .ok_or_else(|| Error::Parameter(format!("unknown selection policy `{s}`"))),
        }
    }
}

impl SelectionPolicy {
    pub fn select(self, eigenvalues: &[f64]) -> Result<usize> {
        match self {
            SelectionPolicy::Kaiser => select_components(eigenvalues),
            SelectionPolicy::RetainAll if eigenvalues.is_empty() => {
                Err(Error::Parameter("no eigenvalues to select from".into()))
            }
            SelectionPolicy::RetainAll => Ok(eigenvalues.len()),
            SelectionPolicy::Fixed(k) => {
                if eigenvalues.is_empty() {
                    return Err(Error::Parameter("no eigenvalues to select from".into()));
                }
                Ok(k.clamp(1, eigenvalues.len()))
            }
        }
    }
}

/// Kaiser rule: count of eigenvalues `≥ mean(eigenvalues)`, at least one.
pub fn select_components(eigenvalues: &[f64]) -> Result<usize> {
    if eigenvalues.is_empty() {
        return Err(Error::Parameter("no eigenvalues to select from".into()));
    }
    let mean = eigenvalues.iter().sum::<f64>() / eigenvalues.len() as f64;
    Ok(eigenvalues.iter().filter(|&&v| v >= mean).count().max(1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(n: usize, p: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((n, p), |_| rng.random_range(-3.0..3.0))
    }

    fn max_abs(a: &Array2<f64>) -> f64 {
        a.iter().fold(0.0, |m: f64, v| m.max(v.abs()))
    }

    #[test]
    fn collinear_rows() {
        let x = array![[1.0, 1.0], [-1.0, -1.0], [2.0, 2.0], [-2.0, -2.0]];
        let m = fit_pca(x.view()).unwrap();
        let h = 0.5f64.sqrt();
        assert!((m.loadings[[0, 0]] - h).abs() < 1e-12);
        assert!((m.loadings[[1, 0]] - h).abs() < 1e-12);
        assert!(m.eigenvalues[1].abs() < 1e-10);
        // 2·(1+1+4+4)/3
        assert!((m.eigenvalues[0] - 20.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn one_dimensional() {
        let x = array![[1.0], [4.0], [2.0], [9.0]];
        let m = fit_pca(x.view()).unwrap();
        assert_eq!(m.loadings, array![[1.0]]);
        let mean = 4.0;
        let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 3.0;
        assert!((m.eigenvalues[0] - var).abs() < 1e-12);
    }

    #[test]
    fn input_errors() {
        assert!(matches!(fit_pca(array![[1.0, 2.0]].view()), Err(Error::Parameter(_))));
        assert!(matches!(
            fit_pca(array![[1.0, f64::NAN], [0.0, 1.0]].view()),
            Err(Error::Data(_))
        ));
        let m = fit_pca(random(10, 3, 0).view()).unwrap();
        assert!(matches!(m.transform(random(4, 2, 1).view()), Err(Error::Shape(_))));
        assert!(matches!(m.truncated(2).inverse_transform(random(4, 3, 1).view()), Err(Error::Shape(_))));
    }

    #[test]
    fn full_rank_round_trip() {
        let x = random(50, 6, 7);
        let m = fit_pca(x.view()).unwrap();
        assert!(max_abs(&(&m.reconstruct(x.view()).unwrap() - &x)) < 1e-8);
    }

    #[test]
    fn mean_rows_score_zero() {
        let x = random(20, 4, 2);
        let m = fit_pca(x.view()).unwrap();
        let rows = Array2::from_shape_fn((5, 4), |(_, j)| m.mean[j]);
        assert!(max_abs(&m.transform(rows.view()).unwrap()) < 1e-12);
    }

    #[test]
    fn rank_one_reconstructs_with_one_component() {
        let u: Vec<f64> = (0..30).map(|i| (i as f64 * 0.3).sin() + 0.1 * i as f64).collect();
        let v = [2.0, -1.0, 0.5, 3.0];
        let x = Array2::from_shape_fn((30, 4), |(i, j)| u[i] * v[j]);
        let m = fit_pca(x.view()).unwrap().truncated(1);
        assert!(max_abs(&(&m.reconstruct(x.view()).unwrap() - &x)) < 1e-8);
    }

    #[test]
    fn kaiser_examples() {
        assert_eq!(select_components(&[3.0, 1.0, 0.5, 0.5]).unwrap(), 1);
        assert_eq!(select_components(&[2.0, 2.0, 2.0]).unwrap(), 3);
        assert_eq!(select_components(&[10.0, 1.0, 1.0, 1.0, 1.0]).unwrap(), 1);
        assert_eq!(select_components(&[0.0, 0.0]).unwrap(), 2);
        assert!(select_components(&[]).is_err());
        assert_eq!(SelectionPolicy::Fixed(9).select(&[1.0, 0.5]).unwrap(), 2);
        assert_eq!(SelectionPolicy::RetainAll.select(&[1.0, 0.5, 0.1]).unwrap(), 3);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn orthonormal_and_trace_preserving(seed in any::<u64>(), n in 2usize..40, p in 1usize..9) {
            let x = random(n, p, seed);
            let m = fit_pca(x.view()).unwrap();
            let gram = m.loadings.t().dot(&m.loadings);
            prop_assert!(max_abs(&(&gram - &Array2::<f64>::eye(p))) < 1e-8);
            prop_assert!(m.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
            let centered = &x - &m.mean.view().insert_axis(Axis(0));
            let total: f64 = centered.iter().map(|v| v * v).sum::<f64>() / (n - 1) as f64;
            let sum: f64 = m.eigenvalues.iter().sum();
            prop_assert!((sum - total).abs() <= 1e-8 * total.max(1e-300));
        }
    }
}
