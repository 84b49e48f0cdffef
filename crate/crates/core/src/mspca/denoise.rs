use ndarray::{Array2, ArrayView2};

use super::{fit_pca, SelectionPolicy};
use crate::wavelet::{dwt, idwt, DwtDecomposition, FilterPair, DEFAULT_LEVEL};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MspcaConfig {
    pub filter: FilterPair,
    pub levels: usize,
    /// Applied independently at every wavelet scale and at the final stage.
    pub policy: SelectionPolicy,
}

impl Default for MspcaConfig {
    fn default() -> Self {
        MspcaConfig {
            filter: FilterPair::db4(),
            levels: DEFAULT_LEVEL,
            policy: SelectionPolicy::Kaiser,
        }
    }
}

/// Multiscale PCA denoising of an `n × p` matrix.
///
/// 1. DWT of every column to depth `levels`.
/// 2. At each scale (`D_1 … D_J`, `A_J`) the coefficient matrix (one column
///    per variable) is projected onto its selected principal components.
/// 3. Inverse DWT per column.
/// 4. PCA on the result, projected onto the selected components again.
pub fn mspca_denoise(x: ArrayView2<'_, f64>, config: &MspcaConfig) -> Result<Array2<f64>> {
    let (n, p) = x.dim();
    if p < 2 {
        return Err(Error::Shape(format!("multiscale PCA needs at least 2 columns, got {p}")));
    }
    let mut decs: Vec<DwtDecomposition> = x
        .columns()
        .into_iter()
        .map(|col| dwt(&col.to_vec(), &config.filter, config.levels))
        .collect::<Result<_>>()?;

    for scale in 0..=config.levels {
        let rows = scale_len(&decs[0], scale);
        let coeffs = Array2::from_shape_fn((rows, p), |(i, j)| scale_slice(&decs[j], scale)[i]);
        let denoised = project(coeffs.view(), config.policy)?;
        for (j, dec) in decs.iter_mut().enumerate() {
            let target = scale_slice_mut(dec, scale);
            for (i, t) in target.iter_mut().enumerate() {
                *t = denoised[[i, j]];
            }
        }
    }

    let mut rebuilt = Array2::zeros((n, p));
    for (j, dec) in decs.iter().enumerate() {
        let col = idwt(dec, &config.filter)?;
        rebuilt.column_mut(j).assign(&ndarray::Array1::from(col));
    }
    project(rebuilt.view(), config.policy)
}

fn project(x: ArrayView2<'_, f64>, policy: SelectionPolicy) -> Result<Array2<f64>> {
    let model = fit_pca(x)?;
    let keep = policy.select(&model.eigenvalues)?;
    model.truncated(keep).reconstruct(x)
}

// scale index `levels` is the approximation, `j < levels` is D_{j+1}
fn scale_len(dec: &DwtDecomposition, scale: usize) -> usize {
    scale_slice(dec, scale).len()
}

fn scale_slice(dec: &DwtDecomposition, scale: usize) -> &[f64] {
    if scale == dec.levels {
        &dec.approximation
    } else {
        &dec.details[scale]
    }
}

fn scale_slice_mut(dec: &mut DwtDecomposition, scale: usize) -> &mut [f64] {
    if scale == dec.levels {
        &mut dec.approximation
    } else {
        &mut dec.details[scale]
    }
}
