use super::{check_dyadic, FilterPair};
use crate::{Error, Result};

/// Multi-level DWT output: `details[j-1]` is `D_j`, `approximation` is
/// `A_levels`.
#[derive(Debug, Clone, PartialEq)]
pub struct DwtDecomposition {
    pub details: Vec<Vec<f64>>,
    pub approximation: Vec<f64>,
    pub levels: usize,
    pub original_length: usize,
    pub filter_name: String,
}

/// One analysis stage with periodic extension:
/// `a[i] = Σ_k l[k]·x[(2i−k) mod n]`, `d[i] = Σ_k h[k]·x[(2i−k) mod n]`.
pub fn analysis_step(x: &[f64], filter: &FilterPair) -> (Vec<f64>, Vec<f64>) {
    let n = x.len();
    let half = n / 2;
    let (lo, hi) = (filter.lowpass(), filter.highpass());
    let mut a = vec![0.0; half];
    let mut d = vec![0.0; half];
    for i in 0..half {
        let (mut sa, mut sd) = (0.0, 0.0);
        for (k, (&l, &h)) in lo.iter().zip(hi).enumerate() {
            let idx = (2 * i + n * k - k) % n;
            sa += l * x[idx];
            sd += h * x[idx];
        }
        a[i] = sa;
        d[i] = sd;
    }
    (a, d)
}

/// Adjoint of [`analysis_step`]; exact inverse for orthonormal pairs.
pub fn synthesis_step(a: &[f64], d: &[f64], filter: &FilterPair) -> Vec<f64> {
    let n = 2 * a.len();
    let (lo, hi) = (filter.lowpass(), filter.highpass());
    let mut x = vec![0.0; n];
    for i in 0..a.len() {
        for (k, (&l, &h)) in lo.iter().zip(hi).enumerate() {
            let idx = (2 * i + n * k - k) % n;
            x[idx] += l * a[i] + h * d[i];
        }
    }
    x
}

pub fn dwt(x: &[f64], filter: &FilterPair, levels: usize) -> Result<DwtDecomposition> {
    check_dyadic(x.len(), levels, filter)?;
    let mut details = Vec::with_capacity(levels);
    let mut approx = x.to_vec();
    for _ in 0..levels {
        let (a, d) = analysis_step(&approx, filter);
        details.push(d);
        approx = a;
    }
    Ok(DwtDecomposition {
        details,
        approximation: approx,
        levels,
        original_length: x.len(),
        filter_name: filter.name().to_string(),
    })
}

pub fn idwt(dec: &DwtDecomposition, filter: &FilterPair) -> Result<Vec<f64>> {
    if dec.levels < 1 || dec.details.len() != dec.levels {
        return Err(Error::Shape(format!(
            "{} detail bands for {} levels",
            dec.details.len(),
            dec.levels
        )));
    }
    let mut x = dec.approximation.clone();
    for (j, d) in dec.details.iter().enumerate().rev() {
        if d.len() != x.len() {
            return Err(Error::Shape(format!(
                "D_{} has {} coefficients, approximation has {}",
                j + 1,
                d.len(),
                x.len()
            )));
        }
        x = synthesis_step(&x, d, filter);
    }
    if x.len() != dec.original_length {
        return Err(Error::Shape(format!(
            "reconstructed {} samples, decomposition records {}",
            x.len(),
            dec.original_length
        )));
    }
    Ok(x)
}
