use std::f64::consts::FRAC_1_SQRT_2;

use crate::{Error, Result};

// Daubechies, 4 vanishing moments (8 taps).
const DB4: [f64; 8] = [
    0.2303778133088965,
    0.7148465705529157,
    0.6308807679298589,
    -0.0279837694168599,
    -0.1870348117190931,
    0.0308413818355607,
    0.0328830116668852,
    -0.0105974017850690,
];

/// Quadrature-mirror pair: `h[k] = (-1)^k · l[L-1-k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterPair {
    name: String,
    lowpass: Vec<f64>,
    highpass: Vec<f64>,
}

impl FilterPair {
    /// Build a pair from a lowpass filter; the highpass is its mirror.
    pub fn from_lowpass(name: impl Into<String>, lowpass: Vec<f64>) -> Result<Self> {
        let len = lowpass.len();
        if len == 0 || len % 2 != 0 {
            return Err(Error::Parameter(format!("filter length {len} must be even and positive")));
        }
        let sum: f64 = lowpass.iter().sum();
        if (sum - std::f64::consts::SQRT_2).abs() > 1e-10 {
            return Err(Error::Parameter(format!("lowpass sums to {sum}, expected sqrt(2)")));
        }
        let highpass = (0..len)
            .map(|k| if k % 2 == 0 { lowpass[len - 1 - k] } else { -lowpass[len - 1 - k] })
            .collect();
        Ok(FilterPair { name: name.into(), lowpass, highpass })
    }

    pub fn haar() -> Self {
        FilterPair::from_lowpass("haar", vec![FRAC_1_SQRT_2, FRAC_1_SQRT_2]).unwrap()
    }

    pub fn db4() -> Self {
        FilterPair::from_lowpass("db4", DB4.to_vec()).unwrap()
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "haar" | "db1" => Ok(FilterPair::haar()),
            "db4" => Ok(FilterPair::db4()),
            other => Err(Error::Parameter(format!("unknown wavelet `{other}`"))),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn lowpass(&self) -> &[f64] {
        &self.lowpass
    }

    pub fn highpass(&self) -> &[f64] {
        &self.highpass
    }

    pub fn len(&self) -> usize {
        self.lowpass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lowpass.is_empty()
    }
}

impl Default for FilterPair {
    fn default() -> Self {
        FilterPair::db4()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_filters_satisfy_invariants() {
        for f in [FilterPair::haar(), FilterPair::db4()] {
            let l = f.lowpass();
            let h = f.highpass();
            assert_eq!(l.len(), h.len());
            assert_eq!(l.len() % 2, 0);
            assert!((l.iter().sum::<f64>() - 2f64.sqrt()).abs() < 1e-10);
            assert!(h.iter().sum::<f64>().abs() < 1e-10);
            let n = l.len();
            for k in 0..n {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                assert!((h[k] - sign * l[n - 1 - k]).abs() < 1e-10);
            }
            // orthonormal under even shifts
            for shift in (0..n).step_by(2) {
                let dot: f64 = (0..n - shift).map(|k| l[k] * l[k + shift]).sum();
                let want = if shift == 0 { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-14, "{} shift {shift}: {dot}", f.name());
            }
        }
    }

    #[test]
    fn rejects_bad_lowpass() {
        assert!(FilterPair::from_lowpass("odd", vec![1.0, 0.414, 0.0]).is_err());
        assert!(FilterPair::from_lowpass("sum", vec![1.0, 1.0]).is_err());
        assert!(FilterPair::by_name("sym5").is_err());
    }
}
