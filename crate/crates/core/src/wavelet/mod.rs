//! Orthonormal two-channel filter banks: multi-level DWT and full wavelet
//! packet decomposition, both with periodic extension and exact inverses.

mod dwt;
mod filters;
mod wpd;

pub use dwt::{analysis_step, dwt, idwt, synthesis_step, DwtDecomposition};
pub use filters::FilterPair;
pub use wpd::{iwpd, wpd, WpdTree};

/// Decomposition depth used for features and denoising.
pub const DEFAULT_LEVEL: usize = 4;

fn check_dyadic(len: usize, levels: usize, filter: &FilterPair) -> crate::Result<()> {
    use crate::Error;
    if levels < 1 {
        return Err(Error::Parameter("decomposition needs at least one level".into()));
    }
    if levels >= usize::BITS as usize || len % (1usize << levels) != 0 || len == 0 {
        return Err(Error::Shape(format!(
            "length {len} is not divisible by 2^{levels}"
        )));
    }
    if len < filter.len() {
        return Err(Error::Shape(format!(
            "length {len} shorter than the {}-tap {} filter",
            filter.len(),
            filter.name()
        )));
    }
    Ok(())
}
