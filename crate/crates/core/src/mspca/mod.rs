//! Principal component analysis and multiscale PCA denoising.

mod denoise;
mod eigen;
mod pca;

pub use denoise::{mspca_denoise, MspcaConfig};
pub use pca::{fit_pca, select_components, PcaModel, SelectionPolicy};
