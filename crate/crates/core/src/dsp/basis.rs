//! Fixed Fourier analysis/synthesis bases in the stacked real/imaginary
//! layout: rows `0..N/2` of the analysis matrix hold the real (cosine) parts
//! and rows `N/2..N` the imaginary (negative sine) parts of an `N/2`-point
//! DFT. Frames shorter than the DFT length are implicitly zero-padded, which
//! is why the inverse truncated back to `L` samples is still exact.

use super::{AnalysisConfig, DspError, FrameMatrix, Layout, Representation};
use crate::mat::Mat;

/// Paired analysis (`N x L`) and synthesis (`L x N`) matrices.
#[derive(Debug, Clone)]
pub struct BasisPair {
    pub analysis: Mat,
    pub synthesis: Mat,
    /// Number of complex bins (`N/2`), also the DFT length.
    pub bins: usize,
}

impl BasisPair {
    /// `W = U X` on a frame matrix.
    pub fn analyze(&self, frames: &FrameMatrix) -> Representation {
        Representation { data: self.analysis.matmul(&frames.data), layout: Layout::RealImag }
    }

    /// `S = V Z` back to frames; OLA is the caller's job.
    pub fn synthesize(&self, rep: &Representation, config: &AnalysisConfig, sample_rate: u32, original_len: Option<usize>) -> FrameMatrix {
        FrameMatrix {
            data: self.synthesis.matmul(&rep.data),
            config: *config,
            sample_rate,
            original_len,
        }
    }
}

/// Build the DFT basis pair for frame length `config.frame_length` and a
/// stacked representation of `n` rows. The synthesis side folds in the
/// `1/(N/2)` inverse-DFT normalization so `synthesis * analysis` is the
/// identity on frames.
pub fn make_stft_basis(config: &AnalysisConfig, n: usize) -> Result<BasisPair, DspError> {
    config.validate()?;
    if n == 0 || !n.is_multiple_of(2) {
        return Err(DspError::InvalidBasisSize(format!("representation size must be even, got {n}")));
    }
    let bins = n / 2;
    let l = config.frame_length;
    if bins < l {
        return Err(DspError::InvalidBasisSize(format!(
            "representation size {n} retains {bins} bins, fewer than frame length {l}"
        )));
    }
    let step = 2.0 * std::f64::consts::PI / bins as f64;
    let analysis = Mat::from_fn(n, l, |row, col| {
        let k = row % bins;
        let angle = step * (k * col) as f64;
        if row < bins {
            angle.cos()
        } else {
            -angle.sin()
        }
    });
    let scale = 1.0 / bins as f64;
    let synthesis = Mat::from_fn(l, n, |row, col| {
        let k = col % bins;
        let angle = step * (k * row) as f64;
        if col < bins {
            scale * angle.cos()
        } else {
            -scale * angle.sin()
        }
    });
    Ok(BasisPair { analysis, synthesis, bins })
}
