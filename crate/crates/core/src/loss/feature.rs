//! Pluggable feature extraction for the composite loss.
//!
//! The bundled extractor is a log-energy triangular filterbank (40 mel-spaced
//! bands, 25 ms frames, 10 ms hop, `ln(. + 1e-8)`). It is deliberately a
//! stand-in: anyone with a pretrained speech encoder can implement
//! [`FeatureExtractor`] over dumped features instead.

use super::LossError;
use crate::dsp::{frame_signal, make_stft_basis, AnalysisConfig, WindowKind};
use crate::mat::Mat;
use crate::signal::AudioSignal;

/// `Q x R` feature matrix: `Q` feature dimensions by `R` time steps.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub data: Mat,
}

/// Deterministic map from a signal to a feature matrix.
pub trait FeatureExtractor: Send + Sync {
    fn name(&self) -> &'static str;
    fn extract(&self, signal: &AudioSignal) -> Result<FeatureMatrix, LossError>;
}

#[derive(Debug, Clone, Copy)]
pub struct FilterbankExtractor {
    pub bands: usize,
    pub frame_ms: f64,
    pub hop_ms: f64,
}

impl Default for FilterbankExtractor {
    fn default() -> Self {
        Self { bands: 40, frame_ms: 25.0, hop_ms: 10.0 }
    }
}

fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

impl FeatureExtractor for FilterbankExtractor {
    fn name(&self) -> &'static str {
        "log-mel-filterbank"
    }

    fn extract(&self, signal: &AudioSignal) -> Result<FeatureMatrix, LossError> {
        let sr = signal.sample_rate as f64;
        let frame_len = (sr * self.frame_ms / 1000.0).round() as usize;
        let hop = (sr * self.hop_ms / 1000.0).round() as usize;
        let cfg = AnalysisConfig { frame_length: frame_len, hop, window: WindowKind::PeriodicHann };
        let frames = frame_signal(signal, &cfg)?;

        // Power spectrum via the stacked DFT basis; D = next power of two
        // covering the frame.
        let dft_len = frame_len.next_power_of_two();
        let basis = make_stft_basis(&cfg, 2 * dft_len)?;
        let spec = basis.analyze(&frames);
        let bins = dft_len / 2 + 1;
        let t_total = frames.frames();

        // Triangular filters, mel-spaced over [0, sr/2].
        let mel_max = hz_to_mel(sr / 2.0);
        let mel_points: Vec<f64> =
            (0..self.bands + 2).map(|j| j as f64 * mel_max / (self.bands + 1) as f64).collect();
        let bin_mels: Vec<f64> = (0..bins).map(|k| hz_to_mel(k as f64 * sr / dft_len as f64)).collect();

        let mut out = Mat::zeros(self.bands, t_total);
        for q in 0..self.bands {
            let (lo, mid, hi) = (mel_points[q], mel_points[q + 1], mel_points[q + 2]);
            for t in 0..t_total {
                let mut acc = 0.0;
                for (k, &mel) in bin_mels.iter().enumerate() {
                    let w = if mel <= lo || mel >= hi {
                        0.0
                    } else if mel <= mid {
                        (mel - lo) / (mid - lo)
                    } else {
                        (hi - mel) / (hi - mid)
                    };
                    if w > 0.0 {
                        let re = spec.data.get(k, t);
                        let im = spec.data.get(dft_len + k, t);
                        acc += w * (re * re + im * im);
                    }
                }
                out.set(q, t, (acc + 1e-8).ln());
            }
        }
        Ok(FeatureMatrix { data: out })
    }
}
