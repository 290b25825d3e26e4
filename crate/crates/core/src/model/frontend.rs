//! Encoder/decoder front ends behind a common trait: a learned linear pair
//! or the fixed Fourier basis pair. Selected at model-build time from the
//! config; both batch and per-frame entry points are provided so streaming
//! sessions reuse the exact same matrices.

use crate::dsp::{
    make_stft_basis, to_amp_phase, AnalysisConfig, BasisPair, FrameMatrix, Layout, Representation,
};
use crate::mat::Mat;

use super::{InputLayout, ModelError};

pub trait FrontEnd: Send + Sync {
    fn name(&self) -> &'static str;

    /// Number of trainable parameters this front end contributes.
    fn trainable_params(&self) -> usize;

    /// `W = U X` (learned) or `W_SPEC = U_STFT X` (Fourier).
    fn encode(&self, frames: &FrameMatrix) -> Representation;

    fn encode_frame(&self, frame: &[f64]) -> Vec<f64>;

    /// Derive the representation fed to the separation network.
    fn separator_input(&self, encoded: &Representation) -> Result<Representation, ModelError>;

    fn separator_input_frame(&self, encoded: &[f64]) -> Vec<f64>;

    /// `S = V Z` back to frames.
    fn decode(
        &self,
        z: &Representation,
        config: &AnalysisConfig,
        sample_rate: u32,
        original_len: Option<usize>,
    ) -> FrameMatrix;

    fn decode_frame(&self, z: &[f64]) -> Vec<f64>;
}

/// Trainable linear encoder/decoder pair.
pub struct LearnedFrontEnd {
    encoder: Mat,
    decoder: Mat,
}

impl LearnedFrontEnd {
    pub fn new(encoder: Mat, decoder: Mat) -> Self {
        Self { encoder, decoder }
    }
}

impl FrontEnd for LearnedFrontEnd {
    fn name(&self) -> &'static str {
        "learned"
    }

    fn trainable_params(&self) -> usize {
        self.encoder.rows() * self.encoder.cols() + self.decoder.rows() * self.decoder.cols()
    }

    fn encode(&self, frames: &FrameMatrix) -> Representation {
        Representation { data: self.encoder.matmul(&frames.data), layout: Layout::RealImag }
    }

    fn encode_frame(&self, frame: &[f64]) -> Vec<f64> {
        self.encoder.matvec(frame)
    }

    fn separator_input(&self, encoded: &Representation) -> Result<Representation, ModelError> {
        Ok(encoded.clone())
    }

    fn separator_input_frame(&self, encoded: &[f64]) -> Vec<f64> {
        encoded.to_vec()
    }

    fn decode(
        &self,
        z: &Representation,
        config: &AnalysisConfig,
        sample_rate: u32,
        original_len: Option<usize>,
    ) -> FrameMatrix {
        FrameMatrix { data: self.decoder.matmul(&z.data), config: *config, sample_rate, original_len }
    }

    fn decode_frame(&self, z: &[f64]) -> Vec<f64> {
        self.decoder.matvec(z)
    }
}

/// Fixed Fourier basis pair; contributes zero trainable parameters.
pub struct StftFrontEnd {
    basis: BasisPair,
    layout: InputLayout,
}

impl StftFrontEnd {
    pub fn new(config: &AnalysisConfig, representation_size: usize, layout: InputLayout) -> Result<Self, ModelError> {
        let basis = make_stft_basis(config, representation_size)?;
        Ok(Self { basis, layout })
    }
}

impl FrontEnd for StftFrontEnd {
    fn name(&self) -> &'static str {
        "stft"
    }

    fn trainable_params(&self) -> usize {
        0
    }

    fn encode(&self, frames: &FrameMatrix) -> Representation {
        self.basis.analyze(frames)
    }

    fn encode_frame(&self, frame: &[f64]) -> Vec<f64> {
        self.basis.analysis.matvec(frame)
    }

    fn separator_input(&self, encoded: &Representation) -> Result<Representation, ModelError> {
        match self.layout {
            InputLayout::RealImag => Ok(encoded.clone()),
            InputLayout::AmpPhase => Ok(to_amp_phase(encoded)?),
        }
    }

    fn separator_input_frame(&self, encoded: &[f64]) -> Vec<f64> {
        match self.layout {
            InputLayout::RealImag => encoded.to_vec(),
            InputLayout::AmpPhase => {
                let bins = encoded.len() / 2;
                let mut out = vec![0.0; encoded.len()];
                for f in 0..bins {
                    let (amp, phase) = crate::dsp::rep_amp_phase_of(encoded[f], encoded[bins + f]);
                    out[f] = amp;
                    out[bins + f] = phase;
                }
                out
            }
        }
    }

    fn decode(
        &self,
        z: &Representation,
        config: &AnalysisConfig,
        sample_rate: u32,
        original_len: Option<usize>,
    ) -> FrameMatrix {
        self.basis.synthesize(z, config, sample_rate, original_len)
    }

    fn decode_frame(&self, z: &[f64]) -> Vec<f64> {
        self.basis.synthesis.matvec(z)
    }
}
