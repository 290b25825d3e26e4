//! End-to-end model assembly: configuration presets, named weight tensors,
//! seeded initialization, and the offline enhancement pipeline
//! encode -> separate -> mask -> decode.

mod frontend;
mod weights;

pub use frontend::{FrontEnd, LearnedFrontEnd, StftFrontEnd};
pub use weights::{InitKind, ModelWeights, Tensor, TensorSpec};

use crate::dsp::{frame_signal, overlap_add, AnalysisConfig, DspError, Layout, Representation, WindowKind};
use crate::signal::AudioSignal;
use crate::tcn::{MaskActivation, MaskSet, TcnConfig, TcnError, TcnNetwork};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("sample rate mismatch: config expects {expected} Hz, signal is {got} Hz")]
    SampleRateMismatch { expected: u32, got: u32 },
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("weights do not match config: {0}")]
    WeightsConfigMismatch(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error(transparent)]
    Tcn(#[from] TcnError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EncoderKind {
    /// Trainable linear encoder/decoder matrices.
    Learned,
    /// Fixed Fourier bases; zero trainable front-end parameters.
    Stft,
}

/// What the separation network consumes; only meaningful for the Fourier
/// front end (the learned representation is fed as-is).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputLayout {
    RealImag,
    AmpPhase,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OverlapRatio {
    Half,
    TwoThirds,
}

impl OverlapRatio {
    /// Frames spanned by one window: `L / hop`.
    pub fn frames_per_window(self) -> usize {
        match self {
            OverlapRatio::Half => 2,
            OverlapRatio::TwoThirds => 3,
        }
    }

    pub fn hop(self, frame_length: usize) -> usize {
        frame_length / self.frames_per_window()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelConfig {
    pub encoder: EncoderKind,
    pub frame_length: usize,
    pub representation_size: usize,
    pub overlap: OverlapRatio,
    pub input_layout: InputLayout,
    pub window: WindowKind,
    pub tcn: TcnConfig,
    pub sample_rate: u32,
}

impl ModelConfig {
    /// Learned front end, L=32, N=512, 1/2 overlap, sigmoid masks, five
    /// noncausal layers (33 ms look-ahead at 16 kHz).
    pub fn conv_tasnet() -> Self {
        Self {
            encoder: EncoderKind::Learned,
            frame_length: 32,
            representation_size: 512,
            overlap: OverlapRatio::Half,
            input_layout: InputLayout::RealImag,
            window: WindowKind::PeriodicHann,
            tcn: TcnConfig::canonical(MaskActivation::Sigmoid, 5),
            sample_rate: 16_000,
        }
    }

    /// Fourier front end, L=192, N=512, 2/3 overlap, amplitude/phase input,
    /// identity mask activation, three noncausal layers (40 ms look-ahead).
    pub fn stft_tcn() -> Self {
        Self {
            encoder: EncoderKind::Stft,
            frame_length: 192,
            representation_size: 512,
            overlap: OverlapRatio::TwoThirds,
            input_layout: InputLayout::AmpPhase,
            window: WindowKind::PeriodicHann,
            tcn: TcnConfig::canonical(MaskActivation::Identity, 3),
            sample_rate: 16_000,
        }
    }

    pub fn hop(&self) -> usize {
        self.overlap.hop(self.frame_length)
    }

    pub fn frames_per_window(&self) -> usize {
        self.overlap.frames_per_window()
    }

    pub fn num_sources(&self) -> usize {
        self.tcn.num_sources
    }

    pub fn analysis(&self) -> AnalysisConfig {
        AnalysisConfig { frame_length: self.frame_length, hop: self.hop(), window: self.window }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.sample_rate == 0 {
            return Err(ModelError::InvalidConfig("sample rate must be positive".into()));
        }
        if !self.frame_length.is_multiple_of(self.frames_per_window()) {
            return Err(ModelError::InvalidConfig(format!(
                "frame length {} not divisible by {} (overlap ratio)",
                self.frame_length,
                self.frames_per_window()
            )));
        }
        self.analysis().validate()?;
        self.tcn.validate()?;
        if self.encoder == EncoderKind::Stft {
            if !self.representation_size.is_multiple_of(2) || self.representation_size / 2 < self.frame_length {
                return Err(ModelError::InvalidConfig(format!(
                    "Fourier front end needs an even representation size with N/2 >= L, got N={} L={}",
                    self.representation_size, self.frame_length
                )));
            }
            if self.tcn.mask_activation != MaskActivation::Identity {
                return Err(ModelError::InvalidConfig(
                    "Fourier front end requires the identity mask activation; masks must be able \
                     to take negative values"
                        .into(),
                ));
            }
        }
        Ok(())
    }

    /// Exact trainable parameter count, equal to the summed element counts
    /// of [`ModelConfig::tensor_spec`].
    pub fn param_count(&self) -> usize {
        self.tensor_spec().iter().map(|t| t.numel()).sum()
    }
}

/// Build the runtime model, validating the weights against the config.
pub struct RuntimeModel {
    pub config: ModelConfig,
    front_end: Box<dyn FrontEnd>,
    tcn: TcnNetwork,
}

impl RuntimeModel {
    pub fn new(config: ModelConfig, weights: &ModelWeights) -> Result<Self, ModelError> {
        config.validate()?;
        weights.validate_against(&config)?;
        let front_end: Box<dyn FrontEnd> = match config.encoder {
            EncoderKind::Learned => Box::new(LearnedFrontEnd::new(
                weights.get("encoder.u").unwrap().to_mat(),
                weights.get("decoder.v").unwrap().to_mat(),
            )),
            EncoderKind::Stft => Box::new(StftFrontEnd::new(
                &config.analysis(),
                config.representation_size,
                config.input_layout,
            )?),
        };
        let tcn = weights::build_network(&config, weights);
        Ok(Self { config, front_end, tcn })
    }

    pub fn front_end(&self) -> &dyn FrontEnd {
        self.front_end.as_ref()
    }

    pub fn tcn(&self) -> &TcnNetwork {
        &self.tcn
    }

    fn check_rate(&self, signal: &AudioSignal) -> Result<(), ModelError> {
        if signal.sample_rate != self.config.sample_rate {
            return Err(ModelError::SampleRateMismatch {
                expected: self.config.sample_rate,
                got: signal.sample_rate,
            });
        }
        Ok(())
    }

    /// Frame and encode a signal. Returns `(encoded, separator_input)`:
    /// the representation masks are applied to, and the representation the
    /// separation network consumes.
    pub fn encode(&self, signal: &AudioSignal) -> Result<(Representation, Representation), ModelError> {
        self.check_rate(signal)?;
        let frames = frame_signal(signal, &self.config.analysis())?;
        let encoded = self.front_end.encode(&frames);
        let input = self.front_end.separator_input(&encoded)?;
        Ok((encoded, input))
    }

    /// Run the separation network on the separator input.
    pub fn separate(&self, separator_input: &Representation) -> Result<MaskSet, ModelError> {
        Ok(self.tcn.forward(&separator_input.data)?)
    }

    /// `Z_k = M_k (Hadamard) W`, always against the encoded (real/imag)
    /// representation.
    pub fn apply_masks(encoded: &Representation, masks: &MaskSet) -> Result<Vec<Representation>, ModelError> {
        for m in &masks.masks {
            if m.rows() != encoded.data.rows() || m.cols() != encoded.data.cols() {
                return Err(ModelError::ShapeMismatch(format!(
                    "mask is {}x{}, representation is {}x{}",
                    m.rows(),
                    m.cols(),
                    encoded.data.rows(),
                    encoded.data.cols()
                )));
            }
        }
        Ok(masks
            .masks
            .iter()
            .map(|m| Representation { data: m.hadamard(&encoded.data), layout: Layout::RealImag })
            .collect())
    }

    /// Decode per-source representations back to time-domain signals of
    /// exactly `original_len` samples.
    pub fn decode(&self, sources: &[Representation], original_len: usize) -> Result<Vec<AudioSignal>, ModelError> {
        let cfg = self.config.analysis();
        sources
            .iter()
            .map(|z| {
                if z.data.rows() != self.config.representation_size {
                    return Err(ModelError::ShapeMismatch(format!(
                        "representation has {} rows, expected {}",
                        z.data.rows(),
                        self.config.representation_size
                    )));
                }
                let frames = self.front_end.decode(z, &cfg, self.config.sample_rate, Some(original_len));
                Ok(overlap_add(&frames))
            })
            .collect()
    }

    /// Full offline enhancement. Source 0 is speech; source 1 (when K=2) is
    /// noise. The engine never permutes outputs.
    pub fn enhance(&self, signal: &AudioSignal) -> Result<Vec<AudioSignal>, ModelError> {
        let (encoded, separator_input) = self.encode(signal)?;
        let masks = self.separate(&separator_input)?;
        let sources = Self::apply_masks(&encoded, &masks)?;
        self.decode(&sources, signal.len())
    }
}

/// Seeded random weights for a config; deterministic in `(config, seed)`.
pub fn init_random(config: &ModelConfig, seed: u64) -> ModelWeights {
    weights::init_random(config, seed)
}
