//! Training objectives computed as measurements, their analytic gradients,
//! and the quality metrics. The four losses live behind [`LossFunction`] and
//! are created by name through [`create_loss`], which is how the CLI selects
//! them at runtime.

mod feature;
mod metrics;
mod pasemse;
mod pcmse;
mod sisnr;
mod snr;

pub use feature::{FeatureExtractor, FeatureMatrix, FilterbankExtractor};
pub use metrics::{si_snr_metric, ssnr_metric};
pub use pasemse::{pase_feature_mse, PasemseLoss};
pub use pcmse::{pcmse_bin_term, PcmseLoss};
pub use sisnr::SiSnrLoss;
pub use snr::SnrLoss;

use crate::dsp::{AnalysisConfig, DspError, WindowKind};
use crate::signal::AudioSignal;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LossError {
    #[error("signal length mismatch: clean {clean}, estimate {est}")]
    LengthMismatch { clean: usize, est: usize },
    #[error("source count mismatch: clean {clean}, estimate {est}")]
    SourceCountMismatch { clean: usize, est: usize },
    #[error("degenerate reference: clean signal has no usable energy")]
    DegenerateReference,
    #[error("gradient undefined: {0}")]
    GradientUndefined(String),
    #[error("gradient unavailable for {0}")]
    GradientUnavailable(&'static str),
    #[error("feature extractor inconsistent: {0}")]
    ExtractorInconsistent(String),
    #[error("unknown loss function {0:?}")]
    UnknownLoss(String),
    #[error(transparent)]
    Dsp(#[from] DspError),
}

/// Energy below which a reference is degenerate or an estimate is perfect.
pub(crate) const ENERGY_FLOOR: f64 = 1e-30;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    /// Mix between the magnitude and complex terms of the compressed
    /// spectral loss.
    pub beta: f64,
    /// Weight of the feature-MSE term in the composite loss.
    pub gamma: f64,
    /// Loss-side analysis framing.
    pub analysis: AnalysisConfig,
    /// Stacked representation size for loss-side analysis.
    pub representation_size: usize,
    /// Magnitude floor inside the 0.3 power when computing gradients.
    pub magnitude_floor: f64,
    /// Average the compressed spectral loss over bins instead of summing.
    /// Off by default: the sum is the definition.
    pub per_bin_mean: bool,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            beta: 0.5,
            gamma: 0.25,
            analysis: AnalysisConfig { frame_length: 192, hop: 64, window: WindowKind::PeriodicHann },
            representation_size: 512,
            magnitude_floor: 1e-8,
            per_bin_mean: false,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<(), LossError> {
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(LossError::UnknownLoss(format!("beta {} outside [0, 1]", self.beta)));
        }
        if self.gamma < 0.0 || self.magnitude_floor < 0.0 {
            return Err(LossError::UnknownLoss("gamma and magnitude floor must be non-negative".into()));
        }
        self.analysis.validate()?;
        Ok(())
    }
}

/// Per-source outcome of a loss evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceLoss {
    pub value: f64,
    /// Projection scalar for the scale-invariant loss.
    pub alpha: Option<f64>,
    /// The estimate matched the (projected) reference exactly; reported, not
    /// an error.
    pub perfect: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossReport {
    pub value: f64,
    pub per_source: Vec<SourceLoss>,
}

impl LossReport {
    pub(crate) fn from_sources(per_source: Vec<SourceLoss>) -> Self {
        let value = per_source.iter().map(|s| s.value).sum::<f64>() / per_source.len() as f64;
        Self { value, per_source }
    }

    pub fn any_perfect(&self) -> bool {
        self.per_source.iter().any(|s| s.perfect)
    }
}

/// A training objective over `K` (clean, estimate) pairs.
pub trait LossFunction: Send + Sync {
    fn name(&self) -> &'static str;

    fn evaluate(&self, clean: &[AudioSignal], est: &[AudioSignal]) -> Result<LossReport, LossError>;

    /// Gradient of the single-source loss with respect to the estimate
    /// samples.
    fn gradient(&self, clean: &AudioSignal, est: &AudioSignal) -> Result<Vec<f64>, LossError>;
}

/// Names accepted by [`create_loss`], in presentation order.
pub const LOSS_NAMES: [&str; 4] = ["sisnr", "snr", "pcmse", "pasemse"];

/// Build a loss by name. `pasemse` uses the bundled filterbank extractor;
/// see [`create_loss_with_extractor`] to plug a different one.
pub fn create_loss(name: &str, cfg: &LossConfig) -> Result<Box<dyn LossFunction>, LossError> {
    match name {
        "sisnr" => Ok(Box::new(SiSnrLoss)),
        "snr" => Ok(Box::new(SnrLoss)),
        "pcmse" => Ok(Box::new(PcmseLoss::new(cfg)?)),
        "pasemse" => Ok(Box::new(PasemseLoss::new(cfg, Box::new(FilterbankExtractor::default()))?)),
        other => Err(LossError::UnknownLoss(other.into())),
    }
}

/// Like [`create_loss`] but with a caller-provided feature extractor for the
/// composite loss.
pub fn create_loss_with_extractor(
    name: &str,
    cfg: &LossConfig,
    extractor: Box<dyn FeatureExtractor>,
) -> Result<Box<dyn LossFunction>, LossError> {
    match name {
        "pasemse" => Ok(Box::new(PasemseLoss::new(cfg, extractor)?)),
        other => create_loss(other, cfg),
    }
}

pub(crate) fn check_sources(clean: &[AudioSignal], est: &[AudioSignal]) -> Result<(), LossError> {
    if clean.len() != est.len() || clean.is_empty() {
        return Err(LossError::SourceCountMismatch { clean: clean.len(), est: est.len() });
    }
    for (c, e) in clean.iter().zip(est.iter()) {
        if c.len() != e.len() {
            return Err(LossError::LengthMismatch { clean: c.len(), est: e.len() });
        }
    }
    Ok(())
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

pub(crate) fn energy(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum()
}

pub(crate) const DB_SCALE: f64 = 10.0 / std::f64::consts::LN_10;
