//! Composite loss: `gamma * L_feature + L_pcmse`, where the feature term is
//! the mean squared difference between feature matrices of the clean and
//! estimated signals. The feature extractor is pluggable; see
//! [`super::FilterbankExtractor`] for the bundled stand-in.

use super::{check_sources, FeatureExtractor, LossConfig, LossError, LossFunction, LossReport, PcmseLoss, SourceLoss};
use crate::signal::AudioSignal;

/// Mean squared difference between the two signals' feature matrices.
pub fn pase_feature_mse(
    clean: &AudioSignal,
    est: &AudioSignal,
    extractor: &dyn FeatureExtractor,
) -> Result<f64, LossError> {
    let p_ref = extractor.extract(clean)?;
    let p_est = extractor.extract(est)?;
    if p_ref.data.rows() != p_est.data.rows() || p_ref.data.cols() != p_est.data.cols() {
        return Err(LossError::ExtractorInconsistent(format!(
            "{} produced {}x{} for the clean signal but {}x{} for the estimate",
            extractor.name(),
            p_ref.data.rows(),
            p_ref.data.cols(),
            p_est.data.rows(),
            p_est.data.cols()
        )));
    }
    let n = (p_ref.data.rows() * p_ref.data.cols()) as f64;
    let sum: f64 = p_ref
        .data
        .iter()
        .zip(p_est.data.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(sum / n)
}

pub struct PasemseLoss {
    gamma: f64,
    pcmse: PcmseLoss,
    extractor: Box<dyn FeatureExtractor>,
}

impl PasemseLoss {
    pub fn new(cfg: &LossConfig, extractor: Box<dyn FeatureExtractor>) -> Result<Self, LossError> {
        Ok(Self { gamma: cfg.gamma, pcmse: PcmseLoss::new(cfg)?, extractor })
    }
}

impl LossFunction for PasemseLoss {
    fn name(&self) -> &'static str {
        "pasemse"
    }

    fn evaluate(&self, clean: &[AudioSignal], est: &[AudioSignal]) -> Result<LossReport, LossError> {
        check_sources(clean, est)?;
        let spectral = self.pcmse.evaluate(clean, est)?;
        let per_source = clean
            .iter()
            .zip(est.iter())
            .zip(spectral.per_source.iter())
            .map(|((c, e), sp)| {
                let feature = pase_feature_mse(c, e, self.extractor.as_ref())?;
                Ok(SourceLoss { value: self.gamma * feature + sp.value, alpha: None, perfect: false })
            })
            .collect::<Result<Vec<_>, LossError>>()?;
        Ok(LossReport::from_sources(per_source))
    }

    fn gradient(&self, _clean: &AudioSignal, _est: &AudioSignal) -> Result<Vec<f64>, LossError> {
        // The extractor is an opaque plug-in with no gradient contract.
        Err(LossError::GradientUnavailable("pasemse"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::{AnalysisConfig, WindowKind};
    use crate::loss::{FeatureMatrix, FilterbankExtractor};
    use crate::mat::Mat;

    fn test_cfg(gamma: f64) -> LossConfig {
        LossConfig {
            gamma,
            analysis: AnalysisConfig { frame_length: 32, hop: 16, window: WindowKind::PeriodicHann },
            representation_size: 64,
            ..LossConfig::default()
        }
    }

    fn pair(seed: u64) -> (AudioSignal, AudioSignal) {
        (
            AudioSignal::seeded_noise(1200, 16_000, 0.8, seed),
            AudioSignal::seeded_noise(1200, 16_000, 0.8, seed + 1000),
        )
    }

    #[test]
    fn gamma_zero_reduces_to_spectral_loss() {
        let composite = PasemseLoss::new(&test_cfg(0.0), Box::new(FilterbankExtractor::default())).unwrap();
        let spectral = PcmseLoss::new(&test_cfg(0.0)).unwrap();
        for seed in 0..20 {
            let (c, e) = pair(seed);
            let a = composite.evaluate(std::slice::from_ref(&c), std::slice::from_ref(&e)).unwrap().value;
            let b = spectral.evaluate(&[c], &[e]).unwrap().value;
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn zero_for_identical_signals() {
        let loss = PasemseLoss::new(&test_cfg(0.25), Box::new(FilterbankExtractor::default())).unwrap();
        let (c, _) = pair(7);
        assert_eq!(loss.evaluate(std::slice::from_ref(&c), std::slice::from_ref(&c)).unwrap().value, 0.0);
    }

    #[test]
    fn default_gamma_composes_the_two_terms() {
        let cfg = test_cfg(0.25);
        let loss = PasemseLoss::new(&cfg, Box::new(FilterbankExtractor::default())).unwrap();
        let spectral = PcmseLoss::new(&cfg).unwrap();
        let extractor = FilterbankExtractor::default();
        let (c, e) = pair(3);
        let composite = loss.evaluate(std::slice::from_ref(&c), std::slice::from_ref(&e)).unwrap().value;
        let expected = 0.25 * pase_feature_mse(&c, &e, &extractor).unwrap()
            + spectral.evaluate(&[c], &[e]).unwrap().value;
        assert!((composite - expected).abs() <= 1e-12);
    }

    #[test]
    fn inconsistent_extractor_is_reported() {
        // A deliberately broken extractor whose output shape depends on the
        // sample values, exercising the plug-in contract check.
        struct Flaky;
        impl FeatureExtractor for Flaky {
            fn name(&self) -> &'static str {
                "flaky"
            }
            fn extract(&self, signal: &AudioSignal) -> Result<FeatureMatrix, LossError> {
                let cols = if signal.samples[0] > 0.0 { 3 } else { 4 };
                Ok(FeatureMatrix { data: Mat::zeros(2, cols) })
            }
        }
        let mut c = AudioSignal::seeded_noise(100, 16_000, 0.5, 1);
        let mut e = c.clone();
        c.samples[0] = 1.0;
        e.samples[0] = -1.0;
        let loss = PasemseLoss::new(&test_cfg(0.25), Box::new(Flaky)).unwrap();
        assert!(matches!(
            loss.evaluate(&[c], &[e]),
            Err(LossError::ExtractorInconsistent(_))
        ));
    }

    #[test]
    fn gradient_is_unavailable() {
        let loss = PasemseLoss::new(&test_cfg(0.25), Box::new(FilterbankExtractor::default())).unwrap();
        let (c, e) = pair(9);
        assert!(matches!(loss.gradient(&c, &e), Err(LossError::GradientUnavailable(_))));
    }
}
