//! Power-compressed spectral MSE.
//!
//! Both signals are re-analyzed with the loss-side STFT before comparison,
//! so the loss always refers to spectra of actual waveforms (consistency by
//! construction). Per complex bin, with `a = |We|^0.3`, `b = |W|^0.3` and
//! compressed phases `0.3 * angle`:
//!
//! ```text
//! beta * (a - b)^2 + (1 - beta) * |a e^(j 0.3 ae) - b e^(j 0.3 be)|^2
//! ```
//!
//! summed over bins and frames and averaged over sources. `W^0.3` is the
//! principal complex power, compressing magnitude and angle together; for a
//! bin with `We = -1`, `W = 1` the complex term is `|e^(j 0.3 pi) - 1|^2`.

use super::{check_sources, LossConfig, LossError, LossFunction, LossReport, SourceLoss};
use crate::dsp::{frame_signal, make_stft_basis, BasisPair, Representation};
use crate::mat::Mat;
use crate::signal::AudioSignal;

const COMPRESS: f64 = 0.3;

/// One bin of the compressed loss; exposed so the arithmetic can be checked
/// directly against hand-evaluated cases.
pub fn pcmse_bin_term(est_re: f64, est_im: f64, ref_re: f64, ref_im: f64, beta: f64) -> f64 {
    let (a, phi) = compressed_polar(est_re, est_im);
    let (b, psi) = compressed_polar(ref_re, ref_im);
    let mag = a - b;
    let u = a * phi.cos() - b * psi.cos();
    let v = a * phi.sin() - b * psi.sin();
    beta * mag * mag + (1.0 - beta) * (u * u + v * v)
}

/// `(|w|^0.3, 0.3 * angle(w))`.
fn compressed_polar(re: f64, im: f64) -> (f64, f64) {
    let mag_sq = re * re + im * im;
    (mag_sq.powf(COMPRESS / 2.0), COMPRESS * im.atan2(re))
}

pub struct PcmseLoss {
    beta: f64,
    magnitude_floor: f64,
    per_bin_mean: bool,
    analysis: crate::dsp::AnalysisConfig,
    basis: BasisPair,
}

impl PcmseLoss {
    pub fn new(cfg: &LossConfig) -> Result<Self, LossError> {
        cfg.validate()?;
        let basis = make_stft_basis(&cfg.analysis, cfg.representation_size)?;
        Ok(Self {
            beta: cfg.beta,
            magnitude_floor: cfg.magnitude_floor,
            per_bin_mean: cfg.per_bin_mean,
            analysis: cfg.analysis,
            basis,
        })
    }

    fn analyze(&self, signal: &AudioSignal) -> Result<Representation, LossError> {
        let frames = frame_signal(signal, &self.analysis)?;
        Ok(self.basis.analyze(&frames))
    }

    fn source_value(&self, clean: &AudioSignal, est: &AudioSignal) -> Result<f64, LossError> {
        let w_ref = self.analyze(clean)?;
        let w_est = self.analyze(est)?;
        let bins = w_ref.bins();
        let frames = w_ref.data.cols();
        let mut sum = 0.0;
        for f in 0..bins {
            for t in 0..frames {
                sum += pcmse_bin_term(
                    w_est.data.get(f, t),
                    w_est.data.get(bins + f, t),
                    w_ref.data.get(f, t),
                    w_ref.data.get(bins + f, t),
                    self.beta,
                );
            }
        }
        if self.per_bin_mean {
            sum /= (bins * frames) as f64;
        }
        Ok(sum)
    }
}

impl LossFunction for PcmseLoss {
    fn name(&self) -> &'static str {
        "pcmse"
    }

    fn evaluate(&self, clean: &[AudioSignal], est: &[AudioSignal]) -> Result<LossReport, LossError> {
        check_sources(clean, est)?;
        let per_source = clean
            .iter()
            .zip(est.iter())
            .map(|(c, e)| {
                Ok(SourceLoss { value: self.source_value(c, e)?, alpha: None, perfect: false })
            })
            .collect::<Result<Vec<_>, LossError>>()?;
        Ok(LossReport::from_sources(per_source))
    }

    /// Analytic gradient with respect to the estimate samples. Magnitudes
    /// are floored at the configured epsilon inside the 0.3 power, which
    /// bounds the otherwise singular derivative at silent bins (the bin's
    /// contribution is treated as locally flat there).
    fn gradient(&self, clean: &AudioSignal, est: &AudioSignal) -> Result<Vec<f64>, LossError> {
        check_sources(std::slice::from_ref(clean), std::slice::from_ref(est))?;
        if self.magnitude_floor <= 0.0 {
            return Err(LossError::GradientUndefined(
                "compressed spectral gradient needs a positive magnitude floor".into(),
            ));
        }
        let w_ref = self.analyze(clean)?;
        let est_frames = frame_signal(est, &self.analysis)?;
        let w_est = self.basis.analyze(&est_frames);
        let bins = w_ref.bins();
        let frames = w_ref.data.cols();
        let norm = if self.per_bin_mean { 1.0 / (bins * frames) as f64 } else { 1.0 };

        // d loss / d (re, im) of the estimate spectrum, stacked like the
        // representation itself.
        let mut spec_grad = Mat::zeros(2 * bins, frames);
        for f in 0..bins {
            for t in 0..frames {
                let re = w_est.data.get(f, t);
                let im = w_est.data.get(bins + f, t);
                let (b_mag, psi) = compressed_polar(w_ref.data.get(f, t), w_ref.data.get(bins + f, t));
                let mag = (re * re + im * im).sqrt();
                if mag <= self.magnitude_floor {
                    continue;
                }
                let a = mag.powf(COMPRESS);
                let phi = COMPRESS * im.atan2(re);
                // d a / d re = 0.3 a re / mag^2 ; d phi / d re = -0.3 im / mag^2
                let inv_sq = 1.0 / (mag * mag);
                let da_re = COMPRESS * a * re * inv_sq;
                let da_im = COMPRESS * a * im * inv_sq;
                let dphi_re = -COMPRESS * im * inv_sq;
                let dphi_im = COMPRESS * re * inv_sq;

                let (sin_phi, cos_phi) = phi.sin_cos();
                let u = a * cos_phi - b_mag * psi.cos();
                let v = a * sin_phi - b_mag * psi.sin();

                let mag_term = 2.0 * self.beta * (a - b_mag);
                let du_re = da_re * cos_phi - a * sin_phi * dphi_re;
                let du_im = da_im * cos_phi - a * sin_phi * dphi_im;
                let dv_re = da_re * sin_phi + a * cos_phi * dphi_re;
                let dv_im = da_im * sin_phi + a * cos_phi * dphi_im;
                let complex_re = 2.0 * (1.0 - self.beta) * (u * du_re + v * dv_re);
                let complex_im = 2.0 * (1.0 - self.beta) * (u * du_im + v * dv_im);

                spec_grad.set(f, t, norm * (mag_term * da_re + complex_re));
                spec_grad.set(bins + f, t, norm * (mag_term * da_im + complex_im));
            }
        }

        // Back through the (linear) analysis: frames, then windowed overlap.
        let frame_grad = self.basis.analysis.t_matmul(&spec_grad);
        let window = self.analysis.window.samples(self.analysis.frame_length);
        let mut grad = vec![0.0; est.len()];
        for t in 0..frames {
            let start = t * self.analysis.hop;
            for (i, &w) in window.iter().enumerate() {
                let n = start + i;
                if n < grad.len() {
                    grad[n] += w * frame_grad.get(i, t);
                }
            }
        }
        Ok(grad)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::{AnalysisConfig, WindowKind};

    fn test_cfg() -> LossConfig {
        LossConfig {
            analysis: AnalysisConfig { frame_length: 32, hop: 16, window: WindowKind::PeriodicHann },
            representation_size: 64,
            ..LossConfig::default()
        }
    }

    #[test]
    fn hand_computed_bin_terms() {
        // Unit estimate against silence: 0.5 * 1 + 0.5 * 1.
        assert!((pcmse_bin_term(1.0, 0.0, 0.0, 0.0, 0.5) - 1.0).abs() < 1e-12);
        // Sign flip: magnitude term vanishes, compressed-phase term does not.
        let want = 1.0 - (0.3 * std::f64::consts::PI).cos();
        assert!((pcmse_bin_term(-1.0, 0.0, 1.0, 0.0, 0.5) - want).abs() < 1e-12);
        assert!((want - 0.41221).abs() < 1e-4);
        // Identical bins cost nothing.
        assert_eq!(pcmse_bin_term(0.3, -0.7, 0.3, -0.7, 0.5), 0.0);
    }

    #[test]
    fn zero_for_identical_signals_and_nonnegative() {
        let loss = PcmseLoss::new(&test_cfg()).unwrap();
        let x = AudioSignal::seeded_noise(700, 16_000, 0.8, 4);
        let same = loss.evaluate(std::slice::from_ref(&x), std::slice::from_ref(&x)).unwrap();
        assert_eq!(same.value, 0.0);
        for seed in 0..10 {
            let y = AudioSignal::seeded_noise(700, 16_000, 0.8, 100 + seed);
            let v = loss.evaluate(std::slice::from_ref(&x), &[y]).unwrap().value;
            assert!(v >= 0.0);
        }
    }

    #[test]
    fn gradient_zero_at_minimum() {
        let loss = PcmseLoss::new(&test_cfg()).unwrap();
        let x = AudioSignal::seeded_noise(256, 16_000, 0.8, 5);
        let grad = loss.gradient(&x, &x.clone()).unwrap();
        assert!(grad.iter().all(|g| g.abs() <= 1e-10));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let loss = PcmseLoss::new(&test_cfg()).unwrap();
        for seed in 0..3u64 {
            let clean = AudioSignal::seeded_noise(256, 16_000, 0.8, seed);
            let est = AudioSignal::seeded_noise(256, 16_000, 0.8, seed + 50);
            let grad = loss.gradient(&clean, &est).unwrap();
            let h = 1e-4;
            let mut worst: f64 = 0.0;
            let scale: f64 = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
            for n in (0..est.len()).step_by(17) {
                let mut plus = est.clone();
                plus.samples[n] += h;
                let mut minus = est.clone();
                minus.samples[n] -= h;
                let fd = (loss.evaluate(std::slice::from_ref(&clean), &[plus]).unwrap().value
                    - loss.evaluate(std::slice::from_ref(&clean), &[minus]).unwrap().value)
                    / (2.0 * h);
                worst = worst.max((fd - grad[n]).abs() / scale.max(1e-12));
            }
            assert!(worst <= 1e-4, "seed {seed}: relative error {worst}");
        }
    }
}
