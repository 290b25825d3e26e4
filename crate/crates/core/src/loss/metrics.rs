//! Quality metrics: segmental SNR and scale-invariant SNR in dB.

use super::{check_sources, LossError, LossFunction, SiSnrLoss};
use crate::signal::AudioSignal;

/// Segmental SNR: the mean over 32 ms frames (16 ms hop) of the per-frame
/// SNR in dB, clamped to `[-10, 35]`. Frames whose clean energy is below
/// `1e-8` are excluded; only complete frames count. The clamp ceiling also
/// covers frames with zero error.
pub fn ssnr_metric(clean: &AudioSignal, est: &AudioSignal) -> Result<f64, LossError> {
    check_sources(std::slice::from_ref(clean), std::slice::from_ref(est))?;
    let sr = clean.sample_rate as f64;
    let frame = (0.032 * sr).round() as usize;
    let hop = (0.016 * sr).round() as usize;
    let mut sum = 0.0;
    let mut voiced = 0usize;
    let mut start = 0;
    while start + frame <= clean.len() {
        let s = &clean.samples[start..start + frame];
        let e = &est.samples[start..start + frame];
        let ref_energy: f64 = s.iter().map(|v| v * v).sum();
        if ref_energy >= 1e-8 {
            let err_energy: f64 = s.iter().zip(e.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
            let snr = if err_energy <= 0.0 {
                35.0
            } else {
                (10.0 * (ref_energy / err_energy).log10()).clamp(-10.0, 35.0)
            };
            sum += snr;
            voiced += 1;
        }
        start += hop;
    }
    if voiced == 0 {
        return Err(LossError::DegenerateReference);
    }
    Ok(sum / voiced as f64)
}

/// Scale-invariant SNR in dB (the negated loss); infinite for a perfect
/// estimate up to scale.
pub fn si_snr_metric(clean: &AudioSignal, est: &AudioSignal) -> Result<f64, LossError> {
    let report = SiSnrLoss.evaluate(std::slice::from_ref(clean), std::slice::from_ref(est))?;
    Ok(-report.value)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_estimate_hits_the_clamp_ceiling() {
        let x = AudioSignal::seeded_noise(16_000, 16_000, 0.8, 1);
        assert_eq!(ssnr_metric(&x, &x.clone()).unwrap(), 35.0);
    }

    #[test]
    fn framewise_zero_db_construction() {
        // est = clean + sign-flipped clean per sample: the per-frame error
        // energy equals the per-frame clean energy exactly, so every frame
        // sits at 0 dB.
        let clean = AudioSignal::seeded_noise(16_000, 16_000, 0.8, 2);
        let est = AudioSignal::new(
            clean
                .samples
                .iter()
                .enumerate()
                .map(|(i, &v)| if i % 2 == 0 { 2.0 * v } else { 0.0 })
                .collect(),
            16_000,
        );
        // err = est - clean = +/- clean per sample; |err| = |clean|.
        let ssnr = ssnr_metric(&clean, &est).unwrap();
        assert!(ssnr.abs() <= 1e-9, "got {ssnr}");
    }

    #[test]
    fn silent_reference_is_degenerate() {
        let clean = AudioSignal::new(vec![0.0; 8000], 16_000);
        let est = AudioSignal::seeded_noise(8000, 16_000, 0.1, 3);
        assert!(matches!(ssnr_metric(&clean, &est), Err(LossError::DegenerateReference)));
    }

    #[test]
    fn si_snr_metric_negates_the_loss() {
        let clean = AudioSignal::seeded_noise(4000, 16_000, 0.8, 4);
        let est = AudioSignal::seeded_noise(4000, 16_000, 0.8, 5);
        let metric = si_snr_metric(&clean, &est).unwrap();
        let loss = SiSnrLoss.evaluate(&[clean], &[est]).unwrap().value;
        assert_eq!(metric, -loss);
    }
}
