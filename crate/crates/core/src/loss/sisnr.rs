//! Scale-invariant SNR loss: `-(1/K) sum 10 log10(||a s||^2 / ||a s - e||^2)`
//! with the projection scalar `a = <s, e> / ||s||^2`. No mean subtraction.

use super::{check_sources, dot, energy, LossError, LossFunction, LossReport, SourceLoss, DB_SCALE, ENERGY_FLOOR};
use crate::signal::AudioSignal;

pub struct SiSnrLoss;

impl SiSnrLoss {
    fn source_loss(clean: &[f64], est: &[f64]) -> Result<SourceLoss, LossError> {
        let ref_energy = energy(clean);
        if ref_energy <= ENERGY_FLOOR {
            return Err(LossError::DegenerateReference);
        }
        let alpha = dot(clean, est) / ref_energy;
        let target_energy = alpha * alpha * ref_energy;
        let err_energy: f64 = clean
            .iter()
            .zip(est.iter())
            .map(|(s, e)| {
                let d = alpha * s - e;
                d * d
            })
            .sum();
        if err_energy < ENERGY_FLOOR {
            return Ok(SourceLoss { value: f64::NEG_INFINITY, alpha: Some(alpha), perfect: true });
        }
        let snr_db = 10.0 * (target_energy / err_energy).log10();
        Ok(SourceLoss { value: -snr_db, alpha: Some(alpha), perfect: false })
    }
}

impl LossFunction for SiSnrLoss {
    fn name(&self) -> &'static str {
        "sisnr"
    }

    fn evaluate(&self, clean: &[AudioSignal], est: &[AudioSignal]) -> Result<LossReport, LossError> {
        check_sources(clean, est)?;
        let per_source = clean
            .iter()
            .zip(est.iter())
            .map(|(c, e)| Self::source_loss(&c.samples, &e.samples))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(LossReport::from_sources(per_source))
    }

    fn gradient(&self, clean: &AudioSignal, est: &AudioSignal) -> Result<Vec<f64>, LossError> {
        check_sources(std::slice::from_ref(clean), std::slice::from_ref(est))?;
        let s = &clean.samples;
        let e = &est.samples;
        let ref_energy = energy(s);
        if ref_energy <= ENERGY_FLOOR {
            return Err(LossError::DegenerateReference);
        }
        let alpha = dot(s, e) / ref_energy;
        let target_energy = alpha * alpha * ref_energy;
        let err_energy: f64 = s.iter().zip(e.iter()).map(|(si, ei)| {
            let d = alpha * si - ei;
            d * d
        }).sum();
        if err_energy < ENERGY_FLOOR || target_energy <= ENERGY_FLOOR {
            return Err(LossError::GradientUndefined(
                "scale-invariant SNR is singular at a perfect or orthogonal estimate".into(),
            ));
        }
        // d target / d e = 2 a s ; d err / d e = 2 (e - a s), using that the
        // error vector is orthogonal to the reference.
        let grad = s
            .iter()
            .zip(e.iter())
            .map(|(si, ei)| {
                let d_target = 2.0 * alpha * si;
                let d_err = 2.0 * (ei - alpha * si);
                -DB_SCALE * (d_target / target_energy - d_err / err_energy)
            })
            .collect();
        Ok(grad)
    }
}
