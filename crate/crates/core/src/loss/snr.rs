//! Classical SNR loss: `-(1/K) sum 10 log10(||s||^2 / ||s - e||^2)`.
//! Unlike the scale-invariant variant this preserves the estimate's scale.

use super::{check_sources, energy, LossError, LossFunction, LossReport, SourceLoss, DB_SCALE, ENERGY_FLOOR};
use crate::signal::AudioSignal;

pub struct SnrLoss;

impl SnrLoss {
    fn source_loss(clean: &[f64], est: &[f64]) -> Result<SourceLoss, LossError> {
        let ref_energy = energy(clean);
        if ref_energy <= ENERGY_FLOOR {
            return Err(LossError::DegenerateReference);
        }
        let err_energy: f64 = clean.iter().zip(est.iter()).map(|(s, e)| (s - e) * (s - e)).sum();
        if err_energy < ENERGY_FLOOR {
            return Ok(SourceLoss { value: f64::NEG_INFINITY, alpha: None, perfect: true });
        }
        Ok(SourceLoss { value: -10.0 * (ref_energy / err_energy).log10(), alpha: None, perfect: false })
    }
}

impl LossFunction for SnrLoss {
    fn name(&self) -> &'static str {
        "snr"
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
        if energy(s) <= ENERGY_FLOOR {
            return Err(LossError::DegenerateReference);
        }
        let err_energy: f64 = s.iter().zip(e.iter()).map(|(si, ei)| (si - ei) * (si - ei)).sum();
        if err_energy < ENERGY_FLOOR {
            return Err(LossError::GradientUndefined("SNR is singular at a perfect estimate".into()));
        }
        Ok(s.iter()
            .zip(e.iter())
            .map(|(si, ei)| 2.0 * DB_SCALE * (ei - si) / err_energy)
            .collect())
    }
}
