//! `N x T` representations and the amplitude/phase transform.

use super::DspError;
use crate::mat::Mat;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    /// Rows `0..N/2` real parts, rows `N/2..N` imaginary parts.
    RealImag,
    /// Rows `0..N/2` amplitudes (non-negative), rows `N/2..N` phases in
    /// radians.
    AmpPhase,
}

#[derive(Debug, Clone)]
pub struct Representation {
    pub data: Mat,
    pub layout: Layout,
}

impl Representation {
    pub fn bins(&self) -> usize {
        self.data.rows() / 2
    }
}

/// Amplitude below which the phase is pinned to zero instead of relying on
/// `atan2(0, 0)`.
pub const PHASE_AMP_FLOOR: f64 = 1e-12;

/// Convert the two stacked halves of one real/imag column into amp/phase.
/// Shared by the batch transform and the per-frame streaming path.
pub(crate) fn amp_phase_of(re: f64, im: f64) -> (f64, f64) {
    let amp = (re * re + im * im).sqrt();
    let phase = if amp < PHASE_AMP_FLOOR { 0.0 } else { im.atan2(re) };
    (amp, phase)
}

/// Transform a real/imag representation into amplitude/phase.
pub fn to_amp_phase(spec: &Representation) -> Result<Representation, DspError> {
    if spec.layout != Layout::RealImag {
        return Err(DspError::LayoutMismatch { expected: Layout::RealImag, got: spec.layout });
    }
    let bins = spec.bins();
    let cols = spec.data.cols();
    let mut out = Mat::zeros(spec.data.rows(), cols);
    for f in 0..bins {
        for t in 0..cols {
            let (amp, phase) = amp_phase_of(spec.data.get(f, t), spec.data.get(bins + f, t));
            out.set(f, t, amp);
            out.set(bins + f, t, phase);
        }
    }
    Ok(Representation { data: out, layout: Layout::AmpPhase })
}

/// Inverse of [`to_amp_phase`].
pub fn to_real_imag(ap: &Representation) -> Result<Representation, DspError> {
    if ap.layout != Layout::AmpPhase {
        return Err(DspError::LayoutMismatch { expected: Layout::AmpPhase, got: ap.layout });
    }
    let bins = ap.bins();
    let cols = ap.data.cols();
    let mut out = Mat::zeros(ap.data.rows(), cols);
    for f in 0..bins {
        for t in 0..cols {
            let amp = ap.data.get(f, t);
            let phase = ap.data.get(bins + f, t);
            out.set(f, t, amp * phase.cos());
            out.set(bins + f, t, amp * phase.sin());
        }
    }
    Ok(Representation { data: out, layout: Layout::RealImag })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_bin(re: f64, im: f64) -> Representation {
        let mut data = Mat::zeros(2, 1);
        data.set(0, 0, re);
        data.set(1, 0, im);
        Representation { data, layout: Layout::RealImag }
    }

    #[test]
    fn known_values() {
        let ap = to_amp_phase(&single_bin(3.0, 4.0)).unwrap();
        assert!((ap.data.get(0, 0) - 5.0).abs() < 1e-12);
        assert!((ap.data.get(1, 0) - 0.9272952180016122).abs() < 1e-5);

        let zero = to_amp_phase(&single_bin(0.0, 0.0)).unwrap();
        assert_eq!(zero.data.get(0, 0), 0.0);
        assert_eq!(zero.data.get(1, 0), 0.0);

        let neg = to_amp_phase(&single_bin(-1.0, 0.0)).unwrap();
        assert!((neg.data.get(0, 0) - 1.0).abs() < 1e-12);
        assert!((neg.data.get(1, 0) - std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn layout_mismatch_rejected() {
        let ap = to_amp_phase(&single_bin(1.0, 2.0)).unwrap();
        assert!(matches!(to_amp_phase(&ap), Err(DspError::LayoutMismatch { .. })));
        let ri = single_bin(1.0, 2.0);
        assert!(matches!(to_real_imag(&ri), Err(DspError::LayoutMismatch { .. })));
    }

    #[test]
    fn amp_phase_round_trip() {
        let mut rng = crate::rng::SplitMix64::new(5);
        let mut data = Mat::zeros(16, 7);
        for r in 0..16 {
            for c in 0..7 {
                data.set(r, c, rng.uniform(2.0));
            }
        }
        let spec = Representation { data, layout: Layout::RealImag };
        let back = to_real_imag(&to_amp_phase(&spec).unwrap()).unwrap();
        assert!(spec.data.max_abs_diff(&back.data) <= 1e-9);
    }
}
