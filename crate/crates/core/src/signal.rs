//! Time-domain audio containers.

/// A mono time-domain signal. Samples are dimensionless amplitudes with a
/// nominal range of `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioSignal {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl AudioSignal {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Self {
        assert!(sample_rate > 0, "sample rate must be positive");
        Self { samples, sample_rate }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn all_finite(&self) -> bool {
        self.samples.iter().all(|s| s.is_finite())
    }

    /// Seeded uniform noise in `[-amplitude, amplitude]`, handy for probes
    /// and benchmarks.
    pub fn seeded_noise(len: usize, sample_rate: u32, amplitude: f64, seed: u64) -> Self {
        let mut rng = crate::rng::SplitMix64::new(seed);
        let samples = (0..len).map(|_| rng.uniform(amplitude)).collect();
        Self::new(samples, sample_rate)
    }

    pub fn max_abs_diff(&self, other: &AudioSignal) -> f64 {
        assert_eq!(self.len(), other.len(), "length mismatch");
        self.samples
            .iter()
            .zip(other.samples.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}
