//! Stateful 1-frame-in-1-frame-out inference, latency accounting, an
//! empirical causality prober, and per-frame timing.
//!
//! # Emission schedule
//!
//! With window length `L = m * hop` and convolutional future reach `r`
//! frames, output hop `p` is physically computable once input hop
//! `p + (m - 1) + r` has arrived: the newest complete input frame is then
//! `p + r` (enough for mask frame `p`) and the overlap-add region for hop
//! `p` is fully covered. Sessions emit at
//! `delay = max(m - 1 + r, future_frames)` hops so that, wherever the
//! reported look-ahead accounting allows it, outputs trail inputs by
//! exactly [`analyze_latency`]'s `future_frames`. The one exception is a
//! fully causal 2/3-overlap config, whose reported look-ahead (one hop)
//! is below the physical floor of `m - 1` hops.
//!
//! # Look-ahead accounting
//!
//! `future_frames` is `r + m` when any layer is noncausal (convolutional
//! reach plus the frames spanned by one window) and `1` for a fully causal
//! stack (the input frame currently being filled). The prober measures
//! the same quantity empirically from single-sample perturbations.

use crate::model::{ModelError, RuntimeModel};
use crate::signal::AudioSignal;
use crate::tcn::{future_reach, TcnStream};
use std::collections::VecDeque;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StreamError {
    #[error("chunk size mismatch: push expects exactly {expected} samples, got {got}")]
    ChunkSizeMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Deterministic look-ahead accounting for a config.
#[derive(Debug, Clone, PartialEq)]
pub struct LatencyReport {
    /// Future frames in the reporting convention of [`analyze_latency`].
    pub future_frames: usize,
    /// Convolutional contribution from noncausal layers.
    pub conv_frames: usize,
    /// Encoder/decoder framing contribution (the remainder).
    pub framing_frames: usize,
    /// Hop duration in milliseconds.
    pub hop_ms: f64,
    /// `future_frames * hop_ms`.
    pub lookahead_ms: f64,
    /// Hops by which a streaming session's outputs trail its inputs.
    pub pipeline_delay_frames: usize,
    /// How the numbers are counted.
    pub convention: &'static str,
}

/// Look-ahead for a model config. `future_frames` is always
/// `conv_frames + framing_frames`.
pub fn analyze_latency(config: &crate::model::ModelConfig) -> LatencyReport {
    let m = config.frames_per_window();
    let conv = config.tcn.conv_future_reach();
    let future = future_reach(&config.tcn, m);
    let hop_ms = config.hop() as f64 / config.sample_rate as f64 * 1000.0;
    LatencyReport {
        future_frames: future,
        conv_frames: conv,
        framing_frames: future - conv,
        hop_ms,
        lookahead_ms: future as f64 * hop_ms,
        pipeline_delay_frames: (m - 1 + conv).max(future),
        convention: if conv > 0 {
            "noncausal: conv reach + window/hop framing frames"
        } else {
            "causal: the single input frame being filled; frame-completion delay not counted"
        },
    }
}

/// A streaming enhancement session. Exclusively owned; create one per
/// stream. Weights are shared immutably through the model reference.
pub struct StreamSession<'m> {
    model: &'m RuntimeModel,
    hop: usize,
    frame_len: usize,
    num_sources: usize,
    delay_frames: usize,
    window: Vec<f64>,
    /// Last `L` input samples (absolute indexing into the ring).
    input_ring: Vec<f64>,
    samples_in: usize,
    frames_encoded: usize,
    /// Encoded (real/imag) frames pending masking.
    spec_ring: VecDeque<Vec<f64>>,
    spec_ring_base: usize,
    tcn: TcnStream,
    masks_applied: usize,
    /// Overlap-add accumulators, absolute indexing over output samples.
    ola_acc: Vec<Vec<f64>>,
    ola_cov: Vec<f64>,
    ola_base: usize,
    ready_hops: VecDeque<Vec<Vec<f64>>>,
    hops_emitted: usize,
    samples_emitted: usize,
}

impl RuntimeModel {
    pub fn stream(&self) -> StreamSession<'_> {
        StreamSession::new(self)
    }
}

impl<'m> StreamSession<'m> {
    pub fn new(model: &'m RuntimeModel) -> Self {
        let cfg = &model.config;
        let hop = cfg.hop();
        let frame_len = cfg.frame_length;
        let report = analyze_latency(cfg);
        Self {
            model,
            hop,
            frame_len,
            num_sources: cfg.num_sources(),
            delay_frames: report.pipeline_delay_frames,
            window: cfg.window.samples(frame_len),
            input_ring: vec![0.0; frame_len],
            samples_in: 0,
            frames_encoded: 0,
            spec_ring: VecDeque::new(),
            spec_ring_base: 0,
            tcn: model.tcn().stream_state(),
            masks_applied: 0,
            ola_acc: vec![vec![0.0; frame_len]; cfg.num_sources()],
            ola_cov: vec![0.0; frame_len],
            ola_base: 0,
            ready_hops: VecDeque::new(),
            hops_emitted: 0,
            samples_emitted: 0,
        }
    }

    /// Hop size in samples; every push must provide exactly this many.
    pub fn hop(&self) -> usize {
        self.hop
    }

    /// Declared future reach in the reporting convention.
    pub fn future_reach(&self) -> usize {
        analyze_latency(&self.model.config).future_frames
    }

    /// Hops by which emission trails input pushes.
    pub fn delay_frames(&self) -> usize {
        self.delay_frames
    }

    pub fn pushes(&self) -> usize {
        self.samples_in / self.hop
    }

    pub fn hops_emitted(&self) -> usize {
        self.hops_emitted
    }

    /// Push exactly one hop of input samples. Returns one hop of output per
    /// source once the pipeline has filled.
    pub fn push(&mut self, samples: &[f64]) -> Result<Option<Vec<Vec<f64>>>, StreamError> {
        if samples.len() != self.hop {
            return Err(StreamError::ChunkSizeMismatch { expected: self.hop, got: samples.len() });
        }
        self.ingest(samples)?;
        let quota = (self.samples_in / self.hop).saturating_sub(self.delay_frames);
        if self.hops_emitted < quota {
            if let Some(hop) = self.pop_ready() {
                self.hops_emitted += 1;
                return Ok(Some(hop));
            }
        }
        Ok(None)
    }

    /// Finish the stream: `tail` is any leftover input shorter than one hop.
    /// Internally pads with zeros to drain the delayed frames and returns the
    /// remaining output so the total per-source output length equals the
    /// total input length.
    pub fn flush(mut self, tail: &[f64]) -> Result<Vec<Vec<f64>>, StreamError> {
        let emitted_by_pushes = self.samples_emitted;
        let total_in = self.samples_in + tail.len();
        let mut out: Vec<Vec<f64>> = vec![Vec::new(); self.num_sources];
        if total_in == 0 {
            return Ok(out);
        }
        // Feed the tail plus zero padding hop by hop until every frame of
        // the padded signal has been encoded. No frames beyond that are
        // created, so the frame set matches the batch path exactly.
        let total_frames = if total_in <= self.frame_len {
            1
        } else {
            (total_in - self.frame_len).div_ceil(self.hop) + 1
        };
        let mut pending: Vec<f64> = tail.to_vec();
        while self.frames_encoded < total_frames {
            pending.resize(self.hop, 0.0);
            self.ingest(&pending)?;
            pending.clear();
        }
        // Drain the network: remaining masks use zero padding for taps past
        // the final frame, matching the batch forward pass.
        let masks = self.model.tcn().stream_drain(&mut self.tcn).map_err(ModelError::from)?;
        for mask in masks {
            self.apply_mask_frame(&mask);
        }
        // Collect everything still queued.
        while let Some(hop) = self.ready_hops.pop_front() {
            for (s, h) in out.iter_mut().zip(hop) {
                s.extend(h);
            }
        }
        // Samples past the final hop boundary live only in the accumulator:
        // every frame covering them has been added, so read them out directly.
        let hop_end = total_frames * self.hop;
        if total_in > hop_end {
            for (s, o) in out.iter_mut().enumerate() {
                for pos in hop_end..total_in {
                    o.push(self.ola_acc[s][pos % self.frame_len] / self.ola_cov[pos % self.frame_len]);
                }
            }
        }
        // Trim the overshoot (hops are whole; the input need not be).
        for s in out.iter_mut() {
            let produced = emitted_by_pushes + s.len();
            if produced > total_in {
                s.truncate(s.len() - (produced - total_in));
            }
        }
        Ok(out)
    }

    fn ingest(&mut self, samples: &[f64]) -> Result<(), StreamError> {
        debug_assert_eq!(samples.len(), self.hop);
        for &s in samples {
            if !s.is_finite() {
                return Err(StreamError::Model(ModelError::Dsp(
                    crate::dsp::DspError::NonFiniteInput(self.samples_in),
                )));
            }
            self.input_ring[self.samples_in % self.frame_len] = s;
            self.samples_in += 1;
        }
        // A new frame becomes complete once samples_in >= L and advances by
        // one hop thereafter.
        while self.next_frame_end() <= self.samples_in {
            self.encode_frame()?;
        }
        Ok(())
    }

    fn next_frame_end(&self) -> usize {
        self.frames_encoded * self.hop + self.frame_len
    }

    fn encode_frame(&mut self) -> Result<(), StreamError> {
        let start = self.frames_encoded * self.hop;
        let mut frame = vec![0.0; self.frame_len];
        for (i, f) in frame.iter_mut().enumerate() {
            *f = self.window[i] * self.input_ring[(start + i) % self.frame_len];
        }
        let spec = self.model.front_end().encode_frame(&frame);
        let sep_input = self.model.front_end().separator_input_frame(&spec);
        self.spec_ring.push_back(spec);
        self.frames_encoded += 1;
        let masks = self.model.tcn().stream_push(&mut self.tcn, &sep_input).map_err(ModelError::from)?;
        for mask in masks {
            self.apply_mask_frame(&mask);
        }
        Ok(())
    }

    /// Mask frame `masks_applied` arrived: mask the matching encoded frame,
    /// decode it, add it to the overlap-add accumulators, and queue the hop
    /// that just became fully covered.
    fn apply_mask_frame(&mut self, stacked_mask: &[f64]) {
        let n = self.model.config.representation_size;
        let tau = self.masks_applied;
        let offset = tau - self.spec_ring_base;
        let spec = self.spec_ring[offset].clone();
        // Everything older than this frame is done; the ring only needs to
        // keep frames the network has not masked yet.
        while self.spec_ring_base < tau {
            self.spec_ring.pop_front();
            self.spec_ring_base += 1;
        }

        let start = tau * self.hop;
        self.slide_ola_to(start);
        for s in 0..self.num_sources {
            let mut z = vec![0.0; n];
            for r in 0..n {
                z[r] = stacked_mask[s * n + r] * spec[r];
            }
            let frame = self.model.front_end().decode_frame(&z);
            for (i, v) in frame.iter().enumerate() {
                self.ola_acc[s][(start + i) % self.frame_len] += v;
            }
        }
        for (i, &w) in self.window.iter().enumerate() {
            self.ola_cov[(start + i) % self.frame_len] += w;
        }
        self.masks_applied += 1;

        // Hop `tau` is now final: frames > tau start after its last sample.
        let hop_start = tau * self.hop;
        let mut hop_out: Vec<Vec<f64>> = Vec::with_capacity(self.num_sources);
        for s in 0..self.num_sources {
            let mut h = vec![0.0; self.hop];
            for (i, o) in h.iter_mut().enumerate() {
                let pos = hop_start + i;
                *o = self.ola_acc[s][pos % self.frame_len] / self.ola_cov[pos % self.frame_len];
            }
            hop_out.push(h);
        }
        self.ready_hops.push_back(hop_out);
    }

    /// Advance the OLA window so positions `[start, start + L)` are live,
    /// zeroing slots as they are reused.
    fn slide_ola_to(&mut self, start: usize) {
        while self.ola_base < start {
            let slot = self.ola_base % self.frame_len;
            for acc in self.ola_acc.iter_mut() {
                acc[slot] = 0.0;
            }
            self.ola_cov[slot] = 0.0;
            self.ola_base += 1;
        }
    }

    fn pop_ready(&mut self) -> Option<Vec<Vec<f64>>> {
        let hop = self.ready_hops.pop_front()?;
        self.samples_emitted += self.hop;
        Some(hop)
    }
}

/// Result of the empirical causality probe.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProbeReport {
    /// Measured future reach in the same reporting convention as the
    /// analyzer; directly
    /// comparable with [`LatencyReport::future_frames`].
    pub measured_frames: usize,
    /// Convolutional reach recovered from the sample-level measurement.
    pub conv_frames: usize,
    /// Largest observed gap, in samples, between a perturbation and the
    /// earliest output sample it changed.
    pub max_sample_gap: usize,
}

/// Measure true future dependence by running paired offline forward passes
/// on inputs differing at a single sample and locating the earliest output
/// sample that changes. The max over probe positions bounds the network's
/// future reach.
pub fn probe_causality(model: &RuntimeModel) -> Result<ProbeReport, ModelError> {
    let cfg = &model.config;
    let hop = cfg.hop();
    let m = cfg.frames_per_window();
    let declared_conv = cfg.tcn.conv_future_reach();
    let total_frames = 2 * (declared_conv + m) + 17;
    let len = (total_frames - 1) * hop + cfg.frame_length;
    let x = AudioSignal::seeded_noise(len, cfg.sample_rate, 0.5, 1234);
    let base = model.enhance(&x)?;

    // Frame-end-aligned probes maximize the measurable gap; one unaligned
    // probe guards against off-by-one bookkeeping.
    let mid = total_frames / 2;
    let probe_frames = [declared_conv + m + 1, mid, total_frames - m - 1];
    let mut positions: Vec<usize> = probe_frames
        .iter()
        .map(|&f| f * hop + cfg.frame_length - 1)
        .collect();
    positions.push(mid * hop + cfg.frame_length / 2);

    let mut max_gap = 0usize;
    for &q in &positions {
        assert!(q < len);
        let mut perturbed = x.clone();
        perturbed.samples[q] += 1e-3;
        let out = model.enhance(&perturbed)?;
        let mut first_diff = None;
        'outer: for n in 0..len {
            for s in 0..base.len() {
                if base[s].samples[n].to_bits() != out[s].samples[n].to_bits() {
                    first_diff = Some(n);
                    break 'outer;
                }
            }
        }
        if let Some(p) = first_diff {
            if q >= p {
                max_gap = max_gap.max(q - p);
            }
        }
    }

    // Invert gap = conv * hop + L - 1 to recover the convolutional reach,
    // then report it through the same accounting as the analyzer.
    let conv_frames = (max_gap + 1).saturating_sub(cfg.frame_length).div_ceil(hop);
    let measured_frames = if conv_frames > 0 { conv_frames + m } else { 1 };
    Ok(ProbeReport { measured_frames, conv_frames, max_sample_gap: max_gap })
}

/// Wall-clock timing of streaming pushes.
#[derive(Debug, Clone)]
pub struct BenchReport {
    /// Hop duration: the real-time budget per push.
    pub hop_ms: f64,
    pub frames: usize,
    pub mean_ms: f64,
    pub std_ms: f64,
    pub p50_ms: f64,
    pub p95_ms: f64,
    pub max_ms: f64,
}

/// Time per-hop inference over a whole signal (mean over all pushes).
pub fn bench_per_frame(model: &RuntimeModel, signal: &AudioSignal) -> Result<BenchReport, StreamError> {
    let hop = model.config.hop();
    let mut session = model.stream();
    let mut times_ms: Vec<f64> = Vec::new();
    let mut i = 0;
    while i + hop <= signal.len() {
        let start = Instant::now();
        let _ = session.push(&signal.samples[i..i + hop])?;
        times_ms.push(start.elapsed().as_secs_f64() * 1000.0);
        i += hop;
    }
    let _ = session.flush(&signal.samples[i..])?;
    let frames = times_ms.len();
    let mean = times_ms.iter().sum::<f64>() / frames as f64;
    let var = times_ms.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / frames as f64;
    let mut sorted = times_ms.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pick = |q: f64| sorted[((sorted.len() - 1) as f64 * q).round() as usize];
    Ok(BenchReport {
        hop_ms: hop as f64 / model.config.sample_rate as f64 * 1000.0,
        frames,
        mean_ms: mean,
        std_ms: var.sqrt(),
        p50_ms: pick(0.50),
        p95_ms: pick(0.95),
        max_ms: *sorted.last().unwrap(),
    })
}
