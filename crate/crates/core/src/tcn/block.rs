//! One dilated depthwise-separable convolution block and its streaming state.
//!
//! Block layout (in -> out): 1x1 conv to `H` channels, PReLU, cumulative
//! layer norm, depthwise conv (kernel `P`, dilated, causal or symmetric
//! padding), PReLU, cumulative layer norm, then two 1x1 convs producing the
//! residual (added to the block input) and the skip contribution.
//!
//! The streaming path pushes one frame at a time and must produce bit-equal
//! numbers to the batch path, so every accumulation here fixes the same
//! ordering in both: matvec/matmul sum the inner dimension ascending,
//! depthwise taps sum kernel-index ascending with out-of-range taps skipped,
//! and the normalization statistics advance one frame at a time.

use super::TcnError;
use crate::mat::Mat;

pub(crate) const NORM_EPS: f64 = 1e-8;

#[inline]
pub(crate) fn prelu(alpha: f64, x: f64) -> f64 {
    if x >= 0.0 {
        x
    } else {
        alpha * x
    }
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Per-channel affine weights of a cumulative layer norm.
#[derive(Debug, Clone)]
pub(crate) struct ClnParams {
    pub gain: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Running statistics over (channels x frames <= t).
#[derive(Debug, Clone, Default)]
pub(crate) struct ClnState {
    frames: u64,
    sum: f64,
    sumsq: f64,
}

impl ClnParams {
    /// Fold the frame into the running statistics, then normalize it in
    /// place. Statistics accumulate channel-ascending within the frame.
    pub fn apply_frame(&self, state: &mut ClnState, frame: &mut [f64]) {
        debug_assert_eq!(frame.len(), self.gain.len());
        let mut fsum = 0.0;
        let mut fsumsq = 0.0;
        for &x in frame.iter() {
            fsum += x;
            fsumsq += x * x;
        }
        state.sum += fsum;
        state.sumsq += fsumsq;
        state.frames += 1;
        let n = (frame.len() as u64 * state.frames) as f64;
        let mean = state.sum / n;
        let var = (state.sumsq / n - mean * mean).max(0.0);
        let inv = 1.0 / (var + NORM_EPS).sqrt();
        for (ch, x) in frame.iter_mut().enumerate() {
            *x = self.gain[ch] * ((*x - mean) * inv) + self.bias[ch];
        }
    }

    /// Batch variant: frames left to right through the same per-frame
    /// update, run over a transposed copy so each frame is contiguous.
    pub fn apply_offline(&self, data: &mut Mat) {
        let mut frames_major = data.transposed();
        let mut state = ClnState::default();
        for t in 0..frames_major.rows() {
            self.apply_frame(&mut state, frames_major.row_mut(t));
        }
        *data = frames_major.transposed();
    }
}

/// One emitted frame: the residual output and the skip contribution.
pub type BlockOutput = (Vec<f64>, Vec<f64>);

/// Weights and geometry of one block.
#[derive(Debug, Clone)]
pub struct ConvBlock {
    pub dilation: usize,
    pub causal: bool,
    pub(crate) kernel: usize,
    pub(crate) conv_in_w: Mat,
    pub(crate) conv_in_b: Vec<f64>,
    pub(crate) prelu_in: f64,
    pub(crate) norm_in: ClnParams,
    pub(crate) dconv_w: Mat,
    pub(crate) dconv_b: Vec<f64>,
    pub(crate) prelu_d: f64,
    pub(crate) norm_d: ClnParams,
    pub(crate) res_w: Mat,
    pub(crate) res_b: Vec<f64>,
    pub(crate) skip_w: Mat,
    pub(crate) skip_b: Vec<f64>,
}

impl ConvBlock {
    pub fn in_channels(&self) -> usize {
        self.conv_in_w.cols()
    }

    pub fn skip_channels(&self) -> usize {
        self.skip_w.rows()
    }

    /// Frames of look-ahead this block needs before it can emit a frame.
    pub fn lag(&self) -> usize {
        if self.causal {
            0
        } else {
            self.dilation * (self.kernel - 1) / 2
        }
    }

    fn check_input(&self, rows: usize) -> Result<(), TcnError> {
        if rows != self.in_channels() {
            return Err(TcnError::ShapeMismatch {
                expected: format!("{} input channels", self.in_channels()),
                got: format!("{rows}"),
            });
        }
        Ok(())
    }

    /// Signed tap position for output frame `t` and kernel index `k`.
    #[inline]
    fn tap(&self, t: usize, k: usize) -> isize {
        if self.causal {
            t as isize - ((self.kernel - 1 - k) * self.dilation) as isize
        } else {
            let c = (self.kernel - 1) / 2;
            t as isize + (k as isize - c as isize) * self.dilation as isize
        }
    }

    /// Depthwise convolution at one output frame, reading taps from the
    /// streaming history ring. Taps outside `[0, frames_in)` are zero padding
    /// and are skipped, exactly like the batch path.
    fn dconv_at(&self, t: usize, hist: &FrameRing, frames_in: usize) -> Vec<f64> {
        let h = self.dconv_w.rows();
        let mut out = vec![0.0; h];
        for k in 0..self.kernel {
            let pos = self.tap(t, k);
            if pos < 0 || pos >= frames_in as isize {
                continue;
            }
            let frame = hist.get(pos as usize);
            for ch in 0..h {
                out[ch] += self.dconv_w.get(ch, k) * frame[ch];
            }
        }
        for (ch, o) in out.iter_mut().enumerate() {
            *o += self.dconv_b[ch];
        }
        out
    }

    fn post_dconv(&self, mut y: Vec<f64>, norm_d: &mut ClnState, input_frame: &[f64]) -> BlockOutput {
        for v in y.iter_mut() {
            *v = prelu(self.prelu_d, *v);
        }
        self.norm_d.apply_frame(norm_d, &mut y);
        let mut res = self.res_w.matvec(&y);
        for (ch, r) in res.iter_mut().enumerate() {
            *r += self.res_b[ch];
            *r += input_frame[ch];
        }
        let mut skip = self.skip_w.matvec(&y);
        for (ch, s) in skip.iter_mut().enumerate() {
            *s += self.skip_b[ch];
        }
        (res, skip)
    }

    fn pre_frame(&self, input: &[f64], norm_in: &mut ClnState) -> Vec<f64> {
        let mut v = self.conv_in_w.matvec(input);
        for (ch, x) in v.iter_mut().enumerate() {
            *x += self.conv_in_b[ch];
            *x = prelu(self.prelu_in, *x);
        }
        self.norm_in.apply_frame(norm_in, &mut v);
        v
    }

    /// Batch forward over a full `B x T` input. Returns the residual output
    /// (`B x T`) and the skip contribution (`Sc x T`). Arithmetic mirrors the
    /// streaming path operation for operation: matmuls share the matvec
    /// summation grouping, depthwise taps sum kernel-index ascending with
    /// out-of-range taps skipped, biases come after the sums, and the
    /// normalizations advance frame by frame.
    pub fn forward_offline(&self, input: &Mat) -> Result<(Mat, Mat), TcnError> {
        self.check_input(input.rows())?;
        let t_total = input.cols();
        let h = self.dconv_w.rows();

        let mut pre = self.conv_in_w.matmul(input);
        for ch in 0..h {
            let b = self.conv_in_b[ch];
            for v in pre.row_mut(ch) {
                *v += b;
                *v = prelu(self.prelu_in, *v);
            }
        }
        self.norm_in.apply_offline(&mut pre);

        let mut d = Mat::zeros(h, t_total);
        for ch in 0..h {
            let taps = self.dconv_w.row(ch).to_vec();
            let bias = self.dconv_b[ch];
            let pre_row = pre.row(ch);
            let d_row = d.row_mut(ch);
            for (t, out) in d_row.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (k, &w) in taps.iter().enumerate() {
                    let pos = self.tap(t, k);
                    if pos >= 0 && pos < t_total as isize {
                        acc += w * pre_row[pos as usize];
                    }
                }
                *out = prelu(self.prelu_d, acc + bias);
            }
        }
        self.norm_d.apply_offline(&mut d);

        let mut out = self.res_w.matmul(&d);
        for ch in 0..out.rows() {
            let b = self.res_b[ch];
            let input_row = input.row(ch);
            for (v, &x) in out.row_mut(ch).iter_mut().zip(input_row.iter()) {
                *v += b;
                *v += x;
            }
        }
        let mut skip = self.skip_w.matmul(&d);
        for ch in 0..skip.rows() {
            let b = self.skip_b[ch];
            for v in skip.row_mut(ch) {
                *v += b;
            }
        }
        Ok((out, skip))
    }

    pub fn stream_state(&self) -> BlockStream {
        let span = (self.kernel - 1) * self.dilation + 1;
        BlockStream {
            hist: FrameRing::new(span),
            input_hist: FrameRing::new(self.lag() + 1),
            norm_in: ClnState::default(),
            norm_d: ClnState::default(),
            frames_in: 0,
            frames_out: 0,
        }
    }

    /// Push one input frame; returns the (residual, skip) frame that became
    /// computable, if any.
    pub fn stream_push(&self, st: &mut BlockStream, input: &[f64]) -> Result<Option<BlockOutput>, TcnError> {
        self.check_input(input.len())?;
        let v = self.pre_frame(input, &mut st.norm_in);
        st.hist.push(st.frames_in, v);
        st.input_hist.push(st.frames_in, input.to_vec());
        st.frames_in += 1;
        Ok(self.try_emit(st, false))
    }

    /// Emit the remaining frames once no further input will arrive; future
    /// taps past the end read as zero padding, matching the batch path.
    pub fn stream_drain(&self, st: &mut BlockStream) -> Vec<BlockOutput> {
        let mut out = Vec::new();
        while let Some(pair) = self.try_emit(st, true) {
            out.push(pair);
        }
        out
    }

    fn try_emit(&self, st: &mut BlockStream, ended: bool) -> Option<BlockOutput> {
        let t = st.frames_out;
        let ready = if ended {
            t < st.frames_in
        } else {
            t + self.lag() < st.frames_in
        };
        if !ready {
            return None;
        }
        let y = self.dconv_at(t, &st.hist, st.frames_in);
        let input_frame = st.input_hist.get(t).to_vec();
        let (res, skip) = self.post_dconv(y, &mut st.norm_d, &input_frame);
        st.frames_out += 1;
        Some((res, skip))
    }
}

/// Fixed-capacity ring of frames addressed by absolute frame index.
#[derive(Debug, Clone)]
pub(crate) struct FrameRing {
    cap: usize,
    slots: Vec<Vec<f64>>,
    newest: Option<usize>,
}

impl FrameRing {
    pub fn new(cap: usize) -> Self {
        Self { cap, slots: vec![Vec::new(); cap], newest: None }
    }

    pub fn push(&mut self, index: usize, frame: Vec<f64>) {
        debug_assert_eq!(self.newest.map_or(0, |n| n + 1), index, "frames must arrive in order");
        self.slots[index % self.cap] = frame;
        self.newest = Some(index);
    }

    pub fn get(&self, index: usize) -> &[f64] {
        let newest = self.newest.expect("ring is empty");
        assert!(index <= newest && index + self.cap > newest, "frame {index} evicted");
        &self.slots[index % self.cap]
    }
}

/// Mutable per-stream state of one block.
#[derive(Debug, Clone)]
pub struct BlockStream {
    hist: FrameRing,
    input_hist: FrameRing,
    norm_in: ClnState,
    norm_d: ClnState,
    frames_in: usize,
    frames_out: usize,
}

impl BlockStream {
    pub fn frames_out(&self) -> usize {
        self.frames_out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn random_block(seed: u64, b: usize, h: usize, sc: usize, kernel: usize, dilation: usize, causal: bool) -> ConvBlock {
        let mut rng = SplitMix64::new(seed);
        let mut mat = |rows: usize, cols: usize| {
            let bound = 1.0 / (cols as f64).sqrt();
            Mat::from_fn(rows, cols, |_, _| rng.uniform(bound))
        };
        let conv_in_w = mat(h, b);
        let dconv_w = mat(h, kernel);
        let res_w = mat(b, h);
        let skip_w = mat(sc, h);
        let mut vecr = |n: usize, bound: f64| (0..n).map(|_| rng.uniform(bound)).collect::<Vec<_>>();
        ConvBlock {
            dilation,
            causal,
            kernel,
            conv_in_b: vecr(h, 0.1),
            dconv_b: vecr(h, 0.1),
            res_b: vecr(b, 0.1),
            skip_b: vecr(sc, 0.1),
            conv_in_w,
            prelu_in: 0.25,
            norm_in: ClnParams { gain: vec![1.0; h], bias: vec![0.0; h] },
            dconv_w,
            prelu_d: 0.25,
            norm_d: ClnParams { gain: vec![1.0; h], bias: vec![0.0; h] },
            res_w,
            skip_w,
        }
    }

    fn random_input(seed: u64, rows: usize, cols: usize) -> Mat {
        let mut rng = SplitMix64::new(seed);
        Mat::from_fn(rows, cols, |_, _| rng.uniform(1.0))
    }

    #[test]
    fn causal_block_ignores_future_bitwise() {
        let block = random_block(1, 6, 10, 4, 3, 4, true);
        let t_probe = 12;
        let input = random_input(2, 6, 24);
        let (base, _) = block.forward_offline(&input).unwrap();
        let mut perturbed = input.clone();
        perturbed.set(3, t_probe + 1, perturbed.get(3, t_probe + 1) + 0.5);
        let (out, _) = block.forward_offline(&perturbed).unwrap();
        for t in 0..=t_probe {
            for ch in 0..6 {
                assert_eq!(base.get(ch, t).to_bits(), out.get(ch, t).to_bits());
            }
        }
    }

    #[test]
    fn noncausal_block_reach_is_exactly_dilation() {
        let d = 3;
        let block = random_block(7, 5, 8, 4, 3, d, false);
        let input = random_input(8, 5, 30);
        let (base, _) = block.forward_offline(&input).unwrap();
        let t = 10usize;

        // Perturbation at t+d changes the output at t.
        let mut p1 = input.clone();
        p1.set(2, t + d, p1.get(2, t + d) + 1.0);
        let (out1, _) = block.forward_offline(&p1).unwrap();
        let changed = (0..5).any(|ch| out1.get(ch, t) != base.get(ch, t));
        assert!(changed);

        // Perturbation at t+d+1 does not (bitwise), because cumulative norm
        // statistics only look backwards.
        let mut p2 = input.clone();
        p2.set(2, t + d + 1, p2.get(2, t + d + 1) + 1.0);
        let (out2, _) = block.forward_offline(&p2).unwrap();
        for ch in 0..5 {
            assert_eq!(out2.get(ch, t).to_bits(), base.get(ch, t).to_bits());
        }
    }

    #[test]
    fn identity_path_with_zero_out_convs() {
        let mut block = random_block(3, 4, 6, 5, 3, 2, false);
        // Centered delta depthwise kernel, zeroed residual/skip convs.
        block.dconv_w = Mat::from_fn(6, 3, |_, k| if k == 1 { 1.0 } else { 0.0 });
        block.res_w = Mat::zeros(4, 6);
        block.res_b = vec![0.0; 4];
        block.skip_w = Mat::zeros(5, 6);
        block.skip_b = vec![0.0; 5];
        let input = random_input(4, 4, 12);
        let (out, skip) = block.forward_offline(&input).unwrap();
        assert_eq!(out, input);
        assert!(skip.iter().all(|v| v == 0.0));
    }

    #[test]
    fn shape_mismatch_reported() {
        let block = random_block(5, 4, 6, 5, 3, 1, true);
        let input = random_input(6, 7, 10);
        assert!(matches!(block.forward_offline(&input), Err(TcnError::ShapeMismatch { .. })));
    }

    #[test]
    fn streaming_matches_offline_bitwise() {
        for (causal, dilation) in [(true, 1), (true, 4), (false, 1), (false, 4)] {
            let block = random_block(11, 5, 9, 4, 3, dilation, causal);
            let t_total = 37;
            let input = random_input(13, 5, t_total);
            let (off_out, off_skip) = block.forward_offline(&input).unwrap();

            let mut st = block.stream_state();
            let mut got: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
            for t in 0..t_total {
                if let Some(pair) = block.stream_push(&mut st, &input.column(t)).unwrap() {
                    got.push(pair);
                }
            }
            got.extend(block.stream_drain(&mut st));
            assert_eq!(got.len(), t_total);
            for (t, (res, skip)) in got.iter().enumerate() {
                for (ch, v) in res.iter().enumerate() {
                    assert_eq!(v.to_bits(), off_out.get(ch, t).to_bits(), "causal={causal} d={dilation} t={t}");
                }
                for (ch, v) in skip.iter().enumerate() {
                    assert_eq!(v.to_bits(), off_skip.get(ch, t).to_bits());
                }
            }
        }
    }
}
