//! Full separation network: input norm, bottleneck, block stack, mask head.

use super::block::{prelu, sigmoid, BlockStream, ClnParams, ClnState, ConvBlock};
use super::{MaskActivation, MaskSet, TcnConfig, TcnError};
use crate::mat::Mat;

#[derive(Debug, Clone)]
pub struct TcnNetwork {
    pub config: TcnConfig,
    pub(crate) input_dim: usize,
    pub(crate) input_norm: ClnParams,
    pub(crate) bottleneck_w: Mat,
    pub(crate) blocks: Vec<ConvBlock>,
    pub(crate) mask_prelu: f64,
    pub(crate) mask_w: Mat,
}

impl TcnNetwork {
    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn blocks(&self) -> &[ConvBlock] {
        &self.blocks
    }

    fn activate(&self, x: f64) -> f64 {
        match self.config.mask_activation {
            MaskActivation::Sigmoid => sigmoid(x),
            MaskActivation::Identity => x,
        }
    }

    /// Estimate `K` masks for an `N x T` representation. Deterministic for
    /// fixed weights and input.
    pub fn forward(&self, input: &Mat) -> Result<MaskSet, TcnError> {
        if input.rows() != self.input_dim {
            return Err(TcnError::ShapeMismatch {
                expected: format!("{} representation rows", self.input_dim),
                got: format!("{}", input.rows()),
            });
        }
        let t_total = input.cols();
        let mut x = input.clone();
        self.input_norm.apply_offline(&mut x);
        let mut x = self.bottleneck_w.matmul(&x);

        let mut skips = Mat::zeros(self.config.skip_channels, t_total);
        for (i, block) in self.blocks.iter().enumerate() {
            let (next, skip) = block.forward_offline(&x)?;
            if !next.is_finite() || !skip.is_finite() {
                return Err(TcnError::NumericalDivergence { block: i });
            }
            skips.add_assign(&skip);
            x = next;
        }

        let head = skips.map(|v| prelu(self.mask_prelu, v));
        let stacked = self.mask_w.matmul(&head).map(|v| self.activate(v));
        Ok(self.split_masks(&stacked))
    }

    fn split_masks(&self, stacked: &Mat) -> MaskSet {
        let n = self.input_dim;
        let k = self.config.num_sources;
        let t_total = stacked.cols();
        debug_assert_eq!(stacked.rows(), k * n);
        let masks = (0..k)
            .map(|s| Mat::from_fn(n, t_total, |r, c| stacked.get(s * n + r, c)))
            .collect();
        MaskSet { masks }
    }

    pub fn stream_state(&self) -> TcnStream {
        let reach = self.config.conv_future_reach();
        TcnStream {
            input_norm: ClnState::default(),
            blocks: self.blocks.iter().map(|b| b.stream_state()).collect(),
            skip_ring: SkipRing::new(reach + 2, self.config.skip_channels),
            masks_emitted: 0,
        }
    }

    /// Push one representation frame; returns any mask frames (stacked
    /// `K * N` columns) that became computable.
    pub fn stream_push(&self, st: &mut TcnStream, frame: &[f64]) -> Result<Vec<Vec<f64>>, TcnError> {
        if frame.len() != self.input_dim {
            return Err(TcnError::ShapeMismatch {
                expected: format!("{} representation rows", self.input_dim),
                got: format!("{}", frame.len()),
            });
        }
        let mut v = frame.to_vec();
        self.input_norm.apply_frame(&mut st.input_norm, &mut v);
        let v = self.bottleneck_w.matvec(&v);
        self.cascade(st, 0, vec![v])?;
        Ok(self.collect_masks(st))
    }

    /// Drain every block once input has ended, then emit the remaining masks.
    /// Draining runs in stack order; frames flushed out of block `i` still
    /// pass through blocks `i+1..` as ordinary pushes.
    pub fn stream_drain(&self, st: &mut TcnStream) -> Result<Vec<Vec<f64>>, TcnError> {
        for i in 0..self.blocks.len() {
            let drained = self.blocks[i].stream_drain(&mut st.blocks[i]);
            let start = st.blocks[i].frames_out() - drained.len();
            let mut residuals = Vec::with_capacity(drained.len());
            for (offset, (res, skip)) in drained.into_iter().enumerate() {
                self.check_frame_finite(&res, i)?;
                self.check_frame_finite(&skip, i)?;
                st.skip_ring.add(start + offset, &skip);
                residuals.push(res);
            }
            self.cascade(st, i + 1, residuals)?;
        }
        Ok(self.collect_masks(st))
    }

    /// Feed frames into the block chain starting at `stage`, recording skip
    /// contributions as blocks emit.
    fn cascade(&self, st: &mut TcnStream, stage: usize, frames: Vec<Vec<f64>>) -> Result<(), TcnError> {
        let mut carry = frames;
        for i in stage..self.blocks.len() {
            let mut next = Vec::with_capacity(carry.len());
            for f in carry {
                if let Some((res, skip)) = self.blocks[i].stream_push(&mut st.blocks[i], &f)? {
                    self.check_frame_finite(&res, i)?;
                    self.check_frame_finite(&skip, i)?;
                    let tau = st.blocks[i].frames_out() - 1;
                    st.skip_ring.add(tau, &skip);
                    next.push(res);
                }
            }
            carry = next;
        }
        Ok(())
    }

    fn check_frame_finite(&self, frame: &[f64], block: usize) -> Result<(), TcnError> {
        if frame.iter().any(|v| !v.is_finite()) {
            return Err(TcnError::NumericalDivergence { block });
        }
        Ok(())
    }

    fn collect_masks(&self, st: &mut TcnStream) -> Vec<Vec<f64>> {
        let ready = st.blocks.last().map_or(0, |b| b.frames_out());
        let mut out = Vec::new();
        while st.masks_emitted < ready {
            let mut h = st.skip_ring.take(st.masks_emitted);
            for v in h.iter_mut() {
                *v = prelu(self.mask_prelu, *v);
            }
            let mask: Vec<f64> = self.mask_w.matvec(&h).into_iter().map(|v| self.activate(v)).collect();
            out.push(mask);
            st.masks_emitted += 1;
        }
        out
    }
}

/// Streaming state for the whole network.
#[derive(Debug, Clone)]
pub struct TcnStream {
    input_norm: ClnState,
    blocks: Vec<BlockStream>,
    skip_ring: SkipRing,
    masks_emitted: usize,
}

/// Partial skip sums per pending frame, addressed by absolute frame index.
/// Blocks contribute in stack order because block `i+1` cannot emit a frame
/// before block `i` has, which keeps the summation order identical to the
/// batch path.
#[derive(Debug, Clone)]
struct SkipRing {
    cap: usize,
    channels: usize,
    slots: Vec<Vec<f64>>,
    taken: usize,
}

impl SkipRing {
    fn new(cap: usize, channels: usize) -> Self {
        Self { cap, channels, slots: vec![vec![0.0; channels]; cap], taken: 0 }
    }

    fn add(&mut self, index: usize, skip: &[f64]) {
        assert!(index >= self.taken && index < self.taken + self.cap, "skip ring overflow at {index}");
        let slot = &mut self.slots[index % self.cap];
        for (a, b) in slot.iter_mut().zip(skip.iter()) {
            *a += b;
        }
    }

    fn take(&mut self, index: usize) -> Vec<f64> {
        assert_eq!(index, self.taken, "masks must be taken in order");
        let slot = &mut self.slots[index % self.cap];
        let out = std::mem::replace(slot, vec![0.0; self.channels]);
        self.taken += 1;
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;
    use crate::tcn::block::ClnParams;

    /// Small seeded network for unit tests; mirrors the init scheme used by
    /// the model layer but stays independent of it.
    pub(crate) fn tiny_network(seed: u64, config: TcnConfig, input_dim: usize) -> TcnNetwork {
        let mut rng = SplitMix64::new(seed);
        let mut mat = |rows: usize, cols: usize| {
            let bound = 1.0 / (cols as f64).sqrt();
            Mat::from_fn(rows, cols, |_, _| rng.uniform(bound))
        };
        let bottleneck_w = mat(config.bottleneck_channels, input_dim);
        let mut blocks = Vec::new();
        for i in 0..config.num_blocks() {
            let b = config.bottleneck_channels;
            let h = config.conv_channels;
            let sc = config.skip_channels;
            let conv_in_w = mat(h, b);
            let dconv_w = mat(h, config.kernel_size);
            let res_w = mat(b, h);
            let skip_w = mat(sc, h);
            let mut rng2 = SplitMix64::new(seed ^ (i as u64 + 1));
            let mut vecr = |n: usize| (0..n).map(|_| rng2.uniform(0.1)).collect::<Vec<_>>();
            blocks.push(ConvBlock {
                dilation: config.dilation(i),
                causal: !config.is_noncausal(i),
                kernel: config.kernel_size,
                conv_in_b: vecr(h),
                dconv_b: vecr(h),
                res_b: vecr(b),
                skip_b: vecr(sc),
                conv_in_w,
                prelu_in: 0.25,
                norm_in: ClnParams { gain: vec![1.0; h], bias: vec![0.0; h] },
                dconv_w,
                prelu_d: 0.25,
                norm_d: ClnParams { gain: vec![1.0; h], bias: vec![0.0; h] },
                res_w,
                skip_w,
            });
        }
        let mask_w = mat(config.num_sources * input_dim, config.skip_channels);
        TcnNetwork {
            config,
            input_dim,
            input_norm: ClnParams { gain: vec![1.0; input_dim], bias: vec![0.0; input_dim] },
            bottleneck_w,
            blocks,
            mask_prelu: 0.25,
            mask_w,
        }
    }

    fn small_config(noncausal: usize, activation: MaskActivation) -> TcnConfig {
        TcnConfig {
            bottleneck_channels: 6,
            conv_channels: 10,
            kernel_size: 3,
            blocks_per_repeat: 3,
            repeats: 2,
            skip_channels: 6,
            noncausal_layers: noncausal,
            mask_activation: activation,
            num_sources: 2,
        }
    }

    fn random_rep(seed: u64, rows: usize, cols: usize) -> Mat {
        let mut rng = SplitMix64::new(seed);
        Mat::from_fn(rows, cols, |_, _| rng.uniform(1.0))
    }

    #[test]
    fn sigmoid_masks_in_unit_interval() {
        let net = tiny_network(2, small_config(2, MaskActivation::Sigmoid), 12);
        let masks = net.forward(&random_rep(3, 12, 40)).unwrap();
        assert_eq!(masks.num_sources(), 2);
        for m in &masks.masks {
            assert!(m.iter().all(|v| (0.0..=1.0).contains(&v)));
        }
    }

    #[test]
    fn identity_masks_produce_negative_entries() {
        let net = tiny_network(0, small_config(2, MaskActivation::Identity), 12);
        let masks = net.forward(&random_rep(5, 12, 40)).unwrap();
        assert!(masks.masks.iter().any(|m| m.iter().any(|v| v < 0.0)));
    }

    #[test]
    fn zero_mask_head_gives_half_under_sigmoid() {
        let mut net = tiny_network(6, small_config(1, MaskActivation::Sigmoid), 8);
        net.mask_w = Mat::zeros(net.mask_w.rows(), net.mask_w.cols());
        let masks = net.forward(&random_rep(7, 8, 10)).unwrap();
        for m in &masks.masks {
            assert!(m.iter().all(|v| v == 0.5));
        }
    }

    #[test]
    fn forward_is_deterministic_bitwise() {
        let net = tiny_network(9, small_config(3, MaskActivation::Sigmoid), 10);
        let rep = random_rep(11, 10, 25);
        let a = net.forward(&rep).unwrap();
        let b = net.forward(&rep).unwrap();
        for (ma, mb) in a.masks.iter().zip(b.masks.iter()) {
            assert_eq!(ma.data(), mb.data());
        }
    }

    #[test]
    fn causal_network_output_independent_of_future() {
        let net = tiny_network(4, small_config(0, MaskActivation::Sigmoid), 10);
        let mut rng = SplitMix64::new(77);
        for _ in 0..20 {
            let seed = rng.next_u64() % 1000;
            let rep = random_rep(seed, 10, 30);
            let t = 5 + (rng.next_u64() % 20) as usize;
            let base = net.forward(&rep).unwrap();
            let mut pert = rep.clone();
            pert.set(3, t + 1, pert.get(3, t + 1) + 1.0);
            let out = net.forward(&pert).unwrap();
            for (mb, mo) in base.masks.iter().zip(out.masks.iter()) {
                for tt in 0..=t {
                    for r in 0..10 {
                        assert_eq!(mb.get(r, tt).to_bits(), mo.get(r, tt).to_bits());
                    }
                }
            }
        }
    }

    #[test]
    fn streaming_masks_match_offline_bitwise() {
        for noncausal in [0usize, 2, 4] {
            let net = tiny_network(21, small_config(noncausal, MaskActivation::Sigmoid), 12);
            let t_total = 33;
            let rep = random_rep(23, 12, t_total);
            let offline = net.forward(&rep).unwrap();

            let mut st = net.stream_state();
            let mut got: Vec<Vec<f64>> = Vec::new();
            for t in 0..t_total {
                got.extend(net.stream_push(&mut st, &rep.column(t)).unwrap());
            }
            got.extend(net.stream_drain(&mut st).unwrap());
            assert_eq!(got.len(), t_total);
            let n = net.input_dim;
            for (t, mask) in got.iter().enumerate() {
                for s in 0..2 {
                    for r in 0..n {
                        assert_eq!(
                            mask[s * n + r].to_bits(),
                            offline.masks[s].get(r, t).to_bits(),
                            "noncausal={noncausal} t={t}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn nan_weights_reported_with_block_index() {
        let mut net = tiny_network(2, small_config(0, MaskActivation::Sigmoid), 8);
        net.blocks[3].dconv_b[0] = f64::NAN;
        match net.forward(&random_rep(1, 8, 6)) {
            Err(TcnError::NumericalDivergence { block }) => assert_eq!(block, 3),
            other => panic!("expected divergence, got {other:?}"),
        }
    }
}
