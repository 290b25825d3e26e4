//! The TCN separation block: bottleneck, stacked dilated depthwise-separable
//! convolution blocks with residual and skip paths, and the mask-estimation
//! head.
//!
//! Causality is controlled per layer: the first `noncausal_layers` blocks in
//! stack order (repeat-major, dilation-minor) pad symmetrically and therefore
//! look `dilation * (kernel - 1) / 2` frames ahead; the remaining blocks pad
//! only the past side. All normalization is cumulative (statistics over
//! frames `<= t`), so a block's future reach comes from its convolution taps
//! alone and streaming inference can reproduce batch inference exactly.

mod block;
mod network;

pub use block::{BlockOutput, ConvBlock};
pub use network::{TcnNetwork, TcnStream};

pub(crate) use block::ClnParams;

use crate::mat::Mat;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TcnError {
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },
    #[error("non-finite activation in block {block}")]
    NumericalDivergence { block: usize },
    #[error("invalid TCN config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskActivation {
    /// Bounds every mask entry to `[0, 1]`.
    Sigmoid,
    /// Leaves mask entries unbounded so they can flip the sign of
    /// real/imaginary spectrum entries.
    Identity,
}

/// Shape of the separation network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TcnConfig {
    pub bottleneck_channels: usize,
    pub conv_channels: usize,
    pub kernel_size: usize,
    pub blocks_per_repeat: usize,
    pub repeats: usize,
    pub skip_channels: usize,
    /// The first `noncausal_layers` blocks in stack order look ahead.
    pub noncausal_layers: usize,
    pub mask_activation: MaskActivation,
    pub num_sources: usize,
}

impl TcnConfig {
    /// The canonical best configuration of the original convolutional
    /// TasNet, which both model presets reuse.
    pub fn canonical(mask_activation: MaskActivation, noncausal_layers: usize) -> Self {
        Self {
            bottleneck_channels: 128,
            conv_channels: 512,
            kernel_size: 3,
            blocks_per_repeat: 8,
            repeats: 3,
            skip_channels: 128,
            noncausal_layers,
            mask_activation,
            num_sources: 2,
        }
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks_per_repeat * self.repeats
    }

    /// Dilation of block `i` in stack order: `2^(i mod blocks_per_repeat)`.
    pub fn dilation(&self, block: usize) -> usize {
        1 << (block % self.blocks_per_repeat)
    }

    pub fn is_noncausal(&self, block: usize) -> bool {
        block < self.noncausal_layers
    }

    /// Future frames each noncausal block contributes, summed over the stack:
    /// `sum dilation * (kernel - 1) / 2`. Zero for a fully causal stack.
    pub fn conv_future_reach(&self) -> usize {
        (0..self.num_blocks())
            .filter(|&i| self.is_noncausal(i))
            .map(|i| self.dilation(i) * (self.kernel_size - 1) / 2)
            .sum()
    }

    pub fn validate(&self) -> Result<(), TcnError> {
        if self.num_blocks() == 0 {
            return Err(TcnError::InvalidConfig("at least one block required".into()));
        }
        if self.noncausal_layers > self.num_blocks() {
            return Err(TcnError::InvalidConfig(format!(
                "noncausal layer count {} exceeds block count {}",
                self.noncausal_layers,
                self.num_blocks()
            )));
        }
        if self.kernel_size == 0 || self.kernel_size.is_multiple_of(2) {
            return Err(TcnError::InvalidConfig(format!(
                "kernel size must be odd for symmetric look-ahead, got {}",
                self.kernel_size
            )));
        }
        if self.num_sources == 0 {
            return Err(TcnError::InvalidConfig("num_sources must be >= 1".into()));
        }
        if self.bottleneck_channels == 0
            || self.conv_channels == 0
            || self.skip_channels == 0
        {
            return Err(TcnError::InvalidConfig("channel counts must be positive".into()));
        }
        Ok(())
    }
}

/// Future input frames that can influence the current output frame, in the
/// accounting used throughout: a stack with noncausal layers sees its
/// convolutional reach plus the `L/hop` frames spanned by the encoder/decoder
/// windows; a fully causal stack is reported as the single frame currently
/// being filled. The empirical prober in the streaming module measures the
/// same quantity from perturbations.
pub fn future_reach(config: &TcnConfig, frames_per_window: usize) -> usize {
    let conv = config.conv_future_reach();
    if conv > 0 {
        conv + frames_per_window
    } else {
        1
    }
}

/// `K` masks, each `N x T`.
#[derive(Debug, Clone)]
pub struct MaskSet {
    pub masks: Vec<Mat>,
}

impl MaskSet {
    pub fn num_sources(&self) -> usize {
        self.masks.len()
    }

    pub fn ones(num_sources: usize, rows: usize, cols: usize) -> Self {
        Self { masks: (0..num_sources).map(|_| Mat::from_fn(rows, cols, |_, _| 1.0)).collect() }
    }

    pub fn zeros(num_sources: usize, rows: usize, cols: usize) -> Self {
        Self { masks: (0..num_sources).map(|_| Mat::zeros(rows, cols)).collect() }
    }

    pub fn constant(num_sources: usize, rows: usize, cols: usize, value: f64) -> Self {
        Self { masks: (0..num_sources).map(|_| Mat::from_fn(rows, cols, |_, _| value)).collect() }
    }
}
