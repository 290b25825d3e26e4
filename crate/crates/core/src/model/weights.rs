//! Named weight tensors and their deterministic initialization.
//!
//! Tensors are stored as row-major `f32` (matching the on-disk container)
//! and lifted to `f64` when the runtime model is built. The initialization
//! order is fixed and documented by [`ModelConfig::tensor_spec`]: tensors are
//! generated in spec order from a single splitmix64 stream, convolution
//! weights and biases uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`;
//! normalization gains start at one, normalization biases at zero, and PReLU
//! slopes at 0.25. Constant tensors do not consume random draws.

use super::{EncoderKind, ModelConfig, ModelError};
use crate::mat::Mat;
use crate::rng::SplitMix64;
use crate::tcn::{ClnParams, ConvBlock, TcnNetwork};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitKind {
    Uniform { fan_in: usize },
    Ones,
    Zeros,
    Const(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorSpec {
    pub name: String,
    pub dims: Vec<usize>,
    pub init: InitKind,
}

impl TensorSpec {
    pub fn numel(&self) -> usize {
        self.dims.iter().product()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub dims: Vec<usize>,
    pub data: Vec<f32>,
}

impl Tensor {
    pub fn numel(&self) -> usize {
        self.dims.iter().product()
    }

    /// Rank-2 tensor as an `f64` matrix.
    pub fn to_mat(&self) -> Mat {
        assert_eq!(self.dims.len(), 2, "tensor {} is not rank 2", self.name);
        let cols = self.dims[1];
        Mat::from_fn(self.dims[0], cols, |r, c| self.data[r * cols + c] as f64)
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.data.iter().map(|&v| v as f64).collect()
    }

    pub fn scalar(&self) -> f64 {
        assert_eq!(self.numel(), 1, "tensor {} is not a scalar", self.name);
        self.data[0] as f64
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ModelWeights {
    pub tensors: Vec<Tensor>,
}

impl ModelWeights {
    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|t| t.name == name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.tensors.iter_mut().find(|t| t.name == name)
    }

    pub fn total_params(&self) -> usize {
        self.tensors.iter().map(Tensor::numel).sum()
    }

    /// Check that the tensor set exactly matches the config (no missing or
    /// extra names, exact shapes, all values finite).
    pub fn validate_against(&self, config: &ModelConfig) -> Result<(), ModelError> {
        let spec = config.tensor_spec();
        for s in &spec {
            let t = self.get(&s.name).ok_or_else(|| {
                ModelError::WeightsConfigMismatch(format!("missing tensor {}", s.name))
            })?;
            if t.dims != s.dims {
                return Err(ModelError::WeightsConfigMismatch(format!(
                    "tensor {} has shape {:?}, config expects {:?}",
                    s.name, t.dims, s.dims
                )));
            }
            if t.data.len() != t.numel() {
                return Err(ModelError::WeightsConfigMismatch(format!(
                    "tensor {} has {} values for shape {:?}",
                    s.name,
                    t.data.len(),
                    t.dims
                )));
            }
            if !t.data.iter().all(|v| v.is_finite()) {
                return Err(ModelError::WeightsConfigMismatch(format!(
                    "tensor {} contains non-finite values",
                    s.name
                )));
            }
        }
        if self.tensors.len() != spec.len() {
            let extra: Vec<&str> = self
                .tensors
                .iter()
                .filter(|t| !spec.iter().any(|s| s.name == t.name))
                .map(|t| t.name.as_str())
                .collect();
            return Err(ModelError::WeightsConfigMismatch(format!(
                "unexpected tensors: {}",
                extra.join(", ")
            )));
        }
        Ok(())
    }
}

impl ModelConfig {
    /// The full named-tensor layout for this config, in initialization and
    /// serialization order.
    pub fn tensor_spec(&self) -> Vec<TensorSpec> {
        let n = self.representation_size;
        let l = self.frame_length;
        let t = &self.tcn;
        let (b, h, p, sc) = (t.bottleneck_channels, t.conv_channels, t.kernel_size, t.skip_channels);
        let mut spec = Vec::new();
        let mut push = |name: String, dims: Vec<usize>, init: InitKind| {
            spec.push(TensorSpec { name, dims, init });
        };
        if self.encoder == EncoderKind::Learned {
            push("encoder.u".into(), vec![n, l], InitKind::Uniform { fan_in: l });
            push("decoder.v".into(), vec![l, n], InitKind::Uniform { fan_in: n });
        }
        push("input_norm.gain".into(), vec![n], InitKind::Ones);
        push("input_norm.bias".into(), vec![n], InitKind::Zeros);
        push("bottleneck.w".into(), vec![b, n], InitKind::Uniform { fan_in: n });
        for i in 0..t.num_blocks() {
            let pre = format!("block{i}");
            push(format!("{pre}.conv_in.w"), vec![h, b], InitKind::Uniform { fan_in: b });
            push(format!("{pre}.conv_in.b"), vec![h], InitKind::Uniform { fan_in: b });
            push(format!("{pre}.prelu_in.a"), vec![1], InitKind::Const(0.25));
            push(format!("{pre}.norm_in.gain"), vec![h], InitKind::Ones);
            push(format!("{pre}.norm_in.bias"), vec![h], InitKind::Zeros);
            push(format!("{pre}.dconv.w"), vec![h, p], InitKind::Uniform { fan_in: p });
            push(format!("{pre}.dconv.b"), vec![h], InitKind::Uniform { fan_in: p });
            push(format!("{pre}.prelu_d.a"), vec![1], InitKind::Const(0.25));
            push(format!("{pre}.norm_d.gain"), vec![h], InitKind::Ones);
            push(format!("{pre}.norm_d.bias"), vec![h], InitKind::Zeros);
            push(format!("{pre}.res.w"), vec![b, h], InitKind::Uniform { fan_in: h });
            push(format!("{pre}.res.b"), vec![b], InitKind::Uniform { fan_in: h });
            push(format!("{pre}.skip.w"), vec![sc, h], InitKind::Uniform { fan_in: h });
            push(format!("{pre}.skip.b"), vec![sc], InitKind::Uniform { fan_in: h });
        }
        push("mask.prelu.a".into(), vec![1], InitKind::Const(0.25));
        push("mask.conv.w".into(), vec![t.num_sources * n, sc], InitKind::Uniform { fan_in: sc });
        spec
    }
}

pub fn init_random(config: &ModelConfig, seed: u64) -> ModelWeights {
    let mut rng = SplitMix64::new(seed);
    let tensors = config
        .tensor_spec()
        .into_iter()
        .map(|s| {
            let numel = s.numel();
            let data = match s.init {
                InitKind::Uniform { fan_in } => {
                    let bound = 1.0 / (fan_in as f64).sqrt();
                    (0..numel).map(|_| rng.uniform(bound) as f32).collect()
                }
                InitKind::Ones => vec![1.0; numel],
                InitKind::Zeros => vec![0.0; numel],
                InitKind::Const(c) => vec![c as f32; numel],
            };
            Tensor { name: s.name, dims: s.dims, data }
        })
        .collect();
    ModelWeights { tensors }
}

/// Assemble the runtime network from validated weights.
pub(super) fn build_network(config: &ModelConfig, weights: &ModelWeights) -> TcnNetwork {
    let t = &config.tcn;
    let get = |name: &str| weights.get(name).expect("weights validated against config");
    let blocks = (0..t.num_blocks())
        .map(|i| {
            let pre = format!("block{i}");
            ConvBlock {
                dilation: t.dilation(i),
                causal: !t.is_noncausal(i),
                kernel: t.kernel_size,
                conv_in_w: get(&format!("{pre}.conv_in.w")).to_mat(),
                conv_in_b: get(&format!("{pre}.conv_in.b")).to_vec(),
                prelu_in: get(&format!("{pre}.prelu_in.a")).scalar(),
                norm_in: ClnParams {
                    gain: get(&format!("{pre}.norm_in.gain")).to_vec(),
                    bias: get(&format!("{pre}.norm_in.bias")).to_vec(),
                },
                dconv_w: get(&format!("{pre}.dconv.w")).to_mat(),
                dconv_b: get(&format!("{pre}.dconv.b")).to_vec(),
                prelu_d: get(&format!("{pre}.prelu_d.a")).scalar(),
                norm_d: ClnParams {
                    gain: get(&format!("{pre}.norm_d.gain")).to_vec(),
                    bias: get(&format!("{pre}.norm_d.bias")).to_vec(),
                },
                res_w: get(&format!("{pre}.res.w")).to_mat(),
                res_b: get(&format!("{pre}.res.b")).to_vec(),
                skip_w: get(&format!("{pre}.skip.w")).to_mat(),
                skip_b: get(&format!("{pre}.skip.b")).to_vec(),
            }
        })
        .collect();
    TcnNetwork {
        config: *t,
        input_dim: config.representation_size,
        input_norm: ClnParams {
            gain: get("input_norm.gain").to_vec(),
            bias: get("input_norm.bias").to_vec(),
        },
        bottleneck_w: get("bottleneck.w").to_mat(),
        blocks,
        mask_prelu: get("mask.prelu.a").scalar(),
        mask_w: get("mask.conv.w").to_mat(),
    }
}
