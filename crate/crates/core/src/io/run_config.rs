//! Human-readable run configuration: `key = value` lines, `#` comments.
//!
//! The required `model` key picks one of the two presets; every other key is
//! an optional override. Unknown keys are rejected so typos cannot silently
//! fall back to defaults.

use super::IoError;
use crate::dsp::WindowKind;
use crate::loss::LossConfig;
use crate::model::{EncoderKind, InputLayout, ModelConfig, OverlapRatio};
use crate::tcn::MaskActivation;
use std::path::Path;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub loss: LossConfig,
    pub seed: u64,
}

impl RunConfig {
    pub fn conv_tasnet() -> Self {
        Self { model: ModelConfig::conv_tasnet(), loss: LossConfig::default(), seed: 42 }
    }

    pub fn stft_tcn() -> Self {
        Self { model: ModelConfig::stft_tcn(), loss: LossConfig::default(), seed: 42 }
    }
}

pub fn parse_run_config(path: &Path) -> Result<RunConfig, IoError> {
    parse_run_config_str(&std::fs::read_to_string(path)?)
}

pub fn parse_run_config_str(text: &str) -> Result<RunConfig, IoError> {
    let mut entries: Vec<(usize, String, String)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(IoError::ConfigParse { line: i + 1, message: format!("expected key = value, got {line:?}") });
        };
        entries.push((i + 1, key.trim().to_string(), value.trim().to_string()));
    }

    let model_entry = entries
        .iter()
        .find(|(_, k, _)| k == "model")
        .ok_or(IoError::ConfigParse { line: 0, message: "missing required key: model".into() })?;
    let mut cfg = match model_entry.2.as_str() {
        "conv-tasnet" => RunConfig::conv_tasnet(),
        "stft-tcn" => RunConfig::stft_tcn(),
        other => {
            return Err(IoError::ConfigParse {
                line: model_entry.0,
                message: format!("unknown model {other:?}; expected conv-tasnet or stft-tcn"),
            })
        }
    };

    for (line, key, value) in &entries {
        let line = *line;
        let bad = |message: String| IoError::ConfigParse { line, message };
        let parse_usize = |v: &str| v.parse::<usize>().map_err(|e| bad(format!("{key}: {e}")));
        let parse_f64 = |v: &str| v.parse::<f64>().map_err(|e| bad(format!("{key}: {e}")));
        match key.as_str() {
            "model" => {}
            "sample_rate" => cfg.model.sample_rate = value.parse().map_err(|e| bad(format!("{key}: {e}")))?,
            "frame_length" => cfg.model.frame_length = parse_usize(value)?,
            "representation_size" => cfg.model.representation_size = parse_usize(value)?,
            "overlap" => {
                cfg.model.overlap = match value.as_str() {
                    "1/2" => OverlapRatio::Half,
                    "2/3" => OverlapRatio::TwoThirds,
                    other => return Err(bad(format!("overlap must be 1/2 or 2/3, got {other:?}"))),
                }
            }
            "window" => {
                cfg.model.window = match value.as_str() {
                    "hann" => WindowKind::PeriodicHann,
                    "rectangular" => WindowKind::Rectangular,
                    other => return Err(bad(format!("window must be hann or rectangular, got {other:?}"))),
                }
            }
            "encoder" => {
                cfg.model.encoder = match value.as_str() {
                    "learned" => EncoderKind::Learned,
                    "stft" => EncoderKind::Stft,
                    other => return Err(bad(format!("encoder must be learned or stft, got {other:?}"))),
                }
            }
            "input_layout" => {
                cfg.model.input_layout = match value.as_str() {
                    "real-imag" => InputLayout::RealImag,
                    "amp-phase" => InputLayout::AmpPhase,
                    other => return Err(bad(format!("input_layout must be real-imag or amp-phase, got {other:?}"))),
                }
            }
            "mask_activation" => {
                cfg.model.tcn.mask_activation = match value.as_str() {
                    "sigmoid" => MaskActivation::Sigmoid,
                    "identity" => MaskActivation::Identity,
                    other => return Err(bad(format!("mask_activation must be sigmoid or identity, got {other:?}"))),
                }
            }
            "num_sources" => cfg.model.tcn.num_sources = parse_usize(value)?,
            "noncausal_layers" => cfg.model.tcn.noncausal_layers = parse_usize(value)?,
            "bottleneck_channels" => cfg.model.tcn.bottleneck_channels = parse_usize(value)?,
            "conv_channels" => cfg.model.tcn.conv_channels = parse_usize(value)?,
            "kernel_size" => cfg.model.tcn.kernel_size = parse_usize(value)?,
            "blocks_per_repeat" => cfg.model.tcn.blocks_per_repeat = parse_usize(value)?,
            "repeats" => cfg.model.tcn.repeats = parse_usize(value)?,
            "skip_channels" => cfg.model.tcn.skip_channels = parse_usize(value)?,
            "loss_beta" => cfg.loss.beta = parse_f64(value)?,
            "loss_gamma" => cfg.loss.gamma = parse_f64(value)?,
            "loss_frame_length" => cfg.loss.analysis.frame_length = parse_usize(value)?,
            "loss_hop" => cfg.loss.analysis.hop = parse_usize(value)?,
            "loss_representation_size" => cfg.loss.representation_size = parse_usize(value)?,
            "magnitude_floor" => cfg.loss.magnitude_floor = parse_f64(value)?,
            "seed" => cfg.seed = value.parse().map_err(|e| bad(format!("{key}: {e}")))?,
            other => return Err(bad(format!("unknown key {other:?}"))),
        }
    }

    cfg.model
        .validate()
        .map_err(|e| IoError::ConfigParse { line: 0, message: e.to_string() })?;
    cfg.loss
        .validate()
        .map_err(|e| IoError::ConfigParse { line: 0, message: e.to_string() })?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_by_name() {
        let ct = parse_run_config_str("model = conv-tasnet").unwrap();
        assert_eq!(ct, RunConfig::conv_tasnet());
        let st = parse_run_config_str("model = stft-tcn").unwrap();
        assert_eq!(st, RunConfig::stft_tcn());
        assert_eq!(st.model.frame_length, 192);
        assert_eq!(st.model.tcn.noncausal_layers, 3);
    }

    #[test]
    fn overrides_and_comments() {
        let text = "
            # causal variant for probing
            model = conv-tasnet
            noncausal_layers = 0   # fully causal
            seed = 7
            loss_beta = 0.25
        ";
        let cfg = parse_run_config_str(text).unwrap();
        assert_eq!(cfg.model.tcn.noncausal_layers, 0);
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.loss.beta, 0.25);
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = parse_run_config_str("model = conv-tasnet\nframe_len = 32").unwrap_err();
        assert!(matches!(err, IoError::ConfigParse { line: 2, .. }));
    }

    #[test]
    fn missing_model_rejected() {
        assert!(matches!(
            parse_run_config_str("seed = 3"),
            Err(IoError::ConfigParse { .. })
        ));
    }

    #[test]
    fn invalid_values_carry_line_numbers() {
        let err = parse_run_config_str("model = conv-tasnet\noverlap = 3/4").unwrap_err();
        match err {
            IoError::ConfigParse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn semantic_validation_applies() {
        // stft with sigmoid masks is rejected by model validation.
        let err = parse_run_config_str("model = stft-tcn\nmask_activation = sigmoid").unwrap_err();
        assert!(matches!(err, IoError::ConfigParse { .. }));
    }
}
