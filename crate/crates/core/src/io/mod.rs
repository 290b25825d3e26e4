//! Persistence: WAV audio, the weights container, and run configuration
//! files.

mod run_config;
mod wav;
mod weights;

pub use run_config::{parse_run_config, parse_run_config_str, RunConfig};
pub use wav::{read_wav, write_wav};
pub use weights::{load_weights, load_weights_checked, save_weights};

use crate::model::ModelError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("unsupported channel count {0}: only mono is accepted")]
    UnsupportedChannels(u16),
    #[error("unsupported sample rate {0} Hz: only 16000 Hz is accepted")]
    UnsupportedRate(u32),
    #[error("unsupported encoding: only 16-bit PCM is accepted")]
    UnsupportedEncoding,
    #[error("malformed WAV file: {0}")]
    MalformedWav(String),
    #[error("malformed weights container: {0}")]
    MalformedContainer(String),
    #[error("weights do not match config: {0}")]
    WeightsConfigMismatch(String),
    #[error("config parse error at line {line}: {message}")]
    ConfigParse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<ModelError> for IoError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::WeightsConfigMismatch(msg) => IoError::WeightsConfigMismatch(msg),
            other => IoError::MalformedContainer(other.to_string()),
        }
    }
}
