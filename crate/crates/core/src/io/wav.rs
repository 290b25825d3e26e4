//! Strict WAV I/O for the one format the engine processes: 16 kHz mono
//! 16-bit PCM. Samples map to `[-1, 1)` by `1/32768`; writing rounds with
//! saturation.

use super::IoError;
use crate::signal::AudioSignal;
use std::fs;
use std::path::Path;

const ACCEPTED_RATE: u32 = 16_000;

pub fn read_wav(path: &Path) -> Result<AudioSignal, IoError> {
    let bytes = fs::read(path)?;
    parse_wav(&bytes)
}

fn parse_wav(bytes: &[u8]) -> Result<AudioSignal, IoError> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(IoError::MalformedWav("missing RIFF/WAVE header".into()));
    }
    let mut pos = 12usize;
    let mut fmt: Option<(u16, u16, u32, u16)> = None;
    let mut data: Option<&[u8]> = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32::from_le_bytes(bytes[pos + 4..pos + 8].try_into().unwrap()) as usize;
        let body_start = pos + 8;
        let body_end = body_start + size;
        if body_end > bytes.len() {
            return Err(IoError::MalformedWav(format!(
                "chunk {} overruns the file",
                String::from_utf8_lossy(id)
            )));
        }
        let body = &bytes[body_start..body_end];
        match id {
            b"fmt " => {
                if size < 16 {
                    return Err(IoError::MalformedWav("fmt chunk too short".into()));
                }
                let format = u16::from_le_bytes(body[0..2].try_into().unwrap());
                let channels = u16::from_le_bytes(body[2..4].try_into().unwrap());
                let rate = u32::from_le_bytes(body[4..8].try_into().unwrap());
                let bits = u16::from_le_bytes(body[14..16].try_into().unwrap());
                fmt = Some((format, channels, rate, bits));
            }
            b"data" => data = Some(body),
            _ => {}
        }
        // Chunks are word-aligned; odd sizes carry a pad byte.
        pos = body_end + (size & 1);
    }
    let (format, channels, rate, bits) = fmt.ok_or_else(|| IoError::MalformedWav("no fmt chunk".into()))?;
    if format != 1 || bits != 16 {
        return Err(IoError::UnsupportedEncoding);
    }
    if channels != 1 {
        return Err(IoError::UnsupportedChannels(channels));
    }
    if rate != ACCEPTED_RATE {
        return Err(IoError::UnsupportedRate(rate));
    }
    let data = data.ok_or_else(|| IoError::MalformedWav("no data chunk".into()))?;
    if data.len() % 2 != 0 {
        return Err(IoError::MalformedWav("data chunk has odd length".into()));
    }
    let samples = data
        .chunks_exact(2)
        .map(|b| i16::from_le_bytes([b[0], b[1]]) as f64 / 32768.0)
        .collect();
    Ok(AudioSignal::new(samples, rate))
}

pub fn write_wav(path: &Path, signal: &AudioSignal) -> Result<(), IoError> {
    let n = signal.len();
    let data_len = (n * 2) as u32;
    let mut bytes = Vec::with_capacity(44 + n * 2);
    bytes.extend_from_slice(b"RIFF");
    bytes.extend_from_slice(&(36 + data_len).to_le_bytes());
    bytes.extend_from_slice(b"WAVE");
    bytes.extend_from_slice(b"fmt ");
    bytes.extend_from_slice(&16u32.to_le_bytes());
    bytes.extend_from_slice(&1u16.to_le_bytes()); // PCM
    bytes.extend_from_slice(&1u16.to_le_bytes()); // mono
    bytes.extend_from_slice(&signal.sample_rate.to_le_bytes());
    bytes.extend_from_slice(&(signal.sample_rate * 2).to_le_bytes()); // byte rate
    bytes.extend_from_slice(&2u16.to_le_bytes()); // block align
    bytes.extend_from_slice(&16u16.to_le_bytes()); // bits per sample
    bytes.extend_from_slice(b"data");
    bytes.extend_from_slice(&data_len.to_le_bytes());
    for &s in &signal.samples {
        let q = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        bytes.extend_from_slice(&q.to_le_bytes());
    }
    fs::write(path, bytes)?;
    Ok(())
}
