//! Mono WAV loading for the metric commands.
//!
//! Accepts 16-bit integer PCM and 32-bit float files with a single
//! channel; anything else is rejected.

use std::path::Path;

use thiserror::Error;

use crate::sep::{SampleVector, SepError};

#[derive(Debug, Error)]
pub enum WavError {
    #[error("{path}: {source}")]
    Read {
        path: String,
        source: hound::Error,
    },
    #[error("{path}: expected mono audio, found {channels} channels")]
    NotMono { path: String, channels: u16 },
    #[error("{path}: unsupported format (need 16-bit PCM or 32-bit float)")]
    UnsupportedFormat { path: String },
    #[error("{path}: {source}")]
    Samples { path: String, source: SepError },
}

pub fn load_mono_wav(path: &Path) -> Result<SampleVector, WavError> {
    let display = path.display().to_string();
    let mut reader = hound::WavReader::open(path).map_err(|source| WavError::Read {
        path: display.clone(),
        source,
    })?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(WavError::NotMono {
            path: display,
            channels: spec.channels,
        });
    }

    let samples: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .map(|s| s.map(|v| f64::from(v) / 32768.0))
            .collect::<Result<_, _>>()
            .map_err(|source| WavError::Read {
                path: display.clone(),
                source,
            })?,
        (hound::SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<Result<_, _>>()
            .map_err(|source| WavError::Read {
                path: display.clone(),
                source,
            })?,
        _ => return Err(WavError::UnsupportedFormat { path: display }),
    };

    SampleVector::new(samples, spec.sample_rate).map_err(|source| WavError::Samples {
        path: display,
        source,
    })
}
