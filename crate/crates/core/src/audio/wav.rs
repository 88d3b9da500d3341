//! PCM WAV reading and writing.
//!
//! Reading accepts 8/16/24/32-bit integer and 32-bit float samples at
//! any rate; multi-channel files are averaged down to mono. Writing
//! always emits 16-bit PCM, which every downstream consumer here can
//! read back.

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use super::{AudioClip, Modality};
use crate::error::AudioError;

fn wav_error(path: &Path, err: hound::Error) -> AudioError {
    match err {
        hound::Error::IoError(source) => AudioError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => AudioError::UnsupportedWav {
            path: path.to_path_buf(),
            message: other.to_string(),
        },
    }
}

fn collect_samples<S>(
    mut reader: WavReader<BufReader<File>>,
    path: &Path,
    scale: f64,
) -> Result<Vec<f64>, AudioError>
where
    S: hound::Sample + Into<f64>,
{
    reader
        .samples::<S>()
        .map(|s| s.map(|v| v.into() * scale).map_err(|e| wav_error(path, e)))
        .collect()
}

/// Reads a WAV file as a mono clip with samples scaled to [-1, 1].
pub fn read_wav(path: &Path, modality: Modality) -> Result<AudioClip, AudioError> {
    let reader = WavReader::open(path).map_err(|e| wav_error(path, e))?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    if channels == 0 {
        return Err(AudioError::UnsupportedWav {
            path: path.to_path_buf(),
            message: "zero channels".into(),
        });
    }

    let interleaved = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 8) => collect_samples::<i8>(reader, path, 1.0 / 128.0)?,
        (SampleFormat::Int, 16) => collect_samples::<i16>(reader, path, 1.0 / 32_768.0)?,
        (SampleFormat::Int, 24) => collect_samples::<i32>(reader, path, 1.0 / 8_388_608.0)?,
        (SampleFormat::Int, 32) => collect_samples::<i32>(reader, path, 1.0 / 2_147_483_648.0)?,
        (SampleFormat::Float, 32) => collect_samples::<f32>(reader, path, 1.0)?,
        (format, bits) => {
            return Err(AudioError::UnsupportedWav {
                path: path.to_path_buf(),
                message: format!("{bits}-bit {format:?} samples"),
            })
        }
    };

    let samples = if channels == 1 {
        interleaved
    } else {
        interleaved
            .chunks_exact(channels)
            .map(|frame| frame.iter().sum::<f64>() / channels as f64)
            .collect()
    };

    Ok(AudioClip {
        samples,
        sample_rate: spec.sample_rate,
        modality,
    })
}

/// Writes mono 16-bit PCM. Samples are clamped to [-1, 1] first.
pub fn write_wav(path: &Path, samples: &[f64], sample_rate: u32) -> Result<(), AudioError> {
    let spec = WavSpec {
        channels: 1,
        sample_rate,
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let mut writer = WavWriter::create(path, spec).map_err(|e| wav_error(path, e))?;
    for &x in samples {
        let scaled = (x.clamp(-1.0, 1.0) * 32_767.0).round() as i16;
        writer
            .write_sample(scaled)
            .map_err(|e| wav_error(path, e))?;
    }
    writer.finalize().map_err(|e| wav_error(path, e))
}
