//! Audio front end: raw recordings to fixed-length feature vectors.
//!
//! A submission consists of up to three recordings (breathing, cough,
//! speech). Each one passes through the same chain:
//!
//! ```text
//! WAV -> mono f64 -> preprocess (16 kHz, trim, peak = 1)
//!     -> log-mel frames (25 ms window, 10 ms hop, 64 bands)
//!     -> 0.96 s segments of 96 frames
//!     -> per-segment band means and stds, averaged -> 128 dims
//! ```
//!
//! [`fuse_modalities`] concatenates the three 128-dim embeddings into
//! the 384-dim vector the classifiers consume.
//!
//! The per-segment embedding is deliberately simple: 64 per-band means
//! plus 64 per-band standard deviations over the segment's frames.
//! It keeps the segment geometry and output dimension of the usual
//! pretrained-convnet embedding without shipping weights, so every
//! interface downstream of this module is unaffected by the choice.

mod mel;
mod resample;
mod wav;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::AudioError;

pub use mel::log_mel_frames;
pub use resample::resample;
pub use wav::{read_wav, write_wav};

/// Everything downstream assumes this rate; `preprocess` establishes it.
pub const TARGET_SAMPLE_RATE: u32 = 16_000;
/// Analysis window: 25 ms at 16 kHz.
pub const WINDOW_SIZE: usize = 400;
/// Hop between windows: 10 ms at 16 kHz.
pub const HOP_SIZE: usize = 160;
pub const FFT_SIZE: usize = 512;
pub const N_BANDS: usize = 64;
pub const MEL_LOW_HZ: f64 = 125.0;
pub const MEL_HIGH_HZ: f64 = 7500.0;
/// Floor added before the log so silent bands stay finite.
pub const LOG_OFFSET: f64 = 0.01;
/// Frames per segment: 0.96 s of 10 ms hops.
pub const FRAMES_PER_SEGMENT: usize = 96;
/// Shortest usable clip after trimming: one full segment (0.96 s).
pub const MIN_SAMPLES: usize = FRAMES_PER_SEGMENT * HOP_SIZE;
/// Silence detection granularity: 10 ms.
const TRIM_WINDOW: usize = 160;
/// Edge windows whose RMS falls below this fraction of the clip peak
/// (-40 dB) count as silence.
const TRIM_RELATIVE_RMS: f64 = 0.01;
/// Per-modality embedding: 64 band means + 64 band stds.
pub const EMBED_DIM: usize = 2 * N_BANDS;
/// Three concatenated modalities.
pub const FUSED_DIM: usize = 3 * EMBED_DIM;

/// The three recording types collected per submission.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Breathing,
    Cough,
    Speech,
}

impl Modality {
    pub const ALL: [Modality; 3] = [Modality::Breathing, Modality::Cough, Modality::Speech];

    pub fn as_str(&self) -> &'static str {
        match self {
            Modality::Breathing => "breathing",
            Modality::Cough => "cough",
            Modality::Speech => "speech",
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Modality {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "breathing" => Ok(Modality::Breathing),
            "cough" => Ok(Modality::Cough),
            "speech" => Ok(Modality::Speech),
            other => Err(format!(
                "unknown modality {other:?}; expected breathing, cough or speech"
            )),
        }
    }
}

/// A mono recording. Samples are nominally in [-1, 1]; `preprocess`
/// enforces this by rescaling to peak 1.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
    pub modality: Modality,
}

impl AudioClip {
    pub fn duration_seconds(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

/// Log-mel energies grouped into complete 0.96 s segments of
/// [`FRAMES_PER_SEGMENT`] frames by [`N_BANDS`] bands.
#[derive(Debug, Clone, PartialEq)]
pub struct MelSegmentGrid {
    /// Row-major [segment][frame][band].
    values: Vec<f64>,
    n_segments: usize,
}

impl MelSegmentGrid {
    /// Builds a grid from raw values; `values` must hold exactly
    /// `n_segments * FRAMES_PER_SEGMENT * N_BANDS` finite entries.
    pub fn from_values(values: Vec<f64>, n_segments: usize) -> Result<Self, AudioError> {
        let expected = n_segments * FRAMES_PER_SEGMENT * N_BANDS;
        if values.len() != expected {
            return Err(AudioError::InvalidGrid(format!(
                "{} values for {} segments; expected {}",
                values.len(),
                n_segments,
                expected
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(AudioError::InvalidGrid(format!("non-finite entry {v}")));
        }
        Ok(MelSegmentGrid { values, n_segments })
    }

    pub fn n_segments(&self) -> usize {
        self.n_segments
    }

    pub fn value(&self, segment: usize, frame: usize, band: usize) -> f64 {
        self.values[(segment * FRAMES_PER_SEGMENT + frame) * N_BANDS + band]
    }

    fn segment(&self, segment: usize) -> &[f64] {
        let span = FRAMES_PER_SEGMENT * N_BANDS;
        &self.values[segment * span..(segment + 1) * span]
    }
}

/// A 128-dim fixed-length summary of one modality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalityEmbedding {
    vector: Vec<f64>,
}

impl ModalityEmbedding {
    pub fn from_vector(vector: Vec<f64>) -> Result<Self, AudioError> {
        if vector.len() != EMBED_DIM {
            return Err(AudioError::InvalidEmbedding(format!(
                "{} dims, expected {EMBED_DIM}",
                vector.len()
            )));
        }
        if let Some(v) = vector.iter().find(|v| !v.is_finite()) {
            return Err(AudioError::InvalidEmbedding(format!(
                "non-finite entry {v}"
            )));
        }
        Ok(ModalityEmbedding { vector })
    }

    pub fn vector(&self) -> &[f64] {
        &self.vector
    }
}

fn window_rms(window: &[f64]) -> f64 {
    (window.iter().map(|x| x * x).sum::<f64>() / window.len() as f64).sqrt()
}

/// Standardizes a clip: resample to 16 kHz, strip leading and trailing
/// silence, rescale so the peak absolute amplitude is exactly 1.
///
/// Silence is any full 10 ms edge window whose RMS is below -40 dB
/// relative to the clip peak. The window holding the peak always has
/// RMS of at least peak/sqrt(160), far above the threshold, so
/// trimming can never consume the whole clip. Rerunning `preprocess`
/// on its own output changes nothing: the rate already matches, edge
/// windows were kept because they clear the relative threshold (which
/// survives rescaling), and dividing by the new peak of 1 is exact.
pub fn preprocess(clip: &AudioClip) -> Result<AudioClip, AudioError> {
    if clip.samples.is_empty() {
        return Err(AudioError::EmptyClip);
    }
    assert!(clip.sample_rate > 0, "sample rate must be positive");

    let samples = resample(&clip.samples, clip.sample_rate, TARGET_SAMPLE_RATE);

    let peak = samples.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if peak == 0.0 {
        return Err(AudioError::AllSilent);
    }
    let threshold = TRIM_RELATIVE_RMS * peak;

    let mut start = 0;
    while start + TRIM_WINDOW <= samples.len()
        && window_rms(&samples[start..start + TRIM_WINDOW]) < threshold
    {
        start += TRIM_WINDOW;
    }
    let mut end = samples.len();
    while end >= start + TRIM_WINDOW && window_rms(&samples[end - TRIM_WINDOW..end]) < threshold {
        end -= TRIM_WINDOW;
    }
    let trimmed = &samples[start..end];
    if trimmed.is_empty() {
        return Err(AudioError::AllSilent);
    }
    if trimmed.len() < MIN_SAMPLES {
        return Err(AudioError::TooShort {
            seconds: trimmed.len() as f64 / TARGET_SAMPLE_RATE as f64,
            minimum: MIN_SAMPLES as f64 / TARGET_SAMPLE_RATE as f64,
        });
    }

    let trimmed_peak = trimmed.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    Ok(AudioClip {
        samples: trimmed.iter().map(|x| x / trimmed_peak).collect(),
        sample_rate: TARGET_SAMPLE_RATE,
        modality: clip.modality,
    })
}

/// Slices a preprocessed clip into complete 0.96 s log-mel segments.
///
/// Frame k covers samples [k*HOP_SIZE, k*HOP_SIZE + WINDOW_SIZE), with
/// the tail zero-padded, giving floor(len / HOP_SIZE) frames; the
/// frames are grouped into segments of 96 and a trailing partial
/// segment is dropped.
pub fn mel_segments(clip: &AudioClip) -> Result<MelSegmentGrid, AudioError> {
    if clip.sample_rate != TARGET_SAMPLE_RATE {
        return Err(AudioError::NotPreprocessed {
            sample_rate: clip.sample_rate,
        });
    }
    if clip.samples.is_empty() {
        return Err(AudioError::EmptyClip);
    }
    let frames = clip.samples.len() / HOP_SIZE;
    let n_segments = frames / FRAMES_PER_SEGMENT;
    if n_segments == 0 {
        return Err(AudioError::NoCompleteSegments {
            frames,
            needed: FRAMES_PER_SEGMENT,
        });
    }
    let kept_frames = n_segments * FRAMES_PER_SEGMENT;
    let values = mel::log_mel_frames(&clip.samples, kept_frames);
    MelSegmentGrid::from_values(values, n_segments)
}

/// Pools a grid into a 128-dim embedding: per segment, the per-band
/// mean and per-band population standard deviation over its 96 frames;
/// those 128-dim segment vectors are then averaged.
pub fn embed_modality(grid: &MelSegmentGrid) -> Result<ModalityEmbedding, AudioError> {
    if grid.n_segments == 0 {
        return Err(AudioError::NoCompleteSegments {
            frames: 0,
            needed: FRAMES_PER_SEGMENT,
        });
    }
    let mut pooled = vec![0.0f64; EMBED_DIM];
    for s in 0..grid.n_segments {
        let segment = grid.segment(s);
        for band in 0..N_BANDS {
            let mut sum = 0.0;
            for frame in 0..FRAMES_PER_SEGMENT {
                sum += segment[frame * N_BANDS + band];
            }
            let mean = sum / FRAMES_PER_SEGMENT as f64;
            let mut sq_dev = 0.0;
            for frame in 0..FRAMES_PER_SEGMENT {
                let d = segment[frame * N_BANDS + band] - mean;
                sq_dev += d * d;
            }
            pooled[band] += mean;
            pooled[N_BANDS + band] += (sq_dev / FRAMES_PER_SEGMENT as f64).sqrt();
        }
    }
    for v in &mut pooled {
        *v /= grid.n_segments as f64;
    }
    ModalityEmbedding::from_vector(pooled)
}

/// Concatenates the three modality embeddings in the fixed order
/// breathing, cough, speech. A missing modality is an error; nothing
/// is imputed.
pub fn fuse_modalities(
    breathing: Option<&ModalityEmbedding>,
    cough: Option<&ModalityEmbedding>,
    speech: Option<&ModalityEmbedding>,
) -> Result<Vec<f64>, AudioError> {
    let slots = [
        (Modality::Breathing, breathing),
        (Modality::Cough, cough),
        (Modality::Speech, speech),
    ];
    let mut fused = Vec::with_capacity(FUSED_DIM);
    for (modality, embedding) in slots {
        let embedding = embedding.ok_or(AudioError::MissingModality(modality))?;
        fused.extend_from_slice(embedding.vector());
    }
    Ok(fused)
}

// ============================================================================
// Tests
// ============================================================================
