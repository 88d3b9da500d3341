//! Log-mel spectrogram frames.
//!
//! Frames are 25 ms Hann-windowed slices every 10 ms, zero-padded
//! into a 512-point FFT. Magnitudes are pooled by a 64-band
//! triangular mel filterbank between 125 and 7500 Hz (HTK mel scale,
//! weights computed in the mel domain), then compressed with
//! log(S + 0.01).

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::{
    FFT_SIZE, HOP_SIZE, LOG_OFFSET, MEL_HIGH_HZ, MEL_LOW_HZ, N_BANDS, TARGET_SAMPLE_RATE,
    WINDOW_SIZE,
};

fn hz_to_mel(hz: f64) -> f64 {
    1127.0 * (1.0 + hz / 700.0).ln()
}

fn hann_window(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / (n - 1) as f64).cos())
        .collect()
}

/// Triangular band weights over the FFT bins, rows indexed by band.
/// The DC bin gets zero weight in every band.
fn mel_filterbank() -> Vec<Vec<f64>> {
    let n_bins = FFT_SIZE / 2 + 1;
    let mel_lo = hz_to_mel(MEL_LOW_HZ);
    let mel_hi = hz_to_mel(MEL_HIGH_HZ);
    // 64 bands need 66 edges: each band rises over one inter-edge gap
    // and falls over the next.
    let edges: Vec<f64> = (0..N_BANDS + 2)
        .map(|i| mel_lo + (mel_hi - mel_lo) * i as f64 / (N_BANDS + 1) as f64)
        .collect();
    let bin_mels: Vec<f64> = (0..n_bins)
        .map(|k| hz_to_mel(k as f64 * TARGET_SAMPLE_RATE as f64 / FFT_SIZE as f64))
        .collect();

    (0..N_BANDS)
        .map(|band| {
            let (lower, center, upper) = (edges[band], edges[band + 1], edges[band + 2]);
            bin_mels
                .iter()
                .enumerate()
                .map(|(k, &mel)| {
                    if k == 0 {
                        return 0.0;
                    }
                    let rising = (mel - lower) / (center - lower);
                    let falling = (upper - mel) / (upper - center);
                    rising.min(falling).max(0.0)
                })
                .collect()
        })
        .collect()
}

/// Computes the first `n_frames` log-mel frames of a 16 kHz signal as
/// a flat row-major [frame][band] vector. Frame k windows samples
/// [k*HOP_SIZE, k*HOP_SIZE + WINDOW_SIZE), reading past the end as
/// zero.
pub fn log_mel_frames(samples: &[f64], n_frames: usize) -> Vec<f64> {
    let window = hann_window(WINDOW_SIZE);
    let filterbank = mel_filterbank();
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(FFT_SIZE);
    let mut buf = vec![Complex::new(0.0, 0.0); FFT_SIZE];
    let mut scratch = vec![Complex::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    let mut magnitudes = vec![0.0f64; FFT_SIZE / 2 + 1];

    let mut out = Vec::with_capacity(n_frames * N_BANDS);
    for frame in 0..n_frames {
        let start = frame * HOP_SIZE;
        for (i, slot) in buf.iter_mut().enumerate() {
            let x = if i < WINDOW_SIZE {
                samples.get(start + i).copied().unwrap_or(0.0) * window[i]
            } else {
                0.0
            };
            *slot = Complex::new(x, 0.0);
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        for (k, m) in magnitudes.iter_mut().enumerate() {
            *m = buf[k].norm();
        }
        for weights in &filterbank {
            let energy: f64 = weights.iter().zip(&magnitudes).map(|(w, m)| w * m).sum();
            out.push((energy + LOG_OFFSET).ln());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hann_window_is_symmetric_and_tapers_to_zero() {
        let w = hann_window(WINDOW_SIZE);
        assert_eq!(w[0], 0.0);
        assert_eq!(w[WINDOW_SIZE - 1], 0.0);
        for i in 0..WINDOW_SIZE / 2 {
            assert!((w[i] - w[WINDOW_SIZE - 1 - i]).abs() < 1e-12);
        }
        assert!(w[WINDOW_SIZE / 2] > 0.999);
    }

    #[test]
    fn filterbank_weights_stay_in_the_pass_band() {
        let fb = mel_filterbank();
        assert_eq!(fb.len(), N_BANDS);
        let bin_hz = TARGET_SAMPLE_RATE as f64 / FFT_SIZE as f64;
        for (band, weights) in fb.iter().enumerate() {
            assert_eq!(weights.len(), FFT_SIZE / 2 + 1);
            assert!(
                weights.iter().any(|&w| w > 0.0),
                "band {band} covers no bin"
            );
            for (k, &w) in weights.iter().enumerate() {
                assert!((0.0..=1.0).contains(&w), "band {band} bin {k}: {w}");
                let hz = k as f64 * bin_hz;
                if hz <= MEL_LOW_HZ || hz >= MEL_HIGH_HZ {
                    assert_eq!(w, 0.0, "band {band} leaks at {hz} Hz");
                }
            }
        }
    }

    #[test]
    fn frame_layout_matches_the_requested_count() {
        let out = log_mel_frames(&vec![0.0; 15_360], 96);
        assert_eq!(out.len(), 96 * N_BANDS);
        assert!(out.iter().all(|&v| v == LOG_OFFSET.ln()));
    }

    #[test]
    fn tone_energy_lands_in_the_matching_band() {
        let rate = TARGET_SAMPLE_RATE as f64;
        let samples: Vec<f64> = (0..15_360)
            .map(|i| (2.0 * std::f64::consts::PI * 1000.0 * i as f64 / rate).sin())
            .collect();
        let frames = log_mel_frames(&samples, 96);

        let mut band_totals = vec![0.0f64; N_BANDS];
        for frame in 0..96 {
            for band in 0..N_BANDS {
                band_totals[band] += frames[frame * N_BANDS + band];
            }
        }
        let argmax = band_totals
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        // 1 kHz is mel 1000.0; with edges from mel 185.2 to 2773.3 in
        // steps of 39.8 the tone falls between band centers 19 and 20.
        assert!(
            (18..=21).contains(&argmax),
            "1 kHz tone peaked in band {argmax}"
        );
    }
}
