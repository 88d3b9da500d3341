//! Sample-rate conversion by windowed-sinc interpolation.
//!
//! Classic polyphase-free design: each output sample is a dot product
//! between the input and a Kaiser-windowed sinc kernel centered at the
//! exact (fractional) input position. When downsampling, the kernel
//! cutoff drops to the output Nyquist so aliasing is suppressed rather
//! than folded into the result.

use std::f64::consts::PI;

/// Sinc lobes on each side of the kernel center. 32 lobes with the
/// beta below gives roughly 90 dB of stopband attenuation.
const ZERO_CROSSINGS: f64 = 32.0;
const KAISER_BETA: f64 = 8.6;

/// Zeroth-order modified Bessel function of the first kind, by its
/// power series. Terms fall off factorially squared, so the loop
/// terminates quickly for the argument range the window uses (< 10).
fn bessel_i0(x: f64) -> f64 {
    let half = x / 2.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    loop {
        term *= (half / k) * (half / k);
        sum += term;
        if term < sum * 1e-16 {
            return sum;
        }
        k += 1.0;
    }
}

/// Kernel value at `u` input samples from the center, for a given
/// cutoff (fraction of the input Nyquist).
fn kernel(u: f64, cutoff: f64) -> f64 {
    let span = ZERO_CROSSINGS / cutoff;
    if u.abs() >= span {
        return 0.0;
    }
    let sinc = if u == 0.0 {
        1.0
    } else {
        let t = PI * cutoff * u;
        t.sin() / t
    };
    let w =
        bessel_i0(KAISER_BETA * (1.0 - (u / span) * (u / span)).sqrt()) / bessel_i0(KAISER_BETA);
    cutoff * sinc * w
}

/// Resamples `input` from `from_rate` to `to_rate`. Equal rates return
/// the input unchanged. Samples outside the input are treated as zero,
/// so a kernel-width neighborhood at each edge is attenuated.
pub fn resample(input: &[f64], from_rate: u32, to_rate: u32) -> Vec<f64> {
    assert!(
        from_rate > 0 && to_rate > 0,
        "sample rates must be positive"
    );
    if from_rate == to_rate || input.is_empty() {
        return input.to_vec();
    }
    let ratio = to_rate as f64 / from_rate as f64;
    let cutoff = ratio.min(1.0);
    let span = ZERO_CROSSINGS / cutoff;
    // ceil(len * to / from) in exact integer arithmetic.
    let n_out = (input.len() as u64 * to_rate as u64).div_ceil(from_rate as u64) as usize;

    let mut output = Vec::with_capacity(n_out);
    for j in 0..n_out {
        // Output sample j sits at time j / to_rate, i.e. input
        // position j * from / to.
        let t = j as f64 / ratio;
        let lo = ((t - span).ceil() as i64).max(0) as usize;
        let hi = ((t + span).floor() as i64).min(input.len() as i64 - 1) as usize;
        let mut acc = 0.0;
        for (i, &x) in input[lo..=hi].iter().enumerate() {
            acc += x * kernel(t - (lo + i) as f64, cutoff);
        }
        output.push(acc);
    }
    output
}
