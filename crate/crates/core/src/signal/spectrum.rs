use num_complex::Complex64;
use rustfft::FftPlanner;

use super::waveform::Waveform;

pub fn forward(samples: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = samples.iter().map(|v| Complex64::new(*v, 0.0)).collect();
    FftPlanner::new()
        .plan_fft_forward(buf.len())
        .process(&mut buf);
    buf
}

/// Inverse transform, normalised by `1/N`, keeping the real part.
pub fn inverse_real(spectrum: &[Complex64]) -> Vec<f64> {
    let mut buf = spectrum.to_vec();
    let n = buf.len() as f64;
    FftPlanner::new()
        .plan_fft_inverse(buf.len())
        .process(&mut buf);
    buf.iter().map(|v| v.re / n).collect()
}

/// Signed frequency of bin `k` in an `n`-point transform.
pub fn bin_frequency(k: usize, n: usize, sample_rate: f64) -> f64 {
    let signed = if k <= n / 2 {
        k as f64
    } else {
        k as f64 - n as f64
    };
    signed * sample_rate / n as f64
}

/// Amplitude of the component at `freq`, read from the nearest bin. Exact for
/// tones that complete an integer number of cycles in the window.
pub fn tone_amplitude(w: &Waveform, freq: f64) -> f64 {
    let n = w.len();
    let spec = forward(w.samples());
    let k = ((freq * n as f64 / w.sample_rate()).round() as usize).min(n - 1);
    let scale = if k == 0 || (n % 2 == 0 && k == n / 2) {
        1.0
    } else {
        2.0
    };
    scale * spec[k].norm() / n as f64
}

/// Frequency in `[0, rate/2]` of the strongest component, refined between
/// bins with a Hann window and Gaussian interpolation.
pub fn peak_frequency(samples: &[f64], sample_rate: f64) -> f64 {
    let n = samples.len();
    if n < 3 {
        return 0.0;
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let spread = samples.iter().fold(0.0f64, |m, v| m.max((v - mean).abs()));
    // A constant record puts everything in the DC bin.
    if spread <= 1e-9 * mean.abs().max(f64::MIN_POSITIVE) {
        return 0.0;
    }
    let windowed: Vec<f64> = samples
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let h = 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos();
            v * h
        })
        .collect();
    let spec = forward(&windowed);
    let half = n / 2;
    let mag: Vec<f64> = spec[..=half].iter().map(|c| c.norm()).collect();
    let (k, _) = mag.iter().enumerate().fold(
        (0, -1.0),
        |(bk, bm), (i, m)| if *m > bm { (i, *m) } else { (bk, bm) },
    );
    let at = |i: isize| -> f64 {
        // Magnitude spectrum of a real signal is even and N-periodic.
        let j = i.rem_euclid(n as isize) as usize;
        spec[j].norm().max(f64::MIN_POSITIVE).ln()
    };
    let (l, c, r) = (at(k as isize - 1), at(k as isize), at(k as isize + 1));
    let denom = l - 2.0 * c + r;
    let delta = if denom.abs() > 0.0 {
        0.5 * (l - r) / denom
    } else {
        0.0
    };
    let f = (k as f64 + delta.clamp(-0.5, 0.5)) * sample_rate / n as f64;
    f.clamp(0.0, sample_rate / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::waveform::synth_tone;

    #[test]
    fn tone_peak_at_1khz() {
        let w = synth_tone(1000.0, 1.0, 0.0, 0.1, 48000.0).unwrap();
        let spec = forward(w.samples());
        let (k, _) = spec[..w.len() / 2]
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
            .unwrap();
        assert_eq!(bin_frequency(k, w.len(), 48000.0), 1000.0);
        assert!((tone_amplitude(&w, 1000.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn round_trip() {
        let x = vec![0.5, -1.0, 2.0, 3.5, 0.0, 1.25, -0.75];
        let y = inverse_real(&forward(&x));
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn interpolated_peak() {
        let w = synth_tone(123.4, 1.0, 0.3, 1.0, 1000.0).unwrap();
        assert!((peak_frequency(w.samples(), 1000.0) - 123.4).abs() < 0.05);
        let alt: Vec<f64> = (0..64)
            .map(|k| if k % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        assert_eq!(peak_frequency(&alt, 1000.0), 500.0);
        assert_eq!(peak_frequency(&[2.0; 16], 1000.0), 0.0);
    }
}
