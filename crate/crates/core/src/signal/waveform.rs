use std::f64::consts::PI;

use crate::error::{Error, Result};

/// One sinusoidal component `amplitude·cos(2π·freq·t + phase)`. A zero
/// frequency stands for a DC level of `amplitude·cos(phase)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tone {
    pub freq: f64,
    pub amplitude: f64,
    pub phase: f64,
}

impl Tone {
    pub fn new(freq: f64, amplitude: f64, phase: f64) -> Self {
        Self {
            freq,
            amplitude,
            phase,
        }
    }

    pub fn dc(level: f64) -> Self {
        Self::new(0.0, level, 0.0)
    }

    pub fn at(&self, t: f64) -> f64 {
        self.amplitude * (2.0 * PI * self.freq * t + self.phase).cos()
    }

    /// Product of two tones as the sum and difference components.
    pub(crate) fn product(&self, other: &Tone) -> [Tone; 2] {
        let half = 0.5 * self.amplitude * other.amplitude;
        let sum = Tone::new(self.freq + other.freq, half, self.phase + other.phase);
        let d = self.freq - other.freq;
        let diff = if d >= 0.0 {
            Tone::new(d, half, self.phase - other.phase)
        } else {
            Tone::new(-d, half, other.phase - self.phase)
        };
        [sum, diff]
    }
}

/// Uniformly sampled real signal. When `tones` is present the samples are an
/// exact evaluation of that sum, and consumers that need values between
/// samples evaluate it analytically.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    samples: Vec<f64>,
    sample_rate: f64,
    t0: f64,
    tones: Option<Vec<Tone>>,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: f64) -> Result<Self> {
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "sample rate must be > 0, got {sample_rate}"
            )));
        }
        if samples.is_empty() {
            return Err(Error::InvalidArgument("waveform has no samples".into()));
        }
        Ok(Self {
            samples,
            sample_rate,
            t0: 0.0,
            tones: None,
        })
    }

    /// Samples the tone sum over `duration` seconds and keeps the tones.
    pub fn from_tones(tones: Vec<Tone>, duration: f64, sample_rate: f64, t0: f64) -> Result<Self> {
        let n = sample_count(duration, sample_rate)?;
        let samples = (0..n)
            .map(|k| {
                let t = t0 + k as f64 / sample_rate;
                tones.iter().map(|tone| tone.at(t)).sum()
            })
            .collect();
        Ok(Self {
            samples,
            sample_rate,
            t0,
            tones: Some(tones),
        })
    }

    pub fn constant(level: f64, duration: f64, sample_rate: f64) -> Result<Self> {
        Self::from_tones(vec![Tone::dc(level)], duration, sample_rate, 0.0)
    }

    pub fn with_t0(mut self, t0: f64) -> Self {
        if let Some(tones) = self.tones.take() {
            let shifted: Vec<f64> = (0..self.samples.len())
                .map(|k| {
                    let t = t0 + k as f64 / self.sample_rate;
                    tones.iter().map(|tone| tone.at(t)).sum()
                })
                .collect();
            self.samples = shifted;
            self.tones = Some(tones);
        }
        self.t0 = t0;
        self
    }

    pub(crate) fn with_parts(
        samples: Vec<f64>,
        sample_rate: f64,
        t0: f64,
        tones: Option<Vec<Tone>>,
    ) -> Self {
        Self {
            samples,
            sample_rate,
            t0,
            tones,
        }
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn tones(&self) -> Option<&[Tone]> {
        self.tones.as_deref()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 / self.sample_rate
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }

    /// Population standard deviation.
    pub fn std_dev(&self) -> f64 {
        population_std(&self.samples)
    }
}

pub fn population_std(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt()
}

pub(crate) fn sample_count(duration: f64, sample_rate: f64) -> Result<usize> {
    if !(sample_rate.is_finite() && sample_rate > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "sample rate must be > 0, got {sample_rate}"
        )));
    }
    if !(duration.is_finite() && duration > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "duration must be > 0, got {duration}"
        )));
    }
    let n = (duration * sample_rate).round();
    if n < 1.0 || n > 1e9 {
        return Err(Error::InvalidArgument(format!(
            "{duration} s at {sample_rate} Hz gives {n} samples"
        )));
    }
    Ok(n as usize)
}

/// `amplitude·cos(2π·freq·(t0 + k/rate) + phase)` for `round(duration·rate)`
/// samples, starting at `t0 = 0`.
pub fn synth_tone(
    freq: f64,
    amplitude: f64,
    phase: f64,
    duration: f64,
    sample_rate: f64,
) -> Result<Waveform> {
    if !(freq.is_finite() && freq > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tone frequency must be > 0, got {freq}"
        )));
    }
    if !(amplitude.is_finite() && phase.is_finite()) {
        return Err(Error::InvalidArgument(
            "amplitude and phase must be finite".into(),
        ));
    }
    Waveform::from_tones(
        vec![Tone::new(freq, amplitude, phase)],
        duration,
        sample_rate,
        0.0,
    )
}
