use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::spectrum::forward;
use super::waveform::Waveform;
use crate::error::{Error, Result};

/// Shortest input window accepted by [`sample_adc`], in ADC periods.
pub const MIN_ADC_PERIODS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Jitter {
    #[default]
    None,
    /// Each instant is delayed by an independent draw from `U[0, span)` seconds.
    UniformRandom { span: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdcSampler {
    sample_rate: f64,
    jitter: Jitter,
    seed: u64,
}

impl AdcSampler {
    pub fn new(sample_rate: f64, jitter: Jitter, seed: u64) -> Result<Self> {
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "ADC rate must be > 0, got {sample_rate}"
            )));
        }
        if let Jitter::UniformRandom { span } = jitter {
            if !(span.is_finite() && span >= 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "jitter span must be finite and >= 0, got {span}"
                )));
            }
        }
        Ok(Self {
            sample_rate,
            jitter,
            seed,
        })
    }

    pub fn uniform(sample_rate: f64) -> Result<Self> {
        Self::new(sample_rate, Jitter::None, 0)
    }

    /// Random delays spanning one full ADC period.
    pub fn full_period_jitter(sample_rate: f64, seed: u64) -> Result<Self> {
        Self::new(
            sample_rate,
            Jitter::UniformRandom {
                span: 1.0 / sample_rate,
            },
            seed,
        )
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn jitter(&self) -> Jitter {
        self.jitter
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Sampling instants `t_k + t_delay,k` for `count` conversions from `t0`.
    pub fn instants(&self, t0: f64, count: usize) -> Vec<f64> {
        let base = (0..count).map(|k| t0 + k as f64 / self.sample_rate);
        match self.jitter {
            Jitter::None => base.collect(),
            Jitter::UniformRandom { span } => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                base.map(|t| t + span * rng.gen::<f64>()).collect()
            }
        }
    }
}

/// Band-limited (trigonometric) interpolation of a sampled record.
struct Interpolator {
    /// `(bin, coefficient)` with the one-sided weighting already applied.
    terms: Vec<(usize, num_complex::Complex64)>,
    n: usize,
    rate: f64,
    t0: f64,
}

impl Interpolator {
    fn new(w: &Waveform) -> Self {
        let n = w.len();
        let spec = forward(w.samples());
        let peak = spec.iter().fold(0.0f64, |m, c| m.max(c.norm()));
        let floor = 1e-15 * peak;
        let terms = spec[..=n / 2]
            .iter()
            .enumerate()
            .filter(|(_, c)| c.norm() > floor)
            .map(|(k, c)| {
                let one_sided = k == 0 || (n % 2 == 0 && k == n / 2);
                (k, if one_sided { *c } else { 2.0 * *c })
            })
            .collect();
        Self {
            terms,
            n,
            rate: w.sample_rate(),
            t0: w.t0(),
        }
    }

    fn at(&self, t: f64) -> f64 {
        let u = (t - self.t0) * self.rate / self.n as f64;
        let sum: f64 = self
            .terms
            .iter()
            .map(|(k, c)| {
                let phase = 2.0 * PI * (*k as f64 * u).fract();
                c.re * phase.cos() - c.im * phase.sin()
            })
            .sum();
        sum / self.n as f64
    }
}

/// Samples the continuous signal behind `w` at the ADC instants. Tones carried
/// by `w` are evaluated exactly; otherwise the record is interpolated.
pub fn sample_adc(adc: &AdcSampler, w: &Waveform) -> Result<Waveform> {
    let count = (w.duration() * adc.sample_rate + 1e-9).floor() as usize;
    if count < MIN_ADC_PERIODS {
        return Err(Error::InvalidArgument(format!(
            "window of {} s holds {count} ADC periods, need at least {MIN_ADC_PERIODS}",
            w.duration()
        )));
    }
    let instants = adc.instants(w.t0(), count);
    let samples = match w.tones() {
        Some(tones) => instants
            .iter()
            .map(|t| tones.iter().map(|tone| tone.at(*t)).sum())
            .collect(),
        None => {
            let interp = Interpolator::new(w);
            instants.iter().map(|t| interp.at(*t)).collect()
        }
    };
    Waveform::new(samples, adc.sample_rate).map(|out| out.with_t0(w.t0()))
}
