use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Spacing {
    Log,
    Linear,
}

/// Strictly increasing list of positive frequencies in hertz.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGrid {
    frequencies: Vec<f64>,
}

impl FrequencyGrid {
    /// `points` frequencies from `start_hz` to `stop_hz` inclusive. A single
    /// point grid holds only `start_hz`.
    pub fn new(start_hz: f64, stop_hz: f64, points: usize, spacing: Spacing) -> Result<Self> {
        if !(start_hz.is_finite() && start_hz > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "grid start must be > 0, got {start_hz}"
            )));
        }
        if points == 0 {
            return Err(Error::InvalidArgument(
                "grid needs at least one point".into(),
            ));
        }
        if points == 1 {
            return Ok(Self {
                frequencies: vec![start_hz],
            });
        }
        if !(stop_hz.is_finite() && stop_hz > start_hz) {
            return Err(Error::InvalidArgument(format!(
                "grid stop must exceed start ({start_hz}), got {stop_hz}"
            )));
        }
        let last = (points - 1) as f64;
        let mut frequencies: Vec<f64> = (0..points)
            .map(|i| {
                let t = i as f64 / last;
                match spacing {
                    Spacing::Log => start_hz * (stop_hz / start_hz).powf(t),
                    Spacing::Linear => start_hz + (stop_hz - start_hz) * t,
                }
            })
            .collect();
        frequencies[0] = start_hz;
        frequencies[points - 1] = stop_hz;
        Self::from_frequencies(frequencies)
    }

    /// 200 log-spaced points over 50 Hz to 500 kHz.
    pub fn reference() -> Self {
        Self::new(50.0, 5e5, 200, Spacing::Log).expect("reference grid is valid")
    }

    pub fn single(frequency_hz: f64) -> Result<Self> {
        Self::from_frequencies(vec![frequency_hz])
    }

    pub fn from_frequencies(frequencies: Vec<f64>) -> Result<Self> {
        if frequencies.is_empty() {
            return Err(Error::InvalidArgument("grid is empty".into()));
        }
        if frequencies.iter().any(|f| !(f.is_finite() && *f > 0.0)) {
            return Err(Error::InvalidArgument(
                "grid frequencies must be finite and > 0".into(),
            ));
        }
        if frequencies.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument(
                "grid frequencies must be strictly increasing".into(),
            ));
        }
        Ok(Self { frequencies })
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    /// Evaluates `f` at every grid frequency in parallel. Output order follows
    /// the grid; the first failing frequency (in grid order) is reported.
    pub(crate) fn par_map<T, F>(&self, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(f64) -> Result<T> + Sync + Send,
    {
        self.frequencies
            .par_iter()
            .map(|&hz| f(hz).map_err(|e| e.at_frequency(hz)))
            .collect::<Vec<_>>()
            .into_iter()
            .collect()
    }
}

/// One row of a frequency response curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrcRow {
    pub frequency_hz: f64,
    pub magnitude: f64,
    pub phase_rad: f64,
}

pub fn angular(frequency_hz: f64) -> f64 {
    2.0 * PI * frequency_hz
}
