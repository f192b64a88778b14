use num_complex::Complex64;

use super::spectrum::{bin_frequency, forward, inverse_real};
use super::waveform::{Tone, Waveform};
use crate::error::{Error, Result};

/// Above this many input tones the squared expansion is not tracked and the
/// amplifier output carries samples only.
const MAX_TRACKED_TONES: usize = 32;

/// Memoryless amplifier `out = A·x + B·x²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonlinearAmp {
    pub gain_linear: f64,
    /// Per volt.
    pub gain_quadratic: f64,
}

impl NonlinearAmp {
    pub fn new(gain_linear: f64, gain_quadratic: f64) -> Result<Self> {
        if !(gain_linear.is_finite() && gain_quadratic.is_finite()) {
            return Err(Error::InvalidArgument(
                "amplifier gains must be finite".into(),
            ));
        }
        Ok(Self {
            gain_linear,
            gain_quadratic,
        })
    }

    pub fn transfer(&self, x: f64) -> f64 {
        self.gain_linear * x + self.gain_quadratic * x * x
    }

    pub fn is_linear(&self) -> bool {
        self.gain_quadratic == 0.0
    }
}

pub fn apply_nonlinear_amp(amp: &NonlinearAmp, w: &Waveform) -> Waveform {
    let samples = w.samples().iter().map(|x| amp.transfer(*x)).collect();
    let tones = w
        .tones()
        .filter(|t| t.len() <= MAX_TRACKED_TONES)
        .map(|tones| {
            let mut out: Vec<Tone> = tones
                .iter()
                .map(|t| Tone::new(t.freq, amp.gain_linear * t.amplitude, t.phase))
                .collect();
            if amp.gain_quadratic != 0.0 {
                for a in tones {
                    for b in tones {
                        for mut p in a.product(b) {
                            p.amplitude *= amp.gain_quadratic;
                            out.push(p);
                        }
                    }
                }
            }
            out.retain(|t| t.amplitude != 0.0);
            out
        });
    Waveform::with_parts(samples, w.sample_rate(), w.t0(), tones)
}

/// Brick-wall low-pass: every bin with `|f| > cutoff` is zeroed, and the DC
/// bin too when `remove_dc` is set.
pub fn lowpass_ideal(w: &Waveform, cutoff: f64, remove_dc: bool) -> Result<Waveform> {
    let nyquist = w.sample_rate() / 2.0;
    if !(cutoff > 0.0 && cutoff < nyquist) {
        return Err(Error::InvalidArgument(format!(
            "cutoff must lie in (0, {nyquist}) Hz, got {cutoff}"
        )));
    }
    let n = w.len();
    let mut spec = forward(w.samples());
    for (k, bin) in spec.iter_mut().enumerate() {
        let f = bin_frequency(k, n, w.sample_rate()).abs();
        if f > cutoff || (remove_dc && k == 0) {
            *bin = Complex64::new(0.0, 0.0);
        }
    }
    let tones = w.tones().map(|tones| {
        tones
            .iter()
            .filter(|t| t.freq <= cutoff && !(remove_dc && t.freq == 0.0))
            .copied()
            .collect()
    });
    Ok(Waveform::with_parts(
        inverse_real(&spec),
        w.sample_rate(),
        w.t0(),
        tones,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ComparatorState {
    #[default]
    Low,
    High,
}

/// Schmitt trigger: goes high when the input reaches `threshold_high` and low
/// when it falls to `threshold_low`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HysteresisComparator {
    threshold_high: f64,
    threshold_low: f64,
    initial_state: ComparatorState,
}

impl HysteresisComparator {
    pub fn new(
        threshold_high: f64,
        threshold_low: f64,
        initial_state: ComparatorState,
    ) -> Result<Self> {
        if !(threshold_high.is_finite()
            && threshold_low.is_finite()
            && threshold_high > threshold_low)
        {
            return Err(Error::InvalidArgument(format!(
                "comparator needs high > low, got high {threshold_high}, low {threshold_low}"
            )));
        }
        Ok(Self {
            threshold_high,
            threshold_low,
            initial_state,
        })
    }

    /// Symmetric band `±half_band` around `center`, starting low.
    pub fn symmetric(center: f64, half_band: f64) -> Result<Self> {
        Self::new(center + half_band, center - half_band, ComparatorState::Low)
    }

    pub fn threshold_high(&self) -> f64 {
        self.threshold_high
    }

    pub fn threshold_low(&self) -> f64 {
        self.threshold_low
    }

    pub fn initial_state(&self) -> ComparatorState {
        self.initial_state
    }

    pub fn half_band(&self) -> f64 {
        0.5 * (self.threshold_high - self.threshold_low)
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.threshold_high + self.threshold_low)
    }
}

/// Digital output (0 or 1 per sample) and the number of low-to-high transitions.
pub fn comparator_pulses(cmp: &HysteresisComparator, w: &Waveform) -> (Waveform, usize) {
    let mut state = cmp.initial_state;
    let mut edges = 0;
    let digital = w
        .samples()
        .iter()
        .map(|x| {
            match state {
                ComparatorState::Low if *x >= cmp.threshold_high => {
                    state = ComparatorState::High;
                    edges += 1;
                }
                ComparatorState::High if *x <= cmp.threshold_low => state = ComparatorState::Low,
                _ => {}
            }
            match state {
                ComparatorState::High => 1.0,
                ComparatorState::Low => 0.0,
            }
        })
        .collect();
    (
        Waveform::with_parts(digital, w.sample_rate(), w.t0(), None),
        edges,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::spectrum::tone_amplitude;
    use crate::signal::waveform::synth_tone;
    use rand::{Rng, SeedableRng};

    #[test]
    fn linear_identity_and_square() {
        let w = synth_tone(3.0, 1.3, 0.2, 1.0, 64.0).unwrap();
        let id = apply_nonlinear_amp(&NonlinearAmp::new(1.0, 0.0).unwrap(), &w);
        assert_eq!(id.samples(), w.samples());

        let c = Waveform::new(vec![2.0; 10], 10.0).unwrap();
        let sq = apply_nonlinear_amp(&NonlinearAmp::new(0.0, 1.0).unwrap(), &c);
        assert!(sq.samples().iter().all(|v| *v == 4.0));
    }

    #[test]
    fn amp_tracks_tones() {
        let w = Waveform::from_tones(
            vec![
                Tone::new(5.0, 1.0, 0.3),
                Tone::new(11.0, 0.5, -0.7),
                Tone::dc(0.2),
            ],
            1.0,
            256.0,
            0.0,
        )
        .unwrap();
        let out = apply_nonlinear_amp(&NonlinearAmp::new(2.0, 0.7).unwrap(), &w);
        let tones = out.tones().unwrap();
        for k in [0, 17, 200] {
            let t = out.time(k);
            let analytic: f64 = tones.iter().map(|tone| tone.at(t)).sum();
            assert!((analytic - out.samples()[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn lowpass_passes_everything_below_cutoff() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let x: Vec<f64> = (0..1001).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let w = Waveform::new(x.clone(), 1000.0).unwrap();
        let y = lowpass_ideal(&w, 500.0 - 1e-6, false).unwrap();
        let dev = x
            .iter()
            .zip(y.samples())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(dev < 1e-9, "{dev}");
    }

    #[test]
    fn lowpass_keeps_only_low_tone() {
        let w = Waveform::from_tones(
            vec![Tone::new(1000.0, 1.0, 0.0), Tone::new(10_000.0, 1.0, 0.0)],
            0.01,
            48_000.0,
            0.0,
        )
        .unwrap();
        let y = lowpass_ideal(&w, 2000.0, false).unwrap();
        assert!(tone_amplitude(&y, 10_000.0) < 1e-9);
        assert!((tone_amplitude(&y, 1000.0) - 1.0).abs() < 1e-12);
        assert_eq!(y.tones().unwrap().len(), 1);
    }

    #[test]
    fn lowpass_removes_dc() {
        let w = Waveform::new(vec![3.0; 100], 100.0).unwrap();
        let y = lowpass_ideal(&w, 10.0, true).unwrap();
        assert!(y.samples().iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn lowpass_rejects_bad_cutoff() {
        let w = Waveform::new(vec![0.0; 8], 100.0).unwrap();
        assert!(lowpass_ideal(&w, 0.0, false).is_err());
        assert!(lowpass_ideal(&w, 50.0, false).is_err());
    }

    #[test]
    fn comparator_examples() {
        let cmp = HysteresisComparator::symmetric(0.0, 0.5).unwrap();
        let sine = -std::f64::consts::FRAC_PI_2;
        let w = synth_tone(10.0, 1.0, sine, 1.0, 10_000.0).unwrap();
        assert_eq!(comparator_pulses(&cmp, &w).1, 10);

        let weak = synth_tone(10.0, 0.4, sine, 1.0, 10_000.0).unwrap();
        assert_eq!(comparator_pulses(&cmp, &weak).1, 0);

        let zero = Waveform::new(vec![0.0; 50], 10.0).unwrap();
        let (digital, edges) = comparator_pulses(&cmp, &zero);
        assert_eq!(edges, 0);
        assert!(digital.samples().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn comparator_boundaries_are_inclusive() {
        let cmp = HysteresisComparator::new(1.0, -1.0, ComparatorState::Low).unwrap();
        let w = Waveform::new(vec![1.0, 0.0, -1.0, 1.0], 1.0).unwrap();
        let (digital, edges) = comparator_pulses(&cmp, &w);
        assert_eq!(digital.samples(), &[1.0, 1.0, 0.0, 1.0]);
        assert_eq!(edges, 2);
        let start_high = HysteresisComparator::new(1.0, -1.0, ComparatorState::High).unwrap();
        assert_eq!(comparator_pulses(&start_high, &w).1, 1);
        assert!(HysteresisComparator::new(0.0, 0.0, ComparatorState::Low).is_err());
    }
}
