//! Attack-signal designers for the three injection styles: an AM carrier that
//! a square-law stage demodulates, sinusoidal jitter that clocks a hysteresis
//! comparator, and a carrier at a multiple of the ADC rate that samples to a
//! fixed bias.

use std::f64::consts::PI;

use super::spectrum::{forward, peak_frequency};
use super::stages::{comparator_pulses, HysteresisComparator};
use super::waveform::{Tone, Waveform};
use crate::error::{Error, Result};

/// `(m[k] + 1)·cos(2π·f_c·t_k)` for a baseband `m` with peak at most 1.
pub fn design_ac_attack(baseband: &Waveform, carrier_freq: f64) -> Result<Waveform> {
    if !(carrier_freq.is_finite() && carrier_freq > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "carrier must be > 0, got {carrier_freq}"
        )));
    }
    let peak = baseband.peak();
    if peak > 1.0 + 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "baseband peak {peak} exceeds 1; the envelope m + 1 would go negative"
        )));
    }
    if baseband.sample_rate() <= 2.0 * carrier_freq {
        return Err(Error::InvalidArgument(format!(
            "sample rate {} Hz cannot represent a {carrier_freq} Hz carrier",
            baseband.sample_rate()
        )));
    }
    let bandwidth = baseband_bandwidth(baseband);
    if carrier_freq <= 2.0 * bandwidth {
        return Err(Error::InvalidArgument(format!(
            "carrier {carrier_freq} Hz must exceed twice the baseband bandwidth {bandwidth} Hz"
        )));
    }

    let carrier = Tone::new(carrier_freq, 1.0, 0.0);
    let samples = baseband
        .samples()
        .iter()
        .enumerate()
        .map(|(k, m)| (m + 1.0) * carrier.at(baseband.time(k)))
        .collect();
    let tones = baseband.tones().map(|tones| {
        let mut out = vec![carrier];
        for t in tones {
            out.extend(t.product(&carrier));
        }
        out
    });
    Ok(Waveform::with_parts(
        samples,
        baseband.sample_rate(),
        baseband.t0(),
        tones,
    ))
}

/// Highest frequency present: exact from tone metadata, else the highest bin
/// within 1e-9 of the strongest.
fn baseband_bandwidth(w: &Waveform) -> f64 {
    if let Some(tones) = w.tones() {
        return tones
            .iter()
            .filter(|t| t.amplitude != 0.0)
            .fold(0.0, |m, t| m.max(t.freq));
    }
    let n = w.len();
    let spec = forward(w.samples());
    let peak = spec.iter().fold(0.0f64, |m, c| m.max(c.norm()));
    spec[..=n / 2]
        .iter()
        .enumerate()
        .filter(|(_, c)| c.norm() > 1e-9 * peak)
        .map(|(k, _)| k as f64 * w.sample_rate() / n as f64)
        .fold(0.0, f64::max)
}

/// Jitter `center − J·cos(2π·r·t)` centred on the comparator band, so each
/// period produces one rising edge. `rate·duration` must be a whole number of
/// pulses, and the design is checked by running the comparator.
pub fn design_pulse_attack(
    target_pulse_rate: f64,
    jitter_amplitude: f64,
    cmp: &HysteresisComparator,
    duration: f64,
    sample_rate: f64,
) -> Result<Waveform> {
    if !(target_pulse_rate.is_finite() && target_pulse_rate > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "pulse rate must be > 0, got {target_pulse_rate}"
        )));
    }
    if !(sample_rate > 20.0 * target_pulse_rate) {
        return Err(Error::InvalidArgument(format!(
            "sample rate {sample_rate} Hz must exceed 20x the pulse rate {target_pulse_rate} Hz"
        )));
    }
    let pulses = target_pulse_rate * duration;
    let whole = pulses.round();
    if !(pulses.is_finite() && (pulses - whole).abs() <= 1e-9 * whole.max(1.0)) {
        return Err(Error::InvalidArgument(format!(
            "rate x duration = {pulses} is not a whole number of pulses"
        )));
    }
    if !(jitter_amplitude > cmp.half_band()) {
        return Err(Error::Infeasible(format!(
            "jitter {jitter_amplitude} V cannot cross a hysteresis band of half-width {} V",
            cmp.half_band()
        )));
    }
    let w = Waveform::from_tones(
        vec![
            Tone::dc(cmp.center()),
            Tone::new(target_pulse_rate, jitter_amplitude, PI),
        ],
        duration,
        sample_rate,
        0.0,
    )?;
    let (_, edges) = comparator_pulses(cmp, &w);
    if edges as f64 != whole {
        return Err(Error::Infeasible(format!(
            "sampled jitter yields {edges} edges instead of {whole}; raise the amplitude or sample rate"
        )));
    }
    Ok(w)
}

/// Alias predictions for a tone at `f_n` sampled at `f_s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AliasPrediction {
    /// `|2m·f_N − f_s|` minimised over integer `m ≥ 0` with `f_a < f_N`.
    pub f_alias_formula: f64,
    pub m_used: u64,
    /// False when no `m` satisfies `f_a < f_N`; the formula value is then the
    /// unconstrained minimum.
    pub constraint_met: bool,
    /// Dominant frequency of the uniformly sampled tone.
    pub f_alias_sampled: f64,
    /// Bin spacing of the transform behind `f_alias_sampled`.
    pub resolution_hz: f64,
}

impl AliasPrediction {
    pub fn agrees(&self) -> bool {
        (self.f_alias_formula - self.f_alias_sampled).abs() <= self.resolution_hz
    }
}

const ALIAS_RECORD: usize = 1 << 14;

pub fn predict_alias(f_n: f64, f_s: f64) -> Result<AliasPrediction> {
    if !(f_n.is_finite() && f_n > 0.0 && f_s.is_finite() && f_s > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "alias prediction needs positive frequencies, got f_N = {f_n}, f_s = {f_s}"
        )));
    }
    let m_max = (f_s / (2.0 * f_n)).ceil() as u64 + 1;
    let mut best: Option<(f64, u64)> = None;
    let mut best_any: (f64, u64) = (f64::INFINITY, 0);
    for m in 0..=m_max {
        let fa = (2.0 * m as f64 * f_n - f_s).abs();
        if fa < best_any.0 {
            best_any = (fa, m);
        }
        if fa < f_n && best.map_or(true, |(b, _)| fa < b) {
            best = Some((fa, m));
        }
    }
    let ((f_alias_formula, m_used), constraint_met) = match best {
        Some(b) => (b, true),
        None => (best_any, false),
    };

    let ratio = f_n / f_s;
    let samples: Vec<f64> = (0..ALIAS_RECORD)
        .map(|k| (2.0 * PI * (ratio * k as f64).fract()).cos())
        .collect();
    Ok(AliasPrediction {
        f_alias_formula,
        m_used,
        constraint_met,
        f_alias_sampled: peak_frequency(&samples, f_s),
        resolution_hz: f_s / ALIAS_RECORD as f64,
    })
}

/// Carrier that samples to a constant bias.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DcAttack {
    pub carrier_freq: f64,
    pub amplitude: f64,
    pub phase: f64,
}

impl DcAttack {
    pub fn tone(&self) -> Tone {
        Tone::new(self.carrier_freq, self.amplitude, self.phase)
    }

    pub fn waveform(&self, duration: f64, sample_rate: f64) -> Result<Waveform> {
        Waveform::from_tones(vec![self.tone()], duration, sample_rate, 0.0)
    }
}

/// Picks the smallest multiple `k·f_s` (`k ≥ 1`) inside the inclusive band.
pub fn design_dc_attack(
    target_bias: f64,
    f_s: f64,
    vulnerable_band: (f64, f64),
) -> Result<DcAttack> {
    let (lo, hi) = vulnerable_band;
    if !(f_s.is_finite() && f_s > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "f_s must be > 0, got {f_s}"
        )));
    }
    if !(target_bias.is_finite() && lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi) {
        return Err(Error::InvalidArgument(format!(
            "need finite bias and 0 <= low <= high, got band ({lo}, {hi})"
        )));
    }
    let mut k = (lo / f_s).ceil().max(1.0);
    if (k - 1.0) >= 1.0 && (k - 1.0) * f_s >= lo {
        k -= 1.0;
    }
    let carrier_freq = k * f_s;
    if carrier_freq > hi {
        return Err(Error::Infeasible(format!(
            "no multiple of {f_s} Hz lies in [{lo}, {hi}] Hz"
        )));
    }
    Ok(DcAttack {
        carrier_freq,
        amplitude: target_bias.abs(),
        phase: if target_bias < 0.0 { PI } else { 0.0 },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::adc::{sample_adc, AdcSampler};
    use crate::signal::stages::ComparatorState;
    use crate::signal::waveform::synth_tone;

    #[test]
    fn zero_baseband_is_pure_carrier() {
        let m = Waveform::new(vec![0.0; 1000], 1e6).unwrap();
        let s = design_ac_attack(&m, 1e5).unwrap();
        for (k, v) in s.samples().iter().enumerate() {
            assert!((v - (2.0 * PI * 1e5 * k as f64 / 1e6).cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn envelope_bound() {
        let m = synth_tone(1000.0, 1.0, 0.0, 0.01, 4e6).unwrap();
        let s = design_ac_attack(&m, 370e3).unwrap();
        for (x, mm) in s.samples().iter().zip(m.samples()) {
            assert!(x.abs() <= mm + 1.0 + 1e-12);
        }
        assert_eq!(s.tones().unwrap().len(), 3);
    }

    #[test]
    fn ac_preconditions() {
        let loud = synth_tone(1000.0, 1.5, 0.0, 0.01, 4e6).unwrap();
        assert!(design_ac_attack(&loud, 370e3).is_err());
        let m = synth_tone(1000.0, 1.0, 0.0, 0.01, 4e5).unwrap();
        assert!(design_ac_attack(&m, 370e3).is_err());
        let wide = synth_tone(200e3, 1.0, 0.0, 0.001, 4e6).unwrap();
        assert!(design_ac_attack(&wide, 370e3).is_err());
    }

    #[test]
    fn pulse_attack_examples() {
        let cmp = HysteresisComparator::symmetric(0.0, 0.5).unwrap();
        let w = design_pulse_attack(100.0, 1.0, &cmp, 1.0, 10_000.0).unwrap();
        assert_eq!(comparator_pulses(&cmp, &w).1, 100);
        let w2 = design_pulse_attack(100.0, 1.0, &cmp, 2.0, 10_000.0).unwrap();
        assert_eq!(comparator_pulses(&cmp, &w2).1, 200);

        assert!(matches!(
            design_pulse_attack(100.0, 0.3, &cmp, 1.0, 10_000.0),
            Err(Error::Infeasible(_))
        ));
        assert!(design_pulse_attack(100.0, 1.0, &cmp, 1.0, 1_000.0).is_err());
        assert!(design_pulse_attack(100.0, 1.0, &cmp, 1.005, 10_000.0).is_err());
    }

    #[test]
    fn pulse_attack_off_center_band() {
        let cmp = HysteresisComparator::new(3.3, 2.9, ComparatorState::High).unwrap();
        let w = design_pulse_attack(50.0, 0.25, &cmp, 0.4, 5_000.0).unwrap();
        assert_eq!(comparator_pulses(&cmp, &w).1, 20);
    }

    #[test]
    fn alias_examples() {
        let p = predict_alias(500.0, 1000.0).unwrap();
        assert_eq!((p.f_alias_formula, p.m_used), (0.0, 1));
        assert!((p.f_alias_sampled - 500.0).abs() <= p.resolution_hz);

        let p = predict_alias(1000.0, 1000.0).unwrap();
        assert_eq!(p.f_alias_sampled, 0.0);
        assert!(!p.constraint_met);

        let p = predict_alias(600.0, 1000.0).unwrap();
        assert_eq!((p.f_alias_formula, p.m_used), (200.0, 1));
        assert!((p.f_alias_sampled - 400.0).abs() <= p.resolution_hz);
        assert!(!p.agrees());
        assert!(predict_alias(0.0, 1.0).is_err());
    }

    #[test]
    fn dc_attack_examples() {
        let d = design_dc_attack(0.8, 1000.0, (9500.0, 10_500.0)).unwrap();
        assert_eq!((d.carrier_freq, d.amplitude, d.phase), (10_000.0, 0.8, 0.0));
        let w = d.waveform(0.1, 1e6).unwrap();
        let s = sample_adc(&AdcSampler::uniform(1000.0).unwrap(), &w).unwrap();
        assert!(s.samples().iter().all(|v| (v - 0.8).abs() < 1e-6));

        let neg = design_dc_attack(-0.5, 1000.0, (9500.0, 10_500.0)).unwrap();
        assert_eq!(neg.phase, PI);
        let s = sample_adc(
            &AdcSampler::uniform(1000.0).unwrap(),
            &neg.waveform(0.1, 1e6).unwrap(),
        )
        .unwrap();
        assert!(s.samples().iter().all(|v| (v + 0.5).abs() < 1e-6));

        assert!(matches!(
            design_dc_attack(0.8, 1000.0, (10_200.0, 10_800.0)),
            Err(Error::Infeasible(_))
        ));
        let edge = design_dc_attack(1.0, 1000.0, (10_000.0, 10_000.0)).unwrap();
        assert_eq!(edge.carrier_freq, 10_000.0);
        assert_eq!(
            design_dc_attack(1.0, 1000.0, (0.0, 5000.0))
                .unwrap()
                .carrier_freq,
            1000.0
        );
    }
}
