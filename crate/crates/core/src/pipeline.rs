//! End-to-end victim model: the phasor stages turn an attack voltage into a
//! differential (and residual common-mode) disturbance at the amplifier
//! input, which is then synthesized in time and pushed through the amplifier,
//! an optional low-pass filter and an optional comparator or ADC.
//!
//! Every run is paired with a baseline run that has the attack removed, and
//! the two outputs are reduced to a scalar metric:
//!
//! * analog output: RMS of the output disturbance `y − y0`, with deviation
//!   `RMS(y − y0) / max(RMS(y0), floor)`;
//! * comparator: rising edges per second;
//! * ADC: mean sample value.
//!
//! For the two digitizers the deviation is `|attacked − baseline| /
//! max(|baseline|, floor)`.

use num_complex::Complex64;

use crate::conversion::{
    conversion_coefficients, solve_conversion, ConversionExcitation, ConversionNetwork,
};
use crate::coupling::{solve_coupling, CouplingNetwork};
use crate::error::{Error, Result};
use crate::grid::{angular, FrcRow, FrequencyGrid};
use crate::signal::spectrum::{bin_frequency, forward, inverse_real};
use crate::signal::{
    apply_nonlinear_amp, comparator_pulses, lowpass_ideal, sample_adc, AdcSampler,
    HysteresisComparator, NonlinearAmp, Tone, Waveform,
};

/// Guards the deviation ratio against a zero baseline.
pub const DEVIATION_FLOOR: f64 = 1e-12;

/// Samples per attack period when the pipeline picks its own rate.
pub const AUTO_SAMPLES_PER_PERIOD: f64 = 32.0;

/// Differential amplifier with transistor-mismatch common-mode feedthrough.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CmrrAmp {
    differential_gain: f64,
    mismatch: Option<Mismatch>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Mismatch {
    g_m: f64,
    delta_g_m: f64,
    r_ss: f64,
}

impl CmrrAmp {
    pub fn new(g_m: f64, delta_g_m: f64, r_ss: f64, differential_gain: f64) -> Result<Self> {
        if !(delta_g_m > 0.0 && delta_g_m.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "delta_g_m must be > 0 (use CmrrAmp::ideal for matched pairs), got {delta_g_m}"
            )));
        }
        if !(g_m.is_finite()
            && g_m > 0.0
            && r_ss.is_finite()
            && r_ss > 0.0
            && differential_gain.is_finite())
        {
            return Err(Error::InvalidArgument(
                "g_m and r_ss must be > 0 and the gain finite".into(),
            ));
        }
        Ok(Self {
            differential_gain,
            mismatch: Some(Mismatch {
                g_m,
                delta_g_m,
                r_ss,
            }),
        })
    }

    /// Perfectly matched pair: infinite CMRR, no common-mode feedthrough.
    pub fn ideal(differential_gain: f64) -> Result<Self> {
        if !differential_gain.is_finite() {
            return Err(Error::InvalidArgument("gain must be finite".into()));
        }
        Ok(Self {
            differential_gain,
            mismatch: None,
        })
    }

    /// `2·g_m²·R_ss / Δg_m`, or infinity for the ideal amplifier.
    pub fn cmrr(&self) -> f64 {
        match self.mismatch {
            Some(m) => 2.0 * m.g_m * m.g_m * m.r_ss / m.delta_g_m,
            None => f64::INFINITY,
        }
    }

    pub fn differential_gain(&self) -> f64 {
        self.differential_gain
    }

    pub fn common_mode_gain(&self) -> f64 {
        match self.mismatch {
            Some(_) => self.differential_gain / self.cmrr(),
            None => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AmpStage {
    Cmrr(CmrrAmp),
    /// Acts on the differential input only.
    Nonlinear(NonlinearAmp),
}

impl AmpStage {
    fn is_linear(&self) -> bool {
        match self {
            AmpStage::Cmrr(_) => true,
            AmpStage::Nonlinear(a) => a.is_linear(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowpassStage {
    pub cutoff: f64,
    pub remove_dc: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Digitizer {
    Comparator(HysteresisComparator),
    Adc(AdcSampler),
}

/// Sensor signal present at the amplifier input without an attack.
#[derive(Debug, Clone, PartialEq)]
pub enum Legitimate {
    Constant(f64),
    /// Its sample rate, length and start time fix the simulation time base.
    Waveform(Waveform),
}

/// Attack voltage on the ground line.
#[derive(Debug, Clone, PartialEq)]
pub enum Attack {
    /// `amplitude·cos(2π·freq·t + phase)` volts.
    Tone {
        freq: f64,
        amplitude: f64,
        phase: f64,
    },
    /// Arbitrary source waveform (volts).
    Waveform(Waveform),
}

impl Attack {
    pub fn tone(freq: f64, amplitude: f64) -> Self {
        Attack::Tone {
            freq,
            amplitude,
            phase: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VictimPipeline {
    pub coupling: CouplingNetwork,
    pub conversion: ConversionNetwork,
    pub amp: AmpStage,
    pub filter: Option<LowpassStage>,
    pub digitizer: Option<Digitizer>,
    pub legitimate: Legitimate,
    /// Simulation rate; chosen from the attack frequency when absent.
    pub sample_rate: Option<f64>,
}

impl VictimPipeline {
    /// Reference networks feeding a unity-gain ideal amplifier with a 1 V
    /// legitimate level and no further stages.
    pub fn reference() -> Self {
        Self {
            coupling: CouplingNetwork::reference(),
            conversion: ConversionNetwork::reference(),
            amp: AmpStage::Cmrr(CmrrAmp::ideal(1.0).expect("finite gain")),
            filter: None,
            digitizer: None,
            legitimate: Legitimate::Constant(1.0),
            sample_rate: None,
        }
    }

    fn is_linear_chain(&self) -> bool {
        self.amp.is_linear() && self.digitizer.is_none()
    }
}

/// Amplifier-input disturbance per volt of attack at one frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Disturbance {
    pub frequency_hz: f64,
    /// `μ`, ampere per volt.
    pub i_cm: Complex64,
    /// `k2·μ`: differential voltage per attack volt.
    pub v_dm: Complex64,
    /// Mean of the two output node voltages per attack volt.
    pub v_cm: Complex64,
}

/// Phasor stages at `frequency_hz` under a pure common-mode excitation.
pub fn disturbance_per_volt(p: &VictimPipeline, frequency_hz: f64) -> Result<Disturbance> {
    let omega = angular(frequency_hz);
    let mu = solve_coupling(&p.coupling, omega)
        .map_err(|e| e.in_stage("coupling"))?
        .mu;
    let k2 = conversion_coefficients(&p.conversion, omega)
        .map_err(|e| e.in_stage("conversion"))?
        .k2;
    let sol = solve_conversion(&p.conversion, &ConversionExcitation::pure_cm(mu), omega)
        .map_err(|e| e.in_stage("conversion"))?;
    Ok(Disturbance {
        frequency_hz,
        i_cm: mu,
        v_dm: k2 * mu,
        v_cm: (sol.v[4] + sol.v[5]) * 0.5,
    })
}

/// `|V_DM| = |k2·μ·V_s|` at the converter output over a frequency grid.
pub fn frc_endtoend(
    coupling: &CouplingNetwork,
    conversion: &ConversionNetwork,
    vs: f64,
    grid: &FrequencyGrid,
) -> Result<Vec<FrcRow>> {
    grid.par_map(|hz| {
        let omega = angular(hz);
        let mu = solve_coupling(coupling, omega)
            .map_err(|e| e.in_stage("coupling"))?
            .mu;
        let k2 = conversion_coefficients(conversion, omega)
            .map_err(|e| e.in_stage("conversion"))?
            .k2;
        let v = k2 * mu * vs;
        Ok(FrcRow {
            frequency_hz: hz,
            magnitude: v.norm(),
            phase_rad: v.arg(),
        })
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    /// Frequency (Hz) or attack amplitude (V), depending on the sweep.
    pub x: f64,
    pub output_metric: f64,
    pub baseline_metric: f64,
    pub deviation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricKind {
    /// Volts RMS of the output disturbance.
    DisturbanceRms,
    /// Rising edges per second.
    EdgeRate,
    /// Mean ADC reading in volts.
    AdcMean,
}

impl MetricKind {
    pub fn unit(&self) -> &'static str {
        match self {
            MetricKind::DisturbanceRms | MetricKind::AdcMean => "V",
            MetricKind::EdgeRate => "Hz",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EndToEnd {
    pub corrupted: Waveform,
    pub baseline: Waveform,
    pub metric: MetricKind,
    pub output_metric: f64,
    pub baseline_metric: f64,
    pub deviation: f64,
}

/// Time base: explicit, the legitimate waveform's, or an integer number of
/// attack periods at a rate that also covers the filter and ADC.
fn time_base(p: &VictimPipeline, attack_freq: f64, duration: f64) -> Result<(usize, f64, f64)> {
    if let Legitimate::Waveform(w) = &p.legitimate {
        return Ok((w.len(), w.sample_rate(), w.t0()));
    }
    if !(duration.is_finite() && duration > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "duration must be > 0, got {duration}"
        )));
    }
    if let Some(rate) = p.sample_rate {
        if !(rate.is_finite() && rate > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "sample rate must be > 0, got {rate}"
            )));
        }
        return Ok(((duration * rate).round().max(1.0) as usize, rate, 0.0));
    }
    let mut floor = 0.0f64;
    if let Some(f) = p.filter {
        floor = floor.max(4.0 * f.cutoff);
    }
    if let Some(Digitizer::Adc(adc)) = p.digitizer {
        floor = floor.max(4.0 * adc.sample_rate());
    }
    let per_period = AUTO_SAMPLES_PER_PERIOD
        * (floor / (AUTO_SAMPLES_PER_PERIOD * attack_freq))
            .ceil()
            .max(1.0);
    let periods = (duration * attack_freq - 1e-9).ceil().max(1.0);
    let n = per_period * periods;
    if n > 5e7 {
        return Err(Error::InvalidArgument(format!(
            "{duration} s at {attack_freq} Hz needs {n} samples; shorten the run"
        )));
    }
    Ok((n as usize, per_period * attack_freq, 0.0))
}

fn legitimate_input(p: &VictimPipeline, n: usize, rate: f64, t0: f64) -> Result<Waveform> {
    match &p.legitimate {
        Legitimate::Constant(v) => {
            Waveform::from_tones(vec![Tone::dc(*v)], n as f64 / rate, rate, t0)
        }
        Legitimate::Waveform(w) => Ok(w.clone()),
    }
}

/// `a·x + b·y` samplewise, keeping tone metadata when both carry it.
fn mix(x: &Waveform, a: f64, y: &Waveform, b: f64) -> Waveform {
    let samples = x
        .samples()
        .iter()
        .zip(y.samples())
        .map(|(u, v)| a * u + b * v)
        .collect();
    let tones = match (x.tones(), y.tones()) {
        (Some(tx), Some(ty)) => {
            let scaled = |t: &Tone, g: f64| Tone::new(t.freq, g * t.amplitude, t.phase);
            let mut out: Vec<Tone> = tx.iter().map(|t| scaled(t, a)).collect();
            out.extend(ty.iter().map(|t| scaled(t, b)));
            out.retain(|t| t.amplitude != 0.0);
            Some(out)
        }
        _ => None,
    };
    Waveform::with_parts(samples, x.sample_rate(), x.t0(), tones)
}

/// Differential and common-mode disturbance waveforms at the amplifier input.
struct InputDisturbance {
    dm: Waveform,
    cm: Waveform,
}

fn synthesize(
    p: &VictimPipeline,
    attack: &Attack,
    n: usize,
    rate: f64,
    t0: f64,
) -> Result<InputDisturbance> {
    match attack {
        Attack::Tone {
            freq,
            amplitude,
            phase,
        } => {
            if !(freq.is_finite() && *freq > 0.0 && amplitude.is_finite() && phase.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "attack tone needs freq > 0 and finite amplitude, got {freq} Hz, {amplitude} V"
                )));
            }
            if rate <= 2.0 * freq {
                return Err(Error::InvalidArgument(format!(
                    "sample rate {rate} Hz cannot represent a {freq} Hz attack"
                ))
                .in_stage("synthesis"));
            }
            let d = disturbance_per_volt(p, *freq)?;
            let duration = n as f64 / rate;
            let tone = |h: Complex64| {
                let v = h * *amplitude;
                Tone::new(*freq, v.norm(), phase + v.arg())
            };
            Ok(InputDisturbance {
                dm: Waveform::from_tones(vec![tone(d.v_dm)], duration, rate, t0)?,
                cm: Waveform::from_tones(vec![tone(d.v_cm)], duration, rate, t0)?,
            })
        }
        Attack::Waveform(w) => {
            if w.len() != n || w.sample_rate() != rate {
                return Err(Error::Dimension(format!(
                    "attack waveform has {} samples at {} Hz, time base is {n} at {rate} Hz",
                    w.len(),
                    w.sample_rate()
                )));
            }
            let (dm, cm) = match w.tones() {
                Some(tones) => transfer_tones(p, tones, w)?,
                None => transfer_spectrum(p, w)?,
            };
            Ok(InputDisturbance { dm, cm })
        }
    }
}

/// Per-tone transfer. DC components do not couple through the parasitic
/// capacitances and are dropped.
fn transfer_tones(
    p: &VictimPipeline,
    tones: &[Tone],
    w: &Waveform,
) -> Result<(Waveform, Waveform)> {
    let mut dm = Vec::new();
    let mut cm = Vec::new();
    for t in tones.iter().filter(|t| t.freq > 0.0 && t.amplitude != 0.0) {
        let d = disturbance_per_volt(p, t.freq)?;
        for (h, out) in [(d.v_dm, &mut dm), (d.v_cm, &mut cm)] {
            let v = h * t.amplitude;
            out.push(Tone::new(t.freq, v.norm(), t.phase + v.arg()));
        }
    }
    let duration = w.len() as f64 / w.sample_rate();
    Ok((
        Waveform::from_tones(dm, duration, w.sample_rate(), w.t0())?,
        Waveform::from_tones(cm, duration, w.sample_rate(), w.t0())?,
    ))
}

/// Per-bin transfer of a sampled attack; bins below 1e-13 of the peak are
/// treated as empty.
fn transfer_spectrum(p: &VictimPipeline, w: &Waveform) -> Result<(Waveform, Waveform)> {
    let n = w.len();
    let spec = forward(w.samples());
    let peak = spec.iter().fold(0.0f64, |m, c| m.max(c.norm()));
    let zero = Complex64::new(0.0, 0.0);
    let mut dm = vec![zero; n];
    let mut cm = vec![zero; n];
    for k in 1..=n / 2 {
        if spec[k].norm() <= 1e-13 * peak {
            continue;
        }
        let d = disturbance_per_volt(p, bin_frequency(k, n, w.sample_rate()))?;
        dm[k] = spec[k] * d.v_dm;
        cm[k] = spec[k] * d.v_cm;
        if k != n - k {
            dm[n - k] = dm[k].conj();
            cm[n - k] = cm[k].conj();
        }
    }
    let build =
        |s: &[Complex64]| Waveform::with_parts(inverse_real(s), w.sample_rate(), w.t0(), None);
    Ok((build(&dm), build(&cm)))
}

fn apply_amp(amp: &AmpStage, dm_in: &Waveform, cm_in: &Waveform) -> Waveform {
    match amp {
        AmpStage::Cmrr(a) => mix(dm_in, a.differential_gain(), cm_in, a.common_mode_gain()),
        AmpStage::Nonlinear(a) => apply_nonlinear_amp(a, dm_in),
    }
}

fn apply_filter(p: &VictimPipeline, w: Waveform) -> Result<Waveform> {
    match p.filter {
        Some(f) => lowpass_ideal(&w, f.cutoff, f.remove_dc).map_err(|e| e.in_stage("filter")),
        None => Ok(w),
    }
}

/// Digitized output and its scalar metric.
fn digitize(p: &VictimPipeline, w: Waveform) -> Result<(Waveform, f64)> {
    match &p.digitizer {
        None => Ok((w, f64::NAN)),
        Some(Digitizer::Comparator(cmp)) => {
            let duration = w.duration();
            let (digital, edges) = comparator_pulses(cmp, &w);
            Ok((digital, edges as f64 / duration))
        }
        Some(Digitizer::Adc(adc)) => {
            let s = sample_adc(adc, &w).map_err(|e| e.in_stage("adc"))?;
            let mean = s.mean();
            Ok((s, mean))
        }
    }
}

fn rms(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v * v, c + 1));
    if count == 0 {
        0.0
    } else {
        (sum / count as f64).sqrt()
    }
}

pub fn deviation_ratio(attacked: f64, baseline: f64) -> f64 {
    (attacked - baseline).abs() / baseline.abs().max(DEVIATION_FLOOR)
}

/// Runs the attacked and the attack-free chain over `duration` seconds
/// (ignored when the legitimate input is a waveform).
pub fn run_endtoend(p: &VictimPipeline, attack: &Attack, duration: f64) -> Result<EndToEnd> {
    let attack_freq = match attack {
        Attack::Tone { freq, .. } => *freq,
        Attack::Waveform(w) => w.sample_rate() / AUTO_SAMPLES_PER_PERIOD,
    };
    let (n, rate, t0) = match attack {
        Attack::Waveform(w)
            if !matches!(p.legitimate, Legitimate::Waveform(_)) && p.sample_rate.is_none() =>
        {
            (w.len(), w.sample_rate(), w.t0())
        }
        _ => time_base(p, attack_freq, duration)?,
    };
    let legit = legitimate_input(p, n, rate, t0)?;
    let dist = synthesize(p, attack, n, rate, t0)?;
    let silent = mix(&dist.cm, 0.0, &dist.cm, 0.0);

    let baseline_analog = apply_filter(p, apply_amp(&p.amp, &legit, &silent))?;

    if p.is_linear_chain() {
        // Superposition: the output disturbance is the chain applied to the
        // disturbance alone, which keeps it exactly proportional to the attack.
        let diff = apply_filter(p, apply_amp(&p.amp, &dist.dm, &dist.cm))?;
        let corrupted = mix(&baseline_analog, 1.0, &diff, 1.0);
        let output_metric = rms(diff.samples().iter().copied());
        let baseline_metric = rms(baseline_analog.samples().iter().copied());
        return Ok(EndToEnd {
            corrupted,
            baseline: baseline_analog,
            metric: MetricKind::DisturbanceRms,
            output_metric,
            baseline_metric,
            deviation: output_metric / baseline_metric.max(DEVIATION_FLOOR),
        });
    }

    let dm_in = mix(&legit, 1.0, &dist.dm, 1.0);
    let attacked_analog = apply_filter(p, apply_amp(&p.amp, &dm_in, &dist.cm))?;
    let (metric, corrupted, baseline, output_metric, baseline_metric) = match p.digitizer {
        None => {
            let out = rms(attacked_analog
                .samples()
                .iter()
                .zip(baseline_analog.samples())
                .map(|(a, b)| a - b));
            let base = rms(baseline_analog.samples().iter().copied());
            (
                MetricKind::DisturbanceRms,
                attacked_analog,
                baseline_analog,
                out,
                base,
            )
        }
        Some(d) => {
            let (corrupted, out) = digitize(p, attacked_analog)?;
            let (baseline, base) = digitize(p, baseline_analog)?;
            let kind = match d {
                Digitizer::Comparator(_) => MetricKind::EdgeRate,
                Digitizer::Adc(_) => MetricKind::AdcMean,
            };
            (kind, corrupted, baseline, out, base)
        }
    };
    let deviation = match metric {
        MetricKind::DisturbanceRms => output_metric / baseline_metric.max(DEVIATION_FLOOR),
        _ => deviation_ratio(output_metric, baseline_metric),
    };
    Ok(EndToEnd {
        corrupted,
        baseline,
        metric,
        output_metric,
        baseline_metric,
        deviation,
    })
}

/// Sweeps a fixed-amplitude tone over `grid` and returns the `top_k`
/// frequencies by deviation, largest first, ties toward lower frequency.
pub fn find_vulnerable_frequencies(
    p: &VictimPipeline,
    grid: &FrequencyGrid,
    amplitude: f64,
    duration: f64,
    top_k: usize,
) -> Result<Vec<SweepRow>> {
    if top_k == 0 {
        return Err(Error::InvalidArgument("top_k must be >= 1".into()));
    }
    let mut rows = frequency_sweep(p, grid, amplitude, duration)?;
    rows.sort_by(|a, b| {
        b.deviation
            .total_cmp(&a.deviation)
            .then(a.x.total_cmp(&b.x))
    });
    rows.truncate(top_k);
    Ok(rows)
}

/// One row per grid frequency, in grid order.
pub fn frequency_sweep(
    p: &VictimPipeline,
    grid: &FrequencyGrid,
    amplitude: f64,
    duration: f64,
) -> Result<Vec<SweepRow>> {
    grid.par_map(|hz| {
        let r = run_endtoend(p, &Attack::tone(hz, amplitude), duration)?;
        Ok(SweepRow {
            x: hz,
            output_metric: r.output_metric,
            baseline_metric: r.baseline_metric,
            deviation: r.deviation,
        })
    })
}

/// 0 V to 300 V in 20 V steps.
pub fn default_amplitudes() -> Vec<f64> {
    (0..=15).map(|i| 20.0 * i as f64).collect()
}

pub fn amplitude_response(
    p: &VictimPipeline,
    freq: f64,
    amplitudes: &[f64],
    duration: f64,
) -> Result<Vec<SweepRow>> {
    if amplitudes.is_empty() {
        return Err(Error::InvalidArgument("no amplitudes given".into()));
    }
    if amplitudes.iter().any(|a| !(a.is_finite() && *a >= 0.0))
        || amplitudes.windows(2).any(|w| w[1] <= w[0])
    {
        return Err(Error::InvalidArgument(
            "amplitudes must be >= 0 and strictly increasing".into(),
        ));
    }
    use rayon::prelude::*;
    amplitudes
        .par_iter()
        .map(|a| {
            let r = run_endtoend(p, &Attack::tone(freq, *a), duration)?;
            Ok(SweepRow {
                x: *a,
                output_metric: r.output_metric,
                baseline_metric: r.baseline_metric,
                deviation: r.deviation,
            })
        })
        .collect()
}
