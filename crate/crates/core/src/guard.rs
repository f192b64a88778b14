//! Countermeasures: a common-mode choke with a sense winding as a detector,
//! randomized ADC sampling against DC-bias injection, and a what-if analysis of
//! how much each symmetrization removes from the conversion coefficient.

use num_complex::Complex64;

use crate::conversion::{conversion_coefficients, ConversionNetwork, ImbalancePair};
use crate::coupling::solve_coupling;
use crate::error::{Error, Result};
use crate::grid::{angular, FrequencyGrid};
use crate::numeric::check_omega;
use crate::pipeline::VictimPipeline;
use crate::signal::{sample_adc, AdcSampler, DcAttack, Waveform};

/// Simulated sense-winding noise floor in volts.
pub const NOISE_FLOOR_V: f64 = 1e-6;

/// Default decision level: ten times the noise floor.
pub const DEFAULT_THRESHOLD_V: f64 = 10.0 * NOISE_FLOOR_V;

/// Three-winding choke on the ground and signal lines; the third winding sees
/// only the net (common-mode) flux.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CmChokeDetector {
    /// Henry.
    pub mutual_inductance: f64,
    /// Ohm, used to report the sense current.
    pub sense_resistance: f64,
    /// Volt; detection requires the sense voltage to exceed it strictly.
    pub threshold: f64,
}

impl CmChokeDetector {
    pub fn new(mutual_inductance: f64, sense_resistance: f64, threshold: f64) -> Result<Self> {
        if !(mutual_inductance.is_finite() && mutual_inductance > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "mutual inductance must be > 0, got {mutual_inductance}"
            )));
        }
        if !(sense_resistance.is_finite() && sense_resistance > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "sense resistance must be > 0, got {sense_resistance}"
            )));
        }
        if !(threshold.is_finite() && threshold >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "threshold must be >= 0, got {threshold}"
            )));
        }
        Ok(Self {
            mutual_inductance,
            sense_resistance,
            threshold,
        })
    }

    /// 1 mH coupling into 50 Ω with the default threshold.
    pub fn reference() -> Self {
        Self::new(1e-3, 50.0, DEFAULT_THRESHOLD_V).expect("valid constants")
    }

    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.threshold = threshold;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionVerdict {
    pub frequency_hz: f64,
    pub sense_voltage: Complex64,
    pub sense_voltage_magnitude: f64,
    /// `|V_sense| / R_m`.
    pub sense_current: f64,
    pub detected: bool,
}

/// `V_sense = jωM·(I_g + I_s)`.
pub fn detect_cm(
    det: &CmChokeDetector,
    i_g: Complex64,
    i_s: Complex64,
    omega: f64,
) -> Result<DetectionVerdict> {
    check_omega(omega)?;
    let sense_voltage = Complex64::new(0.0, omega * det.mutual_inductance) * (i_g + i_s);
    let magnitude = sense_voltage.norm();
    Ok(DetectionVerdict {
        frequency_hz: omega / (2.0 * std::f64::consts::PI),
        sense_voltage,
        sense_voltage_magnitude: magnitude,
        sense_current: magnitude / det.sense_resistance,
        detected: magnitude > det.threshold,
    })
}

/// Feeds the line currents of the coupling stage, driven by a `vs`-volt tone
/// at `freq`, into the detector.
pub fn detect_attack_endtoend(
    p: &VictimPipeline,
    det: &CmChokeDetector,
    freq: f64,
    vs: f64,
) -> Result<DetectionVerdict> {
    if !vs.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "attack amplitude must be finite, got {vs}"
        )));
    }
    let omega = angular(freq);
    let sol =
        solve_coupling(&p.coupling.with_source(vs), omega).map_err(|e| e.in_stage("coupling"))?;
    detect_cm(det, sol.i_g, sol.i_s, omega)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomizedSamplingReport {
    pub std_fixed: f64,
    pub std_random: f64,
    pub defense_effective: bool,
}

/// Samples the same DC-bias attack with a fixed-rate ADC and with a jittered
/// one over `window` seconds. The defense counts as effective when jitter
/// restores a spread above half the amplitude while the fixed sampler stays
/// below a thousandth of it.
pub fn evaluate_randomized_sampling(
    adc_fixed: &AdcSampler,
    adc_random: &AdcSampler,
    dc_attack: &DcAttack,
    window: f64,
) -> Result<RandomizedSamplingReport> {
    let ratio = dc_attack.carrier_freq / adc_fixed.sample_rate();
    if !(ratio >= 1.0 && (ratio - ratio.round()).abs() <= 1e-9 * ratio) {
        return Err(Error::InvalidArgument(format!(
            "carrier {} Hz is not a multiple of the ADC rate {} Hz",
            dc_attack.carrier_freq,
            adc_fixed.sample_rate()
        )));
    }
    let rate = 2.5 * dc_attack.carrier_freq.max(adc_random.sample_rate());
    let w: Waveform = dc_attack.waveform(window, rate)?;
    let fixed = sample_adc(adc_fixed, &w)?;
    let random = sample_adc(adc_random, &w)?;
    let (std_fixed, std_random) = (fixed.std_dev(), random.std_dev());
    let a = dc_attack.amplitude;
    Ok(RandomizedSamplingReport {
        std_fixed,
        std_random,
        defense_effective: std_random > 0.5 * a && std_fixed < 1e-3 * a,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WhatIfTarget {
    Pair(ImbalancePair),
    All,
}

impl WhatIfTarget {
    pub const ALL: [WhatIfTarget; 4] = [
        WhatIfTarget::Pair(ImbalancePair::OutputParasitic),
        WhatIfTarget::Pair(ImbalancePair::Line),
        WhatIfTarget::Pair(ImbalancePair::InputParasitic),
        WhatIfTarget::All,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            WhatIfTarget::Pair(p) => p.label(),
            WhatIfTarget::All => "all",
        }
    }

    pub fn apply(&self, net: ConversionNetwork) -> ConversionNetwork {
        match self {
            WhatIfTarget::Pair(p) => net.symmetrized(*p),
            WhatIfTarget::All => net.fully_symmetrized(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WhatIfRow {
    pub target: WhatIfTarget,
    pub frequency_hz: f64,
    pub k2_before: f64,
    pub k2_after: f64,
    /// `max(|k1|·1 Ω, |k3|, |k4|)` of the symmetrized network.
    pub scale_after: f64,
}

/// For every grid frequency and every target, `|k2|` before and after
/// replacing the target pair(s) by their mean. Rows are grouped by frequency.
pub fn symmetry_whatif(net: &ConversionNetwork, grid: &FrequencyGrid) -> Result<Vec<WhatIfRow>> {
    let per_freq = grid.par_map(|hz| {
        let omega = angular(hz);
        let before = conversion_coefficients(net, omega)?.k2.norm();
        WhatIfTarget::ALL
            .iter()
            .map(|target| {
                let after = conversion_coefficients(&target.apply(*net), omega)?;
                Ok(WhatIfRow {
                    target: *target,
                    frequency_hz: hz,
                    k2_before: before,
                    k2_after: after.k2.norm(),
                    scale_after: after.scale(),
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(per_freq.into_iter().flatten().collect())
}
