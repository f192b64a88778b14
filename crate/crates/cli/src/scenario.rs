//! JSON scenario files. Every struct rejects unknown keys so a typo fails the
//! parse instead of silently falling back to a default.

use std::fmt;
use std::path::Path;

use serde::de::{self, Deserializer, Visitor};
use serde::Deserialize;

use gndline_core::conversion::ConversionNetwork;
use gndline_core::coupling::CouplingNetwork;
use gndline_core::guard::{CmChokeDetector, DEFAULT_THRESHOLD_V};
use gndline_core::pipeline::{
    AmpStage, CmrrAmp, Digitizer, Legitimate, LowpassStage, VictimPipeline,
};
use gndline_core::signal::{
    AdcSampler, ComparatorState, HysteresisComparator, Jitter, NonlinearAmp,
};
use gndline_core::{FrequencyGrid, ImpedanceElement, Spacing};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Capacitance {
    Farad(f64),
    Absent,
}

impl<'de> Deserialize<'de> for Capacitance {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct CapVisitor;

        impl<'de> Visitor<'de> for CapVisitor {
            type Value = Capacitance;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a capacitance in farad or the string \"absent\"")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Capacitance, E> {
                Ok(Capacitance::Farad(v))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Capacitance, E> {
                Ok(Capacitance::Farad(v as f64))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Capacitance, E> {
                Ok(Capacitance::Farad(v as f64))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Capacitance, E> {
                match v {
                    "absent" => Ok(Capacitance::Absent),
                    other => Err(E::invalid_value(de::Unexpected::Str(other), &self)),
                }
            }
        }

        deserializer.deserialize_any(CapVisitor)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElementSpec {
    pub r_ohm: f64,
    pub l_henry: f64,
    pub c_farad: Capacitance,
}

impl ElementSpec {
    fn build(&self, key: &str) -> Result<ImpedanceElement, CliError> {
        let c = match self.c_farad {
            Capacitance::Farad(c) => Some(c),
            Capacitance::Absent => None,
        };
        ImpedanceElement::new(self.r_ohm, self.l_henry, c)
            .map_err(|e| CliError::Config(format!("{key}: {e}")))
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSpec {
    #[serde(default = "default_vs")]
    pub vs_volt: f64,
}

fn default_vs() -> f64 {
    300.0
}

impl Default for SourceSpec {
    fn default() -> Self {
        Self {
            vs_volt: default_vs(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingSpec {
    pub z_ga1: ElementSpec,
    pub z_sa1: ElementSpec,
    pub z_gs1: ElementSpec,
    pub z_ga2: ElementSpec,
    pub z_sa2: ElementSpec,
    pub z_gs2: ElementSpec,
    pub z_g: ElementSpec,
    pub z_s: ElementSpec,
    pub z_v: ElementSpec,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConversionSpec {
    pub z_1i: ElementSpec,
    pub z_2i: ElementSpec,
    pub z_3i: ElementSpec,
    pub z_1o: ElementSpec,
    pub z_2o: ElementSpec,
    pub z_3o: ElementSpec,
    pub z_l: ElementSpec,
    pub z_r: ElementSpec,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AmpSpec {
    Ideal {
        differential_gain: f64,
    },
    Cmrr {
        g_m_siemens: f64,
        delta_g_m_siemens: f64,
        r_ss_ohm: f64,
        differential_gain: f64,
    },
    Nonlinear {
        gain_linear: f64,
        gain_quadratic_per_volt: f64,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterSpec {
    pub cutoff_hz: f64,
    #[serde(default)]
    pub remove_dc: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InitialState {
    #[default]
    Low,
    High,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DigitizerSpec {
    Comparator {
        threshold_high_volt: f64,
        threshold_low_volt: f64,
        #[serde(default)]
        initial_state: InitialState,
    },
    Adc {
        sample_rate_hz: f64,
        /// Seconds; absent or zero means uniform sampling.
        #[serde(default)]
        jitter_span_s: f64,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineSpec {
    pub amp: AmpSpec,
    #[serde(default)]
    pub filter: Option<FilterSpec>,
    #[serde(default)]
    pub digitizer: Option<DigitizerSpec>,
    #[serde(default = "default_legitimate")]
    pub legitimate_volt: f64,
    #[serde(default = "default_duration")]
    pub duration_s: f64,
    #[serde(default)]
    pub sample_rate_hz: Option<f64>,
}

fn default_legitimate() -> f64 {
    1.0
}

fn default_duration() -> f64 {
    1e-3
}

impl Default for PipelineSpec {
    fn default() -> Self {
        Self {
            amp: AmpSpec::Ideal {
                differential_gain: 1.0,
            },
            filter: None,
            digitizer: None,
            legitimate_volt: default_legitimate(),
            duration_s: default_duration(),
            sample_rate_hz: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadraticAmpSpec {
    pub gain_linear: f64,
    pub gain_quadratic_per_volt: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case", deny_unknown_fields)]
pub enum AttackSpec {
    Ac {
        baseband_hz: f64,
        #[serde(default = "one")]
        baseband_amplitude: f64,
        carrier_hz: f64,
        sample_rate_hz: f64,
        duration_s: f64,
        amp: QuadraticAmpSpec,
        lowpass_cutoff_hz: f64,
    },
    Pulse {
        pulse_rate_hz: f64,
        jitter_amplitude_volt: f64,
        threshold_high_volt: f64,
        threshold_low_volt: f64,
        duration_s: f64,
        sample_rate_hz: f64,
    },
    Dc {
        target_bias_volt: f64,
        adc_rate_hz: f64,
        band_low_hz: f64,
        band_high_hz: f64,
        #[serde(default = "one")]
        duration_s: f64,
        /// Rate of the exported waveform; defaults to 2.5x the carrier.
        #[serde(default)]
        render_rate_hz: Option<f64>,
    },
    Tone {
        freq_hz: f64,
        /// Defaults to `source.vs_volt`.
        #[serde(default)]
        amplitude_volt: Option<f64>,
    },
}

impl AttackSpec {
    pub fn method(&self) -> &'static str {
        match self {
            AttackSpec::Ac { .. } => "ac",
            AttackSpec::Pulse { .. } => "pulse",
            AttackSpec::Dc { .. } => "dc",
            AttackSpec::Tone { .. } => "tone",
        }
    }
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpacingSpec {
    Log,
    #[serde(alias = "lin")]
    Linear,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub start_hz: f64,
    pub stop_hz: f64,
    pub points: usize,
    pub spacing: SpacingSpec,
}

impl GridSpec {
    pub fn build(&self) -> Result<FrequencyGrid, CliError> {
        let spacing = match self.spacing {
            SpacingSpec::Log => Spacing::Log,
            SpacingSpec::Linear => Spacing::Linear,
        };
        FrequencyGrid::new(self.start_hz, self.stop_hz, self.points, spacing)
            .map_err(|e| CliError::Config(format!("grid: {e}")))
    }

    /// `start,stop,points,log|lin` as given on the command line.
    pub fn parse_flag(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 4 {
            return Err(format!("expected start,stop,points,log|lin, got `{s}`"));
        }
        let num = |p: &str, what: &str| p.parse::<f64>().map_err(|_| format!("bad {what} `{p}`"));
        let spacing = match parts[3] {
            "log" => SpacingSpec::Log,
            "lin" | "linear" => SpacingSpec::Linear,
            other => return Err(format!("spacing must be log or lin, got `{other}`")),
        };
        Ok(Self {
            start_hz: num(parts[0], "start")?,
            stop_hz: num(parts[1], "stop")?,
            points: parts[2]
                .parse()
                .map_err(|_| format!("bad point count `{}`", parts[2]))?,
            spacing,
        })
    }
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            start_hz: 50.0,
            stop_hz: 5e5,
            points: 200,
            spacing: SpacingSpec::Log,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SweepSpec {
    Frequency {
        #[serde(default)]
        grid: Option<GridSpec>,
        /// Defaults to `source.vs_volt`.
        #[serde(default)]
        amplitude_volt: Option<f64>,
        /// When set, only the `top_k` most disruptive frequencies are written.
        #[serde(default)]
        top_k: Option<usize>,
    },
    Amplitude {
        freq_hz: f64,
        /// Defaults to 0 V to 300 V in 20 V steps.
        #[serde(default)]
        amplitudes_volt: Option<Vec<f64>>,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSpec {
    pub mutual_inductance_henry: f64,
    pub sense_resistance_ohm: f64,
    #[serde(default = "default_threshold")]
    pub threshold_volt: f64,
}

fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD_V
}

impl Default for DetectorSpec {
    fn default() -> Self {
        let r = CmChokeDetector::reference();
        Self {
            mutual_inductance_henry: r.mutual_inductance,
            sense_resistance_ohm: r.sense_resistance,
            threshold_volt: r.threshold,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GuardAttackSpec {
    pub freq_hz: f64,
    pub vs_volt: f64,
}

impl Default for GuardAttackSpec {
    fn default() -> Self {
        Self {
            freq_hz: 320e3,
            vs_volt: 260.0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DefenseSpec {
    pub carrier_hz: f64,
    pub amplitude_volt: f64,
    #[serde(default)]
    pub phase_rad: f64,
    pub adc_rate_hz: f64,
    /// Defaults to one ADC period.
    #[serde(default)]
    pub jitter_span_s: Option<f64>,
    pub window_s: f64,
    #[serde(default = "default_seeds")]
    pub seeds: u64,
}

fn default_seeds() -> u64 {
    32
}

impl Default for DefenseSpec {
    fn default() -> Self {
        Self {
            carrier_hz: 10e3,
            amplitude_volt: 1.0,
            phase_rad: 0.0,
            adc_rate_hz: 1e3,
            jitter_span_s: None,
            window_s: 10.0,
            seeds: default_seeds(),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GuardSpec {
    #[serde(default)]
    pub detector: DetectorSpec,
    #[serde(default)]
    pub attack: GuardAttackSpec,
    #[serde(default)]
    pub defense: DefenseSpec,
    #[serde(default)]
    pub whatif_grid: Option<GridSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub source: SourceSpec,
    pub coupling: CouplingSpec,
    pub conversion: ConversionSpec,
    #[serde(default)]
    pub pipeline: PipelineSpec,
    #[serde(default)]
    pub attack: Option<AttackSpec>,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub guard: GuardSpec,
}

impl Scenario {
    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_str(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn from_str(text: &str) -> Result<Self, CliError> {
        let scenario: Scenario =
            serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        scenario.validate()?;
        Ok(scenario)
    }

    /// Builds every model once so range errors surface before any work starts.
    fn validate(&self) -> Result<(), CliError> {
        if !(self.source.vs_volt.is_finite()) {
            return Err(CliError::Config("source.vs_volt must be finite".into()));
        }
        self.coupling()?;
        self.conversion()?;
        self.pipeline()?;
        self.detector()?;
        Ok(())
    }

    pub fn coupling(&self) -> Result<CouplingNetwork, CliError> {
        let c = &self.coupling;
        Ok(CouplingNetwork {
            source_amplitude: self.source.vs_volt,
            z_ga1: c.z_ga1.build("coupling.z_ga1")?,
            z_sa1: c.z_sa1.build("coupling.z_sa1")?,
            z_gs1: c.z_gs1.build("coupling.z_gs1")?,
            z_ga2: c.z_ga2.build("coupling.z_ga2")?,
            z_sa2: c.z_sa2.build("coupling.z_sa2")?,
            z_gs2: c.z_gs2.build("coupling.z_gs2")?,
            z_g: c.z_g.build("coupling.z_g")?,
            z_s: c.z_s.build("coupling.z_s")?,
            z_v: c.z_v.build("coupling.z_v")?,
        })
    }

    pub fn conversion(&self) -> Result<ConversionNetwork, CliError> {
        let c = &self.conversion;
        Ok(ConversionNetwork {
            z_1i: c.z_1i.build("conversion.z_1i")?,
            z_2i: c.z_2i.build("conversion.z_2i")?,
            z_3i: c.z_3i.build("conversion.z_3i")?,
            z_1o: c.z_1o.build("conversion.z_1o")?,
            z_2o: c.z_2o.build("conversion.z_2o")?,
            z_3o: c.z_3o.build("conversion.z_3o")?,
            z_l: c.z_l.build("conversion.z_l")?,
            z_r: c.z_r.build("conversion.z_r")?,
        })
    }

    pub fn pipeline(&self) -> Result<VictimPipeline, CliError> {
        let p = &self.pipeline;
        let cfg =
            |what: &str, e: gndline_core::Error| CliError::Config(format!("pipeline.{what}: {e}"));
        let amp = match p.amp {
            AmpSpec::Ideal { differential_gain } => {
                AmpStage::Cmrr(CmrrAmp::ideal(differential_gain).map_err(|e| cfg("amp", e))?)
            }
            AmpSpec::Cmrr {
                g_m_siemens,
                delta_g_m_siemens,
                r_ss_ohm,
                differential_gain,
            } => AmpStage::Cmrr(
                CmrrAmp::new(g_m_siemens, delta_g_m_siemens, r_ss_ohm, differential_gain)
                    .map_err(|e| cfg("amp", e))?,
            ),
            AmpSpec::Nonlinear {
                gain_linear,
                gain_quadratic_per_volt,
            } => AmpStage::Nonlinear(
                NonlinearAmp::new(gain_linear, gain_quadratic_per_volt)
                    .map_err(|e| cfg("amp", e))?,
            ),
        };
        if let Some(f) = &p.filter {
            if !(f.cutoff_hz.is_finite() && f.cutoff_hz > 0.0) {
                return Err(CliError::Config(format!(
                    "pipeline.filter.cutoff_hz must be > 0, got {}",
                    f.cutoff_hz
                )));
            }
        }
        let digitizer = match &p.digitizer {
            None => None,
            Some(DigitizerSpec::Comparator {
                threshold_high_volt,
                threshold_low_volt,
                initial_state,
            }) => {
                let state = match initial_state {
                    InitialState::Low => ComparatorState::Low,
                    InitialState::High => ComparatorState::High,
                };
                Some(Digitizer::Comparator(
                    HysteresisComparator::new(*threshold_high_volt, *threshold_low_volt, state)
                        .map_err(|e| cfg("digitizer", e))?,
                ))
            }
            Some(DigitizerSpec::Adc {
                sample_rate_hz,
                jitter_span_s,
            }) => {
                let jitter = if *jitter_span_s == 0.0 {
                    Jitter::None
                } else {
                    Jitter::UniformRandom {
                        span: *jitter_span_s,
                    }
                };
                Some(Digitizer::Adc(
                    AdcSampler::new(*sample_rate_hz, jitter, self.seed)
                        .map_err(|e| cfg("digitizer", e))?,
                ))
            }
        };
        if !(p.duration_s.is_finite() && p.duration_s > 0.0) {
            return Err(CliError::Config(format!(
                "pipeline.duration_s must be > 0, got {}",
                p.duration_s
            )));
        }
        if !p.legitimate_volt.is_finite() {
            return Err(CliError::Config(
                "pipeline.legitimate_volt must be finite".into(),
            ));
        }
        Ok(VictimPipeline {
            coupling: self.coupling()?,
            conversion: self.conversion()?,
            amp,
            filter: p.filter.as_ref().map(|f| LowpassStage {
                cutoff: f.cutoff_hz,
                remove_dc: f.remove_dc,
            }),
            digitizer,
            legitimate: Legitimate::Constant(p.legitimate_volt),
            sample_rate: p.sample_rate_hz,
        })
    }

    pub fn detector(&self) -> Result<CmChokeDetector, CliError> {
        let d = &self.guard.detector;
        CmChokeDetector::new(
            d.mutual_inductance_henry,
            d.sense_resistance_ohm,
            d.threshold_volt,
        )
        .map_err(|e| CliError::Config(format!("guard.detector: {e}")))
    }

    /// Replaces the seed everywhere it is used.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const REFERENCE: &str = include_str!("../../../scenarios/appendix_e.json");

    #[test]
    fn shipped_reference_matches_models() {
        let s = Scenario::from_str(REFERENCE).unwrap();
        assert_eq!(s.coupling().unwrap(), CouplingNetwork::reference());
        assert_eq!(s.conversion().unwrap(), ConversionNetwork::reference());
        assert_eq!(s.source.vs_volt, 300.0);
        assert_eq!(s.seed, 0);
    }

    #[test]
    fn typo_is_rejected_by_name() {
        let bad = REFERENCE.replace("\"vs_volt\": 300", "\"vss_volt\": 300");
        assert_ne!(bad, REFERENCE);
        let err = Scenario::from_str(&bad).unwrap_err().to_string();
        assert!(err.contains("vss_volt"), "{err}");
        assert!(err.contains("line"), "{err}");
    }

    #[test]
    fn empty_and_missing() {
        assert!(Scenario::from_str("").is_err());
        let err = Scenario::from_str(r#"{"name": "x"}"#)
            .unwrap_err()
            .to_string();
        assert!(err.contains("coupling"), "{err}");
    }

    #[test]
    fn negative_resistance_names_the_key() {
        let bad = REFERENCE.replacen("\"r_ohm\": 1000000.0", "\"r_ohm\": -1", 1);
        let err = Scenario::from_str(&bad).unwrap_err().to_string();
        assert!(err.contains("coupling.z_ga1"), "{err}");
    }

    #[test]
    fn absent_capacitance() {
        let e: ElementSpec =
            serde_json::from_str(r#"{"r_ohm": 1, "l_henry": 0, "c_farad": "absent"}"#).unwrap();
        assert_eq!(e.c_farad, Capacitance::Absent);
        assert!(serde_json::from_str::<ElementSpec>(
            r#"{"r_ohm": 1, "l_henry": 0, "c_farad": "none"}"#
        )
        .is_err());
    }

    #[test]
    fn grid_flag() {
        let g = GridSpec::parse_flag("10,1e4,5,lin").unwrap();
        assert_eq!(g.points, 5);
        assert_eq!(g.spacing, SpacingSpec::Linear);
        assert!(GridSpec::parse_flag("10,1e4,5").is_err());
        assert!(GridSpec::parse_flag("10,1e4,5,cubic").is_err());
    }
}
