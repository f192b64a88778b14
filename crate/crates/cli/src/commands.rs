use std::path::Path;

use gndline_core::conversion::frc_conversion;
use gndline_core::coupling::frc_cm_current;
use gndline_core::guard::{detect_attack_endtoend, evaluate_randomized_sampling, symmetry_whatif};
use gndline_core::pipeline::{
    amplitude_response, default_amplitudes, find_vulnerable_frequencies, frc_endtoend,
    frequency_sweep, run_endtoend, Attack, Digitizer, MetricKind, SweepRow, VictimPipeline,
};
use gndline_core::signal::spectrum::tone_amplitude;
use gndline_core::signal::{
    apply_nonlinear_amp, comparator_pulses, design_ac_attack, design_dc_attack,
    design_pulse_attack, lowpass_ideal, predict_alias, sample_adc, synth_tone, AdcSampler,
    ComparatorState, DcAttack, HysteresisComparator, Jitter, NonlinearAmp, Waveform,
};
use gndline_core::{FrcRow, FrequencyGrid};

use crate::output::{write_pcm, write_table, Cell, Table};
use crate::scenario::{AttackSpec, GridSpec, Scenario, SweepSpec};
use crate::{CliError, FrcWhich, GuardWhat, Report};

fn pick_grid(
    flag: Option<&GridSpec>,
    fallback: Option<&GridSpec>,
) -> Result<FrequencyGrid, CliError> {
    match flag.or(fallback) {
        Some(g) => g.build(),
        None => Ok(FrequencyGrid::reference()),
    }
}

fn scenario_grid(s: &Scenario) -> Option<&GridSpec> {
    match &s.sweep {
        Some(SweepSpec::Frequency { grid, .. }) => grid.as_ref(),
        _ => None,
    }
}

fn frc_table(units: String, rows: &[FrcRow]) -> Table {
    let mut t = Table::new(units, vec!["frequency_hz", "magnitude", "phase_rad"]);
    for r in rows {
        t.push(vec![
            r.frequency_hz.into(),
            r.magnitude.into(),
            r.phase_rad.into(),
        ]);
    }
    t
}

pub fn frc(
    s: &Scenario,
    which: FrcWhich,
    grid: Option<&GridSpec>,
    out: &Path,
    report: &Report,
) -> Result<(), CliError> {
    let grid = pick_grid(grid, scenario_grid(s))?;
    let coupling = s.coupling()?;
    let conversion = s.conversion()?;
    let vs = s.source.vs_volt;
    let (rows, units) = match which {
        FrcWhich::Coupling => (
            frc_cm_current(&coupling, &grid)?,
            format!("frequency in Hz; magnitude |I_CM| in A at Vs = {vs} V; phase in rad"),
        ),
        FrcWhich::Conversion => (
            frc_conversion(&conversion, &grid)?,
            "frequency in Hz; magnitude |k2| in ohm; phase in rad".to_string(),
        ),
        FrcWhich::Endtoend => (
            frc_endtoend(&coupling, &conversion, vs, &grid)?,
            format!("frequency in Hz; magnitude |V_DM| in V at Vs = {vs} V; phase in rad"),
        ),
    };
    write_table(out, &frc_table(units, &rows))?;
    if let Some(peak) = rows
        .iter()
        .max_by(|a, b| a.magnitude.total_cmp(&b.magnitude))
    {
        report.line(format!(
            "{} rows; peak magnitude {:.6e} at {:.6e} Hz",
            rows.len(),
            peak.magnitude,
            peak.frequency_hz
        ));
    }
    Ok(())
}

fn waveform_table(w: &Waveform) -> Table {
    let mut t = Table::new("time in s; volts in V", vec!["time_s", "volts"]);
    for (k, v) in w.samples().iter().enumerate() {
        t.push(vec![w.time(k).into(), (*v).into()]);
    }
    t
}

struct Metrics(Table);

impl Metrics {
    fn new() -> Self {
        Self(Table::new("units per row", vec!["metric", "value", "unit"]))
    }

    fn add(&mut self, name: &str, value: impl Into<Cell>, unit: &str) {
        self.0.push(vec![name.into(), value.into(), unit.into()]);
    }
}

pub fn attack(
    s: &Scenario,
    spec: &AttackSpec,
    out: &Path,
    metrics_path: &Path,
    pcm: Option<&Path>,
    report: &Report,
) -> Result<(), CliError> {
    let mut m = Metrics::new();
    let waveform = match spec {
        AttackSpec::Ac {
            baseband_hz,
            baseband_amplitude,
            carrier_hz,
            sample_rate_hz,
            duration_s,
            amp,
            lowpass_cutoff_hz,
        } => {
            let baseband = synth_tone(
                *baseband_hz,
                *baseband_amplitude,
                0.0,
                *duration_s,
                *sample_rate_hz,
            )?;
            let designed = design_ac_attack(&baseband, *carrier_hz)?;
            let amp = NonlinearAmp::new(amp.gain_linear, amp.gain_quadratic_per_volt)?;
            let demod = lowpass_ideal(
                &apply_nonlinear_amp(&amp, &designed),
                *lowpass_cutoff_hz,
                true,
            )?;
            let recovered = tone_amplitude(&demod, *baseband_hz);
            let expected = amp.gain_quadratic * baseband_amplitude;
            m.add("carrier_hz", *carrier_hz, "Hz");
            m.add("baseband_hz", *baseband_hz, "Hz");
            m.add("recovered_amplitude", recovered, "V");
            m.add("expected_amplitude", expected, "V");
            let rel = if expected != 0.0 {
                (recovered - expected).abs() / expected.abs()
            } else {
                recovered
            };
            m.add("relative_error", rel, "1");
            report.line(format!(
                "recovered {recovered:.6e} V at {baseband_hz} Hz (expected {expected:.6e} V)"
            ));
            designed
        }
        AttackSpec::Pulse {
            pulse_rate_hz,
            jitter_amplitude_volt,
            threshold_high_volt,
            threshold_low_volt,
            duration_s,
            sample_rate_hz,
        } => {
            let cmp = HysteresisComparator::new(
                *threshold_high_volt,
                *threshold_low_volt,
                ComparatorState::Low,
            )?;
            let w = design_pulse_attack(
                *pulse_rate_hz,
                *jitter_amplitude_volt,
                &cmp,
                *duration_s,
                *sample_rate_hz,
            )?;
            let (_, edges) = comparator_pulses(&cmp, &w);
            m.add("pulse_rate_hz", *pulse_rate_hz, "Hz");
            m.add("rising_edges", edges, "count");
            m.add(
                "target_edges",
                (pulse_rate_hz * duration_s).round(),
                "count",
            );
            m.add("edge_rate_hz", edges as f64 / w.duration(), "Hz");
            report.line(format!("{edges} rising edges over {duration_s} s"));
            w
        }
        AttackSpec::Dc {
            target_bias_volt,
            adc_rate_hz,
            band_low_hz,
            band_high_hz,
            duration_s,
            render_rate_hz,
        } => {
            let d = design_dc_attack(
                *target_bias_volt,
                *adc_rate_hz,
                (*band_low_hz, *band_high_hz),
            )?;
            let rate = render_rate_hz.unwrap_or(2.5 * d.carrier_freq);
            let w = d.waveform(*duration_s, rate)?;
            let sampled = sample_adc(&AdcSampler::new(*adc_rate_hz, Jitter::None, s.seed)?, &w)?;
            let alias = predict_alias(d.carrier_freq, *adc_rate_hz)?;
            m.add("carrier_hz", d.carrier_freq, "Hz");
            m.add("amplitude", d.amplitude, "V");
            m.add("phase", d.phase, "rad");
            m.add("sampled_mean", sampled.mean(), "V");
            m.add("sampled_std", sampled.std_dev(), "V");
            m.add("alias_formula_hz", alias.f_alias_formula, "Hz");
            m.add("alias_formula_m", alias.m_used, "1");
            m.add("alias_formula_constraint_met", alias.constraint_met, "flag");
            m.add("alias_sampled_hz", alias.f_alias_sampled, "Hz");
            m.add("alias_predictors_agree", alias.agrees(), "flag");
            report.line(format!(
                "carrier {} Hz; sampled mean {:.6e} V, std {:.3e} V",
                d.carrier_freq,
                sampled.mean(),
                sampled.std_dev()
            ));
            if !alias.agrees() {
                report.line(format!(
                    "alias predictors disagree: formula {} Hz (m = {}), sampled {} Hz",
                    alias.f_alias_formula, alias.m_used, alias.f_alias_sampled
                ));
            }
            w
        }
        AttackSpec::Tone {
            freq_hz,
            amplitude_volt,
        } => {
            let p = s.pipeline()?;
            let amplitude = amplitude_volt.unwrap_or(s.source.vs_volt);
            let r = run_endtoend(
                &p,
                &Attack::tone(*freq_hz, amplitude),
                s.pipeline.duration_s,
            )?;
            let unit = r.metric.unit();
            m.add("freq_hz", *freq_hz, "Hz");
            m.add("amplitude", amplitude, "V");
            m.add("metric", metric_name(r.metric), "-");
            m.add("output_metric", r.output_metric, unit);
            m.add("baseline_metric", r.baseline_metric, unit);
            m.add("deviation", r.deviation, "1");
            report.line(format!(
                "deviation {:.6e} ({})",
                r.deviation,
                metric_name(r.metric)
            ));
            r.corrupted
        }
    };
    write_table(out, &waveform_table(&waveform))?;
    write_table(metrics_path, &m.0)?;
    if let Some(path) = pcm {
        write_pcm(path, waveform.samples(), waveform.sample_rate())?;
    }
    Ok(())
}

fn metric_name(kind: MetricKind) -> &'static str {
    match kind {
        MetricKind::DisturbanceRms => "disturbance_rms",
        MetricKind::EdgeRate => "edge_rate",
        MetricKind::AdcMean => "adc_mean",
    }
}

fn pipeline_metric(p: &VictimPipeline) -> MetricKind {
    match p.digitizer {
        None => MetricKind::DisturbanceRms,
        Some(Digitizer::Comparator(_)) => MetricKind::EdgeRate,
        Some(Digitizer::Adc(_)) => MetricKind::AdcMean,
    }
}

fn sweep_table(x_unit: &str, kind: MetricKind, rows: &[SweepRow]) -> Table {
    let units = format!(
        "x in {x_unit}; output_metric in {} ({}); deviation dimensionless",
        kind.unit(),
        metric_name(kind)
    );
    let mut t = Table::new(units, vec!["x", "output_metric", "deviation"]);
    for r in rows {
        t.push(vec![r.x.into(), r.output_metric.into(), r.deviation.into()]);
    }
    t
}

pub fn sweep(
    s: &Scenario,
    grid_flag: Option<&GridSpec>,
    out: &Path,
    report: &Report,
) -> Result<(), CliError> {
    let p = s.pipeline()?;
    let duration = s.pipeline.duration_s;
    let kind = pipeline_metric(&p);
    let default_sweep = SweepSpec::Frequency {
        grid: None,
        amplitude_volt: None,
        top_k: None,
    };
    let table = match s.sweep.as_ref().unwrap_or(&default_sweep) {
        SweepSpec::Frequency {
            grid,
            amplitude_volt,
            top_k,
        } => {
            let grid = pick_grid(grid_flag, grid.as_ref())?;
            let amplitude = amplitude_volt.unwrap_or(s.source.vs_volt);
            let rows = match top_k {
                Some(k) => find_vulnerable_frequencies(&p, &grid, amplitude, duration, *k)?,
                None => frequency_sweep(&p, &grid, amplitude, duration)?,
            };
            if let Some(best) = rows.iter().max_by(|a, b| {
                a.deviation
                    .total_cmp(&b.deviation)
                    .then(b.x.total_cmp(&a.x))
            }) {
                report.line(format!(
                    "most vulnerable: {:.6e} Hz (deviation {:.6e})",
                    best.x, best.deviation
                ));
            }
            sweep_table("Hz", kind, &rows)
        }
        SweepSpec::Amplitude {
            freq_hz,
            amplitudes_volt,
        } => {
            if grid_flag.is_some() {
                return Err(CliError::Usage(
                    "--grid applies to frequency sweeps only".into(),
                ));
            }
            let amplitudes = amplitudes_volt.clone().unwrap_or_else(default_amplitudes);
            let rows = amplitude_response(&p, *freq_hz, &amplitudes, duration)?;
            report.line(format!("{} amplitudes at {freq_hz} Hz", rows.len()));
            sweep_table("V", kind, &rows)
        }
    };
    write_table(out, &table)
}

pub fn guard(
    s: &Scenario,
    what: GuardWhat,
    grid_flag: Option<&GridSpec>,
    out: &Path,
    report: &Report,
) -> Result<(), CliError> {
    if grid_flag.is_some() && what != GuardWhat::Whatif {
        return Err(CliError::Usage(
            "--grid applies to --what whatif only".into(),
        ));
    }
    let table = match what {
        GuardWhat::Detect => {
            let det = s.detector()?;
            let a = &s.guard.attack;
            let v = detect_attack_endtoend(&s.pipeline()?, &det, a.freq_hz, a.vs_volt)?;
            let mut t = Table::new(
                "frequency in Hz; vs in V; sense voltage in V; sense current in A; threshold in V",
                vec![
                    "frequency_hz",
                    "vs_volt",
                    "sense_voltage_v",
                    "sense_current_a",
                    "threshold_v",
                    "detected",
                ],
            );
            t.push(vec![
                a.freq_hz.into(),
                a.vs_volt.into(),
                v.sense_voltage_magnitude.into(),
                v.sense_current.into(),
                det.threshold.into(),
                v.detected.into(),
            ]);
            report.line(format!(
                "sense voltage {:.6e} V: {}",
                v.sense_voltage_magnitude,
                if v.detected {
                    "attack detected"
                } else {
                    "not detected"
                }
            ));
            t
        }
        GuardWhat::Defense => {
            let d = &s.guard.defense;
            let attack = DcAttack {
                carrier_freq: d.carrier_hz,
                amplitude: d.amplitude_volt,
                phase: d.phase_rad,
            };
            let span = d.jitter_span_s.unwrap_or(1.0 / d.adc_rate_hz);
            let fixed = AdcSampler::new(d.adc_rate_hz, Jitter::None, s.seed)?;
            let mut t = Table::new(
                "seed; std in V",
                vec!["seed", "std_fixed_v", "std_random_v", "defense_effective"],
            );
            let mut effective = 0;
            for k in 0..d.seeds {
                let seed = s.seed.wrapping_add(k);
                let random = AdcSampler::new(d.adc_rate_hz, Jitter::UniformRandom { span }, seed)?;
                let r = evaluate_randomized_sampling(&fixed, &random, &attack, d.window_s)?;
                effective += r.defense_effective as u64;
                t.push(vec![
                    seed.into(),
                    r.std_fixed.into(),
                    r.std_random.into(),
                    r.defense_effective.into(),
                ]);
            }
            report.line(format!(
                "defense effective for {effective} of {} seeds",
                d.seeds
            ));
            t
        }
        GuardWhat::Whatif => {
            let grid = pick_grid(grid_flag, s.guard.whatif_grid.as_ref())?;
            let rows = symmetry_whatif(&s.conversion()?, &grid)?;
            let mut t = Table::new(
                "frequency in Hz; |k2| and scale in ohm",
                vec![
                    "pair",
                    "frequency_hz",
                    "k2_before_ohm",
                    "k2_after_ohm",
                    "scale_after_ohm",
                ],
            );
            for r in &rows {
                t.push(vec![
                    r.target.label().into(),
                    r.frequency_hz.into(),
                    r.k2_before.into(),
                    r.k2_after.into(),
                    r.scale_after.into(),
                ]);
            }
            report.line(format!("{} rows", rows.len()));
            t
        }
    };
    write_table(out, &table)
}
