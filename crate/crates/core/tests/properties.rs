use std::f64::consts::PI;

use gndline_core::conversion::{conversion_coefficients, ConversionNetwork};
use gndline_core::coupling::{
    assemble_kvl, coupling_factor_closed_form, loop_impedances, solve_coupling, CouplingNetwork,
};
use gndline_core::grid::angular;
use gndline_core::guard::{detect_cm, CmChokeDetector};
use gndline_core::numeric::{
    delta_to_y, relative_residual, solve_linear, ComplexMatrix, DenseMatrix,
};
use gndline_core::pipeline::{
    run_endtoend, AmpStage, Attack, CmrrAmp, LowpassStage, VictimPipeline,
};
use gndline_core::signal::{
    comparator_pulses, sample_adc, AdcSampler, HysteresisComparator, Jitter, Tone, Waveform,
};
use gndline_core::{Complex64, ImpedanceElement};
use proptest::prelude::*;

fn rel(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / b.norm()
}

fn complex() -> impl Strategy<Value = Complex64> {
    (-1e3..1e3f64, -1e3..1e3f64).prop_map(|(re, im)| Complex64::new(re, im))
}

/// A nonzero impedance with real part >= 0 spanning several decades.
fn impedance() -> impl Strategy<Value = Complex64> {
    (-3.0..7.0f64, -3.0..7.0f64, any::<bool>()).prop_map(|(lr, lx, neg)| {
        let x = 10f64.powf(lx);
        Complex64::new(10f64.powf(lr), if neg { -x } else { x })
    })
}

/// An element that evaluates to `R + jX` at `omega`, with R and |X| in
/// [1e-3, 1e7] ohm.
fn element(omega: f64) -> impl Strategy<Value = ImpedanceElement> {
    impedance().prop_map(move |z| {
        if z.im > 0.0 {
            ImpedanceElement::new(z.re, z.im / omega, None)
        } else {
            ImpedanceElement::new(z.re, 0.0, Some(1.0 / (omega * -z.im)))
        }
        .unwrap()
    })
}

fn omega() -> impl Strategy<Value = f64> {
    (50f64.log10()..5e5f64.log10()).prop_map(|l| angular(10f64.powf(l)))
}

fn coupling_case() -> impl Strategy<Value = (CouplingNetwork, f64)> {
    omega().prop_flat_map(|w| {
        (prop::collection::vec(element(w), 9), Just(w)).prop_map(|(e, w)| {
            let net = CouplingNetwork {
                source_amplitude: 1.0,
                z_ga1: e[0],
                z_sa1: e[1],
                z_gs1: e[2],
                z_ga2: e[3],
                z_sa2: e[4],
                z_gs2: e[5],
                z_g: e[6],
                z_s: e[7],
                z_v: e[8],
            };
            (net, w)
        })
    })
}

fn conversion_case() -> impl Strategy<Value = (ConversionNetwork, f64)> {
    omega().prop_flat_map(|w| {
        (prop::collection::vec(element(w), 8), Just(w)).prop_map(|(e, w)| {
            let net = ConversionNetwork {
                z_1i: e[0],
                z_2i: e[1],
                z_3i: e[2],
                z_1o: e[3],
                z_2o: e[4],
                z_3o: e[5],
                z_l: e[6],
                z_r: e[7],
            };
            (net, w)
        })
    })
}

/// Normwise backward error `‖a·x − b‖∞ / (‖a‖∞·‖x‖∞ + ‖b‖∞)`.
fn backward_error(a: &ComplexMatrix, x: &[Complex64], b: &[Complex64]) -> f64 {
    let inf = |v: &[Complex64]| v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let a_norm = (0..a.rows())
        .map(|i| a.row(i).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let r: Vec<Complex64> = a.mul_vec(x).iter().zip(b).map(|(l, r)| l - r).collect();
    inf(&r) / (a_norm * inf(x) + inf(b))
}

fn y_to_delta(a: Complex64, b: Complex64, c: Complex64) -> (Complex64, Complex64, Complex64) {
    let p = a * b + b * c + c * a;
    (p / c, p / a, p / b)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn delta_to_y_round_trip(ab in impedance(), bc in impedance(), ca in impedance()) {
        let (a, b, c) = delta_to_y(ab, bc, ca).unwrap();
        let (ab2, bc2, ca2) = y_to_delta(a, b, c);
        prop_assert!(rel(ab2, ab) < 1e-12);
        prop_assert!(rel(bc2, bc) < 1e-12);
        prop_assert!(rel(ca2, ca) < 1e-12);
    }

    #[test]
    fn impedance_is_homogeneous(
        r in 0.0..1e6f64,
        l in 0.0..1e-2f64,
        c in prop::option::of(1e-12..1e-3f64),
        alpha in 1e-3..1e3f64,
        w in omega(),
    ) {
        let e = ImpedanceElement::new(r, l, c).unwrap();
        let scaled = ImpedanceElement::new(r * alpha, l * alpha, c.map(|c| c / alpha)).unwrap();
        let z = e.evaluate(w).unwrap();
        let zs = scaled.evaluate(w).unwrap();
        prop_assert!((zs - z * alpha).norm() <= 1e-12 * (z * alpha).norm().max(f64::MIN_POSITIVE));
    }

    #[test]
    fn solver_residual_is_small(
        n in 1usize..=8,
        entries in prop::collection::vec(complex(), 64),
        rhs in prop::collection::vec(complex(), 8),
    ) {
        // Diagonal dominance keeps the condition number far below 1e8.
        let rows: Vec<Vec<Complex64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let v = entries[i * 8 + j];
                        if i == j { v + Complex64::new(1e4, 0.0) } else { v }
                    })
                    .collect()
            })
            .collect();
        let a: ComplexMatrix = DenseMatrix::from_rows(rows).unwrap();
        let b = &rhs[..n];
        let x = solve_linear(&a, b).unwrap();
        prop_assert!(relative_residual(&a, &x, b) < 1e-12);
    }

    #[test]
    fn coupling_closed_form_matches_solve((net, w) in coupling_case()) {
        let solved = solve_coupling(&net, w).unwrap();
        let closed = coupling_factor_closed_form(&net, w).unwrap();
        prop_assert!(rel(closed, solved.mu) < 1e-8);
        let (a, b) = assemble_kvl(&loop_impedances(&net, w).unwrap(), 1.0);
        let x = [solved.i_a, solved.i_g, solved.i_s];
        let err = backward_error(&a, &x, &b);
        prop_assert!(err < 1e-10, "backward error {:e}, residual {:e}", err, relative_residual(&a, &x, &b));
    }

    #[test]
    fn coupling_currents_scale_with_source((net, w) in coupling_case(), vs in 1e-3..1e3f64) {
        let unit = solve_coupling(&net, w).unwrap();
        let scaled = solve_coupling(&net.with_source(vs), w).unwrap();
        prop_assert_eq!(scaled.mu, unit.mu);
        for (s, u) in [(scaled.i_a, unit.i_a), (scaled.i_g, unit.i_g), (scaled.i_s, unit.i_s)] {
            prop_assert!((s - u * vs).norm() <= 1e-15 * (u * vs).norm());
        }
    }

    #[test]
    fn decomposition_identity((net, w) in conversion_case()) {
        let c = conversion_coefficients(&net, w).unwrap();
        prop_assert!(rel(c.c1 * c.c2 * c.h_sum, c.k2) < 1e-12);
    }

    #[test]
    fn symmetric_network_has_no_conversion((net, w) in conversion_case()) {
        let sym = ConversionNetwork { z_2o: net.z_1o, z_r: net.z_l, ..net };
        let c = conversion_coefficients(&sym, w).unwrap();
        prop_assert!(c.k2.norm() <= 1e-15 * c.scale());
    }

    #[test]
    fn swapping_lines_negates_k2((net, w) in conversion_case()) {
        let net = ConversionNetwork { z_2i: net.z_1i, ..net };
        let k2 = conversion_coefficients(&net, w).unwrap().k2;
        let swapped = conversion_coefficients(&net.swapped_lines(), w).unwrap().k2;
        prop_assert!((swapped + k2).norm() <= 1e-12 * k2.norm());
    }

    #[test]
    fn comparator_counts_jitter_edges(
        rate in 1.0..200.0f64,
        duration in 0.2..1.5f64,
        center in -2.0..2.0f64,
        half in 0.05..1.0f64,
        factor in 1.2..4.0f64,
    ) {
        let cmp = HysteresisComparator::symmetric(center, half).unwrap();
        let render = |j: f64| {
            Waveform::from_tones(vec![Tone::dc(center), Tone::new(rate, j, PI)], duration, 1e4, 0.0).unwrap()
        };
        let ft = rate * duration;
        let above = comparator_pulses(&cmp, &render(factor * half)).1;
        prop_assert!(above == ft.floor() as usize || above == ft.ceil() as usize, "{} edges for fT = {}", above, ft);
        prop_assert_eq!(comparator_pulses(&cmp, &render(half / factor)).1, 0);
    }

    #[test]
    fn carrier_at_multiple_of_rate_samples_flat(
        k in 1u32..=16,
        fs in 100.0..5e4f64,
        amplitude in 1e-3..1e3f64,
        phase in -PI..PI,
    ) {
        let carrier = k as f64 * fs;
        let w = Waveform::from_tones(vec![Tone::new(carrier, amplitude, phase)], 1e3 / fs, 2.5 * carrier, 0.0).unwrap();
        let sampled = sample_adc(&AdcSampler::uniform(fs).unwrap(), &w).unwrap();
        prop_assert!(sampled.std_dev() < 1e-6 * amplitude);
    }

    #[test]
    fn jittered_sampling_is_reproducible(seed in any::<u64>(), span in 1e-6..1e-3f64) {
        let w = Waveform::from_tones(vec![Tone::new(1e4, 1.0, 0.0)], 0.05, 2.5e4, 0.0).unwrap();
        let adc = AdcSampler::new(1000.0, Jitter::UniformRandom { span }, seed).unwrap();
        let a = sample_adc(&adc, &w).unwrap();
        let b = sample_adc(&adc, &w).unwrap();
        prop_assert_eq!(a.samples(), b.samples());
    }

    #[test]
    fn sense_voltage_rejects_dm_and_tracks_cm(
        ig in complex(),
        is in complex(),
        w in omega(),
        m in 1e-6..1e-1f64,
    ) {
        let det = CmChokeDetector::new(m, 50.0, 1e-5).unwrap();
        let dm = detect_cm(&det, ig, -ig, w).unwrap();
        prop_assert_eq!(dm.sense_voltage, Complex64::new(0.0, 0.0));
        let cm = detect_cm(&det, ig, is, w).unwrap();
        let expected = w * m * (ig + is).norm();
        prop_assert!((cm.sense_voltage_magnitude - expected).abs() <= 1e-12 * expected.max(f64::MIN_POSITIVE));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn linear_chain_deviation_scales_with_source(
        hz in 1e3..4e5f64,
        vs in 1.0..300.0f64,
        alpha in 0.01..100.0f64,
    ) {
        let p = VictimPipeline {
            amp: AmpStage::Cmrr(CmrrAmp::new(1e-3, 1e-5, 1e6, 10.0).unwrap()),
            filter: Some(LowpassStage { cutoff: 4.5e5, remove_dc: false }),
            ..VictimPipeline::reference()
        };
        let base = run_endtoend(&p, &Attack::tone(hz, vs), 1e-3).unwrap().deviation;
        let scaled = run_endtoend(&p, &Attack::tone(hz, alpha * vs), 1e-3).unwrap().deviation;
        prop_assert!((scaled - alpha * base).abs() <= 1e-9 * alpha * base);
    }

    #[test]
    fn corruption_needs_an_imperfection(hz in 1e3..4e5f64) {
        let ideal = VictimPipeline {
            conversion: ConversionNetwork::reference().fully_symmetrized(),
            ..VictimPipeline::reference()
        };
        let attack = Attack::tone(hz, 300.0);
        prop_assert_eq!(run_endtoend(&ideal, &attack, 1e-3).unwrap().output_metric, 0.0);

        let asymmetric = VictimPipeline::reference();
        prop_assert!(run_endtoend(&asymmetric, &attack, 1e-3).unwrap().output_metric > 0.0);

        let finite_cmrr = VictimPipeline {
            amp: AmpStage::Cmrr(CmrrAmp::new(1e-3, 1e-5, 1e6, 1.0).unwrap()),
            ..ideal
        };
        prop_assert!(run_endtoend(&finite_cmrr, &attack, 1e-3).unwrap().output_metric > 0.0);
    }
}
