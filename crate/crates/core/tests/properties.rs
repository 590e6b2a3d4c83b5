use std::collections::BTreeMap;

use num_complex::Complex64;
use proptest::prelude::*;

use hgspdc::entanglement::{csb_entanglement_witness, postselect, purity, reduce};
use hgspdc::gaussian_modes::{angular_spectrum, binomial, dhg_coefficient, factorial, hermite_poly};
use hgspdc::oracle::{coeff_quadrature_2d, coeff_quadrature_4d, overlap_quadrature, QuadratureSpec};
use hgspdc::spdc_coeffs::{
    build_state, coeff_exact, coeff_thin, cumulative_probabilities, exchange_symmetry_check,
};
use hgspdc::state_engineering::{apply, nonmax_pipeline, Arm, FirstOrderElement, FirstOrderState};
use hgspdc::{CoeffKey, CrystalConfig, Method, ModeIndex, PumpSpec, TwoPhotonAmplitudes};

fn table1() -> CrystalConfig {
    CrystalConfig::default()
}

fn key_up_to(max: u32) -> impl Strategy<Value = CoeffKey> {
    (0..=max, 0..=max, 0..=max, 0..=max).prop_map(|(j, k, u, t)| CoeffKey::new(j, k, u, t))
}

/// `Σ_k (-1)^k n! / (k! (n-2k)!) (2x)^{n-2k}` with the sum of term magnitudes.
fn hermite_explicit(n: u32, x: f64) -> (f64, f64) {
    (0..=n / 2).fold((0.0, 0.0), |(s, a), k| {
        let term = factorial(n).unwrap() / (factorial(k).unwrap() * factorial(n - 2 * k).unwrap())
            * (2.0 * x).powi((n - 2 * k) as i32);
        let signed = if k % 2 == 0 { term } else { -term };
        (s + signed, a + term.abs())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn factorization_identity(
        (j, k, u, t) in (0u32..=3, 0u32..=3, 0u32..=3, 0u32..=3),
        q in prop::array::uniform2(-3.0f64..3.0),
        p in prop::array::uniform2(-3.0f64..3.0),
        zr in -1.0f64..1.0,
    ) {
        let cfg = table1();
        let (pump, dc) = (cfg.pump_geometry(), cfg.down_converted_geometry());
        let w = pump.waist();
        let (q, p) = ([q[0] / w, q[1] / w], [p[0] / w, p[1] / w]);
        let z = zr * pump.rayleigh_range();
        let lhs = angular_spectrum(ModeIndex::new(j, k), &dc, 0.5 * (q[0] + p[0]), 0.5 * (q[1] + p[1]), z).unwrap().conj()
            * angular_spectrum(ModeIndex::new(u, t), &dc, 0.5 * (q[0] - p[0]), 0.5 * (q[1] - p[1]), z).unwrap().conj();
        let (nx, my) = (j + u, k + t);
        let mut rhs = Complex64::default();
        let mut scale = 0.0;
        for a in 0..=nx {
            for b in 0..=my {
                let term = 2.0 * dhg_coefficient(u, j, a).unwrap() * dhg_coefficient(t, k, b).unwrap()
                    * angular_spectrum(ModeIndex::new(nx - a, my - b), &pump, q[0], q[1], z).unwrap().conj()
                    * angular_spectrum(ModeIndex::new(a, b), &pump, p[0], p[1], z).unwrap().conj();
                rhs += term;
                scale += term.norm();
            }
        }
        prop_assert!((lhs - rhs).norm() <= 1e-8 * lhs.norm().max(scale), "{lhs} vs {rhs}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hermite_recurrence_matches_explicit_sum(n in 0u32..=20, x in -10.0f64..10.0) {
        let (explicit, magnitude) = hermite_explicit(n, x);
        let recur = hermite_poly(n, x).unwrap();
        prop_assert!((recur - explicit).abs() <= 1e-10 * magnitude.max(1.0));
    }

    #[test]
    fn dhg_rows_are_orthonormal(order in 0u32..=8, n in 0u32..=8, n2 in 0u32..=8) {
        let (n, n2) = (n.min(order), n2.min(order));
        let dot: f64 = (0..=order)
            .map(|k| dhg_coefficient(n, order - n, k).unwrap() * dhg_coefficient(n2, order - n2, k).unwrap())
            .sum();
        let expected = if n == n2 { 1.0 } else { 0.0 };
        prop_assert!((dot - expected).abs() < 1e-12);
    }

    #[test]
    fn dhg_coefficients_follow_the_generating_polynomial(n in 0u32..=6, m in 0u32..=6) {
        // (1-t)^n (1+t)^m = Σ_k c_k t^k with b(n,m,k) = c_k √(k!(N-k)!/(2^N n! m!)).
        let order = n + m;
        for k in 0..=order {
            let c: f64 = (0..=k.min(n))
                .filter(|&i| k - i <= m)
                .map(|i| binomial(n, i) * binomial(m, k - i) * if i % 2 == 0 { 1.0 } else { -1.0 })
                .sum();
            let scale = (factorial(k).unwrap() * factorial(order - k).unwrap()
                / (2f64.powi(order as i32) * factorial(n).unwrap() * factorial(m).unwrap()))
                .sqrt();
            prop_assert!((dhg_coefficient(n, m, k).unwrap() - c * scale).abs() < 1e-12);
        }
    }

    #[test]
    fn modes_are_orthonormal(a in (0u32..=4, 0u32..=4), b in (0u32..=4, 0u32..=4), waist_um in 20.0f64..500.0) {
        prop_assume!(a.0 + a.1 <= 4 && b.0 + b.1 <= 4);
        let geom = hgspdc::BeamGeometry::new(702e-9, waist_um * 1e-6).unwrap();
        let (ma, mb) = (ModeIndex::new(a.0, a.1), ModeIndex::new(b.0, b.1));
        let v = overlap_quadrature(ma, mb, &geom, &QuadratureSpec::default()).unwrap().value;
        let expected = if ma == mb { 1.0 } else { 0.0 };
        prop_assert!((v - expected).abs() < 1e-6);
    }

    #[test]
    fn forbidden_keys_are_exactly_zero(pump in (0u32..=3, 0u32..=3), key in key_up_to(4)) {
        let pump = ModeIndex::new(pump.0, pump.1);
        let (nx, my) = (key.j + key.u, key.k + key.t);
        let forbidden = nx < pump.n || my < pump.m || (nx + pump.n) % 2 == 1 || (my + pump.m) % 2 == 1;
        if forbidden {
            prop_assert_eq!(coeff_exact(&table1(), pump, key).unwrap(), 0.0);
            prop_assert_eq!(coeff_thin(&table1(), pump, key).unwrap(), 0.0);
        }
    }

    #[test]
    fn coefficients_are_exchange_symmetric(pump in (0u32..=3, 0u32..=3), key in key_up_to(4), w0_um in 10.0f64..1000.0) {
        let cfg = CrystalConfig::new(1e-3, 351e-9, w0_um * 1e-6).unwrap();
        let pump = ModeIndex::new(pump.0, pump.1);
        let a = coeff_exact(&cfg, pump, key).unwrap();
        let b = coeff_exact(&cfg, pump, key.swapped()).unwrap();
        prop_assert!((a - b).abs() <= 1e-12);
        let a = coeff_thin(&cfg, pump, key).unwrap();
        let b = coeff_thin(&cfg, pump, key.swapped()).unwrap();
        prop_assert!((a - b).abs() <= 1e-12);
    }

    #[test]
    fn cumulative_probability_is_monotone_and_bounded(
        w0_um in 10.0f64..1000.0,
        length_mm in 0.1f64..5.0,
        pump in (0u32..=2, 0u32..=2),
        order in 0u32..=16,
    ) {
        let cfg = CrystalConfig::new(length_mm * 1e-3, 351e-9, w0_um * 1e-6).unwrap();
        let state = build_state(&cfg, &PumpSpec::single(ModeIndex::new(pump.0, pump.1)), order, Method::Exact).unwrap();
        prop_assert!(exchange_symmetry_check(&state));
        let c = cumulative_probabilities(&state);
        prop_assert!(c.windows(2).all(|w| w[1] >= w[0]));
        prop_assert!(c.iter().all(|&p| p <= 1.0 + 1e-9));
    }
}

fn random_state(entries: Vec<(CoeffKey, (f64, f64))>) -> Option<TwoPhotonAmplitudes> {
    let amplitudes: BTreeMap<CoeffKey, Complex64> =
        entries.into_iter().map(|(k, (re, im))| (k, Complex64::new(re, im))).collect();
    let state = TwoPhotonAmplitudes::from_amplitudes(
        PumpSpec::single(ModeIndex::new(0, 0)),
        table1(),
        8,
        Method::Exact,
        amplitudes,
    )
    .ok()?;
    state.normalized().ok()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn purity_is_bounded_and_detects_rank_one(
        entries in prop::collection::vec((key_up_to(2), (-1.0f64..1.0, -1.0f64..1.0)), 1..12),
    ) {
        let Some(state) = random_state(entries) else { return Ok(()) };
        let rho = reduce(&state).unwrap();
        let p = purity(&rho);
        prop_assert!(p > 0.0 && p <= 1.0 + 1e-12);
        prop_assert!((rho.trace() - 1.0).abs() < 1e-10);
        let m = rho.matrix();
        for a in 0..rho.dim() {
            prop_assert!(m[(a, a)].re >= 0.0);
            for b in 0..rho.dim() {
                prop_assert!((m[(a, b)] - m[(b, a)].conj()).norm() < 1e-14);
            }
        }
        prop_assert_eq!(rho.is_rank_one(), (p - 1.0).abs() < 1e-10);
    }

    #[test]
    fn postselection_commutes_with_normalization(
        entries in prop::collection::vec((key_up_to(2), (-1.0f64..1.0, -1.0f64..1.0)), 2..12),
        scale in 0.01f64..100.0,
        max_order in 0u32..=4,
    ) {
        let Some(state) = random_state(entries) else { return Ok(()) };
        let keep = |k: &CoeffKey| k.order() <= max_order;
        let Ok(direct) = postselect(&state, keep) else { return Ok(()) };
        let mut scaled = state.clone();
        let amplitudes: BTreeMap<_, _> = scaled.amplitudes().iter().map(|(k, a)| (*k, a * scale)).collect();
        scaled = TwoPhotonAmplitudes::from_amplitudes(scaled.pump().clone(), *scaled.config(), 8, Method::Exact, amplitudes).unwrap();
        let other = postselect(&scaled, keep).unwrap();
        let (pa, pb) = (purity(&reduce(&direct).unwrap()), purity(&reduce(&other).unwrap()));
        prop_assert!((pa - pb).abs() < 1e-12);
    }

    #[test]
    fn single_mode_pumps_are_entangled(pump in (0u32..=2, 0u32..=2), extra in 0u32..=4) {
        let pump = ModeIndex::new(pump.0, pump.1);
        let order = pump.order().max(2) + extra;
        let state = build_state(&table1(), &PumpSpec::single(pump), order, Method::Exact).unwrap().normalized().unwrap();
        let rho = reduce(&state).unwrap();
        let verdict = csb_entanglement_witness(&rho);
        prop_assert!(verdict.entangled && verdict.witness.is_some());
        prop_assert!(verdict.purity < 1.0);
    }

    #[test]
    fn optics_stay_unitary(angles in prop::collection::vec((-7.0f64..7.0, 0u8..3, any::<bool>()), 0..8), theta in -3.2f64..3.2, phi in -3.2f64..3.2) {
        let mut state = FirstOrderState::nonmax(theta, phi);
        for (angle, kind, idler) in angles {
            let element = match kind {
                0 => FirstOrderElement::dove_prism(angle),
                1 => FirstOrderElement::mirror(),
                _ => FirstOrderElement::identity(),
            };
            prop_assert!(element.unitarity_defect() < 1e-12);
            state = apply(&state, &element, if idler { Arm::Idler } else { Arm::Signal });
        }
        prop_assert!((state.amplitudes().norm_squared() - 1.0).abs() < 1e-12);
        // Local optics cannot change the Schmidt weights.
        let [a, b] = state.schmidt_weights();
        let (c2, s2) = (theta.cos().powi(2), theta.sin().powi(2));
        prop_assert!((a - c2.max(s2)).abs() < 1e-10 && (b - c2.min(s2)).abs() < 1e-10);
    }

    #[test]
    fn nonmax_pipeline_matches_direct_form(theta in -3.2f64..3.2, phi in -3.2f64..3.2) {
        let s = nonmax_pipeline(theta, phi, &table1()).unwrap();
        let d = FirstOrderState::nonmax(theta, phi);
        prop_assert!((s.amplitudes() - d.amplitudes()).iter().all(|z| z.norm() < 1e-10));
    }
}

#[test]
fn quadrature_doubling_stays_within_error_bars() {
    let cfg = table1();
    let spec = QuadratureSpec::default();
    let doubled = QuadratureSpec { points_per_axis: 2 * spec.points_per_axis, ..spec.clone() };
    for pump in [ModeIndex::new(0, 0), ModeIndex::new(1, 1)] {
        for key in CoeffKey::up_to_order(4) {
            let a = coeff_quadrature_4d(&cfg, pump, key, &spec).unwrap();
            let b = coeff_quadrature_4d(&cfg, pump, key, &doubled).unwrap();
            assert!((a.value - b.value).abs() <= a.est_error, "{pump} {key}: {} vs {} (err {})", a.value, b.value, a.est_error);
        }
    }
}

#[test]
fn reduced_and_full_quadrature_agree() {
    let cfg = table1();
    let spec = QuadratureSpec::default();
    for pump in [ModeIndex::new(0, 0), ModeIndex::new(1, 1)] {
        for key in CoeffKey::up_to_order(4) {
            let four = coeff_quadrature_4d(&cfg, pump, key, &spec).unwrap();
            let two = coeff_quadrature_2d(&cfg, pump, key, &spec).unwrap();
            assert!(
                (four.value - two.value).abs() <= four.est_error + two.est_error + 1e-14,
                "{pump} {key}: {} vs {}",
                four.value,
                two.value
            );
        }
    }
}

#[test]
fn cartesian_and_hermite_schemes_agree() {
    let cfg = table1();
    let gh = QuadratureSpec::default();
    let box_rule = QuadratureSpec::cartesian();
    for key in [CoeffKey::new(0, 0, 0, 0), CoeffKey::new(1, 1, 1, 1), CoeffKey::new(0, 2, 0, 0)] {
        let pump = ModeIndex::new(0, 0);
        let a = coeff_quadrature_2d(&cfg, pump, key, &gh).unwrap();
        let b = coeff_quadrature_2d(&cfg, pump, key, &box_rule).unwrap();
        assert!((a.value - b.value).abs() <= 1e-6 * a.value.abs().max(1e-12), "{key}: {} vs {}", a.value, b.value);
    }
}
