use proptest::prelude::*;
use riesz_core::geometry::{LinearMap, MatrixFamily};
use riesz_core::quadrature::QuadratureScheme;
use riesz_core::weights::*;
use riesz_core::{Ball, Point};

fn family_for(w: &WeightSpec) -> BallFamily {
    BallFamily::generate(&BallFamilySpec::default(), w.dim, &w.singular_centers()).unwrap()
}

fn q() -> QuadratureScheme {
    QuadratureScheme::for_weights()
}

/// `∫_u^v |x|^b dx` in closed form.
fn power_integral(u: f64, v: f64, b: f64) -> f64 {
    let f = |t: f64| t.signum() * t.abs().powf(b + 1.0) / (b + 1.0);
    f(v) - f(u)
}

fn power_mean(u: f64, v: f64, b: f64, s: f64) -> f64 {
    (power_integral(u, v, b * s) / (v - u)).powf(1.0 / s)
}

/// Closed-form A_p constant of |x|^a on [c - r, c + r].
fn oracle_ap(a: f64, p: f64, ball: &Ball) -> f64 {
    let (u, v) = (ball.center.get(0) - ball.radius, ball.center.get(0) + ball.radius);
    power_mean(u, v, a, 1.0) / power_mean(u, v, a, -1.0 / (p - 1.0))
}

#[test]
fn constant_weight_has_unit_constants() {
    let w = WeightSpec::constant(1);
    let f = family_for(&w);
    for class in [
        WeightClass::A1,
        WeightClass::Ap { p: 2.0 },
        WeightClass::Apq { p: 2.0, q: 4.0 },
        WeightClass::Rh { s: 3.0 },
    ] {
        let r = estimate_class(&w, class, &f, &q()).unwrap();
        assert!((r.constant - 1.0).abs() < 1e-12, "{class:?}: {}", r.constant);
        assert_eq!(r.verdict, Verdict::Finite);
    }
}

#[test]
fn a1_anchors() {
    let w = WeightSpec::power_law(1, -1.0 / 3.0).unwrap();
    let f = family_for(&w);
    let r = estimate_a1_constant(&w, &f, &q()).unwrap();
    assert_eq!(r.verdict, Verdict::Finite);
    // Oracle: avg/min in closed form, the minimum of |x|^{-1/3} sitting at the far endpoint.
    let a1 = |b: &Ball| {
        let (u, v) = (b.center.get(0) - b.radius, b.center.get(0) + b.radius);
        power_mean(u, v, -1.0 / 3.0, 1.0) / u.abs().max(v.abs()).powf(-1.0 / 3.0)
    };
    let oracle = f.balls().iter().map(a1).fold(0.0, f64::max);
    assert!((r.series[0] - oracle).abs() < 1e-3 * oracle, "{} vs {oracle}", r.series[0]);
    // over 10^3 dyadic balls with off-center shifts the sup stays bounded
    let mut wide: f64 = 0.0;
    for k in -20..20 {
        for j in -12i32..13 {
            let r = 2f64.powi(k);
            wide = wide.max(a1(&Ball::new(Point::scalar(j as f64 * r / 8.0), r).unwrap()));
        }
    }
    assert!(wide.is_finite() && wide < 2.0 && r.constant <= wide * (1.0 + 1e-3));

    let sqrt = WeightSpec::power_law(1, 0.5).unwrap();
    assert_eq!(estimate_a1_constant(&sqrt, &family_for(&sqrt), &q()).unwrap().verdict, Verdict::Diverging);

    let log = WeightSpec::log_example(1).unwrap();
    let rl = estimate_a1_constant(&log, &family_for(&log), &q()).unwrap();
    assert_eq!(rl.verdict, Verdict::Finite);
    assert!(rl.constant >= 1.0 && rl.constant < 10.0, "{}", rl.constant);
}

#[test]
fn ap_matches_closed_form_on_every_ball() {
    for (a, p) in [(0.5, 2.0), (-0.5, 1.5), (0.9, 3.0)] {
        let w = WeightSpec::power_law(1, a).unwrap();
        let f = family_for(&w);
        let r = estimate_ap_constant(&w, p, &f, &q()).unwrap();
        assert_eq!(r.verdict, Verdict::Finite, "a = {a}, p = {p}");
        let oracle = f.balls().iter().map(|b| oracle_ap(a, p, b)).fold(0.0, f64::max);
        assert!((r.series[0] - oracle).abs() < 1e-3 * oracle, "a = {a}, p = {p}: {} vs {oracle}", r.series[0]);
    }
    let w = WeightSpec::power_law(1, 1.2).unwrap();
    assert_eq!(estimate_ap_constant(&w, 2.0, &family_for(&w), &q()).unwrap().verdict, Verdict::Diverging);
}

#[test]
fn power_weight_classifier_matches_characterisation() {
    let n = 1.0;
    for a in [-0.8, -1.0 / 3.0, 0.0, 0.25, 0.5, 0.9] {
        for p in [1.25, 1.5, 2.0, 3.0] {
            let upper: f64 = n * (p - 1.0);
            if (a - upper).abs() < 0.2 || (a + n).abs() < 0.2 {
                continue;
            }
            let w = WeightSpec::power_law(1, a).unwrap();
            let r = estimate_ap_constant(&w, p, &family_for(&w), &q()).unwrap();
            let expected = -n < a && a < upper;
            assert_eq!(r.is_finite(), expected, "a = {a}, p = {p}, constant {}", r.constant);
        }
    }
}

#[test]
fn apq_anchors() {
    // A_1 weight: w^{1/q} is in A_{p,q}
    let w = WeightSpec::power_law(1, -1.0 / 3.0).unwrap();
    let root = w.powered(0.25);
    let r = estimate_apq_constant(&root, 2.0, 4.0, &family_for(&root), &q()).unwrap();
    assert_eq!(r.verdict, Verdict::Finite);

    // p = q = 2: A_{2,2} of w agrees with A_2 of w^2
    let w = WeightSpec::power_law(1, 0.25).unwrap();
    let f = family_for(&w);
    let apq = estimate_apq_constant(&w, 2.0, 2.0, &f, &q()).unwrap();
    let ap = estimate_ap_constant(&w.powered(2.0), 2.0, &f, &q()).unwrap();
    assert_eq!(apq.verdict, Verdict::Finite);
    assert_eq!(ap.verdict, Verdict::Finite);
    assert!((apq.constant.powi(2) - ap.constant).abs() < 1e-6 * ap.constant);
}

#[test]
fn rh_anchors() {
    let w = WeightSpec::power_law(1, -0.125).unwrap();
    let f = family_for(&w);
    let r4 = estimate_rh_constant(&w, 4.0, &f, &q()).unwrap();
    assert_eq!(r4.verdict, Verdict::Finite);
    // closed form on balls centered at the singularity: (7/8) (1 - s/8)^{-1/s}
    let centered = 0.875 * 0.5f64.powf(-0.25);
    assert!(r4.constant >= centered * (1.0 - 1e-6), "{} vs {centered}", r4.constant);
    let r16 = estimate_rh_constant(&w, 16.0, &f, &q()).unwrap();
    assert_eq!(r16.verdict, Verdict::Diverging);
}

#[test]
fn critical_indices_of_power_weights() {
    let opts = CriticalIndexOptions::default();
    for (a, q_expected) in [(-1.0 / 3.0, 1.0), (0.0, 1.0), (0.5, 1.5)] {
        let w = WeightSpec::power_law(1, a).unwrap();
        let ci = critical_indices(&w, &family_for(&w), &q(), &opts).unwrap();
        assert!(ci.q_tilde.width() <= opts.tol + 1e-12);
        assert!(
            ci.q_tilde.lo - 1e-12 <= q_expected && q_expected <= ci.q_tilde.hi + 1e-12,
            "a = {a}: {:?}",
            ci.q_tilde
        );
    }
    let one = WeightSpec::constant(1);
    let ci = critical_indices(&one, &family_for(&one), &q(), &opts).unwrap();
    assert_eq!(ci.q_tilde, Bracket { lo: 1.0, hi: 1.0 });
    assert!(ci.r_w.hi.is_infinite());
    assert_eq!(ci.r_w_conjugate(), 1.0);

    let w = WeightSpec::power_law(1, -0.125).unwrap();
    let ci = critical_indices(&w, &family_for(&w), &q(), &opts).unwrap();
    assert!(ci.r_w.lo <= 8.0 && 8.0 <= ci.r_w.hi, "{:?}", ci.r_w);
    assert!(ci.r_w.width() <= opts.tol);
}

#[test]
fn matrix_compatibility_anchors() {
    let sample: Vec<Point> = (1..40).map(|i| Point::scalar(-2.0 + 0.1 * i as f64 + 0.013)).collect();
    let reflect = MatrixFamily::scalars(&[1.0, -1.0]).unwrap();
    let one = WeightSpec::constant(1);
    assert_eq!(check_matrix_compatibility(&one, &reflect, &sample).unwrap(), 1.0);
    let sqrt = WeightSpec::power_law(1, 0.5).unwrap();
    assert!((check_matrix_compatibility(&sqrt, &reflect, &sample).unwrap() - 1.0).abs() < 1e-14);

    let rot = MatrixFamily::new(2, vec![LinearMap::from_row_major(2, &[0.6, -0.8, 0.8, 0.6]).unwrap()]).unwrap();
    let w2 = WeightSpec::power_law(2, -0.7).unwrap();
    let pts: Vec<Point> = (1..20).map(|i| Point::planar(0.1 * i as f64, 1.0 - 0.07 * i as f64)).collect();
    assert!((check_matrix_compatibility(&w2, &rot, &pts).unwrap() - 1.0).abs() < 1e-12);
    assert!(check_matrix_compatibility(&sqrt, &reflect, &[Point::scalar(0.0)]).is_err());
}

#[test]
fn doubling_anchors() {
    let one = WeightSpec::constant(1);
    let d = doubling_check(&one, 1.0, 2.0, &family_for(&one), &q()).unwrap();
    assert!((d.worst_ratio - 2.0).abs() < 1e-12 && d.pass);

    let sqrt = WeightSpec::power_law(1, 0.5).unwrap();
    let unit = Ball::new(Point::scalar(0.0), 1.0).unwrap();
    let ratio = sqrt.measure(1.0, &unit.dilate(2.0), &q()).unwrap() / sqrt.measure(1.0, &unit, &q()).unwrap();
    assert!((ratio - 2f64.powf(1.5)).abs() < 1e-8);
    let d = doubling_check(&sqrt, 2.0, 2.0, &family_for(&sqrt), &q()).unwrap();
    assert!(d.pass && d.worst_ratio >= 2f64.powf(1.5) - 1e-8);

    let log = WeightSpec::log_example(1).unwrap();
    assert!(doubling_check(&log, 1.0, 3.0, &family_for(&log), &q()).unwrap().pass);
}

#[test]
fn ap_constants_decrease_in_p_and_rh_increase_in_s() {
    let w = WeightSpec::power_law(1, 0.3).unwrap();
    let f = family_for(&w);
    let mut last = f64::INFINITY;
    for p in [1.5, 2.0, 3.0, 5.0] {
        let c = estimate_ap_constant(&w, p, &f, &q()).unwrap().constant;
        assert!(c <= last * (1.0 + 1e-9) && c >= 1.0 - 1e-12);
        last = c;
    }
    let w = WeightSpec::power_law(1, -0.2).unwrap();
    let mut last = 0.0;
    for s in [1.5, 2.0, 3.0, 4.0] {
        let c = estimate_rh_constant(&w, s, &f, &q()).unwrap().constant;
        assert!(c >= last * (1.0 - 1e-9) && c >= 1.0 - 1e-12);
        last = c;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn constants_are_scale_invariant(a in -0.3f64..0.3, c in 0.01f64..100.0) {
        let w = WeightSpec::power_law(1, a).unwrap();
        let f = BallFamily::generate(&BallFamilySpec { k_min: -3, k_max: 1, ..Default::default() }, 1, &w.singular_centers()).unwrap();
        for class in [WeightClass::Ap { p: 2.5 }, WeightClass::Rh { s: 1.5 }, WeightClass::Apq { p: 2.0, q: 3.0 }] {
            let base = estimate_class(&w, class, &f, &q()).unwrap().constant;
            let scaled = estimate_class(&w.rescaled(c), class, &f, &q()).unwrap().constant;
            prop_assert!((base - scaled).abs() <= 1e-10 * base, "{:?}: {} vs {}", class, base, scaled);
            prop_assert!(base >= 1.0 - 1e-12);
        }
    }
}

#[test]
fn reverse_holder_survives_large_exponents() {
    // positive powers and the log weight stay in RH_s up to the cap
    for w in [WeightSpec::power_law(1, 0.5).unwrap(), WeightSpec::log_example(1).unwrap()] {
        let f = family_for(&w);
        for s in [190.0, 512.0] {
            let r = estimate_rh_constant(&w, s, &f, &q()).unwrap();
            assert!(r.is_finite(), "{:?} s={s}: {:?}", w.kind, r.series);
        }
        let c = critical_indices(&w, &f, &q(), &CriticalIndexOptions::default()).unwrap();
        assert!(c.r_w.hi.is_infinite());
        assert_eq!(c.r_w_conjugate(), 1.0);
    }
}
