use proptest::prelude::*;
use riesz_core::atoms::*;
use riesz_core::operators::Profile;
use riesz_core::polynomial::{monomials, Polynomial};
use riesz_core::quadrature::{CellRule, QuadratureScheme, SingularityPolicy};
use riesz_core::weights::{BallFamily, BallFamilySpec, CriticalIndexOptions, WeightSpec};
use riesz_core::{Ball, Point};

fn q() -> QuadratureScheme {
    QuadratureScheme::for_weights()
}

fn range(w: &WeightSpec, p: f64) -> AdmissibleRange {
    let fam = BallFamily::generate(&BallFamilySpec::default(), w.dim, &w.singular_centers()).unwrap();
    admissible_params(w, p, &fam, &q(), &CriticalIndexOptions::default()).unwrap()
}

fn params(w: WeightSpec, p: f64, p0: f64, d: usize) -> AtomParams {
    AtomParams {
        dim: w.dim,
        p,
        p0,
        d,
        weight: w,
    }
}

/// `(∫_B |a|^{p0})^{1/p0}` by a plain midpoint rule (1-D) or polar midpoint rule (2-D).
fn brute_norm(a: &Atom) -> f64 {
    let p0 = a.params.p0;
    let (c, r) = (a.ball.center, a.ball.radius);
    let s = match a.params.dim {
        1 => {
            let n = 400_000;
            let h = 2.0 * r / n as f64;
            (0..n)
                .map(|i| a.eval(&Point::scalar(c.get(0) - r + (i as f64 + 0.5) * h)).abs().powf(p0) * h)
                .sum::<f64>()
        }
        _ => {
            let (nr, nt) = (800, 1600);
            let mut s = 0.0;
            for i in 0..nr {
                let rho = r * (i as f64 + 0.5) / nr as f64;
                for j in 0..nt {
                    let th = 2.0 * std::f64::consts::PI * (j as f64 + 0.5) / nt as f64;
                    let y = Point::planar(c.get(0) + rho * th.cos(), c.get(1) + rho * th.sin());
                    s += a.eval(&y).abs().powf(p0) * rho;
                }
            }
            s * (r / nr as f64) * (2.0 * std::f64::consts::PI / nt as f64)
        }
    };
    s.powf(1.0 / p0)
}

#[test]
fn admissible_ranges() {
    let one = range(&WeightSpec::constant(1), 1.0);
    assert_eq!(one.d_min, 0);
    assert_eq!(one.p0_threshold, 1.0);
    assert!(one.indices.r_w.hi.is_infinite());

    let half = range(&WeightSpec::power_law(1, 0.5).unwrap(), 1.0);
    assert_eq!(half.d_min, 0);
    assert_eq!(half.p0_threshold, 1.0);
    assert!((half.indices.q_tilde.estimate() - 1.5).abs() < 2e-2);

    let neg = range(&WeightSpec::power_law(1, -0.125).unwrap(), 0.75);
    assert_eq!(neg.d_min, 0);
    assert_eq!(neg.p0_threshold, 1.0);
    assert!((neg.indices.r_w.estimate() - 8.0).abs() < 5e-2);

    // larger q̃ pushes the degree up: |x|^{1/2} with p = 1/2 gives ⌊3 - 1⌋ = 2
    let deg = range(&WeightSpec::power_law(1, 0.5).unwrap(), 0.5);
    assert_eq!(deg.d_min, 2);
    let w = WeightSpec::power_law(1, 0.5).unwrap();
    assert!(deg.params(&w, None, Some(1)).is_err());
    assert!(deg.params(&w, Some(1.0), None).is_err());
    assert_eq!(deg.params(&w, None, None).unwrap().d, 2);
}

#[test]
fn sign_atom_has_norm_equality() {
    let b = Ball::new(Point::scalar(0.0), 1.0).unwrap();
    let par = params(WeightSpec::constant(1), 1.0, 2.0, 0);
    let a = Atom::from_parts(b, Profile::Sign, 0.5, par.clone(), &q()).unwrap();
    assert!((a.lp0_norm().unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
    let v = validate_atom(&a, &q()).unwrap();
    assert!(v.pass, "{v:?}");
    assert!(v.norm_margin.abs() < 1e-8);

    let doubled = Atom::from_parts(b, Profile::Sign, 1.0, par.clone(), &q()).unwrap();
    let v = validate_atom(&doubled, &q()).unwrap();
    assert!(!v.norm_ok && !v.pass);
    assert!((v.norm_margin + 1.0).abs() < 1e-12);

    let flat = Atom::from_parts(b, Profile::Polynomial(Polynomial::constant(1, 0.25)), 1.0, par, &q()).unwrap();
    let v = validate_atom(&flat, &q()).unwrap();
    assert!(v.norm_ok && !v.moments_ok && !v.pass);
}

#[test]
fn constructed_atoms_meet_every_condition() {
    let fine = QuadratureScheme::new(256, CellRule::GaussLegendre(4), SingularityPolicy::AnalyticCell, 1e-8).unwrap();
    let b = Ball::new(Point::scalar(0.7), 0.5).unwrap();
    let par = params(WeightSpec::power_law(1, 0.5).unwrap(), 1.0, 3.0, 1);
    let a = construct_atom(&b, &par, 11, &q()).unwrap();
    let v = validate_atom(&a, &q()).unwrap();
    assert!(v.pass, "{v:?}");
    // independent checks: generic quadrature of moments, brute-force norm
    let norm = brute_norm(&a);
    assert!((norm - a.norm_ceiling()).abs() < 1e-6 * norm, "{norm} vs {}", a.norm_ceiling());
    for beta in monomials(1, 1) {
        let m = quadrature_moment(&a, beta, &fine).unwrap();
        assert!(m.abs() < 1e-10 * norm * b.radius.powf(beta[0] as f64 + 1.0 - 1.0 / 3.0), "{beta:?}: {m}");
    }
    // the next degree does not vanish
    let m2 = quadrature_moment(&a, [2, 0], &fine).unwrap();
    assert!(m2.abs() > 1e-6 * norm);
}

#[test]
fn planar_atoms_validate_with_polar_norm() {
    let b = Ball::new(Point::planar(0.5, -1.0), 0.25).unwrap();
    let w = WeightSpec::power_law(2, 0.5).unwrap();
    for p0 in [2.0, 2.5] {
        let a = construct_atom(&b, &params(w.clone(), 1.0, p0, 0), 5, &q()).unwrap();
        assert!(validate_atom(&a, &q()).unwrap().pass);
        let norm = brute_norm(&a);
        assert!((norm - a.norm_ceiling()).abs() < 1e-4 * norm, "{norm} vs {}", a.norm_ceiling());
    }
}

#[test]
fn hundred_seeds_across_weights_and_scales() {
    let weights = [
        WeightSpec::constant(1),
        WeightSpec::power_law(1, 0.5).unwrap(),
        WeightSpec::power_law(1, -0.125).unwrap(),
    ];
    let mut checked = 0;
    for seed in 0..100u64 {
        let w = weights[(seed % 3) as usize].clone();
        let r = [0.25, 1.0, 4.0][(seed / 3 % 3) as usize];
        let c = [-1.0, 0.0, 0.5, 2.0][(seed % 4) as usize];
        let d = (seed % 3) as usize;
        let p0 = [2.0, 1.5, 4.0][(seed / 2 % 3) as usize];
        let par = params(w, 1.0, p0, d);
        let a = construct_atom(&Ball::new(Point::scalar(c), r).unwrap(), &par, seed, &q()).unwrap();
        let v = validate_atom(&a, &q()).unwrap();
        assert!(v.pass, "seed {seed}: {v:?}");
        checked += 1;
    }
    assert_eq!(checked, 100);
}

#[test]
fn projection_is_idempotent() {
    for seed in 0..20 {
        let b = Ball::new(Point::scalar(0.0), 1.0).unwrap();
        let a = construct_atom(&b, &params(WeightSpec::constant(1), 1.0, 2.0, 2), seed, &q()).unwrap();
        let Profile::Polynomial(p) = &a.profile else { unreachable!() };
        let again = p.project_out_low_degree(2).unwrap();
        let scale = p.coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        for (x, y) in p.coeffs.iter().zip(&again.coeffs) {
            assert!((x - y).abs() < 1e-12 * scale);
        }
    }
}

#[test]
fn dilations_stay_valid_for_lebesgue_weight() {
    let b = Ball::new(Point::scalar(0.0), 1.0).unwrap();
    for p in [1.0, 0.5] {
        let par = params(WeightSpec::constant(1), p, 2.0, 1);
        let a = construct_atom(&b, &par, 3, &q()).unwrap();
        for lambda in [0.5, 2.0] {
            let v = validate_atom(&a.dilated(lambda, &q()).unwrap(), &q()).unwrap();
            assert!(v.pass, "{lambda}: {v:?}");
            assert!(v.norm_margin.abs() < 1e-8);
        }
    }
}

#[test]
fn campaigns_are_deterministic() {
    let par = params(WeightSpec::power_law(1, 0.5).unwrap(), 1.0, 2.0, 0);
    let sampler = BallSamplerSpec::default();
    let one = sample_atom_campaign(&par, &sampler, 1, 42, &q()).unwrap();
    let ball = sampler.draw(1, 1, 42).unwrap()[0];
    let direct = construct_atom(&ball, &par, atom_seed(42, 0), &q()).unwrap();
    assert_eq!(one[0], direct);

    let a = sample_atom_campaign(&par, &sampler, 100, 7, &q()).unwrap();
    let b = sample_atom_campaign(&par, &sampler, 100, 7, &q()).unwrap();
    assert_eq!(a, b);
    for atom in &a {
        assert!(validate_atom(atom, &q()).unwrap().pass);
    }
    let radii: std::collections::BTreeSet<i64> = a.iter().map(|x| x.ball.radius.log2().round() as i64).collect();
    assert!(radii.len() >= 3);

    let mut buf = Vec::new();
    write_atoms_jsonl(&mut buf, &a).unwrap();
    assert_eq!(String::from_utf8(buf.clone()).unwrap().lines().count(), 100);
    assert_eq!(read_atoms_jsonl(&buf[..]).unwrap(), a);
    assert!(sample_atom_campaign(&par, &sampler, 0, 7, &q()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]
    #[test]
    fn random_balls_and_params_give_valid_atoms(
        seed in any::<u64>(),
        c in -3.0f64..3.0,
        k in -3i32..4,
        d in 0usize..3,
        p0 in 1.2f64..5.0,
        a in -0.4f64..1.5,
    ) {
        let par = params(WeightSpec::power_law(1, a).unwrap(), 1.0, p0, d);
        let atom = construct_atom(&Ball::new(Point::scalar(c), 2f64.powi(k)).unwrap(), &par, seed, &q()).unwrap();
        let v = validate_atom(&atom, &q()).unwrap();
        prop_assert!(v.pass, "{:?}", v);
        prop_assert_eq!(monomials(1, d + 2).len(), match &atom.profile {
            Profile::Polynomial(p) => p.coeffs.len(),
            _ => 0,
        });
    }
}
