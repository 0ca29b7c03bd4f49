//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use riesz_core::atoms::{admissible_params, atoms_on_ball, validate_atom, write_atoms_jsonl, Atom};
use riesz_core::geometry::MatrixFamily;
use riesz_core::operators::{apply_t, fractional_maximal, hl_maximal, ExponentProfile, MaximalPolicy, SampledFunction};
use riesz_core::quadrature::QuadratureScheme;
use riesz_core::verify::*;
use riesz_core::weights::{critical_indices, estimate_class, BallFamily, BallFamilySpec, CriticalIndexOptions, WeightClass, WeightSpec};
use riesz_core::{Ball, Point};
use serde_json::{json, Value};

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn fam(w: &WeightSpec) -> BallFamily {
    BallFamily::generate(&BallFamilySpec::default(), w.dim, &w.singular_centers()).unwrap()
}

fn qw() -> QuadratureScheme {
    QuadratureScheme::for_weights()
}

fn pm() -> MatrixFamily {
    MatrixFamily::scalars(&[1.0, -1.0]).unwrap()
}

fn ball(c: &[f64], r: f64) -> Ball {
    Ball::new(Point::new(c).unwrap(), r).unwrap()
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let v = f();
    (v, t.elapsed())
}

fn operator_anchors() -> Outcome {
    let mut notes = Vec::new();
    let cases: [(&str, SampledFunction, ExponentProfile, MatrixFamily, Point, f64); 3] = [
        (
            "riesz n=1",
            SampledFunction::indicator(ball(&[0.0], 1.0)),
            ExponentProfile::riesz(1, 0.5).unwrap(),
            MatrixFamily::identity(1),
            Point::scalar(0.0),
            4.0,
        ),
        (
            "T_{0,2}",
            SampledFunction::indicator(ball(&[1.5], 0.5)),
            ExponentProfile::equal_split(1, 0.0, 2).unwrap(),
            pm(),
            Point::scalar(0.0),
            2f64.ln(),
        ),
        (
            "riesz n=2",
            SampledFunction::indicator(ball(&[0.0, 0.0], 1.0)),
            ExponentProfile::riesz(2, 1.0).unwrap(),
            MatrixFamily::identity(2),
            Point::planar(0.0, 0.0),
            2.0 * std::f64::consts::PI,
        ),
    ];
    for (name, f, prof, family, x, exact) in cases {
        let q = QuadratureScheme::for_operators(f.dim());
        let (v, dt) = timed(|| apply_t(&f, &x, &prof, &family, &q));
        let v = v.map_err(|e| format!("{name}: {e}"))?;
        let rel = (v - exact).abs() / exact;
        ensure(rel < 1e-3, format!("{name}: {v} vs {exact}"))?;
        ensure(dt < Duration::from_secs(5), format!("{name}: {dt:?}"))?;
        notes.push(format!("{name} rel {rel:.1e} in {:.2}s", dt.as_secs_f64()));
    }
    Ok(notes.join(", "))
}

fn power_weight_classifier() -> Outcome {
    let t = Instant::now();
    let (mut checked, mut skipped) = (0, 0);
    for a in [-0.8, -1.0 / 3.0, 0.0, 0.25, 0.5, 0.9] {
        let w = WeightSpec::power_law(1, a).unwrap();
        let f = fam(&w);
        for p in [1.25, 1.5, 2.0, 3.0] {
            // A_p iff -n < a < n (p - 1)
            if (a + 1.0f64).abs() < 0.2 || (a - (p - 1.0f64)).abs() < 0.2 {
                skipped += 1;
                continue;
            }
            let expected = a > -1.0 && a < p - 1.0;
            let got = estimate_class(&w, WeightClass::Ap { p }, &f, &qw()).map_err(|e| e.to_string())?.is_finite();
            ensure(got == expected, format!("a={a} p={p}: finite={got}, expected {expected}"))?;
            checked += 1;
        }
    }
    let dt = t.elapsed();
    ensure(dt < Duration::from_secs(60), format!("took {dt:?}"))?;
    Ok(format!("{checked} cells match, {skipped} boundary cells skipped, {:.1}s", dt.as_secs_f64()))
}

fn critical_index_values() -> Outcome {
    let o = CriticalIndexOptions::default();
    let half = WeightSpec::power_law(1, 0.5).unwrap();
    let qt = critical_indices(&half, &fam(&half), &qw(), &o).map_err(|e| e.to_string())?.q_tilde.estimate();
    ensure((qt - 1.5).abs() <= 0.02, format!("q~ = {qt}"))?;
    let neg = WeightSpec::power_law(1, -0.125).unwrap();
    let rw = critical_indices(&neg, &fam(&neg), &qw(), &o).map_err(|e| e.to_string())?.r_w.estimate();
    ensure((rw - 8.0).abs() <= 0.2, format!("r_w = {rw}"))?;
    for (p, q) in [(0.75, 1.2), (0.5, 1.0)] {
        let rep = check_critical_index_lemmas(&neg, p, Some(q), &fam(&neg), &qw(), &o).map_err(|e| e.to_string())?;
        ensure(rep.passed(), format!("chains fail at p={p}, q={q}"))?;
    }
    Ok(format!("q~ = {qt:.4}, r_w = {rw:.4}, chains hold at (p, q) = (3/4, 6/5), (1/2, 1)"))
}

fn pointwise_bound() -> Outcome {
    let q = QuadratureScheme::for_operators(1);
    let pol = MaximalPolicy::default();
    let m1 = {
        let params = riesz_core::atoms::AtomParams {
            dim: 1,
            p: 1.0,
            p0: 2.0,
            d: 0,
            weight: WeightSpec::constant(1),
        };
        let spec = PointwiseSpec {
            shape: AtomShape::Sign,
            ..Default::default()
        };
        let prof = ExponentProfile::riesz(1, 0.5).unwrap();
        check_pointwise_atom_bound(&spec, &params, &prof, &MatrixFamily::identity(1), 0, &q, &qw(), &pol)
            .map_err(|e| e.to_string())?
    };
    let m2 = {
        let setup = TheoremSetup {
            theorem: Theorem::Ta,
            weight: WeightSpec::power_law(1, -0.125).unwrap(),
            profile: ExponentProfile::equal_split(1, 0.5, 2).unwrap(),
            family: pm(),
            p: 0.75,
            s: Some(0.75),
            p0: None,
            d: None,
        };
        let params = audit_hypotheses(&setup, &Numerics::for_dim(1)).map_err(|e| e.to_string())?.params;
        check_pointwise_atom_bound(&PointwiseSpec::default(), &params, &setup.profile, &pm(), 0, &q, &qw(), &pol)
            .map_err(|e| e.to_string())?
    };
    let mut notes = Vec::new();
    for (name, rep) in [("m=1", &m1), ("m=2", &m2)] {
        let drift = rep.series.iter().map(|s| s.drift).fold(0.0, f64::max);
        ensure(rep.passed(), format!("{name}: series {:?}", rep.series))?;
        let Details::Pointwise(d) = &rep.details else {
            return Err("unexpected details".into());
        };
        let [lo, hi] = d.form_ratio.ok_or("no form ratio")?;
        ensure(lo > 0.0 && hi.is_finite(), format!("{name}: form ratio [{lo}, {hi}]"))?;
        notes.push(format!("{name} C* = {:.3e}, max drift {drift:.2}, form ratio [{lo:.2}, {hi:.2}]", rep.worst));
    }
    Ok(notes.join("; "))
}

fn riesz_bin(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_riesz")).args(args).output().unwrap()
}

fn verify_config(cfg: &Value, dir: &Path) -> (std::process::Output, Duration) {
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    let out = dir.join("out");
    timed(|| riesz_bin(&["verify", "--config", path.to_str().unwrap(), "--out", out.to_str().unwrap()]))
}

fn theorem_campaigns() -> Outcome {
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut notes = Vec::new();
    for name in ["thm1-smoke", "ta-worked"] {
        let cfg: Value = serde_json::from_str(&std::fs::read_to_string(configs.join(format!("{name}.json"))).unwrap()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let (o, dt) = verify_config(&cfg, dir.path());
        ensure(o.status.code() == Some(0), format!("{name}: exit {:?}: {}", o.status.code(), String::from_utf8_lossy(&o.stderr)))?;
        ensure(dt < Duration::from_secs(600), format!("{name}: {dt:?}"))?;
        let rep: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/campaign.json")).unwrap()).unwrap();
        let splits = rep["details"]["splits"].as_array().ok_or("no splits")?;
        ensure(splits.len() == 50, format!("{name}: {} atoms", splits.len()))?;
        ensure(
            splits.iter().all(|s| s["inner"].is_number() && s["outer"].is_number()),
            format!("{name}: missing inner/outer split"),
        )?;
        let drift = rep["series"]
            .as_array()
            .unwrap()
            .iter()
            .map(|s| s["drift"].as_f64().unwrap_or(f64::INFINITY))
            .fold(0.0, f64::max);
        ensure(drift < 4.0, format!("{name}: drift {drift}"))?;
        notes.push(format!("{name} max norm {:.3} drift {drift:.2} in {:.0}s", rep["worst"].as_f64().unwrap_or(f64::NAN), dt.as_secs_f64()));

        let mut bad = cfg.clone();
        bad["checks"] = json!(["campaign"]);
        if name == "ta-worked" {
            bad["exponents"]["alpha"] = json!(0.9);
        } else {
            bad["matrices"] = json!({ "entries": [[1.0], [1.0]] });
        }
        let dir = tempfile::tempdir().unwrap();
        let (o, _) = verify_config(&bad, dir.path());
        ensure(o.status.code() == Some(3), format!("{name} violated: exit {:?}", o.status.code()))?;
    }
    notes.push("violations exit 3".into());
    Ok(notes.join("; "))
}

fn rh_ball() -> Outcome {
    let one = WeightSpec::constant(1);
    let rep = check_rh_ball_inequality(&one, 0.75, 0.5, &fam(&one), &qw()).map_err(|e| e.to_string())?;
    let Details::RhBall(d) = &rep.details else {
        return Err("unexpected details".into());
    };
    let exact = d.rows.iter().map(|r| r.slack.abs()).fold(0.0, f64::max);
    ensure(exact < 1e-8, format!("w = 1: |slack| up to {exact}"))?;
    let mut notes = vec![format!("w = 1: |slack| <= {exact:.1e}")];
    for (e, p) in [(-0.125, 0.75), (0.25, 1.0)] {
        let w = WeightSpec::power_law(1, e).unwrap();
        let rep = check_rh_ball_inequality(&w, p, 0.5, &fam(&w), &qw()).map_err(|e| e.to_string())?;
        let Details::RhBall(d) = &rep.details else {
            return Err("unexpected details".into());
        };
        ensure(rep.passed() && d.worst_slack > 0.0, format!("|x|^{e}, p={p}: worst slack {}", d.worst_slack))?;
        notes.push(format!("|x|^{e} p={p} q={:.2}: slack >= {:.2e}", d.q, d.worst_slack));
    }
    Ok(notes.join("; "))
}

fn atom_suite_bytes() -> Result<(Vec<u8>, usize), String> {
    let mut atoms: Vec<Atom> = Vec::new();
    for (e, p) in [(0.5, 1.0), (-0.125, 0.75)] {
        let w = WeightSpec::power_law(1, e).unwrap();
        let range = admissible_params(&w, p, &fam(&w), &qw(), &CriticalIndexOptions::default()).map_err(|e| e.to_string())?;
        let params = range.params(&w, None, None).map_err(|e| e.to_string())?;
        for r in [0.25, 1.0, 4.0] {
            for seed in 0..100u64 {
                let c = (seed % 9) as f64 * 0.5 - 2.0;
                let a = atoms_on_ball(&ball(&[c], r), &params, seed, &qw()).map_err(|e| format!("seed {seed}: {e}"))?;
                let v = validate_atom(&a, &qw()).map_err(|e| e.to_string())?;
                ensure(v.support_ok && v.norm_ok && v.moments_ok, format!("|x|^{e} r={r} seed {seed}: {v:?}"))?;
                atoms.push(a);
            }
        }
    }
    let mut buf = Vec::new();
    write_atoms_jsonl(&mut buf, &atoms).map_err(|e| e.to_string())?;
    Ok((buf, atoms.len()))
}

fn atom_suite() -> Outcome {
    let (a, n) = atom_suite_bytes()?;
    let (b, _) = atom_suite_bytes()?;
    ensure(a == b, "repeated runs differ")?;
    Ok(format!("{n} atoms pass (a1)/(a2)/(a3), reruns byte-identical"))
}

/// Brute force over intervals with endpoints on a 64-cell grid of [-4, 4].
fn lattice_oracle(x: f64, beta: f64) -> f64 {
    let cells = 64;
    let h = 8.0 / cells as f64;
    let pts: Vec<f64> = (0..=cells).map(|k| -4.0 + k as f64 * h).collect();
    let mut best = 0.0f64;
    for &a in &pts {
        for &b in &pts {
            if a <= x && x <= b && a < b {
                let mass = (b.min(1.0) - a.max(-1.0)).max(0.0);
                best = best.max(mass * (b - a).powf(beta - 1.0));
            }
        }
    }
    best
}

fn maximal_anchors() -> Outcome {
    let f = SampledFunction::indicator(ball(&[0.0], 1.0));
    let pol = MaximalPolicy::default().refined();
    let m = hl_maximal(&f, &Point::scalar(2.0), &pol).map_err(|e| e.to_string())?.value;
    ensure((m - 2.0 / 3.0).abs() < 1e-3, format!("M chi(2) = {m}"))?;
    let mf = fractional_maximal(&f, &Point::scalar(0.0), 0.5, &pol).map_err(|e| e.to_string())?.value;
    ensure((mf - 2f64.sqrt()).abs() < 1e-3, format!("M_1/2 chi(0) = {mf}"))?;
    let base = MaximalPolicy::default();
    let mut worst: f64 = 0.0;
    for x in [-3.0, 0.5, 2.0, 3.0] {
        for beta in [0.0, 0.5] {
            let got = if beta == 0.0 {
                hl_maximal(&f, &Point::scalar(x), &base)
            } else {
                fractional_maximal(&f, &Point::scalar(x), beta, &base)
            }
            .map_err(|e| e.to_string())?
            .value;
            let o = lattice_oracle(x, beta);
            worst = worst.max((got - o).abs() / o);
        }
    }
    ensure(worst < 1e-3, format!("oracle disagreement {worst}"))?;
    Ok(format!("M chi(2) = {m:.6}, M_1/2 chi(0) = {mf:.6}, lattice oracle rel diff {worst:.1e}"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("closed-form operator anchors", operator_anchors),
        ("power-weight classifier", power_weight_classifier),
        ("critical indices and chains", critical_index_values),
        ("pointwise atom bound", pointwise_bound),
        ("theorem campaigns", theorem_campaigns),
        ("reverse Hoelder ball inequality", rh_ball),
        ("atom suite", atom_suite),
        ("maximal-function anchors", maximal_anchors),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        match outcome {
            Ok(note) => println!("criterion {} PASS {name}: {note}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {} FAIL {name}: {why}", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} of {} criteria failed", criteria.len());
        std::process::exit(1);
    }
}
