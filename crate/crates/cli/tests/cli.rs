use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use riesz_cli::config::{config_hash, parse_config, Resolved};
use serde_json::{json, Value};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn riesz(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_riesz")).args(args).output().unwrap()
}

fn bundled(name: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(configs().join(format!("{name}.json"))).unwrap()).unwrap()
}

/// Writes `cfg` into `dir` and runs `cmd` on it with `--out dir/out`.
fn run_with(dir: &Path, cmd: &[&str], cfg: &Value, extra: &[&str]) -> (Output, PathBuf) {
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    let out = dir.join("out");
    let mut args: Vec<&str> = cmd.to_vec();
    let (p, o) = (path.to_str().unwrap().to_owned(), out.to_str().unwrap().to_owned());
    args.extend(["--config", &p, "--out", &o]);
    args.extend(extra);
    (riesz(&args), out)
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn base(weight: Value) -> Value {
    json!({
        "schema": 1,
        "dimension": 1,
        "weight": weight,
        "exponents": { "alpha": 0.5 },
    })
}

#[test]
fn bundled_configs_validate() {
    for name in ["thm1-smoke", "ta-worked"] {
        let text = std::fs::read_to_string(configs().join(format!("{name}.json"))).unwrap();
        let cfg = parse_config(&text).unwrap();
        let r = Resolved::new(cfg, configs()).unwrap();
        assert_eq!(r.config.campaign.atoms, 50);
        assert!(r.theorem_setup().is_ok());
    }
    let text = std::fs::read_to_string(configs().join("ta-worked.json")).unwrap();
    let r = Resolved::new(parse_config(&text).unwrap(), configs()).unwrap();
    // derived, never configured
    assert!((r.q().unwrap() - 1.2).abs() < 1e-12);
}

#[test]
fn config_errors_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = bundled("ta-worked");
    cfg["atoms"]["q"] = json!(1.5);
    let (o, out) = run_with(dir.path(), &["verify"], &cfg, &[]);
    assert_eq!(o.status.code(), Some(4));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("atoms") && err.contains("\"exit_code\":4"), "{err}");
    assert!(!out.exists());

    let mut cfg = bundled("ta-worked");
    cfg["schema"] = json!(2);
    assert_eq!(run_with(dir.path(), &["verify"], &cfg, &[]).0.status.code(), Some(4));

    let mut cfg = bundled("ta-worked");
    cfg["exponents"]["split"] = json!([0.25, 0.5]);
    let (o, _) = run_with(dir.path(), &["verify"], &cfg, &[]);
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("exponents"));

    assert_eq!(riesz(&["verify", "--config", "/nonexistent.json"]).status.code(), Some(4));
    assert_eq!(riesz(&["frobnicate"]).status.code(), Some(4));
}

#[test]
fn seed_override_changes_the_hash() {
    let text = std::fs::read_to_string(configs().join("thm1-smoke.json")).unwrap();
    let mut cfg = parse_config(&text).unwrap();
    let h0 = config_hash(&cfg).unwrap();
    // whitespace does not matter
    let compact = serde_json::to_string(&serde_json::from_str::<Value>(&text).unwrap()).unwrap();
    assert_eq!(config_hash(&parse_config(&compact).unwrap()).unwrap(), h0);
    cfg.seed = 9;
    assert_ne!(config_hash(&cfg).unwrap(), h0);
}

#[test]
fn classify_reports() {
    let dir = tempfile::tempdir().unwrap();
    let (o, out) = run_with(dir.path(), &["weights", "classify"], &base(json!({"kind": "power", "exponent": 0.5})), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rep = read_json(&out.join("weights_classify.json"));
    let qt = &rep["indices"]["q_tilde"];
    let est = 0.5 * (qt["lo"].as_f64().unwrap() + qt["hi"].as_f64().unwrap());
    assert!((est - 1.5).abs() < 0.02, "{qt}");
    assert_eq!(rep["classes"][0]["verdict"], "diverging");
    assert_eq!(rep["classes"][1]["verdict"], "finite");
    let manifest = read_json(&out.join("manifest.json"));
    assert!(manifest["timestamp_unix"].as_u64().unwrap() > 0);

    let (o, out) = run_with(dir.path(), &["weights", "classify"], &base(json!({"kind": "constant"})), &[]);
    assert_eq!(o.status.code(), Some(0));
    let rep = read_json(&out.join("weights_classify.json"));
    for c in rep["classes"].as_array().unwrap() {
        assert!((c["constant"].as_f64().unwrap() - 1.0).abs() < 1e-9, "{c}");
    }

    let mut cfg = base(json!({"kind": "log_example"}));
    cfg["classify"] = json!({ "classes": [{ "class": "a1" }], "indices": false });
    let (o, out) = run_with(dir.path(), &["weights", "classify"], &cfg, &[]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(read_json(&out.join("weights_classify.json"))["classes"][0]["verdict"], "finite");
}

fn sweep_value_at_zero(csv: &Path) -> f64 {
    let text = std::fs::read_to_string(csv).unwrap();
    let row = text
        .lines()
        .skip(1)
        .find(|l| l.split(',').next().unwrap().parse::<f64>().unwrap() == 0.0)
        .unwrap();
    row.split(',').last().unwrap().parse().unwrap()
}

#[test]
fn operator_sweeps() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = base(json!({"kind": "constant"}));
    cfg["sweep"] = json!({
        "function": { "support": { "center": [0.0], "radius": 1.0 }, "profile": { "kind": "indicator" } },
        "lo": [-2.0], "hi": [2.0], "nodes": [5]
    });
    let (o, out) = run_with(dir.path(), &["operator", "sweep"], &cfg, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = sweep_value_at_zero(&out.join("sweep.csv"));
    assert!((v - 4.0).abs() < 4e-3, "{v}");

    // T_{0,2} with A = (1, -1): at x = 0 the kernel is 1/|y|
    cfg["exponents"] = json!({ "alpha": 0.0 });
    cfg["matrices"] = json!({ "entries": [[1.0], [-1.0]] });
    cfg["sweep"]["function"] = json!({ "support": { "center": [1.5], "radius": 0.5 }, "profile": { "kind": "indicator" } });
    let (o, out) = run_with(dir.path(), &["operator", "sweep"], &cfg, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = sweep_value_at_zero(&out.join("sweep.csv"));
    assert!((v - 2f64.ln()).abs() < 1e-3 * 2f64.ln(), "{v}");

    // nothing selected: nothing written
    let empty = tempfile::tempdir().unwrap();
    cfg["sweep"]["nodes"] = json!([0]);
    let (o, out) = run_with(empty.path(), &["operator", "sweep"], &cfg, &[]);
    assert_eq!(o.status.code(), Some(0));
    assert!(!out.exists() && o.stdout.is_empty());
    cfg.as_object_mut().unwrap().remove("sweep");
    let (o, out) = run_with(empty.path(), &["operator", "sweep"], &cfg, &[]);
    assert_eq!(o.status.code(), Some(0));
    assert!(!out.exists());
}

#[test]
fn atoms_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = base(json!({"kind": "power", "exponent": 0.5}));
    cfg["atoms"] = json!({ "p": 1.0, "p0": 2.0 });
    cfg["generate"] = json!({ "count": 12 });
    let (o, out) = run_with(dir.path(), &["atoms", "gen"], &cfg, &["--seed", "5", "--jobs", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let first = std::fs::read(out.join("atoms.jsonl")).unwrap();
    assert_eq!(String::from_utf8_lossy(&first).lines().count(), 12);
    let (o, out) = run_with(dir.path(), &["atoms", "validate"], &cfg, &[]);
    assert_eq!(o.status.code(), Some(0));
    let rep = read_json(&out.join("atoms_validate.json"));
    assert_eq!(rep["failures"], 0);
    assert_eq!(rep["atoms"], 12);
    // same seed, same bytes
    let (_, out) = run_with(dir.path(), &["atoms", "gen"], &cfg, &["--seed", "5"]);
    assert_eq!(std::fs::read(out.join("atoms.jsonl")).unwrap(), first);
}

/// A trimmed ta-worked run: reports are reproducible and carry provenance.
#[test]
fn verify_is_deterministic() {
    let mut cfg = bundled("ta-worked");
    cfg["campaign"]["atoms"] = json!(6);
    cfg["checks"] = json!(["containment", "rh_ball", "campaign"]);
    let runs: Vec<PathBuf> = (0..2)
        .map(|_| {
            let dir = tempfile::tempdir().unwrap().keep();
            let (o, out) = run_with(&dir, &["verify"], &cfg, &[]);
            assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
            out
        })
        .collect();
    for f in ["containment.json", "rh_ball.json", "rh_ball_witnesses.csv", "campaign.json", "summary.json"] {
        assert_eq!(std::fs::read(runs[0].join(f)).unwrap(), std::fs::read(runs[1].join(f)).unwrap(), "{f}");
    }
    let rep = read_json(&runs[0].join("campaign.json"));
    assert_eq!(rep["provenance"]["seed"], 0);
    assert_eq!(rep["provenance"]["config_hash"].as_str().unwrap().len(), 64);
    assert!(rep["details"]["splits"][0]["outer"].as_f64().unwrap() > 0.0);
    for r in runs {
        std::fs::remove_dir_all(r.parent().unwrap()).unwrap();
    }
}

#[test]
fn verify_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    // α = 0.9 puts n / α = 10/9 below r_w / (r_w - 1) = 8/7; for this weight the
    // A_1 hypothesis on w^{n/((n-α)s)} already fails first
    let mut cfg = bundled("ta-worked");
    cfg["exponents"]["alpha"] = json!(0.9);
    cfg["atoms"] = json!({ "p": 0.95, "s": 0.9 });
    cfg["checks"] = json!(["campaign"]);
    let (o, out) = run_with(dir.path(), &["verify"], &cfg, &[]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    let s = read_json(&out.join("summary.json"));
    assert_eq!(s["checks"][0]["status"], "hypothesis_failed");
    assert!(s["checks"][0]["message"].as_str().unwrap().contains("A_1"));

    // a failing check without a hypothesis failure exits 2: |x|^{1.9} is not in A_2
    let mut cfg = base(json!({"kind": "power", "exponent": 1.9}));
    cfg["checks"] = json!(["maximal"]);
    let (o, out) = run_with(dir.path(), &["verify"], &cfg, &[]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(read_json(&out.join("summary.json"))["checks"][0]["status"], "fail");

    // nothing selected
    let empty = tempfile::tempdir().unwrap();
    let (o, out) = run_with(empty.path(), &["verify"], &base(json!({"kind": "constant"})), &[]);
    assert_eq!(o.status.code(), Some(0));
    assert!(!out.exists());
}
