use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use riesz_core::atoms::{load_atoms, sample_atom_campaign, save_atoms, validate_atom, AtomParams, AtomValidation};
use riesz_core::operators::{apply_t, sweep, write_sweep_csv, SampledFunction};
use riesz_core::verify::*;
use riesz_core::weights::{critical_indices, estimate_class, BallFamily, CriticalIndices, WeightClassReport, WeightSpec};
use riesz_core::{Ball, Point};
use serde::Serialize;

use crate::config::{CheckKind, FunctionBlock, Resolved};
use crate::{exit, CliError};

/// Files written by one command, in write order, and its exit code.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunOutcome {
    pub code: i32,
    pub files: Vec<PathBuf>,
}

/// Sole owner of the output directory for one command.
struct Output {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Output {
    fn new(dir: &Path) -> Self {
        Output {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        }
    }

    fn path(&mut self, name: &str) -> Result<PathBuf, CliError> {
        std::fs::create_dir_all(&self.dir)?;
        let p = self.dir.join(name);
        self.files.push(p.clone());
        Ok(p)
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.into()))?;
        text.push('\n');
        std::fs::write(self.path(name)?, text)?;
        Ok(())
    }

    /// The manifest is the only file with a timestamp, so reports stay
    /// byte-identical across reruns.
    fn finish(mut self, command: &str, r: &Resolved, code: i32) -> Result<RunOutcome, CliError> {
        let files: Vec<String> = self
            .files
            .iter()
            .filter_map(|p| p.file_name().map(|s| s.to_string_lossy().into_owned()))
            .collect();
        let manifest = Manifest {
            command,
            config: &r.config.name,
            config_hash: &r.hash,
            seed: r.config.seed,
            exit_code: code,
            files,
            timestamp_unix: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        };
        self.json("manifest.json", &manifest)?;
        Ok(RunOutcome { code, files: self.files })
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    config: &'a str,
    config_hash: &'a str,
    seed: u64,
    exit_code: i32,
    files: Vec<String>,
    timestamp_unix: u64,
}

fn ball_family(r: &Resolved, w: &WeightSpec) -> Result<BallFamily, CliError> {
    Ok(BallFamily::generate(&r.numerics.family, r.dim(), &w.singular_centers())?)
}

#[derive(Serialize)]
struct ClassifyReport<'a> {
    config_hash: &'a str,
    weight: &'a WeightSpec,
    balls: usize,
    classes: Vec<WeightClassReport>,
    indices: Option<CriticalIndices>,
}

pub fn weights_classify(r: &Resolved, out: &Path) -> Result<RunOutcome, CliError> {
    let w = &r.weight;
    let fam = ball_family(r, w)?;
    let q = &r.numerics.weights;
    let classes = r
        .config
        .classify
        .classes
        .iter()
        .map(|c| estimate_class(w, *c, &fam, q))
        .collect::<riesz_core::Result<Vec<_>>>()?;
    let indices = if r.config.classify.indices {
        Some(critical_indices(w, &fam, q, &r.numerics.indices)?)
    } else {
        None
    };
    if classes.is_empty() && indices.is_none() {
        return Ok(RunOutcome::default());
    }
    let mut o = Output::new(out);
    o.json(
        "weights_classify.json",
        &ClassifyReport {
            config_hash: &r.hash,
            weight: w,
            balls: fam.len(),
            classes,
            indices,
        },
    )?;
    o.finish("weights classify", r, exit::PASS)
}

fn lattice(lo: &[f64], hi: &[f64], nodes: &[usize]) -> Vec<Point> {
    let axis = |k: usize| -> Vec<f64> {
        match nodes[k] {
            0 => Vec::new(),
            1 => vec![lo[k]],
            m => (0..m).map(|i| lo[k] + (hi[k] - lo[k]) * i as f64 / (m - 1) as f64).collect(),
        }
    };
    match lo.len() {
        1 => axis(0).into_iter().map(Point::scalar).collect(),
        _ => {
            let (xs, ys) = (axis(0), axis(1));
            xs.iter().flat_map(|&x| ys.iter().map(move |&y| Point::planar(x, y))).collect()
        }
    }
}

pub fn operator_sweep(r: &Resolved, out: &Path) -> Result<RunOutcome, CliError> {
    let Some(s) = &r.config.sweep else {
        return Ok(RunOutcome::default());
    };
    let n = r.dim();
    if s.lo.len() != n || s.hi.len() != n || s.nodes.len() != n {
        return Err(CliError::Config(format!("sweep: lo, hi and nodes need {n} entries each")));
    }
    let points = lattice(&s.lo, &s.hi, &s.nodes);
    if points.is_empty() {
        return Ok(RunOutcome::default());
    }
    let f = match &s.function {
        FunctionBlock::Csv { csv } => SampledFunction::read_csv(&r.base.join(csv), n),
        FunctionBlock::Inline(f) => f.validate().map(|_| f.clone()),
    }
    .map_err(|e| CliError::Config(format!("sweep.function: {e}")))?;
    if f.dim() != n {
        return Err(CliError::Config("sweep.function: dimension differs from the config".into()));
    }
    let values = sweep(&points, |x| apply_t(&f, x, &r.profile, &r.family, &r.numerics.operator))?;
    let mut o = Output::new(out);
    write_sweep_csv(&o.path("sweep.csv")?, &points, &values)?;
    o.finish("operator sweep", r, exit::PASS)
}

/// Atom parameters: from the hypothesis audit when a theorem is configured,
/// otherwise straight from the atom block with weight `w`.
pub fn atom_params(r: &Resolved) -> Result<AtomParams, CliError> {
    if r.config.theorem.is_some() {
        return Ok(audit_hypotheses(&r.theorem_setup()?, &r.numerics)?.params);
    }
    let a = &r.config.atoms;
    let p = r.p()?;
    let p0 = a.p0.ok_or_else(|| CliError::Config("atoms.p0: required without a theorem".into()))?;
    let n = r.dim() as f64;
    let params = AtomParams {
        dim: r.dim(),
        p,
        p0,
        d: a.d.unwrap_or(((n * (1.0 / p - 1.0)) + 1e-12).floor().max(0.0) as usize),
        weight: r.weight.clone(),
    };
    params.validate().map_err(|e| CliError::Config(format!("atoms: {e}")))?;
    Ok(params)
}

pub fn atoms_gen(r: &Resolved, out: &Path) -> Result<RunOutcome, CliError> {
    let g = &r.config.generate;
    if g.count == 0 {
        return Ok(RunOutcome::default());
    }
    let params = atom_params(r)?;
    let atoms = sample_atom_campaign(&params, &g.sampler, g.count, r.config.seed, &r.numerics.weights)?;
    let mut o = Output::new(out);
    save_atoms(&o.path("atoms.jsonl")?, &atoms)?;
    o.finish("atoms gen", r, exit::PASS)
}

#[derive(Serialize)]
struct ValidateReport<'a> {
    config_hash: &'a str,
    source: String,
    atoms: usize,
    failures: usize,
    rows: Vec<AtomValidation>,
}

pub fn atoms_validate(r: &Resolved, out: &Path, input: Option<&Path>) -> Result<RunOutcome, CliError> {
    let src = input.map_or_else(|| out.join("atoms.jsonl"), Path::to_path_buf);
    let atoms = load_atoms(&src)?;
    if atoms.is_empty() {
        return Ok(RunOutcome::default());
    }
    let rows: Vec<AtomValidation> = atoms
        .par_iter()
        .map(|a| validate_atom(a, &r.numerics.weights))
        .collect::<riesz_core::Result<_>>()?;
    let failures = rows.iter().filter(|v| !v.pass).count();
    let mut o = Output::new(out);
    o.json(
        "atoms_validate.json",
        &ValidateReport {
            config_hash: &r.hash,
            source: src.display().to_string(),
            atoms: rows.len(),
            failures,
            rows,
        },
    )?;
    let code = if failures == 0 { exit::PASS } else { exit::CHECK_FAILED };
    o.finish("atoms validate", r, code)
}

fn run_check(r: &Resolved, kind: CheckKind) -> Result<VerificationReport, CliError> {
    let w = &r.weight;
    let nm = &r.numerics;
    Ok(match kind {
        CheckKind::Containment => {
            let ball = r.containment_ball();
            let (xis, xs) = containment_samples(&ball, &r.family, r.config.containment.count, r.config.seed)?;
            check_containment_step(&ball, &r.family, &xis, &xs)?
        }
        CheckKind::RhBall => check_rh_ball_inequality(w, r.p()?, r.alpha(), &ball_family(r, w)?, &nm.weights)?,
        CheckKind::CriticalIndices => {
            let q = if r.alpha() > 0.0 { Some(r.q()?) } else { None };
            check_critical_index_lemmas(w, r.p()?, q, &ball_family(r, w)?, &nm.weights, &nm.indices)?
        }
        CheckKind::Pointwise => {
            let params = atom_params(r)?;
            check_pointwise_atom_bound(
                &r.config.pointwise,
                &params,
                &r.profile,
                &r.family,
                r.config.seed,
                &nm.operator,
                &nm.weights,
                &r.maximal_policy,
            )?
        }
        CheckKind::Maximal => {
            let m = &r.config.maximal;
            let case = m.case.unwrap_or(MaximalCase::HardyLittlewood { p: 2.0 });
            let tests = if m.tests.is_empty() {
                [(0.0, 1.0), (0.5, 0.25), (-1.0, 2.0)]
                    .iter()
                    .map(|&(c, rad)| Ball::new(Point::scalar(c), rad))
                    .collect::<riesz_core::Result<Vec<_>>>()?
            } else {
                m.tests.clone()
            };
            check_maximal_inequalities(w, case, &tests, &r.maximal_policy, &nm.nodes, &nm.weights, r.config.campaign.drift_limit)?
        }
        CheckKind::Campaign => run_theorem_campaign(&r.theorem_setup()?, &r.campaign_spec(), nm)?,
    })
}

#[derive(Clone, Debug, Serialize, serde::Deserialize, PartialEq)]
pub struct CheckSummary {
    pub check: String,
    /// `pass`, `fail`, `hypothesis_failed` or `error`.
    pub status: String,
    pub worst: Option<f64>,
    pub message: Option<String>,
}

#[derive(Clone, Debug, Serialize, serde::Deserialize, PartialEq)]
pub struct VerifySummary {
    pub config_hash: String,
    pub seed: u64,
    /// `q` derived from `p`, `α` and `n`, when `p` is configured.
    pub q: Option<f64>,
    pub exit_code: i32,
    pub checks: Vec<CheckSummary>,
}

/// Runs the selected checks in config order. A failed hypothesis outranks a
/// failed check in the exit code.
pub fn verify(r: &Resolved, out: &Path) -> Result<RunOutcome, CliError> {
    if r.config.checks.is_empty() {
        return Ok(RunOutcome::default());
    }
    let mut o = Output::new(out);
    let mut checks = Vec::new();
    let (mut failed, mut hypothesis) = (false, false);
    for &kind in &r.config.checks {
        let id = kind.id();
        let row = match run_check(r, kind) {
            Ok(mut rep) => {
                rep.provenance = Provenance {
                    seed: Some(r.config.seed),
                    config_hash: Some(r.hash.clone()),
                };
                let mut text = rep.to_json()?;
                text.push('\n');
                std::fs::write(o.path(&format!("{id}.json"))?, text)?;
                let rows = rep.witnesses();
                if r.config.output.witnesses && !rows.is_empty() {
                    write_witnesses(std::fs::File::create(o.path(&format!("{id}_witnesses.csv"))?)?, &rows)?;
                }
                failed |= !rep.passed();
                CheckSummary {
                    check: id.into(),
                    status: if rep.passed() { "pass" } else { "fail" }.into(),
                    worst: rep.worst.is_finite().then_some(rep.worst),
                    message: None,
                }
            }
            Err(e) => {
                let hyp = e.exit_code() == exit::HYPOTHESIS_FAILED;
                if matches!(e, CliError::Config(_)) {
                    return Err(e);
                }
                hypothesis |= hyp;
                failed |= !hyp;
                CheckSummary {
                    check: id.into(),
                    status: if hyp { "hypothesis_failed" } else { "error" }.into(),
                    worst: None,
                    message: Some(e.to_string()),
                }
            }
        };
        checks.push(row);
    }
    let code = if hypothesis {
        exit::HYPOTHESIS_FAILED
    } else if failed {
        exit::CHECK_FAILED
    } else {
        exit::PASS
    };
    o.json(
        "summary.json",
        &VerifySummary {
            config_hash: r.hash.clone(),
            seed: r.config.seed,
            q: r.config.atoms.p.and_then(|_| r.q().ok()),
            exit_code: code,
            checks,
        },
    )?;
    o.finish("verify", r, code)
}
