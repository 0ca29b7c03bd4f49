//! Empirical checks of the atom estimates: every check samples the inequality,
//! reports the implied constant and how it moves with scale and refinement.

mod campaign;
mod lemmas;
mod maximal_ineq;
mod nodes;
mod pointwise;

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::report::drift;

pub use campaign::{
    audit_hypotheses, run_theorem_campaign, target_split, AtomSplit, CampaignDetails, CampaignSpec, HypothesisAudit,
    Numerics, Theorem, TheoremSetup,
};
pub use lemmas::{
    check_containment_step, check_critical_index_lemmas, check_quasi_norm_assembly, check_rh_ball_inequality,
    containment_samples, quasi_norm_assembly, sobolev_exponent, ChainCheck, ContainmentDetails, CriticalIndexDetails,
    QuasiNormCheck, RhBallDetails,
};
pub use maximal_ineq::{check_maximal_inequalities, MaximalCase, MaximalDetails};
pub use nodes::NodePolicy;
pub use pointwise::{
    check_pointwise_atom_bound, outer_samples, pointwise_atom_bound, AtomShape, PointwiseBound, PointwiseDetails,
    PointwiseSample, PointwiseSpec,
};

/// Default bound on how far a constant may move across scales or refinements.
pub const DRIFT_LIMIT: f64 = 4.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Pass,
    Fail,
}

/// One audited hypothesis and the number that decided it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditItem {
    pub hypothesis: String,
    pub holds: bool,
    #[serde(with = "crate::report::ext_f64")]
    pub value: f64,
    pub note: String,
}

/// A constant tracked against a parameter (radius, refinement level).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    #[serde(with = "crate::report::ext_f64_vec")]
    pub at: Vec<f64>,
    #[serde(with = "crate::report::ext_f64_vec")]
    pub values: Vec<f64>,
    #[serde(with = "crate::report::ext_f64")]
    pub drift: f64,
}

impl Series {
    pub fn new(name: impl Into<String>, at: Vec<f64>, values: Vec<f64>) -> Self {
        let drift = drift(&values);
        Series {
            name: name.into(),
            at,
            values,
            drift,
        }
    }

    pub fn stable(&self, limit: f64) -> bool {
        self.values.iter().all(|v| v.is_finite()) && self.drift < limit
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: Option<u64>,
    pub config_hash: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Details {
    Pointwise(PointwiseDetails),
    Containment(ContainmentDetails),
    RhBall(RhBallDetails),
    CriticalIndices(CriticalIndexDetails),
    Maximal(MaximalDetails),
    Campaign(CampaignDetails),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub check: String,
    pub audit: Vec<AuditItem>,
    pub sample: String,
    /// Worst ratio or constant over the sample.
    #[serde(with = "crate::report::ext_f64")]
    pub worst: f64,
    pub series: Vec<Series>,
    pub drift_limit: f64,
    pub verdict: Outcome,
    pub provenance: Provenance,
    pub details: Details,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.verdict == Outcome::Pass
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.to_json()?.as_bytes())?;
        f.write_all(b"\n")?;
        Ok(())
    }
}

fn outcome(pass: bool) -> Outcome {
    if pass {
        Outcome::Pass
    } else {
        Outcome::Fail
    }
}

/// Records the item; a failed hypothesis aborts the check.
fn require(audit: &mut Vec<AuditItem>, hypothesis: &str, holds: bool, value: f64, note: impl Into<String>) -> Result<()> {
    let note = note.into();
    audit.push(AuditItem {
        hypothesis: hypothesis.into(),
        holds,
        value,
        note: note.clone(),
    });
    if holds {
        Ok(())
    } else {
        Err(Error::HypothesisFailed(format!("{hypothesis}: {note} (value {value})")))
    }
}

/// CSV of witness rows `(x..., lhs, rhs, ratio)`.
pub fn write_witnesses<W: Write>(writer: W, rows: &[(Vec<f64>, f64, f64, f64)]) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    let dim = rows.first().map_or(1, |r| r.0.len());
    let mut header: Vec<String> = (1..=dim).map(|i| format!("x{i}")).collect();
    header.extend(["lhs", "rhs", "ratio"].map(String::from));
    out.write_record(&header)?;
    for (x, lhs, rhs, ratio) in rows {
        let mut row: Vec<String> = x.iter().map(|c| format!("{c:.17e}")).collect();
        row.extend([lhs, rhs, ratio].map(|v| format!("{v:.17e}")));
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

impl VerificationReport {
    /// Witness rows for checks that store per-point evidence.
    pub fn witnesses(&self) -> Vec<(Vec<f64>, f64, f64, f64)> {
        match &self.details {
            Details::Pointwise(d) => d
                .runs
                .iter()
                .flat_map(|r| r.bound.samples.iter())
                .map(|s| (s.x.to_vec(), s.lhs, s.tmalpha_rhs, s.tmalpha_ratio))
                .collect(),
            Details::RhBall(d) => d.rows.iter().map(|r| (r.ball.center.to_vec(), r.lhs, r.rhs, r.lhs / r.rhs)).collect(),
            _ => Vec::new(),
        }
    }
}
