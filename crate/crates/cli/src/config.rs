//! Run configuration: a versioned JSON document validated field by field
//! before anything is computed.

use std::path::{Path, PathBuf};

use riesz_core::atoms::BallSamplerSpec;
use riesz_core::geometry::{MatrixFamily, MatrixFamilySpec, MatrixNorm, DEFAULT_CONDITION_CAP};
use riesz_core::grid::GridSamples;
use riesz_core::operators::{ExponentProfile, MaximalPolicy, SampledFunction};
use riesz_core::quadrature::QuadratureScheme;
use riesz_core::verify::{sobolev_exponent, CampaignSpec, MaximalCase, NodePolicy, Numerics, PointwiseSpec, Theorem, TheoremSetup};
use riesz_core::weights::{BallFamilySpec, CriticalIndexOptions, PowerFactor, WeightClass, WeightSpec};
use riesz_core::{Ball, Point};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema: u32,
    #[serde(default)]
    pub name: String,
    pub dimension: usize,
    #[serde(default)]
    pub seed: u64,
    pub weight: WeightBlock,
    /// Absent means the single identity matrix.
    #[serde(default)]
    pub matrices: Option<MatrixBlock>,
    pub exponents: ExponentBlock,
    #[serde(default)]
    pub atoms: AtomBlock,
    #[serde(default)]
    pub theorem: Option<Theorem>,
    #[serde(default)]
    pub campaign: CampaignBlock,
    #[serde(default)]
    pub quadrature: QuadratureBlock,
    #[serde(default)]
    pub classify: ClassifyBlock,
    #[serde(default)]
    pub sweep: Option<SweepBlock>,
    #[serde(default)]
    pub generate: GenerateBlock,
    #[serde(default)]
    pub checks: Vec<CheckKind>,
    #[serde(default)]
    pub containment: ContainmentBlock,
    #[serde(default)]
    pub pointwise: PointwiseSpec,
    #[serde(default)]
    pub maximal: MaximalBlock,
    #[serde(default)]
    pub output: OutputBlock,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightBlock {
    Constant,
    Power {
        exponent: f64,
    },
    LogExample,
    ProductPower {
        factors: Vec<PowerFactor>,
    },
    /// CSV rows `(coordinates..., value)` on a regular lattice; relative
    /// paths resolve against the config file.
    Tabulated {
        path: PathBuf,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixBlock {
    /// One row-major entry list per matrix.
    pub entries: Vec<Vec<f64>>,
    #[serde(default)]
    pub norm: MatrixNorm,
    #[serde(default = "default_cap")]
    pub condition_cap: f64,
}

fn default_cap() -> f64 {
    DEFAULT_CONDITION_CAP
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExponentBlock {
    pub alpha: f64,
    /// `α_j`; absent means the equal split `(n - α) / m`.
    #[serde(default)]
    pub split: Option<Vec<f64>>,
}

/// Atom parameters. `q` is never configured: it follows from `p`, `α` and `n`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomBlock {
    pub p: Option<f64>,
    pub s: Option<f64>,
    pub p0: Option<f64>,
    pub d: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CampaignBlock {
    pub atoms: usize,
    pub radii: Vec<f64>,
    pub center_extent: f64,
    pub center_step: f64,
    pub drift_limit: f64,
}

impl Default for CampaignBlock {
    fn default() -> Self {
        let c = CampaignSpec::default();
        CampaignBlock {
            atoms: c.atoms,
            radii: c.radii,
            center_extent: c.center_extent,
            center_step: c.center_step,
            drift_limit: c.drift_limit,
        }
    }
}

/// Overrides of the per-dimension numerical defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureBlock {
    pub weights: Option<QuadratureScheme>,
    pub operator: Option<QuadratureScheme>,
    pub nodes: Option<NodePolicy>,
    pub family: Option<BallFamilySpec>,
    pub indices: Option<CriticalIndexOptions>,
    pub maximal: Option<MaximalPolicy>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifyBlock {
    pub classes: Vec<WeightClass>,
    pub indices: bool,
}

impl Default for ClassifyBlock {
    fn default() -> Self {
        ClassifyBlock {
            classes: vec![WeightClass::A1, WeightClass::Ap { p: 2.0 }, WeightClass::Rh { s: 2.0 }],
            indices: true,
        }
    }
}

/// `T f` on the lattice `lo + i (hi - lo) / (nodes - 1)` per axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    pub function: FunctionBlock,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub nodes: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FunctionBlock {
    Csv { csv: PathBuf },
    Inline(SampledFunction),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenerateBlock {
    pub count: usize,
    pub sampler: BallSamplerSpec,
}

impl Default for GenerateBlock {
    fn default() -> Self {
        GenerateBlock {
            count: 100,
            sampler: BallSamplerSpec::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    Containment,
    RhBall,
    CriticalIndices,
    Pointwise,
    Maximal,
    Campaign,
}

impl CheckKind {
    pub fn id(&self) -> &'static str {
        match self {
            CheckKind::Containment => "containment",
            CheckKind::RhBall => "rh_ball",
            CheckKind::CriticalIndices => "critical_indices",
            CheckKind::Pointwise => "pointwise",
            CheckKind::Maximal => "maximal",
            CheckKind::Campaign => "campaign",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContainmentBlock {
    pub ball: Option<Ball>,
    pub count: usize,
}

impl Default for ContainmentBlock {
    fn default() -> Self {
        ContainmentBlock { ball: None, count: 1000 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MaximalBlock {
    /// Defaults to Hardy-Littlewood at `p = 2`.
    pub case: Option<MaximalCase>,
    /// Indicator supports; defaults to three intervals around the origin.
    pub tests: Vec<Ball>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputBlock {
    pub dir: PathBuf,
    pub witnesses: bool,
}

impl Default for OutputBlock {
    fn default() -> Self {
        OutputBlock {
            dir: PathBuf::from("out"),
            witnesses: true,
        }
    }
}

/// Parses a config, reporting the JSON path of the first bad field.
pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| CliError::Config(format!("{}: {}", e.path(), e.inner())))?;
    if cfg.schema != SCHEMA_VERSION {
        return Err(CliError::Config(format!(
            "schema: unsupported version {}, expected {SCHEMA_VERSION}",
            cfg.schema
        )));
    }
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<(RunConfig, PathBuf), CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((parse_config(&text)?, base))
}

fn bad(field: &str, e: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{field}: {e}"))
}

/// The config turned into library objects; every cross-field constraint is
/// checked here.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub config: RunConfig,
    pub hash: String,
    pub weight: WeightSpec,
    pub family: MatrixFamily,
    pub profile: ExponentProfile,
    pub numerics: Numerics,
    pub maximal_policy: MaximalPolicy,
    /// Folder relative paths in the config resolve against.
    pub base: PathBuf,
}

impl Resolved {
    pub fn new(config: RunConfig, base: PathBuf) -> Result<Self, CliError> {
        let n = config.dimension;
        if !(n == 1 || n == 2) {
            return Err(bad("dimension", format!("only 1 and 2 are supported, got {n}")));
        }
        let weight = match &config.weight {
            WeightBlock::Constant => Ok(WeightSpec::constant(n)),
            WeightBlock::Power { exponent } => WeightSpec::power_law(n, *exponent),
            WeightBlock::LogExample => WeightSpec::log_example(n),
            WeightBlock::ProductPower { factors } => WeightSpec::product_power(n, factors.clone()),
            WeightBlock::Tabulated { path } => GridSamples::read_csv(&base.join(path), n).and_then(WeightSpec::tabulated),
        }
        .map_err(|e| bad("weight", e))?;
        let family = match &config.matrices {
            None => MatrixFamily::identity(n),
            Some(m) => MatrixFamily::from_spec(&MatrixFamilySpec {
                dim: n,
                matrices: m.entries.clone(),
                norm: m.norm,
                condition_cap: m.condition_cap,
            })
            .map_err(|e| bad("matrices", e))?,
        };
        let e = &config.exponents;
        let profile = match &e.split {
            None => ExponentProfile::equal_split(n, e.alpha, family.len()),
            Some(s) if s.len() != family.len() => {
                return Err(bad("exponents.split", format!("{} exponents for {} matrices", s.len(), family.len())))
            }
            Some(s) => ExponentProfile::new(n, e.alpha, s.clone()),
        }
        .map_err(|err| bad("exponents", err))?;
        if let Some(p) = config.atoms.p {
            if !(p > 0.0 && p.is_finite()) {
                return Err(bad("atoms.p", "must be positive"));
            }
            if e.alpha > 0.0 {
                sobolev_exponent(n, p, e.alpha).map_err(|err| bad("atoms.p", err))?;
            }
        }

        let mut numerics = Numerics::for_dim(n);
        let q = &config.quadrature;
        if let Some(s) = q.weights {
            s.validate().map_err(|err| bad("quadrature.weights", err))?;
            numerics.weights = s;
        }
        if let Some(s) = q.operator {
            s.validate().map_err(|err| bad("quadrature.operator", err))?;
            numerics.operator = s;
        }
        if let Some(nodes) = &q.nodes {
            nodes.validate().map_err(|err| bad("quadrature.nodes", err))?;
            numerics.nodes = nodes.clone();
        }
        if let Some(f) = &q.family {
            numerics.family = f.clone();
        }
        if let Some(i) = q.indices {
            numerics.indices = i;
        }
        let maximal_policy = q.maximal.clone().unwrap_or_default();
        maximal_policy.validate().map_err(|err| bad("quadrature.maximal", err))?;

        if config.checks.contains(&CheckKind::Campaign) && config.theorem.is_none() {
            return Err(bad("theorem", "the campaign check needs a theorem"));
        }
        if config.checks.contains(&CheckKind::Maximal) && n != 1 {
            return Err(bad("checks", "the maximal inequality check runs on the line only"));
        }

        let hash = config_hash(&config)?;
        Ok(Resolved {
            config,
            hash,
            weight,
            family,
            profile,
            numerics,
            maximal_policy,
            base,
        })
    }

    pub fn dim(&self) -> usize {
        self.config.dimension
    }

    pub fn alpha(&self) -> f64 {
        self.config.exponents.alpha
    }

    pub fn p(&self) -> Result<f64, CliError> {
        self.config.atoms.p.ok_or_else(|| bad("atoms.p", "required by this command"))
    }

    /// `1/q = 1/p - α/n` for `α > 0`, `q = p` otherwise.
    pub fn q(&self) -> Result<f64, CliError> {
        let p = self.p()?;
        if self.alpha() > 0.0 {
            sobolev_exponent(self.dim(), p, self.alpha()).map_err(|e| bad("atoms.p", e))
        } else {
            Ok(p)
        }
    }

    pub fn campaign_spec(&self) -> CampaignSpec {
        let c = &self.config.campaign;
        CampaignSpec {
            atoms: c.atoms,
            seed: self.config.seed,
            radii: c.radii.clone(),
            center_extent: c.center_extent,
            center_step: c.center_step,
            drift_limit: c.drift_limit,
        }
    }

    pub fn theorem_setup(&self) -> Result<TheoremSetup, CliError> {
        let theorem = self.config.theorem.ok_or_else(|| bad("theorem", "required by this command"))?;
        let a = &self.config.atoms;
        Ok(TheoremSetup {
            theorem,
            weight: self.weight.clone(),
            profile: self.profile.clone(),
            family: self.family.clone(),
            p: self.p()?,
            s: a.s,
            p0: a.p0,
            d: a.d,
        })
    }

    pub fn containment_ball(&self) -> Ball {
        self.config
            .containment
            .ball
            .unwrap_or(Ball {
                center: Point::origin(self.dim()),
                radius: 1.0,
            })
    }

    pub fn output_dir(&self, flag: Option<&Path>) -> PathBuf {
        match flag {
            Some(p) => p.to_path_buf(),
            None => self.base.join(&self.config.output.dir),
        }
    }
}

/// SHA-256 of the canonical serialization (after any seed override), so
/// whitespace and key order in the file do not matter.
pub fn config_hash(config: &RunConfig) -> Result<String, CliError> {
    let canon = serde_json::to_vec(config).map_err(|e| CliError::Config(e.to_string()))?;
    Ok(Sha256::digest(&canon).iter().map(|b| format!("{b:02x}")).collect())
}
