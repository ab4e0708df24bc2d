//! Experiment configuration files.
//!
//! One TOML file describes one experiment. Top-level scalars select the
//! model and seeding; tables hold the kernels, the model parameters, the
//! snapshot schedule, speciation-criterion overrides and one section per
//! model. Unknown keys are rejected, so a typo fails loudly instead of
//! silently falling back to a default.
//!
//! ```toml
//! name = "fig4"
//! model = "moran"
//! seed = 1
//! replicas = 1
//!
//! [kernels]
//! half_width = 14
//! assumption1 = true
//! capacity = { kind = "gaussian", variance = 10.0 }
//! cooperation = { kind = "step", b = 0.01, m = 10 }
//!
//! [params]
//! mu = 6e-5
//! N = 50625
//!
//! [schedule]
//! horizon = 4000.0
//! every = 5.0
//! ```

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use sympatric::conditioned::FitnessKind;
use sympatric::dd::DDParams;
use sympatric::landscape::{FaceSeeding, ScanOptions};
use sympatric::moran::{OdeVariant, SpeciationCriterion};
use sympatric::{KernelSet, KernelSpec, ModelParams, PhenotypeSpace, SimplexDistribution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    DdOriginal,
    ConditionedDd,
    Moran,
    Ode,
    Landscape,
    Mcmc,
    Bifurcation,
    SpeciationSweep,
}

impl ModelKind {
    pub fn label(self) -> &'static str {
        match self {
            ModelKind::DdOriginal => "dd_original",
            ModelKind::ConditionedDd => "conditioned_dd",
            ModelKind::Moran => "moran",
            ModelKind::Ode => "ode",
            ModelKind::Landscape => "landscape",
            ModelKind::Mcmc => "mcmc",
            ModelKind::Bifurcation => "bifurcation",
            ModelKind::SpeciationSweep => "speciation_sweep",
        }
    }
}

/// Snapshot times: `every` multiples up to `horizon`, plus any explicit
/// `times`. Both empty records the terminal state only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct Schedule {
    #[serde(default)]
    pub horizon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub every: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub times: Vec<f64>,
}

impl Schedule {
    pub fn times(&self) -> Vec<f64> {
        let mut t = self.times.clone();
        if let Some(every) = self.every.filter(|e| *e > 0.0) {
            let n = (self.horizon / every).floor() as usize;
            t.extend((0..=n).map(|i| i as f64 * every));
        }
        t.sort_by(f64::total_cmp);
        t.dedup();
        t
    }
}

/// Starting distribution for the deterministic models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Start {
    /// `(1 - eps) δ_0 + eps · uniform`.
    NearDelta { eps: f64 },
    Delta { x: i64 },
    Uniform,
    /// Discrete Gaussian centred at 0.
    Gaussian { sd: f64 },
}

impl Start {
    pub fn build(&self, space: PhenotypeSpace) -> Result<SimplexDistribution> {
        Ok(match *self {
            Start::NearDelta { eps } => {
                if !(0.0..=1.0).contains(&eps) {
                    bail!("start.eps: must lie in [0, 1]");
                }
                sympatric::conditioned::near_delta_start(space, eps)
            }
            Start::Delta { x } => {
                if space.index(x).is_none() {
                    bail!("start.x: {x} is outside the lattice");
                }
                SimplexDistribution::delta(space, x)
            }
            Start::Uniform => SimplexDistribution::uniform(space),
            Start::Gaussian { sd } => {
                if !(sd > 0.0) {
                    bail!("start.sd: must be positive");
                }
                let w = space.sites().map(|x| (-((x * x) as f64) / (2.0 * sd * sd)).exp()).collect();
                SimplexDistribution::from_mass(space, w)?
            }
        })
    }
}

fn near_delta() -> Start {
    Start::NearDelta { eps: 1e-3 }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DdSection {
    /// Phenotype of the monomorphic founders.
    #[serde(default)]
    pub start: i64,
    pub initial_size: u64,
    pub model: DDParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionedSection {
    pub fitness: FitnessKind,
    /// Nearest-neighbour mutation probability; 0 is the identity.
    #[serde(default)]
    pub mutation_rate: f64,
    #[serde(default = "near_delta")]
    pub start: Start,
    #[serde(default = "defaults::fixed_point_tol")]
    pub tol: f64,
    pub max_iter: usize,
    #[serde(default)]
    pub snapshot_every: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct MoranSection {
    /// Phenotype of the monomorphic start.
    #[serde(default)]
    pub start: i64,
    /// End each replica at the first snapshot where the criterion fires.
    #[serde(default)]
    pub stop_on_speciation: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OdeSection {
    pub variant: OdeVariant,
    #[serde(default = "near_delta")]
    pub start: Start,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LandscapeSection {
    /// Defaults to `μ - 2/N` from `[params]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_tilde: Option<f64>,
    #[serde(default = "defaults::n_starts")]
    pub n_starts: usize,
    #[serde(default = "defaults::faces")]
    pub faces: FaceSeeding,
    #[serde(default = "defaults::yes")]
    pub audit: bool,
}

impl Default for LandscapeSection {
    fn default() -> Self {
        Self {
            mu_tilde: None,
            n_starts: defaults::n_starts(),
            faces: defaults::faces(),
            audit: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McmcSection {
    pub samples: usize,
    pub burn_in: usize,
    #[serde(default = "defaults::chains")]
    pub chains: usize,
    #[serde(default = "defaults::one")]
    pub thin: usize,
    #[serde(default = "defaults::kappa")]
    pub kappa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BifurcationSection {
    pub mu_grid: Vec<f64>,
    /// Point whose nearby maximum is tracked.
    #[serde(default)]
    pub center: i64,
    #[serde(default)]
    pub scan: ScanOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub mu_grid: Vec<f64>,
    #[serde(default)]
    pub start: i64,
}

mod defaults {
    use super::FaceSeeding;

    pub fn fixed_point_tol() -> f64 {
        1e-12
    }
    pub fn n_starts() -> usize {
        32
    }
    pub fn faces() -> FaceSeeding {
        FaceSeeding::Singletons
    }
    pub fn yes() -> bool {
        true
    }
    pub fn chains() -> usize {
        4
    }
    pub fn one() -> usize {
        1
    }
    pub fn kappa() -> f64 {
        100.0
    }
}

fn one() -> usize {
    1
}

fn is_zero(v: &u64) -> bool {
    *v == 0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub model: ModelKind,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub seed: u64,
    #[serde(default = "one")]
    pub replicas: usize,
    /// Output directory; not part of the config hash.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernels: Option<KernelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<ModelParams>,
    #[serde(default)]
    pub schedule: Schedule,
    #[serde(default)]
    pub criterion: SpeciationCriterion,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dd: Option<DdSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conditioned: Option<ConditionedSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub moran: Option<MoranSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ode: Option<OdeSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub landscape: Option<LandscapeSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mcmc: Option<McmcSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bifurcation: Option<BifurcationSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).context("parsing experiment config")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configs always serialize")
    }

    /// First 16 hex digits of the SHA-256 of the canonical serialization,
    /// with the output directory removed.
    pub fn hash(&self) -> String {
        let canonical = Self {
            output: None,
            ..self.clone()
        };
        let digest = Sha256::digest(canonical.to_toml().as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Checks that the sections the model needs are present and sane;
    /// errors name the offending field.
    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            bail!("name: must be a nonempty plain file name");
        }
        if self.replicas == 0 {
            bail!("replicas: must be at least 1");
        }
        if let Some(p) = &self.params {
            p.validate().context("params")?;
        }
        if let Some(k) = &self.kernels {
            KernelSet::from_spec(k).context("kernels")?;
        }
        let needs_kernels = !matches!(self.model, ModelKind::DdOriginal);
        if needs_kernels && self.kernels.is_none() {
            bail!("kernels: required for model {}", self.model.label());
        }
        let needs_params = matches!(
            self.model,
            ModelKind::Moran | ModelKind::Ode | ModelKind::Mcmc | ModelKind::Bifurcation | ModelKind::SpeciationSweep
        );
        if needs_params && self.params.is_none() {
            bail!("params: required for model {}", self.model.label());
        }
        let timed = matches!(
            self.model,
            ModelKind::DdOriginal | ModelKind::Moran | ModelKind::Ode | ModelKind::SpeciationSweep
        );
        if timed && !(self.schedule.horizon > 0.0) {
            bail!("schedule.horizon: must be positive for model {}", self.model.label());
        }
        if self.schedule.every.is_some_and(|e| !(e > 0.0)) {
            bail!("schedule.every: must be positive");
        }
        match self.model {
            ModelKind::DdOriginal => {
                let dd = self.dd.as_ref().context("dd: required for model dd_original")?;
                let space = dd.model.validate().context("dd.model")?;
                if space.index(dd.start).is_none() {
                    bail!("dd.start: {} is outside the lattice", dd.start);
                }
                if dd.initial_size == 0 {
                    bail!("dd.initial_size: must be at least 1");
                }
            }
            ModelKind::ConditionedDd => {
                let c = self.conditioned.as_ref().context("conditioned: required for model conditioned_dd")?;
                if !(c.tol > 0.0) {
                    bail!("conditioned.tol: must be positive");
                }
                if !(0.0..=0.5).contains(&c.mutation_rate) {
                    bail!("conditioned.mutation_rate: must lie in [0, 1/2]");
                }
            }
            ModelKind::Moran => {}
            ModelKind::Ode => {
                self.ode.as_ref().context("ode: required for model ode")?;
            }
            ModelKind::Landscape => {
                let l = self.landscape.clone().unwrap_or_default();
                if l.mu_tilde.is_none() && self.params.is_none() {
                    bail!("landscape.mu_tilde: required when [params] is absent");
                }
            }
            ModelKind::Mcmc => {
                let m = self.mcmc.as_ref().context("mcmc: required for model mcmc")?;
                if m.samples == 0 || m.chains == 0 || m.thin == 0 {
                    bail!("mcmc.samples, mcmc.chains, mcmc.thin: must be positive");
                }
            }
            ModelKind::Bifurcation => {
                let b = self.bifurcation.as_ref().context("bifurcation: required for model bifurcation")?;
                if b.mu_grid.len() < 2 {
                    bail!("bifurcation.mu_grid: needs at least two values");
                }
            }
            ModelKind::SpeciationSweep => {
                let s = self.sweep.as_ref().context("sweep: required for model speciation_sweep")?;
                if s.mu_grid.is_empty() {
                    bail!("sweep.mu_grid: must be nonempty");
                }
            }
        }
        Ok(())
    }

    pub fn kernel_set(&self) -> Result<KernelSet> {
        let spec = self.kernels.as_ref().context("kernels: missing")?;
        Ok(KernelSet::from_spec(spec)?)
    }

    pub fn model_params(&self) -> Result<ModelParams> {
        self.params.context("params: missing")
    }
}
