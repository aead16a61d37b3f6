//! Run configuration: a single TOML file with nested sections, parsed
//! strictly (unknown keys are rejected) and then validated by the core
//! model builders. All effective values, including defaults, are echoed
//! into the emitted metadata.

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use matpop::model::{
    AgeShape, DelayFamily, DivisionFamily, InitialData, ModelSpec, MortalityProfiles, Profile,
    ProfileSpec, ReentryFamily, VelocityFamily,
};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    pub initial: InitialSection,
    #[serde(default)]
    pub grid: GridSection,
    pub run: RunSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub experiment: Option<ExperimentSection>,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub velocity: VelocitySection,
    pub delay: DelaySection,
    pub division: DivisionSection,
    pub reentry: ReentrySection,
    pub mortality: MortalitySection,
    /// Survival prefactor profile of the proliferating exit rate
    /// (must equal 1 at m = 0).
    #[serde(default = "one_value")]
    pub alpha_pi: ProfileValue,
}

fn one_value() -> ProfileValue {
    ProfileValue::Constant(1.0)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum VelocitySection {
    PowerLaw { coefficient: f64, exponent: f64 },
    Tabulated { m: Vec<f64>, v: Vec<f64> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DelaySection {
    LogAffine { alpha: f64 },
    Constant { r: f64 },
    Tabulated { m: Vec<f64>, tau: Vec<f64> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DivisionSection {
    Linear { kappa: f64 },
    Tabulated { m: Vec<f64>, g: Vec<f64> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReentrySection {
    pub beta0: ProfileValue,
    pub theta: ProfileValue,
    pub n: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MortalitySection {
    pub delta: ProfileValue,
    pub gamma: ProfileValue,
}

/// A maturity profile: a plain number or a sampled table.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProfileValue {
    Constant(f64),
    Tabulated { m: Vec<f64>, value: Vec<f64> },
}

impl ProfileValue {
    fn to_profile(&self) -> Result<Profile> {
        Ok(match self {
            ProfileValue::Constant(v) => Profile::constant(*v),
            ProfileValue::Tabulated { m, value } => {
                Profile::tabulated(m.clone(), value.clone())?
            }
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    /// Resting density μ̄: preset string(s) or a CSV table
    /// (`{ csv = "path" }`, columns `m,mu[,gbar]`).
    pub mu: DataSource,
    /// Proliferating density Γ (as a maturity profile, uniform in age
    /// unless `gamma_age = "hold_integral"`).
    pub gamma: DataSource,
    #[serde(default)]
    pub gamma_age: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DataSource {
    Preset(String),
    Presets(Vec<String>),
    Csv { csv: String, column: Option<String> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub nodes: usize,
    pub u_floor: f64,
    /// 0.0 selects the default step rule.
    pub dt: f64,
    /// Maturities pinned onto the grid (experiment thresholds).
    pub pins: Vec<f64>,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            nodes: 192,
            u_floor: 1e-3,
            dt: 0.0,
            pins: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub horizon: f64,
    #[serde(default)]
    pub dump_every: Option<f64>,
    #[serde(default)]
    pub dump_times: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: "out".into() }
    }
}

/// Parameters of the twin-run / extinction experiments.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    /// Maturity threshold below which the twin data agree (or vanish).
    pub b: f64,
    /// Second data set of the dependence twin (presets only).
    #[serde(default)]
    pub mu2: Option<DataSource>,
    #[serde(default)]
    pub gamma2: Option<DataSource>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub runs: Vec<SweepRun>,
}

/// One sweep entry: scalar overrides applied on top of the base model.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepRun {
    pub name: String,
    #[serde(default)]
    pub beta0: Option<f64>,
    #[serde(default)]
    pub theta: Option<f64>,
    #[serde(default)]
    pub kappa: Option<f64>,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default)]
    pub gamma: Option<f64>,
}

impl RunConfig {
    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: RunConfig = toml::from_str(&text).context("parsing config")?;
        Ok(cfg)
    }

    pub fn build_spec(&self) -> Result<ModelSpec> {
        let velocity = match &self.model.velocity {
            VelocitySection::PowerLaw {
                coefficient,
                exponent,
            } => VelocityFamily::power_law(*coefficient, *exponent),
            VelocitySection::Tabulated { m, v } => {
                VelocityFamily::tabulated(m.clone(), v.clone())?
            }
        };
        let delay = match &self.model.delay {
            DelaySection::LogAffine { alpha } => DelayFamily::log_affine(*alpha),
            DelaySection::Constant { r } => DelayFamily::constant(*r),
            DelaySection::Tabulated { m, tau } => DelayFamily::tabulated(m.clone(), tau.clone())?,
        };
        let division = match &self.model.division {
            DivisionSection::Linear { kappa } => DivisionFamily::linear(*kappa),
            DivisionSection::Tabulated { m, g } => DivisionFamily::tabulated(m.clone(), g.clone())?,
        };
        let reentry = ReentryFamily {
            beta0: self.model.reentry.beta0.to_profile()?,
            theta: self.model.reentry.theta.to_profile()?,
            exponent: self.model.reentry.n,
        };
        let mortality = MortalityProfiles {
            delta: self.model.mortality.delta.to_profile()?,
            gamma: self.model.mortality.gamma.to_profile()?,
        };
        Ok(ModelSpec::build(
            velocity,
            delay,
            division,
            reentry,
            mortality,
            self.model.alpha_pi.to_profile()?,
        )?)
    }

    pub fn build_initial(&self, base_dir: &std::path::Path) -> Result<InitialData> {
        let mu = data_source_to_profile(&self.initial.mu, base_dir, "mu")?;
        // a gamma CSV with an age column becomes a full (m, a) table
        if let DataSource::Csv { csv, column: None } = &self.initial.gamma {
            let path = base_dir.join(csv);
            let header = std::fs::read_to_string(&path)
                .with_context(|| format!("reading {}", path.display()))?
                .lines()
                .next()
                .unwrap_or("")
                .to_string();
            if header.split(',').any(|c| c.trim() == "a") {
                let table = crate::csvio::read_gamma_table(&path)?;
                return Ok(InitialData::with_gamma_table(mu, table)?);
            }
        }
        let gamma = data_source_to_profile(&self.initial.gamma, base_dir, "gamma")?;
        let mut data = InitialData::new(mu, gamma)?;
        if let Some(shape) = &self.initial.gamma_age {
            data = data.with_age_shape(match shape.as_str() {
                "uniform" => AgeShape::Uniform,
                "hold_integral" => AgeShape::HoldIntegral,
                other => bail!("unknown gamma_age '{other}' (uniform | hold_integral)"),
            });
        }
        Ok(data)
    }
}

/// Parse a preset string: `zero`, `constant(c)`, `bump(b, h)` or
/// `zero-below(b)`.
pub fn parse_preset(s: &str) -> Result<ProfileSpec> {
    let s = s.trim();
    if s == "zero" {
        return Ok(ProfileSpec::Zero);
    }
    let (name, args) = match s.split_once('(') {
        Some((n, rest)) => {
            let inner = rest
                .strip_suffix(')')
                .with_context(|| format!("preset '{s}': missing ')'"))?;
            let args: Vec<f64> = inner
                .split(',')
                .map(|a| a.trim().parse::<f64>().with_context(|| format!("preset '{s}'")))
                .collect::<Result<_>>()?;
            (n.trim(), args)
        }
        None => (s, Vec::new()),
    };
    match (name, args.as_slice()) {
        ("constant", [c]) => Ok(ProfileSpec::Constant { value: *c }),
        ("bump", [b, h]) => Ok(ProfileSpec::Bump {
            b: *b,
            height: *h,
        }),
        ("zero-below", [b]) => Ok(ProfileSpec::ZeroBelow { b: *b }),
        _ => bail!("unknown preset '{s}' (zero | constant(c) | bump(b, h) | zero-below(b))"),
    }
}

pub fn data_source_to_profile(
    src: &DataSource,
    base_dir: &std::path::Path,
    which: &str,
) -> Result<ProfileSpec> {
    match src {
        DataSource::Preset(s) => parse_preset(s),
        DataSource::Presets(list) => {
            let terms = list.iter().map(|s| parse_preset(s)).collect::<Result<Vec<_>>>()?;
            Ok(ProfileSpec::Sum { terms })
        }
        DataSource::Csv { csv, column } => {
            let path = base_dir.join(csv);
            let col = column.clone().unwrap_or_else(|| which.to_string());
            let (ms, vals) = crate::csvio::read_columns(&path, "m", &col)?;
            Ok(ProfileSpec::Tabulated {
                table: matpop::numerics::MonotoneCubic::new(ms, vals)?,
            })
        }
    }
}
