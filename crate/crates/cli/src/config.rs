//! Scenario configuration files (TOML).

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::Deserialize;

use semigroup_lab::catalog::{ExampleConfig, ExampleId};
use semigroup_lab::{NormKind, TheoremKind, TimeRule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Triple,
    RandomTriples,
    ConvC0,
    RankOneLp,
    HeatFeedback,
    RieszThorin,
    Spectral,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioKind,
    #[serde(default)]
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    pub time: Option<TimeSection>,
    #[serde(default)]
    pub tol: Tolerances,
    pub triple: Option<TripleSection>,
    pub random: Option<RandomSection>,
    pub example: Option<toml::Table>,
    pub riesz_thorin: Option<RieszSection>,
    pub spectral: Option<SpectralSection>,
    /// Extra checks for triple scenarios: "resolvent", "laplace", "norm_bounds".
    #[serde(default)]
    pub checks: Vec<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    pub t_end: f64,
    pub steps: usize,
    pub rule: Option<TimeRule>,
    /// Times written to report.csv; every grid time when absent.
    pub report: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub picard: f64,
    pub domination: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { picard: 1e-10, domination: 1e-8 }
    }
}

/// "sup", "l1" or an exponent p.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum NormSpec {
    Name(String),
    Exponent(f64),
}

impl NormSpec {
    pub fn kind(&self) -> Result<NormKind, String> {
        match self {
            NormSpec::Name(s) => match s.as_str() {
                "sup" => Ok(NormKind::Sup),
                "l1" => Ok(NormKind::L1),
                other => Err(format!("unknown norm {other:?} (expected \"sup\", \"l1\" or a number)")),
            },
            NormSpec::Exponent(p) if *p >= 1.0 => Ok(NormKind::from_exponent(*p)),
            NormSpec::Exponent(p) => Err(format!("norm exponent {p} must be at least 1")),
        }
    }
}

fn sup() -> NormSpec {
    NormSpec::Name("sup".into())
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TheoremName {
    Am,
    Al,
    Rn,
    Dom,
}

pub type Rows = Vec<Vec<f64>>;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TripleSection {
    pub a: Rows,
    pub b: Rows,
    pub c: Rows,
    #[serde(default = "sup")]
    pub x_norm: NormSpec,
    #[serde(default = "sup")]
    pub u_norm: NormSpec,
    #[serde(default = "default_theorem")]
    pub theorem: TheoremName,
    /// Exponent for the RN theorem.
    #[serde(default = "two")]
    pub p: f64,
    pub lambda0: Option<f64>,
    /// Dominating split for the DOM theorem.
    pub b_plus: Option<Rows>,
    pub b_minus: Option<Rows>,
    pub c_tilde: Option<Rows>,
}

fn default_theorem() -> TheoremName {
    TheoremName::Am
}
fn two() -> f64 {
    2.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RandomSection {
    pub count: usize,
    pub dim_min: usize,
    pub dim_max: usize,
    pub inputs_max: usize,
    pub r_min: f64,
    pub r_max: f64,
    /// Signed B and C with a Jordan split, run through the domination route.
    pub signed: bool,
    pub u_norm: NormSpec,
}

impl Default for RandomSection {
    fn default() -> Self {
        RandomSection {
            count: 25,
            dim_min: 2,
            dim_max: 12,
            inputs_max: 3,
            r_min: 0.2,
            r_max: 0.8,
            signed: false,
            u_norm: sup(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RieszSection {
    pub count: usize,
    pub ps: Vec<f64>,
    pub trials: usize,
    pub max_times: usize,
    pub max_components: usize,
    pub density: f64,
}

impl Default for RieszSection {
    fn default() -> Self {
        RieszSection { count: 100, ps: vec![1.5, 2.0, 3.0], trials: 20, max_times: 8, max_components: 3, density: 0.5 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectralSection {
    pub count: usize,
    pub dim_min: usize,
    pub dim_max: usize,
    pub n_max: u32,
    pub pairs: usize,
    pub shift_nodes: usize,
}

impl Default for SpectralSection {
    fn default() -> Self {
        SpectralSection { count: 20, dim_min: 3, dim_max: 10, n_max: 64, pairs: 50, shift_nodes: 65 }
    }
}

pub fn load(path: &Path) -> Result<ScenarioConfig, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let cfg: ScenarioConfig = toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    cfg.validate()?;
    Ok(cfg)
}

impl ScenarioConfig {
    fn validate(&self) -> Result<(), String> {
        if let Some(t) = &self.time {
            if t.steps < 16 {
                return Err(format!("time.steps = {} must be at least 16", t.steps));
            }
            if !(t.t_end > 0.0) {
                return Err(format!("time.t_end = {} must be positive", t.t_end));
            }
            if let Some(r) = &t.report {
                if r.iter().any(|s| !(0.0..=t.t_end).contains(s)) {
                    return Err("time.report entries must lie in [0, t_end]".into());
                }
            }
        }
        let needs = |present: bool, name: &str| if present { Ok(()) } else { Err(format!("scenario needs a [{name}] table")) };
        match self.scenario {
            ScenarioKind::Triple => {
                needs(self.triple.is_some(), "triple")?;
                needs(self.time.is_some(), "time")?;
            }
            ScenarioKind::RandomTriples => needs(self.time.is_some(), "time")?,
            ScenarioKind::ConvC0 | ScenarioKind::RankOneLp | ScenarioKind::HeatFeedback => needs(self.example.is_some(), "example")?,
            _ => {}
        }
        for c in &self.checks {
            if !["resolvent", "laplace", "norm_bounds"].contains(&c.as_str()) {
                return Err(format!("unknown check {c:?}"));
            }
        }
        Ok(())
    }

    pub fn example_config(&self) -> Result<ExampleConfig, String> {
        let id = match self.scenario {
            ScenarioKind::ConvC0 => ExampleId::ConvC0,
            ScenarioKind::RankOneLp => ExampleId::RankOneLp,
            ScenarioKind::HeatFeedback => ExampleId::HeatFeedback,
            _ => return Err("not an example scenario".into()),
        };
        let mut table = self.example.clone().unwrap_or_default();
        let name = toml::Value::try_from(id).map_err(|e| e.to_string())?;
        table.insert("example_id".into(), name);
        let cfg: ExampleConfig = toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| format!("[example]: {e}"))?;
        if cfg.grid_n < 2 {
            return Err("example.grid_n must be at least 2".into());
        }
        Ok(cfg)
    }
}

pub fn matrix(name: &str, rows: &Rows) -> Result<DMatrix<f64>, String> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if r == 0 || c == 0 || rows.iter().any(|row| row.len() != c) {
        return Err(format!("{name} must be a non-empty list of equal-length rows"));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

pub fn theorem(t: &TheoremName, p: f64) -> TheoremKind {
    match t {
        TheoremName::Am => TheoremKind::AM,
        TheoremName::Al => TheoremKind::AL,
        TheoremName::Rn => TheoremKind::RN { p },
        TheoremName::Dom => TheoremKind::DOM,
    }
}
