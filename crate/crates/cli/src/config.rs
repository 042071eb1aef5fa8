//! TOML experiment configuration: one section per subcommand, strict keys.

use std::path::Path;

use serde::{Deserialize, Serialize};
use welander::dynamics::{AttractorOptions, SimOptions};
use welander::integrate::Tolerances;
use welander::zone::ZoneConvention;
use welander::ModelParams;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("config {path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub command: String,
    pub model: ModelSection,
    pub numerics: NumericsSection,
    pub simulate: SimulateSection,
    pub equilibria: EquilibriaSection,
    pub orbit: OrbitSection,
    pub curves: CurvesSection,
    pub scan: ScanSection,
    pub drift: DriftSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            command: String::new(),
            model: ModelSection::default(),
            numerics: NumericsSection::default(),
            simulate: SimulateSection::default(),
            equilibria: EquilibriaSection::default(),
            orbit: OrbitSection::default(),
            curves: CurvesSection::default(),
            scan: ScanSection::default(),
            drift: DriftSection::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub mu: f64,
    pub eta: f64,
    pub epsilon: f64,
    pub kappa1: f64,
    pub kappa2: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        let p = ModelParams::default();
        Self {
            mu: p.mu,
            eta: p.eta,
            epsilon: p.epsilon,
            kappa1: p.kappa1,
            kappa2: p.kappa2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NumericsSection {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub convention: ZoneConvention,
    /// Scan worker threads; 0 means available parallelism.
    pub workers: usize,
    pub settle_time: f64,
    pub max_time: f64,
}

impl Default for NumericsSection {
    fn default() -> Self {
        let tol = Tolerances::default();
        let att = AttractorOptions::default();
        Self {
            rel_tol: tol.rel,
            abs_tol: tol.abs,
            convention: ZoneConvention::default(),
            workers: 0,
            settle_time: att.settle_time,
            max_time: att.max_time,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateSection {
    pub t_end: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y0: Option<f64>,
}

impl Default for SimulateSection {
    fn default() -> Self {
        Self {
            t_end: 200.0,
            x0: None,
            y0: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EquilibriaSection {
    pub mu_min: f64,
    pub mu_max: f64,
}

impl Default for EquilibriaSection {
    fn default() -> Self {
        Self { mu_min: -0.05, mu_max: 0.6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OrbitSection {
    /// `"none"`, `"L+"` or `"L-"`.
    pub anchor: String,
    pub samples_per_interval: usize,
}

impl Default for OrbitSection {
    fn default() -> Self {
        Self {
            anchor: "none".into(),
            samples_per_interval: 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CurvesSection {
    pub mu_min: f64,
    pub mu_max: f64,
    pub eta_min: f64,
    pub eta_max: f64,
    pub tangency: bool,
    /// Seed point of the tangency searches.
    pub tangency_mu: f64,
    pub tangency_eta: f64,
    /// Every n-th fold point is probed for a SNIC; 0 disables probing.
    pub snic_stride: usize,
}

impl Default for CurvesSection {
    fn default() -> Self {
        Self {
            mu_min: -0.05,
            mu_max: 0.6,
            eta_min: -1.2,
            eta_max: 0.3,
            tangency: true,
            tangency_mu: 0.2,
            tangency_eta: -0.17,
            snic_stride: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanSection {
    pub mu_min: f64,
    pub mu_max: f64,
    pub eta_min: f64,
    pub eta_max: f64,
    pub n_mu: usize,
    pub n_eta: usize,
}

impl Default for ScanSection {
    fn default() -> Self {
        Self {
            mu_min: 0.0,
            mu_max: 0.4,
            eta_min: -0.9,
            eta_max: 0.0,
            n_mu: 81,
            n_eta: 91,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DriftSection {
    pub mu_start: f64,
    pub mu_end: f64,
    pub rate: f64,
    /// Annotate the ramp with the frozen tangency values.
    pub thresholds: bool,
    pub windows: Vec<[f64; 2]>,
}

impl Default for DriftSection {
    fn default() -> Self {
        Self {
            mu_start: 0.32,
            mu_end: 0.11,
            rate: 0.001,
            thresholds: true,
            windows: vec![[5.0, 25.0], [300.0, 320.0], [950.0, 970.0]],
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str, origin: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: origin.to_owned(),
            message: e.to_string().trim_end().to_owned(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn params(&self) -> ModelParams {
        ModelParams {
            mu: self.model.mu,
            eta: self.model.eta,
            epsilon: self.model.epsilon,
            kappa1: self.model.kappa1,
            kappa2: self.model.kappa2,
        }
    }

    pub fn tolerances(&self) -> Tolerances {
        Tolerances {
            rel: self.numerics.rel_tol,
            abs: self.numerics.abs_tol,
        }
    }

    pub fn sim_options(&self) -> SimOptions {
        SimOptions {
            tol: self.tolerances(),
            convention: self.numerics.convention,
        }
    }

    pub fn attractor_options(&self) -> AttractorOptions {
        AttractorOptions {
            settle_time: self.numerics.settle_time,
            max_time: self.numerics.max_time,
            tol: self.tolerances(),
            convention: self.numerics.convention,
            ..AttractorOptions::default()
        }
    }

    pub fn workers(&self) -> Option<usize> {
        (self.numerics.workers > 0).then_some(self.numerics.workers)
    }

    /// Check ranges and tolerances.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        let n = &self.numerics;
        if Tolerances::new(n.rel_tol, n.abs_tol).is_err() {
            return bad(format!("tolerances must lie in (0, 1e-2], got rel_tol = {}, abs_tol = {}", n.rel_tol, n.abs_tol));
        }
        if !(n.settle_time > 0.0 && n.max_time > n.settle_time) {
            return bad("numerics: need 0 < settle_time < max_time".into());
        }
        let range = |name: &str, lo: f64, hi: f64| {
            if lo < hi {
                Ok(())
            } else {
                Err(ConfigError::Invalid(format!("{name}: empty range [{lo}, {hi}]")))
            }
        };
        range("equilibria.mu", self.equilibria.mu_min, self.equilibria.mu_max)?;
        range("curves.mu", self.curves.mu_min, self.curves.mu_max)?;
        range("curves.eta", self.curves.eta_min, self.curves.eta_max)?;
        range("scan.mu", self.scan.mu_min, self.scan.mu_max)?;
        range("scan.eta", self.scan.eta_min, self.scan.eta_max)?;
        if self.scan.n_mu < 2 || self.scan.n_eta < 2 {
            return bad("scan: n_mu and n_eta must be at least 2".into());
        }
        if !(self.simulate.t_end > 0.0) {
            return bad("simulate.t_end must be positive".into());
        }
        if self.simulate.x0.is_some() != self.simulate.y0.is_some() {
            return bad("simulate: x0 and y0 must be given together".into());
        }
        if !matches!(self.orbit.anchor.as_str(), "none" | "L+" | "L-") {
            return bad(format!("orbit.anchor must be none, L+ or L-, got '{}'", self.orbit.anchor));
        }
        if self.orbit.samples_per_interval == 0 {
            return bad("orbit.samples_per_interval must be positive".into());
        }
        let d = &self.drift;
        if !(d.rate > 0.0) || d.mu_start == d.mu_end {
            return bad("drift: need rate > 0 and mu_start != mu_end".into());
        }
        for w in &d.windows {
            range("drift.windows", w[0], w[1])?;
        }
        self.params().validate().map_err(|e| ConfigError::Invalid(e.to_string()))
    }
}

/// Recover the configuration echoed into an output file header.
pub fn config_from_header(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let block: Vec<&str> = text
        .lines()
        .take_while(|l| l.starts_with('#'))
        .map(|l| l.strip_prefix("# ").unwrap_or(&l[1..]))
        .skip_while(|l| !l.starts_with("command = "))
        .collect();
    ExperimentConfig::parse(&block.join("\n"), "output header")
}
