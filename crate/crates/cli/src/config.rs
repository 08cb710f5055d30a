//! Declarative scenario configuration (TOML).

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid `{key}`: {reason}")]
    Invalid { key: &'static str, reason: String },
}

fn invalid(key: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { key, reason: reason.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioId {
    #[serde(rename = "oscillator-1d")]
    Oscillator1d,
    LinearNd,
    #[serde(rename = "case1-2d")]
    Case12d,
    #[serde(rename = "case1-2d-b2zero")]
    Case12dB2zero,
    #[serde(rename = "case2-2d")]
    Case22d,
    NonlinearFracosc,
    HamiltonLinear,
    Custom,
}

impl ScenarioId {
    pub fn name(self) -> &'static str {
        match self {
            ScenarioId::Oscillator1d => "oscillator-1d",
            ScenarioId::LinearNd => "linear-nd",
            ScenarioId::Case12d => "case1-2d",
            ScenarioId::Case12dB2zero => "case1-2d-b2zero",
            ScenarioId::Case22d => "case2-2d",
            ScenarioId::NonlinearFracosc => "nonlinear-fracosc",
            ScenarioId::HamiltonLinear => "hamilton-linear",
            ScenarioId::Custom => "custom",
        }
    }
}

impl fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeName {
    Verlet,
    Euler,
    Abm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PathName {
    #[default]
    Shifted,
    Direct,
}

/// How `oscillator-1d` produces its trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OscillatorMethod {
    /// Integrate the one-dimensional constraint `q̇ + D^{α-1} q = 0`.
    #[default]
    Constraint,
    /// Solve the oscillator equation itself with the predictor-corrector.
    Direct,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FormName {
    #[default]
    Reduced,
    PreReduction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PotentialConfig {
    Zero,
    /// `½ Σ k_i q_i²`
    Quadratic { k: Vec<f64> },
    /// `Σ (½ k_i q_i² + ¼ c_i q_i⁴)`
    Quartic { k: Vec<f64>, c: Vec<f64> },
}

/// Restoring force `K(x)` of the nonlinear oscillator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ForceConfig {
    /// `K = k x`
    Linear { k: f64 },
    /// `K = k x + c x³`
    Cubic { k: f64, c: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub h: f64,
    pub t_end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub scheme: SchemeName,
    #[serde(default)]
    pub path: PathName,
    /// Memory window in steps; absent means full memory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<usize>,
    pub tolerance: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { scheme: SchemeName::Verlet, path: PathName::Shifted, window: None, tolerance: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<f64>>,
    /// Row-major `n × n` matrix of the Hamilton field `A = a + B D^α q`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_matrix: Option<Vec<f64>>,
    /// Quadratic part `½ Σ c_k q_k²` of a custom constraint.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential: Option<PotentialConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub force: Option<ForceConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub form: Option<FormName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<OscillatorMethod>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    pub q: Vec<f64>,
    /// Velocities, or momenta for `hamilton-linear`.
    pub qdot: Vec<f64>,
    #[serde(default)]
    pub project: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    #[serde(default = "default_stem")]
    pub stem: String,
    /// Write the exact-vs-numerical table when the scenario has an oracle.
    #[serde(default = "yes")]
    pub compare: bool,
    /// Largest accepted `|numerical - exact|`.
    #[serde(default = "default_compare_tol")]
    pub compare_tolerance: f64,
}

fn default_stem() -> String {
    "trajectory".into()
}

fn yes() -> bool {
    true
}

fn default_compare_tol() -> f64 {
    1e-2
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: "out".into(), stem: default_stem(), compare: true, compare_tolerance: default_compare_tol() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub grid: GridConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub params: Params,
    pub initial: InitialConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config always serializes")
    }

    pub fn dim(&self) -> usize {
        self.initial.q.len()
    }

    pub fn alpha(&self) -> Result<f64, ConfigError> {
        self.params.alpha.ok_or_else(|| invalid("params.alpha", "required for this scenario"))
    }

    pub fn vector(&self, key: &'static str, v: &Option<Vec<f64>>) -> Result<Vec<f64>, ConfigError> {
        let v = v.clone().ok_or_else(|| invalid(key, "required for this scenario"))?;
        if v.len() != self.dim() {
            return Err(invalid(key, format!("expected {} entries, got {}", self.dim(), v.len())));
        }
        Ok(v)
    }

    /// Checks every documented domain; the error names the offending key.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let g = self.grid;
        if !(g.h > 0.0 && g.h.is_finite()) {
            return Err(invalid("grid.h", format!("must be positive, got {}", g.h)));
        }
        if !(g.t_end > 0.0 && g.t_end.is_finite()) {
            return Err(invalid("grid.t_end", format!("must be positive, got {}", g.t_end)));
        }
        if g.h > g.t_end {
            return Err(invalid("grid.h", "exceeds grid.t_end"));
        }
        if !(self.solver.tolerance > 0.0) {
            return Err(invalid("solver.tolerance", "must be positive"));
        }
        if self.solver.window == Some(0) {
            return Err(invalid("solver.window", "must be at least 1"));
        }
        if !(self.output.compare_tolerance > 0.0) {
            return Err(invalid("output.compare_tolerance", "must be positive"));
        }
        let n = self.dim();
        if n == 0 {
            return Err(invalid("initial.q", "must not be empty"));
        }
        if self.initial.qdot.len() != n {
            return Err(invalid("initial.qdot", format!("expected {n} entries")));
        }
        if self.initial.q.iter().chain(&self.initial.qdot).any(|x| !x.is_finite()) {
            return Err(invalid("initial", "values must be finite"));
        }
        if let Some(a) = self.params.alpha {
            if !(a > 0.0 && a.is_finite()) || a.fract() == 0.0 {
                return Err(invalid("params.alpha", format!("must be positive and non-integer, got {a}")));
            }
        }
        if let Some(p) = &self.params.potential {
            let (k, c) = match p {
                PotentialConfig::Zero => (None, None),
                PotentialConfig::Quadratic { k } => (Some(k), None),
                PotentialConfig::Quartic { k, c } => (Some(k), Some(c)),
            };
            if k.is_some_and(|k| k.len() != n) || c.is_some_and(|c| c.len() != n) {
                return Err(invalid("params.potential", format!("coefficients must have {n} entries")));
            }
        }
        if self.solver.scheme == SchemeName::Abm && self.scenario != ScenarioId::Oscillator1d {
            return Err(invalid("solver.scheme", "abm is only available for oscillator-1d"));
        }
        self.validate_scenario()
    }

    fn validate_scenario(&self) -> Result<(), ConfigError> {
        let p = &self.params;
        let n = self.dim();
        let fixed_dim = |want: usize| {
            if n != want {
                Err(invalid("initial.q", format!("{} needs {want} coordinates", self.scenario)))
            } else {
                Ok(())
            }
        };
        let alpha_in = |lo: f64, hi: f64| {
            let a = self.alpha()?;
            if a <= lo || a >= hi {
                return Err(invalid("params.alpha", format!("must lie in ({lo}, {hi}) for {}", self.scenario)));
            }
            Ok(())
        };
        match self.scenario {
            ScenarioId::Oscillator1d => {
                fixed_dim(1)?;
                alpha_in(1.0, 3.0)?;
                if !p.omega2.is_some_and(|w| w.is_finite()) {
                    return Err(invalid("params.omega2", "required"));
                }
                let direct = p.method == Some(OscillatorMethod::Direct);
                if direct != (self.solver.scheme == SchemeName::Abm) {
                    return Err(invalid("solver.scheme", "use abm exactly when params.method = \"direct\""));
                }
            }
            ScenarioId::LinearNd | ScenarioId::Custom => {
                if self.scenario == ScenarioId::Custom && p.a.is_none() {
                    return Ok(());
                }
                alpha_in(0.0, 2.0)?;
                self.vector("params.a", &p.a)?;
                self.vector("params.b", &p.b)?;
                if let Some(c) = &p.c {
                    if c.len() != n {
                        return Err(invalid("params.c", format!("expected {n} entries")));
                    }
                }
            }
            ScenarioId::Case12d | ScenarioId::Case12dB2zero => {
                fixed_dim(2)?;
                alpha_in(0.0, 2.0)?;
                let a = self.vector("params.a", &p.a)?;
                let b = self.vector("params.b", &p.b)?;
                if a[0] != 0.0 {
                    return Err(invalid("params.a", "first entry must be 0"));
                }
                if self.scenario == ScenarioId::Case12dB2zero && b[1] != 0.0 {
                    return Err(invalid("params.b", "second entry must be 0"));
                }
            }
            ScenarioId::Case22d => {
                fixed_dim(2)?;
                alpha_in(0.0, 2.0)?;
                let a = self.vector("params.a", &p.a)?;
                let b = self.vector("params.b", &p.b)?;
                if a[0] != a[1] || a[0] == 0.0 {
                    return Err(invalid("params.a", "entries must be equal and nonzero"));
                }
                if b[0] != 0.0 {
                    return Err(invalid("params.b", "first entry must be 0"));
                }
            }
            ScenarioId::NonlinearFracosc => {
                fixed_dim(1)?;
                alpha_in(1.0, 2.0)?;
                if !p.g.is_some_and(|g| g != 0.0 && g.is_finite()) {
                    return Err(invalid("params.g", "required and nonzero"));
                }
                if p.force.is_none() {
                    return Err(invalid("params.force", "required"));
                }
            }
            ScenarioId::HamiltonLinear => {
                alpha_in(0.0, 2.0)?;
                self.vector("params.a", &p.a)?;
                if let Some(m) = &p.b_matrix {
                    if m.len() != n * n {
                        return Err(invalid("params.b_matrix", format!("expected {} entries", n * n)));
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const LINEAR: &str = r#"
scenario = "linear-nd"

[grid]
h = 0.01
t_end = 1.0

[params]
alpha = 0.5
a = [1.0, 0.0]
b = [0.5, 0.5]
potential = { kind = "quadratic", k = [1.0, 2.0] }

[initial]
q = [1.0, 0.0]
qdot = [0.0, 0.3]
"#;

    #[test]
    fn parses_with_defaults() {
        let c = ScenarioConfig::parse(LINEAR).unwrap();
        assert_eq!(c.scenario, ScenarioId::LinearNd);
        assert_eq!(c.solver, SolverConfig::default());
        assert_eq!(c.output.stem, "trajectory");
    }

    #[test]
    fn errors_name_the_key() {
        let bad = LINEAR.replace("h = 0.01", "h = -0.01");
        let e = ScenarioConfig::parse(&bad).unwrap_err().to_string();
        assert!(e.contains("grid.h"), "{e}");
        let bad = LINEAR.replace("b = [0.5, 0.5]", "b = [0.5]");
        assert!(ScenarioConfig::parse(&bad).unwrap_err().to_string().contains("params.b"));
        let bad = LINEAR.replace("[initial]", "[initial]\nspeed = 3");
        assert!(ScenarioConfig::parse(&bad).unwrap_err().to_string().contains("speed"));
    }

    #[test]
    fn unknown_scenario_rejected() {
        let bad = LINEAR.replace("linear-nd", "linear-3d");
        assert!(matches!(ScenarioConfig::parse(&bad), Err(ConfigError::Parse(_))));
    }

    #[test]
    fn round_trip() {
        let c = ScenarioConfig::parse(LINEAR).unwrap();
        assert_eq!(ScenarioConfig::parse(&c.to_toml()).unwrap(), c);
    }
}
