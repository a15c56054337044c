//! Versioned TOML experiment configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrators::{Scheme, StepOptions};
use crate::models::{build_model, HamiltonianModel, ModelSpec, ParameterSet, WaveModel};
use crate::psd::{ComplexOrder, GreedyIndicator, Method};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub config_version: u32,
    #[serde(default)]
    pub seed: u64,
    pub output_dir: PathBuf,
    pub model: ModelSpec,
    pub parameters: ParameterConfig,
    pub time: TimeConfig,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub basis: BasisConfig,
    #[serde(default)]
    pub rom: RomConfig,
    #[serde(default)]
    pub dlr: DlrConfig,
}

/// Either an explicit list of samples or a tensor grid over a box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParameterConfig {
    #[serde(default)]
    pub samples: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub grid: Option<GridConfig>,
}

/// `counts[i]` equispaced points in `[lower[i], upper[i]]`, first coordinate slowest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub counts: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    #[serde(default)]
    pub t0: f64,
    pub t_end: f64,
    /// Output spacing.
    pub dt: f64,
    /// Largest internal step; defaults to the CFL step of the fastest sample.
    #[serde(default)]
    pub max_step: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorConfig {
    #[serde(default)]
    pub scheme: Scheme,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

fn default_tol() -> f64 {
    1e-12
}

fn default_max_iter() -> usize {
    50
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            scheme: Scheme::Midpoint,
            tol: default_tol(),
            max_iter: default_max_iter(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisConfig {
    #[serde(default = "default_method")]
    pub method: String,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default)]
    pub complex_order: ComplexOrder,
    #[serde(default = "default_indicator")]
    pub greedy_indicator: GreedyIndicator,
    /// Indicator value that stops the greedy loop; positive.
    #[serde(default = "default_greedy_tol")]
    pub greedy_tol: f64,
}

fn default_method() -> String {
    "complexsvd".into()
}

fn default_k() -> usize {
    10
}

fn default_greedy_tol() -> f64 {
    1e-12
}

fn default_indicator() -> GreedyIndicator {
    GreedyIndicator::Hamiltonian
}

impl Default for BasisConfig {
    fn default() -> Self {
        BasisConfig {
            method: default_method(),
            k: default_k(),
            complex_order: ComplexOrder::Pq,
            greedy_indicator: default_indicator(),
            greedy_tol: default_greedy_tol(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RomConfig {
    #[serde(default = "default_true")]
    pub require_vertical: bool,
    /// Online samples; defaults to the training samples.
    #[serde(default)]
    pub samples: Option<Vec<Vec<f64>>>,
}

fn default_true() -> bool {
    true
}

impl Default for RomConfig {
    fn default() -> Self {
        RomConfig {
            require_vertical: true,
            samples: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DlrConfig {
    #[serde(default = "default_dlr_k")]
    pub k: usize,
    /// Largest internal step; defaults to 1/16 of the CFL step.
    #[serde(default)]
    pub max_step: Option<f64>,
}

fn default_dlr_k() -> usize {
    4
}

impl Default for DlrConfig {
    fn default() -> Self {
        DlrConfig {
            k: default_dlr_k(),
            max_step: None,
        }
    }
}

/// Fraction of the CFL step used by the explicit basis update.
pub const DLR_STEP_FRACTION: f64 = 1.0 / 16.0;

fn invalid(field: &str, message: impl Into<String>) -> Error {
    Error::config(field, message)
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::config("toml", e.message().trim().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.config_version != CONFIG_VERSION {
            return Err(invalid(
                "config_version",
                format!("unsupported version {}, expected {CONFIG_VERSION}", self.config_version),
            ));
        }
        let model = self.build_model()?;
        let samples = self.samples()?;
        for mu in &samples {
            model
                .check_parameter(mu)
                .map_err(|e| invalid("parameters", e.to_string()))?;
        }
        if let Some(online) = &self.rom.samples {
            if online.is_empty() {
                return Err(invalid("rom.samples", "empty list"));
            }
            for mu in online {
                model
                    .check_parameter(mu)
                    .map_err(|e| invalid("rom.samples", e.to_string()))?;
            }
        }
        self.times()?;
        if let Some(h) = self.time.max_step {
            if !(h > 0.0 && h.is_finite()) {
                return Err(invalid("time.max_step", "must be positive"));
            }
        }
        if !(self.integrator.tol > 0.0) || self.integrator.max_iter == 0 {
            return Err(invalid("integrator", "tol and max_iter must be positive"));
        }
        Method::parse(&self.basis.method).map_err(|_| {
            invalid(
                "basis.method",
                format!("unknown method `{}`", self.basis.method),
            )
        })?;
        check_k("basis.k", self.basis.k, self.model.n)?;
        if !(self.basis.greedy_tol > 0.0 && self.basis.greedy_tol.is_finite()) {
            return Err(invalid("basis.greedy_tol", "must be positive"));
        }
        check_k("dlr.k", self.dlr.k, self.model.n)?;
        if let Some(h) = self.dlr.max_step {
            if !(h > 0.0 && h.is_finite()) {
                return Err(invalid("dlr.max_step", "must be positive"));
            }
        }
        Ok(())
    }

    pub fn build_model(&self) -> Result<WaveModel> {
        let mut spec = self.model.clone();
        if spec.structure_seed.is_none() {
            spec.structure_seed = Some(self.seed);
        }
        build_model(&spec).map_err(|e| match e {
            Error::UnknownModel(name) => invalid("model.name", format!("unknown model `{name}`")),
            Error::Config { .. } => e,
            other => invalid("model", other.to_string()),
        })
    }

    /// Training samples in file order.
    pub fn samples(&self) -> Result<Vec<Vec<f64>>> {
        match (&self.parameters.samples, &self.parameters.grid) {
            (Some(_), Some(_)) => Err(invalid("parameters", "give either `samples` or `grid`, not both")),
            (None, None) => Err(invalid("parameters", "missing `samples` or `grid`")),
            (Some(s), None) if s.is_empty() => Err(invalid("parameters.samples", "empty list")),
            (Some(s), None) => Ok(s.clone()),
            (None, Some(g)) => g.points(),
        }
    }

    /// Online samples for the reduced model.
    pub fn online_samples(&self) -> Result<Vec<Vec<f64>>> {
        match &self.rom.samples {
            Some(s) => Ok(s.clone()),
            None => self.samples(),
        }
    }

    /// `t0, t0 + dt, …` up to `t_end`.
    pub fn times(&self) -> Result<Vec<f64>> {
        let TimeConfig { t0, t_end, dt, .. } = self.time;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(invalid("time.dt", format!("must be positive, got {dt}")));
        }
        if !(t_end > t0 && t0.is_finite() && t_end.is_finite()) {
            return Err(invalid("time.t_end", "must exceed time.t0"));
        }
        let steps = ((t_end - t0) / dt).round();
        if steps < 1.0 || steps > 1e8 {
            return Err(invalid("time.dt", format!("{steps} output steps")));
        }
        Ok(ParameterSet::uniform_times(t0, dt, steps as usize + 1))
    }

    pub fn parameter_set(&self) -> Result<ParameterSet> {
        ParameterSet::new(self.samples()?, self.times()?)
    }

    /// Internal step for full and reduced integration.
    pub fn max_step(&self, model: &WaveModel, samples: &[Vec<f64>]) -> f64 {
        self.time.max_step.unwrap_or_else(|| model.cfl_step(max_speed(samples)))
    }

    pub fn step_options(&self, model: &WaveModel, samples: &[Vec<f64>]) -> StepOptions {
        StepOptions {
            tol: self.integrator.tol,
            max_iter: self.integrator.max_iter,
            max_step: Some(self.max_step(model, samples)),
        }
    }

    pub fn dlr_step_options(&self, model: &WaveModel, samples: &[Vec<f64>]) -> StepOptions {
        let h = self
            .dlr
            .max_step
            .unwrap_or_else(|| model.cfl_step(max_speed(samples)) * DLR_STEP_FRACTION);
        StepOptions {
            tol: self.integrator.tol,
            max_iter: self.integrator.max_iter,
            max_step: Some(h),
        }
    }
}

fn max_speed(samples: &[Vec<f64>]) -> f64 {
    samples
        .iter()
        .filter_map(|mu| mu.first())
        .fold(0.0f64, |a, &b| a.max(b.abs()))
}

fn check_k(field: &str, k: usize, n: usize) -> Result<()> {
    if k == 0 || k > n {
        return Err(invalid(field, format!("k = {k} must lie in 1..={n}")));
    }
    Ok(())
}

impl GridConfig {
    pub fn points(&self) -> Result<Vec<Vec<f64>>> {
        let d = self.lower.len();
        if d == 0 || self.upper.len() != d || self.counts.len() != d {
            return Err(invalid("parameters.grid", "lower, upper and counts need equal nonzero length"));
        }
        if self.counts.iter().any(|&c| c == 0) {
            return Err(invalid("parameters.grid.counts", "counts must be positive"));
        }
        let axes: Vec<Vec<f64>> = (0..d)
            .map(|i| {
                let c = self.counts[i];
                (0..c)
                    .map(|j| {
                        if c == 1 {
                            self.lower[i]
                        } else {
                            self.lower[i] + (self.upper[i] - self.lower[i]) * j as f64 / (c - 1) as f64
                        }
                    })
                    .collect()
            })
            .collect();
        let mut points = vec![Vec::new()];
        for axis in &axes {
            points = points
                .into_iter()
                .flat_map(|p| {
                    axis.iter().map(move |&x| {
                        let mut q = p.clone();
                        q.push(x);
                        q
                    })
                })
                .collect();
        }
        Ok(points)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMOKE: &str = r#"
config_version = 1
seed = 7
output_dir = "out"

[model]
name = "linear_wave"
n = 16

[parameters.grid]
lower = [0.5, 0.0]
upper = [1.5, 0.1]
counts = [3, 2]

[time]
t_end = 0.1
dt = 0.01
"#;

    #[test]
    fn parses_with_defaults() {
        let cfg = ExperimentConfig::from_toml(SMOKE).unwrap();
        assert_eq!(cfg.basis.method, "complexsvd");
        assert_eq!(cfg.integrator.scheme, Scheme::Midpoint);
        let s = cfg.samples().unwrap();
        assert_eq!(s.len(), 6);
        assert_eq!(s[1], vec![0.5, 0.1]);
        assert_eq!(s[5], vec![1.5, 0.1]);
        assert_eq!(cfg.times().unwrap().len(), 11);
        let back = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn names_the_field() {
        let bad = SMOKE.replace("linear_wave", "heat");
        match ExperimentConfig::from_toml(&bad) {
            Err(Error::Config { field, .. }) => assert_eq!(field, "model.name"),
            other => panic!("{other:?}"),
        }
        let bad = SMOKE.replace("dt = 0.01", "dt = 0.0");
        assert!(matches!(ExperimentConfig::from_toml(&bad), Err(Error::Config { field, .. }) if field == "time.dt"));
        let bad = SMOKE.replace("config_version = 1", "config_version = 2");
        assert!(matches!(ExperimentConfig::from_toml(&bad), Err(Error::Config { field, .. }) if field == "config_version"));
        let bad = format!("{SMOKE}\n[basis]\nk = 17\n");
        assert!(matches!(ExperimentConfig::from_toml(&bad), Err(Error::Config { field, .. }) if field == "basis.k"));
        let bad = SMOKE.replace("seed = 7", "seed = 7\ncolour = 1");
        assert!(matches!(ExperimentConfig::from_toml(&bad), Err(Error::Config { .. })));
    }
}
