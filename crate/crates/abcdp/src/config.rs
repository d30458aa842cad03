//! Experiment configuration.
//!
//! A single JSON document, versioned by the `version` field. Relative paths
//! are resolved against the directory holding the config file. Overrides of
//! the form `key.path=value` are applied to the JSON tree before it is
//! deserialized; `value` is parsed as JSON and falls back to a string.

use std::fmt;
use std::path::{Path, PathBuf};

use abcdp_core::distance::{DistanceSpec, KernelSpec, Summary, MEDIAN_HEURISTIC_CAP};
use abcdp_core::simulators::{Model, PriorSpec, SimulatorSpec};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;

use crate::error::{HarnessError, Result};

pub const CONFIG_VERSION: u32 = 1;

/// A privacy loss that may be infinite. Serialized as a number or `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Epsilon(pub f64);

impl Epsilon {
    pub const INFINITE: Epsilon = Epsilon(f64::INFINITY);

    pub fn is_infinite(self) -> bool {
        self.0.is_infinite()
    }
}

impl fmt::Display for Epsilon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_infinite() {
            f.write_str("inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl Serialize for Epsilon {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Epsilon {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Epsilon(v)),
            Raw::Text(s) if matches!(s.as_str(), "inf" | "infinity" | "Infinity" | "∞") => Ok(Epsilon::INFINITE),
            Raw::Text(s) => Err(serde::de::Error::custom(format!("expected a number or \"inf\", got {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    DpRun,
    PairedBenchmark,
    FlipGrid,
    BoundsReport,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::DpRun => "dp_run",
            Mode::PairedBenchmark => "paired_benchmark",
            Mode::FlipGrid => "flip_grid",
            Mode::BoundsReport => "bounds_report",
        }
    }
}

/// Simulator section; the prior and pseudo-dataset size default per model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulatorConfig {
    pub model: Model,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior: Option<PriorSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_pseudo: Option<usize>,
}

impl SimulatorConfig {
    pub fn to_spec(&self, observed_size: usize) -> SimulatorSpec {
        let prior = self.prior.clone().unwrap_or_else(|| match &self.model {
            Model::UniformMixture => PriorSpec::uniform_mixture(),
            Model::PolynomialOutbreak { .. } => PriorSpec::polynomial_outbreak(),
            Model::BirthDeath { .. } => PriorSpec::birth_death(),
        });
        let n_pseudo = match &self.model {
            Model::PolynomialOutbreak { t_grid } => t_grid.len(),
            _ => self.n_pseudo.unwrap_or(observed_size),
        };
        SimulatorSpec { model: self.model.clone(), prior, n_pseudo }
    }
}

/// Where `Y*` comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ObservedSource {
    /// Simulated from known parameters, once per replication.
    Synthetic { theta_star: Vec<f64>, n: usize },
    /// Loaded from a headerless CSV, one point per row. `theta_star`, when
    /// known, enables accuracy metrics.
    Csv {
        path: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        theta_star: Option<Vec<f64>>,
    },
}

impl ObservedSource {
    pub fn theta_star(&self) -> Option<&[f64]> {
        match self {
            ObservedSource::Synthetic { theta_star, .. } => Some(theta_star),
            ObservedSource::Csv { theta_star, .. } => theta_star.as_deref(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BandwidthChoice {
    Fixed(f64),
    Rule(BandwidthRule),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthRule {
    /// Median pairwise distance of the pseudo-data.
    Median,
}

fn default_median_cap() -> usize {
    MEDIAN_HEURISTIC_CAP
}

fn is_default_cap(cap: &usize) -> bool {
    *cap == MEDIAN_HEURISTIC_CAP
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DistanceConfig {
    Mmd {
        bandwidth: BandwidthChoice,
        #[serde(default = "default_median_cap", skip_serializing_if = "is_default_cap")]
        median_cap: usize,
    },
    WeightedL2 {
        summary: Summary,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        weights: Option<Vec<f64>>,
        clip: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        declared_sensitivity: Option<f64>,
    },
}

impl DistanceConfig {
    /// The distance spec given a resolved bandwidth and summary length.
    pub fn to_spec(&self, bandwidth: Option<f64>, summary_len: usize) -> Result<DistanceSpec> {
        match self {
            DistanceConfig::Mmd { bandwidth: choice, .. } => {
                let l = match (choice, bandwidth) {
                    (BandwidthChoice::Fixed(l), _) => *l,
                    (BandwidthChoice::Rule(_), Some(l)) => l,
                    (BandwidthChoice::Rule(_), None) => {
                        return Err(HarnessError::validation("distance.bandwidth", "median bandwidth not resolved"))
                    }
                };
                Ok(DistanceSpec::Mmd {
                    kernel: KernelSpec::gaussian(l).map_err(|e| HarnessError::validation("distance.bandwidth", e))?,
                })
            }
            DistanceConfig::WeightedL2 { summary, weights, clip, declared_sensitivity } => Ok(DistanceSpec::WeightedL2 {
                summary: *summary,
                weights: weights.clone().unwrap_or_else(|| vec![1.0; summary_len]),
                clip: *clip,
                declared_sensitivity: *declared_sensitivity,
            }),
        }
    }

    pub fn needs_median(&self) -> Option<usize> {
        match self {
            DistanceConfig::Mmd { bandwidth: BandwidthChoice::Rule(BandwidthRule::Median), median_cap } => {
                Some(*median_cap)
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetConfig {
    pub epsilon_total: Epsilon,
    pub c: usize,
    pub resample: bool,
}

/// Settings swept by the paired benchmark; empty lists fall back to the base
/// values of the config.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub epsilon_abc: Vec<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub epsilon_total: Vec<Epsilon>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub c: Vec<usize>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub resample: Vec<bool>,
}

/// Flip-probability grid. Defaults reproduce the usual figure axes:
/// 100 uniform distances on [0, 1], `ε_abc = 0.2`, `N, c ∈ {10, 100, 1000}`
/// and 31 log-spaced privacy levels on [0.1, 100].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlipGridConfig {
    pub rho_samples: usize,
    pub epsilon_abc: f64,
    pub n: Vec<usize>,
    pub c: Vec<usize>,
    pub epsilon_total_min: f64,
    pub epsilon_total_max: f64,
    pub epsilon_total_points: usize,
    pub kernel_bound: f64,
}

impl Default for FlipGridConfig {
    fn default() -> Self {
        FlipGridConfig {
            rho_samples: 100,
            epsilon_abc: 0.2,
            n: vec![10, 100, 1000],
            c: vec![10, 100, 1000],
            epsilon_total_min: 0.1,
            epsilon_total_max: 100.0,
            epsilon_total_points: 31,
            kernel_bound: 1.0,
        }
    }
}

fn one() -> usize {
    1
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub mode: Mode,
    pub simulator: SimulatorConfig,
    pub observed: ObservedSource,
    pub distance: DistanceConfig,
    pub epsilon_abc: f64,
    pub budget: BudgetConfig,
    /// `T`, the number of proposals per replication.
    pub proposals: usize,
    /// Load this persisted proposal set instead of simulating one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proposals_dir: Option<PathBuf>,
    /// Persist each replication's proposal set under the output directory.
    #[serde(default, skip_serializing_if = "is_false")]
    pub save_proposals: bool,
    #[serde(default = "one")]
    pub replications: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub flip_grid: FlipGridConfig,
    /// Error levels `a` for tail bounds; quartile-informed levels when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_levels: Option<Vec<f64>>,
}

/// One `(ε_abc, c, ε_total, RESAMPLE)` combination.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Setting {
    pub epsilon_abc: f64,
    pub c: usize,
    pub epsilon_total: Epsilon,
    pub resample: bool,
}

impl ExperimentConfig {
    /// Reads, overrides, parses and validates a config file.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        // An unreadable config is the caller's mistake, not a runtime failure.
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::validation("config", format!("{}: {e}", path.display())))?;
        let mut tree: Value = serde_json::from_str(&text)
            .map_err(|e| HarnessError::validation("config", format!("{}: {e}", path.display())))?;
        for ov in overrides {
            apply_override(&mut tree, ov)?;
        }
        let mut config: ExperimentConfig = serde_json::from_value(tree)
            .map_err(|e| HarnessError::validation("config", format!("{}: {e}", path.display())))?;
        if let Some(dir) = path.parent() {
            config.resolve_paths(dir);
        }
        config.validate()?;
        Ok(config)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| HarnessError::validation("config", e))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let ObservedSource::Csv { path, .. } = &mut self.observed {
            fix(path);
        }
        if let Some(p) = &mut self.proposals_dir {
            fix(p);
        }
    }

    pub fn validate(&self) -> Result<()> {
        fn bad(field: impl Into<String>, message: impl ToString) -> HarnessError {
            HarnessError::validation(field, message)
        }
        if self.version != CONFIG_VERSION {
            return Err(bad("version", format!("unsupported version {}, expected {CONFIG_VERSION}", self.version)));
        }
        if self.replications == 0 {
            return Err(bad("replications", "must be at least 1"));
        }
        if self.proposals == 0 && self.proposals_dir.is_none() {
            return Err(bad("proposals", "must be at least 1"));
        }
        if !(self.epsilon_abc.is_finite() && self.epsilon_abc >= 0.0) {
            return Err(bad("epsilon_abc", "must be finite and non-negative"));
        }
        check_budget("budget", self.budget.epsilon_total, self.budget.c)?;
        for (i, e) in self.sweep.epsilon_total.iter().enumerate() {
            check_budget(&format!("sweep.epsilon_total[{i}]"), *e, 1)?;
        }
        for (i, c) in self.sweep.c.iter().enumerate() {
            if *c == 0 {
                return Err(bad(format!("sweep.c[{i}]"), "must be at least 1"));
            }
        }
        for (i, e) in self.sweep.epsilon_abc.iter().enumerate() {
            if !(e.is_finite() && *e >= 0.0) {
                return Err(bad(format!("sweep.epsilon_abc[{i}]"), "must be finite and non-negative"));
            }
        }
        let observed_n = match &self.observed {
            ObservedSource::Synthetic { theta_star, n } => {
                if *n == 0 {
                    return Err(bad("observed.synthetic.n", "must be at least 1"));
                }
                self.check_theta_star("observed.synthetic.theta_star", theta_star)?;
                *n
            }
            ObservedSource::Csv { path, theta_star } => {
                if !path.is_file() {
                    return Err(bad("observed.csv.path", format!("{} does not exist", path.display())));
                }
                if let Some(t) = theta_star {
                    self.check_theta_star("observed.csv.theta_star", t)?;
                }
                1
            }
        };
        if let Some(dir) = &self.proposals_dir {
            if !dir.join(crate::io::PROPOSAL_INDEX).is_file() {
                return Err(bad("proposals_dir", format!("{} has no proposal index", dir.display())));
            }
        }
        let spec = self.simulator.to_spec(observed_n);
        spec.validate().map_err(|e| bad("simulator", e))?;
        match &self.distance {
            DistanceConfig::Mmd { bandwidth: BandwidthChoice::Fixed(l), .. } if !(l.is_finite() && *l > 0.0) => {
                return Err(bad("distance.bandwidth", "must be positive"));
            }
            DistanceConfig::Mmd { median_cap, .. } if *median_cap < 2 => {
                return Err(bad("distance.median_cap", "must be at least 2"));
            }
            DistanceConfig::WeightedL2 { summary, clip, declared_sensitivity, weights } => {
                if summary.validate().is_err() {
                    return Err(bad("distance.summary.cases", "must be positive"));
                }
                if !(clip.is_finite() && *clip > 0.0) {
                    return Err(bad("distance.clip", "must be positive"));
                }
                if declared_sensitivity.is_some_and(|s| !(s.is_finite() && s > 0.0)) {
                    return Err(bad("distance.declared_sensitivity", "must be positive"));
                }
                if weights.as_ref().is_some_and(|w| w.iter().any(|x| !(x.is_finite() && *x >= 0.0))) {
                    return Err(bad("distance.weights", "must be finite and non-negative"));
                }
            }
            _ => {}
        }
        if let Some(levels) = &self.tail_levels {
            if levels.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
                return Err(bad("tail_levels", "levels must be positive"));
            }
        }
        let g = &self.flip_grid;
        if g.rho_samples == 0 || g.n.is_empty() || g.c.is_empty() || g.epsilon_total_points == 0 {
            return Err(bad("flip_grid", "axes must be nonempty"));
        }
        if g.n.contains(&0) || g.c.contains(&0) {
            return Err(bad("flip_grid", "N and c must be positive"));
        }
        if !(g.epsilon_total_min > 0.0 && g.epsilon_total_min <= g.epsilon_total_max) {
            return Err(bad("flip_grid.epsilon_total_min", "need 0 < min ≤ max"));
        }
        if !(g.kernel_bound > 0.0) {
            return Err(bad("flip_grid.kernel_bound", "must be positive"));
        }
        Ok(())
    }

    fn check_theta_star(&self, field: &str, theta: &[f64]) -> Result<()> {
        let expected = match &self.simulator.model {
            Model::UniformMixture => {
                let sum: f64 = theta.iter().sum();
                if theta.iter().any(|&w| w < -1e-9) || (sum - 1.0).abs() > 1e-9 {
                    return Err(HarnessError::validation(field, "mixture weights must lie on the simplex"));
                }
                None
            }
            _ => Some(4),
        };
        if let Some(d) = expected {
            if theta.len() != d {
                return Err(HarnessError::validation(field, format!("expected {d} parameters, got {}", theta.len())));
            }
        }
        Ok(())
    }

    /// Every combination of the sweep axes, ordered by `ε_abc`, `c`,
    /// `RESAMPLE`, then `ε_total`.
    pub fn settings(&self) -> Vec<Setting> {
        let or = |v: &Vec<f64>, d: f64| if v.is_empty() { vec![d] } else { v.clone() };
        let abc = or(&self.sweep.epsilon_abc, self.epsilon_abc);
        let cs = if self.sweep.c.is_empty() { vec![self.budget.c] } else { self.sweep.c.clone() };
        let eps = if self.sweep.epsilon_total.is_empty() {
            vec![self.budget.epsilon_total]
        } else {
            self.sweep.epsilon_total.clone()
        };
        let res = if self.sweep.resample.is_empty() { vec![self.budget.resample] } else { self.sweep.resample.clone() };
        let mut out = Vec::new();
        for &epsilon_abc in &abc {
            for &c in &cs {
                for &resample in &res {
                    for &epsilon_total in &eps {
                        out.push(Setting { epsilon_abc, c, epsilon_total, resample });
                    }
                }
            }
        }
        out
    }
}

fn check_budget(field: &str, eps: Epsilon, c: usize) -> Result<()> {
    if eps.0.is_nan() || eps.0 <= 0.0 {
        return Err(HarnessError::validation(format!("{field}.epsilon_total"), "must be positive or \"inf\""));
    }
    if c == 0 {
        return Err(HarnessError::validation(format!("{field}.c"), "must be at least 1"));
    }
    Ok(())
}

/// Applies one `a.b.c=value` override to a JSON tree, creating objects along
/// the path as needed.
pub fn apply_override(tree: &mut Value, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| HarnessError::Usage(format!("override {assignment:?} is not key=value")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_owned()));
    let mut node = tree;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if part.is_empty() {
            return Err(HarnessError::Usage(format!("override key {key:?} has an empty segment")));
        }
        if !node.is_object() {
            return Err(HarnessError::validation(parts[..i].join("."), "cannot override inside a non-object"));
        }
        let map = node.as_object_mut().expect("checked object");
        if i + 1 == parts.len() {
            map.insert((*part).to_owned(), value);
            return Ok(());
        }
        node = map.entry((*part).to_owned()).or_insert_with(|| Value::Object(Default::default()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const TOY: &str = r#"{
        "version": 1,
        "mode": "paired_benchmark",
        "simulator": { "model": { "name": "uniform_mixture" }, "n_pseudo": 20 },
        "observed": { "synthetic": { "theta_star": [0.25, 0.04, 0.33, 0.04, 0.34], "n": 200 } },
        "distance": { "kind": "mmd", "bandwidth": "median" },
        "epsilon_abc": 0.2,
        "budget": { "epsilon_total": "inf", "c": 10, "resample": true },
        "proposals": 100,
        "sweep": { "epsilon_total": [0.5, 1, "inf"] }
    }"#;

    #[test]
    fn parses_and_round_trips() {
        let cfg = ExperimentConfig::from_json(TOY).unwrap();
        assert!(cfg.budget.epsilon_total.is_infinite());
        assert_eq!(cfg.replications, 1);
        assert_eq!(cfg.distance.needs_median(), Some(MEDIAN_HEURISTIC_CAP));
        let echo = cfg.to_json();
        assert_eq!(ExperimentConfig::from_json(&echo).unwrap(), cfg);
        assert_eq!(cfg.settings().len(), 3);
    }

    #[test]
    fn overrides_apply_before_parsing() {
        let mut tree: Value = serde_json::from_str(TOY).unwrap();
        apply_override(&mut tree, "budget.c=25").unwrap();
        apply_override(&mut tree, "budget.epsilon_total=inf").unwrap();
        apply_override(&mut tree, "master_seed=99").unwrap();
        let cfg: ExperimentConfig = serde_json::from_value(tree).unwrap();
        assert_eq!(cfg.budget.c, 25);
        assert_eq!(cfg.master_seed, 99);
        assert!(cfg.budget.epsilon_total.is_infinite());
        let mut tree: Value = serde_json::from_str(TOY).unwrap();
        assert!(apply_override(&mut tree, "no_equals").is_err());
        assert!(apply_override(&mut tree, "epsilon_abc.x=1").is_err());
    }

    #[test]
    fn validation_names_the_field() {
        let field_of = |json: &str| match ExperimentConfig::from_json(json) {
            Err(HarnessError::Validation { field, .. }) => field,
            other => panic!("expected validation error, got {other:?}"),
        };
        assert_eq!(field_of(&TOY.replace("\"c\": 10", "\"c\": 0")), "budget.c");
        assert_eq!(field_of(&TOY.replace("\"epsilon_total\": \"inf\"", "\"epsilon_total\": -1")), "budget.epsilon_total");
        assert_eq!(field_of(&TOY.replace("0.34]", "0.5]")), "observed.synthetic.theta_star");
        assert_eq!(field_of(&TOY.replace("\"version\": 1", "\"version\": 7")), "version");
        assert_eq!(field_of(&TOY.replace("\"bandwidth\": \"median\"", "\"bandwidth\": \"mean\"")), "config");
    }

    #[test]
    fn missing_observed_file_is_rejected() {
        let json = TOY.replace(
            r#"{ "synthetic": { "theta_star": [0.25, 0.04, 0.33, 0.04, 0.34], "n": 200 } }"#,
            r#"{ "csv": { "path": "/definitely/not/here.csv" } }"#,
        );
        match ExperimentConfig::from_json(&json) {
            Err(HarnessError::Validation { field, .. }) => assert_eq!(field, "observed.csv.path"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn epsilon_serde() {
        let e: Epsilon = serde_json::from_str("\"inf\"").unwrap();
        assert!(e.is_infinite());
        assert_eq!(serde_json::to_string(&e).unwrap(), "\"inf\"");
        assert_eq!(serde_json::to_string(&Epsilon(0.5)).unwrap(), "0.5");
        assert!(serde_json::from_str::<Epsilon>("\"lots\"").is_err());
    }
}
