//! Scenario files: TOML parsing, defaults and validation.

use std::fmt;
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curve::Grid;
use crate::dist::{ArrivalProcess, DistKind, DistParams, ParamValue, RawParams, ServiceDistribution};
use crate::engine::{EngineError, InitialState, Model};
use crate::fluid;
use crate::policy::{IdleSelection, PolicyKind, PolicySpec};
use crate::trace::SamplePlan;

pub const DEFAULT_SAMPLE_INTERVAL: f64 = 1.0;
pub const DEFAULT_TRACKED_SERVERS: usize = 2;
pub const MAX_TRACKED_GROUPS: usize = 512;
pub const DEFAULT_WARMUP_FRACTION: f64 = 0.25;

/// One problem found in a scenario file, tied to the key that caused it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Issue {
    pub key: String,
    pub message: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.key, self.message)
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid configuration:\n{}", .0.iter().map(|i| format!("  {i}")).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<Issue>),
}

impl ConfigError {
    pub fn issues(&self) -> &[Issue] {
        match self {
            ConfigError::Invalid(v) => v,
            _ => &[],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistSection {
    pub kind: String,
    #[serde(default = "yes")]
    pub normalize: bool,
    #[serde(default)]
    pub params: RawParams,
}

fn yes() -> bool {
    true
}

impl Default for DistSection {
    fn default() -> Self {
        DistSection { kind: "exponential".into(), normalize: true, params: RawParams::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrivalSection {
    #[serde(default = "poisson")]
    pub kind: String,
    /// Interarrival shape for renewal arrivals; rescaled to mean `1 / lambda`.
    pub base: Option<DistSection>,
}

fn poisson() -> String {
    "poisson".into()
}

impl Default for ArrivalSection {
    fn default() -> Self {
        ArrivalSection { kind: poisson(), base: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySection {
    pub kind: String,
    pub d: Option<usize>,
    pub idle_selection: Option<String>,
    pub lambda_bar: Option<f64>,
    pub preferred_tag: Option<u16>,
}

impl Default for PolicySection {
    fn default() -> Self {
        PolicySection { kind: "jiq".into(), d: None, idle_selection: None, lambda_bar: None, preferred_tag: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    /// `default`, `uniform`, `geometric` or `explicit`.
    pub kind: String,
    pub max: Option<f64>,
    pub points: Option<usize>,
    pub values: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubsetSection {
    pub tag: u16,
    pub size: usize,
    /// Size of the job each server of the subset holds at time zero.
    pub initial_workload: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default)]
    pub n: Vec<usize>,
    #[serde(default)]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub lambda: Vec<f64>,
}

/// A scenario file as written, before defaults and validation.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub scenario_id: Option<String>,
    pub n: Option<usize>,
    pub lambda: Option<f64>,
    pub horizon: Option<f64>,
    pub warmup: Option<f64>,
    pub sample_interval: Option<f64>,
    pub tracked_servers: Option<usize>,
    pub tracked_groups: Option<usize>,
    pub seed: Option<u64>,
    pub buffer: Option<usize>,
    pub initial_workloads: Option<Vec<f64>>,
    #[serde(default)]
    pub dist: DistSection,
    #[serde(default)]
    pub arrivals: ArrivalSection,
    #[serde(default)]
    pub policy: PolicySection,
    pub grid: Option<GridSection>,
    #[serde(default)]
    pub subsets: Vec<SubsetSection>,
    pub sweep: Option<SweepSection>,
}

impl RawConfig {
    pub fn from_toml(text: &str) -> Result<RawConfig, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<RawConfig, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        RawConfig::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("raw config is serializable")
    }
}

/// Parses `kind` or `kind:key=value,key=value` (list values separated by `/`).
pub fn parse_dist_arg(s: &str) -> Result<DistSection, String> {
    let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
    kind.parse::<DistKind>()?;
    let mut params = RawParams::new();
    for pair in rest.split(',').filter(|p| !p.is_empty()) {
        let (k, v) = pair.split_once('=').ok_or_else(|| format!("expected key=value, got `{pair}`"))?;
        let nums = v
            .split('/')
            .map(|x| x.trim().parse::<f64>().map_err(|e| format!("{k}: {e}")))
            .collect::<Result<Vec<_>, _>>()?;
        let value = if nums.len() == 1 { ParamValue::Number(nums[0]) } else { ParamValue::List(nums) };
        params.insert(k.trim().to_string(), value);
    }
    Ok(DistSection { kind: kind.to_string(), normalize: true, params })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Subset {
    pub tag: u16,
    pub size: usize,
    pub initial_workload: Option<f64>,
}

/// Validated scenario with all defaults applied.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub scenario_id: String,
    pub n: usize,
    pub lambda: f64,
    pub horizon: f64,
    pub warmup: f64,
    pub sample_interval: f64,
    pub tracked_servers: usize,
    pub tracked_groups: usize,
    pub seed: u64,
    pub buffer: Option<usize>,
    pub service: ServiceDistribution,
    pub arrivals: ArrivalProcess,
    pub policy: PolicySpec,
    pub grid: Grid,
    pub subsets: Vec<Subset>,
    pub initial: InitialState,
    pub sweep: Option<SweepSection>,
    /// Non-fatal remarks (exploratory parameter ranges).
    pub warnings: Vec<String>,
    /// The file contents the scenario was built from.
    pub raw: RawConfig,
}

fn dist_from_section(section: &DistSection, key: &str, issues: &mut Vec<Issue>) -> Option<ServiceDistribution> {
    let kind = match section.kind.parse::<DistKind>() {
        Ok(k) => k,
        Err(e) => {
            issues.push(Issue { key: format!("{key}.kind"), message: e });
            return None;
        }
    };
    match DistParams::from_raw(kind, &section.params).and_then(|p| ServiceDistribution::new(p, section.normalize)) {
        Ok(d) => Some(d),
        Err(e) => {
            issues.push(Issue { key: format!("{key}.params"), message: e.to_string() });
            None
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<ScenarioConfig, ConfigError> {
        ScenarioConfig::from_raw(RawConfig::from_toml(text)?)
    }

    pub fn from_file(path: &Path) -> Result<ScenarioConfig, ConfigError> {
        ScenarioConfig::from_raw(RawConfig::from_file(path)?)
    }

    /// Applies defaults and validates, reporting every problem at once.
    pub fn from_raw(raw: RawConfig) -> Result<ScenarioConfig, ConfigError> {
        let mut issues = Vec::new();
        let mut warnings = Vec::new();
        let need = |key: &str, present: bool, issues: &mut Vec<Issue>| {
            if !present {
                issues.push(Issue { key: key.into(), message: "required".into() });
            }
        };
        need("n", raw.n.is_some(), &mut issues);
        need("lambda", raw.lambda.is_some(), &mut issues);
        need("horizon", raw.horizon.is_some(), &mut issues);

        let n = raw.n.unwrap_or(1);
        if raw.n == Some(0) {
            issues.push(Issue { key: "n".into(), message: "must be >= 1".into() });
        }
        let lambda = raw.lambda.unwrap_or(0.0);
        if !(lambda.is_finite() && (0.0..1.0).contains(&lambda)) {
            // Every run is compared against the fluid fixed point, which needs a stable system.
            issues.push(Issue { key: "lambda".into(), message: format!("must lie in [0, 1), got {lambda}") });
        } else if lambda >= 0.5 {
            warnings.push(format!(
                "lambda = {lambda} is outside the range lambda < 1/2 covered by the limit theorem; results are exploratory"
            ));
        }
        let horizon = raw.horizon.unwrap_or(1.0);
        if !(horizon.is_finite() && horizon > 0.0) {
            issues.push(Issue { key: "horizon".into(), message: format!("must be finite and > 0, got {horizon}") });
        }
        let warmup = raw.warmup.unwrap_or(DEFAULT_WARMUP_FRACTION * horizon);
        if !(warmup >= 0.0 && warmup < horizon) {
            issues.push(Issue { key: "warmup".into(), message: format!("must satisfy 0 <= warmup < horizon, got {warmup}") });
        }
        let sample_interval = raw.sample_interval.unwrap_or(DEFAULT_SAMPLE_INTERVAL);
        if !(sample_interval.is_finite() && sample_interval > 0.0) {
            issues.push(Issue { key: "sample_interval".into(), message: "must be > 0".into() });
        }
        let tracked_servers = raw.tracked_servers.unwrap_or(DEFAULT_TRACKED_SERVERS.min(n));
        if tracked_servers > n {
            issues.push(Issue { key: "tracked_servers".into(), message: format!("{tracked_servers} exceeds n = {n}") });
        }
        let max_groups = n.checked_div(tracked_servers).unwrap_or(0);
        let tracked_groups = raw.tracked_groups.unwrap_or(max_groups.min(MAX_TRACKED_GROUPS));
        if tracked_groups > max_groups {
            issues.push(Issue {
                key: "tracked_groups".into(),
                message: format!("{tracked_groups} groups of {tracked_servers} servers do not fit in n = {n}"),
            });
        }
        if raw.buffer == Some(0) {
            issues.push(Issue { key: "buffer".into(), message: "must be >= 1".into() });
        }

        let service = dist_from_section(&raw.dist, "dist", &mut issues);
        let arrivals = match raw.arrivals.kind.as_str() {
            "poisson" => {
                if raw.arrivals.base.is_some() {
                    issues.push(Issue { key: "arrivals.base".into(), message: "only used with renewal arrivals".into() });
                }
                ArrivalProcess::poisson(lambda).ok()
            }
            "renewal" => match &raw.arrivals.base {
                None => {
                    issues.push(Issue { key: "arrivals.base".into(), message: "required for renewal arrivals".into() });
                    None
                }
                Some(base) => dist_from_section(base, "arrivals.base", &mut issues).and_then(|shape| {
                    ArrivalProcess::renewal(lambda, &shape)
                        .map_err(|e| issues.push(Issue { key: "lambda".into(), message: e.to_string() }))
                        .ok()
                }),
            },
            other => {
                issues.push(Issue { key: "arrivals.kind".into(), message: format!("expected poisson or renewal, got `{other}`") });
                None
            }
        };

        let policy = policy_from_section(&raw.policy, n, &mut issues);

        let mut subsets = Vec::new();
        if !raw.subsets.is_empty() {
            let total: usize = raw.subsets.iter().map(|s| s.size).sum();
            if total != n {
                issues.push(Issue { key: "subsets".into(), message: format!("sizes sum to {total}, expected n = {n}") });
            }
            for (i, s) in raw.subsets.iter().enumerate() {
                if let Some(w) = s.initial_workload {
                    if !(w.is_finite() && w >= 0.0) {
                        issues.push(Issue {
                            key: format!("subsets[{i}].initial_workload"),
                            message: format!("must be finite and >= 0, got {w}"),
                        });
                    }
                }
                subsets.push(Subset { tag: s.tag, size: s.size, initial_workload: s.initial_workload });
            }
        }
        if let Some(tag) = raw.policy.preferred_tag {
            if !subsets.iter().any(|s| s.tag == tag) {
                issues.push(Issue { key: "policy.preferred_tag".into(), message: format!("no subset has tag {tag}") });
            }
        }

        let initial = match &raw.initial_workloads {
            Some(w) => {
                if !subsets.is_empty() && subsets.iter().any(|s| s.initial_workload.is_some()) {
                    issues.push(Issue {
                        key: "initial_workloads".into(),
                        message: "conflicts with per-subset initial_workload".into(),
                    });
                }
                if w.len() != n {
                    issues.push(Issue { key: "initial_workloads".into(), message: format!("has {} entries, n = {n}", w.len()) });
                }
                if let Some(bad) = w.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
                    issues.push(Issue { key: "initial_workloads".into(), message: format!("entry {bad} is negative or not finite") });
                }
                InitialState::Workloads(w.clone())
            }
            None if subsets.iter().any(|s| s.initial_workload.is_some()) => InitialState::Workloads(
                subsets.iter().flat_map(|s| std::iter::repeat_n(s.initial_workload.unwrap_or(0.0), s.size)).collect(),
            ),
            None => InitialState::AllIdle,
        };

        let grid = match (&raw.grid, &service) {
            (_, None) => None,
            (None, Some(d)) => grid_default(lambda, d, &mut issues),
            (Some(g), Some(d)) => grid_from_section(g, lambda, d, &mut issues),
        };

        if let Some(sweep) = &raw.sweep {
            if sweep.n.contains(&0) {
                issues.push(Issue { key: "sweep.n".into(), message: "entries must be >= 1".into() });
            }
            if sweep.lambda.iter().any(|l| !(0.0..1.0).contains(l)) {
                issues.push(Issue { key: "sweep.lambda".into(), message: "entries must lie in [0, 1)".into() });
            }
        }

        if !issues.is_empty() {
            return Err(ConfigError::Invalid(issues));
        }
        for w in &warnings {
            warn!("{w}");
        }
        Ok(ScenarioConfig {
            scenario_id: raw.scenario_id.clone().unwrap_or_else(|| "scenario".into()),
            n,
            lambda,
            horizon,
            warmup,
            sample_interval,
            tracked_servers,
            tracked_groups,
            seed: raw.seed.unwrap_or(1),
            buffer: raw.buffer,
            service: service.expect("checked above"),
            arrivals: arrivals.expect("checked above"),
            policy: policy.expect("checked above"),
            grid: grid.expect("checked above"),
            subsets,
            initial,
            sweep: raw.sweep.clone(),
            warnings,
            raw,
        })
    }

    pub fn model(&self) -> Result<Model, EngineError> {
        let m = Model::new(self.n, self.arrivals.clone(), self.service.clone(), self.policy.clone(), self.grid.clone())
            .with_seed(self.seed)
            .with_buffer(self.buffer);
        if self.subsets.is_empty() {
            Ok(m)
        } else {
            let plan: Vec<(u16, usize)> = self.subsets.iter().map(|s| (s.tag, s.size)).collect();
            m.with_subsets(&plan)
        }
    }

    pub fn sample_plan(&self) -> SamplePlan {
        SamplePlan::every(self.sample_interval, self.grid.clone()).tracking(self.tracked_servers, self.tracked_groups)
    }

    /// A copy with the given overrides, revalidated.
    pub fn with(&self, edit: impl FnOnce(&mut RawConfig)) -> Result<ScenarioConfig, ConfigError> {
        let mut raw = self.raw.clone();
        edit(&mut raw);
        ScenarioConfig::from_raw(raw)
    }
}

fn policy_from_section(p: &PolicySection, n: usize, issues: &mut Vec<Issue>) -> Option<PolicySpec> {
    let kind = match p.kind.parse::<PolicyKind>() {
        Ok(k) => k,
        Err(e) => {
            issues.push(Issue { key: "policy.kind".into(), message: e });
            return None;
        }
    };
    let mut spec = PolicySpec::of_kind(kind);
    if let Some(d) = p.d {
        if kind != PolicyKind::JsqD {
            issues.push(Issue { key: "policy.d".into(), message: "only used by jsq_d".into() });
        } else if d == 0 || d > n {
            issues.push(Issue { key: "policy.d".into(), message: format!("must satisfy 1 <= d <= n, got {d}") });
        }
        spec.d = d;
    } else if kind == PolicyKind::JsqD {
        spec.d = 2.min(n);
    }
    if let Some(sel) = &p.idle_selection {
        match sel.as_str() {
            "uniform" => spec.idle_selection = IdleSelection::Uniform,
            "lifo" => spec.idle_selection = IdleSelection::Lifo,
            other => issues.push(Issue {
                key: "policy.idle_selection".into(),
                message: format!("expected uniform or lifo, got `{other}`"),
            }),
        }
    }
    match (kind, p.lambda_bar) {
        (PolicyKind::JiqBiased, None) => {
            issues.push(Issue { key: "policy.lambda_bar".into(), message: "required for jiq_biased".into() })
        }
        (PolicyKind::JiqBiased, Some(lb)) if !(lb > 0.0 && lb < 1.0) => {
            issues.push(Issue { key: "policy.lambda_bar".into(), message: format!("must lie in (0, 1), got {lb}") })
        }
        (PolicyKind::JiqBiased, Some(_)) => {}
        (_, Some(_)) => issues.push(Issue { key: "policy.lambda_bar".into(), message: "only used by jiq_biased".into() }),
        (_, None) => {}
    }
    spec.lambda_bar = p.lambda_bar;
    spec.preferred_tag = p.preferred_tag;
    Some(spec)
}

fn grid_default(lambda: f64, d: &ServiceDistribution, issues: &mut Vec<Issue>) -> Option<Grid> {
    fluid::default_grid(lambda, d).map_err(|e| issues.push(Issue { key: "grid".into(), message: e.to_string() })).ok()
}

fn grid_from_section(g: &GridSection, lambda: f64, d: &ServiceDistribution, issues: &mut Vec<Issue>) -> Option<Grid> {
    let report = |issues: &mut Vec<Issue>, e: String| issues.push(Issue { key: "grid".into(), message: e });
    let points = g.points.unwrap_or(fluid::DEFAULT_GRID_POINTS);
    match g.kind.as_str() {
        "default" => grid_default(lambda, d, issues),
        "uniform" | "geometric" => {
            let Some(max) = g.max else {
                issues.push(Issue { key: "grid.max".into(), message: format!("required for a {} grid", g.kind) });
                return None;
            };
            let r = if g.kind == "uniform" { Grid::uniform(max, points) } else { Grid::geometric(max, points) };
            r.map_err(|e| report(issues, e.to_string())).ok()
        }
        "explicit" => match &g.values {
            Some(v) => Grid::new(v.clone()).map_err(|e| report(issues, e.to_string())).ok(),
            None => {
                issues.push(Issue { key: "grid.values".into(), message: "required for an explicit grid".into() });
                None
            }
        },
        other => {
            issues.push(Issue {
                key: "grid.kind".into(),
                message: format!("expected default, uniform, geometric or explicit, got `{other}`"),
            });
            None
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "n = 100\nlambda = 0.4\nhorizon = 400.0\n";

    #[test]
    fn minimal_config_gets_defaults() {
        let c = ScenarioConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(c.warmup, 100.0);
        assert_eq!(c.tracked_servers, 2);
        assert_eq!(c.tracked_groups, 50);
        assert_eq!(c.sample_interval, 1.0);
        assert_eq!(c.grid.len(), fluid::DEFAULT_GRID_POINTS);
        assert_eq!(c.policy, PolicySpec::jiq());
        assert!(c.arrivals.is_poisson());
        assert_eq!(c.service, ServiceDistribution::exponential());
        assert!(c.warnings.is_empty());
    }

    #[test]
    fn large_lambda_is_accepted_with_warning() {
        let c = ScenarioConfig::from_toml("n = 10\nlambda = 0.6\nhorizon = 10.0\n").unwrap();
        assert_eq!(c.warnings.len(), 1);
        assert!(c.warnings[0].contains("exploratory"));
    }

    #[test]
    fn all_violations_are_reported_with_keys() {
        let text = "n = 10\nlambda = -1.0\nhorizon = 10.0\nwarmup = 20.0\n[dist]\nkind = \"weibull\"\n[policy]\nkind = \"jiq_biased\"\n";
        let err = ScenarioConfig::from_toml(text).unwrap_err();
        let keys: Vec<&str> = err.issues().iter().map(|i| i.key.as_str()).collect();
        for k in ["lambda", "warmup", "dist.kind", "policy.lambda_bar"] {
            assert!(keys.contains(&k), "{k} missing from {keys:?}");
        }
    }

    #[test]
    fn missing_required_keys() {
        let err = ScenarioConfig::from_toml("lambda = 0.4\n").unwrap_err();
        let keys: Vec<&str> = err.issues().iter().map(|i| i.key.as_str()).collect();
        assert_eq!(keys, ["n", "horizon"]);
    }

    #[test]
    fn unknown_keys_are_parse_errors() {
        assert!(matches!(ScenarioConfig::from_toml("n = 1\nlambda = 0.1\nhorizon = 5.0\nfoo = 1\n"), Err(ConfigError::Parse(_))));
    }

    #[test]
    fn subsets_must_cover_n() {
        let text = format!("{MINIMAL}[[subsets]]\ntag = 0\nsize = 40\n[[subsets]]\ntag = 1\nsize = 50\n");
        let err = ScenarioConfig::from_toml(&text).unwrap_err();
        assert_eq!(err.issues()[0].key, "subsets");
    }

    #[test]
    fn subset_initial_workloads_expand() {
        let text = format!(
            "{MINIMAL}[policy]\nkind = \"jiq\"\npreferred_tag = 0\n[[subsets]]\ntag = 0\nsize = 60\n[[subsets]]\ntag = 1\nsize = 40\ninitial_workload = 2.0\n"
        );
        let c = ScenarioConfig::from_toml(&text).unwrap();
        match &c.initial {
            InitialState::Workloads(w) => {
                assert_eq!(w.len(), 100);
                assert_eq!(w[59], 0.0);
                assert_eq!(w[60], 2.0);
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(c.model().unwrap().num_tags(), 2);
    }

    #[test]
    fn renewal_and_biased_policy() {
        let text = format!(
            "{MINIMAL}[arrivals]\nkind = \"renewal\"\n[arrivals.base]\nkind = \"uniform\"\nparams = {{ low = 0.0, high = 2.0 }}\n[policy]\nkind = \"jiq_biased\"\nlambda_bar = 0.9\n"
        );
        let c = ScenarioConfig::from_toml(&text).unwrap();
        match &c.arrivals {
            ArrivalProcess::Renewal { lambda, base } => {
                assert_eq!(*lambda, 0.4);
                assert!((base.mean() - 2.5).abs() < 1e-12);
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(c.policy.lambda_bar, Some(0.9));
    }

    #[test]
    fn dist_argument_syntax() {
        let d = parse_dist_arg("pareto:alpha=1.5").unwrap();
        assert_eq!(d.kind, "pareto");
        assert_eq!(d.params["alpha"], ParamValue::Number(1.5));
        let h = parse_dist_arg("hyperexponential:probs=0.3/0.7,rates=1/2").unwrap();
        assert_eq!(h.params["rates"], ParamValue::List(vec![1.0, 2.0]));
        assert!(parse_dist_arg("weibull").is_err());
        assert!(parse_dist_arg("pareto:alpha").is_err());
    }

    #[test]
    fn explicit_grid() {
        let text = format!("{MINIMAL}[grid]\nkind = \"explicit\"\nvalues = [0.0, 1.0, 2.0]\n");
        assert_eq!(ScenarioConfig::from_toml(&text).unwrap().grid.points(), &[0.0, 1.0, 2.0]);
        let bad = format!("{MINIMAL}[grid]\nkind = \"explicit\"\nvalues = [1.0, 2.0]\n");
        assert_eq!(ScenarioConfig::from_toml(&bad).unwrap_err().issues()[0].key, "grid");
    }

    #[test]
    fn raw_round_trip() {
        let c = ScenarioConfig::from_toml(MINIMAL).unwrap();
        let again = ScenarioConfig::from_toml(&c.raw.to_toml()).unwrap();
        assert_eq!(c, again);
    }
}
