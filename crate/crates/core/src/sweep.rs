//! Running scenarios and sweeps over `n`, seed and `lambda`.

use std::path::Path;
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;
use thiserror::Error;

use crate::config::{ConfigError, ScenarioConfig, SweepSection};
use crate::curve::{sup_distance, TailCurve};
use crate::engine::{EngineError, SystemState};
use crate::fluid::{equilibrium_point, FluidError};
use crate::ledger::ConservationReport;
use crate::measure::{
    default_pair_grid, estimate_stationary, independence_distance, IndependenceReport, MeasureError, StationaryEstimate,
};
use crate::output::{
    append_csv, write_manifest, ConvergenceRow, CurveRow, IndependenceRow, Manifest, ManifestRun, OutputError,
    SummaryRow, CONVERGENCE_CSV, CURVES_CSV, INDEPENDENCE_CSV, MANIFEST_JSON, SUMMARY_CSV,
};
use crate::trace::Trace;

pub const HEAVY_TAIL_CAVEAT: &str =
    "service law has infinite variance: stationary total workload may be infinite and is not reported";

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Fluid(#[from] FluidError),
    #[error(transparent)]
    Output(#[from] OutputError),
    #[error("{0}")]
    Pool(String),
}

impl RunError {
    pub fn is_config(&self) -> bool {
        matches!(self, RunError::Config(_) | RunError::Engine(EngineError::InvalidConfig(_)))
    }
}

/// Everything kept from one scenario run.
#[derive(Debug, Clone)]
pub struct ScenarioOutcome {
    pub config: ScenarioConfig,
    pub estimate: StationaryEstimate,
    /// `lambda Phi^c` on the scenario grid.
    pub target: TailCurve,
    pub conservation: ConservationReport,
    pub independence: Option<IndependenceReport>,
    pub summary: SummaryRow,
    pub trace: Option<Trace>,
}

impl ScenarioOutcome {
    pub fn caveats(&self) -> Vec<String> {
        let mut c = self.config.warnings.clone();
        if self.config.service.has_infinite_variance() {
            c.push(HEAVY_TAIL_CAVEAT.into());
        }
        c
    }
}

/// Simulates the scenario to its horizon and returns the raw trace.
pub fn simulate(config: &ScenarioConfig) -> Result<(Trace, u64), RunError> {
    let mut state = SystemState::new(config.model()?, config.initial.clone())?;
    let trace = state.run(config.horizon, &config.sample_plan())?;
    Ok((trace, state.events_processed()))
}

/// Runs one scenario and measures it.
pub fn run_scenario(config: &ScenarioConfig, keep_trace: bool) -> Result<ScenarioOutcome, RunError> {
    let started = Instant::now();
    let (trace, events) = simulate(config)?;
    let wall_seconds = started.elapsed().as_secs_f64();
    let estimate = estimate_stationary(&trace, config.warmup)?;
    let target = equilibrium_point(config.lambda, &config.service, &config.grid)?;
    let conservation = trace.conservation();
    if !conservation.passed() {
        warn!("{}: {} conservation violations", config.scenario_id, conservation.violations.len());
    }
    let independence = if config.tracked_servers >= 2 && config.tracked_groups >= 1 {
        match independence_distance(&trace, config.warmup, &default_pair_grid()) {
            Ok(r) => Some(r),
            Err(MeasureError::InsufficientData { .. }) => None,
            Err(e) => return Err(e.into()),
        }
    } else {
        None
    };
    let summary = SummaryRow {
        scenario_id: config.scenario_id.clone(),
        n: config.n,
        lambda: config.lambda,
        policy: config.policy.kind.name().to_string(),
        dist: config.service.label(),
        busy_frac_mean: estimate.busy_frac.mean,
        busy_frac_stderr: estimate.busy_frac.stderr,
        wait_prob: estimate.wait_prob.map_or(f64::NAN, |e| e.mean),
        blocked_frac: estimate.blocked_frac.map_or(f64::NAN, |e| e.mean),
        sup_dist_to_star: sup_distance(&estimate.tail, &target).map_err(MeasureError::from)?,
        events_processed: events,
        wall_seconds,
    };
    info!(
        "{}: busy {:.4} wait {:.4} sup {:.4} ({} events, {:.2}s)",
        summary.scenario_id, summary.busy_frac_mean, summary.wait_prob, summary.sup_dist_to_star, events, wall_seconds
    );
    Ok(ScenarioOutcome {
        config: config.clone(),
        estimate,
        target,
        conservation,
        independence,
        summary,
        trace: keep_trace.then_some(trace),
    })
}

fn format_lambda(l: f64) -> String {
    format!("{l}")
}

/// The scenario list of a sweep, in the order the axes are given.
pub fn expand_sweep(base: &ScenarioConfig, axes: &SweepSection) -> Result<Vec<ScenarioConfig>, ConfigError> {
    let ns = if axes.n.is_empty() { vec![base.n] } else { axes.n.clone() };
    let seeds = if axes.seeds.is_empty() { vec![base.seed] } else { axes.seeds.clone() };
    let lambdas = if axes.lambda.is_empty() { vec![base.lambda] } else { axes.lambda.clone() };
    let mut out = Vec::new();
    for &n in &ns {
        for &lambda in &lambdas {
            for &seed in &seeds {
                let id = format!("{}-n{n}-l{}-s{seed}", base.scenario_id, format_lambda(lambda));
                let cfg = base.with(|raw| {
                    raw.scenario_id = Some(id);
                    raw.n = Some(n);
                    raw.lambda = Some(lambda);
                    raw.seed = Some(seed);
                    raw.sweep = None;
                    // Group counts depend on n; let them default unless fixed.
                    if base.raw.tracked_groups.is_none() {
                        raw.tracked_groups = None;
                    }
                    // Per-server initial vectors do not carry over to other sizes.
                    if ns.len() > 1 {
                        raw.initial_workloads = None;
                    }
                })?;
                out.push(cfg);
            }
        }
    }
    Ok(out)
}

#[derive(Debug)]
pub struct SweepResult {
    /// Successful runs sorted by scenario id.
    pub outcomes: Vec<ScenarioOutcome>,
    /// Failed runs as `(scenario_id, error)`.
    pub failures: Vec<(String, String)>,
}

/// Runs every scenario on a pool of `workers` threads. Results do not depend
/// on the worker count.
pub fn run_all(configs: &[ScenarioConfig], workers: usize, keep_traces: bool) -> Result<SweepResult, RunError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| RunError::Pool(e.to_string()))?;
    let results: Vec<(String, Result<ScenarioOutcome, RunError>)> = pool.install(|| {
        configs.par_iter().map(|c| (c.scenario_id.clone(), run_scenario(c, keep_traces))).collect()
    });
    let mut outcomes = Vec::new();
    let mut failures = Vec::new();
    for (id, r) in results {
        match r {
            Ok(o) => outcomes.push(o),
            Err(e) => {
                warn!("{id}: {e}");
                failures.push((id, e.to_string()));
            }
        }
    }
    outcomes.sort_by(|a, b| a.config.scenario_id.cmp(&b.config.scenario_id));
    failures.sort();
    Ok(SweepResult { outcomes, failures })
}

pub fn run_sweep(base: &ScenarioConfig, axes: &SweepSection, workers: usize) -> Result<SweepResult, RunError> {
    run_all(&expand_sweep(base, axes)?, workers, false)
}

/// Writes all tables and the manifest for a set of runs into `dir`.
pub fn write_outputs(dir: &Path, command: &str, base: &ScenarioConfig, result: &SweepResult) -> Result<(), OutputError> {
    std::fs::create_dir_all(dir).map_err(|source| OutputError::Io { path: dir.to_path_buf(), source })?;
    let mut summary = Vec::new();
    let mut curves = Vec::new();
    let mut convergence = Vec::new();
    let mut independence = Vec::new();
    let mut manifest = Manifest::new(command, base.raw.to_toml());
    for o in &result.outcomes {
        let id = &o.config.scenario_id;
        summary.push(o.summary.clone());
        curves.extend(CurveRow::from_curve(id, &o.estimate.tail));
        curves.extend(CurveRow::from_curve(id, &o.target));
        convergence.push(ConvergenceRow {
            scenario_id: id.clone(),
            n: o.config.n,
            sup_dist: o.summary.sup_dist_to_star,
            wait_prob: o.summary.wait_prob,
            ci: o.estimate.half_widths.iter().copied().fold(0.0, f64::max),
        });
        if let Some(r) = &o.independence {
            independence.extend(IndependenceRow::from_report(id, r));
        }
        manifest.runs.push(ManifestRun {
            scenario_id: id.clone(),
            seed: o.config.seed,
            n: o.config.n,
            lambda: o.config.lambda,
            config: o.config.raw.to_toml(),
            caveats: o.caveats(),
        });
    }
    manifest.failures = result.failures.iter().map(|(id, e)| format!("{id}: {e}")).collect();
    append_csv(&dir.join(SUMMARY_CSV), &summary)?;
    append_csv(&dir.join(CURVES_CSV), &curves)?;
    append_csv(&dir.join(CONVERGENCE_CSV), &convergence)?;
    append_csv(&dir.join(INDEPENDENCE_CSV), &independence)?;
    write_manifest(&dir.join(MANIFEST_JSON), &manifest)
}
