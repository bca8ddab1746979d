//! The acceptance suite: each criterion runs its scenarios, checks the stated
//! tolerances and reports one line.

use std::fmt;
use std::time::Instant;

use crate::config::{DistSection, GridSection, PolicySection, RawConfig, ScenarioConfig, SubsetSection, SweepSection};
use crate::curve::{sup_distance, Grid, TailCurve};
use crate::dist::{ParamValue, RawParams, ServiceDistribution};
use crate::engine::{InitialState, SystemState};
use crate::fluid::{equilibrium_point, fluid_transient, mg1_bound};
use crate::ledger::ConservationReport;
use crate::measure::{
    default_pair_grid, independence_from_samples, joint_samples, verify_mg1_bound, StationaryEstimate,
};
use crate::output::{read_csv, SummaryRow, CONVERGENCE_CSV, CURVES_CSV, INDEPENDENCE_CSV, SUMMARY_CSV};
use crate::rng::{stream, Stream};
use crate::sweep::{expand_sweep, run_all, write_outputs, ScenarioOutcome};
use crate::trace::SamplePlan;

pub const SIZES: [usize; 3] = [10, 100, 1000];
pub const SEEDS: [u64; 3] = [1, 2, 3];
pub const MG1_CYCLES: u64 = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionResult {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl fmt::Display for CriterionResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} criterion {} ({}) [{:.1}s]: {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.seconds,
            self.detail
        )
    }
}

/// Collects pass/fail checks with a readable trail.
struct Checks {
    ok: bool,
    notes: Vec<String>,
}

impl Checks {
    fn new() -> Self {
        Checks { ok: true, notes: Vec::new() }
    }

    fn check(&mut self, ok: bool, note: String) {
        self.ok &= ok;
        self.notes.push(if ok { note } else { format!("[x] {note}") });
    }

    fn note(&mut self, note: String) {
        self.notes.push(note);
    }

    fn finish(self, id: u8, name: &'static str, started: Instant) -> CriterionResult {
        CriterionResult { id, name, passed: self.ok, detail: self.notes.join("; "), seconds: started.elapsed().as_secs_f64() }
    }
}

fn dist_section(kind: &str, params: &[(&str, f64)]) -> DistSection {
    let mut p = RawParams::new();
    for &(k, v) in params {
        p.insert(k.into(), ParamValue::Number(v));
    }
    DistSection { kind: kind.into(), normalize: true, params: p }
}

/// JIQ scenario with exponential service and snapshots every time unit.
pub fn base_raw(id: &str, n: usize, lambda: f64, horizon: f64, warmup: f64, seed: u64) -> RawConfig {
    RawConfig {
        scenario_id: Some(id.into()),
        n: Some(n),
        lambda: Some(lambda),
        horizon: Some(horizon),
        warmup: Some(warmup),
        sample_interval: Some(1.0),
        seed: Some(seed),
        ..RawConfig::default()
    }
}

fn seeded(raw: &RawConfig, seeds: &[u64]) -> Vec<ScenarioConfig> {
    let base = ScenarioConfig::from_raw(raw.clone()).expect("acceptance scenarios are valid");
    let axes = SweepSection { n: vec![], seeds: seeds.to_vec(), lambda: vec![] };
    expand_sweep(&base, &axes).expect("acceptance scenarios are valid")
}

fn pooled(outcomes: &[ScenarioOutcome]) -> StationaryEstimate {
    let est: Vec<StationaryEstimate> = outcomes.iter().map(|o| o.estimate.clone()).collect();
    StationaryEstimate::pool(&est).expect("same grid across seeds")
}

fn within(x: f64, target: f64, tol: f64) -> bool {
    (x - target).abs() <= tol
}

struct QuietSubset {
    report: ConservationReport,
    initial: f64,
    busy_integral: f64,
    final_workload: f64,
    arrivals: u64,
}

/// Runs every criterion in order, handing each result to `report` as soon as
/// it is known.
pub struct Suite {
    workers: usize,
    conservation: ConservationReport,
    conservation_runs: usize,
    main_sweep: Option<Vec<ScenarioOutcome>>,
    main_seconds: f64,
}

impl Suite {
    pub fn new(workers: usize) -> Self {
        Suite { workers, conservation: ConservationReport::default(), conservation_runs: 0, main_sweep: None, main_seconds: 0.0 }
    }

    fn run(&mut self, configs: &[ScenarioConfig], keep_traces: bool) -> Result<Vec<ScenarioOutcome>, String> {
        let r = run_all(configs, self.workers, keep_traces).map_err(|e| e.to_string())?;
        if !r.failures.is_empty() {
            return Err(r.failures.iter().map(|(id, e)| format!("{id}: {e}")).collect::<Vec<_>>().join(", "));
        }
        for o in &r.outcomes {
            self.conservation.merge(&o.conservation);
            self.conservation_runs += 1;
        }
        Ok(r.outcomes)
    }

    fn record_conservation(&mut self, report: &ConservationReport) {
        self.conservation.merge(report);
        self.conservation_runs += 1;
    }

    /// JIQ, exponential, lambda = 0.4 over `n` in {10, 100, 1000} and three
    /// seeds; shared by criteria 1, 3 and 7.
    fn main_sweep(&mut self) -> Result<&[ScenarioOutcome], String> {
        if self.main_sweep.is_none() {
            let started = Instant::now();
            let mut configs = Vec::new();
            for n in SIZES {
                configs.extend(seeded(&base_raw(&format!("c1-n{n}"), n, 0.4, 2000.0, 500.0, 1), &SEEDS));
            }
            let outcomes = self.run(&configs, true)?;
            self.main_seconds = started.elapsed().as_secs_f64();
            self.main_sweep = Some(outcomes);
        }
        Ok(self.main_sweep.as_deref().unwrap())
    }

    fn by_size(&mut self) -> Result<Vec<(usize, Vec<ScenarioOutcome>)>, String> {
        let all = self.main_sweep()?;
        Ok(SIZES.iter().map(|&n| (n, all.iter().filter(|o| o.config.n == n).cloned().collect())).collect())
    }

    pub fn criterion1(&mut self) -> CriterionResult {
        let started = Instant::now();
        let mut c = Checks::new();
        match self.by_size() {
            Err(e) => c.check(false, e),
            Ok(groups) => {
                let mut sups = Vec::new();
                for (n, outs) in &groups {
                    let est = pooled(outs);
                    let sup = sup_distance(&est.tail, &outs[0].target).unwrap();
                    c.note(format!("n={n}: busy {:.4} sup {:.4}", est.busy_frac.mean, sup));
                    sups.push(sup);
                    if *n == 1000 {
                        c.check(within(est.busy_frac.mean, 0.4, 0.01), format!("busy_frac {:.4} in 0.4 +- 0.01", est.busy_frac.mean));
                        c.check(sup <= 0.02, format!("sup distance {sup:.4} <= 0.02"));
                    }
                }
                c.check(sups.windows(2).all(|w| w[1] < w[0]), "sup distance strictly decreasing in n".into());
                c.check(self.main_seconds < 60.0, format!("sweep took {:.1}s < 60s", self.main_seconds));
            }
        }
        c.finish(1, "equilibrium concentration", started)
    }

    pub fn criterion2(&mut self) -> CriterionResult {
        let started = Instant::now();
        let mut c = Checks::new();
        let mut raw = base_raw("c2", 1000, 0.45, 2000.0, 500.0, 1);
        raw.dist = dist_section("pareto", &[("alpha", 1.5)]);
        match self.run(&seeded(&raw, &SEEDS), false) {
            Err(e) => c.check(false, e),
            Ok(outs) => {
                let est = pooled(&outs);
                let sup = sup_distance(&est.tail.truncated(10.0), &outs[0].target.truncated(10.0)).unwrap();
                c.check(within(est.busy_frac.mean, 0.45, 0.015), format!("busy_frac {:.4} in 0.45 +- 0.015", est.busy_frac.mean));
                c.check(sup <= 0.02, format!("sup distance on [0,10] {sup:.4} <= 0.02"));
                c.check(outs.iter().all(|o| o.estimate.mean_workload.is_none()), "total workload withheld".into());
            }
        }
        let secs = started.elapsed().as_secs_f64();
        c.check(secs < 60.0, format!("took {secs:.1}s < 60s"));
        c.finish(2, "heavy-tail equilibrium", started)
    }

    pub fn criterion3(&mut self) -> CriterionResult {
        let started = Instant::now();
        let mut c = Checks::new();
        match self.by_size() {
            Err(e) => c.check(false, e),
            Ok(groups) => {
                let waits: Vec<f64> = groups.iter().map(|(_, outs)| pooled(outs).wait_prob.map_or(f64::NAN, |w| w.mean)).collect();
                for ((n, _), w) in groups.iter().zip(&waits) {
                    c.note(format!("n={n}: wait {w:.5}"));
                }
                c.check(waits[1] < waits[0], "strict decrease from n=10 to n=100".into());
                c.check(waits.windows(2).all(|p| p[1] <= p[0]), "non-increasing in n".into());
                c.check(waits[2] <= 0.01, format!("wait_prob {:.5} <= 0.01 at n=1000", waits[2]));
            }
        }
        c.finish(3, "vanishing waiting", started)
    }

    pub fn criterion4(&mut self) -> CriterionResult {
        let started = Instant::now();
        let mut c = Checks::new();
        let (n, lambda, reps) = (1000, 0.4, 20u64);
        let times = [1.0, 2.0, 5.0];
        let service = ServiceDistribution::exponential();
        let cfg = ScenarioConfig::from_raw(base_raw("c4", n, lambda, 5.0, 0.0, 1)).unwrap();
        let grid = cfg.grid.clone();
        let mut sums = vec![vec![0.0; grid.len()]; times.len()];
        let mut waited = 0;
        for rep in 0..reps {
            let model = cfg.model().unwrap().with_seed(1000 + rep);
            let mut state = SystemState::new(model, InitialState::AllIdle).unwrap();
            let trace = state.run(5.0, &SamplePlan::at(times.to_vec(), grid.clone())).unwrap();
            waited += trace.arrivals.iter().filter(|a| a.waited()).count();
            self.record_conservation(&trace.conservation());
            for (k, acc) in sums.iter_mut().enumerate() {
                for (a, v) in acc.iter_mut().zip(trace.curve_values(k)) {
                    *a += v;
                }
            }
        }
        c.check(waited == 0, format!("{waited} arrivals found no idle server"));
        for (k, &t) in times.iter().enumerate() {
            let mean: Vec<f64> = sums[k].iter().map(|s| s / reps as f64).collect();
            let emp = TailCurve::new(crate::curve::CurveKind::Empirical, grid.clone(), mean).unwrap();
            let fluid = fluid_transient(lambda, &service, t, &grid).unwrap();
            let d = sup_distance(&emp, &fluid).unwrap();
            c.check(d <= 0.02, format!("t={t}: sup distance {d:.4} <= 0.02"));
        }
        c.finish(4, "infinite-server fluid limit", started)
    }

    pub fn criterion5(&mut self) -> CriterionResult {
        let started = Instant::now();
        let mut c = Checks::new();
        let exp = ServiceDistribution::exponential();
        let pareto = ServiceDistribution::pareto(1.5).unwrap();
        for (idx, lambda) in [0.4, 0.45].into_iter().enumerate() {
            let cfg = ScenarioConfig::from_raw(base_raw("c5", 1, lambda, 20_000.0, 2000.0, 1)).unwrap();
            let grid = cfg.grid.clone();
            let mut rng = stream(50 + idx as u64, Stream::Oracle);
            let bound = mg1_bound(lambda, &exp, &grid, MG1_CYCLES, &mut rng).unwrap();
            let expected = 1.0 / (1.0 - lambda);
            let rel = (bound.at_zero() - expected).abs() / expected;
            c.check(rel <= 0.02, format!("lambda={lambda}: x**_0 {:.4} vs {expected:.4} ({:.2}%)", bound.at_zero(), 100.0 * rel));

            let mut configs = vec![cfg.clone()];
            configs.push(cfg.with(|r| {
                r.n = Some(100);
                r.horizon = Some(2000.0);
                r.warmup = Some(500.0);
                r.tracked_groups = None;
            }).unwrap());
            match self.run(&configs, false) {
                Err(e) => c.check(false, e),
                Ok(outs) => {
                    for o in &outs {
                        let rep = verify_mg1_bound(&o.estimate, &bound).unwrap();
                        c.check(rep.passed(), format!("lambda={lambda} n={}: {} flagged points", o.config.n, rep.flagged.len()));
                    }
                }
            }
        }
        // Heavy-tailed service at n = 100.
        let mut raw = base_raw("c5-pareto", 100, 0.45, 2000.0, 500.0, 1);
        raw.dist = dist_section("pareto", &[("alpha", 1.5)]);
        raw.grid = Some(GridSection { kind: "geometric".into(), max: Some(50.0), points: Some(101), values: None });
        let cfg = ScenarioConfig::from_raw(raw).unwrap();
        let mut rng = stream(60, Stream::Oracle);
        let bound = mg1_bound(0.45, &pareto, &cfg.grid, MG1_CYCLES, &mut rng).unwrap();
        match self.run(&[cfg], false) {
            Err(e) => c.check(false, e),
            Ok(outs) => {
                let rep = verify_mg1_bound(&outs[0].estimate, &bound).unwrap();
                c.check(rep.passed(), format!("pareto lambda=0.45 n=100: {} flagged points", rep.flagged.len()));
            }
        }
        let secs = started.elapsed().as_secs_f64();
        c.check(secs < 120.0, format!("took {secs:.1}s < 120s"));
        c.finish(5, "M/GI/1 dominating bound", started)
    }

    /// Subset `1` starts loaded and never receives arrivals; its workload must
    /// fall by exactly its busy-time integral.
    fn quiet_subset_run(&mut self) -> Result<QuietSubset, String> {
        let n = 1000;
        let half = n / 2;
        let mut raw = base_raw("c6-subsets", n, 0.2, 200.0, 50.0, 7);
        raw.policy = PolicySection { preferred_tag: Some(0), ..PolicySection::default() };
        raw.subsets = vec![
            SubsetSection { tag: 0, size: half, initial_workload: None },
            SubsetSection { tag: 1, size: half, initial_workload: None },
        ];
        raw.initial_workloads = Some((0..n).map(|i| if i < half { 0.0 } else { 0.01 * (i - half + 1) as f64 }).collect());
        let cfg = ScenarioConfig::from_raw(raw).map_err(|e| e.to_string())?;
        let mut state = SystemState::new(cfg.model().map_err(|e| e.to_string())?, cfg.initial.clone()).map_err(|e| e.to_string())?;
        let trace = state.run(cfg.horizon, &SamplePlan::every(0.5, cfg.grid.clone())).map_err(|e| e.to_string())?;
        let report = trace.conservation();
        let last = trace.checkpoints.last().ok_or("no checkpoints")?;
        let quiet = &last.tags[1];
        Ok(QuietSubset {
            initial: (1..=half).map(|k| 0.01 * k as f64).sum(),
            busy_integral: quiet.ledger.busy_integral,
            final_workload: quiet.workload,
            arrivals: quiet.ledger.arrivals,
            report,
        })
    }

    pub fn criterion6(&mut self) -> CriterionResult {
        let started = Instant::now();
        let mut c = Checks::new();
        match self.quiet_subset_run() {
            Err(e) => c.check(false, e),
            Ok(q) => {
                let r = &q.report;
                c.check(r.passed(), format!("subset run: {} violations in {} checks", r.violations.len(), r.checks));
                c.check(r.quiet_segments > 0, format!("{} no-arrival segments checked", r.quiet_segments));
                c.check(
                    q.arrivals == 0 && q.final_workload == 0.0 && (q.busy_integral - q.initial).abs() <= 1e-9 * q.initial,
                    format!("quiet subset drained {:.4} units in busy time {:.4}", q.initial, q.busy_integral),
                );
                self.record_conservation(&q.report);
            }
        }
        let total = &self.conservation;
        c.check(
            total.passed() && total.checks > 0,
            format!(
                "{} runs, {} identity checks, {} violations",
                self.conservation_runs,
                total.checks,
                total.violations.len()
            ),
        );
        c.finish(6, "conservation identities", started)
    }

    pub fn criterion7(&mut self) -> CriterionResult {
        let started = Instant::now();
        let mut c = Checks::new();
        match self.by_size() {
            Err(e) => c.check(false, e),
            Ok(groups) => {
                let grid = default_pair_grid();
                let mut ds = Vec::new();
                for (n, outs) in &groups {
                    let mut samples = Vec::new();
                    for o in outs {
                        let t = o.trace.as_ref().expect("main sweep keeps traces");
                        samples.extend(joint_samples(t, o.config.warmup));
                    }
                    let m = outs[0].config.tracked_servers;
                    match independence_from_samples(&samples, m, &grid) {
                        Err(e) => c.check(false, format!("n={n}: {e}")),
                        Ok(r) => {
                            c.note(format!("n={n}: D {:.5} over {} samples", r.distance, r.samples));
                            ds.push(r.distance);
                            if *n == 1000 {
                                c.check(r.distance <= 0.02, format!("D {:.5} <= 0.02", r.distance));
                                let g = Grid::new(grid.clone()).unwrap();
                                let star = equilibrium_point(0.4, &ServiceDistribution::exponential(), &g).unwrap();
                                let marg = r.marginal.iter().zip(star.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                                c.check(marg <= 0.02, format!("marginal sup distance {marg:.4} <= 0.02"));
                            }
                        }
                    }
                }
                c.check(ds.len() == 3 && ds.windows(2).all(|w| w[1] < w[0]), "D decreasing in n".into());
            }
        }
        c.finish(7, "asymptotic independence", started)
    }

    fn generalization(&mut self, c: &mut Checks, label: &str, raw: RawConfig, check_sup: bool) {
        match self.run(&seeded(&raw, &SEEDS), false) {
            Err(e) => c.check(false, format!("{label}: {e}")),
            Ok(outs) => {
                let est = pooled(&outs);
                let sup = sup_distance(&est.tail, &outs[0].target).unwrap();
                c.check(within(est.busy_frac.mean, 0.4, 0.01), format!("{label}: busy_frac {:.4} in 0.4 +- 0.01", est.busy_frac.mean));
                if check_sup {
                    c.check(sup <= 0.02, format!("{label}: sup distance {sup:.4} <= 0.02"));
                } else {
                    c.note(format!("{label}: sup distance {sup:.4}"));
                }
                let blocked = est.blocked_frac.map_or(f64::NAN, |b| b.mean);
                if raw.buffer.is_some() {
                    c.check(blocked <= 0.01, format!("{label}: blocked fraction {blocked:.5} <= 0.01"));
                }
            }
        }
    }

    pub fn criterion8(&mut self) -> CriterionResult {
        let started = Instant::now();
        let mut c = Checks::new();
        let mut renewal = base_raw("c8-renewal", 1000, 0.4, 2000.0, 500.0, 1);
        renewal.arrivals.kind = "renewal".into();
        renewal.arrivals.base = Some(dist_section("uniform", &[("low", 0.0), ("high", 2.0)]));
        self.generalization(&mut c, "renewal", renewal, true);

        let mut buffered = base_raw("c8-buffer", 1000, 0.4, 2000.0, 500.0, 1);
        buffered.buffer = Some(1);
        self.generalization(&mut c, "buffer 1", buffered, false);

        let mut biased = base_raw("c8-biased", 1000, 0.4, 2000.0, 500.0, 1);
        biased.policy = PolicySection { kind: "jiq_biased".into(), lambda_bar: Some(0.9), ..PolicySection::default() };
        self.generalization(&mut c, "jiq_biased", biased, true);
        c.finish(8, "generalizations", started)
    }

    pub fn criterion9(&mut self) -> CriterionResult {
        let started = Instant::now();
        let mut c = Checks::new();
        let raw = base_raw("c9", 100, 0.4, 400.0, 100.0, 11);
        let base = ScenarioConfig::from_raw(raw).unwrap();
        let axes = SweepSection { n: vec![10, 100], seeds: vec![4, 5], lambda: vec![0.4] };
        let bodies = (0..2)
            .map(|_| -> Result<Vec<String>, String> {
                let configs = expand_sweep(&base, &axes).map_err(|e| e.to_string())?;
                let result = run_all(&configs, self.workers, false).map_err(|e| e.to_string())?;
                let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
                write_outputs(dir.path(), "validate", &base, &result).map_err(|e| e.to_string())?;
                let mut out = Vec::new();
                let summary: Vec<SummaryRow> = read_csv(&dir.path().join(SUMMARY_CSV)).map_err(|e| e.to_string())?;
                out.push(format!("{:?}", summary.iter().map(|r| SummaryRow { wall_seconds: 0.0, ..r.clone() }).collect::<Vec<_>>()));
                for f in [CURVES_CSV, CONVERGENCE_CSV, INDEPENDENCE_CSV] {
                    out.push(std::fs::read_to_string(dir.path().join(f)).map_err(|e| e.to_string())?);
                }
                Ok(out)
            })
            .collect::<Result<Vec<_>, _>>();
        match bodies {
            Err(e) => c.check(false, e),
            Ok(b) => c.check(b[0] == b[1], "two identical sweeps give identical outputs".into()),
        }

        let cfg = ScenarioConfig::from_raw(base_raw("c9-large", 10_000, 0.4, 500.0, 125.0, 3)).unwrap();
        let t0 = Instant::now();
        let sim = crate::sweep::simulate(&cfg);
        let secs = t0.elapsed().as_secs_f64();
        match sim {
            Err(e) => c.check(false, e.to_string()),
            Ok((trace, events)) => {
                self.record_conservation(&trace.conservation());
                c.check(secs < 30.0, format!("n=10^4 horizon 500: {events} events in {secs:.1}s < 30s"));
            }
        }
        c.finish(9, "determinism and performance", started)
    }

    /// Runs criteria 1 to 9; conservation (6) is evaluated after every other
    /// run has contributed its ledger checks.
    pub fn run_all(&mut self, mut report: impl FnMut(&CriterionResult)) -> Vec<CriterionResult> {
        let mut results = Vec::new();
        let mut emit = |r: CriterionResult, results: &mut Vec<CriterionResult>| {
            report(&r);
            results.push(r);
        };
        emit(self.criterion1(), &mut results);
        emit(self.criterion2(), &mut results);
        emit(self.criterion3(), &mut results);
        emit(self.criterion4(), &mut results);
        emit(self.criterion5(), &mut results);
        emit(self.criterion7(), &mut results);
        emit(self.criterion8(), &mut results);
        emit(self.criterion9(), &mut results);
        emit(self.criterion6(), &mut results);
        results.sort_by_key(|r| r.id);
        results
    }
}
