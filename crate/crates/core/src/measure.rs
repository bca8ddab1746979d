//! Stationary estimates, waiting probability, independence statistics and
//! bound checks computed from simulation traces.

use log::warn;
use serde::Serialize;
use thiserror::Error;

use crate::curve::{sup_distance, CurveError, CurveKind, TailCurve};
use crate::trace::Trace;

pub const BATCHES: usize = 20;
/// Two-sided 97.5% quantile of Student's t with 19 degrees of freedom.
pub const T_19: f64 = 2.093;
pub const Z_975: f64 = 1.96;
pub const MIN_SNAPSHOTS: usize = 100;
pub const MIN_ARRIVALS: usize = 100;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeasureError {
    #[error("insufficient data: {what} needs at least {needed}, got {got}")]
    InsufficientData { what: &'static str, needed: usize, got: usize },
    #[error("trace tracks {0} servers per group; at least 2 are needed")]
    NotTracked(usize),
    #[error("need at least {needed} values of n, got {got}")]
    TooFewSystems { needed: usize, got: usize },
    #[error(transparent)]
    Curve(#[from] CurveError),
}

/// A point estimate with its standard error and 95% half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub half_width: f64,
}

impl Estimate {
    pub fn exact(mean: f64) -> Self {
        Estimate { mean, stderr: 0.0, half_width: 0.0 }
    }

    pub fn contains(&self, x: f64) -> bool {
        (self.mean - x).abs() <= self.half_width
    }

    /// Average of independent estimates.
    pub fn average(items: &[Estimate]) -> Estimate {
        let k = items.len() as f64;
        let mean = items.iter().map(|e| e.mean).sum::<f64>() / k;
        let stderr = items.iter().map(|e| e.stderr * e.stderr).sum::<f64>().sqrt() / k;
        let half = items.iter().map(|e| e.half_width * e.half_width).sum::<f64>().sqrt() / k;
        Estimate { mean, stderr, half_width: half }
    }
}

/// Batch means over consecutive samples: overall mean plus the spread of the
/// 20 batch averages.
pub fn batch_means(samples: &[f64]) -> Estimate {
    let n = samples.len();
    let mean = samples.iter().sum::<f64>() / n as f64;
    if n < BATCHES {
        return Estimate { mean, stderr: f64::NAN, half_width: f64::NAN };
    }
    let batch: Vec<f64> = (0..BATCHES)
        .map(|j| {
            let (lo, hi) = (j * n / BATCHES, (j + 1) * n / BATCHES);
            samples[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect();
    let bm = batch.iter().sum::<f64>() / BATCHES as f64;
    let var = batch.iter().map(|b| (b - bm) * (b - bm)).sum::<f64>() / (BATCHES - 1) as f64;
    let stderr = (var / BATCHES as f64).sqrt();
    Estimate { mean, stderr, half_width: T_19 * stderr }
}

/// Proportion with a normal-approximation binomial half-width.
pub fn binomial(successes: u64, trials: u64) -> Estimate {
    let p = successes as f64 / trials as f64;
    let stderr = (p * (1.0 - p) / trials as f64).sqrt();
    Estimate { mean: p, stderr, half_width: Z_975 * stderr }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StationaryEstimate {
    pub n: usize,
    /// Time-averaged tail curve; its stderr holds batch-means standard errors.
    pub tail: TailCurve,
    pub half_widths: Vec<f64>,
    /// The tail estimate at `w = 0`.
    pub busy_frac: Estimate,
    pub wait_prob: Option<Estimate>,
    pub blocked_frac: Option<Estimate>,
    /// Per-server mean workload; withheld for infinite-variance service.
    pub mean_workload: Option<Estimate>,
    /// Per-subset tails (scaled by the total `n`) when the run had several tags.
    pub subsets: Vec<TailCurve>,
    pub samples: usize,
}

impl StationaryEstimate {
    /// Averages estimates of the same system from independent seeds.
    pub fn pool(items: &[StationaryEstimate]) -> Result<StationaryEstimate, MeasureError> {
        let first = items.first().ok_or(MeasureError::InsufficientData { what: "pooling", needed: 1, got: 0 })?;
        let grid = first.tail.grid().clone();
        if items.iter().any(|e| e.tail.grid() != &grid) {
            return Err(CurveError::GridMismatch.into());
        }
        let k = grid.len();
        let per_point: Vec<Estimate> = (0..k)
            .map(|j| {
                let e: Vec<Estimate> = items
                    .iter()
                    .map(|s| Estimate {
                        mean: s.tail.values()[j],
                        stderr: s.tail.stderr().map_or(0.0, |v| v[j]),
                        half_width: s.half_widths[j],
                    })
                    .collect();
                Estimate::average(&e)
            })
            .collect();
        let tail = TailCurve::new(CurveKind::Empirical, grid, per_point.iter().map(|e| e.mean).collect())?
            .with_stderr(per_point.iter().map(|e| e.stderr).collect())?;
        let opt = |f: fn(&StationaryEstimate) -> Option<Estimate>| -> Option<Estimate> {
            let v: Option<Vec<Estimate>> = items.iter().map(f).collect();
            v.map(|v| Estimate::average(&v))
        };
        Ok(StationaryEstimate {
            n: first.n,
            busy_frac: per_point[0],
            half_widths: per_point.iter().map(|e| e.half_width).collect(),
            tail,
            wait_prob: opt(|s| s.wait_prob),
            blocked_frac: opt(|s| s.blocked_frac),
            mean_workload: opt(|s| s.mean_workload),
            subsets: Vec::new(),
            samples: items.iter().map(|s| s.samples).sum(),
        })
    }
}

/// Time averages of the snapshots taken strictly after `warmup`.
pub fn estimate_stationary(trace: &Trace, warmup: f64) -> Result<StationaryEstimate, MeasureError> {
    let first = trace.first_after(warmup);
    let count = trace.len() - first;
    if count < MIN_SNAPSHOTS {
        return Err(MeasureError::InsufficientData { what: "post-warmup snapshots", needed: MIN_SNAPSHOTS, got: count });
    }
    let k = trace.grid.len();
    let mut column = vec![0.0; count];
    let mut per_point = Vec::with_capacity(k);
    for j in 0..k {
        for (s, slot) in (first..trace.len()).zip(column.iter_mut()) {
            *slot = trace.curve_values(s)[j];
        }
        per_point.push(batch_means(&column));
    }
    // Time averages of non-increasing curves are non-increasing up to rounding.
    let values: Vec<f64> = per_point.iter().map(|e| e.mean).collect();
    let tail = TailCurve::new(CurveKind::Empirical, trace.grid.clone(), values)?
        .with_stderr(per_point.iter().map(|e| e.stderr).collect())?;

    let mut subsets = Vec::new();
    if trace.num_tags > 1 {
        for tag in 0..trace.num_tags {
            let v: Vec<f64> = (0..k)
                .map(|j| (first..trace.len()).map(|s| trace.tag_curve_values(s, tag)[j]).sum::<f64>() / count as f64)
                .collect();
            subsets.push(TailCurve::new(CurveKind::Empirical, trace.grid.clone(), v)?);
        }
    }

    let mean_workload = if trace.heavy_tail {
        None
    } else {
        let per_snapshot: Vec<f64> = trace.checkpoints[first..]
            .iter()
            .map(|cp| cp.tags.iter().map(|t| t.workload).sum::<f64>() / trace.n as f64)
            .collect();
        Some(batch_means(&per_snapshot))
    };

    let (wait_prob, blocked_frac) = match arrival_window(trace, warmup) {
        Ok(window) => {
            let waited = window.iter().filter(|a| a.waited()).count() as u64;
            let blocked = window.iter().filter(|a| a.blocked).count() as u64;
            (Some(binomial(waited, window.len() as u64)), Some(binomial(blocked, window.len() as u64)))
        }
        Err(_) if trace.lambda == 0.0 => (Some(Estimate::exact(0.0)), Some(Estimate::exact(0.0))),
        Err(_) => (None, None),
    };

    Ok(StationaryEstimate {
        n: trace.n,
        busy_frac: per_point[0],
        half_widths: per_point.iter().map(|e| e.half_width).collect(),
        tail,
        wait_prob,
        blocked_frac,
        mean_workload,
        subsets,
        samples: count,
    })
}

fn arrival_window(trace: &Trace, warmup: f64) -> Result<&[crate::trace::ArrivalRecord], MeasureError> {
    let first = trace.arrivals.partition_point(|a| a.time <= warmup);
    let window = &trace.arrivals[first..];
    if window.len() < MIN_ARRIVALS {
        return Err(MeasureError::InsufficientData { what: "post-warmup arrivals", needed: MIN_ARRIVALS, got: window.len() });
    }
    Ok(window)
}

/// Fraction of post-warmup arrivals routed to a busy server or blocked.
///
/// With Poisson arrivals this is also the time-stationary probability that
/// the routing decision would see a busy destination.
pub fn waiting_probability(trace: &Trace, warmup: f64) -> Result<Estimate, MeasureError> {
    if trace.lambda == 0.0 {
        return Ok(Estimate::exact(0.0));
    }
    let window = arrival_window(trace, warmup)?;
    let waited = window.iter().filter(|a| a.waited()).count() as u64;
    Ok(binomial(waited, window.len() as u64))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairRow {
    pub w1: f64,
    pub w2: f64,
    pub joint: f64,
    pub product: f64,
    pub diff: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndependenceReport {
    /// Largest absolute deviation from product form.
    pub distance: f64,
    /// Standard deviation of the estimator under independence, at the
    /// maximizing pair, for i.i.d. samples.
    pub sigma: f64,
    /// Rows for the first two coordinates over the pair grid.
    pub rows: Vec<PairRow>,
    /// `P̂{W > w}` pooled over all tracked coordinates, on the pair grid.
    pub marginal: Vec<f64>,
    pub samples: usize,
    pub symmetric: bool,
}

/// Deviation from product form of `m`-dimensional samples stored row-major.
///
/// For `m = 2` this is `max |P̂{W1>w1, W2>w2} - P̂{W1>w1} P̂{W2>w2}|` over the
/// pair grid. For `m > 2` every coordinate pair is checked, plus the `m`-way
/// event `{all W_k > w}` on the diagonal.
pub fn independence_from_samples(samples: &[f64], m: usize, pair_grid: &[f64]) -> Result<IndependenceReport, MeasureError> {
    if m < 2 {
        return Err(MeasureError::NotTracked(m));
    }
    let count = samples.len() / m;
    if count < MIN_SNAPSHOTS {
        return Err(MeasureError::InsufficientData { what: "joint samples", needed: MIN_SNAPSHOTS, got: count });
    }
    let g = pair_grid.len();
    let nf = count as f64;
    // above[k][j]: fraction of rows whose coordinate k exceeds pair_grid[j]
    let mut above = vec![vec![0u64; g]; m];
    for row in samples.chunks_exact(m) {
        for (k, &x) in row.iter().enumerate() {
            for (j, &w) in pair_grid.iter().enumerate() {
                above[k][j] += (x > w) as u64;
            }
        }
    }
    let p = |k: usize, j: usize| above[k][j] as f64 / nf;

    let mut distance = 0.0f64;
    let mut sigma = 0.0f64;
    let mut rows = Vec::with_capacity(g * g);
    let consider = |diff: f64, sd: f64, distance: &mut f64, sigma: &mut f64| {
        if diff.abs() > *distance {
            *distance = diff.abs();
        }
        *sigma = sigma.max(sd);
    };
    for a in 0..m {
        for b in a + 1..m {
            for (j1, &w1) in pair_grid.iter().enumerate() {
                for (j2, &w2) in pair_grid.iter().enumerate() {
                    let joint = samples.chunks_exact(m).filter(|r| r[a] > w1 && r[b] > w2).count() as f64 / nf;
                    let (p1, p2) = (p(a, j1), p(b, j2));
                    let product = p1 * p2;
                    let diff = joint - product;
                    let sd = (p1 * (1.0 - p1) * p2 * (1.0 - p2) / nf).sqrt();
                    consider(diff, sd, &mut distance, &mut sigma);
                    if a == 0 && b == 1 {
                        rows.push(PairRow { w1, w2, joint, product, diff });
                    }
                }
            }
        }
    }
    if m > 2 {
        for (j, &w) in pair_grid.iter().enumerate() {
            let joint = samples.chunks_exact(m).filter(|r| r.iter().all(|&x| x > w)).count() as f64 / nf;
            let product: f64 = (0..m).map(|k| p(k, j)).product();
            let sd = (product * (1.0 - product) / nf).sqrt();
            consider(joint - product, sd, &mut distance, &mut sigma);
        }
    }
    let marginal = (0..g).map(|j| (0..m).map(|k| p(k, j)).sum::<f64>() / m as f64).collect();
    Ok(IndependenceReport { distance, sigma, rows, marginal, samples: count, symmetric: true })
}

/// Post-warmup joint samples of the tracked groups, pooled over groups.
pub fn joint_samples(trace: &Trace, warmup: f64) -> Vec<f64> {
    let first = trace.first_after(warmup);
    let per = trace.tracked_groups * trace.tracked_servers;
    trace.joint[first * per..].to_vec()
}

/// Independence statistic of the tracked servers after `warmup`.
///
/// The limit statement behind it assumes a policy that is symmetric in the
/// servers; for other policies the value is still reported, with a warning.
pub fn independence_distance(trace: &Trace, warmup: f64, pair_grid: &[f64]) -> Result<IndependenceReport, MeasureError> {
    if !trace.symmetric_policy {
        warn!("policy is not symmetric in the servers; independence statistic is exploratory");
    }
    let mut r = independence_from_samples(&joint_samples(trace, warmup), trace.tracked_servers, pair_grid)?;
    r.symmetric = trace.symmetric_policy;
    Ok(r)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundExcess {
    pub w: f64,
    pub empirical: f64,
    pub bound: f64,
    pub allowance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub checked: usize,
    pub flagged: Vec<BoundExcess>,
    /// Largest `(empirical - bound) / combined stderr` over the grid.
    pub worst_z: f64,
}

impl BoundReport {
    pub fn passed(&self) -> bool {
        self.flagged.is_empty()
    }
}

/// Flags grid points where the empirical mean tail exceeds the bound by more
/// than three combined standard errors.
pub fn verify_mg1_bound(estimate: &StationaryEstimate, bound: &TailCurve) -> Result<BoundReport, MeasureError> {
    if estimate.tail.grid() != bound.grid() {
        return Err(CurveError::GridMismatch.into());
    }
    let zeros = vec![0.0; bound.grid().len()];
    let se_e = estimate.tail.stderr().unwrap_or(&zeros);
    let se_b = bound.stderr().unwrap_or(&zeros);
    let mut flagged = Vec::new();
    let mut worst_z = f64::NEG_INFINITY;
    for (k, &w) in bound.grid().points().iter().enumerate() {
        let (e, b) = (estimate.tail.values()[k], bound.values()[k]);
        let se = (se_e[k] * se_e[k] + se_b[k] * se_b[k]).sqrt();
        let allowance = 3.0 * se;
        if se > 0.0 {
            worst_z = worst_z.max((e - b) / se);
        }
        if e > b + allowance {
            flagged.push(BoundExcess { w, empirical: e, bound: b, allowance });
        }
    }
    Ok(BoundReport { checked: bound.grid().len(), flagged, worst_z })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub sup_dist: f64,
    pub wait_prob: f64,
    /// Largest per-point half-width of the empirical tail.
    pub ci: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    /// Kendall's tau between `n` and the sup distance; -1 is a perfect decrease.
    pub kendall_tau: f64,
    pub strictly_decreasing: bool,
}

pub fn kendall_tau(x: &[f64], y: &[f64]) -> f64 {
    let mut s = 0i64;
    let mut pairs = 0i64;
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            let p = (x[j] - x[i]) * (y[j] - y[i]);
            s += (p > 0.0) as i64 - (p < 0.0) as i64;
            pairs += 1;
        }
    }
    if pairs == 0 {
        0.0
    } else {
        s as f64 / pairs as f64
    }
}

/// Sup distance to `target` for each system size, sorted by `n`.
pub fn convergence_report(estimates: &[StationaryEstimate], target: &TailCurve) -> Result<ConvergenceReport, MeasureError> {
    if estimates.len() < 2 {
        return Err(MeasureError::TooFewSystems { needed: 2, got: estimates.len() });
    }
    let mut rows = estimates
        .iter()
        .map(|e| {
            Ok(ConvergenceRow {
                n: e.n,
                sup_dist: sup_distance(&e.tail, target)?,
                wait_prob: e.wait_prob.map_or(f64::NAN, |w| w.mean),
                ci: e.half_widths.iter().copied().fold(0.0, f64::max),
            })
        })
        .collect::<Result<Vec<_>, MeasureError>>()?;
    rows.sort_by_key(|r| r.n);
    let xs: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.sup_dist).collect();
    let strictly_decreasing = ys.windows(2).all(|w| w[1] < w[0]);
    Ok(ConvergenceReport { kendall_tau: kendall_tau(&xs, &ys), rows, strictly_decreasing })
}

/// Snapshot grid restricted to `[0, w_max]` together with a target curve on it.
pub fn restrict(estimate: &StationaryEstimate, target: &TailCurve, w_max: f64) -> (TailCurve, TailCurve) {
    (estimate.tail.truncated(w_max), target.truncated(w_max))
}

/// Default pair grid for independence checks.
pub fn default_pair_grid() -> Vec<f64> {
    vec![0.0, 0.5, 1.0, 2.0, 3.0]
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn batch_means_of_constant() {
        let e = batch_means(&[2.0; 200]);
        assert_eq!(e.mean, 2.0);
        assert_eq!(e.stderr, 0.0);
    }

    #[test]
    fn batch_means_iid_stderr() {
        // For i.i.d. uniforms the batch stderr estimates sqrt(1/12 / N).
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut ratios = Vec::new();
        for _ in 0..50 {
            let xs: Vec<f64> = (0..4000).map(|_| rng.random::<f64>()).collect();
            ratios.push(batch_means(&xs).stderr / (1.0 / 12.0 / 4000.0f64).sqrt());
        }
        let mean_ratio = ratios.iter().sum::<f64>() / ratios.len() as f64;
        assert!((mean_ratio - 1.0).abs() < 0.1, "{mean_ratio}");
    }

    #[test]
    fn binomial_half_width() {
        let e = binomial(25, 100);
        assert_eq!(e.mean, 0.25);
        assert!((e.half_width - 1.96 * (0.25f64 * 0.75 / 100.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn kendall_examples() {
        assert_eq!(kendall_tau(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), -1.0);
        assert_eq!(kendall_tau(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]), 1.0);
        assert!((kendall_tau(&[1.0, 2.0, 3.0], &[2.0, 1.0, 3.0]) - 1.0 / 3.0).abs() < 1e-15);
    }

    fn synthetic(m: usize, rows: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..rows * m)
            .map(|_| if rng.random::<f64>() < 0.6 { 0.0 } else { -rng.random::<f64>().ln() })
            .collect()
    }

    #[test]
    fn independent_streams_within_noise() {
        for seed in 0..5 {
            let s = synthetic(2, 20_000, seed);
            let r = independence_from_samples(&s, 2, &default_pair_grid()).unwrap();
            assert!(r.distance <= 3.0 * r.sigma + 1e-12, "D={} sigma={}", r.distance, r.sigma);
            assert_eq!(r.rows.len(), 25);
        }
        let s = synthetic(3, 20_000, 9);
        let r = independence_from_samples(&s, 3, &default_pair_grid()).unwrap();
        assert!(r.distance <= 3.0 * r.sigma + 1e-12);
    }

    #[test]
    fn coupled_streams_are_detected() {
        // Second coordinate copies the first: P{both > 0} = 0.4 vs 0.16.
        let base = synthetic(1, 10_000, 4);
        let s: Vec<f64> = base.iter().flat_map(|&x| [x, x]).collect();
        let r = independence_from_samples(&s, 2, &[0.0]).unwrap();
        assert!((r.distance - 0.24).abs() < 0.03, "{}", r.distance);
    }

    #[test]
    fn too_few_samples() {
        assert!(matches!(
            independence_from_samples(&[0.0; 20], 2, &[0.0]),
            Err(MeasureError::InsufficientData { .. })
        ));
        assert!(matches!(independence_from_samples(&[0.0; 200], 1, &[0.0]), Err(MeasureError::NotTracked(1))));
    }
}
