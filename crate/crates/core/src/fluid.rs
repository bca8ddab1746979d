//! Deterministic limit objects and the single-server regenerative bound.
//!
//! * equilibrium point `x*_w = lambda Phi^c(w)`,
//! * transient infinite-server trajectory `x^up_w(t) = lambda int_w^{w+t} F^c`,
//! * Monte-Carlo estimate of `x**_w`, the expected time per M/GI/1
//!   regenerative cycle during which the workload exceeds `w`.

use rand::Rng;
use rand_distr::{Distribution, Exp};
use thiserror::Error;

use crate::curve::{CurveError, CurveKind, Grid, TailCurve};
use crate::dist::{DistError, ServiceDistribution};

/// Number of points in the default measurement grid.
pub const DEFAULT_GRID_POINTS: usize = 201;
/// The default grid extends until `lambda Phi^c` drops below this level.
pub const DEFAULT_GRID_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FluidError {
    #[error(transparent)]
    Dist(#[from] DistError),
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Default grid for a scenario: 201 points, geometric above `0.05`, up to the
/// first doubling level where `lambda Phi^c(w) < 1e-3` (at least `w = 1`).
pub fn default_grid(lambda: f64, dist: &ServiceDistribution) -> Result<Grid, FluidError> {
    let mut w_max = 1.0;
    while lambda * dist.residual_tail(w_max)? >= DEFAULT_GRID_FLOOR && w_max < 1e7 {
        w_max *= 2.0;
    }
    Ok(Grid::geometric(w_max, DEFAULT_GRID_POINTS)?)
}

pub fn equilibrium_point(lambda: f64, dist: &ServiceDistribution, grid: &Grid) -> Result<TailCurve, FluidError> {
    if !(0.0..1.0).contains(&lambda) {
        return Err(FluidError::InvalidArgument(format!("lambda must lie in [0, 1), got {lambda}")));
    }
    let values = grid
        .points()
        .iter()
        .map(|&w| Ok(lambda * dist.residual_tail(w)?))
        .collect::<Result<Vec<_>, DistError>>()?;
    Ok(TailCurve::new(CurveKind::Equilibrium, grid.clone(), values)?)
}

/// Infinite-server trajectory from an idle start, integrated directly from
/// `F^c` over `[w, w + t]`. Any `lambda >= 0` is accepted.
pub fn fluid_transient(lambda: f64, dist: &ServiceDistribution, t: f64, grid: &Grid) -> Result<TailCurve, FluidError> {
    if !(t >= 0.0 && lambda >= 0.0 && t.is_finite() && lambda.is_finite()) {
        return Err(FluidError::InvalidArgument(format!("need t >= 0 and lambda >= 0, got t={t}, lambda={lambda}")));
    }
    let values = grid
        .points()
        .iter()
        .map(|&w| Ok(lambda * dist.integrate_tail(w, w + t)?))
        .collect::<Result<Vec<_>, DistError>>()?;
    Ok(TailCurve::new(CurveKind::Transient, grid.clone(), values)?)
}

/// Running sums of per-cycle time-above-level functionals.
#[derive(Debug, Clone, PartialEq)]
pub struct Mg1Accumulator {
    grid: Grid,
    cycles: u64,
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
}

impl Mg1Accumulator {
    pub fn new(grid: Grid) -> Self {
        let k = grid.len();
        Mg1Accumulator { grid, cycles: 0, sum: vec![0.0; k], sum_sq: vec![0.0; k] }
    }

    pub fn add_cycle(&mut self, per_cycle: &[f64]) {
        self.cycles += 1;
        for ((s, q), v) in self.sum.iter_mut().zip(self.sum_sq.iter_mut()).zip(per_cycle) {
            *s += v;
            *q += v * v;
        }
    }

    /// Combines two independent batches on the same grid.
    pub fn merge(&mut self, other: &Mg1Accumulator) -> Result<(), CurveError> {
        if self.grid != other.grid {
            return Err(CurveError::GridMismatch);
        }
        self.cycles += other.cycles;
        for (a, b) in self.sum.iter_mut().zip(&other.sum) {
            *a += b;
        }
        for (a, b) in self.sum_sq.iter_mut().zip(&other.sum_sq) {
            *a += b;
        }
        Ok(())
    }

    pub fn cycles(&self) -> u64 {
        self.cycles
    }

    pub fn finish(&self) -> Result<TailCurve, CurveError> {
        let n = self.cycles.max(1) as f64;
        let mean: Vec<f64> = self.sum.iter().map(|s| s / n).collect();
        let stderr = self
            .sum_sq
            .iter()
            .zip(&mean)
            .map(|(q, m)| {
                if self.cycles < 2 {
                    return f64::INFINITY;
                }
                let var = ((q / n - m * m) * n / (n - 1.0)).max(0.0);
                (var / n).sqrt()
            })
            .collect();
        TailCurve::new(CurveKind::Mg1Bound, self.grid.clone(), mean)?.with_stderr(stderr)
    }
}

/// Simulates one regenerative cycle of the M/GI/1 workload, starting with an
/// arrival to an empty system and ending at the next such arrival. Adds to
/// `out[k]` the time within the cycle during which the workload exceeds
/// `grid[k]`.
pub(crate) fn simulate_cycle<R: Rng + ?Sized>(
    interarrival: &Exp<f64>,
    dist: &ServiceDistribution,
    grid: &Grid,
    rng: &mut R,
    out: &mut [f64],
) {
    let points = grid.points();
    let mut level = dist.sample(rng);
    loop {
        let gap = interarrival.sample(rng);
        let drained = gap.min(level);
        let end = level - drained;
        // The segment decreases linearly from `level` to `end`.
        for (k, &w) in points.iter().enumerate() {
            if w >= level {
                break;
            }
            out[k] += if w < end { drained } else { level - w };
        }
        if gap < level {
            level = end + dist.sample(rng);
        } else {
            // Server empties; the idle stretch until the next arrival adds
            // nothing above any level w >= 0.
            break;
        }
    }
}

/// Monte-Carlo estimate of `x**` over `n_cycles` regenerative cycles, with
/// per-point standard errors.
pub fn mg1_bound<R: Rng + ?Sized>(
    lambda: f64,
    dist: &ServiceDistribution,
    grid: &Grid,
    n_cycles: u64,
    rng: &mut R,
) -> Result<TailCurve, FluidError> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(FluidError::InvalidArgument(format!("mg1 bound needs 0 < lambda < 1, got {lambda}")));
    }
    if n_cycles == 0 {
        return Err(FluidError::InvalidArgument("n_cycles must be >= 1".into()));
    }
    let interarrival = Exp::new(lambda).expect("lambda > 0");
    let mut acc = Mg1Accumulator::new(grid.clone());
    let mut cycle = vec![0.0; grid.len()];
    for _ in 0..n_cycles {
        cycle.iter_mut().for_each(|v| *v = 0.0);
        simulate_cycle(&interarrival, dist, grid, rng, &mut cycle);
        acc.add_cycle(&cycle);
    }
    Ok(acc.finish()?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::sup_distance;
    use crate::dist::DistParams;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn laws() -> Vec<ServiceDistribution> {
        vec![
            ServiceDistribution::exponential(),
            ServiceDistribution::new(DistParams::Deterministic { value: 1.0 }, true).unwrap(),
            ServiceDistribution::pareto(2.5).unwrap(),
            ServiceDistribution::new(DistParams::Uniform { low: 0.0, high: 2.0 }, true).unwrap(),
            ServiceDistribution::new(DistParams::Hyperexponential { probs: vec![0.4, 0.6], rates: vec![0.5, 3.0] }, true)
                .unwrap(),
            ServiceDistribution::new(DistParams::Lognormal { mu: 0.0, sigma: 0.8 }, true).unwrap(),
        ]
    }

    #[test]
    fn equilibrium_examples() {
        let g = Grid::uniform(5.0, 11).unwrap();
        let exp = ServiceDistribution::exponential();
        let eq = equilibrium_point(0.4, &exp, &g).unwrap();
        assert!((eq.at_zero() - 0.4).abs() < 1e-15);
        // w = 1 is grid index 2
        assert!((eq.values()[2] - 0.4 * (-1.0f64).exp()).abs() < 1e-12);
        assert!((eq.values()[2] - 0.147_151_776_468_576_9).abs() < 1e-9);
        let zero = equilibrium_point(0.0, &exp, &g).unwrap();
        assert!(zero.values().iter().all(|&v| v == 0.0));
        assert!((sup_distance(&eq, &zero).unwrap() - 0.4).abs() < 1e-15);
        assert!(equilibrium_point(1.0, &exp, &g).is_err());
    }

    #[test]
    fn equilibrium_at_zero_is_lambda_for_every_law() {
        let g = Grid::uniform(4.0, 9).unwrap();
        for d in laws() {
            let eq = equilibrium_point(0.45, &d, &g).unwrap();
            assert!((eq.at_zero() - 0.45).abs() < 1e-8, "{}", d.label());
        }
    }

    #[test]
    fn transient_examples() {
        let g = Grid::uniform(5.0, 11).unwrap();
        let exp = ServiceDistribution::exponential();
        let t0 = fluid_transient(0.4, &exp, 0.0, &g).unwrap();
        assert!(t0.values().iter().all(|&v| v == 0.0));
        let t1 = fluid_transient(0.4, &exp, 1.0, &g).unwrap();
        assert!((t1.at_zero() - 0.252_848_223_531_423_07).abs() < 1e-8);
    }

    #[test]
    fn transient_converges_to_equilibrium() {
        let g = Grid::uniform(10.0, 41).unwrap();
        for d in laws() {
            let eq = equilibrium_point(0.4, &d, &g).unwrap();
            let late = fluid_transient(0.4, &d, 1e4, &g).unwrap();
            assert!(sup_distance(&eq, &late).unwrap() < 1e-3, "{}", d.label());
        }
    }

    #[test]
    fn transient_is_equilibrium_minus_shifted_tail() {
        let g = Grid::uniform(6.0, 25).unwrap();
        for d in laws() {
            for &t in &[0.3, 1.0, 2.5, 7.0] {
                let tr = fluid_transient(0.4, &d, t, &g).unwrap();
                for (k, &w) in g.points().iter().enumerate() {
                    let identity = 0.4 * (d.residual_tail(w).unwrap() - d.residual_tail(w + t).unwrap());
                    assert!((tr.values()[k] - identity).abs() < 1e-7, "{} t={t} w={w}", d.label());
                }
            }
        }
    }

    #[test]
    fn transient_is_monotone_in_time() {
        let g = Grid::uniform(6.0, 25).unwrap();
        for d in laws() {
            let mut prev = fluid_transient(0.4, &d, 0.0, &g).unwrap();
            for &t in &[0.5, 1.0, 2.0, 4.0, 8.0] {
                let cur = fluid_transient(0.4, &d, t, &g).unwrap();
                for (a, b) in prev.values().iter().zip(cur.values()) {
                    assert!(*b >= a - 1e-9);
                }
                prev = cur;
            }
        }
    }

    #[test]
    fn transient_allows_lambda_above_one() {
        let g = Grid::uniform(3.0, 4).unwrap();
        let c = fluid_transient(2.0, &ServiceDistribution::exponential(), 3.0, &g).unwrap();
        assert!((c.at_zero() - 2.0 * (1.0 - (-3.0f64).exp())).abs() < 1e-8);
    }

    #[test]
    fn per_cycle_time_above_is_monotone() {
        let g = Grid::geometric(50.0, 101).unwrap();
        let d = ServiceDistribution::pareto(1.5).unwrap();
        let ia = Exp::new(0.45).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut cycle = vec![0.0; g.len()];
        for _ in 0..2000 {
            cycle.iter_mut().for_each(|v| *v = 0.0);
            simulate_cycle(&ia, &d, &g, &mut rng, &mut cycle);
            assert!(cycle.windows(2).all(|p| p[1] <= p[0]));
            assert!(cycle[0] > 0.0);
        }
    }

    #[test]
    fn deterministic_single_job_cycle() {
        // Service 1, no arrival during it (interarrival rate tiny): time above w is 1 - w.
        let g = Grid::uniform(2.0, 5).unwrap();
        let d = ServiceDistribution::new(DistParams::Deterministic { value: 1.0 }, false).unwrap();
        let ia = Exp::new(1e-12).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut out = vec![0.0; 5];
        simulate_cycle(&ia, &d, &g, &mut rng, &mut out);
        assert_eq!(out, vec![1.0, 0.5, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn busy_period_mean() {
        let g = Grid::uniform(10.0, 21).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let b = mg1_bound(0.5, &ServiceDistribution::exponential(), &g, 100_000, &mut rng).unwrap();
        let se = b.stderr().unwrap()[0];
        assert!((b.at_zero() - 2.0).abs() < 4.0 * se, "{} +- {se}", b.at_zero());
        assert!(b.values()[20] < 0.05);
    }

    #[test]
    fn accumulators_merge() {
        let g = Grid::uniform(1.0, 3).unwrap();
        let mut a = Mg1Accumulator::new(g.clone());
        a.add_cycle(&[1.0, 0.5, 0.0]);
        let mut b = Mg1Accumulator::new(g);
        b.add_cycle(&[3.0, 1.5, 1.0]);
        a.merge(&b).unwrap();
        let c = a.finish().unwrap();
        assert_eq!(c.values(), &[2.0, 1.0, 0.5]);
        assert_eq!(a.cycles(), 2);
    }

    #[test]
    fn mg1_rejects_bad_arguments() {
        let g = Grid::uniform(1.0, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d = ServiceDistribution::exponential();
        assert!(mg1_bound(1.0, &d, &g, 10, &mut rng).is_err());
        assert!(mg1_bound(0.5, &d, &g, 0, &mut rng).is_err());
    }
}
