//! Tail curves on a finite workload grid.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Slack allowed when checking monotonicity of curves built by quadrature.
const MONOTONE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CurveError {
    #[error("grid must start at 0 and be strictly increasing (violated at index {index})")]
    InvalidGrid { index: usize },
    #[error("grid is empty")]
    EmptyGrid,
    #[error("curves are defined on different grids")]
    GridMismatch,
    #[error("{kind} curve has {values} values for a grid of {grid} points")]
    LengthMismatch { kind: CurveKind, values: usize, grid: usize },
    #[error("{kind} curve increases at w={w}")]
    NotMonotone { kind: CurveKind, w: f64 },
    #[error("{kind} curve value {value} at w={w} is out of range")]
    OutOfRange { kind: CurveKind, w: f64, value: f64 },
}

/// Workload levels `0 = w_0 < w_1 < ... < w_K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Grid(Vec<f64>);

impl Grid {
    pub fn new(points: Vec<f64>) -> Result<Self, CurveError> {
        if points.is_empty() {
            return Err(CurveError::EmptyGrid);
        }
        if points[0] != 0.0 {
            return Err(CurveError::InvalidGrid { index: 0 });
        }
        if let Some(i) = points.windows(2).position(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
            return Err(CurveError::InvalidGrid { index: i + 1 });
        }
        Ok(Grid(points))
    }

    /// `points` evenly spaced points on `[0, max]`.
    pub fn uniform(max: f64, points: usize) -> Result<Self, CurveError> {
        if points < 2 || !(max > 0.0) {
            return Err(CurveError::InvalidGrid { index: 1 });
        }
        let step = max / (points - 1) as f64;
        Grid::new((0..points).map(|i| if i + 1 == points { max } else { step * i as f64 }).collect())
    }

    /// The default measurement grid: `0`, then `points - 1` geometrically
    /// spaced levels from `0.05` to `w_max`.
    pub fn geometric(w_max: f64, points: usize) -> Result<Self, CurveError> {
        let first = 0.05;
        if points < 3 || !(w_max > first) {
            return Grid::uniform(w_max.max(first), points.max(2));
        }
        let ratio = (w_max / first).powf(1.0 / (points - 2) as f64);
        let mut v = Vec::with_capacity(points);
        v.push(0.0);
        for i in 0..points - 1 {
            v.push(if i + 2 == points { w_max } else { first * ratio.powi(i as i32) });
        }
        Grid::new(v)
    }

    pub fn points(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max(&self) -> f64 {
        *self.0.last().expect("grid is nonempty")
    }

    /// Number of grid points strictly below `x`; the grid levels exceeded by
    /// a workload `x` are exactly the first `count_below(x)` points.
    pub fn count_below(&self, x: f64) -> usize {
        self.0.partition_point(|&w| w < x)
    }

    /// Grid restricted to points `<= max`.
    pub fn truncated(&self, max: f64) -> Grid {
        Grid(self.0.iter().copied().take_while(|&w| w <= max).collect())
    }
}

impl TryFrom<Vec<f64>> for Grid {
    type Error = CurveError;

    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        Grid::new(v)
    }
}

impl From<Grid> for Vec<f64> {
    fn from(g: Grid) -> Self {
        g.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveKind {
    Empirical,
    Equilibrium,
    Transient,
    Mg1Bound,
}

impl CurveKind {
    pub fn name(self) -> &'static str {
        match self {
            CurveKind::Empirical => "empirical",
            CurveKind::Equilibrium => "equilibrium",
            CurveKind::Transient => "transient",
            CurveKind::Mg1Bound => "mg1_bound",
        }
    }
}

impl std::fmt::Display for CurveKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for CurveKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [CurveKind::Empirical, CurveKind::Equilibrium, CurveKind::Transient, CurveKind::Mg1Bound]
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown curve kind `{s}`"))
    }
}

/// A non-increasing function of the workload level, restricted to a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TailCurve {
    grid: Grid,
    values: Vec<f64>,
    stderr: Option<Vec<f64>>,
    kind: CurveKind,
}

impl TailCurve {
    pub fn new(kind: CurveKind, grid: Grid, values: Vec<f64>) -> Result<Self, CurveError> {
        if values.len() != grid.len() {
            return Err(CurveError::LengthMismatch { kind, values: values.len(), grid: grid.len() });
        }
        // Infinite-server trajectories exceed 1 when lambda > 1.
        let upper = match kind {
            CurveKind::Mg1Bound | CurveKind::Transient => f64::INFINITY,
            _ => 1.0 + MONOTONE_SLACK,
        };
        for (w, v) in grid.points().iter().zip(&values) {
            if !(v.is_finite() && *v >= -MONOTONE_SLACK && *v <= upper) {
                return Err(CurveError::OutOfRange { kind, w: *w, value: *v });
            }
        }
        if let Some(i) = values.windows(2).position(|p| p[1] > p[0] + MONOTONE_SLACK) {
            return Err(CurveError::NotMonotone { kind, w: grid.points()[i + 1] });
        }
        Ok(TailCurve { grid, values, stderr: None, kind })
    }

    pub fn zero(kind: CurveKind, grid: Grid) -> Self {
        let values = vec![0.0; grid.len()];
        TailCurve { grid, values, stderr: None, kind }
    }

    pub fn with_stderr(mut self, stderr: Vec<f64>) -> Result<Self, CurveError> {
        if stderr.len() != self.values.len() {
            return Err(CurveError::LengthMismatch {
                kind: self.kind,
                values: stderr.len(),
                grid: self.grid.len(),
            });
        }
        self.stderr = Some(stderr);
        Ok(self)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn stderr(&self) -> Option<&[f64]> {
        self.stderr.as_deref()
    }

    pub fn kind(&self) -> CurveKind {
        self.kind
    }

    pub fn at_zero(&self) -> f64 {
        self.values[0]
    }

    /// The curve restricted to grid points `<= max`.
    pub fn truncated(&self, max: f64) -> TailCurve {
        let grid = self.grid.truncated(max);
        let k = grid.len();
        TailCurve {
            grid,
            values: self.values[..k].to_vec(),
            stderr: self.stderr.as_ref().map(|s| s[..k].to_vec()),
            kind: self.kind,
        }
    }
}

/// `max_k |a(w_k) - b(w_k)|`, the grid surrogate of the sup norm.
pub fn sup_distance(a: &TailCurve, b: &TailCurve) -> Result<f64, CurveError> {
    if a.grid != b.grid {
        return Err(CurveError::GridMismatch);
    }
    Ok(a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant(v: f64, grid: &Grid) -> TailCurve {
        TailCurve::new(CurveKind::Empirical, grid.clone(), vec![v; grid.len()]).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(Grid::new(vec![]).is_err());
        assert!(Grid::new(vec![0.1, 0.2]).is_err());
        assert!(Grid::new(vec![0.0, 0.2, 0.2]).is_err());
        assert!(Grid::new(vec![0.0, 0.5, 0.2]).is_err());
        assert!(Grid::new(vec![0.0, 0.5, 1.0]).is_ok());
    }

    #[test]
    fn geometric_grid_shape() {
        let g = Grid::geometric(6.0, 201).unwrap();
        assert_eq!(g.len(), 201);
        assert_eq!(g.points()[0], 0.0);
        assert!((g.points()[1] - 0.05).abs() < 1e-15);
        assert_eq!(g.max(), 6.0);
    }

    #[test]
    fn count_below_is_strict() {
        let g = Grid::new(vec![0.0, 1.0, 2.0]).unwrap();
        assert_eq!(g.count_below(0.0), 0);
        assert_eq!(g.count_below(0.5), 1);
        assert_eq!(g.count_below(1.0), 1);
        assert_eq!(g.count_below(5.0), 3);
    }

    #[test]
    fn sup_distance_examples() {
        let g = Grid::uniform(5.0, 11).unwrap();
        let a = constant(0.3, &g);
        assert_eq!(sup_distance(&a, &a).unwrap(), 0.0);
        assert!((sup_distance(&a, &constant(0.1, &g)).unwrap() - 0.2).abs() < 1e-15);
        let other = Grid::uniform(5.0, 12).unwrap();
        assert_eq!(sup_distance(&a, &constant(0.1, &other)), Err(CurveError::GridMismatch));
    }

    #[test]
    fn curve_invariants_are_enforced() {
        let g = Grid::new(vec![0.0, 1.0]).unwrap();
        assert!(TailCurve::new(CurveKind::Empirical, g.clone(), vec![0.2, 0.3]).is_err());
        assert!(TailCurve::new(CurveKind::Empirical, g.clone(), vec![1.2, 0.3]).is_err());
        assert!(TailCurve::new(CurveKind::Mg1Bound, g.clone(), vec![1.7, 0.3]).is_ok());
        assert!(TailCurve::new(CurveKind::Empirical, g, vec![0.5]).is_err());
    }
}
