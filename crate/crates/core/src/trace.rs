//! Observations collected by a simulation run.

use crate::curve::{CurveKind, Grid, TailCurve};
use crate::ledger::{check_conservation, ConservationReport, LedgerCheckpoint};

/// Routing outcome of one arrival.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrivalRecord {
    pub time: f64,
    pub server: u32,
    pub found_idle: bool,
    pub blocked: bool,
}

impl ArrivalRecord {
    /// The customer did not start service immediately.
    pub fn waited(&self) -> bool {
        self.blocked || !self.found_idle
    }
}

/// Sampling configuration of [`crate::engine::SystemState::run`].
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePlan {
    /// Snapshot every `interval` time units (at integer multiples).
    pub interval: Option<f64>,
    /// Additional snapshot instants.
    pub times: Vec<f64>,
    pub grid: Grid,
    /// Servers per tracked group (`m`).
    pub tracked_servers: usize,
    /// Disjoint groups `{0..m}, {m..2m}, ...` whose joint workloads are recorded.
    pub tracked_groups: usize,
    pub record_arrivals: bool,
    pub max_events: u64,
}

impl SamplePlan {
    pub fn every(interval: f64, grid: Grid) -> Self {
        SamplePlan {
            interval: Some(interval),
            times: Vec::new(),
            grid,
            tracked_servers: 0,
            tracked_groups: 0,
            record_arrivals: true,
            max_events: u64::MAX,
        }
    }

    pub fn at(times: Vec<f64>, grid: Grid) -> Self {
        SamplePlan { interval: None, times, ..SamplePlan::every(1.0, grid) }
    }

    pub fn tracking(mut self, m: usize, groups: usize) -> Self {
        self.tracked_servers = m;
        self.tracked_groups = groups;
        self
    }
}

/// Everything observed during one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub n: usize,
    pub lambda: f64,
    pub poisson: bool,
    pub symmetric_policy: bool,
    /// Service law has infinite variance; total-workload statistics are withheld.
    pub heavy_tail: bool,
    pub grid: Grid,
    pub num_tags: usize,
    pub start: f64,
    pub end: f64,
    pub times: Vec<f64>,
    /// Snapshot tail values, `times.len() x grid.len()`, scaled by `1/n`.
    pub curves: Vec<f64>,
    /// Per-tag tail values, `times.len() x num_tags x grid.len()`; empty with one tag.
    pub tag_curves: Vec<f64>,
    pub arrivals: Vec<ArrivalRecord>,
    pub tracked_servers: usize,
    pub tracked_groups: usize,
    /// Joint workloads, `times.len() x tracked_groups x tracked_servers`.
    pub joint: Vec<f64>,
    pub checkpoints: Vec<LedgerCheckpoint>,
    /// Arrival-mark counts `G(t, w)` at each snapshot, `times.len() x grid.len()`.
    pub marks: Vec<u64>,
    pub events_processed: u64,
    pub total_arrivals: u64,
    pub total_blocked: u64,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn curve_values(&self, snapshot: usize) -> &[f64] {
        let k = self.grid.len();
        &self.curves[snapshot * k..(snapshot + 1) * k]
    }

    pub fn curve(&self, snapshot: usize) -> TailCurve {
        TailCurve::new(CurveKind::Empirical, self.grid.clone(), self.curve_values(snapshot).to_vec())
            .expect("snapshot counts form a valid tail curve")
    }

    /// Tail values of subset `tag` at a snapshot (scaled by the total `n`).
    pub fn tag_curve_values(&self, snapshot: usize, tag: usize) -> &[f64] {
        if self.num_tags == 1 {
            return self.curve_values(snapshot);
        }
        let k = self.grid.len();
        let base = (snapshot * self.num_tags + tag) * k;
        &self.tag_curves[base..base + k]
    }

    pub fn joint_sample(&self, snapshot: usize, group: usize) -> &[f64] {
        let m = self.tracked_servers;
        let base = (snapshot * self.tracked_groups + group) * m;
        &self.joint[base..base + m]
    }

    pub fn marks_at(&self, snapshot: usize) -> &[u64] {
        let k = self.grid.len();
        &self.marks[snapshot * k..(snapshot + 1) * k]
    }

    pub fn conservation(&self) -> ConservationReport {
        check_conservation(&self.checkpoints, self.n)
    }

    /// First snapshot index with time strictly greater than `warmup`.
    pub fn first_after(&self, warmup: f64) -> usize {
        self.times.partition_point(|&t| t <= warmup)
    }
}
