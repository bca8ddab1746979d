//! Cumulative work and busy-count accounting, per subset tag.
//!
//! For every tag the ledger keeps the work that arrived (`W_a`), the work of
//! completed jobs, the count of arrivals that found their server idle
//! (`rho_a`), the count of departures that left their server idle (`rho_d`)
//! and the time integral of the busy-server count. Contents present at time
//! zero are booked as arrivals at time zero.

use serde::{Deserialize, Serialize};

use crate::curve::Grid;

/// Relative tolerance per processed event for the floating-point identities.
pub const TOL_PER_EVENT: f64 = 1e-9;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TagLedger {
    pub work_arrived: f64,
    pub work_completed: f64,
    pub busy_integral: f64,
    pub rho_a: u64,
    pub rho_d: u64,
    pub arrivals: u64,
    pub blocked: u64,
    /// Busy servers right now, maintained from `rho_a - rho_d`.
    pub busy: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccountingLedger {
    tags: Vec<TagLedger>,
    last_time: f64,
    mark_grid: Grid,
    mark_hist: Vec<u64>,
}

impl AccountingLedger {
    pub fn new(num_tags: usize, mark_grid: Grid) -> Self {
        let k = mark_grid.len();
        AccountingLedger {
            tags: vec![TagLedger::default(); num_tags],
            last_time: 0.0,
            mark_grid,
            mark_hist: vec![0; k + 1],
        }
    }

    pub fn tag(&self, tag: u16) -> &TagLedger {
        &self.tags[tag as usize]
    }

    pub fn tags(&self) -> &[TagLedger] {
        &self.tags
    }

    pub(crate) fn tag_mut(&mut self, tag: u16) -> &mut TagLedger {
        &mut self.tags[tag as usize]
    }

    /// Integrates the busy counts up to `t`.
    pub(crate) fn advance(&mut self, t: f64) {
        let dt = t - self.last_time;
        if dt > 0.0 {
            for l in &mut self.tags {
                l.busy_integral += l.busy as f64 * dt;
            }
            self.last_time = t;
        }
    }

    /// Records the service requirement of an arriving customer (blocked or not).
    pub(crate) fn mark_arrival(&mut self, size: f64) {
        self.mark_hist[self.mark_grid.count_below(size)] += 1;
    }

    pub fn mark_grid(&self) -> &Grid {
        &self.mark_grid
    }

    /// `G(t, w_k)`: arrivals so far whose service requirement exceeds `w_k`.
    pub fn arrival_marks(&self) -> Vec<u64> {
        let k = self.mark_grid.len();
        let mut out = vec![0; k];
        let mut acc = 0;
        for j in (0..k).rev() {
            acc += self.mark_hist[j + 1];
            out[j] = acc;
        }
        out
    }

    pub fn total_blocked(&self) -> u64 {
        self.tags.iter().map(|l| l.blocked).sum()
    }
}

/// Ledger state together with quantities computed independently from the
/// servers at the same instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TagCheckpoint {
    pub ledger: TagLedger,
    /// Sum of server workloads in the subset.
    pub workload: f64,
    /// Work completed plus work already done on jobs in service.
    pub work_departed: f64,
    /// Busy servers counted by scanning the subset.
    pub busy_scan: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerCheckpoint {
    pub time: f64,
    pub events: u64,
    pub tags: Vec<TagCheckpoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Identity {
    /// Subset workload equals `W_a - W_d`.
    WorkBalance,
    /// Busy count equals `rho_a - rho_d`.
    BusyCount,
    /// `W_d` equals the busy-time integral.
    WorkDepletion,
    /// Without arrivals, the workload drops by exactly the busy-time integral.
    NoArrivalDepletion,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub identity: Identity,
    pub tag: u16,
    pub time: f64,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConservationReport {
    pub checks: u64,
    /// Number of no-arrival segments on which depletion was checked.
    pub quiet_segments: u64,
    pub violations: Vec<Violation>,
}

impl ConservationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn merge(&mut self, other: &ConservationReport) {
        self.checks += other.checks;
        self.quiet_segments += other.quiet_segments;
        self.violations.extend(other.violations.iter().cloned());
    }
}

/// Checks every ledger identity at every checkpoint, with quantities scaled by
/// `1/n` and a tolerance of `1e-9` per processed event.
pub fn check_conservation(checkpoints: &[LedgerCheckpoint], n: usize) -> ConservationReport {
    let scale = 1.0 / n as f64;
    let mut report = ConservationReport::default();
    let push = |report: &mut ConservationReport, identity, tag, time, lhs: f64, rhs: f64, tol: f64| {
        report.checks += 1;
        if !((lhs - rhs).abs() <= tol) {
            report.violations.push(Violation { identity, tag, time, lhs, rhs });
        }
    };
    for (idx, cp) in checkpoints.iter().enumerate() {
        let tol = TOL_PER_EVENT * (cp.events.max(1) as f64);
        for (tag, t) in cp.tags.iter().enumerate() {
            let tag = tag as u16;
            let l = &t.ledger;
            push(
                &mut report,
                Identity::WorkBalance,
                tag,
                cp.time,
                t.workload * scale,
                (l.work_arrived - t.work_departed) * scale,
                tol,
            );
            push(
                &mut report,
                Identity::BusyCount,
                tag,
                cp.time,
                t.busy_scan as f64,
                l.rho_a as f64 - l.rho_d as f64,
                0.0,
            );
            push(&mut report, Identity::WorkDepletion, tag, cp.time, t.work_departed * scale, l.busy_integral * scale, tol);

            if idx > 0 {
                let prev = &checkpoints[idx - 1].tags[tag as usize];
                if prev.ledger.arrivals == l.arrivals {
                    report.quiet_segments += 1;
                    push(
                        &mut report,
                        Identity::NoArrivalDepletion,
                        tag,
                        cp.time,
                        (t.workload - prev.workload) * scale,
                        -(l.busy_integral - prev.ledger.busy_integral) * scale,
                        tol,
                    );
                }
            }
        }
    }
    report
}
