//! Trajectory records shared by all simulators.

use std::time::Duration;

/// State of a run at one time point.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub time: f64,
    /// Normalized histogram over `E` (all zero after extinction).
    pub frequencies: Vec<f64>,
    /// Raw counts, for particle simulators.
    pub counts: Option<Vec<u64>>,
}

/// Seeded trajectory plus bookkeeping.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunRecord {
    pub seed: u64,
    pub replica: u64,
    pub snapshots: Vec<Snapshot>,
    /// Events fired, including no-op transitions.
    pub events: u64,
    /// Events that changed the state.
    pub effective_events: u64,
    pub final_time: f64,
    pub extinction_time: Option<f64>,
    pub speciation_time: Option<f64>,
    pub wall_clock: Duration,
    /// Filled in by the experiment harness.
    pub config_hash: Option<String>,
}

impl RunRecord {
    pub fn last(&self) -> Option<&Snapshot> {
        self.snapshots.last()
    }
}

/// Sorted snapshot times inside `[0, horizon]`.
pub(crate) fn schedule_within(times: &[f64], horizon: f64) -> Vec<f64> {
    let mut t: Vec<f64> = times
        .iter()
        .copied()
        .filter(|&s| (0.0..=horizon).contains(&s))
        .collect();
    t.sort_by(f64::total_cmp);
    t.dedup();
    t
}

/// Evenly spaced times `0, every, 2·every, ... <= horizon`.
pub fn regular_schedule(horizon: f64, every: f64) -> Vec<f64> {
    assert!(every > 0.0, "snapshot spacing must be positive");
    let n = (horizon / every).floor() as usize;
    (0..=n).map(|k| k as f64 * every).collect()
}
