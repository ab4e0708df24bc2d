//! Moran particle system for the mutation-selection model and its
//! deterministic and stationary descriptions.
//!
//! `N` particles sit on `E`; with `π = π^N` the empirical distribution, one
//! particle moves from `x` to `y` at rate
//!
//! ```text
//! selection: (N/2) π_x (1/2 + σ(m_y(π) - m_x(π))) π_y
//! mutation:  (N/2) μ π_x
//! ```
//!
//! Summed over targets the selection rate out of `x` is
//! `(N/2) π_x (1/2 + σ(m̄ - m_x))`, so the total event rate is the constant
//! `N/4 + (N/2) μ (2L + 1)` (counting `x -> x` no-ops). The simulator draws
//! the event clock from that constant and picks the sites conditionally.

use std::time::Instant;

use rand::RngCore;

use crate::dd::PopulationCounts;
use crate::error::{invalid, Error, Result};
use crate::fitness::{dot, fitness_into};
use crate::kernels::KernelSet;
use crate::params::ModelParams;
use crate::record::{schedule_within, RunRecord, Snapshot};
use crate::sampling::{categorical, exponential, unit};
use crate::seed::{stream, StreamRng, StreamTag};
use crate::space::PhenotypeSpace;

pub mod density;
pub mod mcmc;
pub mod ode;
pub mod speciation;

pub use density::{log_stationary_density, StationaryDensity};
pub use mcmc::{mcmc_sample_stationary, McmcOptions, McmcResult};
pub use ode::{integrate_ode, ode_rhs, IntegrateOptions, OdeSolution, OdeVariant, StopReason};
pub use speciation::{speciation_time, SpeciationCriterion, CRITERION_VERSION};

/// Particle counts of the Moran chain; the total is the population size `N`.
pub type ParticleState = PopulationCounts;

/// Full recomputation of `m` every this many effective events, bounding
/// drift from the incremental updates.
const REFRESH_EVERY: u64 = 4096;

/// Kernels plus `(σ, μ, N)`.
#[derive(Debug, Clone)]
pub struct MoranParams {
    pub kernels: KernelSet,
    pub params: ModelParams,
}

impl MoranParams {
    pub fn new(kernels: KernelSet, params: ModelParams) -> Result<Self> {
        params.validate()?;
        Ok(Self { kernels, params })
    }

    pub fn space(&self) -> PhenotypeSpace {
        self.kernels.space()
    }

    /// `N δ_x`.
    pub fn monomorphic(&self, x: i64) -> ParticleState {
        PopulationCounts::monomorphic(self.space(), x, self.params.population)
    }

    /// Constant total event rate, no-ops included.
    pub fn total_rate(&self) -> f64 {
        let n = self.params.population as f64;
        n / 4.0 + 0.5 * n * self.params.mu * self.space().len() as f64
    }
}

/// Ordered-pair rate table for one state.
#[derive(Debug, Clone, PartialEq)]
pub struct MoranRates {
    n: usize,
    selection: Vec<f64>,
    mutation: Vec<f64>,
}

impl MoranRates {
    /// Selection rate for `x -> y`, by storage index.
    pub fn selection(&self, x: usize, y: usize) -> f64 {
        self.selection[x * self.n + y]
    }

    pub fn mutation(&self, x: usize, y: usize) -> f64 {
        self.mutation[x * self.n + y]
    }

    /// Sum over all ordered pairs, `x -> x` included.
    pub fn total(&self) -> f64 {
        self.selection.iter().sum::<f64>() + self.mutation.iter().sum::<f64>()
    }
}

fn check_state(state: &ParticleState, p: &MoranParams) -> Result<()> {
    if state.len() != p.space().len() {
        return Err(Error::DimensionMismatch {
            expected: p.space().len(),
            actual: state.len(),
        });
    }
    if state.total() != p.params.population {
        return Err(invalid(
            "initial",
            format!("state holds {} particles, N = {}", state.total(), p.params.population),
        ));
    }
    Ok(())
}

/// Every transition rate out of `state`.
pub fn moran_rates(state: &ParticleState, p: &MoranParams) -> Result<MoranRates> {
    check_state(state, p)?;
    let space = p.space();
    let n = space.len();
    let pi = state.frequencies();
    let mut m = vec![0.0; n];
    fitness_into(&pi, &p.kernels, &mut m);
    let half_n = 0.5 * p.params.population as f64;
    let sigma = p.params.sigma;
    let mut selection = vec![0.0; n * n];
    let mut mutation = vec![0.0; n * n];
    for x in 0..n {
        for y in 0..n {
            let bias = 0.5 + sigma * (m[y] - m[x]);
            let rate = half_n * pi[x] * bias * pi[y];
            if rate < 0.0 {
                return Err(Error::NegativeRate {
                    from: space.site(x),
                    to: space.site(y),
                    rate,
                });
            }
            selection[x * n + y] = rate;
            mutation[x * n + y] = half_n * p.params.mu * pi[x];
        }
    }
    Ok(MoranRates {
        n,
        selection,
        mutation,
    })
}

/// One event of the chain; `from == to` is a no-op.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MoranEvent {
    Selection { from: usize, to: usize },
    Mutation { from: usize, to: usize },
}

impl MoranEvent {
    pub fn sites(self) -> (usize, usize) {
        match self {
            MoranEvent::Selection { from, to } | MoranEvent::Mutation { from, to } => (from, to),
        }
    }
}

/// Exact event-driven simulator. The clock stream decides waiting times and
/// the event kind; the choice stream `R` picks the sites.
pub struct MoranSimulator<R: RngCore = StreamRng> {
    params: MoranParams,
    state: ParticleState,
    pi: Vec<f64>,
    m: Vec<f64>,
    weights: Vec<f64>,
    clock: StreamRng,
    choice: R,
    time: f64,
    events: u64,
    effective: u64,
}

impl MoranSimulator<StreamRng> {
    pub fn new(params: MoranParams, initial: ParticleState, seed: u64, replica: u64) -> Result<Self> {
        Self::with_streams(
            params,
            initial,
            stream(seed, replica, StreamTag::EventClock),
            stream(seed, replica, StreamTag::EventChoice),
        )
    }
}

impl<R: RngCore> MoranSimulator<R> {
    pub fn with_streams(params: MoranParams, initial: ParticleState, clock: StreamRng, choice: R) -> Result<Self> {
        check_state(&initial, &params)?;
        let n = params.space().len();
        let mut sim = Self {
            pi: initial.frequencies(),
            m: vec![0.0; n],
            weights: vec![0.0; n],
            params,
            state: initial,
            clock,
            choice,
            time: 0.0,
            events: 0,
            effective: 0,
        };
        sim.refresh();
        Ok(sim)
    }

    pub fn state(&self) -> &ParticleState {
        &self.state
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.pi
    }

    /// Fitness at the current state, as maintained incrementally.
    pub fn fitness(&self) -> &[f64] {
        &self.m
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn events(&self) -> u64 {
        self.events
    }

    pub fn effective_events(&self) -> u64 {
        self.effective
    }

    fn refresh(&mut self) {
        let n_total = self.params.params.population as f64;
        for (p, &c) in self.pi.iter_mut().zip(self.state.counts()) {
            *p = c as f64 / n_total;
        }
        fitness_into(&self.pi, &self.params.kernels, &mut self.m);
    }

    /// Draws the waiting time and the event without applying it.
    pub fn draw(&mut self) -> (f64, MoranEvent) {
        let total = self.params.total_rate();
        let dt = exponential(&mut self.clock, total);
        let n_sites = self.pi.len();
        let n = self.params.params.population as f64;
        let selection_share = 0.25 * n / total;
        let kind = unit(&mut self.clock);
        let sigma = self.params.params.sigma;
        if kind < selection_share {
            let mbar = dot(&self.pi, &self.m);
            for x in 0..n_sites {
                self.weights[x] = self.pi[x] * (0.5 + sigma * (mbar - self.m[x])).max(0.0);
            }
            let total_w: f64 = self.weights.iter().sum();
            let from = categorical(&self.weights, total_w, unit(&mut self.choice));
            let mx = self.m[from];
            for y in 0..n_sites {
                self.weights[y] = (0.5 + sigma * (self.m[y] - mx)).max(0.0) * self.pi[y];
            }
            let total_w: f64 = self.weights.iter().sum();
            let to = categorical(&self.weights, total_w, unit(&mut self.choice));
            (dt, MoranEvent::Selection { from, to })
        } else {
            let from = categorical(&self.pi, 1.0, unit(&mut self.choice));
            let to = ((unit(&mut self.choice) * n_sites as f64) as usize).min(n_sites - 1);
            (dt, MoranEvent::Mutation { from, to })
        }
    }

    /// Applies a drawn event.
    pub fn apply(&mut self, dt: f64, event: MoranEvent) {
        self.time += dt;
        self.events += 1;
        let (from, to) = event.sites();
        if from == to {
            return;
        }
        self.state.decrement(from);
        self.state.increment(to);
        self.effective += 1;
        if self.effective % REFRESH_EVERY == 0 {
            self.refresh();
            return;
        }
        let inv_n = 1.0 / self.params.params.population as f64;
        self.pi[from] = self.state.counts()[from] as f64 * inv_n;
        self.pi[to] = self.state.counts()[to] as f64 * inv_n;
        let n = self.pi.len();
        let s = self.params.kernels.interaction();
        for z in 0..n {
            self.m[z] += (s[z * n + to] - s[z * n + from]) * inv_n;
        }
    }

    pub fn step(&mut self) -> (f64, MoranEvent) {
        let (dt, event) = self.draw();
        self.apply(dt, event);
        (dt, event)
    }

    fn snapshot(&self, time: f64) -> Snapshot {
        Snapshot {
            time,
            frequencies: self.pi.clone(),
            counts: Some(self.state.counts().to_vec()),
        }
    }
}

/// Horizon, snapshot schedule, seeding and optional early stop.
#[derive(Debug, Clone, Default)]
pub struct MoranRunOptions {
    pub horizon: f64,
    pub snapshot_times: Vec<f64>,
    pub seed: u64,
    pub replica: u64,
    /// Stop at the first snapshot where this criterion fires.
    pub stop_on_speciation: Option<SpeciationCriterion>,
}

/// Simulates from `initial` and records snapshots plus the terminal state.
pub fn run_moran(p: &MoranParams, initial: ParticleState, options: &MoranRunOptions) -> Result<RunRecord> {
    if !(options.horizon > 0.0) {
        return Err(invalid("horizon", "must be positive"));
    }
    let sim = MoranSimulator::new(p.clone(), initial, options.seed, options.replica)?;
    drive(sim, options)
}

/// Same as [`run_moran`] with caller-supplied random streams.
pub fn run_moran_with<R: RngCore>(sim: MoranSimulator<R>, options: &MoranRunOptions) -> Result<RunRecord> {
    if !(options.horizon > 0.0) {
        return Err(invalid("horizon", "must be positive"));
    }
    drive(sim, options)
}

fn drive<R: RngCore>(mut sim: MoranSimulator<R>, options: &MoranRunOptions) -> Result<RunRecord> {
    let started = Instant::now();
    let schedule = schedule_within(&options.snapshot_times, options.horizon);
    let mut record = RunRecord {
        seed: options.seed,
        replica: options.replica,
        ..RunRecord::default()
    };
    let mut next = 0;
    let mut stopped = None;
    'run: loop {
        let (dt, event) = sim.draw();
        let t_next = sim.time() + dt;
        while next < schedule.len() && schedule[next] < t_next {
            let snap = sim.snapshot(schedule[next]);
            next += 1;
            let fired = options
                .stop_on_speciation
                .as_ref()
                .is_some_and(|c| c.fires(&snap.frequencies));
            record.snapshots.push(snap);
            if fired {
                stopped = record.snapshots.last().map(|s| s.time);
                break 'run;
            }
        }
        if t_next > options.horizon {
            break;
        }
        sim.apply(dt, event);
    }
    let end = stopped.unwrap_or(options.horizon);
    if record.snapshots.last().map(|s| s.time) != Some(end) {
        record.snapshots.push(sim.snapshot(end));
    }
    record.speciation_time = stopped;
    record.events = sim.events();
    record.effective_events = sim.effective_events();
    record.final_time = end;
    record.wall_clock = started.elapsed();
    Ok(record)
}

/// Wraps a generator so every `u64` is bit-complemented. Uniforms drawn
/// from it become `1 - 2^-53 - u`, which turns left-scan inverse-CDF choices
/// over mirrored weights into the mirror image of the original choices.
#[derive(Debug, Clone)]
pub struct Complemented<R>(pub R);

impl<R: RngCore> RngCore for Complemented<R> {
    fn next_u32(&mut self) -> u32 {
        !self.0.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        !self.0.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.0.fill_bytes(dst);
        dst.iter_mut().for_each(|b| *b = !*b);
    }
}
