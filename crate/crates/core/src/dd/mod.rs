//! Event-driven simulation of the original birth/death model with Gaussian
//! carrying capacity, Gaussian competition and rare Gaussian mutation.
//!
//! An individual at `x` gives birth at rate `birth_rate` and dies at rate
//! `death_scale · (C * N)_x / K_x`. A birth is a mutant with probability
//! `mutation_prob`; the offspring is displaced by a rounded
//! `Normal(0, mutation_std)` step.

use std::time::Instant;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::record::{schedule_within, RunRecord, Snapshot};
use crate::sampling::{exponential, unit, Fenwick};
use crate::seed::{stream, StreamRng, StreamTag};
use crate::space::PhenotypeSpace;

/// Re-draws of an out-of-lattice mutant before clamping to the boundary.
pub const MUTATION_REDRAWS: usize = 8;

/// Full competition convolution is recomputed this often to shed rounding drift.
const REFRESH_EVERY: u64 = 4096;

/// Parameters of the birth/death model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DDParams {
    pub half_width: usize,
    pub sigma_k: f64,
    /// Infinite means equal competition between all phenotypes.
    pub sigma_c: f64,
    #[serde(default = "defaults::capacity_scale")]
    pub capacity_scale: f64,
    #[serde(default = "defaults::one")]
    pub birth_rate: f64,
    #[serde(default = "defaults::one")]
    pub death_scale: f64,
    #[serde(default = "defaults::mutation_prob")]
    pub mutation_prob: f64,
    #[serde(default = "defaults::one")]
    pub mutation_std: f64,
    #[serde(default)]
    pub x_hat: i64,
}

mod defaults {
    pub fn capacity_scale() -> f64 {
        500.0
    }
    pub fn one() -> f64 {
        1.0
    }
    pub fn mutation_prob() -> f64 {
        0.015
    }
}

impl DDParams {
    /// The regime of the classic figure: `E = [-50, 50]`, `σ_K² = 1000`,
    /// `σ_C² = 600`, 1.5% of births mutate.
    pub fn classic() -> Self {
        Self {
            half_width: 50,
            sigma_k: 1000f64.sqrt(),
            sigma_c: 600f64.sqrt(),
            capacity_scale: defaults::capacity_scale(),
            birth_rate: 1.0,
            death_scale: 1.0,
            mutation_prob: defaults::mutation_prob(),
            mutation_std: 1.0,
            x_hat: 0,
        }
    }

    pub fn validate(&self) -> Result<PhenotypeSpace> {
        let space = PhenotypeSpace::new(self.half_width)?;
        let positive = [
            ("sigma_k", self.sigma_k),
            ("sigma_c", self.sigma_c),
            ("capacity_scale", self.capacity_scale),
            ("birth_rate", self.birth_rate),
            ("death_scale", self.death_scale),
            ("mutation_std", self.mutation_std),
        ];
        for (field, v) in positive {
            if !(v > 0.0) || v.is_nan() {
                return Err(invalid(field, "must be strictly positive"));
            }
        }
        for (field, v) in &positive[2..] {
            if v.is_infinite() {
                return Err(invalid(field, "must be finite"));
            }
        }
        if !(0.0..=1.0).contains(&self.mutation_prob) {
            return Err(invalid("mutation_prob", "must lie in [0, 1]"));
        }
        if space.index(self.x_hat).is_none() {
            return Err(invalid("x_hat", "must lie in the lattice"));
        }
        Ok(space)
    }
}

/// Individuals per phenotype.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PopulationCounts {
    counts: Vec<u64>,
    total: u64,
}

impl PopulationCounts {
    pub fn new(counts: Vec<u64>) -> Self {
        let total = counts.iter().sum();
        Self { counts, total }
    }

    pub fn empty(space: PhenotypeSpace) -> Self {
        Self::new(vec![0; space.len()])
    }

    /// `n` individuals at phenotype `x`.
    pub fn monomorphic(space: PhenotypeSpace, x: i64, n: u64) -> Self {
        let mut counts = vec![0; space.len()];
        counts[space.idx(x)] = n;
        Self { counts, total: n }
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn frequencies(&self) -> Vec<f64> {
        if self.total == 0 {
            return vec![0.0; self.counts.len()];
        }
        let n = self.total as f64;
        self.counts.iter().map(|&c| c as f64 / n).collect()
    }

    pub(crate) fn increment(&mut self, i: usize) {
        self.counts[i] += 1;
        self.total += 1;
    }

    pub(crate) fn decrement(&mut self, i: usize) {
        assert!(self.counts[i] > 0, "death at empty site");
        self.counts[i] -= 1;
        self.total -= 1;
    }
}

/// Per-site birth and death rates.
#[derive(Debug, Clone, PartialEq)]
pub struct DdRates {
    pub birth: Vec<f64>,
    pub death: Vec<f64>,
}

impl DdRates {
    pub fn total(&self) -> f64 {
        self.birth.iter().sum::<f64>() + self.death.iter().sum::<f64>()
    }
}

/// Precomputed capacity and competition arrays.
#[derive(Debug, Clone)]
struct DdModel {
    space: PhenotypeSpace,
    params: DDParams,
    capacity: Vec<f64>,
    /// `C_z` for `z = -2L..=2L`.
    competition: Vec<f64>,
}

impl DdModel {
    fn new(params: &DDParams) -> Result<Self> {
        let space = params.validate()?;
        let capacity = space
            .sites()
            .map(|x| {
                let d = (x - params.x_hat) as f64;
                let k = params.capacity_scale * (-d * d / (2.0 * params.sigma_k * params.sigma_k)).exp();
                k.max(crate::kernels::CAPACITY_FLOOR)
            })
            .collect();
        let reach = 2 * params.half_width as i64;
        let competition = (-reach..=reach)
            .map(|z| {
                if params.sigma_c.is_infinite() {
                    1.0
                } else {
                    (-((z * z) as f64) / (2.0 * params.sigma_c * params.sigma_c)).exp()
                }
            })
            .collect();
        Ok(Self {
            space,
            params: params.clone(),
            capacity,
            competition,
        })
    }

    #[inline]
    fn c(&self, x: usize, z: usize) -> f64 {
        self.competition[x + 2 * self.space.half_width() - z]
    }

    fn convolution(&self, counts: &[u64]) -> Vec<f64> {
        let n = self.space.len();
        (0..n)
            .map(|x| (0..n).map(|z| self.c(x, z) * counts[z] as f64).sum())
            .collect()
    }

    #[inline]
    fn death_rate(&self, x: usize, count: u64, conv: f64) -> f64 {
        self.params.death_scale * count as f64 * conv / self.capacity[x]
    }
}

/// Birth and death rates of every site in `state`.
pub fn dd_event_rates(state: &PopulationCounts, params: &DDParams) -> Result<DdRates> {
    let model = DdModel::new(params)?;
    if state.len() != model.space.len() {
        return Err(Error::DimensionMismatch {
            expected: model.space.len(),
            actual: state.len(),
        });
    }
    let conv = model.convolution(state.counts());
    let birth = state
        .counts()
        .iter()
        .map(|&c| params.birth_rate * c as f64)
        .collect();
    let death = state
        .counts()
        .iter()
        .enumerate()
        .map(|(x, &c)| model.death_rate(x, c, conv[x]))
        .collect();
    Ok(DdRates { birth, death })
}

/// A single drawn event.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DdEvent {
    /// Parent at index `parent`, offspring placed at index `child`.
    Birth { parent: usize, child: usize },
    Death { site: usize },
}

/// Result of one simulation step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepOutcome {
    Event { dt: f64, event: DdEvent },
    /// The population is empty; no event can fire.
    Extinct,
}

/// Exact Gillespie simulator.
///
/// Birth rates occupy Fenwick slots `0..n`, death rates slots `n..2n`.
pub struct DdSimulator {
    model: DdModel,
    state: PopulationCounts,
    conv: Vec<f64>,
    rates: Fenwick,
    buffer: Vec<f64>,
    clock: StreamRng,
    choice: StreamRng,
    displacement: StreamRng,
    normal: Normal<f64>,
    time: f64,
    events: u64,
}

impl DdSimulator {
    pub fn new(params: &DDParams, initial: PopulationCounts, seed: u64, replica: u64) -> Result<Self> {
        let model = DdModel::new(params)?;
        let n = model.space.len();
        if initial.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: initial.len(),
            });
        }
        let normal = Normal::new(0.0, params.mutation_std)
            .map_err(|e| invalid("mutation_std", e.to_string()))?;
        let mut sim = Self {
            conv: vec![0.0; n],
            rates: Fenwick::new(2 * n),
            buffer: vec![0.0; 2 * n],
            clock: stream(seed, replica, StreamTag::EventClock),
            choice: stream(seed, replica, StreamTag::EventChoice),
            displacement: stream(seed, replica, StreamTag::MutationDisplacement),
            normal,
            model,
            state: initial,
            time: 0.0,
            events: 0,
        };
        sim.refresh();
        Ok(sim)
    }

    pub fn state(&self) -> &PopulationCounts {
        &self.state
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn events(&self) -> u64 {
        self.events
    }

    pub fn space(&self) -> PhenotypeSpace {
        self.model.space
    }

    /// Current rates, as maintained incrementally.
    pub fn rates(&self) -> DdRates {
        let n = self.model.space.len();
        DdRates {
            birth: (0..n).map(|i| self.rates.get(i)).collect(),
            death: (0..n).map(|i| self.rates.get(n + i)).collect(),
        }
    }

    fn refresh(&mut self) {
        self.conv = self.model.convolution(self.state.counts());
        self.rebuild_rates();
    }

    fn rebuild_rates(&mut self) {
        let n = self.model.space.len();
        for x in 0..n {
            let c = self.state.counts()[x];
            self.buffer[x] = self.model.params.birth_rate * c as f64;
            self.buffer[n + x] = self.model.death_rate(x, c, self.conv[x]);
        }
        self.rates.rebuild(&self.buffer);
    }

    /// Draws the waiting time and the event without applying it.
    pub fn draw(&mut self) -> StepOutcome {
        if self.state.total() == 0 {
            return StepOutcome::Extinct;
        }
        let total = self.rates.total();
        let dt = exponential(&mut self.clock, total);
        let slot = self.rates.search(unit(&mut self.choice) * total);
        let n = self.model.space.len();
        let event = if slot < n {
            DdEvent::Birth {
                parent: slot,
                child: self.offspring_site(slot),
            }
        } else {
            DdEvent::Death { site: slot - n }
        };
        StepOutcome::Event { dt, event }
    }

    fn offspring_site(&mut self, parent: usize) -> usize {
        let p = self.model.params.mutation_prob;
        if p == 0.0 || unit(&mut self.displacement) >= p {
            return parent;
        }
        let n = self.model.space.len() as i64;
        let mut proposal = 0;
        for _ in 0..MUTATION_REDRAWS {
            let step = self.normal.sample(&mut self.displacement).round() as i64;
            proposal = parent as i64 + step;
            if (0..n).contains(&proposal) {
                return proposal as usize;
            }
        }
        proposal.clamp(0, n - 1) as usize
    }

    /// Applies a drawn event, updating the convolution and all rates.
    pub fn apply(&mut self, dt: f64, event: DdEvent) {
        let n = self.model.space.len();
        let (site, sign) = match event {
            DdEvent::Birth { child, .. } => {
                self.state.increment(child);
                (child, 1.0)
            }
            DdEvent::Death { site } => {
                self.state.decrement(site);
                (site, -1.0)
            }
        };
        self.time += dt;
        self.events += 1;
        if self.events % REFRESH_EVERY == 0 {
            self.refresh();
            return;
        }
        for x in 0..n {
            self.conv[x] += sign * self.model.c(x, site);
        }
        self.rebuild_rates();
    }

    /// Draws and applies one event.
    pub fn step(&mut self) -> StepOutcome {
        let outcome = self.draw();
        if let StepOutcome::Event { dt, event } = outcome {
            self.apply(dt, event);
        }
        outcome
    }
}

/// Simulates until `horizon` (or extinction), recording normalized
/// histograms at the requested times plus the terminal state.
pub fn run_dd(
    params: &DDParams,
    initial: PopulationCounts,
    horizon: f64,
    snapshot_times: &[f64],
    seed: u64,
    replica: u64,
) -> Result<RunRecord> {
    if !(horizon >= 0.0) {
        return Err(invalid("horizon", "must be nonnegative"));
    }
    let started = Instant::now();
    let mut sim = DdSimulator::new(params, initial, seed, replica)?;
    let schedule = schedule_within(snapshot_times, horizon);
    let mut next = 0;
    let mut record = RunRecord {
        seed,
        replica,
        ..RunRecord::default()
    };
    let snap = |sim: &DdSimulator, t: f64| Snapshot {
        time: t,
        frequencies: sim.state().frequencies(),
        counts: Some(sim.state().counts().to_vec()),
    };
    let end = loop {
        match sim.draw() {
            StepOutcome::Extinct => {
                record.extinction_time = Some(sim.time());
                break sim.time();
            }
            StepOutcome::Event { dt, event } => {
                let t_next = sim.time() + dt;
                while next < schedule.len() && schedule[next] < t_next {
                    record.snapshots.push(snap(&sim, schedule[next]));
                    next += 1;
                }
                if t_next > horizon {
                    break horizon;
                }
                sim.apply(dt, event);
            }
        }
    };
    while next < schedule.len() && schedule[next] <= end {
        record.snapshots.push(snap(&sim, schedule[next]));
        next += 1;
    }
    if record.snapshots.last().map_or(true, |s| s.time < end) {
        record.snapshots.push(snap(&sim, end));
    }
    record.events = sim.events();
    record.effective_events = sim.events();
    record.final_time = end;
    record.wall_clock = started.elapsed();
    Ok(record)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(l: usize) -> DDParams {
        DDParams {
            half_width: l,
            sigma_k: 3.0,
            sigma_c: 2.0,
            capacity_scale: 20.0,
            birth_rate: 1.0,
            death_scale: 1.0,
            mutation_prob: 0.1,
            mutation_std: 1.0,
            x_hat: 0,
        }
    }

    #[test]
    fn monomorphic_death_rate_is_n_squared_over_c() {
        let p = small(3);
        let e = p.validate().unwrap();
        let st = PopulationCounts::monomorphic(e, 0, 12);
        let r = dd_event_rates(&st, &p).unwrap();
        assert!((r.death[e.idx(0)] - 144.0 / 20.0).abs() < 1e-12);
        assert_eq!(r.birth[e.idx(0)], 12.0);
    }

    #[test]
    fn empty_population_has_zero_rates() {
        let p = small(3);
        let e = p.validate().unwrap();
        let r = dd_event_rates(&PopulationCounts::empty(e), &p).unwrap();
        assert_eq!(r.total(), 0.0);
    }

    #[test]
    fn single_death_leads_to_extinction_signal() {
        let mut p = small(2);
        p.birth_rate = 1e-300;
        let e = p.validate().unwrap();
        let mut sim = DdSimulator::new(&p, PopulationCounts::monomorphic(e, 0, 1), 7, 0).unwrap();
        assert!(matches!(
            sim.step(),
            StepOutcome::Event {
                event: DdEvent::Death { .. },
                ..
            }
        ));
        assert_eq!(sim.step(), StepOutcome::Extinct);
    }

    #[test]
    fn no_mutation_means_offspring_copy_parent() {
        let mut p = small(4);
        p.mutation_prob = 0.0;
        let e = p.validate().unwrap();
        let mut sim = DdSimulator::new(&p, PopulationCounts::monomorphic(e, 1, 15), 3, 0).unwrap();
        for _ in 0..5000 {
            if let StepOutcome::Event {
                event: DdEvent::Birth { parent, child },
                ..
            } = sim.step()
            {
                assert_eq!(parent, child);
            }
        }
        let occupied: Vec<_> = sim.state().counts().iter().enumerate().filter(|(_, &c)| c > 0).collect();
        assert!(occupied.iter().all(|(i, _)| *i == e.idx(1)));
    }

    #[test]
    fn incremental_rates_track_direct_evaluation() {
        let p = small(5);
        let e = p.validate().unwrap();
        let mut sim = DdSimulator::new(&p, PopulationCounts::monomorphic(e, -2, 30), 11, 0).unwrap();
        for _ in 0..3000 {
            if sim.step() == StepOutcome::Extinct {
                break;
            }
        }
        let direct = dd_event_rates(sim.state(), &p).unwrap();
        let tracked = sim.rates();
        for i in 0..e.len() {
            assert!((direct.death[i] - tracked.death[i]).abs() < 1e-9 * (1.0 + direct.death[i]));
            assert_eq!(direct.birth[i], tracked.birth[i]);
        }
    }

    #[test]
    fn zero_horizon_returns_initial_histogram() {
        let p = small(3);
        let e = p.validate().unwrap();
        let rec = run_dd(&p, PopulationCounts::monomorphic(e, 1, 10), 0.0, &[0.0], 1, 0).unwrap();
        assert_eq!(rec.snapshots.len(), 1);
        assert_eq!(rec.snapshots[0].time, 0.0);
        assert_eq!(rec.snapshots[0].frequencies[e.idx(1)], 1.0);
        assert_eq!(rec.events, 0);
    }

    #[test]
    fn invalid_params_name_field() {
        let mut p = small(3);
        p.mutation_prob = 1.5;
        assert!(matches!(
            p.validate(),
            Err(Error::InvalidConfig { field: "mutation_prob", .. })
        ));
        let mut p = small(3);
        p.death_scale = 0.0;
        assert!(matches!(
            p.validate(),
            Err(Error::InvalidConfig { field: "death_scale", .. })
        ));
    }
}
