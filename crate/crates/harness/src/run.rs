//! Experiment orchestration: runs the model a config selects, writes CSV
//! tables, SVG plots and a manifest, and reports hard assertion failures.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;
use sympatric::conditioned::{fitness_w, iterate_with, FixedPointOptions, MutationMatrix};
use sympatric::dd::{run_dd, PopulationCounts};
use sympatric::landscape::{
    bifurcation_scan, bound_audit, find_stationary_points, verify_stationarity, AuditRow, BoundAuditOptions,
    SearchOptions, StationaryPoint,
};
use sympatric::moran::{
    integrate_ode, mcmc_sample_stationary, run_moran, speciation_time, IntegrateOptions, McmcOptions, MoranParams,
    MoranRunOptions, SpeciationCriterion, StationaryDensity,
};
use sympatric::{KernelSet, PhenotypeSpace, RunRecord, SimplexDistribution};

use crate::config::{ExperimentConfig, ModelKind};
use crate::csv::{Table, TableMeta};
use crate::svg::{self, Labels, Series};

/// Where and how artifacts are written.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    /// Put a generation-time comment in SVG files.
    pub timestamp: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReplicaEntry {
    pub index: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    pub events: u64,
    pub wall_clock_s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub speciation_time: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// What a run produced. Serialized as `manifest.toml`.
#[derive(Debug, Clone, Serialize)]
pub struct RunOutcome {
    pub name: String,
    pub model: String,
    pub config_hash: String,
    pub seed: u64,
    pub software_version: String,
    pub criterion_version: String,
    pub wall_clock_s: f64,
    /// Strict audit rows whose hypotheses held and conclusions failed.
    pub hard_failures: usize,
    pub files: Vec<String>,
    /// Human-readable `key = value` findings, also in `summary.csv`.
    pub summary: Vec<(String, String)>,
    pub replicas: Vec<ReplicaEntry>,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.hard_failures > 0 {
            1
        } else {
            0
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.summary.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

struct Writer<'a> {
    dir: &'a Path,
    meta: TableMeta,
    timestamp: bool,
    files: Vec<String>,
}

impl Writer<'_> {
    fn table(&mut self, file: &str, table: &Table) -> Result<()> {
        table.write(&self.dir.join(file))?;
        self.files.push(file.into());
        Ok(())
    }

    fn svg(&mut self, file: &str, text: String) -> Result<()> {
        let path = self.dir.join(file);
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        self.files.push(file.into());
        Ok(())
    }

    fn new_table(&self, schema: &str, columns: &[&str]) -> Table {
        Table::new(schema, &self.meta, columns)
    }
}

struct Collected {
    summary: Vec<(String, String)>,
    replicas: Vec<ReplicaEntry>,
    hard_failures: usize,
}

impl Collected {
    fn new() -> Self {
        Self {
            summary: Vec::new(),
            replicas: Vec::new(),
            hard_failures: 0,
        }
    }

    fn note(&mut self, key: &str, value: impl ToString) {
        self.summary.push((key.into(), value.to_string()));
    }
}

/// Runs `cfg`, writing artifacts into `options.out_dir`.
pub fn run_experiment(cfg: &ExperimentConfig, options: &RunOptions) -> Result<RunOutcome> {
    cfg.validate()?;
    let started = Instant::now();
    std::fs::create_dir_all(&options.out_dir).with_context(|| format!("creating {}", options.out_dir.display()))?;
    let criterion_version = cfg.criterion.version().to_string();
    let mut w = Writer {
        dir: &options.out_dir,
        meta: TableMeta {
            config_hash: cfg.hash(),
            criterion_version: criterion_version.clone(),
        },
        timestamp: options.timestamp,
        files: Vec::new(),
    };
    std::fs::write(options.out_dir.join("config.toml"), cfg.to_toml())?;
    w.files.push("config.toml".into());
    info!("running {} ({}) into {}", cfg.name, cfg.model.label(), options.out_dir.display());

    let mut c = Collected::new();
    match cfg.model {
        ModelKind::DdOriginal => dd_original(cfg, &mut w, &mut c)?,
        ModelKind::ConditionedDd => conditioned(cfg, &mut w, &mut c)?,
        ModelKind::Moran => moran(cfg, &mut w, &mut c)?,
        ModelKind::Ode => ode(cfg, &mut w, &mut c)?,
        ModelKind::Landscape => landscape(cfg, &mut w, &mut c)?,
        ModelKind::Mcmc => mcmc(cfg, &mut w, &mut c)?,
        ModelKind::Bifurcation => bifurcation(cfg, &mut w, &mut c)?,
        ModelKind::SpeciationSweep => sweep(cfg, &mut w, &mut c)?,
    }

    let mut summary = w.new_table("summary v1", &["key", "value"]);
    for (k, v) in &c.summary {
        summary.row(&[k.as_str().into(), v.as_str().into()]);
    }
    w.table("summary.csv", &summary)?;

    let mut outcome = RunOutcome {
        name: cfg.name.clone(),
        model: cfg.model.label().into(),
        config_hash: w.meta.config_hash.clone(),
        seed: cfg.seed,
        software_version: env!("CARGO_PKG_VERSION").into(),
        criterion_version,
        wall_clock_s: 0.0,
        hard_failures: c.hard_failures,
        files: w.files,
        summary: c.summary,
        replicas: c.replicas,
    };
    outcome.files.push("manifest.toml".into());
    outcome.wall_clock_s = started.elapsed().as_secs_f64();
    let manifest = toml::to_string(&outcome).context("serializing manifest")?;
    std::fs::write(options.out_dir.join("manifest.toml"), manifest)?;
    Ok(outcome)
}

fn replica_entry(index: usize, mu: Option<f64>, rec: &Result<RunRecord, String>) -> ReplicaEntry {
    match rec {
        Ok(r) => ReplicaEntry {
            index,
            mu,
            events: r.events,
            wall_clock_s: r.wall_clock.as_secs_f64(),
            speciation_time: r.speciation_time,
            error: None,
        },
        Err(e) => ReplicaEntry {
            index,
            mu,
            events: 0,
            wall_clock_s: 0.0,
            speciation_time: None,
            error: Some(e.clone()),
        },
    }
}

/// Up to `k` evenly spaced indices of `0..n`, always including both ends.
fn spread(n: usize, k: usize) -> Vec<usize> {
    if n <= k {
        return (0..n).collect();
    }
    let mut v: Vec<usize> = (0..k).map(|i| i * (n - 1) / (k - 1)).collect();
    v.dedup();
    v
}

fn snapshot_plots(
    w: &mut Writer<'_>,
    space: PhenotypeSpace,
    what: &str,
    time_label: &str,
    times: &[f64],
    frames: &[&[f64]],
) -> Result<()> {
    let xs: Vec<f64> = space.sites().map(|x| x as f64).collect();
    let series: Vec<Series> = spread(frames.len(), 8)
        .into_iter()
        .map(|i| Series {
            label: format!("{time_label} {}", times[i]),
            points: xs.iter().copied().zip(frames[i].iter().copied()).collect(),
        })
        .collect();
    let ts = w.timestamp;
    w.svg(
        "lines.svg",
        svg::line_plot(&Labels::new(what, "phenotype x", "frequency"), &series, ts),
    )?;
    let rows: Vec<Vec<f64>> = frames.iter().map(|f| f.to_vec()).collect();
    w.svg(
        "heatmap.svg",
        svg::heatmap(&Labels::new(what, "phenotype x", time_label), &xs, times, &rows, ts),
    )
}

fn dd_original(cfg: &ExperimentConfig, w: &mut Writer<'_>, c: &mut Collected) -> Result<()> {
    let dd = cfg.dd.as_ref().expect("validated");
    let space = dd.model.validate()?;
    let times = cfg.schedule.times();
    let records: Vec<Result<RunRecord, String>> = (0..cfg.replicas)
        .into_par_iter()
        .map(|r| {
            let initial = PopulationCounts::monomorphic(space, dd.start, dd.initial_size);
            run_dd(&dd.model, initial, cfg.schedule.horizon, &times, cfg.seed, r as u64).map_err(|e| e.to_string())
        })
        .collect();
    let mut t = w.new_table("dd_trajectory v1", &["replica", "time", "x", "count", "frequency"]);
    for (r, rec) in records.iter().enumerate() {
        c.replicas.push(replica_entry(r, None, rec));
        let Ok(rec) = rec else { continue };
        for s in &rec.snapshots {
            let counts = s.counts.as_deref().unwrap_or_default();
            for (i, x) in space.sites().enumerate() {
                t.row(&[r.into(), s.time.into(), x.into(), counts.get(i).copied().into(), s.frequencies[i].into()]);
            }
        }
        c.note(&format!("replica[{r}].extinction_time"), fmt_opt(rec.extinction_time));
        let modes = rec.last().and_then(|s| cfg.criterion.find_modes(&s.frequencies));
        c.note(
            &format!("replica[{r}].terminal_modes"),
            modes.map_or("none".into(), |(a, b)| format!("{} {}", space.site(a), space.site(b))),
        );
    }
    w.table("trajectory.csv", &t)?;
    if let Some(Ok(rec)) = records.first() {
        let times: Vec<f64> = rec.snapshots.iter().map(|s| s.time).collect();
        let frames: Vec<&[f64]> = rec.snapshots.iter().map(|s| s.frequencies.as_slice()).collect();
        snapshot_plots(w, space, &cfg.name, "time", &times, &frames)?;
    }
    Ok(())
}

fn conditioned(cfg: &ExperimentConfig, w: &mut Writer<'_>, c: &mut Collected) -> Result<()> {
    let sec = cfg.conditioned.as_ref().expect("validated");
    let kernels = cfg.kernel_set()?;
    let space = kernels.space();
    let mutation = if sec.mutation_rate == 0.0 {
        MutationMatrix::identity(space)
    } else {
        MutationMatrix::tridiagonal(space, sec.mutation_rate)?
    };
    let pi0 = sec.start.build(space)?;
    let opts = FixedPointOptions {
        tol: sec.tol,
        max_iter: sec.max_iter,
        snapshot_every: sec.snapshot_every,
        ..Default::default()
    };
    let detector = SpeciationCriterion::bimodality(cfg.criterion.min_separation.max(1));
    let mut first_bimodal = None;
    let mut last_bimodal = None;
    let run = iterate_with(&pi0, &kernels, sec.fitness, &mutation, opts, |i, pi| {
        if detector.fires(pi.weights()) {
            first_bimodal.get_or_insert(i);
            last_bimodal = Some(i);
        }
    })?;
    let mut t = w.new_table("conditioned_trajectory v1", &["iteration", "x", "pi"]);
    for (i, pi) in &run.snapshots {
        for (j, x) in space.sites().enumerate() {
            t.row(&[(*i).into(), x.into(), pi[j].into()]);
        }
    }
    w.table("trajectory.csv", &t)?;
    let fitness = fitness_w(&run.pi_hat, &kernels, sec.fitness)?;
    let mut f = w.new_table("fixed_point v1", &["x", "pi_hat", "W", "residual"]);
    for (j, x) in space.sites().enumerate() {
        f.row(&[x.into(), run.pi_hat[j].into(), fitness[j].into(), run.residual.into()]);
    }
    w.table("fixed_point.csv", &f)?;
    let (mean, var) = run.pi_hat.moments();
    c.note("converged", run.converged);
    c.note("iterations", run.iterations);
    c.note("residual", crate::csv::format_float(run.residual));
    c.note("mean", crate::csv::format_float(mean));
    c.note("variance", crate::csv::format_float(var));
    c.note("first_bimodal_iteration", fmt_opt(first_bimodal));
    c.note("last_bimodal_iteration", fmt_opt(last_bimodal));
    c.note("terminal_bimodal", detector.fires(run.pi_hat.weights()));
    let times: Vec<f64> = run.snapshots.iter().map(|(i, _)| *i as f64).collect();
    let frames: Vec<&[f64]> = run.snapshots.iter().map(|(_, p)| p.weights()).collect();
    snapshot_plots(w, space, &cfg.name, "iteration", &times, &frames)
}

fn moran_params(cfg: &ExperimentConfig, mu: Option<f64>) -> Result<MoranParams> {
    let mut params = cfg.model_params()?;
    if let Some(mu) = mu {
        params.mu = mu;
    }
    Ok(MoranParams::new(cfg.kernel_set()?, params)?)
}

fn moran(cfg: &ExperimentConfig, w: &mut Writer<'_>, c: &mut Collected) -> Result<()> {
    let sec = cfg.moran.clone().unwrap_or_default();
    let p = moran_params(cfg, None)?;
    let space = p.space();
    if space.index(sec.start).is_none() {
        anyhow::bail!("moran.start: {} is outside the lattice", sec.start);
    }
    let times = cfg.schedule.times();
    let records: Vec<Result<RunRecord, String>> = (0..cfg.replicas)
        .into_par_iter()
        .map(|r| {
            let opts = MoranRunOptions {
                horizon: cfg.schedule.horizon,
                snapshot_times: times.clone(),
                seed: cfg.seed,
                replica: r as u64,
                stop_on_speciation: sec.stop_on_speciation.then_some(cfg.criterion),
            };
            run_moran(&p, p.monomorphic(sec.start), &opts)
                .map(|mut rec| {
                    rec.speciation_time = speciation_time(&rec.snapshots, &cfg.criterion);
                    rec
                })
                .map_err(|e| e.to_string())
        })
        .collect();
    let mut t = w.new_table("moran_trajectory v1", &["replica", "time", "x", "frequency"]);
    let mut s = w.new_table(
        "speciation v1",
        &["replica", "seed", "speciation_time", "criterion_version"],
    );
    for (r, rec) in records.iter().enumerate() {
        c.replicas.push(replica_entry(r, None, rec));
        let Ok(rec) = rec else { continue };
        for snap in &rec.snapshots {
            for (i, x) in space.sites().enumerate() {
                t.row(&[r.into(), snap.time.into(), x.into(), snap.frequencies[i].into()]);
            }
        }
        s.row(&[
            r.into(),
            cfg.seed.into(),
            rec.speciation_time.into(),
            cfg.criterion.version().into(),
        ]);
        c.note(&format!("replica[{r}].speciation_time"), fmt_opt(rec.speciation_time));
    }
    w.table("trajectory.csv", &t)?;
    w.table("speciation.csv", &s)?;
    if let Some(Ok(rec)) = records.first() {
        let times: Vec<f64> = rec.snapshots.iter().map(|s| s.time).collect();
        let frames: Vec<&[f64]> = rec.snapshots.iter().map(|s| s.frequencies.as_slice()).collect();
        snapshot_plots(w, space, &cfg.name, "time", &times, &frames)?;
    }
    Ok(())
}

fn ode(cfg: &ExperimentConfig, w: &mut Writer<'_>, c: &mut Collected) -> Result<()> {
    let sec = cfg.ode.as_ref().expect("validated");
    let kernels = cfg.kernel_set()?;
    let params = cfg.model_params()?;
    let space = kernels.space();
    let pi0 = sec.start.build(space)?;
    let opts = IntegrateOptions {
        horizon: cfg.schedule.horizon,
        record_every: cfg.schedule.every,
        ..Default::default()
    };
    let sol = integrate_ode(&kernels, &params, sec.variant, &pi0, &opts)?;
    let mut t = w.new_table("ode_trajectory v1", &["time", "x", "pi"]);
    for (time, state) in sol.times.iter().zip(&sol.states) {
        for (j, x) in space.sites().enumerate() {
            t.row(&[(*time).into(), x.into(), state[j].into()]);
        }
    }
    w.table("trajectory.csv", &t)?;
    c.note("stop", format!("{:?}", sol.stop));
    c.note("terminal_velocity", crate::csv::format_float(sol.velocity));
    if let Some(d) = sol.max_v_decrease {
        c.note("max_v_decrease", crate::csv::format_float(d));
    }
    let frames: Vec<&[f64]> = sol.states.iter().map(Vec::as_slice).collect();
    snapshot_plots(w, space, &cfg.name, "time", &sol.times, &frames)
}

/// Stationary points and their audit rows.
pub struct LandscapeResult {
    pub mu_tilde: f64,
    pub points: Vec<StationaryPoint>,
    /// `(cluster, row)`; empty when auditing was skipped.
    pub audit: Vec<(usize, AuditRow)>,
    pub audit_skipped: Option<String>,
    pub unresolved_starts: usize,
}

impl LandscapeResult {
    pub fn hard_failures(&self) -> usize {
        self.audit.iter().filter(|(_, r)| r.is_hard_failure()).count()
    }
}

/// Multistart search plus the bound audit at every point found.
pub fn analyse_landscape(cfg: &ExperimentConfig) -> Result<LandscapeResult> {
    let sec = cfg.landscape.clone().unwrap_or_default();
    let kernels = cfg.kernel_set()?;
    let mu_tilde = match sec.mu_tilde {
        Some(m) => m,
        None => cfg.model_params()?.require_positive_mu_tilde()?,
    };
    if !(mu_tilde > 0.0) {
        anyhow::bail!("landscape.mu_tilde: must be positive");
    }
    let report = find_stationary_points(
        &kernels,
        mu_tilde,
        &SearchOptions {
            n_starts: sec.n_starts,
            seed: cfg.seed,
            faces: sec.faces,
            ..Default::default()
        },
    )?;
    let mut audit = Vec::new();
    let mut audit_skipped = None;
    if !sec.audit {
        audit_skipped = Some("disabled".into());
    } else if let Err(e) = kernels.check_assumption1() {
        audit_skipped = Some(e.to_string());
    } else {
        for p in &report.points {
            match bound_audit(p, &kernels, mu_tilde, &BoundAuditOptions::default()) {
                Ok(rows) => audit.extend(rows.into_iter().map(|r| (p.basin_tag, r))),
                Err(e) => warn!("cluster {}: not audited: {e}", p.basin_tag),
            }
        }
    }
    Ok(LandscapeResult {
        mu_tilde,
        points: report.points,
        audit,
        audit_skipped,
        unresolved_starts: report.unresolved_starts.len(),
    })
}

fn landscape(cfg: &ExperimentConfig, w: &mut Writer<'_>, c: &mut Collected) -> Result<()> {
    let res = analyse_landscape(cfg)?;
    let kernels = cfg.kernel_set()?;
    let space = kernels.space();
    let mut t = w.new_table(
        "stationary_points v1",
        &["cluster", "x", "pi_hat", "m_x", "residual", "classification"],
    );
    for p in &res.points {
        for (j, x) in space.sites().enumerate() {
            t.row(&[
                p.basin_tag.into(),
                x.into(),
                p.pi_hat[j].into(),
                p.fitness[j].into(),
                p.constancy_residual.into(),
                p.classification.label().into(),
            ]);
        }
    }
    w.table("stationary_points.csv", &t)?;
    let mut a = w.new_table(
        "bound_audit v1",
        &["cluster", "theorem", "hypothesis_ok", "conclusion_ok", "margin", "strict"],
    );
    for (cluster, r) in &res.audit {
        a.row(&[
            (*cluster).into(),
            r.theorem.as_str().into(),
            r.hypothesis_ok.into(),
            r.conclusion_ok.into(),
            r.margin.into(),
            r.strict.into(),
        ]);
    }
    w.table("audit.csv", &a)?;
    c.hard_failures += res.hard_failures();
    c.note("mu_tilde", crate::csv::format_float(res.mu_tilde));
    c.note("points", res.points.len());
    c.note("local_maxima", res.points.iter().filter(|p| p.classification.label() == "local_max_V").count());
    c.note("unresolved_starts", res.unresolved_starts);
    c.note("audit_rows", res.audit.len());
    c.note("audit_hard_failures", res.hard_failures());
    if let Some(why) = &res.audit_skipped {
        c.note("audit_skipped", why.replace(',', ";"));
    }
    let xs: Vec<f64> = space.sites().map(|x| x as f64).collect();
    let series: Vec<Series> = res
        .points
        .iter()
        .take(8)
        .map(|p| Series {
            label: format!("#{} {}", p.basin_tag, p.classification.label()),
            points: xs.iter().copied().zip(p.pi_hat.weights().iter().copied()).collect(),
        })
        .collect();
    let ts = w.timestamp;
    w.svg(
        "lines.svg",
        svg::line_plot(&Labels::new(&cfg.name, "phenotype x", "stationary mass"), &series, ts),
    )
}

fn mcmc(cfg: &ExperimentConfig, w: &mut Writer<'_>, c: &mut Collected) -> Result<()> {
    let sec = cfg.mcmc.as_ref().expect("validated");
    let kernels = cfg.kernel_set()?;
    let space = kernels.space();
    let density = StationaryDensity::new(kernels, cfg.model_params()?)?;
    let result = mcmc_sample_stationary(
        &density,
        &McmcOptions {
            samples: sec.samples,
            burn_in: sec.burn_in,
            chains: sec.chains,
            thin: sec.thin,
            kappa: sec.kappa,
            seed: cfg.seed,
            init: None,
        },
    )?;
    let mut t = w.new_table("mcmc_samples v1", &["sample_index", "x", "pi_x", "log_density"]);
    let mut index = 0usize;
    for chain in &result.chains {
        for (sample, ld) in chain.samples.iter().zip(&chain.log_density) {
            for (j, x) in space.sites().enumerate() {
                t.row(&[index.into(), x.into(), sample[j].into(), (*ld).into()]);
            }
            index += 1;
        }
    }
    w.table("samples.csv", &t)?;
    let delta = SimplexDistribution::delta(space, 0);
    c.note("acceptance", crate::csv::format_float(result.acceptance));
    c.note("max_rhat", crate::csv::format_float(result.max_rhat()));
    c.note(
        "fraction_within_0.1_of_delta0",
        crate::csv::format_float(result.fraction_within(delta.weights(), 0.1)),
    );
    let mut m = w.new_table("mcmc_marginals v1", &["x", "mean", "std_error"]);
    let mut series = Vec::new();
    for (j, x) in space.sites().enumerate() {
        let (mean, se) = result.estimate(|s| s[j]);
        m.row(&[x.into(), mean.into(), se.into()]);
        series.push((x as f64, mean));
    }
    w.table("marginals.csv", &m)?;
    let ts = w.timestamp;
    w.svg(
        "lines.svg",
        svg::line_plot(
            &Labels::new(&cfg.name, "phenotype x", "posterior mean mass"),
            &[Series {
                label: "mean".into(),
                points: series,
            }],
            ts,
        ),
    )
}

fn bifurcation(cfg: &ExperimentConfig, w: &mut Writer<'_>, c: &mut Collected) -> Result<()> {
    let sec = cfg.bifurcation.as_ref().expect("validated");
    let kernels = cfg.kernel_set()?;
    let space = kernels.space();
    if space.index(sec.center).is_none() {
        anyhow::bail!("bifurcation.center: {} is outside the lattice", sec.center);
    }
    let params = cfg.model_params()?;
    let report = bifurcation_scan(
        &SimplexDistribution::delta(space, sec.center),
        &kernels,
        &params,
        &sec.mu_grid,
        &sec.scan,
    )?;
    let mut t = w.new_table("bifurcation_grid v1", &["mu", "mu_effective", "local_max"]);
    for &(mu, has) in &report.grid {
        t.row(&[mu.into(), sec.scan.scale.effective(mu, &params).into(), has.into()]);
    }
    w.table("grid.csv", &t)?;
    c.note("bracket_lo", fmt_opt(report.bracket.map(|b| crate::csv::format_float(b.0))));
    c.note("bracket_hi", fmt_opt(report.bracket.map(|b| crate::csv::format_float(b.1))));
    c.note("threshold", fmt_opt(report.threshold.map(crate::csv::format_float)));
    c.note(
        "effective_threshold",
        fmt_opt(report.effective_threshold.map(crate::csv::format_float)),
    );
    c.note("max_below", fmt_opt(report.max_below));
    c.note("note", report.note.replace(',', ";"));
    let pts: Vec<(f64, f64)> = report.grid.iter().map(|&(mu, b)| (mu, if b { 1.0 } else { 0.0 })).collect();
    let ts = w.timestamp;
    w.svg(
        "scatter.svg",
        svg::scatter(
            &Labels::new(&cfg.name, "mu", "local maximum near the centre (1 = yes)"),
            &pts,
            &[],
            ts,
        ),
    )
}

fn sweep(cfg: &ExperimentConfig, w: &mut Writer<'_>, c: &mut Collected) -> Result<()> {
    let sec = cfg.sweep.as_ref().expect("validated");
    let times = cfg.schedule.times();
    let tasks: Vec<(usize, f64, usize)> = sec
        .mu_grid
        .iter()
        .enumerate()
        .flat_map(|(i, &mu)| (0..cfg.replicas).map(move |r| (i, mu, r)))
        .collect();
    let params: Vec<MoranParams> = sec
        .mu_grid
        .iter()
        .map(|&mu| moran_params(cfg, Some(mu)))
        .collect::<Result<_>>()?;
    let records: Vec<Result<RunRecord, String>> = tasks
        .par_iter()
        .map(|&(i, _, r)| {
            let p = &params[i];
            let opts = MoranRunOptions {
                horizon: cfg.schedule.horizon,
                snapshot_times: times.clone(),
                seed: cfg.seed,
                replica: (i * cfg.replicas + r) as u64,
                stop_on_speciation: Some(cfg.criterion),
            };
            run_moran(p, p.monomorphic(sec.start), &opts)
                .map(|mut rec| {
                    // only the detection time is kept
                    rec.snapshots.clear();
                    rec
                })
                .map_err(|e| e.to_string())
        })
        .collect();
    let mut s = w.new_table(
        "speciation_sweep v1",
        &["mu", "replica", "seed", "speciation_time", "criterion_version"],
    );
    let mut points = Vec::new();
    for (&(i, mu, r), rec) in tasks.iter().zip(&records) {
        c.replicas.push(replica_entry(i * cfg.replicas + r, Some(mu), rec));
        let time = rec.as_ref().ok().and_then(|r| r.speciation_time);
        s.row(&[mu.into(), r.into(), cfg.seed.into(), time.into(), cfg.criterion.version().into()]);
        if let Some(t) = time {
            points.push((mu, t));
        }
    }
    w.table("speciation.csv", &s)?;
    let mut means = Vec::new();
    for (i, &mu) in sec.mu_grid.iter().enumerate() {
        let hits: Vec<f64> = tasks
            .iter()
            .zip(&records)
            .filter(|((j, _, _), _)| *j == i)
            .filter_map(|(_, rec)| rec.as_ref().ok().and_then(|r| r.speciation_time))
            .collect();
        let censored = cfg.replicas - hits.len();
        let mean = (!hits.is_empty()).then(|| hits.iter().sum::<f64>() / hits.len() as f64);
        if let Some(m) = mean {
            means.push((mu, m));
        }
        c.note(&format!("mu[{mu:e}].mean_speciation_time"), fmt_opt(mean));
        c.note(&format!("mu[{mu:e}].censored"), censored);
    }
    let ts = w.timestamp;
    w.svg(
        "scatter.svg",
        svg::scatter(&Labels::new(&cfg.name, "mu", "speciation time"), &points, &means, ts),
    )
}

fn fmt_opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(|| "none".into(), |v| v.to_string())
}

/// Result of running only the assertion suites on a config.
#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub lines: Vec<String>,
    pub hard_failures: usize,
}

/// Validates the config, then for kernels that admit it runs the landscape
/// search with stationarity checks and the bound audit. Simulations are
/// not run.
pub fn verify(cfg: &ExperimentConfig) -> Result<VerifyReport> {
    cfg.validate()?;
    let mut lines = vec![format!("config {} ({}) hash {}: valid", cfg.name, cfg.model.label(), cfg.hash())];
    let mut hard_failures = 0;
    let Some(spec) = &cfg.kernels else {
        lines.push("no [kernels]: landscape checks skipped".into());
        return Ok(VerifyReport { lines, hard_failures });
    };
    let kernels = KernelSet::from_spec(spec)?;
    let mu_tilde = cfg
        .landscape
        .as_ref()
        .and_then(|l| l.mu_tilde)
        .or_else(|| cfg.params.map(|p| p.mu_tilde()));
    match mu_tilde {
        Some(m) if m > 0.0 => {
            let res = analyse_landscape(&ExperimentConfig {
                landscape: Some(crate::config::LandscapeSection {
                    mu_tilde: Some(m),
                    ..cfg.landscape.clone().unwrap_or_default()
                }),
                ..cfg.clone()
            })?;
            for p in &res.points {
                let d = verify_stationarity(&p.pi_hat, &kernels, m, 20, cfg.seed)?;
                lines.push(format!(
                    "point #{} {}: residual {:.3e}, subset deviation {:.3e}, coupling {}",
                    p.basin_tag,
                    p.classification.label(),
                    d.constancy_residual,
                    d.subset_deviation,
                    if d.sign_coupling && d.order_coupling { "ok" } else { "VIOLATED" }
                ));
            }
            for (cluster, r) in &res.audit {
                let verdict = match r.conclusion_ok {
                    None => "skipped",
                    Some(true) => "ok",
                    Some(false) if r.strict => "FAIL",
                    Some(false) => "finding",
                };
                lines.push(format!("audit #{cluster} {}: {verdict} ({})", r.theorem, r.reason));
            }
            if let Some(why) = &res.audit_skipped {
                lines.push(format!("bound audit skipped: {why}"));
            }
            hard_failures += res.hard_failures();
        }
        _ => lines.push("mu - 2/N is not positive: landscape checks skipped".into()),
    }
    Ok(VerifyReport { lines, hard_failures })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn failed_replicas_keep_their_error() {
        let failed = replica_entry(3, Some(5e-5), &Err("population went extinct".into()));
        assert_eq!((failed.index, failed.events), (3, 0));
        assert_eq!(failed.error.as_deref(), Some("population went extinct"));
        let text = toml::to_string(&failed).unwrap();
        assert!(text.contains("error = \"population went extinct\""), "{text}");
    }

    #[test]
    fn spread_keeps_both_ends() {
        assert_eq!(spread(3, 8), [0, 1, 2]);
        let s = spread(100, 8);
        assert_eq!((s[0], *s.last().unwrap(), s.len()), (0, 99, 8));
    }
}
