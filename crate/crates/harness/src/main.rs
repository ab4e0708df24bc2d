use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use harness::csv::ParsedTable;
use harness::svg::{self, Labels, Series};
use harness::{recipes, run_experiment, verify, ExperimentConfig, RunOptions};

#[derive(Parser)]
#[command(name = "speciate", version, about = "Run and inspect sympatric speciation experiments")]
struct Cli {
    /// Output directory (default: <output root>/<config name>).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Root under which runs are written when --out is absent.
    #[arg(long, global = true, env = "SPECIATE_OUTPUT_ROOT", default_value = "runs")]
    output_root: PathBuf,
    /// Override the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the number of replicas.
    #[arg(long, global = true)]
    replicas: Option<usize>,
    /// Leave the generation time out of SVG files.
    #[arg(long, global = true)]
    no_timestamp: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a config file or a built-in recipe.
    Run { config: String },
    /// Built-in recipes.
    Recipes {
        #[command(subcommand)]
        action: RecipeAction,
    },
    /// Validate a config and run the landscape assertions without simulating.
    Verify { config: String },
    /// Draw an SVG from a CSV written by `run`.
    Plot {
        csv: PathBuf,
        #[arg(long, value_enum)]
        kind: PlotKind,
        /// Output file (default: the CSV path with an .svg extension).
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum RecipeAction {
    List,
    /// Print a recipe's TOML.
    Show { name: String },
}

#[derive(Clone, Copy, ValueEnum)]
enum PlotKind {
    Lines,
    Heatmap,
    Scatter,
}

/// Exit code for configuration and I/O errors; 1 is reserved for audit failures.
const CONFIG_ERROR: u8 = 2;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(CONFIG_ERROR)
        }
    }
}

fn load_config(cli: &Cli, arg: &str) -> Result<ExperimentConfig> {
    let path = Path::new(arg);
    let mut cfg = if path.exists() {
        ExperimentConfig::load(path)?
    } else if recipes::source(arg).is_some() {
        recipes::load(arg)?
    } else {
        bail!("`{arg}` is neither a config file nor a recipe name");
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(r) = cli.replicas {
        cfg.replicas = r;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn dispatch(cli: &Cli) -> Result<u8> {
    match &cli.command {
        Command::Run { config } => {
            let cfg = load_config(cli, config)?;
            let out_dir = cli
                .out
                .clone()
                .or_else(|| cfg.output.clone())
                .unwrap_or_else(|| cli.output_root.join(&cfg.name));
            let outcome = run_experiment(
                &cfg,
                &RunOptions {
                    out_dir: out_dir.clone(),
                    timestamp: !cli.no_timestamp,
                },
            )?;
            for (k, v) in &outcome.summary {
                println!("{k} = {v}");
            }
            for r in outcome.replicas.iter().filter(|r| r.error.is_some()) {
                eprintln!("replica {} failed: {}", r.index, r.error.as_deref().unwrap_or_default());
            }
            println!("wrote {} files to {}", outcome.files.len(), out_dir.display());
            if outcome.hard_failures > 0 {
                eprintln!("{} hard audit failure(s)", outcome.hard_failures);
            }
            Ok(outcome.exit_code() as u8)
        }
        Command::Recipes { action } => {
            match action {
                RecipeAction::List => {
                    for name in recipes::names() {
                        println!("{name:<12} {}", recipes::description(name).unwrap_or(""));
                    }
                }
                RecipeAction::Show { name } => {
                    let src = recipes::source(name).with_context(|| format!("unknown recipe `{name}`"))?;
                    print!("{src}");
                }
            }
            Ok(0)
        }
        Command::Verify { config } => {
            let cfg = load_config(cli, config)?;
            let report = verify(&cfg)?;
            for line in &report.lines {
                println!("{line}");
            }
            Ok(if report.hard_failures > 0 { 1 } else { 0 })
        }
        Command::Plot { csv, kind, output } => {
            let text = plot(csv, *kind, !cli.no_timestamp)?;
            let dest = output.clone().unwrap_or_else(|| csv.with_extension("svg"));
            std::fs::write(&dest, text).with_context(|| format!("writing {}", dest.display()))?;
            println!("wrote {}", dest.display());
            Ok(0)
        }
    }
}

/// Rebuilds a plot from a written table. Trajectory tables are keyed by a
/// time-like column, a site column `x` and a value column.
fn plot(path: &Path, kind: PlotKind, timestamp: bool) -> Result<String> {
    let table = ParsedTable::read(path)?;
    let title = path.file_stem().and_then(|s| s.to_str()).unwrap_or("plot").to_string();
    match kind {
        PlotKind::Lines | PlotKind::Heatmap => {
            let time_col = table
                .column_any(&["time", "iteration", "cluster", "sample_index"])
                .context("no time, iteration, cluster or sample_index column")?;
            let x_col = table.column("x").context("no x column")?;
            let value_col = table
                .column_any(&["frequency", "pi", "pi_hat", "pi_x", "mean"])
                .context("no frequency-like column")?;
            let (times, xs, rows) = grid(&table, time_col, x_col, value_col)?;
            let labels = Labels::new(&title, "phenotype x", table.columns[time_col].as_str());
            Ok(match kind {
                PlotKind::Lines => {
                    let step = rows.len().div_ceil(8).max(1);
                    let series: Vec<Series> = rows
                        .iter()
                        .zip(&times)
                        .step_by(step)
                        .map(|(row, t)| Series {
                            label: format!("{} {t}", table.columns[time_col]),
                            points: xs.iter().copied().zip(row.iter().copied()).collect(),
                        })
                        .collect();
                    svg::line_plot(&labels, &series, timestamp)
                }
                _ => svg::heatmap(&labels, &xs, &times, &rows, timestamp),
            })
        }
        PlotKind::Scatter => {
            if table.columns.len() < 2 {
                bail!("scatter needs at least two columns");
            }
            let xc = table.column_any(&["mu", "x"]).unwrap_or(0);
            let yc = table
                .column_any(&["speciation_time", "mu_effective", "pi_hat", "mean"])
                .unwrap_or(1);
            let xs = table.floats(xc)?;
            let ys = table.floats(yc)?;
            let points: Vec<(f64, f64)> = xs
                .into_iter()
                .zip(ys)
                .filter_map(|(x, y)| Some((x?, y?)))
                .collect();
            let labels = Labels::new(&title, &table.columns[xc], &table.columns[yc]);
            Ok(svg::scatter(&labels, &points, &[], timestamp))
        }
    }
}

type Grid = (Vec<f64>, Vec<f64>, Vec<Vec<f64>>);

fn grid(table: &ParsedTable, t: usize, x: usize, v: usize) -> Result<Grid> {
    let ts = table.floats(t)?;
    let xs = table.floats(x)?;
    let vs = table.floats(v)?;
    let mut times: Vec<f64> = Vec::new();
    let mut sites: Vec<f64> = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for ((ti, xi), vi) in ts.into_iter().zip(xs).zip(vs) {
        let (Some(ti), Some(xi)) = (ti, xi) else { continue };
        if times.last() != Some(&ti) {
            times.push(ti);
            rows.push(Vec::new());
        }
        if rows.len() == 1 {
            sites.push(xi);
        }
        rows.last_mut().expect("pushed above").push(vi.unwrap_or(f64::NAN));
    }
    if rows.is_empty() || rows.iter().any(|r| r.len() != sites.len()) {
        bail!("table is not a regular time-by-site grid");
    }
    Ok((times, sites, rows))
}
