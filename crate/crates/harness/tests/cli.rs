use std::path::Path;
use std::process::Command;

use harness::csv::ParsedTable;
use harness::{recipes, run_experiment, ExperimentConfig, RunOptions};

const SMALL_MORAN: &str = r#"
name = "small"
model = "moran"
seed = 7
replicas = 3

[kernels]
half_width = 3
assumption1 = true
capacity = { kind = "gaussian", variance = 10.0 }
cooperation = { kind = "step", b = 0.2, m = 2 }

[params]
mu = 0.01
N = 100

[schedule]
horizon = 20.0
every = 5.0
"#;

fn small() -> ExperimentConfig {
    ExperimentConfig::from_toml(SMALL_MORAN).unwrap()
}

fn run_into(cfg: &ExperimentConfig, dir: &Path, timestamp: bool) -> harness::RunOutcome {
    run_experiment(
        cfg,
        &RunOptions {
            out_dir: dir.to_path_buf(),
            timestamp,
        },
    )
    .unwrap()
}

fn speciate(args: &[&str], cwd: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_speciate"))
        .args(args)
        .current_dir(cwd)
        .env_remove("SPECIATE_OUTPUT_ROOT")
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

#[test]
fn configs_round_trip_and_hash_ignores_output() {
    let cfg = small();
    let back = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
    assert_eq!(back, cfg);
    assert_eq!(back.hash(), cfg.hash());
    assert_eq!(cfg.hash().len(), 16);

    let moved = ExperimentConfig {
        output: Some("elsewhere".into()),
        ..cfg.clone()
    };
    assert_eq!(moved.hash(), cfg.hash());
    let reseeded = ExperimentConfig { seed: 8, ..cfg.clone() };
    assert_ne!(reseeded.hash(), cfg.hash());
}

#[test]
fn config_errors_name_the_field() {
    let err = |text: &str| format!("{:#}", ExperimentConfig::from_toml(text).unwrap_err());

    let no_kernels = SMALL_MORAN.replace("[kernels]", "[unused]");
    assert!(err(&no_kernels).contains("unused"), "{}", err(&no_kernels));

    let typo = SMALL_MORAN.replace("horizon = 20.0", "horizn = 20.0");
    assert!(err(&typo).contains("horizn"), "{}", err(&typo));

    let zero = SMALL_MORAN.replace("replicas = 3", "replicas = 0");
    assert!(err(&zero).starts_with("replicas"), "{}", err(&zero));

    let sigma = SMALL_MORAN.replace("mu = 0.01", "mu = 0.01\nsigma = 0.9");
    assert!(err(&sigma).contains("sigma"), "{}", err(&sigma));

    let missing = SMALL_MORAN.replace("model = \"moran\"", "model = \"mcmc\"");
    assert!(err(&missing).starts_with("mcmc"), "{}", err(&missing));
}

#[test]
fn tables_carry_provenance_and_replicas_come_back_in_order() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small();
    let out = run_into(&cfg, dir.path(), false);
    assert_eq!(out.exit_code(), 0);
    let indices: Vec<usize> = out.replicas.iter().map(|r| r.index).collect();
    assert_eq!(indices, [0, 1, 2]);
    assert!(out.replicas.iter().all(|r| r.error.is_none() && r.events > 0));

    let t = ParsedTable::read(&dir.path().join("trajectory.csv")).unwrap();
    assert_eq!(t.meta("config_hash"), Some(cfg.hash().as_str()));
    assert_eq!(t.meta("criterion_version"), Some(cfg.criterion.version()));
    // 3 replicas x 5 snapshots x 7 sites
    assert_eq!(t.rows.len(), 3 * 5 * 7);
    for name in ["config.toml", "manifest.toml", "speciation.csv", "summary.csv", "lines.svg", "heatmap.svg"] {
        assert!(dir.path().join(name).exists(), "{name} missing");
    }
    let manifest = std::fs::read_to_string(dir.path().join("manifest.toml")).unwrap();
    assert!(manifest.contains(&cfg.hash()));
}

#[test]
fn empty_schedule_records_only_the_terminal_state() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small();
    cfg.replicas = 1;
    cfg.schedule.every = None;
    run_into(&cfg, dir.path(), false);
    let t = ParsedTable::read(&dir.path().join("trajectory.csv")).unwrap();
    let times = t.floats(t.column("time").unwrap()).unwrap();
    assert_eq!(t.rows.len(), 7);
    assert!(times.iter().all(|v| *v == Some(cfg.schedule.horizon)));
}

#[test]
fn timestamps_touch_only_the_svg_comment() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let cfg = small();
    run_into(&cfg, a.path(), true);
    run_into(&cfg, b.path(), false);
    let stamped = std::fs::read_to_string(a.path().join("lines.svg")).unwrap();
    let plain = std::fs::read_to_string(b.path().join("lines.svg")).unwrap();
    assert!(stamped.contains("<!-- generated at unix time"));
    assert!(!plain.contains("generated at"));
    let strip = |s: &str| s.lines().filter(|l| !l.contains("generated at")).collect::<Vec<_>>().join("\n");
    assert_eq!(strip(&stamped), strip(&plain));
    for csv in ["trajectory.csv", "speciation.csv", "summary.csv"] {
        assert_eq!(
            std::fs::read(a.path().join(csv)).unwrap(),
            std::fs::read(b.path().join(csv)).unwrap()
        );
    }
}

#[test]
fn every_recipe_validates() {
    let names: Vec<&str> = recipes::names().collect();
    assert_eq!(
        names,
        ["fig1", "fig2", "fig3", "fig4", "fig5", "fig6", "thm25", "prop28", "bifurcation"]
    );
    for name in names {
        recipes::load(name).unwrap().validate().unwrap();
    }
}

#[test]
fn binary_lists_runs_and_plots() {
    let dir = tempfile::tempdir().unwrap();
    let listed = speciate(&["recipes", "list"], dir.path());
    assert!(listed.status.success());
    let text = String::from_utf8(listed.stdout).unwrap();
    assert!(recipes::names().all(|n| text.contains(n)));

    let cfg_path = dir.path().join("small.toml");
    std::fs::write(&cfg_path, SMALL_MORAN).unwrap();
    let run = speciate(
        &["run", "small.toml", "--seed", "3", "--replicas", "2", "--no-timestamp"],
        dir.path(),
    );
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    // default output root is ./runs/<name>
    let out = dir.path().join("runs/small");
    let rerun = ExperimentConfig::load(&out.join("config.toml")).unwrap();
    assert_eq!((rerun.seed, rerun.replicas), (3, 2));

    for kind in ["lines", "heatmap"] {
        let svg = dir.path().join(format!("{kind}.svg"));
        let plot = speciate(
            &["plot", "runs/small/trajectory.csv", "--kind", kind, "--output", svg.to_str().unwrap()],
            dir.path(),
        );
        assert!(plot.status.success(), "{}", String::from_utf8_lossy(&plot.stderr));
        assert!(std::fs::read_to_string(&svg).unwrap().contains("<svg"));
    }
    let scatter = speciate(&["plot", "runs/small/speciation.csv", "--kind", "scatter"], dir.path());
    assert!(scatter.status.success(), "{}", String::from_utf8_lossy(&scatter.stderr));
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = speciate(&["run", "no-such-recipe"], dir.path());
    assert_eq!(bad.status.code(), Some(2));

    let cfg_path = dir.path().join("bad.toml");
    std::fs::write(&cfg_path, SMALL_MORAN.replace("N = 100", "N = 0")).unwrap();
    let invalid = speciate(&["verify", "bad.toml"], dir.path());
    assert_eq!(invalid.status.code(), Some(2));

    let env_root = dir.path().join("elsewhere");
    std::fs::write(dir.path().join("small.toml"), SMALL_MORAN).unwrap();
    let run = Command::new(env!("CARGO_BIN_EXE_speciate"))
        .args(["run", "small.toml", "--replicas", "1"])
        .current_dir(dir.path())
        .env("SPECIATE_OUTPUT_ROOT", &env_root)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap();
    assert_eq!(run.status.code(), Some(0));
    assert!(env_root.join("small/manifest.toml").exists());

    let verified = speciate(&["verify", "small.toml"], dir.path());
    assert_eq!(verified.status.code(), Some(0), "{}", String::from_utf8_lossy(&verified.stdout));
    assert!(String::from_utf8_lossy(&verified.stdout).contains("valid"));
}
