use emsource_cli::config::{ExperimentConfig, SourceKind};
use emsource_cli::report::Relation;
use emsource_cli::{emit_report, run_experiment, Check, Command, ReportFormat, RunReport};
use std::path::Path;
use std::process::Command as Process;

const MINIMAL: &str = "schema_version = 1\n";

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn defaults_fill_every_section_and_round_trip() {
    let cfg = ExperimentConfig::from_toml(MINIMAL).unwrap();
    assert_eq!(cfg.band.n_freq, 16);
    assert_eq!(cfg.source.kind, SourceKind::Random);
    let text = cfg.to_toml().unwrap();
    let again = ExperimentConfig::from_toml(&text).unwrap();
    assert_eq!(cfg, again);
    assert_eq!(again.to_toml().unwrap(), text);
}

#[test]
fn shipped_configs_parse_and_round_trip() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let cfg = ExperimentConfig::load(&path).unwrap();
        assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap(), cfg, "{}", path.display());
        seen += 1;
    }
    assert_eq!(seen, 6);
}

#[test]
fn unknown_keys_are_named() {
    for (text, key) in [
        ("schema_version = 1\nbogus = 3\n", "bogus"),
        ("schema_version = 1\n[band]\nband_limt = 2.0\n", "band_limt"),
        ("schema_version = 1\n[solver.orders]\nradial = 8\npolar = 4\nazimuth = 8\nextra = 1\n", "extra"),
    ] {
        let err = format!("{:#}", ExperimentConfig::from_toml(text).unwrap_err());
        assert!(err.contains(key), "{err}");
        assert!(err.contains("line"), "{err}");
    }
}

#[test]
fn invalid_values_are_rejected() {
    assert!(ExperimentConfig::from_toml("schema_version = 2\n").is_err());
    assert!(ExperimentConfig::from_toml("").is_err());
    assert!(ExperimentConfig::from_toml("schema_version = 1\n[alpha]\nvalue = -1.0\n").is_err());
    let cfg = ExperimentConfig::from_toml("schema_version = 1\n[geometry]\nradius = -1.0\n").unwrap();
    assert!(cfg.geometry().is_err());
}

#[test]
fn reports_sort_and_emit() {
    let dir = tempfile::tempdir().unwrap();
    let empty = RunReport::new("none");
    let path = emit_report(&empty, ReportFormat::Csv, dir.path()).unwrap();
    assert_eq!(std::fs::read_to_string(path).unwrap(), format!("{}\n", RunReport::CSV_HEADER));
    let mut r = RunReport::new("demo");
    r.push(Check::new("zeta", 1.0, Relation::Lt, 2.0));
    r.push(Check::new("alpha", 3.0, Relation::Lt, 2.0));
    r.push(Check::flag("mid", true));
    assert!(!r.all_pass());
    let text = std::fs::read_to_string(emit_report(&r, ReportFormat::Text, dir.path()).unwrap()).unwrap();
    let names: Vec<&str> = text.lines().take(3).map(|l| l.split(' ').nth(1).unwrap()).collect();
    assert_eq!(names, ["alpha", "mid", "zeta"]);
    assert!(text.starts_with("FAIL alpha"));
    let file = dir.path().join("plain");
    std::fs::write(&file, "x").unwrap();
    assert!(emit_report(&r, ReportFormat::Csv, &file.join("sub")).is_err());
}

#[test]
fn reruns_are_bit_identical() {
    let cfg = ExperimentConfig::from_toml("schema_version = 1\nseed = 5\n[band]\nband_limit = 2.0\nn_freq = 8\n[noise]\nlevel = 0.01\nseeds = [1, 2]\n").unwrap();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for command in [Command::Invert, Command::Cavity, Command::Synth] {
        let ra = run_experiment(command, &cfg, a.path()).unwrap();
        let rb = run_experiment(command, &cfg, b.path()).unwrap();
        assert_eq!(ra.checks, rb.checks);
        emit_report(&ra, ReportFormat::Csv, a.path()).unwrap();
        emit_report(&rb, ReportFormat::Csv, b.path()).unwrap();
        assert_eq!(read(a.path(), "report.csv"), read(b.path(), "report.csv"));
    }
    for name in ["inversion.csv", "coefficients.csv", "modes.csv", "monotonicity.csv", "traces.csv", "norms.csv", "config.toml"] {
        assert_eq!(read(a.path(), name), read(b.path(), name), "{name}");
    }
    assert_eq!(std::fs::read(a.path().join("dataset.emds")).unwrap(), std::fs::read(b.path().join("dataset.emds")).unwrap());
    // Three noisy runs, one row each, plus the header.
    assert_eq!(read(a.path(), "inversion.csv").lines().count(), 3);
}

#[test]
fn sweep_writes_one_row_per_band_and_seed() {
    let cfg = ExperimentConfig::from_toml(
        "schema_version = 1\nseed = 3\n[noise]\nlevel = 0.01\nseeds = [0, 1, 2, 3, 4]\n[sweep]\nk_list = [1.0, 2.0, 3.0, 4.0]\nfreq_per_unit = 4.0\n",
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let report = run_experiment(Command::Sweep, &cfg, dir.path()).unwrap();
    let csv = read(dir.path(), "sweep.csv");
    assert_eq!(csv.lines().next().unwrap(), "K,seed,error,residual,lambda,envelope");
    assert_eq!(csv.lines().count(), 21);
    assert_eq!(read(dir.path(), "sweep_summary.csv").lines().count(), 5);
    assert!(report.checks.iter().any(|c| c.name == "sweep.spearman"));
    let clean = ExperimentConfig::from_toml(MINIMAL).unwrap();
    assert!(run_experiment(Command::Sweep, &clean, dir.path()).is_err());
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_emsource");
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "schema_version = 1\n[cavity]\ncount = 5\n").unwrap();
    let out = dir.path().join("ok");
    let status = Process::new(bin)
        .args(["cavity", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seed", "4"])
        .env("EMSOURCE_WORKERS", "1")
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    assert!(read(&out, "config.toml").contains("seed = 4"));
    assert!(read(&out, "report.txt").contains("workers=1"));

    std::fs::write(&cfg, "schema_version = 1\n[tolerances]\nroot_oracle = 1e-9\n").unwrap();
    let status = Process::new(bin)
        .args(["cavity", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("fail").to_str().unwrap()])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));

    std::fs::write(&cfg, "schema_version = 1\nnope = 1\n").unwrap();
    let output = Process::new(bin).args(["cavity", "--config", cfg.to_str().unwrap()]).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("nope"));

    std::fs::write(&cfg, MINIMAL).unwrap();
    let status = Process::new(bin)
        .args(["cavity", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("w").to_str().unwrap()])
        .env("EMSOURCE_WORKERS", "0")
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}
