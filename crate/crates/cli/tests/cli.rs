use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_hvac-disagg");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env("RUST_LOG", "error").output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn small_config(dir: &Path) -> String {
    let path = dir.join("small.toml");
    fs::write(
        &path,
        "[synth]\nhouseholds = 2\nhot_days = 5\nmild_days = 14\nshoulder_days = 1\n",
    )
    .unwrap();
    path.to_str().unwrap().to_string()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn full_run_writes_every_artifact() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let out = tmp.path().join("run");

    let o = run(&["synth", "--config", &cfg, "--out", p(&out), "--seed", "3"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for h in ["h000", "h001"] {
        for f in ["power.csv", "temperature.csv", "truth.csv"] {
            assert!(out.join(h).join(f).is_file(), "{h}/{f}");
        }
    }
    assert!(out.join("manifest.json").is_file());

    let resolved = out.join("config.resolved.toml");
    let o = run(&["disaggregate", "--config", p(&resolved), "--workers", "2"]);
    assert!(matches!(code(&o), 0 | 4), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["labels.csv", "results.csv", "days.csv", "liul.csv"] {
        assert!(out.join("h000").join(f).is_file(), "{f}");
    }

    let o = run(&["evaluate", "--config", p(&resolved)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    for m in ["average", "ica", "fine-tuned"] {
        assert!(stdout.contains(m), "{stdout}");
    }

    let o = run(&["report", "--out", p(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("# Disaggregation report"));
    for f in ["report.md", "table1.csv", "table2.csv", "fig6_hourly.csv", "fig8_hist.csv", "fig8_hist.svg"] {
        assert!(out.join(f).is_file(), "{f}");
    }
}

#[test]
fn synth_is_byte_identical_across_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for d in [&a, &b] {
        assert_eq!(code(&run(&["synth", "--config", &cfg, "--out", p(d), "--seed", "9"])), 0);
    }
    for f in ["h000/power.csv", "h001/truth.csv", "h000/temperature.csv", "manifest.json", "config.resolved.toml"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let c = tmp.path().join("c");
    assert_eq!(code(&run(&["synth", "--config", &cfg, "--out", p(&c), "--seed", "10"])), 0);
    assert_ne!(fs::read(a.join("h000/power.csv")).unwrap(), fs::read(c.join("h000/power.csv")).unwrap());
}

#[test]
fn disaggregate_is_independent_of_worker_count() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let corpus = tmp.path().join("corpus");
    assert_eq!(code(&run(&["synth", "--config", &cfg, "--out", p(&corpus)])), 0);
    let resolved = corpus.join("config.resolved.toml");
    let (one, four) = (tmp.path().join("w1"), tmp.path().join("w4"));
    run(&["disaggregate", "--config", p(&resolved), "--out", p(&one), "--workers", "1"]);
    run(&["disaggregate", "--config", p(&resolved), "--out", p(&four), "--workers", "4"]);
    for f in ["h000/results.csv", "h001/results.csv", "h001/days.csv", "h000/labels.csv"] {
        assert_eq!(fs::read(one.join(f)).unwrap(), fs::read(four.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn config_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("x");
    assert_eq!(code(&run(&["synth", "--config", p(&tmp.path().join("missing.toml"))])), 2);

    let bad = tmp.path().join("bad.toml");
    fs::write(&bad, "[finetune]\nepsilon_kwh = -1.0\n").unwrap();
    assert_eq!(code(&run(&["synth", "--config", p(&bad), "--out", p(&out)])), 2);

    fs::write(&bad, "no_such_key = 1\n").unwrap();
    assert_eq!(code(&run(&["synth", "--config", p(&bad), "--out", p(&out)])), 2);

    assert_eq!(code(&run(&["synth", "--workers", "0", "--out", p(&out)])), 2);
    assert_eq!(code(&run(&["frobnicate"])), 2);
    assert_eq!(code(&run(&["--help"])), 0);
}

#[test]
fn data_errors_exit_3() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let out = tmp.path().join("run");
    assert_eq!(code(&run(&["synth", "--config", &cfg, "--out", p(&out)])), 0);
    let resolved = out.join("config.resolved.toml");

    // Evaluation before disaggregation has no results to read.
    assert_eq!(code(&run(&["evaluate", "--config", p(&resolved)])), 3);
    // Nor is there anything to report.
    assert_eq!(code(&run(&["report", "--out", p(&out)])), 3);

    fs::write(out.join("h001/power.csv"), "timestamp,kw\n2019-06-01 00:00:00,abc\n").unwrap();
    assert_eq!(code(&run(&["disaggregate", "--config", p(&resolved)])), 3);
}

#[test]
fn evaluate_without_truth_is_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let out = tmp.path().join("run");
    assert_eq!(code(&run(&["synth", "--config", &cfg, "--out", p(&out)])), 0);
    let resolved = out.join("config.resolved.toml");
    assert!(matches!(code(&run(&["disaggregate", "--config", p(&resolved)])), 0 | 4));
    fs::remove_file(out.join("h000/truth.csv")).unwrap();
    let o = run(&["evaluate", "--config", p(&resolved)]);
    assert_ne!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stderr).contains("h000"), "{}", String::from_utf8_lossy(&o.stderr));
}
