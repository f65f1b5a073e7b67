use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn rlad(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rlad")).args(args).output().expect("spawn rlad")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn series_csv(path: &Path, len: usize, offset: usize) {
    let mut s = String::from("timestamp,value\n");
    for i in offset..offset + len {
        let (day, hour) = (i / 24, i % 24);
        let v = 100.0 + 20.0 * (2.0 * std::f64::consts::PI * hour as f64 / 24.0).sin() + ((i * 7919) % 13) as f64 * 0.3;
        let date = chrono_like(day);
        writeln!(s, "{date} {hour:02}:00:00,{v}").unwrap();
    }
    fs::write(path, s).unwrap();
}

/// `YYYY-MM-DD` for day `d` after 2020-01-01, without pulling in a date crate.
fn chrono_like(d: usize) -> String {
    let mut days = d;
    let mut year = 2020;
    loop {
        let leap = year % 4 == 0 && (year % 100 != 0 || year % 400 == 0);
        let len = if leap { 366 } else { 365 };
        if days < len {
            let months = [31, if leap { 29 } else { 28 }, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31];
            let mut m = 0;
            while days >= months[m] {
                days -= months[m];
                m += 1;
            }
            return format!("{year}-{:02}-{:02}", m + 1, days + 1);
        }
        days -= len;
        year += 1;
    }
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(code(&rlad(&["--help"])), 0);
    assert_eq!(code(&rlad(&["--version"])), 0);
    assert_eq!(code(&rlad(&["run", "--help"])), 0);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&rlad(&[])), 1);
    assert_eq!(code(&rlad(&["frobnicate"])), 1);
    assert_eq!(code(&rlad(&["threshold", "--scores", "x.csv", "--detector", "nope", "--output", "y.csv"])), 1);
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.ini");
    fs::write(&cfg, "[window]\nwidht = 6\n").unwrap();
    let o = rlad(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("widht"));
    assert_eq!(code(&rlad(&["run", "--set", "nodot=1"])), 1);
}

#[test]
fn stage_failure_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.csv");
    let out = dir.path().join("out.csv");
    let o = rlad(&["inject", "--input", missing.to_str().unwrap(), "--output", out.to_str().unwrap()]);
    assert_eq!(code(&o), 2);

    let run_dir = dir.path().join("run");
    let o = rlad(&[
        "run",
        "--set",
        "data.normal_len=200",
        "--set",
        "data.test_len=100",
        "--set",
        "inject.rate=0.001",
        "--output-dir",
        run_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("inject"));
    let manifest = fs::read_to_string(run_dir.join("manifest.json")).unwrap();
    assert!(manifest.contains("failed"));
}

#[test]
fn stagewise_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name).to_str().unwrap().to_string();
    series_csv(&dir.path().join("normal.csv"), 1200, 0);
    series_csv(&dir.path().join("test.csv"), 400, 1200);

    let o = rlad(&["inject", "--input", &p("test.csv"), "--output", &p("test_inj.csv"), "--kind", "global", "--rate", "0.03"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let injected = fs::read_to_string(p("test_inj.csv")).unwrap();
    assert_eq!(injected.lines().filter(|l| l.ends_with(",1")).count(), 12);

    fs::create_dir(dir.path().join("scores")).unwrap();
    let normal = p("normal.csv");
    for det in ["knn", "copod", "ecod", "osvm", "iforest", "usad"] {
        let model = p(&format!("{det}.json"));
        let mut fit = vec!["fit", "--normal", &normal, "--detector", det, "--output", &model];
        if det == "usad" {
            fit.extend(["--usad-epochs", "2"]);
        }
        let o = rlad(&fit);
        assert_eq!(code(&o), 0, "fit {det}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(dir.path().join(format!("{det}.prep.json")).exists());

        let raw = p(&format!("{det}_raw.csv"));
        let o = rlad(&["score", "--model", &model, "--input", &p("test_inj.csv"), "--output", &raw, "--windows-out", &p("windows.csv")]);
        assert_eq!(code(&o), 0, "score {det}: {}", String::from_utf8_lossy(&o.stderr));

        let labelled = p(&format!("scores/{det}.csv"));
        let o = rlad(&[
            "threshold", "--scores", &raw, "--detector", det, "--output", &labelled, "--contamination", "auto", "--windows",
            &p("windows.csv"),
        ]);
        assert_eq!(code(&o), 0, "threshold {det}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let o = rlad(&["threshold", "--scores", &p("knn_raw.csv"), "--detector", "knn", "--output", &p("x.csv"), "--contamination", "auto"]);
    assert_eq!(code(&o), 1);

    let o = rlad(&["signals", "--windows", &p("windows.csv"), "--scores-dir", &p("scores"), "--output", &p("signals.csv")]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    let o = rlad(&["tsf-train", "--signals", &p("signals.csv"), "--out-dir", &p("tsf"), "--n-trees", "10"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("tsf/tsf_knn.json").exists());

    let signals_tsf = p("tsf/signals_tsf.csv");
    let o = rlad(&[
        "rl-train", "--signals", &signals_tsf, "--policy-out", &p("policy.bin"), "--log-out", &p("log.csv"), "--total-steps",
        "800", "--hidden", "16,16", "--reward", "adapdec",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(fs::read_to_string(p("log.csv")).unwrap().starts_with("step,epsilon,loss,episode_return"));

    let o = rlad(&["evaluate", "--signals", &signals_tsf, "--policy", &p("policy.bin"), "--output", &p("eval.csv"), "--report-out", &p("report.json")]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("Proposed"));

    let o = rlad(&["report", "--reports", &p("report.json"), "--out-dir", &p("rendered"), "--no-plots"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let table = fs::read_to_string(dir.path().join("rendered/metrics.txt")).unwrap();
    assert!(table.contains("KNN") && table.contains("Proposed"));
    assert!(!dir.path().join("rendered/plots").exists());
}

#[test]
fn run_with_overrides_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.ini");
    fs::write(
        &cfg,
        "[experiment]\nname = cli-smoke\n[data]\nnormal_len = 1500\ntest_len = 400\n\
         [detectors]\nusad_epochs = 2\niforest_n_estimators = 10\n[tsf]\nn_trees = 10\n[dqn]\ntotal_steps = 600\nhidden = 16,16\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = rlad(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--set",
        "reward.kind=r1",
        "--output-dir",
        out.to_str().unwrap(),
        "--no-plots",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = fs::read_to_string(out.join("report.json")).unwrap();
    assert!(report.contains("\"name\": \"cli-smoke\""));
    assert!(report.contains("\"reward\": \"r1\""), "{report}");
    assert!(out.join("metrics.txt").exists());
    assert!(!out.join("plots").exists());
}
