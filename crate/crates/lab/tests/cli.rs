use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rwde-lab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn error_json(o: &Output) -> serde_json::Value {
    let stderr = String::from_utf8_lossy(&o.stderr);
    let line = stderr.lines().last().expect("stderr has an error line");
    serde_json::from_str(line).expect("last stderr line is JSON")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("lab.toml");
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x != "toml"))
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

#[test]
fn exponents_prints_the_default_table() {
    let o = lab(&["exponents"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert!(text.contains("kappa      0.64"), "{text}");
    assert!(text.contains("drift      [0.2, 0.0, 0.0]"), "{text}");
}

#[test]
fn exponents_reads_weights_from_config_and_writes_json() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[exponents]\nd = 3\nalpha = [0.1, 0.1, 0.1, 0.1, 0.1, 0.1]\n",
    );
    let out = dir.path().join("out");
    let o = lab(&["exponents", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let table: serde_json::Value = serde_json::from_slice(&fs::read(out.join("exponents.json")).unwrap()).unwrap();
    assert_eq!(table["kappa"], 1.0);
    assert_eq!(table["box_kappa_lambda"][1][1], 1.0);
}

#[test]
fn rerun_is_byte_identical_and_thread_count_does_not_matter() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let run = |dir: &Path, threads: &str| {
        let o = lab(&[
            "run",
            "sampler-moments",
            "--replicas",
            "20000",
            "--seed",
            "5",
            "--threads",
            threads,
            "--out",
            dir.to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0, "{}", stdout(&o));
    };
    run(a.path(), "1");
    let first = snapshot(a.path());
    run(a.path(), "1");
    assert_eq!(snapshot(a.path()), first);
    run(b.path(), "3");
    assert_eq!(snapshot(b.path()), first);
    let names: Vec<&str> = first.iter().map(|(n, _)| n.as_str()).collect();
    assert!(names.contains(&"ledger.csv"));
    assert!(names.contains(&"sampler-moments_summary.json"));
    assert!(names
        .iter()
        .any(|n| n.starts_with("sampler-moments_") && n.ends_with(".dat")));
}

#[test]
fn summary_schema_and_series_files() {
    let dir = tempfile::tempdir().unwrap();
    let o = lab(&[
        "run",
        "excursions",
        "--replicas",
        "1",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(matches!(code(&o), 0 | 1));
    let summary: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("excursions_summary.json")).unwrap()).unwrap();
    assert_eq!(summary["schema_version"], 1);
    assert_eq!(summary["experiment"], "excursions");
    assert_eq!(summary["seed"], 1);
    assert_eq!(summary["config"]["replicas"], 1);
    assert_eq!(summary["config_hash"].as_str().unwrap().len(), 16);
    for s in summary["series"].as_array().unwrap() {
        let text = fs::read_to_string(dir.path().join(s["file"].as_str().unwrap())).unwrap();
        let mut lines = text.lines();
        assert!(lines.next().unwrap().starts_with("# "));
        assert!(lines.all(|l| l.split(' ').count() == 2 && l.split(' ').all(|v| v.parse::<f64>().is_ok())));
    }
}

#[test]
fn ledger_appends_across_configs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let rows = || fs::read_to_string(dir.path().join("ledger.csv")).unwrap();
    assert_eq!(
        code(&lab(&["run", "gamma-identity", "--replicas", "20", "--out", out])),
        0
    );
    let first = rows();
    assert_eq!(
        first.lines().next().unwrap(),
        "target,estimate,ci_low,ci_high,n,seed,params_hash"
    );
    assert_eq!(
        code(&lab(&["run", "gamma-identity", "--replicas", "30", "--out", out])),
        0
    );
    let second = rows();
    assert!(second.starts_with(&first));
    assert!(second.lines().count() > first.lines().count());
    assert_eq!(
        code(&lab(&["run", "gamma-identity", "--replicas", "20", "--out", out])),
        0
    );
    assert_eq!(rows(), second);
}

#[test]
fn statistical_failure_exits_one_and_report_follows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let cfg = write_config(dir.path(), "[excursions]\nreplicas = 1\nhorizon = 20.0\n");
    let o = lab(&["run", "excursions", "--config", &cfg, "--out", out]);
    assert_eq!(code(&o), 1, "{}", stdout(&o));
    assert!(stdout(&o).contains("excursions: FAIL"));
    let r = lab(&["report", "--out", out]);
    assert_eq!(code(&r), 1);
    assert!(stdout(&r).contains("FAIL excursions"));
}

#[test]
fn report_passes_when_every_summary_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(code(&lab(&["run", "kappa-tables", "--out", out])), 0);
    assert_eq!(
        code(&lab(&["run", "gamma-identity", "--replicas", "10", "--out", out])),
        0
    );
    let r = lab(&["report", "--out", out]);
    assert_eq!(code(&r), 0);
    assert!(stdout(&r).contains("2 of 2 experiments passed"));
}

#[test]
fn configuration_errors_exit_two_with_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();
    let cases = [
        ("gamma-identity", "colour = 3\n"),
        ("velocity", "[velocity]\nreplicaz = 3\n"),
        (
            "gamma-identity",
            "[gamma-identity]\nweights = { d = 2, alpha = [0.5, -0.3, 0.4, 0.2] }\n",
        ),
        (
            "gamma-identity",
            "[gamma-identity]\nweights = { d = 2, alpha = [0.5, 0.3, 0.4] }\n",
        ),
        ("theta-tail", "[theta-tail]\nlevels = []\n"),
    ];
    for (experiment, text) in cases {
        let cfg = write_config(dir.path(), text);
        let o = lab(&["run", experiment, "--config", &cfg, "--out", out]);
        assert_eq!(code(&o), 2, "{text}");
        assert_eq!(error_json(&o)["error"]["kind"], "config", "{text}");
    }
    assert_eq!(code(&lab(&["run", "no-such-experiment"])), 2);
    assert_eq!(
        code(&lab(&["run", "gamma-identity", "--config", "/nonexistent/lab.toml"])),
        2
    );
    assert_eq!(
        code(&lab(&["report", "--out", dir.path().join("empty").to_str().unwrap()])),
        2
    );
}

#[test]
fn budget_errors_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[kappa-tables]\nsize_cap = 1\n");
    let o = lab(&[
        "run",
        "kappa-tables",
        "--config",
        &cfg,
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 3);
    assert_eq!(error_json(&o)["error"]["kind"], "budget");
}
