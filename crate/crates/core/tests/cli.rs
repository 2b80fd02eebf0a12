use std::path::Path;
use std::process::{Command, Output};

use sgd_er::harness::{read_record_csv, RunConfig};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sgd-er"))
}

fn config_path(name: &str) -> String {
    format!("{}/configs/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn sgd-er")
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("c.cfg");
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const SMALL_MLP: &str = "[run]\nbudget = 25\npatience = 5\nbatch_size = 16\n\
    [landscape]\nkind = mlp\nsamples = 90\nhidden = 4\n";

#[test]
fn missing_config_is_a_usage_error() {
    let out = run(&["run"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn unreadable_config_exits_one() {
    let out = run(&["run", "--config", "/nonexistent/x.cfg"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn malformed_config_and_unknown_scheduler_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[run]\nbudgett = 3\n");
    assert_eq!(run(&["run", "--config", &cfg]).status.code(), Some(2));

    let cfg = write_config(dir.path(), SMALL_MLP);
    let out = run(&["run", "--config", &cfg, "--scheduler", "sgd_cubic"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sgd_cubic"));

    let out = run(&["run", "--config", &cfg, "--seed", "1,x"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn run_writes_records_with_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_MLP);
    let out_dir = dir.path().join("out");
    let out = run(&[
        "run",
        "--config",
        &cfg,
        "--scheduler",
        "sgd_lin",
        "--seed",
        "3,4",
        "--budget",
        "12",
        "--patience",
        "7",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for seed in [3, 4] {
        let rows = read_record_csv(&out_dir.join(format!("sgd_lin_seed{seed}.csv"))).unwrap();
        assert_eq!(rows.len(), 12);
    }
    for f in ["sgd_lin_seed3_lr.csv", "sgd_lin_seed4_acc.csv", "lr.svg", "test_acc.svg"] {
        assert!(out_dir.join("plots").join(f).is_file(), "{f}");
    }
}

#[test]
fn run_output_is_byte_identical_across_processes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_MLP);
    let mut bytes = Vec::new();
    for name in ["a", "b"] {
        let o = dir.path().join(name);
        let out = run(&["run", "--config", &cfg, "--seed", "9", "--out", o.to_str().unwrap()]);
        assert!(out.status.success());
        bytes.push(std::fs::read(o.join("ours_exp_seed9.csv")).unwrap());
    }
    assert_eq!(bytes[0], bytes[1]);
}

#[test]
fn compare_writes_summary_for_all_variants() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_MLP);
    let o = dir.path().join("cmp");
    let out = run(&["compare", "--config", &cfg, "--seed", "1,2", "--out", o.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(o.join("summary.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("scheduler,metric,mean,std,n_seeds"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 8 * 4);
    assert!(rows.iter().all(|r| r.ends_with(",2")));
    for v in ["sgd_exp", "sgd_lin", "adam", "cosa", "clr", "wsds", "ours_exp", "ours_lin"] {
        assert!(rows.iter().any(|r| r.starts_with(&format!("{v},best_val_loss,"))), "{v}");
    }
}

#[test]
fn saddle_sweep_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "saddle",
        "--config",
        &config_path("t1.cfg"),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("saddle.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("k,eta_k,alpha_k,bound,T_empirical"));
    let t: Vec<u64> = lines
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(t.len(), 10);
    assert_eq!(t[1], 73);
    assert!(t.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn gradcheck_passes_on_defaults() {
    let out = run(&["gradcheck", "--points", "20"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(text.matches(" ok").count(), 3, "{text}");
}

#[test]
fn shipped_configs_parse() {
    for name in ["benchmark.cfg", "t1.cfg", "multibasin.cfg"] {
        RunConfig::load(Path::new(&config_path(name))).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
    let bench = RunConfig::load(Path::new(&config_path("benchmark.cfg"))).unwrap();
    let mut expected = RunConfig::benchmark();
    expected.out_dir = bench.out_dir.clone();
    assert_eq!(bench, expected);
}
