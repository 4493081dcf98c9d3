use std::path::Path;
use std::process::{Command, Output};

fn bsca(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bsca"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn pr_instance(dir: &Path) {
    let out = bsca(&["generate", "pr", "--I", "40", "--N", "30", "--density", "0.1", "--seed", "3", "--out", "pr"], dir);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

fn without_elapsed(csv: &str) -> Vec<String> {
    csv.lines().map(|l| l.rsplit_once(',').unwrap().0.to_string()).collect()
}

#[test]
fn solve_writes_trace_manifest_and_summary() {
    let tmp = tempfile::tempdir().unwrap();
    pr_instance(tmp.path());
    let out = bsca(&["solve", "pr", "--blocks", "2", "--algorithm", "inexact-bsca", "--max-iters", "200", "--out", "run"], tmp.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let line = stdout(&out);
    let fields: Vec<&str> = line.trim().split(' ').collect();
    assert_eq!(fields.len(), 3);
    assert!(fields[0].strip_prefix("final_objective=").unwrap().parse::<f64>().is_ok());
    assert!(fields[1].strip_prefix("iters=").unwrap().parse::<usize>().unwrap() <= 200);
    assert!(fields[2].strip_prefix("seconds=").unwrap().parse::<f64>().is_ok());

    let trace = std::fs::read_to_string(tmp.path().join("run/trace.csv")).unwrap();
    assert_eq!(trace.lines().next().unwrap(), "iter,block,stepsize,armijo_m,objective,elapsed_s");
    let manifest = std::fs::read_to_string(tmp.path().join("run/run.toml")).unwrap();
    assert!(manifest.contains("command = \"solve\""));
    assert!(manifest.contains("algorithm = \"inexact-bsca\""));
}

#[test]
fn repeated_solves_match_apart_from_timing() {
    let tmp = tempfile::tempdir().unwrap();
    pr_instance(tmp.path());
    for dir in ["a", "b"] {
        let out = bsca(&["solve", "pr", "--blocks", "4", "--rule", "random", "--seed", "9", "--max-iters", "100", "--out", dir], tmp.path());
        assert_eq!(code(&out), 0);
    }
    let a = std::fs::read_to_string(tmp.path().join("a/trace.csv")).unwrap();
    let b = std::fs::read_to_string(tmp.path().join("b/trace.csv")).unwrap();
    assert_eq!(without_elapsed(&a), without_elapsed(&b));

    let out = bsca(&["reproduce", "a"], tmp.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(tmp.path().join("a/reproduce/trace.csv").exists());
}

#[test]
fn config_file_is_layered_under_flags() {
    let tmp = tempfile::tempdir().unwrap();
    pr_instance(tmp.path());
    std::fs::write(tmp.path().join("opts.toml"), "algorithm = \"bgd\"\nmax_iters = 7\n").unwrap();
    let out = bsca(&["solve", "pr", "--config", "opts.toml", "--max-iters", "5", "--out", "run"], tmp.path());
    assert_eq!(code(&out), 0);
    let iters = stdout(&out).split("iters=").nth(1).unwrap().split(' ').next().unwrap().parse::<usize>().unwrap();
    assert!(iters <= 5);
    let manifest = std::fs::read_to_string(tmp.path().join("run/run.toml")).unwrap();
    assert!(manifest.contains("algorithm = \"bgd\""));
    assert!(manifest.contains("max_iters = 5"));

    std::fs::write(tmp.path().join("bad.toml"), "bloks = 3\n").unwrap();
    let out = bsca(&["solve", "pr", "--config", "bad.toml"], tmp.path());
    assert_eq!(code(&out), 2);
}

#[test]
fn usage_errors_exit_with_2() {
    let tmp = tempfile::tempdir().unwrap();
    pr_instance(tmp.path());
    let out = bsca(&["solve", "pr", "--algorithm", "bpgd", "--blocks", "2"], tmp.path());
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("bpgd"));
    assert_eq!(code(&bsca(&["solve", "missing"], tmp.path())), 2);
    assert_eq!(code(&bsca(&["solve", "pr", "--alpha", "1.5", "--line-search", "armijo"], tmp.path())), 2);
    assert_eq!(code(&bsca(&["solve", "pr", "--surrogate", "cubic"], tmp.path())), 2);
    assert_eq!(code(&bsca(&["solve", "pr", "--frobnicate"], tmp.path())), 2);
    assert_eq!(code(&bsca(&["reproduce", "nowhere"], tmp.path())), 2);
}

#[test]
fn bench_tabulates_every_variant() {
    let tmp = tempfile::tempdir().unwrap();
    pr_instance(tmp.path());
    let spec = r#"
tol = 1e-6
[defaults]
max_iters = 300
[[variant]]
name = "bsca-k2"
algorithm = "inexact-bsca"
blocks = 2
[[variant]]
name = "bgd-k2"
algorithm = "bgd"
blocks = 2
[[variant]]
name = "broken"
algorithm = "bpgd"
blocks = 2
"#;
    std::fs::write(tmp.path().join("spec.toml"), spec).unwrap();
    let out = bsca(&["bench", "pr", "--spec", "spec.toml", "--out", "bench"], tmp.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(tmp.path().join("bench/comparison.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows[0], "variant,final_objective,iters_to_tol,seconds");
    assert_eq!(rows.len(), 4);
    assert!(rows[1].starts_with("bsca-k2,"));
    assert_eq!(rows[3], "broken,,,");
    assert!(tmp.path().join("bench/bgd-k2/trace.csv").exists());

    let out = bsca(&["reproduce", "bench/run.toml"], tmp.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn anomaly_instances_solve() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bsca(
        &["generate", "anomaly", "--N", "8", "--K", "10", "--I", "12", "--rho", "2", "--seed", "1", "--out", "an"],
        tmp.path(),
    );
    assert_eq!(code(&out), 0);
    for alg in ["bsca", "parallel-sca"] {
        let out = bsca(&["solve", "an", "--algorithm", alg, "--max-iters", "60", "--out", alg], tmp.path());
        assert_eq!(code(&out), 0, "{alg}: {}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(code(&bsca(&["solve", "an", "--algorithm", "bpgd"], tmp.path())), 2);
}
