use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn cmainj(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cmainj"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn run_reaches_target_and_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run.csv");
    let res = cmainj(&[
        "run",
        "--problem",
        "sphere",
        "--dim",
        "5",
        "--inject",
        "near-optimum",
        "--seed",
        "4",
        "--target",
        "1e-6",
        "--max-evals",
        "20000",
        "--out",
        path_str(&out),
    ]);
    assert_eq!(
        res.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    let csv = fs::read_to_string(&out).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("iter,evals,best_f,median_f,worst_f,sigma,psigma_ratio,cond,clips")
    );
    assert!(lines.count() > 0);
    assert!(String::from_utf8_lossy(&res.stdout).starts_with("target_reached"));
}

#[test]
fn run_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        let res = cmainj(&[
            "run",
            "--problem",
            "rosenbrock",
            "--dim",
            "4",
            "--clip",
            "cdf",
            "--inject",
            "direction",
            "--seed",
            "11",
            "--target",
            "1e-8",
            "--max-evals",
            "3000",
            "--out",
            path_str(out),
        ]);
        assert!(matches!(res.status.code(), Some(0) | Some(2)));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn budget_exhaustion_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("short.csv");
    let res = cmainj(&[
        "run",
        "--problem",
        "rosenbrock",
        "--dim",
        "10",
        "--target",
        "1e-10",
        "--max-evals",
        "100",
        "--out",
        path_str(&out),
    ]);
    assert_eq!(res.status.code(), Some(2));
    assert_eq!(fs::read_to_string(&out).unwrap().lines().count(), 1 + 10);
}

#[test]
fn divergence_exits_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("div.csv");
    let res = cmainj(&[
        "run",
        "--problem",
        "rosenbrock",
        "--dim",
        "10",
        "--sigma0",
        "0.001",
        "--inject",
        "near-optimum",
        "--clip",
        "off",
        "--dsigma-max",
        "inf",
        "--target",
        "1e-4",
        "--max-evals",
        "20000",
        "--out",
        path_str(&out),
    ]);
    assert_eq!(
        res.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&res.stdout)
    );
}

#[test]
fn config_errors_exit_with_64() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.csv");
    let out = path_str(&out);
    for args in [
        vec![
            "run",
            "--problem",
            "ackley",
            "--dim",
            "3",
            "--target",
            "1e-3",
            "--max-evals",
            "100",
            "--out",
            out,
        ],
        vec![
            "run",
            "--problem",
            "sphere",
            "--dim",
            "3",
            "--target",
            "-1",
            "--max-evals",
            "100",
            "--out",
            out,
        ],
        vec![
            "run",
            "--problem",
            "sphere",
            "--dim",
            "3",
            "--inject",
            "oracle",
            "--target",
            "1",
            "--max-evals",
            "100",
            "--out",
            out,
        ],
        vec!["run", "--problem", "sphere", "--dim", "3"],
        vec!["clipstats", "--dim", "3", "--samples", "10"],
        vec!["frobnicate"],
    ] {
        assert_eq!(cmainj(&args).status.code(), Some(64), "{args:?}");
    }
    assert_eq!(cmainj(&["--help"]).status.code(), Some(0));
}

#[test]
fn compare_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let base = dir.path().join("base.cfg");
    let variant = dir.path().join("variant.cfg");
    let out = dir.path().join("cmp.csv");
    fs::write(
        &base,
        "problem=sphere\ndim=6\ntarget_f=1e-6\nmax_evals=20000\n",
    )
    .unwrap();
    fs::write(&variant, "# injected\nproblem=sphere\ndim=6\ntarget_f=1e-6\nmax_evals=20000\ninjection_mode=near_optimum\n").unwrap();
    let res = cmainj(&[
        "compare",
        "--base",
        path_str(&base),
        "--variant",
        path_str(&variant),
        "--seeds",
        "1,2,3",
        "--out",
        path_str(&out),
    ]);
    assert_eq!(
        res.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    let csv = fs::read_to_string(&out).unwrap();
    assert!(csv.starts_with("seed,evals_a,status_a,evals_b,status_b,ratio\n"));
    assert_eq!(csv.lines().count(), 4);

    fs::write(&variant, "problem=rosenbrock\ndim=6\n").unwrap();
    let res = cmainj(&[
        "compare",
        "--base",
        path_str(&base),
        "--variant",
        path_str(&variant),
        "--seeds",
        "1",
        "--out",
        path_str(&out),
    ]);
    assert_eq!(res.status.code(), Some(64));
}

#[test]
fn clipstats_prints_fraction() {
    let res = cmainj(&["clipstats", "--dim", "2", "--samples", "100000"]);
    assert_eq!(res.status.code(), Some(0));
    let text = String::from_utf8_lossy(&res.stdout);
    assert!(text.contains("clipped fraction = 0.05"), "{text}");
}
