use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use branchpde::engine::EstimatorResult;
use branchpde::existence::{HorizonReport, Verdict};
use branchpde_cli::{GridSpec, RunConfig};
use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_branchpde");

fn write_config(dir: &TempDir, name: &str, json: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, json).unwrap();
    p
}

fn branchpde(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut c = Command::new(BIN);
    c.args(args).env_remove("BRANCHPDE_THREADS");
    for (k, v) in env {
        c.env(k, v);
    }
    c.output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn rows(csv: &str) -> Vec<Vec<f64>> {
    csv.lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn estimate_writes_csv_and_round_tripping_json() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "e.json",
        r#"{"model": "nld", "k": 1, "t": 0.9, "n_trees": 200000, "seed": 3}"#,
    );
    let out = dir.path().join("nested/run.csv");
    let o = branchpde(
        &["estimate", "--config", path(&cfg), "--out", path(&out)],
        &[],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = std::fs::read_to_string(&out).unwrap();
    assert!(csv.starts_with("t,x1,mark,mean,stderr,ci_lo,ci_hi,n,truncated\n"));
    let row = &rows(&csv)[0];
    let exact = (-0.9f64).exp();
    assert!(row[5] <= exact && exact <= row[6], "{csv}");
    assert_eq!(row[7], 200000.0);

    let json = std::fs::read_to_string(out.with_extension("json")).unwrap();
    let r: EstimatorResult = serde_json::from_str(&json).unwrap();
    assert_eq!(
        r.mean.to_string(),
        csv.lines().nth(1).unwrap().split(',').nth(3).unwrap()
    );
    let again: EstimatorResult = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
    assert_eq!(r, again);
}

#[test]
fn estimate_at_the_horizon_returns_the_terminal_condition() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "e.json",
        r#"{"model": "nld", "k": 1, "t": 1, "T": 1, "x": [0.5], "n_trees": 1000000}"#,
    );
    let o = branchpde(&["estimate", "--config", path(&cfg)], &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let row = &rows(&String::from_utf8(o.stdout).unwrap())[0];
    let phi = (-1.0f64).exp() * 0.75f64.powf(1.75);
    assert!((row[3] - phi).abs() < 1e-15, "{} vs {phi}", row[3]);
    assert_eq!(row[4], 0.0);
}

#[test]
fn config_errors_exit_3_without_output() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("never.csv");
    for (i, json) in [
        r#"{"model": "no-such-model"}"#,
        r#"{"model": "nld", "t": 2}"#,
        r#"{"model": "nld", "n_trees": 1}"#,
        r#"{"model": "nld", "x": [0, 0]}"#,
        r#"{"model": "nld", "unknown_field": 1}"#,
        r#"not json"#,
        r#"{"model": "gradd", "d": 2, "k": 1, "t": 1, "mark": 1}"#,
    ]
    .iter()
    .enumerate()
    {
        let cfg = write_config(&dir, &format!("c{i}.json"), json);
        let o = branchpde(
            &["estimate", "--config", path(&cfg), "--out", path(&out)],
            &[],
        );
        assert_eq!(code(&o), 3, "{json}: {}", stderr(&o));
        assert!(!out.exists(), "{json}");
        assert!(stderr(&o).contains("error:"));
    }
    let o = branchpde(&["estimate", "--config", "/nonexistent/cfg.json"], &[]);
    assert_eq!(code(&o), 3);
    let o = branchpde(&["frobnicate"], &[]);
    assert_eq!(code(&o), 3);
    let o = branchpde(&["--help"], &[]);
    assert_eq!(code(&o), 0);
}

#[test]
fn budget_abort_exits_2_and_removes_partial_sweep() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "b.json",
        r#"{"model": "nld", "k": 1, "t": 0.5, "grid": "-1:1:5", "n_trees": 10000,
            "budget": {"max_particles": 3, "max_generation": 100}}"#,
    );
    let out = dir.path().join("sweep.csv");
    let o = branchpde(&["sweep", "--config", path(&cfg), "--out", path(&out)], &[]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    assert!(stderr(&o).contains("budget exceeded"), "{}", stderr(&o));
    assert!(!out.exists());
    let o = branchpde(
        &["estimate", "--config", path(&cfg), "--out", path(&out)],
        &[],
    );
    assert_eq!(code(&o), 2);
    assert!(!out.exists());
}

#[test]
fn sweep_csv_is_identical_across_workers_and_threads_env() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "s.json",
        r#"{"model": "gradd", "d": 2, "k": 2, "t": 0.8, "grid": "-1:1:7", "n_trees": 3000, "seed": 12, "workers": 2}"#,
    );
    let run = |extra: &[&str], env: &[(&str, &str)]| {
        let mut args = vec!["sweep", "--config", path(&cfg)];
        args.extend_from_slice(extra);
        let o = branchpde(&args, env);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        o.stdout
    };
    let base = run(&["--workers", "1"], &[]);
    assert!(String::from_utf8_lossy(&base).starts_with("x1,mean,stderr,ci_lo,ci_hi,n,truncated\n"));
    assert_eq!(rows(&String::from_utf8_lossy(&base)).len(), 7);
    assert_eq!(run(&["--workers", "4"], &[]), base);
    assert_eq!(run(&["--workers", "8"], &[]), base);
    assert_eq!(run(&[], &[("BRANCHPDE_THREADS", "3")]), base);
    assert_eq!(run(&["--workers", "1"], &[]), base);
    let other_seed = run(&["--seed", "13"], &[]);
    assert_ne!(other_seed, base);

    let o = branchpde(
        &["sweep", "--config", path(&cfg)],
        &[("BRANCHPDE_THREADS", "zero")],
    );
    assert_eq!(code(&o), 3);
}

#[test]
fn check_examples() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "l.json",
        r#"{"model": "linear-test", "alpha": 1.5, "delta": 0.5, "T": 0.1, "p": 2}"#,
    );
    let out = dir.path().join("report.json");
    let o = branchpde(&["check", "--config", path(&cfg), "--out", path(&out)], &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = std::fs::read_to_string(&out).unwrap();
    let r: HorizonReport = serde_json::from_str(&text).unwrap();
    assert_eq!(r.verdict, Verdict::CertifiedB);
    assert_eq!(r.route_b.unwrap().t3b_bound, f64::INFINITY);
    assert!(text.contains(r#""t3b_bound": "inf""#));
    assert!(String::from_utf8_lossy(&o.stdout).contains("verdict: certified-b"));

    let cfg = write_config(
        &dir,
        "n.json",
        r#"{"model": "nld", "k": 1, "delta": 0.9, "alpha": 1.5, "p": 2}"#,
    );
    let o = branchpde(&["check", "--config", path(&cfg), "--out", path(&out)], &[]);
    assert_eq!(code(&o), 4);
    let r: HorizonReport = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(r.verdict, Verdict::Uncertified);
    assert!(!r.cond_eta.unwrap().holds);

    let cfg = write_config(
        &dir,
        "h.json",
        r#"{"model": "burgers-halfspace", "d": 2, "kappa": 10}"#,
    );
    let o = branchpde(&["check", "--config", path(&cfg)], &[]);
    assert_eq!(code(&o), 4);
    let r: HorizonReport = serde_json::from_slice(&o.stdout).unwrap();
    assert!(
        r.notes.iter().any(|n| n.contains("not Lipschitz")),
        "{:?}",
        r.notes
    );

    let cfg = write_config(&dir, "x.json", r#"{"model": "nld", "alpha": 2.0}"#);
    assert_eq!(code(&branchpde(&["check", "--config", path(&cfg)], &[])), 3);
}

#[test]
fn strict_refuses_uncertified_runs() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "h.json",
        r#"{"model": "burgers-halfspace", "d": 2, "kappa": 10, "t": 0.99, "n_trees": 100}"#,
    );
    let out = dir.path().join("h.csv");
    let o = branchpde(
        &[
            "estimate",
            "--config",
            path(&cfg),
            "--strict",
            "--out",
            path(&out),
        ],
        &[],
    );
    assert_eq!(code(&o), 4, "{}", stderr(&o));
    assert!(!out.exists());
    let o = branchpde(
        &["estimate", "--config", path(&cfg), "--out", path(&out)],
        &[],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stderr(&o).contains("horizon check: uncertified"));
    assert!(out.exists());
}

#[test]
fn sample_diag_examples() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "a2.json",
        r#"{"alpha": 2, "t": 0.7, "samples": 1000}"#,
    );
    let out = dir.path().join("s.csv");
    let o = branchpde(
        &["sample-diag", "--config", path(&cfg), "--out", path(&out)],
        &[],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let samples = std::fs::read_to_string(&out).unwrap();
    assert_eq!(samples.lines().next(), Some("s"));
    assert_eq!(samples.lines().skip(1).count(), 1000);
    assert!(samples
        .lines()
        .skip(1)
        .all(|l| l.parse::<f64>().unwrap() == 1.4));

    let cfg = write_config(
        &dir,
        "a15.json",
        r#"{"alpha": 1.5, "t": 1, "samples": 1000000, "seed": 4}"#,
    );
    let o = branchpde(&["sample-diag", "--config", path(&cfg)], &[]);
    assert_eq!(code(&o), 0);
    let table = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "lambda,empirical,stderr,exact,z,pass");
    assert_eq!(lines.len(), 4);
    for (l, lambda) in lines[1..].iter().zip([0.5f64, 1.0, 2.0]) {
        let f: Vec<&str> = l.split(',').collect();
        let (emp, se): (f64, f64) = (f[1].parse().unwrap(), f[2].parse().unwrap());
        let exact = (-(2.0 * lambda).powf(0.75)).exp();
        assert!((emp - exact).abs() < 4.0 * se, "{l}");
        assert_eq!(f[5], "yes");
    }

    let cfg = write_config(
        &dir,
        "small.json",
        r#"{"alpha": 1.5, "t": 1, "samples": 10}"#,
    );
    let o = branchpde(&["sample-diag", "--config", path(&cfg)], &[]);
    assert_eq!(code(&o), 0);
    assert!(stderr(&o).contains("insufficient n for test"));
    assert!(String::from_utf8_lossy(&o.stdout).contains("insufficient-n"));

    let cfg = write_config(&dir, "bad.json", r#"{"alpha": 2.5, "t": 1}"#);
    assert_eq!(
        code(&branchpde(&["sample-diag", "--config", path(&cfg)], &[])),
        3
    );
}

fn figure(name: &str) -> RunConfig {
    let p = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("figures")
        .join(format!("{name}.json"));
    RunConfig::load(&p).unwrap()
}

#[test]
fn figure_configs_resolve() {
    let expect = [
        ("fig1a", "nld", 10, 0.9),
        ("fig1b", "nld", 10, 0.9),
        ("fig2a", "gradd", 2, 0.9),
        ("fig2b", "gradd", 2, 0.9),
        ("fig3a", "burgers-halfspace", 2, 0.99),
        ("fig3b", "burgers-cosine", 2, 0.9),
    ];
    for (name, model, d, t) in expect {
        let c = figure(name);
        c.validate().unwrap();
        let m = c.model().unwrap();
        assert_eq!(
            (m.name.as_str(), m.dim(), c.t, c.horizon, m.alpha()),
            (model, d, t, 1.0, 1.5),
            "{name}"
        );
        GridSpec::parse(c.grid.as_deref().unwrap()).unwrap();
        if model.starts_with("burgers") {
            assert_eq!(m.kappa(), 10.0);
        }
    }
}

fn run_sweep(dir: &TempDir, name: &str, json: &str) -> Vec<Vec<f64>> {
    let cfg = write_config(dir, name, json);
    let o = branchpde(&["sweep", "--config", path(&cfg)], &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    rows(&String::from_utf8(o.stdout).unwrap())
}

fn bump_solution(k: u32, x1: f64) -> f64 {
    (-0.9f64).exp() * (1.0 - x1 * x1).max(0.0).powf(k as f64 + 0.75)
}

#[test]
fn figure_one_protocol_in_dimension_ten() {
    let dir = TempDir::new().unwrap();
    let cfg = Path::new(env!("CARGO_MANIFEST_DIR")).join("figures/fig1a.json");
    let out = dir.path().join("fig1a.csv");
    let o = branchpde(&["sweep", "--config", path(&cfg), "--out", path(&out)], &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = rows(&std::fs::read_to_string(&out).unwrap());
    assert_eq!(r.len(), 61);
    let hits = r
        .iter()
        .filter(|v| (v[1] - bump_solution(0, v[0])).abs() < 3.0 * v[2])
        .count();
    assert!(hits >= 58, "{hits}/61");
}

#[test]
fn gradd_sweeps_follow_the_closed_form() {
    let dir = TempDir::new().unwrap();
    for k in [1u32, 2] {
        let r = run_sweep(
            &dir,
            "f2.json",
            &format!(
                r#"{{"model": "gradd", "d": 2, "k": {k}, "t": 0.9, "grid": "-1.2:1.2:13", "n_trees": 100000, "seed": 1}}"#
            ),
        );
        for v in &r {
            let exact = bump_solution(k, v[0]);
            assert!(
                (v[1] - exact).abs() < 3.0 * v[2],
                "k={k} x1={}: {} vs {exact} (se {})",
                v[0],
                v[1],
                v[2]
            );
        }
    }
}

#[test]
fn burgers_cosine_curve_is_finite_and_reproducible() {
    let dir = TempDir::new().unwrap();
    let json = |seed: u64| {
        format!(
            r#"{{"model": "burgers-cosine", "d": 2, "kappa": 10, "t": 0.9, "grid": "-2:2:9", "n_trees": 100000, "seed": {seed}}}"#
        )
    };
    let a = run_sweep(&dir, "a.json", &json(1));
    assert_eq!(a, run_sweep(&dir, "a2.json", &json(1)));
    let b = run_sweep(&dir, "b.json", &json(2));
    assert!(a.iter().chain(&b).all(|v| v.iter().all(|x| x.is_finite())));
    for (p, q) in a.iter().zip(&b) {
        let se = (p[2] * p[2] + q[2] * q[2]).sqrt();
        assert!(
            (p[1] - q[1]).abs() < 3.0 * se,
            "x1={}: {} vs {} (se {se})",
            p[0],
            p[1],
            q[1]
        );
    }
}

/// Near T, u ≈ φ − (T − t) φ Σ∂ⱼφ, and ∂₁φ < 0 for 0 < x₁ < π/2, so the
/// convection term lifts u(x₁, 0) above u(−x₁, 0).
#[test]
fn burgers_cosine_asymmetry_has_the_convective_sign() {
    let dir = TempDir::new().unwrap();
    let at = |x1: f64, seed: u64| {
        let cfg = write_config(
            &dir,
            "p.json",
            &format!(
                r#"{{"model": "burgers-cosine", "d": 2, "kappa": 10, "t": 0.9, "x": [{x1}, 0], "n_trees": 1000000, "seed": {seed}}}"#
            ),
        );
        let o = branchpde(&["estimate", "--config", path(&cfg)], &[]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        rows(&String::from_utf8(o.stdout).unwrap())[0].clone()
    };
    let (right, left) = (at(1.0, 21), at(-1.0, 22));
    // columns t, x1, x2, mark, mean, stderr, …
    let se = (right[5].powi(2) + left[5].powi(2)).sqrt();
    assert!(
        right[4] - left[4] > 3.0 * se,
        "{} vs {} (se {se})",
        right[4],
        left[4]
    );
}
