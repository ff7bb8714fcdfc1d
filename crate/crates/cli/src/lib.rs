//! Batch front-end: JSON run configurations in, CSV and JSON out.

pub mod config;

use std::fmt::Write as _;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use branchpde::engine::{estimate, splitmix64, EngineError, EstimateOptions, EstimatorResult};
use branchpde::existence::{horizon_report, ExistenceError, HorizonReport, Verdict};
use branchpde::model::{ModelError, PdeModel};
use branchpde::sampling::{RngStream, Subordinator};
use thiserror::Error;

pub use config::{BudgetConfig, GridSpec, Overrides, RunConfig, THREADS_ENV};

pub const EXIT_OK: i32 = 0;
pub const EXIT_BUDGET: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_UNCERTIFIED: i32 = 4;

/// Below this many samples the Laplace-transform test is not meaningful.
pub const MIN_DIAG_SAMPLES: u64 = 1000;

const DIAG_LAMBDAS: [f64; 3] = [0.5, 1.0, 2.0];

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Existence(#[from] ExistenceError),
    #[error("horizon not certified (verdict {0:?}); rerun without --strict to proceed")]
    Uncertified(Verdict),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Engine(
                EngineError::BudgetExceeded { .. }
                | EngineError::Aborted { .. }
                | EngineError::NonFinite(_),
            ) => EXIT_BUDGET,
            Self::Uncertified(_) => EXIT_UNCERTIFIED,
            _ => EXIT_CONFIG,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Estimate,
    Sweep,
    Check,
    SampleDiag,
}

/// Runs one subcommand. CSV/JSON go to the configured output file or to
/// `stdout`; notices go to `log`.
pub fn run(
    command: Command,
    cfg: &RunConfig,
    stdout: &mut dyn Write,
    log: &mut dyn Write,
) -> Result<i32, CliError> {
    match command {
        Command::Estimate => cmd_estimate(cfg, stdout, log),
        Command::Sweep => cmd_sweep(cfg, stdout, log),
        Command::Check => cmd_check(cfg, stdout, log),
        Command::SampleDiag => cmd_sample_diag(cfg, stdout, log),
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(io_err(path))?))
}

fn write_all(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let mut f = create(path)?;
    f.write_all(bytes).map_err(io_err(path))?;
    f.flush().map_err(io_err(path))
}

fn emit(out: Option<&Path>, stdout: &mut dyn Write, bytes: &[u8]) -> Result<(), CliError> {
    match out {
        Some(p) => write_all(p, bytes),
        None => stdout
            .write_all(bytes)
            .map_err(io_err(Path::new("<stdout>"))),
    }
}

/// `out.csv` → `out.json`.
pub fn sidecar_path(out: &Path) -> PathBuf {
    out.with_extension("json")
}

fn estimate_options(cfg: &RunConfig, seed: u64) -> Result<EstimateOptions, CliError> {
    Ok(EstimateOptions::new(cfg.n_trees, seed)
        .workers(cfg.workers())
        .budget(cfg.budget()?))
}

/// Checks the horizon; fatal only under `--strict`.
fn advisory(cfg: &RunConfig, model: &PdeModel, log: &mut dyn Write) -> Result<(), CliError> {
    match horizon_report(model, cfg.horizon, &cfg.report_options()) {
        Ok(r) => {
            let _ = writeln!(log, "horizon check: {}", verdict_name(r.verdict));
            if r.verdict == Verdict::Uncertified {
                if r.notes.is_empty() {
                    let _ = writeln!(
                        log,
                        "  note: neither horizon bound covers T = {}",
                        cfg.horizon
                    );
                }
                for n in &r.notes {
                    let _ = writeln!(log, "  note: {n}");
                }
                if cfg.strict {
                    return Err(CliError::Uncertified(r.verdict));
                }
            }
            Ok(())
        }
        Err(e) if cfg.strict => Err(e.into()),
        Err(e) => {
            let _ = writeln!(log, "horizon check skipped: {e}");
            Ok(())
        }
    }
}

fn prepare(cfg: &RunConfig, log: &mut dyn Write) -> Result<PdeModel, CliError> {
    cfg.validate()?;
    let model = cfg.model()?;
    if cfg.mark > model.marks() {
        return Err(CliError::Config(format!(
            "mark {} outside 0..={} for model {}",
            cfg.mark,
            model.marks(),
            model.name
        )));
    }
    advisory(cfg, &model, log)?;
    Ok(model)
}

fn result_fields(r: &EstimatorResult) -> String {
    format!(
        "{},{},{},{},{},{}",
        r.mean, r.stderr, r.ci95.0, r.ci95.1, r.n_trees, r.truncated_trees
    )
}

/// One estimate at (t, x): a one-row CSV plus the JSON result beside it.
pub fn cmd_estimate(
    cfg: &RunConfig,
    stdout: &mut dyn Write,
    log: &mut dyn Write,
) -> Result<i32, CliError> {
    let model = prepare(cfg, log)?;
    let x = cfg.point(model.dim())?;
    let r = estimate(
        &model,
        cfg.t,
        &x,
        cfg.mark,
        cfg.horizon,
        &estimate_options(cfg, cfg.seed)?,
    )?;

    let mut csv = String::from("t,");
    for i in 1..=x.len() {
        let _ = write!(csv, "x{i},");
    }
    csv.push_str("mark,mean,stderr,ci_lo,ci_hi,n,truncated\n");
    let _ = write!(csv, "{},", cfg.t);
    for v in &x {
        let _ = write!(csv, "{v},");
    }
    let _ = writeln!(csv, "{},{}", cfg.mark, result_fields(&r));
    emit(cfg.out.as_deref(), stdout, csv.as_bytes())?;
    if let Some(out) = &cfg.out {
        let json = serde_json::to_string_pretty(&r).expect("result serializes");
        write_all(&sidecar_path(out), json.as_bytes())?;
    }
    let _ = writeln!(
        log,
        "{}: mean {} ± {} ({} trees, {:.2} s)",
        model.name, r.mean, r.stderr, r.n_trees, r.elapsed
    );
    Ok(EXIT_OK)
}

/// Seed of grid point `i`; independent populations keep pointwise errors uncorrelated.
pub fn point_seed(master_seed: u64, i: usize) -> u64 {
    splitmix64(splitmix64(master_seed) ^ (i as u64))
}

pub const SWEEP_HEADER: &str = "x1,mean,stderr,ci_lo,ci_hi,n,truncated";

/// Estimates along x₁ with the other coordinates held at `x`.
pub fn cmd_sweep(
    cfg: &RunConfig,
    stdout: &mut dyn Write,
    log: &mut dyn Write,
) -> Result<i32, CliError> {
    let grid = GridSpec::parse(
        cfg.grid
            .as_deref()
            .ok_or_else(|| CliError::Config("sweep needs `grid` = \"lo:hi:steps\"".into()))?,
    )?;
    let model = prepare(cfg, log)?;
    let base = cfg.point(model.dim())?;

    let mut file = None;
    if let Some(p) = &cfg.out {
        file = Some(create(p)?);
    }
    let result = sweep_rows(
        cfg,
        &model,
        &grid,
        &base,
        file.as_mut().map(|f| f as &mut dyn Write).unwrap_or(stdout),
        log,
    );
    if let Some(mut f) = file {
        let p = cfg.out.as_deref().expect("file implies path");
        let flushed = f.flush().map_err(io_err(p));
        drop(f);
        if result.is_err() || flushed.is_err() {
            let _ = std::fs::remove_file(p);
        }
        flushed?;
    }
    result
}

fn sweep_rows(
    cfg: &RunConfig,
    model: &PdeModel,
    grid: &GridSpec,
    base: &[f64],
    w: &mut dyn Write,
    log: &mut dyn Write,
) -> Result<i32, CliError> {
    let sink = Path::new(cfg.out.as_deref().unwrap_or(Path::new("<stdout>")));
    writeln!(w, "{SWEEP_HEADER}").map_err(io_err(sink))?;
    let mut x = base.to_vec();
    for (i, x1) in grid.points().into_iter().enumerate() {
        x[0] = x1;
        let opts = estimate_options(cfg, point_seed(cfg.seed, i))?;
        let r = estimate(model, cfg.t, &x, cfg.mark, cfg.horizon, &opts).inspect_err(|_e| {
            let _ = writeln!(log, "sweep aborted at x1 = {x1}");
        })?;
        writeln!(w, "{x1},{}", result_fields(&r)).map_err(io_err(sink))?;
    }
    let _ = writeln!(log, "{}: {} grid points", model.name, grid.steps);
    Ok(EXIT_OK)
}

fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::CertifiedA => "certified-a",
        Verdict::CertifiedB => "certified-b",
        Verdict::Uncertified => "uncertified",
    }
}

pub fn summary(r: &HorizonReport) -> String {
    let mut s = format!(
        "model {} | p = {} | m0 = {} | delta = {} | T = {}\n",
        r.model, r.p, r.m0, r.delta, r.horizon
    );
    let cond = |c: &Option<branchpde::existence::Condition>| match c {
        Some(c) => format!(
            "{} (value {}, exponent {})",
            if c.holds { "holds" } else { "fails" },
            c.value,
            c.exponent
        ),
        None => "not evaluated".into(),
    };
    let _ = writeln!(s, "cond_rho: {}", cond(&r.cond_rho));
    let _ = writeln!(s, "cond_eta: {}", cond(&r.cond_eta));
    if let Some(a) = &r.route_a {
        let _ = writeln!(
            s,
            "route a: C_circ = {}, C_partial/Fbar(T) = {}, certified = {}",
            a.c_circ, a.c_partial_ratio, a.certified
        );
    }
    if let Some(t) = r.max_horizon_a {
        let _ = writeln!(s, "route a: largest certified T = {t:e}");
    }
    if let Some(b) = &r.route_b {
        let _ = writeln!(
            s,
            "route b: C_tilde = {}, bound = {}, certified = {}",
            b.c_tilde, b.t3b_bound, b.certified
        );
    }
    for n in &r.notes {
        let _ = writeln!(s, "note: {n}");
    }
    let _ = writeln!(s, "verdict: {}", verdict_name(r.verdict));
    s
}

/// Horizon report as JSON; exit 0 when certified by either route, 4 otherwise.
pub fn cmd_check(
    cfg: &RunConfig,
    stdout: &mut dyn Write,
    log: &mut dyn Write,
) -> Result<i32, CliError> {
    if !(cfg.horizon > 0.0 && cfg.horizon.is_finite()) {
        return Err(CliError::Config(format!(
            "T = {} must be positive",
            cfg.horizon
        )));
    }
    let model = cfg.model()?;
    let report = horizon_report(&model, cfg.horizon, &cfg.report_options())?;
    let mut json = serde_json::to_string_pretty(&report).expect("report serializes");
    json.push('\n');
    emit(cfg.out.as_deref(), stdout, json.as_bytes())?;
    let text = summary(&report);
    if cfg.out.is_some() {
        stdout
            .write_all(text.as_bytes())
            .map_err(io_err(Path::new("<stdout>")))?;
    } else {
        let _ = log.write_all(text.as_bytes());
    }
    Ok(if report.verdict == Verdict::Uncertified {
        EXIT_UNCERTIFIED
    } else {
        EXIT_OK
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaplaceRow {
    pub lambda: f64,
    pub empirical: f64,
    pub stderr: f64,
    pub exact: f64,
    /// `None` when there are too few samples to judge.
    pub pass: Option<bool>,
}

impl LaplaceRow {
    pub fn z(&self) -> f64 {
        let diff = (self.empirical - self.exact).abs();
        if diff == 0.0 {
            0.0
        } else {
            diff / self.stderr
        }
    }
}

/// Empirical E[e^{−λS_t}] against e^{−tκ(2λ)^{α/2}}.
pub fn laplace_table(samples: &[f64], alpha: f64, kappa: f64, t: f64) -> Vec<LaplaceRow> {
    let n = samples.len() as f64;
    DIAG_LAMBDAS
        .iter()
        .map(|&lambda| {
            let (mut mean, mut m2) = (0.0, 0.0);
            for (i, s) in samples.iter().enumerate() {
                let v = (-lambda * s).exp();
                let d = v - mean;
                mean += d / (i + 1) as f64;
                m2 += d * (v - mean);
            }
            let stderr = (m2 / (n - 1.0) / n).sqrt();
            let exact = (-t * kappa * (2.0 * lambda).powf(0.5 * alpha)).exp();
            let mut row = LaplaceRow {
                lambda,
                empirical: mean,
                stderr,
                exact,
                pass: None,
            };
            if samples.len() as u64 >= MIN_DIAG_SAMPLES {
                let tol = if stderr == 0.0 {
                    1e-12 * exact
                } else {
                    4.0 * stderr
                };
                row.pass = Some((mean - exact).abs() <= tol);
            }
            row
        })
        .collect()
}

/// Subordinator samples S_t (to `out`) and the Laplace-transform table (to stdout).
pub fn cmd_sample_diag(
    cfg: &RunConfig,
    stdout: &mut dyn Write,
    log: &mut dyn Write,
) -> Result<i32, CliError> {
    let alpha = cfg.alpha.unwrap_or(1.5);
    let kappa = cfg.kappa.unwrap_or(1.0);
    let t = cfg.t;
    if !(t > 0.0 && t.is_finite()) {
        return Err(CliError::Config(format!(
            "sample-diag needs t > 0, got {t}"
        )));
    }
    if cfg.samples < 2 {
        return Err(CliError::Config(format!(
            "samples = {} must be at least 2",
            cfg.samples
        )));
    }
    let sub = Subordinator::new(alpha, kappa).map_err(|e| CliError::Config(e.to_string()))?;
    let mut rng = RngStream::new(cfg.seed, 0);
    let mut floor_hits = 0;
    let samples: Vec<f64> = (0..cfg.samples)
        .map(|_| sub.sample(t, &mut rng, &mut floor_hits))
        .collect();

    if let Some(p) = &cfg.out {
        let mut f = create(p)?;
        writeln!(f, "s").map_err(io_err(p))?;
        for s in &samples {
            writeln!(f, "{s}").map_err(io_err(p))?;
        }
        f.flush().map_err(io_err(p))?;
    }
    if cfg.samples < MIN_DIAG_SAMPLES {
        let _ = writeln!(
            log,
            "insufficient n for test: {} samples < {MIN_DIAG_SAMPLES}",
            cfg.samples
        );
    }
    if floor_hits > 0 {
        let _ = writeln!(log, "{floor_hits} underflowing draws redrawn");
    }
    let mut table = String::from("lambda,empirical,stderr,exact,z,pass\n");
    for r in laplace_table(&samples, alpha, kappa, t) {
        let pass = match r.pass {
            Some(true) => "yes",
            Some(false) => "no",
            None => "insufficient-n",
        };
        let _ = writeln!(
            table,
            "{},{},{},{},{},{pass}",
            r.lambda,
            r.empirical,
            r.stderr,
            r.exact,
            r.z()
        );
    }
    stdout
        .write_all(table.as_bytes())
        .map_err(io_err(Path::new("<stdout>")))?;
    Ok(EXIT_OK)
}
