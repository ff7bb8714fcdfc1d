use std::path::{Path, PathBuf};

use branchpde::engine::TreeBudget;
use branchpde::existence::{MomentConvention, ReportOptions};
use branchpde::model::{builtin_model, ModelParams, ModelSpec, PdeModel};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const THREADS_ENV: &str = "BRANCHPDE_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetConfig {
    pub max_particles: usize,
    pub max_generation: usize,
}

/// One JSON document drives every subcommand; fields a command does not use are ignored by it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Built-in model name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    /// Inline model, exclusive with `model`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_spec: Option<ModelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<u32>,
    /// Rate of `linear-test`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(rename = "T", default = "default_horizon")]
    pub horizon: f64,
    #[serde(default)]
    pub t: f64,
    /// Evaluation point; zeros when absent. A sweep overwrites x₁.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<Vec<f64>>,
    #[serde(default)]
    pub mark: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_trees")]
    pub n_trees: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<BudgetConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// `lo:hi:steps` over x₁.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<String>,
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m0: Option<usize>,
    #[serde(default = "default_lambda0")]
    pub lambda0: f64,
    #[serde(default)]
    pub moment_convention: MomentConvention,
    #[serde(default)]
    pub strict: bool,
    /// Sample count for `sample-diag`.
    #[serde(default = "default_samples")]
    pub samples: u64,
}

fn default_horizon() -> f64 {
    1.0
}

fn default_trees() -> u64 {
    100_000
}

fn default_p() -> f64 {
    2.0
}

fn default_lambda0() -> f64 {
    1.0
}

fn default_samples() -> u64 {
    100_000
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub n_trees: Option<u64>,
    pub workers: Option<usize>,
    pub strict: bool,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub steps: usize,
}

impl GridSpec {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        let bad = || CliError::Config(format!("grid `{s}` is not lo:hi:steps"));
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(bad());
        }
        let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
        let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
        let steps: usize = parts[2].trim().parse().map_err(|_| bad())?;
        if !(lo.is_finite() && hi.is_finite()) || steps == 0 || (steps == 1 && lo != hi) || hi < lo
        {
            return Err(bad());
        }
        Ok(Self { lo, hi, steps })
    }

    pub fn points(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.lo];
        }
        let n = (self.steps - 1) as f64;
        (0..self.steps)
            .map(|i| {
                let i = i as f64;
                (self.lo * (n - i) + self.hi * i) / n
            })
            .collect()
    }
}

impl RunConfig {
    pub fn from_json(src: &str) -> Result<Self, CliError> {
        serde_json::from_str(src).map_err(|e| CliError::Config(format!("bad config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let src = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&src)
    }

    /// Precedence: file, then `BRANCHPDE_THREADS` (workers only), then flags.
    pub fn apply(&mut self, o: &Overrides, env_threads: Option<&str>) -> Result<(), CliError> {
        if let Some(v) = env_threads {
            let w: usize = v.trim().parse().ok().filter(|&w| w > 0).ok_or_else(|| {
                CliError::Config(format!("{THREADS_ENV} = `{v}` is not a positive integer"))
            })?;
            self.workers = Some(w);
        }
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(n) = o.n_trees {
            self.n_trees = n;
        }
        if let Some(w) = o.workers {
            self.workers = Some(w);
        }
        if o.strict {
            self.strict = true;
        }
        if let Some(p) = &o.out {
            self.out = Some(p.clone());
        }
        Ok(())
    }

    pub fn workers(&self) -> usize {
        self.workers.unwrap_or(1)
    }

    pub fn budget(&self) -> Result<TreeBudget, CliError> {
        match self.budget {
            None => Ok(TreeBudget::default()),
            Some(b) => TreeBudget::new(b.max_particles, b.max_generation)
                .map_err(|e| CliError::Config(e.to_string())),
        }
    }

    /// Checks the fields every estimator command relies on.
    pub fn validate(&self) -> Result<(), CliError> {
        let fail = |m: String| Err(CliError::Config(m));
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return fail(format!("T = {} must be positive", self.horizon));
        }
        if !(self.t >= 0.0 && self.t <= self.horizon) {
            return fail(format!(
                "need 0 <= t <= T, got t = {}, T = {}",
                self.t, self.horizon
            ));
        }
        if self.d == Some(0) {
            return fail("d must be at least 1".into());
        }
        if self.n_trees < 2 {
            return fail(format!("n_trees = {} must be at least 2", self.n_trees));
        }
        if self.workers == Some(0) {
            return fail("workers must be positive".into());
        }
        self.budget()?;
        Ok(())
    }

    pub fn model(&self) -> Result<PdeModel, CliError> {
        match (&self.model, &self.model_spec) {
            (Some(name), None) => {
                let defaults = ModelParams::default();
                let p = ModelParams {
                    d: self.d.unwrap_or(defaults.d),
                    alpha: self.alpha.unwrap_or(defaults.alpha),
                    k: self.k.unwrap_or(defaults.k),
                    kappa: self.kappa.unwrap_or(defaults.kappa),
                    horizon: self.horizon,
                    c: self.c.unwrap_or(defaults.c),
                    delta: self.delta,
                };
                Ok(builtin_model(name, &p)?)
            }
            (None, Some(spec)) => {
                let clash = |field: &str, a: f64, b: f64| {
                    Err(CliError::Config(format!(
                        "{field} = {a} disagrees with model_spec ({b})"
                    )))
                };
                if let Some(d) = self.d.filter(|&d| d != spec.d) {
                    return clash("d", d as f64, spec.d as f64);
                }
                if let Some(a) = self.alpha.filter(|&a| a != spec.alpha) {
                    return clash("alpha", a, spec.alpha);
                }
                if let Some(k) = self.kappa.filter(|&k| k != spec.kappa) {
                    return clash("kappa", k, spec.kappa);
                }
                let mut spec = spec.clone();
                if self.delta.is_some() {
                    spec.delta = self.delta;
                }
                Ok(PdeModel::from_spec(&spec, self.horizon)?)
            }
            (Some(_), Some(_)) => Err(CliError::Config(
                "give either `model` or `model_spec`, not both".into(),
            )),
            (None, None) => Err(CliError::Config("no `model` or `model_spec` given".into())),
        }
    }

    /// The evaluation point, padded with zeros to dimension `d`.
    pub fn point(&self, d: usize) -> Result<Vec<f64>, CliError> {
        match &self.x {
            None => Ok(vec![0.0; d]),
            Some(x) if x.len() == d => Ok(x.clone()),
            Some(x) => Err(CliError::Config(format!(
                "x has {} coordinates, model dimension is {d}",
                x.len()
            ))),
        }
    }

    pub fn report_options(&self) -> ReportOptions {
        ReportOptions {
            p: self.p,
            m0: self.m0,
            lambda0: self.lambda0,
            convention: self.moment_convention,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_endpoints_are_exact() {
        let g = GridSpec::parse("-1.5:1.5:61").unwrap();
        let pts = g.points();
        assert_eq!(pts.len(), 61);
        assert_eq!(pts[0], -1.5);
        assert_eq!(pts[30], 0.0);
        assert_eq!(pts[60], 1.5);
        assert_eq!(pts[14], -0.8);
        assert_eq!(pts[40], 0.5);
        assert!(GridSpec::parse("1:0:3").is_err());
        assert!(GridSpec::parse("0:1").is_err());
        assert!(GridSpec::parse("0:1:0").is_err());
        assert_eq!(GridSpec::parse("2:2:1").unwrap().points(), vec![2.0]);
    }

    #[test]
    fn flags_beat_environment_beat_file() {
        let mut c = RunConfig::from_json(r#"{"model": "nld", "workers": 2, "seed": 5}"#).unwrap();
        c.apply(&Overrides::default(), Some("3")).unwrap();
        assert_eq!(c.workers(), 3);
        let o = Overrides {
            workers: Some(8),
            seed: Some(9),
            ..Overrides::default()
        };
        c.apply(&o, Some("3")).unwrap();
        assert_eq!((c.workers(), c.seed), (8, 9));
        assert!(c.apply(&Overrides::default(), Some("0")).is_err());
        assert!(c.apply(&Overrides::default(), Some("four")).is_err());
    }

    #[test]
    fn validation_rejects_bad_ranges() {
        let ok = RunConfig::from_json(r#"{"model": "nld", "t": 0.9}"#).unwrap();
        ok.validate().unwrap();
        for bad in [
            r#"{"model": "nld", "t": 1.5}"#,
            r#"{"model": "nld", "t": -0.1}"#,
            r#"{"model": "nld", "n_trees": 1}"#,
            r#"{"model": "nld", "d": 0}"#,
            r#"{"model": "nld", "budget": {"max_particles": 0, "max_generation": 5}}"#,
        ] {
            assert!(
                RunConfig::from_json(bad).unwrap().validate().is_err(),
                "{bad}"
            );
        }
        assert!(RunConfig::from_json(r#"{"model": "nld", "typo": 1}"#).is_err());
    }

    #[test]
    fn inline_spec_must_agree_with_common_fields() {
        let spec = r#"{"d": 1, "alpha": 1.5, "terms": [{"l": [1], "coeff": "1", "sup": 1}],
                       "terminal": {"phi": "1", "sup": 1, "lipschitz": 0}}"#;
        let c = RunConfig::from_json(&format!(r#"{{"model_spec": {spec}}}"#)).unwrap();
        assert_eq!(c.model().unwrap().dim(), 1);
        let c =
            RunConfig::from_json(&format!(r#"{{"model_spec": {spec}, "alpha": 1.2}}"#)).unwrap();
        assert!(c.model().is_err());
        let c =
            RunConfig::from_json(&format!(r#"{{"model_spec": {spec}, "model": "nld"}}"#)).unwrap();
        assert!(c.model().is_err());
    }

    #[test]
    fn config_round_trips() {
        let c = RunConfig::from_json(
            r#"{"model": "gradd", "d": 2, "k": 1, "t": 0.9, "grid": "-1:1:5", "x": [0, 0]}"#,
        )
        .unwrap();
        let back = RunConfig::from_json(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(c, back);
    }
}
