//! PDE instances: polynomial nonlinearity, terminal condition, branching
//! law, lifetime density and generator.

mod catalog;
pub mod expr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bernstein::LaplaceExponent;
use crate::sampling::{sample_cumulative, GammaLifetime, SamplingError};

pub use catalog::{builtin_model, default_delta, ModelParams, BUILTIN_NAMES};
pub use expr::{eval_expression, parse_expression, ExprError, Expression};

/// Gamma lifetime law ρ(s) = s^{δ−1}e^{−s}/Γ(δ).
pub type LifetimeDensity = GammaLifetime;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("unknown model `{0}` (known: {known})", known = BUILTIN_NAMES.join(", "))]
    UnknownModel(String),
    #[error("inadmissible parameters: {0}")]
    Inadmissible(String),
    #[error("invalid model: {0}")]
    Invalid(String),
    #[error("in {context}: {source}")]
    Expr {
        context: String,
        #[source]
        source: ExprError,
    },
    #[error(transparent)]
    Sampling(#[from] SamplingError),
}

/// One monomial c_l(t,x) y^{l_0} z_1^{l_1} ⋯ z_m^{l_m}.
#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub l: Vec<u32>,
    pub coeff: Expression,
    /// |c_l|_∞ (may be +∞).
    pub sup: f64,
    pub sup_estimated: bool,
}

impl Term {
    /// |l| = l_0 + … + l_m, the number of offspring.
    pub fn order(&self) -> usize {
        self.l.iter().map(|&v| v as usize).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialNonlinearity {
    pub d: usize,
    pub m: usize,
    pub terms: Vec<Term>,
}

impl PolynomialNonlinearity {
    pub fn new(d: usize, m: usize, terms: Vec<Term>) -> Result<Self, ModelError> {
        if d == 0 {
            return Err(ModelError::Invalid("d = 0".into()));
        }
        if m > d {
            return Err(ModelError::Invalid(format!("m = {m} exceeds d = {d}")));
        }
        if terms.is_empty() {
            return Err(ModelError::Invalid("empty index set".into()));
        }
        for (i, t) in terms.iter().enumerate() {
            if t.l.len() != m + 1 {
                return Err(ModelError::Invalid(format!(
                    "multi-index {:?} has {} entries, expected m + 1 = {}",
                    t.l,
                    t.l.len(),
                    m + 1
                )));
            }
            if terms[..i].iter().any(|o| o.l == t.l) {
                return Err(ModelError::Invalid(format!(
                    "duplicate multi-index {:?}",
                    t.l
                )));
            }
            if t.coeff.dim() != d {
                return Err(ModelError::Invalid(format!(
                    "coefficient for {:?} has wrong dimension",
                    t.l
                )));
            }
            if t.sup.is_nan() || t.sup < 0.0 {
                return Err(ModelError::Invalid(format!(
                    "sup for {:?} is {}",
                    t.l, t.sup
                )));
            }
        }
        Ok(Self { d, m, terms })
    }

    pub fn max_order(&self) -> usize {
        self.terms.iter().map(Term::order).max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TerminalCondition {
    pub phi: Expression,
    pub sup_norm: f64,
    /// `None` when φ is not Lipschitz.
    pub lipschitz: Option<f64>,
}

/// Offspring law q over the index set.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchingLaw {
    q: Vec<f64>,
    cumulative: Vec<f64>,
}

impl BranchingLaw {
    pub fn new(q: Vec<f64>) -> Result<Self, ModelError> {
        if q.is_empty() {
            return Err(ModelError::Invalid("empty branching law".into()));
        }
        if let Some(v) = q.iter().find(|&&v| !(v > 0.0 && v <= 1.0)) {
            return Err(ModelError::Invalid(format!(
                "branching probability {v} not in (0, 1]"
            )));
        }
        let total: f64 = q.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(ModelError::Invalid(format!(
                "branching probabilities sum to {total}"
            )));
        }
        let cumulative = q
            .iter()
            .scan(0.0, |acc, &v| {
                *acc += v;
                Some(*acc)
            })
            .collect();
        Ok(Self { q, cumulative })
    }

    pub fn uniform(n: usize) -> Self {
        let q = vec![1.0 / n as f64; n];
        let cumulative = (1..=n).map(|i| i as f64 / n as f64).collect();
        Self { q, cumulative }
    }

    pub fn probs(&self) -> &[f64] {
        &self.q
    }

    pub fn q_min(&self) -> f64 {
        self.q.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Index of the drawn multi-index.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        sample_cumulative(&self.cumulative, rng)
    }
}

/// A fully specified PDE instance.
#[derive(Debug, Clone, PartialEq)]
pub struct PdeModel {
    pub name: String,
    pub nonlinearity: PolynomialNonlinearity,
    pub terminal: TerminalCondition,
    pub law: BranchingLaw,
    pub lifetime: LifetimeDensity,
    /// η(λ) = κ(2λ)^{α/2}.
    pub generator: LaplaceExponent,
    /// Horizon the terminal condition was written for.
    pub horizon: f64,
}

impl PdeModel {
    pub fn dim(&self) -> usize {
        self.nonlinearity.d
    }

    pub fn marks(&self) -> usize {
        self.nonlinearity.m
    }

    pub fn alpha(&self) -> f64 {
        self.generator.stable_params().map_or(f64::NAN, |p| p.0)
    }

    pub fn kappa(&self) -> f64 {
        self.generator.stable_params().map_or(f64::NAN, |p| p.1)
    }

    pub fn delta(&self) -> f64 {
        self.lifetime.delta()
    }

    pub fn with_delta(mut self, delta: f64) -> Result<Self, ModelError> {
        self.lifetime = GammaLifetime::new(delta)?;
        Ok(self)
    }

    pub fn with_law(mut self, law: BranchingLaw) -> Result<Self, ModelError> {
        if law.probs().len() != self.nonlinearity.terms.len() {
            return Err(ModelError::Invalid(format!(
                "{} branching probabilities for {} multi-indices",
                law.probs().len(),
                self.nonlinearity.terms.len()
            )));
        }
        self.law = law;
        Ok(self)
    }

    /// Returns a copy with every |c_l|_∞ multiplied by `factor` (coefficients unchanged).
    pub fn with_scaled_sups(mut self, factor: f64) -> Self {
        for t in &mut self.nonlinearity.terms {
            t.sup *= factor;
        }
        self
    }

    /// Sampling audit of the declared bounds over [0, T] × [−2, 2]^d.
    pub fn audit(&self, samples: usize, seed: u64) -> Vec<String> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = self.dim();
        let mut warnings = Vec::new();
        let mut x = vec![0.0; d];
        let mut y = vec![0.0; d];
        for term in &self.nonlinearity.terms {
            let mut worst = 0.0f64;
            for _ in 0..samples {
                let t = rng.random_range(0.0..=self.horizon);
                x.iter_mut().for_each(|v| *v = rng.random_range(-2.0..=2.0));
                match term.coeff.eval(t, &x) {
                    Ok(v) => worst = worst.max(v.abs()),
                    Err(e) => {
                        warnings.push(format!("c{:?}({t}, {x:?}): {e}", term.l));
                        break;
                    }
                }
            }
            if worst > term.sup * (1.0 + 1e-9) {
                warnings.push(format!(
                    "c{:?}: sampled |c| = {worst} exceeds declared sup {}",
                    term.l, term.sup
                ));
            }
        }
        let phi = &self.terminal;
        let mut worst = 0.0f64;
        let mut worst_ratio = 0.0f64;
        for i in 0..samples {
            x.iter_mut().for_each(|v| *v = rng.random_range(-2.0..=2.0));
            // alternate far pairs with close pairs
            let scale = if i % 2 == 0 { 4.0 } else { 1e-3 };
            for (yv, xv) in y.iter_mut().zip(&x) {
                *yv = xv + scale * rng.random_range(-0.5..=0.5);
            }
            let (fx, fy) = match (
                phi.phi.eval(self.horizon, &x),
                phi.phi.eval(self.horizon, &y),
            ) {
                (Ok(a), Ok(b)) => (a, b),
                (Err(e), _) | (_, Err(e)) => {
                    warnings.push(format!("phi: {e}"));
                    break;
                }
            };
            worst = worst.max(fx.abs());
            let dist = x
                .iter()
                .zip(&y)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            if dist > 0.0 {
                worst_ratio = worst_ratio.max((fx - fy).abs() / dist);
            }
        }
        if worst > phi.sup_norm * (1.0 + 1e-9) {
            warnings.push(format!(
                "phi: sampled |phi| = {worst} exceeds declared sup {}",
                phi.sup_norm
            ));
        }
        if let Some(l) = phi.lipschitz {
            if worst_ratio > l * (1.0 + 1e-6) + 1e-12 {
                warnings.push(format!(
                    "phi: sampled difference quotient {worst_ratio} exceeds declared Lipschitz constant {l}"
                ));
            }
        }
        warnings
    }
}

/// JSON description of a user-defined model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    #[serde(default)]
    pub name: Option<String>,
    pub d: usize,
    #[serde(default)]
    pub m: usize,
    pub alpha: f64,
    #[serde(default = "one")]
    pub kappa: f64,
    pub terms: Vec<TermSpec>,
    pub terminal: TerminalSpec,
    #[serde(default)]
    pub q: Option<Vec<f64>>,
    #[serde(default)]
    pub delta: Option<f64>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    pub l: Vec<u32>,
    pub coeff: String,
    /// Estimated from samples when absent.
    #[serde(default)]
    pub sup: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TerminalSpec {
    pub phi: String,
    #[serde(default)]
    pub sup: Option<f64>,
    /// Absent means "not Lipschitz".
    #[serde(default)]
    pub lipschitz: Option<f64>,
}

const ESTIMATE_SAMPLES: usize = 10_000;
const ESTIMATE_MARGIN: f64 = 1.05;

fn sampled_sup<F: FnMut(f64, &[f64]) -> Result<f64, ExprError>>(
    mut f: F,
    d: usize,
    horizon: f64,
    seed: u64,
) -> Result<f64, ExprError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = vec![0.0; d];
    let mut worst = 0.0f64;
    for _ in 0..ESTIMATE_SAMPLES {
        let t = rng.random_range(0.0..=horizon);
        x.iter_mut().for_each(|v| *v = rng.random_range(-2.0..=2.0));
        worst = worst.max(f(t, &x)?.abs());
    }
    Ok(worst * ESTIMATE_MARGIN)
}

pub(crate) fn generator_for(alpha: f64, kappa: f64) -> Result<LaplaceExponent, ModelError> {
    let g = if kappa == 1.0 {
        LaplaceExponent::Stable { alpha }
    } else {
        LaplaceExponent::ScaledStable { alpha, kappa }
    };
    g.check_params()
        .map_err(|e| ModelError::Inadmissible(e.to_string()))?;
    Ok(g)
}

impl PdeModel {
    pub fn from_spec(spec: &ModelSpec, horizon: f64) -> Result<Self, ModelError> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(ModelError::Invalid(format!("horizon T = {horizon}")));
        }
        let d = spec.d;
        let parse = |src: &str, context: String| {
            Expression::parse(src, d).map_err(|source| ModelError::Expr { context, source })
        };
        let mut terms = Vec::with_capacity(spec.terms.len());
        for (i, ts) in spec.terms.iter().enumerate() {
            let context = format!("coefficient {:?}", ts.l);
            let coeff = parse(&ts.coeff, context.clone())?;
            let (sup, sup_estimated) = match ts.sup {
                Some(s) => (s, false),
                None => {
                    let s = sampled_sup(|t, x| coeff.eval(t, x), d, horizon, 0x5eed + i as u64)
                        .map_err(|source| ModelError::Expr { context, source })?;
                    (s, true)
                }
            };
            terms.push(Term {
                l: ts.l.clone(),
                coeff,
                sup,
                sup_estimated,
            });
        }
        let nonlinearity = PolynomialNonlinearity::new(d, spec.m, terms)?;
        let phi = parse(&spec.terminal.phi, "terminal condition".into())?;
        let sup_norm =
            match spec.terminal.sup {
                Some(s) => s,
                None => sampled_sup(|_, x| phi.eval(horizon, x), d, horizon, 0xf1).map_err(
                    |source| ModelError::Expr {
                        context: "terminal condition".into(),
                        source,
                    },
                )?,
            };
        if let Some(l) = spec.terminal.lipschitz {
            if !(l >= 0.0 && l.is_finite()) {
                return Err(ModelError::Invalid(format!("Lipschitz constant {l}")));
            }
        }
        let n = nonlinearity.terms.len();
        let law = match &spec.q {
            Some(q) => {
                if q.len() != n {
                    return Err(ModelError::Invalid(format!(
                        "{} probabilities for {n} multi-indices",
                        q.len()
                    )));
                }
                BranchingLaw::new(q.clone())?
            }
            None => BranchingLaw::uniform(n),
        };
        let delta = spec
            .delta
            .unwrap_or_else(|| default_delta(spec.m, spec.alpha));
        Ok(Self {
            name: spec.name.clone().unwrap_or_else(|| "custom".into()),
            nonlinearity,
            terminal: TerminalCondition {
                phi,
                sup_norm,
                lipschitz: spec.terminal.lipschitz,
            },
            law,
            lifetime: GammaLifetime::new(delta)?,
            generator: generator_for(spec.alpha, spec.kappa)?,
            horizon,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn branching_law_validation() {
        assert!(BranchingLaw::new(vec![0.5, 0.5]).is_ok());
        assert!(BranchingLaw::new(vec![0.5, 0.6]).is_err());
        assert!(BranchingLaw::new(vec![1.0, 0.0]).is_err());
        assert!(BranchingLaw::new(vec![]).is_err());
        let u = BranchingLaw::uniform(3);
        assert!((u.q_min() - 1.0 / 3.0).abs() < 1e-16);
    }

    #[test]
    fn singleton_law_always_returns_its_element() {
        let law = BranchingLaw::uniform(1);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!((0..1000).all(|_| law.sample(&mut rng) == 0));
    }

    #[test]
    fn spec_round_trip_and_estimated_sups() {
        let json = r#"{
            "d": 1, "alpha": 1.5,
            "terms": [{"l": [1], "coeff": "0"}],
            "terminal": {"phi": "x1 - pospart(x1 - 10) + pospart(-x1 - 10)", "lipschitz": 1.0}
        }"#;
        let spec: ModelSpec = serde_json::from_str(json).unwrap();
        let m = PdeModel::from_spec(&spec, 1.0).unwrap();
        assert_eq!(m.nonlinearity.terms[0].sup, 0.0);
        assert!(m.nonlinearity.terms[0].sup_estimated);
        assert!((m.terminal.sup_norm - 2.0 * 1.05).abs() < 0.01);
        assert_eq!(m.delta(), 0.5);
        let back: ModelSpec = serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
        assert_eq!(back, spec);
    }

    #[test]
    fn spec_errors() {
        let bad_l = ModelSpec {
            name: None,
            d: 2,
            m: 1,
            alpha: 1.5,
            kappa: 1.0,
            terms: vec![TermSpec {
                l: vec![1],
                coeff: "1".into(),
                sup: Some(1.0),
            }],
            terminal: TerminalSpec {
                phi: "1".into(),
                sup: Some(1.0),
                lipschitz: Some(0.0),
            },
            q: None,
            delta: None,
        };
        assert!(matches!(
            PdeModel::from_spec(&bad_l, 1.0),
            Err(ModelError::Invalid(_))
        ));
        let mut bad_expr = bad_l.clone();
        bad_expr.terms = vec![TermSpec {
            l: vec![1, 0],
            coeff: "x3".into(),
            sup: Some(1.0),
        }];
        assert!(matches!(
            PdeModel::from_spec(&bad_expr, 1.0),
            Err(ModelError::Expr { .. })
        ));
        let mut bad_q = bad_l;
        bad_q.terms[0].l = vec![1, 0];
        bad_q.q = Some(vec![0.5, 0.5]);
        assert!(PdeModel::from_spec(&bad_q, 1.0).is_err());
    }
}
