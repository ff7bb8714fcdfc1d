//! Moment conditions and horizon bounds certifying that the tree functional
//! has a finite p-th moment on [0, T].

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bernstein::{
    check_integrability_cd, neg_moment_numeric_with, BernsteinError, CdCheck, LaplaceExponent,
};
use crate::model::PdeModel;
use crate::quad::{integrate, QuadConfig, QuadError};
use crate::specfun::upper_reg_gamma;
use crate::specfun::{gamma_fn, ln_gamma, SpecFunError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExistenceError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("bound needs eta(lambda) = kappa (2 lambda)^(alpha/2) with alpha in (1, 2], got {0}")]
    NotStable(String),
    #[error("inadmissible lifetime: {0}")]
    Inadmissible(String),
    #[error("terminal condition is not Lipschitz; derivative marks cannot be certified")]
    NotLipschitz,
    #[error(transparent)]
    Bernstein(#[from] BernsteinError),
    #[error(transparent)]
    SpecFun(#[from] SpecFunError),
    #[error(transparent)]
    Quad(#[from] QuadError),
}

/// Which constant to use for E|N(0,1)|^p.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MomentConvention {
    #[default]
    Standard,
    /// 2^p Γ(p + 1/2) / √π.
    PaperLiteral,
}

/// E|N(0,1)|^p.
pub fn abs_gaussian_moment(p: f64) -> Result<f64, ExistenceError> {
    abs_gaussian_moment_with(p, MomentConvention::Standard)
}

pub fn abs_gaussian_moment_with(
    p: f64,
    convention: MomentConvention,
) -> Result<f64, ExistenceError> {
    if !(p > 0.0 && p.is_finite()) {
        return Err(ExistenceError::InvalidArgument(format!("p = {p}")));
    }
    let ln_sqrt_pi = 0.5 * std::f64::consts::PI.ln();
    let ln = match convention {
        MomentConvention::Standard => {
            0.5 * p * std::f64::consts::LN_2 + ln_gamma(0.5 * (p + 1.0))? - ln_sqrt_pi
        }
        MomentConvention::PaperLiteral => {
            p * std::f64::consts::LN_2 + ln_gamma(p + 0.5)? - ln_sqrt_pi
        }
    };
    Ok(ln.exp())
}

/// sup over s ∈ (0, T] of s^a e^{bs}.
pub fn sup_power_exp(a: f64, b: f64, horizon: f64) -> f64 {
    let a = if a.abs() < 1e-12 { 0.0 } else { a };
    if a < 0.0 {
        return f64::INFINITY;
    }
    let f = |s: f64| {
        if a == 0.0 {
            (b * s).exp()
        } else {
            (a * s.ln() + b * s).exp()
        }
    };
    let mut best = f(horizon);
    if a > 0.0 && b < 0.0 {
        let s = -a / b;
        if s < horizon {
            best = best.max(f(s));
        }
    }
    if a == 0.0 && b < 0.0 {
        best = 1.0;
    }
    best
}

/// A_p = 2Γ(p/α) / (2^{p/2} α Γ(p/2)).
pub fn stable_weight_constant(p: f64, alpha: f64) -> Result<f64, ExistenceError> {
    Ok(2.0 * gamma_fn(p / alpha)? / (2f64.powf(0.5 * p) * alpha * gamma_fn(0.5 * p)?))
}

/// Finite integral with its small-s power-law diagnosis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub holds: bool,
    #[serde(with = "ext_f64")]
    pub value: f64,
    /// Exponent e with integrand ~ s^e as s → 0.
    pub exponent: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Theorem2Check {
    pub cond_rho: Condition,
    pub cond_eta: Condition,
    pub cd_check: bool,
    pub cd: CdCheck,
}

impl Theorem2Check {
    /// Hypotheses at this p; the cd test belongs to the p = 1 path.
    pub fn passes(&self, p: f64) -> bool {
        self.cond_rho.holds && self.cond_eta.holds && (p != 1.0 || self.cd_check)
    }
}

const EPS_FIT: f64 = 0.01;
const HEAD: f64 = 1e-6;

/// ∫₀^T g(s) ds for g ~ C s^e near 0: analytic head on (0, 1e-6], quadrature after.
fn integrate_power_head<F>(
    mut g: F,
    exponent: f64,
    horizon: f64,
    rel: f64,
) -> Result<f64, ExistenceError>
where
    F: FnMut(f64) -> Result<f64, ExistenceError>,
{
    let s0 = HEAD.min(0.5 * horizon);
    let head = g(s0)? * s0 / (exponent + 1.0);
    let mut failure = None;
    let body = integrate(
        |u| {
            let s = u.exp();
            match g(s) {
                Ok(v) => v * s,
                Err(e) => {
                    failure.get_or_insert(e);
                    0.0
                }
            }
        },
        s0.ln(),
        horizon.ln(),
        QuadConfig::rel(rel),
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(head + body.value)
}

fn classify(exponent: f64) -> Result<bool, ExistenceError> {
    if exponent > -1.0 + EPS_FIT {
        Ok(true)
    } else if exponent < -1.0 - EPS_FIT {
        Ok(false)
    } else {
        Err(BernsteinError::Inconclusive {
            exponent,
            band: EPS_FIT,
        }
        .into())
    }
}

/// Evaluates the integrability hypotheses for gamma lifetimes with shape δ.
pub fn check_theorem2(
    eta: &LaplaceExponent,
    delta: f64,
    p: f64,
    horizon: f64,
) -> Result<Theorem2Check, ExistenceError> {
    check_theorem2_with(eta, delta, p, horizon, 1.0)
}

pub fn check_theorem2_with(
    eta: &LaplaceExponent,
    delta: f64,
    p: f64,
    horizon: f64,
    lambda0: f64,
) -> Result<Theorem2Check, ExistenceError> {
    eta.check_params()?;
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(ExistenceError::InvalidArgument(format!("delta = {delta}")));
    }
    if !(p >= 1.0 && p.is_finite()) {
        return Err(ExistenceError::InvalidArgument(format!("p = {p}")));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(ExistenceError::InvalidArgument(format!("T = {horizon}")));
    }
    let ln_gd = ln_gamma(delta)?;
    // 1/ρ^{p−1}(s) = Γ(δ)^{p−1} s^{(1−δ)(p−1)} e^{(p−1)s}
    let rho_pow = |s: f64| ((p - 1.0) * (ln_gd + (1.0 - delta) * s.ln() + s)).exp();
    let rho_exp = (1.0 - delta) * (p - 1.0);

    let cond_rho = if rho_exp > -1.0 {
        Condition {
            holds: true,
            value: integrate_power_head(|s| Ok(rho_pow(s)), rho_exp, horizon, 1e-10)?,
            exponent: rho_exp,
        }
    } else {
        Condition {
            holds: false,
            value: f64::INFINITY,
            exponent: rho_exp,
        }
    };

    let q = 0.5 * p;
    let gq = gamma_fn(q)?;
    let inner = |s: f64| -> Result<f64, ExistenceError> {
        Ok(gq * neg_moment_numeric_with(eta, q, s, 1e-8)? * rho_pow(s))
    };
    // slope of ln g(1/y) against ln y on y ∈ [1e6, 1e9]
    let points = 31;
    let (lo, hi): (f64, f64) = (1e6, 1e9);
    let mut xs = Vec::with_capacity(points);
    let mut ys = Vec::with_capacity(points);
    for i in 0..points {
        let u = lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (points - 1) as f64;
        let v = inner((-u).exp())?;
        if !(v > 0.0 && v.is_finite()) {
            return Err(ExistenceError::InvalidArgument(format!(
                "inner integral {v} at s = {}",
                (-u).exp()
            )));
        }
        xs.push(u);
        ys.push(v.ln());
    }
    let n = points as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let slope = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - mx) * (y - my))
        .sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    let eta_exp = -slope;
    let holds = classify(eta_exp)?;
    let cond_eta = Condition {
        holds,
        value: if holds {
            integrate_power_head(inner, eta_exp, horizon, 1e-6)?
        } else {
            f64::INFINITY
        },
        exponent: eta_exp,
    };

    let cd = check_integrability_cd(eta, lambda0)?;
    Ok(Theorem2Check {
        cond_rho,
        cond_eta,
        cd_check: cd.converges,
        cd,
    })
}

/// Model quantities entering the horizon bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundInputs {
    pub alpha: f64,
    pub kappa: f64,
    pub delta: f64,
    pub p: f64,
    /// (|c_l|_∞, |l|) per multi-index.
    pub coefficients: Vec<(f64, usize)>,
    pub q_min: f64,
    /// C_∂,p = max(|φ|_∞^p, M_p L^p √d).
    pub c_partial: f64,
    /// Whether derivative marks occur (m₀ ≥ 1); without them every weight is 1.
    pub marks: bool,
}

impl BoundInputs {
    pub fn from_model(
        model: &PdeModel,
        p: f64,
        m0: usize,
        convention: MomentConvention,
    ) -> Result<Self, ExistenceError> {
        let (alpha, kappa) = model
            .generator
            .stable_params()
            .ok_or_else(|| ExistenceError::NotStable(model.generator.name().into()))?;
        Self::new(model, alpha, kappa, model.delta(), p, m0, convention)
    }

    pub fn new(
        model: &PdeModel,
        alpha: f64,
        kappa: f64,
        delta: f64,
        p: f64,
        m0: usize,
        convention: MomentConvention,
    ) -> Result<Self, ExistenceError> {
        if !(alpha > 1.0 && alpha <= 2.0) {
            return Err(ExistenceError::NotStable(format!("alpha = {alpha}")));
        }
        if !(p >= 1.0 && p.is_finite()) {
            return Err(ExistenceError::InvalidArgument(format!("p = {p}")));
        }
        if m0 < model.marks() || m0 > model.dim() {
            return Err(ExistenceError::InvalidArgument(format!(
                "m0 = {m0} outside [{}, {}]",
                model.marks(),
                model.dim()
            )));
        }
        let phi_part = model.terminal.sup_norm.powf(p);
        let c_partial = if m0 == 0 {
            phi_part
        } else {
            let l = model
                .terminal
                .lipschitz
                .ok_or(ExistenceError::NotLipschitz)?;
            let mp = abs_gaussian_moment_with(p, convention)?;
            phi_part.max(mp * l.powf(p) * (model.dim() as f64).sqrt())
        };
        Ok(Self {
            alpha,
            kappa,
            delta,
            p,
            coefficients: model
                .nonlinearity
                .terms
                .iter()
                .map(|t| (t.sup, t.order()))
                .collect(),
            q_min: model.law.q_min(),
            c_partial,
            marks: m0 > 0,
        })
    }

    fn sup_c(&self) -> f64 {
        self.coefficients.iter().map(|c| c.0).fold(0.0, f64::max)
    }

    /// The bracket of C_∘ with ρ raised to `r`: max(A_p κ^{−p/α} sup s^{−p/α}/ρ^r, sup 1/ρ^r).
    fn lifetime_factor(&self, r: f64, horizon: f64) -> Result<f64, ExistenceError> {
        let (p, a, d) = (self.p, self.alpha, self.delta);
        let gd = gamma_fn(d)?.powf(r);
        let plain = gd * sup_power_exp(r * (1.0 - d), r, horizon);
        if !self.marks {
            return Ok(plain);
        }
        let weighted = stable_weight_constant(p, a)?
            * self.kappa.powf(-p / a)
            * gd
            * sup_power_exp(r * (1.0 - d) - p / a, r, horizon);
        Ok(weighted.max(plain))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundA {
    #[serde(rename = "C_circ", with = "ext_f64")]
    pub c_circ: f64,
    #[serde(rename = "C_partial_ratio", with = "ext_f64")]
    pub c_partial_ratio: f64,
    #[serde(rename = "certified_a")]
    pub certified: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundB {
    #[serde(rename = "C_tilde", with = "ext_f64")]
    pub c_tilde: f64,
    #[serde(with = "ext_f64")]
    pub t3b_bound: f64,
    #[serde(rename = "certified_b")]
    pub certified: bool,
}

fn survival(delta: f64, s: f64) -> Result<f64, ExistenceError> {
    Ok(upper_reg_gamma(delta, s)?)
}

/// Route (a): C_∘,p(T) ≤ 1 and C_∂,p / F̄^p(T) ≤ 1.
pub fn horizon_bound_a(inputs: &BoundInputs, horizon: f64) -> Result<BoundA, ExistenceError> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(ExistenceError::InvalidArgument(format!("T = {horizon}")));
    }
    let p = inputs.p;
    if inputs.marks && p * (1.0 - inputs.delta - 1.0 / inputs.alpha) < -1e-12 {
        return Err(ExistenceError::Inadmissible(format!(
            "delta = {} exceeds 1 - 1/alpha = {}; the supremum over (0, T] is infinite",
            inputs.delta,
            1.0 - 1.0 / inputs.alpha
        )));
    }
    let c_circ = (inputs.sup_c() / inputs.q_min).powf(p) * inputs.lifetime_factor(p, horizon)?;
    let c_partial_ratio = inputs.c_partial / survival(inputs.delta, horizon)?.powf(p);
    Ok(BoundA {
        c_circ,
        c_partial_ratio,
        certified: c_circ <= 1.0 && c_partial_ratio <= 1.0,
    })
}

/// ∫_{x0}^∞ (Σ |c_l| x^{|l|})^{−1} dx, infinite when no |l| exceeds 1.
pub fn bound_b_integral(coefficients: &[(f64, usize)], x0: f64) -> Result<f64, ExistenceError> {
    if coefficients.iter().any(|c| c.0.is_infinite()) {
        return Ok(0.0);
    }
    let top = coefficients
        .iter()
        .filter(|c| c.0 > 0.0)
        .map(|c| c.1)
        .max()
        .unwrap_or(0);
    if top <= 1 {
        return Ok(f64::INFINITY);
    }
    let poly = |x: f64| {
        coefficients
            .iter()
            .map(|&(c, l)| c * x.powi(l as i32))
            .sum::<f64>()
    };
    let lead: f64 = coefficients
        .iter()
        .filter(|c| c.1 == top)
        .map(|c| c.0)
        .sum();
    let x_far = x0.max(1.0) * 1e8;
    let body = integrate(
        |u| {
            let x = u.exp();
            x / poly(x)
        },
        x0.ln(),
        x_far.ln(),
        QuadConfig::rel(1e-10),
    )?;
    let tail = x_far.powi(1 - top as i32) / ((top - 1) as f64 * lead);
    Ok(body.value + tail)
}

/// Route (b): C̃_∘,p(T) < ∞ and T below the blow-up time of the comparison ODE.
pub fn horizon_bound_b(inputs: &BoundInputs, horizon: f64) -> Result<BoundB, ExistenceError> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(ExistenceError::InvalidArgument(format!("T = {horizon}")));
    }
    let p = inputs.p;
    let c_tilde =
        (inputs.sup_c() / inputs.q_min).powf(p - 1.0) * inputs.lifetime_factor(p - 1.0, horizon)?;
    let x0 = inputs.c_partial / survival(inputs.delta, horizon)?.powf(p - 1.0);
    let integral = bound_b_integral(&inputs.coefficients, x0)?;
    let t3b_bound = if c_tilde.is_infinite() {
        if integral.is_infinite() {
            f64::INFINITY
        } else {
            0.0
        }
    } else {
        integral / c_tilde
    };
    Ok(BoundB {
        c_tilde,
        t3b_bound,
        certified: c_tilde.is_finite() && horizon < t3b_bound,
    })
}

/// Largest T ≤ `t_max` passing route (a), by bisection on the monotone inequalities.
pub fn max_horizon_a(inputs: &BoundInputs, t_max: f64) -> Result<Option<f64>, ExistenceError> {
    if horizon_bound_a(inputs, t_max)?.certified {
        return Ok(Some(t_max));
    }
    let mut lo = 0.0;
    let mut hi = t_max;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if horizon_bound_a(inputs, mid)?.certified {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(if lo > 0.0 { Some(lo) } else { None })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    CertifiedA,
    CertifiedB,
    Uncertified,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonReport {
    pub model: String,
    pub p: f64,
    pub m0: usize,
    pub delta: f64,
    pub horizon: f64,
    pub lambda0: f64,
    pub moment_convention: MomentConvention,
    pub cond_rho: Option<Condition>,
    pub cond_eta: Option<Condition>,
    pub cd_check: Option<bool>,
    #[serde(rename = "C_partial", with = "ext_f64::option")]
    pub c_partial: Option<f64>,
    #[serde(flatten)]
    pub route_a: Option<BoundA>,
    #[serde(flatten)]
    pub route_b: Option<BoundB>,
    #[serde(with = "ext_f64::option")]
    pub max_horizon_a: Option<f64>,
    pub verdict: Verdict,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportOptions {
    pub p: f64,
    pub m0: Option<usize>,
    pub lambda0: f64,
    pub convention: MomentConvention,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self {
            p: 2.0,
            m0: None,
            lambda0: 1.0,
            convention: MomentConvention::Standard,
        }
    }
}

/// Evaluates every check that applies and collects the reasons for those that do not.
pub fn horizon_report(
    model: &PdeModel,
    horizon: f64,
    opts: &ReportOptions,
) -> Result<HorizonReport, ExistenceError> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(ExistenceError::InvalidArgument(format!("T = {horizon}")));
    }
    let m0 = opts.m0.unwrap_or(model.marks());
    let mut notes = Vec::new();
    let (cond_rho, cond_eta, cd_check) = match check_theorem2_with(
        &model.generator,
        model.delta(),
        opts.p,
        horizon,
        opts.lambda0,
    ) {
        Ok(c) => (Some(c.cond_rho), Some(c.cond_eta), Some(c.cd_check)),
        Err(e) => {
            notes.push(format!("integrability check: {e}"));
            (None, None, None)
        }
    };
    let (mut c_partial, mut route_a, mut route_b, mut max_a) = (None, None, None, None);
    match BoundInputs::from_model(model, opts.p, m0, opts.convention) {
        Ok(inputs) => {
            c_partial = Some(inputs.c_partial);
            if inputs.c_partial > 1.0 {
                notes.push(format!(
                    "C_partial = {} > 1: route (a) fails for every T since the survival function is at most 1",
                    inputs.c_partial
                ));
            }
            match horizon_bound_a(&inputs, horizon) {
                Ok(a) => {
                    route_a = Some(a);
                    max_a = max_horizon_a(&inputs, 100.0)?;
                }
                Err(e) => notes.push(format!("route (a): {e}")),
            }
            match horizon_bound_b(&inputs, horizon) {
                Ok(b) => {
                    if b.c_tilde.is_infinite() {
                        notes.push(
                            "route (b): C_tilde is infinite for this (p, delta, alpha)".into(),
                        );
                    }
                    route_b = Some(b);
                }
                Err(e) => notes.push(format!("route (b): {e}")),
            }
        }
        Err(e) => notes.push(format!("horizon bounds: {e}")),
    }
    if m0 > model.marks() {
        notes.push(format!(
            "marks {}..={m0} do not appear in the nonlinearity",
            model.marks() + 1
        ));
    }
    let hypotheses = cond_rho.is_some_and(|c| c.holds) && cond_eta.is_some_and(|c| c.holds);
    if !hypotheses {
        notes.push("integrability hypotheses (cond_rho, cond_eta) not satisfied".into());
    }
    let verdict = if !hypotheses {
        Verdict::Uncertified
    } else if route_a.is_some_and(|a| a.certified) {
        Verdict::CertifiedA
    } else if route_b.is_some_and(|b| b.certified) {
        Verdict::CertifiedB
    } else {
        Verdict::Uncertified
    };
    Ok(HorizonReport {
        model: model.name.clone(),
        p: opts.p,
        m0,
        delta: model.delta(),
        horizon,
        lambda0: opts.lambda0,
        moment_convention: opts.convention,
        cond_rho,
        cond_eta,
        cd_check,
        c_partial,
        route_a,
        route_b,
        max_horizon_a: max_a,
        verdict,
        notes,
    })
}

/// JSON for f64 that keeps ±∞ and NaN as strings.
pub mod ext_f64 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(serde::de::Error::custom(format!("not a number: {other}"))),
            },
        }
    }

    pub mod option {
        use serde::{Deserialize, Deserializer, Serializer};

        pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
            match v {
                Some(x) => super::serialize(x, s),
                None => s.serialize_none(),
            }
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
            #[derive(Deserialize)]
            struct Wrap(#[serde(with = "super")] f64);
            Ok(Option::<Wrap>::deserialize(d)?.map(|w| w.0))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{builtin_model, ModelParams};

    #[test]
    fn gaussian_moments() {
        assert!((abs_gaussian_moment(2.0).unwrap() - 1.0).abs() < 1e-14);
        assert!((abs_gaussian_moment(4.0).unwrap() - 3.0).abs() < 1e-13);
        assert!(
            (abs_gaussian_moment(1.0).unwrap() - (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-15
        );
        let lit = abs_gaussian_moment_with(2.0, MomentConvention::PaperLiteral).unwrap();
        assert!((lit - 3.0).abs() < 1e-13);
        assert!(abs_gaussian_moment(0.0).is_err());
    }

    #[test]
    fn sup_of_power_times_exponential() {
        assert_eq!(sup_power_exp(-0.1, 1.0, 1.0), f64::INFINITY);
        assert!((sup_power_exp(0.5, 2.0, 1.0) - 2f64.exp()).abs() < 1e-14);
        assert!((sup_power_exp(0.0, 1.0, 0.5) - 0.5f64.exp()).abs() < 1e-15);
        // interior maximum of s e^{−s} at s = 1
        assert!((sup_power_exp(1.0, -1.0, 3.0) - (-1f64).exp()).abs() < 1e-15);
        let grid = (1..=30_000)
            .map(|i| i as f64 * 1e-4)
            .map(|s| s * (-s).exp())
            .fold(0.0, f64::max);
        assert!((grid - sup_power_exp(1.0, -1.0, 3.0)).abs() < 1e-8);
    }

    #[test]
    fn weight_constant_matches_negative_moment() {
        // A_p s^{−p/α} = E[S_s^{−p/2}]
        for (p, a) in [(1.0, 1.5), (2.0, 1.2), (3.0, 1.8)] {
            let want = crate::bernstein::neg_moment_stable(0.5 * p, a, 0.3).unwrap();
            let got = stable_weight_constant(p, a).unwrap() * 0.3f64.powf(-p / a);
            assert!(((got - want) / want).abs() < 1e-13);
        }
    }

    #[test]
    fn route_b_diverges_for_linear_nonlinearities() {
        assert_eq!(bound_b_integral(&[(1.0, 1)], 1.0).unwrap(), f64::INFINITY);
        // ∫_1^∞ dx/x² = 1
        assert!((bound_b_integral(&[(1.0, 2)], 1.0).unwrap() - 1.0).abs() < 1e-9);
        // ∫_2^∞ dx/(1 + x²) = π/2 − atan 2
        let want = std::f64::consts::FRAC_PI_2 - 2f64.atan();
        assert!((bound_b_integral(&[(1.0, 0), (1.0, 2)], 2.0).unwrap() - want).abs() < 1e-9);
    }

    #[test]
    fn p_one_route_b_is_never_finite() {
        let m = builtin_model(
            "nld",
            &ModelParams {
                k: 1,
                ..ModelParams::default()
            },
        )
        .unwrap()
        .with_delta(0.25)
        .unwrap();
        let inputs = BoundInputs::from_model(&m, 1.0, 1, MomentConvention::Standard).unwrap();
        let b = horizon_bound_b(&inputs, 0.1).unwrap();
        // max{A_1 sup s^{−1/α}, 1} with sup over (0, T] of s^{−1/α} = ∞
        assert_eq!(b.c_tilde, f64::INFINITY);
        assert!(!b.certified);
        // without derivative marks only the ρ^0 ≡ 1 term remains
        let plain = BoundInputs::from_model(&m, 1.0, 0, MomentConvention::Standard).unwrap();
        let b0 = horizon_bound_b(&plain, 0.1).unwrap();
        assert_eq!(b0.c_tilde, 1.0);
    }

    #[test]
    fn inadmissible_delta_and_lipschitz() {
        let m = builtin_model(
            "gradd",
            &ModelParams {
                d: 2,
                k: 1,
                ..ModelParams::default()
            },
        )
        .unwrap();
        let bad = BoundInputs::from_model(
            &m.clone().with_delta(0.5).unwrap(),
            1.0,
            2,
            MomentConvention::Standard,
        )
        .unwrap();
        assert!(matches!(
            horizon_bound_a(&bad, 0.1),
            Err(ExistenceError::Inadmissible(_))
        ));
        // default δ = 1 − 1/α sits on the boundary, where s^0 e^{ps} stays bounded
        let ok = BoundInputs::from_model(&m, 1.0, 2, MomentConvention::Standard).unwrap();
        assert!(horizon_bound_a(&ok, 0.1).unwrap().c_circ.is_finite());
        let h = builtin_model(
            "burgers-halfspace",
            &ModelParams {
                d: 2,
                ..ModelParams::default()
            },
        )
        .unwrap();
        assert!(matches!(
            BoundInputs::from_model(&h, 1.0, 2, MomentConvention::Standard),
            Err(ExistenceError::NotLipschitz)
        ));
        assert!(BoundInputs::from_model(&m, 1.0, 1, MomentConvention::Standard).is_err());
        assert!(BoundInputs::from_model(&m, 1.0, 3, MomentConvention::Standard).is_err());
    }

    #[test]
    fn ext_f64_round_trip() {
        #[derive(Serialize, Deserialize, PartialEq, Debug)]
        struct W(#[serde(with = "ext_f64")] f64);
        for v in [1.5, f64::INFINITY, f64::NEG_INFINITY] {
            let s = serde_json::to_string(&W(v)).unwrap();
            assert_eq!(serde_json::from_str::<W>(&s).unwrap(), W(v));
        }
        assert_eq!(serde_json::to_string(&W(f64::INFINITY)).unwrap(), "\"inf\"");
    }
}
