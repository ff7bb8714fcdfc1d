//! Built-in benchmark problems with closed-form or property-based checks.

use super::expr::Expression;
use super::{
    generator_for, BranchingLaw, ModelError, PdeModel, PolynomialNonlinearity, Term,
    TerminalCondition,
};
use crate::sampling::GammaLifetime;
use crate::specfun::GetoorPair;

pub const BUILTIN_NAMES: [&str; 5] = [
    "nld",
    "gradd",
    "burgers-halfspace",
    "burgers-cosine",
    "linear-test",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub d: usize,
    pub alpha: f64,
    pub k: u32,
    pub kappa: f64,
    /// Horizon T.
    pub horizon: f64,
    /// Rate of the linear test model.
    pub c: f64,
    /// Gamma shape; `None` selects [`default_delta`].
    pub delta: Option<f64>,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            d: 1,
            alpha: 1.5,
            k: 0,
            kappa: 1.0,
            horizon: 1.0,
            c: 1.0,
            delta: None,
        }
    }
}

/// δ = 1/2 without gradient marks; with marks also δ ≤ 1 − 1/α so the
/// first-moment horizon bound applies.
pub fn default_delta(m: usize, alpha: f64) -> f64 {
    if m == 0 || alpha <= 1.0 {
        0.5
    } else {
        0.5f64.min(1.0 - 1.0 / alpha)
    }
}

fn expr(src: &str, d: usize) -> Result<Expression, ModelError> {
    Expression::parse(src, d).map_err(|source| ModelError::Expr {
        context: format!("builtin expression `{src}`"),
        source,
    })
}

fn term(l: Vec<u32>, coeff: Expression, sup: f64) -> Term {
    Term {
        l,
        coeff,
        sup,
        sup_estimated: false,
    }
}

/// Lipschitz constant of (1 − ‖x‖²)₊^β, `None` when β < 1.
fn bump_lipschitz(beta: f64) -> Option<f64> {
    if beta < 1.0 {
        return None;
    }
    if beta == 1.0 {
        return Some(2.0);
    }
    let r2 = 1.0 / (2.0 * beta - 1.0);
    Some(2.0 * beta * r2.sqrt() * (1.0 - r2).powf(beta - 1.0))
}

const RADIAL_POINTS: usize = 4000;
const RADIAL_MAX: f64 = 4.0;
const TIME_POINTS: usize = 41;
const SUP_MARGIN: f64 = 1.01;

/// Grid maximum over t ∈ [0, T] and r ∈ [0, 4] of |f(t, r)|, with a small margin.
fn radial_sup<F: FnMut(f64, f64) -> f64>(mut f: F, horizon: f64) -> f64 {
    let mut worst = 0.0f64;
    for j in 0..TIME_POINTS {
        let t = horizon * j as f64 / (TIME_POINTS - 1) as f64;
        for i in 0..=RADIAL_POINTS {
            let r = RADIAL_MAX * i as f64 / RADIAL_POINTS as f64;
            worst = worst.max(f(t, r).abs());
        }
    }
    worst * SUP_MARGIN
}

fn psi_radial(g: &GetoorPair) -> Result<Vec<f64>, ModelError> {
    (0..=RADIAL_POINTS)
        .map(|i| {
            let r = RADIAL_MAX * i as f64 / RADIAL_POINTS as f64;
            g.psi_norm2(r * r)
                .map_err(|e| ModelError::Inadmissible(e.to_string()))
        })
        .collect()
}

fn check_common(p: &ModelParams) -> Result<(), ModelError> {
    if p.d == 0 {
        return Err(ModelError::Inadmissible("d = 0".into()));
    }
    if !(p.horizon > 0.0 && p.horizon.is_finite()) {
        return Err(ModelError::Inadmissible(format!("T = {}", p.horizon)));
    }
    if !(p.kappa > 0.0 && p.kappa.is_finite()) {
        return Err(ModelError::Inadmissible(format!("kappa = {}", p.kappa)));
    }
    Ok(())
}

fn manufactured_checks(name: &str, p: &ModelParams, lo_alpha: f64) -> Result<(), ModelError> {
    if !(p.alpha > lo_alpha && p.alpha < 2.0) {
        return Err(ModelError::Inadmissible(format!(
            "{name} needs alpha in ({lo_alpha}, 2), got {}",
            p.alpha
        )));
    }
    if p.kappa != 1.0 {
        return Err(ModelError::Inadmissible(format!(
            "{name} has a closed-form solution only for kappa = 1"
        )));
    }
    Ok(())
}

/// Builds one of the catalog models.
pub fn builtin_model(name: &str, p: &ModelParams) -> Result<PdeModel, ModelError> {
    check_common(p)?;
    let d = p.d;
    let (alpha, k, big_t) = (p.alpha, p.k, p.horizon);
    let beta = k as f64 + 0.5 * alpha;
    let (nonlinearity, terminal, m) = match name {
        "nld" => {
            manufactured_checks(name, p, 0.0)?;
            let g = GetoorPair::new(k, alpha, d)
                .map_err(|e| ModelError::Inadmissible(e.to_string()))?;
            let c0 = expr(
                &format!(
                    "exp(-t)*psi_getoor({k}, {alpha}) - exp(-4*t)*pospart(1 - norm2())^({})",
                    4.0 * k as f64 + 2.0 * alpha
                ),
                d,
            )?;
            // Ψ_{0,α} blows up like (‖x‖ − 1)^{−α/2} just outside the ball
            let sup0 = if k == 0 {
                f64::INFINITY
            } else {
                let psi = psi_radial(&g)?;
                let mut i = 0;
                radial_sup(
                    |t, r| {
                        let v = (-t).exp() * psi[i]
                            - (-4.0 * t).exp() * (1.0 - r * r).max(0.0).powf(4.0 * beta);
                        i = (i + 1) % psi.len();
                        v
                    },
                    big_t,
                )
            };
            let terms = vec![
                term(vec![0], c0, sup0),
                term(vec![1], expr("1", d)?, 1.0),
                term(vec![4], expr("1", d)?, 1.0),
            ];
            let phi = expr(&format!("exp(-{big_t})*phi_bump({k}, {alpha})"), d)?;
            let scale = (-big_t).exp();
            let terminal = TerminalCondition {
                phi,
                sup_norm: scale,
                lipschitz: bump_lipschitz(beta).map(|l| l * scale),
            };
            (PolynomialNonlinearity::new(d, 0, terms)?, terminal, 0)
        }
        "gradd" => {
            manufactured_checks(name, p, 1.0)?;
            let g = GetoorPair::new(k, alpha, d)
                .map_err(|e| ModelError::Inadmissible(e.to_string()))?;
            let lead = 2.0 * k as f64 + alpha;
            let c0 = expr(
                &format!(
                    "exp(-t)*psi_getoor({k}, {alpha}) + {lead}*exp(-2*t)*pospart(1 - norm2())^({})*sumx()",
                    lead - 1.0
                ),
                d,
            )?;
            let sup0 = if k == 0 {
                f64::INFINITY
            } else {
                let psi = psi_radial(&g)?;
                let sd = (d as f64).sqrt();
                let mut i = 0;
                radial_sup(
                    |t, r| {
                        let a = (-t).exp() * psi[i];
                        let b = lead
                            * (-2.0 * t).exp()
                            * (1.0 - r * r).max(0.0).powf(lead - 1.0)
                            * r
                            * sd;
                        i = (i + 1) % psi.len();
                        a.abs() + b
                    },
                    big_t,
                )
            };
            let mut terms = vec![term(vec![0; d + 1], c0, sup0)];
            // the linear term u of the equation
            let mut lin = vec![0; d + 1];
            lin[0] = 1;
            terms.push(term(lin, expr("1", d)?, 1.0));
            for j in 1..=d {
                let mut l = vec![0; d + 1];
                l[0] = 1;
                l[j] = 1;
                terms.push(term(l, expr("1", d)?, 1.0));
            }
            let phi = expr(&format!("exp(-{big_t})*phi_bump({k}, {alpha})"), d)?;
            let scale = (-big_t).exp();
            let terminal = TerminalCondition {
                phi,
                sup_norm: scale,
                lipschitz: bump_lipschitz(beta).map(|l| l * scale),
            };
            (PolynomialNonlinearity::new(d, d, terms)?, terminal, d)
        }
        "burgers-halfspace" | "burgers-cosine" => {
            if !(alpha > 1.0 && alpha <= 2.0) {
                return Err(ModelError::Inadmissible(format!(
                    "{name} needs alpha in (1, 2], got {alpha}"
                )));
            }
            // ∂u/∂t + κΔ_α u − u Σ ∂u/∂x_j = 0 puts −1 in front of every monomial
            let terms = (1..=d)
                .map(|j| {
                    let mut l = vec![0; d + 1];
                    l[0] = 1;
                    l[j] = 1;
                    Ok(term(l, expr("-1", d)?, 1.0))
                })
                .collect::<Result<Vec<_>, ModelError>>()?;
            let terminal = if name == "burgers-halfspace" {
                TerminalCondition {
                    phi: expr("step(x1)", d)?,
                    sup_norm: 1.0,
                    lipschitz: None,
                }
            } else {
                let prod = (1..=d)
                    .map(|j| format!("cos(x{j})"))
                    .collect::<Vec<_>>()
                    .join("*");
                TerminalCondition {
                    phi: expr(&format!("{prod}*indicator_box(-pi/2, pi/2)"), d)?,
                    sup_norm: 1.0,
                    lipschitz: Some(1.0),
                }
            };
            (PolynomialNonlinearity::new(d, d, terms)?, terminal, d)
        }
        "linear-test" => {
            if !(alpha > 0.0 && alpha <= 2.0) {
                return Err(ModelError::Inadmissible(format!("alpha = {alpha}")));
            }
            if !p.c.is_finite() {
                return Err(ModelError::Inadmissible(format!("c = {}", p.c)));
            }
            let terms = vec![term(vec![1], Expression::constant(p.c, d), p.c.abs())];
            let terminal = TerminalCondition {
                phi: expr("1", d)?,
                sup_norm: 1.0,
                lipschitz: Some(0.0),
            };
            (PolynomialNonlinearity::new(d, 0, terms)?, terminal, 0)
        }
        other => return Err(ModelError::UnknownModel(other.to_string())),
    };
    let n = nonlinearity.terms.len();
    let delta = p.delta.unwrap_or_else(|| default_delta(m, alpha));
    Ok(PdeModel {
        name: name.to_string(),
        nonlinearity,
        terminal,
        law: BranchingLaw::uniform(n),
        lifetime: GammaLifetime::new(delta)?,
        generator: generator_for(alpha, p.kappa)?,
        horizon: big_t,
    })
}
