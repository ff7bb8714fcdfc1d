//! Gauss hypergeometric function ₂F₁(a, b; c; z) for real arguments on [-1, 1].
//!
//! Evaluation route by argument:
//! - terminating series when `a` or `b` is a non-positive integer,
//! - `z = 1`: Gauss summation (requires `c - a - b > 0`),
//! - `z < -1/2`: Pfaff transformation onto `z / (z - 1) ∈ [1/3, 1/2]`,
//! - `|z| ≤ 0.9`: direct power series,
//! - `z ∈ (0.9, 1)`: the `1 - z` connection formula, or the Euler
//!   transformation when `c - a - b` is an integer.

use super::gamma::{gamma_signed, recip_gamma};
use super::{EvalPolicy, SpecFunError};

const FUNC: &str = "hyp2f1";

fn non_positive_integer(v: f64) -> bool {
    v <= 0.0 && v == v.floor()
}

fn near_integer(v: f64) -> bool {
    (v - v.round()).abs() < 1e-8
}

pub fn hyp2f1(a: f64, b: f64, c: f64, z: f64) -> Result<f64, SpecFunError> {
    hyp2f1_with(a, b, c, z, &EvalPolicy::default())
}

pub fn hyp2f1_with(
    a: f64,
    b: f64,
    c: f64,
    z: f64,
    policy: &EvalPolicy,
) -> Result<f64, SpecFunError> {
    if ![a, b, c, z].iter().all(|v| v.is_finite()) {
        return Err(SpecFunError::domain(FUNC, "non-finite argument"));
    }
    // A terminating numerator parameter shorter than c's pole keeps the sum finite.
    let terminating = [a, b]
        .into_iter()
        .filter(|&v| non_positive_integer(v))
        .map(|v| (-v) as usize)
        .min();
    if non_positive_integer(c) {
        match terminating {
            Some(n) if (n as f64) < -c + 1.0 => {}
            _ => {
                return Err(SpecFunError::domain(
                    FUNC,
                    format!("c = {c} is a non-positive integer"),
                ))
            }
        }
    }
    if z == 0.0 {
        return Ok(1.0);
    }
    if let Some(n) = terminating {
        return Ok(polynomial(a, b, c, z, n));
    }
    if !(-1.0..=1.0).contains(&z) {
        return Err(SpecFunError::domain(
            FUNC,
            format!("z = {z} outside [-1, 1]"),
        ));
    }
    if z == 1.0 {
        let s = c - a - b;
        if s <= 0.0 {
            return Err(SpecFunError::domain(
                FUNC,
                format!("divergent at z = 1 (c - a - b = {s})"),
            ));
        }
        return Ok(gamma_signed(c)? * gamma_signed(s)? * recip_gamma(c - a) * recip_gamma(c - b));
    }
    if z < -0.5 {
        let w = z / (z - 1.0);
        return Ok((1.0 - z).powf(-a) * series(a, c - b, c, w, policy)?);
    }
    if z <= 0.9 {
        return series(a, b, c, z, policy);
    }
    let s = c - a - b;
    if near_integer(s) {
        return Ok((1.0 - z).powf(s) * series(c - a, c - b, c, z, policy)?);
    }
    connection(a, b, c, z, policy)
}

fn polynomial(a: f64, b: f64, c: f64, z: f64, n: usize) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 0..n {
        let kf = k as f64;
        term *= (a + kf) * (b + kf) / ((c + kf) * (kf + 1.0)) * z;
        sum += term;
    }
    sum
}

fn series(a: f64, b: f64, c: f64, z: f64, policy: &EvalPolicy) -> Result<f64, SpecFunError> {
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut small_run = 0;
    for k in 0..policy.max_terms {
        let kf = k as f64;
        term *= (a + kf) * (b + kf) / ((c + kf) * (kf + 1.0)) * z;
        sum += term;
        if term == 0.0 {
            return Ok(sum);
        }
        // Require two consecutive small terms; once the ratio settles below 1
        // the geometric tail bound |t|·|z|/(1-|z|) is then below tolerance too.
        let ratio = ((a + kf + 1.0) * (b + kf + 1.0) / ((c + kf + 1.0) * (kf + 2.0)) * z).abs();
        let tail = if ratio < 1.0 {
            term.abs() * ratio / (1.0 - ratio)
        } else {
            f64::INFINITY
        };
        if tail <= policy.rel_tol * sum.abs() {
            small_run += 1;
            if small_run >= 2 {
                return Ok(sum);
            }
        } else {
            small_run = 0;
        }
    }
    Err(SpecFunError::Accuracy {
        func: FUNC,
        terms: policy.max_terms,
        partial: sum,
        bound: term.abs(),
    })
}

// Abramowitz & Stegun 15.3.6.
fn connection(a: f64, b: f64, c: f64, z: f64, policy: &EvalPolicy) -> Result<f64, SpecFunError> {
    let w = 1.0 - z;
    let s = c - a - b;
    let gc = gamma_signed(c)?;
    let first = gc * gamma_signed(s)? * recip_gamma(c - a) * recip_gamma(c - b);
    let second = gc * gamma_signed(-s)? * recip_gamma(a) * recip_gamma(b);
    let mut value = 0.0;
    if first != 0.0 {
        value += first * series(a, b, 1.0 - s, w, policy)?;
    }
    if second != 0.0 {
        value += second * w.powf(s) * series(c - a, c - b, 1.0 + s, w, policy)?;
    }
    Ok(value)
}
