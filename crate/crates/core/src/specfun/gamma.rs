use std::f64::consts::PI;

use super::SpecFunError;

// Lanczos approximation, g = 7, n = 9.
const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

fn lanczos_sum(x: f64) -> f64 {
    // x is the shifted argument (z - 1)
    let mut acc = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    acc
}

/// Γ(z) for z ≥ 1/2 (no reflection).
fn gamma_right(z: f64) -> f64 {
    if z == z.floor() && z <= 171.0 {
        // exact factorials
        let mut acc = 1.0;
        let mut k = 2.0;
        while k < z {
            acc *= k;
            k += 1.0;
        }
        return acc;
    }
    if z > 20.0 {
        return ln_gamma_right(z).exp();
    }
    let x = z - 1.0;
    let t = x + LANCZOS_G + 0.5;
    // split the power to delay overflow
    let half = t.powf(0.5 * (x + 0.5));
    (2.0 * PI).sqrt() * half * (half * (-t).exp()) * lanczos_sum(x)
}

fn ln_gamma_right(z: f64) -> f64 {
    if z >= 10.0 {
        // Stirling series with Bernoulli corrections
        return (z - 0.5) * z.ln() - z + LN_SQRT_2PI + stirling_tail(z);
    }
    let x = z - 1.0;
    let t = x + LANCZOS_G + 0.5;
    LN_SQRT_2PI + (x + 0.5) * t.ln() - t + lanczos_sum(x).ln()
}

fn stirling_tail(z: f64) -> f64 {
    let inv = 1.0 / z;
    let inv2 = inv * inv;
    inv * (1.0 / 12.0
        - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 * (1.0 / 1680.0 - inv2 / 1188.0))))
}

/// ln Γ(x + μ) − ln Γ(x) for x > 0, x + μ > 0, without cancellation for large x.
pub(crate) fn ln_gamma_shift(x: f64, mu: f64) -> Result<f64, SpecFunError> {
    if x >= 20.0 && x + mu >= 20.0 {
        let y = x + mu;
        return Ok(
            (x - 0.5) * (mu / x).ln_1p() + mu * y.ln() - mu + stirling_tail(y) - stirling_tail(x),
        );
    }
    Ok(ln_gamma(x + mu)? - ln_gamma(x)?)
}

/// Γ(p) for p > 0.
pub fn gamma_fn(p: f64) -> Result<f64, SpecFunError> {
    if !p.is_finite() || p <= 0.0 {
        return Err(SpecFunError::domain("gamma_fn", format!("p = {p}")));
    }
    let v = gamma_signed(p)?;
    if !v.is_finite() {
        return Err(SpecFunError::domain(
            "gamma_fn",
            format!("Γ({p}) overflows"),
        ));
    }
    Ok(v)
}

/// Γ(z) on the whole real line except the poles, with sign (reflection below 1/2).
pub fn gamma_signed(z: f64) -> Result<f64, SpecFunError> {
    if !z.is_finite() {
        return Err(SpecFunError::domain("gamma", format!("z = {z}")));
    }
    if z <= 0.0 && z == z.floor() {
        return Err(SpecFunError::domain("gamma", format!("pole at z = {z}")));
    }
    if z < 0.5 {
        let s = (PI * z).sin();
        return Ok(PI / (s * gamma_right(1.0 - z)));
    }
    Ok(gamma_right(z))
}

/// 1/Γ(z), equal to zero at the poles.
pub fn recip_gamma(z: f64) -> f64 {
    if z <= 0.0 && z == z.floor() {
        return 0.0;
    }
    if z < 0.5 {
        return (PI * z).sin() * gamma_right(1.0 - z) / PI;
    }
    if z > 170.0 {
        return (-ln_gamma_right(z)).exp();
    }
    1.0 / gamma_right(z)
}

/// ln Γ(p) for p > 0.
pub fn ln_gamma(p: f64) -> Result<f64, SpecFunError> {
    if !p.is_finite() || p <= 0.0 {
        return Err(SpecFunError::domain("ln_gamma", format!("p = {p}")));
    }
    if p < 0.5 {
        // Γ(p) = Γ(p + 1) / p keeps us on the accurate side
        return Ok(ln_gamma_right(p + 1.0) - p.ln());
    }
    Ok(ln_gamma_right(p))
}
