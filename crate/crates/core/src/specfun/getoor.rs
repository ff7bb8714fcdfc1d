//! The bump Φ_{k,α}(x) = (1 - ‖x‖²)₊^{k+α/2} and its image Ψ_{k,α} = -Δ_α Φ_{k,α}
//! under the fractional Laplacian.

use super::gamma::{gamma_fn, gamma_signed};
use super::hyp2f1::hyp2f1_with;
use super::{EvalPolicy, SpecFunError};

/// Sign convention for Γ(-α/2) in the exterior branch of Ψ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExteriorSign {
    /// Γ(-α/2) < 0 as written; Ψ is negative outside the unit ball.
    #[default]
    Printed,
    /// |Γ(-α/2)|; flips the exterior sign.
    Absolute,
}

pub fn phi_bump(k: u32, alpha: f64, x: &[f64]) -> f64 {
    let r2: f64 = x.iter().map(|v| v * v).sum();
    bump_from_norm2(k, alpha, r2)
}

pub(crate) fn bump_from_norm2(k: u32, alpha: f64, r2: f64) -> f64 {
    let base = 1.0 - r2;
    if base <= 0.0 {
        0.0
    } else {
        base.powf(k as f64 + 0.5 * alpha)
    }
}

/// Precomputed prefactors of Ψ_{k,α} in dimension d.
#[derive(Debug, Clone, PartialEq)]
pub struct GetoorPair {
    k: u32,
    alpha: f64,
    d: usize,
    interior: f64,
    exterior: f64,
    policy: EvalPolicy,
}

impl GetoorPair {
    pub fn new(k: u32, alpha: f64, d: usize) -> Result<Self, SpecFunError> {
        Self::with_sign(k, alpha, d, ExteriorSign::Printed)
    }

    pub fn with_sign(
        k: u32,
        alpha: f64,
        d: usize,
        sign: ExteriorSign,
    ) -> Result<Self, SpecFunError> {
        if !(alpha > 0.0 && alpha < 2.0) {
            return Err(SpecFunError::domain(
                "psi_getoor",
                format!("alpha = {alpha} not in (0, 2)"),
            ));
        }
        if d == 0 {
            return Err(SpecFunError::domain("psi_getoor", "d = 0"));
        }
        let kf = k as f64;
        let df = d as f64;
        let g_da = gamma_fn(0.5 * (df + alpha))?;
        let g_ka = gamma_fn(kf + 1.0 + 0.5 * alpha)?;
        let interior =
            g_da * g_ka / (2f64.powf(-alpha) * gamma_fn(kf + 1.0)? * gamma_fn(0.5 * df)?);
        let mut g_neg = gamma_signed(-0.5 * alpha)?;
        if sign == ExteriorSign::Absolute {
            g_neg = g_neg.abs();
        }
        let exterior =
            2f64.powf(alpha) * g_da * g_ka / (gamma_fn(kf + 1.0 + 0.5 * (df + alpha))? * g_neg);
        Ok(Self {
            k,
            alpha,
            d,
            interior,
            exterior,
            policy: EvalPolicy::default(),
        })
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn phi(&self, x: &[f64]) -> f64 {
        phi_bump(self.k, self.alpha, x)
    }

    pub fn psi(&self, x: &[f64]) -> Result<f64, SpecFunError> {
        if x.len() != self.d {
            return Err(SpecFunError::domain(
                "psi_getoor",
                format!("point has dimension {}, expected {}", x.len(), self.d),
            ));
        }
        self.psi_norm2(x.iter().map(|v| v * v).sum())
    }

    /// Ψ as a function of ‖x‖² (it is radial).
    pub fn psi_norm2(&self, r2: f64) -> Result<f64, SpecFunError> {
        let (kf, df, a) = (self.k as f64, self.d as f64, self.alpha);
        if r2 <= 1.0 {
            let f = hyp2f1_with(0.5 * (df + a), -kf, 0.5 * df, r2, &self.policy)?;
            Ok(self.interior * f)
        } else {
            let f = hyp2f1_with(
                0.5 * (df + a),
                0.5 * (2.0 + a),
                kf + 1.0 + 0.5 * (df + a),
                1.0 / r2,
                &self.policy,
            )?;
            Ok(self.exterior * f / r2.powf(0.5 * (df + a)))
        }
    }
}

pub fn psi_getoor(k: u32, alpha: f64, d: usize, x: &[f64]) -> Result<f64, SpecFunError> {
    GetoorPair::new(k, alpha, d)?.psi(x)
}

pub fn psi_getoor_with(
    k: u32,
    alpha: f64,
    d: usize,
    x: &[f64],
    sign: ExteriorSign,
) -> Result<f64, SpecFunError> {
    GetoorPair::with_sign(k, alpha, d, sign)?.psi(x)
}
