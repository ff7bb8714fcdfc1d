//! Special functions needed by the benchmarks and the horizon checker.
//!
//! All routines are pure and thread-safe.

mod gamma;
mod getoor;
mod hyp2f1;
mod incgamma;

pub(crate) use gamma::ln_gamma_shift;
pub use gamma::{gamma_fn, gamma_signed, ln_gamma, recip_gamma};
pub use getoor::{phi_bump, psi_getoor, psi_getoor_with, ExteriorSign, GetoorPair};
pub use hyp2f1::{hyp2f1, hyp2f1_with};
pub use incgamma::{lower_reg_gamma, upper_reg_gamma, upper_reg_gamma_with};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpecFunError {
    #[error("{func}: argument outside domain ({detail})")]
    Domain { func: &'static str, detail: String },
    #[error("{func}: no convergence after {terms} terms (partial sum {partial}, last term bound {bound})")]
    Accuracy {
        func: &'static str,
        terms: usize,
        partial: f64,
        bound: f64,
    },
}

impl SpecFunError {
    pub(crate) fn domain(func: &'static str, detail: impl Into<String>) -> Self {
        Self::Domain {
            func,
            detail: detail.into(),
        }
    }
}

/// Series truncation controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalPolicy {
    pub rel_tol: f64,
    pub max_terms: usize,
}

impl Default for EvalPolicy {
    fn default() -> Self {
        Self {
            rel_tol: 1e-12,
            max_terms: 10_000,
        }
    }
}

impl EvalPolicy {
    pub fn new(rel_tol: f64, max_terms: usize) -> Result<Self, SpecFunError> {
        if !(rel_tol > 0.0 && rel_tol <= 1e-3) {
            return Err(SpecFunError::domain(
                "EvalPolicy",
                format!("rel_tol {rel_tol} not in (0, 1e-3]"),
            ));
        }
        if max_terms < 100 {
            return Err(SpecFunError::domain(
                "EvalPolicy",
                format!("max_terms {max_terms} < 100"),
            ));
        }
        Ok(Self { rel_tol, max_terms })
    }
}
