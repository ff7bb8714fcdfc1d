//! Random streams and exact samplers: stable subordinator increments (CMS),
//! subordinated Gaussian displacements, gamma lifetimes and offspring draws.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal};
use thiserror::Error;

use crate::specfun::{ln_gamma, upper_reg_gamma, SpecFunError};

/// CMS draws below this value are rejected and redrawn.
pub const CMS_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SamplingError {
    #[error("invalid parameter: {0}")]
    Domain(String),
    #[error(transparent)]
    SpecFun(#[from] SpecFunError),
}

/// A reproducible random stream keyed by `(master_seed, stream_id)`.
#[derive(Debug, Clone)]
pub struct RngStream {
    master_seed: u64,
    stream_id: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(master_seed);
        inner.set_stream(stream_id);
        Self {
            master_seed,
            stream_id,
            inner,
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Number of 32-bit words consumed so far.
    pub fn position(&self) -> u128 {
        self.inner.get_word_pos()
    }

    /// Uniform on the open interval (0, 1).
    pub fn open01(&mut self) -> f64 {
        loop {
            let u: f64 = self.inner.random();
            if u > 0.0 {
                return u;
            }
        }
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// The α/2-stable subordinator with Laplace exponent κ(2λ)^{α/2}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Subordinator {
    alpha: f64,
    kappa: f64,
    // κ^{2/α}: time-unchanged rescaling of the unit-diffusivity clock
    scale: f64,
}

impl Subordinator {
    pub fn new(alpha: f64, kappa: f64) -> Result<Self, SamplingError> {
        if !(alpha > 0.0 && alpha <= 2.0) {
            return Err(SamplingError::Domain(format!(
                "alpha = {alpha} not in (0, 2]"
            )));
        }
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(SamplingError::Domain(format!("kappa = {kappa}")));
        }
        Ok(Self {
            alpha,
            kappa,
            scale: kappa.powf(2.0 / alpha),
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// Draws the clock increment over a time step `dt`; `floor_hits` counts
    /// rejected underflowing draws.
    pub fn sample(&self, dt: f64, rng: &mut RngStream, floor_hits: &mut u64) -> f64 {
        if dt <= 0.0 {
            return 0.0;
        }
        if self.alpha == 2.0 {
            return 2.0 * self.kappa * dt;
        }
        self.scale * cms_draw(self.alpha, dt, rng, floor_hits)
    }

    /// Draws `(ds, dx)` over `dt`, writing the displacement into `dx`.
    pub fn increment_into(
        &self,
        dt: f64,
        rng: &mut RngStream,
        dx: &mut [f64],
        floor_hits: &mut u64,
    ) -> f64 {
        let ds = self.sample(dt, rng, floor_hits);
        let sd = ds.sqrt();
        for v in dx.iter_mut() {
            let n: f64 = StandardNormal.sample(rng);
            *v = sd * n;
        }
        ds
    }
}

fn cms_draw(alpha: f64, t: f64, rng: &mut RngStream, floor_hits: &mut u64) -> f64 {
    let two_over = 2.0 / alpha;
    let half = 0.5 * alpha;
    loop {
        let u = PI * (rng.open01() - 0.5);
        let e: f64 = Exp1.sample(rng);
        let shifted = half * (u + FRAC_PI_2);
        let s = 2.0 * t.powf(two_over) * shifted.sin() / u.cos().powf(two_over)
            * ((u - shifted).cos() / e).powf(two_over - 1.0);
        if s >= CMS_FLOOR && s.is_finite() {
            return s;
        }
        *floor_hits += 1;
    }
}

/// One draw of S_t for η(λ) = (2λ)^{α/2}.
pub fn sample_stable_subordinator(
    alpha: f64,
    t: f64,
    rng: &mut RngStream,
) -> Result<f64, SamplingError> {
    if !(alpha > 0.0 && alpha <= 2.0) {
        return Err(SamplingError::Domain(format!(
            "alpha = {alpha} not in (0, 2]"
        )));
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(SamplingError::Domain(format!("t = {t}")));
    }
    if alpha == 2.0 {
        return Ok(2.0 * t);
    }
    let mut hits = 0;
    Ok(cms_draw(alpha, t, rng, &mut hits))
}

/// Subordinator time consumed and the resulting Brownian displacement.
#[derive(Debug, Clone, PartialEq)]
pub struct SubordinatedIncrement {
    pub ds: f64,
    pub dx: Vec<f64>,
}

pub fn sample_subordinated_increment(
    d: usize,
    alpha: f64,
    kappa: f64,
    dt: f64,
    rng: &mut RngStream,
) -> Result<SubordinatedIncrement, SamplingError> {
    if d == 0 {
        return Err(SamplingError::Domain("d = 0".into()));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(SamplingError::Domain(format!("dt = {dt}")));
    }
    let sub = Subordinator::new(alpha, kappa)?;
    let mut dx = vec![0.0; d];
    let mut hits = 0;
    let ds = sub.increment_into(dt, rng, &mut dx, &mut hits);
    Ok(SubordinatedIncrement { ds, dx })
}

/// Gamma(δ, 1) lifetimes with density and survival function.
#[derive(Debug, Clone, Copy)]
pub struct GammaLifetime {
    delta: f64,
    ln_gamma_delta: f64,
    dist: Gamma<f64>,
}

impl PartialEq for GammaLifetime {
    fn eq(&self, other: &Self) -> bool {
        self.delta == other.delta
    }
}

impl GammaLifetime {
    pub fn new(delta: f64) -> Result<Self, SamplingError> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(SamplingError::Domain(format!("delta = {delta}")));
        }
        let dist = Gamma::new(delta, 1.0).map_err(|e| SamplingError::Domain(e.to_string()))?;
        Ok(Self {
            delta,
            ln_gamma_delta: ln_gamma(delta)?,
            dist,
        })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.dist.sample(rng)
    }

    /// ρ(s) = s^{δ−1} e^{−s} / Γ(δ).
    pub fn density(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        ((self.delta - 1.0) * s.ln() - s - self.ln_gamma_delta).exp()
    }

    /// F̄(s) = P(τ > s).
    pub fn survival(&self, s: f64) -> Result<f64, SamplingError> {
        Ok(upper_reg_gamma(self.delta, s.max(0.0))?)
    }
}

pub fn sample_lifetime(delta: f64, rng: &mut RngStream) -> Result<f64, SamplingError> {
    Ok(GammaLifetime::new(delta)?.sample(rng))
}

/// Draws an index with probability `weights[i]` from a cumulative table.
pub(crate) fn sample_cumulative<R: Rng + ?Sized>(cumulative: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random::<f64>() * cumulative[cumulative.len() - 1];
    cumulative
        .partition_point(|&c| c <= u)
        .min(cumulative.len() - 1)
}
