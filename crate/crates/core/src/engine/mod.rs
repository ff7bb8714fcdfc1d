//! Marked branching trees and the Monte Carlo estimators built on them.

mod tree;

use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ExprError, PdeModel};
use crate::sampling::{RngStream, SamplingError};

pub use tree::{grow_tree, grow_tree_traced, Particle, ParticleRecord, TreeBudget, TreeOutcome};

/// Trees per work unit handed to a worker.
pub const BLOCK_SIZE: u64 = 1024;

const Z95: f64 = 1.959964;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error(
        "tree budget exceeded ({particles} particles, generation {generation}); \
         shorten the time to horizon T - t"
    )]
    BudgetExceeded { particles: usize, generation: usize },
    #[error("estimate aborted at tree {stream_id} after {completed} completed trees: {source}")]
    Aborted {
        stream_id: u64,
        completed: u64,
        #[source]
        source: Box<EngineError>,
    },
    #[error("derivative mark {mark} needs t < T (got t = {t})")]
    DegenerateDerivative { mark: usize, t: f64 },
    #[error("non-finite tree functional {0}")]
    NonFinite(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
}

/// Running mean and sum of squared deviations.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Welford {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Welford) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        let (na, nb) = (self.n as f64, other.n as f64);
        self.mean += delta * nb / n as f64;
        self.m2 += other.m2 + delta * delta * na * nb / n as f64;
        self.n = n;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Sample variance (n − 1 denominator).
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn stderr(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorResult {
    pub mean: f64,
    pub stderr: f64,
    pub ci95: (f64, f64),
    pub n_trees: u64,
    pub truncated_trees: u64,
    pub mean_particles: f64,
    pub max_particles: usize,
    /// Wall-clock seconds.
    pub elapsed: f64,
}

impl EstimatorResult {
    fn from_parts(acc: &Welford, sizes: &Welford, max_particles: usize, elapsed: f64) -> Self {
        let (mean, stderr) = (acc.mean(), acc.stderr());
        Self {
            mean,
            stderr,
            ci95: (mean - Z95 * stderr, mean + Z95 * stderr),
            n_trees: acc.count(),
            truncated_trees: 0,
            mean_particles: sizes.mean(),
            max_particles,
            elapsed,
        }
    }

    /// |mean − target| / stderr.
    pub fn z_score(&self, target: f64) -> f64 {
        (self.mean - target).abs() / self.stderr
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateOptions {
    pub n_trees: u64,
    pub master_seed: u64,
    pub workers: usize,
    pub budget: TreeBudget,
}

impl EstimateOptions {
    pub fn new(n_trees: u64, master_seed: u64) -> Self {
        Self {
            n_trees,
            master_seed,
            workers: 1,
            budget: TreeBudget::default(),
        }
    }

    pub fn workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    pub fn budget(mut self, budget: TreeBudget) -> Self {
        self.budget = budget;
        self
    }
}

struct BlockResult {
    values: Welford,
    sizes: Welford,
    max_particles: usize,
}

#[allow(clippy::too_many_arguments)]
fn run_block(
    model: &PdeModel,
    t: f64,
    x: &[f64],
    mark: usize,
    horizon: f64,
    opts: &EstimateOptions,
    block: u64,
    stop: &AtomicBool,
) -> Result<BlockResult, (u64, u64, EngineError)> {
    let first = block * BLOCK_SIZE;
    let last = (first + BLOCK_SIZE).min(opts.n_trees);
    let mut out = BlockResult {
        values: Welford::new(),
        sizes: Welford::new(),
        max_particles: 0,
    };
    for j in first..last {
        if stop.load(Ordering::Relaxed) {
            break;
        }
        let mut rng = RngStream::new(opts.master_seed, j);
        match grow_tree(model, t, x, mark, horizon, &mut rng, &opts.budget) {
            Ok(o) => {
                out.values.push(o.h_value);
                out.sizes.push(o.particles_total as f64);
                out.max_particles = out.max_particles.max(o.particles_total);
            }
            Err(e) => {
                stop.store(true, Ordering::Relaxed);
                return Err((j, j - first, e));
            }
        }
    }
    Ok(out)
}

/// Monte Carlo estimate of u(t, x) (mark 0) or ∂u/∂x_mark(t, x).
///
/// Tree `j` draws from stream `j` of `master_seed`, and blocks of
/// [`BLOCK_SIZE`] trees are merged in order, so the result does not depend
/// on the worker count.
pub fn estimate(
    model: &PdeModel,
    t: f64,
    x: &[f64],
    mark: usize,
    horizon: f64,
    opts: &EstimateOptions,
) -> Result<EstimatorResult, EngineError> {
    if opts.n_trees < 2 {
        return Err(EngineError::InvalidArgument(format!(
            "n_trees = {} < 2",
            opts.n_trees
        )));
    }
    if opts.workers == 0 {
        return Err(EngineError::InvalidArgument("workers = 0".into()));
    }
    tree::check_request(model, t, x, mark, horizon)?;
    let start = Instant::now();
    let blocks = opts.n_trees.div_ceil(BLOCK_SIZE);
    let stop = AtomicBool::new(false);
    let results: Vec<_> = if opts.workers == 1 {
        (0..blocks)
            .map(|b| run_block(model, t, x, mark, horizon, opts, b, &stop))
            .collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(opts.workers)
            .build()
            .map_err(|e| EngineError::InvalidArgument(format!("thread pool: {e}")))?;
        pool.install(|| {
            (0..blocks)
                .into_par_iter()
                .map(|b| run_block(model, t, x, mark, horizon, opts, b, &stop))
                .collect()
        })
    };

    let mut values = Welford::new();
    let mut sizes = Welford::new();
    let mut max_particles = 0;
    let mut failure = None;
    let mut completed = 0u64;
    for r in results {
        match r {
            Ok(b) => {
                completed += b.values.count();
                values.merge(&b.values);
                sizes.merge(&b.sizes);
                max_particles = max_particles.max(b.max_particles);
            }
            Err((j, done, e)) => {
                completed += done;
                if failure.as_ref().is_none_or(|(fj, _)| j < *fj) {
                    failure = Some((j, e));
                }
            }
        }
    }
    if let Some((stream_id, source)) = failure {
        return Err(EngineError::Aborted {
            stream_id,
            completed,
            source: Box::new(source),
        });
    }
    Ok(EstimatorResult::from_parts(
        &values,
        &sizes,
        max_particles,
        start.elapsed().as_secs_f64(),
    ))
}

/// splitmix64 finaliser.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of the independent tree population used for mark `i`.
pub fn mark_seed(master_seed: u64, mark: usize) -> u64 {
    splitmix64(master_seed.wrapping_add(mark as u64))
}

/// Estimates ∂u/∂x_i(t, x) for i = 1, …, m, each from its own tree population.
pub fn estimate_gradient_all(
    model: &PdeModel,
    t: f64,
    x: &[f64],
    horizon: f64,
    opts: &EstimateOptions,
) -> Result<Vec<EstimatorResult>, EngineError> {
    if t >= horizon {
        return Err(EngineError::DegenerateDerivative { mark: 1, t });
    }
    (1..=model.marks())
        .map(|i| {
            let o = EstimateOptions {
                master_seed: mark_seed(opts.master_seed, i),
                ..*opts
            };
            estimate(model, t, x, i, horizon, &o)
        })
        .collect()
}
