use std::collections::VecDeque;

use super::EngineError;
use crate::model::PdeModel;
use crate::sampling::{RngStream, Subordinator};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeBudget {
    pub max_particles: usize,
    pub max_generation: usize,
}

impl Default for TreeBudget {
    fn default() -> Self {
        Self {
            max_particles: 1_000_000,
            max_generation: 10_000,
        }
    }
}

impl TreeBudget {
    pub fn new(max_particles: usize, max_generation: usize) -> Result<Self, EngineError> {
        if max_particles == 0 || max_generation == 0 {
            return Err(EngineError::InvalidArgument(
                "tree budget must be positive".into(),
            ));
        }
        Ok(Self {
            max_particles,
            max_generation,
        })
    }
}

/// A branch of the tree: label (1, k₂, …, k_n), mark, birth time and position.
#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    pub label: Vec<u32>,
    pub mark: usize,
    pub birth_time: f64,
    pub birth_position: Vec<f64>,
}

impl Particle {
    pub fn generation(&self) -> usize {
        self.label.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeOutcome {
    pub h_value: f64,
    pub particles_total: usize,
    pub leaves: usize,
    pub max_gen: usize,
}

/// What happened to one particle; collected only on request.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleRecord {
    pub particle: Particle,
    /// `None` for leaves.
    pub offspring: Option<usize>,
    pub factor: f64,
}

pub(crate) fn check_request(
    model: &PdeModel,
    t: f64,
    x: &[f64],
    mark: usize,
    horizon: f64,
) -> Result<(), EngineError> {
    if x.len() != model.dim() {
        return Err(EngineError::InvalidArgument(format!(
            "x has {} coordinates, model dimension is {}",
            x.len(),
            model.dim()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(EngineError::InvalidArgument("non-finite x".into()));
    }
    if !(t.is_finite() && horizon.is_finite() && t <= horizon) {
        return Err(EngineError::InvalidArgument(format!(
            "need t <= T, got t = {t}, T = {horizon}"
        )));
    }
    if mark > model.dim() {
        return Err(EngineError::InvalidArgument(format!(
            "mark {mark} outside 0..={}",
            model.dim()
        )));
    }
    if mark != 0 && t == horizon {
        return Err(EngineError::DegenerateDerivative { mark, t });
    }
    Ok(())
}

/// One realisation of the tree functional H_φ for the tree rooted at (t, x) with mark `mark`.
pub fn grow_tree(
    model: &PdeModel,
    t: f64,
    x: &[f64],
    mark: usize,
    horizon: f64,
    rng: &mut RngStream,
    budget: &TreeBudget,
) -> Result<TreeOutcome, EngineError> {
    grow(model, t, x, mark, horizon, rng, budget, None)
}

/// As [`grow_tree`], also returning every particle in processing order.
pub fn grow_tree_traced(
    model: &PdeModel,
    t: f64,
    x: &[f64],
    mark: usize,
    horizon: f64,
    rng: &mut RngStream,
    budget: &TreeBudget,
) -> Result<(TreeOutcome, Vec<ParticleRecord>), EngineError> {
    let mut trace = Vec::new();
    let out = grow(model, t, x, mark, horizon, rng, budget, Some(&mut trace))?;
    Ok((out, trace))
}

#[allow(clippy::too_many_arguments)]
fn grow(
    model: &PdeModel,
    t: f64,
    x: &[f64],
    mark: usize,
    horizon: f64,
    rng: &mut RngStream,
    budget: &TreeBudget,
    mut trace: Option<&mut Vec<ParticleRecord>>,
) -> Result<TreeOutcome, EngineError> {
    check_request(model, t, x, mark, horizon)?;
    let d = model.dim();
    let sub = Subordinator::new(model.alpha(), model.kappa())?;
    let terms = &model.nonlinearity.terms;
    let q = model.law.probs();
    let phi = &model.terminal.phi;

    let mut queue = VecDeque::new();
    queue.push_back(Particle {
        label: vec![1],
        mark,
        birth_time: t,
        birth_position: x.to_vec(),
    });
    let mut product = 1.0;
    let mut particles_total = 1usize;
    let mut leaves = 0usize;
    let mut max_gen = 1usize;
    let mut floor_hits = 0u64;
    let mut dx = vec![0.0; d];
    let mut end = vec![0.0; d];

    while let Some(p) = queue.pop_front() {
        let tau = model.lifetime.sample(rng);
        let is_leaf = p.birth_time + tau >= horizon;
        let dt = if is_leaf { horizon - p.birth_time } else { tau };
        let ds = sub.increment_into(dt, rng, &mut dx, &mut floor_hits);
        for ((e, b), v) in end.iter_mut().zip(&p.birth_position).zip(&dx) {
            *e = b + v;
        }
        let weight = if p.mark == 0 {
            1.0
        } else if ds > 0.0 {
            dx[p.mark - 1] / ds
        } else {
            return Err(EngineError::DegenerateDerivative {
                mark: p.mark,
                t: p.birth_time,
            });
        };

        let (factor, offspring) = if is_leaf {
            leaves += 1;
            let mut value = phi.eval(horizon, &end)?;
            if p.mark != 0 {
                value -= phi.eval(horizon, &p.birth_position)?;
            }
            let survival = model.lifetime.survival(dt)?;
            (value * weight / survival, None)
        } else {
            let idx = model.law.sample(rng);
            let term = &terms[idx];
            let death = p.birth_time + tau;
            let c = term.coeff.eval(death, &end)?;
            let factor = c * weight / (q[idx] * model.lifetime.density(tau));
            let n_children = term.order();
            if particles_total + n_children > budget.max_particles {
                return Err(EngineError::BudgetExceeded {
                    particles: particles_total + n_children,
                    generation: p.generation() + 1,
                });
            }
            if n_children > 0 && p.generation() + 1 > budget.max_generation {
                return Err(EngineError::BudgetExceeded {
                    particles: particles_total + n_children,
                    generation: p.generation() + 1,
                });
            }
            let mut k = 0u32;
            for (child_mark, &count) in term.l.iter().enumerate() {
                for _ in 0..count {
                    k += 1;
                    let mut label = Vec::with_capacity(p.label.len() + 1);
                    label.extend_from_slice(&p.label);
                    label.push(k);
                    queue.push_back(Particle {
                        label,
                        mark: child_mark,
                        birth_time: death,
                        birth_position: end.clone(),
                    });
                }
            }
            if n_children > 0 {
                max_gen = max_gen.max(p.generation() + 1);
            }
            particles_total += n_children;
            (factor, Some(idx))
        };
        product *= factor;
        if let Some(tr) = trace.as_deref_mut() {
            tr.push(ParticleRecord {
                particle: p,
                offspring,
                factor,
            });
        }
    }

    if !product.is_finite() {
        return Err(EngineError::NonFinite(product));
    }
    Ok(TreeOutcome {
        h_value: product,
        particles_total,
        leaves,
        max_gen,
    })
}
