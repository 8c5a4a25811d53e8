//! Seeded generation of Gaussian perturbation batches.
//!
//! Both estimators consume the same object: a center `theta` and
//! `lambda` perturbations `epsilon_i` drawn i.i.d. from `N(0, sigma^2 I)`,
//! so that the evaluated points are `alpha_i = theta + epsilon_i`.
//! Batches store the perturbations rather than the absolute points:
//! every downstream formula consumes `alpha - theta`, and storing the
//! difference avoids cancellation when `||theta|| >> sigma`.
//!
//! Generation is deterministic in `(dim, sigma, lambda, seed)`: a
//! ChaCha8 stream feeds the rand_distr ziggurat Gaussian sampler, values
//! are drawn in a fixed order, and standard draws are scaled by `sigma`
//! afterwards (so batches at different `sigma` from one seed are exact
//! scalar multiples of each other).

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::norm_sq;

/// A point in R^n under optimization.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    values: Vec<f64>,
}

impl ParamVector {
    /// Wraps a coordinate vector; it must be non-empty and finite.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::usage("parameter vector must have dimension >= 1"));
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::usage(format!(
                "parameter vector has non-finite entry {} at index {bad}",
                values[bad]
            )));
        }
        Ok(ParamVector { values })
    }

    /// The origin of R^dim.
    pub fn origin(dim: usize) -> Result<Self> {
        ParamVector::new(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }
}

impl AsRef<[f64]> for ParamVector {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}

/// Norm guard: perturbations this short are resampled because Eq-style
/// finite-difference weights divide by `||epsilon||^2`.
pub fn norm_floor(sigma: f64, dim: usize) -> f64 {
    1e-12 * sigma * (dim as f64).sqrt()
}

/// `lambda` Gaussian perturbations around a shared center.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationBatch {
    theta: ParamVector,
    sigma: f64,
    lambda: usize,
    /// Row-major `lambda x dim` storage of the epsilon_i.
    epsilons: Vec<f64>,
    seed: u64,
    resamples: u64,
}

impl PerturbationBatch {
    pub fn theta(&self) -> &ParamVector {
        &self.theta
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn dim(&self) -> usize {
        self.theta.dim()
    }

    pub fn lambda(&self) -> usize {
        self.lambda
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// How many draws were rejected by the norm floor (normally zero).
    pub fn resamples(&self) -> u64 {
        self.resamples
    }

    /// The i-th perturbation.
    pub fn epsilon(&self, i: usize) -> &[f64] {
        let n = self.dim();
        &self.epsilons[i * n..(i + 1) * n]
    }

    /// All perturbations in sample order.
    pub fn epsilons(&self) -> impl Iterator<Item = &[f64]> {
        self.epsilons.chunks_exact(self.dim())
    }

    /// The same perturbations around a different center. Both estimators
    /// in a paired run consume one epsilon stream this way.
    pub fn with_center(&self, theta: ParamVector) -> Result<Self> {
        if theta.dim() != self.dim() {
            return Err(Error::usage(format!(
                "new center has dimension {} but the batch has dimension {}",
                theta.dim(),
                self.dim()
            )));
        }
        Ok(PerturbationBatch {
            theta,
            ..self.clone()
        })
    }

    /// Builds a batch from explicit perturbations (fixtures, diagnostics).
    pub fn from_epsilons(
        theta: ParamVector,
        sigma: f64,
        epsilons: Vec<Vec<f64>>,
        seed: u64,
    ) -> Result<Self> {
        check_sigma(sigma)?;
        if epsilons.is_empty() {
            return Err(Error::usage("batch must contain at least one perturbation"));
        }
        let dim = theta.dim();
        let floor_sq = norm_floor(sigma, dim).powi(2);
        let mut flat = Vec::with_capacity(epsilons.len() * dim);
        for (i, e) in epsilons.iter().enumerate() {
            if e.len() != dim {
                return Err(Error::usage(format!(
                    "perturbation {i} has dimension {} but theta has dimension {dim}",
                    e.len()
                )));
            }
            if let Some(bad) = e.iter().position(|v| !v.is_finite()) {
                return Err(Error::usage(format!(
                    "perturbation {i} has non-finite entry at index {bad}"
                )));
            }
            if norm_sq(e) <= floor_sq {
                return Err(Error::usage(format!(
                    "perturbation {i} is shorter than the norm floor"
                )));
            }
            flat.extend_from_slice(e);
        }
        Ok(PerturbationBatch {
            lambda: epsilons.len(),
            theta,
            sigma,
            epsilons: flat,
            seed,
            resamples: 0,
        })
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !crate::error::positive_real(sigma) {
        return Err(Error::domain(format!(
            "perturbation scale sigma must be > 0, got {sigma}"
        )));
    }
    Ok(())
}

/// Draws `lambda` i.i.d. perturbations from `N(0, sigma^2 I)` around
/// `theta`, deterministically in `seed`.
///
/// A draw whose norm does not clear [`norm_floor`] is redrawn; the event
/// has negligible probability and is counted in
/// [`PerturbationBatch::resamples`].
pub fn sample_batch(
    theta: &ParamVector,
    sigma: f64,
    lambda: usize,
    seed: u64,
) -> Result<PerturbationBatch> {
    check_sigma(sigma)?;
    if lambda == 0 {
        return Err(Error::usage("population size lambda must be >= 1"));
    }
    let dim = theta.dim();
    let floor_sq = norm_floor(sigma, dim).powi(2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut epsilons = vec![0.0f64; lambda * dim];
    let mut resamples = 0u64;
    for i in 0..lambda {
        let row = &mut epsilons[i * dim..(i + 1) * dim];
        loop {
            for slot in row.iter_mut() {
                let z: f64 = rng.sample(StandardNormal);
                *slot = sigma * z;
            }
            if norm_sq(row) > floor_sq {
                break;
            }
            resamples += 1;
        }
    }
    Ok(PerturbationBatch {
        theta: theta.clone(),
        sigma,
        lambda,
        epsilons,
        seed,
        resamples,
    })
}

/// Doubles a batch with the negation of every perturbation:
/// `[e_1, -e_1, e_2, -e_2, ...]`, making `sum(epsilon) = 0` exactly.
///
/// Diagnostic tool: mirroring annihilates the `R(theta)`-proportional
/// term that separates the central sum from the ES estimate.
pub fn mirror_batch(batch: &PerturbationBatch) -> PerturbationBatch {
    let dim = batch.dim();
    let mut epsilons = Vec::with_capacity(2 * batch.lambda * dim);
    for e in batch.epsilons() {
        epsilons.extend_from_slice(e);
        epsilons.extend(e.iter().map(|&x| -x));
    }
    PerturbationBatch {
        theta: batch.theta.clone(),
        sigma: batch.sigma,
        lambda: 2 * batch.lambda,
        epsilons,
        seed: batch.seed,
        resamples: batch.resamples,
    }
}
