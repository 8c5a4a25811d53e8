//! The four gradient expressions under study and their exact difference.
//!
//! For a batch of perturbations `epsilon_i` around `theta` and an
//! objective `R`, with `alpha_i = theta + epsilon_i`:
//!
//! * finite differences: `(1/lambda) sum_i epsilon_i (R(alpha_i) - R(theta)) / ||epsilon_i||^2`
//! * evolution strategies: `(1/lambda) sum_i epsilon_i R(alpha_i)` —
//!   deliberately carrying no `1/sigma^2` factor; the widely used
//!   normalized variant is available behind the `normalize` flag
//! * scaled finite differences: `mu^2` times the FD estimate, where
//!   `mu = E||N(0, sigma^2 I)||`
//! * central sum: `(1/lambda) sum_i epsilon_i (R(alpha_i) - R(theta))`
//!
//! The central sum and the ES estimate differ termwise by
//! `-R(theta) (1/lambda) sum_i epsilon_i`; [`gradient_difference`]
//! computes the difference both ways and cross-checks them.
//!
//! Objective values are evaluated once per sample per
//! [`BatchEvaluation`] and shared by every estimator derived from it,
//! and all reductions run in ascending sample order with compensated
//! summation, so results are bit-stable regardless of how callers
//! schedule the work.

use crate::error::{Error, Result, SampleIndex};
use crate::kahan::KahanVec;
use crate::linalg::norm_sq;
use crate::objectives::Objective;
use crate::sampling::PerturbationBatch;
use crate::specfun::chi_mean;

/// Which expression produced a [`GradientEstimate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorKind {
    Fd,
    Es,
    ScaledFd,
    CentralSum,
}

impl EstimatorKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EstimatorKind::Fd => "fd",
            EstimatorKind::Es => "es",
            EstimatorKind::ScaledFd => "scaled_fd",
            EstimatorKind::CentralSum => "central_sum",
        }
    }
}

/// An estimated gradient with the provenance needed to reproduce it.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientEstimate {
    pub vector: Vec<f64>,
    pub kind: EstimatorKind,
    pub lambda: usize,
    pub sigma: f64,
    pub seed: u64,
    /// The recorded `R(theta)`, present for the kinds that consume it.
    pub r_theta: Option<f64>,
}

/// A batch with its objective values: `R(theta)` once, `R(alpha_i)` once
/// per sample. Every estimator kind drawn from one evaluation reuses the
/// same values, which keeps the algebraic identities between them exact.
#[derive(Debug)]
pub struct BatchEvaluation<'a> {
    batch: &'a PerturbationBatch,
    r_theta: f64,
    values: Vec<f64>,
}

impl<'a> BatchEvaluation<'a> {
    pub fn new(batch: &'a PerturbationBatch, objective: &Objective) -> Result<Self> {
        if objective.dim() != batch.dim() {
            return Err(Error::usage(format!(
                "objective dimension {} does not match batch dimension {}",
                objective.dim(),
                batch.dim()
            )));
        }
        let theta = batch.theta().as_slice();
        let r_theta = objective.evaluate(theta);
        if !r_theta.is_finite() {
            return Err(Error::NonFiniteEvaluation {
                objective: objective.name().to_string(),
                index: SampleIndex::Center,
                value: r_theta,
            });
        }
        let mut point = vec![0.0; batch.dim()];
        let mut values = Vec::with_capacity(batch.lambda());
        for (i, eps) in batch.epsilons().enumerate() {
            for (p, (&t, &e)) in point.iter_mut().zip(theta.iter().zip(eps)) {
                *p = t + e;
            }
            let v = objective.evaluate(&point);
            if !v.is_finite() {
                return Err(Error::NonFiniteEvaluation {
                    objective: objective.name().to_string(),
                    index: SampleIndex::Perturbed(i),
                    value: v,
                });
            }
            values.push(v);
        }
        Ok(BatchEvaluation {
            batch,
            r_theta,
            values,
        })
    }

    pub fn r_theta(&self) -> f64 {
        self.r_theta
    }

    pub fn batch(&self) -> &PerturbationBatch {
        self.batch
    }

    fn estimate(&self, kind: EstimatorKind, vector: Vec<f64>, keeps_center: bool) -> GradientEstimate {
        GradientEstimate {
            vector,
            kind,
            lambda: self.batch.lambda(),
            sigma: self.batch.sigma(),
            seed: self.batch.seed(),
            r_theta: keeps_center.then_some(self.r_theta),
        }
    }

    /// The finite-difference estimate.
    pub fn fd(&self) -> GradientEstimate {
        let inv_lambda = 1.0 / self.batch.lambda() as f64;
        let mut acc = KahanVec::zeros(self.batch.dim());
        for (eps, &v) in self.batch.epsilons().zip(&self.values) {
            acc.add_scaled(eps, (v - self.r_theta) / norm_sq(eps));
        }
        self.estimate(EstimatorKind::Fd, acc.into_scaled_vec(inv_lambda), true)
    }

    /// The evolution-strategies estimate; `normalize` applies the
    /// conventional `1/sigma^2` factor on top of the raw sum.
    pub fn es(&self, normalize: bool) -> GradientEstimate {
        let mut factor = 1.0 / self.batch.lambda() as f64;
        if normalize {
            factor /= self.batch.sigma() * self.batch.sigma();
        }
        let mut acc = KahanVec::zeros(self.batch.dim());
        for (eps, &v) in self.batch.epsilons().zip(&self.values) {
            acc.add_scaled(eps, v);
        }
        self.estimate(EstimatorKind::Es, acc.into_scaled_vec(factor), false)
    }

    /// The FD estimate rescaled by `mu^2 = E[||N(0, sigma^2 I)||]^2`.
    pub fn scaled_fd(&self) -> GradientEstimate {
        // Batch construction guarantees n >= 1 and sigma > 0.
        let mu = chi_mean(self.batch.dim() as u64, self.batch.sigma())
            .expect("batch invariants give chi_mean a valid domain");
        let mut est = self.fd();
        for x in &mut est.vector {
            *x *= mu * mu;
        }
        est.kind = EstimatorKind::ScaledFd;
        est
    }

    /// The unnormalized central sum.
    pub fn central_sum(&self) -> GradientEstimate {
        let inv_lambda = 1.0 / self.batch.lambda() as f64;
        let mut acc = KahanVec::zeros(self.batch.dim());
        for (eps, &v) in self.batch.epsilons().zip(&self.values) {
            acc.add_scaled(eps, v - self.r_theta);
        }
        self.estimate(
            EstimatorKind::CentralSum,
            acc.into_scaled_vec(inv_lambda),
            true,
        )
    }

    /// `central_sum - es`, computed both by subtracting the two
    /// estimates and by the closed form `-R(theta) (1/lambda) sum_i
    /// epsilon_i`. The two routes must agree to 1e-10 relative to the
    /// difference's own scale (1e-14 absolute when `R(theta) = 0`,
    /// where both are exactly zero); the closed form is returned.
    pub fn difference(&self) -> Result<Vec<f64>> {
        let lambda = self.batch.lambda() as f64;
        let dim = self.batch.dim();

        let mut eps_sum = KahanVec::zeros(dim);
        for eps in self.batch.epsilons() {
            eps_sum.add_scaled(eps, 1.0);
        }
        let closed: Vec<f64> = eps_sum
            .into_vec()
            .into_iter()
            .map(|s| -self.r_theta * s / lambda)
            .collect();

        let central = self.central_sum();
        let es = self.es(false);
        let scale = closed
            .iter()
            .chain(&central.vector)
            .chain(&es.vector)
            .fold(0.0f64, |m, &x| m.max(x.abs()));
        let tolerance = 1e-14f64.max(1e-10 * scale);
        let routes = central.vector.iter().zip(&es.vector).zip(&closed);
        for (i, ((&c, &e), &cl)) in routes.enumerate() {
            let subtracted = c - e;
            if (subtracted - cl).abs() > tolerance {
                return Err(Error::Inconsistency(format!(
                    "difference routes disagree at coordinate {i}: \
                     subtraction gives {subtracted}, closed form gives {cl} \
                     (tolerance {tolerance})"
                )));
            }
        }
        Ok(closed)
    }
}

/// Finite-difference gradient of `objective` on `batch`.
pub fn fd_gradient(batch: &PerturbationBatch, objective: &Objective) -> Result<GradientEstimate> {
    Ok(BatchEvaluation::new(batch, objective)?.fd())
}

/// Evolution-strategies gradient (raw sum, no `1/sigma^2`).
pub fn es_gradient(batch: &PerturbationBatch, objective: &Objective) -> Result<GradientEstimate> {
    Ok(BatchEvaluation::new(batch, objective)?.es(false))
}

/// `mu^2`-scaled finite-difference gradient.
pub fn scaled_fd_gradient(
    batch: &PerturbationBatch,
    objective: &Objective,
) -> Result<GradientEstimate> {
    Ok(BatchEvaluation::new(batch, objective)?.scaled_fd())
}

/// Central sum `(1/lambda) sum_i epsilon_i (R(alpha_i) - R(theta))`.
pub fn central_sum(batch: &PerturbationBatch, objective: &Objective) -> Result<GradientEstimate> {
    Ok(BatchEvaluation::new(batch, objective)?.central_sum())
}

/// The exact difference `central_sum - es`, cross-checked against its
/// closed form (see [`BatchEvaluation::difference`]).
pub fn gradient_difference(
    batch: &PerturbationBatch,
    objective: &Objective,
) -> Result<Vec<f64>> {
    BatchEvaluation::new(batch, objective)?.difference()
}
