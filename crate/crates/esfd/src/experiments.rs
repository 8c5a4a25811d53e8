//! Monte Carlo sweeps over dimension, scale and population size.
//!
//! Every experiment is a pure function of its [`SweepPlan`]: trial seeds
//! are derived from the base seed and the grid coordinates, trials run
//! in parallel but are collected in trial order, and reductions are
//! compensated, so rerunning a plan (at any thread count) reproduces the
//! records bit for bit.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimators::BatchEvaluation;
use crate::kahan::{KahanSum, KahanVec};
use crate::linalg::{cosine, dot, norm, sub};
use crate::objectives::{make_objective, Objective, ObjectiveSpec};
use crate::sampling::{sample_batch, ParamVector};
use crate::specfun::{chi_mean, chi_variance, gamma_ratio_asymptotic, gamma_ratio_exact, ChiStats};
use crate::stats::{derive_seed, log_log_slope, median, SampleMoments};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Experiment identifiers (also the CLI subcommand names).
pub mod id {
    pub const NORM_STATS: &str = "norm-stats";
    pub const GAMMA_CHECK: &str = "gamma-check";
    pub const GRAD_DIFF: &str = "grad-diff";
    pub const CONVERGE_DIM: &str = "converge-dim";
    pub const SHELL: &str = "shell";
    pub const OPTIMIZE: &str = "optimize";
}

/// Declared metric schema per experiment; record constructors enforce it.
pub fn metric_schema(experiment: &str) -> Option<&'static [&'static str]> {
    match experiment {
        id::NORM_STATS => Some(&[
            "emp_mean",
            "emp_var",
            "exact_mean",
            "exact_var",
            "asym_mean",
            "ratio_s_over_mu",
            "emp_ratio",
        ]),
        id::GAMMA_CHECK => Some(&[
            "ratio_exact",
            "ratio_asym",
            "rel_err",
            "chi_mean_exact",
            "chi_variance_exact",
        ]),
        id::GRAD_DIFF => Some(&[
            "mean_norm_D",
            "per_coord_var_D",
            "predicted_var",
            "predicted_norm",
            "fit_slope",
        ]),
        id::CONVERGE_DIM => Some(&["rel_err_scaling", "cosine_es_fd", "cosine_fd_true"]),
        id::SHELL => Some(&[
            "emp_ratio_var",
            "exact_ratio_var",
            "ratio_var_se",
            "max_abs_coord_mean",
            "mean_abs_pairwise_cos",
        ]),
        id::OPTIMIZE => Some(&[
            "iteration",
            "f_es",
            "f_fd",
            "traj_dist",
            "traj_scale",
            "normalize_es",
            "diverged_at",
        ]),
        _ => None,
    }
}

/// Where the sweep places the center theta.
#[derive(Debug, Clone, PartialEq)]
pub enum ThetaSpec {
    Origin,
    /// Uniform draw from the ball of the given radius, seeded.
    RandomBall { radius: f64 },
    /// A fixed center (fixtures and tests).
    Explicit(Vec<f64>),
}

impl ThetaSpec {
    pub fn materialize(&self, dim: usize, seed: u64) -> Result<ParamVector> {
        match self {
            ThetaSpec::Origin => ParamVector::origin(dim),
            ThetaSpec::RandomBall { radius } => {
                if !crate::error::positive_real(*radius) {
                    return Err(Error::usage(format!(
                        "ball radius must be > 0, got {radius}"
                    )));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
                let n = norm(&v);
                // Radius scaled by U^(1/dim) makes the draw uniform in
                // the ball, not just on its surface.
                let u: f64 = rng.gen_range(0.0..1.0);
                let r = radius * u.powf(1.0 / dim as f64) / n;
                ParamVector::new(v.into_iter().map(|x| r * x).collect())
            }
            ThetaSpec::Explicit(values) => {
                if values.len() != dim {
                    return Err(Error::usage(format!(
                        "explicit theta has dimension {} but the sweep needs {dim}",
                        values.len()
                    )));
                }
                ParamVector::new(values.clone())
            }
        }
    }
}

/// Inputs of one sweep: the grids, the trial count, the seed policy and
/// the objective/center placement where applicable.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPlan {
    pub experiment: String,
    pub dims: Vec<usize>,
    pub sigmas: Vec<f64>,
    pub lambdas: Vec<usize>,
    pub trials: usize,
    pub base_seed: u64,
    pub objective: Option<ObjectiveSpec>,
    pub theta: ThetaSpec,
    /// Recorded and honored by the paired-optimization experiment.
    pub normalize_es: bool,
    /// Gradient step for the paired-optimization experiment.
    pub step_size: f64,
    /// Iteration count for the paired-optimization experiment.
    pub iterations: usize,
}

impl SweepPlan {
    pub fn new(experiment: &str) -> Self {
        SweepPlan {
            experiment: experiment.to_string(),
            dims: vec![100],
            sigmas: vec![1.0],
            lambdas: vec![100],
            trials: 100,
            base_seed: 42,
            objective: Some(ObjectiveSpec::new("sphere", 100)),
            theta: ThetaSpec::RandomBall { radius: 1.0 },
            normalize_es: false,
            step_size: 0.05,
            iterations: 2000,
        }
    }

    fn validate_common(&self) -> Result<()> {
        if self.dims.is_empty() || self.sigmas.is_empty() || self.lambdas.is_empty() {
            return Err(Error::usage("every grid needs at least one value"));
        }
        if self.dims.contains(&0) || self.lambdas.contains(&0) {
            return Err(Error::usage("grid values must be positive"));
        }
        if !self.sigmas.iter().all(|&s| crate::error::positive_real(s)) {
            return Err(Error::usage("sigma grid values must be positive reals"));
        }
        if self.trials == 0 {
            return Err(Error::usage("trials must be >= 1"));
        }
        Ok(())
    }

    fn expect_experiment(&self, want: &str) -> Result<()> {
        if self.experiment != want {
            return Err(Error::usage(format!(
                "plan is for experiment '{}', not '{want}'",
                self.experiment
            )));
        }
        self.validate_common()
    }

    fn single<T: Copy>(values: &[T], what: &str) -> Result<T> {
        if values.len() != 1 {
            return Err(Error::usage(format!(
                "this experiment uses a single {what}, got a grid of {}",
                values.len()
            )));
        }
        Ok(values[0])
    }

    fn objective_at(&self, dim: usize) -> Result<Objective> {
        let spec = self
            .objective
            .as_ref()
            .ok_or_else(|| Error::usage("this experiment needs an objective"))?;
        let mut spec = spec.clone();
        spec.dim = dim;
        make_objective(&spec)
    }
}

/// One output row: the grid coordinates that produced it and its metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRecord {
    pub experiment: String,
    pub n: usize,
    pub sigma: f64,
    pub lambda: usize,
    pub trials: usize,
    /// Seed that reproduces this row: the plan seed for aggregate rows,
    /// the derived trial seed for per-trial rows.
    pub seed: u64,
    pub metrics: Vec<(String, f64)>,
}

impl ExperimentRecord {
    pub fn new(
        experiment: &str,
        n: usize,
        sigma: f64,
        lambda: usize,
        trials: usize,
        seed: u64,
        metrics: Vec<(&'static str, f64)>,
    ) -> Result<Self> {
        let schema = metric_schema(experiment)
            .ok_or_else(|| Error::usage(format!("unknown experiment '{experiment}'")))?;
        let names: Vec<&str> = metrics.iter().map(|(k, _)| *k).collect();
        if names != schema {
            return Err(Error::usage(format!(
                "metrics {names:?} do not match the '{experiment}' schema {schema:?}"
            )));
        }
        Ok(ExperimentRecord {
            experiment: experiment.to_string(),
            n,
            sigma,
            lambda,
            trials,
            seed,
            metrics: metrics
                .into_iter()
                .map(|(k, v)| (k.to_string(), v))
                .collect(),
        })
    }

    pub fn metric(&self, name: &str) -> Option<f64> {
        self.metrics
            .iter()
            .find(|(k, _)| k == name)
            .map(|&(_, v)| v)
    }
}

/// Stream tag separating theta draws from batch draws under one base seed.
const THETA_STREAM: u64 = 0x7468;

fn trial_seed(base: u64, n: usize, sigma: f64, lambda: usize, trial: usize) -> u64 {
    derive_seed(
        base,
        &[n as u64, sigma.to_bits(), lambda as u64, trial as u64],
    )
}

/// Measures how tightly `||epsilon||` concentrates around its mean on an
/// `(n, sigma)` grid, against the exact sigma-chi statistics.
pub fn norm_concentration_experiment(plan: &SweepPlan) -> Result<Vec<ExperimentRecord>> {
    plan.expect_experiment(id::NORM_STATS)?;
    let lambda = SweepPlan::single(&plan.lambdas, "lambda")?;
    let mut records = Vec::new();
    for &n in &plan.dims {
        for &sigma in &plan.sigmas {
            let theta = ParamVector::origin(n)?;
            let norms_per_trial: Vec<Vec<f64>> = (0..plan.trials)
                .into_par_iter()
                .map(|t| {
                    let seed = trial_seed(plan.base_seed, n, sigma, lambda, t);
                    let batch = sample_batch(&theta, sigma, lambda, seed)?;
                    Ok(batch.epsilons().map(norm).collect())
                })
                .collect::<Result<_>>()?;
            let norms: Vec<f64> = norms_per_trial.into_iter().flatten().collect();
            let moments = SampleMoments::from_values(&norms);
            let exact = ChiStats::new(n as u64, sigma)?;
            records.push(ExperimentRecord::new(
                id::NORM_STATS,
                n,
                sigma,
                lambda,
                plan.trials,
                plan.base_seed,
                vec![
                    ("emp_mean", moments.mean),
                    ("emp_var", moments.variance),
                    ("exact_mean", exact.mean),
                    ("exact_var", exact.variance),
                    ("asym_mean", exact.mean_asymptotic),
                    ("ratio_s_over_mu", exact.variance.sqrt() / exact.mean),
                    ("emp_ratio", moments.variance.sqrt() / moments.mean),
                ],
            )?);
        }
    }
    Ok(records)
}

/// Tabulates the exact Gamma ratio `Gamma(z+1/2)/Gamma(z)` at `z = n/2`
/// against its first-order expansion, plus the chi statistics, over the
/// dimension grid.
pub fn gamma_check_experiment(plan: &SweepPlan) -> Result<Vec<ExperimentRecord>> {
    plan.expect_experiment(id::GAMMA_CHECK)?;
    let lambda = SweepPlan::single(&plan.lambdas, "lambda")?;
    let mut records = Vec::new();
    for &n in &plan.dims {
        for &sigma in &plan.sigmas {
            let z = n as f64 / 2.0;
            let exact = gamma_ratio_exact(z + 0.5, z)?;
            let asym = gamma_ratio_asymptotic(z, 0.5, 0.0)?;
            records.push(ExperimentRecord::new(
                id::GAMMA_CHECK,
                n,
                sigma,
                lambda,
                plan.trials,
                plan.base_seed,
                vec![
                    ("ratio_exact", exact),
                    ("ratio_asym", asym),
                    ("rel_err", (asym - exact).abs() / exact),
                    ("chi_mean_exact", chi_mean(n as u64, sigma)?),
                    ("chi_variance_exact", chi_variance(n as u64, sigma)?),
                ],
            )?);
        }
    }
    Ok(records)
}

/// Measures the difference `D = central_sum - es` over a lambda grid at
/// fixed `(n, sigma, theta)` and fits its `1/sqrt(lambda)` decay.
pub fn difference_scaling_experiment(plan: &SweepPlan) -> Result<Vec<ExperimentRecord>> {
    plan.expect_experiment(id::GRAD_DIFF)?;
    let n = SweepPlan::single(&plan.dims, "dimension")?;
    let sigma = SweepPlan::single(&plan.sigmas, "sigma")?;
    let objective = plan.objective_at(n)?;
    let theta = plan.theta.materialize(
        n,
        derive_seed(plan.base_seed, &[THETA_STREAM, n as u64, sigma.to_bits()]),
    )?;
    let r_theta = objective.evaluate(theta.as_slice());
    if r_theta == 0.0 {
        return Err(Error::usage(
            "R(theta) = 0 makes the difference identically zero; \
             pick a center with R(theta) != 0 (the origin of the sphere \
             objective is the trivial case)",
        ));
    }

    let mut per_lambda: Vec<(usize, Vec<Vec<f64>>)> = Vec::new();
    for &lambda in &plan.lambdas {
        let diffs: Vec<Vec<f64>> = (0..plan.trials)
            .into_par_iter()
            .map(|t| {
                let seed = trial_seed(plan.base_seed, n, sigma, lambda, t);
                let batch = sample_batch(&theta, sigma, lambda, seed)?;
                BatchEvaluation::new(&batch, &objective)?.difference()
            })
            .collect::<Result<_>>()?;
        per_lambda.push((lambda, diffs));
    }

    let mut mean_norms = Vec::new();
    let mut rows = Vec::new();
    for (lambda, diffs) in &per_lambda {
        let mut norm_acc = KahanSum::new();
        for d in diffs {
            norm_acc.add(norm(d));
        }
        let mean_norm = norm_acc.value() / plan.trials as f64;
        mean_norms.push(mean_norm);

        // Pooled per-coordinate variance across trials.
        let mut pooled = KahanSum::new();
        for i in 0..n {
            let coord: Vec<f64> = diffs.iter().map(|d| d[i]).collect();
            pooled.add(SampleMoments::from_values(&coord).variance);
        }
        let per_coord_var = pooled.value() / n as f64;

        rows.push((
            *lambda,
            mean_norm,
            per_coord_var,
            r_theta * r_theta * sigma * sigma / *lambda as f64,
            r_theta.abs() * sigma * (n as f64 / *lambda as f64).sqrt(),
        ));
    }

    let lambdas_f: Vec<f64> = plan.lambdas.iter().map(|&l| l as f64).collect();
    let fit_slope = if lambdas_f.len() >= 2 {
        log_log_slope(&lambdas_f, &mean_norms)
    } else {
        f64::NAN
    };

    rows.into_iter()
        .map(|(lambda, mean_norm, var, pred_var, pred_norm)| {
            ExperimentRecord::new(
                id::GRAD_DIFF,
                n,
                sigma,
                lambda,
                plan.trials,
                plan.base_seed,
                vec![
                    ("mean_norm_D", mean_norm),
                    ("per_coord_var_D", var),
                    ("predicted_var", pred_var),
                    ("predicted_norm", pred_norm),
                    ("fit_slope", fit_slope),
                ],
            )
        })
        .collect()
}

/// Per-trial statistics feeding one dimension-convergence record.
struct ConvergenceTrial {
    rel_err_scaling: f64,
    cosine_es_fd: f64,
    cosine_fd_true: f64,
}

/// Compares the mu^2-scaled FD estimate against the central sum (and the
/// estimator directions against each other and against the analytic
/// gradient) as the dimension grows.
pub fn dimension_convergence_experiment(plan: &SweepPlan) -> Result<Vec<ExperimentRecord>> {
    plan.expect_experiment(id::CONVERGE_DIM)?;
    let sigma = SweepPlan::single(&plan.sigmas, "sigma")?;
    let lambda = SweepPlan::single(&plan.lambdas, "lambda")?;
    let mut records = Vec::new();
    for &n in &plan.dims {
        let objective = plan.objective_at(n)?;
        let trials: Vec<ConvergenceTrial> = (0..plan.trials)
            .into_par_iter()
            .map(|t| {
                let theta = plan.theta.materialize(
                    n,
                    derive_seed(
                        plan.base_seed,
                        &[THETA_STREAM, n as u64, sigma.to_bits(), t as u64],
                    ),
                )?;
                let seed = trial_seed(plan.base_seed, n, sigma, lambda, t);
                let batch = sample_batch(&theta, sigma, lambda, seed)?;
                let eval = BatchEvaluation::new(&batch, &objective)?;
                let central = eval.central_sum();
                let central_norm = norm(&central.vector);
                if central_norm == 0.0 {
                    return Err(Error::usage(
                        "central sum has zero norm (constant objective?); \
                         the scaling comparison is undefined",
                    ));
                }
                let scaled = eval.scaled_fd();
                let fd = eval.fd();
                let es = eval.es(false);
                let grad = objective
                    .analytic_gradient(theta.as_slice())
                    .unwrap_or_else(|| vec![f64::NAN; n]);
                Ok(ConvergenceTrial {
                    rel_err_scaling: norm(&sub(&scaled.vector, &central.vector)) / central_norm,
                    cosine_es_fd: cosine(&es.vector, &fd.vector),
                    cosine_fd_true: cosine(&fd.vector, &grad),
                })
            })
            .collect::<Result<_>>()?;
        let rel: Vec<f64> = trials.iter().map(|t| t.rel_err_scaling).collect();
        let ces: Vec<f64> = trials.iter().map(|t| t.cosine_es_fd).collect();
        let ctr: Vec<f64> = trials.iter().map(|t| t.cosine_fd_true).collect();
        records.push(ExperimentRecord::new(
            id::CONVERGE_DIM,
            n,
            sigma,
            lambda,
            plan.trials,
            plan.base_seed,
            vec![
                ("rel_err_scaling", median(&rel)),
                ("cosine_es_fd", median(&ces)),
                ("cosine_fd_true", median(&ctr)),
            ],
        )?);
    }
    Ok(records)
}

/// Per-trial reductions feeding one shell record.
struct ShellTrial {
    norms: Vec<f64>,
    coord_sums: Vec<f64>,
    cos_abs: Vec<f64>,
}

/// Probes the sphere-shell picture: normalized norms concentrate and
/// normalized directions are isotropic and mutually near-orthogonal.
pub fn sphere_shell_experiment(plan: &SweepPlan) -> Result<Vec<ExperimentRecord>> {
    plan.expect_experiment(id::SHELL)?;
    let sigma = SweepPlan::single(&plan.sigmas, "sigma")?;
    let lambda = SweepPlan::single(&plan.lambdas, "lambda")?;
    let mut records = Vec::new();
    for &n in &plan.dims {
        let theta = ParamVector::origin(n)?;
        let mu = chi_mean(n as u64, sigma)?;
        let trials: Vec<ShellTrial> = (0..plan.trials)
            .into_par_iter()
            .map(|t| {
                let seed = trial_seed(plan.base_seed, n, sigma, lambda, t);
                let batch = sample_batch(&theta, sigma, lambda, seed)?;
                let mut norms = Vec::with_capacity(lambda);
                let mut coord_sums = KahanVec::zeros(n);
                let mut units: Vec<Vec<f64>> = Vec::with_capacity(lambda);
                for eps in batch.epsilons() {
                    let r = norm(eps);
                    norms.push(r / mu);
                    let unit: Vec<f64> = eps.iter().map(|&x| x / r).collect();
                    coord_sums.add_scaled(&unit, 1.0);
                    units.push(unit);
                }
                // Disjoint consecutive pairs keep the cosines independent.
                let cos_abs = units
                    .chunks_exact(2)
                    .map(|pair| dot(&pair[0], &pair[1]).abs())
                    .collect();
                Ok(ShellTrial {
                    norms,
                    coord_sums: coord_sums.into_vec(),
                    cos_abs,
                })
            })
            .collect::<Result<_>>()?;

        let ratios: Vec<f64> = trials.iter().flat_map(|t| t.norms.iter().copied()).collect();
        let moments = SampleMoments::from_values(&ratios);
        let samples = ratios.len() as f64;

        let mut coord_total = KahanVec::zeros(n);
        for t in &trials {
            coord_total.add_scaled(&t.coord_sums, 1.0);
        }
        let max_abs_coord_mean = coord_total
            .into_scaled_vec(1.0 / samples)
            .into_iter()
            .fold(0.0f64, |m, x| m.max(x.abs()));

        let cos_values: Vec<f64> = trials
            .iter()
            .flat_map(|t| t.cos_abs.iter().copied())
            .collect();
        let mean_abs_cos = KahanSum::sum_iter(cos_values.iter().copied()) / cos_values.len() as f64;

        let exact_ratio_var =
            chi_variance(n as u64, sigma)? / (mu * mu);
        records.push(ExperimentRecord::new(
            id::SHELL,
            n,
            sigma,
            lambda,
            plan.trials,
            plan.base_seed,
            vec![
                ("emp_ratio_var", moments.variance),
                ("exact_ratio_var", exact_ratio_var),
                ("ratio_var_se", moments.variance_standard_error()),
                ("max_abs_coord_mean", max_abs_coord_mean),
                ("mean_abs_pairwise_cos", mean_abs_cos),
            ],
        )?);
    }
    Ok(records)
}

/// One gradient-descent trajectory with divergence bookkeeping.
struct Trajectory {
    theta: Vec<f64>,
    diverged_at: Option<usize>,
}

impl Trajectory {
    fn new(theta0: &ParamVector) -> Self {
        Trajectory {
            theta: theta0.as_slice().to_vec(),
            diverged_at: None,
        }
    }

    fn alive(&self) -> bool {
        self.diverged_at.is_none()
    }

    fn apply_step(&mut self, gradient: &[f64], step: f64, iteration: usize) {
        for (x, g) in self.theta.iter_mut().zip(gradient) {
            *x -= step * g;
        }
        if self.theta.iter().any(|x| !x.is_finite()) {
            self.diverged_at = Some(iteration);
        }
    }

    fn value(&self, objective: &Objective) -> f64 {
        if self.alive() {
            objective.evaluate(&self.theta)
        } else {
            f64::INFINITY
        }
    }
}

/// Runs gradient descent with the ES estimate (normalized by `1/sigma^2`
/// so its scale matches a plain gradient) and with the FD estimate, from
/// one center with one shared perturbation stream, and records how far
/// the two trajectories drift apart.
///
/// A non-finite iterate or objective value marks the run as failed at
/// that iteration; the sibling trajectory keeps running.
pub fn paired_optimization_experiment(plan: &SweepPlan) -> Result<Vec<ExperimentRecord>> {
    plan.expect_experiment(id::OPTIMIZE)?;
    let sigma = SweepPlan::single(&plan.sigmas, "sigma")?;
    let lambda = SweepPlan::single(&plan.lambdas, "lambda")?;
    if !crate::error::positive_real(plan.step_size) {
        return Err(Error::usage("step size must be > 0"));
    }
    if plan.iterations == 0 {
        return Err(Error::usage("iteration count must be >= 1"));
    }

    let mut records = Vec::new();
    for &n in &plan.dims {
        let objective = plan.objective_at(n)?;
        let per_trial: Vec<Vec<ExperimentRecord>> = (0..plan.trials)
            .into_par_iter()
            .map(|t| {
                run_paired_trial(plan, &objective, n, sigma, lambda, t)
            })
            .collect::<Result<_>>()?;
        records.extend(per_trial.into_iter().flatten());
    }
    Ok(records)
}

fn run_paired_trial(
    plan: &SweepPlan,
    objective: &Objective,
    n: usize,
    sigma: f64,
    lambda: usize,
    trial: usize,
) -> Result<Vec<ExperimentRecord>> {
    let run_seed = trial_seed(plan.base_seed, n, sigma, lambda, trial);
    let theta0 = plan.theta.materialize(
        n,
        derive_seed(
            plan.base_seed,
            &[THETA_STREAM, n as u64, sigma.to_bits(), trial as u64],
        ),
    )?;
    let origin = ParamVector::origin(n)?;
    let mut es = Trajectory::new(&theta0);
    let mut fd = Trajectory::new(&theta0);

    let total = plan.iterations;
    let checkpoint_every = (total / 10).max(1);
    let mut records = Vec::new();

    // Checkpoint at iteration 0 records f(theta0) for both methods.
    records.push(ExperimentRecord::new(
        id::OPTIMIZE,
        n,
        sigma,
        lambda,
        plan.trials,
        run_seed,
        vec![
            ("iteration", 0.0),
            ("f_es", es.value(objective)),
            ("f_fd", fd.value(objective)),
            ("traj_dist", 0.0),
            ("traj_scale", 0.0),
            ("normalize_es", 1.0),
            ("diverged_at", -1.0),
        ],
    )?);

    for k in 1..=total {
        let batch_seed = derive_seed(run_seed, &[k as u64]);
        // One perturbation stream per iteration, shared by both methods.
        let shared = sample_batch(&origin, sigma, lambda, batch_seed)?;

        if fd.alive() {
            let theta = ParamVector::new(fd.theta.clone())?;
            match BatchEvaluation::new(&shared.with_center(theta)?, objective) {
                Ok(eval) => fd.apply_step(&eval.fd().vector, plan.step_size, k),
                Err(Error::NonFiniteEvaluation { .. }) => fd.diverged_at = Some(k),
                Err(e) => return Err(e),
            }
        }
        if es.alive() {
            let theta = ParamVector::new(es.theta.clone())?;
            match BatchEvaluation::new(&shared.with_center(theta)?, objective) {
                Ok(eval) => es.apply_step(&eval.es(true).vector, plan.step_size, k),
                Err(Error::NonFiniteEvaluation { .. }) => es.diverged_at = Some(k),
                Err(e) => return Err(e),
            }
        }

        if k % checkpoint_every == 0 || k == total {
            let both_alive = es.alive() && fd.alive();
            let traj_dist = if both_alive {
                norm(&sub(&es.theta, &fd.theta))
            } else {
                f64::INFINITY
            };
            let traj_scale = if es.alive() {
                norm(&sub(&es.theta, theta0.as_slice()))
            } else {
                f64::INFINITY
            };
            let diverged_at = match (es.diverged_at, fd.diverged_at) {
                (None, None) => -1.0,
                (Some(a), None) => a as f64,
                (None, Some(b)) => b as f64,
                (Some(a), Some(b)) => a.min(b) as f64,
            };
            records.push(ExperimentRecord::new(
                id::OPTIMIZE,
                n,
                sigma,
                lambda,
                plan.trials,
                run_seed,
                vec![
                    ("iteration", k as f64),
                    ("f_es", es.value(objective)),
                    ("f_fd", fd.value(objective)),
                    ("traj_dist", traj_dist),
                    ("traj_scale", traj_scale),
                    ("normalize_es", 1.0),
                    ("diverged_at", diverged_at),
                ],
            )?);
        }
    }
    Ok(records)
}

/// Dispatches a plan to its experiment by identifier.
pub fn run_experiment(plan: &SweepPlan) -> Result<Vec<ExperimentRecord>> {
    match plan.experiment.as_str() {
        id::NORM_STATS => norm_concentration_experiment(plan),
        id::GAMMA_CHECK => gamma_check_experiment(plan),
        id::GRAD_DIFF => difference_scaling_experiment(plan),
        id::CONVERGE_DIM => dimension_convergence_experiment(plan),
        id::SHELL => sphere_shell_experiment(plan),
        id::OPTIMIZE => paired_optimization_experiment(plan),
        other => Err(Error::usage(format!("unknown experiment '{other}'"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_plan(experiment: &str) -> SweepPlan {
        let mut plan = SweepPlan::new(experiment);
        plan.trials = 20;
        plan.lambdas = vec![50];
        plan.dims = vec![10];
        plan
    }

    #[test]
    fn records_enforce_their_schema() {
        let err = ExperimentRecord::new(
            id::NORM_STATS,
            10,
            1.0,
            100,
            5,
            42,
            vec![("emp_mean", 1.0)],
        )
        .unwrap_err();
        assert!(matches!(err, Error::Usage(_)));
    }

    #[test]
    fn experiments_are_pure_functions_of_their_plan() {
        let plan = small_plan(id::NORM_STATS);
        let a = norm_concentration_experiment(&plan).unwrap();
        let b = norm_concentration_experiment(&plan).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn norm_concentration_matches_chi_statistics_at_n1() {
        let mut plan = SweepPlan::new(id::NORM_STATS);
        plan.dims = vec![1];
        plan.sigmas = vec![1.0];
        plan.lambdas = vec![1000];
        plan.trials = 100; // 1e5 draws
        let rec = &norm_concentration_experiment(&plan).unwrap()[0];
        let emp = rec.metric("emp_mean").unwrap();
        let exact = rec.metric("exact_mean").unwrap();
        assert!((exact - (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-12);
        let se = (rec.metric("exact_var").unwrap() / 1e5).sqrt();
        assert!((emp - exact).abs() < 3.0 * se, "emp={emp} exact={exact}");
    }

    #[test]
    fn norm_concentration_mean_reaches_sqrt_n_at_high_dimension() {
        // n = 1e4: the empirical mean over 4000 draws sits within
        // [0.9995, 1.0005] of sqrt(n sigma^2); the band holds the O(1/n)
        // offset of the exact mean plus 3 standard errors of sampling.
        let mut plan = SweepPlan::new(id::NORM_STATS);
        plan.dims = vec![10_000];
        plan.lambdas = vec![400];
        plan.trials = 10;
        let rec = &norm_concentration_experiment(&plan).unwrap()[0];
        let ratio = rec.metric("emp_mean").unwrap() / rec.metric("asym_mean").unwrap();
        assert!((0.9995..=1.0005).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn norm_concentration_ratio_decreases_with_dimension() {
        let mut plan = SweepPlan::new(id::NORM_STATS);
        plan.dims = vec![10, 100, 1000];
        plan.lambdas = vec![200];
        plan.trials = 20;
        let recs = norm_concentration_experiment(&plan).unwrap();
        let ratios: Vec<f64> = recs
            .iter()
            .map(|r| r.metric("ratio_s_over_mu").unwrap())
            .collect();
        assert!(ratios[0] > ratios[1] && ratios[1] > ratios[2]);
        // Empirical ratio tracks the exact one.
        for r in &recs {
            let emp = r.metric("emp_ratio").unwrap();
            let exact = r.metric("ratio_s_over_mu").unwrap();
            assert!((emp - exact).abs() / exact < 0.15, "n={}", r.n);
        }
    }

    #[test]
    fn gamma_check_reports_small_relative_error_at_large_n() {
        let mut plan = SweepPlan::new(id::GAMMA_CHECK);
        plan.dims = vec![20, 200, 2000];
        let recs = gamma_check_experiment(&plan).unwrap();
        let errs: Vec<f64> = recs.iter().map(|r| r.metric("rel_err").unwrap()).collect();
        assert!(errs[0] > errs[1] && errs[1] > errs[2]);
        assert!(errs[2] < 1e-6);
    }

    #[test]
    fn difference_scaling_rejects_zero_center_value() {
        let mut plan = small_plan(id::GRAD_DIFF);
        plan.theta = ThetaSpec::Origin; // sphere at the origin: R = 0
        let err = difference_scaling_experiment(&plan).unwrap_err();
        assert!(matches!(err, Error::Usage(_)));
    }

    #[test]
    fn difference_scaling_variance_tracks_one_over_lambda() {
        let mut plan = SweepPlan::new(id::GRAD_DIFF);
        plan.dims = vec![20];
        plan.sigmas = vec![1.0];
        plan.lambdas = vec![10, 100];
        plan.trials = 300;
        let recs = difference_scaling_experiment(&plan).unwrap();
        for rec in &recs {
            let v = rec.metric("per_coord_var_D").unwrap();
            let p = rec.metric("predicted_var").unwrap();
            assert!((v - p).abs() / p < 0.15, "lambda={}: {v} vs {p}", rec.lambda);
        }
        let slope = recs[0].metric("fit_slope").unwrap();
        assert!((-0.65..=-0.35).contains(&slope), "slope {slope}");
    }

    #[test]
    fn dimension_convergence_rejects_constant_objectives() {
        let mut plan = small_plan(id::CONVERGE_DIM);
        plan.objective = Some(ObjectiveSpec::new("constant", 10));
        let err = dimension_convergence_experiment(&plan).unwrap_err();
        assert!(matches!(err, Error::Usage(_)));
    }

    #[test]
    fn shell_directions_are_isotropic() {
        let mut plan = small_plan(id::SHELL);
        plan.dims = vec![10, 100];
        plan.trials = 50;
        plan.lambdas = vec![100];
        let recs = sphere_shell_experiment(&plan).unwrap();
        for rec in &recs {
            let bound = 3.0 / (50.0f64 * 100.0).sqrt() + 3.0 / (rec.n as f64).sqrt();
            let got = rec.metric("max_abs_coord_mean").unwrap();
            assert!(got < bound, "n={}: {got} vs {bound}", rec.n);
        }
        // Pairwise cosines shrink with dimension.
        let c10 = recs[0].metric("mean_abs_pairwise_cos").unwrap();
        let c100 = recs[1].metric("mean_abs_pairwise_cos").unwrap();
        assert!(c100 < c10);
        // And match the sqrt(2/(pi n)) magnitude for random directions.
        let want = (2.0 / (std::f64::consts::PI * 10.0)).sqrt();
        assert!((c10 - want).abs() / want < 0.1, "{c10} vs {want}");
    }

    #[test]
    fn paired_optimization_emits_checkpoints_and_metadata() {
        let mut plan = small_plan(id::OPTIMIZE);
        plan.dims = vec![10];
        plan.trials = 2;
        plan.lambdas = vec![20];
        plan.sigmas = vec![0.05];
        plan.iterations = 50;
        plan.step_size = 0.01;
        let recs = paired_optimization_experiment(&plan).unwrap();
        // 11 checkpoints per trial (iteration 0 plus every tenth), 2 trials.
        assert_eq!(recs.len(), 22);
        for rec in &recs {
            assert_eq!(rec.metric("normalize_es"), Some(1.0));
        }
        assert_eq!(recs[0].metric("iteration"), Some(0.0));
        assert_eq!(recs[0].metric("f_es"), recs[0].metric("f_fd"));
        // Trials have distinct reproduction seeds.
        assert_ne!(recs[0].seed, recs[11].seed);
    }

    #[test]
    fn paired_optimization_with_constant_objective_moves_only_through_es_noise() {
        // FD gradient of a constant is exactly zero: theta_FD never moves.
        let mut plan = small_plan(id::OPTIMIZE);
        plan.objective = Some(ObjectiveSpec::new("constant", 10).with_parameter("value", 2.0));
        plan.trials = 1;
        plan.iterations = 20;
        plan.sigmas = vec![0.5];
        let recs = paired_optimization_experiment(&plan).unwrap();
        let last = recs.last().unwrap();
        // f_fd stays at the constant, and the ES drift shows up as
        // trajectory distance.
        assert_eq!(last.metric("f_fd"), Some(2.0));
        assert!(last.metric("traj_dist").unwrap() > 0.0);
    }

    #[test]
    fn record_order_is_independent_of_thread_count() {
        let plan = {
            let mut p = small_plan(id::CONVERGE_DIM);
            p.dims = vec![5, 10];
            p.trials = 8;
            p
        };
        let one = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| dimension_convergence_experiment(&plan).unwrap());
        let eight = rayon::ThreadPoolBuilder::new()
            .num_threads(8)
            .build()
            .unwrap()
            .install(|| dimension_convergence_experiment(&plan).unwrap());
        assert_eq!(one, eight);
    }
}
