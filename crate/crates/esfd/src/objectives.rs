//! Benchmark objectives `R: R^n -> R` with analytic gradients.
//!
//! The registered families cover the regimes the estimators are probed
//! in: `constant` isolates the center-value noise term exactly, `linear`
//! has closed-form estimator expectations, `sphere` and `quadratic` give
//! smooth convex targets with known gradients, and `rosenbrock` is the
//! standard nonconvex sanity case. All objectives are pure functions;
//! repeated evaluation at one point is bit-identical.

use std::collections::BTreeMap;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::kahan::KahanSum;
use crate::linalg::{dot, norm_sq};
use crate::sampling::ParamVector;

/// Names and parameters describing one objective instance.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveSpec {
    pub name: String,
    pub dim: usize,
    pub parameters: BTreeMap<String, f64>,
}

impl ObjectiveSpec {
    pub fn new(name: &str, dim: usize) -> Self {
        ObjectiveSpec {
            name: name.to_string(),
            dim,
            parameters: BTreeMap::new(),
        }
    }

    pub fn with_parameter(mut self, key: &str, value: f64) -> Self {
        self.parameters.insert(key.to_string(), value);
        self
    }

    fn parameter(&self, key: &str, default: f64) -> f64 {
        self.parameters.get(key).copied().unwrap_or(default)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Family {
    Constant { value: f64 },
    Linear { coefficients: Vec<f64> },
    Sphere,
    Quadratic { diagonal: Vec<f64> },
    Rosenbrock,
}

/// A deterministic objective with an optional analytic gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Objective {
    name: String,
    dim: usize,
    family: Family,
}

/// Family names accepted by [`make_objective`].
pub const OBJECTIVE_NAMES: &[&str] = &["constant", "linear", "sphere", "quadratic", "rosenbrock"];

/// Instantiates a registered objective family.
///
/// Recognized parameters: `value` (constant, default 0), `seed` and
/// `scale` (linear: coefficient vector is a seeded uniformly random
/// direction times `scale`, default seed 0 / scale 1), `condition`
/// (quadratic: diagonal spreads log-uniformly from 1 to the condition
/// number, default 10).
pub fn make_objective(spec: &ObjectiveSpec) -> Result<Objective> {
    if spec.dim == 0 {
        return Err(Error::usage("objective dimension must be >= 1"));
    }
    let family = match spec.name.as_str() {
        "constant" => Family::Constant {
            value: spec.parameter("value", 0.0),
        },
        "linear" => {
            let seed = spec.parameter("seed", 0.0) as u64;
            let scale = spec.parameter("scale", 1.0);
            Family::Linear {
                coefficients: seeded_direction(spec.dim, seed)
                    .into_iter()
                    .map(|u| scale * u)
                    .collect(),
            }
        }
        "sphere" => Family::Sphere,
        "quadratic" => {
            let condition = spec.parameter("condition", 10.0);
            if condition < 1.0 || condition.is_nan() {
                return Err(Error::usage(format!(
                    "quadratic condition number must be >= 1, got {condition}"
                )));
            }
            let n = spec.dim;
            let diagonal = (0..n)
                .map(|i| {
                    if n == 1 {
                        1.0
                    } else {
                        condition.powf(i as f64 / (n - 1) as f64)
                    }
                })
                .collect();
            Family::Quadratic { diagonal }
        }
        "rosenbrock" => {
            if spec.dim < 2 {
                return Err(Error::usage("rosenbrock requires dimension >= 2"));
            }
            Family::Rosenbrock
        }
        other => {
            return Err(Error::usage(format!(
                "unknown objective '{other}' (expected one of {OBJECTIVE_NAMES:?})"
            )))
        }
    };
    Ok(Objective {
        name: spec.name.clone(),
        dim: spec.dim,
        family,
    })
}

/// A uniformly random unit vector, deterministic in the seed.
fn seeded_direction(dim: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let n = norm_sq(&v).sqrt();
        if n > 1e-8 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

impl Objective {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Evaluates R at x; panics only on dimension mismatch in debug builds.
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        match &self.family {
            Family::Constant { value } => *value,
            Family::Linear { coefficients } => dot(coefficients, x),
            Family::Sphere => norm_sq(x),
            Family::Quadratic { diagonal } => {
                let mut acc = KahanSum::new();
                for (&a, &xi) in diagonal.iter().zip(x) {
                    acc.add(a * xi * xi);
                }
                acc.value()
            }
            Family::Rosenbrock => {
                let mut acc = KahanSum::new();
                for w in x.windows(2) {
                    let t = w[1] - w[0] * w[0];
                    acc.add(100.0 * t * t);
                    let u = 1.0 - w[0];
                    acc.add(u * u);
                }
                acc.value()
            }
        }
    }

    /// The gradient of R at x; all registered families provide one.
    pub fn analytic_gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        debug_assert_eq!(x.len(), self.dim);
        Some(match &self.family {
            Family::Constant { .. } => vec![0.0; self.dim],
            Family::Linear { coefficients } => coefficients.clone(),
            Family::Sphere => x.iter().map(|&xi| 2.0 * xi).collect(),
            Family::Quadratic { diagonal } => diagonal
                .iter()
                .zip(x)
                .map(|(&a, &xi)| 2.0 * a * xi)
                .collect(),
            Family::Rosenbrock => {
                let n = self.dim;
                let mut g = vec![0.0; n];
                for i in 0..n - 1 {
                    let t = x[i + 1] - x[i] * x[i];
                    g[i] += -400.0 * x[i] * t - 2.0 * (1.0 - x[i]);
                    g[i + 1] += 200.0 * t;
                }
                g
            }
        })
    }

    pub fn has_analytic_gradient(&self) -> bool {
        true
    }
}

/// Maximum absolute deviation between the analytic gradient and a
/// symmetric central difference with the given step.
pub fn check_gradient(objective: &Objective, point: &ParamVector, step: f64) -> Result<f64> {
    if !crate::error::positive_real(step) {
        return Err(Error::usage(format!("step must be > 0, got {step}")));
    }
    if point.dim() != objective.dim() {
        return Err(Error::usage(format!(
            "point dimension {} does not match objective dimension {}",
            point.dim(),
            objective.dim()
        )));
    }
    let analytic = objective
        .analytic_gradient(point.as_slice())
        .ok_or_else(|| Error::usage("objective has no analytic gradient"))?;
    let mut x = point.as_slice().to_vec();
    let mut worst = 0.0f64;
    for i in 0..x.len() {
        let xi = x[i];
        x[i] = xi + step;
        let plus = objective.evaluate(&x);
        x[i] = xi - step;
        let minus = objective.evaluate(&x);
        x[i] = xi;
        let numeric = (plus - minus) / (2.0 * step);
        worst = worst.max((numeric - analytic[i]).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pv(values: &[f64]) -> ParamVector {
        ParamVector::new(values.to_vec()).unwrap()
    }

    #[test]
    fn unknown_name_is_a_usage_error() {
        let err = make_objective(&ObjectiveSpec::new("ackley", 3)).unwrap_err();
        assert!(matches!(err, Error::Usage(_)));
    }

    #[test]
    fn sphere_at_origin() {
        let obj = make_objective(&ObjectiveSpec::new("sphere", 4)).unwrap();
        let x = [0.0; 4];
        assert_eq!(obj.evaluate(&x), 0.0);
        assert_eq!(obj.analytic_gradient(&x).unwrap(), vec![0.0; 4]);
    }

    #[test]
    fn linear_with_unit_direction() {
        // scale=1 gives a unit coefficient vector; R is its dot with x.
        let obj = make_objective(
            &ObjectiveSpec::new("linear", 6).with_parameter("seed", 3.0),
        )
        .unwrap();
        let g = obj.analytic_gradient(&[0.0; 6]).unwrap();
        assert!((norm_sq(&g).sqrt() - 1.0).abs() < 1e-12);
        let x = [3.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        assert!((obj.evaluate(&x) - 3.0 * g[0]).abs() < 1e-15);
        // Same seed, same coefficients.
        let again = make_objective(
            &ObjectiveSpec::new("linear", 6).with_parameter("seed", 3.0),
        )
        .unwrap();
        assert_eq!(obj, again);
    }

    #[test]
    fn constant_value_and_zero_gradient() {
        let obj = make_objective(
            &ObjectiveSpec::new("constant", 3).with_parameter("value", 7.0),
        )
        .unwrap();
        assert_eq!(obj.evaluate(&[1.0, -2.0, 0.5]), 7.0);
        assert_eq!(obj.analytic_gradient(&[1.0, -2.0, 0.5]).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn quadratic_conditioning_spans_one_to_condition() {
        let obj = make_objective(
            &ObjectiveSpec::new("quadratic", 5).with_parameter("condition", 100.0),
        )
        .unwrap();
        let g = obj.analytic_gradient(&[1.0; 5]).unwrap();
        assert!((g[0] - 2.0).abs() < 1e-12);
        assert!((g[4] - 200.0).abs() < 1e-10);
    }

    #[test]
    fn rosenbrock_minimum_at_all_ones() {
        let obj = make_objective(&ObjectiveSpec::new("rosenbrock", 7)).unwrap();
        let ones = [1.0; 7];
        assert_eq!(obj.evaluate(&ones), 0.0);
        assert_eq!(obj.analytic_gradient(&ones).unwrap(), vec![0.0; 7]);
        assert!(make_objective(&ObjectiveSpec::new("rosenbrock", 1)).is_err());
    }

    #[test]
    fn evaluation_is_pure() {
        let obj = make_objective(&ObjectiveSpec::new("rosenbrock", 5)).unwrap();
        let x = [0.3, -1.2, 0.8, 2.0, -0.1];
        let a = obj.evaluate(&x);
        let b = obj.evaluate(&x);
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn central_difference_validates_every_gradient() {
        // 100 seeded random points per family in [-2, 2]^n.
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let dim = 6;
        let specs = [
            ObjectiveSpec::new("constant", dim).with_parameter("value", 2.5),
            ObjectiveSpec::new("linear", dim).with_parameter("seed", 9.0),
            ObjectiveSpec::new("sphere", dim),
            ObjectiveSpec::new("quadratic", dim).with_parameter("condition", 50.0),
            ObjectiveSpec::new("rosenbrock", dim),
        ];
        for spec in &specs {
            let obj = make_objective(spec).unwrap();
            for _ in 0..100 {
                let x: Vec<f64> = (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect();
                let err = check_gradient(&obj, &pv(&x), 1e-6).unwrap();
                assert!(err < 1e-4, "{}: error {err}", spec.name);
            }
        }
    }

    #[test]
    fn central_difference_is_nearly_exact_for_polynomials_of_low_degree() {
        // Exact for linear at any step; exact up to rounding for quadratics.
        let lin = make_objective(
            &ObjectiveSpec::new("linear", 4).with_parameter("seed", 1.0),
        )
        .unwrap();
        assert!(check_gradient(&lin, &pv(&[0.4, -1.0, 2.0, 0.0]), 0.25).unwrap() < 1e-10);
        let sph = make_objective(&ObjectiveSpec::new("sphere", 4)).unwrap();
        assert!(check_gradient(&sph, &pv(&[0.4, -1.0, 2.0, 0.0]), 1e-5).unwrap() < 1e-8);
    }

    #[test]
    fn rosenbrock_difference_error_scales_quadratically_in_step() {
        // O(step^2) truncation: shrinking the step 10x should shrink the
        // error ~100x (allowing slack for rounding at the small step).
        let obj = make_objective(&ObjectiveSpec::new("rosenbrock", 5)).unwrap();
        let x = pv(&[-1.3, 0.7, 1.9, -0.2, 0.4]);
        let coarse = check_gradient(&obj, &x, 1e-3).unwrap();
        let fine = check_gradient(&obj, &x, 1e-4).unwrap();
        assert!(fine < coarse / 20.0, "coarse={coarse} fine={fine}");
    }
}
