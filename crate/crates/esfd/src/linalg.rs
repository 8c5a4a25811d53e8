//! Small dense-vector helpers used by the estimators and experiments.

use crate::kahan::KahanSum;

/// Dot product with compensated accumulation.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = KahanSum::new();
    for (&x, &y) in a.iter().zip(b) {
        acc.add(x * y);
    }
    acc.value()
}

/// Squared Euclidean norm.
pub fn norm_sq(v: &[f64]) -> f64 {
    let mut acc = KahanSum::new();
    for &x in v {
        acc.add(x * x);
    }
    acc.value()
}

/// Euclidean norm.
pub fn norm(v: &[f64]) -> f64 {
    norm_sq(v).sqrt()
}

/// Cosine of the angle between two vectors; NaN if either has zero norm.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    dot(a, b) / (norm(a) * norm(b))
}

/// Coordinate-wise difference `a - b`.
pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(&x, &y)| x - y).collect()
}
