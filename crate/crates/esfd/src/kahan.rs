//! Compensated (Kahan-Babuska / Neumaier) summation.
//!
//! Every reduction in this crate accumulates in ascending sample order
//! with compensation, so results are independent of how the work that
//! produced the summands was scheduled and the rounding error stays
//! bounded as the number of terms grows.

/// Scalar compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    compensation: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds one term (Neumaier variant, robust when |value| > |sum|).
    #[inline]
    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }

    pub fn sum_iter<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
        let mut acc = Self::new();
        for v in iter {
            acc.add(v);
        }
        acc.value()
    }
}

/// Per-coordinate compensated accumulator for vector reductions.
#[derive(Debug, Clone)]
pub struct KahanVec {
    sums: Vec<KahanSum>,
}

impl KahanVec {
    pub fn zeros(dim: usize) -> Self {
        Self {
            sums: vec![KahanSum::new(); dim],
        }
    }

    /// Accumulates `weight * v` coordinate-wise.
    #[inline]
    pub fn add_scaled(&mut self, v: &[f64], weight: f64) {
        debug_assert_eq!(v.len(), self.sums.len());
        for (acc, &x) in self.sums.iter_mut().zip(v) {
            acc.add(weight * x);
        }
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.sums.into_iter().map(|s| s.value()).collect()
    }

    /// Finishes the reduction, scaling every coordinate by `factor`.
    pub fn into_scaled_vec(self, factor: f64) -> Vec<f64> {
        self.sums.into_iter().map(|s| factor * s.value()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_cancellation_lost_by_naive_sum() {
        // 1 + 1e100 - 1e100 == 1 with compensation, 0 without.
        let mut acc = KahanSum::new();
        acc.add(1.0);
        acc.add(1e100);
        acc.add(-1e100);
        assert_eq!(acc.value(), 1.0);
    }

    #[test]
    fn many_small_terms() {
        let n = 10_000_000;
        let s = KahanSum::sum_iter((0..n).map(|_| 0.1));
        assert!((s - 0.1 * n as f64).abs() < 1e-6);
    }

    #[test]
    fn vector_accumulator_matches_scalar() {
        let mut v = KahanVec::zeros(2);
        let mut s0 = KahanSum::new();
        for i in 0..1000 {
            let x = (i as f64).sin();
            v.add_scaled(&[x, 2.0 * x], 0.5);
            s0.add(0.5 * x);
        }
        let out = v.into_vec();
        assert_eq!(out[0], s0.value());
    }
}
