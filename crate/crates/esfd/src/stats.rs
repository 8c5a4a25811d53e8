//! Sample statistics used when reducing Monte Carlo sweeps.

use crate::kahan::KahanSum;

/// Mean, unbiased variance, and fourth central moment of a sample.
#[derive(Debug, Clone, Copy)]
pub struct SampleMoments {
    pub count: usize,
    pub mean: f64,
    /// Unbiased (n-1) sample variance.
    pub variance: f64,
    /// Fourth central moment (biased, 1/n).
    pub fourth_central: f64,
}

impl SampleMoments {
    pub fn from_values(values: &[f64]) -> Self {
        let n = values.len();
        assert!(n >= 2, "moments need at least two samples");
        let mean = KahanSum::sum_iter(values.iter().copied()) / n as f64;
        let mut m2 = KahanSum::new();
        let mut m4 = KahanSum::new();
        for &v in values {
            let d = v - mean;
            let d2 = d * d;
            m2.add(d2);
            m4.add(d2 * d2);
        }
        SampleMoments {
            count: n,
            mean,
            variance: m2.value() / (n - 1) as f64,
            fourth_central: m4.value() / n as f64,
        }
    }

    /// Standard error of the sample mean.
    pub fn mean_standard_error(&self) -> f64 {
        (self.variance / self.count as f64).sqrt()
    }

    /// Standard error of the sample variance, from the classical
    /// formula `Var(S^2) = (m4 - S^4 (n-3)/(n-1)) / n`.
    pub fn variance_standard_error(&self) -> f64 {
        let n = self.count as f64;
        let s2 = self.variance;
        ((self.fourth_central - s2 * s2 * (n - 3.0) / (n - 1.0)) / n).max(0.0).sqrt()
    }
}

/// Median; averages the two central order statistics for even lengths.
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of an empty sample");
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("median input must not contain NaN"));
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    assert!(xs.len() >= 2, "slope needs at least two points");
    let lx: Vec<f64> = xs.iter().map(|&x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|&y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = KahanSum::sum_iter(lx.iter().copied()) / n;
    let my = KahanSum::sum_iter(ly.iter().copied()) / n;
    let mut sxy = KahanSum::new();
    let mut sxx = KahanSum::new();
    for (&x, &y) in lx.iter().zip(&ly) {
        sxy.add((x - mx) * (y - my));
        sxx.add((x - mx) * (x - mx));
    }
    sxy.value() / sxx.value()
}

/// SplitMix64 output mixing; a fixed, documented permutation of u64.
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Derives a stream seed from a base seed and structured coordinates
/// (grid indices, trial numbers), so that every grid cell and trial is
/// statistically independent yet individually reproducible.
pub fn derive_seed(base_seed: u64, parts: &[u64]) -> u64 {
    let mut state = splitmix64(base_seed ^ 0x5851_f42d_4c95_7f2d);
    for &p in parts {
        state = splitmix64(state ^ p);
    }
    state
}
