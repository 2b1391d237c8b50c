//! Binomial intervals and the chi-square goodness-of-fit test.

use alloc::vec::Vec;

/// Two-sided 95% standard normal quantile.
pub const Z_95: f64 = 1.959963984540054;

/// One-sided 99% standard normal quantile.
pub const Z_99: f64 = 2.3263478740408408;

/// Normal-approximation 95% half-width of a binomial proportion.
pub fn binomial_ci95(p: f64, n: u64) -> f64 {
    if n == 0 {
        return f64::INFINITY;
    }
    Z_95 * libm::sqrt(p * (1.0 - p) / n as f64)
}

/// Upper chi-square quantile with `dof` degrees of freedom at the level
/// whose one-sided normal quantile is `z`, by the Wilson–Hilferty cube
/// approximation `k (1 - 2/(9k) + z √(2/(9k)))³`.
///
/// Relative error is below 1% for `k ≥ 3` at the 1% level.
pub fn chi_square_critical(dof: usize, z: f64) -> f64 {
    let k = dof as f64;
    let a = 2.0 / (9.0 * k);
    let c = 1.0 - a + z * libm::sqrt(a);
    k * c * c * c
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChiSquareReport {
    pub counts: Vec<u64>,
    pub expected: f64,
    pub statistic: f64,
    pub dof: usize,
    pub critical: f64,
    pub passed: bool,
}

/// Pearson statistic of `counts` against equal expected counts.
pub fn chi_square_uniform(counts: &[u64], z: f64) -> ChiSquareReport {
    let n: u64 = counts.iter().sum();
    let expected = n as f64 / counts.len() as f64;
    let statistic = counts
        .iter()
        .map(|&o| {
            let d = o as f64 - expected;
            d * d / expected
        })
        .sum();
    let dof = counts.len() - 1;
    let critical = chi_square_critical(dof, z);
    ChiSquareReport {
        counts: counts.to_vec(),
        expected,
        statistic,
        dof,
        critical,
        passed: statistic <= critical,
    }
}
