//! Undersampling indicators per order.
//!
//! The primary signal is the Good-Turing missing mass, the fraction of
//! k-gram positions occupied by grams seen exactly once. It estimates the
//! probability mass of k-grams the sample never shows.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ngram::NgramTable;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds<T> {
    /// An order is undersampled when its missing mass exceeds this.
    pub max_missing_mass: T,
    /// An order is undersampled when `total < min_samples_per_distinct · distinct`.
    pub min_samples_per_distinct: T,
}

impl<T: Scalar> Default for Thresholds<T> {
    fn default() -> Self {
        Thresholds {
            max_missing_mass: T::from_f64_lossy(0.05),
            min_samples_per_distinct: T::from_f64_lossy(10.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderCoverage<T> {
    pub n: usize,
    pub total: u64,
    /// `min(|A|ⁿ, total)`, the most distinct n-grams the sample could show.
    pub possible: u64,
    pub distinct: u64,
    /// `distinct / possible`.
    pub coverage: T,
    /// Fraction of n-gram positions taken by grams seen exactly once.
    pub singleton_fraction: T,
    /// Good-Turing estimate of unseen mass, `singletons / total`.
    pub missing_mass: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport<T> {
    pub alphabet_size: u64,
    pub orders: Vec<OrderCoverage<T>>,
}

impl<T: Scalar> CoverageReport<T> {
    pub fn order(&self, n: usize) -> Option<&OrderCoverage<T>> {
        self.orders.iter().find(|o| o.n == n)
    }
}

/// `|A|ⁿ`, saturating at `u64::MAX`.
pub fn possible_combinations(alphabet_size: u64, n: usize) -> u64 {
    let exp = u32::try_from(n).unwrap_or(u32::MAX);
    alphabet_size.saturating_pow(exp)
}

fn ratio<T: Scalar>(num: u64, den: u64) -> T {
    if den == 0 {
        T::zero()
    } else {
        T::from_u64_lossy(num) / T::from_u64_lossy(den)
    }
}

pub fn coverage_report<T: Scalar>(table: &NgramTable) -> CoverageReport<T> {
    let alphabet_size = table.vocab_size() as u64;
    let orders = (1..=table.n_max())
        .map(|n| {
            let total = table.total(n).expect("n within table");
            let distinct = table.distinct(n).expect("n within table") as u64;
            let singletons = table.count_of_counts(n, 1).expect("n within table");
            let possible = possible_combinations(alphabet_size, n).min(total);
            let missing: T = ratio(singletons, total);
            OrderCoverage {
                n,
                total,
                possible,
                distinct,
                coverage: ratio(distinct, possible),
                singleton_fraction: missing,
                missing_mass: missing,
            }
        })
        .collect();
    CoverageReport { alphabet_size, orders }
}

/// True when order `n` fails either threshold.
pub fn undersampled<T: Scalar>(report: &CoverageReport<T>, n: usize, thresholds: &Thresholds<T>) -> Result<bool> {
    let o = report.order(n).ok_or(Error::OrderOutOfRange {
        n,
        n_max: report.orders.len(),
    })?;
    Ok(o.missing_mass > thresholds.max_missing_mass
        || T::from_u64_lossy(o.total) < thresholds.min_samples_per_distinct * T::from_u64_lossy(o.distinct))
}

/// Orders among `1..=n_max` that fail the thresholds.
pub fn undersampled_orders<T: Scalar>(report: &CoverageReport<T>, thresholds: &Thresholds<T>) -> Vec<usize> {
    report
        .orders
        .iter()
        .filter(|o| undersampled(report, o.n, thresholds).unwrap_or(false))
        .map(|o| o.n)
        .collect()
}
