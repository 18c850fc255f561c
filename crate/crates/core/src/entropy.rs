//! Shannon entropy and plug-in conditional entropies, in bits.
//!
//! `h(n)` is estimated directly as `Σ_c p̂(c) · H(X | c)` over the observed
//! (n−1)-contexts `c`, never as a difference of block entropies, so every
//! value is non-negative on any finite sample. No smoothing or bias
//! correction is applied.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::diagnose::CoverageReport;
use crate::error::{Error, Result};
use crate::ngram::NgramTable;
use crate::scalar::Scalar;
use crate::tokenize::Granularity;

/// `−Σ pᵢ log₂ pᵢ` with `0 · log 0 = 0`.
///
/// `p` must be non-negative and sum to one within `1e−9` (widened to a few
/// ulps per element for `f32`).
pub fn shannon_entropy<T: Scalar>(p: &[T]) -> Result<T> {
    if let Some(bad) = p.iter().find(|x| !(**x >= T::zero())) {
        return Err(Error::NotADistribution(format!("negative or NaN entry {bad}")));
    }
    let sum = p.iter().fold(T::zero(), |a, &b| a + b);
    let tol =
        T::from_f64_lossy(1e-9).max(T::epsilon() * T::from_usize(4 * p.len().max(1)).unwrap_or_else(T::max_value));
    if (sum - T::one()).abs() > tol {
        return Err(Error::NotADistribution(format!("probabilities sum to {sum}")));
    }
    let h = p
        .iter()
        .filter(|x| **x > T::zero())
        .fold(T::zero(), |acc, &x| acc - x * x.log2());
    Ok(h.max(T::zero()))
}

/// Entropy of the counts in one context, weighted by the context count:
/// `Σ_x c_x · log₂(ctx / c_x)`. Each term is non-negative.
fn weighted_context_entropy<T: Scalar>(counts: &[u64]) -> (u64, T) {
    let ctx: u64 = counts.iter().sum();
    let ctx_t = T::from_u64_lossy(ctx);
    let bits = counts.iter().fold(T::zero(), |acc, &c| {
        let c = T::from_u64_lossy(c);
        acc + c * (ctx_t / c).log2()
    });
    (ctx, bits)
}

/// Plug-in estimate of `H(X_n | X_{n−1}, …, X_1)` from `table`.
///
/// For `n = 1` this is the entropy of the unigram distribution. For larger
/// `n`, contexts are weighted by `ctx_count / total[n]`; on a pruned table
/// the weights sum to less than one and the result is a lower bound.
pub fn conditional_entropy<T: Scalar>(table: &NgramTable, n: usize) -> Result<T> {
    let total = table.total(n)?;
    if total == 0 {
        return Ok(T::zero());
    }
    let mut acc = T::zero();
    table.for_each_context(n, |group| {
        let (_, bits) = weighted_context_entropy::<T>(group);
        acc = acc + bits;
    })?;
    Ok((acc / T::from_u64_lossy(total)).max(T::zero()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint<T> {
    /// Context length (order of the conditional entropy).
    pub n: usize,
    /// Bits per token.
    pub h: T,
    pub total: u64,
    pub distinct: u64,
}

/// `h(1) … h(n_max)` for one table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyCurve<T> {
    pub points: Vec<CurvePoint<T>>,
    pub granularity: Granularity,
    /// Set when the counts came from a pruned table; every `h` is then
    /// biased low.
    #[serde(default)]
    pub lower_bound_biased: bool,
}

impl<T: Scalar> EntropyCurve<T> {
    pub fn xy(&self) -> Vec<(T, T)> {
        self.points
            .iter()
            .map(|p| (T::from_usize(p.n).unwrap_or_else(T::max_value), p.h))
            .collect()
    }

    /// Writes `n,h_bits,total,distinct,coverage`. `coverage` is left empty
    /// when no report is supplied. Lines in `preamble` are emitted first as
    /// `# ` comments.
    pub fn write_csv<W: Write>(
        &self,
        mut w: W,
        coverage: Option<&CoverageReport<T>>,
        preamble: &[String],
    ) -> std::io::Result<()> {
        for line in preamble {
            writeln!(w, "# {line}")?;
        }
        writeln!(w, "n,h_bits,total,distinct,coverage")?;
        for p in &self.points {
            let cov = coverage
                .and_then(|r| r.order(p.n))
                .map(|o| o.coverage.to_string())
                .unwrap_or_default();
            writeln!(w, "{},{},{},{},{}", p.n, p.h, p.total, p.distinct, cov)?;
        }
        Ok(())
    }
}

pub fn entropy_curve<T: Scalar>(table: &NgramTable) -> Result<EntropyCurve<T>> {
    if table.n_max() == 0 {
        return Err(Error::ZeroOrder);
    }
    let points = (1..=table.n_max())
        .map(|n| {
            Ok(CurvePoint {
                n,
                h: conditional_entropy(table, n)?,
                total: table.total(n)?,
                distinct: table.distinct(n)? as u64,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EntropyCurve {
        points,
        granularity: table.granularity(),
        lower_bound_biased: table.pruned_below().is_some(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ngram::count_ngrams;
    use crate::tokenize::tokenize_words;
    use approx::assert_abs_diff_eq;

    #[test]
    fn shannon_examples() {
        assert_abs_diff_eq!(shannon_entropy(&[0.5f64, 0.5]).unwrap(), 1.0, epsilon = 1e-15);
        assert_eq!(shannon_entropy(&[1.0f64]).unwrap(), 0.0);
        // −0.9 log₂ 0.9 − 0.1 log₂ 0.1 = 0.4689955935892812
        assert_abs_diff_eq!(
            shannon_entropy(&[0.9f64, 0.1]).unwrap(),
            0.468_995_593_589_281_2,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(shannon_entropy(&[0.9f32, 0.1]).unwrap(), 0.468_996, epsilon = 1e-6);
        assert_abs_diff_eq!(
            shannon_entropy(&[0.25f64, 0.0, 0.75]).unwrap(),
            0.811_278_124_459_132_8,
            epsilon = 1e-12
        );
    }

    #[test]
    fn shannon_rejects_non_distributions() {
        assert!(matches!(
            shannon_entropy(&[0.5f64, 0.4]),
            Err(Error::NotADistribution(_))
        ));
        assert!(matches!(
            shannon_entropy(&[1.5f64, -0.5]),
            Err(Error::NotADistribution(_))
        ));
        assert!(shannon_entropy(&[f64::NAN, 1.0]).is_err());
        assert!(shannon_entropy::<f64>(&[]).is_err());
        assert!(shannon_entropy(&[0.5f64, 0.5 + 5e-10]).is_ok());
    }

    #[test]
    fn abab_curve() {
        let t = count_ngrams(&tokenize_words("a b a b"), 2).unwrap();
        assert_eq!(conditional_entropy::<f64>(&t, 1).unwrap(), 1.0);
        assert_eq!(conditional_entropy::<f64>(&t, 2).unwrap(), 0.0);
        let curve: EntropyCurve<f64> = entropy_curve(&t).unwrap();
        let hs: Vec<_> = curve.points.iter().map(|p| (p.n, p.h)).collect();
        assert_eq!(hs, [(1, 1.0), (2, 0.0)]);
        assert_eq!(curve.points[1].distinct, 2);
        assert_eq!(curve.points[1].total, 3);
        assert!(matches!(
            conditional_entropy::<f64>(&t, 3),
            Err(Error::OrderOutOfRange { n: 3, .. })
        ));
    }

    #[test]
    fn constant_stream_is_zero() {
        let text = vec!["a"; 50].join(" ");
        let t = count_ngrams(&tokenize_words(&text), 6).unwrap();
        let curve: EntropyCurve<f64> = entropy_curve(&t).unwrap();
        assert!(curve.points.iter().all(|p| p.h == 0.0));
    }

    #[test]
    fn context_weighting_by_hand() {
        // "a b a c a b": contexts a→{b:2, c:1}, b→{a:1}, c→{a:1}; total 5
        // h(2) = (3/5)·H(2/3,1/3) = 0.6 · 0.9182958340544896
        let t = count_ngrams(&tokenize_words("a b a c a b"), 2).unwrap();
        assert_abs_diff_eq!(
            conditional_entropy::<f64>(&t, 2).unwrap(),
            0.6 * 0.918_295_834_054_489_6,
            epsilon = 1e-14
        );
    }

    #[test]
    fn csv_layout() {
        let t = count_ngrams(&tokenize_words("a b a b"), 2).unwrap();
        let curve: EntropyCurve<f64> = entropy_curve(&t).unwrap();
        let mut buf = Vec::new();
        curve.write_csv(&mut buf, None, &["source=x".into()]).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "# source=x\nn,h_bits,total,distinct,coverage\n1,1,4,2,\n2,0,3,2,\n"
        );
    }

    #[test]
    fn f32_curve() {
        let t = count_ngrams(&tokenize_words("a b a c a b"), 2).unwrap();
        let h: f32 = conditional_entropy(&t, 2).unwrap();
        assert_abs_diff_eq!(h, 0.550_977_5, epsilon = 1e-6);
    }
}
