//! Empirical LP polynomial bases.
//!
//! For a column with empirical distribution F, the score
//! `zeta(x) = sqrt(12) * (F_mid(x) - 1/2) / sqrt(1 - Σ p³)` is standardised so
//! that it has mean zero and unit variance under F. The order-ℓ basis function
//! `T_ℓ` is the ℓ-th Gram-Schmidt orthonormalisation of `zeta, zeta², ...`
//! against the constant function, using the empirical measure `(1/n) Σ_i`.
//! At most `|support| - 1` such functions exist.

use nalgebra::DMatrix;

use crate::data::ColumnSummary;
use crate::error::{GlpError, Result};

/// A candidate power is dropped when its residual falls below this fraction
/// of its norm before projection.
pub const DROP_TOLERANCE: f64 = 1e-8;

/// Standardised mid-distribution score of `value`.
pub fn zeta(summary: &ColumnSummary, value: f64) -> Result<f64> {
    let tie = summary.tie_factor();
    if tie <= 0.0 {
        return Err(GlpError::DegenerateColumn);
    }
    Ok(12f64.sqrt() * (summary.mid_cdf_at(value) - 0.5) / tie.sqrt())
}

/// Largest order available for the column: `|support| - 1`.
pub fn max_order(summary: &ColumnSummary) -> usize {
    summary.support_size().saturating_sub(1)
}

/// Basis functions evaluated at each observation of a column.
#[derive(Debug, Clone)]
pub struct LpBasis {
    values: DMatrix<f64>,
}

impl LpBasis {
    /// Number of basis functions `m`.
    pub fn order(&self) -> usize {
        self.values.ncols()
    }

    /// n×m matrix with entry (i, ℓ-1) = `T_ℓ(x_i)`.
    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    /// `T_ℓ` at every observation; `order` is 1-based.
    pub fn column(&self, order: usize) -> Option<Vec<f64>> {
        if order == 0 || order > self.order() {
            return None;
        }
        Some(self.values.column(order - 1).iter().copied().collect())
    }
}

/// Builds `T_1 .. T_m` for `observed`, where `m = min(max_order, |support| - 1)`
/// unless numerical rank deficiency truncates it further.
pub fn build_basis(summary: &ColumnSummary, observed: &[f64], max_order: usize) -> Result<LpBasis> {
    if max_order == 0 {
        return Err(GlpError::InvalidArgument(
            "max_order must be at least 1".into(),
        ));
    }
    if summary.support_size() < 2 {
        return Err(GlpError::DegenerateColumn);
    }
    let target = max_order.min(self::max_order(summary));
    let z = observed
        .iter()
        .map(|&v| zeta(summary, v))
        .collect::<Result<Vec<f64>>>()?;

    let candidates: Vec<Vec<f64>> = (1..=target as i32)
        .map(|p| z.iter().map(|v| v.powi(p)).collect())
        .collect();
    let basis = orthonormalize(&candidates);

    let n = observed.len();
    let m = basis.len();
    let values = DMatrix::from_fn(n, m, |i, l| basis[l][i]);
    Ok(LpBasis { values })
}

fn inner(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / a.len() as f64
}

/// Modified Gram-Schmidt with one re-orthogonalisation pass under the
/// empirical inner product `(1/n) Σ a_i b_i`, after projecting out the
/// constant function.
///
/// Processing stops at the first candidate whose residual norm is below
/// [`DROP_TOLERANCE`] times its original norm.
pub fn orthonormalize(candidates: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(candidates.len());
    for cand in candidates {
        let n = cand.len();
        if n == 0 {
            break;
        }
        let mut v = cand.clone();
        let original = inner(&v, &v).sqrt();
        if original == 0.0 {
            break;
        }
        for _pass in 0..2 {
            let mean = v.iter().sum::<f64>() / n as f64;
            v.iter_mut().for_each(|x| *x -= mean);
            for q in &out {
                let proj = inner(&v, q);
                v.iter_mut().zip(q).for_each(|(x, qi)| *x -= proj * qi);
            }
        }
        let norm = inner(&v, &v).sqrt();
        if !(norm > DROP_TOLERANCE * original) {
            break;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        out.push(v);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::summarize_column;
    use proptest::prelude::*;

    fn basis_of(values: &[f64], order: usize) -> LpBasis {
        build_basis(&summarize_column(values), values, order).unwrap()
    }

    #[test]
    fn zeta_binary_balanced() {
        let s = summarize_column(&[0.0, 0.0, 1.0, 1.0]);
        assert!((zeta(&s, 0.0).unwrap() + 1.0).abs() < 1e-15);
        assert!((zeta(&s, 1.0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zeta_median_is_zero() {
        let s = summarize_column(&[1.0, 2.0, 3.0]);
        assert_eq!(zeta(&s, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn zeta_unbalanced_binary() {
        let s = summarize_column(&[0.0, 1.0, 1.0, 1.0]);
        assert!((zeta(&s, 0.0).unwrap() + 3f64.sqrt()).abs() < 1e-14);
        assert!((zeta(&s, 1.0).unwrap() - 1.0 / 3f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn zeta_constant_column_is_degenerate() {
        let s = summarize_column(&[5.0, 5.0]);
        assert!(matches!(zeta(&s, 5.0), Err(GlpError::DegenerateColumn)));
    }

    #[test]
    fn binary_basis_has_single_function() {
        let x = [0.0, 1.0, 1.0, 1.0];
        let b = basis_of(&x, 3);
        assert_eq!(b.order(), 1);
        let t1 = b.column(1).unwrap();
        let r3 = 3f64.sqrt();
        let expected = [-r3, 1.0 / r3, 1.0 / r3, 1.0 / r3];
        for (a, e) in t1.iter().zip(expected) {
            assert!((a - e).abs() < 1e-12, "{a} vs {e}");
        }
    }

    #[test]
    fn three_point_rank_basis() {
        let b = basis_of(&[1.0, 2.0, 3.0], 1);
        let t1 = b.column(1).unwrap();
        let r = 1.5f64.sqrt();
        for (a, e) in t1.iter().zip([-r, 0.0, r]) {
            assert!((a - e).abs() < 1e-12);
        }
    }

    #[test]
    fn quadratic_matches_explicit_gram_schmidt() {
        // Independent route: classical Gram-Schmidt written out by hand on
        // 1, zeta, zeta^2 for ranks 1..4.
        let x = [4.0, 1.0, 3.0, 2.0];
        let n: f64 = 4.0;
        let z: Vec<f64> = x
            .iter()
            .map(|r: &f64| (12.0 / (n * n - 1.0)).sqrt() * (r - (n + 1.0) / 2.0))
            .collect();
        let e = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>() / n;
        let ones = vec![1.0; 4];
        let sq: Vec<f64> = z.iter().map(|v| v * v).collect();
        let c0 = e(&sq, &ones);
        let c1 = e(&sq, &z);
        let resid: Vec<f64> = sq.iter().zip(&z).map(|(s, zi)| s - c0 - c1 * zi).collect();
        let norm = e(&resid, &resid).sqrt();
        let t2_oracle: Vec<f64> = resid.iter().map(|r| r / norm).collect();

        let b = basis_of(&x, 2);
        assert_eq!(b.order(), 2);
        let t2 = b.column(2).unwrap();
        for (a, o) in t2.iter().zip(&t2_oracle) {
            assert!((a - o).abs() < 1e-12);
        }
        // Proportional to the textbook quadratic 6√5{(F_mid - 1/2)² - 1/12}
        // once 1/12 is replaced by its finite-n value (n² - 1)/(12 n²).
        let textbook: Vec<f64> = x
            .iter()
            .map(|r| {
                let f = r / n - 0.5 / n;
                6.0 * 5f64.sqrt() * ((f - 0.5).powi(2) - (n * n - 1.0) / (12.0 * n * n))
            })
            .collect();
        let ratio = t2[0] / textbook[0];
        for (a, t) in t2.iter().zip(&textbook) {
            assert!((a - ratio * t).abs() < 1e-12);
        }
    }

    #[test]
    fn max_order_counts_support() {
        assert_eq!(max_order(&summarize_column(&[0.0, 1.0, 0.0])), 1);
        assert_eq!(max_order(&summarize_column(&[2.0, 2.0])), 0);
        let ten: Vec<f64> = (0..10).map(f64::from).collect();
        assert_eq!(max_order(&summarize_column(&ten)), 9);
    }

    #[test]
    fn order_capped_by_support() {
        let b = basis_of(&[0.0, 1.0, 2.0, 0.0, 1.0, 2.0], 4);
        assert_eq!(b.order(), 2);
        assert!(b.column(3).is_none());
    }

    #[test]
    fn constant_column_has_no_basis() {
        let s = summarize_column(&[1.0, 1.0, 1.0]);
        assert!(matches!(
            build_basis(&s, &[1.0, 1.0, 1.0], 1),
            Err(GlpError::DegenerateColumn)
        ));
    }

    proptest! {
        #[test]
        fn orthonormal_and_centered(
            raw in prop::collection::vec(-20i32..20, 5..120),
            order in 1usize..5,
        ) {
            let values: Vec<f64> = raw.into_iter().map(f64::from).collect();
            let s = summarize_column(&values);
            prop_assume!(s.support_size() >= 2);
            let b = build_basis(&s, &values, order).unwrap();
            prop_assert!(b.order() < s.support_size());
            let n = values.len() as f64;
            for j in 0..b.order() {
                let cj = b.values().column(j);
                prop_assert!((cj.sum() / n).abs() < 1e-10);
                for l in 0..b.order() {
                    let ip = cj.dot(&b.values().column(l)) / n;
                    let target = if j == l { 1.0 } else { 0.0 };
                    prop_assert!((ip - target).abs() < 1e-8);
                }
            }
        }

        #[test]
        fn regram_schmidt_is_idempotent(raw in prop::collection::vec(-1000i32..1000, 6..80)) {
            let values: Vec<f64> = raw.into_iter().map(f64::from).collect();
            let s = summarize_column(&values);
            prop_assume!(s.support_size() >= 5);
            let b = build_basis(&s, &values, 4).unwrap();
            let cols: Vec<Vec<f64>> = (1..=b.order()).map(|l| b.column(l).unwrap()).collect();
            let again = orthonormalize(&cols);
            prop_assert_eq!(again.len(), cols.len());
            for (a, c) in again.iter().zip(&cols) {
                for (x, y) in a.iter().zip(c) {
                    prop_assert!((x - y).abs() < 1e-8);
                }
            }
        }
    }
}
