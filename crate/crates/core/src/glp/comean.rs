use nalgebra::DMatrix;

use crate::data::summarize_column;
use crate::error::{GlpError, Result};
use crate::lpbasis::{build_basis, max_order};

/// Empirical LP-comeans `(1/n) Σ_i T_j(y_i) T_l(z_i)` for all `j < k_y`, `l < k_z`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComeanMatrix {
    values: DMatrix<f64>,
    n: usize,
}

impl ComeanMatrix {
    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Entry `LP[j, l]` with 1-based orders.
    pub fn get(&self, j: usize, l: usize) -> f64 {
        self.values[(j - 1, l - 1)]
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }
}

/// Full LP basis of a categorical vector, one row per observation.
pub(crate) fn label_basis(labels: &[usize]) -> Result<DMatrix<f64>> {
    let values: Vec<f64> = labels.iter().map(|&l| l as f64).collect();
    let summary = summarize_column(&values);
    if summary.support_size() < 2 {
        return Err(GlpError::DegenerateLabels);
    }
    let basis = build_basis(&summary, &values, max_order(&summary))?;
    Ok(basis.values().clone())
}

pub fn comeans(y: &[usize], z: &[usize]) -> Result<ComeanMatrix> {
    if y.len() != z.len() {
        return Err(GlpError::DimensionMismatch(format!(
            "{} group labels vs {} cluster labels",
            y.len(),
            z.len()
        )));
    }
    let ty = label_basis(y)?;
    let tz = label_basis(z)?;
    let n = y.len();
    let values = ty.transpose() * tz / n as f64;
    Ok(ComeanMatrix { values, n })
}

/// Sum of squared comeans.
pub fn glp_statistic(cm: &ComeanMatrix) -> f64 {
    cm.frobenius_sq()
}
