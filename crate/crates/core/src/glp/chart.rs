use serde::Serialize;

use crate::data::Dataset;
use crate::error::{GlpError, Result};
use crate::kernel::{feature_map, fuse, gram_with, LpKernel};

use super::{excluded_warning, test_kernel, GlpConfig, GlpResult};

#[derive(Debug, Clone)]
pub struct ChartConfig {
    pub max_component: usize,
    pub alpha: f64,
    pub glp: GlpConfig,
}

impl Default for ChartConfig {
    fn default() -> Self {
        Self {
            max_component: 4,
            alpha: 0.05,
            glp: GlpConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ChartRow {
    pub order: usize,
    pub glp: f64,
    pub p_value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_permutation: Option<f64>,
    pub significant: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct OverallRow {
    pub glp: f64,
    pub p_value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_permutation: Option<f64>,
    pub df: usize,
    /// Orders whose kernels fed the overall test.
    pub orders: Vec<usize>,
    /// False when no component survived adjustment and the best single
    /// component is reported instead.
    pub significant: bool,
}

/// Per-order decomposition plus the fused overall test.
#[derive(Debug, Clone, Serialize)]
pub struct GlpChart {
    pub components: Vec<ChartRow>,
    pub overall: OverallRow,
    pub fused_orders: Vec<usize>,
    pub skipped_orders: Vec<usize>,
    pub warnings: Vec<String>,
    #[serde(skip)]
    pub results: Vec<GlpResult>,
    #[serde(skip)]
    pub overall_result: Option<GlpResult>,
}

/// Holm step-down rejections at level `alpha`, in input order.
pub fn holm_flags(p_values: &[f64], alpha: f64) -> Vec<bool> {
    let m = p_values.len();
    let mut idx: Vec<usize> = (0..m).collect();
    idx.sort_by(|&a, &b| p_values[a].total_cmp(&p_values[b]).then(a.cmp(&b)));
    let mut flags = vec![false; m];
    for (rank, &i) in idx.iter().enumerate() {
        if p_values[i] <= alpha / (m - rank) as f64 {
            flags[i] = true;
        } else {
            break;
        }
    }
    flags
}

/// Runs the test for orders `1..=max_component`, flags components by Holm's
/// procedure and fuses the flagged kernels for the overall row.
pub fn glp_chart(dataset: &Dataset, config: &ChartConfig) -> Result<GlpChart> {
    if config.max_component == 0 {
        return Err(GlpError::InvalidArgument(
            "max_component must be at least 1".into(),
        ));
    }
    if !(config.alpha > 0.0 && config.alpha < 1.0) {
        return Err(GlpError::InvalidArgument(format!(
            "alpha must lie in (0, 1), got {}",
            config.alpha
        )));
    }
    let mut warnings = Vec::new();
    let mut skipped_orders = Vec::new();
    let mut kernels: Vec<LpKernel> = Vec::new();
    let mut results: Vec<GlpResult> = Vec::new();

    for order in 1..=config.max_component {
        let map = match feature_map(dataset, order) {
            Ok(m) => m,
            Err(GlpError::EmptyFeatureMap { .. }) => {
                warnings.push(format!(
                    "order {order}: no column admits this order; skipped"
                ));
                skipped_orders.push(order);
                continue;
            }
            Err(e) => return Err(e),
        };
        if !map.excluded_columns().is_empty() {
            warnings.push(excluded_warning(dataset, order, map.excluded_columns()));
        }
        let kernel = gram_with(&map, config.glp.c, config.glp.inner_product)?;
        let result = test_kernel(dataset.y(), dataset.k(), &kernel, &config.glp)?;
        warnings.extend(result.warnings.iter().cloned());
        kernels.push(kernel);
        results.push(result);
    }
    if results.is_empty() {
        return Err(GlpError::EmptyChart);
    }

    let p_values: Vec<f64> = results.iter().map(|r| r.p_value()).collect();
    let flags = holm_flags(&p_values, config.alpha);
    let components: Vec<ChartRow> = results
        .iter()
        .zip(&flags)
        .map(|(r, &significant)| ChartRow {
            order: r.order.orders()[0],
            glp: r.statistic,
            p_value: r.p_asymptotic,
            p_permutation: r.p_permutation,
            significant,
        })
        .collect();

    let flagged: Vec<usize> = (0..results.len()).filter(|&i| flags[i]).collect();
    let (overall_result, fused_orders, significant) = if flagged.is_empty() {
        let best = (0..results.len())
            .min_by(|&a, &b| p_values[a].total_cmp(&p_values[b]).then(a.cmp(&b)))
            .unwrap();
        (results[best].clone(), Vec::new(), false)
    } else {
        let chosen: Vec<LpKernel> = flagged.iter().map(|&i| kernels[i].clone()).collect();
        let fused = fuse(&chosen)?;
        let r = test_kernel(dataset.y(), dataset.k(), &fused, &config.glp)?;
        for w in &r.warnings {
            if !warnings.contains(w) {
                warnings.push(w.clone());
            }
        }
        let orders = flagged.iter().map(|&i| components[i].order).collect();
        (r, orders, true)
    };

    let overall = OverallRow {
        glp: overall_result.statistic,
        p_value: overall_result.p_asymptotic,
        p_permutation: overall_result.p_permutation,
        df: overall_result.df,
        orders: overall_result.order.orders(),
        significant,
    };
    Ok(GlpChart {
        components,
        overall,
        fused_orders,
        skipped_orders,
        warnings,
        results,
        overall_result: Some(overall_result),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn holm_step_down() {
        assert_eq!(
            holm_flags(&[0.01, 0.04, 0.03, 0.005], 0.05),
            vec![true, false, false, true]
        );
        assert_eq!(holm_flags(&[0.0125, 0.5], 0.05), vec![true, false]);
        assert_eq!(holm_flags(&[0.03, 0.03], 0.05), vec![false, false]);
        assert_eq!(
            holm_flags(&[0.001, 0.02, 0.04], 0.05),
            vec![true, true, true]
        );
    }

    fn null_dataset(seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(40, 6, |_, _| StandardNormal.sample(&mut rng));
        let y: Vec<usize> = (0..40).map(|i| 1 + i % 2).collect();
        Dataset::new(x, &y).unwrap()
    }

    #[test]
    fn fallback_when_nothing_significant() {
        let mut seen = false;
        for seed in 0..10 {
            let chart = glp_chart(&null_dataset(seed), &ChartConfig::default()).unwrap();
            if chart.components.iter().any(|c| c.significant) {
                continue;
            }
            seen = true;
            assert!(chart.fused_orders.is_empty());
            assert!(!chart.overall.significant);
            let best = chart
                .components
                .iter()
                .min_by(|a, b| a.p_value.total_cmp(&b.p_value))
                .unwrap();
            assert_eq!(chart.overall.orders, vec![best.order]);
            assert_eq!(chart.overall.p_value, best.p_value);
            break;
        }
        assert!(seen);
    }

    #[test]
    fn binary_data_skips_higher_orders() {
        let x = DMatrix::from_fn(20, 3, |i, j| ((i + j) % 2) as f64);
        let y: Vec<usize> = (0..20).map(|i| 1 + i / 10).collect();
        let ds = Dataset::new(x, &y).unwrap();
        let chart = glp_chart(&ds, &ChartConfig::default()).unwrap();
        assert_eq!(chart.components.len(), 1);
        assert_eq!(chart.skipped_orders, vec![2, 3, 4]);
    }

    #[test]
    fn chart_is_deterministic() {
        let ds = null_dataset(77);
        let a = serde_json::to_string(&glp_chart(&ds, &ChartConfig::default()).unwrap()).unwrap();
        let b = serde_json::to_string(&glp_chart(&ds, &ChartConfig::default()).unwrap()).unwrap();
        assert_eq!(a, b);
    }
}
