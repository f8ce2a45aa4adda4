//! Correlation of group labels with graph communities.
//!
//! The test builds a kernel graph from the covariates alone, cuts it into `k`
//! communities `Z` by spectral clustering, and then measures dependence between
//! `Y` and `Z` through the squared LP-comeans. Under the null, `n * GLP` is
//! approximately chi-square with `(k_y - 1)(k_z - 1)` degrees of freedom.

mod chart;
mod comean;
mod export;

pub use chart::{glp_chart, holm_flags, ChartConfig, ChartRow, GlpChart, OverallRow};
pub use comean::{comeans, glp_statistic, ComeanMatrix};
pub use export::{export_lp_features, FeatureExport};

use rand::seq::SliceRandom;
use serde::Serialize;

use crate::data::Dataset;
use crate::error::{GlpError, Result};
use crate::kernel::{feature_map, gram_with, InnerProduct, KernelOrder, LpKernel, DEFAULT_OFFSET};
use crate::kmeans::{kmeans, ClusterAssignment, KMeansConfig};
use crate::rng::{derive_seed, stream_rng};
use crate::spectral::{embed, laplacian, SpectralEmbedding};

const KMEANS_STREAM: u64 = 0;
const PERMUTATION_STREAM: u64 = 1;

/// Upper-tail chi-square probability of `n * statistic` with `df` degrees of freedom.
pub fn p_asymptotic(statistic: f64, n: usize, df: usize) -> f64 {
    let x = n as f64 * statistic;
    if df == 0 || !(x > 0.0) {
        return 1.0;
    }
    if x.is_infinite() {
        return 0.0;
    }
    statrs::function::gamma::checked_gamma_ur(df as f64 / 2.0, x / 2.0)
        .map(|p| p.clamp(0.0, 1.0))
        .unwrap_or(1.0)
}

/// Monte Carlo p-value with `b` random relabelings of `y`, holding `z` fixed.
///
/// Uses the add-one estimator `(1 + #{perm >= obs}) / (1 + b)`.
pub fn p_permutation(y: &[usize], z: &[usize], b: usize, seed: u64) -> Result<f64> {
    if b == 0 {
        return Err(GlpError::InvalidArgument(
            "need at least one permutation".into(),
        ));
    }
    if y.len() != z.len() {
        return Err(GlpError::DimensionMismatch(format!(
            "{} group labels vs {} cluster labels",
            y.len(),
            z.len()
        )));
    }
    let ty = comean::label_basis(y)?;
    let tz = comean::label_basis(z)?;
    let n = y.len();
    let observed = {
        let m = ty.transpose() * &tz;
        m.iter().map(|v| v * v).sum::<f64>()
    };
    // Shuffling y only permutes rows of its basis matrix.
    let (jy, jz) = (ty.ncols(), tz.ncols());
    let mut perm: Vec<usize> = (0..n).collect();
    let mut rng = stream_rng(seed, PERMUTATION_STREAM);
    let mut acc = vec![0.0; jy * jz];
    let mut hits = 0usize;
    for _ in 0..b {
        perm.shuffle(&mut rng);
        acc.iter_mut().for_each(|a| *a = 0.0);
        for (i, &pi) in perm.iter().enumerate() {
            for a in 0..jy {
                let t = ty[(pi, a)];
                for c in 0..jz {
                    acc[a * jz + c] += t * tz[(i, c)];
                }
            }
        }
        let stat: f64 = acc.iter().map(|v| v * v).sum();
        if stat >= observed * (1.0 - 1e-10) {
            hits += 1;
        }
    }
    Ok((1 + hits) as f64 / (1 + b) as f64)
}

#[derive(Debug, Clone)]
pub struct GlpConfig {
    /// Kernel offset.
    pub c: f64,
    pub inner_product: InnerProduct,
    pub seed: u64,
    /// Number of label permutations; zero disables the permutation p-value.
    pub permutations: usize,
    pub kmeans: KMeansConfig,
}

impl Default for GlpConfig {
    fn default() -> Self {
        Self {
            c: DEFAULT_OFFSET,
            inner_product: InnerProduct::default(),
            seed: 42,
            permutations: 0,
            kmeans: KMeansConfig::default(),
        }
    }
}

/// One GLP test on one (possibly fused) kernel.
#[derive(Debug, Clone)]
pub struct GlpResult {
    pub order: KernelOrder,
    pub statistic: f64,
    pub df: usize,
    pub n: usize,
    pub p_asymptotic: f64,
    pub p_permutation: Option<f64>,
    pub permutations: usize,
    pub comeans: Option<ComeanMatrix>,
    pub assignment: ClusterAssignment,
    pub embedding: SpectralEmbedding,
    pub warnings: Vec<String>,
}

impl GlpResult {
    /// The permutation p-value when one was computed, otherwise the asymptotic one.
    pub fn p_value(&self) -> f64 {
        self.p_permutation.unwrap_or(self.p_asymptotic)
    }

    pub fn summary(&self) -> TestSummary {
        TestSummary {
            order: self.order.to_string(),
            n: self.n,
            k: self.assignment.k,
            glp: self.statistic,
            df: self.df,
            p_value: self.p_asymptotic,
            p_permutation: self.p_permutation,
            permutations: self.permutations,
            clusters: self.assignment.support,
            warnings: self.warnings.clone(),
        }
    }
}

/// Serializable view of a [`GlpResult`].
#[derive(Debug, Clone, Serialize)]
pub struct TestSummary {
    pub order: String,
    pub n: usize,
    pub k: usize,
    pub glp: f64,
    pub df: usize,
    pub p_value: f64,
    pub p_permutation: Option<f64>,
    pub permutations: usize,
    pub clusters: usize,
    pub warnings: Vec<String>,
}

/// Runs Laplacian, embedding, clustering and the comean test on a kernel.
pub fn test_kernel(
    y: &[usize],
    k: usize,
    kernel: &LpKernel,
    config: &GlpConfig,
) -> Result<GlpResult> {
    let n = y.len();
    if kernel.n() != n {
        return Err(GlpError::DimensionMismatch(format!(
            "kernel has {} rows for {n} labels",
            kernel.n()
        )));
    }
    let mut warnings = Vec::new();
    let lap = laplacian(kernel.w())?;
    let embedding = embed(&lap, k)?;
    if embedding.is_unstable() {
        warnings.push(format!(
            "order {}: tied eigenvalues at the embedding boundary; communities may be unstable",
            kernel.order()
        ));
    }
    let assignment = kmeans(
        embedding.u(),
        k,
        derive_seed(config.seed, KMEANS_STREAM),
        &config.kmeans,
    )?;
    if assignment.is_degenerate() {
        warnings.push(format!(
            "order {}: clustering found {} non-empty communities out of {k}; degrees of freedom reduced",
            kernel.order(),
            assignment.support
        ));
    }

    let ky = y.iter().copied().max().unwrap_or(0);
    let (comeans, statistic, df) = if assignment.support < 2 {
        (None, 0.0, 0)
    } else {
        let cm = comeans(y, &assignment.z)?;
        let stat = glp_statistic(&cm);
        (Some(cm), stat, (ky - 1) * (assignment.support - 1))
    };
    let p_asym = p_asymptotic(statistic, n, df);
    let p_perm = if config.permutations > 0 {
        Some(if assignment.support < 2 {
            1.0
        } else {
            p_permutation(y, &assignment.z, config.permutations, config.seed)?
        })
    } else {
        None
    };

    Ok(GlpResult {
        order: kernel.order().clone(),
        statistic,
        df,
        n,
        p_asymptotic: p_asym,
        p_permutation: p_perm,
        permutations: config.permutations,
        comeans,
        assignment,
        embedding,
        warnings,
    })
}

/// The order-`order` GLP test on a dataset.
pub fn glp_test(dataset: &Dataset, order: usize, config: &GlpConfig) -> Result<GlpResult> {
    glp_test_with_kernel(dataset, order, config).map(|(r, _)| r)
}

/// Like [`glp_test`], also returning the kernel the graph was built from.
pub fn glp_test_with_kernel(
    dataset: &Dataset,
    order: usize,
    config: &GlpConfig,
) -> Result<(GlpResult, LpKernel)> {
    let map = feature_map(dataset, order)?;
    let kernel = gram_with(&map, config.c, config.inner_product)?;
    let mut result = test_kernel(dataset.y(), dataset.k(), &kernel, config)?;
    if !map.excluded_columns().is_empty() {
        result
            .warnings
            .insert(0, excluded_warning(dataset, order, map.excluded_columns()));
    }
    Ok((result, kernel))
}

pub(crate) fn excluded_warning(dataset: &Dataset, order: usize, excluded: &[usize]) -> String {
    let names: Vec<String> = excluded.iter().map(|&j| dataset.column_name(j)).collect();
    format!(
        "order {order}: {} column(s) with too few distinct values excluded: {}",
        excluded.len(),
        names.join(", ")
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn chi_square_tail_closed_forms() {
        // df = 2: exp(-x/2).
        for x in [0.5, 3.0, 10.0, 40.0] {
            let p = p_asymptotic(x, 1, 2);
            assert!((p - (-x / 2.0f64).exp()).abs() < 1e-12 * p.max(1e-300).max(1e-3));
        }
        // df = 4: exp(-x/2)(1 + x/2).
        for x in [0.5, 3.0, 10.0] {
            let p = p_asymptotic(x, 1, 4);
            let e = (-x / 2.0f64).exp() * (1.0 + x / 2.0);
            assert!((p - e).abs() < 1e-12);
        }
        assert_eq!(p_asymptotic(0.0, 50, 1), 1.0);
        assert_eq!(p_asymptotic(0.3, 50, 0), 1.0);
    }

    #[test]
    fn published_chart_arithmetic() {
        let p = p_asymptotic(0.209, 72, 1);
        assert!((p / 1.04e-4 - 1.0).abs() < 0.02, "{p}");
        let p = p_asymptotic(0.145, 50, 1);
        assert!((p / 0.007 - 1.0).abs() < 0.05, "{p}");
    }

    #[test]
    fn permutation_on_perfect_dependence() {
        let y: Vec<usize> = (0..40).map(|i| 1 + i % 2).collect();
        let p = p_permutation(&y, &y, 999, 3).unwrap();
        assert!(p < 0.01);
        assert!(p >= 1.0 / 1000.0);
    }

    #[test]
    fn single_permutation_bounds() {
        let y: Vec<usize> = (0..20).map(|i| 1 + i % 2).collect();
        let z: Vec<usize> = (0..20).map(|i| 1 + (i / 3) % 2).collect();
        for seed in 0..20 {
            let p = p_permutation(&y, &z, 1, seed).unwrap();
            assert!(p == 0.5 || p == 1.0);
        }
        assert!(p_permutation(&y, &z, 0, 0).is_err());
    }

    #[test]
    fn permutation_is_deterministic() {
        let y: Vec<usize> = (0..30).map(|i| 1 + i % 3).collect();
        let z: Vec<usize> = (0..30).map(|i| 1 + (i / 4) % 3).collect();
        assert_eq!(
            p_permutation(&y, &z, 200, 9).unwrap(),
            p_permutation(&y, &z, 200, 9).unwrap()
        );
    }

    #[test]
    fn duplicated_sample_has_small_statistic() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let half = DMatrix::from_fn(30, 20, |_, _| StandardNormal.sample(&mut rng));
        let x = DMatrix::from_fn(60, 20, |i, j| half[(i % 30, j)]);
        let y: Vec<usize> = (0..60).map(|i| 1 + i / 30).collect();
        let ds = Dataset::new(x, &y).unwrap();
        let r = glp_test(&ds, 1, &GlpConfig::default()).unwrap();
        assert!(r.statistic < 0.05, "{}", r.statistic);
    }

    #[test]
    fn three_sample_location_is_detected() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let shifts = [0.0, 1.5, 3.0];
        let x = DMatrix::from_fn(75, 500, |i, _| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z + shifts[i / 25]
        });
        let y: Vec<usize> = (0..75).map(|i| 1 + i / 25).collect();
        let ds = Dataset::new(x, &y).unwrap();
        let r = glp_test(&ds, 1, &GlpConfig::default()).unwrap();
        assert_eq!(r.df, 4);
        assert!(r.p_asymptotic < 1e-3, "{}", r.p_asymptotic);
    }
}
