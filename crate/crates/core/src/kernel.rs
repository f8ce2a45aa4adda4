//! LP feature maps and the degree-2 polynomial graph kernel built on them.

use std::fmt;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{summarize_column, Dataset};
use crate::error::{GlpError, Result};
use crate::lpbasis::build_basis;

/// Default kernel offset `c`.
pub const DEFAULT_OFFSET: f64 = 0.5;

/// Order-ℓ LP transform of every usable column.
#[derive(Debug, Clone)]
pub struct LpFeatureMap {
    order: usize,
    values: DMatrix<f64>,
    kept_columns: Vec<usize>,
    excluded_columns: Vec<usize>,
}

impl LpFeatureMap {
    pub fn order(&self) -> usize {
        self.order
    }

    /// n×d' matrix; column j is `T_ℓ` of feature `kept_columns[j]`.
    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn kept_columns(&self) -> &[usize] {
        &self.kept_columns
    }

    /// Features with fewer than `order + 1` distinct values.
    pub fn excluded_columns(&self) -> &[usize] {
        &self.excluded_columns
    }
}

/// Computes the order-`order` LP feature map, dropping features that do not
/// admit a basis function of that order.
pub fn feature_map(dataset: &Dataset, order: usize) -> Result<LpFeatureMap> {
    if order == 0 {
        return Err(GlpError::InvalidArgument(
            "LP order must be at least 1".into(),
        ));
    }
    let x = dataset.x();
    let columns: Vec<Option<Vec<f64>>> = (0..dataset.d())
        .into_par_iter()
        .map(|j| {
            let col: Vec<f64> = x.column(j).iter().copied().collect();
            let summary = summarize_column(&col);
            if summary.support_size() <= order {
                return None;
            }
            build_basis(&summary, &col, order)
                .ok()
                .and_then(|b| b.column(order))
        })
        .collect();

    let mut kept_columns = Vec::new();
    let mut excluded_columns = Vec::new();
    for (j, c) in columns.iter().enumerate() {
        match c {
            Some(_) => kept_columns.push(j),
            None => excluded_columns.push(j),
        }
    }
    if kept_columns.is_empty() {
        return Err(GlpError::EmptyFeatureMap { order });
    }
    let kept: Vec<Vec<f64>> = columns.into_iter().flatten().collect();
    let values = DMatrix::from_fn(dataset.n(), kept.len(), |i, j| kept[j][i]);
    Ok(LpFeatureMap {
        order,
        values,
        kept_columns,
        excluded_columns,
    })
}

/// Which LP orders a kernel was built from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelOrder {
    Single(usize),
    Fused(Vec<usize>),
}

impl KernelOrder {
    pub fn orders(&self) -> Vec<usize> {
        match self {
            KernelOrder::Single(l) => vec![*l],
            KernelOrder::Fused(v) => v.clone(),
        }
    }
}

impl fmt::Display for KernelOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelOrder::Single(l) => write!(f, "{l}"),
            KernelOrder::Fused(v) => {
                let parts: Vec<String> = v.iter().map(|l| l.to_string()).collect();
                write!(f, "fused{{{}}}", parts.join(","))
            }
        }
    }
}

/// Dense n×n kernel matrix `w(i,j) = (c + <φ_i, φ_j>)²` or a sum of such.
#[derive(Debug, Clone)]
pub struct LpKernel {
    order: KernelOrder,
    w: DMatrix<f64>,
    c: f64,
}

impl LpKernel {
    pub fn order(&self) -> &KernelOrder {
        &self.order
    }

    pub fn w(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn n(&self) -> usize {
        self.w.nrows()
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.w
    }
}

/// How feature vectors are paired inside the kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnerProduct {
    /// `Σ_m φ_im φ_jm`.
    Sum,
    /// `(1/d') Σ_m φ_im φ_jm`, so the offset `c` is on the scale of a
    /// single standardized feature whatever the dimension.
    #[default]
    Mean,
}

/// `w(i,j) = (c + Σ_m φ_im φ_jm)²`.
pub fn gram(map: &LpFeatureMap, c: f64) -> Result<LpKernel> {
    gram_with(map, c, InnerProduct::Sum)
}

/// Kernel matrix with the chosen feature pairing.
pub fn gram_with(map: &LpFeatureMap, c: f64, inner: InnerProduct) -> Result<LpKernel> {
    if !(c >= 0.0) || !c.is_finite() {
        return Err(GlpError::InvalidArgument(format!(
            "kernel offset c must be a finite non-negative number, got {c}"
        )));
    }
    let phi = map.values();
    let mut w = phi * phi.transpose();
    if inner == InnerProduct::Mean {
        w /= phi.ncols() as f64;
    }
    // Mirror the upper triangle so the result is exactly symmetric.
    let n = w.nrows();
    for i in 0..n {
        for j in i..n {
            let v = (c + w[(i, j)]).powi(2);
            w[(i, j)] = v;
            w[(j, i)] = v;
        }
    }
    Ok(LpKernel {
        order: KernelOrder::Single(map.order()),
        w,
        c,
    })
}

/// Entrywise sum of kernels built on the same n samples.
pub fn fuse(kernels: &[LpKernel]) -> Result<LpKernel> {
    let first = kernels.first().ok_or(GlpError::EmptyKernelList)?;
    let n = first.n();
    let mut w = first.w.clone();
    let mut orders = first.order.orders();
    for k in &kernels[1..] {
        if k.n() != n {
            return Err(GlpError::DimensionMismatch(format!(
                "cannot fuse kernels of size {n} and {}",
                k.n()
            )));
        }
        w += &k.w;
        orders.extend(k.order.orders());
    }
    let order = if kernels.len() == 1 {
        first.order.clone()
    } else {
        KernelOrder::Fused(orders)
    };
    Ok(LpKernel {
        order,
        w,
        c: first.c,
    })
}

/// Writes `w` as headerless CSV, one row per sample.
pub fn write_kernel_csv<W: std::io::Write>(kernel: &LpKernel, out: W) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    for row in kernel.w.row_iter() {
        wtr.write_record(row.iter().map(|v| v.to_string()))?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random_dataset(n: usize, d: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(n, d, |_, _| StandardNormal.sample(&mut rng));
        let y: Vec<usize> = (0..n).map(|i| 1 + i % 2).collect();
        Dataset::new(x, &y).unwrap()
    }

    #[test]
    fn binary_data_has_no_second_order() {
        let x = DMatrix::from_row_slice(4, 2, &[0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0]);
        let ds = Dataset::new(x, &[1, 1, 2, 2]).unwrap();
        assert!(feature_map(&ds, 1).is_ok());
        assert!(matches!(
            feature_map(&ds, 2),
            Err(GlpError::EmptyFeatureMap { order: 2 })
        ));
    }

    #[test]
    fn continuous_columns_all_kept() {
        let ds = random_dataset(30, 500, 1);
        let fm = feature_map(&ds, 1).unwrap();
        assert_eq!(fm.kept_columns().len(), 500);
        assert!(fm.excluded_columns().is_empty());
    }

    #[test]
    fn constant_column_excluded() {
        let mut x = random_dataset(20, 10, 2).x().clone();
        x.column_mut(3).fill(7.0);
        let ds = Dataset::new(x, &(0..20).map(|i| 1 + i % 2).collect::<Vec<_>>()).unwrap();
        let fm = feature_map(&ds, 1).unwrap();
        assert_eq!(fm.values().ncols(), 9);
        assert_eq!(fm.excluded_columns(), &[3]);
    }

    #[test]
    fn feature_columns_standardised() {
        let ds = random_dataset(40, 8, 3);
        for order in 1..=4 {
            let fm = feature_map(&ds, order).unwrap();
            let n = 40.0;
            for col in fm.values().column_iter() {
                assert!((col.sum() / n).abs() < 1e-8);
                assert!((col.dot(&col) / n - 1.0).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn gram_arithmetic() {
        let fm = LpFeatureMap {
            order: 1,
            values: DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 1.0, 1.0]),
            kept_columns: vec![0, 1],
            excluded_columns: vec![],
        };
        let k = gram(&fm, 0.5).unwrap();
        assert_eq!(k.w()[(0, 1)], 4.0);
        assert_eq!(k.w()[(1, 0)], 4.0);

        let zero = LpFeatureMap {
            order: 1,
            values: DMatrix::zeros(3, 2),
            kept_columns: vec![0, 1],
            excluded_columns: vec![],
        };
        let k = gram(&zero, 0.5).unwrap();
        assert!(k.w().iter().all(|&v| v == 0.25));
    }

    #[test]
    fn mean_pairing_divides_by_dimension() {
        let fm = LpFeatureMap {
            order: 1,
            values: DMatrix::from_row_slice(2, 3, &[1.0, 1.0, 1.0, 1.0, 0.5, 0.0]),
            kept_columns: vec![0, 1, 2],
            excluded_columns: vec![],
        };
        let k = gram_with(&fm, 0.5, InnerProduct::Mean).unwrap();
        assert_eq!(k.w()[(0, 1)], 1.0);
        assert_eq!(k.w()[(0, 0)], 2.25);
    }

    #[test]
    fn negative_offset_rejected() {
        let fm = feature_map(&random_dataset(6, 2, 4), 1).unwrap();
        assert!(gram(&fm, -0.1).is_err());
    }

    #[test]
    fn fuse_behaviour() {
        let ds = random_dataset(12, 5, 5);
        let w1 = gram(&feature_map(&ds, 1).unwrap(), 0.5).unwrap();
        let w2 = gram(&feature_map(&ds, 2).unwrap(), 0.5).unwrap();
        let single = fuse(std::slice::from_ref(&w1)).unwrap();
        assert_eq!(single.w(), w1.w());
        assert_eq!(single.order(), &KernelOrder::Single(1));
        let both = fuse(&[w1.clone(), w2.clone()]).unwrap();
        assert_eq!(both.w(), &(w1.w() + w2.w()));
        assert_eq!(both.order(), &KernelOrder::Fused(vec![1, 2]));
        assert_eq!(both.order().to_string(), "fused{1,2}");
        let doubled = fuse(&[w1.clone(), w1.clone()]).unwrap();
        assert_eq!(doubled.w(), &(w1.w() * 2.0));
        assert!(matches!(fuse(&[]), Err(GlpError::EmptyKernelList)));
        let other = gram(&feature_map(&random_dataset(10, 5, 6), 1).unwrap(), 0.5).unwrap();
        assert!(fuse(&[w1, other]).is_err());
    }

    fn min_eigenvalue(w: &DMatrix<f64>) -> f64 {
        w.clone().symmetric_eigen().eigenvalues.min()
    }

    #[test]
    fn kernels_are_psd() {
        let ds = random_dataset(25, 40, 7);
        let w1 = gram(&feature_map(&ds, 1).unwrap(), 0.5).unwrap();
        let w2 = gram(&feature_map(&ds, 2).unwrap(), 0.5).unwrap();
        let fused = fuse(&[w1.clone(), w2.clone()]).unwrap();
        for k in [&w1, &w2, &fused] {
            let w = k.w();
            assert!(w.iter().all(|&v| v >= 0.0));
            assert_eq!(w, &w.transpose());
            assert!(min_eigenvalue(w) >= -1e-8 * w.trace());
        }
    }

    #[test]
    fn three_sample_location_blocks() {
        // 3 groups of 25, shifts 0 / 1.5 / 3 in d = 500.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let shifts = [0.0, 1.5, 3.0];
        let n = 75;
        let x = DMatrix::from_fn(n, 500, |i, _| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z + shifts[i / 25]
        });
        let y: Vec<usize> = (0..n).map(|i| 1 + i / 25).collect();
        let ds = Dataset::new(x, &y).unwrap();
        let w = gram_with(&feature_map(&ds, 1).unwrap(), 0.5, InnerProduct::Mean).unwrap();
        let block_mean = |a: usize, b: usize| {
            let mut s = 0.0;
            let mut c = 0.0;
            for i in a * 25..(a + 1) * 25 {
                for j in b * 25..(b + 1) * 25 {
                    if i != j {
                        s += w.w()[(i, j)];
                        c += 1.0;
                    }
                }
            }
            s / c
        };
        for a in 0..3 {
            for b in a + 1..3 {
                let within = 0.5 * (block_mean(a, a) + block_mean(b, b));
                assert!(within > block_mean(a, b), "{a},{b}");
            }
        }
    }

    proptest! {
        #[test]
        fn gram_invariant_to_column_order(seed in any::<u64>()) {
            let ds = random_dataset(10, 6, seed);
            let fm = feature_map(&ds, 1).unwrap();
            let mut perm = fm.clone();
            let cols: Vec<_> = (0..6).rev().map(|j| fm.values().column(j).clone_owned()).collect();
            perm.values = DMatrix::from_columns(&cols);
            let a = gram(&fm, 0.5).unwrap();
            let b = gram(&perm, 0.5).unwrap();
            for (x, y) in a.w().iter().zip(b.w().iter()) {
                prop_assert!((x - y).abs() < 1e-10 * (1.0 + x.abs()));
            }
        }

        #[test]
        fn first_order_kernel_is_rank_invariant(seed in any::<u64>()) {
            let ds = random_dataset(15, 4, seed);
            // exp(x) and 3x^3 + x are strictly increasing.
            let transformed = ds.x().map_with_location(|_, j, v| {
                if j % 2 == 0 { v.exp() } else { 3.0 * v.powi(3) + v }
            });
            let ds2 = Dataset::new(transformed, ds.y()).unwrap();
            let a = gram(&feature_map(&ds, 1).unwrap(), 0.5).unwrap();
            let b = gram(&feature_map(&ds2, 1).unwrap(), 0.5).unwrap();
            prop_assert_eq!(a.w(), b.w());
        }
    }
}
