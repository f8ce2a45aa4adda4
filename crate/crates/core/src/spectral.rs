//! Normalized-Laplacian spectral embedding of a kernel graph and the
//! normalized-cut objective it relaxes.

use nalgebra::{DMatrix, DVector};

use crate::error::{GlpError, Result};

/// Relative gap below which two eigenvalues are treated as tied.
const EIGEN_TIE_TOLERANCE: f64 = 1e-8;

/// Degree vector `W 1`.
pub fn degrees(w: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(w.nrows(), w.row_iter().map(|r| r.sum()))
}

/// `D^{-1/2} W D^{-1/2}` for a symmetric non-negative weight matrix.
pub fn laplacian(w: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if w.nrows() != w.ncols() {
        return Err(GlpError::DimensionMismatch(format!(
            "weight matrix is {}x{}",
            w.nrows(),
            w.ncols()
        )));
    }
    let deg = degrees(w);
    if let Some(row) = deg.iter().position(|&d| !(d > 0.0)) {
        return Err(GlpError::IsolatedVertex { row });
    }
    let inv_sqrt: Vec<f64> = deg.iter().map(|d| 1.0 / d.sqrt()).collect();
    let n = w.nrows();
    let mut lap = DMatrix::zeros(n, n);
    for j in 0..n {
        for i in j..n {
            let v = inv_sqrt[i] * w[(i, j)] * inv_sqrt[j];
            lap[(i, j)] = v;
            lap[(j, i)] = v;
        }
    }
    Ok(lap)
}

/// Leading non-trivial eigenpairs of a normalized Laplacian.
#[derive(Debug, Clone)]
pub struct SpectralEmbedding {
    eigenvalues: Vec<f64>,
    u: DMatrix<f64>,
    trivial_value: f64,
    all_eigenvalues: Vec<f64>,
    unstable: bool,
}

impl SpectralEmbedding {
    /// The `k - 1` retained eigenvalues, descending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// n×(k-1) matrix of retained eigenvectors.
    pub fn u(&self) -> &DMatrix<f64> {
        &self.u
    }

    /// The discarded top eigenvalue.
    pub fn trivial_value(&self) -> f64 {
        self.trivial_value
    }

    /// Whole spectrum, descending.
    pub fn spectrum(&self) -> &[f64] {
        &self.all_eigenvalues
    }

    /// Set when a tied eigenvalue straddles the retained/discarded boundary,
    /// which makes the retained subspace ill-defined.
    pub fn is_unstable(&self) -> bool {
        self.unstable
    }

    /// Replaces `u` (used to check sign/rotation invariances).
    pub fn with_u(mut self, u: DMatrix<f64>) -> Self {
        self.u = u;
        self
    }
}

/// Full symmetric eigendecomposition; drops the top eigenpair and keeps the
/// next `k - 1`.
pub fn embed(lap: &DMatrix<f64>, k: usize) -> Result<SpectralEmbedding> {
    let n = lap.nrows();
    if k < 2 || k > n {
        return Err(GlpError::InvalidArgument(format!(
            "embedding needs 2 <= k <= n, got k = {k}, n = {n}"
        )));
    }
    if lap.iter().any(|v| !v.is_finite()) {
        return Err(GlpError::Eigen("matrix has non-finite entries".into()));
    }
    let eig = lap.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let all_eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    if all_eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(GlpError::Eigen("non-finite eigenvalue".into()));
    }

    let retained = &order[1..k];
    let mut u = DMatrix::zeros(n, k - 1);
    for (c, &idx) in retained.iter().enumerate() {
        let mut v = eig.eigenvectors.column(idx).clone_owned();
        // Fix the sign so the first sizeable entry is positive.
        if let Some(first) = v.iter().find(|x| x.abs() > 1e-12) {
            if *first < 0.0 {
                v.neg_mut();
            }
        }
        u.set_column(c, &v);
    }

    let scale = all_eigenvalues[0].abs().max(1.0);
    let tied = |a: f64, b: f64| (a - b).abs() <= EIGEN_TIE_TOLERANCE * scale;
    let mut unstable = tied(all_eigenvalues[0], all_eigenvalues[1]);
    if k < n {
        unstable |= tied(all_eigenvalues[k - 1], all_eigenvalues[k]);
    }

    Ok(SpectralEmbedding {
        eigenvalues: all_eigenvalues[1..k].to_vec(),
        u,
        trivial_value: all_eigenvalues[0],
        all_eigenvalues,
        unstable,
    })
}

fn partition_parts(n: usize, partition: &[usize]) -> Result<usize> {
    if partition.len() != n {
        return Err(GlpError::DimensionMismatch(format!(
            "partition has {} labels for {n} vertices",
            partition.len()
        )));
    }
    if partition.contains(&0) {
        return Err(GlpError::InvalidArgument(
            "partition labels start at 1".into(),
        ));
    }
    let k = partition.iter().copied().max().unwrap_or(0);
    for g in 1..=k {
        if !partition.contains(&g) {
            return Err(GlpError::EmptyPartition(g));
        }
    }
    Ok(k)
}

/// `Σ_g Cut(V_g, V \ V_g) / Vol(V_g)` for labels in `1..=k`.
pub fn ncut_value(w: &DMatrix<f64>, partition: &[usize]) -> Result<f64> {
    let n = w.nrows();
    let k = partition_parts(n, partition)?;
    let mut cut = vec![0.0; k];
    let mut vol = vec![0.0; k];
    for i in 0..n {
        let gi = partition[i] - 1;
        for j in 0..n {
            vol[gi] += w[(i, j)];
            if partition[j] - 1 != gi {
                cut[gi] += w[(i, j)];
            }
        }
    }
    Ok(cut.iter().zip(&vol).map(|(c, v)| c / v).sum())
}

/// Scaled indicator matrix with `ψ[j,g] = sqrt(deg_j / Vol(V_g))` on `V_g`.
pub fn partition_indicator(w: &DMatrix<f64>, partition: &[usize]) -> Result<DMatrix<f64>> {
    let n = w.nrows();
    let k = partition_parts(n, partition)?;
    let deg = degrees(w);
    let mut vol = vec![0.0; k];
    for (i, &g) in partition.iter().enumerate() {
        vol[g - 1] += deg[i];
    }
    Ok(DMatrix::from_fn(n, k, |j, g| {
        if partition[j] == g + 1 {
            (deg[j] / vol[g]).sqrt()
        } else {
            0.0
        }
    }))
}

/// Writes the full spectrum followed by the retained eigenvectors as CSV.
pub fn write_embedding_csv<W: std::io::Write>(emb: &SpectralEmbedding, out: W) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().flexible(true).from_writer(out);
    wtr.write_record(["section", "index", "values"])?;
    for (i, v) in emb.all_eigenvalues.iter().enumerate() {
        wtr.write_record(["eigenvalue".to_string(), (i + 1).to_string(), v.to_string()])?;
    }
    for (i, row) in emb.u.row_iter().enumerate() {
        let mut rec = vec!["u".to_string(), (i + 1).to_string()];
        rec.extend(row.iter().map(|v| v.to_string()));
        wtr.write_record(rec)?;
    }
    wtr.flush()?;
    Ok(())
}
