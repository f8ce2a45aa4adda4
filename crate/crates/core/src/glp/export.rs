use nalgebra::DMatrix;

use crate::data::Dataset;
use crate::error::{GlpError, Result};
use crate::kernel::feature_map;

/// Concatenated LP feature maps `[T_1 | T_2 | ...]` for downstream models.
#[derive(Debug, Clone)]
pub struct FeatureExport {
    pub matrix: DMatrix<f64>,
    /// `T{order}_{column}` for each matrix column.
    pub column_names: Vec<String>,
    pub skipped_orders: Vec<usize>,
}

impl FeatureExport {
    /// CSV with a leading `label` column holding the original group names.
    pub fn write_csv<W: std::io::Write>(&self, dataset: &Dataset, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        let mut header = vec!["label".to_string()];
        header.extend(self.column_names.iter().cloned());
        wtr.write_record(&header)?;
        for (i, row) in self.matrix.row_iter().enumerate() {
            let mut rec = vec![dataset.group_names()[dataset.y()[i] - 1].clone()];
            rec.extend(row.iter().map(|v| v.to_string()));
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

pub fn export_lp_features(dataset: &Dataset, orders: &[usize]) -> Result<FeatureExport> {
    if orders.is_empty() {
        return Err(GlpError::InvalidArgument("no LP orders requested".into()));
    }
    let mut blocks = Vec::new();
    let mut column_names = Vec::new();
    let mut skipped_orders = Vec::new();
    let mut last_err = None;
    for &order in orders {
        match feature_map(dataset, order) {
            Ok(map) => {
                column_names.extend(
                    map.kept_columns()
                        .iter()
                        .map(|&j| format!("T{order}_{}", dataset.column_name(j))),
                );
                blocks.push(map.values().clone());
            }
            Err(e @ GlpError::EmptyFeatureMap { .. }) => {
                skipped_orders.push(order);
                last_err = Some(e);
            }
            Err(e) => return Err(e),
        }
    }
    if blocks.is_empty() {
        return Err(last_err.unwrap_or(GlpError::EmptyFeatureMap { order: orders[0] }));
    }
    let n = dataset.n();
    let total: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut matrix = DMatrix::zeros(n, total);
    let mut offset = 0;
    for b in &blocks {
        matrix.columns_mut(offset, b.ncols()).copy_from(b);
        offset += b.ncols();
    }
    Ok(FeatureExport {
        matrix,
        column_names,
        skipped_orders,
    })
}
