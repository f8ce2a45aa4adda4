//! Graph-based LP nonparametric k-sample testing.
//!
//! Pipeline: LP-transform each covariate ([`lpbasis`]), build the polynomial
//! kernel graph ([`kernel`]), partition it by normalized-Laplacian spectral
//! clustering ([`spectral`], [`kmeans`]), and test dependence between the true
//! groups and the discovered communities ([`glp`]). [`sim`] reproduces null
//! calibration and power experiments.

// `!(x > 0.0)` style checks are deliberate: they send NaN down the error path.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod data;
pub mod error;
pub mod glp;
pub mod kernel;
pub mod kmeans;
pub mod lpbasis;
pub mod rng;
pub mod sim;
pub mod spectral;

pub use data::{
    load_csv, read_csv, summarize_column, ColumnSummary, CsvOptions, Dataset, LabelColumn,
};
pub use error::{GlpError, Result};
pub use glp::{glp_chart, glp_test, ChartConfig, GlpChart, GlpConfig, GlpResult};
