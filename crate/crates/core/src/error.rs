use thiserror::Error;

pub type Result<T> = std::result::Result<T, GlpError>;

#[derive(Debug, Error)]
pub enum GlpError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("missing value at row {row}, column {column}")]
    MissingValue { row: usize, column: String },

    #[error("label column {0} not found")]
    LabelColumnNotFound(String),

    #[error("input has no covariate columns")]
    NoCovariates,

    #[error("group {label:?} has {count} observation(s); at least 2 are required")]
    DegenerateGroup { label: String, count: usize },

    #[error("only {0} distinct group label(s); at least 2 groups are required")]
    SingleGroup(usize),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("column is constant; no LP basis exists")]
    DegenerateColumn,

    #[error("no feature admits an order-{order} LP basis")]
    EmptyFeatureMap { order: usize },

    #[error("vertex {row} has zero degree; the Laplacian cannot be normalized")]
    IsolatedVertex { row: usize },

    #[error("eigendecomposition failed: {0}")]
    Eigen(String),

    #[error("partition has an empty part (label {0})")]
    EmptyPartition(usize),

    #[error("label vector takes a single value; comeans need at least two categories")]
    DegenerateLabels,

    #[error("cannot fuse an empty list of kernels")]
    EmptyKernelList,

    #[error("every chart component was skipped")]
    EmptyChart,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl GlpError {
    /// True for errors caused by user-supplied settings rather than data or numerics.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            GlpError::Config(_) | GlpError::InvalidArgument(_) | GlpError::LabelColumnNotFound(_)
        )
    }
}
