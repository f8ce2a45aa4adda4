//! Command-line front end.
//!
//! Results go to stdout (or `--output`), the resolved configuration and all
//! warnings go to stderr. Exit status is 0 on success, 2 for configuration
//! errors and 1 for data or numerical failures.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::data::{load_csv, CsvOptions, Dataset, LabelColumn};
use crate::error::{GlpError, Result};
use crate::glp::{
    export_lp_features, glp_chart, glp_test_with_kernel, ChartConfig, GlpChart, GlpConfig,
    TestSummary,
};
use crate::kernel::{write_kernel_csv, InnerProduct, DEFAULT_OFFSET};
use crate::sim::{
    calibrate_null, estimate_power, write_power_csv, CalibrationSettings, NullCalibration,
    PowerReport, PowerTest, ScenarioSpec,
};
use crate::spectral::write_embedding_csv;

#[derive(Debug, Parser)]
#[command(
    name = "glp",
    version,
    about = "Graph-based LP nonparametric k-sample test"
)]
pub struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "GLP_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Single-order GLP test.
    Test(TestArgs),
    /// Per-order decomposition with the fused overall test.
    Chart(ChartArgs),
    /// Write the LP feature matrix [T_1 | T_2 | ...] as CSV.
    Export(ExportArgs),
    /// Monte Carlo power for a scenario file.
    Power(PowerArgs),
    /// Compare asymptotic and permutation p-values under the null.
    Calibrate(CalibrateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Pretty,
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InnerArg {
    /// Average coordinate product (scale-free in the dimension).
    Mean,
    /// Raw dot product.
    Sum,
}

impl From<InnerArg> for InnerProduct {
    fn from(a: InnerArg) -> Self {
        match a {
            InnerArg::Mean => InnerProduct::Mean,
            InnerArg::Sum => InnerProduct::Sum,
        }
    }
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Input CSV file.
    #[arg(long, short)]
    pub input: PathBuf,
    /// Label column: header name or zero-based index.
    #[arg(long, default_value = "0")]
    pub label: String,
    /// The first row is data, not a header.
    #[arg(long)]
    pub no_header: bool,
}

impl DataArgs {
    fn options(&self) -> CsvOptions {
        CsvOptions {
            has_header: !self.no_header,
            label: LabelColumn::parse(&self.label),
        }
    }

    fn echo(&self) -> Value {
        json!({
            "input": self.input.display().to_string(),
            "label": self.label,
            "header": !self.no_header,
        })
    }
}

#[derive(Debug, Args)]
pub struct TestingArgs {
    /// Kernel offset c.
    #[arg(long = "c", default_value_t = DEFAULT_OFFSET)]
    pub c: f64,
    /// How feature rows are paired inside the kernel.
    #[arg(long, value_enum, default_value_t = InnerArg::Mean)]
    pub inner_product: InnerArg,
    /// Label permutations for the Monte Carlo p-value (0 = asymptotic only).
    #[arg(long, default_value_t = 0)]
    pub permutations: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
}

impl TestingArgs {
    fn config(&self) -> Result<GlpConfig> {
        if !(self.c >= 0.0 && self.c.is_finite()) {
            return Err(GlpError::Config(format!(
                "--c must be finite and non-negative, got {}",
                self.c
            )));
        }
        Ok(GlpConfig {
            c: self.c,
            inner_product: self.inner_product.into(),
            seed: self.seed,
            permutations: self.permutations,
            ..GlpConfig::default()
        })
    }

    fn echo(&self) -> Value {
        json!({
            "c": self.c,
            "inner_product": InnerProduct::from(self.inner_product),
            "permutations": self.permutations,
            "seed": self.seed,
        })
    }
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    #[arg(long, value_enum, default_value_t = Format::Pretty)]
    pub format: Format,
    /// Write results here instead of stdout.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TestArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// LP order of the kernel.
    #[arg(long, default_value_t = 1)]
    pub order: usize,
    #[command(flatten)]
    pub testing: TestingArgs,
    #[command(flatten)]
    pub out: OutputArgs,
    /// Write the n×n kernel matrix as CSV.
    #[arg(long)]
    pub dump_kernel: Option<PathBuf>,
    /// Write the spectral embedding as CSV.
    #[arg(long)]
    pub dump_embedding: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ChartArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Highest LP order in the chart.
    #[arg(long, default_value_t = 4)]
    pub components: usize,
    /// Family-wise level for flagging components.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[command(flatten)]
    pub testing: TestingArgs,
    #[command(flatten)]
    pub out: OutputArgs,
    /// Write the kernel of the overall test as CSV.
    #[arg(long)]
    pub dump_kernel: Option<PathBuf>,
    /// Write the spectral embedding of the overall test as CSV.
    #[arg(long)]
    pub dump_embedding: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// LP orders to concatenate.
    #[arg(long, value_delimiter = ',', default_values_t = [1usize, 2])]
    pub orders: Vec<usize>,
    /// Write the CSV here instead of stdout.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PowerArgs {
    /// Scenario JSON file.
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub reps: usize,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// LP order of the single-order test.
    #[arg(long, default_value_t = 1, conflicts_with = "chart")]
    pub order: usize,
    /// Use the chart (any Holm-flagged component) instead of one order.
    #[arg(long)]
    pub chart: bool,
    #[arg(long, default_value_t = 4)]
    pub components: usize,
    /// Dimensions to sweep; defaults to the scenario's own d.
    #[arg(long, value_delimiter = ',')]
    pub dims: Vec<usize>,
    /// Overrides the scenario's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long = "c", default_value_t = DEFAULT_OFFSET)]
    pub c: f64,
    #[arg(long, value_enum, default_value_t = InnerArg::Mean)]
    pub inner_product: InnerArg,
    #[arg(long, default_value_t = 0)]
    pub permutations: usize,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[arg(long, default_value_t = 10)]
    pub d: usize,
    #[arg(long, default_value_t = 50)]
    pub n1: usize,
    #[arg(long, default_value_t = 50)]
    pub n2: usize,
    #[arg(long, default_value_t = 100)]
    pub reps: usize,
    /// Permutations per replication.
    #[arg(long, default_value_t = 1000)]
    pub permutations: usize,
    #[arg(long, default_value_t = 1)]
    pub order: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long = "c", default_value_t = DEFAULT_OFFSET)]
    pub c: f64,
    #[arg(long, value_enum, default_value_t = InnerArg::Mean)]
    pub inner_product: InnerArg,
    /// Also write per-replication rows as CSV.
    #[arg(long)]
    pub rows: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("glp: error: {e}");
            if e.is_config() {
                2
            } else {
                1
            }
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(GlpError::Config("--threads must be at least 1".into()));
        }
        // A second initialisation (e.g. repeated in-process runs) keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global();
    }
    match cli.command {
        Command::Test(a) => run_test(a),
        Command::Chart(a) => run_chart(a),
        Command::Export(a) => run_export(a),
        Command::Power(a) => run_power(a),
        Command::Calibrate(a) => run_calibrate(a),
    }
}

fn echo_config(config: &Value) {
    eprintln!("glp: config {config}");
}

fn warn_all(warnings: &[String]) {
    for w in warnings {
        eprintln!("glp: warning: {w}");
    }
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json<T: Serialize>(value: &T, mut out: Box<dyn Write>) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn groups_json(ds: &Dataset) -> Vec<Value> {
    ds.group_names()
        .iter()
        .zip(ds.group_sizes())
        .map(|(name, size)| json!({ "name": name, "size": size }))
        .collect()
}

fn groups_line(ds: &Dataset) -> String {
    let parts: Vec<String> = ds
        .group_names()
        .iter()
        .zip(ds.group_sizes())
        .map(|(name, size)| format!("{name} ({size})"))
        .collect();
    format!(
        "n={} d={} k={}  groups: {}",
        ds.n(),
        ds.d(),
        ds.k(),
        parts.join(", ")
    )
}

fn fmt_p(p: f64) -> String {
    if p >= 1e-3 {
        format!("{p:.4}")
    } else {
        format!("{p:.3e}")
    }
}

fn run_test(a: TestArgs) -> Result<()> {
    if a.order == 0 {
        return Err(GlpError::Config("--order must be at least 1".into()));
    }
    let config = a.testing.config()?;
    let mut echo = json!({ "command": "test", "order": a.order, "format": a.out.format });
    merge(&mut echo, a.data.echo());
    merge(&mut echo, a.testing.echo());
    echo_config(&echo);

    let ds = load_csv(&a.data.input, &a.data.options())?;
    let (result, kernel) = glp_test_with_kernel(&ds, a.order, &config)?;
    warn_all(&result.warnings);
    if let Some(p) = &a.dump_kernel {
        write_kernel_csv(&kernel, BufWriter::new(File::create(p)?))?;
    }
    if let Some(p) = &a.dump_embedding {
        write_embedding_csv(&result.embedding, BufWriter::new(File::create(p)?))?;
    }
    let summary = result.summary();
    let mut out = sink(a.out.output.as_deref())?;
    match a.out.format {
        Format::Json => {
            #[derive(Serialize)]
            struct TestOutput<'a> {
                config: &'a Value,
                groups: Vec<Value>,
                #[serde(flatten)]
                result: &'a TestSummary,
            }
            write_json(
                &TestOutput {
                    config: &echo,
                    groups: groups_json(&ds),
                    result: &summary,
                },
                out,
            )
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record([
                "order",
                "n",
                "k",
                "glp",
                "df",
                "p_value",
                "p_permutation",
                "clusters",
            ])?;
            w.write_record([
                summary.order.clone(),
                summary.n.to_string(),
                summary.k.to_string(),
                summary.glp.to_string(),
                summary.df.to_string(),
                summary.p_value.to_string(),
                summary
                    .p_permutation
                    .map(|p| p.to_string())
                    .unwrap_or_default(),
                summary.clusters.to_string(),
            ])?;
            w.flush()?;
            Ok(())
        }
        Format::Pretty => {
            writeln!(out, "GLP test, order {}", summary.order)?;
            writeln!(out, "{}", groups_line(&ds))?;
            writeln!(out, "GLP statistic   {:.6}", summary.glp)?;
            writeln!(out, "df              {}", summary.df)?;
            writeln!(out, "p-value         {}", fmt_p(summary.p_value))?;
            if let Some(p) = summary.p_permutation {
                writeln!(
                    out,
                    "p-permutation   {} (B = {})",
                    fmt_p(p),
                    summary.permutations
                )?;
            }
            writeln!(out, "communities     {} of {}", summary.clusters, summary.k)?;
            out.flush()?;
            Ok(())
        }
    }
}

fn merge(into: &mut Value, from: Value) {
    if let (Value::Object(a), Value::Object(b)) = (into, from) {
        a.extend(b);
    }
}

fn run_chart(a: ChartArgs) -> Result<()> {
    let config = ChartConfig {
        max_component: a.components,
        alpha: a.alpha,
        glp: a.testing.config()?,
    };
    if a.components == 0 {
        return Err(GlpError::Config("--components must be at least 1".into()));
    }
    if !(a.alpha > 0.0 && a.alpha < 1.0) {
        return Err(GlpError::Config(format!(
            "--alpha must lie in (0, 1), got {}",
            a.alpha
        )));
    }
    let mut echo = json!({
        "command": "chart",
        "components": a.components,
        "alpha": a.alpha,
        "format": a.out.format,
    });
    merge(&mut echo, a.data.echo());
    merge(&mut echo, a.testing.echo());
    echo_config(&echo);

    let ds = load_csv(&a.data.input, &a.data.options())?;
    let chart = glp_chart(&ds, &config)?;
    warn_all(&chart.warnings);
    if a.dump_kernel.is_some() || a.dump_embedding.is_some() {
        dump_chart(
            &ds,
            &chart,
            &config,
            a.dump_kernel.as_deref(),
            a.dump_embedding.as_deref(),
        )?;
    }
    let mut out = sink(a.out.output.as_deref())?;
    match a.out.format {
        Format::Json => {
            #[derive(Serialize)]
            struct ChartOutput<'a> {
                config: &'a Value,
                groups: Vec<Value>,
                #[serde(flatten)]
                chart: &'a GlpChart,
            }
            write_json(
                &ChartOutput {
                    config: &echo,
                    groups: groups_json(&ds),
                    chart: &chart,
                },
                out,
            )
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record([
                "component",
                "glp",
                "p_value",
                "p_permutation",
                "significant",
            ])?;
            for r in &chart.components {
                w.write_record([
                    r.order.to_string(),
                    r.glp.to_string(),
                    r.p_value.to_string(),
                    r.p_permutation.map(|p| p.to_string()).unwrap_or_default(),
                    r.significant.to_string(),
                ])?;
            }
            let o = &chart.overall;
            w.write_record([
                "overall".to_string(),
                o.glp.to_string(),
                o.p_value.to_string(),
                o.p_permutation.map(|p| p.to_string()).unwrap_or_default(),
                o.significant.to_string(),
            ])?;
            w.flush()?;
            Ok(())
        }
        Format::Pretty => {
            writeln!(out, "GLP chart")?;
            writeln!(out, "{}", groups_line(&ds))?;
            let perm = chart.components.iter().any(|r| r.p_permutation.is_some());
            let head = if perm { "  p-perm" } else { "" };
            writeln!(
                out,
                "{:<12}{:>12}{:>12}{head}",
                "Component", "GLP", "p-value"
            )?;
            for r in &chart.components {
                let tag = format!("{}{}", r.order, if r.significant { "*" } else { "" });
                write!(out, "{:<12}{:>12.4}{:>12}", tag, r.glp, fmt_p(r.p_value))?;
                if let Some(p) = r.p_permutation {
                    write!(out, "  {}", fmt_p(p))?;
                }
                writeln!(out)?;
            }
            for o in &chart.skipped_orders {
                writeln!(out, "{:<12}{:>12}{:>12}", o, "-", "-")?;
            }
            let o = &chart.overall;
            let orders: Vec<String> = o.orders.iter().map(|v| v.to_string()).collect();
            let label = format!("Overall{{{}}}", orders.join(","));
            write!(out, "{:<12}{:>12.4}{:>12}", label, o.glp, fmt_p(o.p_value))?;
            if let Some(p) = o.p_permutation {
                write!(out, "  {}", fmt_p(p))?;
            }
            writeln!(out)?;
            if !o.significant {
                writeln!(out, "No component significant at alpha = {}; overall row is the best single component.", a.alpha)?;
            }
            out.flush()?;
            Ok(())
        }
    }
}

/// Rebuilds the overall kernel for the dump files.
fn dump_chart(
    ds: &Dataset,
    chart: &GlpChart,
    config: &ChartConfig,
    kernel_path: Option<&Path>,
    embedding_path: Option<&Path>,
) -> Result<()> {
    use crate::kernel::{feature_map, fuse, gram_with};
    if let Some(p) = kernel_path {
        let kernels = chart
            .overall
            .orders
            .iter()
            .map(|&o| gram_with(&feature_map(ds, o)?, config.glp.c, config.glp.inner_product))
            .collect::<Result<Vec<_>>>()?;
        write_kernel_csv(&fuse(&kernels)?, BufWriter::new(File::create(p)?))?;
    }
    if let (Some(p), Some(r)) = (embedding_path, &chart.overall_result) {
        write_embedding_csv(&r.embedding, BufWriter::new(File::create(p)?))?;
    }
    Ok(())
}

fn run_export(a: ExportArgs) -> Result<()> {
    if a.orders.contains(&0) {
        return Err(GlpError::Config(
            "--orders entries must be at least 1".into(),
        ));
    }
    let mut echo = json!({ "command": "export", "orders": a.orders });
    merge(&mut echo, a.data.echo());
    echo_config(&echo);
    let ds = load_csv(&a.data.input, &a.data.options())?;
    let export = export_lp_features(&ds, &a.orders)?;
    for o in &export.skipped_orders {
        eprintln!("glp: warning: order {o}: no column admits this order; skipped");
    }
    export.write_csv(&ds, sink(a.output.as_deref())?)
}

fn run_power(a: PowerArgs) -> Result<()> {
    let text = std::fs::read_to_string(&a.scenario)?;
    let mut spec = ScenarioSpec::from_json(&text)?;
    if let Some(s) = a.seed {
        spec.seed = s;
    }
    if a.reps == 0 {
        return Err(GlpError::Config("--reps must be at least 1".into()));
    }
    if !(a.alpha > 0.0 && a.alpha < 1.0) {
        return Err(GlpError::Config(format!(
            "--alpha must lie in (0, 1), got {}",
            a.alpha
        )));
    }
    if !(a.c >= 0.0 && a.c.is_finite()) {
        return Err(GlpError::Config(format!(
            "--c must be finite and non-negative, got {}",
            a.c
        )));
    }
    let test = if a.chart {
        if a.components == 0 {
            return Err(GlpError::Config("--components must be at least 1".into()));
        }
        PowerTest::Chart {
            max_component: a.components,
        }
    } else {
        if a.order == 0 {
            return Err(GlpError::Config("--order must be at least 1".into()));
        }
        PowerTest::Order { order: a.order }
    };
    let dims = if a.dims.is_empty() {
        vec![spec.d]
    } else {
        a.dims.clone()
    };
    let echo = json!({
        "command": "power",
        "scenario": spec,
        "reps": a.reps,
        "alpha": a.alpha,
        "test": test,
        "dims": dims,
        "c": a.c,
        "inner_product": InnerProduct::from(a.inner_product),
        "permutations": a.permutations,
        "format": a.format,
    });
    echo_config(&echo);
    let config = GlpConfig {
        c: a.c,
        inner_product: a.inner_product.into(),
        permutations: a.permutations,
        ..GlpConfig::default()
    };
    let mut reports: Vec<PowerReport> = Vec::new();
    for &d in &dims {
        let s = spec.clone().with_d(d);
        s.validate()?;
        let r = estimate_power(&s, test, &config, a.reps, a.alpha)?;
        if r.failures > 0 {
            eprintln!(
                "glp: warning: d={d}: {} replication(s) failed and count as non-rejections",
                r.failures
            );
        }
        reports.push(r);
    }
    let mut out = sink(a.output.as_deref())?;
    match a.format {
        Format::Csv => write_power_csv(&reports, out),
        Format::Json => write_json(&json!({ "config": echo, "reports": reports }), out),
        Format::Pretty => {
            writeln!(
                out,
                "{:<24}{:>6}{:>8}{:>10}{:>10}",
                "scenario", "d", "test", "power", "stderr"
            )?;
            for r in &reports {
                writeln!(
                    out,
                    "{:<24}{:>6}{:>8}{:>10.3}{:>10.3}",
                    r.scenario.name.as_str(),
                    r.scenario.d,
                    r.test.to_string(),
                    r.power,
                    r.mc_stderr
                )?;
            }
            out.flush()?;
            Ok(())
        }
    }
}

fn run_calibrate(a: CalibrateArgs) -> Result<()> {
    let settings = CalibrationSettings {
        d: a.d,
        n1: a.n1,
        n2: a.n2,
        replications: a.reps,
        permutations: a.permutations,
        order: a.order,
        seed: a.seed,
    };
    if a.d == 0 || a.n1 < 2 || a.n2 < 2 || a.reps == 0 || a.permutations == 0 || a.order == 0 {
        return Err(GlpError::Config(
            "--d, --reps, --permutations and --order must be positive and --n1, --n2 at least 2"
                .into(),
        ));
    }
    if !(a.c >= 0.0 && a.c.is_finite()) {
        return Err(GlpError::Config(format!(
            "--c must be finite and non-negative, got {}",
            a.c
        )));
    }
    let echo = json!({
        "command": "calibrate",
        "settings": settings,
        "c": a.c,
        "inner_product": InnerProduct::from(a.inner_product),
        "format": a.format,
    });
    echo_config(&echo);
    let config = GlpConfig {
        c: a.c,
        inner_product: a.inner_product.into(),
        ..GlpConfig::default()
    };
    let cal: NullCalibration = calibrate_null(&settings, &config)?;
    if let Some(p) = &a.rows {
        cal.write_rows_csv(BufWriter::new(File::create(p)?))?;
    }
    let mut out = sink(a.output.as_deref())?;
    match a.format {
        Format::Csv => cal.write_summary_csv(out),
        Format::Json => {
            #[derive(Serialize)]
            struct CalOutput<'a> {
                config: &'a Value,
                #[serde(flatten)]
                calibration: &'a NullCalibration,
            }
            write_json(
                &CalOutput {
                    config: &echo,
                    calibration: &cal,
                },
                out,
            )
        }
        Format::Pretty => {
            let q = &cal.summary;
            writeln!(
                out,
                "p_asymptotic - p_permutation over {} null replications",
                a.reps
            )?;
            writeln!(
                out,
                "d={} n1={} n2={} B={}",
                a.d, a.n1, a.n2, a.permutations
            )?;
            writeln!(
                out,
                "min {:.4}  q25 {:.4}  median {:.4}  q75 {:.4}  max {:.4}",
                q.min, q.q25, q.median, q.q75, q.max
            )?;
            writeln!(out, "IQR {:.4}  median |diff| {:.4}", q.iqr, q.median_abs)?;
            out.flush()?;
            Ok(())
        }
    }
}
