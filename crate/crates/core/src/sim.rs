//! Scenario generators and Monte Carlo drivers for null calibration and power.
//!
//! Every scenario draws group 1 from `N(0, I_d)` and perturbs the later
//! groups. Group `g` (0-based) of a location-type scenario is shifted by
//! `g * delta` unless explicit `shifts` are given, so `delta = 1.5` with three
//! groups yields means 0, 1.5 and 3.

use std::io::Write;

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{GlpError, Result};
use crate::glp::{glp_chart, glp_test, p_permutation, ChartConfig, GlpConfig};
use crate::rng::{derive_seed, stream_rng};

pub const MAX_DIMENSION: usize = 1024;
/// Outlier centre magnitude of the contamination component.
pub const OUTLIER_SHIFT: f64 = 20.0;
/// Outlier variance of the contamination component.
pub const OUTLIER_VARIANCE: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Location,
    Scale,
    LocationScale,
    HeavyTail,
    Poisson,
    ContaminatedLocation,
    ContaminatedTail,
    Mixed,
}

impl ScenarioKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Location => "location",
            Self::Scale => "scale",
            Self::LocationScale => "location_scale",
            Self::HeavyTail => "heavy_tail",
            Self::Poisson => "poisson",
            Self::ContaminatedLocation => "contaminated_location",
            Self::ContaminatedTail => "contaminated_tail",
            Self::Mixed => "mixed",
        }
    }
}

/// Scenario parameters. Unset fields take the scenario's default.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    /// Per-group mean shifts; overrides `delta` when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shifts: Option<Vec<f64>>,
    /// Variance of the perturbed group(s).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variance: Option<f64>,
    /// Student-t degrees of freedom.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    /// Contamination rate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    /// Share of scale-perturbed columns in the mixed scenario.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub name: ScenarioKind,
    pub d: usize,
    pub n_per_group: Vec<usize>,
    #[serde(default)]
    pub params: ScenarioParams,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_seed() -> u64 {
    42
}

/// Parameters after defaults are applied.
#[derive(Debug, Clone, PartialEq)]
struct Resolved {
    shifts: Vec<f64>,
    variance: f64,
    nu: f64,
    eta: f64,
    r: f64,
    lambda1: f64,
    lambda2: f64,
}

impl ScenarioSpec {
    pub fn new(name: ScenarioKind, d: usize, n_per_group: Vec<usize>) -> Self {
        Self {
            name,
            d,
            n_per_group,
            params: ScenarioParams::default(),
            seed: default_seed(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self =
            serde_json::from_str(text).map_err(|e| GlpError::Config(format!("scenario: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_d(mut self, d: usize) -> Self {
        self.d = d;
        self
    }

    pub fn k(&self) -> usize {
        self.n_per_group.len()
    }

    pub fn n(&self) -> usize {
        self.n_per_group.iter().sum()
    }

    pub fn validate(&self) -> Result<()> {
        self.resolve().map(|_| ())
    }

    fn resolve(&self) -> Result<Resolved> {
        let bad = |msg: String| Err(GlpError::Config(msg));
        if self.d == 0 || self.d > MAX_DIMENSION {
            return bad(format!(
                "d must lie in [1, {MAX_DIMENSION}], got {}",
                self.d
            ));
        }
        if self.n_per_group.len() < 2 {
            return bad("n_per_group needs at least two groups".into());
        }
        if let Some(&n) = self.n_per_group.iter().find(|&&n| n < 2) {
            return bad(format!("every group needs at least 2 rows, got {n}"));
        }
        let p = &self.params;
        let (delta0, var0) = match self.name {
            ScenarioKind::Location | ScenarioKind::ContaminatedLocation => (0.5, 1.0),
            ScenarioKind::Scale => (0.0, 1.5),
            ScenarioKind::LocationScale | ScenarioKind::Mixed => (0.3, 1.3),
            _ => (0.0, 1.0),
        };
        let delta = p.delta.unwrap_or(delta0);
        if !delta.is_finite() {
            return bad("delta must be finite".into());
        }
        let k = self.k();
        let shifts = match &p.shifts {
            Some(s) if s.len() != k => {
                return bad(format!("shifts has {} entries for {k} groups", s.len()));
            }
            Some(s) if s.iter().any(|v| !v.is_finite()) => {
                return bad("shifts must be finite".into())
            }
            Some(s) => s.clone(),
            None => (0..k).map(|g| g as f64 * delta).collect(),
        };
        let variance = p.variance.unwrap_or(var0);
        if !(variance > 0.0 && variance.is_finite()) {
            return bad(format!("variance must be positive, got {variance}"));
        }
        let nu = p.nu.unwrap_or(3.0);
        if !(nu >= 1.0 && nu.is_finite()) {
            return bad(format!("nu must be at least 1, got {nu}"));
        }
        let eta = p.eta.unwrap_or(match self.name {
            ScenarioKind::ContaminatedLocation | ScenarioKind::ContaminatedTail => 0.1,
            _ => 0.0,
        });
        if !(0.0..=0.5).contains(&eta) {
            return bad(format!("eta must lie in [0, 0.5], got {eta}"));
        }
        let r = p.r.unwrap_or(0.5);
        if !(0.0..=1.0).contains(&r) {
            return bad(format!("r must lie in [0, 1], got {r}"));
        }
        let lambda1 = p.lambda1.unwrap_or(5.0);
        let lambda2 = p.lambda2.unwrap_or(5.5);
        let step = lambda2 - lambda1;
        for g in 0..k {
            let l = lambda1 + g as f64 * step;
            if !(l > 0.0 && l.is_finite()) {
                return bad(format!(
                    "poisson rate for group {} must be positive, got {l}",
                    g + 1
                ));
            }
        }
        Ok(Resolved {
            shifts,
            variance,
            nu,
            eta,
            r,
            lambda1,
            lambda2,
        })
    }
}

/// `ε ~ (1 - η) N(0, 1) + η N(±20, 3)`: returns `base` unless the entry is
/// contaminated.
fn contaminate(rng: &mut ChaCha8Rng, base: f64, eta: f64) -> f64 {
    if eta > 0.0 && rng.random::<f64>() < eta {
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let z: f64 = StandardNormal.sample(rng);
        sign * OUTLIER_SHIFT + OUTLIER_VARIANCE.sqrt() * z
    } else {
        base
    }
}

/// Draws one dataset. Rows are grouped, group `g` carries label `g + 1`.
pub fn generate(spec: &ScenarioSpec) -> Result<Dataset> {
    let p = spec.resolve()?;
    let d = spec.d;
    let n = spec.n();
    let mut rng = stream_rng(spec.seed, 0);
    let mut x = DMatrix::<f64>::zeros(n, d);
    let mut y = Vec::with_capacity(n);
    // Columns [0, d1) are location-shifted and [d1, d) scale-inflated.
    let d1 = d - (p.r * d as f64).round() as usize;
    let chi = ChiSquared::new(p.nu).map_err(|e| GlpError::Config(format!("nu: {e}")))?;

    let mut row = 0;
    for (g, &ng) in spec.n_per_group.iter().enumerate() {
        let alt = g > 0;
        let rate = p.lambda1 + g as f64 * (p.lambda2 - p.lambda1);
        let pois = Poisson::new(rate).map_err(|e| GlpError::Config(format!("lambda: {e}")))?;
        let sd = if alt {
            p.variance.powi(g as i32).sqrt()
        } else {
            1.0
        };
        for _ in 0..ng {
            let t_scale = if alt {
                let w: f64 = chi.sample(&mut rng);
                (p.nu / w).sqrt()
            } else {
                1.0
            };
            for j in 0..d {
                let z: f64 = StandardNormal.sample(&mut rng);
                let v = match spec.name {
                    ScenarioKind::Location => p.shifts[g] + z,
                    ScenarioKind::Scale => sd * z,
                    ScenarioKind::LocationScale => p.shifts[g] + sd * z,
                    ScenarioKind::HeavyTail => p.shifts[g] + t_scale * z,
                    ScenarioKind::Poisson => pois.sample(&mut rng),
                    ScenarioKind::ContaminatedLocation => {
                        p.shifts[g] + contaminate(&mut rng, z, p.eta)
                    }
                    ScenarioKind::ContaminatedTail => contaminate(&mut rng, t_scale * z, p.eta),
                    ScenarioKind::Mixed => {
                        if !alt {
                            z
                        } else if j < d1 {
                            p.shifts[g] + z
                        } else {
                            sd * z
                        }
                    }
                };
                x[(row, j)] = v;
            }
            y.push(g + 1);
            row += 1;
        }
    }
    Dataset::new(x, &y)
}

/// Which test a power study runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum PowerTest {
    /// Single-order test; rejects when its p-value is at most alpha.
    Order { order: usize },
    /// Full chart; rejects when any component survives Holm adjustment.
    Chart { max_component: usize },
}

impl std::fmt::Display for PowerTest {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Order { order } => write!(f, "order{order}"),
            Self::Chart { max_component } => write!(f, "chart{max_component}"),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PowerReport {
    pub scenario: ScenarioSpec,
    pub test: PowerTest,
    pub replications: usize,
    pub alpha: f64,
    pub rejections: usize,
    pub power: f64,
    pub mc_stderr: f64,
    /// Replications whose run failed (counted as non-rejections).
    pub failures: usize,
}

/// Seeds for replication `rep`: data and test draws use interleaved streams.
fn replication_seeds(master: u64, rep: usize) -> (u64, u64) {
    let base = 2 * rep as u64;
    (derive_seed(master, base), derive_seed(master, base + 1))
}

/// Runs `replications` draws of `spec`, each tested at level `alpha`.
pub fn estimate_power(
    spec: &ScenarioSpec,
    test: PowerTest,
    config: &GlpConfig,
    replications: usize,
    alpha: f64,
) -> Result<PowerReport> {
    if replications == 0 {
        return Err(GlpError::InvalidArgument(
            "replications must be at least 1".into(),
        ));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(GlpError::InvalidArgument(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    spec.validate()?;
    let outcomes: Vec<Option<bool>> = (0..replications)
        .into_par_iter()
        .map(|rep| {
            let (data_seed, test_seed) = replication_seeds(spec.seed, rep);
            let ds = generate(&spec.clone().with_seed(data_seed)).ok()?;
            let cfg = GlpConfig {
                seed: test_seed,
                ..config.clone()
            };
            match test {
                PowerTest::Order { order } => glp_test(&ds, order, &cfg)
                    .ok()
                    .map(|r| r.p_value() <= alpha),
                PowerTest::Chart { max_component } => {
                    let cc = ChartConfig {
                        max_component,
                        alpha,
                        glp: cfg,
                    };
                    glp_chart(&ds, &cc).ok().map(|c| c.overall.significant)
                }
            }
        })
        .collect();
    let failures = outcomes.iter().filter(|o| o.is_none()).count();
    let rejections = outcomes.iter().filter(|o| **o == Some(true)).count();
    let power = rejections as f64 / replications as f64;
    Ok(PowerReport {
        scenario: spec.clone(),
        test,
        replications,
        alpha,
        rejections,
        power,
        mc_stderr: (power * (1.0 - power) / replications as f64).sqrt(),
        failures,
    })
}

/// Tidy CSV: one row per report.
pub fn write_power_csv<W: Write>(reports: &[PowerReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "scenario",
        "d",
        "n",
        "test",
        "replications",
        "alpha",
        "power",
        "stderr",
    ])?;
    for r in reports {
        w.write_record([
            r.scenario.name.as_str().to_string(),
            r.scenario.d.to_string(),
            r.scenario.n().to_string(),
            r.test.to_string(),
            r.replications.to_string(),
            r.alpha.to_string(),
            r.power.to_string(),
            r.mc_stderr.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CalibrationSettings {
    pub d: usize,
    pub n1: usize,
    pub n2: usize,
    pub replications: usize,
    pub permutations: usize,
    pub order: usize,
    pub seed: u64,
}

impl Default for CalibrationSettings {
    fn default() -> Self {
        Self {
            d: 10,
            n1: 50,
            n2: 50,
            replications: 100,
            permutations: 1000,
            order: 1,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CalibrationRow {
    pub p_asymptotic: f64,
    pub p_permutation: f64,
    pub difference: f64,
}

/// Summary quantiles of `p_asymptotic - p_permutation`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CalibrationSummary {
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub max: f64,
    pub iqr: f64,
    pub median_abs: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct NullCalibration {
    pub settings: CalibrationSettings,
    pub rows: Vec<CalibrationRow>,
    pub summary: CalibrationSummary,
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

fn summarize(values: &[f64]) -> CalibrationSummary {
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    let mut abs: Vec<f64> = values.iter().map(|v| v.abs()).collect();
    abs.sort_by(f64::total_cmp);
    let (q25, q75) = (quantile(&s, 0.25), quantile(&s, 0.75));
    CalibrationSummary {
        min: s[0],
        q25,
        median: quantile(&s, 0.5),
        q75,
        max: s[s.len() - 1],
        iqr: q75 - q25,
        median_abs: quantile(&abs, 0.5),
    }
}

/// Compares asymptotic and permutation p-values on `N(0, I_d)` null draws.
pub fn calibrate_null(
    settings: &CalibrationSettings,
    config: &GlpConfig,
) -> Result<NullCalibration> {
    let s = *settings;
    if s.d == 0
        || s.n1 == 0
        || s.n2 == 0
        || s.replications == 0
        || s.permutations == 0
        || s.order == 0
    {
        return Err(GlpError::InvalidArgument(
            "calibration settings must all be positive".into(),
        ));
    }
    let spec = ScenarioSpec {
        name: ScenarioKind::Location,
        d: s.d,
        n_per_group: vec![s.n1, s.n2],
        params: ScenarioParams {
            delta: Some(0.0),
            ..Default::default()
        },
        seed: s.seed,
    };
    spec.validate()?;
    let rows = (0..s.replications)
        .into_par_iter()
        .map(|rep| {
            let (data_seed, test_seed) = replication_seeds(s.seed, rep);
            let ds = generate(&spec.clone().with_seed(data_seed))?;
            let cfg = GlpConfig {
                seed: test_seed,
                permutations: 0,
                ..config.clone()
            };
            let r = glp_test(&ds, s.order, &cfg)?;
            let p_perm = if r.assignment.support < 2 {
                1.0
            } else {
                p_permutation(ds.y(), &r.assignment.z, s.permutations, test_seed)?
            };
            Ok(CalibrationRow {
                p_asymptotic: r.p_asymptotic,
                p_permutation: p_perm,
                difference: r.p_asymptotic - p_perm,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let diffs: Vec<f64> = rows.iter().map(|r| r.difference).collect();
    Ok(NullCalibration {
        settings: s,
        summary: summarize(&diffs),
        rows,
    })
}

impl NullCalibration {
    /// Per-replication rows.
    pub fn write_rows_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["replication", "p_asymptotic", "p_permutation", "difference"])?;
        for (i, r) in self.rows.iter().enumerate() {
            w.write_record([
                i.to_string(),
                r.p_asymptotic.to_string(),
                r.p_permutation.to_string(),
                r.difference.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// One row of summary quantiles with the settings that produced them.
    pub fn write_summary_csv<W: Write>(&self, out: W) -> Result<()> {
        let s = &self.settings;
        let q = &self.summary;
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "d",
            "n1",
            "n2",
            "replications",
            "permutations",
            "min",
            "q25",
            "median",
            "q75",
            "max",
            "iqr",
            "median_abs",
        ])?;
        w.write_record([
            s.d.to_string(),
            s.n1.to_string(),
            s.n2.to_string(),
            s.replications.to_string(),
            s.permutations.to_string(),
            q.min.to_string(),
            q.q25.to_string(),
            q.median.to_string(),
            q.q75.to_string(),
            q.max.to_string(),
            q.iqr.to_string(),
            q.median_abs.to_string(),
        ])?;
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(name: ScenarioKind, d: usize, n: usize) -> ScenarioSpec {
        ScenarioSpec::new(name, d, vec![n, n])
    }

    #[test]
    fn parses_json_with_defaults() {
        let s =
            ScenarioSpec::from_json(r#"{"name":"location","d":10,"n_per_group":[5,5]}"#).unwrap();
        assert_eq!(s.seed, 42);
        assert_eq!(s.resolve().unwrap().shifts, vec![0.0, 0.5]);
        let s = ScenarioSpec::from_json(
            r#"{"name":"location","d":4,"n_per_group":[3,3,3],"params":{"delta":1.5}}"#,
        )
        .unwrap();
        assert_eq!(s.resolve().unwrap().shifts, vec![0.0, 1.5, 3.0]);
    }

    #[test]
    fn rejects_bad_parameters() {
        let cases = [
            r#"{"name":"location","d":0,"n_per_group":[5,5]}"#,
            r#"{"name":"location","d":1025,"n_per_group":[5,5]}"#,
            r#"{"name":"location","d":3,"n_per_group":[5]}"#,
            r#"{"name":"location","d":3,"n_per_group":[5,1]}"#,
            r#"{"name":"contaminated_location","d":3,"n_per_group":[5,5],"params":{"eta":0.6}}"#,
            r#"{"name":"scale","d":3,"n_per_group":[5,5],"params":{"variance":0}}"#,
            r#"{"name":"heavy_tail","d":3,"n_per_group":[5,5],"params":{"nu":0.5}}"#,
            r#"{"name":"mixed","d":3,"n_per_group":[5,5],"params":{"r":1.5}}"#,
            r#"{"name":"location","d":3,"n_per_group":[5,5],"params":{"shifts":[0]}}"#,
            r#"{"name":"poisson","d":3,"n_per_group":[5,5],"params":{"lambda1":-1}}"#,
            r#"{"name":"warp","d":3,"n_per_group":[5,5]}"#,
            r#"{"name":"location","d":3,"n_per_group":[5,5],"extra":1}"#,
        ];
        for c in cases {
            let e = ScenarioSpec::from_json(c).unwrap_err();
            assert!(e.is_config(), "{c}: {e}");
        }
    }

    #[test]
    fn null_location_is_valid_draw() {
        let mut s = spec(ScenarioKind::Location, 5, 10);
        s.params.delta = Some(0.0);
        let ds = generate(&s).unwrap();
        assert_eq!((ds.n(), ds.d(), ds.k()), (20, 5, 2));
    }

    #[test]
    fn same_seed_same_bytes() {
        for kind in [
            ScenarioKind::Location,
            ScenarioKind::Scale,
            ScenarioKind::LocationScale,
            ScenarioKind::HeavyTail,
            ScenarioKind::Poisson,
            ScenarioKind::ContaminatedLocation,
            ScenarioKind::ContaminatedTail,
            ScenarioKind::Mixed,
        ] {
            let s = spec(kind, 7, 6).with_seed(9);
            let a = generate(&s).unwrap();
            let b = generate(&s).unwrap();
            let bits = |m: &DMatrix<f64>| m.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(a.x()), bits(b.x()), "{kind:?}");
            let c = generate(&s.clone().with_seed(10)).unwrap();
            assert_ne!(bits(a.x()), bits(c.x()));
        }
    }

    #[test]
    fn poisson_is_integer_valued() {
        let ds = generate(&spec(ScenarioKind::Poisson, 20, 30)).unwrap();
        assert!(ds.x().iter().all(|v| v.fract() == 0.0 && *v >= 0.0));
        let mean = |g: usize| {
            let rows: Vec<usize> = (0..60).filter(|&i| ds.y()[i] == g).collect();
            rows.iter().map(|&i| ds.x().row(i).sum()).sum::<f64>() / (rows.len() * 20) as f64
        };
        assert!((mean(1) - 5.0).abs() < 0.3);
        assert!((mean(2) - 5.5).abs() < 0.3);
    }

    #[test]
    fn contamination_fraction() {
        let mut s = spec(ScenarioKind::ContaminatedLocation, 500, 50);
        s.params.eta = Some(0.1);
        let ds = generate(&s).unwrap();
        let total = ds.x().len() as f64;
        let outliers = ds.x().iter().filter(|v| v.abs() > 10.0).count() as f64;
        let frac = outliers / total;
        let sigma = (0.1 * 0.9 / total).sqrt();
        assert!((frac - 0.1).abs() < 3.0 * sigma, "fraction {frac}");
    }

    #[test]
    fn scale_and_mixed_columns() {
        let ds = generate(&spec(ScenarioKind::Scale, 200, 200)).unwrap();
        let var = |g: usize, cols: std::ops::Range<usize>| {
            let mut s = 0.0;
            let mut c = 0;
            for i in (0..ds.n()).filter(|&i| ds.y()[i] == g) {
                for j in cols.clone() {
                    s += ds.x()[(i, j)].powi(2);
                    c += 1;
                }
            }
            s / c as f64
        };
        assert!((var(1, 0..200) - 1.0).abs() < 0.05);
        assert!((var(2, 0..200) - 1.5).abs() < 0.05);

        let mut m = spec(ScenarioKind::Mixed, 100, 100);
        m.params.r = Some(0.3);
        let ds = generate(&m).unwrap();
        // 70 shifted columns then 30 inflated ones.
        let mean = |cols: std::ops::Range<usize>| {
            let n = cols.len() * 100;
            (100..200)
                .flat_map(|i| cols.clone().map(move |j| (i, j)))
                .map(|ij| ds.x()[ij])
                .sum::<f64>()
                / n as f64
        };
        assert!((mean(0..70) - 0.3).abs() < 0.05);
        assert!(mean(70..100).abs() < 0.08);
    }

    #[test]
    fn heavy_tail_has_excess_kurtosis() {
        let mut s = spec(ScenarioKind::HeavyTail, 50, 400);
        s.params.nu = Some(5.0);
        let ds = generate(&s).unwrap();
        let kurt = |g: usize| {
            let vals: Vec<f64> = (0..ds.n())
                .filter(|&i| ds.y()[i] == g)
                .flat_map(|i| ds.x().row(i).iter().copied().collect::<Vec<_>>())
                .collect();
            let m2 = vals.iter().map(|v| v * v).sum::<f64>() / vals.len() as f64;
            let m4 = vals.iter().map(|v| v.powi(4)).sum::<f64>() / vals.len() as f64;
            m4 / (m2 * m2)
        };
        assert!((kurt(1) - 3.0).abs() < 0.3);
        assert!(kurt(2) > 5.0);
    }

    #[test]
    fn power_report_arithmetic() {
        let s = spec(ScenarioKind::Location, 10, 20).with_seed(3);
        let r = estimate_power(
            &s,
            PowerTest::Order { order: 1 },
            &GlpConfig::default(),
            8,
            0.05,
        )
        .unwrap();
        assert_eq!(r.replications, 8);
        assert!((0.0..=1.0).contains(&r.power));
        assert!((r.mc_stderr - (r.power * (1.0 - r.power) / 8.0).sqrt()).abs() < 1e-15);
        let again = estimate_power(
            &s,
            PowerTest::Order { order: 1 },
            &GlpConfig::default(),
            8,
            0.05,
        )
        .unwrap();
        assert_eq!(r.rejections, again.rejections);
        assert!(estimate_power(
            &s,
            PowerTest::Order { order: 1 },
            &GlpConfig::default(),
            0,
            0.05
        )
        .is_err());
    }

    #[test]
    fn power_csv_shape() {
        let s = spec(ScenarioKind::Location, 4, 10);
        let r = estimate_power(
            &s,
            PowerTest::Chart { max_component: 2 },
            &GlpConfig::default(),
            3,
            0.05,
        )
        .unwrap();
        let mut buf = Vec::new();
        write_power_csv(&[r], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(
            lines[0],
            "scenario,d,n,test,replications,alpha,power,stderr"
        );
        assert!(lines[1].starts_with("location,4,20,chart2,3,0.05,"));
    }

    #[test]
    fn single_permutation_bounds_difference() {
        let set = CalibrationSettings {
            d: 5,
            n1: 10,
            n2: 10,
            replications: 6,
            permutations: 1,
            ..Default::default()
        };
        let cal = calibrate_null(&set, &GlpConfig::default()).unwrap();
        for r in &cal.rows {
            assert!(r.p_permutation == 0.5 || r.p_permutation == 1.0);
            assert!(r.difference >= -1.0 && r.difference <= 0.5);
        }
        let mut buf = Vec::new();
        cal.write_summary_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 2);
    }

    #[test]
    fn quantiles_interpolate() {
        let s = summarize(&[4.0, -1.0, 2.0, 3.0, 0.0]);
        assert_eq!(
            (s.min, s.q25, s.median, s.q75, s.max),
            (-1.0, 0.0, 2.0, 3.0, 4.0)
        );
        assert_eq!(s.iqr, 3.0);
        assert_eq!(s.median_abs, 2.0);
    }
}
