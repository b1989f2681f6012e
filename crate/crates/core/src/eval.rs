//! Metrics, the rating transform and the multi-seed experiment runner.

use std::fmt::Write as _;
use std::time::Instant;

use crate::autodiff::Tensor2D;
use crate::baselines::{self, BaselineKind};
use crate::gnr::{self, GnrConfig, ImputationResult};
use crate::missing::{compose_observed, CompleteMatrix, FeatureStats, Mask};
use crate::rng::SeededRng;
use crate::synth::{GaussianSpec, MissingKind, MissingSpec};
use crate::{Error, Result};

const DATA_STREAM: u64 = 100;
const MASK_STREAM: u64 = 101;

fn check_shapes(truth: &CompleteMatrix, imputed: &CompleteMatrix, m: &Mask) -> Result<()> {
    if truth.shape() != imputed.shape() || truth.shape() != m.shape() {
        return Err(Error::dim(
            "metric",
            format!("truth {:?}, imputed {:?}, mask {:?}", truth.shape(), imputed.shape(), m.shape()),
        ));
    }
    Ok(())
}

/// Mean squared error over the entries the mask marks missing.
pub fn mse_missing(truth: &CompleteMatrix, imputed: &CompleteMatrix, m: &Mask) -> Result<f64> {
    check_shapes(truth, imputed, m)?;
    let (mut sum, mut count) = (0.0, 0usize);
    for i in 0..truth.rows() {
        for j in 0..truth.cols() {
            if !m.is_observed(i, j) {
                let e = truth.get(i, j) - imputed.get(i, j);
                sum += e * e;
                count += 1;
            }
        }
    }
    if count == 0 {
        return Err(Error::UndefinedMetric("no missing entries to score".into()));
    }
    Ok(sum / count as f64)
}

pub fn rmse_missing(truth: &CompleteMatrix, imputed: &CompleteMatrix, m: &Mask) -> Result<f64> {
    mse_missing(truth, imputed, m).map(f64::sqrt)
}

/// Fraction of entries in `features` where `prob >= threshold` agrees with
/// the true observation indicator.
pub fn mask_accuracy(true_mask: &Mask, prob: &Tensor2D, threshold: f64, features: &[usize]) -> Result<f64> {
    if features.is_empty() {
        return Err(Error::UndefinedMetric("mask accuracy needs at least one feature".into()));
    }
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::domain("mask_accuracy", format!("threshold {threshold} outside (0, 1)")));
    }
    if true_mask.shape() != prob.shape() {
        return Err(Error::dim("mask_accuracy", format!("mask {:?}, probabilities {:?}", true_mask.shape(), prob.shape())));
    }
    if let Some(&j) = features.iter().find(|&&j| j >= true_mask.cols()) {
        return Err(Error::dim("mask_accuracy", format!("feature {j} out of range")));
    }
    let mut hits = 0usize;
    for i in 0..true_mask.rows() {
        for &j in features {
            if (prob.get(i, j) >= threshold) == true_mask.is_observed(i, j) {
                hits += 1;
            }
        }
    }
    Ok(hits as f64 / (true_mask.rows() * features.len()) as f64)
}

/// Accuracy of a random predictor whose marginal matches a self-masked
/// feature with masking probability `k` (missing rate `k / 2`).
pub fn random_floor(k: f64) -> f64 {
    let q = k / 2.0;
    q * q + (1.0 - q) * (1.0 - q)
}

/// Maps a star rating onto `(0, 1]` with an exponential gain.
pub fn rating_transform(r: u32, r_max: u32, epsilon: f64) -> Result<f64> {
    if r == 0 || r > r_max || r_max > 52 {
        return Err(Error::domain("rating_transform", format!("rating {r} outside [1, {r_max}]")));
    }
    let gain = (2f64.powi(r as i32) - 1.0) / (2f64.powi(r_max as i32) - 1.0);
    Ok(epsilon + (1.0 - epsilon) * gain)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    Gnr,
    Baseline(BaselineKind),
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Gnr => "gnr",
            Method::Baseline(b) => b.as_str(),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "gnr" => Ok(Method::Gnr),
            other => BaselineKind::parse(other).map(Method::Baseline),
        }
    }

    /// Fits on `data` and imputes it.
    pub fn run(self, data: &crate::missing::IncompleteMatrix, config: &GnrConfig) -> Result<ImputationResult> {
        match self {
            Method::Gnr => {
                let model = gnr::train(data, config)?;
                gnr::impute_seeded(data, &model)
            }
            Method::Baseline(kind) => baselines::run_baseline(kind, data, config),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum DatasetSpec {
    Gaussian(GaussianSpec),
    /// A fixed complete table; only the mask varies with the seed.
    Complete(CompleteMatrix),
}

impl DatasetSpec {
    fn materialize(&self, seed: u64) -> Result<CompleteMatrix> {
        match self {
            DatasetSpec::Gaussian(spec) => spec.sample(&mut SeededRng::substream(seed, DATA_STREAM)),
            DatasetSpec::Complete(x) => Ok(x.clone()),
        }
    }
}

/// One seeded draw of an experiment's data.
#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    pub raw: CompleteMatrix,
    pub stats: FeatureStats,
    /// `raw` standardized with its own complete-data statistics.
    pub truth: CompleteMatrix,
    pub mask: Mask,
}

/// Generates (or loads) the data, standardizes every feature, then applies
/// the missingness mechanism to the standardized values.
pub fn instance(dataset: &DatasetSpec, missing: &MissingSpec, seed: u64) -> Result<Instance> {
    let raw = dataset.materialize(seed)?;
    let stats = FeatureStats::from_complete(&raw)?;
    let truth = stats.standardize_complete(&raw)?;
    let mask = missing.apply(&truth, &mut SeededRng::substream(seed, MASK_STREAM))?;
    Ok(Instance { raw, stats, truth, mask })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub dataset: DatasetSpec,
    pub missing: MissingSpec,
    pub methods: Vec<Method>,
    pub seeds: Vec<u64>,
    pub config: GnrConfig,
}

/// One (method, seed) cell.
#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub method: Method,
    pub seed: u64,
    pub outcome: std::result::Result<CellMetrics, String>,
    pub runtime_secs: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CellMetrics {
    pub rmse: f64,
    pub mse: f64,
    pub mask_accuracy: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation over √n; NaN with fewer than two runs.
    pub stderr: f64,
    pub n: usize,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Summary { mean: f64::NAN, stderr: f64::NAN, n };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let stderr = if n < 2 {
            f64::NAN
        } else {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        };
        Summary { mean, stderr, n }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub setting: String,
    pub method: Method,
    pub failed: usize,
    pub rmse: Summary,
    pub mse: Summary,
    pub mask_accuracy: Summary,
    pub random_floor: f64,
    /// Relative RMSE improvement over the best baseline, in percent (GNR rows only).
    pub improvement_pct: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub runs: Vec<RunRecord>,
    pub rows: Vec<ReportRow>,
}

pub const REPORT_COLUMNS: [&str; 13] = [
    "setting",
    "method",
    "n_runs",
    "n_failed",
    "rmse_mean",
    "rmse_stderr",
    "mse_mean",
    "mse_stderr",
    "mask_accuracy_mean",
    "mask_accuracy_stderr",
    "random_floor",
    "improvement_pct",
    "seeds",
];

fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        String::new()
    }
}

impl EvalReport {
    pub fn row(&self, method: Method) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.method == method)
    }

    /// Per-seed metrics of `method` in seed order (failed cells skipped).
    pub fn cells(&self, method: Method) -> Vec<(u64, CellMetrics)> {
        self.runs
            .iter()
            .filter(|r| r.method == method)
            .filter_map(|r| r.outcome.as_ref().ok().map(|m| (r.seed, *m)))
            .collect()
    }

    /// Summary table, one line per method. Runtimes are left out so the file
    /// is reproducible; see [`EvalReport::timings_csv`].
    pub fn to_csv(&self) -> String {
        let seeds: Vec<String> = {
            let mut s: Vec<u64> = self.runs.iter().map(|r| r.seed).collect();
            s.dedup();
            s.iter().map(u64::to_string).collect()
        };
        let mut out = REPORT_COLUMNS.join(",");
        out.push('\n');
        for r in &self.rows {
            let fields = [
                r.setting.clone(),
                r.method.as_str().to_string(),
                r.rmse.n.to_string(),
                r.failed.to_string(),
                num(r.rmse.mean),
                num(r.rmse.stderr),
                num(r.mse.mean),
                num(r.mse.stderr),
                num(r.mask_accuracy.mean),
                num(r.mask_accuracy.stderr),
                num(r.random_floor),
                r.improvement_pct.map(num).unwrap_or_default(),
                seeds.join(" "),
            ];
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }

    /// Per-cell metrics, including failures with their messages.
    pub fn runs_csv(&self) -> String {
        let mut out = String::from("method,seed,status,rmse,mse,mask_accuracy\n");
        for r in &self.runs {
            match &r.outcome {
                Ok(m) => writeln!(
                    out,
                    "{},{},ok,{},{},{}",
                    r.method.as_str(),
                    r.seed,
                    m.rmse,
                    m.mse,
                    num(m.mask_accuracy)
                ),
                Err(e) => writeln!(out, "{},{},failed: {},,,", r.method.as_str(), r.seed, e.replace(',', ";")),
            }
            .expect("writing to a String");
        }
        out
    }

    pub fn timings_csv(&self) -> String {
        let mut out = String::from("method,seed,runtime_secs\n");
        for r in &self.runs {
            writeln!(out, "{},{},{}", r.method.as_str(), r.seed, r.runtime_secs).expect("writing to a String");
        }
        out
    }
}

/// Observed fraction of the listed features, turned into the accuracy of a
/// marginal-matched random guess.
fn empirical_floor(mask: &Mask, features: &[usize]) -> f64 {
    if features.is_empty() || mask.rows() == 0 {
        return f64::NAN;
    }
    let observed = (0..mask.rows())
        .map(|i| features.iter().filter(|&&j| mask.is_observed(i, j)).count())
        .sum::<usize>();
    let q = observed as f64 / (mask.rows() * features.len()) as f64;
    q * q + (1.0 - q) * (1.0 - q)
}

/// Data → mask → standardize → fit each method → impute → score, for every
/// seed. A failing cell is recorded with its error and excluded from the
/// aggregates.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<EvalReport> {
    if spec.seeds.is_empty() {
        return Err(Error::Config("at least one seed is required".into()));
    }
    if spec.methods.is_empty() {
        return Err(Error::Config("at least one method is required".into()));
    }
    spec.config.validate()?;
    let setting = spec.missing.label();
    let mut runs = Vec::new();
    let mut floors = Vec::new();

    for &seed in &spec.seeds {
        let Instance { truth, mask, .. } = instance(&spec.dataset, &spec.missing, seed)?;
        let observed = compose_observed(&truth, &mask)?;
        let features = spec.missing.mnar_features(truth.cols());
        floors.push(empirical_floor(&mask, &features));
        let config = GnrConfig { seed, ..spec.config.clone() };

        for &method in &spec.methods {
            let start = Instant::now();
            let outcome = method.run(&observed, &config).and_then(|res| {
                Ok(CellMetrics {
                    rmse: rmse_missing(&truth, &res.imputed, &mask)?,
                    mse: mse_missing(&truth, &res.imputed, &mask)?,
                    mask_accuracy: if features.is_empty() {
                        f64::NAN
                    } else {
                        mask_accuracy(&mask, &res.probabilistic_mask, 0.5, &features)?
                    },
                })
            });
            runs.push(RunRecord {
                method,
                seed,
                outcome: outcome.map_err(|e| e.to_string()),
                runtime_secs: start.elapsed().as_secs_f64(),
            });
        }
    }

    let floor = match spec.missing.kind {
        MissingKind::SelfMask => random_floor(spec.missing.probability),
        _ => Summary::of(&floors).mean,
    };
    let mut rows: Vec<ReportRow> = spec
        .methods
        .iter()
        .map(|&method| {
            let cells: Vec<CellMetrics> = runs
                .iter()
                .filter(|r| r.method == method)
                .filter_map(|r| r.outcome.as_ref().ok().copied())
                .collect();
            let pick = |f: fn(&CellMetrics) -> f64| Summary::of(&cells.iter().map(f).collect::<Vec<_>>());
            ReportRow {
                setting: setting.clone(),
                method,
                failed: spec.seeds.len() - cells.len(),
                rmse: pick(|c| c.rmse),
                mse: pick(|c| c.mse),
                mask_accuracy: pick(|c| c.mask_accuracy),
                random_floor: floor,
                improvement_pct: None,
            }
        })
        .collect();

    let best_baseline = rows
        .iter()
        .filter(|r| r.method != Method::Gnr && r.rmse.mean.is_finite())
        .map(|r| r.rmse.mean)
        .fold(f64::INFINITY, f64::min);
    if best_baseline.is_finite() {
        for r in rows.iter_mut().filter(|r| r.method == Method::Gnr && r.rmse.mean.is_finite()) {
            r.improvement_pct = Some(100.0 * (best_baseline - r.rmse.mean) / best_baseline);
        }
    }
    Ok(EvalReport { runs, rows })
}

/// Per-feature histogram of true values split by observation status, as CSV
/// with columns `feature,bin_lo,bin_hi,observed,missing`.
pub fn histogram_csv(truth: &CompleteMatrix, mask: &Mask, bins: usize, names: Option<&[String]>) -> Result<String> {
    if bins == 0 {
        return Err(Error::Config("histogram needs at least one bin".into()));
    }
    if truth.shape() != mask.shape() {
        return Err(Error::dim("histogram_csv", format!("truth {:?}, mask {:?}", truth.shape(), mask.shape())));
    }
    let mut out = String::from("feature,bin_lo,bin_hi,observed,missing\n");
    for j in 0..truth.cols() {
        let col: Vec<f64> = (0..truth.rows()).map(|i| truth.get(i, j)).collect();
        let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
        let mut counts = vec![(0usize, 0usize); bins];
        for (i, v) in col.iter().enumerate() {
            let b = (((v - lo) / width) as usize).min(bins - 1);
            if mask.is_observed(i, j) {
                counts[b].0 += 1;
            } else {
                counts[b].1 += 1;
            }
        }
        let name = names.and_then(|n| n.get(j).cloned()).unwrap_or_else(|| format!("x{}", j + 1));
        for (b, (o, m)) in counts.iter().enumerate() {
            let a = lo + b as f64 * width;
            writeln!(out, "{name},{a},{},{o},{m}", a + width).expect("writing to a String");
        }
    }
    Ok(out)
}
