//! Command-line front end: `synth`, `train`, `impute`, `eval` and `bench`.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use gnr_core::baselines::{self, BaselineKind};
use gnr_core::eval::{self, DatasetSpec, ExperimentSpec, Method};
use gnr_core::gnr::{self, TrainedModel, IMPUTE_STREAM};
use gnr_core::io::{self, Checkpoint, CheckpointModel, FlatConfig, RunConfig};
use gnr_core::missing::{standardize, CompleteMatrix, FeatureStats, IncompleteMatrix};
use gnr_core::rng::SeededRng;
use gnr_core::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "gnr", version, about = "Deep generative imputation for MNAR tabular data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set gnr.iterations=500` (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory (beats GNR_OUT_DIR and `output_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate complete data and a mask; write truth and observed CSVs.
    Synth {
        #[command(flatten)]
        common: Common,
    },
    /// Fit GNR or a baseline on an incomplete CSV and write a checkpoint.
    Train {
        #[command(flatten)]
        common: Common,
        /// Incomplete matrix CSV (empty cells are missing).
        #[arg(long)]
        data: PathBuf,
        /// gnr, miwae_alpha0, serial_selection or mean (overrides `method`).
        #[arg(long)]
        method: Option<String>,
    },
    /// Impute an incomplete CSV with a checkpoint.
    Impute {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Also write this many multiple imputations.
        #[arg(long, default_value_t = 0)]
        multiple: usize,
    },
    /// Score a completed CSV against the truth.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        imputed: PathBuf,
        /// The incomplete CSV that was imputed; its empty cells are scored.
        #[arg(long)]
        observed: PathBuf,
        /// Probabilistic-mask CSV for mask accuracy.
        #[arg(long)]
        prob_mask: Option<PathBuf>,
        /// Feature indices for mask accuracy (default: features with missing values).
        #[arg(long, value_delimiter = ',')]
        features: Vec<usize>,
    },
    /// Run every method over every seed and write the report.
    Bench {
        #[command(flatten)]
        common: Common,
    },
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit status: 0 on success, 1 on a runtime error and
/// 2 on a usage error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn resolve(common: &Common) -> Result<(RunConfig, PathBuf)> {
    let mut flat = match &common.config {
        Some(p) => FlatConfig::load(p)?,
        None => FlatConfig::default(),
    };
    for pair in &common.overrides {
        flat.set_pair(pair)?;
    }
    let mut config = RunConfig::from_flat(&flat)?;
    let out = io::resolve_output_dir(common.out.as_deref(), &config.output_dir);
    config.output_dir = out.clone();
    config.echo_into(&out)?;
    Ok((config, out))
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    fs::write(dir.join(name), contents)?;
    Ok(())
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Synth { common } => synth(&common),
        Command::Train { common, data, method } => train(&common, &data, method.as_deref()),
        Command::Impute { common, data, checkpoint, multiple } => impute(&common, &data, &checkpoint, multiple),
        Command::Eval { common, truth, imputed, observed, prob_mask, features } => {
            evaluate(&common, &truth, &imputed, &observed, prob_mask.as_deref(), &features)
        }
        Command::Bench { common } => bench(&common),
    }
}

fn dataset(config: &RunConfig) -> Result<(DatasetSpec, Vec<String>)> {
    match &config.data.path {
        Some(p) => {
            let (names, x) = io::load_matrix_csv(p)?.into_complete()?;
            Ok((DatasetSpec::Complete(x), names))
        }
        None => Ok((DatasetSpec::Gaussian(config.data.gaussian()), io::default_names(config.data.dims))),
    }
}

fn synth(common: &Common) -> Result<()> {
    let (config, out) = resolve(common)?;
    let (spec, names) = dataset(&config)?;
    let inst = eval::instance(&spec, &config.missing, config.gnr.seed)?;
    let observed = gnr_core::missing::compose_observed(&inst.raw, &inst.mask)?;
    write(&out, "truth.csv", &io::complete_to_csv(&names, &inst.raw))?;
    write(&out, "observed.csv", &io::incomplete_to_csv(&names, &observed))?;
    write(&out, "mask.csv", &io::mask_to_csv(&names, &inst.mask))?;
    write(&out, "histogram.csv", &eval::histogram_csv(&inst.raw, &inst.mask, 20, Some(&names))?)?;
    println!(
        "wrote {} rows x {} features ({:.1}% missing) to {}",
        inst.raw.rows(),
        inst.raw.cols(),
        100.0 * inst.mask.missing_fraction(),
        out.display()
    );
    Ok(())
}

fn trace_csv(model: &TrainedModel) -> String {
    let mut s = String::from("iteration,bound\n");
    for p in &model.trace {
        s.push_str(&format!("{},{}\n", p.iteration, p.bound));
    }
    s
}

fn train(common: &Common, data: &Path, method: Option<&str>) -> Result<()> {
    let (mut config, out) = resolve(common)?;
    if let Some(m) = method {
        config.method = Method::parse(m)?;
        config.echo_into(&out)?;
    }
    let table = io::load_matrix_csv(data)?;
    let (x, stats) = standardize(&table.data, None)?;
    let fitted = match config.method {
        Method::Baseline(BaselineKind::Mean) => {
            CheckpointModel::Means(baselines::observed_means(&x)?)
        }
        method => {
            let model = match method {
                Method::Gnr => gnr::train(&x, &config.gnr)?,
                Method::Baseline(BaselineKind::MiwaeAlpha0) => baselines::train_alpha0(&x, &config.gnr)?,
                _ => baselines::train_serial_selection(&x, &config.gnr)?,
            };
            write(&out, "trace.csv", &trace_csv(&model))?;
            CheckpointModel::Network { config: model.config, params: model.params }
        }
    };
    let ck = Checkpoint { method: config.method, stats, model: fitted };
    ck.save(&out.join("checkpoint.txt"))?;
    println!("trained {} on {} rows; checkpoint in {}", config.method.as_str(), x.rows(), out.display());
    Ok(())
}

/// Undoes the standardization and copies observed entries from `original`
/// so they pass through untouched.
fn restore(stats: &FeatureStats, original: &IncompleteMatrix, imputed: &CompleteMatrix) -> Result<CompleteMatrix> {
    let back = stats.destandardize_complete(imputed)?;
    let mut v = back.into_values();
    for (i, j, x) in original.observed_entries() {
        v.set(i, j, x);
    }
    CompleteMatrix::new(v)
}

fn impute(common: &Common, data: &Path, checkpoint: &Path, multiple: usize) -> Result<()> {
    let (_, out) = resolve(common)?;
    let ck = Checkpoint::load(checkpoint)?;
    let table = io::load_matrix_csv(data)?;
    if table.data.cols() != ck.features() {
        return Err(Error::Consistency(format!(
            "dataset has {} features, checkpoint was trained on {}",
            table.data.cols(),
            ck.features()
        )));
    }
    let (x, _) = standardize(&table.data, Some(&ck.stats))?;
    let (imputed, prob) = match &ck.model {
        CheckpointModel::Means(means) => (
            baselines::fill_with(&x, means)?,
            gnr_core::autodiff::Tensor2D::filled(x.rows(), x.cols(), 0.5),
        ),
        CheckpointModel::Network { config, params } => {
            let mut rng = SeededRng::substream(config.seed, IMPUTE_STREAM);
            let res = gnr::impute_with(&x, params, config.imputation_samples, config.alpha, &mut rng)?;
            if multiple > 0 {
                let mut rng = SeededRng::substream(config.seed, IMPUTE_STREAM);
                let draws =
                    gnr::multiple_impute(&x, params, config.imputation_samples, config.alpha, multiple, &mut rng)?;
                for (k, d) in draws.iter().enumerate() {
                    let restored = restore(&ck.stats, &table.data, d)?;
                    write(&out, &format!("imputed_{}.csv", k + 1), &io::complete_to_csv(&table.names, &restored))?;
                }
            }
            (res.imputed, res.probabilistic_mask)
        }
    };
    let restored = restore(&ck.stats, &table.data, &imputed)?;
    write(&out, "imputed.csv", &io::complete_to_csv(&table.names, &restored))?;
    write(&out, "prob_mask.csv", &io::tensor_to_csv(&table.names, &prob))?;
    println!("imputed {} missing entries; output in {}", table.data.mask().count_missing(), out.display());
    Ok(())
}

fn evaluate(
    common: &Common,
    truth: &Path,
    imputed: &Path,
    observed: &Path,
    prob_mask: Option<&Path>,
    features: &[usize],
) -> Result<()> {
    let (_, out) = resolve(common)?;
    let (_, truth) = io::load_matrix_csv(truth)?.into_complete()?;
    let (_, imputed) = io::load_matrix_csv(imputed)?.into_complete()?;
    let observed = io::load_matrix_csv(observed)?.data;
    if truth.shape() != imputed.shape() || truth.shape() != observed.shape() {
        return Err(Error::Consistency(format!(
            "truth {:?}, imputed {:?} and observed {:?} differ in shape",
            truth.shape(),
            imputed.shape(),
            observed.shape()
        )));
    }
    let stats = FeatureStats::from_complete(&truth)?;
    let t = stats.standardize_complete(&truth)?;
    let i = stats.standardize_complete(&imputed)?;
    let mask = observed.mask();
    let mse = eval::mse_missing(&t, &i, mask)?;
    let mut report = format!("metric,value\nrmse_missing,{}\nmse_missing,{mse}\n", mse.sqrt());
    if let Some(p) = prob_mask {
        let (_, prob) = io::load_matrix_csv(p)?.into_complete()?;
        let listed = if features.is_empty() { mask.features_with_missing() } else { features.to_vec() };
        let acc = eval::mask_accuracy(mask, prob.values(), 0.5, &listed)?;
        report.push_str(&format!("mask_accuracy,{acc}\n"));
    }
    write(&out, "metrics.csv", &report)?;
    print!("{report}");
    Ok(())
}

fn bench(common: &Common) -> Result<()> {
    let (config, out) = resolve(common)?;
    let (dataset, _) = dataset(&config)?;
    let spec = ExperimentSpec {
        dataset,
        missing: config.missing.clone(),
        methods: config.methods.clone(),
        seeds: config.seeds.clone(),
        config: config.gnr.clone(),
    };
    let report = eval::run_experiment(&spec)?;
    write(&out, "report.csv", &report.to_csv())?;
    write(&out, "runs.csv", &report.runs_csv())?;
    write(&out, "timings.csv", &report.timings_csv())?;
    print!("{}", report.to_csv());
    Ok(())
}
