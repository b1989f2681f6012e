//! Dataset ingestion, flat config files, checkpoints and report files.
//!
//! Matrix CSV: a header of feature names, then one row per sample. An empty
//! cell is missing; `NA` and `nan` (any case) are accepted as missing on
//! read but never written (a single-column row whose value is missing is
//! written as `""` so it is not a blank line). Values are written with Rust's shortest
//! round-trip formatting, so a write followed by a read is lossless.
//!
//! ```text
//! a,b
//! 1,
//! 2,3
//! ```
//!
//! Triplet CSV: `user_id,item_id,rating` with 0-based ids and integer
//! ratings in `1..=r_max`; an optional header line is skipped.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::autodiff::Tensor2D;
use crate::eval::{rating_transform, Method};
use crate::gnr::{EncoderVariant, GnrConfig, GnrParams, MaskPathway};
use crate::missing::{CompleteMatrix, FeatureStats, IncompleteMatrix, Mask};
use crate::rng::SeededRng;
use crate::synth::{GaussianSpec, MissingKind, MissingSpec, DEFAULT_CORRELATION};
use crate::{Error, Result};

/// Environment variable that overrides the configured output directory.
pub const OUT_DIR_ENV: &str = "GNR_OUT_DIR";
pub const CHECKPOINT_MAGIC: &str = "gnr-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;
pub const CONFIG_ECHO: &str = "resolved.conf";

/// A loaded matrix with its feature names.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub names: Vec<String>,
    pub data: IncompleteMatrix,
}

impl Table {
    /// Requires every entry to be observed.
    pub fn into_complete(self) -> Result<(Vec<String>, CompleteMatrix)> {
        if let Some((k, _)) = self.data.mask().bits().iter().enumerate().find(|(_, b)| !**b) {
            let c = self.data.cols();
            return Err(Error::parse(
                format!("row {}, column {}", k / c + 2, k % c + 1),
                "missing value in a table that must be complete",
            ));
        }
        let values = crate::missing::zero_impute(&self.data);
        Ok((self.names, values))
    }
}

fn is_missing_token(cell: &str) -> bool {
    cell.is_empty() || cell.eq_ignore_ascii_case("na") || cell.eq_ignore_ascii_case("nan")
}

/// Parses matrix CSV text; `source` names the input in error locations.
pub fn parse_matrix_csv(text: &str, source: &str) -> Result<Table> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut records = reader.records();
    let header = match records.next() {
        Some(r) => r?,
        None => return Err(Error::parse(source.to_string(), "empty file, expected a header row")),
    };
    let names: Vec<String> = header.iter().map(|s| s.trim().to_string()).collect();
    let d = names.len();
    let mut cells = Vec::new();
    let mut rows = 0;
    for (r, rec) in records.enumerate() {
        let rec = rec?;
        let line = r + 2;
        if rec.len() == 1 && rec.get(0).map(str::trim) == Some("") && d > 1 {
            continue;
        }
        if rec.len() != d {
            return Err(Error::parse(
                format!("{source}: row {line}"),
                format!("{} fields, header has {d}", rec.len()),
            ));
        }
        for (c, cell) in rec.iter().enumerate() {
            let cell = cell.trim();
            if is_missing_token(cell) {
                cells.push(None);
            } else {
                let v: f64 = cell.parse().map_err(|_| {
                    Error::parse(format!("{source}: row {line}, column {}", c + 1), format!("`{cell}` is not a number"))
                })?;
                if !v.is_finite() {
                    return Err(Error::parse(
                        format!("{source}: row {line}, column {}", c + 1),
                        format!("`{cell}` is not finite"),
                    ));
                }
                cells.push(Some(v));
            }
        }
        rows += 1;
    }
    Ok(Table { names, data: IncompleteMatrix::from_options(rows, d, &cells)? })
}

pub fn load_matrix_csv(path: &Path) -> Result<Table> {
    let text = fs::read_to_string(path)?;
    parse_matrix_csv(&text, &path.display().to_string())
}

pub fn default_names(d: usize) -> Vec<String> {
    (1..=d).map(|j| format!("x{j}")).collect()
}

fn header(names: &[String]) -> String {
    let mut s = names.join(",");
    s.push('\n');
    s
}

pub fn incomplete_to_csv(names: &[String], data: &IncompleteMatrix) -> String {
    let mut out = header(names);
    for i in 0..data.rows() {
        let row: Vec<String> = (0..data.cols())
            .map(|j| match data.get(i, j) {
                Some(v) => v.to_string(),
                // a lone empty cell would be a blank line, which readers skip
                None if data.cols() == 1 => "\"\"".to_string(),
                None => String::new(),
            })
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn tensor_to_csv(names: &[String], values: &Tensor2D) -> String {
    let mut out = header(names);
    for i in 0..values.rows() {
        let row: Vec<String> = values.row(i).iter().map(f64::to_string).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn complete_to_csv(names: &[String], data: &CompleteMatrix) -> String {
    tensor_to_csv(names, data.values())
}

/// Mask as 0/1 CSV (1 = observed).
pub fn mask_to_csv(names: &[String], mask: &Mask) -> String {
    tensor_to_csv(names, &mask.to_tensor())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RatingMode {
    /// Per-entry grade noise ε ~ N(0, 0.1²) drawn from the given seed.
    Train { seed: u64 },
    /// ε = 0.
    Test,
}

/// Standard deviation of the training-mode grade noise.
pub const RATING_NOISE_STD: f64 = 0.1;

/// Parses `user_id,item_id,rating` triplets into a rating-transformed
/// `n_users x n_items` matrix with unrated cells missing.
pub fn parse_triplets(
    text: &str,
    source: &str,
    n_users: usize,
    n_items: usize,
    r_max: u32,
    mode: RatingMode,
) -> Result<IncompleteMatrix> {
    let mut cells: Vec<Option<f64>> = vec![None; n_users * n_items];
    let mut rng = match mode {
        RatingMode::Train { seed } => Some(SeededRng::new(seed)),
        RatingMode::Test => None,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    for (r, rec) in reader.records().enumerate() {
        let rec = rec?;
        let line = r + 1;
        let loc = || format!("{source}: line {line}");
        if rec.len() == 1 && rec.get(0) == Some("") {
            continue;
        }
        if rec.len() != 3 {
            return Err(Error::parse(loc(), format!("expected 3 fields, found {}", rec.len())));
        }
        let parsed: std::result::Result<Vec<u64>, _> = rec.iter().map(str::parse::<u64>).collect();
        let v = match parsed {
            Ok(v) => v,
            Err(_) if line == 1 => continue,
            Err(_) => return Err(Error::parse(loc(), "fields must be non-negative integers")),
        };
        let (u, it, rating) = (v[0] as usize, v[1] as usize, v[2]);
        if u >= n_users || it >= n_items {
            return Err(Error::parse(loc(), format!("id ({u}, {it}) outside {n_users} x {n_items}")));
        }
        if rating == 0 || rating > r_max as u64 {
            return Err(Error::parse(loc(), format!("rating {rating} outside [1, {r_max}]")));
        }
        let k = u * n_items + it;
        if cells[k].is_some() {
            return Err(Error::parse(loc(), format!("duplicate pair ({u}, {it})")));
        }
        let eps = rng.as_mut().map_or(0.0, |g| g.normal(0.0, RATING_NOISE_STD));
        cells[k] = Some(rating_transform(rating as u32, r_max, eps)?);
    }
    IncompleteMatrix::from_options(n_users, n_items, &cells)
}

pub fn load_triplets(
    path: &Path,
    n_users: usize,
    n_items: usize,
    r_max: u32,
    mode: RatingMode,
) -> Result<IncompleteMatrix> {
    let text = fs::read_to_string(path)?;
    parse_triplets(&text, &path.display().to_string(), n_users, n_items, r_max, mode)
}

/// Flat `key = value` configuration with `#` comments.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FlatConfig {
    pub entries: BTreeMap<String, String>,
}

impl FlatConfig {
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let loc = || format!("{source}: line {}", n + 1);
            let (k, v) = line.split_once('=').ok_or_else(|| Error::parse(loc(), "expected `key = value`"))?;
            let k = k.trim();
            if k.is_empty() || k.contains(char::is_whitespace) {
                return Err(Error::parse(loc(), format!("bad key `{k}`")));
            }
            if entries.insert(k.to_string(), v.trim().to_string()).is_some() {
                return Err(Error::parse(loc(), format!("duplicate key `{k}`")));
            }
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?, &path.display().to_string())
    }

    /// Parses a `key=value` override.
    pub fn set_pair(&mut self, pair: &str) -> Result<()> {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{pair}` is not key=value")))?;
        self.entries.insert(k.trim().to_string(), v.trim().to_string());
        Ok(())
    }

    pub fn to_text(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

/// Data source for `bench` and `synth`.
#[derive(Clone, Debug, PartialEq)]
pub struct DataConfig {
    pub n: usize,
    pub dims: usize,
    pub correlation: f64,
    /// Complete CSV to use instead of the synthetic generator.
    pub path: Option<PathBuf>,
}

impl DataConfig {
    pub fn gaussian(&self) -> GaussianSpec {
        GaussianSpec::equicorrelated(self.n, self.dims, self.correlation)
    }
}

/// Fully resolved run settings.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub gnr: GnrConfig,
    pub missing: MissingSpec,
    pub data: DataConfig,
    pub method: Method,
    pub methods: Vec<Method>,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            gnr: GnrConfig::synthetic(),
            missing: MissingSpec::self_mask(0.8),
            data: DataConfig { n: 2000, dims: 4, correlation: DEFAULT_CORRELATION, path: None },
            method: Method::Gnr,
            methods: vec![
                Method::Gnr,
                Method::Baseline(crate::baselines::BaselineKind::MiwaeAlpha0),
                Method::Baseline(crate::baselines::BaselineKind::SerialSelection),
                Method::Baseline(crate::baselines::BaselineKind::Mean),
            ],
            seeds: vec![1, 2, 3, 4, 5],
            output_dir: PathBuf::from("out"),
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Config(format!("`{key}`: cannot parse `{v}`")))
}

fn parse_list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| parse_num(key, s))
        .collect()
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    /// Applies every entry of `flat` on top of the defaults.
    pub fn from_flat(flat: &FlatConfig) -> Result<Self> {
        let mut c = Self::default();
        for (k, v) in &flat.entries {
            c.apply(k, v)?;
        }
        Ok(c)
    }

    fn apply(&mut self, key: &str, v: &str) -> Result<()> {
        let g = &mut self.gnr;
        match key {
            "seed" => g.seed = parse_num(key, v)?,
            "gnr.latent_dim" => g.latent_dim = parse_num(key, v)?,
            "gnr.hidden_sizes" => g.hidden_sizes = parse_list(key, v)?,
            "gnr.importance_samples" => g.importance_samples = parse_num(key, v)?,
            "gnr.imputation_samples" => g.imputation_samples = parse_num(key, v)?,
            "gnr.alpha" => g.alpha = parse_num(key, v)?,
            "gnr.learning_rate" => g.learning_rate = parse_num(key, v)?,
            "gnr.iterations" => g.iterations = parse_num(key, v)?,
            "gnr.batch_size" => g.batch_size = parse_num(key, v)?,
            "gnr.encoder" => g.encoder_variant = EncoderVariant::parse(v)?,
            "gnr.set_embedding_size" => g.set_embedding_size = parse_num(key, v)?,
            "gnr.set_code_size" => g.set_code_size = parse_num(key, v)?,
            "gnr.trace_every" => g.trace_every = parse_num(key, v)?,
            "gnr.output_range" => {
                g.output_range = if v.is_empty() || v == "none" {
                    None
                } else {
                    match parse_list::<f64>(key, v)?.as_slice() {
                        [lo, hi] => Some((*lo, *hi)),
                        _ => return Err(Error::Config(format!("`{key}` needs two numbers"))),
                    }
                }
            }
            "missing.kind" => self.missing.kind = MissingKind::parse(v)?,
            "missing.probability" => self.missing.probability = parse_num(key, v)?,
            "missing.mcar_probability" => self.missing.mcar_probability = parse_num(key, v)?,
            "missing.features" => {
                self.missing.features =
                    if v.is_empty() || v == "default" { None } else { Some(parse_list(key, v)?) }
            }
            "data.n" => self.data.n = parse_num(key, v)?,
            "data.dims" => self.data.dims = parse_num(key, v)?,
            "data.correlation" => self.data.correlation = parse_num(key, v)?,
            "data.path" => self.data.path = if v.is_empty() { None } else { Some(PathBuf::from(v)) },
            "method" => self.method = Method::parse(v)?,
            "methods" => {
                self.methods = v
                    .split(|c: char| c == ',' || c.is_whitespace())
                    .filter(|s| !s.is_empty())
                    .map(Method::parse)
                    .collect::<Result<_>>()?
            }
            "seeds" => self.seeds = parse_list(key, v)?,
            "output_dir" => self.output_dir = PathBuf::from(v),
            other => return Err(Error::Config(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    /// Every setting as a flat config; parsing it back gives `self`.
    pub fn to_flat(&self) -> FlatConfig {
        let g = &self.gnr;
        let m = &self.missing;
        let mut e = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            e.insert(k.to_string(), v);
        };
        put("seed", g.seed.to_string());
        put("gnr.latent_dim", g.latent_dim.to_string());
        put("gnr.hidden_sizes", join(&g.hidden_sizes));
        put("gnr.importance_samples", g.importance_samples.to_string());
        put("gnr.imputation_samples", g.imputation_samples.to_string());
        put("gnr.alpha", g.alpha.to_string());
        put("gnr.learning_rate", g.learning_rate.to_string());
        put("gnr.iterations", g.iterations.to_string());
        put("gnr.batch_size", g.batch_size.to_string());
        put("gnr.encoder", g.encoder_variant.as_str().to_string());
        put("gnr.set_embedding_size", g.set_embedding_size.to_string());
        put("gnr.set_code_size", g.set_code_size.to_string());
        put("gnr.trace_every", g.trace_every.to_string());
        put(
            "gnr.output_range",
            g.output_range.map_or("none".to_string(), |(lo, hi)| format!("{lo},{hi}")),
        );
        put("missing.kind", m.kind.as_str().to_string());
        put("missing.probability", m.probability.to_string());
        put("missing.mcar_probability", m.mcar_probability.to_string());
        put("missing.features", m.features.as_ref().map_or("default".to_string(), |f| join(f)));
        put("data.n", self.data.n.to_string());
        put("data.dims", self.data.dims.to_string());
        put("data.correlation", self.data.correlation.to_string());
        put("data.path", self.data.path.as_ref().map(|p| p.display().to_string()).unwrap_or_default());
        put("method", self.method.as_str().to_string());
        put("methods", self.methods.iter().map(|m| m.as_str()).collect::<Vec<_>>().join(","));
        put("seeds", join(&self.seeds));
        put("output_dir", self.output_dir.display().to_string());
        FlatConfig { entries: e }
    }

    /// Writes the resolved config into `dir`.
    pub fn echo_into(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(CONFIG_ECHO), self.to_flat().to_text())?;
        Ok(())
    }
}

/// Output directory: `flag` if given, else the environment override, else
/// the configured one.
pub fn resolve_output_dir(flag: Option<&Path>, configured: &Path) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    match std::env::var_os(OUT_DIR_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => configured.to_path_buf(),
    }
}

/// A fitted imputer plus the standardization it was trained under.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub method: Method,
    pub stats: FeatureStats,
    pub model: CheckpointModel,
}

#[derive(Clone, Debug, PartialEq)]
pub enum CheckpointModel {
    Network { config: GnrConfig, params: GnrParams },
    /// Per-feature means in standardized space.
    Means(Vec<f64>),
}

fn floats(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(" ")
}

impl Checkpoint {
    pub fn features(&self) -> usize {
        self.stats.len()
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION}\n");
        out.push_str(&format!("method {}\n", self.method.as_str()));
        out.push_str(&format!("features {}\n", self.features()));
        out.push_str(&format!("stats.mean {}\n", floats(&self.stats.mean)));
        out.push_str(&format!("stats.std {}\n", floats(&self.stats.std)));
        match &self.model {
            CheckpointModel::Means(m) => out.push_str(&format!("means {}\n", floats(m))),
            CheckpointModel::Network { config, params } => {
                out.push_str(&format!("pathway {}\n", params.pathway().as_str()));
                let echo = RunConfig { gnr: config.clone(), ..RunConfig::default() }.to_flat();
                for (k, v) in echo.entries.iter().filter(|(k, _)| k.starts_with("gnr.") || *k == "seed") {
                    out.push_str(&format!("config {k} = {v}\n"));
                }
                for t in params.tensors() {
                    out.push_str(&format!("block {} {}\n{}\n", t.rows(), t.cols(), floats(t.as_slice())));
                }
            }
        }
        out
    }

    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().peekable();
        let mut next = |what: &str| -> Result<(usize, String)> {
            lines
                .next()
                .map(|(n, l)| (n + 1, l.to_string()))
                .ok_or_else(|| Error::parse(source.to_string(), format!("truncated before {what}")))
        };
        let loc = |n: usize| format!("{source}: line {n}");
        let field = |line: &(usize, String), key: &str| -> Result<String> {
            line.1
                .strip_prefix(key)
                .and_then(|r| r.strip_prefix(' ').or(if r.is_empty() { Some("") } else { None }))
                .map(str::to_string)
                .ok_or_else(|| Error::parse(loc(line.0), format!("expected `{key}`")))
        };
        let nums = |n: usize, s: &str| -> Result<Vec<f64>> {
            s.split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|_| Error::parse(loc(n), format!("bad number `{t}`"))))
                .collect()
        };

        let head = next("header")?;
        let version = field(&head, CHECKPOINT_MAGIC)?;
        if version != CHECKPOINT_VERSION.to_string() {
            return Err(Error::parse(loc(head.0), format!("unsupported checkpoint version `{version}`")));
        }
        let l = next("method")?;
        let method = Method::parse(&field(&l, "method")?)?;
        let l = next("features")?;
        let features: usize = field(&l, "features")?
            .parse()
            .map_err(|_| Error::parse(loc(l.0), "bad feature count"))?;
        let l = next("stats.mean")?;
        let mean = nums(l.0, &field(&l, "stats.mean")?)?;
        let l = next("stats.std")?;
        let std = nums(l.0, &field(&l, "stats.std")?)?;
        if mean.len() != features || std.len() != features {
            return Err(Error::parse(loc(l.0), "statistics length differs from feature count"));
        }
        let stats = FeatureStats::new(mean, std)?;

        let model = if method == Method::Baseline(crate::baselines::BaselineKind::Mean) {
            let l = next("means")?;
            let means = nums(l.0, &field(&l, "means")?)?;
            if means.len() != features {
                return Err(Error::parse(loc(l.0), "means length differs from feature count"));
            }
            CheckpointModel::Means(means)
        } else {
            let l = next("pathway")?;
            let pathway = MaskPathway::parse(&field(&l, "pathway")?)?;
            let mut flat = FlatConfig::default();
            let pending = loop {
                let l = next("parameter blocks")?;
                match l.1.strip_prefix("config ") {
                    Some(pair) => flat.set_pair(pair)?,
                    None => break Some(l),
                }
            };
            let config = RunConfig::from_flat(&flat)?.gnr;
            config.validate()?;
            let mut params = GnrParams::new(features, &config, pathway, &mut SeededRng::new(0));
            let mut expected = params.tensors_mut().into_iter();
            let mut header = pending;
            for t in &mut expected {
                let h = match header.take() {
                    Some(h) => h,
                    None => next("block")?,
                };
                let dims = field(&h, "block")?;
                let shape: Vec<usize> = dims
                    .split_whitespace()
                    .map(|t| t.parse().map_err(|_| Error::parse(loc(h.0), "bad block shape")))
                    .collect::<Result<_>>()?;
                if shape != [t.rows(), t.cols()] {
                    return Err(Error::Consistency(format!(
                        "{}: block shape {:?} does not match the configured network ({}x{})",
                        loc(h.0),
                        shape,
                        t.rows(),
                        t.cols()
                    )));
                }
                let body = next("block values")?;
                let values = nums(body.0, &body.1)?;
                if values.len() != t.len() {
                    return Err(Error::parse(loc(body.0), format!("{} values for a {}x{} block", values.len(), t.rows(), t.cols())));
                }
                t.as_mut_slice().copy_from_slice(&values);
            }
            if let Some(h) = header {
                return Err(Error::parse(loc(h.0), "unexpected content"));
            }
            CheckpointModel::Network { config, params }
        };
        if let Some((n, l)) = lines.find(|(_, l)| !l.trim().is_empty()) {
            return Err(Error::parse(loc(n + 1), format!("trailing content `{l}`")));
        }
        Ok(Self { method, stats, model })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            if !dir.as_os_str().is_empty() {
                fs::create_dir_all(dir)?;
            }
        }
        fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?, &path.display().to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_csv_format() {
        let t = parse_matrix_csv("a,b\n1,\n2,3\n", "t").unwrap();
        assert_eq!(t.names, vec!["a", "b"]);
        assert_eq!(t.data.shape(), (2, 2));
        assert_eq!(t.data.mask().bits(), &[true, false, true, true]);
        assert_eq!(t.data.get(1, 1), Some(3.0));
    }

    #[test]
    fn missing_tokens() {
        let t = parse_matrix_csv("a,b,c\nNA,nan,NaN\n", "t").unwrap();
        assert_eq!(t.data.mask().count_missing(), 3);
    }

    #[test]
    fn malformed_matrix_inputs() {
        assert!(matches!(parse_matrix_csv("", "t"), Err(Error::Parse { .. })));
        let ragged = parse_matrix_csv("a,b\n1,2\n3\n", "t").unwrap_err();
        assert!(ragged.to_string().contains("row 3"), "{ragged}");
        let word = parse_matrix_csv("a,b\n1,x\n", "t").unwrap_err();
        assert!(word.to_string().contains("row 2, column 2"), "{word}");
        assert!(parse_matrix_csv("a\ninf\n", "t").is_err());
    }

    #[test]
    fn triplets() {
        let m = parse_triplets("0,0,5\n", "t", 2, 3, 5, RatingMode::Test).unwrap();
        assert_eq!(m.get(0, 0), Some(1.0));
        assert_eq!(m.mask().count_missing(), 5);
        assert!(parse_triplets("0,0,5\n0,0,4\n", "t", 2, 3, 5, RatingMode::Test).is_err());
        assert!(parse_triplets("2,0,5\n", "t", 2, 3, 5, RatingMode::Test).is_err());
        assert!(parse_triplets("0,0,6\n", "t", 2, 3, 5, RatingMode::Test).is_err());
        let with_header = parse_triplets("user_id,item_id,rating\n1,2,3\n", "t", 2, 3, 5, RatingMode::Test).unwrap();
        assert_eq!(with_header.get(1, 2), Some(7.0 / 31.0));
    }

    #[test]
    fn train_mode_noise_is_seeded() {
        let text = "0,0,3\n0,1,4\n1,2,1\n";
        let a = parse_triplets(text, "t", 2, 3, 5, RatingMode::Train { seed: 9 }).unwrap();
        let b = parse_triplets(text, "t", 2, 3, 5, RatingMode::Train { seed: 9 }).unwrap();
        let c = parse_triplets(text, "t", 2, 3, 5, RatingMode::Train { seed: 10 }).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a.get(0, 0), Some(7.0 / 31.0));
    }

    #[test]
    fn flat_config_parsing() {
        let f = FlatConfig::parse("# run\ngnr.alpha = 0.5  # half\nmissing.kind=mcar\n\n", "c").unwrap();
        assert_eq!(f.entries["gnr.alpha"], "0.5");
        let c = RunConfig::from_flat(&f).unwrap();
        assert_eq!(c.gnr.alpha, 0.5);
        assert_eq!(c.missing.kind, MissingKind::Mcar);
        assert!(FlatConfig::parse("a = 1\na = 2\n", "c").is_err());
        assert!(FlatConfig::parse("novalue\n", "c").is_err());
        let unknown = FlatConfig::parse("gnr.alhpa = 1\n", "c").unwrap();
        assert!(RunConfig::from_flat(&unknown).is_err());
    }

    #[test]
    fn run_config_echo_round_trips() {
        let mut c = RunConfig::default();
        c.gnr.hidden_sizes = vec![16, 8];
        c.gnr.output_range = Some((0.0, 1.0));
        c.missing = MissingSpec { features: Some(vec![0, 2]), ..MissingSpec::mixed(0.7, 0.1) };
        c.seeds = vec![3, 1];
        let text = c.to_flat().to_text();
        let back = RunConfig::from_flat(&FlatConfig::parse(&text, "echo").unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn checkpoint_round_trip() {
        let config = GnrConfig { hidden_sizes: vec![5], latent_dim: 2, ..GnrConfig::default() };
        let params = GnrParams::new(3, &config, MaskPathway::Serial, &mut SeededRng::new(4));
        let ck = Checkpoint {
            method: Method::Baseline(crate::baselines::BaselineKind::SerialSelection),
            stats: FeatureStats::new(vec![0.1, -2.0, 1e-7], vec![1.0, 0.3, 2.5]).unwrap(),
            model: CheckpointModel::Network { config, params },
        };
        let back = Checkpoint::parse(&ck.to_text(), "ck").unwrap();
        assert_eq!(back, ck);

        let mean = Checkpoint {
            method: Method::Baseline(crate::baselines::BaselineKind::Mean),
            stats: FeatureStats::identity(2),
            model: CheckpointModel::Means(vec![0.25, -1.0 / 3.0]),
        };
        assert_eq!(Checkpoint::parse(&mean.to_text(), "ck").unwrap(), mean);
        assert!(Checkpoint::parse("gnr-checkpoint 7\n", "ck").is_err());
        assert!(Checkpoint::parse(&ck.to_text()[..200], "ck").is_err());
    }
}
