//! Synthetic data and missingness generators.
//!
//! All generators are pure functions of their inputs and the supplied
//! [`SeededRng`]. Thresholds for self-masking use the complete-data feature
//! mean, since masking is applied after generation.

use crate::autodiff::Tensor2D;
use crate::missing::{CompleteMatrix, Mask};
use crate::rng::SeededRng;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MissingKind {
    /// Every entry missing independently with `mcar_probability`.
    Mcar,
    /// Above-mean entries of the listed features missing with `probability`.
    SelfMask,
    /// Feature 1 missing above its mean, feature 2 missing below its mean.
    Star,
    /// Union of `SelfMask` and `Mcar` missingness.
    Mixed,
}

impl MissingKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MissingKind::Mcar => "mcar",
            MissingKind::SelfMask => "self_mask",
            MissingKind::Star => "star",
            MissingKind::Mixed => "mixed",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mcar" => Ok(MissingKind::Mcar),
            "self_mask" | "selfmask" | "mnar" => Ok(MissingKind::SelfMask),
            "star" => Ok(MissingKind::Star),
            "mixed" => Ok(MissingKind::Mixed),
            other => Err(Error::Config(format!("unknown missing kind `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MissingSpec {
    pub kind: MissingKind,
    /// Self-masking probability k.
    pub probability: f64,
    /// Self-masked features; `None` selects the first ⌈d/2⌉.
    pub features: Option<Vec<usize>>,
    pub mcar_probability: f64,
}

impl MissingSpec {
    pub fn self_mask(k: f64) -> Self {
        Self { kind: MissingKind::SelfMask, probability: k, features: None, mcar_probability: 0.0 }
    }

    pub fn mcar(p: f64) -> Self {
        Self { kind: MissingKind::Mcar, probability: 0.0, features: None, mcar_probability: p }
    }

    pub fn star() -> Self {
        Self { kind: MissingKind::Star, probability: 1.0, features: None, mcar_probability: 0.0 }
    }

    pub fn mixed(k: f64, p_mcar: f64) -> Self {
        Self { kind: MissingKind::Mixed, probability: k, features: None, mcar_probability: p_mcar }
    }

    /// Short label, e.g. `self_mask_0.8` or `mixed_0.8+0.2`.
    pub fn label(&self) -> String {
        match self.kind {
            MissingKind::Mcar => format!("mcar_{}", self.mcar_probability),
            MissingKind::SelfMask => format!("self_mask_{}", self.probability),
            MissingKind::Star => "star".to_string(),
            MissingKind::Mixed => format!("mixed_{}+{}", self.probability, self.mcar_probability),
        }
    }

    /// The features the mechanism can make missing.
    pub fn masked_features(&self, d: usize) -> Vec<usize> {
        match self.kind {
            MissingKind::Mcar => (0..d).collect(),
            MissingKind::Star => vec![0, 1],
            MissingKind::SelfMask => self.features.clone().unwrap_or_else(|| default_features(d)),
            MissingKind::Mixed => (0..d).collect(),
        }
    }

    /// Features subject to self-masking (for mask-accuracy scoring).
    pub fn mnar_features(&self, d: usize) -> Vec<usize> {
        match self.kind {
            MissingKind::Mcar => Vec::new(),
            MissingKind::Star => vec![0, 1],
            MissingKind::SelfMask | MissingKind::Mixed => {
                self.features.clone().unwrap_or_else(|| default_features(d))
            }
        }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        for (name, p) in [("probability", self.probability), ("mcar_probability", self.mcar_probability)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} {p} outside [0, 1]")));
            }
        }
        if let Some(f) = &self.features {
            if let Some(j) = f.iter().find(|&&j| j >= d) {
                return Err(Error::Config(format!("feature index {j} out of range for {d} features")));
            }
        }
        if self.kind == MissingKind::Star && d < 2 {
            return Err(Error::dim("star_mask", format!("needs at least 2 features, got {d}")));
        }
        Ok(())
    }

    pub fn apply(&self, x: &CompleteMatrix, rng: &mut SeededRng) -> Result<Mask> {
        self.validate(x.cols())?;
        let features = self.masked_features(x.cols());
        match self.kind {
            MissingKind::Mcar => Ok(mcar_mask(x.rows(), x.cols(), self.mcar_probability, rng)),
            MissingKind::SelfMask => self_mask(x, &features, self.probability, rng),
            MissingKind::Star => star_mask(x, rng),
            MissingKind::Mixed => {
                let mnar = self.mnar_features(x.cols());
                mixed_mask(x, &mnar, self.probability, self.mcar_probability, rng)
            }
        }
    }
}

/// First ⌈d/2⌉ feature indices.
pub fn default_features(d: usize) -> Vec<usize> {
    (0..d.div_ceil(2)).collect()
}

/// Lower-triangular `L` with `L Lᵀ = cov` (row-major `d x d`).
pub fn cholesky(cov: &[f64], d: usize) -> Result<Vec<f64>> {
    if cov.len() != d * d {
        return Err(Error::dim("cholesky", format!("{} entries for {d}x{d}", cov.len())));
    }
    for i in 0..d {
        for j in 0..i {
            if (cov[i * d + j] - cov[j * d + i]).abs() > 1e-12 * (1.0 + cov[i * d + j].abs()) {
                return Err(Error::Factorization(format!("covariance not symmetric at ({i}, {j})")));
            }
        }
    }
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i * d + k] * l[j * d + k]).sum();
            if i == j {
                let diag = cov[i * d + i] - s;
                if !(diag > 0.0) {
                    return Err(Error::Factorization(format!(
                        "covariance not positive definite (pivot {i} = {diag})"
                    )));
                }
                l[i * d + i] = diag.sqrt();
            } else {
                l[i * d + j] = (cov[i * d + j] - s) / l[j * d + j];
            }
        }
    }
    Ok(l)
}

/// `n` i.i.d. draws from N(mean, cov).
pub fn gaussian_synth(n: usize, mean: &[f64], cov: &[f64], rng: &mut SeededRng) -> Result<CompleteMatrix> {
    let d = mean.len();
    let l = cholesky(cov, d)?;
    let mut data = Vec::with_capacity(n * d);
    let mut eps = vec![0.0; d];
    for _ in 0..n {
        for e in eps.iter_mut() {
            *e = rng.standard_normal();
        }
        for i in 0..d {
            let s: f64 = (0..=i).map(|k| l[i * d + k] * eps[k]).sum();
            data.push(mean[i] + s);
        }
    }
    CompleteMatrix::new(Tensor2D::from_vec(n, d, data)?)
}

/// Each entry missing independently with probability `p_miss`.
pub fn mcar_mask(n: usize, d: usize, p_miss: f64, rng: &mut SeededRng) -> Mask {
    Mask::from_fn(n, d, |_, _| !rng.bernoulli(p_miss))
}

fn check_probability(op: &'static str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::domain(op, format!("probability {p} outside [0, 1]")));
    }
    Ok(())
}

/// Entries of `features` strictly above their feature mean go missing with
/// probability `k`; everything else stays observed.
pub fn self_mask(x: &CompleteMatrix, features: &[usize], k: f64, rng: &mut SeededRng) -> Result<Mask> {
    check_probability("self_mask", k)?;
    if let Some(j) = features.iter().find(|&&j| j >= x.cols()) {
        return Err(Error::dim("self_mask", format!("feature {j} out of range")));
    }
    let means = x.column_means();
    let mut listed = vec![false; x.cols()];
    for &j in features {
        listed[j] = true;
    }
    Ok(Mask::from_fn(x.rows(), x.cols(), |i, j| {
        if listed[j] && x.get(i, j) > means[j] {
            !rng.bernoulli(k)
        } else {
            true
        }
    }))
}

/// Feature 1 missing where above its mean, feature 2 missing where below its
/// mean, both with certainty. The rng is accepted for interface symmetry and
/// never consumed.
pub fn star_mask(x: &CompleteMatrix, _rng: &mut SeededRng) -> Result<Mask> {
    if x.cols() < 2 {
        return Err(Error::dim("star_mask", format!("needs at least 2 features, got {}", x.cols())));
    }
    let means = x.column_means();
    Ok(Mask::from_fn(x.rows(), x.cols(), |i, j| match j {
        0 => !(x.get(i, 0) > means[0]),
        1 => !(x.get(i, 1) < means[1]),
        _ => true,
    }))
}

/// Missing if missing under `self_mask(k_mnar)` or under `mcar(p_mcar)`.
pub fn mixed_mask(
    x: &CompleteMatrix,
    features: &[usize],
    k_mnar: f64,
    p_mcar: f64,
    rng: &mut SeededRng,
) -> Result<Mask> {
    check_probability("mixed_mask", p_mcar)?;
    let mnar = self_mask(x, features, k_mnar, rng)?;
    let mcar = mcar_mask(x.rows(), x.cols(), p_mcar, rng);
    mnar.intersect(&mcar)
}

/// Multivariate Gaussian generator settings.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianSpec {
    pub n: usize,
    pub mean: Vec<f64>,
    /// Row-major `d x d` covariance.
    pub cov: Vec<f64>,
}

impl GaussianSpec {
    /// Zero mean, unit variances and a common correlation `rho`.
    pub fn equicorrelated(n: usize, d: usize, rho: f64) -> Self {
        let cov = (0..d * d).map(|k| if k / d == k % d { 1.0 } else { rho }).collect();
        Self { n, mean: vec![0.0; d], cov }
    }

    pub fn dims(&self) -> usize {
        self.mean.len()
    }

    pub fn sample(&self, rng: &mut SeededRng) -> Result<CompleteMatrix> {
        gaussian_synth(self.n, &self.mean, &self.cov, rng)
    }
}

impl Default for GaussianSpec {
    /// The 4-feature synthetic task.
    fn default() -> Self {
        Self::equicorrelated(2000, 4, DEFAULT_CORRELATION)
    }
}

/// Off-diagonal correlation of the default 4-feature task.
pub const DEFAULT_CORRELATION: f64 = 0.5;
