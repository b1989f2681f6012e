use std::ops::Range;

use super::model::{normalize_rows, weight_graph};
use super::{GnrParams, TrainedModel};
use crate::autodiff::{Graph, Tensor2D};
use crate::missing::{CompleteMatrix, IncompleteMatrix};
use crate::rng::SeededRng;
use crate::{Error, Result};

/// Upper bound on `rows x draws` evaluated in one graph.
const CHUNK_BUDGET: usize = 8192;
const RESAMPLE_STREAM: u64 = u64::MAX;
/// Substream of the training seed that drives imputation noise.
pub const IMPUTE_STREAM: u64 = 3;

/// Importance draws for a contiguous block of rows. Per-draw tensors use
/// row `i * draws + l` for draw `l` of the block's row `i`.
#[derive(Clone, Debug)]
pub struct PosteriorChunk {
    pub rows: Range<usize>,
    pub draws: usize,
    pub log_w: Tensor2D,
    pub data_mean: Tensor2D,
    pub data_std: Tensor2D,
    pub mask_probs: Option<Tensor2D>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ImputationResult {
    /// Observed entries copied through, missing entries replaced.
    pub imputed: CompleteMatrix,
    /// Posterior expected probability that each entry is observed.
    pub probabilistic_mask: Tensor2D,
}

/// Streams `draws` importance samples per row through `visit`, a block of
/// rows at a time. Noise is consumed from `rng` in row order, so the result
/// does not depend on how the caller uses the chunks.
pub fn posterior_draws(
    x_obs: &IncompleteMatrix,
    params: &GnrParams,
    draws: usize,
    alpha: f64,
    with_mask: bool,
    rng: &mut SeededRng,
    mut visit: impl FnMut(PosteriorChunk) -> Result<()>,
) -> Result<()> {
    if draws == 0 {
        return Err(Error::Config("imputation_samples (L) must be at least 1".into()));
    }
    if x_obs.cols() != params.features {
        return Err(Error::Consistency(format!(
            "data has {} features, model expects {}",
            x_obs.cols(),
            params.features
        )));
    }
    let n = x_obs.rows();
    let step = (CHUNK_BUDGET / draws).max(1);
    let mut start = 0;
    while start < n {
        let end = (start + step).min(n);
        let idx: Vec<usize> = (start..end).collect();
        let x = x_obs.select_rows(&idx);
        let noise = rng.normal_tensor(idx.len() * draws, params.latent_dim);
        let mut g = Graph::new();
        let bound = params.bind(&mut g);
        let w = weight_graph(&mut g, &bound, &x, &noise, draws, alpha, with_mask)?;
        visit(PosteriorChunk {
            rows: start..end,
            draws,
            log_w: g.value(w.log_w).clone(),
            data_mean: g.value(w.data_mean).clone(),
            data_std: g.value(w.data_std).clone(),
            mask_probs: w.mask_probs.map(|p| g.value(p).clone()),
        })?;
        start = end;
    }
    Ok(())
}

/// Self-normalized weighted average of per-draw values: `log_w` is `n x L`,
/// `per_draw` is `n L x d`, the result `n x d`.
pub fn snis_combine(log_w: &Tensor2D, per_draw: &Tensor2D) -> Result<Tensor2D> {
    let (n, l) = log_w.shape();
    if per_draw.rows() != n * l {
        return Err(Error::dim(
            "snis_combine",
            format!("{} per-draw rows for {n} rows x {l} draws", per_draw.rows()),
        ));
    }
    let weights = normalize_rows(log_w)?;
    let d = per_draw.cols();
    let mut out = Tensor2D::zeros(n, d);
    for i in 0..n {
        let w = weights.row(i);
        let acc = out.as_mut_slice();
        for (k, wk) in w.iter().enumerate() {
            let v = per_draw.row(i * l + k);
            for j in 0..d {
                acc[i * d + j] += wk * v[j];
            }
        }
    }
    Ok(out)
}

/// Imputes with the model's own temperature and `L`.
pub fn impute(x_obs: &IncompleteMatrix, model: &TrainedModel, rng: &mut SeededRng) -> Result<ImputationResult> {
    impute_with(x_obs, &model.params, model.config.imputation_samples, model.config.alpha, rng)
}

/// [`impute`] with noise from the model's own seed.
pub fn impute_seeded(x_obs: &IncompleteMatrix, model: &TrainedModel) -> Result<ImputationResult> {
    let mut rng = SeededRng::substream(model.config.seed, IMPUTE_STREAM);
    impute(x_obs, model, &mut rng)
}

/// Importance-weighted posterior mean at missing entries. With `alpha == 0`
/// the model carries no mask information and the probabilistic mask is 0.5.
pub fn impute_with(
    x_obs: &IncompleteMatrix,
    params: &GnrParams,
    draws: usize,
    alpha: f64,
    rng: &mut SeededRng,
) -> Result<ImputationResult> {
    let (n, d) = x_obs.shape();
    let with_mask = alpha != 0.0;
    let mut values = Tensor2D::zeros(n, d);
    let mut prob = Tensor2D::filled(n, d, 0.5);
    posterior_draws(x_obs, params, draws, alpha, with_mask, rng, |chunk| {
        let means = snis_combine(&chunk.log_w, &chunk.data_mean)?;
        let probs = match &chunk.mask_probs {
            Some(p) => Some(snis_combine(&chunk.log_w, p)?),
            None => None,
        };
        for (local, i) in chunk.rows.clone().enumerate() {
            for j in 0..d {
                let v = match x_obs.get(i, j) {
                    Some(obs) => obs,
                    None => means.get(local, j),
                };
                values.set(i, j, v);
                if let Some(p) = &probs {
                    prob.set(i, j, p.get(local, j));
                }
            }
        }
        Ok(())
    })?;
    Ok(ImputationResult { imputed: CompleteMatrix::new(values)?, probabilistic_mask: prob })
}

/// `count` completed datasets by sampling importance resampling: for each
/// row a draw is picked with probability proportional to its weight and the
/// missing entries are sampled from that draw's Gaussian.
pub fn multiple_impute(
    x_obs: &IncompleteMatrix,
    params: &GnrParams,
    draws: usize,
    alpha: f64,
    count: usize,
    rng: &mut SeededRng,
) -> Result<Vec<CompleteMatrix>> {
    let (n, d) = x_obs.shape();
    let mut resample = SeededRng::substream(rng.seed(), RESAMPLE_STREAM);
    let mut out = vec![Tensor2D::zeros(n, d); count];
    posterior_draws(x_obs, params, draws, alpha, false, rng, |chunk| {
        let weights = normalize_rows(&chunk.log_w)?;
        for (local, i) in chunk.rows.clone().enumerate() {
            let w = weights.row(local);
            for target in out.iter_mut() {
                let u = resample.uniform();
                let mut pick = w.len() - 1;
                let mut cum = 0.0;
                for (k, wk) in w.iter().enumerate() {
                    cum += wk;
                    if u < cum {
                        pick = k;
                        break;
                    }
                }
                let r = local * chunk.draws + pick;
                for j in 0..d {
                    let v = match x_obs.get(i, j) {
                        Some(obs) => obs,
                        None => resample.normal(chunk.data_mean.get(r, j), chunk.data_std.get(r, j)),
                    };
                    target.set(i, j, v);
                }
            }
        }
        Ok(())
    })?;
    out.into_iter().map(CompleteMatrix::new).collect()
}
