use ndarray::Array2;

use super::params::{BoundEncoder, BoundMaskDecoder, BoundParams};
use super::{GnrConfig, GnrParams};
use crate::autodiff::{probability_head, std_head, Activation, Axis, Graph, NodeId, Tensor2D};
use crate::missing::{zero_impute, IncompleteMatrix};
use crate::rng::SeededRng;
use crate::{Error, Result};

/// Posterior draws for a batch: row `i * draws + k` holds draw `k` of row `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentBatch {
    pub draws: usize,
    pub z: Tensor2D,
    pub mean: Tensor2D,
    pub std: Tensor2D,
    pub noise: Tensor2D,
}

impl LatentBatch {
    pub fn rows(&self) -> usize {
        self.mean.rows()
    }
}

/// Per-row, per-draw log importance weights and their parts, all `n x K`.
#[derive(Clone, Debug, PartialEq)]
pub struct ImportanceWeightSet {
    pub log_w: Tensor2D,
    /// Row-wise softmax of `log_w`.
    pub normalized: Tensor2D,
    /// Observed-data log-likelihood.
    pub data: Tensor2D,
    /// α times the mask log-likelihood.
    pub mask: Tensor2D,
    /// log N(z; 0, I).
    pub prior: Tensor2D,
    /// −log q(z | x_obs).
    pub neg_posterior: Tensor2D,
}

fn repeat_rows(t: &Tensor2D, times: usize) -> Tensor2D {
    let (r, c) = t.shape();
    Tensor2D::from_array(Array2::from_shape_fn((r * times, c), |(i, j)| t.get(i / times, j)))
}

/// Row-wise softmax.
pub(crate) fn normalize_rows(log_w: &Tensor2D) -> Result<Tensor2D> {
    let (n, k) = log_w.shape();
    let mut out = Vec::with_capacity(n * k);
    for i in 0..n {
        let row = log_w.row(i);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::Numeric {
                component: "importance weights".into(),
                context: format!("row {i} has no finite log-weight"),
            });
        }
        let e: Vec<f64> = row.iter().map(|v| (v - max).exp()).collect();
        let s: f64 = e.iter().sum();
        out.extend(e.iter().map(|v| v / s));
    }
    Tensor2D::from_vec(n, k, out)
}

pub(crate) fn encoder_forward(
    g: &mut Graph,
    bound: &BoundParams,
    x_obs: &IncompleteMatrix,
) -> Result<(NodeId, NodeId)> {
    let filled = zero_impute(x_obs).into_values();
    match &bound.encoder {
        BoundEncoder::ZeroImpute { trunk, mean, std } => {
            let x = g.constant(filled);
            let h = trunk.forward(g, x)?;
            let mu = mean.forward(g, h)?;
            let s = std.forward(g, h)?;
            Ok((mu, std_head(g, s)))
        }
        BoundEncoder::SetFunction { embeddings, embed_weights, value_weights, bias, mean, std } => {
            let (n, d) = x_obs.shape();
            let code_size = g.value(*bias).cols();
            // one row per (sample, feature) pair, sample-major
            let values = Tensor2D::from_vec(n * d, 1, filled.as_slice().to_vec())?;
            let mask = x_obs.mask();
            let gate = Tensor2D::from_array(Array2::from_shape_fn((n * d, code_size), |(r, _)| {
                if mask.bits()[r] {
                    1.0
                } else {
                    0.0
                }
            }));
            let v = g.constant(values);
            let value_part = g.matmul(v, *value_weights)?;
            let feature_part = g.matmul(*embeddings, *embed_weights)?;
            let feature_part = g.tile_rows(feature_part, n)?;
            let pre = g.add(value_part, feature_part)?;
            let pre = g.add_bias(pre, *bias)?;
            let h = g.activate(pre, Activation::Tanh);
            let gate = g.constant(gate);
            let h = g.mul(h, gate)?;
            let code = g.sum_row_groups(h, d)?;
            let mu = mean.forward(g, code)?;
            let s = std.forward(g, code)?;
            Ok((mu, std_head(g, s)))
        }
    }
}

pub(crate) fn data_forward(g: &mut Graph, bound: &BoundParams, z: NodeId) -> Result<(NodeId, NodeId)> {
    let dec = &bound.data;
    let h = dec.trunk.forward(g, z)?;
    let raw = dec.mean.forward(g, h)?;
    let mean = match dec.output_range {
        Some((lo, hi)) => {
            let s = g.activate(raw, Activation::Sigmoid);
            g.affine(s, hi - lo, lo)
        }
        None => raw,
    };
    let s = dec.std.forward(g, h)?;
    Ok((mean, std_head(g, s)))
}

/// Observation probabilities. The parallel decoder reads `z`; the serial head
/// reads the decoded data mean.
pub(crate) fn mask_forward(g: &mut Graph, bound: &BoundParams, z: NodeId, data_mean: NodeId) -> Result<NodeId> {
    let logits = match &bound.mask {
        BoundMaskDecoder::Parallel { trunk, logits } => {
            let h = trunk.forward(g, z)?;
            logits.forward(g, h)?
        }
        BoundMaskDecoder::Serial { head } => head.forward(g, data_mean)?,
    };
    Ok(probability_head(g, logits))
}

pub(crate) struct WeightNodes {
    pub rows: usize,
    pub draws: usize,
    pub data_mean: NodeId,
    pub data_std: NodeId,
    pub mask_probs: Option<NodeId>,
    /// `n K x 1` columns.
    pub data: NodeId,
    pub mask: Option<NodeId>,
    pub prior: NodeId,
    pub posterior: NodeId,
    /// `n x K`.
    pub log_w: NodeId,
}

/// Builds the log importance weights for `x_obs` with the supplied standard
/// normal `noise` (`n·draws x latent`).
pub(crate) fn weight_graph(
    g: &mut Graph,
    bound: &BoundParams,
    x_obs: &IncompleteMatrix,
    noise: &Tensor2D,
    draws: usize,
    alpha: f64,
    want_mask_probs: bool,
) -> Result<WeightNodes> {
    let (n, _) = x_obs.shape();
    if draws == 0 || noise.rows() != n * draws {
        return Err(Error::dim(
            "importance_log_weights",
            format!("noise has {} rows for {n} rows x {draws} draws", noise.rows()),
        ));
    }
    let (enc_mean, enc_std) = encoder_forward(g, bound, x_obs)?;
    let mean_k = g.repeat_rows(enc_mean, draws)?;
    let std_k = g.repeat_rows(enc_std, draws)?;
    let z = g.reparameterize(mean_k, std_k, noise)?;

    let (data_mean, data_std) = data_forward(g, bound, z)?;
    let filled = zero_impute(x_obs).into_values();
    let x_rep = g.constant(repeat_rows(&filled, draws));
    let mask_rep = repeat_rows(&x_obs.mask().to_tensor(), draws);

    // observed entries only: the mask zeroes every missing term
    let lx = g.gaussian_log_density(x_rep, data_mean, data_std)?;
    let gate = g.constant(mask_rep.clone());
    let lx = g.mul(lx, gate)?;
    let data = g.sum(lx, Axis::Cols);

    let mask_probs = if alpha != 0.0 || want_mask_probs {
        Some(mask_forward(g, bound, z, data_mean)?)
    } else {
        None
    };
    let mask = match mask_probs {
        Some(p) if alpha != 0.0 => {
            let lm = g.bernoulli_log_density(&mask_rep, p)?;
            let lm = g.sum(lm, Axis::Cols);
            Some(g.scale(lm, alpha))
        }
        _ => None,
    };

    let (rz, cz) = g.value(z).shape();
    let zero = g.constant(Tensor2D::zeros(rz, cz));
    let one = g.constant(Tensor2D::filled(rz, cz, 1.0));
    let lp = g.gaussian_log_density(z, zero, one)?;
    let prior = g.sum(lp, Axis::Cols);
    let lq = g.gaussian_log_density(z, mean_k, std_k)?;
    let posterior = g.sum(lq, Axis::Cols);

    let mut total = data;
    if let Some(m) = mask {
        total = g.add(total, m)?;
    }
    let total = g.add(total, prior)?;
    let total = g.sub(total, posterior)?;
    let log_w = g.reshape(total, n, draws)?;

    let nodes = WeightNodes {
        rows: n,
        draws,
        data_mean,
        data_std,
        mask_probs,
        data,
        mask,
        prior,
        posterior,
        log_w,
    };
    check_components(g, &nodes)?;
    Ok(nodes)
}

fn check_components(g: &Graph, w: &WeightNodes) -> Result<()> {
    let mut parts = vec![
        ("observed-data log-likelihood", w.data),
        ("prior log-density", w.prior),
        ("posterior log-density", w.posterior),
    ];
    if let Some(m) = w.mask {
        parts.insert(1, ("mask log-likelihood", m));
    }
    for (name, id) in parts {
        if let Some(k) = g.value(id).as_slice().iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric {
                component: name.to_string(),
                context: format!("at row {} draw {}", k / w.draws, k % w.draws),
            });
        }
    }
    Ok(())
}

/// Batch-averaged `log (1/K) Σ_k ŵ_k`.
pub(crate) fn bound_node(g: &mut Graph, w: &WeightNodes) -> Result<NodeId> {
    let lse = g.log_sum_exp(w.log_w, Axis::Cols)?;
    let per_row = g.affine(lse, 1.0, -(w.draws as f64).ln());
    Ok(g.mean_all(per_row))
}

fn column_to_matrix(t: &Tensor2D, rows: usize, draws: usize) -> Tensor2D {
    Tensor2D::from_vec(rows, draws, t.as_slice().to_vec()).expect("n K entries")
}

pub(crate) fn weight_set(g: &Graph, w: &WeightNodes) -> Result<ImportanceWeightSet> {
    let (n, k) = (w.rows, w.draws);
    let log_w = g.value(w.log_w).clone();
    let normalized = normalize_rows(&log_w)?;
    let neg_posterior = column_to_matrix(g.value(w.posterior), n, k).map(|v| -v);
    Ok(ImportanceWeightSet {
        normalized,
        data: column_to_matrix(g.value(w.data), n, k),
        mask: match w.mask {
            Some(m) => column_to_matrix(g.value(m), n, k),
            None => Tensor2D::zeros(n, k),
        },
        prior: column_to_matrix(g.value(w.prior), n, k),
        neg_posterior,
        log_w,
    })
}

/// Posterior mean and standard deviation, each `n x latent_dim`.
pub fn encode(x_obs: &IncompleteMatrix, params: &GnrParams) -> Result<(Tensor2D, Tensor2D)> {
    check_width(x_obs, params)?;
    let mut g = Graph::new();
    let bound = params.bind(&mut g);
    let (m, s) = encoder_forward(&mut g, &bound, x_obs)?;
    Ok((g.value(m).clone(), g.value(s).clone()))
}

fn check_width(x_obs: &IncompleteMatrix, params: &GnrParams) -> Result<()> {
    if x_obs.cols() != params.features {
        return Err(Error::Consistency(format!(
            "data has {} features, model expects {}",
            x_obs.cols(),
            params.features
        )));
    }
    Ok(())
}

/// Draws `draws` reparameterized latents per row.
pub fn sample_latent(
    x_obs: &IncompleteMatrix,
    params: &GnrParams,
    draws: usize,
    rng: &mut SeededRng,
) -> Result<LatentBatch> {
    if draws == 0 {
        return Err(Error::dim("sample_latent", "zero draws"));
    }
    let (mean, std) = encode(x_obs, params)?;
    let noise = rng.normal_tensor(x_obs.rows() * draws, params.latent_dim);
    let mut g = Graph::new();
    let m = g.constant(repeat_rows(&mean, draws));
    let s = g.constant(repeat_rows(&std, draws));
    let z = g.reparameterize(m, s, &noise)?;
    Ok(LatentBatch { draws, z: g.value(z).clone(), mean, std, noise })
}

fn latent_input(latent: &LatentBatch, params: &GnrParams) -> Result<()> {
    if latent.z.cols() != params.latent_dim {
        return Err(Error::dim(
            "decode",
            format!("latent width {} for a {}-dimensional model", latent.z.cols(), params.latent_dim),
        ));
    }
    Ok(())
}

/// Gaussian mean and standard deviation for every feature, `n K x d`.
pub fn decode_data(latent: &LatentBatch, params: &GnrParams) -> Result<(Tensor2D, Tensor2D)> {
    latent_input(latent, params)?;
    let mut g = Graph::new();
    let bound = params.bind(&mut g);
    let z = g.constant(latent.z.clone());
    let (m, s) = data_forward(&mut g, &bound, z)?;
    Ok((g.value(m).clone(), g.value(s).clone()))
}

/// Observation probabilities for every feature, `n K x d`.
pub fn decode_mask(latent: &LatentBatch, params: &GnrParams) -> Result<Tensor2D> {
    latent_input(latent, params)?;
    let mut g = Graph::new();
    let bound = params.bind(&mut g);
    let z = g.constant(latent.z.clone());
    let data_mean = match bound.mask {
        BoundMaskDecoder::Serial { .. } => data_forward(&mut g, &bound, z)?.0,
        BoundMaskDecoder::Parallel { .. } => z,
    };
    let p = mask_forward(&mut g, &bound, z, data_mean)?;
    Ok(g.value(p).clone())
}

/// Log importance weights for the draws in `latent`, which must come from
/// this model's encoder on `x_obs` (the latents are rebuilt from its noise).
pub fn importance_log_weights(
    x_obs: &IncompleteMatrix,
    latent: &LatentBatch,
    params: &GnrParams,
    alpha: f64,
) -> Result<ImportanceWeightSet> {
    check_width(x_obs, params)?;
    latent_input(latent, params)?;
    let mut g = Graph::new();
    let bound = params.bind(&mut g);
    let w = weight_graph(&mut g, &bound, x_obs, &latent.noise, latent.draws, alpha, false)?;
    weight_set(&g, &w)
}

/// Monte Carlo estimate of the bound with `config.importance_samples` draws
/// per row.
pub fn gnr_bound(
    x_obs: &IncompleteMatrix,
    params: &GnrParams,
    config: &GnrConfig,
    rng: &mut SeededRng,
) -> Result<f64> {
    check_width(x_obs, params)?;
    let k = config.importance_samples;
    if k == 0 {
        return Err(Error::Config("importance_samples must be at least 1".into()));
    }
    let noise = rng.normal_tensor(x_obs.rows() * k, params.latent_dim);
    bound_with_noise(x_obs, params, &noise, k, config.alpha)
}

/// Bound for explicitly supplied noise (`n·draws x latent`).
pub fn bound_with_noise(
    x_obs: &IncompleteMatrix,
    params: &GnrParams,
    noise: &Tensor2D,
    draws: usize,
    alpha: f64,
) -> Result<f64> {
    let mut g = Graph::new();
    let bound = params.bind(&mut g);
    let w = weight_graph(&mut g, &bound, x_obs, noise, draws, alpha, false)?;
    let b = bound_node(&mut g, &w)?;
    Ok(g.value(b).get(0, 0))
}
