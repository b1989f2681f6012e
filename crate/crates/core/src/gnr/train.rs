use super::model::{bound_node, weight_graph};
use super::{GnrConfig, GnrParams, MaskPathway};
use crate::autodiff::{AdamState, Graph, Tensor2D};
use crate::missing::IncompleteMatrix;
use crate::rng::SeededRng;
use crate::{Error, Result};

const INIT_STREAM: u64 = 0;
const BATCH_STREAM: u64 = 1;
const NOISE_STREAM: u64 = 2;

/// Bound averaged over the minibatches since the previous trace point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TracePoint {
    pub iteration: usize,
    pub bound: f64,
}

#[derive(Clone, Debug)]
pub struct TrainedModel {
    pub params: GnrParams,
    pub config: GnrConfig,
    pub trace: Vec<TracePoint>,
}

/// Bound and its gradient with respect to the flat parameter vector
/// (ordered as [`GnrParams::to_flat`]) for the given noise.
pub fn bound_gradient(
    x_obs: &IncompleteMatrix,
    params: &GnrParams,
    noise: &Tensor2D,
    draws: usize,
    alpha: f64,
) -> Result<(f64, Vec<f64>)> {
    let mut g = Graph::new();
    let bound = params.bind(&mut g);
    let w = weight_graph(&mut g, &bound, x_obs, noise, draws, alpha, false)?;
    let out = bound_node(&mut g, &w)?;
    g.backward(out)?;
    let mut grad = Vec::with_capacity(params.len());
    for id in bound.ids() {
        match g.grad(id) {
            Some(t) => grad.extend_from_slice(t.as_slice()),
            None => grad.extend(std::iter::repeat(0.0).take(g.value(id).len())),
        }
    }
    Ok((g.value(out).get(0, 0), grad))
}

/// Fits the parallel conjunction model.
pub fn train(data: &IncompleteMatrix, config: &GnrConfig) -> Result<TrainedModel> {
    train_with_pathway(data, config, MaskPathway::Parallel)
}

/// Maximizes the bound by Adam on shuffled minibatches.
pub fn train_with_pathway(
    data: &IncompleteMatrix,
    config: &GnrConfig,
    pathway: MaskPathway,
) -> Result<TrainedModel> {
    config.validate()?;
    let (n, d) = data.shape();
    if n == 0 || d == 0 {
        return Err(Error::dim("train", format!("cannot train on a {n}x{d} matrix")));
    }
    let mut init_rng = SeededRng::substream(config.seed, INIT_STREAM);
    let mut batch_rng = SeededRng::substream(config.seed, BATCH_STREAM);
    let mut noise_rng = SeededRng::substream(config.seed, NOISE_STREAM);

    let mut params = GnrParams::new(d, config, pathway, &mut init_rng);
    let mut flat = params.to_flat();
    let mut adam = AdamState::new(flat.len());
    let batch = config.batch_size.min(n);
    let k = config.importance_samples;

    let mut order: Vec<usize> = (0..n).collect();
    batch_rng.shuffle(&mut order);
    let mut cursor = 0;
    let mut trace = Vec::new();
    let (mut acc, mut count) = (0.0, 0usize);

    for it in 0..config.iterations {
        let mut idx = Vec::with_capacity(batch);
        while idx.len() < batch {
            if cursor == n {
                batch_rng.shuffle(&mut order);
                cursor = 0;
            }
            idx.push(order[cursor]);
            cursor += 1;
        }
        let x = data.select_rows(&idx);
        let noise = noise_rng.normal_tensor(batch * k, config.latent_dim);
        let (value, grad) = bound_gradient(&x, &params, &noise, k, config.alpha).map_err(|e| match e {
            Error::Numeric { component, context } => Error::Numeric {
                component,
                context: format!("{context} at iteration {it}"),
            },
            other => other,
        })?;
        let descent: Vec<f64> = grad.iter().map(|v| -v).collect();
        adam.step(&mut flat, &descent, config.learning_rate)?;
        params.set_flat(&flat)?;

        acc += value;
        count += 1;
        if (it + 1) % config.trace_every == 0 || it + 1 == config.iterations {
            trace.push(TracePoint { iteration: it + 1, bound: acc / count as f64 });
            acc = 0.0;
            count = 0;
        }
    }
    Ok(TrainedModel { params, config: config.clone(), trace })
}
