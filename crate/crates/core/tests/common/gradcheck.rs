//! Finite-difference checks for every differentiable graph operation.
//!
//! Each sweep draws random instances, builds a scalar by summing the
//! operation's output against random weights, and compares the reverse-mode
//! gradient of every input with central differences (step 1e-4). The error
//! measure is the norm-wise relative error of each gradient tensor; sweeps
//! return the worst one seen.

use gnr_core::autodiff::{probability_head, std_head, Activation, Axis, Graph, NodeId, Tensor2D};
use gnr_core::rng::SeededRng;

pub const STEP: f64 = 1e-4;
pub const TOL: f64 = 1e-4;

pub fn random_tensor(rng: &mut SeededRng, r: usize, c: usize, f: impl Fn(&mut SeededRng) -> f64) -> Tensor2D {
    let data = (0..r * c).map(|_| f(rng)).collect();
    Tensor2D::from_vec(r, c, data).unwrap()
}

pub fn normal(r: usize, c: usize, rng: &mut SeededRng) -> Tensor2D {
    random_tensor(rng, r, c, |g| g.standard_normal())
}

/// Scalar `sum(out ⊙ weights)` built from `inputs` by `build`.
fn scalar<F>(inputs: &[Tensor2D], weights: &mut Option<Tensor2D>, rng: &mut SeededRng, build: &F, as_params: bool) -> (Graph, Vec<NodeId>, NodeId)
where
    F: Fn(&mut Graph, &[NodeId]) -> NodeId,
{
    let mut g = Graph::new();
    let ids: Vec<NodeId> = inputs
        .iter()
        .map(|t| if as_params { g.param(t.clone()) } else { g.constant(t.clone()) })
        .collect();
    let out = build(&mut g, &ids);
    let (r, c) = g.value(out).shape();
    let w = weights.get_or_insert_with(|| normal(r, c, rng)).clone();
    let wid = g.constant(w);
    let prod = g.mul(out, wid).unwrap();
    let s = g.sum_all(prod);
    (g, ids, s)
}

/// Worst relative error over the inputs of one instance.
pub fn relative_error<F>(inputs: Vec<Tensor2D>, rng: &mut SeededRng, build: F) -> f64
where
    F: Fn(&mut Graph, &[NodeId]) -> NodeId,
{
    let mut weights = None;
    let (mut g, ids, s) = scalar(&inputs, &mut weights, rng, &build, true);
    g.backward(s).unwrap();
    let mut worst: f64 = 0.0;
    for (k, id) in ids.iter().enumerate() {
        let analytic = g.grad(*id).cloned().unwrap_or_else(|| {
            let (r, c) = inputs[k].shape();
            Tensor2D::zeros(r, c)
        });
        let mut numeric = vec![0.0; inputs[k].len()];
        for e in 0..inputs[k].len() {
            let eval = |delta: f64| {
                let mut perturbed = inputs.clone();
                perturbed[k].as_mut_slice()[e] += delta;
                let (g, _, s) = scalar(&perturbed, &mut weights.clone(), &mut SeededRng::new(0), &build, false);
                g.value(s).get(0, 0)
            };
            numeric[e] = (eval(STEP) - eval(-STEP)) / (2.0 * STEP);
        }
        let diff: f64 = analytic.as_slice().iter().zip(&numeric).map(|(a, n)| (a - n).powi(2)).sum::<f64>().sqrt();
        let na: f64 = analytic.as_slice().iter().map(|a| a * a).sum::<f64>().sqrt();
        let nn: f64 = numeric.iter().map(|a| a * a).sum::<f64>().sqrt();
        worst = worst.max(diff / na.max(nn).max(1e-6));
    }
    worst
}

fn dims(rng: &mut SeededRng) -> (usize, usize) {
    (1 + rng.below(4), 1 + rng.below(4))
}

type Sweep = fn(&mut SeededRng, usize) -> f64;

fn repeat(rng: &mut SeededRng, instances: usize, mut one: impl FnMut(&mut SeededRng) -> f64) -> f64 {
    (0..instances).map(|_| one(rng)).fold(0.0, f64::max)
}

pub fn dense(rng: &mut SeededRng, instances: usize) -> f64 {
    repeat(rng, instances, |rng| {
        let (n, i) = dims(rng);
        let o = 1 + rng.below(4);
        let inputs = vec![normal(n, i, rng), normal(i, o, rng), normal(1, o, rng)];
        relative_error(inputs, rng, |g, x| g.dense(x[0], x[1], x[2]).unwrap())
    })
}

pub fn matmul(rng: &mut SeededRng, instances: usize) -> f64 {
    repeat(rng, instances, |rng| {
        let (n, i) = dims(rng);
        let o = 1 + rng.below(4);
        let inputs = vec![normal(n, i, rng), normal(i, o, rng), normal(1, o, rng)];
        let e1 = relative_error(inputs.clone(), rng, |g, x| g.matmul(x[0], x[1]).unwrap());
        let xw = normal(n, o, rng);
        let e2 = relative_error(vec![xw, inputs[2].clone()], rng, |g, x| g.add_bias(x[0], x[1]).unwrap());
        e1.max(e2)
    })
}

pub fn activations(rng: &mut SeededRng, instances: usize) -> f64 {
    [Activation::Tanh, Activation::Sigmoid, Activation::Softplus]
        .into_iter()
        .map(|kind| {
            repeat(rng, instances, |rng| {
                let (r, c) = dims(rng);
                let x = random_tensor(rng, r, c, |g| 3.0 * g.standard_normal());
                relative_error(vec![x], rng, |g, x| g.activate(x[0], kind))
            })
        })
        .fold(0.0, f64::max)
}

pub fn gaussian_log_density(rng: &mut SeededRng, instances: usize) -> f64 {
    repeat(rng, instances, |rng| {
        let (r, c) = dims(rng);
        let inputs = vec![normal(r, c, rng), normal(r, c, rng), random_tensor(rng, r, c, |g| 0.3 + 2.0 * g.uniform())];
        relative_error(inputs, rng, |g, x| g.gaussian_log_density(x[0], x[1], x[2]).unwrap())
    })
}

pub fn bernoulli_log_density(rng: &mut SeededRng, instances: usize) -> f64 {
    repeat(rng, instances, |rng| {
        let (r, c) = dims(rng);
        let mask = random_tensor(rng, r, c, |g| if g.bernoulli(0.5) { 1.0 } else { 0.0 });
        let p = random_tensor(rng, r, c, |g| 0.05 + 0.9 * g.uniform());
        let m = mask.clone();
        let e1 = relative_error(vec![p], rng, move |g, x| g.bernoulli_log_density(&m, x[0]).unwrap());
        // through the logit, the composition the mask decoder uses
        let logits = random_tensor(rng, r, c, |g| 2.0 * g.standard_normal());
        let e2 = relative_error(vec![logits], rng, move |g, x| {
            let p = probability_head(g, x[0]);
            g.bernoulli_log_density(&mask, p).unwrap()
        });
        e1.max(e2)
    })
}

pub fn reparameterize(rng: &mut SeededRng, instances: usize) -> f64 {
    repeat(rng, instances, |rng| {
        let (r, c) = dims(rng);
        let noise = normal(r, c, rng);
        let inputs = vec![normal(r, c, rng), random_tensor(rng, r, c, |g| 0.1 + g.uniform())];
        relative_error(inputs, rng, move |g, x| g.reparameterize(x[0], x[1], &noise).unwrap())
    })
}

pub fn log_sum_exp(rng: &mut SeededRng, instances: usize) -> f64 {
    [Axis::Rows, Axis::Cols]
        .into_iter()
        .map(|axis| {
            repeat(rng, instances, |rng| {
                let (r, c) = dims(rng);
                let x = random_tensor(rng, r, c, |g| 5.0 * g.standard_normal());
                relative_error(vec![x], rng, move |g, x| g.log_sum_exp(x[0], axis).unwrap())
            })
        })
        .fold(0.0, f64::max)
}

pub fn elementwise_and_reductions(rng: &mut SeededRng, instances: usize) -> f64 {
    repeat(rng, instances, |rng| {
        let (r, c) = dims(rng);
        let a = normal(r, c, rng);
        let b = normal(r, c, rng);
        let pos = random_tensor(rng, r, c, |g| 0.2 + g.uniform());
        let t = 1 + rng.below(3);
        let grouped = normal(r * t, c, rng);
        [
            relative_error(vec![a.clone(), b.clone()], rng, |g, x| g.add(x[0], x[1]).unwrap()),
            relative_error(vec![a.clone(), b.clone()], rng, |g, x| g.sub(x[0], x[1]).unwrap()),
            relative_error(vec![a.clone(), b], rng, |g, x| g.mul(x[0], x[1]).unwrap()),
            relative_error(vec![a.clone()], rng, |g, x| g.affine(x[0], -1.7, 0.3)),
            relative_error(vec![a.clone()], rng, |g, x| g.scale(x[0], 2.5)),
            relative_error(vec![a.clone()], rng, |g, x| g.exp(x[0])),
            relative_error(vec![pos], rng, |g, x| g.log(x[0]).unwrap()),
            relative_error(vec![a.clone()], rng, |g, x| g.clamp(x[0], -0.8, 0.9)),
            relative_error(vec![a.clone()], rng, |g, x| g.sum(x[0], Axis::Rows)),
            relative_error(vec![a.clone()], rng, |g, x| g.sum(x[0], Axis::Cols)),
            relative_error(vec![a.clone()], rng, |g, x| g.mean_all(x[0])),
            relative_error(vec![a.clone()], rng, move |g, x| g.repeat_rows(x[0], t).unwrap()),
            relative_error(vec![a.clone()], rng, move |g, x| g.tile_rows(x[0], t).unwrap()),
            relative_error(vec![grouped], rng, move |g, x| g.sum_row_groups(x[0], t).unwrap()),
            relative_error(vec![a], rng, move |g, x| g.reshape(x[0], c, r).unwrap()),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    })
}

/// A random scalar-valued composition resembling one importance-weight
/// evaluation: encoder dense + tanh, reparameterization, decoder dense,
/// Gaussian and Bernoulli log densities, log-sum-exp across draws.
pub fn compositions(rng: &mut SeededRng, instances: usize) -> f64 {
    repeat(rng, instances, |rng| {
        let (n, d) = (1 + rng.below(3), 1 + rng.below(3));
        let draws = 1 + rng.below(3);
        let latent = 1 + rng.below(2);
        let x = normal(n, d, rng);
        let mask = random_tensor(rng, n * draws, d, |g| if g.bernoulli(0.6) { 1.0 } else { 0.0 });
        let noise = normal(n * draws, latent, rng);
        let inputs = vec![
            normal(d, latent, rng),
            normal(1, latent, rng),
            normal(d, latent, rng),
            normal(latent, d, rng),
            normal(1, d, rng),
            normal(latent, d, rng),
        ];
        relative_error(inputs, rng, move |g, p| {
            let xin = g.constant(x.clone());
            let h = g.dense(xin, p[0], p[1]).unwrap();
            let mu = g.activate(h, Activation::Tanh);
            let sp = g.matmul(xin, p[2]).unwrap();
            let sd = std_head(g, sp);
            let mu_k = g.repeat_rows(mu, draws).unwrap();
            let sd_k = g.repeat_rows(sd, draws).unwrap();
            let z = g.reparameterize(mu_k, sd_k, &noise).unwrap();
            let xm = g.dense(z, p[3], p[4]).unwrap();
            let xrep = g.constant(Tensor2D::from_array(ndarray::Array2::from_shape_fn((n * draws, d), |(i, j)| {
                x.get(i / draws, j)
            })));
            let spread = g.constant(Tensor2D::filled(n * draws, d, 0.7));
            let lx = g.gaussian_log_density(xrep, xm, spread).unwrap();
            let logits = g.matmul(z, p[5]).unwrap();
            let pm = probability_head(g, logits);
            let lm = g.bernoulli_log_density(&mask, pm).unwrap();
            let both = g.add(lx, lm).unwrap();
            let per_draw = g.sum(both, Axis::Cols);
            let w = g.reshape(per_draw, n, draws).unwrap();
            g.log_sum_exp(w, Axis::Cols).unwrap()
        })
    })
}

pub const SWEEPS: [(&str, Sweep); 9] = [
    ("dense", dense),
    ("matmul/add_bias", matmul),
    ("activations", activations),
    ("gaussian_log_density", gaussian_log_density),
    ("bernoulli_log_density", bernoulli_log_density),
    ("reparameterize", reparameterize),
    ("log_sum_exp", log_sum_exp),
    ("elementwise/reductions", elementwise_and_reductions),
    ("compositions", compositions),
];
