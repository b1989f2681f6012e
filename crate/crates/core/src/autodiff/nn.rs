//! Layer primitives: dense layers, Tanh MLP trunks and their bindings into a
//! [`Graph`].

use super::{Activation, Graph, NodeId, Tensor2D};
use crate::rng::SeededRng;
use crate::Result;

/// Lower bound on every predicted standard deviation.
pub const STD_FLOOR: f64 = 1e-3;
/// Upper bound on every predicted standard deviation.
pub const STD_CAP: f64 = 1e3;
/// Predicted probabilities are clamped to `[PROB_FLOOR, 1 - PROB_FLOOR]`.
pub const PROB_FLOOR: f64 = 1e-6;

/// Uniform in ±sqrt(6 / (fan_in + fan_out)).
pub fn glorot_uniform(fan_in: usize, fan_out: usize, rng: &mut SeededRng) -> Tensor2D {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let data = (0..fan_in * fan_out)
        .map(|_| (2.0 * rng.uniform() - 1.0) * limit)
        .collect();
    Tensor2D::from_vec(fan_in, fan_out, data).expect("finite init")
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub weights: Tensor2D,
    pub bias: Tensor2D,
}

#[derive(Clone, Copy, Debug)]
pub struct BoundDense {
    pub weights: NodeId,
    pub bias: NodeId,
}

impl Dense {
    pub fn new(fan_in: usize, fan_out: usize, rng: &mut SeededRng) -> Self {
        Self { weights: glorot_uniform(fan_in, fan_out, rng), bias: Tensor2D::zeros(1, fan_out) }
    }

    pub fn inputs(&self) -> usize {
        self.weights.rows()
    }

    pub fn outputs(&self) -> usize {
        self.weights.cols()
    }

    pub fn bind(&self, g: &mut Graph) -> BoundDense {
        BoundDense { weights: g.param(self.weights.clone()), bias: g.param(self.bias.clone()) }
    }

    pub fn tensors(&self) -> Vec<&Tensor2D> {
        vec![&self.weights, &self.bias]
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor2D> {
        vec![&mut self.weights, &mut self.bias]
    }
}

impl BoundDense {
    pub fn forward(&self, g: &mut Graph, input: NodeId) -> Result<NodeId> {
        g.dense(input, self.weights, self.bias)
    }

    pub fn ids(&self) -> Vec<NodeId> {
        vec![self.weights, self.bias]
    }
}

/// Stack of dense layers, each followed by Tanh.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

#[derive(Clone, Debug)]
pub struct BoundMlp {
    pub layers: Vec<BoundDense>,
}

impl Mlp {
    pub fn new(input: usize, hidden: &[usize], rng: &mut SeededRng) -> Self {
        let mut fan_in = input;
        let layers = hidden
            .iter()
            .map(|&h| {
                let layer = Dense::new(fan_in, h, rng);
                fan_in = h;
                layer
            })
            .collect();
        Self { layers }
    }

    /// Width of the last hidden layer, or `input` for an empty trunk.
    pub fn output_width(&self, input: usize) -> usize {
        self.layers.last().map_or(input, Dense::outputs)
    }

    pub fn bind(&self, g: &mut Graph) -> BoundMlp {
        BoundMlp { layers: self.layers.iter().map(|l| l.bind(g)).collect() }
    }

    pub fn tensors(&self) -> Vec<&Tensor2D> {
        self.layers.iter().flat_map(Dense::tensors).collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor2D> {
        self.layers.iter_mut().flat_map(Dense::tensors_mut).collect()
    }
}

impl BoundMlp {
    pub fn forward(&self, g: &mut Graph, input: NodeId) -> Result<NodeId> {
        let mut h = input;
        for layer in &self.layers {
            let a = layer.forward(g, h)?;
            h = g.activate(a, Activation::Tanh);
        }
        Ok(h)
    }

    pub fn ids(&self) -> Vec<NodeId> {
        self.layers.iter().flat_map(BoundDense::ids).collect()
    }
}

/// Softplus followed by the `[STD_FLOOR, STD_CAP]` clamp.
pub fn std_head(g: &mut Graph, pre: NodeId) -> NodeId {
    let s = g.activate(pre, Activation::Softplus);
    g.clamp(s, STD_FLOOR, STD_CAP)
}

/// Sigmoid followed by the probability floor clamp.
pub fn probability_head(g: &mut Graph, logits: NodeId) -> NodeId {
    let p = g.activate(logits, Activation::Sigmoid);
    g.clamp(p, PROB_FLOOR, 1.0 - PROB_FLOOR)
}
