//! Minimal reverse-mode automatic differentiation over dense 2-D tensors.
//!
//! A [`Graph`] records every operation as a [`Node`] holding its value and
//! the ids of its inputs. Nodes are only ever appended, so insertion order is
//! a topological order and [`Graph::backward`] is a single reverse sweep.

mod adam;
mod fastmath;
mod graph;
mod nn;
mod tensor;

pub use adam::AdamState;
pub use graph::{Activation, Axis, Graph, Node, NodeId, Op};
pub use nn::{
    glorot_uniform, probability_head, std_head, BoundDense, BoundMlp, Dense, Mlp, PROB_FLOOR, STD_CAP,
    STD_FLOOR,
};
pub use tensor::Tensor2D;

/// ln(2π)
pub const LN_2PI: f64 = 1.837_877_066_409_345_5;
