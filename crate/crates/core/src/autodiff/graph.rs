use ndarray::linalg::general_mat_mul;
use ndarray::{Array2, Axis as NdAxis, Zip};

use super::{fastmath, Tensor2D, LN_2PI};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Sigmoid,
    Softplus,
}

/// Reduction direction.
///
/// `Rows` reduces across rows (an `r x c` input gives `1 x c`); `Cols`
/// reduces across columns (giving `r x 1`).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    Rows,
    Cols,
}

/// Provenance of a node: the operation that produced it and its inputs.
#[derive(Clone, Debug)]
pub enum Op {
    Leaf,
    MatMul(NodeId, NodeId),
    /// `input · weights + bias`.
    Dense { input: NodeId, weights: NodeId, bias: NodeId },
    /// `input + bias` with a `1 x c` bias broadcast over rows.
    AddBias(NodeId, NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Affine { input: NodeId, scale: f64, shift: f64 },
    Activate(NodeId, Activation),
    Exp(NodeId),
    Log(NodeId),
    Clamp { input: NodeId, lo: f64, hi: f64 },
    GaussianLogDensity { x: NodeId, mean: NodeId, std: NodeId },
    BernoulliLogDensity { mask: Tensor2D, p: NodeId },
    Reparameterize { mean: NodeId, std: NodeId, noise: Tensor2D },
    LogSumExp(NodeId, Axis),
    Sum(NodeId, Axis),
    SumAll(NodeId),
    /// Each row repeated `times` times consecutively.
    RepeatRows(NodeId, usize),
    /// The whole block stacked `times` times.
    TileRows(NodeId, usize),
    /// Consecutive groups of `group` rows summed into one.
    SumRowGroups(NodeId, usize),
    Reshape(NodeId),
}

#[derive(Clone, Debug)]
pub struct Node {
    pub value: Tensor2D,
    pub grad: Option<Tensor2D>,
    pub op: Op,
    pub requires_grad: bool,
}

/// Tape of recorded operations.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

fn check_same(op: &'static str, a: &Tensor2D, b: &Tensor2D) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::dim(op, format!("shapes {:?} and {:?}", a.shape(), b.shape())));
    }
    Ok(())
}

fn stable_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn stable_softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn repeat_rows(a: &Array2<f64>, times: usize) -> Array2<f64> {
    let (r, c) = a.dim();
    let mut out = Array2::zeros((r * times, c));
    for (i, row) in a.outer_iter().enumerate() {
        for t in 0..times {
            out.row_mut(i * times + t).assign(&row);
        }
    }
    out
}

fn tile_rows(a: &Array2<f64>, times: usize) -> Array2<f64> {
    let (r, c) = a.dim();
    let mut out = Array2::zeros((r * times, c));
    for t in 0..times {
        out.slice_mut(ndarray::s![t * r..(t + 1) * r, ..]).assign(a);
    }
    out
}

fn sum_row_groups(a: &Array2<f64>, group: usize) -> Array2<f64> {
    let (r, c) = a.dim();
    let mut out = Array2::zeros((r / group, c));
    for (i, row) in a.outer_iter().enumerate() {
        let mut dst = out.row_mut(i / group);
        dst += &row;
    }
    out
}

fn column_sums(a: &Array2<f64>) -> Array2<f64> {
    let mut out = Array2::zeros((1, a.ncols()));
    {
        let acc = out.as_slice_mut().unwrap();
        for row in a.outer_iter() {
            for (o, v) in acc.iter_mut().zip(row.iter()) {
                *o += v;
            }
        }
    }
    out
}

fn untile_rows(a: &Array2<f64>, times: usize) -> Array2<f64> {
    let r = a.nrows() / times;
    let mut out = Array2::zeros((r, a.ncols()));
    for t in 0..times {
        out += &a.slice(ndarray::s![t * r..(t + 1) * r, ..]);
    }
    out
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.0]
    }

    pub fn value(&self, id: NodeId) -> &Tensor2D {
        &self.nodes[id.0].value
    }

    /// Gradient of the last [`Graph::backward`] output w.r.t. `id`, if any
    /// flowed to it.
    pub fn grad(&self, id: NodeId) -> Option<&Tensor2D> {
        self.nodes[id.0].grad.as_ref()
    }

    fn arr(&self, id: NodeId) -> &Array2<f64> {
        self.nodes[id.0].value.array()
    }

    fn push(&mut self, value: Array2<f64>, op: Op, inputs: &[NodeId]) -> NodeId {
        let requires_grad = inputs.iter().any(|i| self.nodes[i.0].requires_grad);
        self.nodes.push(Node {
            value: Tensor2D::from_array(value),
            grad: None,
            op,
            requires_grad,
        });
        NodeId(self.nodes.len() - 1)
    }

    /// Input that receives no gradient.
    pub fn constant(&mut self, value: Tensor2D) -> NodeId {
        self.nodes.push(Node { value, grad: None, op: Op::Leaf, requires_grad: false });
        NodeId(self.nodes.len() - 1)
    }

    /// Differentiable leaf.
    pub fn param(&mut self, value: Tensor2D) -> NodeId {
        self.nodes.push(Node { value, grad: None, op: Op::Leaf, requires_grad: true });
        NodeId(self.nodes.len() - 1)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.cols() != vb.rows() {
            return Err(Error::dim(
                "matmul",
                format!("{:?} x {:?}", va.shape(), vb.shape()),
            ));
        }
        let out = va.array().dot(vb.array());
        Ok(self.push(out, Op::MatMul(a, b), &[a, b]))
    }

    pub fn add_bias(&mut self, a: NodeId, bias: NodeId) -> Result<NodeId> {
        let (va, vb) = (self.value(a), self.value(bias));
        if vb.rows() != 1 || vb.cols() != va.cols() {
            return Err(Error::dim(
                "add_bias",
                format!("bias {:?} for input {:?}", vb.shape(), va.shape()),
            ));
        }
        let out = va.array() + vb.array();
        Ok(self.push(out, Op::AddBias(a, bias), &[a, bias]))
    }

    /// Affine map `input · weights + bias`.
    pub fn dense(&mut self, input: NodeId, weights: NodeId, bias: NodeId) -> Result<NodeId> {
        let (x, w, b) = (self.value(input), self.value(weights), self.value(bias));
        if x.cols() != w.rows() || b.rows() != 1 || b.cols() != w.cols() {
            return Err(Error::dim(
                "dense",
                format!("input {:?}, weights {:?}, bias {:?}", x.shape(), w.shape(), b.shape()),
            ));
        }
        let mut out = b.array().broadcast((x.rows(), w.cols())).unwrap().to_owned();
        general_mat_mul(1.0, x.array(), w.array(), 1.0, &mut out);
        Ok(self.push(out, Op::Dense { input, weights, bias }, &[input, weights, bias]))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        check_same("add", self.value(a), self.value(b))?;
        let out = self.arr(a) + self.arr(b);
        Ok(self.push(out, Op::Add(a, b), &[a, b]))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        check_same("sub", self.value(a), self.value(b))?;
        let out = self.arr(a) - self.arr(b);
        Ok(self.push(out, Op::Sub(a, b), &[a, b]))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        check_same("mul", self.value(a), self.value(b))?;
        let out = self.arr(a) * self.arr(b);
        Ok(self.push(out, Op::Mul(a, b), &[a, b]))
    }

    /// `scale * input + shift`.
    pub fn affine(&mut self, input: NodeId, scale: f64, shift: f64) -> NodeId {
        let out = self.arr(input).mapv(|v| scale * v + shift);
        self.push(out, Op::Affine { input, scale, shift }, &[input])
    }

    pub fn scale(&mut self, input: NodeId, scale: f64) -> NodeId {
        self.affine(input, scale, 0.0)
    }

    pub fn activate(&mut self, input: NodeId, kind: Activation) -> NodeId {
        let x = self.arr(input);
        let out = match kind {
            Activation::Tanh => {
                let mut out = x.to_owned();
                fastmath::tanh_in_place(out.as_slice_mut().expect("standard layout"));
                out
            }
            Activation::Sigmoid => x.mapv(stable_sigmoid),
            Activation::Softplus => x.mapv(stable_softplus),
        };
        self.push(out, Op::Activate(input, kind), &[input])
    }

    pub fn exp(&mut self, input: NodeId) -> NodeId {
        let out = self.arr(input).mapv(f64::exp);
        self.push(out, Op::Exp(input), &[input])
    }

    pub fn log(&mut self, input: NodeId) -> Result<NodeId> {
        if let Some(v) = self.arr(input).iter().find(|v| **v <= 0.0) {
            return Err(Error::domain("log", format!("non-positive input {v}")));
        }
        let out = self.arr(input).mapv(f64::ln);
        Ok(self.push(out, Op::Log(input), &[input]))
    }

    /// Elementwise clamp to `[lo, hi]`; gradient passes only inside the range.
    pub fn clamp(&mut self, input: NodeId, lo: f64, hi: f64) -> NodeId {
        let out = self.arr(input).mapv(|v| v.clamp(lo, hi));
        self.push(out, Op::Clamp { input, lo, hi }, &[input])
    }

    /// Elementwise `log N(x; mean, std^2)`.
    pub fn gaussian_log_density(&mut self, x: NodeId, mean: NodeId, std: NodeId) -> Result<NodeId> {
        check_same("gaussian_log_density", self.value(x), self.value(mean))?;
        check_same("gaussian_log_density", self.value(x), self.value(std))?;
        if let Some(s) = self.arr(std).iter().find(|s| !(**s > 0.0)) {
            return Err(Error::domain("gaussian_log_density", format!("std {s} is not positive")));
        }
        let out = Zip::from(self.arr(x))
            .and(self.arr(mean))
            .and(self.arr(std))
            .map_collect(|&x, &m, &s| {
                let r = (x - m) / s;
                -0.5 * LN_2PI - s.ln() - 0.5 * r * r
            });
        Ok(self.push(out, Op::GaussianLogDensity { x, mean, std }, &[x, mean, std]))
    }

    /// Elementwise `m ln p + (1 - m) ln(1 - p)` for a fixed binary `mask`.
    pub fn bernoulli_log_density(&mut self, mask: &Tensor2D, p: NodeId) -> Result<NodeId> {
        check_same("bernoulli_log_density", mask, self.value(p))?;
        if let Some(v) = mask.as_slice().iter().find(|v| **v != 0.0 && **v != 1.0) {
            return Err(Error::domain("bernoulli_log_density", format!("mask entry {v}")));
        }
        if let Some(v) = self.arr(p).iter().find(|v| !(**v > 0.0 && **v < 1.0)) {
            return Err(Error::domain(
                "bernoulli_log_density",
                format!("probability {v} outside (0, 1)"),
            ));
        }
        let out = Zip::from(mask.array())
            .and(self.arr(p))
            .map_collect(|&m, &p| if m == 1.0 { p.ln() } else { (1.0 - p).ln() });
        Ok(self.push(out, Op::BernoulliLogDensity { mask: mask.clone(), p }, &[p]))
    }

    /// `mean + std ⊙ noise`; the noise is an input, never differentiated.
    pub fn reparameterize(&mut self, mean: NodeId, std: NodeId, noise: &Tensor2D) -> Result<NodeId> {
        check_same("reparameterize", self.value(mean), self.value(std))?;
        check_same("reparameterize", self.value(mean), noise)?;
        let out = Zip::from(self.arr(mean))
            .and(self.arr(std))
            .and(noise.array())
            .map_collect(|&m, &s, &e| m + s * e);
        Ok(self.push(out, Op::Reparameterize { mean, std, noise: noise.clone() }, &[mean, std]))
    }

    /// `log Σ exp(v)` along `axis`, shifted by the maximum.
    pub fn log_sum_exp(&mut self, input: NodeId, axis: Axis) -> Result<NodeId> {
        let x = self.arr(input);
        let nd_axis = match axis {
            Axis::Rows => NdAxis(0),
            Axis::Cols => NdAxis(1),
        };
        if x.len_of(nd_axis) == 0 {
            return Err(Error::dim("log_sum_exp", "empty reduction axis"));
        }
        let reduced = x.map_axis(nd_axis, |lane| {
            let max = lane.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            max + lane.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
        });
        let out = match axis {
            Axis::Rows => reduced.insert_axis(NdAxis(0)),
            Axis::Cols => reduced.insert_axis(NdAxis(1)),
        };
        Ok(self.push(out, Op::LogSumExp(input, axis), &[input]))
    }

    pub fn sum(&mut self, input: NodeId, axis: Axis) -> NodeId {
        let x = self.arr(input);
        let out = match axis {
            Axis::Rows => x.sum_axis(NdAxis(0)).insert_axis(NdAxis(0)),
            Axis::Cols => x.sum_axis(NdAxis(1)).insert_axis(NdAxis(1)),
        };
        self.push(out, Op::Sum(input, axis), &[input])
    }

    pub fn sum_all(&mut self, input: NodeId) -> NodeId {
        let out = Array2::from_elem((1, 1), self.arr(input).sum());
        self.push(out, Op::SumAll(input), &[input])
    }

    pub fn mean_all(&mut self, input: NodeId) -> NodeId {
        let n = self.value(input).len().max(1) as f64;
        let s = self.sum_all(input);
        self.scale(s, 1.0 / n)
    }

    pub fn repeat_rows(&mut self, input: NodeId, times: usize) -> Result<NodeId> {
        if times == 0 {
            return Err(Error::dim("repeat_rows", "zero repetitions"));
        }
        let out = repeat_rows(self.arr(input), times);
        Ok(self.push(out, Op::RepeatRows(input, times), &[input]))
    }

    pub fn tile_rows(&mut self, input: NodeId, times: usize) -> Result<NodeId> {
        if times == 0 {
            return Err(Error::dim("tile_rows", "zero repetitions"));
        }
        let out = tile_rows(self.arr(input), times);
        Ok(self.push(out, Op::TileRows(input, times), &[input]))
    }

    pub fn sum_row_groups(&mut self, input: NodeId, group: usize) -> Result<NodeId> {
        let r = self.value(input).rows();
        if group == 0 || r % group != 0 {
            return Err(Error::dim("sum_row_groups", format!("{r} rows in groups of {group}")));
        }
        let out = sum_row_groups(self.arr(input), group);
        Ok(self.push(out, Op::SumRowGroups(input, group), &[input]))
    }

    /// Row-major reshape.
    pub fn reshape(&mut self, input: NodeId, rows: usize, cols: usize) -> Result<NodeId> {
        let x = self.value(input);
        if x.len() != rows * cols {
            return Err(Error::dim(
                "reshape",
                format!("{:?} into {rows}x{cols}", x.shape()),
            ));
        }
        let out = Array2::from_shape_vec((rows, cols), x.as_slice().to_vec()).unwrap();
        Ok(self.push(out, Op::Reshape(input), &[input]))
    }

    /// Reverse sweep from `output`, seeded with ones (the gradient of the sum
    /// of its entries). Clears gradients from any previous sweep.
    pub fn backward(&mut self, output: NodeId) -> Result<()> {
        if !self.value(output).is_finite() {
            return Err(Error::Numeric {
                component: "backward seed".into(),
                context: format!("at node {}", output.0),
            });
        }
        let mut grads: Vec<Option<Array2<f64>>> = vec![None; output.0 + 1];
        grads[output.0] = Some(Array2::ones(self.value(output).shape()));

        for idx in (0..=output.0).rev() {
            if !self.nodes[idx].requires_grad || matches!(self.nodes[idx].op, Op::Leaf) {
                continue;
            }
            let Some(go) = grads[idx].take() else { continue };
            self.propagate(idx, go, &mut grads);
        }

        for (node, g) in self.nodes.iter_mut().zip(grads.into_iter().chain(std::iter::repeat(None))) {
            node.grad = if node.requires_grad { g.map(Tensor2D::from_array) } else { None };
        }
        Ok(())
    }

    fn propagate(&self, idx: usize, owned: Array2<f64>, grads: &mut [Option<Array2<f64>>]) {
        let go = &owned;
        let node = &self.nodes[idx];
        let y = node.value.array();
        let mut send = |id: NodeId, g: Array2<f64>| {
            if !self.nodes[id.0].requires_grad {
                return;
            }
            match &mut grads[id.0] {
                Some(acc) => *acc += &g,
                slot @ None => *slot = Some(g),
            }
        };
        let needs = |id: NodeId| self.nodes[id.0].requires_grad;

        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if needs(*a) {
                    send(*a, go.dot(&self.arr(*b).t()));
                }
                if needs(*b) {
                    send(*b, self.arr(*a).t().dot(go));
                }
            }
            Op::Dense { input, weights, bias } => {
                if needs(*bias) {
                    send(*bias, column_sums(go));
                }
                if needs(*weights) {
                    send(*weights, self.arr(*input).t().dot(go));
                }
                if needs(*input) {
                    send(*input, go.dot(&self.arr(*weights).t()));
                }
            }
            Op::AddBias(a, b) => {
                if needs(*b) {
                    send(*b, column_sums(go));
                }
                send(*a, owned);
            }
            Op::Add(a, b) => {
                send(*b, go.clone());
                send(*a, owned);
            }
            Op::Sub(a, b) => {
                if needs(*b) {
                    send(*b, -go);
                }
                send(*a, owned);
            }
            Op::Mul(a, b) => {
                if needs(*a) {
                    send(*a, go * self.arr(*b));
                }
                if needs(*b) {
                    send(*b, go * self.arr(*a));
                }
            }
            Op::Affine { input, scale, .. } => send(*input, go * *scale),
            Op::Activate(input, kind) => {
                let g = match kind {
                    Activation::Tanh => Zip::from(go).and(y).map_collect(|&g, &y| g * (1.0 - y * y)),
                    Activation::Sigmoid => {
                        Zip::from(go).and(y).map_collect(|&g, &y| g * y * (1.0 - y))
                    }
                    Activation::Softplus => Zip::from(go)
                        .and(self.arr(*input))
                        .map_collect(|&g, &x| g * stable_sigmoid(x)),
                };
                send(*input, g);
            }
            Op::Exp(input) => send(*input, go * y),
            Op::Log(input) => send(*input, go / self.arr(*input)),
            Op::Clamp { input, lo, hi } => {
                let g = Zip::from(go).and(self.arr(*input)).map_collect(|&g, &x| {
                    if x >= *lo && x <= *hi {
                        g
                    } else {
                        0.0
                    }
                });
                send(*input, g);
            }
            Op::GaussianLogDensity { x, mean, std } => {
                let (xv, mv, sv) = (self.arr(*x), self.arr(*mean), self.arr(*std));
                // d/dx = -(x - m)/s^2, d/dm = (x - m)/s^2
                let dm = Zip::from(go).and(xv).and(mv).and(sv).map_collect(|&g, &x, &m, &s| {
                    g * (x - m) / (s * s)
                });
                if needs(*std) {
                    let ds = Zip::from(go).and(xv).and(mv).and(sv).map_collect(|&g, &x, &m, &s| {
                        let r = (x - m) / s;
                        g * (r * r - 1.0) / s
                    });
                    send(*std, ds);
                }
                if needs(*x) {
                    send(*x, -&dm);
                }
                send(*mean, dm);
            }
            Op::BernoulliLogDensity { mask, p } => {
                let g = Zip::from(go).and(mask.array()).and(self.arr(*p)).map_collect(
                    |&g, &m, &p| if m == 1.0 { g / p } else { -g / (1.0 - p) },
                );
                send(*p, g);
            }
            Op::Reparameterize { mean, std, noise } => {
                if needs(*std) {
                    send(*std, go * noise.array());
                }
                send(*mean, owned);
            }
            Op::LogSumExp(input, axis) => {
                let x = self.arr(*input);
                let g = match axis {
                    Axis::Cols => Zip::from(x.rows()).and(go.rows()).and(y.rows()).fold(
                        Vec::with_capacity(x.len()),
                        |mut acc, xr, gr, yr| {
                            acc.extend(xr.iter().map(|v| gr[0] * (v - yr[0]).exp()));
                            acc
                        },
                    ),
                    Axis::Rows => {
                        let mut out = Vec::with_capacity(x.len());
                        for xr in x.rows() {
                            out.extend(
                                xr.iter().zip(go.row(0)).zip(y.row(0)).map(|((v, g), m)| g * (v - m).exp()),
                            );
                        }
                        out
                    }
                };
                send(*input, Array2::from_shape_vec(x.dim(), g).unwrap());
            }
            Op::Sum(input, axis) => {
                // both reductions keep a unit axis, so the gradient broadcasts back
                let _ = axis;
                let dim = self.arr(*input).dim();
                send(*input, go.broadcast(dim).unwrap().to_owned());
            }
            Op::SumAll(input) => {
                send(*input, Array2::from_elem(self.arr(*input).dim(), go[[0, 0]]));
            }
            Op::RepeatRows(input, times) => send(*input, sum_row_groups(go, *times)),
            Op::TileRows(input, times) => send(*input, untile_rows(go, *times)),
            Op::SumRowGroups(input, group) => send(*input, repeat_rows(go, *group)),
            Op::Reshape(input) => {
                let dim = self.arr(*input).dim();
                let data = go.as_standard_layout().iter().copied().collect();
                send(*input, Array2::from_shape_vec(dim, data).unwrap());
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(g: &mut Graph, v: f64) -> NodeId {
        g.constant(Tensor2D::filled(1, 1, v))
    }

    #[test]
    fn dense_identity_and_bias() {
        let mut g = Graph::new();
        let x = g.constant(Tensor2D::from_rows(&[&[1.0, 2.0]]));
        let w = g.constant(Tensor2D::from_rows(&[&[1.0, 0.0], &[0.0, 1.0]]));
        let b = g.constant(Tensor2D::zeros(1, 2));
        let y = g.dense(x, w, b).unwrap();
        assert_eq!(g.value(y).as_slice(), &[1.0, 2.0]);

        let x0 = g.constant(Tensor2D::zeros(1, 2));
        let w2 = g.constant(Tensor2D::from_rows(&[&[5.0, -1.0], &[2.0, 7.0]]));
        let b2 = g.constant(Tensor2D::from_rows(&[&[3.0, 4.0]]));
        let y = g.dense(x0, w2, b2).unwrap();
        assert_eq!(g.value(y).as_slice(), &[3.0, 4.0]);
    }

    #[test]
    fn dense_shape_errors() {
        let mut g = Graph::new();
        let x = g.constant(Tensor2D::zeros(1, 3));
        let w = g.constant(Tensor2D::zeros(2, 2));
        let b = g.constant(Tensor2D::zeros(1, 2));
        assert!(matches!(g.dense(x, w, b), Err(Error::Dimension { .. })));
        let w = g.constant(Tensor2D::zeros(3, 2));
        let b = g.constant(Tensor2D::zeros(1, 5));
        assert!(matches!(g.dense(x, w, b), Err(Error::Dimension { .. })));
    }

    #[test]
    fn activations_at_zero() {
        let mut g = Graph::new();
        let z = scalar(&mut g, 0.0);
        let t = g.activate(z, Activation::Tanh);
        let s = g.activate(z, Activation::Sigmoid);
        let p = g.activate(z, Activation::Softplus);
        assert_eq!(g.value(t).get(0, 0), 0.0);
        assert_eq!(g.value(s).get(0, 0), 0.5);
        assert!((g.value(p).get(0, 0) - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn gaussian_closed_forms() {
        let mut g = Graph::new();
        let x = scalar(&mut g, 0.0);
        let m = scalar(&mut g, 0.0);
        let s = scalar(&mut g, 1.0);
        let y = g.gaussian_log_density(x, m, s).unwrap();
        assert!((g.value(y).get(0, 0) + 0.918_938_533_204_672_7).abs() < 1e-12);

        let x = scalar(&mut g, 2.5);
        let s = scalar(&mut g, 0.4);
        let y = g.gaussian_log_density(x, x, s).unwrap();
        assert!((g.value(y).get(0, 0) - (-(0.4f64).ln() - 0.5 * LN_2PI)).abs() < 1e-12);

        let bad = scalar(&mut g, 0.0);
        assert!(matches!(g.gaussian_log_density(x, x, bad), Err(Error::Domain { .. })));
    }

    #[test]
    fn bernoulli_closed_forms() {
        let mut g = Graph::new();
        let p = scalar(&mut g, 0.5);
        let one = Tensor2D::filled(1, 1, 1.0);
        let zero = Tensor2D::filled(1, 1, 0.0);
        let a = g.bernoulli_log_density(&one, p).unwrap();
        let b = g.bernoulli_log_density(&zero, p).unwrap();
        assert!((g.value(a).get(0, 0) - 0.5f64.ln()).abs() < 1e-15);
        assert!((g.value(b).get(0, 0) - 0.5f64.ln()).abs() < 1e-15);
        let edge = scalar(&mut g, 1.0);
        assert!(matches!(g.bernoulli_log_density(&one, edge), Err(Error::Domain { .. })));
    }

    #[test]
    fn log_sum_exp_cases() {
        let mut g = Graph::new();
        let v = g.constant(Tensor2D::from_rows(&[&[0.0, 0.0]]));
        let y = g.log_sum_exp(v, Axis::Cols).unwrap();
        assert!((g.value(y).get(0, 0) - std::f64::consts::LN_2).abs() < 1e-15);

        let a = scalar(&mut g, -3.25);
        let y = g.log_sum_exp(a, Axis::Cols).unwrap();
        assert_eq!(g.value(y).get(0, 0), -3.25);

        let big = g.constant(Tensor2D::from_rows(&[&[1000.0, 1000.0]]));
        let y = g.log_sum_exp(big, Axis::Cols).unwrap();
        assert!((g.value(y).get(0, 0) - (1000.0 + std::f64::consts::LN_2)).abs() < 1e-12);

        let empty = g.constant(Tensor2D::zeros(2, 0));
        assert!(matches!(g.log_sum_exp(empty, Axis::Cols), Err(Error::Dimension { .. })));
    }

    #[test]
    fn constants_receive_no_gradient() {
        let mut g = Graph::new();
        let c = g.constant(Tensor2D::filled(2, 2, 1.0));
        let p = g.param(Tensor2D::filled(2, 2, 3.0));
        let y = g.mul(c, p).unwrap();
        let s = g.sum_all(y);
        g.backward(s).unwrap();
        assert!(g.grad(c).is_none());
        assert_eq!(g.grad(p).unwrap().as_slice(), &[1.0; 4]);
    }

    #[test]
    fn shared_input_gradients_accumulate() {
        let mut g = Graph::new();
        let p = g.param(Tensor2D::filled(1, 1, 3.0));
        let y = g.mul(p, p).unwrap();
        g.backward(y).unwrap();
        assert_eq!(g.grad(p).unwrap().get(0, 0), 6.0);
    }
}
