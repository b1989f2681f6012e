//! Masks, incomplete matrices and the observed/missing composition algebra.
//!
//! Mask convention: `true` (1) means observed, `false` (0) means missing.
//! Values at missing positions of an [`IncompleteMatrix`] are unspecified and
//! never read; every operation here consults the mask first.

use crate::autodiff::Tensor2D;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mask {
    rows: usize,
    cols: usize,
    bits: Vec<bool>,
}

impl Mask {
    pub fn new(rows: usize, cols: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != rows * cols {
            return Err(Error::dim("mask", format!("{} bits for {rows}x{cols}", bits.len())));
        }
        Ok(Self { rows, cols, bits })
    }

    pub fn all_observed(rows: usize, cols: usize) -> Self {
        Self { rows, cols, bits: vec![true; rows * cols] }
    }

    pub fn all_missing(rows: usize, cols: usize) -> Self {
        Self { rows, cols, bits: vec![false; rows * cols] }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                bits.push(f(i, j));
            }
        }
        Self { rows, cols, bits }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_observed(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, observed: bool) {
        self.bits[row * self.cols + col] = observed;
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn row(&self, row: usize) -> &[bool] {
        &self.bits[row * self.cols..(row + 1) * self.cols]
    }

    pub fn complement(&self) -> Self {
        Self { rows: self.rows, cols: self.cols, bits: self.bits.iter().map(|b| !b).collect() }
    }

    /// Entry-wise AND: observed only where both masks observe.
    pub fn intersect(&self, other: &Mask) -> Result<Self> {
        if self.shape() != other.shape() {
            return Err(Error::dim("mask intersect", format!("{:?} vs {:?}", self.shape(), other.shape())));
        }
        let bits = self.bits.iter().zip(&other.bits).map(|(a, b)| *a && *b).collect();
        Ok(Self { rows: self.rows, cols: self.cols, bits })
    }

    pub fn count_missing(&self) -> usize {
        self.bits.iter().filter(|b| !**b).count()
    }

    pub fn missing_fraction(&self) -> f64 {
        if self.bits.is_empty() {
            return 0.0;
        }
        self.count_missing() as f64 / self.bits.len() as f64
    }

    /// Features with at least one missing entry.
    pub fn features_with_missing(&self) -> Vec<usize> {
        (0..self.cols)
            .filter(|&j| (0..self.rows).any(|i| !self.is_observed(i, j)))
            .collect()
    }

    /// The mask as a 0/1 tensor.
    pub fn to_tensor(&self) -> Tensor2D {
        let data = self.bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        Tensor2D::from_vec(self.rows, self.cols, data).expect("shape")
    }

    /// Rows `indices` in order.
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let mut bits = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            bits.extend_from_slice(self.row(i));
        }
        Self { rows: indices.len(), cols: self.cols, bits }
    }
}

/// Fully populated data matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CompleteMatrix {
    values: Tensor2D,
}

impl CompleteMatrix {
    pub fn new(values: Tensor2D) -> Result<Self> {
        if !values.is_finite() {
            return Err(Error::domain("complete matrix", "non-finite entry"));
        }
        Ok(Self { values })
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Self::new(Tensor2D::from_vec(rows, cols, data)?)
    }

    pub fn rows(&self) -> usize {
        self.values.rows()
    }

    pub fn cols(&self) -> usize {
        self.values.cols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.values.shape()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values.get(row, col)
    }

    pub fn row(&self, row: usize) -> &[f64] {
        self.values.row(row)
    }

    pub fn values(&self) -> &Tensor2D {
        &self.values
    }

    pub fn into_values(self) -> Tensor2D {
        self.values
    }

    pub fn column_means(&self) -> Vec<f64> {
        let n = self.rows() as f64;
        (0..self.cols())
            .map(|j| (0..self.rows()).map(|i| self.get(i, j)).sum::<f64>() / n)
            .collect()
    }
}

/// Data matrix paired with its mask. Entries where the mask is 0 are
/// placeholders and carry no information.
#[derive(Clone, Debug)]
pub struct IncompleteMatrix {
    values: Tensor2D,
    mask: Mask,
}

impl PartialEq for IncompleteMatrix {
    /// Equal when masks agree and observed entries agree.
    fn eq(&self, other: &Self) -> bool {
        self.mask == other.mask
            && self
                .observed_entries()
                .zip(other.observed_entries())
                .all(|(a, b)| a.2.to_bits() == b.2.to_bits())
    }
}

impl IncompleteMatrix {
    /// Pairs `values` with `mask`. Placeholder positions are overwritten with
    /// zero so no stray non-finite value survives in memory.
    pub fn new(mut values: Tensor2D, mask: Mask) -> Result<Self> {
        if values.shape() != mask.shape() {
            return Err(Error::dim(
                "incomplete matrix",
                format!("values {:?}, mask {:?}", values.shape(), mask.shape()),
            ));
        }
        for (v, &obs) in values.as_mut_slice().iter_mut().zip(mask.bits()) {
            if !obs {
                *v = 0.0;
            } else if !v.is_finite() {
                return Err(Error::domain("incomplete matrix", "non-finite observed entry"));
            }
        }
        Ok(Self { values, mask })
    }

    /// Builds from optional cells; `None` is missing.
    pub fn from_options(rows: usize, cols: usize, cells: &[Option<f64>]) -> Result<Self> {
        if cells.len() != rows * cols {
            return Err(Error::dim("incomplete matrix", format!("{} cells for {rows}x{cols}", cells.len())));
        }
        let values = cells.iter().map(|c| c.unwrap_or(0.0)).collect();
        let bits = cells.iter().map(Option::is_some).collect();
        Self::new(Tensor2D::from_vec(rows, cols, values)?, Mask::new(rows, cols, bits)?)
    }

    pub fn rows(&self) -> usize {
        self.mask.rows()
    }

    pub fn cols(&self) -> usize {
        self.mask.cols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.mask.shape()
    }

    pub fn mask(&self) -> &Mask {
        &self.mask
    }

    /// Observed value, or `None` at a missing position.
    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        self.mask.is_observed(row, col).then(|| self.values.get(row, col))
    }

    /// `(row, col, value)` for every observed entry in row-major order.
    pub fn observed_entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let cols = self.cols();
        self.values
            .as_slice()
            .iter()
            .zip(self.mask.bits())
            .enumerate()
            .filter(|(_, (_, &obs))| obs)
            .map(move |(k, (&v, _))| (k / cols, k % cols, v))
    }

    pub fn observed_in_column(&self, col: usize) -> Vec<f64> {
        (0..self.rows()).filter_map(|i| self.get(i, col)).collect()
    }

    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let cols = self.cols();
        let mut data = Vec::with_capacity(indices.len() * cols);
        for &i in indices {
            data.extend_from_slice(self.values.row(i));
        }
        Self {
            values: Tensor2D::from_vec(indices.len(), cols, data).expect("shape"),
            mask: self.mask.select_rows(indices),
        }
    }

    /// Observed entries of `self` plus missing entries of `other`: the
    /// reverse of [`compose_observed`]/[`compose_missing`].
    pub fn recombine(&self, other: &IncompleteMatrix) -> Result<CompleteMatrix> {
        recombine(self, other)
    }
}

/// Keeps the entries of `x` where `m` observes.
pub fn compose_observed(x: &CompleteMatrix, m: &Mask) -> Result<IncompleteMatrix> {
    if x.shape() != m.shape() {
        return Err(Error::dim("compose_observed", format!("{:?} vs {:?}", x.shape(), m.shape())));
    }
    IncompleteMatrix::new(x.values().clone(), m.clone())
}

/// Keeps the entries of `x` where `m` is missing (the complement).
pub fn compose_missing(x: &CompleteMatrix, m: &Mask) -> Result<IncompleteMatrix> {
    if x.shape() != m.shape() {
        return Err(Error::dim("compose_missing", format!("{:?} vs {:?}", x.shape(), m.shape())));
    }
    IncompleteMatrix::new(x.values().clone(), m.complement())
}

/// Merges two incomplete matrices whose masks are exact complements.
pub fn recombine(x_obs: &IncompleteMatrix, x_mis: &IncompleteMatrix) -> Result<CompleteMatrix> {
    if x_obs.shape() != x_mis.shape() {
        return Err(Error::dim("recombine", format!("{:?} vs {:?}", x_obs.shape(), x_mis.shape())));
    }
    let mut out = Vec::with_capacity(x_obs.rows() * x_obs.cols());
    for (k, (&a, &b)) in x_obs.mask.bits().iter().zip(x_mis.mask.bits()).enumerate() {
        let v = match (a, b) {
            (true, false) => x_obs.values.as_slice()[k],
            (false, true) => x_mis.values.as_slice()[k],
            _ => {
                let c = x_obs.cols();
                return Err(Error::Consistency(format!(
                    "masks are not complementary at ({}, {})",
                    k / c,
                    k % c
                )));
            }
        };
        out.push(v);
    }
    CompleteMatrix::from_vec(x_obs.rows(), x_obs.cols(), out)
}

/// Observed entries copied, missing entries set to exactly zero.
pub fn zero_impute(data: &IncompleteMatrix) -> CompleteMatrix {
    // placeholders are already zeroed on construction
    CompleteMatrix { values: data.values.clone() }
}

/// Per-feature location and scale. Standard deviations use the population
/// convention (divide by n).
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl FeatureStats {
    pub fn new(mean: Vec<f64>, std: Vec<f64>) -> Result<Self> {
        if mean.len() != std.len() {
            return Err(Error::dim("feature stats", format!("{} means, {} stds", mean.len(), std.len())));
        }
        if let Some(j) = std.iter().position(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::DegenerateFeature { feature: j, detail: format!("std {}", std[j]) });
        }
        Ok(Self { mean, std })
    }

    pub fn identity(d: usize) -> Self {
        Self { mean: vec![0.0; d], std: vec![1.0; d] }
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    /// Statistics over the observed entries of each feature.
    pub fn from_observed(data: &IncompleteMatrix) -> Result<Self> {
        let mut mean = Vec::with_capacity(data.cols());
        let mut std = Vec::with_capacity(data.cols());
        for j in 0..data.cols() {
            let col = data.observed_in_column(j);
            if col.len() < 2 {
                return Err(Error::DegenerateFeature {
                    feature: j,
                    detail: format!("{} observed entries, need at least 2", col.len()),
                });
            }
            let (m, s) = population_moments(&col);
            if !(s > 0.0) {
                return Err(Error::DegenerateFeature { feature: j, detail: "constant observed values".into() });
            }
            mean.push(m);
            std.push(s);
        }
        Ok(Self { mean, std })
    }

    /// Statistics over a complete matrix (synthetic pipelines, before masking).
    pub fn from_complete(data: &CompleteMatrix) -> Result<Self> {
        let full = IncompleteMatrix::new(data.values().clone(), Mask::all_observed(data.rows(), data.cols()))?;
        Self::from_observed(&full)
    }

    fn check_width(&self, d: usize) -> Result<()> {
        if self.len() != d {
            return Err(Error::dim("feature stats", format!("{} features in stats, {d} in data", self.len())));
        }
        Ok(())
    }

    pub fn standardize_complete(&self, data: &CompleteMatrix) -> Result<CompleteMatrix> {
        self.check_width(data.cols())?;
        let mut v = data.values().clone();
        let d = data.cols();
        for (k, x) in v.as_mut_slice().iter_mut().enumerate() {
            *x = (*x - self.mean[k % d]) / self.std[k % d];
        }
        CompleteMatrix::new(v)
    }

    pub fn destandardize_complete(&self, data: &CompleteMatrix) -> Result<CompleteMatrix> {
        self.check_width(data.cols())?;
        let mut v = data.values().clone();
        let d = data.cols();
        for (k, x) in v.as_mut_slice().iter_mut().enumerate() {
            *x = *x * self.std[k % d] + self.mean[k % d];
        }
        CompleteMatrix::new(v)
    }

    pub fn destandardize(&self, data: &IncompleteMatrix) -> Result<IncompleteMatrix> {
        self.check_width(data.cols())?;
        let mut v = data.values.clone();
        let d = data.cols();
        for (k, (x, &obs)) in v.as_mut_slice().iter_mut().zip(data.mask.bits()).enumerate() {
            if obs {
                *x = *x * self.std[k % d] + self.mean[k % d];
            }
        }
        IncompleteMatrix::new(v, data.mask.clone())
    }
}

fn population_moments(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Maps observed entries to `(v - mean) / std`. With `stats == None` the
/// statistics are estimated from the observed entries and returned.
pub fn standardize(
    data: &IncompleteMatrix,
    stats: Option<&FeatureStats>,
) -> Result<(IncompleteMatrix, FeatureStats)> {
    let stats = match stats {
        Some(s) => {
            s.check_width(data.cols())?;
            s.clone()
        }
        None => FeatureStats::from_observed(data)?,
    };
    let mut v = data.values.clone();
    let d = data.cols();
    for (k, (x, &obs)) in v.as_mut_slice().iter_mut().zip(data.mask.bits()).enumerate() {
        if obs {
            *x = (*x - stats.mean[k % d]) / stats.std[k % d];
        }
    }
    Ok((IncompleteMatrix::new(v, data.mask.clone())?, stats))
}
