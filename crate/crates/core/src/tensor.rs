//! Dense row-major tensors and the small amount of shared plumbing the layers
//! and optimizers need.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Named parameter or gradient collection. Ordered so every iteration over it
/// is deterministic.
pub type NamedTensors = BTreeMap<String, Tensor>;

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    dims: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::shape("tensor rank must be at least 1"));
        }
        if dims.contains(&0) {
            return Err(Error::shape(format!("zero extent in dims {dims:?}")));
        }
        let n: usize = dims.iter().product();
        if n != data.len() {
            return Err(Error::shape(format!(
                "dims {dims:?} hold {n} values but data has {}",
                data.len()
            )));
        }
        Ok(Self { dims, data })
    }

    /// # Panics
    /// Panics on an empty or zero-extent `dims`.
    pub fn zeros(dims: &[usize]) -> Self {
        let n: usize = dims.iter().product();
        assert!(!dims.is_empty() && n > 0, "invalid tensor dims {dims:?}");
        Self {
            dims: dims.to_vec(),
            data: vec![0.0; n],
        }
    }

    pub fn filled(dims: &[usize], value: f64) -> Self {
        let mut t = Self::zeros(dims);
        t.data.fill(value);
        t
    }

    /// Rank-1 tensor over `data`.
    ///
    /// # Panics
    /// Panics if `data` is empty.
    pub fn from_vec(data: Vec<f64>) -> Self {
        assert!(!data.is_empty(), "empty vector tensor");
        Self {
            dims: vec![data.len()],
            data,
        }
    }

    /// Zero-mean Gaussian entries with standard deviation `std`.
    pub fn randn<R: Rng + ?Sized>(dims: &[usize], std: f64, rng: &mut R) -> Self {
        let mut t = Self::zeros(dims);
        for v in &mut t.data {
            let z: f64 = rng.sample(StandardNormal);
            *v = z * std;
        }
        t
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn reshape(self, dims: Vec<usize>) -> Result<Self> {
        Self::new(dims, self.data)
    }

    /// Error unless the dims equal `expected`; `what` names the operand.
    pub fn expect_dims(&self, expected: &[usize], what: &str) -> Result<()> {
        if self.dims != expected {
            return Err(Error::shape(format!(
                "{what}: expected dims {expected:?}, got {:?}",
                self.dims
            )));
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            dims: self.dims.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &Tensor) -> Result<()> {
        other.expect_dims(&self.dims, "axpy operand")?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
        Ok(())
    }

    pub fn scale(&mut self, alpha: f64) {
        for v in &mut self.data {
            *v *= alpha;
        }
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Gradients produced by one layer's backward pass.
#[derive(Clone, Debug)]
pub struct LayerGrad {
    pub input_grad: Tensor,
    pub param_grads: NamedTensors,
}

/// Dot product of two equal-length slices, accumulated left to right.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

/// Dot product with four interleaved partial sums. Faster than [`dot`] but
/// rounds differently; used only by the classifier kernels.
#[inline]
pub fn dot_lanes(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..4 {
            acc[l] += x[l] * y[l];
        }
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `y += alpha · x`.
#[inline]
pub fn axpy_slice(y: &mut [f64], alpha: f64, x: &[f64]) {
    debug_assert_eq!(y.len(), x.len());
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
