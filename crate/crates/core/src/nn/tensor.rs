use rand::Rng;

use crate::error::{Error, Result};

/// Dense row-major array of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.contains(&0) {
            return Err(Error::Config(format!("tensor shape {shape:?} has a zero extent")));
        }
        let len: usize = shape.iter().product();
        if len != data.len() {
            return Err(Error::Config(format!(
                "tensor shape {shape:?} needs {len} values, got {}",
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("non-finite tensor value {v}")));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let len = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; len],
        }
    }

    pub fn from_vec(data: Vec<f64>) -> Self {
        Tensor {
            shape: vec![data.len()],
            data,
        }
    }

    /// Samples every entry from uniform(-r, r).
    pub fn uniform<R: Rng + ?Sized>(shape: &[usize], r: f64, rng: &mut R) -> Self {
        let len: usize = shape.iter().product();
        let data = (0..len).map(|_| rng.random_range(-r..=r)).collect();
        Tensor {
            shape: shape.to_vec(),
            data,
        }
    }

    /// Glorot-style range `sqrt(6 / (fan_in + fan_out))`.
    pub fn glorot_range(fan_in: usize, fan_out: usize) -> f64 {
        (6.0 / (fan_in + fan_out) as f64).sqrt()
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
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

    /// Width of a row for tensors viewed as matrices (last extent).
    pub fn row_len(&self) -> usize {
        *self.shape.last().unwrap_or(&1)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.row_len();
        &self.data[i * w..(i + 1) * w]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let w = self.row_len();
        &mut self.data[i * w..(i + 1) * w]
    }

    pub fn fill(&mut self, v: f64) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn sum_squares(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }
}

/// `out += W x` for a `rows x cols` row-major `w`.
#[inline]
pub(crate) fn matvec_acc(out: &mut [f64], w: &[f64], x: &[f64]) {
    let cols = x.len();
    debug_assert_eq!(w.len(), out.len() * cols);
    for (o, row) in out.iter_mut().zip(w.chunks_exact(cols)) {
        let mut s = 0.0;
        for (a, b) in row.iter().zip(x) {
            s += a * b;
        }
        *o += s;
    }
}

/// `out += W^T y` for a `rows x cols` row-major `w`, `y` of length rows.
#[inline]
pub(crate) fn matvec_t_acc(out: &mut [f64], w: &[f64], y: &[f64]) {
    let cols = out.len();
    debug_assert_eq!(w.len(), y.len() * cols);
    for (&yr, row) in y.iter().zip(w.chunks_exact(cols)) {
        if yr == 0.0 {
            continue;
        }
        for (o, a) in out.iter_mut().zip(row) {
            *o += yr * a;
        }
    }
}

/// `W += y x^T`.
#[inline]
pub(crate) fn outer_acc(w: &mut [f64], y: &[f64], x: &[f64]) {
    let cols = x.len();
    debug_assert_eq!(w.len(), y.len() * cols);
    for (&yr, row) in y.iter().zip(w.chunks_exact_mut(cols)) {
        if yr == 0.0 {
            continue;
        }
        for (a, b) in row.iter_mut().zip(x) {
            *a += yr * b;
        }
    }
}

#[inline]
pub(crate) fn add_assign(out: &mut [f64], x: &[f64]) {
    for (o, v) in out.iter_mut().zip(x) {
        *o += v;
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}
