use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Dense row-major matrix.
///
/// Parameters and embeddings are stored as `Matrix<f32>`; activations and
/// gradients inside the heads are carried as `Matrix<f64>`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix<T = f32> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Copy + Default> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::default(); rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch(format!(
                "{} values cannot fill a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::ShapeMismatch(format!(
                    "row {i} has {} columns, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: T) {
        self.data[r * self.cols + c] = v;
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[T]> + '_ {
        (0..self.rows).map(move |i| self.row(i))
    }

    /// New matrix made of the given rows, in order (repeats allowed).
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self {
            rows: indices.len(),
            cols: self.cols,
            data,
        }
    }
}

impl Matrix<f32> {
    pub fn to_f64(&self) -> Matrix<f64> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f64::from(v)).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

impl Matrix<f64> {
    pub fn to_f32(&self) -> Matrix<f32> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| v as f32).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Multiplies every entry by `factor`.
    pub fn scale(&mut self, factor: f64) {
        self.data.iter_mut().for_each(|v| *v *= factor);
    }

    /// `self += factor * other`.
    pub fn add_scaled(&mut self, other: &Matrix<f64>, factor: f64) {
        debug_assert_eq!(self.shape(), other.shape());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += factor * b;
        }
    }
}

/// `x · Wᵀ + b` for `x: B×d`, `W: C×d`, `b: C`, accumulated in f64.
pub(crate) fn affine<X: Copy + Into<f64> + Default>(
    x: &Matrix<X>,
    weight: &Matrix<f32>,
    bias: &[f32],
) -> Matrix<f64> {
    let (b, d) = x.shape();
    let c = weight.rows();
    debug_assert_eq!(weight.cols(), d);
    debug_assert_eq!(bias.len(), c);
    let mut out = Matrix::<f64>::zeros(b, c);
    for i in 0..b {
        let xi = x.row(i);
        let oi = out.row_mut(i);
        for (k, o) in oi.iter_mut().enumerate() {
            let wk = weight.row(k);
            let mut acc = f64::from(bias[k]);
            for (xv, wv) in xi.iter().zip(wk) {
                acc += (*xv).into() * f64::from(*wv);
            }
            *o = acc;
        }
    }
    out
}

/// Gradients of `x · Wᵀ + b` given the upstream gradient `g: B×C`:
/// returns `(gᵀ·x, Σ_rows g)` and optionally the input gradient `g·W`.
pub(crate) fn affine_backward<X: Copy + Into<f64> + Default>(
    x: &Matrix<X>,
    weight: &Matrix<f32>,
    grad_out: &Matrix<f64>,
    want_input_grad: bool,
) -> (Matrix<f64>, Vec<f64>, Option<Matrix<f64>>) {
    let (b, d) = x.shape();
    let c = weight.rows();
    let mut grad_w = Matrix::<f64>::zeros(c, d);
    let mut grad_b = vec![0.0; c];
    for i in 0..b {
        let xi = x.row(i);
        let gi = grad_out.row(i);
        for (k, &g) in gi.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            grad_b[k] += g;
            for (w, xv) in grad_w.row_mut(k).iter_mut().zip(xi) {
                *w += g * (*xv).into();
            }
        }
    }
    let grad_x = want_input_grad.then(|| {
        let mut gx = Matrix::<f64>::zeros(b, d);
        for i in 0..b {
            let gi = grad_out.row(i);
            let gxi = gx.row_mut(i);
            for (k, &g) in gi.iter().enumerate() {
                if g == 0.0 {
                    continue;
                }
                for (o, wv) in gxi.iter_mut().zip(weight.row(k)) {
                    *o += g * f64::from(*wv);
                }
            }
        }
        gx
    });
    (grad_w, grad_b, grad_x)
}
