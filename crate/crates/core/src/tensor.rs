//! Dense row-major `f64` tensors and the handful of kernels the model needs.
//!
//! Tensors are immutable values; every kernel here is a pure function that
//! allocates its result. Most kernels are defined on rank-2 tensors; a
//! vector is a `1×n` matrix.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default negative slope for [`leaky_relu`].
pub const DEFAULT_SLOPE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::shape("Tensor::new", &shape, &[data.len()]));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::filled(shape, 0.0)
    }

    pub fn filled(shape: &[usize], value: f64) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![value; shape.iter().product()],
        }
    }

    /// Builds an `r×c` matrix from equally long rows.
    ///
    /// ```
    /// use lambda_nli::tensor::Tensor;
    /// let m = Tensor::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
    /// assert_eq!(m.shape(), &[2, 2]);
    /// assert_eq!(m.get(1, 0), 3.0);
    /// ```
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(Error::shape("Tensor::from_rows", &[cols], &[bad.len()]));
        }
        Ok(Tensor {
            shape: vec![rows.len(), cols],
            data: rows.concat(),
        })
    }

    pub fn row_vector(values: Vec<f64>) -> Self {
        Tensor {
            shape: vec![1, values.len()],
            data: values,
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Self::zeros(&[n, n]);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    pub(crate) fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Tensor {
            shape: vec![rows, cols],
            data,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
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

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Row count of a rank-2 tensor (1 for rank-1).
    pub fn rows(&self) -> usize {
        match self.shape.len() {
            0 => 1,
            1 => 1,
            _ => self.shape[0],
        }
    }

    pub fn cols(&self) -> usize {
        match self.shape.len() {
            0 => 1,
            1 => self.shape[0],
            _ => self.shape[1..].iter().product(),
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols() + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let c = self.cols();
        self.data[i * c + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.cols();
        &self.data[i * c..(i + 1) * c]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows()).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Tensor, op: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        if self.shape != other.shape {
            return Err(Error::shape(op, &self.shape, &other.shape));
        }
        Ok(Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    /// In-place `self += scale * other`.
    pub fn axpy(&mut self, scale: f64, other: &Tensor) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::shape("axpy", &self.shape, &other.shape));
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += scale * b;
        }
        Ok(())
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Same data under a new shape with the same element count.
    pub fn reshape(&self, shape: &[usize]) -> Result<Tensor> {
        Tensor::new(shape.to_vec(), self.data.clone())
    }
}

/// Standard matrix product of `m×k` and `k×n`.
///
/// ```
/// use lambda_nli::tensor::{matmul, Tensor};
/// let a = Tensor::from_rows(&[vec![1.0, 2.0]]).unwrap();
/// let b = Tensor::from_rows(&[vec![3.0], vec![4.0]]).unwrap();
/// assert_eq!(matmul(&a, &b).unwrap().data(), &[11.0]);
/// ```
pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (m, k) = (a.rows(), a.cols());
    let (k2, n) = (b.rows(), b.cols());
    if k != k2 {
        return Err(Error::shape("matmul", a.shape(), b.shape()));
    }
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let arow = &a.data[i * k..(i + 1) * k];
        let orow = &mut out[i * n..(i + 1) * n];
        for (p, &av) in arow.iter().enumerate() {
            let brow = &b.data[p * n..(p + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    Ok(Tensor {
        shape: vec![m, n],
        data: out,
    })
}

/// `a · bᵀ` for `m×k` and `n×k`, i.e. all pairwise row dot products.
pub fn matmul_bt(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (m, k) = (a.rows(), a.cols());
    let (n, k2) = (b.rows(), b.cols());
    if k != k2 {
        return Err(Error::shape("matmul_bt", a.shape(), b.shape()));
    }
    Ok(Tensor::from_fn(m, n, |i, j| dot(a.row(i), b.row(j))))
}

/// `aᵀ · b` for `k×m` and `k×n`.
pub fn matmul_at(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (k, m) = (a.rows(), a.cols());
    let (k2, n) = (b.rows(), b.cols());
    if k != k2 {
        return Err(Error::shape("matmul_at", a.shape(), b.shape()));
    }
    let mut out = vec![0.0; m * n];
    for p in 0..k {
        let arow = a.row(p);
        let brow = b.row(p);
        for (i, &av) in arow.iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            let orow = &mut out[i * n..(i + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    Ok(Tensor {
        shape: vec![m, n],
        data: out,
    })
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn transpose(t: &Tensor) -> Tensor {
    let (r, c) = (t.rows(), t.cols());
    Tensor::from_fn(c, r, |i, j| t.get(j, i))
}

#[inline]
pub fn leaky_relu_scalar(x: f64, slope: f64) -> f64 {
    if x >= 0.0 {
        x
    } else {
        slope * x
    }
}

/// Elementwise `x` for `x ≥ 0`, `slope·x` otherwise.
pub fn leaky_relu(x: &Tensor, slope: f64) -> Tensor {
    x.map(|v| leaky_relu_scalar(v, slope))
}

/// Row-wise softmax with max subtraction.
///
/// ```
/// use lambda_nli::tensor::{softmax_rows, Tensor};
/// let m = Tensor::from_rows(&[vec![1000.0, 1000.0]]).unwrap();
/// assert_eq!(softmax_rows(&m).data(), &[0.5, 0.5]);
/// ```
pub fn softmax_rows(m: &Tensor) -> Tensor {
    let (r, c) = (m.rows(), m.cols());
    let mut out = Vec::with_capacity(r * c);
    for i in 0..r {
        out.extend(softmax(m.row(i)));
    }
    Tensor {
        shape: m.shape.clone(),
        data: out,
    }
}

pub fn softmax(xs: &[f64]) -> Vec<f64> {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = xs.iter().map(|&x| (x - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Column-wise softmax (each column sums to one).
pub fn softmax_cols(m: &Tensor) -> Tensor {
    transpose(&softmax_rows(&transpose(m)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn m(rows: &[&[f64]]) -> Tensor {
        Tensor::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn matmul_identity_zero_and_dot() {
        let b = m(&[&[1.0, 2.0], &[3.0, 4.0]]);
        assert_eq!(matmul(&Tensor::identity(2), &b).unwrap(), b);
        assert_eq!(matmul(&m(&[&[0.0, 0.0]]), &m(&[&[5.0], &[7.0]])).unwrap().data(), &[0.0]);
        assert_eq!(matmul(&m(&[&[1.0, 2.0]]), &m(&[&[3.0], &[4.0]])).unwrap().data(), &[11.0]);
    }

    #[test]
    fn matmul_shape_error_names_both_shapes() {
        let err = matmul(&Tensor::zeros(&[2, 3]), &Tensor::zeros(&[2, 3])).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("[2, 3]"), "{msg}");
        assert!(matches!(err, Error::Shape { .. }));
    }

    #[test]
    fn transposed_products_agree_with_matmul() {
        let a = m(&[&[1.0, -2.0, 0.5], &[3.0, 0.0, 1.0]]);
        let b = m(&[&[2.0, 1.0, -1.0], &[0.0, 4.0, 2.0]]);
        assert_eq!(matmul_bt(&a, &b).unwrap(), matmul(&a, &transpose(&b)).unwrap());
        assert_eq!(matmul_at(&a, &b).unwrap(), matmul(&transpose(&a), &b).unwrap());
    }

    #[test]
    fn leaky_relu_cases() {
        let x = Tensor::row_vector(vec![2.0, 0.0, -1.0]);
        assert_eq!(leaky_relu(&x, 0.01).data(), &[2.0, 0.0, -0.01]);
    }

    #[test]
    fn softmax_cases() {
        let u = softmax_rows(&m(&[&[0.0, 0.0, 0.0]]));
        for v in u.data() {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
        assert_eq!(softmax_rows(&m(&[&[1000.0, 1000.0]])).data(), &[0.5, 0.5]);
        // exp(ln 3) = 3, so the weights are 1/(1+3) and 3/(1+3)
        let s = softmax_rows(&m(&[&[0.0, 3f64.ln()]]));
        assert!((s.get(0, 0) - 0.25).abs() < 1e-15);
        assert!((s.get(0, 1) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn softmax_cols_normalizes_columns() {
        let s = softmax_cols(&m(&[&[1.0, 2.0], &[3.0, -1.0], &[0.0, 0.5]]));
        for j in 0..2 {
            let total: f64 = (0..3).map(|i| s.get(i, j)).sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Tensor> {
        proptest::collection::vec(-10.0f64..10.0, rows * cols)
            .prop_map(move |d| Tensor::new(vec![rows, cols], d).unwrap())
    }

    proptest! {
        #[test]
        fn softmax_rows_sum_to_one(t in (1usize..6, 1usize..8).prop_flat_map(|(r, c)| {
            proptest::collection::vec(-1e6f64..1e6, r * c).prop_map(move |d| Tensor::new(vec![r, c], d).unwrap())
        })) {
            let s = softmax_rows(&t);
            for i in 0..s.rows() {
                let total: f64 = s.row(i).iter().sum();
                prop_assert!((total - 1.0).abs() < 1e-9);
                prop_assert!(s.row(i).iter().all(|&v| v >= 0.0));
            }
        }

        #[test]
        fn leaky_relu_monotone_and_identity_on_nonneg(a in -100.0f64..100.0, b in -100.0f64..100.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(leaky_relu_scalar(lo, DEFAULT_SLOPE) <= leaky_relu_scalar(hi, DEFAULT_SLOPE));
            if a >= 0.0 {
                prop_assert_eq!(leaky_relu_scalar(a, DEFAULT_SLOPE), a);
            }
        }

        #[test]
        fn matmul_is_associative(a in matrix(3, 4), b in matrix(4, 2), c in matrix(2, 5)) {
            let left = matmul(&matmul(&a, &b).unwrap(), &c).unwrap();
            let right = matmul(&a, &matmul(&b, &c).unwrap()).unwrap();
            let scale = left.max_abs().max(1.0);
            for (x, y) in left.data().iter().zip(right.data()) {
                prop_assert!((x - y).abs() / scale < 1e-9);
            }
        }
    }
}
