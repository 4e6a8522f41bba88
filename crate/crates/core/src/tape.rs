//! Tensor-level reverse-mode differentiation.
//!
//! A [`GradTape`] records every primitive op of one forward pass in
//! evaluation order. [`GradTape::backward`] walks the record in reverse and
//! accumulates adjoints, so the gradient of a scalar output with respect to
//! every parameter leaf costs one extra pass.
//!
//! ```
//! use lambda_nli::tape::GradTape;
//! use lambda_nli::tensor::Tensor;
//!
//! let x = Tensor::row_vector(vec![3.0]);
//! let mut tape = GradTape::new();
//! let xv = tape.param(&x);
//! let y = tape.mul(xv, xv).unwrap(); // y = x²
//! let grads = tape.backward(y);
//! assert_eq!(grads.get(xv).unwrap().data(), &[6.0]);
//! ```

use std::borrow::Cow;

use crate::attention;
use crate::error::{Error, Result};
use crate::tensor::{self, Tensor};

/// Probabilities are clamped here before taking the log.
pub const PROB_FLOOR: f64 = 1e-12;

/// Handle to a node on a [`GradTape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    Gather { table: Var, indices: Vec<usize> },
    GatherElements { table: Var, indices: Vec<usize> },
    MatMul(Var, Var),
    MatMulBt(Var, Var),
    MatMulAt(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Mul(Var, Var),
    LeakyRelu { x: Var, slope: f64 },
    LambdaGate { z: Var, slope: f64 },
    Blend { lambda: Var, e: Var, sym: Tensor },
    SoftmaxRows(Var),
    SoftmaxCols(Var),
    ConcatCols(Var, Var),
    SumRows(Var),
    Nll { probs: Var, gold: usize },
}

struct Node<'a> {
    value: Cow<'a, Tensor>,
    op: Op,
    requires_grad: bool,
}

/// Record of one forward pass. Single-threaded; build a fresh tape per step.
pub struct GradTape<'a> {
    nodes: Vec<Node<'a>>,
}

impl Default for GradTape<'_> {
    fn default() -> Self {
        Self::new()
    }
}

impl<'a> GradTape<'a> {
    pub fn new() -> Self {
        GradTape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Cow<'a, Tensor>, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn derived(&mut self, value: Tensor, op: Op, parents: &[Var]) -> Var {
        let requires_grad = parents.iter().any(|p| self.nodes[p.0].requires_grad);
        self.push(Cow::Owned(value), op, requires_grad)
    }

    /// A trainable leaf; borrowed, never copied.
    pub fn param(&mut self, value: &'a Tensor) -> Var {
        self.push(Cow::Borrowed(value), Op::Leaf, true)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(Cow::Owned(value), Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Selects rows of `table` (embedding lookup).
    pub fn gather(&mut self, table: Var, indices: &[usize]) -> Result<Var> {
        let t = self.value(table);
        let (rows, cols) = (t.rows(), t.cols());
        if let Some(&bad) = indices.iter().find(|&&i| i >= rows) {
            return Err(Error::Input(format!("gather index {bad} out of {rows} rows")));
        }
        let out = Tensor::from_fn(indices.len(), cols, |r, c| t.get(indices[r], c));
        Ok(self.derived(
            out,
            Op::Gather {
                table,
                indices: indices.to_vec(),
            },
            &[table],
        ))
    }

    /// `out.flat[k] = table.flat[indices[k]]`, reshaped to `shape`.
    pub fn gather_elements(&mut self, table: Var, indices: &[usize], shape: &[usize]) -> Result<Var> {
        let t = self.value(table);
        if let Some(&bad) = indices.iter().find(|&&i| i >= t.len()) {
            return Err(Error::Input(format!("element index {bad} out of {}", t.len())));
        }
        let data = indices.iter().map(|&i| t.data()[i]).collect();
        let out = Tensor::new(shape.to_vec(), data)?;
        Ok(self.derived(
            out,
            Op::GatherElements {
                table,
                indices: indices.to_vec(),
            },
            &[table],
        ))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = tensor::matmul(self.value(a), self.value(b))?;
        Ok(self.derived(out, Op::MatMul(a, b), &[a, b]))
    }

    /// `a · bᵀ`.
    pub fn matmul_bt(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = tensor::matmul_bt(self.value(a), self.value(b))?;
        Ok(self.derived(out, Op::MatMulBt(a, b), &[a, b]))
    }

    /// `aᵀ · b`.
    pub fn matmul_at(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = tensor::matmul_at(self.value(a), self.value(b))?;
        Ok(self.derived(out, Op::MatMulAt(a, b), &[a, b]))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).zip_map(self.value(b), "add", |x, y| x + y)?;
        Ok(self.derived(out, Op::Add(a, b), &[a, b]))
    }

    /// Adds a `1×n` row to every row of an `m×n` matrix.
    pub fn add_row(&mut self, m: Var, row: Var) -> Result<Var> {
        let (mv, rv) = (self.value(m), self.value(row));
        if rv.rows() != 1 || rv.cols() != mv.cols() {
            return Err(Error::shape("add_row", mv.shape(), rv.shape()));
        }
        let out = Tensor::from_fn(mv.rows(), mv.cols(), |i, j| mv.get(i, j) + rv.get(0, j));
        Ok(self.derived(out, Op::AddRow(m, row), &[m, row]))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).zip_map(self.value(b), "mul", |x, y| x * y)?;
        Ok(self.derived(out, Op::Mul(a, b), &[a, b]))
    }

    pub fn leaky_relu(&mut self, x: Var, slope: f64) -> Var {
        let out = tensor::leaky_relu(self.value(x), slope);
        self.derived(out, Op::LeakyRelu { x, slope }, &[x])
    }

    /// Elementwise lambda gate `1 − LReLU(1 − LReLU(z))`.
    pub fn lambda_gate(&mut self, z: Var, slope: f64) -> Var {
        let out = self.value(z).map(|v| attention::lambda_gate_scalar(v, slope));
        self.derived(out, Op::LambdaGate { z, slope }, &[z])
    }

    /// `λ∘e + (1−λ)∘sym` with `sym` held constant.
    pub fn blend(&mut self, lambda: Var, e: Var, sym: Tensor) -> Result<Var> {
        let out = attention::blend(self.value(e), &sym, self.value(lambda))?;
        Ok(self.derived(out, Op::Blend { lambda, e, sym }, &[lambda, e]))
    }

    pub fn softmax_rows(&mut self, x: Var) -> Var {
        let out = tensor::softmax_rows(self.value(x));
        self.derived(out, Op::SoftmaxRows(x), &[x])
    }

    pub fn softmax_cols(&mut self, x: Var) -> Var {
        let out = tensor::softmax_cols(self.value(x));
        self.derived(out, Op::SoftmaxCols(x), &[x])
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.rows() != bv.rows() {
            return Err(Error::shape("concat_cols", av.shape(), bv.shape()));
        }
        let (ca, cb) = (av.cols(), bv.cols());
        let out = Tensor::from_fn(av.rows(), ca + cb, |i, j| {
            if j < ca {
                av.get(i, j)
            } else {
                bv.get(i, j - ca)
            }
        });
        Ok(self.derived(out, Op::ConcatCols(a, b), &[a, b]))
    }

    /// Sums over rows, `m×n → 1×n`.
    pub fn sum_rows(&mut self, x: Var) -> Var {
        let xv = self.value(x);
        let mut out = vec![0.0; xv.cols()];
        for i in 0..xv.rows() {
            for (o, v) in out.iter_mut().zip(xv.row(i)) {
                *o += v;
            }
        }
        self.derived(Tensor::row_vector(out), Op::SumRows(x), &[x])
    }

    /// `−ln max(probs[gold], PROB_FLOOR)` as a `1×1` tensor.
    pub fn nll(&mut self, probs: Var, gold: usize) -> Result<Var> {
        let p = self.value(probs);
        if gold >= p.len() {
            return Err(Error::Input(format!("gold index {gold} out of {}", p.len())));
        }
        let loss = -p.data()[gold].max(PROB_FLOOR).ln();
        Ok(self.derived(Tensor::row_vector(vec![loss]), Op::Nll { probs, gold }, &[probs]))
    }

    /// Smallest distance of any recorded activation input to a kink.
    ///
    /// Finite differences are only trustworthy when this exceeds the step.
    pub fn kink_margin(&self) -> f64 {
        let mut margin = f64::INFINITY;
        for node in &self.nodes {
            match node.op {
                Op::LeakyRelu { x, .. } => {
                    margin = margin.min(self.value(x).data().iter().fold(f64::INFINITY, |m, v| m.min(v.abs())));
                }
                Op::LambdaGate { z, slope } => {
                    for &v in self.value(z).data() {
                        let inner = tensor::leaky_relu_scalar(v, slope);
                        margin = margin.min(v.abs()).min((1.0 - inner).abs());
                    }
                }
                _ => {}
            }
        }
        margin
    }

    /// Reverse pass from a scalar output, seeding `d out / d out = 1`.
    pub fn backward(&self, output: Var) -> Gradients {
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[output.0] = Some(Tensor::filled(self.value(output).shape(), 1.0));

        for idx in (0..=output.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else {
                continue;
            };
            self.propagate(node, &g, &mut grads);
            grads[idx] = Some(g);
        }

        let grads = grads
            .into_iter()
            .zip(&self.nodes)
            .map(|(g, n)| if matches!(n.op, Op::Leaf) && n.requires_grad { g } else { None })
            .collect();
        Gradients { grads }
    }

    fn propagate(&self, node: &Node<'a>, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let mut acc = |v: Var, delta: Tensor| {
            if !self.nodes[v.0].requires_grad {
                return;
            }
            match &mut grads[v.0] {
                Some(existing) => existing.axpy(1.0, &delta).expect("gradient shape"),
                slot => *slot = Some(delta),
            }
        };
        let shape_err = "tape shapes are checked on the forward pass";
        match &node.op {
            Op::Leaf => {}
            Op::Gather { table, indices } => {
                let t = self.value(*table);
                let mut dt = Tensor::zeros(t.shape());
                let cols = t.cols();
                for (r, &i) in indices.iter().enumerate() {
                    let dst = &mut dt.data_mut()[i * cols..(i + 1) * cols];
                    for (d, s) in dst.iter_mut().zip(g.row(r)) {
                        *d += s;
                    }
                }
                acc(*table, dt);
            }
            Op::GatherElements { table, indices } => {
                let mut dt = Tensor::zeros(self.value(*table).shape());
                for (k, &i) in indices.iter().enumerate() {
                    dt.data_mut()[i] += g.data()[k];
                }
                acc(*table, dt);
            }
            Op::MatMul(a, b) => {
                let da = tensor::matmul_bt(g, self.value(*b)).expect(shape_err);
                let db = tensor::matmul_at(self.value(*a), g).expect(shape_err);
                acc(*a, da);
                acc(*b, db);
            }
            Op::MatMulAt(a, b) => {
                let da = tensor::matmul_bt(self.value(*b), g).expect(shape_err);
                let db = tensor::matmul(self.value(*a), g).expect(shape_err);
                acc(*a, da);
                acc(*b, db);
            }
            Op::MatMulBt(a, b) => {
                let da = tensor::matmul(g, self.value(*b)).expect(shape_err);
                let db = tensor::matmul_at(g, self.value(*a)).expect(shape_err);
                acc(*a, da);
                acc(*b, db);
            }
            Op::Add(a, b) => {
                acc(*a, g.clone());
                acc(*b, g.clone());
            }
            Op::AddRow(m, row) => {
                let mut dr = vec![0.0; g.cols()];
                for i in 0..g.rows() {
                    for (d, v) in dr.iter_mut().zip(g.row(i)) {
                        *d += v;
                    }
                }
                acc(*m, g.clone());
                acc(*row, Tensor::row_vector(dr));
            }
            Op::Mul(a, b) => {
                let da = g.zip_map(self.value(*b), "mul", |x, y| x * y).expect(shape_err);
                let db = g.zip_map(self.value(*a), "mul", |x, y| x * y).expect(shape_err);
                acc(*a, da);
                acc(*b, db);
            }
            Op::LeakyRelu { x, slope } => {
                let dx = g
                    .zip_map(self.value(*x), "leaky_relu", |gv, xv| if xv >= 0.0 { gv } else { slope * gv })
                    .expect(shape_err);
                acc(*x, dx);
            }
            Op::LambdaGate { z, slope } => {
                let dz = g
                    .zip_map(self.value(*z), "lambda_gate", |gv, zv| {
                        gv * attention::lambda_gate_derivative(zv, *slope)
                    })
                    .expect(shape_err);
                acc(*z, dz);
            }
            Op::Blend { lambda, e, sym } => {
                let ev = self.value(*e);
                let lv = self.value(*lambda);
                let dl = Tensor::from_fn(g.rows(), g.cols(), |i, j| g.get(i, j) * (ev.get(i, j) - sym.get(i, j)));
                let de = g.zip_map(lv, "blend", |gv, l| gv * l).expect(shape_err);
                acc(*lambda, dl);
                acc(*e, de);
            }
            Op::SoftmaxRows(x) => {
                let y = &node.value;
                let mut dx = Tensor::zeros(y.shape());
                for i in 0..y.rows() {
                    let inner = tensor::dot(g.row(i), y.row(i));
                    for j in 0..y.cols() {
                        dx.set(i, j, y.get(i, j) * (g.get(i, j) - inner));
                    }
                }
                acc(*x, dx);
            }
            Op::SoftmaxCols(x) => {
                let y = &node.value;
                let mut dx = Tensor::zeros(y.shape());
                for j in 0..y.cols() {
                    let inner: f64 = (0..y.rows()).map(|i| g.get(i, j) * y.get(i, j)).sum();
                    for i in 0..y.rows() {
                        dx.set(i, j, y.get(i, j) * (g.get(i, j) - inner));
                    }
                }
                acc(*x, dx);
            }
            Op::ConcatCols(a, b) => {
                let ca = self.value(*a).cols();
                let cb = self.value(*b).cols();
                let da = Tensor::from_fn(g.rows(), ca, |i, j| g.get(i, j));
                let db = Tensor::from_fn(g.rows(), cb, |i, j| g.get(i, ca + j));
                acc(*a, da);
                acc(*b, db);
            }
            Op::SumRows(x) => {
                let xv = self.value(*x);
                let dx = Tensor::from_fn(xv.rows(), xv.cols(), |_, j| g.get(0, j));
                acc(*x, dx);
            }
            Op::Nll { probs, gold } => {
                let p = self.value(*probs);
                let mut dp = Tensor::zeros(p.shape());
                let pg = p.data()[*gold];
                if pg > PROB_FLOOR {
                    dp.data_mut()[*gold] = -g.data()[0] / pg;
                }
                acc(*probs, dp);
            }
        }
    }
}

/// Adjoints of the parameter leaves after [`GradTape::backward`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient for a parameter leaf; `None` if the output does not depend on it.
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::grad_check;

    fn row(v: &[f64]) -> Tensor {
        Tensor::row_vector(v.to_vec())
    }

    #[test]
    fn square_gradient() {
        let x = row(&[3.0]);
        let mut tape = GradTape::new();
        let xv = tape.param(&x);
        let y = tape.mul(xv, xv).unwrap();
        assert_eq!(tape.value(y).data(), &[9.0]);
        assert_eq!(tape.backward(y).get(xv).unwrap().data(), &[6.0]);
    }

    #[test]
    fn constants_get_no_gradient() {
        let x = row(&[1.0, 2.0]);
        let mut tape = GradTape::new();
        let xv = tape.param(&x);
        let c = tape.constant(row(&[4.0, 5.0]));
        let p = tape.mul(xv, c).unwrap();
        let s = tape.sum_rows(p);
        let ones = tape_ones(&mut tape, 2);
        let out = tape.matmul(s, ones).unwrap();
        let grads = tape.backward(out);
        assert_eq!(grads.get(xv).unwrap().data(), &[4.0, 5.0]);
        assert!(grads.get(c).is_none());
    }

    fn tape_ones(tape: &mut GradTape<'_>, n: usize) -> Var {
        tape.constant(Tensor::filled(&[n, 1], 1.0))
    }

    /// Every op composed into one scalar, checked against central differences.
    #[test]
    fn all_ops_match_finite_differences() {
        let inputs = [
            Tensor::from_rows(&[vec![0.3, -0.7, 1.1], vec![-0.4, 0.9, 0.2]]).unwrap(),
            Tensor::from_rows(&[vec![0.5, 0.1, -0.8], vec![1.3, -0.6, 0.4], vec![0.2, 0.7, -0.3]]).unwrap(),
            row(&[0.35, 0.8, -0.45, 1.6]),
            row(&[0.05, -0.12, 0.33]),
        ];

        let run = |args: &[Tensor]| {
            let mut tape = GradTape::new();
            let vars: Vec<Var> = args.iter().map(|t| tape.param(t)).collect();
            let (a, b, table, bias) = (vars[0], vars[1], vars[2], vars[3]);
            let shifted = tape.add_row(a, bias).unwrap();
            let h = tape.leaky_relu(shifted, 0.01);
            let e = tape.matmul_bt(h, b).unwrap();
            let z = tape.gather_elements(table, &[0, 1, 2, 3, 1, 2], &[2, 3]).unwrap();
            let lam = tape.lambda_gate(z, 0.01);
            let sym = Tensor::from_rows(&[vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0]]).unwrap();
            let ep = tape.blend(lam, e, sym).unwrap();
            let by_row = tape.softmax_rows(ep);
            let by_col = tape.softmax_cols(ep);
            let aligned = tape.matmul(by_row, b).unwrap();
            let col_aligned = tape.matmul_at(by_col, h).unwrap();
            let col_sum = tape.sum_rows(col_aligned);
            let picked = tape.gather(b, &[2, 0]).unwrap();
            let cat = tape.concat_cols(aligned, picked).unwrap();
            let prod = tape.mul(by_row, by_col).unwrap();
            let both = tape.add(prod, by_row).unwrap();
            let s1 = tape.sum_rows(cat);
            let s2 = tape.sum_rows(both);
            let proj = tape.constant(Tensor::from_fn(6, 3, |i, j| ((i * 3 + j) as f64 * 0.37).sin()));
            let s1p = tape.matmul(s1, proj).unwrap();
            let logits = tape.add(s1p, s2).unwrap();
            let logits = tape.add(logits, col_sum).unwrap();
            let probs = tape.softmax_rows(logits);
            let loss = tape.nll(probs, 1).unwrap();
            let grads = tape.backward(loss);
            let grads: Vec<Tensor> = vars.iter().map(|&v| grads.get(v).unwrap().clone()).collect();
            (tape.value(loss).data()[0], grads, tape.kink_margin())
        };

        let (_, _, margin) = run(&inputs);
        assert!(margin > 1e-3);
        for slot in 0..inputs.len() {
            let err = grad_check(
                |p| {
                    let mut args = inputs.to_vec();
                    args[slot] = p.clone();
                    let (v, g, _) = run(&args);
                    (v, g[slot].clone())
                },
                &inputs[slot],
                1e-6,
            );
            assert!(err < 1e-6, "slot {slot}: {err}");
        }
    }
}
