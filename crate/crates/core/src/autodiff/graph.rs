//! Dynamic reverse-mode tape.
//!
//! Every forward op appends a node; node indices are therefore already a
//! topological order and `backward` is a single reverse sweep. A graph
//! supports exactly one backward pass, after which its op records are
//! dropped (values and gradients stay readable).

use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Floor applied to `log` arguments. Below it the gradient is zero.
pub const LOG_EPS: f64 = 1e-12;

/// Default negative slope for `leaky_relu`.
pub const LEAKY_SLOPE: f64 = 0.2;

/// Handle to a node in a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    /// `[n, m] + [1, m]`, bias broadcast over rows.
    AddRow(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Concat(Vec<Var>),
    SliceCols { src: Var, start: usize },
    Tanh(Var),
    Sigmoid(Var),
    LeakyRelu(Var, f64),
    Softplus(Var),
    Log(Var),
    Mean(Var),
    Sum(Var),
    Square(Var),
}

#[derive(Clone, Debug)]
struct Node {
    shape: Vec<usize>,
    value: Vec<f64>,
    op: Op,
    requires_grad: bool,
}

#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    grads: Vec<Option<Vec<f64>>>,
    consumed: bool,
}

fn dims2(shape: &[usize], op: &'static str) -> Result<(usize, usize)> {
    match shape {
        [r, c] => Ok((*r, *c)),
        _ => Err(Error::Dimension {
            op,
            detail: format!("expected a 2-D tensor, got shape {shape:?}"),
        }),
    }
}

/// `c = beta * c + op(a) * op(b)` for row-major buffers.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_trans: bool,
    b: &[f64],
    b_trans: bool,
    c: &mut [f64],
    beta: f64,
) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    // op(a) is m x k; stored a is m x k (row-major) or k x m when transposed.
    let (rsa, csa) = if a_trans { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_trans { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: the slices have exactly the lengths implied by the strides above.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
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

    fn push(&mut self, shape: Vec<usize>, value: Vec<f64>, op: Op, requires_grad: bool) -> Var {
        debug_assert_eq!(shape.iter().product::<usize>(), value.len());
        self.nodes.push(Node {
            shape,
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn node(&self, v: Var) -> &Node {
        &self.nodes[v.0]
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Records a leaf holding a copy of `t`; it tracks gradients iff `t.requires_grad()`.
    pub fn leaf(&mut self, t: &Tensor) -> Var {
        self.push(t.shape().to_vec(), t.data().to_vec(), Op::Leaf, t.requires_grad())
    }

    /// Gradient-tracking leaf regardless of the tensor's own flag.
    pub fn param(&mut self, t: &Tensor) -> Var {
        self.push(t.shape().to_vec(), t.data().to_vec(), Op::Leaf, true)
    }

    /// Leaf that never receives a gradient.
    pub fn constant(&mut self, t: &Tensor) -> Var {
        self.push(t.shape().to_vec(), t.data().to_vec(), Op::Leaf, false)
    }

    pub fn constant_matrix(&mut self, rows: usize, cols: usize, data: Vec<f64>) -> Result<Var> {
        if rows * cols != data.len() || rows == 0 || cols == 0 {
            return Err(Error::Dimension {
                op: "constant",
                detail: format!("{rows}x{cols} from {} values", data.len()),
            });
        }
        Ok(self.push(vec![rows, cols], data, Op::Leaf, false))
    }

    pub fn variable_matrix(&mut self, rows: usize, cols: usize, data: Vec<f64>) -> Result<Var> {
        let v = self.constant_matrix(rows, cols, data)?;
        self.nodes[v.0].requires_grad = true;
        Ok(v)
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.node(v).value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.node(v).shape
    }

    /// Value of a one-element node.
    pub fn scalar(&self, v: Var) -> Result<f64> {
        match self.node(v).value.as_slice() {
            [x] => Ok(*x),
            other => Err(Error::contract(format!(
                "expected a scalar node, found {} elements",
                other.len()
            ))),
        }
    }

    pub fn to_tensor(&self, v: Var) -> Tensor {
        let n = self.node(v);
        Tensor::new(n.shape.clone(), n.value.clone()).expect("graph node shape is consistent")
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = dims2(self.shape(a), "matmul")?;
        let (k2, n) = dims2(self.shape(b), "matmul")?;
        if k != k2 {
            return Err(Error::Dimension {
                op: "matmul",
                detail: format!("[{m}, {k}] x [{k2}, {n}]"),
            });
        }
        let mut out = vec![0.0; m * n];
        gemm(m, k, n, self.value(a), false, self.value(b), false, &mut out, 0.0);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(vec![m, n], out, Op::MatMul(a, b), rg))
    }

    /// Elementwise sum. A `[1, m]` right operand is broadcast over the rows of an `[n, m]` left one.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let sa = self.shape(a).to_vec();
        let sb = self.shape(b).to_vec();
        let rg = self.rg(a) || self.rg(b);
        if sa == sb {
            let out = self
                .value(a)
                .iter()
                .zip(self.value(b))
                .map(|(x, y)| x + y)
                .collect();
            return Ok(self.push(sa, out, Op::Add(a, b), rg));
        }
        if let ([n, m], [1, m2]) = (sa.as_slice(), sb.as_slice()) {
            if m == m2 {
                let bias = self.value(b);
                let out = self
                    .value(a)
                    .chunks(*m)
                    .flat_map(|row| row.iter().zip(bias).map(|(x, y)| x + y))
                    .collect();
                let shape = vec![*n, *m];
                return Ok(self.push(shape, out, Op::AddRow(a, b), rg));
            }
        }
        Err(Error::Dimension {
            op: "add",
            detail: format!("{sa:?} + {sb:?}"),
        })
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<Vec<usize>> {
        let sa = self.shape(a);
        let sb = self.shape(b);
        if sa != sb {
            return Err(Error::Dimension {
                op,
                detail: format!("{sa:?} vs {sb:?}"),
            });
        }
        Ok(sa.to_vec())
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let shape = self.same_shape("sub", a, b)?;
        let out = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(x, y)| x - y)
            .collect();
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(shape, out, Op::Sub(a, b), rg))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let shape = self.same_shape("mul", a, b)?;
        let out = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(x, y)| x * y)
            .collect();
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(shape, out, Op::Mul(a, b), rg))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let out = self.value(a).iter().map(|x| x * s).collect();
        let shape = self.shape(a).to_vec();
        let rg = self.rg(a);
        self.push(shape, out, Op::Scale(a, s), rg)
    }

    /// Concatenates 2-D tensors with equal row counts along the column axis.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let first = parts.first().ok_or_else(|| Error::Dimension {
            op: "concat",
            detail: "no inputs".into(),
        })?;
        let (rows, _) = dims2(self.shape(*first), "concat")?;
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let (r, c) = dims2(self.shape(p), "concat")?;
            if r != rows {
                return Err(Error::Dimension {
                    op: "concat",
                    detail: format!(
                        "row counts differ: {:?}",
                        parts.iter().map(|&v| self.shape(v).to_vec()).collect::<Vec<_>>()
                    ),
                });
            }
            widths.push(c);
        }
        let total: usize = widths.iter().sum();
        let mut out = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for (&p, &w) in parts.iter().zip(&widths) {
                out.extend_from_slice(&self.value(p)[r * w..(r + 1) * w]);
            }
        }
        let rg = parts.iter().any(|&p| self.rg(p));
        Ok(self.push(vec![rows, total], out, Op::Concat(parts.to_vec()), rg))
    }

    /// Columns `start..end` of a 2-D tensor.
    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let (rows, cols) = dims2(self.shape(a), "slice")?;
        if start >= end || end > cols {
            return Err(Error::Dimension {
                op: "slice",
                detail: format!("columns {start}..{end} of [{rows}, {cols}]"),
            });
        }
        let w = end - start;
        let src = self.value(a);
        let mut out = Vec::with_capacity(rows * w);
        for r in 0..rows {
            out.extend_from_slice(&src[r * cols + start..r * cols + end]);
        }
        let rg = self.rg(a);
        Ok(self.push(vec![rows, w], out, Op::SliceCols { src: a, start }, rg))
    }

    fn unary(&mut self, a: Var, op: Op, f: impl Fn(f64) -> f64) -> Var {
        let out = self.value(a).iter().map(|&x| f(x)).collect();
        let shape = self.shape(a).to_vec();
        let rg = self.rg(a);
        self.push(shape, out, op, rg)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(a, Op::Tanh(a), f64::tanh)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(a, Op::Sigmoid(a), sigmoid)
    }

    pub fn leaky_relu(&mut self, a: Var, alpha: f64) -> Var {
        self.unary(a, Op::LeakyRelu(a, alpha), |x| if x > 0.0 { x } else { alpha * x })
    }

    /// `ln(1 + e^x)`, evaluated without overflow.
    pub fn softplus(&mut self, a: Var) -> Var {
        self.unary(a, Op::Softplus(a), softplus)
    }

    /// Natural log with the argument clamped to at least [`LOG_EPS`].
    pub fn log(&mut self, a: Var) -> Var {
        self.unary(a, Op::Log(a), |x| x.max(LOG_EPS).ln())
    }

    pub fn square(&mut self, a: Var) -> Var {
        self.unary(a, Op::Square(a), |x| x * x)
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).iter().sum();
        let rg = self.rg(a);
        self.push(vec![1], vec![s], Op::Sum(a), rg)
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let v = self.value(a);
        let s = v.iter().sum::<f64>() / v.len() as f64;
        let rg = self.rg(a);
        self.push(vec![1], vec![s], Op::Mean(a), rg)
    }

    /// Reverse sweep from a scalar `loss`. Gradients accumulate additively
    /// over fan-out. Consumes the tape: a second call is an error.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.consumed {
            return Err(Error::contract("backward already ran on this graph"));
        }
        if self.node(loss).value.len() != 1 {
            return Err(Error::contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.node(loss).shape
            )));
        }
        self.consumed = true;
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        if !self.rg(loss) {
            self.grads = grads;
            return Ok(());
        }
        grads[loss.0] = Some(vec![1.0]);

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let op = std::mem::replace(&mut self.nodes[idx].op, Op::Leaf);
            self.propagate(idx, &op, &g, &mut grads);
            grads[idx] = Some(g);
        }
        for n in &mut self.nodes {
            n.op = Op::Leaf;
        }
        self.grads = grads;
        Ok(())
    }

    fn propagate(&self, idx: usize, op: &Op, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[idx];
        let mut acc = |v: Var, delta: &mut dyn FnMut(&mut [f64])| {
            if !self.nodes[v.0].requires_grad {
                return;
            }
            let slot = grads[v.0].get_or_insert_with(|| vec![0.0; self.nodes[v.0].value.len()]);
            delta(slot);
        };
        match op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (m, k) = (self.nodes[a.0].shape[0], self.nodes[a.0].shape[1]);
                let n = self.nodes[b.0].shape[1];
                let av = &self.nodes[a.0].value;
                let bv = &self.nodes[b.0].value;
                // dA = G B^T, dB = A^T G
                acc(*a, &mut |s| gemm(m, n, k, g, false, bv, true, s, 1.0));
                acc(*b, &mut |s| gemm(k, m, n, av, true, g, false, s, 1.0));
            }
            Op::Add(a, b) => {
                acc(*a, &mut |s| s.iter_mut().zip(g).for_each(|(x, y)| *x += y));
                acc(*b, &mut |s| s.iter_mut().zip(g).for_each(|(x, y)| *x += y));
            }
            Op::AddRow(a, b) => {
                let m = node.shape[1];
                acc(*a, &mut |s| s.iter_mut().zip(g).for_each(|(x, y)| *x += y));
                acc(*b, &mut |s| {
                    for row in g.chunks(m) {
                        s.iter_mut().zip(row).for_each(|(x, y)| *x += y);
                    }
                });
            }
            Op::Sub(a, b) => {
                acc(*a, &mut |s| s.iter_mut().zip(g).for_each(|(x, y)| *x += y));
                acc(*b, &mut |s| s.iter_mut().zip(g).for_each(|(x, y)| *x -= y));
            }
            Op::Mul(a, b) => {
                let av = &self.nodes[a.0].value;
                let bv = &self.nodes[b.0].value;
                acc(*a, &mut |s| {
                    for ((x, gi), bi) in s.iter_mut().zip(g).zip(bv) {
                        *x += gi * bi;
                    }
                });
                acc(*b, &mut |s| {
                    for ((x, gi), ai) in s.iter_mut().zip(g).zip(av) {
                        *x += gi * ai;
                    }
                });
            }
            Op::Scale(a, c) => {
                acc(*a, &mut |s| s.iter_mut().zip(g).for_each(|(x, y)| *x += c * y));
            }
            Op::Concat(parts) => {
                let rows = node.shape[0];
                let total = node.shape[1];
                let mut offset = 0;
                for &p in parts {
                    let w = self.nodes[p.0].shape[1];
                    acc(p, &mut |s| {
                        for r in 0..rows {
                            let src = &g[r * total + offset..r * total + offset + w];
                            s[r * w..(r + 1) * w]
                                .iter_mut()
                                .zip(src)
                                .for_each(|(x, y)| *x += y);
                        }
                    });
                    offset += w;
                }
            }
            Op::SliceCols { src, start } => {
                let cols = self.nodes[src.0].shape[1];
                let (rows, w) = (node.shape[0], node.shape[1]);
                acc(*src, &mut |s| {
                    for r in 0..rows {
                        let dst = &mut s[r * cols + start..r * cols + start + w];
                        dst.iter_mut()
                            .zip(&g[r * w..(r + 1) * w])
                            .for_each(|(x, y)| *x += y);
                    }
                });
            }
            Op::Tanh(a) => {
                let out = &node.value;
                acc(*a, &mut |s| {
                    for ((x, gi), yi) in s.iter_mut().zip(g).zip(out) {
                        *x += gi * (1.0 - yi * yi);
                    }
                });
            }
            Op::Sigmoid(a) => {
                let out = &node.value;
                acc(*a, &mut |s| {
                    for ((x, gi), yi) in s.iter_mut().zip(g).zip(out) {
                        *x += gi * yi * (1.0 - yi);
                    }
                });
            }
            Op::LeakyRelu(a, alpha) => {
                let inp = &self.nodes[a.0].value;
                acc(*a, &mut |s| {
                    for ((x, gi), xi) in s.iter_mut().zip(g).zip(inp) {
                        *x += if *xi > 0.0 { *gi } else { alpha * gi };
                    }
                });
            }
            Op::Softplus(a) => {
                let inp = &self.nodes[a.0].value;
                acc(*a, &mut |s| {
                    for ((x, gi), xi) in s.iter_mut().zip(g).zip(inp) {
                        *x += gi * sigmoid(*xi);
                    }
                });
            }
            Op::Log(a) => {
                let inp = &self.nodes[a.0].value;
                acc(*a, &mut |s| {
                    for ((x, gi), xi) in s.iter_mut().zip(g).zip(inp) {
                        if *xi > LOG_EPS {
                            *x += gi / xi;
                        }
                    }
                });
            }
            Op::Square(a) => {
                let inp = &self.nodes[a.0].value;
                acc(*a, &mut |s| {
                    for ((x, gi), xi) in s.iter_mut().zip(g).zip(inp) {
                        *x += 2.0 * gi * xi;
                    }
                });
            }
            Op::Sum(a) => {
                let g0 = g[0];
                acc(*a, &mut |s| s.iter_mut().for_each(|x| *x += g0));
            }
            Op::Mean(a) => {
                let g0 = g[0] / self.nodes[a.0].value.len() as f64;
                acc(*a, &mut |s| s.iter_mut().for_each(|x| *x += g0));
            }
        }
    }

    /// Gradient of the last backward loss w.r.t. `v`, if it was reached.
    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    /// Adds the gradient of `v` into `target`'s grad slot.
    ///
    /// A node the loss does not depend on contributes zeros.
    pub fn accumulate_into(&self, v: Var, target: &mut Tensor) -> Result<()> {
        if !self.consumed {
            return Err(Error::contract("accumulate_into before backward"));
        }
        match self.grad(v) {
            Some(g) => target.accumulate_grad(g),
            None => {
                if target.grad().is_none() {
                    target.zero_grad();
                }
                Ok(())
            }
        }
    }
}
