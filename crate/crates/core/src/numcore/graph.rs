//! Reverse-mode automatic differentiation over [`Tensor`] values.
//!
//! A [`Graph`] records every operation as a node in creation order, which is
//! already a topological order. [`Graph::backward`] walks the nodes in reverse
//! and accumulates gradients into each parent's slot. Handles are plain
//! [`Var`] indices, so building a graph never fights the borrow checker.
//!
//! ```
//! use nclm::numcore::{Graph, Tensor};
//!
//! let mut g = Graph::new();
//! let w = g.param(Tensor::vector(vec![1.0, -2.0]));
//! let sq = g.mul(w, w).unwrap();
//! let loss = g.sum(sq).unwrap();
//! g.backward(loss).unwrap();
//! assert_eq!(g.grad(w).data(), &[2.0, -4.0]);
//! ```

use super::tensor::{self, Tensor};
use crate::error::{Error, Result};

/// Handle to a node in a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unary {
    Sigmoid,
    Tanh,
    Exp,
    Log,
    Softplus,
    Square,
    Neg,
}

impl Unary {
    fn name(self) -> &'static str {
        match self {
            Unary::Sigmoid => "sigmoid",
            Unary::Tanh => "tanh",
            Unary::Exp => "exp",
            Unary::Log => "log",
            Unary::Softplus => "softplus",
            Unary::Square => "square",
            Unary::Neg => "neg",
        }
    }

    fn apply(self, x: f64) -> f64 {
        match self {
            Unary::Sigmoid => tensor::sigmoid(x),
            Unary::Tanh => x.tanh(),
            Unary::Exp => x.exp(),
            Unary::Log => x.ln(),
            Unary::Softplus => tensor::softplus(x),
            Unary::Square => x * x,
            Unary::Neg => -x,
        }
    }

    /// Derivative expressed through the input `x` and output `y`.
    fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Unary::Sigmoid => y * (1.0 - y),
            Unary::Tanh => 1.0 - y * y,
            Unary::Exp => y,
            Unary::Log => 1.0 / x,
            Unary::Softplus => tensor::sigmoid(x),
            Unary::Square => 2.0 * x,
            Unary::Neg => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Binary {
    Add,
    Sub,
    Mul,
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    MatVec(Var, Var),
    VecMat(Var, Var),
    Binary(Binary, Var, Var),
    Unary(Unary, Var),
    Scale(Var, f64),
    AddScalar(Var),
    Sum(Var),
    Concat(Vec<Var>),
    Slice(Var, usize),
    Stack(Vec<Var>),
    ColumnAverage {
        src: Var,
        cols: Vec<usize>,
        divisor: f64,
    },
    Softmax(Var),
    LogSoftmax(Var),
    Pick(Var, usize),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Tape of recorded tensor operations.
#[derive(Debug)]
pub struct Graph {
    nodes: Vec<Node>,
    grads: Vec<Option<Tensor>>,
    check_finite: bool,
}

impl Default for Graph {
    fn default() -> Self {
        Graph::new()
    }
}

impl Graph {
    /// Non-finite checks are on in debug builds.
    pub fn new() -> Self {
        Graph::with_checks(cfg!(debug_assertions))
    }

    pub fn with_checks(check_finite: bool) -> Self {
        Graph {
            nodes: Vec::new(),
            grads: Vec::new(),
            check_finite,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value.item()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Gradient of the last backward root with respect to `v`; zeros when
    /// nothing flowed into it.
    pub fn grad(&self, v: Var) -> Tensor {
        match self.grads.get(v.0).and_then(Option::as_ref) {
            Some(g) => g.clone(),
            None => Tensor::zeros(self.nodes[v.0].value.shape()),
        }
    }

    /// Moves the gradient out of the graph, leaving zeros behind.
    pub fn take_grad(&mut self, v: Var) -> Tensor {
        match self.grads.get_mut(v.0).and_then(Option::take) {
            Some(g) => g,
            None => Tensor::zeros(self.nodes[v.0].value.shape()),
        }
    }

    pub fn zero_grads(&mut self) {
        self.grads.clear();
    }

    /// Trainable leaf.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.push_raw(value, Op::Leaf, true)
    }

    /// Leaf that never receives a gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push_raw(value, Op::Leaf, false)
    }

    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.push_raw(value, Op::Leaf, requires_grad)
    }

    fn push_raw(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn push(&mut self, name: &'static str, value: Tensor, op: Op, parents: &[Var]) -> Result<Var> {
        if self.check_finite && !value.is_finite() {
            return Err(Error::NonFinite { op: name });
        }
        let requires_grad = parents.iter().any(|p| self.nodes[p.0].requires_grad);
        Ok(self.push_raw(value, op, requires_grad))
    }

    fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    fn expect_vector(&self, op: &'static str, v: Var) -> Result<usize> {
        match self.shape(v) {
            [n] => Ok(*n),
            s => Err(Error::dim(op, format!("expected a vector, got {:?}", s))),
        }
    }

    fn expect_matrix(&self, op: &'static str, v: Var) -> Result<(usize, usize)> {
        match self.shape(v) {
            [r, c] => Ok((*r, *c)),
            s => Err(Error::dim(op, format!("expected a matrix, got {:?}", s))),
        }
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        self.push("matmul", value, Op::MatMul(a, b), &[a, b])
    }

    /// `W x` for `W: [m, n]`, `x: [n]`.
    pub fn matvec(&mut self, w: Var, x: Var) -> Result<Var> {
        let (m, n) = self.expect_matrix("matvec", w)?;
        let xn = self.expect_vector("matvec", x)?;
        if n != xn {
            return Err(Error::dim("matvec", format!("[{m}, {n}] x [{xn}]")));
        }
        let wd = self.value(w).data();
        let xd = self.value(x).data();
        let out: Vec<f64> = (0..m)
            .map(|i| wd[i * n..(i + 1) * n].iter().zip(xd).map(|(a, b)| a * b).sum())
            .collect();
        self.push("matvec", Tensor::vector(out), Op::MatVec(w, x), &[w, x])
    }

    /// `xᵀ W` for `x: [m]`, `W: [m, n]`.
    pub fn vecmat(&mut self, x: Var, w: Var) -> Result<Var> {
        let (m, n) = self.expect_matrix("vecmat", w)?;
        let xm = self.expect_vector("vecmat", x)?;
        if m != xm {
            return Err(Error::dim("vecmat", format!("[{xm}] x [{m}, {n}]")));
        }
        let wd = self.value(w).data();
        let xd = self.value(x).data();
        let mut out = vec![0.0; n];
        for (i, &xi) in xd.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for (o, wij) in out.iter_mut().zip(&wd[i * n..(i + 1) * n]) {
                *o += xi * wij;
            }
        }
        self.push("vecmat", Tensor::vector(out), Op::VecMat(x, w), &[x, w])
    }

    fn binary(&mut self, kind: Binary, a: Var, b: Var) -> Result<Var> {
        let name = match kind {
            Binary::Add => "add",
            Binary::Sub => "sub",
            Binary::Mul => "mul",
        };
        if self.shape(a) != self.shape(b) {
            return Err(Error::dim(
                name,
                format!("{:?} vs {:?}", self.shape(a), self.shape(b)),
            ));
        }
        let ad = self.value(a).data();
        let bd = self.value(b).data();
        let data: Vec<f64> = match kind {
            Binary::Add => ad.iter().zip(bd).map(|(x, y)| x + y).collect(),
            Binary::Sub => ad.iter().zip(bd).map(|(x, y)| x - y).collect(),
            Binary::Mul => ad.iter().zip(bd).map(|(x, y)| x * y).collect(),
        };
        let value = Tensor::new(self.shape(a).to_vec(), data)?;
        self.push(name, value, Op::Binary(kind, a, b), &[a, b])
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(Binary::Add, a, b)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(Binary::Sub, a, b)
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(Binary::Mul, a, b)
    }

    pub fn unary(&mut self, kind: Unary, x: Var) -> Result<Var> {
        if kind == Unary::Log {
            if let Some(bad) = self.value(x).data().iter().find(|&&v| v <= 0.0) {
                return Err(Error::Domain {
                    op: "log",
                    detail: format!("non-positive input {bad}"),
                });
            }
        }
        let value = self.value(x).map(|v| kind.apply(v));
        self.push(kind.name(), value, Op::Unary(kind, x), &[x])
    }

    pub fn sigmoid(&mut self, x: Var) -> Result<Var> {
        self.unary(Unary::Sigmoid, x)
    }

    pub fn tanh(&mut self, x: Var) -> Result<Var> {
        self.unary(Unary::Tanh, x)
    }

    pub fn exp(&mut self, x: Var) -> Result<Var> {
        self.unary(Unary::Exp, x)
    }

    pub fn log(&mut self, x: Var) -> Result<Var> {
        self.unary(Unary::Log, x)
    }

    pub fn softplus(&mut self, x: Var) -> Result<Var> {
        self.unary(Unary::Softplus, x)
    }

    pub fn square(&mut self, x: Var) -> Result<Var> {
        self.unary(Unary::Square, x)
    }

    pub fn neg(&mut self, x: Var) -> Result<Var> {
        self.unary(Unary::Neg, x)
    }

    pub fn scale(&mut self, x: Var, s: f64) -> Result<Var> {
        let value = self.value(x).map(|v| v * s);
        self.push("scale", value, Op::Scale(x, s), &[x])
    }

    pub fn add_scalar(&mut self, x: Var, c: f64) -> Result<Var> {
        let value = self.value(x).map(|v| v + c);
        self.push("add_scalar", value, Op::AddScalar(x), &[x])
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let value = Tensor::scalar(self.value(x).sum());
        self.push("sum", value, Op::Sum(x), &[x])
    }

    pub fn dot(&mut self, a: Var, b: Var) -> Result<Var> {
        let p = self.mul(a, b)?;
        self.sum(p)
    }

    /// Concatenates vectors end to end.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let mut data = Vec::new();
        for &p in parts {
            self.expect_vector("concat", p)?;
            data.extend_from_slice(self.value(p).data());
        }
        self.push("concat", Tensor::vector(data), Op::Concat(parts.to_vec()), parts)
    }

    /// `x[start..start + len]` of a vector.
    pub fn slice(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let n = self.expect_vector("slice", x)?;
        if start + len > n {
            return Err(Error::dim("slice", format!("{start}+{len} > {n}")));
        }
        let data = self.value(x).data()[start..start + len].to_vec();
        self.push("slice", Tensor::vector(data), Op::Slice(x, start), &[x])
    }

    /// Stacks equal-length vectors as the rows of a matrix.
    pub fn stack(&mut self, rows: &[Var]) -> Result<Var> {
        let Some(&first) = rows.first() else {
            return Err(Error::dim("stack", "no rows"));
        };
        let d = self.expect_vector("stack", first)?;
        let mut data = Vec::with_capacity(rows.len() * d);
        for &r in rows {
            if self.expect_vector("stack", r)? != d {
                return Err(Error::dim("stack", "rows differ in length"));
            }
            data.extend_from_slice(self.value(r).data());
        }
        let value = Tensor::matrix(rows.len(), d, data)?;
        self.push("stack", value, Op::Stack(rows.to_vec()), rows)
    }

    /// Sum of the selected columns of `src: [d, n]` divided by `divisor`.
    /// An empty selection yields the zero vector.
    pub fn column_average(&mut self, src: Var, cols: &[usize], divisor: f64) -> Result<Var> {
        let (d, n) = self.expect_matrix("column_average", src)?;
        if let Some(&bad) = cols.iter().find(|&&c| c >= n) {
            return Err(Error::dim("column_average", format!("column {bad} >= {n}")));
        }
        let mut out = vec![0.0; d];
        if !cols.is_empty() {
            let sd = self.value(src).data();
            for &c in cols {
                for (i, o) in out.iter_mut().enumerate() {
                    *o += sd[i * n + c];
                }
            }
            for o in &mut out {
                *o /= divisor;
            }
        }
        let op = Op::ColumnAverage {
            src,
            cols: cols.to_vec(),
            divisor,
        };
        self.push("column_average", Tensor::vector(out), op, &[src])
    }

    /// Single column of `src`.
    pub fn column(&mut self, src: Var, col: usize) -> Result<Var> {
        self.column_average(src, &[col], 1.0)
    }

    pub fn softmax(&mut self, x: Var) -> Result<Var> {
        self.expect_vector("softmax", x)?;
        let value = self.value(x).softmax();
        self.push("softmax", value, Op::Softmax(x), &[x])
    }

    pub fn log_softmax(&mut self, x: Var) -> Result<Var> {
        self.expect_vector("log_softmax", x)?;
        let value = self.value(x).log_softmax();
        self.push("log_softmax", value, Op::LogSoftmax(x), &[x])
    }

    /// Scalar element `x[i]` of a vector.
    pub fn pick(&mut self, x: Var, i: usize) -> Result<Var> {
        let n = self.expect_vector("pick", x)?;
        if i >= n {
            return Err(Error::dim("pick", format!("index {i} >= {n}")));
        }
        let value = Tensor::scalar(self.value(x).data()[i]);
        self.push("pick", value, Op::Pick(x, i), &[x])
    }

    /// Populates gradients of `root` with respect to every node that
    /// requires one. Previous gradients are discarded.
    pub fn backward(&mut self, root: Var) -> Result<()> {
        let rv = &self.nodes[root.0].value;
        if rv.len() != 1 {
            return Err(Error::NonScalarRoot(rv.shape().to_vec()));
        }
        self.grads = vec![None; self.nodes.len()];
        self.grads[root.0] = Some(Tensor::filled(rv.shape(), 1.0));
        for i in (0..=root.0).rev() {
            if !self.nodes[i].requires_grad {
                continue;
            }
            let Some(g) = self.grads[i].take() else {
                continue;
            };
            self.propagate(i, &g);
            self.grads[i] = Some(g);
        }
        Ok(())
    }

    fn propagate(&mut self, i: usize, g: &Tensor) {
        // Parents always precede `i`, so their values are read through a
        // split borrow while their grad slots are written.
        let (before, rest) = self.nodes.split_at(i);
        let node = &rest[0];
        let gd = g.data();
        let grads = &mut self.grads;
        let val = |v: Var| -> &Tensor { &before[v.0].value };

        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (av, bv) = (val(*a), val(*b));
                let (m, k, n) = (av.rows(), av.cols(), bv.cols());
                if let Some(ga) = slot(before, grads, *a) {
                    let gad = ga.data_mut();
                    for r in 0..m {
                        for p in 0..k {
                            let mut acc = 0.0;
                            for c in 0..n {
                                acc += gd[r * n + c] * bv.data()[p * n + c];
                            }
                            gad[r * k + p] += acc;
                        }
                    }
                }
                if let Some(gb) = slot(before, grads, *b) {
                    let gbd = gb.data_mut();
                    for r in 0..m {
                        for p in 0..k {
                            let a_rp = av.data()[r * k + p];
                            if a_rp == 0.0 {
                                continue;
                            }
                            for c in 0..n {
                                gbd[p * n + c] += a_rp * gd[r * n + c];
                            }
                        }
                    }
                }
            }
            Op::MatVec(w, x) => {
                let (wv, xv) = (val(*w), val(*x));
                let (m, n) = (wv.rows(), wv.cols());
                if let Some(gw) = slot(before, grads, *w) {
                    let gwd = gw.data_mut();
                    for r in 0..m {
                        if gd[r] == 0.0 {
                            continue;
                        }
                        for (gwi, xj) in gwd[r * n..(r + 1) * n].iter_mut().zip(xv.data()) {
                            *gwi += gd[r] * xj;
                        }
                    }
                }
                if let Some(gx) = slot(before, grads, *x) {
                    let gxd = gx.data_mut();
                    for r in 0..m {
                        if gd[r] == 0.0 {
                            continue;
                        }
                        for (gxj, wrj) in gxd.iter_mut().zip(&wv.data()[r * n..(r + 1) * n]) {
                            *gxj += gd[r] * wrj;
                        }
                    }
                }
            }
            Op::VecMat(x, w) => {
                let (xv, wv) = (val(*x), val(*w));
                let (m, n) = (wv.rows(), wv.cols());
                if let Some(gx) = slot(before, grads, *x) {
                    let gxd = gx.data_mut();
                    for r in 0..m {
                        gxd[r] += wv.data()[r * n..(r + 1) * n]
                            .iter()
                            .zip(gd)
                            .map(|(a, b)| a * b)
                            .sum::<f64>();
                    }
                }
                if let Some(gw) = slot(before, grads, *w) {
                    let gwd = gw.data_mut();
                    for r in 0..m {
                        let xr = xv.data()[r];
                        if xr == 0.0 {
                            continue;
                        }
                        for (gwi, gj) in gwd[r * n..(r + 1) * n].iter_mut().zip(gd) {
                            *gwi += xr * gj;
                        }
                    }
                }
            }
            Op::Binary(kind, a, b) => {
                let (a, b, kind) = (*a, *b, *kind);
                match kind {
                    Binary::Add | Binary::Sub => {
                        if let Some(ga) = slot(before, grads, a) {
                            for (x, y) in ga.data_mut().iter_mut().zip(gd) {
                                *x += y;
                            }
                        }
                        let sign = if kind == Binary::Add { 1.0 } else { -1.0 };
                        if let Some(gb) = slot(before, grads, b) {
                            for (x, y) in gb.data_mut().iter_mut().zip(gd) {
                                *x += sign * y;
                            }
                        }
                    }
                    Binary::Mul => {
                        let bvals = val(b).data().to_vec();
                        let avals = val(a).data().to_vec();
                        if let Some(ga) = slot(before, grads, a) {
                            for ((x, y), bv) in ga.data_mut().iter_mut().zip(gd).zip(&bvals) {
                                *x += y * bv;
                            }
                        }
                        if let Some(gb) = slot(before, grads, b) {
                            for ((x, y), av) in gb.data_mut().iter_mut().zip(gd).zip(&avals) {
                                *x += y * av;
                            }
                        }
                    }
                }
            }
            Op::Unary(kind, x) => {
                let xv = val(*x);
                let yv = &node.value;
                let kind = *kind;
                let deriv: Vec<f64> = xv
                    .data()
                    .iter()
                    .zip(yv.data())
                    .map(|(&a, &b)| kind.derivative(a, b))
                    .collect();
                if let Some(gx) = slot(before, grads, *x) {
                    for ((o, gi), d) in gx.data_mut().iter_mut().zip(gd).zip(deriv) {
                        *o += gi * d;
                    }
                }
            }
            Op::Scale(x, s) => {
                let s = *s;
                if let Some(gx) = slot(before, grads, *x) {
                    for (o, gi) in gx.data_mut().iter_mut().zip(gd) {
                        *o += s * gi;
                    }
                }
            }
            Op::AddScalar(x) => {
                if let Some(gx) = slot(before, grads, *x) {
                    for (o, gi) in gx.data_mut().iter_mut().zip(gd) {
                        *o += gi;
                    }
                }
            }
            Op::Sum(x) => {
                let gs = gd[0];
                if let Some(gx) = slot(before, grads, *x) {
                    for o in gx.data_mut() {
                        *o += gs;
                    }
                }
            }
            Op::Concat(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let n = val(p).len();
                    if let Some(gp) = slot(before, grads, p) {
                        for (o, gi) in gp.data_mut().iter_mut().zip(&gd[offset..offset + n]) {
                            *o += gi;
                        }
                    }
                    offset += n;
                }
            }
            Op::Slice(x, start) => {
                let start = *start;
                if let Some(gx) = slot(before, grads, *x) {
                    for (o, gi) in gx.data_mut()[start..start + gd.len()].iter_mut().zip(gd) {
                        *o += gi;
                    }
                }
            }
            Op::Stack(rows) => {
                let d = node.value.cols();
                for (r, &row) in rows.iter().enumerate() {
                    if let Some(gr) = slot(before, grads, row) {
                        for (o, gi) in gr.data_mut().iter_mut().zip(&gd[r * d..(r + 1) * d]) {
                            *o += gi;
                        }
                    }
                }
            }
            Op::ColumnAverage { src, cols, divisor } => {
                let n = val(*src).cols();
                let divisor = *divisor;
                if let Some(gs) = slot(before, grads, *src) {
                    let gsd = gs.data_mut();
                    for &c in cols {
                        for (i, gi) in gd.iter().enumerate() {
                            gsd[i * n + c] += gi / divisor;
                        }
                    }
                }
            }
            Op::Softmax(x) => {
                let s = node.value.data();
                let gs: f64 = gd.iter().zip(s).map(|(a, b)| a * b).sum();
                if let Some(gx) = slot(before, grads, *x) {
                    for ((o, gi), si) in gx.data_mut().iter_mut().zip(gd).zip(s) {
                        *o += si * (gi - gs);
                    }
                }
            }
            Op::LogSoftmax(x) => {
                let total: f64 = gd.iter().sum();
                let y = node.value.data();
                if let Some(gx) = slot(before, grads, *x) {
                    for ((o, gi), yi) in gx.data_mut().iter_mut().zip(gd).zip(y) {
                        *o += gi - yi.exp() * total;
                    }
                }
            }
            Op::Pick(x, idx) => {
                let idx = *idx;
                if let Some(gx) = slot(before, grads, *x) {
                    gx.data_mut()[idx] += gd[0];
                }
            }
        }
    }
}

fn slot<'a>(nodes: &[Node], grads: &'a mut [Option<Tensor>], v: Var) -> Option<&'a mut Tensor> {
    let node = &nodes[v.0];
    if !node.requires_grad {
        return None;
    }
    Some(grads[v.0].get_or_insert_with(|| Tensor::zeros(node.value.shape())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_of_squares_gradient_is_twice_input() {
        let mut g = Graph::new();
        let w = g.param(Tensor::matrix(2, 2, vec![1.0, -2.0, 0.5, 3.0]).unwrap());
        let sq = g.mul(w, w).unwrap();
        let root = g.sum(sq).unwrap();
        g.backward(root).unwrap();
        assert_eq!(g.grad(w).data(), &[2.0, -4.0, 1.0, 6.0]);
    }

    #[test]
    fn constants_get_zero_gradient() {
        let mut g = Graph::new();
        let c = g.constant(Tensor::vector(vec![1.0, 2.0]));
        let w = g.param(Tensor::vector(vec![3.0, 4.0]));
        let p = g.dot(c, w).unwrap();
        g.backward(p).unwrap();
        assert_eq!(g.grad(c).data(), &[0.0, 0.0]);
        assert_eq!(g.grad(w).data(), &[1.0, 2.0]);
    }

    #[test]
    fn non_scalar_root_is_rejected() {
        let mut g = Graph::new();
        let w = g.param(Tensor::vector(vec![1.0, 2.0]));
        assert!(matches!(g.backward(w), Err(Error::NonScalarRoot(_))));
    }

    #[test]
    fn shape_errors_are_reported() {
        let mut g = Graph::new();
        let a = g.param(Tensor::vector(vec![1.0, 2.0]));
        let b = g.param(Tensor::vector(vec![1.0, 2.0, 3.0]));
        assert!(matches!(g.add(a, b), Err(Error::Dimension { .. })));
        let m = g.param(Tensor::zeros(&[2, 3]));
        assert!(g.matvec(m, a).is_err());
        assert!(g.matvec(m, b).is_ok());
    }

    #[test]
    fn log_rejects_non_positive() {
        let mut g = Graph::new();
        let a = g.param(Tensor::vector(vec![1.0, 0.0]));
        assert!(matches!(g.log(a), Err(Error::Domain { .. })));
    }

    #[test]
    fn non_finite_is_caught_when_checking() {
        let mut g = Graph::with_checks(true);
        let a = g.param(Tensor::vector(vec![1000.0]));
        assert!(matches!(g.exp(a), Err(Error::NonFinite { op: "exp" })));
        let mut g = Graph::with_checks(false);
        let a = g.param(Tensor::vector(vec![1000.0]));
        assert!(g.exp(a).is_ok());
    }

    #[test]
    fn sigmoid_and_hadamard_values() {
        let mut g = Graph::new();
        let z = g.constant(Tensor::vector(vec![0.0]));
        let s = g.sigmoid(z).unwrap();
        assert_eq!(g.value(s).data(), &[0.5]);
        let a = g.constant(Tensor::vector(vec![1.0, 2.0, 3.0]));
        let b = g.constant(Tensor::vector(vec![0.0, 1.0, 0.0]));
        let h = g.mul(a, b).unwrap();
        assert_eq!(g.value(h).data(), &[0.0, 2.0, 0.0]);
    }

    #[test]
    fn repeated_backward_is_idempotent() {
        let mut g = Graph::new();
        let w = g.param(Tensor::vector(vec![0.3, -0.7]));
        let s = g.sigmoid(w).unwrap();
        let l = g.sum(s).unwrap();
        g.backward(l).unwrap();
        let first = g.grad(w);
        g.zero_grads();
        g.backward(l).unwrap();
        assert_eq!(first, g.grad(w));
    }

    #[test]
    fn diamond_accumulates_both_paths() {
        // y = sigmoid(x) * tanh(x); dy/dx = s'(x) t(x) + s(x) t'(x)
        let x0 = 0.4f64;
        let mut g = Graph::new();
        let x = g.param(Tensor::vector(vec![x0]));
        let s = g.sigmoid(x).unwrap();
        let t = g.tanh(x).unwrap();
        let y = g.mul(s, t).unwrap();
        let y = g.sum(y).unwrap();
        g.backward(y).unwrap();
        let sv = tensor::sigmoid(x0);
        let expected = sv * (1.0 - sv) * x0.tanh() + sv * (1.0 - x0.tanh().powi(2));
        assert!((g.grad(x).item() - expected).abs() < 1e-14);
    }
}
