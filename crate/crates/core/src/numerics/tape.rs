//! Reverse-mode differentiation over a fixed set of tensor primitives.
//!
//! A [`Tape`] records every primitive application together with the values
//! its adjoint needs. [`Tape::backward`] walks the record in reverse and
//! returns one adjoint per node.

use std::fmt;

use super::ops::{self, DistanceKind};
use super::tensor::Tensor2;
use crate::error::{CadError, Result};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// A primitive defined outside this module. `backward` receives the input
/// value, the output value and the output adjoint and returns the input
/// adjoint.
pub trait Primitive: Send + Sync {
    fn name(&self) -> &'static str;
    fn forward(&self, input: &Tensor2) -> Result<Tensor2>;
    fn backward(&self, input: &Tensor2, output: &Tensor2, grad_out: &Tensor2) -> Tensor2;
}

enum Op {
    Leaf,
    Constant,
    MatMul(Var, Var),
    AddRow(Var, Var),
    Add(Var, Var),
    Relu(Var),
    PairwiseDistance(Var, Var, DistanceKind),
    MinMaxInvert {
        d: Var,
        argmin: Vec<usize>,
        argmax: Vec<usize>,
    },
    RowNormalize(Var),
    SumRows(Var),
    MeanRows(Var),
    SoftmaxRows(Var),
    Contract(Var, Tensor2),
    SumSquares(Var),
    WeightedSum(Vec<(Var, f64)>),
    Custom(Var, Box<dyn Primitive>),
}

impl fmt::Debug for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Op::Leaf => "leaf",
            Op::Constant => "constant",
            Op::MatMul(..) => "matmul",
            Op::AddRow(..) => "add_row",
            Op::Add(..) => "add",
            Op::Relu(_) => "relu",
            Op::PairwiseDistance(..) => "pairwise_distance",
            Op::MinMaxInvert { .. } => "minmax_invert_rows",
            Op::RowNormalize(_) => "row_normalize",
            Op::SumRows(_) => "sum_rows",
            Op::MeanRows(_) => "mean_rows",
            Op::SoftmaxRows(_) => "softmax_rows",
            Op::Contract(..) => "contract",
            Op::SumSquares(_) => "sum_squares",
            Op::WeightedSum(_) => "weighted_sum",
            Op::Custom(_, p) => p.name(),
        };
        f.write_str(name)
    }
}

#[derive(Debug)]
struct Node {
    value: Tensor2,
    op: Op,
}

/// Single-writer record of one forward pass.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Adjoints produced by [`Tape::backward`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor2>>,
    shapes: Vec<(usize, usize)>,
}

impl Gradients {
    /// Adjoint of `v`; zeros when the output does not depend on `v`.
    pub fn wrt(&self, v: Var) -> Tensor2 {
        match &self.grads[v.0] {
            Some(g) => g.clone(),
            None => {
                let (r, c) = self.shapes[v.0];
                Tensor2::zeros(r, c)
            }
        }
    }

    pub fn take(&mut self, v: Var) -> Tensor2 {
        match self.grads[v.0].take() {
            Some(g) => g,
            None => {
                let (r, c) = self.shapes[v.0];
                Tensor2::zeros(r, c)
            }
        }
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor2 {
        &self.nodes[v.0].value
    }

    /// Scalar value of a `1 x 1` node.
    pub fn scalar(&self, v: Var) -> f64 {
        let t = self.value(v);
        debug_assert_eq!(t.shape(), (1, 1));
        t.values()[0]
    }

    fn push(&mut self, value: Tensor2, op: Op) -> Result<Var> {
        if !value.is_finite() {
            return Err(CadError::NonFinite(format!("output of {op:?}")));
        }
        self.nodes.push(Node { value, op });
        Ok(Var(self.nodes.len() - 1))
    }

    /// A differentiable parameter.
    pub fn leaf(&mut self, value: Tensor2) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
        });
        Var(self.nodes.len() - 1)
    }

    /// An input that receives no adjoint.
    pub fn constant(&mut self, value: Tensor2) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Constant,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = ops::matmul(self.value(a), self.value(b))?;
        self.push(v, Op::MatMul(a, b))
    }

    pub fn add_row(&mut self, x: Var, bias: Var) -> Result<Var> {
        let v = ops::add_row(self.value(x), self.value(bias))?;
        self.push(v, Op::AddRow(x, bias))
    }

    /// `x W + b`
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let xw = self.matmul(x, w)?;
        self.add_row(xw, b)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = ops::add(self.value(a), self.value(b))?;
        self.push(v, Op::Add(a, b))
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        let v = ops::relu(self.value(x));
        self.push(v, Op::Relu(x))
    }

    pub fn pairwise_distance(&mut self, f: Var, p: Var, kind: DistanceKind) -> Result<Var> {
        let v = ops::pairwise_distance(self.value(f), self.value(p), kind)?;
        self.push(v, Op::PairwiseDistance(f, p, kind))
    }

    pub fn minmax_invert_rows(&mut self, d: Var) -> Result<Var> {
        let (argmin, argmax) = ops::row_selectors(self.value(d));
        let v = ops::minmax_invert_rows(self.value(d));
        self.push(v, Op::MinMaxInvert { d, argmin, argmax })
    }

    pub fn row_normalize(&mut self, x: Var) -> Result<Var> {
        let v = ops::row_normalize(self.value(x))?;
        self.push(v, Op::RowNormalize(x))
    }

    pub fn sum_rows(&mut self, x: Var) -> Result<Var> {
        let v = ops::sum_rows(self.value(x));
        self.push(v, Op::SumRows(x))
    }

    pub fn mean_rows(&mut self, x: Var) -> Result<Var> {
        let v = ops::mean_rows(self.value(x));
        self.push(v, Op::MeanRows(x))
    }

    pub fn softmax_rows(&mut self, x: Var) -> Result<Var> {
        let v = ops::softmax_rows(self.value(x));
        self.push(v, Op::SoftmaxRows(x))
    }

    /// Scalar `sum(weights * x)`; turns a tensor-valued node into a scalar
    /// for gradient checks.
    pub fn contract(&mut self, x: Var, weights: Tensor2) -> Result<Var> {
        if weights.shape() != self.value(x).shape() {
            return Err(CadError::shape(
                "contract",
                format!("{:?} vs {:?}", self.value(x).shape(), weights.shape()),
            ));
        }
        let s: f64 = ops::dot(self.value(x).values(), weights.values());
        self.push(Tensor2::filled(1, 1, s), Op::Contract(x, weights))
    }

    /// Scalar `sum(x * x)`.
    pub fn sum_squares(&mut self, x: Var) -> Result<Var> {
        let xv = self.value(x);
        let s = ops::dot(xv.values(), xv.values());
        self.push(Tensor2::filled(1, 1, s), Op::SumSquares(x))
    }

    /// Scalar `sum_i k_i x_i` over `1 x 1` nodes.
    pub fn weighted_sum(&mut self, terms: &[(Var, f64)]) -> Result<Var> {
        let mut s = 0.0;
        for &(v, k) in terms {
            if self.value(v).shape() != (1, 1) {
                return Err(CadError::shape(
                    "weighted_sum",
                    format!("term has shape {:?}", self.value(v).shape()),
                ));
            }
            s += k * self.scalar(v);
        }
        self.push(Tensor2::filled(1, 1, s), Op::WeightedSum(terms.to_vec()))
    }

    pub fn custom(&mut self, x: Var, prim: Box<dyn Primitive>) -> Result<Var> {
        let v = prim.forward(self.value(x))?;
        self.push(v, Op::Custom(x, prim))
    }

    /// Propagates the adjoint of the scalar node `output` back to every node.
    pub fn backward(&self, output: Var) -> Result<Gradients> {
        if self.value(output).shape() != (1, 1) {
            return Err(CadError::shape(
                "backward",
                format!("output must be scalar, got {:?}", self.value(output).shape()),
            ));
        }
        let n = output.0 + 1;
        let mut grads: Vec<Option<Tensor2>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[output.0] = Some(Tensor2::filled(1, 1, 1.0));

        for i in (0..n).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Leaf | Op::Constant => {
                    grads[i] = Some(g);
                    continue;
                }
                Op::MatMul(a, b) => {
                    let ga = ops::matmul_nt(&g, self.value(*b));
                    let gb = ops::matmul_tn(self.value(*a), &g);
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *b, gb);
                }
                Op::AddRow(x, b) => {
                    let gb = ops::sum_rows(&g);
                    accumulate(&mut grads, *x, g);
                    accumulate(&mut grads, *b, gb);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *b, g.clone());
                    accumulate(&mut grads, *a, g);
                }
                Op::Relu(x) => {
                    let xv = self.value(*x);
                    let mut gx = g;
                    for (gv, &v) in gx.values_mut().iter_mut().zip(xv.values()) {
                        if v <= 0.0 {
                            *gv = 0.0;
                        }
                    }
                    accumulate(&mut grads, *x, gx);
                }
                Op::PairwiseDistance(f, p, kind) => {
                    let (gf, gp) =
                        pairwise_distance_backward(self.value(*f), self.value(*p), &node.value, &g, *kind);
                    accumulate(&mut grads, *f, gf);
                    accumulate(&mut grads, *p, gp);
                }
                Op::MinMaxInvert { d, argmin, argmax } => {
                    let gd = minmax_backward(self.value(*d), argmin, argmax, &g);
                    accumulate(&mut grads, *d, gd);
                }
                Op::RowNormalize(x) => {
                    let gx = row_normalize_backward(self.value(*x), &node.value, &g);
                    accumulate(&mut grads, *x, gx);
                }
                Op::SumRows(x) => {
                    let rows = self.value(*x).rows();
                    accumulate(&mut grads, *x, broadcast_rows(&g, rows, 1.0));
                }
                Op::MeanRows(x) => {
                    let rows = self.value(*x).rows();
                    accumulate(&mut grads, *x, broadcast_rows(&g, rows, 1.0 / rows as f64));
                }
                Op::SoftmaxRows(x) => {
                    let y = &node.value;
                    let mut gx = g;
                    for r in 0..y.rows() {
                        let yr = y.row(r);
                        let gr = gx.row_mut(r);
                        let s = ops::dot(gr, yr);
                        for (gv, &yv) in gr.iter_mut().zip(yr) {
                            *gv = yv * (*gv - s);
                        }
                    }
                    accumulate(&mut grads, *x, gx);
                }
                Op::Contract(x, w) => {
                    accumulate(&mut grads, *x, w.scale(g.values()[0]));
                }
                Op::SumSquares(x) => {
                    let gx = self.value(*x).scale(2.0 * g.values()[0]);
                    accumulate(&mut grads, *x, gx);
                }
                Op::WeightedSum(terms) => {
                    let gs = g.values()[0];
                    for &(v, k) in terms {
                        accumulate(&mut grads, v, Tensor2::filled(1, 1, k * gs));
                    }
                }
                Op::Custom(x, prim) => {
                    let gx = prim.backward(self.value(*x), &node.value, &g);
                    accumulate(&mut grads, *x, gx);
                }
            }
        }
        Ok(Gradients {
            grads,
            shapes: self.nodes.iter().map(|n| n.value.shape()).collect(),
        })
    }
}

fn accumulate(grads: &mut [Option<Tensor2>], v: Var, g: Tensor2) {
    match &mut grads[v.0] {
        Some(existing) => existing.add_scaled(&g, 1.0),
        slot @ None => *slot = Some(g),
    }
}

fn broadcast_rows(g: &Tensor2, rows: usize, k: f64) -> Tensor2 {
    let mut values = Vec::with_capacity(rows * g.cols());
    for _ in 0..rows {
        values.extend(g.values().iter().map(|v| v * k));
    }
    Tensor2::new(rows, g.cols(), values).expect("broadcast shape")
}

fn pairwise_distance_backward(
    f: &Tensor2,
    p: &Tensor2,
    dist: &Tensor2,
    g: &Tensor2,
    kind: DistanceKind,
) -> (Tensor2, Tensor2) {
    let mut gf = Tensor2::zeros(f.rows(), f.cols());
    let mut gp = Tensor2::zeros(p.rows(), p.cols());
    let dims = f.cols();
    for t in 0..f.rows() {
        let fr = f.row(t);
        for n in 0..p.rows() {
            let coef = match kind {
                DistanceKind::Euclidean => g.get(t, n) / dist.get(t, n),
                DistanceKind::SquaredEuclidean => 2.0 * g.get(t, n),
            };
            if coef == 0.0 {
                continue;
            }
            let pr = p.row(n);
            for k in 0..dims {
                let diff = coef * (fr[k] - pr[k]);
                gf.values_mut()[t * dims + k] += diff;
                gp.values_mut()[n * dims + k] -= diff;
            }
        }
    }
    (gf, gp)
}

fn minmax_backward(d: &Tensor2, argmin: &[usize], argmax: &[usize], g: &Tensor2) -> Tensor2 {
    let mut gd = Tensor2::zeros(d.rows(), d.cols());
    for r in 0..d.rows() {
        let row = d.row(r);
        let (lo_i, hi_i) = (argmin[r], argmax[r]);
        let lo = row[lo_i];
        let range = row[hi_i] - lo;
        if range <= 0.0 {
            // constant rows map to a constant; no gradient
            continue;
        }
        let gr = g.row(r);
        let out = gd.row_mut(r);
        let mut to_min = 0.0;
        let mut to_max = 0.0;
        for (n, (&dv, &gv)) in row.iter().zip(gr).enumerate() {
            let u = (dv - lo) / range;
            out[n] -= gv / range;
            to_min += gv * (1.0 - u) / range;
            to_max += gv * u / range;
        }
        out[lo_i] += to_min;
        out[hi_i] += to_max;
    }
    gd
}

fn row_normalize_backward(x: &Tensor2, y: &Tensor2, g: &Tensor2) -> Tensor2 {
    let mut gx = g.clone();
    for r in 0..x.rows() {
        let s: f64 = x.row(r).iter().sum();
        let inner = ops::dot(g.row(r), y.row(r));
        for v in gx.row_mut(r).iter_mut() {
            *v = (*v - inner) / s;
        }
    }
    gx
}
