//! Eagerly-evaluated expression graph with reverse-mode differentiation.
//!
//! A [`Graph`] is built fresh for each sentence, values are computed at
//! node-construction time, and a single [`Graph::backward`] call walks the
//! nodes in reverse insertion order, accumulating parameter gradients into
//! the owning [`ParamSet`].

use crate::diffcore::{ParamId, ParamSet};
use crate::error::{Error, Result};

/// Index of a node inside its [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeRef(usize);

#[derive(Debug)]
enum Op {
    /// Constant vector; gradients stop here.
    Input,
    /// Row `row` of an embedding matrix.
    Lookup { param: ParamId, row: usize },
    /// sum_t W_t * x_t + b, with any number of terms.
    Affine {
        terms: Vec<(ParamId, NodeRef)>,
        bias: ParamId,
    },
    Tanh { x: NodeRef },
    Sigmoid { x: NodeRef },
    Concat { xs: Vec<NodeRef> },
    Add { a: NodeRef, b: NodeRef },
    Sub { a: NodeRef, b: NodeRef },
    /// Elementwise product.
    Mul { a: NodeRef, b: NodeRef },
    /// 1 - x, elementwise (coupled LSTM input gate).
    OneMinus { x: NodeRef },
    /// Elementwise product with a constant mask (dropout).
    Mask { x: NodeRef, mask: Vec<f64> },
    /// x + c, elementwise with a scalar constant (c lives in the value).
    AddConst { x: NodeRef },
    /// Single component of a vector, as a 1-dim node.
    Pick { x: NodeRef, index: usize },
    Softmax { x: NodeRef },
    /// -log softmax(x)[target]; caches the probabilities for backward.
    NllLoss {
        x: NodeRef,
        target: usize,
        probs: Vec<f64>,
    },
    /// max(0, x) on a scalar; zero gradient in the flat region.
    Hinge { x: NodeRef },
    /// Elementwise sum of same-length vectors.
    Sum { xs: Vec<NodeRef> },
}

#[derive(Debug)]
struct Node {
    value: Vec<f64>,
    grad: Vec<f64>,
    op: Op,
}

/// Expression graph over one sentence. Values are eager; gradients flow on
/// [`Graph::backward`].
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

impl Graph {
    pub fn new() -> Self {
        Graph { nodes: Vec::new() }
    }

    /// Number of nodes built so far.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, n: NodeRef) -> &[f64] {
        &self.nodes[n.0].value
    }

    /// Value of a 1-dim node.
    pub fn scalar(&self, n: NodeRef) -> f64 {
        debug_assert_eq!(self.nodes[n.0].value.len(), 1);
        self.nodes[n.0].value[0]
    }

    pub fn dim(&self, n: NodeRef) -> usize {
        self.nodes[n.0].value.len()
    }

    /// Gradient buffer of a node after [`Graph::backward`].
    pub fn node_grad(&self, n: NodeRef) -> &[f64] {
        &self.nodes[n.0].grad
    }

    fn push(&mut self, value: Vec<f64>, op: Op) -> NodeRef {
        let n = value.len();
        self.nodes.push(Node {
            value,
            grad: vec![0.0; n],
            op,
        });
        NodeRef(self.nodes.len() - 1)
    }

    pub fn input(&mut self, values: Vec<f64>) -> NodeRef {
        self.push(values, Op::Input)
    }

    /// Embedding lookup: row `row` of the matrix parameter `param`.
    pub fn lookup(&mut self, params: &ParamSet, param: ParamId, row: usize) -> Result<NodeRef> {
        let p = params.get(param);
        if p.shape.len() != 2 {
            return Err(Error::ShapeMismatch {
                node: format!("lookup({})", p.name),
                detail: format!("expected a matrix, got shape {:?}", p.shape),
            });
        }
        if row >= p.rows() {
            return Err(Error::ShapeMismatch {
                node: format!("lookup({})", p.name),
                detail: format!("row {} out of range for {} rows", row, p.rows()),
            });
        }
        let value = p.row(row).to_vec();
        Ok(self.push(value, Op::Lookup { param, row }))
    }

    /// Multi-term affine map: sum_t W_t * x_t + b.
    pub fn affine(
        &mut self,
        params: &ParamSet,
        terms: &[(ParamId, NodeRef)],
        bias: ParamId,
    ) -> Result<NodeRef> {
        if terms.is_empty() {
            return Err(Error::invalid_argument("affine needs at least one term"));
        }
        let b = params.get(bias);
        if b.shape.len() != 1 {
            return Err(Error::ShapeMismatch {
                node: format!("affine bias {}", b.name),
                detail: format!("expected a vector, got shape {:?}", b.shape),
            });
        }
        let out = b.len();
        let mut value = b.values.clone();
        for &(w_id, x) in terms {
            let w = params.get(w_id);
            let xv = &self.nodes[x.0].value;
            if w.shape.len() != 2 || w.rows() != out || w.cols() != xv.len() {
                return Err(Error::ShapeMismatch {
                    node: format!("affine weight {}", w.name),
                    detail: format!("want [{} x {}], got shape {:?}", out, xv.len(), w.shape),
                });
            }
            let cols = w.cols();
            for i in 0..out {
                let row = &w.values[i * cols..(i + 1) * cols];
                let mut acc = 0.0;
                for j in 0..cols {
                    acc += row[j] * xv[j];
                }
                value[i] += acc;
            }
        }
        Ok(self.push(
            value,
            Op::Affine {
                terms: terms.to_vec(),
                bias,
            },
        ))
    }

    pub fn tanh(&mut self, x: NodeRef) -> NodeRef {
        let value = self.nodes[x.0].value.iter().map(|v| v.tanh()).collect();
        self.push(value, Op::Tanh { x })
    }

    pub fn sigmoid(&mut self, x: NodeRef) -> NodeRef {
        let value = self.nodes[x.0]
            .value
            .iter()
            .map(|v| 1.0 / (1.0 + (-v).exp()))
            .collect();
        self.push(value, Op::Sigmoid { x })
    }

    pub fn concat(&mut self, xs: &[NodeRef]) -> Result<NodeRef> {
        if xs.is_empty() {
            return Err(Error::invalid_argument("concat needs at least one input"));
        }
        let mut value = Vec::new();
        for &x in xs {
            value.extend_from_slice(&self.nodes[x.0].value);
        }
        Ok(self.push(value, Op::Concat { xs: xs.to_vec() }))
    }

    fn check_same_dim(&self, what: &str, a: NodeRef, b: NodeRef) -> Result<()> {
        let (da, db) = (self.dim(a), self.dim(b));
        if da != db {
            return Err(Error::ShapeMismatch {
                node: what.to_string(),
                detail: format!("operand dims {da} and {db} differ"),
            });
        }
        Ok(())
    }

    pub fn add(&mut self, a: NodeRef, b: NodeRef) -> Result<NodeRef> {
        self.check_same_dim("add", a, b)?;
        let value = self.nodes[a.0]
            .value
            .iter()
            .zip(&self.nodes[b.0].value)
            .map(|(x, y)| x + y)
            .collect();
        Ok(self.push(value, Op::Add { a, b }))
    }

    pub fn sub(&mut self, a: NodeRef, b: NodeRef) -> Result<NodeRef> {
        self.check_same_dim("sub", a, b)?;
        let value = self.nodes[a.0]
            .value
            .iter()
            .zip(&self.nodes[b.0].value)
            .map(|(x, y)| x - y)
            .collect();
        Ok(self.push(value, Op::Sub { a, b }))
    }

    pub fn mul(&mut self, a: NodeRef, b: NodeRef) -> Result<NodeRef> {
        self.check_same_dim("mul", a, b)?;
        let value = self.nodes[a.0]
            .value
            .iter()
            .zip(&self.nodes[b.0].value)
            .map(|(x, y)| x * y)
            .collect();
        Ok(self.push(value, Op::Mul { a, b }))
    }

    pub fn one_minus(&mut self, x: NodeRef) -> NodeRef {
        let value = self.nodes[x.0].value.iter().map(|v| 1.0 - v).collect();
        self.push(value, Op::OneMinus { x })
    }

    pub fn mask(&mut self, x: NodeRef, mask: Vec<f64>) -> Result<NodeRef> {
        if mask.len() != self.dim(x) {
            return Err(Error::ShapeMismatch {
                node: "mask".to_string(),
                detail: format!("mask dim {} vs input dim {}", mask.len(), self.dim(x)),
            });
        }
        let value = self.nodes[x.0]
            .value
            .iter()
            .zip(&mask)
            .map(|(v, m)| v * m)
            .collect();
        Ok(self.push(value, Op::Mask { x, mask }))
    }

    pub fn add_const(&mut self, x: NodeRef, c: f64) -> NodeRef {
        let value = self.nodes[x.0].value.iter().map(|v| v + c).collect();
        self.push(value, Op::AddConst { x })
    }

    pub fn pick(&mut self, x: NodeRef, index: usize) -> Result<NodeRef> {
        if index >= self.dim(x) {
            return Err(Error::ShapeMismatch {
                node: "pick".to_string(),
                detail: format!("index {} out of range for dim {}", index, self.dim(x)),
            });
        }
        let value = vec![self.nodes[x.0].value[index]];
        Ok(self.push(value, Op::Pick { x, index }))
    }

    pub fn softmax(&mut self, x: NodeRef) -> NodeRef {
        let value = stable_softmax(&self.nodes[x.0].value);
        self.push(value, Op::Softmax { x })
    }

    /// Negative log-likelihood of `target` under softmax(x).
    pub fn nll_loss(&mut self, x: NodeRef, target: usize) -> Result<NodeRef> {
        if target >= self.dim(x) {
            return Err(Error::ShapeMismatch {
                node: "nll_loss".to_string(),
                detail: format!("target {} out of range for dim {}", target, self.dim(x)),
            });
        }
        let probs = stable_softmax(&self.nodes[x.0].value);
        let loss = -(probs[target].max(f64::MIN_POSITIVE)).ln();
        Ok(self.push(vec![loss], Op::NllLoss { x, target, probs }))
    }

    /// max(0, x) on a scalar node.
    pub fn hinge(&mut self, x: NodeRef) -> Result<NodeRef> {
        if self.dim(x) != 1 {
            return Err(Error::ShapeMismatch {
                node: "hinge".to_string(),
                detail: format!("expected a scalar, got dim {}", self.dim(x)),
            });
        }
        let value = vec![self.nodes[x.0].value[0].max(0.0)];
        Ok(self.push(value, Op::Hinge { x }))
    }

    /// Elementwise sum of same-length vectors.
    pub fn sum(&mut self, xs: &[NodeRef]) -> Result<NodeRef> {
        if xs.is_empty() {
            return Err(Error::invalid_argument("sum needs at least one input"));
        }
        let dim = self.dim(xs[0]);
        for &x in xs {
            if self.dim(x) != dim {
                return Err(Error::ShapeMismatch {
                    node: "sum".to_string(),
                    detail: format!("input dims {} and {} differ", dim, self.dim(x)),
                });
            }
        }
        let mut value = vec![0.0; dim];
        for &x in xs {
            for (acc, v) in value.iter_mut().zip(&self.nodes[x.0].value) {
                *acc += v;
            }
        }
        Ok(self.push(value, Op::Sum { xs: xs.to_vec() }))
    }

    /// Reverse pass from a scalar loss node. Parameter gradients accumulate
    /// into `params` (on top of whatever is already there); node gradients
    /// are reset at the start of each call.
    pub fn backward(&mut self, loss: NodeRef, params: &mut ParamSet) -> Result<()> {
        if self.dim(loss) != 1 {
            return Err(Error::ShapeMismatch {
                node: "backward".to_string(),
                detail: format!("loss must be a scalar, got dim {}", self.dim(loss)),
            });
        }
        for node in &mut self.nodes {
            node.grad.iter_mut().for_each(|g| *g = 0.0);
        }
        self.nodes[loss.0].grad[0] = 1.0;

        for i in (0..=loss.0).rev() {
            // Detach this node's grad and op so the arms can freely mutate
            // earlier nodes; both are restored at the end of the iteration.
            let grad = std::mem::take(&mut self.nodes[i].grad);
            if grad.iter().all(|&g| g == 0.0) {
                self.nodes[i].grad = grad;
                continue;
            }
            let op = std::mem::replace(&mut self.nodes[i].op, Op::Input);
            match &op {
                Op::Input => {}
                Op::Lookup { param, row } => {
                    let p = params.get_mut(*param);
                    let cols = p.cols();
                    let dst = &mut p.grad[row * cols..(row + 1) * cols];
                    for (d, g) in dst.iter_mut().zip(&grad) {
                        *d += g;
                    }
                }
                Op::Affine { terms, bias } => {
                    for (d, g) in params.get_mut(*bias).grad.iter_mut().zip(&grad) {
                        *d += g;
                    }
                    for &(w_id, x) in terms {
                        // dW += g * x^T, done against a detached copy of x's
                        // value so the param borrow stays clean.
                        let xv = std::mem::take(&mut self.nodes[x.0].value);
                        {
                            let w = params.get_mut(w_id);
                            let cols = w.cols();
                            for (r, g) in grad.iter().enumerate() {
                                if *g == 0.0 {
                                    continue;
                                }
                                let wrow = &mut w.grad[r * cols..(r + 1) * cols];
                                for (d, xj) in wrow.iter_mut().zip(&xv) {
                                    *d += g * xj;
                                }
                            }
                        }
                        self.nodes[x.0].value = xv;
                        // dx += W^T g.
                        let w = params.get(w_id);
                        let cols = w.cols();
                        let mut xgrad = std::mem::take(&mut self.nodes[x.0].grad);
                        for (r, g) in grad.iter().enumerate() {
                            if *g == 0.0 {
                                continue;
                            }
                            let wrow = &w.values[r * cols..(r + 1) * cols];
                            for (d, wj) in xgrad.iter_mut().zip(wrow) {
                                *d += g * wj;
                            }
                        }
                        self.nodes[x.0].grad = xgrad;
                    }
                }
                Op::Tanh { x } => {
                    let y = std::mem::take(&mut self.nodes[i].value);
                    for ((d, g), yv) in self.nodes[x.0].grad.iter_mut().zip(&grad).zip(&y) {
                        *d += g * (1.0 - yv * yv);
                    }
                    self.nodes[i].value = y;
                }
                Op::Sigmoid { x } => {
                    let y = std::mem::take(&mut self.nodes[i].value);
                    for ((d, g), yv) in self.nodes[x.0].grad.iter_mut().zip(&grad).zip(&y) {
                        *d += g * yv * (1.0 - yv);
                    }
                    self.nodes[i].value = y;
                }
                Op::Concat { xs } => {
                    let mut offset = 0;
                    for &x in xs {
                        let dim = self.nodes[x.0].value.len();
                        for (d, g) in self.nodes[x.0]
                            .grad
                            .iter_mut()
                            .zip(&grad[offset..offset + dim])
                        {
                            *d += g;
                        }
                        offset += dim;
                    }
                }
                Op::Add { a, b } => {
                    for (d, g) in self.nodes[a.0].grad.iter_mut().zip(&grad) {
                        *d += g;
                    }
                    for (d, g) in self.nodes[b.0].grad.iter_mut().zip(&grad) {
                        *d += g;
                    }
                }
                Op::Sub { a, b } => {
                    for (d, g) in self.nodes[a.0].grad.iter_mut().zip(&grad) {
                        *d += g;
                    }
                    for (d, g) in self.nodes[b.0].grad.iter_mut().zip(&grad) {
                        *d -= g;
                    }
                }
                Op::Mul { a, b } if a == b => {
                    // d/dx (x*x) = 2x; the generic path would detach the
                    // same value buffer twice.
                    let xv = std::mem::take(&mut self.nodes[a.0].value);
                    for ((d, g), xj) in self.nodes[a.0].grad.iter_mut().zip(&grad).zip(&xv) {
                        *d += 2.0 * g * xj;
                    }
                    self.nodes[a.0].value = xv;
                }
                Op::Mul { a, b } => {
                    let av = std::mem::take(&mut self.nodes[a.0].value);
                    let bv = std::mem::take(&mut self.nodes[b.0].value);
                    for ((d, g), bvj) in self.nodes[a.0].grad.iter_mut().zip(&grad).zip(&bv) {
                        *d += g * bvj;
                    }
                    for ((d, g), avj) in self.nodes[b.0].grad.iter_mut().zip(&grad).zip(&av) {
                        *d += g * avj;
                    }
                    self.nodes[a.0].value = av;
                    self.nodes[b.0].value = bv;
                }
                Op::OneMinus { x } => {
                    for (d, g) in self.nodes[x.0].grad.iter_mut().zip(&grad) {
                        *d -= g;
                    }
                }
                Op::Mask { x, mask } => {
                    for ((d, g), m) in self.nodes[x.0].grad.iter_mut().zip(&grad).zip(mask) {
                        *d += g * m;
                    }
                }
                Op::AddConst { x } => {
                    for (d, g) in self.nodes[x.0].grad.iter_mut().zip(&grad) {
                        *d += g;
                    }
                }
                Op::Pick { x, index } => {
                    self.nodes[x.0].grad[*index] += grad[0];
                }
                Op::Softmax { x } => {
                    let y = std::mem::take(&mut self.nodes[i].value);
                    let dot: f64 = grad.iter().zip(&y).map(|(g, yv)| g * yv).sum();
                    for ((d, g), yv) in self.nodes[x.0].grad.iter_mut().zip(&grad).zip(&y) {
                        *d += yv * (g - dot);
                    }
                    self.nodes[i].value = y;
                }
                Op::NllLoss { x, target, probs } => {
                    let g = grad[0];
                    for (j, (d, p)) in self.nodes[x.0].grad.iter_mut().zip(probs).enumerate() {
                        let ind = if j == *target { 1.0 } else { 0.0 };
                        *d += g * (p - ind);
                    }
                }
                Op::Hinge { x } => {
                    if self.nodes[x.0].value[0] > 0.0 {
                        self.nodes[x.0].grad[0] += grad[0];
                    }
                }
                Op::Sum { xs } => {
                    for &x in xs {
                        for (d, g) in self.nodes[x.0].grad.iter_mut().zip(&grad) {
                            *d += g;
                        }
                    }
                }
            }
            self.nodes[i].op = op;
            self.nodes[i].grad = grad;
        }
        Ok(())
    }
}

fn stable_softmax(x: &[f64]) -> Vec<f64> {
    let max = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = x.iter().map(|v| (v - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}
