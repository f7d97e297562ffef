//! Minimal differentiable-computation engine.
//!
//! Parameter storage, an eagerly-evaluated expression graph with
//! reverse-mode gradients, the Adagrad optimizer and inverted dropout.
//! Everything runs on `f64`; the networks here are small enough that
//! precision is worth more than speed.

mod graph;

pub use graph::{Graph, NodeRef};

use rand::Rng;

use crate::error::{Error, Result};

/// Identifier of a parameter inside a [`ParamSet`].
pub type ParamId = usize;

/// A named, dense parameter tensor with its Adagrad accumulator.
#[derive(Debug, Clone)]
pub struct Parameter {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
    /// Current gradient, accumulated by backward passes and consumed by
    /// the optimizer step.
    pub grad: Vec<f64>,
    /// Sum of squared (L2-augmented) gradients seen so far.
    pub grad_accumulator: Vec<f64>,
    /// Frozen parameters receive no optimizer updates.
    pub tunable: bool,
}

impl Parameter {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Number of columns for a matrix, or the full length for a vector.
    pub fn cols(&self) -> usize {
        *self.shape.last().unwrap_or(&0)
    }

    pub fn rows(&self) -> usize {
        if self.shape.len() >= 2 {
            self.shape[0]
        } else {
            1
        }
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let c = self.cols();
        &self.values[r * c..(r + 1) * c]
    }
}

/// Adagrad settings: learning rate, L2 weight and the stability constant
/// added under the square root.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerState {
    pub alpha: f64,
    pub lambda: f64,
    pub epsilon: f64,
}

impl Default for OptimizerState {
    fn default() -> Self {
        OptimizerState {
            alpha: 0.01,
            lambda: 1e-8,
            epsilon: 1e-8,
        }
    }
}

impl OptimizerState {
    pub fn new(alpha: f64, lambda: f64, epsilon: f64) -> Result<Self> {
        if alpha <= 0.0 {
            return Err(Error::invalid_argument("learning rate alpha must be > 0"));
        }
        if lambda < 0.0 {
            return Err(Error::invalid_argument("L2 weight lambda must be >= 0"));
        }
        if epsilon <= 0.0 {
            return Err(Error::invalid_argument("epsilon must be > 0"));
        }
        Ok(OptimizerState {
            alpha,
            lambda,
            epsilon,
        })
    }
}

/// All parameters of a model, in stable insertion order.
#[derive(Debug, Clone, Default)]
pub struct ParamSet {
    params: Vec<Parameter>,
    by_name: std::collections::HashMap<String, ParamId>,
}

impl ParamSet {
    pub fn new() -> Self {
        ParamSet::default()
    }

    /// Registers a parameter with explicit values. Names must be unique.
    pub fn add(
        &mut self,
        name: impl Into<String>,
        shape: &[usize],
        values: Vec<f64>,
        tunable: bool,
    ) -> Result<ParamId> {
        let name = name.into();
        let n: usize = shape.iter().product();
        if n != values.len() {
            return Err(Error::ShapeMismatch {
                node: name,
                detail: format!("shape {:?} wants {} values, got {}", shape, n, values.len()),
            });
        }
        if self.by_name.contains_key(&name) {
            return Err(Error::invalid_argument(format!(
                "duplicate parameter name `{name}`"
            )));
        }
        let id = self.params.len();
        self.by_name.insert(name.clone(), id);
        self.params.push(Parameter {
            name,
            shape: shape.to_vec(),
            grad: vec![0.0; n],
            grad_accumulator: vec![0.0; n],
            values,
            tunable,
        });
        Ok(id)
    }

    /// Registers a parameter initialized uniformly in (-r, r) with
    /// r = sqrt(6 / (fan_in + fan_out)).
    pub fn add_uniform(
        &mut self,
        name: impl Into<String>,
        shape: &[usize],
        fan_in: usize,
        fan_out: usize,
        tunable: bool,
        rng: &mut impl Rng,
    ) -> Result<ParamId> {
        let n: usize = shape.iter().product();
        let values = init_uniform(fan_in, fan_out, n, rng)?;
        self.add(name, shape, values, tunable)
    }

    /// Registers a zero-initialized parameter (biases).
    pub fn add_zeros(
        &mut self,
        name: impl Into<String>,
        shape: &[usize],
        tunable: bool,
    ) -> Result<ParamId> {
        let n: usize = shape.iter().product();
        self.add(name, shape, vec![0.0; n], tunable)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Parameter {
        &self.params[id]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Parameter {
        &mut self.params[id]
    }

    pub fn lookup(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied()
    }

    /// Parameters in registration order.
    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Parameter)> {
        self.params.iter().enumerate()
    }

    /// Mutable variant of [`ParamSet::iter`].
    pub fn iter_mut(&mut self) -> impl Iterator<Item = (ParamId, &mut Parameter)> {
        self.params.iter_mut().enumerate()
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.grad.iter_mut().for_each(|g| *g = 0.0);
        }
    }

    /// One Adagrad step over every tunable parameter entry:
    /// g' = g + lambda * theta; accumulator += g'^2;
    /// theta -= alpha * g' / sqrt(accumulator + epsilon).
    /// Gradients are cleared afterwards; frozen parameters are untouched.
    pub fn adagrad_step(&mut self, opt: &OptimizerState) {
        for p in &mut self.params {
            if !p.tunable {
                p.grad.iter_mut().for_each(|g| *g = 0.0);
                continue;
            }
            for i in 0..p.values.len() {
                let g = p.grad[i] + opt.lambda * p.values[i];
                if g == 0.0 {
                    // No gradient and no decay: nothing moves, and the
                    // accumulator stays put.
                    continue;
                }
                p.grad_accumulator[i] += g * g;
                p.values[i] -= opt.alpha * g / (p.grad_accumulator[i] + opt.epsilon).sqrt();
            }
            p.grad.iter_mut().for_each(|g| *g = 0.0);
        }
    }
}

/// Glorot-style uniform initializer: draws `n` samples from (-r, r) with
/// r = sqrt(6 / (fan_in + fan_out)).
pub fn init_uniform(
    fan_in: usize,
    fan_out: usize,
    n: usize,
    rng: &mut impl Rng,
) -> Result<Vec<f64>> {
    if fan_in == 0 || fan_out == 0 {
        return Err(Error::invalid_argument(
            "init_uniform: fan_in and fan_out must be >= 1",
        ));
    }
    let r = uniform_bound(fan_in, fan_out);
    Ok((0..n).map(|_| rng.gen_range(-r..r)).collect())
}

/// The bound r = sqrt(6 / (fan_in + fan_out)).
pub fn uniform_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// Inverted dropout mask: in training mode each entry is 0 with
/// probability `p` and 1/(1-p) otherwise, so the expectation is 1 and
/// evaluation needs no rescaling. In evaluation mode the mask is all ones.
pub fn dropout_mask(
    dim: usize,
    p: f64,
    rng: &mut impl Rng,
    training: bool,
) -> Result<Vec<f64>> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::invalid_argument(format!(
            "dropout rate must be in [0, 1), got {p}"
        )));
    }
    if !training || p == 0.0 {
        return Ok(vec![1.0; dim]);
    }
    let keep = 1.0 / (1.0 - p);
    Ok((0..dim)
        .map(|_| if rng.gen::<f64>() < p { 0.0 } else { keep })
        .collect())
}

/// Worst relative disagreement between the gradients stored in `params`
/// and central finite differences of `f`, over every entry of every
/// parameter. The caller runs the forward and backward pass first; `f`
/// must recompute the same scalar loss from the parameter values alone
/// (fresh graph, identical inputs and noise). Denominators are floored
/// at 1e-7 so near-zero pairs compare absolutely.
pub fn max_grad_error(
    params: &mut ParamSet,
    f: &mut dyn FnMut(&ParamSet) -> Result<f64>,
    eps: f64,
) -> Result<f64> {
    if eps <= 0.0 || !eps.is_finite() {
        return Err(Error::invalid_argument(format!(
            "max_grad_error: eps must be positive, got {eps}"
        )));
    }
    let analytic: Vec<Vec<f64>> = params.iter().map(|(_, p)| p.grad.clone()).collect();
    let ids: Vec<ParamId> = params.iter().map(|(id, _)| id).collect();
    let mut worst = 0.0f64;
    for (k, &id) in ids.iter().enumerate() {
        for j in 0..params.get(id).len() {
            let old = params.get(id).values[j];
            params.get_mut(id).values[j] = old + eps;
            let up = f(params)?;
            params.get_mut(id).values[j] = old - eps;
            let um = f(params)?;
            params.get_mut(id).values[j] = old;
            let fd = (up - um) / (2.0 * eps);
            let an = analytic[k][j];
            let denom = fd.abs().max(an.abs()).max(1e-7);
            worst = worst.max((fd - an).abs() / denom);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn init_uniform_bound_50_50() {
        let r = uniform_bound(50, 50);
        assert!((r - (6.0f64 / 100.0).sqrt()).abs() < 1e-12);
        let mut g = rng(1);
        let v = init_uniform(50, 50, 10_000, &mut g).unwrap();
        assert!(v.iter().all(|x| x.abs() < r));
    }

    #[test]
    fn init_uniform_bound_3_3_is_one() {
        assert!((uniform_bound(3, 3) - 1.0).abs() < 1e-12);
        let mut g = rng(2);
        let v = init_uniform(3, 3, 1000, &mut g).unwrap();
        assert!(v.iter().all(|x| x.abs() < 1.0));
    }

    #[test]
    fn init_uniform_deterministic() {
        let a = init_uniform(2, 2, 4, &mut rng(42)).unwrap();
        let b = init_uniform(2, 2, 4, &mut rng(42)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn init_uniform_zero_fan_errors() {
        assert!(init_uniform(0, 3, 4, &mut rng(0)).is_err());
        assert!(init_uniform(3, 0, 4, &mut rng(0)).is_err());
    }

    #[test]
    fn adagrad_first_step() {
        // theta=1, g=1, lambda=0, alpha=0.01: first step divides by |g|.
        let mut ps = ParamSet::new();
        let id = ps.add("w", &[1], vec![1.0], true).unwrap();
        ps.get_mut(id).grad[0] = 1.0;
        let opt = OptimizerState::new(0.01, 0.0, 1e-300).unwrap();
        ps.adagrad_step(&opt);
        assert!((ps.get(id).values[0] - 0.99).abs() < 1e-9);
        assert_eq!(ps.get(id).grad[0], 0.0);
    }

    #[test]
    fn adagrad_second_identical_step_shrinks_by_sqrt2() {
        let mut ps = ParamSet::new();
        let id = ps.add("w", &[1], vec![0.0], true).unwrap();
        let opt = OptimizerState::new(0.01, 0.0, 1e-300).unwrap();
        ps.get_mut(id).grad[0] = 1.0;
        ps.adagrad_step(&opt);
        let after_first = ps.get(id).values[0];
        ps.get_mut(id).grad[0] = 1.0;
        ps.adagrad_step(&opt);
        let second_step = after_first - ps.get(id).values[0];
        assert!((second_step - 0.01 / 2.0f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn adagrad_frozen_untouched() {
        let mut ps = ParamSet::new();
        let id = ps.add("frozen", &[1], vec![2.0], false).unwrap();
        ps.get_mut(id).grad[0] = 5.0;
        ps.adagrad_step(&OptimizerState::default());
        assert_eq!(ps.get(id).values[0], 2.0);
        assert_eq!(ps.get(id).grad[0], 0.0);
    }

    #[test]
    fn adagrad_zero_grad_zero_lambda_is_noop() {
        let mut ps = ParamSet::new();
        let id = ps.add("w", &[3], vec![1.0, -2.0, 0.5], true).unwrap();
        let opt = OptimizerState::new(0.01, 0.0, 1e-8).unwrap();
        ps.adagrad_step(&opt);
        assert_eq!(ps.get(id).values, vec![1.0, -2.0, 0.5]);
        assert_eq!(ps.get(id).grad_accumulator, vec![0.0; 3]);
    }

    #[test]
    fn adagrad_accumulator_monotone() {
        let mut ps = ParamSet::new();
        let id = ps.add("w", &[2], vec![0.3, -0.4], true).unwrap();
        let opt = OptimizerState::default();
        let mut prev = ps.get(id).grad_accumulator.clone();
        let mut g = rng(7);
        for _ in 0..20 {
            ps.get_mut(id).grad[0] = g.gen_range(-1.0..1.0);
            ps.get_mut(id).grad[1] = g.gen_range(-1.0..1.0);
            ps.adagrad_step(&opt);
            let cur = ps.get(id).grad_accumulator.clone();
            assert!(cur.iter().zip(&prev).all(|(c, p)| c >= p));
            prev = cur;
        }
    }

    #[test]
    fn dropout_eval_is_all_ones() {
        let m = dropout_mask(8, 0.9, &mut rng(3), false).unwrap();
        assert_eq!(m, vec![1.0; 8]);
    }

    #[test]
    fn dropout_zero_rate_is_all_ones() {
        let m = dropout_mask(8, 0.0, &mut rng(3), true).unwrap();
        assert_eq!(m, vec![1.0; 8]);
    }

    #[test]
    fn dropout_rate_one_errors() {
        assert!(dropout_mask(8, 1.0, &mut rng(3), true).is_err());
        assert!(dropout_mask(8, -0.1, &mut rng(3), true).is_err());
    }

    #[test]
    fn dropout_zero_fraction_concentrates() {
        let m = dropout_mask(10_000, 0.2, &mut rng(11), true).unwrap();
        let zeros = m.iter().filter(|&&x| x == 0.0).count() as f64 / 10_000.0;
        assert!((zeros - 0.2).abs() < 0.02, "zero fraction {zeros}");
        let keep = 1.0 / 0.8;
        assert!(m.iter().all(|&x| x == 0.0 || (x - keep).abs() < 1e-12));
    }

    #[test]
    fn duplicate_parameter_name_rejected() {
        let mut ps = ParamSet::new();
        ps.add("w", &[1], vec![0.0], true).unwrap();
        assert!(ps.add("w", &[1], vec![0.0], true).is_err());
    }

    #[test]
    fn max_grad_error_accepts_backward_and_flags_corruption() {
        let mut params = ParamSet::new();
        let mut init = rng(7);
        let w = params.add_uniform("w", &[2, 3], 3, 2, true, &mut init).unwrap();
        let b = params.add_zeros("b", &[2], true).unwrap();
        let mut run = |ps: &ParamSet| -> Result<f64> {
            let mut g = Graph::new();
            let x = g.input(vec![0.3, -0.7, 0.5]);
            let a = g.affine(ps, &[(w, x)], b)?;
            let t = g.tanh(a);
            let l = g.nll_loss(t, 0)?;
            Ok(g.scalar(l))
        };

        let mut g = Graph::new();
        let x = g.input(vec![0.3, -0.7, 0.5]);
        let a = g.affine(&params, &[(w, x)], b).unwrap();
        let t = g.tanh(a);
        let l = g.nll_loss(t, 0).unwrap();
        g.backward(l, &mut params).unwrap();

        let err = max_grad_error(&mut params, &mut run, 1e-5).unwrap();
        assert!(err < 1e-4, "relative error {err}");

        params.get_mut(w).grad[0] += 0.5;
        let err = max_grad_error(&mut params, &mut run, 1e-5).unwrap();
        assert!(err > 1e-2, "corrupted gradient must surface, got {err}");

        assert!(max_grad_error(&mut params, &mut run, 0.0).is_err());
    }
}
