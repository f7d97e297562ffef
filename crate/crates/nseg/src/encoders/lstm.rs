//! One step of the coupled-gate LSTM used by both recurrent encoders.
//!
//! The input gate is tied to the forget gate (i = 1 - f) and there are no
//! peephole connections, so each step needs three affine maps over the
//! concatenated [x; h_prev]:
//!
//!   f   = sigmoid(W_f [x; h] + b_f)
//!   o   = sigmoid(W_o [x; h] + b_o)
//!   c~  = tanh(W_c [x; h] + b_c)
//!   c_t = f * c_prev + (1 - f) * c~
//!   h_t = o * tanh(c_t)

use super::LstmHandles;
use crate::diffcore::{Graph, NodeRef, ParamSet};
use crate::error::Result;

/// Extends the graph with one LSTM step and returns `(h_t, c_t)`.
pub fn lstm_cell(
    g: &mut Graph,
    params: &ParamSet,
    w: &LstmHandles,
    x: NodeRef,
    h_prev: NodeRef,
    c_prev: NodeRef,
) -> Result<(NodeRef, NodeRef)> {
    let xh = g.concat(&[x, h_prev])?;
    let f_pre = g.affine(params, &[(w.f_w, xh)], w.f_b)?;
    let f = g.sigmoid(f_pre);
    let o_pre = g.affine(params, &[(w.o_w, xh)], w.o_b)?;
    let o = g.sigmoid(o_pre);
    let c_pre = g.affine(params, &[(w.c_w, xh)], w.c_b)?;
    let c_tilde = g.tanh(c_pre);
    let i = g.one_minus(f);
    let kept = g.mul(f, c_prev)?;
    let written = g.mul(i, c_tilde)?;
    let c_t = g.add(kept, written)?;
    let c_squashed = g.tanh(c_t);
    let h_t = g.mul(o, c_squashed)?;
    Ok((h_t, c_t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffcore::{OptimizerState, ParamSet};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Registers one direction's worth of gate parameters.
    fn gates(ps: &mut ParamSet, in_dim: usize, hidden: usize, rng: Option<&mut ChaCha8Rng>) -> LstmHandles {
        let cols = in_dim + hidden;
        let mk = |ps: &mut ParamSet, name: &str, rng: Option<&mut ChaCha8Rng>| match rng {
            Some(rng) => ps.add_uniform(name, &[hidden, cols], cols, hidden, true, rng).unwrap(),
            None => ps.add_zeros(name, &[hidden, cols], true).unwrap(),
        };
        // Sharing one rng across the three weights needs reborrows.
        let mut rng = rng;
        let f_w = mk(ps, "f.w", rng.as_deref_mut());
        let f_b = ps.add_zeros("f.b", &[hidden], true).unwrap();
        let o_w = mk(ps, "o.w", rng.as_deref_mut());
        let o_b = ps.add_zeros("o.b", &[hidden], true).unwrap();
        let c_w = mk(ps, "c.w", rng.as_deref_mut());
        let c_b = ps.add_zeros("c.b", &[hidden], true).unwrap();
        LstmHandles { f_w, f_b, o_w, o_b, c_w, c_b }
    }

    #[test]
    fn zero_parameters_give_half_gates() {
        let mut ps = ParamSet::new();
        let w = gates(&mut ps, 2, 3, None);
        let mut g = Graph::new();
        let x = g.input(vec![0.3, -0.7]);
        let h0 = g.input(vec![0.0; 3]);
        let c0 = g.input(vec![0.4, -1.0, 2.0]);
        let (h, c) = lstm_cell(&mut g, &ps, &w, x, h0, c0).unwrap();
        // f = o = 0.5 and c~ = 0, so c_t = c_prev / 2.
        for (got, prev) in g.value(c).iter().zip([0.4, -1.0, 2.0]) {
            assert!((got - prev / 2.0).abs() < 1e-12);
        }
        for (got, prev) in g.value(h).iter().zip([0.4, -1.0, 2.0]) {
            assert!((got - 0.5 * (prev / 2.0_f64).tanh()).abs() < 1e-12);
        }
    }

    #[test]
    fn saturated_forget_gate_suppresses_writing() {
        // A huge forget bias drives f to 1, so i = 1 - f vanishes and the
        // cell ignores the candidate entirely.
        let mut ps = ParamSet::new();
        let w = gates(&mut ps, 1, 1, None);
        ps.get_mut(w.f_b).values[0] = 50.0;
        ps.get_mut(w.c_b).values[0] = 10.0;
        let mut g = Graph::new();
        let x = g.input(vec![1.0]);
        let h0 = g.input(vec![0.0]);
        let c0 = g.input(vec![0.0]);
        let (_, c) = lstm_cell(&mut g, &ps, &w, x, h0, c0).unwrap();
        assert!(g.value(c)[0].abs() < 1e-12);
    }

    #[test]
    fn gate_coupling_means_gains_trade_off() {
        // With c_prev = 1 and candidate = -1 (b_c very negative), the cell
        // value is f - (1 - f) = 2f - 1 for any f.
        let mut ps = ParamSet::new();
        let w = gates(&mut ps, 1, 1, None);
        ps.get_mut(w.f_b).values[0] = 0.7;
        ps.get_mut(w.c_b).values[0] = -50.0;
        let mut g = Graph::new();
        let x = g.input(vec![0.0]);
        let h0 = g.input(vec![0.0]);
        let c0 = g.input(vec![1.0]);
        let (_, c) = lstm_cell(&mut g, &ps, &w, x, h0, c0).unwrap();
        let f = 1.0 / (1.0 + (-0.7_f64).exp());
        assert!((g.value(c)[0] - (2.0 * f - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn chained_cells_backpropagate_to_all_gates() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut ps = ParamSet::new();
        let w = gates(&mut ps, 2, 3, Some(&mut rng));
        let build = |ps: &ParamSet| {
            let mut g = Graph::new();
            let h0 = g.input(vec![0.0; 3]);
            let c0 = g.input(vec![0.0; 3]);
            let x1 = g.input(vec![0.5, -0.25]);
            let x2 = g.input(vec![-1.5, 0.75]);
            let (h1, c1) = lstm_cell(&mut g, ps, &w, x1, h0, c0).unwrap();
            let (h2, _) = lstm_cell(&mut g, ps, &w, x2, h1, c1).unwrap();
            let p0 = g.pick(h2, 0).unwrap();
            let p1 = g.pick(h2, 1).unwrap();
            let p2 = g.pick(h2, 2).unwrap();
            let s01 = g.add(p0, p1).unwrap();
            let loss = g.add(s01, p2).unwrap();
            (g, loss)
        };
        let (mut g, loss) = build(&ps);
        g.backward(loss, &mut ps).unwrap();

        // Finite differences on every tunable entry.
        let eps = 1e-5;
        for id in 0..ps.len() {
            for k in 0..ps.get(id).len() {
                let analytic = ps.get(id).grad[k];
                let orig = ps.get(id).values[k];
                ps.get_mut(id).values[k] = orig + eps;
                let (gp, lp) = build(&ps);
                let up = gp.scalar(lp);
                ps.get_mut(id).values[k] = orig - eps;
                let (gm, lm) = build(&ps);
                let down = gm.scalar(lm);
                ps.get_mut(id).values[k] = orig;
                let numeric = (up - down) / (2.0 * eps);
                let denom = analytic.abs().max(numeric.abs()).max(1e-7);
                assert!(
                    (analytic - numeric).abs() / denom < 1e-4,
                    "param {id} entry {k}: analytic {analytic} vs numeric {numeric}"
                );
            }
        }
        // The optimizer consumes these gradients without touching shapes.
        ps.adagrad_step(&OptimizerState::default());
    }
}
