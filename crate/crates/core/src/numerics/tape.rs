//! Reverse-mode automatic differentiation over a recorded op list.
//!
//! Nodes hold whole arrays rather than scalars, so a forward pass records a
//! few hundred nodes instead of tens of thousands. [`Tape::backward`] returns
//! exact reverse-mode derivatives of a scalar loss with respect to every
//! recorded node; callers read off the leaves they care about.

use super::special::{digamma, ln_beta, trigamma};
use super::NumericArray;
use crate::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Scale(usize, f64),
    AddConst(usize, f64),
    MatVec(usize, usize),
    Concat(usize, usize),
    Sigmoid(usize),
    Tanh(usize),
    Relu(usize),
    Softplus(usize),
    Exp(usize),
    Neg(usize),
    Sum(usize),
    Mean(usize),
    Pick(usize, usize),
    LogSoftmax(usize),
    Softmax(usize),
    MinScalar(usize, usize),
    ClampScalar(usize, f64, f64),
    BetaLogPdf { alpha: usize, beta: usize, x: f64 },
    BetaEntropy { alpha: usize, beta: usize },
}

struct Node {
    op: Op,
    value: NumericArray,
}

/// A Wengert list: ops are recorded as they execute.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Per-node gradients produced by [`Tape::backward`].
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    /// Gradient of the loss w.r.t. `v`; zeros if the node is unreachable.
    pub fn grad(&self, v: Var, len: usize) -> Vec<f64> {
        match &self.grads[v.0] {
            Some(g) => g.clone(),
            None => vec![0.0; len],
        }
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &NumericArray {
        &self.nodes[v.0].value
    }

    fn push(&mut self, op: Op, value: NumericArray) -> Var {
        self.nodes.push(Node { op, value });
        Var(self.nodes.len() - 1)
    }

    /// Record an input or parameter.
    pub fn leaf(&mut self, value: NumericArray) -> Var {
        self.push(Op::Leaf, value)
    }

    pub fn leaf_vector(&mut self, values: Vec<f64>) -> Var {
        self.leaf(NumericArray::vector(values))
    }

    pub fn leaf_scalar(&mut self, v: f64) -> Var {
        self.leaf(NumericArray::scalar(v))
    }

    fn binary_elementwise(&mut self, a: Var, b: Var, op: Op, f: impl Fn(f64, f64) -> f64) -> Var {
        let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        assert_eq!(va.len(), vb.len(), "elementwise op on mismatched lengths");
        let values = va
            .values()
            .iter()
            .zip(vb.values())
            .map(|(x, y)| f(*x, *y))
            .collect();
        let shape = va.shape().to_vec();
        self.push(op, NumericArray::new(shape, values))
    }

    fn unary(&mut self, a: Var, op: Op, f: impl Fn(f64) -> f64) -> Var {
        let va = &self.nodes[a.0].value;
        let values = va.values().iter().map(|x| f(*x)).collect();
        let shape = va.shape().to_vec();
        self.push(op, NumericArray::new(shape, values))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.binary_elementwise(a, b, Op::Add(a.0, b.0), |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.binary_elementwise(a, b, Op::Sub(a.0, b.0), |x, y| x - y)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.binary_elementwise(a, b, Op::Mul(a.0, b.0), |x, y| x * y)
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        self.unary(a, Op::Scale(a.0, c), |x| x * c)
    }

    pub fn add_const(&mut self, a: Var, c: f64) -> Var {
        self.unary(a, Op::AddConst(a.0, c), |x| x + c)
    }

    /// `w` of shape (out, in) times vector `x` of length in.
    pub fn matvec(&mut self, w: Var, x: Var) -> Var {
        let wv = &self.nodes[w.0].value;
        let xv = &self.nodes[x.0].value;
        assert_eq!(wv.shape().len(), 2, "matvec weight must be a matrix");
        let (out, inp) = (wv.shape()[0], wv.shape()[1]);
        assert_eq!(inp, xv.len(), "matvec dimension mismatch");
        let mut y = vec![0.0; out];
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = super::dot(&wv.values()[i * inp..(i + 1) * inp], xv.values());
        }
        self.push(Op::MatVec(w.0, x.0), NumericArray::vector(y))
    }

    pub fn concat(&mut self, a: Var, b: Var) -> Var {
        let mut values = self.nodes[a.0].value.values().to_vec();
        values.extend_from_slice(self.nodes[b.0].value.values());
        self.push(Op::Concat(a.0, b.0), NumericArray::vector(values))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(a, Op::Sigmoid(a.0), super::sigmoid)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(a, Op::Tanh(a.0), f64::tanh)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.unary(a, Op::Relu(a.0), |x| x.max(0.0))
    }

    /// Numerically stable `ln(1 + e^x)`.
    pub fn softplus(&mut self, a: Var) -> Var {
        self.unary(a, Op::Softplus(a.0), |x| x.max(0.0) + (-x.abs()).exp().ln_1p())
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.unary(a, Op::Exp(a.0), f64::exp)
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.unary(a, Op::Neg(a.0), |x| -x)
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.nodes[a.0].value.values().iter().sum();
        self.push(Op::Sum(a.0), NumericArray::scalar(s))
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let v = &self.nodes[a.0].value;
        let s: f64 = v.values().iter().sum();
        let n = v.len().max(1) as f64;
        self.push(Op::Mean(a.0), NumericArray::scalar(s / n))
    }

    /// Select one component as a scalar.
    pub fn pick(&mut self, a: Var, index: usize) -> Var {
        let v = self.nodes[a.0].value.values()[index];
        self.push(Op::Pick(a.0, index), NumericArray::scalar(v))
    }

    pub fn log_softmax(&mut self, a: Var) -> Var {
        let v = self.nodes[a.0].value.values();
        let out = log_softmax_slice(v);
        self.push(Op::LogSoftmax(a.0), NumericArray::vector(out))
    }

    pub fn softmax(&mut self, a: Var) -> Var {
        let ls = log_softmax_slice(self.nodes[a.0].value.values());
        let p = ls.iter().map(|l| l.exp()).collect();
        self.push(Op::Softmax(a.0), NumericArray::vector(p))
    }

    /// Elementwise minimum; gradient follows the smaller branch (ties: first).
    pub fn min(&mut self, a: Var, b: Var) -> Var {
        self.binary_elementwise(a, b, Op::MinScalar(a.0, b.0), f64::min)
    }

    /// Clamp into [lo, hi]; gradient passes only strictly inside.
    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Var {
        self.unary(a, Op::ClampScalar(a.0, lo, hi), |x| x.clamp(lo, hi))
    }

    /// Log-density of Beta(alpha, beta) at fixed `x`, as a scalar node.
    /// `alpha` and `beta` are scalar nodes.
    pub fn beta_log_pdf(&mut self, alpha: Var, beta: Var, x: f64) -> Var {
        let a = self.nodes[alpha.0].value.item();
        let b = self.nodes[beta.0].value.item();
        let v = (a - 1.0) * x.ln() + (b - 1.0) * (1.0 - x).ln() - ln_beta(a, b);
        self.push(Op::BetaLogPdf { alpha: alpha.0, beta: beta.0, x }, NumericArray::scalar(v))
    }

    /// Differential entropy of Beta(alpha, beta) as a scalar node.
    pub fn beta_entropy(&mut self, alpha: Var, beta: Var) -> Var {
        let a = self.nodes[alpha.0].value.item();
        let b = self.nodes[beta.0].value.item();
        let v = ln_beta(a, b) - (a - 1.0) * digamma(a) - (b - 1.0) * digamma(b)
            + (a + b - 2.0) * digamma(a + b);
        self.push(Op::BetaEntropy { alpha: alpha.0, beta: beta.0 }, NumericArray::scalar(v))
    }

    /// Reverse pass from a scalar loss node.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if self.nodes[loss.0].value.len() != 1 {
            return Err(Error::contract("backward requires a scalar loss"));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![1.0]);

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            // Reinsert so callers can read interior gradients too.
            let node = &self.nodes[idx];
            match &node.op {
                Op::Leaf => {}
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, &g, 1.0);
                    accumulate(&mut grads, *b, &g, 1.0);
                }
                Op::Sub(a, b) => {
                    accumulate(&mut grads, *a, &g, 1.0);
                    accumulate(&mut grads, *b, &g, -1.0);
                }
                Op::Mul(a, b) => {
                    let va = self.nodes[*a].value.values();
                    let vb = self.nodes[*b].value.values();
                    accumulate_fn(&mut grads, *a, g.len(), |k| g[k] * vb[k]);
                    accumulate_fn(&mut grads, *b, g.len(), |k| g[k] * va[k]);
                }
                Op::Scale(a, c) => accumulate(&mut grads, *a, &g, *c),
                Op::AddConst(a, _) => accumulate(&mut grads, *a, &g, 1.0),
                Op::MatVec(w, x) => {
                    let wv = &self.nodes[*w].value;
                    let xv = self.nodes[*x].value.values();
                    let (out, inp) = (wv.shape()[0], wv.shape()[1]);
                    let gw = grads[*w].get_or_insert_with(|| vec![0.0; out * inp]);
                    for i in 0..out {
                        let gi = g[i];
                        let row = &mut gw[i * inp..(i + 1) * inp];
                        for (j, r) in row.iter_mut().enumerate() {
                            *r += gi * xv[j];
                        }
                    }
                    let wvals = wv.values();
                    let gx = grads[*x].get_or_insert_with(|| vec![0.0; inp]);
                    for i in 0..out {
                        let gi = g[i];
                        let row = &wvals[i * inp..(i + 1) * inp];
                        for (j, gxj) in gx.iter_mut().enumerate() {
                            *gxj += gi * row[j];
                        }
                    }
                }
                Op::Concat(a, b) => {
                    let la = self.nodes[*a].value.len();
                    accumulate_fn(&mut grads, *a, la, |k| g[k]);
                    let lb = self.nodes[*b].value.len();
                    accumulate_fn(&mut grads, *b, lb, |k| g[la + k]);
                }
                Op::Sigmoid(a) => {
                    let y = node.value.values();
                    accumulate_fn(&mut grads, *a, g.len(), |k| g[k] * y[k] * (1.0 - y[k]));
                }
                Op::Tanh(a) => {
                    let y = node.value.values();
                    accumulate_fn(&mut grads, *a, g.len(), |k| g[k] * (1.0 - y[k] * y[k]));
                }
                Op::Relu(a) => {
                    let x = self.nodes[*a].value.values();
                    accumulate_fn(&mut grads, *a, g.len(), |k| {
                        if x[k] > 0.0 {
                            g[k]
                        } else {
                            0.0
                        }
                    });
                }
                Op::Softplus(a) => {
                    let x = self.nodes[*a].value.values();
                    accumulate_fn(&mut grads, *a, g.len(), |k| g[k] * super::sigmoid(x[k]));
                }
                Op::Exp(a) => {
                    let y = node.value.values();
                    accumulate_fn(&mut grads, *a, g.len(), |k| g[k] * y[k]);
                }
                Op::Neg(a) => accumulate(&mut grads, *a, &g, -1.0),
                Op::Sum(a) => {
                    let n = self.nodes[*a].value.len();
                    accumulate_fn(&mut grads, *a, n, |_| g[0]);
                }
                Op::Mean(a) => {
                    let n = self.nodes[*a].value.len();
                    let c = g[0] / n.max(1) as f64;
                    accumulate_fn(&mut grads, *a, n, |_| c);
                }
                Op::Pick(a, index) => {
                    let n = self.nodes[*a].value.len();
                    let idx = *index;
                    accumulate_fn(&mut grads, *a, n, |k| if k == idx { g[0] } else { 0.0 });
                }
                Op::LogSoftmax(a) => {
                    let y = node.value.values();
                    let gsum: f64 = g.iter().sum();
                    accumulate_fn(&mut grads, *a, g.len(), |k| g[k] - y[k].exp() * gsum);
                }
                Op::Softmax(a) => {
                    let p = node.value.values();
                    let dotgp: f64 = g.iter().zip(p).map(|(gi, pi)| gi * pi).sum();
                    accumulate_fn(&mut grads, *a, g.len(), |k| p[k] * (g[k] - dotgp));
                }
                Op::MinScalar(a, b) => {
                    let va = self.nodes[*a].value.values();
                    let vb = self.nodes[*b].value.values();
                    accumulate_fn(&mut grads, *a, g.len(), |k| {
                        if va[k] <= vb[k] {
                            g[k]
                        } else {
                            0.0
                        }
                    });
                    accumulate_fn(&mut grads, *b, g.len(), |k| {
                        if va[k] <= vb[k] {
                            0.0
                        } else {
                            g[k]
                        }
                    });
                }
                Op::ClampScalar(a, lo, hi) => {
                    let x = self.nodes[*a].value.values();
                    let (lo, hi) = (*lo, *hi);
                    accumulate_fn(&mut grads, *a, g.len(), |k| {
                        if x[k] > lo && x[k] < hi {
                            g[k]
                        } else {
                            0.0
                        }
                    });
                }
                Op::BetaLogPdf { alpha, beta, x } => {
                    let a = self.nodes[*alpha].value.item();
                    let b = self.nodes[*beta].value.item();
                    let dab = digamma(a + b);
                    let da = x.ln() - digamma(a) + dab;
                    let db = (1.0 - x).ln() - digamma(b) + dab;
                    accumulate(&mut grads, *alpha, &[g[0] * da], 1.0);
                    accumulate(&mut grads, *beta, &[g[0] * db], 1.0);
                }
                Op::BetaEntropy { alpha, beta } => {
                    let a = self.nodes[*alpha].value.item();
                    let b = self.nodes[*beta].value.item();
                    let tab = trigamma(a + b);
                    let da = -(a - 1.0) * trigamma(a) + (a + b - 2.0) * tab;
                    let db = -(b - 1.0) * trigamma(b) + (a + b - 2.0) * tab;
                    accumulate(&mut grads, *alpha, &[g[0] * da], 1.0);
                    accumulate(&mut grads, *beta, &[g[0] * db], 1.0);
                }
            }
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads })
    }
}

fn accumulate(grads: &mut [Option<Vec<f64>>], target: usize, g: &[f64], scale: f64) {
    let slot = grads[target].get_or_insert_with(|| vec![0.0; g.len()]);
    for (s, gv) in slot.iter_mut().zip(g) {
        *s += scale * gv;
    }
}

fn accumulate_fn(
    grads: &mut [Option<Vec<f64>>],
    target: usize,
    len: usize,
    f: impl Fn(usize) -> f64,
) {
    let slot = grads[target].get_or_insert_with(|| vec![0.0; len]);
    for (k, s) in slot.iter_mut().enumerate() {
        *s += f(k);
    }
}

pub(crate) fn log_softmax_slice(v: &[f64]) -> Vec<f64> {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        // All options masked; treat as uniform over nothing (callers prevent this).
        return vec![f64::NEG_INFINITY; v.len()];
    }
    let lse = m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln();
    v.iter().map(|x| x - lse).collect()
}

#[cfg(test)]
mod tests {
    use super::super::fd::central_diff;
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn square_gradient_at_three() {
        let mut tape = Tape::new();
        let x = tape.leaf_scalar(3.0);
        let y = tape.mul(x, x);
        let grads = tape.backward(y).unwrap();
        assert_eq!(grads.grad(x, 1), vec![6.0]);
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let mut tape = Tape::new();
        let x = tape.leaf_vector(vec![1.0, 2.0]);
        assert!(tape.backward(x).is_err());
    }

    fn fd_check<F>(n_params: usize, build: F, seed: u64)
    where
        F: Fn(&mut Tape, &[f64]) -> (Vec<Var>, Var),
    {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..20 {
            let theta: Vec<f64> = (0..n_params).map(|_| rng.gen_range(-0.9..0.9)).collect();
            let mut tape = Tape::new();
            let (leaves, loss) = build(&mut tape, &theta);
            let grads = tape.backward(loss).unwrap();
            let mut analytic = Vec::new();
            for v in &leaves {
                analytic.extend(grads.grad(*v, tape.value(*v).len()));
            }
            let numeric = central_diff(
                |t| {
                    let mut tp = Tape::new();
                    let (_, l) = build(&mut tp, t);
                    tp.value(l).item()
                },
                &theta,
                1e-5,
            );
            for (a, n) in analytic.iter().zip(&numeric) {
                let denom = n.abs().max(1e-7);
                assert!(
                    (a - n).abs() / denom < 1e-4,
                    "gradient mismatch: analytic {a} vs numeric {n}"
                );
            }
        }
    }

    #[test]
    fn dense_net_matches_finite_differences() {
        // 2-in, 3-hidden, loss = mean(tanh(Wx+b)^2) with x fixed.
        fd_check(
            3 * 2 + 3,
            |tape, theta| {
                let w = tape.leaf(NumericArray::matrix(3, 2, theta[..6].to_vec()));
                let b = tape.leaf_vector(theta[6..9].to_vec());
                let x = tape.leaf_vector(vec![0.3, -0.7]);
                let lin = tape.matvec(w, x);
                let pre = tape.add(lin, b);
                let act = tape.tanh(pre);
                let sq = tape.mul(act, act);
                let loss = tape.mean(sq);
                (vec![w, b], loss)
            },
            17,
        );
    }

    #[test]
    fn softmax_pick_and_entropy_match_finite_differences() {
        fd_check(
            4,
            |tape, theta| {
                let z = tape.leaf_vector(theta.to_vec());
                let logp = tape.log_softmax(z);
                let picked = tape.pick(logp, 2);
                let p = tape.softmax(z);
                let plogp = tape.mul(p, logp);
                let negent = tape.sum(plogp);
                let both = tape.add(picked, negent);
                (vec![z], both)
            },
            23,
        );
    }

    #[test]
    fn beta_ops_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..20 {
            let a0: f64 = rng.gen_range(0.5..4.0);
            let b0: f64 = rng.gen_range(0.5..4.0);
            let x: f64 = rng.gen_range(0.05..0.95);
            let build = |tape: &mut Tape, t: &[f64]| {
                let a = tape.leaf_scalar(t[0]);
                let b = tape.leaf_scalar(t[1]);
                let lp = tape.beta_log_pdf(a, b, x);
                let h = tape.beta_entropy(a, b);
                let hs = tape.scale(h, 0.5);
                let loss = tape.add(lp, hs);
                (vec![a, b], loss)
            };
            let theta = vec![a0, b0];
            let mut tape = Tape::new();
            let (leaves, loss) = build(&mut tape, &theta);
            let grads = tape.backward(loss).unwrap();
            let analytic = [grads.grad(leaves[0], 1)[0], grads.grad(leaves[1], 1)[0]];
            let numeric = central_diff(
                |t| {
                    let mut tp = Tape::new();
                    let (_, l) = build(&mut tp, t);
                    tp.value(l).item()
                },
                &theta,
                1e-6,
            );
            for (a, n) in analytic.iter().zip(&numeric) {
                assert!(
                    (a - n).abs() / n.abs().max(1e-7) < 1e-4,
                    "beta grad mismatch: {a} vs {n}"
                );
            }
        }
    }

    #[test]
    fn min_clamp_exp_softplus_match_finite_differences() {
        fd_check(
            2,
            |tape, theta| {
                let a = tape.leaf_scalar(theta[0] + 1.3);
                let b = tape.leaf_scalar(theta[1] - 0.4);
                let e = tape.exp(a);
                let c = tape.clamp(e, 0.8, 1.2);
                let m = tape.min(c, b);
                let sp = tape.softplus(m);
                (vec![a, b], sp)
            },
            41,
        );
    }

    #[test]
    fn lstm_cell_matches_finite_differences_over_steps() {
        // 1-unit cell unrolled 3 steps; parameters are the 8 gate arrays.
        let inputs = [0.4, -0.3, 0.8];
        fd_check(
            12,
            move |tape, theta| {
                let m = |tape: &mut Tape, s: &[f64]| tape.leaf(NumericArray::matrix(1, 2, s.to_vec()));
                let w_f = m(tape, &theta[0..2]);
                let w_i = m(tape, &theta[2..4]);
                let w_c = m(tape, &theta[4..6]);
                let w_o = m(tape, &theta[6..8]);
                let b_f = tape.leaf_vector(vec![theta[8]]);
                let b_i = tape.leaf_vector(vec![theta[9]]);
                let b_c = tape.leaf_vector(vec![theta[10]]);
                let b_o = tape.leaf_vector(vec![theta[11]]);
                let mut h = tape.leaf_vector(vec![0.0]);
                let mut c = tape.leaf_vector(vec![0.0]);
                for xv in inputs {
                    let x = tape.leaf_vector(vec![xv]);
                    let hx = tape.concat(h, x);
                    let f_lin = tape.matvec(w_f, hx);
                    let f_pre = tape.add(f_lin, b_f);
                    let f = tape.sigmoid(f_pre);
                    let i_lin = tape.matvec(w_i, hx);
                    let i_pre = tape.add(i_lin, b_i);
                    let i = tape.sigmoid(i_pre);
                    let c_lin = tape.matvec(w_c, hx);
                    let c_pre = tape.add(c_lin, b_c);
                    let ctl = tape.tanh(c_pre);
                    let o_lin = tape.matvec(w_o, hx);
                    let o_pre = tape.add(o_lin, b_o);
                    let o = tape.sigmoid(o_pre);
                    let fc = tape.mul(f, c);
                    let ic = tape.mul(i, ctl);
                    c = tape.add(fc, ic);
                    let tc = tape.tanh(c);
                    h = tape.mul(o, tc);
                }
                let sq = tape.mul(h, h);
                let loss = tape.mean(sq);
                (
                    vec![w_f, w_i, w_c, w_o, b_f, b_i, b_c, b_o],
                    loss,
                )
            },
            59,
        );
    }

    #[test]
    fn taped_forward_agrees_with_plain_eval() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let layer = super::super::init_dense(4, 3, &mut rng);
        let x = NumericArray::vector(vec![0.2, -0.5, 0.9]);
        let plain = layer.forward(&x).unwrap();
        let mut tape = Tape::new();
        let w = tape.leaf(layer.weights.clone());
        let b = tape.leaf(layer.bias.clone());
        let xv = tape.leaf(x);
        let lin = tape.matvec(w, xv);
        let y = tape.add(lin, b);
        assert_eq!(tape.value(y).values(), plain.values());
    }

    #[test]
    fn masked_log_softmax_ignores_neg_infinity() {
        let ls = log_softmax_slice(&[1.0, f64::NEG_INFINITY, 1.0]);
        assert_relative_eq!(ls[0], (0.5f64).ln(), max_relative = 1e-12);
        assert_eq!(ls[1], f64::NEG_INFINITY);
    }
}
