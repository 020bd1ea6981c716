//! Minimal differentiable-computation kernel.
//!
//! Dense 64-bit arrays, feed-forward and LSTM-cell parameters, a reverse-mode
//! [`tape`], categorical and Beta sampling heads, Adam, finite-difference
//! gradient checks, and a versioned parameter checkpoint format. Small by
//! intent: everything the forecaster and the policy learner need and nothing
//! else.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub mod checkpoint;
pub mod fd;
pub mod sample;
pub mod special;
pub mod tape;

pub use tape::{Gradients, Tape, Var};

/// Row-major 64-bit array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumericArray {
    shape: Vec<usize>,
    values: Vec<f64>,
}

impl NumericArray {
    pub fn new(shape: Vec<usize>, values: Vec<f64>) -> Self {
        assert_eq!(
            shape.iter().product::<usize>(),
            values.len(),
            "value count must match shape"
        );
        NumericArray { shape, values }
    }

    pub fn vector(values: Vec<f64>) -> Self {
        let n = values.len();
        NumericArray { shape: vec![n], values }
    }

    pub fn matrix(rows: usize, cols: usize, values: Vec<f64>) -> Self {
        assert_eq!(rows * cols, values.len());
        NumericArray { shape: vec![rows, cols], values }
    }

    pub fn scalar(v: f64) -> Self {
        NumericArray { shape: vec![1], values: vec![v] }
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        NumericArray { shape, values: vec![0.0; n] }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn item(&self) -> f64 {
        assert_eq!(self.values.len(), 1, "item() needs a scalar");
        self.values[0]
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Fully connected layer: `y = W x + b` with `W` of shape (out, in).
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayerParams {
    pub weights: NumericArray,
    pub bias: NumericArray,
}

impl DenseLayerParams {
    pub fn output_dim(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn input_dim(&self) -> usize {
        self.weights.shape()[1]
    }

    /// Plain (untaped) forward pass.
    pub fn forward(&self, x: &NumericArray) -> Result<NumericArray> {
        let (out, inp) = (self.output_dim(), self.input_dim());
        if x.len() != inp {
            return Err(Error::contract(format!(
                "dense forward: input length {} but layer expects {inp}",
                x.len()
            )));
        }
        let w = self.weights.values();
        let xv = x.values();
        let mut y = self.bias.values().to_vec();
        for i in 0..out {
            let row = &w[i * inp..(i + 1) * inp];
            y[i] += dot(row, xv);
        }
        Ok(NumericArray::vector(y))
    }
}

/// One LSTM cell. Each gate weight has shape (hidden, hidden + input) and acts
/// on the concatenation `[h_prev, x_t]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmCellParams {
    pub w_f: NumericArray,
    pub w_i: NumericArray,
    pub w_c: NumericArray,
    pub w_o: NumericArray,
    pub b_f: NumericArray,
    pub b_i: NumericArray,
    pub b_c: NumericArray,
    pub b_o: NumericArray,
}

impl LstmCellParams {
    pub fn hidden_dim(&self) -> usize {
        self.w_f.shape()[0]
    }

    pub fn input_dim(&self) -> usize {
        self.w_f.shape()[1] - self.hidden_dim()
    }

    /// Plain forward step: returns `(h_t, c_t)`.
    pub fn step(
        &self,
        x_t: &NumericArray,
        h_prev: &NumericArray,
        c_prev: &NumericArray,
    ) -> Result<(NumericArray, NumericArray)> {
        let hidden = self.hidden_dim();
        if x_t.len() != self.input_dim() || h_prev.len() != hidden || c_prev.len() != hidden {
            return Err(Error::contract(format!(
                "lstm step: got x={}, h={}, c={} for cell (hidden={}, input={})",
                x_t.len(),
                h_prev.len(),
                c_prev.len(),
                hidden,
                self.input_dim()
            )));
        }
        let mut hx = Vec::with_capacity(hidden + x_t.len());
        hx.extend_from_slice(h_prev.values());
        hx.extend_from_slice(x_t.values());
        let gate = |w: &NumericArray, b: &NumericArray| -> Vec<f64> {
            let cols = hx.len();
            (0..hidden)
                .map(|i| dot(&w.values()[i * cols..(i + 1) * cols], &hx) + b.values()[i])
                .collect()
        };
        let f: Vec<f64> = gate(&self.w_f, &self.b_f).iter().map(|v| sigmoid(*v)).collect();
        let i: Vec<f64> = gate(&self.w_i, &self.b_i).iter().map(|v| sigmoid(*v)).collect();
        let ct: Vec<f64> = gate(&self.w_c, &self.b_c).iter().map(|v| v.tanh()).collect();
        let o: Vec<f64> = gate(&self.w_o, &self.b_o).iter().map(|v| sigmoid(*v)).collect();
        let c_t: Vec<f64> = (0..hidden)
            .map(|k| f[k] * c_prev.values()[k] + i[k] * ct[k])
            .collect();
        let h_t: Vec<f64> = (0..hidden).map(|k| o[k] * c_t[k].tanh()).collect();
        Ok((NumericArray::vector(h_t), NumericArray::vector(c_t)))
    }

    pub fn arrays(&self) -> [&NumericArray; 8] {
        [
            &self.w_f, &self.w_i, &self.w_c, &self.w_o, &self.b_f, &self.b_i, &self.b_c,
            &self.b_o,
        ]
    }

    pub fn arrays_mut(&mut self) -> [&mut NumericArray; 8] {
        [
            &mut self.w_f,
            &mut self.w_i,
            &mut self.w_c,
            &mut self.w_o,
            &mut self.b_f,
            &mut self.b_i,
            &mut self.b_c,
            &mut self.b_o,
        ]
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Uniform init scaled by 1/sqrt(fan-in); biases zero.
pub fn init_dense<R: Rng>(out: usize, inp: usize, rng: &mut R) -> DenseLayerParams {
    let bound = 1.0 / (inp as f64).sqrt();
    let values = (0..out * inp).map(|_| rng.gen_range(-bound..bound)).collect();
    DenseLayerParams {
        weights: NumericArray::matrix(out, inp, values),
        bias: NumericArray::zeros(vec![out]),
    }
}

/// Uniform init for all four gates; forget-gate bias starts at 1.0.
pub fn init_lstm<R: Rng>(hidden: usize, input: usize, rng: &mut R) -> LstmCellParams {
    let cols = hidden + input;
    let bound = 1.0 / (cols as f64).sqrt();
    let mut w = || {
        let values = (0..hidden * cols).map(|_| rng.gen_range(-bound..bound)).collect();
        NumericArray::matrix(hidden, cols, values)
    };
    LstmCellParams {
        w_f: w(),
        w_i: w(),
        w_c: w(),
        w_o: w(),
        b_f: NumericArray::new(vec![hidden], vec![1.0; hidden]),
        b_i: NumericArray::zeros(vec![hidden]),
        b_c: NumericArray::zeros(vec![hidden]),
        b_o: NumericArray::zeros(vec![hidden]),
    }
}

/// A dense layer registered on a tape: parameter leaves plus the affine step.
#[derive(Debug, Clone, Copy)]
pub struct TapedDense {
    pub w: Var,
    pub b: Var,
}

impl TapedDense {
    pub fn new(tape: &mut Tape, params: &DenseLayerParams) -> Self {
        TapedDense {
            w: tape.leaf(params.weights.clone()),
            b: tape.leaf(params.bias.clone()),
        }
    }

    pub fn forward(&self, tape: &mut Tape, x: Var) -> Var {
        let lin = tape.matvec(self.w, x);
        tape.add(lin, self.b)
    }

    /// Gradients in `[weights, bias]` order.
    pub fn grads(&self, tape: &Tape, grads: &Gradients) -> Vec<Vec<f64>> {
        vec![
            grads.grad(self.w, tape.value(self.w).len()),
            grads.grad(self.b, tape.value(self.b).len()),
        ]
    }
}

/// An LSTM cell registered on a tape.
#[derive(Debug, Clone, Copy)]
pub struct TapedLstm {
    pub w_f: Var,
    pub w_i: Var,
    pub w_c: Var,
    pub w_o: Var,
    pub b_f: Var,
    pub b_i: Var,
    pub b_c: Var,
    pub b_o: Var,
}

impl TapedLstm {
    pub fn new(tape: &mut Tape, p: &LstmCellParams) -> Self {
        TapedLstm {
            w_f: tape.leaf(p.w_f.clone()),
            w_i: tape.leaf(p.w_i.clone()),
            w_c: tape.leaf(p.w_c.clone()),
            w_o: tape.leaf(p.w_o.clone()),
            b_f: tape.leaf(p.b_f.clone()),
            b_i: tape.leaf(p.b_i.clone()),
            b_c: tape.leaf(p.b_c.clone()),
            b_o: tape.leaf(p.b_o.clone()),
        }
    }

    /// One gate step over `[h, x]`; returns `(h_t, c_t)`.
    pub fn step(&self, tape: &mut Tape, x: Var, h: Var, c: Var) -> (Var, Var) {
        let hx = tape.concat(h, x);
        let f_lin = tape.matvec(self.w_f, hx);
        let f_pre = tape.add(f_lin, self.b_f);
        let f = tape.sigmoid(f_pre);
        let i_lin = tape.matvec(self.w_i, hx);
        let i_pre = tape.add(i_lin, self.b_i);
        let i = tape.sigmoid(i_pre);
        let c_lin = tape.matvec(self.w_c, hx);
        let c_pre = tape.add(c_lin, self.b_c);
        let ctilde = tape.tanh(c_pre);
        let o_lin = tape.matvec(self.w_o, hx);
        let o_pre = tape.add(o_lin, self.b_o);
        let o = tape.sigmoid(o_pre);
        let fc = tape.mul(f, c);
        let ic = tape.mul(i, ctilde);
        let c_t = tape.add(fc, ic);
        let tc = tape.tanh(c_t);
        let h_t = tape.mul(o, tc);
        (h_t, c_t)
    }

    pub fn vars(&self) -> [Var; 8] {
        [
            self.w_f, self.w_i, self.w_c, self.w_o, self.b_f, self.b_i, self.b_c, self.b_o,
        ]
    }

    /// Gradients in the same order as [`LstmCellParams::arrays`].
    pub fn grads(&self, tape: &Tape, grads: &Gradients) -> Vec<Vec<f64>> {
        self.vars()
            .iter()
            .map(|v| grads.grad(*v, tape.value(*v).len()))
            .collect()
    }
}

/// Adam with bias-corrected moments.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub step_size: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    moments: Vec<(Vec<f64>, Vec<f64>)>,
}

/// What a single optimizer step did.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    Applied,
    /// A non-finite gradient was seen; parameters were left untouched.
    SkippedNonFinite,
}

impl OptimizerState {
    pub fn new(step_size: f64, params: &[&NumericArray]) -> Self {
        OptimizerState {
            step_size,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            moments: params
                .iter()
                .map(|p| (vec![0.0; p.len()], vec![0.0; p.len()]))
                .collect(),
        }
    }

    /// Apply one update. `grads` must align with `params` in order and shape.
    pub fn step(&mut self, params: &mut [&mut NumericArray], grads: &[Vec<f64>]) -> StepOutcome {
        assert_eq!(params.len(), self.moments.len(), "optimizer/params mismatch");
        assert_eq!(params.len(), grads.len(), "grads/params mismatch");
        for (p, g) in params.iter().zip(grads) {
            assert_eq!(p.len(), g.len(), "gradient shaped unlike its parameter");
        }
        if grads.iter().any(|g| g.iter().any(|v| !v.is_finite())) {
            return StepOutcome::SkippedNonFinite;
        }
        self.step += 1;
        let t = self.step as f64;
        let bc1 = 1.0 - self.beta1.powf(t);
        let bc2 = 1.0 - self.beta2.powf(t);
        for ((p, g), (m, v)) in params.iter_mut().zip(grads).zip(&mut self.moments) {
            for (k, pv) in p.values_mut().iter_mut().enumerate() {
                m[k] = self.beta1 * m[k] + (1.0 - self.beta1) * g[k];
                v[k] = self.beta2 * v[k] + (1.0 - self.beta2) * g[k] * g[k];
                let mhat = m[k] / bc1;
                let vhat = v[k] / bc2;
                *pv -= self.step_size * mhat / (vhat.sqrt() + self.epsilon);
            }
        }
        StepOutcome::Applied
    }
}
