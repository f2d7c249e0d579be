//! Single-layer LSTM with backpropagation through time.
//!
//! Gate layout inside the stacked `4H` rows is `[input, forget, candidate,
//! output]`:
//!
//! ```text
//! z = W x_t + U h_{t-1} + b
//! i = σ(z_i)   f = σ(z_f)   g = tanh(z_g)   o = σ(z_o)
//! c_t = f ⊙ c_{t-1} + i ⊙ g
//! h_t = o ⊙ tanh(c_t)
//! ```

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::linalg::{sigmoid, uniform_vec, Matrix};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lstm {
    pub w: Matrix,
    pub u: Matrix,
    pub b: Vec<f64>,
}

/// Per-step activations kept for the backward pass.
#[derive(Clone, Debug)]
pub struct Step {
    pub input: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    /// Activated gates, same layout as `z`.
    pub gates: Vec<f64>,
    pub tanh_c: Vec<f64>,
    pub c: Vec<f64>,
    pub h: Vec<f64>,
}

#[derive(Clone, Debug, Default)]
pub struct Trace {
    pub steps: Vec<Step>,
}

impl Trace {
    pub fn hidden(&self, t: usize) -> &[f64] {
        &self.steps[t].h
    }

    pub fn last_hidden(&self) -> &[f64] {
        &self.steps.last().expect("non-empty sequence").h
    }
}

impl Lstm {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        Lstm {
            w: Matrix::zeros(4 * hidden, input),
            u: Matrix::zeros(4 * hidden, hidden),
            b: vec![0.0; 4 * hidden],
        }
    }

    pub fn uniform<R: Rng + ?Sized>(input: usize, hidden: usize, range: f64, rng: &mut R) -> Self {
        Lstm {
            w: Matrix::uniform(4 * hidden, input, range, rng),
            u: Matrix::uniform(4 * hidden, hidden, range, rng),
            b: uniform_vec(4 * hidden, range, rng),
        }
    }

    pub fn hidden_size(&self) -> usize {
        self.u.cols
    }

    pub fn input_size(&self) -> usize {
        self.w.cols
    }

    /// Runs the cell over `inputs` from zero initial state.
    pub fn forward<'a, I>(&self, inputs: I) -> Trace
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let hs = self.hidden_size();
        let mut h = vec![0.0; hs];
        let mut c = vec![0.0; hs];
        let mut steps = Vec::new();
        for x in inputs {
            let mut z = self.b.clone();
            self.w.matvec_acc(x, &mut z);
            self.u.matvec_acc(&h, &mut z);

            let mut gates = z;
            for (k, v) in gates.iter_mut().enumerate() {
                *v = if k / hs == 2 { v.tanh() } else { sigmoid(*v) };
            }
            let (i, rest) = gates.split_at(hs);
            let (f, rest) = rest.split_at(hs);
            let (g, o) = rest.split_at(hs);

            let c_new: Vec<f64> = (0..hs).map(|j| f[j] * c[j] + i[j] * g[j]).collect();
            let tanh_c: Vec<f64> = c_new.iter().map(|v| v.tanh()).collect();
            let h_new: Vec<f64> = (0..hs).map(|j| o[j] * tanh_c[j]).collect();

            steps.push(Step {
                input: x.to_vec(),
                h_prev: std::mem::replace(&mut h, h_new.clone()),
                c_prev: std::mem::replace(&mut c, c_new.clone()),
                gates,
                tanh_c,
                c: c_new,
                h: h_new,
            });
        }
        Trace { steps }
    }

    /// Backpropagates `d_hidden[t]` (loss gradient w.r.t. each `h_t`) through
    /// the whole trace. Parameter gradients are added into `grads`; the
    /// returned vectors are the gradients w.r.t. each input.
    pub fn backward(&self, trace: &Trace, d_hidden: &[Vec<f64>], grads: &mut Lstm) -> Vec<Vec<f64>> {
        let hs = self.hidden_size();
        let steps = &trace.steps;
        debug_assert_eq!(d_hidden.len(), steps.len());

        let mut d_inputs = vec![Vec::new(); steps.len()];
        let mut dh_next = vec![0.0; hs];
        let mut dc_next = vec![0.0; hs];
        let mut dz = vec![0.0; 4 * hs];

        for t in (0..steps.len()).rev() {
            let s = &steps[t];
            let (i, rest) = s.gates.split_at(hs);
            let (f, rest) = rest.split_at(hs);
            let (g, o) = rest.split_at(hs);

            for j in 0..hs {
                let dh = d_hidden[t][j] + dh_next[j];
                let d_o = dh * s.tanh_c[j];
                let dc = dc_next[j] + dh * o[j] * (1.0 - s.tanh_c[j] * s.tanh_c[j]);
                let d_i = dc * g[j];
                let d_g = dc * i[j];
                let d_f = dc * s.c_prev[j];
                dc_next[j] = dc * f[j];

                dz[j] = d_i * i[j] * (1.0 - i[j]);
                dz[hs + j] = d_f * f[j] * (1.0 - f[j]);
                dz[2 * hs + j] = d_g * (1.0 - g[j] * g[j]);
                dz[3 * hs + j] = d_o * o[j] * (1.0 - o[j]);
            }

            grads.w.outer_acc(&dz, &s.input);
            grads.u.outer_acc(&dz, &s.h_prev);
            for (gb, d) in grads.b.iter_mut().zip(&dz) {
                *gb += d;
            }

            let mut dx = vec![0.0; self.input_size()];
            self.w.matvec_t_acc(&dz, &mut dx);
            d_inputs[t] = dx;

            dh_next.iter_mut().for_each(|v| *v = 0.0);
            self.u.matvec_t_acc(&dz, &mut dh_next);
        }
        d_inputs
    }
}
