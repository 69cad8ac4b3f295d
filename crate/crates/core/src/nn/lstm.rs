//! LSTM cell and bidirectional encoder with hand-written backpropagation.
//!
//! Gate pre-activations are stacked in the order input, forget, output,
//! candidate, so `w` is `4h x in`, `u` is `4h x h` and `b` has `4h` entries:
//!
//! ```text
//! i = sigmoid(W_i x + U_i h_prev + b_i)
//! f = sigmoid(W_f x + U_f h_prev + b_f)
//! o = sigmoid(W_o x + U_o h_prev + b_o)
//! g = tanh(W_g x + U_g h_prev + b_g)
//! c = f * c_prev + i * g
//! h = o * tanh(c)
//! ```

use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::tensor::{add_assign, matvec_acc, matvec_t_acc, outer_acc, sigmoid};
use crate::nn::{ParamSet, Tensor};

/// Initial forget-gate bias.
pub const FORGET_BIAS: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct LstmCellParams {
    input_size: usize,
    hidden_size: usize,
    /// Input weights, `4h x in`.
    pub w: Tensor,
    /// Recurrent weights, `4h x h`.
    pub u: Tensor,
    /// Biases, `4h`.
    pub b: Tensor,
}

impl LstmCellParams {
    /// Glorot-uniform weights per gate block, zero biases except the forget gate.
    pub fn new<R: Rng + ?Sized>(input_size: usize, hidden_size: usize, rng: &mut R) -> Self {
        let h = hidden_size;
        let mut w = Tensor::zeros(&[4 * h, input_size]);
        let mut u = Tensor::zeros(&[4 * h, h]);
        let rw = Tensor::glorot_range(input_size, h);
        let ru = Tensor::glorot_range(h, h);
        for gate in 0..4 {
            for v in &mut w.data_mut()[gate * h * input_size..(gate + 1) * h * input_size] {
                *v = rng.random_range(-rw..=rw);
            }
            for v in &mut u.data_mut()[gate * h * h..(gate + 1) * h * h] {
                *v = rng.random_range(-ru..=ru);
            }
        }
        let mut b = Tensor::zeros(&[4 * h]);
        b.data_mut()[h..2 * h].fill(FORGET_BIAS);
        LstmCellParams {
            input_size,
            hidden_size,
            w,
            u,
            b,
        }
    }

    pub fn zeros(input_size: usize, hidden_size: usize) -> Self {
        let h = hidden_size;
        LstmCellParams {
            input_size,
            hidden_size,
            w: Tensor::zeros(&[4 * h, input_size]),
            u: Tensor::zeros(&[4 * h, h]),
            b: Tensor::zeros(&[4 * h]),
        }
    }

    pub fn from_parts(w: Tensor, u: Tensor, b: Tensor) -> Result<Self> {
        let (rows, input_size) = match w.shape() {
            [r, c] if r % 4 == 0 => (*r, *c),
            s => return Err(Error::Config(format!("LSTM input weights have shape {s:?}"))),
        };
        let h = rows / 4;
        if u.shape() != [rows, h] || b.shape() != [rows] {
            return Err(Error::Config(format!(
                "LSTM shapes inconsistent: w {:?}, u {:?}, b {:?}",
                w.shape(),
                u.shape(),
                b.shape()
            )));
        }
        Ok(LstmCellParams {
            input_size,
            hidden_size: h,
            w,
            u,
            b,
        })
    }

    pub fn input_size(&self) -> usize {
        self.input_size
    }

    pub fn hidden_size(&self) -> usize {
        self.hidden_size
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_size {
            return Err(Error::Config(format!(
                "LSTM expects input of size {}, got {}",
                self.input_size,
                x.len()
            )));
        }
        Ok(())
    }

    fn step_cached(&self, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> StepCache {
        let h = self.hidden_size;
        let mut gates = self.b.data().to_vec();
        matvec_acc(&mut gates, self.w.data(), x);
        matvec_acc(&mut gates, self.u.data(), h_prev);
        for v in &mut gates[..3 * h] {
            *v = sigmoid(*v);
        }
        for v in &mut gates[3 * h..] {
            *v = v.tanh();
        }
        let mut c = vec![0.0; h];
        let mut tanh_c = vec![0.0; h];
        let mut h_out = vec![0.0; h];
        for k in 0..h {
            let (i, f, o, g) = (gates[k], gates[h + k], gates[2 * h + k], gates[3 * h + k]);
            c[k] = f * c_prev[k] + i * g;
            tanh_c[k] = c[k].tanh();
            h_out[k] = o * tanh_c[k];
        }
        StepCache {
            x: x.to_vec(),
            h_prev: h_prev.to_vec(),
            c_prev: c_prev.to_vec(),
            gates,
            c,
            tanh_c,
            h: h_out,
        }
    }

    /// Runs the cell over a sequence from zero initial states.
    pub fn run(&self, xs: &[&[f64]]) -> Result<(Vec<Vec<f64>>, LstmTrace)> {
        let h = self.hidden_size;
        let mut steps: Vec<StepCache> = Vec::with_capacity(xs.len());
        let zeros = vec![0.0; h];
        for x in xs {
            self.check_input(x)?;
            let step = match steps.last() {
                Some(prev) => self.step_cached(x, &prev.h, &prev.c),
                None => self.step_cached(x, &zeros, &zeros),
            };
            steps.push(step);
        }
        let hs = steps.iter().map(|s| s.h.clone()).collect();
        Ok((hs, LstmTrace { steps }))
    }

    /// Backpropagates `dhs` (gradient of the loss w.r.t. each output state)
    /// through a recorded run, accumulating into `grads` and returning the
    /// gradient w.r.t. each input.
    pub fn backward(
        &self,
        trace: &LstmTrace,
        dhs: &[Vec<f64>],
        grads: &mut LstmCellParams,
    ) -> Vec<Vec<f64>> {
        let h = self.hidden_size;
        let n = trace.steps.len();
        debug_assert_eq!(dhs.len(), n);
        let mut dxs = vec![vec![0.0; self.input_size]; n];
        let mut dh_next = vec![0.0; h];
        let mut dc_next = vec![0.0; h];
        let mut da = vec![0.0; 4 * h];
        for t in (0..n).rev() {
            let s = &trace.steps[t];
            let g = &s.gates;
            for k in 0..h {
                let dh = dhs[t][k] + dh_next[k];
                let (i, f, o, cand) = (g[k], g[h + k], g[2 * h + k], g[3 * h + k]);
                let tc = s.tanh_c[k];
                let d_o = dh * tc;
                let dc = dc_next[k] + dh * o * (1.0 - tc * tc);
                let d_i = dc * cand;
                let d_g = dc * i;
                let d_f = dc * s.c_prev[k];
                dc_next[k] = dc * f;
                da[k] = d_i * i * (1.0 - i);
                da[h + k] = d_f * f * (1.0 - f);
                da[2 * h + k] = d_o * o * (1.0 - o);
                da[3 * h + k] = d_g * (1.0 - cand * cand);
            }
            outer_acc(grads.w.data_mut(), &da, &s.x);
            outer_acc(grads.u.data_mut(), &da, &s.h_prev);
            add_assign(grads.b.data_mut(), &da);
            matvec_t_acc(&mut dxs[t], self.w.data(), &da);
            dh_next.fill(0.0);
            matvec_t_acc(&mut dh_next, self.u.data(), &da);
        }
        dxs
    }
}

impl ParamSet for LstmCellParams {
    fn tensors(&self) -> Vec<(String, &Tensor)> {
        vec![
            ("w".into(), &self.w),
            ("u".into(), &self.u),
            ("b".into(), &self.b),
        ]
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.w, &mut self.u, &mut self.b]
    }
}

#[derive(Debug, Clone)]
struct StepCache {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    /// Activated gates `[i, f, o, g]`.
    gates: Vec<f64>,
    c: Vec<f64>,
    tanh_c: Vec<f64>,
    h: Vec<f64>,
}

/// Intermediate values of a unidirectional run, consumed by `backward`.
#[derive(Debug, Clone)]
pub struct LstmTrace {
    steps: Vec<StepCache>,
}

/// One LSTM step.
pub fn lstm_cell_step(
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
    params: &LstmCellParams,
) -> Result<(Vec<f64>, Vec<f64>)> {
    params.check_input(x)?;
    let h = params.hidden_size;
    if h_prev.len() != h || c_prev.len() != h {
        return Err(Error::Config(format!(
            "LSTM state size {h}, got h_prev {} and c_prev {}",
            h_prev.len(),
            c_prev.len()
        )));
    }
    let s = params.step_cached(x, h_prev, c_prev);
    Ok((s.h, s.c))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiEncoderParams {
    pub forward: LstmCellParams,
    pub backward: LstmCellParams,
}

impl BiEncoderParams {
    pub fn new<R: Rng + ?Sized>(input_size: usize, hidden_size: usize, rng: &mut R) -> Self {
        let forward = LstmCellParams::new(input_size, hidden_size, rng);
        let backward = LstmCellParams::new(input_size, hidden_size, rng);
        BiEncoderParams { forward, backward }
    }

    pub fn zeros(input_size: usize, hidden_size: usize) -> Self {
        BiEncoderParams {
            forward: LstmCellParams::zeros(input_size, hidden_size),
            backward: LstmCellParams::zeros(input_size, hidden_size),
        }
    }

    pub fn from_directions(forward: LstmCellParams, backward: LstmCellParams) -> Result<Self> {
        if forward.input_size != backward.input_size || forward.hidden_size != backward.hidden_size
        {
            return Err(Error::Config(
                "forward and backward encoders differ in size".into(),
            ));
        }
        Ok(BiEncoderParams { forward, backward })
    }

    pub fn input_size(&self) -> usize {
        self.forward.input_size
    }

    pub fn hidden_size(&self) -> usize {
        self.forward.hidden_size
    }

    /// Output dimension, twice the hidden size.
    pub fn output_size(&self) -> usize {
        2 * self.forward.hidden_size
    }

    /// Encodes `xs`; position `t` gets `forward_t ∘ backward_t`.
    pub fn encode(&self, xs: &[&[f64]]) -> Result<(Vec<Vec<f64>>, BiTrace)> {
        if xs.is_empty() {
            return Err(Error::InvalidInput("cannot encode an empty sequence".into()));
        }
        let (fwd, fwd_trace) = self.forward.run(xs)?;
        let reversed: Vec<&[f64]> = xs.iter().rev().copied().collect();
        let (bwd, bwd_trace) = self.backward.run(&reversed)?;
        let n = xs.len();
        let out = (0..n)
            .map(|t| {
                let mut v = Vec::with_capacity(self.output_size());
                v.extend_from_slice(&fwd[t]);
                v.extend_from_slice(&bwd[n - 1 - t]);
                v
            })
            .collect();
        Ok((
            out,
            BiTrace {
                forward: fwd_trace,
                backward: bwd_trace,
            },
        ))
    }

    /// Backpropagates gradients of the concatenated outputs.
    pub fn backward(
        &self,
        trace: &BiTrace,
        douts: &[Vec<f64>],
        grads: &mut BiEncoderParams,
    ) -> Vec<Vec<f64>> {
        let h = self.hidden_size();
        let n = douts.len();
        let d_fwd: Vec<Vec<f64>> = douts.iter().map(|d| d[..h].to_vec()).collect();
        let d_bwd_rev: Vec<Vec<f64>> = douts.iter().rev().map(|d| d[h..].to_vec()).collect();
        let mut dxs = self.forward.backward(&trace.forward, &d_fwd, &mut grads.forward);
        let dxs_rev = self
            .backward
            .backward(&trace.backward, &d_bwd_rev, &mut grads.backward);
        for (t, dx) in dxs.iter_mut().enumerate() {
            add_assign(dx, &dxs_rev[n - 1 - t]);
        }
        dxs
    }
}

impl ParamSet for BiEncoderParams {
    fn tensors(&self) -> Vec<(String, &Tensor)> {
        let mut out: Vec<(String, &Tensor)> = self
            .forward
            .tensors()
            .into_iter()
            .map(|(n, t)| (format!("fwd.{n}"), t))
            .collect();
        out.extend(
            self.backward
                .tensors()
                .into_iter()
                .map(|(n, t)| (format!("bwd.{n}"), t)),
        );
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = self.forward.tensors_mut();
        out.extend(self.backward.tensors_mut());
        out
    }
}

#[derive(Debug, Clone)]
pub struct BiTrace {
    forward: LstmTrace,
    backward: LstmTrace,
}

/// Bidirectional encoding of a non-empty sequence.
pub fn bi_encode(xs: &[Vec<f64>], params: &BiEncoderParams) -> Result<Vec<Vec<f64>>> {
    let refs: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
    params.encode(&refs).map(|(out, _)| out)
}
