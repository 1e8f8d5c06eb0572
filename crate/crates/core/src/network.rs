//! One-hidden-layer sigmoid network mapping a standardized state vector to
//! portfolio weights, with exact backpropagation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::synthetic::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputMode {
    /// One output node per asset; the budget constraint is carried by `mu`.
    Lagrangian,
    /// Two assets, one output node `x`; the second asset gets `1 - x`.
    Complement,
}

impl std::str::FromStr for OutputMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "lagrangian" => Ok(OutputMode::Lagrangian),
            "complement" => Ok(OutputMode::Complement),
            other => Err(Error::Config(format!("unknown output mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkShape {
    pub inputs: usize,
    pub hidden: usize,
    /// Number of assets the network allocates across.
    pub assets: usize,
    pub mode: OutputMode,
}

impl NetworkShape {
    pub fn new(inputs: usize, hidden: usize, assets: usize, mode: OutputMode) -> Result<Self> {
        let shape = Self {
            inputs,
            hidden,
            assets,
            mode,
        };
        shape.validate()?;
        Ok(shape)
    }

    pub fn validate(&self) -> Result<()> {
        if self.inputs == 0 || self.hidden == 0 {
            return Err(Error::Config(format!(
                "network needs at least one input and one hidden node ({}x{})",
                self.inputs, self.hidden
            )));
        }
        if self.assets < 2 {
            return Err(Error::Config("network needs at least two assets".into()));
        }
        if self.mode == OutputMode::Complement && self.assets != 2 {
            return Err(Error::Config(format!(
                "complement mode needs exactly 2 assets, got {}",
                self.assets
            )));
        }
        Ok(())
    }

    /// Number of output nodes.
    pub fn outputs(&self) -> usize {
        match self.mode {
            OutputMode::Lagrangian => self.assets,
            OutputMode::Complement => self.assets - 1,
        }
    }

    pub fn with_hidden(self, hidden: usize) -> Self {
        Self { hidden, ..self }
    }
}

/// Network weights plus the Lagrange multiplier. Matrices are row-major:
/// `w_in[h * inputs + i]` connects input `i` to hidden node `h`, and
/// `w_out[o * hidden + h]` connects hidden node `h` to output `o`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams {
    pub shape: NetworkShape,
    pub w_in: Vec<f64>,
    pub b_hidden: Vec<f64>,
    pub w_out: Vec<f64>,
    pub b_out: Vec<f64>,
    pub mu: f64,
}

/// Gradients with the same layout as [`NetworkParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGradients {
    pub w_in: Vec<f64>,
    pub b_hidden: Vec<f64>,
    pub w_out: Vec<f64>,
    pub b_out: Vec<f64>,
    pub mu: f64,
}

/// Intermediate activations of one forward pass.
#[derive(Debug, Clone)]
pub struct Activations {
    pub hidden: Vec<f64>,
    pub raw: Vec<f64>,
    pub weights: Vec<f64>,
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl NetworkParams {
    /// All-zero parameters.
    pub fn zeros(shape: NetworkShape) -> Self {
        let (m, h, o) = (shape.inputs, shape.hidden, shape.outputs());
        Self {
            shape,
            w_in: vec![0.0; h * m],
            b_hidden: vec![0.0; h],
            w_out: vec![0.0; o * h],
            b_out: vec![0.0; o],
            mu: 0.0,
        }
    }

    /// Weights uniform in `±1/sqrt(fan_in)` per layer; biases and `mu` zero.
    pub fn init(shape: NetworkShape, seed: u64) -> Self {
        let mut p = Self::zeros(shape);
        let mut rng = rng(seed);
        let a_in = 1.0 / (shape.inputs as f64).sqrt();
        for w in &mut p.w_in {
            *w = rng.random_range(-a_in..=a_in);
        }
        let a_out = 1.0 / (shape.hidden as f64).sqrt();
        for w in &mut p.w_out {
            *w = rng.random_range(-a_out..=a_out);
        }
        p
    }

    pub fn forward_activations(&self, z: &[f64]) -> Activations {
        let s = &self.shape;
        debug_assert_eq!(z.len(), s.inputs);
        let hidden: Vec<f64> = (0..s.hidden)
            .map(|h| {
                let row = &self.w_in[h * s.inputs..(h + 1) * s.inputs];
                sigmoid(row.iter().zip(z).map(|(w, v)| w * v).sum::<f64>() + self.b_hidden[h])
            })
            .collect();
        let raw: Vec<f64> = (0..s.outputs())
            .map(|o| {
                let row = &self.w_out[o * s.hidden..(o + 1) * s.hidden];
                sigmoid(row.iter().zip(&hidden).map(|(w, v)| w * v).sum::<f64>() + self.b_out[o])
            })
            .collect();
        let weights = match s.mode {
            OutputMode::Lagrangian => raw.clone(),
            OutputMode::Complement => vec![raw[0], 1.0 - raw[0]],
        };
        Activations {
            hidden,
            raw,
            weights,
        }
    }

    /// Portfolio weights for a standardized state vector.
    pub fn forward(&self, z: &[f64]) -> Vec<f64> {
        self.forward_activations(z).weights
    }

    /// Gradients of a scalar `L` given `dL/dx` at the output weights.
    ///
    /// The returned `mu` component is zero; the multiplier enters `L` outside
    /// the network and its derivative is assembled by the caller.
    pub fn backward(&self, z: &[f64], upstream: &[f64]) -> ParamGradients {
        let act = self.forward_activations(z);
        let mut g = ParamGradients::zeros_like(self);
        self.backward_into(z, &act, upstream, 1.0, &mut g);
        g
    }

    /// Accumulate `scale * dL/dparams` into `g`, reusing `act` from a forward pass.
    pub fn backward_into(
        &self,
        z: &[f64],
        act: &Activations,
        upstream: &[f64],
        scale: f64,
        g: &mut ParamGradients,
    ) {
        let s = &self.shape;
        let d_raw: Vec<f64> = match s.mode {
            OutputMode::Lagrangian => upstream.to_vec(),
            OutputMode::Complement => vec![upstream[0] - upstream[1]],
        };
        let mut d_hidden = vec![0.0; s.hidden];
        for o in 0..s.outputs() {
            let y = act.raw[o];
            let delta = scale * d_raw[o] * y * (1.0 - y);
            g.b_out[o] += delta;
            for h in 0..s.hidden {
                g.w_out[o * s.hidden + h] += delta * act.hidden[h];
                d_hidden[h] += delta * self.w_out[o * s.hidden + h];
            }
        }
        for h in 0..s.hidden {
            let a = act.hidden[h];
            let delta = d_hidden[h] * a * (1.0 - a);
            g.b_hidden[h] += delta;
            for i in 0..s.inputs {
                g.w_in[h * s.inputs + i] += delta * z[i];
            }
        }
    }

    /// `self += step * g`, including `mu`.
    pub fn add_scaled(&mut self, g: &ParamGradients, step: f64) {
        let axpy = |p: &mut [f64], d: &[f64]| p.iter_mut().zip(d).for_each(|(p, d)| *p += step * d);
        axpy(&mut self.w_in, &g.w_in);
        axpy(&mut self.b_hidden, &g.b_hidden);
        axpy(&mut self.w_out, &g.w_out);
        axpy(&mut self.b_out, &g.b_out);
        self.mu += step * g.mu;
    }

    pub fn is_finite(&self) -> bool {
        self.flat().iter().all(|v| v.is_finite())
    }

    /// All parameters in a fixed order: w_in, b_hidden, w_out, b_out, mu.
    pub fn flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.len());
        v.extend(&self.w_in);
        v.extend(&self.b_hidden);
        v.extend(&self.w_out);
        v.extend(&self.b_out);
        v.push(self.mu);
        v
    }

    pub fn len(&self) -> usize {
        self.w_in.len() + self.b_hidden.len() + self.w_out.len() + self.b_out.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn set_flat(&mut self, v: &[f64]) {
        assert_eq!(v.len(), self.len());
        let mut it = v.iter().copied();
        for p in self
            .w_in
            .iter_mut()
            .chain(self.b_hidden.iter_mut())
            .chain(self.w_out.iter_mut())
            .chain(self.b_out.iter_mut())
        {
            *p = it.next().unwrap();
        }
        self.mu = it.next().unwrap();
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.shape;
        s.validate()?;
        let (m, h, o) = (s.inputs, s.hidden, s.outputs());
        if self.w_in.len() != h * m
            || self.b_hidden.len() != h
            || self.w_out.len() != o * h
            || self.b_out.len() != o
        {
            return Err(Error::Config("parameter arrays do not match the network shape".into()));
        }
        if !self.is_finite() {
            return Err(Error::NonFiniteInput("network parameters".into()));
        }
        Ok(())
    }
}

impl ParamGradients {
    pub fn zeros_like(p: &NetworkParams) -> Self {
        Self {
            w_in: vec![0.0; p.w_in.len()],
            b_hidden: vec![0.0; p.b_hidden.len()],
            w_out: vec![0.0; p.w_out.len()],
            b_out: vec![0.0; p.b_out.len()],
            mu: 0.0,
        }
    }

    pub fn flat(&self) -> Vec<f64> {
        let mut v = Vec::new();
        v.extend(&self.w_in);
        v.extend(&self.b_hidden);
        v.extend(&self.w_out);
        v.extend(&self.b_out);
        v.push(self.mu);
        v
    }

    pub fn is_finite(&self) -> bool {
        self.flat().iter().all(|v| v.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn shape(m: usize, h: usize, n: usize, mode: OutputMode) -> NetworkShape {
        NetworkShape::new(m, h, n, mode).unwrap()
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let s = shape(4, 3, 2, OutputMode::Lagrangian);
        let a = NetworkParams::init(s, 11);
        assert_eq!(a, NetworkParams::init(s, 11));
        assert_ne!(a, NetworkParams::init(s, 12));
        assert!(a.w_in.iter().all(|w| w.abs() <= 0.5));
        assert!(a.w_out.iter().all(|w| w.abs() <= 1.0 / 3f64.sqrt()));
        assert_eq!(a.mu, 0.0);
        assert!(a.b_hidden.iter().chain(&a.b_out).all(|b| *b == 0.0));
    }

    #[test]
    fn zero_params_give_equal_weights() {
        for mode in [OutputMode::Lagrangian, OutputMode::Complement] {
            let p = NetworkParams::zeros(shape(3, 2, 2, mode));
            assert_eq!(p.forward(&[0.3, -1.0, 2.0]), vec![0.5, 0.5]);
        }
    }

    #[test]
    fn saturating_output() {
        let mut p = NetworkParams::zeros(shape(1, 1, 2, OutputMode::Lagrangian));
        p.b_out[0] = 10.0;
        let x = p.forward(&[0.0]);
        assert!((x[0] - 0.9999546).abs() < 1e-7);
        p.b_out[0] = 20.0;
        assert!(p.forward(&[0.0])[0] > x[0]);
    }

    #[test]
    fn complement_weights_sum_to_one_exactly() {
        let mut r = rng(5);
        for seed in 0..200 {
            let mut p = NetworkParams::init(shape(3, 4, 2, OutputMode::Complement), seed);
            p.b_out[0] = r.random_range(-30.0..30.0);
            let z: Vec<f64> = (0..3).map(|_| r.random_range(-5.0..5.0)).collect();
            let x = p.forward(&z);
            assert_eq!(x[0] + x[1], 1.0);
        }
    }

    #[test]
    fn backward_is_linear_in_upstream() {
        let p = NetworkParams::init(shape(3, 4, 3, OutputMode::Lagrangian), 2);
        let z = [0.5, -0.2, 1.0];
        let zero = p.backward(&z, &[0.0, 0.0, 0.0]);
        assert!(zero.flat().iter().all(|g| *g == 0.0));
        let g1 = p.backward(&z, &[0.3, -0.1, 0.7]).flat();
        let g2 = p.backward(&z, &[0.6, -0.2, 1.4]).flat();
        for (a, b) in g1.iter().zip(&g2) {
            assert!((2.0 * a - b).abs() <= 1e-15 * b.abs().max(1.0));
        }
    }

    fn fd_check(p: &NetworkParams, z: &[f64], up: &[f64], tol: f64) {
        let g = p.backward(z, up).flat();
        let loss = |q: &NetworkParams| -> f64 { q.forward(z).iter().zip(up).map(|(x, u)| x * u).sum() };
        let base = p.flat();
        let n = base.len() - 1;
        for k in 0..n {
            let h = 1e-6 * base[k].abs().max(1.0);
            let mut q = p.clone();
            let mut v = base.clone();
            v[k] += h;
            q.set_flat(&v);
            let lp = loss(&q);
            v[k] -= 2.0 * h;
            q.set_flat(&v);
            let lm = loss(&q);
            let fd = (lp - lm) / (2.0 * h);
            let err = (fd - g[k]).abs() / fd.abs().max(g[k].abs()).max(1e-3);
            assert!(err < tol, "param {k}: fd {fd} analytic {}", g[k]);
        }
    }

    #[test]
    fn single_hidden_node_matches_finite_differences() {
        let mut p = NetworkParams::zeros(shape(2, 1, 2, OutputMode::Lagrangian));
        p.w_in = vec![0.7, -0.4];
        p.b_hidden = vec![0.1];
        p.w_out = vec![1.3, -0.8];
        p.b_out = vec![0.2, -0.3];
        fd_check(&p, &[0.5, 1.5], &[1.0, -0.5], 1e-6);
    }

    #[test]
    fn random_triples_match_finite_differences() {
        let mut r = rng(99);
        for trial in 0..100 {
            let mode = if trial % 2 == 0 { OutputMode::Lagrangian } else { OutputMode::Complement };
            let n = if mode == OutputMode::Complement { 2 } else { 2 + trial % 3 };
            let mut p = NetworkParams::init(shape(3, 1 + trial % 5, n, mode), trial as u64);
            let mut flat = p.flat();
            for v in &mut flat {
                *v += r.random_range(-1.0..1.0);
            }
            p.set_flat(&flat);
            let z: Vec<f64> = (0..3).map(|_| r.random_range(-2.0..2.0)).collect();
            let up: Vec<f64> = (0..n).map(|_| r.random_range(-1.0..1.0)).collect();
            fd_check(&p, &z, &up, 1e-5);
        }
    }

    #[test]
    fn complement_rejects_more_than_two_assets() {
        assert!(NetworkShape::new(2, 2, 3, OutputMode::Complement).is_err());
        assert!(NetworkShape::new(0, 2, 2, OutputMode::Lagrangian).is_err());
    }
}
