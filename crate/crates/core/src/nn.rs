//! Small fully connected networks with hand-written backprop and Adam.
//!
//! Sized for the USAD autoencoders and the DQN value network; everything is
//! per-sample `f64` arithmetic, deterministic given the seed.

use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Identity,
    Relu,
    Sigmoid,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Self::Identity => z,
            Self::Relu => z.max(0.0),
            Self::Sigmoid => 1.0 / (1.0 + (-z).exp()),
        }
    }

    /// Derivative expressed through the activation output `a`.
    fn derivative(self, a: f64) -> f64 {
        match self {
            Self::Identity => 1.0,
            Self::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Self::Sigmoid => a * (1.0 - a),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub in_dim: usize,
    pub out_dim: usize,
    /// Row-major `out_dim × in_dim`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Dense {
    pub fn new(in_dim: usize, out_dim: usize, activation: Activation, rng: &mut impl Rng) -> Self {
        let bound = 1.0 / (in_dim as f64).sqrt();
        Self {
            in_dim,
            out_dim,
            weights: (0..in_dim * out_dim).map(|_| rng.gen_range(-bound..bound)).collect(),
            bias: (0..out_dim).map(|_| rng.gen_range(-bound..bound)).collect(),
            activation,
        }
    }

    fn forward_into(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for o in 0..self.out_dim {
            let row = &self.weights[o * self.in_dim..(o + 1) * self.in_dim];
            let z = self.bias[o] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
            out.push(self.activation.apply(z));
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

/// Activations of every layer for one input, index 0 being the input itself.
pub struct Trace {
    acts: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.acts.last().expect("trace has input")
    }
}

#[derive(Clone, Debug)]
pub struct Grads {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<Vec<f64>>,
}

impl Grads {
    pub fn scale(&mut self, factor: f64) {
        for g in self.weights.iter_mut().chain(self.bias.iter_mut()) {
            g.iter_mut().for_each(|x| *x *= factor);
        }
    }

    pub fn norm(&self) -> f64 {
        self.weights
            .iter()
            .chain(self.bias.iter())
            .flat_map(|g| g.iter())
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
    }

    pub fn clip_norm(&mut self, max_norm: f64) {
        let n = self.norm();
        if n > max_norm && n > 0.0 {
            self.scale(max_norm / n);
        }
    }

    pub fn zero(&mut self) {
        for g in self.weights.iter_mut().chain(self.bias.iter_mut()) {
            g.iter_mut().for_each(|x| *x = 0.0);
        }
    }
}

impl Mlp {
    /// `sizes = [in, h1, ..., out]`; hidden layers use `hidden`, the last `output`.
    pub fn new(sizes: &[usize], hidden: Activation, output: Activation, rng: &mut impl Rng) -> Self {
        assert!(sizes.len() >= 2, "need at least input and output sizes");
        let n = sizes.len() - 1;
        let layers = (0..n)
            .map(|i| Dense::new(sizes[i], sizes[i + 1], if i + 1 == n { output } else { hidden }, rng))
            .collect();
        Self { layers }
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().unwrap().out_dim
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut cur = x.to_vec();
        let mut next = Vec::new();
        for l in &self.layers {
            l.forward_into(&cur, &mut next);
            std::mem::swap(&mut cur, &mut next);
        }
        cur
    }

    pub fn trace(&self, x: &[f64]) -> Trace {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_vec());
        for l in &self.layers {
            let mut out = Vec::with_capacity(l.out_dim);
            l.forward_into(acts.last().unwrap(), &mut out);
            acts.push(out);
        }
        Trace { acts }
    }

    pub fn zero_grads(&self) -> Grads {
        Grads {
            weights: self.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            bias: self.layers.iter().map(|l| vec![0.0; l.bias.len()]).collect(),
        }
    }

    /// Accumulates parameter gradients for `dloss/doutput` into `grads` and
    /// returns `dloss/dinput`.
    pub fn backward(&self, trace: &Trace, grad_out: &[f64], grads: &mut Grads) -> Vec<f64> {
        let mut delta: Vec<f64> = grad_out.to_vec();
        for (li, l) in self.layers.iter().enumerate().rev() {
            let out = &trace.acts[li + 1];
            let input = &trace.acts[li];
            for (d, &a) in delta.iter_mut().zip(out) {
                *d *= l.activation.derivative(a);
            }
            let gw = &mut grads.weights[li];
            let gb = &mut grads.bias[li];
            let mut dx = vec![0.0; l.in_dim];
            for o in 0..l.out_dim {
                let g = delta[o];
                if g == 0.0 {
                    continue;
                }
                gb[o] += g;
                let row = o * l.in_dim..(o + 1) * l.in_dim;
                for ((gwi, &xi), (dxi, &wi)) in gw[row.clone()]
                    .iter_mut()
                    .zip(input)
                    .zip(dx.iter_mut().zip(&l.weights[row]))
                {
                    *gwi += g * xi;
                    *dxi += g * wi;
                }
            }
            delta = dx;
        }
        delta
    }

    pub fn copy_from(&mut self, other: &Mlp) {
        self.clone_from(other);
    }
}

#[derive(Clone, Debug)]
pub struct Adam {
    pub lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: i32,
    m: Grads,
    v: Grads,
}

impl Adam {
    pub fn new(net: &Mlp, lr: f64) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, t: 0, m: net.zero_grads(), v: net.zero_grads() }
    }

    pub fn step(&mut self, net: &mut Mlp, grads: &Grads) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t);
        let bc2 = 1.0 - self.beta2.powi(self.t);
        for (li, layer) in net.layers.iter_mut().enumerate() {
            let params = [(&mut layer.weights, 0usize), (&mut layer.bias, 1usize)];
            for (p, which) in params {
                let (g, m, v) = if which == 0 {
                    (&grads.weights[li], &mut self.m.weights[li], &mut self.v.weights[li])
                } else {
                    (&grads.bias[li], &mut self.m.bias[li], &mut self.v.bias[li])
                };
                for j in 0..p.len() {
                    m[j] = self.beta1 * m[j] + (1.0 - self.beta1) * g[j];
                    v[j] = self.beta2 * v[j] + (1.0 - self.beta2) * g[j] * g[j];
                    let mh = m[j] / bc1;
                    let vh = v[j] / bc2;
                    p[j] -= self.lr * mh / (vh.sqrt() + self.eps);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::util;

    fn loss(net: &Mlp, x: &[f64], target: &[f64]) -> f64 {
        net.forward(x).iter().zip(target).map(|(a, b)| 0.5 * (a - b) * (a - b)).sum()
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = util::rng(3);
        for (hidden, out) in [(Activation::Relu, Activation::Identity), (Activation::Relu, Activation::Sigmoid)] {
            let net = Mlp::new(&[4, 5, 3], hidden, out, &mut rng);
            let x = [0.3, -0.7, 1.1, 0.2];
            let target = [0.1, 0.5, -0.2];
            let tr = net.trace(&x);
            let g_out: Vec<f64> = tr.output().iter().zip(&target).map(|(a, b)| a - b).collect();
            let mut grads = net.zero_grads();
            let dx = net.backward(&tr, &g_out, &mut grads);
            let h = 1e-6;
            for li in 0..net.layers.len() {
                for j in 0..net.layers[li].weights.len() {
                    let mut p = net.clone();
                    p.layers[li].weights[j] += h;
                    let mut m = net.clone();
                    m.layers[li].weights[j] -= h;
                    let fd = (loss(&p, &x, &target) - loss(&m, &x, &target)) / (2.0 * h);
                    assert!((fd - grads.weights[li][j]).abs() < 1e-6, "layer {li} w{j}: {fd} vs {}", grads.weights[li][j]);
                }
            }
            for i in 0..4 {
                let mut xp = x;
                xp[i] += h;
                let mut xm = x;
                xm[i] -= h;
                let fd = (loss(&net, &xp, &target) - loss(&net, &xm, &target)) / (2.0 * h);
                assert!((fd - dx[i]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn adam_fits_a_linear_map() {
        let mut rng = util::rng(9);
        let mut net = Mlp::new(&[2, 1], Activation::Identity, Activation::Identity, &mut rng);
        let mut opt = Adam::new(&net, 0.05);
        let data = [([0.0, 1.0], 3.0), ([1.0, 0.0], -1.0), ([1.0, 1.0], 2.0), ([2.0, 1.0], 1.0)];
        for _ in 0..2000 {
            let mut g = net.zero_grads();
            for (x, y) in &data {
                let tr = net.trace(x);
                net.backward(&tr, &[tr.output()[0] - y], &mut g);
            }
            g.scale(1.0 / data.len() as f64);
            opt.step(&mut net, &g);
        }
        for (x, y) in &data {
            assert!((net.forward(x)[0] - y).abs() < 1e-3);
        }
    }

    #[test]
    fn clip_bounds_norm() {
        let net = Mlp::new(&[3, 2], Activation::Identity, Activation::Identity, &mut util::rng(1));
        let mut g = net.zero_grads();
        g.weights[0].iter_mut().for_each(|x| *x = 10.0);
        g.clip_norm(1.0);
        assert!((g.norm() - 1.0).abs() < 1e-12);
    }
}
