//! USAD: a shared encoder with two decoders trained adversarially.
//!
//! At epoch `n` (1-based), with `a = 1/n` and `b = 1 − 1/n`:
//!
//! ```text
//! loss1 = a·mse(w, D1(E(w))) + b·mse(w, D2(E(D1(E(w)))))   -> updates E, D1
//! loss2 = a·mse(w, D2(E(w))) − b·mse(w, D2(E(D1(E(w)))))   -> updates E, D2
//! ```
//!
//! Score: `alpha·mse(w, D1(E(w))) + beta·mse(w, D2(E(D1(E(w)))))`.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Activation, Adam, Grads, Mlp, Trace};
use crate::util;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UsadParams {
    pub alpha: f64,
    pub beta: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub hidden: usize,
    pub latent: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for UsadParams {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            beta: 0.5,
            epochs: 100,
            batch_size: 64,
            hidden: 4,
            latent: 2,
            learning_rate: 1e-3,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UsadModel {
    pub params: UsadParams,
    pub encoder: Mlp,
    pub decoder1: Mlp,
    pub decoder2: Mlp,
    /// Mean per-epoch `(mse(w, AE1(w)), mse(w, AE2(w)))` on the training set.
    pub history: Vec<(f64, f64)>,
}

struct Pass {
    e0: Trace,
    d1: Trace,
    e1: Trace,
    d2w3: Trace,
    d2w2: Trace,
}

fn mse(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64
}

/// `d mse(w, out) / d out` scaled by `weight`.
fn mse_grad(w: &[f64], out: &[f64], weight: f64) -> Vec<f64> {
    let m = w.len() as f64;
    out.iter().zip(w).map(|(o, x)| weight * 2.0 * (o - x) / m).collect()
}

fn add_into(acc: &mut [f64], g: &[f64]) {
    acc.iter_mut().zip(g).for_each(|(a, b)| *a += b);
}

impl UsadModel {
    fn pass(&self, w: &[f64]) -> Pass {
        let e0 = self.encoder.trace(w);
        let d1 = self.decoder1.trace(e0.output());
        let e1 = self.encoder.trace(d1.output());
        let d2w3 = self.decoder2.trace(e1.output());
        let d2w2 = self.decoder2.trace(e0.output());
        Pass { e0, d1, e1, d2w3, d2w2 }
    }

    /// Backprop of `c1·mse(w, w1) + c2·mse(w, w2) + c3·mse(w, w3)`.
    fn backprop(&self, w: &[f64], p: &Pass, c: [f64; 3], ge: &mut Grads, gd1: &mut Grads, gd2: &mut Grads) {
        let latent = self.encoder.out_dim();
        let mut dz0 = vec![0.0; latent];
        if c[2] != 0.0 {
            let g3 = mse_grad(w, p.d2w3.output(), c[2]);
            let dz1 = self.decoder2.backward(&p.d2w3, &g3, gd2);
            let dw1 = self.encoder.backward(&p.e1, &dz1, ge);
            let mut g1 = dw1;
            if c[0] != 0.0 {
                add_into(&mut g1, &mse_grad(w, p.d1.output(), c[0]));
            }
            add_into(&mut dz0, &self.decoder1.backward(&p.d1, &g1, gd1));
        } else if c[0] != 0.0 {
            let g1 = mse_grad(w, p.d1.output(), c[0]);
            add_into(&mut dz0, &self.decoder1.backward(&p.d1, &g1, gd1));
        }
        if c[1] != 0.0 {
            let g2 = mse_grad(w, p.d2w2.output(), c[1]);
            add_into(&mut dz0, &self.decoder2.backward(&p.d2w2, &g2, gd2));
        }
        self.encoder.backward(&p.e0, &dz0, ge);
    }

    pub fn fit(train: &[Vec<f64>], params: UsadParams) -> Result<Self> {
        if train.len() < 2 {
            return Err(Error::InsufficientData { needed: 2, got: train.len() });
        }
        if params.epochs == 0 || params.batch_size == 0 {
            return Err(Error::InvalidInput("usad epochs and batch size must be positive".into()));
        }
        let dims = train[0].len();
        let mut rng = util::rng(params.seed);
        let (h, z) = (params.hidden, params.latent);
        let mut model = UsadModel {
            encoder: Mlp::new(&[dims, h, z], Activation::Relu, Activation::Relu, &mut rng),
            decoder1: Mlp::new(&[z, h, dims], Activation::Relu, Activation::Sigmoid, &mut rng),
            decoder2: Mlp::new(&[z, h, dims], Activation::Relu, Activation::Sigmoid, &mut rng),
            history: Vec::new(),
            params,
        };
        let lr = model.params.learning_rate;
        let mut opt1_e = Adam::new(&model.encoder, lr);
        let mut opt1_d = Adam::new(&model.decoder1, lr);
        let mut opt2_e = Adam::new(&model.encoder, lr);
        let mut opt2_d = Adam::new(&model.decoder2, lr);
        let mut order: Vec<usize> = (0..train.len()).collect();
        for epoch in 1..=model.params.epochs {
            let a = 1.0 / epoch as f64;
            let b = 1.0 - a;
            order.shuffle(&mut rng);
            let (mut sum1, mut sum2) = (0.0, 0.0);
            for batch in order.chunks(model.params.batch_size) {
                let inv = 1.0 / batch.len() as f64;
                let mut ge = model.encoder.zero_grads();
                let mut gd1 = model.decoder1.zero_grads();
                let mut gd2 = model.decoder2.zero_grads();
                for &i in batch {
                    let p = model.pass(&train[i]);
                    sum1 += mse(&train[i], p.d1.output());
                    sum2 += mse(&train[i], p.d2w2.output());
                    model.backprop(&train[i], &p, [a * inv, 0.0, b * inv], &mut ge, &mut gd1, &mut gd2);
                }
                opt1_e.step(&mut model.encoder, &ge);
                opt1_d.step(&mut model.decoder1, &gd1);

                // Only the first optimizer's parameters are cleared: decoder 2 keeps the
                // phase-one gradient, as in the reference training loop.
                ge.zero();
                gd1.zero();
                for &i in batch {
                    let p = model.pass(&train[i]);
                    model.backprop(&train[i], &p, [0.0, a * inv, -b * inv], &mut ge, &mut gd1, &mut gd2);
                }
                opt2_e.step(&mut model.encoder, &ge);
                opt2_d.step(&mut model.decoder2, &gd2);
            }
            let n = train.len() as f64;
            model.history.push((sum1 / n, sum2 / n));
        }
        Ok(model)
    }

    pub fn score_one(&self, w: &[f64]) -> f64 {
        let z = self.encoder.forward(w);
        let w1 = self.decoder1.forward(&z);
        let w3 = self.decoder2.forward(&self.encoder.forward(&w1));
        self.params.alpha * mse(w, &w1) + self.params.beta * mse(w, &w3)
    }

    pub fn score(&self, queries: &[Vec<f64>]) -> Vec<f64> {
        queries.iter().map(|q| self.score_one(q)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn sine_windows(n: usize) -> Vec<Vec<f64>> {
        (0..n)
            .map(|i| (0..6).map(|j| 0.5 + 0.3 * (((i + j) as f64) * std::f64::consts::PI / 12.0).sin()).collect())
            .collect()
    }

    #[test]
    fn loss_gradient_matches_finite_differences() {
        let train = sine_windows(4);
        let m = UsadModel::fit(&train, UsadParams { epochs: 1, ..Default::default() }).unwrap();
        let w = &train[2];
        let c = [0.3, 0.5, -0.7];
        let loss = |m: &UsadModel| {
            let p = m.pass(w);
            c[0] * mse(w, p.d1.output()) + c[1] * mse(w, p.d2w2.output()) + c[2] * mse(w, p.d2w3.output())
        };
        let p = m.pass(w);
        let mut ge = m.encoder.zero_grads();
        let mut gd1 = m.decoder1.zero_grads();
        let mut gd2 = m.decoder2.zero_grads();
        m.backprop(w, &p, c, &mut ge, &mut gd1, &mut gd2);
        let h = 1e-6;
        for (net, grads) in [(0, &ge), (1, &gd1), (2, &gd2)] {
            for li in 0..2 {
                for j in 0..grads.weights[li].len() {
                    let bump = |d: f64| {
                        let mut mm = m.clone();
                        let target = match net {
                            0 => &mut mm.encoder,
                            1 => &mut mm.decoder1,
                            _ => &mut mm.decoder2,
                        };
                        target.layers[li].weights[j] += d;
                        loss(&mm)
                    };
                    let fd = (bump(h) - bump(-h)) / (2.0 * h);
                    assert!((fd - grads.weights[li][j]).abs() < 1e-6, "net {net} layer {li} w{j}: {fd} vs {}", grads.weights[li][j]);
                }
            }
        }
    }

    #[test]
    fn stores_alpha_beta() {
        let m = UsadModel::fit(&sine_windows(20), UsadParams { epochs: 1, ..Default::default() }).unwrap();
        assert_eq!((m.params.alpha, m.params.beta), (0.5, 0.5));
    }

    #[test]
    fn reconstruction_losses_decrease_over_first_ten_epochs() {
        let mut rng = util::rng(5);
        let train: Vec<Vec<f64>> = sine_windows(6000)
            .into_iter()
            .map(|w| w.into_iter().map(|v| v + rng.gen_range(-0.01..0.01)).collect())
            .collect();
        let m = UsadModel::fit(&train, UsadParams { epochs: 10, seed: 3, ..Default::default() }).unwrap();
        let (first, last) = (m.history[0], m.history[9]);
        assert!(last.0 <= first.0, "{:?}", m.history);
        assert!(last.1 <= first.1, "{:?}", m.history);
    }

    #[test]
    fn anomalous_window_scores_higher() {
        let train = sine_windows(400);
        let m = UsadModel::fit(&train, UsadParams { epochs: 30, seed: 1, ..Default::default() }).unwrap();
        let mut spiked = train[10].clone();
        spiked[3] = 1.0 - spiked[3];
        spiked[4] = 0.0;
        assert!(m.score_one(&spiked) > m.score_one(&train[10]));
    }
}
