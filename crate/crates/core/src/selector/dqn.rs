use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Activation, Adam, Dense, Mlp};
use crate::util;
use crate::POOL_SIZE;

use super::env::SelectionEnv;
use super::epsilon::EpsilonSchedule;

const MAGIC: &[u8; 8] = b"RLADQNET";
const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DqnConfig {
    pub hidden: Vec<usize>,
    pub buffer_capacity: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub gamma: f64,
    /// Target network sync period, counted in gradient updates.
    pub target_update: usize,
    /// Environment steps between gradient updates.
    pub train_freq: usize,
    /// Minimum replay size before the first update; never below `batch_size`.
    pub learning_starts: usize,
    pub max_grad_norm: f64,
    pub huber_delta: f64,
    pub seed: u64,
}

impl Default for DqnConfig {
    fn default() -> Self {
        Self {
            hidden: vec![64, 64],
            buffer_capacity: 100_000,
            batch_size: 32,
            learning_rate: 1e-4,
            gamma: 1.0,
            target_update: 1000,
            train_freq: 4,
            learning_starts: 0,
            max_grad_norm: 10.0,
            huber_delta: 1.0,
            seed: 0,
        }
    }
}

impl DqnConfig {
    pub fn hash(&self) -> String {
        util::sha256_hex(&serde_json::to_vec(self).expect("config serializes"))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.batch_size == 0 || self.buffer_capacity < self.batch_size {
            return bad("replay capacity must hold at least one batch");
        }
        if self.train_freq == 0 || self.target_update == 0 {
            return bad("train_freq and target_update must be positive");
        }
        if !(self.learning_rate > 0.0) || !(0.0..=1.0).contains(&self.gamma) {
            return bad("learning_rate must be positive and gamma within [0, 1]");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug)]
struct Transition {
    state: usize,
    action: usize,
    reward: f64,
    next: Option<usize>,
}

/// One row of the training log, written at the end of every episode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub step: usize,
    pub epsilon: f64,
    /// Mean loss over the episode's updates; NaN before the first update.
    pub loss: f64,
    pub episode_return: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutcome {
    pub log: Vec<LogRow>,
    pub updates: usize,
}

impl TrainOutcome {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["step", "epsilon", "loss", "episode_return"])?;
        for r in &self.log {
            let loss = if r.loss.is_nan() { String::new() } else { r.loss.to_string() };
            w.write_record([r.step.to_string(), r.epsilon.to_string(), loss, r.episode_return.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalStep {
    pub window_index: usize,
    pub chosen_detector: usize,
    pub label: u8,
}

impl EvalStep {
    pub fn labels(steps: &[EvalStep]) -> Vec<u8> {
        steps.iter().map(|s| s.label).collect()
    }

    pub fn write_csv<W: Write>(steps: &[EvalStep], out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["window_index", "chosen_detector", "label"])?;
        for s in steps {
            let name = crate::DetectorKind::ALL[s.chosen_detector].name();
            w.write_record([s.window_index.to_string(), name.to_string(), s.label.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DqnPolicy {
    pub config: DqnConfig,
    pub online: Mlp,
    target: Mlp,
}

fn argmax(q: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in q.iter().enumerate() {
        if *v > q[best] {
            best = i;
        }
    }
    best
}

impl DqnPolicy {
    pub fn new(state_dim: usize, config: DqnConfig) -> Result<Self> {
        config.validate()?;
        let mut sizes = vec![state_dim];
        sizes.extend(&config.hidden);
        sizes.push(POOL_SIZE);
        let mut rng = util::rng(util::derive_seed(config.seed, 0));
        let online = Mlp::new(&sizes, Activation::Relu, Activation::Identity, &mut rng);
        Ok(Self { target: online.clone(), online, config })
    }

    pub fn state_dim(&self) -> usize {
        self.online.in_dim()
    }

    pub fn q_values(&self, state: &[f64]) -> Vec<f64> {
        self.online.forward(state)
    }

    /// Greedy action; ties go to the lowest detector index.
    pub fn act(&self, state: &[f64]) -> usize {
        argmax(&self.q_values(state))
    }

    pub fn train(&mut self, env: &mut SelectionEnv, total_steps: usize, schedule: &EpsilonSchedule) -> Result<TrainOutcome> {
        if total_steps < env.len() {
            return Err(Error::InvalidInput(format!(
                "budget of {total_steps} steps is shorter than one episode ({})",
                env.len()
            )));
        }
        if env.state_dim() != self.state_dim() {
            return Err(Error::DimensionMismatch { expected: self.state_dim(), got: env.state_dim() });
        }
        let cfg = self.config.clone();
        let mut rng = util::rng(util::derive_seed(cfg.seed, 1));
        let mut adam = Adam::new(&self.online, cfg.learning_rate);
        let capacity = cfg.buffer_capacity.min(total_steps);
        let warmup = cfg.learning_starts.max(cfg.batch_size);
        let mut buffer: Vec<Transition> = Vec::with_capacity(capacity);
        let mut head = 0;
        let (mut updates, mut loss_sum, mut loss_n, mut ret) = (0, 0.0, 0usize, 0.0);
        let mut log = Vec::new();
        let mut state = env.reset();
        for step in 0..total_steps {
            let eps = schedule.value(step, total_steps);
            let action = if rng.gen::<f64>() < eps {
                rng.gen_range(0..POOL_SIZE)
            } else {
                self.act(env.state(state))
            };
            let res = env.step(action)?;
            let t = Transition { state, action, reward: res.reward, next: res.next };
            if buffer.len() < capacity {
                buffer.push(t);
            } else {
                buffer[head] = t;
            }
            head = (head + 1) % capacity;
            ret += res.reward;
            if (step + 1) % cfg.train_freq == 0 && buffer.len() >= warmup {
                loss_sum += self.update(env, &buffer, &mut adam, &mut rng);
                loss_n += 1;
                updates += 1;
                if updates % cfg.target_update == 0 {
                    self.target.copy_from(&self.online);
                }
            }
            match res.next {
                Some(next) => state = next,
                None => {
                    let loss = if loss_n == 0 { f64::NAN } else { loss_sum / loss_n as f64 };
                    log.push(LogRow { step: step + 1, epsilon: eps, loss, episode_return: ret });
                    (loss_sum, loss_n, ret) = (0.0, 0, 0.0);
                    state = env.reset();
                }
            }
        }
        Ok(TrainOutcome { log, updates })
    }

    /// One Huber-loss gradient step on a uniformly sampled batch; returns the batch loss.
    fn update(&mut self, env: &SelectionEnv, buffer: &[Transition], adam: &mut Adam, rng: &mut impl Rng) -> f64 {
        let cfg = &self.config;
        let mut grads = self.online.zero_grads();
        let mut loss = 0.0;
        let n = cfg.batch_size as f64;
        let mut grad_out = [0.0; POOL_SIZE];
        for _ in 0..cfg.batch_size {
            let t = buffer[rng.gen_range(0..buffer.len())];
            let bootstrap = t.next.map_or(0.0, |s| {
                self.target.forward(env.state(s)).into_iter().fold(f64::NEG_INFINITY, f64::max)
            });
            let y = t.reward + cfg.gamma * bootstrap;
            let trace = self.online.trace(env.state(t.state));
            let delta = trace.output()[t.action] - y;
            let d = cfg.huber_delta;
            loss += if delta.abs() <= d { 0.5 * delta * delta } else { d * (delta.abs() - 0.5 * d) };
            grad_out.fill(0.0);
            grad_out[t.action] = delta.clamp(-d, d) / n;
            self.online.backward(&trace, &grad_out, &mut grads);
        }
        grads.clip_norm(cfg.max_grad_norm);
        adam.step(&mut self.online, &grads);
        loss / n
    }

    /// One greedy pass over every window.
    pub fn evaluate(&self, env: &SelectionEnv) -> Result<Vec<EvalStep>> {
        if env.state_dim() != self.state_dim() {
            return Err(Error::DimensionMismatch { expected: self.state_dim(), got: env.state_dim() });
        }
        Ok((0..env.len())
            .map(|t| {
                let a = self.act(env.state(t));
                EvalStep { window_index: t, chosen_detector: a, label: env.label(t, a) }
            })
            .collect())
    }

    pub fn write_checkpoint<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(MAGIC)?;
        out.write_u32::<LittleEndian>(VERSION)?;
        let hash = self.config.hash();
        let cfg = serde_json::to_vec(&self.config)?;
        for blob in [hash.as_bytes(), cfg.as_slice()] {
            out.write_u32::<LittleEndian>(blob.len() as u32)?;
            out.write_all(blob)?;
        }
        out.write_u32::<LittleEndian>(self.online.layers.len() as u32)?;
        for l in &self.online.layers {
            out.write_u32::<LittleEndian>(l.in_dim as u32)?;
            out.write_u32::<LittleEndian>(l.out_dim as u32)?;
            out.write_u8(match l.activation {
                Activation::Identity => 0,
                Activation::Relu => 1,
                Activation::Sigmoid => 2,
            })?;
            for v in l.weights.iter().chain(&l.bias) {
                out.write_f64::<LittleEndian>(*v)?;
            }
        }
        Ok(())
    }

    pub fn read_checkpoint<R: Read>(mut input: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("not a policy checkpoint".into()));
        }
        let version = input.read_u32::<LittleEndian>()?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported checkpoint version {version}")));
        }
        let mut blob = || -> Result<Vec<u8>> {
            let len = input.read_u32::<LittleEndian>()? as usize;
            let mut b = vec![0u8; len];
            input.read_exact(&mut b)?;
            Ok(b)
        };
        let hash = String::from_utf8(blob()?).map_err(|e| Error::Format(e.to_string()))?;
        let config: DqnConfig = serde_json::from_slice(&blob()?)?;
        if config.hash() != hash {
            return Err(Error::Format("checkpoint config hash mismatch".into()));
        }
        let n_layers = input.read_u32::<LittleEndian>()? as usize;
        let mut layers = Vec::with_capacity(n_layers);
        for _ in 0..n_layers {
            let in_dim = input.read_u32::<LittleEndian>()? as usize;
            let out_dim = input.read_u32::<LittleEndian>()? as usize;
            let activation = match input.read_u8()? {
                0 => Activation::Identity,
                1 => Activation::Relu,
                2 => Activation::Sigmoid,
                x => return Err(Error::Format(format!("unknown activation tag {x}"))),
            };
            let mut read = |k: usize| -> Result<Vec<f64>> {
                (0..k).map(|_| Ok(input.read_f64::<LittleEndian>()?)).collect()
            };
            let weights = read(in_dim * out_dim)?;
            let bias = read(out_dim)?;
            layers.push(Dense { in_dim, out_dim, weights, bias, activation });
        }
        if layers.last().map(|l| l.out_dim) != Some(POOL_SIZE) {
            return Err(Error::Format("checkpoint network has the wrong action count".into()));
        }
        let online = Mlp { layers };
        Ok(Self { target: online.clone(), online, config })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_checkpoint(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_checkpoint(BufReader::new(File::open(path)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::selector::{RewardMode, RewardSpec};
    use crate::signals::{DetectorSignals, SignalTable};
    use crate::DetectorKind;

    /// Detector 2 is always right; the others are right only on normal windows.
    fn env(n: usize, seed: u64) -> SelectionEnv {
        let mut rng = util::rng(seed);
        let truth: Vec<u8> = (0..n).map(|_| rng.gen_bool(0.2) as u8).collect();
        let detectors = DetectorKind::ALL
            .iter()
            .map(|&kind| {
                let labels: Vec<u8> = if kind.index() == 2 { truth.clone() } else { vec![0; n] };
                DetectorSignals {
                    kind,
                    scaled: labels.iter().map(|&l| l as f64).collect(),
                    threshold: 0.5,
                    dist_conf: labels.iter().map(|&l| if l == 1 { 0.5 } else { -0.5 }).collect(),
                    consensus_conf: vec![0.5; n],
                    labels,
                }
            })
            .collect();
        let values = truth.iter().map(|&g| vec![g as f64 * 0.8 + 0.1; 6]).collect();
        let table = SignalTable { width: 6, values, detectors, ground_truth: truth };
        SelectionEnv::new(&table, &vec![vec![1; n]; POOL_SIZE], &vec![1; n], RewardSpec::new(
            crate::RewardKind::Original,
            RewardMode::GtruthOnly,
        ))
        .unwrap()
    }

    fn cfg(seed: u64) -> DqnConfig {
        DqnConfig { learning_rate: 1e-3, target_update: 100, seed, ..Default::default() }
    }

    #[test]
    fn learns_to_trust_the_right_detector() {
        let mut e = env(200, 1);
        let mut p = DqnPolicy::new(e.state_dim(), cfg(3)).unwrap();
        let out = p.train(&mut e, 8000, &EpsilonSchedule::default()).unwrap();
        assert_eq!(out.log.len(), 40);
        let steps = p.evaluate(&e).unwrap();
        assert_eq!(EvalStep::labels(&steps), e.truth());
    }

    #[test]
    fn training_is_deterministic() {
        let run = || {
            let mut e = env(100, 2);
            let mut p = DqnPolicy::new(e.state_dim(), cfg(5)).unwrap();
            let out = p.train(&mut e, 500, &EpsilonSchedule::default()).unwrap();
            (p.online, out.log.iter().map(|r| r.episode_return).collect::<Vec<_>>())
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn checkpoint_round_trip() {
        let p = DqnPolicy::new(36, cfg(7)).unwrap();
        let mut buf = Vec::new();
        p.write_checkpoint(&mut buf).unwrap();
        let q = DqnPolicy::read_checkpoint(buf.as_slice()).unwrap();
        assert_eq!(q.online, p.online);
        assert_eq!(q.config, p.config);
        buf[0] = b'X';
        assert!(DqnPolicy::read_checkpoint(buf.as_slice()).is_err());
    }

    #[test]
    fn rejects_short_budget_and_bad_config() {
        let mut e = env(50, 3);
        let mut p = DqnPolicy::new(e.state_dim(), cfg(0)).unwrap();
        assert!(p.train(&mut e, 49, &EpsilonSchedule::default()).is_err());
        assert!(DqnPolicy::new(36, DqnConfig { batch_size: 0, ..Default::default() }).is_err());
    }

    #[test]
    fn greedy_ties_pick_lowest_index() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0, 0.0]), 1);
    }

    #[test]
    fn log_csv_header() {
        let out = TrainOutcome {
            log: vec![LogRow { step: 10, epsilon: 0.5, loss: f64::NAN, episode_return: 2.5 }],
            updates: 0,
        };
        let mut buf = Vec::new();
        out.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "step,epsilon,loss,episode_return\n10,0.5,,2.5\n");
    }
}
