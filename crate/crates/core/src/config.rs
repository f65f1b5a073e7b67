//! Experiment configuration in sectioned `key = value` form.
//!
//! Every key has a default, so an empty file is a valid synthetic run. Unknown
//! sections and keys are rejected. [`ExperimentConfig::to_ini`] writes the fully
//! resolved configuration back out, and its hash identifies a run.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ini::Ini;
use serde::{Deserialize, Serialize};

use crate::detectors::{Contamination, HyperGrid, KnnMethod};
use crate::error::{Error, Result};
use crate::inject::{InjectionKind, InjectionPlan};
use crate::selector::{DqnConfig, EpsilonSchedule, RewardKind, RewardMode, RewardSpec};
use crate::series::{CsvSchema, LabelRule, ScalerKind, WindowParams};
use crate::synth::SyntheticLoad;
use crate::tsf::TsfParams;
use crate::util;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum DataSource {
    Synthetic { normal_len: usize, test_len: usize, generator: SyntheticLoad },
    /// A clean normal partition and a test partition, optionally labelled.
    Csv { normal: PathBuf, test: PathBuf, schema: CsvSchema },
}

/// Contamination as configured; `Auto` flags as many windows as are truly anomalous.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum ContaminationSetting {
    Auto,
    Fraction(f64),
}

impl ContaminationSetting {
    pub fn resolve(self, truth: &[u8]) -> Contamination {
        match self {
            Self::Auto => Contamination::Count(truth.iter().filter(|&&g| g == 1).count()),
            Self::Fraction(c) => Contamination::Fraction(c),
        }
    }
}

impl Display for ContaminationSetting {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Auto => f.write_str("auto"),
            Self::Fraction(c) => write!(f, "{c}"),
        }
    }
}

impl FromStr for ContaminationSetting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Self::Auto);
        }
        let c: f64 = s.parse().map_err(|_| Error::Config(format!("contamination `{s}` is neither a number nor auto")))?;
        if !(c > 0.0 && c < 1.0) {
            return Err(Error::Config(format!("contamination {c} outside (0, 1)")));
        }
        Ok(Self::Fraction(c))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub contamination: ContaminationSetting,
    /// Grid-search tunable detectors against the test labels.
    pub tune: bool,
    pub tune_budget: Option<usize>,
    pub seed: u64,
    pub grid: HyperGrid,
    pub osvm_max_train: usize,
    pub iforest_max_samples: usize,
    pub usad_epochs: usize,
    pub usad_batch_size: usize,
    pub usad_max_train: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TsfConfig {
    pub params: TsfParams,
    pub train_fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub data: DataSource,
    pub inject: Option<InjectionPlan>,
    pub window: WindowParams,
    pub scaler: ScalerKind,
    pub detectors: DetectorConfig,
    pub tsf: TsfConfig,
    pub reward: RewardSpec,
    pub epsilon: EpsilonSchedule,
    pub dqn: DqnConfig,
    pub total_steps: usize,
    #[serde(skip)]
    pub output_dir: PathBuf,
    #[serde(skip)]
    pub plots: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::from_ini_str("").expect("defaults are valid")
    }
}

/// Sections and keys not yet consumed; whatever is left at the end is unknown.
struct Keys {
    map: BTreeMap<String, BTreeMap<String, String>>,
}

impl Keys {
    fn take(&mut self, section: &str, key: &str) -> Option<String> {
        self.map.get_mut(section).and_then(|s| s.remove(key))
    }

    fn get<T: FromStr>(&mut self, section: &str, key: &str, default: T) -> Result<T>
    where
        T::Err: Display,
    {
        match self.take(section, key) {
            None => Ok(default),
            Some(v) => v.trim().parse().map_err(|e| Error::Config(format!("[{section}] {key} = `{v}`: {e}"))),
        }
    }

    fn opt<T: FromStr>(&mut self, section: &str, key: &str) -> Result<Option<T>>
    where
        T::Err: Display,
    {
        match self.take(section, key) {
            None => Ok(None),
            Some(v) if v.trim().eq_ignore_ascii_case("none") => Ok(None),
            Some(v) => v.trim().parse().map(Some).map_err(|e| Error::Config(format!("[{section}] {key} = `{v}`: {e}"))),
        }
    }

    fn list<T: FromStr>(&mut self, section: &str, key: &str, default: Vec<T>) -> Result<Vec<T>>
    where
        T::Err: Display,
    {
        let Some(v) = self.take(section, key) else { return Ok(default) };
        let items = v
            .split(',')
            .map(|x| x.trim().parse().map_err(|e| Error::Config(format!("[{section}] {key} item `{x}`: {e}"))))
            .collect::<Result<Vec<T>>>()?;
        if items.is_empty() {
            return Err(Error::Config(format!("[{section}] {key} is empty")));
        }
        Ok(items)
    }

    fn finish(self) -> Result<()> {
        for (section, keys) in self.map {
            if let Some(k) = keys.keys().next() {
                return Err(Error::Config(format!("unknown key `{k}` in [{section}]")));
            }
        }
        Ok(())
    }
}

const SECTIONS: [&str; 11] =
    ["experiment", "data", "inject", "window", "detectors", "tsf", "reward", "epsilon", "dqn", "output", "general"];

fn join<T: Display>(xs: &[T]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        Self::from_ini_str(&text)
    }

    /// Parses `text` after applying `section.key=value` overrides.
    pub fn from_ini_with_overrides(text: &str, overrides: &[String]) -> Result<Self> {
        let mut ini = Ini::load_from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        for o in overrides {
            let (lhs, value) = o
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override `{o}` is not section.key=value")))?;
            let (section, key) = lhs
                .trim()
                .split_once('.')
                .ok_or_else(|| Error::Config(format!("override `{o}` is not section.key=value")))?;
            ini.with_section(Some(section.trim())).set(key.trim(), value.trim());
        }
        let mut buf = Vec::new();
        ini.write_to(&mut buf)?;
        Self::from_ini_str(&String::from_utf8_lossy(&buf))
    }

    pub fn from_ini_str(text: &str) -> Result<Self> {
        let ini = Ini::load_from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let mut map: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        for (section, props) in ini.iter() {
            let name = section.unwrap_or("general").to_ascii_lowercase();
            if !SECTIONS.contains(&name.as_str()) {
                return Err(Error::Config(format!("unknown section [{name}]")));
            }
            let entry = map.entry(name.clone()).or_default();
            for (k, v) in props.iter() {
                if entry.insert(k.to_ascii_lowercase(), v.to_string()).is_some() {
                    return Err(Error::Config(format!("duplicate key `{k}` in [{name}]")));
                }
            }
        }
        let mut k = Keys { map };

        let name = k.get("experiment", "name", "experiment".to_string())?;
        let seed: u64 = k.get("experiment", "seed", 0)?;

        let source = k.get("data", "source", "synthetic".to_string())?;
        let data = match source.as_str() {
            "synthetic" => {
                let mut generator = SyntheticLoad::default();
                generator.seed = k.get("data", "generator_seed", generator.seed)?;
                DataSource::Synthetic {
                    normal_len: k.get("data", "normal_len", 35_064)?,
                    test_len: k.get("data", "test_len", 1008)?,
                    generator,
                }
            }
            "csv" => {
                let path = |k: &mut Keys, key: &str| {
                    k.take("data", key).map(PathBuf::from).ok_or_else(|| Error::Config(format!("[data] {key} is required for csv")))
                };
                let normal = path(&mut k, "normal_path")?;
                let test = path(&mut k, "test_path")?;
                let d = CsvSchema::default();
                let schema = CsvSchema {
                    timestamp: k.get("data", "timestamp_column", d.timestamp)?,
                    value: k.get("data", "value_column", d.value)?,
                    label: k.get("data", "label_column", d.label)?,
                };
                DataSource::Csv { normal, test, schema }
            }
            other => return Err(Error::Config(format!("unknown data source `{other}`"))),
        };

        let inject = if k.get("inject", "enabled", true)? {
            let mut plan = InjectionPlan::new(
                k.get("inject", "kind", InjectionKind::Mixed)?,
                k.get("inject", "rate", 0.05)?,
                k.get("inject", "seed", seed)?,
            );
            plan.global_u = (k.get("inject", "global_u_min", plan.global_u.0)?, k.get("inject", "global_u_max", plan.global_u.1)?);
            plan.local_k = (k.get("inject", "local_k_min", plan.local_k.0)?, k.get("inject", "local_k_max", plan.local_k.1)?);
            plan.cluster_len_range = (
                k.get("inject", "cluster_min", plan.cluster_len_range.0)?,
                k.get("inject", "cluster_max", plan.cluster_len_range.1)?,
            );
            plan.edge_margin = k.get("inject", "edge_margin", plan.edge_margin)?;
            Some(plan)
        } else {
            for key in ["kind", "rate", "seed"] {
                k.take("inject", key);
            }
            None
        };

        let wd = WindowParams::default();
        let window = WindowParams {
            width: k.get("window", "width", wd.width)?,
            step: k.get("window", "step", wd.step)?,
            label_rule: k.get("window", "label_rule", LabelRule::Any)?,
            max_gap_hours: match k.take("window", "max_gap_hours") {
                None => wd.max_gap_hours,
                Some(v) if v.trim().eq_ignore_ascii_case("none") => None,
                Some(v) => Some(v.trim().parse().map_err(|_| Error::Config(format!("[window] max_gap_hours = `{v}`")))?),
            },
        };
        let scaler = k.get("window", "scaler", ScalerKind::MinMax)?;

        let g = HyperGrid::default();
        let detectors = DetectorConfig {
            contamination: k.get("detectors", "contamination", ContaminationSetting::Auto)?,
            tune: k.get("detectors", "tune", true)?,
            tune_budget: k.opt("detectors", "tune_budget")?,
            seed: k.get("detectors", "seed", seed)?,
            grid: HyperGrid {
                knn_n_neighbors: k.list("detectors", "knn_n_neighbors", g.knn_n_neighbors)?,
                knn_method: k.list::<KnnMethod>("detectors", "knn_method", g.knn_method)?,
                osvm_nu: k.list("detectors", "osvm_nu", g.osvm_nu)?,
                iforest_n_estimators: k.list("detectors", "iforest_n_estimators", g.iforest_n_estimators)?,
                iforest_max_features: k.list("detectors", "iforest_max_features", g.iforest_max_features)?,
                usad_alpha: k.list("detectors", "usad_alpha", g.usad_alpha)?,
            },
            osvm_max_train: k.get("detectors", "osvm_max_train", 2000)?,
            iforest_max_samples: k.get("detectors", "iforest_max_samples", 256)?,
            usad_epochs: k.get("detectors", "usad_epochs", 100)?,
            usad_batch_size: k.get("detectors", "usad_batch_size", 64)?,
            usad_max_train: k.get("detectors", "usad_max_train", 0)?,
        };

        let td = TsfParams::default();
        let tsf = TsfConfig {
            params: TsfParams {
                n_trees: k.get("tsf", "n_trees", td.n_trees)?,
                min_interval: k.get("tsf", "min_interval", td.min_interval)?,
                max_depth: k.opt("tsf", "max_depth")?,
                seed: k.get("tsf", "seed", seed)?,
            },
            train_fraction: k.get("tsf", "train_fraction", 0.2)?,
        };

        let reward = RewardSpec {
            kind: k.get("reward", "kind", RewardKind::Original)?,
            mode: k.get("reward", "mode", RewardMode::Mixed)?,
            counter_period: k.get("reward", "counter_period", 100)?,
            swap_errors: k.get("reward", "swap_errors", false)?,
        };

        let schedule = k.get("epsilon", "schedule", "decaying".to_string())?;
        let epsilon = match schedule.as_str() {
            "decaying" => EpsilonSchedule::Decaying {
                start: k.get("epsilon", "start", 1.0)?,
                end: k.get("epsilon", "end", 0.05)?,
                fraction: k.get("epsilon", "fraction", 0.7)?,
            },
            "constant" => EpsilonSchedule::Constant { value: k.get("epsilon", "value", 0.05)? },
            other => return Err(Error::Config(format!("unknown epsilon schedule `{other}`"))),
        };

        let dd = DqnConfig::default();
        let dqn = DqnConfig {
            hidden: k.list("dqn", "hidden", dd.hidden)?,
            buffer_capacity: k.get("dqn", "buffer_capacity", dd.buffer_capacity)?,
            batch_size: k.get("dqn", "batch_size", dd.batch_size)?,
            learning_rate: k.get("dqn", "learning_rate", dd.learning_rate)?,
            gamma: k.get("dqn", "gamma", dd.gamma)?,
            target_update: k.get("dqn", "target_update", dd.target_update)?,
            train_freq: k.get("dqn", "train_freq", dd.train_freq)?,
            learning_starts: k.get("dqn", "learning_starts", dd.learning_starts)?,
            max_grad_norm: k.get("dqn", "max_grad_norm", dd.max_grad_norm)?,
            huber_delta: k.get("dqn", "huber_delta", dd.huber_delta)?,
            seed: k.get("dqn", "seed", seed)?,
        };
        let total_steps = k.get("dqn", "total_steps", 60_000)?;

        let output_dir = PathBuf::from(k.get("output", "dir", "out".to_string())?);
        let plots = k.get("output", "plots", true)?;
        k.finish()?;

        let cfg = Self {
            name,
            data,
            inject,
            window,
            scaler,
            detectors,
            tsf,
            reward,
            epsilon,
            dqn,
            total_steps,
            output_dir,
            plots,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.window.width == 0 || self.window.step == 0 {
            return bad("window width and step must be positive".into());
        }
        if !(self.tsf.train_fraction > 0.0 && self.tsf.train_fraction < 1.0) {
            return bad(format!("tsf train_fraction {} outside (0, 1)", self.tsf.train_fraction));
        }
        if self.tsf.params.n_trees == 0 {
            return bad("tsf n_trees must be positive".into());
        }
        if self.reward.counter_period == 0 {
            return bad("reward counter_period must be positive".into());
        }
        if let Some(plan) = &self.inject {
            if !(plan.rate > 0.0 && plan.rate < 1.0) {
                return bad(format!("injection rate {} outside (0, 1)", plan.rate));
            }
        }
        if let DataSource::Synthetic { normal_len, test_len, .. } = self.data {
            if normal_len < self.window.width || test_len < self.window.width {
                return bad("synthetic partitions are shorter than one window".into());
            }
        }
        self.dqn.validate()
    }

    /// Identifies the run: everything except the output location.
    pub fn hash(&self) -> String {
        util::sha256_hex(&serde_json::to_vec(self).expect("config serializes"))
    }

    pub fn to_ini(&self) -> String {
        let mut s = String::new();
        let mut section = |name: &str, entries: Vec<(&str, String)>| {
            s.push_str(&format!("[{name}]\n"));
            for (k, v) in entries {
                s.push_str(&format!("{k} = {v}\n"));
            }
            s.push('\n');
        };
        section("experiment", vec![("name", self.name.clone())]);
        match &self.data {
            DataSource::Synthetic { normal_len, test_len, generator } => section(
                "data",
                vec![
                    ("source", "synthetic".into()),
                    ("normal_len", normal_len.to_string()),
                    ("test_len", test_len.to_string()),
                    ("generator_seed", generator.seed.to_string()),
                ],
            ),
            DataSource::Csv { normal, test, schema } => section(
                "data",
                vec![
                    ("source", "csv".into()),
                    ("normal_path", normal.display().to_string()),
                    ("test_path", test.display().to_string()),
                    ("timestamp_column", schema.timestamp.clone()),
                    ("value_column", schema.value.clone()),
                    ("label_column", schema.label.clone()),
                ],
            ),
        }
        match &self.inject {
            Some(p) => section(
                "inject",
                vec![
                    ("enabled", "true".into()),
                    ("kind", p.kind.to_string()),
                    ("rate", p.rate.to_string()),
                    ("seed", p.seed.to_string()),
                    ("global_u_min", p.global_u.0.to_string()),
                    ("global_u_max", p.global_u.1.to_string()),
                    ("local_k_min", p.local_k.0.to_string()),
                    ("local_k_max", p.local_k.1.to_string()),
                    ("cluster_min", p.cluster_len_range.0.to_string()),
                    ("cluster_max", p.cluster_len_range.1.to_string()),
                    ("edge_margin", p.edge_margin.to_string()),
                ],
            ),
            None => section("inject", vec![("enabled", "false".into())]),
        }
        section(
            "window",
            vec![
                ("width", self.window.width.to_string()),
                ("step", self.window.step.to_string()),
                ("label_rule", self.window.label_rule.to_string()),
                ("max_gap_hours", self.window.max_gap_hours.map_or("none".into(), |h| h.to_string())),
                ("scaler", self.scaler.to_string()),
            ],
        );
        let d = &self.detectors;
        section(
            "detectors",
            vec![
                ("contamination", d.contamination.to_string()),
                ("tune", d.tune.to_string()),
                ("tune_budget", d.tune_budget.map_or("none".into(), |b| b.to_string())),
                ("seed", d.seed.to_string()),
                ("knn_n_neighbors", join(&d.grid.knn_n_neighbors)),
                ("knn_method", join(&d.grid.knn_method)),
                ("osvm_nu", join(&d.grid.osvm_nu)),
                ("iforest_n_estimators", join(&d.grid.iforest_n_estimators)),
                ("iforest_max_features", join(&d.grid.iforest_max_features)),
                ("usad_alpha", join(&d.grid.usad_alpha)),
                ("osvm_max_train", d.osvm_max_train.to_string()),
                ("iforest_max_samples", d.iforest_max_samples.to_string()),
                ("usad_epochs", d.usad_epochs.to_string()),
                ("usad_batch_size", d.usad_batch_size.to_string()),
                ("usad_max_train", d.usad_max_train.to_string()),
            ],
        );
        section(
            "tsf",
            vec![
                ("n_trees", self.tsf.params.n_trees.to_string()),
                ("min_interval", self.tsf.params.min_interval.to_string()),
                ("max_depth", self.tsf.params.max_depth.map_or("none".into(), |d| d.to_string())),
                ("seed", self.tsf.params.seed.to_string()),
                ("train_fraction", self.tsf.train_fraction.to_string()),
            ],
        );
        section(
            "reward",
            vec![
                ("kind", self.reward.kind.to_string()),
                ("mode", self.reward.mode.name().into()),
                ("counter_period", self.reward.counter_period.to_string()),
                ("swap_errors", self.reward.swap_errors.to_string()),
            ],
        );
        match self.epsilon {
            EpsilonSchedule::Decaying { start, end, fraction } => section(
                "epsilon",
                vec![
                    ("schedule", "decaying".into()),
                    ("start", start.to_string()),
                    ("end", end.to_string()),
                    ("fraction", fraction.to_string()),
                ],
            ),
            EpsilonSchedule::Constant { value } => {
                section("epsilon", vec![("schedule", "constant".into()), ("value", value.to_string())])
            }
        }
        let q = &self.dqn;
        section(
            "dqn",
            vec![
                ("total_steps", self.total_steps.to_string()),
                ("hidden", join(&q.hidden)),
                ("buffer_capacity", q.buffer_capacity.to_string()),
                ("batch_size", q.batch_size.to_string()),
                ("learning_rate", q.learning_rate.to_string()),
                ("gamma", q.gamma.to_string()),
                ("target_update", q.target_update.to_string()),
                ("train_freq", q.train_freq.to_string()),
                ("learning_starts", q.learning_starts.to_string()),
                ("max_grad_norm", q.max_grad_norm.to_string()),
                ("huber_delta", q.huber_delta.to_string()),
                ("seed", q.seed.to_string()),
            ],
        );
        section(
            "output",
            vec![("dir", self.output_dir.display().to_string()), ("plots", self.plots.to_string())],
        );
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = ExperimentConfig::from_ini_str("").unwrap();
        assert_eq!(c.window.width, 6);
        assert_eq!(c.detectors.contamination, ContaminationSetting::Auto);
        assert_eq!(c.total_steps, 60_000);
        assert_eq!(c.reward.kind, RewardKind::Original);
        assert!(matches!(c.data, DataSource::Synthetic { normal_len: 35_064, test_len: 1008, .. }));
    }

    #[test]
    fn unknown_keys_and_sections_rejected() {
        let e = ExperimentConfig::from_ini_str("[dqn]\nlearning_rat = 0.1\n").unwrap_err();
        assert!(e.to_string().contains("learning_rat"), "{e}");
        assert!(ExperimentConfig::from_ini_str("[dqnn]\nseed = 1\n").is_err());
        assert!(ExperimentConfig::from_ini_str("stray = 1\n").is_err());
    }

    #[test]
    fn bad_values_rejected() {
        assert!(ExperimentConfig::from_ini_str("[detectors]\ncontamination = 1.5\n").is_err());
        assert!(ExperimentConfig::from_ini_str("[reward]\nkind = r9\n").is_err());
        assert!(ExperimentConfig::from_ini_str("[window]\nwidth = six\n").is_err());
        assert!(ExperimentConfig::from_ini_str("[dqn]\nbatch_size = 0\n").is_err());
    }

    #[test]
    fn round_trip_through_text() {
        let text = "[reward]\nkind = adapinc\nmode = class_only\n[epsilon]\nschedule = constant\nvalue = 0.5\n\
                    [detectors]\ncontamination = 0.05\nknn_n_neighbors = 1,5\n[inject]\nkind = local\nrate = 0.02\n";
        let c = ExperimentConfig::from_ini_str(text).unwrap();
        assert_eq!(c.epsilon, EpsilonSchedule::Constant { value: 0.5 });
        assert_eq!(c.detectors.grid.knn_n_neighbors, vec![1, 5]);
        let again = ExperimentConfig::from_ini_str(&c.to_ini()).unwrap();
        assert_eq!(again, c);
        assert_eq!(again.hash(), c.hash());
    }

    #[test]
    fn inline_comments() {
        let cfg = ExperimentConfig::from_ini_str("[window]\nwidth = 8 ; hours\nlabel_rule = last # rule\n").unwrap();
        assert_eq!(cfg.window.width, 8);
        assert_eq!(cfg.window.label_rule, LabelRule::Last);
    }

    #[test]
    fn hash_ignores_output_dir_but_not_seeds() {
        let a = ExperimentConfig::from_ini_str("[output]\ndir = a\n").unwrap();
        let b = ExperimentConfig::from_ini_str("[output]\ndir = b\n").unwrap();
        let c = ExperimentConfig::from_ini_str("[experiment]\nseed = 3\n").unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn overrides_replace_and_validate() {
        let c = ExperimentConfig::from_ini_with_overrides("[dqn]\nseed = 1\n", &["dqn.seed=9".into(), "reward.kind = r2".into()])
            .unwrap();
        assert_eq!(c.dqn.seed, 9);
        assert_eq!(c.reward.kind, RewardKind::R2);
        assert!(ExperimentConfig::from_ini_with_overrides("", &["dqn.sead=1".into()]).is_err());
        assert!(ExperimentConfig::from_ini_with_overrides("", &["novalue".into()]).is_err());
    }

    #[test]
    fn auto_contamination_counts_truth() {
        assert_eq!(ContaminationSetting::Auto.resolve(&[0, 1, 1, 0]), Contamination::Count(2));
    }
}
