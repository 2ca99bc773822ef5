//! Flat `key = value` experiment configs.
//!
//! Lines are `key = value`; `#` starts a comment. Keys are dotted
//! (`train.iters`, `market.mu`, `grid.spawn_prob`). Lists are comma separated.
//! Unknown keys are rejected.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use entropic_core::envs::{BachelierParams, GridWorldConfig};
use entropic_core::nn::TrainConfig;
use entropic_core::tabular::LearningSchedule;
use entropic_core::{LossKind, RiskAversion};

use crate::BenchError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Experiment {
    GaussianTrading,
    QuadraticTrading,
    DeepHedging,
    GridTabular,
    OracleSuite,
    GradCheck,
}

impl Experiment {
    pub fn as_str(self) -> &'static str {
        match self {
            Experiment::GaussianTrading => "gaussian_trading",
            Experiment::QuadraticTrading => "quadratic_trading",
            Experiment::DeepHedging => "deep_hedging",
            Experiment::GridTabular => "grid_tabular",
            Experiment::OracleSuite => "oracle_suite",
            Experiment::GradCheck => "grad_check",
        }
    }

    fn uses_network(self) -> bool {
        matches!(self, Experiment::GaussianTrading | Experiment::QuadraticTrading | Experiment::DeepHedging)
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Experiment {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, BenchError> {
        let norm: String = s.trim().to_ascii_lowercase().chars().filter(|c| *c != '_' && *c != '-').collect();
        Ok(match norm.as_str() {
            "gaussiantrading" => Experiment::GaussianTrading,
            "quadratictrading" => Experiment::QuadraticTrading,
            "deephedging" => Experiment::DeepHedging,
            "gridtabular" => Experiment::GridTabular,
            "oraclesuite" => Experiment::OracleSuite,
            "gradcheck" => Experiment::GradCheck,
            _ => return Err(BenchError::Config(format!("unknown experiment '{s}'"))),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Profile {
    Desk,
    Full,
    FullHedging,
}

/// Training settings that apply on top of a profile; `None` keeps the profile value.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainOverrides {
    pub iters: Option<usize>,
    pub hidden: Option<Vec<usize>>,
    pub batch_size: Option<usize>,
    pub value_lr: Option<f64>,
    pub policy_lr: Option<f64>,
    pub sync_period: Option<usize>,
    pub record_every: Option<usize>,
    pub grad_value_clip: Option<f64>,
    pub grad_norm_clip: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    /// Output file stem; defaults to the experiment name.
    pub name: String,
    pub seeds: Vec<u64>,
    pub alphas: Vec<f64>,
    pub losses: Vec<LossKind>,
    pub output: PathBuf,
    pub profile: Profile,
    pub train: TrainOverrides,
    pub market: BachelierParams,
    pub strike: f64,
    pub grid: GridWorldConfig,
    pub grid_shift: f64,
    /// Q-learning budget in environment steps.
    pub grid_steps: u64,
    pub grid_epsilon: f64,
    pub schedule: LearningSchedule,
    pub tabular_episodes: usize,
}

impl ExperimentConfig {
    /// Defaults for an experiment before any keys are applied.
    pub fn defaults(experiment: Experiment) -> Self {
        let (alphas, losses, mu) = match experiment {
            Experiment::GaussianTrading => (vec![1.0], vec![LossKind::ItakuraSaito], 0.03),
            Experiment::QuadraticTrading => (vec![100.0], vec![LossKind::ItakuraSaito, LossKind::Softplus], 0.0),
            Experiment::DeepHedging => (vec![0.1, 1.0, 10.0], vec![LossKind::ItakuraSaito, LossKind::Emse], 0.0),
            Experiment::GridTabular => (vec![0.1], vec![LossKind::ItakuraSaito, LossKind::Mse], 0.0),
            Experiment::OracleSuite => (vec![0.5, 1.0], vec![LossKind::ItakuraSaito], 0.0),
            Experiment::GradCheck => (vec![0.1, 1.0, 10.0], LossKind::ALL.to_vec(), 0.0),
        };
        Self {
            experiment,
            name: experiment.as_str().to_string(),
            seeds: vec![1, 2, 3, 4, 5],
            alphas,
            losses,
            output: PathBuf::from("out"),
            profile: Profile::Desk,
            train: TrainOverrides::default(),
            market: BachelierParams::reference(mu),
            strike: 1.0,
            grid: GridWorldConfig { item_lifetime: 3, episode_length: 10, spawn_prob: 0.2, ..GridWorldConfig::square(3) },
            grid_shift: 0.5,
            grid_steps: 200_000,
            grid_epsilon: 0.1,
            schedule: LearningSchedule::default(),
            tabular_episodes: 200_000,
        }
    }

    pub fn parse(text: &str) -> Result<Self, BenchError> {
        let mut pairs = BTreeMap::new();
        let mut order = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| BenchError::Config(format!("line {}: expected key = value", i + 1)))?;
            let k = k.trim().to_string();
            if pairs.insert(k.clone(), (i + 1, v.trim().to_string())).is_some() {
                return Err(BenchError::Config(format!("line {}: duplicate key '{k}'", i + 1)));
            }
            order.push(k);
        }
        let (_, exp) = pairs
            .remove("experiment")
            .ok_or_else(|| BenchError::Config("missing key 'experiment'".into()))?;
        let mut cfg = Self::defaults(exp.parse()?);
        for key in order.iter().filter(|k| *k != "experiment") {
            let (line, value) = &pairs[key];
            cfg.apply(key, value).map_err(|e| BenchError::Config(format!("line {line}: {key}: {e}")))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply(&mut self, key: &str, v: &str) -> Result<(), String> {
        let t = &mut self.train;
        match key {
            "name" => self.name = v.to_string(),
            "seeds" => self.seeds = list(v)?,
            "alphas" | "alpha" => self.alphas = list(v)?,
            "losses" | "loss" => self.losses = list(v)?,
            "output" => self.output = PathBuf::from(v),
            "train.profile" => {
                self.profile = match v {
                    "desk" => Profile::Desk,
                    "full" => Profile::Full,
                    "full_hedging" => Profile::FullHedging,
                    _ => return Err(format!("unknown profile '{v}'")),
                }
            }
            "train.iters" => t.iters = Some(one(v)?),
            "train.hidden" => t.hidden = Some(list(v)?),
            "train.batch_size" => t.batch_size = Some(one(v)?),
            "train.value_lr" => t.value_lr = Some(one(v)?),
            "train.policy_lr" => t.policy_lr = Some(one(v)?),
            "train.sync_period" => t.sync_period = Some(one(v)?),
            "train.record_every" => t.record_every = Some(one(v)?),
            "train.grad_value_clip" => t.grad_value_clip = Some(one(v)?),
            "train.grad_norm_clip" => t.grad_norm_clip = Some(one(v)?),
            "market.mu" => self.market.mu = one(v)?,
            "market.sigma" => self.market.sigma = one(v)?,
            "market.horizon" => self.market.horizon = one(v)?,
            "market.s0" => self.market.s0 = one(v)?,
            "market.strike" => self.strike = one(v)?,
            "grid.size" => {
                let n: usize = one(v)?;
                self.grid = GridWorldConfig {
                    spawn_prob: self.grid.spawn_prob,
                    item_lifetime: self.grid.item_lifetime,
                    episode_length: self.grid.episode_length,
                    ..GridWorldConfig::square(n)
                };
            }
            "grid.spawn_prob" => self.grid.spawn_prob = one(v)?,
            "grid.lifetime" => self.grid.item_lifetime = one(v)?,
            "grid.episode_length" => self.grid.episode_length = one(v)?,
            "grid.shift" => self.grid_shift = one(v)?,
            "grid.steps" => self.grid_steps = one(v)?,
            "grid.epsilon" => self.grid_epsilon = one(v)?,
            "tabular.c" | "tabular.decay" => {
                let x: f64 = one(v)?;
                let (c, decay) = match self.schedule {
                    LearningSchedule::Harmonic { c, decay } => (c, decay),
                    LearningSchedule::Constant(c) => (c, 0.0),
                };
                self.schedule = if key == "tabular.c" {
                    LearningSchedule::Harmonic { c: x, decay }
                } else {
                    LearningSchedule::Harmonic { c, decay: x }
                };
            }
            "tabular.episodes" => self.tabular_episodes = one(v)?,
            _ => return Err("unknown key".into()),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: String| Err(BenchError::Config(m));
        if self.seeds.is_empty() || self.alphas.is_empty() || self.losses.is_empty() {
            return bad("seeds, alphas and losses must each list at least one entry".into());
        }
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return bad(format!("'{}' is not a usable output name", self.name));
        }
        for &a in &self.alphas {
            RiskAversion::new(a).map_err(|e| BenchError::Config(e.to_string()))?;
            if self.experiment.uses_network() && a <= 0.0 {
                return bad(format!("{} needs a positive alpha, got {a}", self.experiment));
            }
            if self.experiment == Experiment::QuadraticTrading && a * self.market.sigma.powi(2) >= 1.0 {
                return bad(format!("quadratic trading needs alpha * sigma^2 < 1, got {}", a * self.market.sigma.powi(2)));
            }
        }
        BachelierParams::new(self.market.mu, self.market.sigma, self.market.horizon, self.market.s0)
            .map_err(|e| BenchError::Config(e.to_string()))?;
        if self.experiment == Experiment::QuadraticTrading && self.market.mu != 0.0 {
            return bad("quadratic trading has a closed form only for mu = 0".into());
        }
        if self.experiment == Experiment::GridTabular {
            self.grid.validate().map_err(|e| BenchError::Config(e.to_string()))?;
            entropic_core::envs::gridworld_shifted(&self.grid, self.grid_shift).map_err(|e| BenchError::Config(e.to_string()))?;
            if !(self.grid_epsilon > 0.0 && self.grid_epsilon <= 1.0) {
                return bad(format!("grid.epsilon must be in (0, 1], got {}", self.grid_epsilon));
            }
        }
        self.schedule.validate().map_err(|e| BenchError::Config(e.to_string()))?;
        for &kind in &self.losses {
            for &a in &self.alphas {
                if self.experiment.uses_network() {
                    self.train_config(a, kind).validate().map_err(|e| BenchError::Config(e.to_string()))?;
                }
            }
        }
        Ok(())
    }

    /// The training configuration of one `(α, loss)` cell.
    pub fn train_config(&self, alpha: f64, kind: LossKind) -> TrainConfig {
        let ra = RiskAversion::new(alpha).unwrap_or(RiskAversion::neutral());
        let base = match self.profile {
            Profile::Desk => TrainConfig::desk(ra, kind),
            Profile::Full => TrainConfig::full(ra, kind),
            Profile::FullHedging => TrainConfig::full_hedging(ra, kind),
        };
        let t = &self.train;
        let mut cfg = match t.iters {
            Some(n) => base.with_total_iters(n),
            None => base,
        };
        if let Some(h) = &t.hidden {
            cfg.hidden = h.clone();
        }
        cfg.batch_size = t.batch_size.unwrap_or(cfg.batch_size);
        cfg.value_lr = t.value_lr.unwrap_or(cfg.value_lr);
        cfg.policy_lr = t.policy_lr.unwrap_or(cfg.policy_lr);
        cfg.target_sync_period = t.sync_period.unwrap_or(cfg.target_sync_period);
        cfg.record_every = t.record_every.unwrap_or(cfg.record_every);
        cfg.grad_value_clip = t.grad_value_clip.unwrap_or(cfg.grad_value_clip);
        cfg.grad_norm_clip = t.grad_norm_clip.unwrap_or(cfg.grad_norm_clip);
        cfg
    }
}

fn one<T: FromStr>(v: &str) -> Result<T, String>
where
    T::Err: fmt::Display,
{
    v.trim().parse().map_err(|e: T::Err| format!("cannot parse '{v}': {e}"))
}

fn list<T: FromStr>(v: &str) -> Result<Vec<T>, String>
where
    T::Err: fmt::Display,
{
    v.split(',').filter(|s| !s.trim().is_empty()).map(one).collect()
}
