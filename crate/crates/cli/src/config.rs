//! Experiment configuration files (TOML).
//!
//! Every field except `experiment` is optional; missing values fall back to
//! the desk-scale defaults of the chosen experiment.

use std::fmt;
use std::path::PathBuf;

use cvxnet::net::{Architecture, NetConfig};
use cvxnet::train::{LrSchedule, Schedule, TrainConfig};
use serde::{Deserialize, Serialize};

#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn bad<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Toy,
    Basket,
    Bermudan,
    Swing,
    Rates,
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Experiment::Toy => "toy",
            Experiment::Basket => "basket",
            Experiment::Bermudan => "bermudan",
            Experiment::Swing => "swing",
            Experiment::Rates => "rates",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub architecture: Option<String>,
    /// Units per layer.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    /// Number of affine layers; must agree with the architecture name.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub layers: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleKind {
    Constant,
    Decaying,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batches_per_iteration: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schedule: Option<ScheduleKind>,
    /// Constant rate, or the warm-up rate of the decaying schedule.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warm_iters: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decay: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub floor: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToySection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_xi: Option<f64>,
    /// Points of the uniform test grid.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_points: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasketSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pool_size: Option<usize>,
    /// Monte Carlo paths per training target.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mc_paths: Option<usize>,
    /// Paths of the benchmark estimate at each test point.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub benchmark_paths: Option<usize>,
    /// Test points `j` (initial prices `85 - i + 6 j`).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BermudanSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    /// Initial prices; every asset starts at the same level.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s0: Option<Vec<f64>>,
    /// One volatility for all assets, or one per asset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<Vec<f64>>,
    /// Volatilities spread over the assets instead of `sigma`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub asymmetric: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dividend: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub strike: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub maturity: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dates: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eval_paths: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SwingModeName {
    Shared,
    PerVolume,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwingSection {
    /// `[Q_lo, Q_hi]` pairs, one run each.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bands: Option<Vec<[f64; 2]>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dates: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub strike: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub days_per_year: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<SwingModeName>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eval_paths: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatesSection {
    /// Tangent counts for the sup-norm rate of `x²` on `[0, 1]`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_list: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eval_points: Option<usize>,
    /// Quantizer sizes for the L¹ bound under the uniform law.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quantizer_sizes: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sample_size: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "is_default")]
    pub net: NetSection,
    #[serde(default, skip_serializing_if = "is_default")]
    pub train: TrainSection,
    #[serde(default, skip_serializing_if = "is_default")]
    pub toy: ToySection,
    #[serde(default, skip_serializing_if = "is_default")]
    pub basket: BasketSection,
    #[serde(default, skip_serializing_if = "is_default")]
    pub bermudan: BermudanSection,
    #[serde(default, skip_serializing_if = "is_default")]
    pub swing: SwingSection,
    #[serde(default, skip_serializing_if = "is_default")]
    pub rates: RatesSection,
}

fn is_default<T: Default + PartialEq>(v: &T) -> bool {
    *v == T::default()
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment) -> Self {
        Self {
            experiment,
            seed: None,
            out: None,
            net: NetSection::default(),
            train: TrainSection::default(),
            toy: ToySection::default(),
            basket: BasketSection::default(),
            bermudan: BermudanSection::default(),
            swing: SwingSection::default(),
            rates: RatesSection::default(),
        }
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(1)
    }

    /// Checks every value the chosen experiment will read.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.experiment != Experiment::Rates {
            self.net_config()?;
            self.train_config()?;
        }
        match self.experiment {
            Experiment::Toy => {
                if self.toy_sigma() < 0.0 || !self.toy_sigma().is_finite() {
                    return bad("toy.sigma_xi: must be a non-negative number");
                }
                if self.toy.test_points == Some(0) {
                    return bad("toy.test_points: must be at least 1");
                }
            }
            Experiment::Basket => {
                let b = &self.basket;
                if b.d == Some(0) {
                    return bad("basket.d: must be at least 1");
                }
                if let Some(rho) = b.rho {
                    if !(-1.0..1.0).contains(&rho) {
                        return bad("basket.rho: must lie in [-1, 1)");
                    }
                }
                for (name, v) in [("pool_size", b.pool_size), ("mc_paths", b.mc_paths), ("benchmark_paths", b.benchmark_paths)] {
                    if v == Some(0) {
                        return bad(format!("basket.{name}: must be at least 1"));
                    }
                }
            }
            Experiment::Bermudan => {
                let b = &self.bermudan;
                if b.d == Some(0) || b.dates == Some(0) || b.eval_paths == Some(0) {
                    return bad("bermudan: d, dates and eval_paths must be at least 1");
                }
                if let Some(s) = &b.sigma {
                    let d = b.d.unwrap_or(2);
                    if s.len() != 1 && s.len() != d {
                        return bad(format!("bermudan.sigma: expected 1 or {d} values, got {}", s.len()));
                    }
                }
            }
            Experiment::Swing => {
                if self.swing.bands.as_ref().is_some_and(|b| b.is_empty()) {
                    return bad("swing.bands: need at least one [Q_lo, Q_hi] pair");
                }
                if self.swing.dates == Some(0) || self.swing.eval_paths == Some(0) {
                    return bad("swing: dates and eval_paths must be at least 1");
                }
            }
            Experiment::Rates => {
                let r = &self.rates;
                if r.n_list.as_ref().is_some_and(|v| v.is_empty() || v.contains(&0)) {
                    return bad("rates.n_list: need positive entries");
                }
                if r.quantizer_sizes.as_ref().is_some_and(|v| v.is_empty() || v.contains(&0)) {
                    return bad("rates.quantizer_sizes: need positive entries");
                }
                if r.eval_points.is_some_and(|v| v < 2) {
                    return bad("rates.eval_points: must be at least 2");
                }
            }
        }
        Ok(())
    }

    fn default_net(&self) -> (&'static str, usize, f64) {
        match self.experiment {
            Experiment::Toy => ("2-SL2SE", 32, 10.0),
            Experiment::Basket => ("2-SL2SE", 32, 20.0),
            Experiment::Bermudan => ("2-SL2SE", 64, 40.0),
            Experiment::Swing | Experiment::Rates => ("2-SL2SE", 32, 20.0),
        }
    }

    pub fn net_config(&self) -> Result<NetConfig, ConfigError> {
        let (arch, n, c) = self.default_net();
        let name = self.net.architecture.as_deref().unwrap_or(arch);
        let architecture: Architecture = name.parse().map_err(|_| ConfigError(format!("net.architecture: unknown name '{name}'")))?;
        if let Some(l) = self.net.layers {
            if l != architecture.layers() {
                return bad(format!("net.layers: {name} has {} layers, not {l}", architecture.layers()));
            }
        }
        let width = self.net.n.unwrap_or(n);
        if width == 0 {
            return bad("net.n: must be at least 1");
        }
        let c = self.net.c.unwrap_or(c);
        if !(c > 0.0 && c.is_finite()) {
            return bad("net.c: must be positive");
        }
        Ok(NetConfig { architecture, width, c })
    }

    fn default_train(&self) -> (usize, usize, usize, ScheduleKind, f64) {
        match self.experiment {
            Experiment::Toy => (4096, 200, 100, ScheduleKind::Decaying, 1e-3),
            Experiment::Basket => (64, 600, 600, ScheduleKind::Decaying, 1e-3),
            Experiment::Bermudan => (1024, 2000, 8, ScheduleKind::Constant, 1e-4),
            Experiment::Swing | Experiment::Rates => (64, 900, 16, ScheduleKind::Decaying, 1e-3),
        }
    }

    pub fn train_config(&self) -> Result<TrainConfig, ConfigError> {
        let (batch, iters, bpi, kind, lr) = self.default_train();
        let t = &self.train;
        let defaults = LrSchedule::default();
        let warm_default = if self.experiment == Experiment::Swing { 500 } else { defaults.warm_iters };
        let decay_default = if self.experiment == Experiment::Swing { 0.99 } else { defaults.decay };
        let lr = t.lr.unwrap_or(lr);
        let schedule = match t.schedule.unwrap_or(kind) {
            ScheduleKind::Constant => Schedule::Constant(lr),
            ScheduleKind::Decaying => Schedule::Decaying(LrSchedule {
                gamma0: lr,
                floor: t.floor.unwrap_or(defaults.floor),
                decay: t.decay.unwrap_or(decay_default),
                warm_iters: t.warm_iters.unwrap_or(warm_default),
            }),
        };
        let cfg = TrainConfig {
            batch_size: t.batch_size.unwrap_or(batch),
            iterations: t.iterations.unwrap_or(iters),
            batches_per_iteration: t.batches_per_iteration.unwrap_or(bpi),
            schedule,
            seed: self.seed(),
        };
        if cfg.batch_size == 0 || cfg.iterations == 0 || cfg.batches_per_iteration == 0 {
            return bad("train: batch_size, iterations and batches_per_iteration must be at least 1");
        }
        if !(lr > 0.0 && lr.is_finite()) {
            return bad("train.lr: must be positive");
        }
        if let Schedule::Decaying(s) = schedule {
            if !(s.decay > 0.0 && s.decay <= 1.0) || !(s.floor > 0.0) {
                return bad("train: need 0 < decay <= 1 and floor > 0");
            }
        }
        Ok(cfg)
    }

    pub fn toy_sigma(&self) -> f64 {
        self.toy.sigma_xi.unwrap_or(2.0)
    }
}
