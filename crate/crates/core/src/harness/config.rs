//! Flat `key = value` experiment configuration.
//!
//! Keys are namespaced by section: `data.*`, `model.*`, `train.*`,
//! `attack.*` and `experiment.*`. The top-level `seed` is applied first and
//! seeds every section; an explicit section seed overrides it.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::attack::{AttackConfig, AttackType};
use crate::error::{Error, Result};
use crate::predictor::ModelConfig;
use crate::scenario::{generate_dataset, Scene, TemplateMix};
use crate::scalar::Real;
use crate::training::{GateMetric, OptimizerKind, TrainConfig};

/// Training recipe; decides which losses are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    /// Benign pre-training only, no adversarial phase.
    Benign,
    /// Adversarial training on the trajectory loss alone.
    AtBaseline,
    Ssat,
    /// Latent regularization without label supervision.
    UnsupSsat,
    MixupSsat,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Benign,
        Method::AtBaseline,
        Method::Ssat,
        Method::UnsupSsat,
        Method::MixupSsat,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Benign => "benign",
            Method::AtBaseline => "at-baseline",
            Method::Ssat => "ssat",
            Method::UnsupSsat => "unsup-ssat",
            Method::MixupSsat => "mixup-ssat",
        }
    }

    /// `cfg` with the loss switches this method prescribes.
    pub fn apply(self, cfg: &TrainConfig) -> TrainConfig {
        let (semi, reg, mixup) = match self {
            Method::Benign | Method::Ssat => (true, true, false),
            Method::AtBaseline => (false, false, false),
            Method::UnsupSsat => (false, true, false),
            Method::MixupSsat => (true, true, true),
        };
        TrainConfig {
            semi_enabled: semi,
            reg_enabled: reg,
            mixup_enabled: mixup,
            epochs: if self == Method::Benign { 0 } else { cfg.epochs },
            ..cfg.clone()
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let s = match s.as_str() {
            "at" | "at-lanegcn" => "at-baseline",
            "unsup" => "unsup-ssat",
            "mixup" => "mixup-ssat",
            other => other,
        };
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown method `{s}`")))
    }
}

/// Synthetic train/test split: `train_count + test_count` scenes generated
/// from one seed, the first `train_count` used for training.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSpec {
    pub train_count: usize,
    pub test_count: usize,
    pub seed: u64,
    pub mix: TemplateMix,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self {
            train_count: 2000,
            test_count: 400,
            seed: 0,
            mix: TemplateMix::default(),
        }
    }
}

impl DatasetSpec {
    pub fn split<T: Real>(&self) -> (Vec<Scene<T>>, Vec<Scene<T>>) {
        let mut all: Vec<Scene<T>> = generate_dataset(self.train_count + self.test_count, &self.mix, self.seed)
            .into_iter()
            .map(|(_, s)| s)
            .collect();
        let test = all.split_off(self.train_count);
        (all, test)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub seed: u64,
    pub method: Method,
    pub train_attack: AttackType,
    pub eval_attacks: Vec<AttackType>,
    pub data: DatasetSpec,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub attack: AttackConfig,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            method: Method::Ssat,
            train_attack: AttackType::Ade,
            eval_attacks: AttackType::EVAL.to_vec(),
            data: DatasetSpec::default(),
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            attack: AttackConfig::default(),
        }
    }
}

/// Parses `key = value` lines. `#` starts a comment; blank lines are
/// skipped; a repeated key is an error.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut out: Vec<(String, String)> = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(Error::Config(format!("line {}: empty key", n + 1)));
        }
        if out.iter().any(|(seen, _)| seen == k) {
            return Err(Error::Config(format!("duplicate key `{k}`")));
        }
        out.push((k.to_string(), v.to_string()));
    }
    Ok(out)
}

fn num<V: FromStr>(key: &str, v: &str) -> Result<V> {
    v.parse()
        .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{v}`")))
}

fn flag(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(Error::Config(format!("`{key}`: expected true or false, got `{v}`"))),
    }
}

fn opt_f64(key: &str, v: &str) -> Result<Option<f64>> {
    if v == "none" {
        Ok(None)
    } else {
        num(key, v).map(Some)
    }
}

fn show_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "none".to_string(), |x| x.to_string())
}

fn attack_list(v: &str) -> Result<Vec<AttackType>> {
    let list = v
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(str::parse)
        .collect::<Result<Vec<AttackType>>>()?;
    if list.is_empty() {
        return Err(Error::Config("experiment.eval_attacks is empty".into()));
    }
    Ok(list)
}

impl ExperimentSpec {
    /// Sets the top-level seed and every section seed derived from it.
    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.data.seed = seed;
        self.model.init_seed = seed;
        self.train.seed = seed;
        self.attack.seed = seed;
    }

    /// Defaults overridden by `pairs`. `seed` is applied before the other
    /// keys regardless of its position.
    pub fn from_pairs(pairs: &[(String, String)]) -> Result<Self> {
        let mut spec = Self::default();
        if let Some((_, v)) = pairs.iter().find(|(k, _)| k == "seed") {
            spec.set_seed(num("seed", v)?);
        }
        for (k, v) in pairs.iter().filter(|(k, _)| k != "seed") {
            spec.set(k, v)?;
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::from_pairs(&parse_pairs(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let (m, t, a, d) = (&mut self.model, &mut self.train, &mut self.attack, &mut self.data);
        match key {
            "seed" => self.set_seed(num(key, v)?),
            "experiment.method" => self.method = v.parse()?,
            "experiment.train_attack" => self.train_attack = v.parse()?,
            "experiment.eval_attacks" => self.eval_attacks = attack_list(v)?,
            "data.train_count" => d.train_count = num(key, v)?,
            "data.test_count" => d.test_count = num(key, v)?,
            "data.seed" => d.seed = num(key, v)?,
            "data.mix" => d.mix = v.parse()?,
            "model.embed_width" => m.embed_width = num(key, v)?,
            "model.latent_other_width" => m.latent_other_width = num(key, v)?,
            "model.conv_channels" => m.conv_channels = num(key, v)?,
            "model.neighbor_width" => m.neighbor_width = num(key, v)?,
            "model.encoder_hidden" => m.encoder_hidden = num(key, v)?,
            "model.decoder_hidden" => m.decoder_hidden = num(key, v)?,
            "model.disc_hidden" => m.disc_hidden = num(key, v)?,
            "model.position_scale" => m.position_scale = num(key, v)?,
            "model.init_seed" => m.init_seed = num(key, v)?,
            "train.success_threshold" => t.success_threshold = num(key, v)?,
            "train.gate" => t.gate = v.parse::<GateMetric>()?,
            "train.lambda_traj" => t.lambda_traj = num(key, v)?,
            "train.lambda_semi" => t.lambda_semi = num(key, v)?,
            "train.lambda_reg" => t.lambda_reg = num(key, v)?,
            "train.lambda_semi_boost" => t.lambda_semi_boost = num(key, v)?,
            "train.semi_enabled" => t.semi_enabled = flag(key, v)?,
            "train.reg_enabled" => t.reg_enabled = flag(key, v)?,
            "train.mixup_enabled" => t.mixup_enabled = flag(key, v)?,
            "train.mixup_lambda" => t.mixup_lambda = num(key, v)?,
            "train.mixup_beta" => t.mixup_beta = opt_f64(key, v)?,
            "train.optimizer" => t.optimizer = v.parse::<OptimizerKind>()?,
            "train.learning_rate" => t.learning_rate = num(key, v)?,
            "train.disc_learning_rate" => t.disc_learning_rate = num(key, v)?,
            "train.lr_decay_every" => t.lr_decay_every = num(key, v)?,
            "train.lr_decay_gamma" => t.lr_decay_gamma = num(key, v)?,
            "train.grad_clip" => t.grad_clip = opt_f64(key, v)?,
            "train.pretrain_epochs" => t.pretrain_epochs = num(key, v)?,
            "train.epochs" => t.epochs = num(key, v)?,
            "train.batch_size" => t.batch_size = num(key, v)?,
            "train.monitor_scenes" => t.monitor_scenes = num(key, v)?,
            "train.lat_prior_from_labels" => t.lat_prior_from_labels = flag(key, v)?,
            "train.seed" => t.seed = num(key, v)?,
            "attack.epsilon" => a.epsilon = num(key, v)?,
            "attack.iterations" => a.iterations = num(key, v)?,
            "attack.step_size" => a.step_size = num(key, v)?,
            "attack.keep_best" => a.keep_best = flag(key, v)?,
            "attack.random_start" => a.random_start = flag(key, v)?,
            "attack.seed" => a.seed = num(key, v)?,
            "attack.max_speed" => a.max_speed = num(key, v)?,
            "attack.max_accel" => a.max_accel = num(key, v)?,
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.effective_train().validate()?;
        self.attack.validate()
    }

    /// Training configuration with the method's loss switches applied.
    pub fn effective_train(&self) -> TrainConfig {
        self.method.apply(&self.train)
    }

    /// Every key with its effective value, in a fixed order. Parsing the
    /// result reproduces the spec.
    pub fn to_pairs(&self) -> Vec<(String, String)> {
        let (m, a, d) = (&self.model, &self.attack, &self.data);
        let t = self.effective_train();
        let evals: Vec<String> = self.eval_attacks.iter().map(|k| k.to_string()).collect();
        let pairs: Vec<(&str, String)> = vec![
            ("seed", self.seed.to_string()),
            ("experiment.method", self.method.to_string()),
            ("experiment.train_attack", self.train_attack.to_string()),
            ("experiment.eval_attacks", evals.join(",")),
            ("data.train_count", d.train_count.to_string()),
            ("data.test_count", d.test_count.to_string()),
            ("data.seed", d.seed.to_string()),
            ("data.mix", d.mix.to_string()),
            ("model.embed_width", m.embed_width.to_string()),
            ("model.latent_other_width", m.latent_other_width.to_string()),
            ("model.conv_channels", m.conv_channels.to_string()),
            ("model.neighbor_width", m.neighbor_width.to_string()),
            ("model.encoder_hidden", m.encoder_hidden.to_string()),
            ("model.decoder_hidden", m.decoder_hidden.to_string()),
            ("model.disc_hidden", m.disc_hidden.to_string()),
            ("model.position_scale", m.position_scale.to_string()),
            ("model.init_seed", m.init_seed.to_string()),
            ("train.success_threshold", t.success_threshold.to_string()),
            ("train.gate", t.gate.to_string()),
            ("train.lambda_traj", t.lambda_traj.to_string()),
            ("train.lambda_semi", t.lambda_semi.to_string()),
            ("train.lambda_reg", t.lambda_reg.to_string()),
            ("train.lambda_semi_boost", t.lambda_semi_boost.to_string()),
            ("train.semi_enabled", t.semi_enabled.to_string()),
            ("train.reg_enabled", t.reg_enabled.to_string()),
            ("train.mixup_enabled", t.mixup_enabled.to_string()),
            ("train.mixup_lambda", t.mixup_lambda.to_string()),
            ("train.mixup_beta", show_opt(t.mixup_beta)),
            ("train.optimizer", t.optimizer.to_string()),
            ("train.learning_rate", t.learning_rate.to_string()),
            ("train.disc_learning_rate", t.disc_learning_rate.to_string()),
            ("train.lr_decay_every", t.lr_decay_every.to_string()),
            ("train.lr_decay_gamma", t.lr_decay_gamma.to_string()),
            ("train.grad_clip", show_opt(t.grad_clip)),
            ("train.pretrain_epochs", t.pretrain_epochs.to_string()),
            ("train.epochs", t.epochs.to_string()),
            ("train.batch_size", t.batch_size.to_string()),
            ("train.monitor_scenes", t.monitor_scenes.to_string()),
            ("train.lat_prior_from_labels", t.lat_prior_from_labels.to_string()),
            ("train.seed", t.seed.to_string()),
            ("attack.epsilon", a.epsilon.to_string()),
            ("attack.iterations", a.iterations.to_string()),
            ("attack.step_size", a.step_size.to_string()),
            ("attack.keep_best", a.keep_best.to_string()),
            ("attack.random_start", a.random_start.to_string()),
            ("attack.seed", a.seed.to_string()),
            ("attack.max_speed", a.max_speed.to_string()),
            ("attack.max_accel", a.max_accel.to_string()),
        ];
        pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }

    pub fn to_text(&self) -> String {
        self.to_pairs()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}
