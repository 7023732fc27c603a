//! `key = value` experiment configuration.

use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::attack::{AttackConfig, NoiseKind};
use crate::data::{DatasetKind, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::federation::LocalTraining;

/// Environment variable consulted when `data_dir` is not set.
pub const DATA_DIR_ENV: &str = "FEDLEAK_DATA_DIR";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scenario {
    /// One victim holding the target class plus the adversary.
    TwoUser,
    /// Ten benign clients, one per class, plus the adversary.
    ElevenUser,
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::TwoUser => "two_user",
            Scenario::ElevenUser => "eleven_user",
        })
    }
}

impl FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "two_user" => Ok(Scenario::TwoUser),
            "eleven_user" => Ok(Scenario::ElevenUser),
            other => Err(format!("unknown scenario `{other}` (two_user | eleven_user)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub dataset: DatasetKind,
    pub target_class: usize,
    pub rounds: u64,
    pub attack_threshold: f64,
    pub lr_discriminator: f32,
    pub lr_generator: f32,
    pub batch_size: usize,
    pub local_epochs: usize,
    pub gan_epochs: usize,
    pub images_per_round: usize,
    pub adversary_samples: usize,
    pub samples_per_class: usize,
    pub noise: NoiseKind,
    pub master_seed: u64,
    pub data_dir: PathBuf,
    pub out_dir: PathBuf,
    /// Fraction of clients taking part in each round.
    pub participation: f64,
    /// Fixed-noise generator samples used for the per-round distance.
    pub recon_samples: usize,
    /// Test images kept per class; 0 keeps the whole test split.
    pub test_per_class: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario: Scenario::ElevenUser,
            dataset: DatasetKind::Mnist,
            target_class: 1,
            rounds: 200,
            attack_threshold: 0.90,
            lr_discriminator: 0.005,
            lr_generator: 0.001,
            batch_size: 16,
            local_epochs: 1,
            gan_epochs: 500,
            images_per_round: 50,
            adversary_samples: 5000,
            samples_per_class: 5000,
            noise: NoiseKind::Uniform,
            master_seed: 0,
            data_dir: PathBuf::from("data"),
            out_dir: PathBuf::from("runs/latest"),
            participation: 1.0,
            recon_samples: 64,
            test_per_class: 0,
        }
    }
}

pub const KEYS: &[&str] = &[
    "scenario",
    "dataset",
    "target_class",
    "rounds",
    "attack_threshold",
    "lr_discriminator",
    "lr_generator",
    "batch_size",
    "local_epochs",
    "gan_epochs",
    "images_per_round",
    "adversary_samples",
    "samples_per_class",
    "noise",
    "master_seed",
    "data_dir",
    "out_dir",
    "participation",
    "recon_samples",
    "test_per_class",
];

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    value.parse().map_err(|e: T::Err| Error::Config {
        key: key.to_string(),
        constraint: format!("cannot parse `{value}`: {e}"),
    })
}

fn check(key: &str, ok: bool, constraint: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Config {
            key: key.to_string(),
            constraint: constraint.to_string(),
        })
    }
}

impl ExperimentConfig {
    /// Parses a config text on top of the defaults. `data_dir` falls back to
    /// `env_data_dir` when the text does not set it. Values are validated.
    pub fn parse(text: &str, env_data_dir: Option<&Path>) -> Result<Self> {
        Self::parse_with_overrides(text, &[], env_data_dir)
    }

    /// Like [`parse`](Self::parse), then applies `overrides` in order; later
    /// entries win.
    pub fn parse_with_overrides(text: &str, overrides: &[(String, String)], env_data_dir: Option<&Path>) -> Result<Self> {
        let mut cfg = Self::default();
        let mut data_dir_set = false;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Config {
                key: format!("line {}", lineno + 1),
                constraint: format!("expected `key = value`, found `{line}`"),
            })?;
            let key = key.trim();
            cfg.set(key, value.trim())?;
            data_dir_set |= key == "data_dir";
        }
        for (key, value) in overrides {
            cfg.set(key.trim(), value.trim())?;
            data_dir_set |= key.trim() == "data_dir";
        }
        if !data_dir_set {
            if let Some(dir) = env_data_dir {
                cfg.data_dir = dir.to_path_buf();
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads `path` (if given), applies overrides and the `FEDLEAK_DATA_DIR`
    /// fallback.
    pub fn load(path: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?,
            None => String::new(),
        };
        let env = std::env::var_os(DATA_DIR_ENV).map(PathBuf::from);
        Self::parse_with_overrides(&text, overrides, env.as_deref())
    }

    /// Sets a single key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "scenario" => self.scenario = parse_value(key, value)?,
            "dataset" => self.dataset = parse_value(key, value)?,
            "target_class" => self.target_class = parse_value(key, value)?,
            "rounds" => self.rounds = parse_value(key, value)?,
            "attack_threshold" => self.attack_threshold = parse_value(key, value)?,
            "lr_discriminator" => self.lr_discriminator = parse_value(key, value)?,
            "lr_generator" => self.lr_generator = parse_value(key, value)?,
            "batch_size" => self.batch_size = parse_value(key, value)?,
            "local_epochs" => self.local_epochs = parse_value(key, value)?,
            "gan_epochs" => self.gan_epochs = parse_value(key, value)?,
            "images_per_round" => self.images_per_round = parse_value(key, value)?,
            "adversary_samples" => self.adversary_samples = parse_value(key, value)?,
            "samples_per_class" => self.samples_per_class = parse_value(key, value)?,
            "noise" => self.noise = parse_value(key, value)?,
            "master_seed" => self.master_seed = parse_value(key, value)?,
            "data_dir" => self.data_dir = PathBuf::from(value),
            "out_dir" => self.out_dir = PathBuf::from(value),
            "participation" => self.participation = parse_value(key, value)?,
            "recon_samples" => self.recon_samples = parse_value(key, value)?,
            "test_per_class" => self.test_per_class = parse_value(key, value)?,
            _ => {
                return Err(Error::Config {
                    key: key.to_string(),
                    constraint: "unknown key".into(),
                })
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        check("target_class", self.target_class < NUM_CLASSES, "must be in [0, 10)")?;
        check("rounds", self.rounds >= 1, "must be >= 1")?;
        check(
            "attack_threshold",
            self.attack_threshold > 0.0 && self.attack_threshold < 1.0,
            "must be in (0, 1)",
        )?;
        check(
            "lr_discriminator",
            self.lr_discriminator.is_finite() && self.lr_discriminator >= 0.0,
            "must be finite and >= 0",
        )?;
        check(
            "lr_generator",
            self.lr_generator.is_finite() && self.lr_generator >= 0.0,
            "must be finite and >= 0",
        )?;
        check("batch_size", self.batch_size >= 1, "must be >= 1")?;
        check("local_epochs", self.local_epochs >= 1, "must be >= 1")?;
        check("images_per_round", self.images_per_round >= 1, "must be >= 1")?;
        check("samples_per_class", self.samples_per_class >= 1, "must be >= 1")?;
        check(
            "participation",
            self.participation > 0.0 && self.participation <= 1.0,
            "must be in (0, 1]",
        )?;
        check("recon_samples", self.recon_samples >= 1, "must be >= 1")?;
        Ok(())
    }

    /// Non-fatal remarks about the configuration.
    pub fn warnings(&self) -> Vec<String> {
        let usual = match self.scenario {
            Scenario::TwoUser => self.dataset == DatasetKind::Cifar10,
            Scenario::ElevenUser => self.dataset != DatasetKind::Cifar10,
        };
        if usual {
            Vec::new()
        } else {
            vec![format!(
                "scenario {} is normally run on {}, not {}",
                self.scenario,
                match self.scenario {
                    Scenario::TwoUser => "cifar10",
                    Scenario::ElevenUser => "mnist or fashion_mnist",
                },
                self.dataset
            )]
        }
    }

    pub fn attack(&self) -> AttackConfig {
        AttackConfig {
            target_class: self.target_class,
            lr_generator: self.lr_generator,
            lr_discriminator: self.lr_discriminator,
            gan_epochs: self.gan_epochs,
            batch_size: self.batch_size,
            adversary_samples: self.adversary_samples,
            noise: self.noise,
        }
    }

    pub fn local_training(&self) -> LocalTraining {
        LocalTraining {
            lr: self.lr_discriminator,
            batch_size: self.batch_size,
            local_epochs: self.local_epochs,
            images_per_round: self.images_per_round,
        }
    }

    /// Every key with its resolved value, in a form [`parse`](Self::parse)
    /// reads back to an equal config.
    pub fn to_manifest(&self) -> String {
        let mut out = String::new();
        for &key in KEYS {
            let _ = writeln!(out, "{key} = {}", self.value_of(key));
        }
        out
    }

    fn value_of(&self, key: &str) -> String {
        match key {
            "scenario" => self.scenario.to_string(),
            "dataset" => self.dataset.to_string(),
            "target_class" => self.target_class.to_string(),
            "rounds" => self.rounds.to_string(),
            "attack_threshold" => self.attack_threshold.to_string(),
            "lr_discriminator" => self.lr_discriminator.to_string(),
            "lr_generator" => self.lr_generator.to_string(),
            "batch_size" => self.batch_size.to_string(),
            "local_epochs" => self.local_epochs.to_string(),
            "gan_epochs" => self.gan_epochs.to_string(),
            "images_per_round" => self.images_per_round.to_string(),
            "adversary_samples" => self.adversary_samples.to_string(),
            "samples_per_class" => self.samples_per_class.to_string(),
            "noise" => self.noise.to_string(),
            "master_seed" => self.master_seed.to_string(),
            "data_dir" => self.data_dir.display().to_string(),
            "out_dir" => self.out_dir.display().to_string(),
            "participation" => self.participation.to_string(),
            "recon_samples" => self.recon_samples.to_string(),
            "test_per_class" => self.test_per_class.to_string(),
            _ => unreachable!("value_of({key})"),
        }
    }
}
