//! TOML run configuration.
//!
//! A file only needs the keys it changes: it is merged over a named preset. Optional limits
//! are written as a number, or `false` to switch them off.

use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::env::EnvConfig;
use crate::eval::{SpikeConfig, ThrowConfig};
use crate::params::{Airframe, RandomizationMode};
use crate::trainer::TrainConfig;
use crate::{Error, Result};

/// `Option<f64>` as either a number or `false`.
pub mod switch {
    use serde::{Deserialize, Deserializer, Serializer};

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Value(f64),
        Flag(bool),
    }

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(x) => s.serialize_f64(*x),
            None => s.serialize_bool(false),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Value(x) => Ok(Some(x)),
            Repr::Flag(false) => Ok(None),
            Repr::Flag(true) => Err(serde::de::Error::custom("expected a number or false")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// Full-length training profile.
    #[default]
    Full,
    /// Laptop-scale profile.
    Desk,
}

impl Preset {
    pub fn parse(s: &str) -> Option<Preset> {
        match s {
            "full" | "default" => Some(Preset::Full),
            "desk" => Some(Preset::Desk),
            _ => None,
        }
    }

    pub fn train(self) -> TrainConfig {
        match self {
            Preset::Full => TrainConfig::default(),
            Preset::Desk => TrainConfig::desk(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub seed: u64,
    pub noise: bool,
    pub throw_attempts: usize,
    pub throws: ThrowConfig,
    pub spikes: SpikeConfig,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { seed: 0, noise: true, throw_attempts: 200, throws: ThrowConfig::default(), spikes: SpikeConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub eval: EvalConfig,
}

impl RunConfig {
    pub fn preset(p: Preset) -> Self {
        RunConfig { train: p.train(), eval: EvalConfig::default() }
    }

    /// Parses `text` merged over `base`.
    pub fn from_toml_over(text: &str, base: &RunConfig) -> Result<Self> {
        merged(text, base)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        merged(text, &RunConfig::default())
    }

    pub fn load(path: impl AsRef<Path>, base: &RunConfig) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        RunConfig::from_toml_over(&text, base)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()
    }
}

/// Everything needed to build a standalone simulator instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct SimConfig {
    pub airframe: Airframe,
    pub randomization: RandomizationMode,
    pub env: EnvConfig,
}

impl SimConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: SimConfig = merged(text, &SimConfig::default())?;
        cfg.env.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) if !is_tagged(b, &o) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Tagged enums switch variant wholesale instead of merging fields from the old variant.
fn is_tagged(base: &toml::Table, over: &toml::Table) -> bool {
    ["mode", "kind"].iter().any(|tag| over.get(*tag).is_some_and(|t| base.get(*tag) != Some(t)))
}

fn merged<T: Serialize + for<'de> Deserialize<'de>>(text: &str, base: &T) -> Result<T> {
    let over: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    let mut table = toml::Table::try_from(base).map_err(|e| Error::Config(e.to_string()))?;
    merge(&mut table, over);
    table.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))
}
