//! Run configuration files.
//!
//! A config is a flat TOML table. Every key is optional and falls back to
//! [`RunConfig::default`]; `schema_version` must match when present.
//!
//! ```toml
//! schema_version = 1
//! model = "main"            # main | ez
//! n_agents = 10000
//! x = 0.37
//! total_steps = 1000000
//! equilibration_steps = 100000
//! memory_m = 2
//! initial_history = [1, 1]  # most recent movement last, 1 = up
//! vote_mode = "strategy_driven"   # strategy_driven | iid_uniform
//! seed = 1
//! rescale_k = 2
//! ez_a = 0.01
//! disperse_on_trade = false
//! ```

use std::path::Path;

use herding_core::engine::SimConfig;
use herding_core::ez_baseline::EzConfig;
use herding_core::strategy::{VoteMode, MAX_MEMORY};
use herding_core::sweep::Model;
use herding_core::voting::{ConsensusParameter, Regime};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Main,
    Ez,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VoteModeKey {
    StrategyDriven,
    IidUniform,
}

impl From<VoteModeKey> for VoteMode {
    fn from(k: VoteModeKey) -> Self {
        match k {
            VoteModeKey::StrategyDriven => VoteMode::StrategyDriven,
            VoteModeKey::IidUniform => VoteMode::IidUniform,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub schema_version: u32,
    pub model: ModelKind,
    pub n_agents: usize,
    pub x: f64,
    pub total_steps: u64,
    pub equilibration_steps: u64,
    pub memory_m: usize,
    pub initial_history: Vec<u8>,
    pub vote_mode: VoteModeKey,
    pub seed: u64,
    pub rescale_k: usize,
    pub ez_a: f64,
    pub disperse_on_trade: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            model: ModelKind::Main,
            n_agents: 10_000,
            x: 0.37,
            total_steps: 1_000_000,
            equilibration_steps: 100_000,
            memory_m: 2,
            initial_history: vec![1, 1],
            vote_mode: VoteModeKey::StrategyDriven,
            seed: 1,
            rescale_k: 2,
            ez_a: 0.01,
            disperse_on_trade: false,
        }
    }
}

fn field(field: &str, message: impl Into<String>) -> CliError {
    CliError::Config { field: field.to_string(), message: message.into() }
}

impl RunConfig {
    /// Defaults, then the file (if any), then `key=value` overrides.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::ConfigFile(format!("cannot read {}: {e}", p.display())))?;
                text.parse::<toml::Table>().map_err(|e| CliError::ConfigFile(format!("{}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        for o in overrides {
            let (key, value) = o
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("override {o:?} is not of the form key=value")))?;
            table.insert(key.trim().to_string(), parse_value(value.trim()));
        }
        let cfg: RunConfig = match toml::Value::Table(table.clone()).try_into() {
            Ok(c) => c,
            Err(e) => return Err(blame(&table, e)),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(field(
                "schema_version",
                format!("unsupported version {}, expected {SCHEMA_VERSION}", self.schema_version),
            ));
        }
        if self.n_agents < 2 {
            return Err(field("n_agents", "must be at least 2"));
        }
        if self.n_agents > u32::MAX as usize {
            return Err(field("n_agents", "too large"));
        }
        if self.equilibration_steps >= self.total_steps {
            return Err(field("equilibration_steps", "must be below total_steps"));
        }
        if self.rescale_k == 0 {
            return Err(field("rescale_k", "must be at least 1"));
        }
        match self.model {
            ModelKind::Main => {
                ConsensusParameter::new(self.x).map_err(|e| field("x", e.to_string()))?;
                if self.memory_m == 0 || self.memory_m > MAX_MEMORY {
                    return Err(field("memory_m", format!("must lie in 1..={MAX_MEMORY}")));
                }
                if self.initial_history.len() != self.memory_m {
                    return Err(field("initial_history", format!("needs exactly memory_m = {} entries", self.memory_m)));
                }
                if self.initial_history.iter().any(|b| *b > 1) {
                    return Err(field("initial_history", "entries must be 0 or 1"));
                }
            }
            ModelKind::Ez => {
                if !(self.ez_a > 0.0 && self.ez_a < 1.0) {
                    return Err(field("ez_a", "must lie in (0, 1)"));
                }
            }
        }
        Ok(())
    }

    pub fn to_model(&self) -> Result<Model, CliError> {
        self.validate()?;
        Ok(match self.model {
            ModelKind::Main => {
                let mut c = SimConfig::new(self.n_agents, self.x, self.total_steps)?;
                c.equilibration_steps = self.equilibration_steps;
                c.memory = self.memory_m;
                c.initial_history = self.initial_history.clone();
                c.vote_mode = self.vote_mode.into();
                c.seed = self.seed;
                c.rescale_k = self.rescale_k;
                c.disperse_on_trade = self.disperse_on_trade;
                Model::Main(c)
            }
            ModelKind::Ez => Model::Ez(EzConfig {
                n_agents: self.n_agents,
                a: self.ez_a,
                total_steps: self.total_steps,
                equilibration_steps: self.equilibration_steps,
                seed: self.seed,
            }),
        })
    }

    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if self.model == ModelKind::Main {
            match ConsensusParameter::new(self.x).map(|x| x.regime()) {
                Ok(Regime::AbsoluteMajority) => w.push(format!(
                    "x = {} is above 1/2: absolute majority regime, at most one option can clear the threshold",
                    self.x
                )),
                Ok(Regime::NoFragmentation) => {
                    w.push(format!("x = {} is at most 1/3: groups never fragment", self.x))
                }
                _ => {}
            }
            if self.disperse_on_trade {
                w.push("disperse_on_trade is enabled: trading groups break up".into());
            }
        }
        w
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Hex SHA-256 of the canonical TOML form.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }
}

/// Attribute a deserialization error to the first key that fails alone.
fn blame(table: &toml::Table, err: toml::de::Error) -> CliError {
    for (key, value) in table {
        let mut single = toml::Table::new();
        single.insert(key.clone(), value.clone());
        if let Err(e) = toml::Value::Table(single).try_into::<RunConfig>() {
            return field(key, e.message());
        }
    }
    CliError::ConfigFile(err.message().to_string())
}

/// TOML literal if it parses as one, otherwise a bare string.
fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}
