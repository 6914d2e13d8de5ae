//! Run configuration: one TOML file holding the model, training, and reward
//! settings. Missing keys take the per-domain defaults; command-line values
//! override the file.
//!
//! ```toml
//! domain = "alchemy"
//!
//! [model]
//! decoder_hidden = 64
//!
//! [train]
//! algorithm = "sestra"
//! seed = 3
//!
//! [train.reward]
//! lambda = 0.1
//! ```

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::domains::DomainKind;
use crate::error::ConfigError;
use crate::policy::ModelConfig;
use crate::training::{Algorithm, TrainConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub domain: DomainKind,
    pub model: ModelConfig,
    pub train: TrainConfig,
}

/// Values given on the command line.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub domain: Option<DomainKind>,
    pub algorithm: Option<Algorithm>,
    pub seed: Option<u64>,
    pub max_epochs: Option<usize>,
}

impl RunConfig {
    pub fn defaults(domain: DomainKind, algorithm: Algorithm, seed: u64) -> Self {
        Self {
            domain,
            model: ModelConfig::for_domain(domain),
            train: TrainConfig::new(domain, algorithm, seed),
        }
    }

    /// Layers defaults, then `file`, then `overrides`, and validates the result.
    pub fn resolve(file: Option<&str>, overrides: &Overrides) -> Result<Self, ConfigError> {
        let file: Table = match file {
            Some(text) => text
                .parse()
                .map_err(|e: toml::de::Error| ConfigError::Parse(e.message().to_string()))?,
            None => Table::new(),
        };
        let domain = match overrides.domain {
            Some(d) => d,
            None => match file.get("domain") {
                Some(v) => v
                    .as_str()
                    .ok_or_else(|| ConfigError::Schema("domain must be a string".into()))?
                    .parse()
                    .map_err(|e: crate::error::DomainError| ConfigError::Schema(e.to_string()))?,
                None => return Err(ConfigError::MissingDomain),
            },
        };
        let train = file.get("train").and_then(Value::as_table);
        let algorithm = match overrides.algorithm {
            Some(a) => a,
            None => match train.and_then(|t| t.get("algorithm")) {
                Some(v) => v
                    .as_str()
                    .ok_or_else(|| ConfigError::Schema("train.algorithm must be a string".into()))?
                    .parse()
                    .map_err(ConfigError::Schema)?,
                None => Algorithm::Sestra,
            },
        };
        let defaults = Self::defaults(domain, algorithm, 0);
        let mut merged = Value::try_from(&defaults).map_err(|e| ConfigError::Schema(e.to_string()))?;
        merge(&mut merged, Value::Table(file));
        let mut cfg: RunConfig = merged
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError::Schema(e.message().to_string()))?;
        cfg.domain = domain;
        cfg.train.algorithm = algorithm;
        if let Some(s) = overrides.seed {
            cfg.train.seed = s;
        }
        if let Some(e) = overrides.max_epochs {
            cfg.train.max_epochs = e;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.model.validate(self.domain).map_err(ConfigError::Invalid)?;
        self.train.validate().map_err(ConfigError::Invalid)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }
}

fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Table(b), Value::Table(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}
