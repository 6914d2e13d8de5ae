//! World-state encoders, one per domain.

use autodiff::nn::{bidirectional_encode, glorot_init, lstm_sequence, LstmParams};
use autodiff::{Graph, ParamId, ParamSet, Tensor, Var};
use rand::RngCore;

use super::ModelConfig;
use crate::domains::{Alchemy, DomainKind, Scene, Tangrams, COLORS, SCENE_POSITIONS, SHAPES, TANGRAMS_MAX_LEN};
use crate::env::Domain;
use crate::error::PolicyError;

/// A domain whose states the policy can embed as a set of key vectors.
pub trait StateEncoding: Domain {
    type Encoder: Clone + std::fmt::Debug + Send + Sync;

    fn kind(&self) -> DomainKind;

    /// Identifies the domain variant in saved models.
    fn fingerprint(&self) -> String {
        self.name().to_string()
    }

    fn register_encoder(&self, params: &mut ParamSet, cfg: &ModelConfig, rng: &mut dyn RngCore) -> Result<Self::Encoder, PolicyError>;

    /// Width of every key vector.
    fn key_dim(&self, cfg: &ModelConfig) -> usize;

    fn encode_state(&self, g: &mut Graph, enc: &Self::Encoder, state: &Self::State) -> Result<Vec<Var>, PolicyError>;

    /// One human-readable label per key, for attention dumps.
    fn key_labels(&self, state: &Self::State) -> Vec<String>;
}

fn state_hidden(cfg: &ModelConfig) -> Result<usize, PolicyError> {
    cfg.state_hidden
        .filter(|&h| h > 0)
        .ok_or_else(|| PolicyError::Config("state_hidden must be set".into()))
}

#[derive(Clone, Debug)]
pub struct AlchemyEncoder {
    color: ParamId,
    position: ParamId,
    beaker: LstmParams,
}

impl StateEncoding for Alchemy {
    type Encoder = AlchemyEncoder;

    fn kind(&self) -> DomainKind {
        DomainKind::Alchemy
    }

    fn fingerprint(&self) -> String {
        if self.num_beakers() == crate::domains::ALCHEMY_BEAKERS {
            "alchemy".into()
        } else {
            format!("alchemy-{}", self.num_beakers())
        }
    }

    fn register_encoder(&self, params: &mut ParamSet, cfg: &ModelConfig, rng: &mut dyn RngCore) -> Result<AlchemyEncoder, PolicyError> {
        let hidden = state_hidden(cfg)?;
        Ok(AlchemyEncoder {
            color: params.add("state.color", glorot_init(COLORS.len(), cfg.color_dim, rng)?)?,
            position: params.add("state.position", glorot_init(self.num_beakers(), cfg.position_dim, rng)?)?,
            beaker: LstmParams::register(params, "state.beaker", cfg.color_dim, hidden, rng)?,
        })
    }

    fn key_dim(&self, cfg: &ModelConfig) -> usize {
        cfg.state_hidden.unwrap_or(0) + cfg.position_dim
    }

    fn encode_state(&self, g: &mut Graph, enc: &AlchemyEncoder, state: &Self::State) -> Result<Vec<Var>, PolicyError> {
        self.validate_state(state)?;
        let mut out = Vec::with_capacity(state.beakers().len());
        for (i, beaker) in state.beakers().iter().enumerate() {
            let last = if beaker.is_empty() {
                g.zeros(enc.beaker.hidden)
            } else {
                let units: Vec<Var> = beaker.iter().map(|&c| g.row(enc.color, c as usize)).collect();
                *lstm_sequence(g, &enc.beaker, &units)?.last().expect("nonempty beaker")
            };
            let pos = g.row(enc.position, i);
            out.push(g.concat(&[last, pos]));
        }
        Ok(out)
    }

    fn key_labels(&self, state: &Self::State) -> Vec<String> {
        let formatted = self.format_state(state);
        formatted.split_whitespace().map(String::from).collect()
    }
}

#[derive(Clone, Debug)]
pub struct SceneEncoder {
    /// Row 0 is the empty marker.
    color: ParamId,
    position: ParamId,
    forward: LstmParams,
    backward: LstmParams,
}

impl StateEncoding for Scene {
    type Encoder = SceneEncoder;

    fn kind(&self) -> DomainKind {
        DomainKind::Scene
    }

    fn register_encoder(&self, params: &mut ParamSet, cfg: &ModelConfig, rng: &mut dyn RngCore) -> Result<SceneEncoder, PolicyError> {
        let hidden = state_hidden(cfg)?;
        let input = 2 * cfg.color_dim + cfg.position_dim;
        Ok(SceneEncoder {
            color: params.add("state.color", glorot_init(COLORS.len() + 1, cfg.color_dim, rng)?)?,
            position: params.add("state.position", glorot_init(SCENE_POSITIONS, cfg.position_dim, rng)?)?,
            forward: LstmParams::register(params, "state.forward", input, hidden, rng)?,
            backward: LstmParams::register(params, "state.backward", input, hidden, rng)?,
        })
    }

    fn key_dim(&self, cfg: &ModelConfig) -> usize {
        2 * cfg.state_hidden.unwrap_or(0) + 2 * cfg.color_dim + cfg.position_dim
    }

    fn encode_state(&self, g: &mut Graph, enc: &SceneEncoder, state: &Self::State) -> Result<Vec<Var>, PolicyError> {
        self.validate_state(state)?;
        let code = |c: Option<u8>| c.map_or(0, |c| c as usize + 1);
        let embedded: Vec<Var> = state
            .positions()
            .iter()
            .enumerate()
            .map(|(i, slot)| {
                let shirt = g.row(enc.color, code(slot.shirt));
                let hat = g.row(enc.color, code(slot.hat));
                let pos = g.row(enc.position, i);
                g.concat(&[shirt, hat, pos])
            })
            .collect();
        let context = bidirectional_encode(g, &enc.forward, &enc.backward, &embedded)?;
        Ok(context.into_iter().zip(embedded).map(|(h, e)| g.concat(&[h, e])).collect())
    }

    fn key_labels(&self, state: &Self::State) -> Vec<String> {
        self.format_state(state).split_whitespace().map(String::from).collect()
    }
}

#[derive(Clone, Debug)]
pub struct TangramsEncoder {
    shape: ParamId,
    position: ParamId,
    null: ParamId,
}

impl StateEncoding for Tangrams {
    type Encoder = TangramsEncoder;

    fn kind(&self) -> DomainKind {
        DomainKind::Tangrams
    }

    fn register_encoder(&self, params: &mut ParamSet, cfg: &ModelConfig, rng: &mut dyn RngCore) -> Result<TangramsEncoder, PolicyError> {
        let dim = self.key_dim(cfg);
        let null = glorot_init(1, dim, rng)?;
        Ok(TangramsEncoder {
            shape: params.add("state.shape", glorot_init(SHAPES.len(), cfg.color_dim, rng)?)?,
            position: params.add("state.position", glorot_init(TANGRAMS_MAX_LEN, cfg.position_dim, rng)?)?,
            null: params.add("state.null", Tensor::vector(null.data().to_vec()))?,
        })
    }

    fn key_dim(&self, cfg: &ModelConfig) -> usize {
        cfg.position_dim + cfg.color_dim
    }

    fn encode_state(&self, g: &mut Graph, enc: &TangramsEncoder, state: &Self::State) -> Result<Vec<Var>, PolicyError> {
        self.validate_state(state)?;
        if state.is_empty() {
            return Ok(vec![g.param(enc.null)]);
        }
        Ok(state
            .figures()
            .iter()
            .enumerate()
            .map(|(i, &t)| {
                let pos = g.row(enc.position, i);
                let shape = g.row(enc.shape, t as usize);
                g.concat(&[pos, shape])
            })
            .collect())
    }

    fn key_labels(&self, state: &Self::State) -> Vec<String> {
        if state.is_empty() {
            vec!["<empty>".into()]
        } else {
            self.format_state(state).split_whitespace().map(String::from).collect()
        }
    }
}
