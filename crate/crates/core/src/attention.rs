//! Attention archives: every attention head's weights at every step of a
//! greedy rollout, with labels for each attended item.
//!
//! The archive is JSON. Each of the six heads holds one row per decoder
//! step; a row carries the executed action, the labels of the attended
//! items (instruction tokens, or state items such as `3:gg`) and the
//! weights over them. The previous-instruction head has no rows on the
//! first turn of an interaction.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::InteractionRecord;
use crate::error::PolicyError;
use crate::policy::{Policy, StateEncoding};

pub const HEAD_NAMES: [&str; 6] = [
    "current_instruction",
    "previous_instructions",
    "initial_state_1",
    "initial_state_2",
    "current_state_1",
    "current_state_2",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttentionRow {
    pub step: usize,
    pub action: String,
    pub labels: Vec<String>,
    pub weights: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttentionHead {
    pub name: String,
    pub rows: Vec<AttentionRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttentionArchive {
    pub domain: String,
    pub interaction_id: String,
    pub turn: usize,
    pub instruction: Vec<String>,
    pub actions: Vec<String>,
    pub hit_horizon: bool,
    pub heads: Vec<AttentionHead>,
}

impl AttentionArchive {
    pub fn head(&self, name: &str) -> Option<&AttentionHead> {
        self.heads.iter().find(|h| h.name == name)
    }

    /// Largest deviation of any row's weight sum from one.
    pub fn max_row_error(&self) -> f64 {
        self.heads
            .iter()
            .flat_map(|h| &h.rows)
            .map(|r| (r.weights.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("archive serializes")
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), PolicyError> {
        std::fs::write(path, self.to_json() + "\n")?;
        Ok(())
    }
}

/// Greedy rollout of `record.turns[turn]` from its annotated start state
/// with the true history, recording every head.
pub fn dump_attention<D: StateEncoding>(
    policy: &Policy<D>,
    record: &InteractionRecord<D::State>,
    turn: usize,
    horizon: usize,
) -> Result<AttentionArchive, PolicyError> {
    if turn >= record.turns.len() {
        return Err(PolicyError::TurnOutOfRange {
            turn,
            turns: record.turns.len(),
        });
    }
    let domain = policy.domain();
    let history: Vec<Vec<String>> = record.turns[..turn].iter().map(|t| t.tokens.clone()).collect();
    let instruction = &record.turns[turn].tokens;
    let start = record.start_of(turn);
    let rollout = policy.greedy(instruction, &history, start, horizon)?;
    let (tokens, split) = Policy::<D>::joined_tokens(&history, instruction);
    let current_labels = tokens[split..].to_vec();
    let previous_labels = tokens[..split].to_vec();
    let initial_labels = domain.key_labels(start);

    let mut heads: Vec<AttentionHead> = HEAD_NAMES
        .iter()
        .map(|n| AttentionHead {
            name: n.to_string(),
            rows: Vec::new(),
        })
        .collect();
    let mut actions = Vec::new();
    for (k, ((state, action), att)) in rollout.execution.steps().iter().zip(&rollout.attention).enumerate() {
        let action = domain.format_action(*action);
        let row = |labels: &[String], weights: &[f64]| AttentionRow {
            step: k,
            action: action.clone(),
            labels: labels.to_vec(),
            weights: weights.to_vec(),
        };
        let state_labels = domain.key_labels(state);
        heads[0].rows.push(row(&current_labels, &att.current));
        if let Some(p) = &att.previous {
            heads[1].rows.push(row(&previous_labels, p));
        }
        for i in 0..2 {
            heads[2 + i].rows.push(row(&initial_labels, &att.initial[i]));
            heads[4 + i].rows.push(row(&state_labels, &att.state[i]));
        }
        actions.push(action);
    }
    Ok(AttentionArchive {
        domain: domain.fingerprint(),
        interaction_id: record.id.clone(),
        turn,
        instruction: instruction.clone(),
        actions,
        hit_horizon: rollout.hit_horizon,
        heads,
    })
}
