use serde::{Deserialize, Serialize};

use crate::domains::DomainKind;

/// Layer sizes and the dropout rate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub word_dim: usize,
    /// Size of each of the three action-part embeddings.
    pub action_part_dim: usize,
    /// Color (or shape) embedding size.
    pub color_dim: usize,
    pub position_dim: usize,
    /// Instruction encoder hidden size per direction.
    pub encoder_hidden: usize,
    pub decoder_hidden: usize,
    /// World-state recurrence size; Tangrams has no state recurrence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state_hidden: Option<usize>,
    pub dropout: f64,
}

impl ModelConfig {
    pub fn for_domain(kind: DomainKind) -> Self {
        Self {
            word_dim: 50,
            action_part_dim: 50,
            color_dim: 10,
            position_dim: 10,
            encoder_hidden: 100,
            decoder_hidden: 100,
            state_hidden: match kind {
                DomainKind::Alchemy => Some(20),
                DomainKind::Scene => Some(5),
                DomainKind::Tangrams => None,
            },
            dropout: 0.1,
        }
    }

    /// Every size set to `hidden`; for gradient checks and toy experiments.
    pub fn toy(kind: DomainKind, hidden: usize) -> Self {
        Self {
            word_dim: hidden,
            action_part_dim: hidden,
            color_dim: hidden,
            position_dim: hidden,
            encoder_hidden: hidden,
            decoder_hidden: hidden,
            state_hidden: (kind != DomainKind::Tangrams).then_some(hidden),
            dropout: 0.0,
        }
    }

    pub fn action_dim(&self) -> usize {
        3 * self.action_part_dim
    }

    pub fn validate(&self, kind: DomainKind) -> Result<(), String> {
        let sizes = [
            ("word_dim", self.word_dim),
            ("action_part_dim", self.action_part_dim),
            ("color_dim", self.color_dim),
            ("position_dim", self.position_dim),
            ("encoder_hidden", self.encoder_hidden),
            ("decoder_hidden", self.decoder_hidden),
        ];
        if let Some((name, _)) = sizes.iter().find(|(_, v)| *v == 0) {
            return Err(format!("{name} must be positive"));
        }
        match (kind, self.state_hidden) {
            (DomainKind::Tangrams, _) => {}
            (_, None) | (_, Some(0)) => return Err(format!("{kind} needs a positive state_hidden")),
            _ => {}
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(format!("dropout must be in [0, 1), got {}", self.dropout));
        }
        Ok(())
    }
}
