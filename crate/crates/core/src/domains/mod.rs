//! The three SCONE environments.

mod alchemy;
mod scene;
mod tangrams;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use alchemy::{Alchemy, AlchemyState, ALCHEMY_BEAKERS};
pub use scene::{slot_distance, Scene, SceneState, Slot, SCENE_POSITIONS};
pub use tangrams::{Tangrams, TangramsState, TANGRAMS_MAX_LEN};

use crate::error::DomainError;

/// Color codes shared by Alchemy and Scene, in alphabet order.
pub const COLORS: [char; 6] = ['b', 'g', 'o', 'p', 'r', 'y'];

/// Tangrams shape codes, in alphabet order.
pub const SHAPES: [char; 5] = ['A', 'B', 'C', 'D', 'E'];

pub(crate) fn code_index(alphabet: &[char], c: char) -> Option<u8> {
    alphabet.iter().position(|&a| a == c).map(|i| i as u8)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainKind {
    Alchemy,
    Scene,
    Tangrams,
}

impl DomainKind {
    pub const ALL: [DomainKind; 3] = [DomainKind::Alchemy, DomainKind::Scene, DomainKind::Tangrams];

    pub fn name(self) -> &'static str {
        match self {
            DomainKind::Alchemy => "alchemy",
            DomainKind::Scene => "scene",
            DomainKind::Tangrams => "tangrams",
        }
    }
}

impl fmt::Display for DomainKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DomainKind {
    type Err = DomainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| DomainError::UnknownDomain(s.to_string()))
    }
}

/// Parses `"i:rest"` and checks that `i` equals `expected`.
pub(crate) fn split_indexed<'a>(text: &str, token: &'a str, expected: usize) -> Result<&'a str, DomainError> {
    let (idx, rest) = token
        .split_once(':')
        .ok_or_else(|| DomainError::state(text, format!("token {token:?} lacks ':'")))?;
    match idx.parse::<usize>() {
        Ok(i) if i == expected => Ok(rest),
        _ => Err(DomainError::state(text, format!("expected index {expected}, found {idx:?}"))),
    }
}
