use std::sync::Arc;

use super::{code_index, split_indexed, COLORS};
use crate::env::{Action, ActionSpace, Arity, Domain};
use crate::error::DomainError;

pub const ALCHEMY_BEAKERS: usize = 7;

const POP: usize = 1;
const PUSH: usize = 2;

/// Beakers of stacked chemical units; the last element of a beaker is its top.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct AlchemyState {
    beakers: Vec<Vec<u8>>,
}

impl AlchemyState {
    pub fn beakers(&self) -> &[Vec<u8>] {
        &self.beakers
    }

    pub fn num_units(&self) -> usize {
        self.beakers.iter().map(Vec::len).sum()
    }
}

/// The Alchemy environment. The beaker count defaults to 7; smaller variants
/// exist for toy experiments.
#[derive(Clone, Debug)]
pub struct Alchemy {
    beakers: usize,
    space: Arc<ActionSpace>,
}

impl Default for Alchemy {
    fn default() -> Self {
        Self::new()
    }
}

impl Alchemy {
    pub fn new() -> Self {
        Self::with_beakers(ALCHEMY_BEAKERS)
    }

    pub fn with_beakers(beakers: usize) -> Self {
        assert!((1..=200).contains(&beakers), "beaker count out of range");
        let names = (1..=beakers).map(|i| i.to_string()).collect();
        let colors = COLORS.iter().map(|c| c.to_string()).collect();
        let space = ActionSpace::new(&[("pop", Arity::Unary), ("push", Arity::Binary)], names, colors);
        Self {
            beakers,
            space: Arc::new(space),
        }
    }

    pub fn num_beakers(&self) -> usize {
        self.beakers
    }

    /// Builds a state from color indices, checking the beaker count and alphabet.
    pub fn state(&self, beakers: Vec<Vec<u8>>) -> Result<AlchemyState, DomainError> {
        let s = AlchemyState { beakers };
        self.validate_state(&s)?;
        Ok(s)
    }

    pub fn pop(&self, beaker: usize) -> Action {
        Action::raw(POP as u8, Some(self.beaker_arg(beaker)), None)
    }

    pub fn push(&self, beaker: usize, color: u8) -> Action {
        assert!((color as usize) < COLORS.len(), "color index out of range");
        Action::raw(PUSH as u8, Some(self.beaker_arg(beaker)), Some(color))
    }

    /// Beakers are numbered from 1.
    fn beaker_arg(&self, beaker: usize) -> u8 {
        assert!((1..=self.beakers).contains(&beaker), "beaker {beaker} out of range");
        (beaker - 1) as u8
    }
}

impl Domain for Alchemy {
    type State = AlchemyState;

    fn name(&self) -> &'static str {
        "alchemy"
    }

    fn action_space(&self) -> &Arc<ActionSpace> {
        &self.space
    }

    fn transition(&self, state: &AlchemyState, action: Action) -> AlchemyState {
        let target = match action.arg1() {
            Some(b) if b < state.beakers.len() => b,
            _ => return state.clone(),
        };
        match (action.kind(), action.arg2()) {
            (POP, None) if !state.beakers[target].is_empty() => {
                let mut next = state.clone();
                next.beakers[target].pop();
                next
            }
            (PUSH, Some(c)) => {
                let mut next = state.clone();
                next.beakers[target].push(c as u8);
                next
            }
            _ => state.clone(),
        }
    }

    fn distance(&self, a: &AlchemyState, b: &AlchemyState) -> u32 {
        a.beakers.iter().zip(&b.beakers).map(|(x, y)| levenshtein(x, y)).sum()
    }

    fn parse_state(&self, text: &str) -> Result<AlchemyState, DomainError> {
        let tokens: Vec<&str> = text.split_whitespace().collect();
        if tokens.len() != self.beakers {
            return Err(DomainError::state(
                text,
                format!("expected {} beakers, found {}", self.beakers, tokens.len()),
            ));
        }
        let mut beakers = Vec::with_capacity(self.beakers);
        for (i, tok) in tokens.iter().enumerate() {
            let body = split_indexed(text, tok, i + 1)?;
            let units = if body == "_" {
                Vec::new()
            } else if body.is_empty() {
                return Err(DomainError::state(text, format!("beaker {} has no content marker", i + 1)));
            } else {
                body.chars()
                    .map(|c| code_index(&COLORS, c).ok_or_else(|| DomainError::state(text, format!("unknown color {c:?}"))))
                    .collect::<Result<Vec<_>, _>>()?
            };
            beakers.push(units);
        }
        Ok(AlchemyState { beakers })
    }

    fn format_state(&self, state: &AlchemyState) -> String {
        state
            .beakers
            .iter()
            .enumerate()
            .map(|(i, b)| {
                let body: String = if b.is_empty() {
                    "_".to_string()
                } else {
                    b.iter().map(|&c| COLORS[c as usize]).collect()
                };
                format!("{}:{}", i + 1, body)
            })
            .collect::<Vec<_>>()
            .join(" ")
    }

    fn validate_state(&self, state: &AlchemyState) -> Result<(), DomainError> {
        if state.beakers.len() != self.beakers {
            return Err(DomainError::Invalid(format!(
                "expected {} beakers, found {}",
                self.beakers,
                state.beakers.len()
            )));
        }
        if state.beakers.iter().flatten().any(|&c| c as usize >= COLORS.len()) {
            return Err(DomainError::Invalid("color index out of range".into()));
        }
        Ok(())
    }
}

/// Unit-cost edit distance.
fn levenshtein(a: &[u8], b: &[u8]) -> u32 {
    let mut row: Vec<u32> = (0..=b.len() as u32).collect();
    for (i, x) in a.iter().enumerate() {
        let mut diag = row[0];
        row[0] = i as u32 + 1;
        for (j, y) in b.iter().enumerate() {
            let above = row[j + 1];
            row[j + 1] = (diag + u32::from(x != y)).min(above + 1).min(row[j] + 1);
            diag = above;
        }
    }
    row[b.len()]
}
