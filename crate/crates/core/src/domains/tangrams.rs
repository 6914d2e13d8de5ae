use std::sync::Arc;

use super::{code_index, split_indexed, SHAPES};
use crate::env::{Action, ActionSpace, Arity, Domain};
use crate::error::DomainError;

/// Maximum figure count, and the range of position arguments.
pub const TANGRAMS_MAX_LEN: usize = 5;

const INSERT: usize = 1;
const REMOVE: usize = 2;

/// Ordered list of distinct shapes.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct TangramsState {
    figures: Vec<u8>,
}

impl TangramsState {
    pub fn figures(&self) -> &[u8] {
        &self.figures
    }

    pub fn len(&self) -> usize {
        self.figures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.figures.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct Tangrams {
    space: Arc<ActionSpace>,
}

impl Default for Tangrams {
    fn default() -> Self {
        Self::new()
    }
}

impl Tangrams {
    pub fn new() -> Self {
        let names = (1..=TANGRAMS_MAX_LEN).map(|i| i.to_string()).collect();
        let shapes = SHAPES.iter().map(|c| c.to_string()).collect();
        let space = ActionSpace::new(&[("insert", Arity::Binary), ("remove", Arity::Unary)], names, shapes);
        Self { space: Arc::new(space) }
    }

    pub fn state(&self, figures: Vec<u8>) -> Result<TangramsState, DomainError> {
        let s = TangramsState { figures };
        self.validate_state(&s)?;
        Ok(s)
    }

    pub fn insert(&self, position: usize, shape: u8) -> Action {
        assert!((shape as usize) < SHAPES.len(), "shape index out of range");
        Action::raw(INSERT as u8, Some(pos_arg(position)), Some(shape))
    }

    pub fn remove(&self, position: usize) -> Action {
        Action::raw(REMOVE as u8, Some(pos_arg(position)), None)
    }
}

fn pos_arg(position: usize) -> u8 {
    assert!((1..=TANGRAMS_MAX_LEN).contains(&position), "position {position} out of range");
    (position - 1) as u8
}

impl Domain for Tangrams {
    type State = TangramsState;

    fn name(&self) -> &'static str {
        "tangrams"
    }

    fn action_space(&self) -> &Arc<ActionSpace> {
        &self.space
    }

    fn transition(&self, state: &TangramsState, action: Action) -> TangramsState {
        let n = state.figures.len();
        match (action.kind(), action.arg1(), action.arg2()) {
            (INSERT, Some(p), Some(t)) if p <= n && !state.figures.contains(&(t as u8)) => {
                let mut next = state.clone();
                next.figures.insert(p, t as u8);
                next
            }
            (REMOVE, Some(p), None) if p < n => {
                let mut next = state.clone();
                next.figures.remove(p);
                next
            }
            _ => state.clone(),
        }
    }

    fn distance(&self, a: &TangramsState, b: &TangramsState) -> u32 {
        weighted_edit_distance(&a.figures, &b.figures)
    }

    fn parse_state(&self, text: &str) -> Result<TangramsState, DomainError> {
        let mut figures = Vec::new();
        for (i, tok) in text.split_whitespace().enumerate() {
            let body = split_indexed(text, tok, i + 1)?;
            let mut chars = body.chars();
            let (Some(c), None) = (chars.next(), chars.next()) else {
                return Err(DomainError::state(text, format!("position {} needs one shape", i + 1)));
            };
            let shape = code_index(&SHAPES, c).ok_or_else(|| DomainError::state(text, format!("unknown shape {c:?}")))?;
            figures.push(shape);
        }
        let s = TangramsState { figures };
        self.validate_state(&s).map_err(|e| DomainError::state(text, e.to_string()))?;
        Ok(s)
    }

    fn format_state(&self, state: &TangramsState) -> String {
        state
            .figures
            .iter()
            .enumerate()
            .map(|(i, &t)| format!("{}:{}", i + 1, SHAPES[t as usize]))
            .collect::<Vec<_>>()
            .join(" ")
    }

    fn validate_state(&self, state: &TangramsState) -> Result<(), DomainError> {
        if state.figures.len() > TANGRAMS_MAX_LEN {
            return Err(DomainError::Invalid(format!("{} figures exceed the maximum", state.figures.len())));
        }
        for (i, &t) in state.figures.iter().enumerate() {
            if t as usize >= SHAPES.len() {
                return Err(DomainError::Invalid("shape index out of range".into()));
            }
            if state.figures[..i].contains(&t) {
                return Err(DomainError::Invalid(format!("shape {} appears twice", SHAPES[t as usize])));
            }
        }
        Ok(())
    }
}

/// Edit distance with insertion and deletion 1, substitution 2.
fn weighted_edit_distance(a: &[u8], b: &[u8]) -> u32 {
    let mut row: Vec<u32> = (0..=b.len() as u32).collect();
    for (i, x) in a.iter().enumerate() {
        let mut diag = row[0];
        row[0] = i as u32 + 1;
        for (j, y) in b.iter().enumerate() {
            let above = row[j + 1];
            let sub = if x == y { 0 } else { 2 };
            row[j + 1] = (diag + sub).min(above + 1).min(row[j] + 1);
            diag = above;
        }
    }
    row[b.len()]
}
