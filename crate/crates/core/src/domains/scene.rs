use std::collections::VecDeque;
use std::sync::{Arc, OnceLock};

use super::{code_index, split_indexed, COLORS};
use crate::env::{Action, ActionSpace, Arity, Domain};
use crate::error::DomainError;

pub const SCENE_POSITIONS: usize = 10;

const ADD_PERSON: usize = 1;
const ADD_HAT: usize = 2;
const REMOVE_PERSON: usize = 3;
const REMOVE_HAT: usize = 4;

/// One position: shirt color and hat color, `None` for empty.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct Slot {
    pub shirt: Option<u8>,
    pub hat: Option<u8>,
}

impl Slot {
    /// Dense index in `0..49` used by the distance table.
    fn code(self) -> usize {
        let f = |c: Option<u8>| c.map_or(0, |c| c as usize + 1);
        f(self.shirt) * (COLORS.len() + 1) + f(self.hat)
    }

    fn from_code(code: usize) -> Slot {
        let g = |v: usize| (v > 0).then(|| (v - 1) as u8);
        Slot {
            shirt: g(code / (COLORS.len() + 1)),
            hat: g(code % (COLORS.len() + 1)),
        }
    }
}

const SLOT_CODES: usize = (COLORS.len() + 1) * (COLORS.len() + 1);

/// Effect of an action on the slot it addresses, or `None` if invalid.
fn apply_slot(slot: Slot, kind: usize, color: Option<u8>) -> Option<Slot> {
    match (kind, color) {
        (ADD_PERSON, Some(c)) if slot.shirt.is_none() => Some(Slot { shirt: Some(c), ..slot }),
        (ADD_HAT, Some(c)) if slot.hat.is_none() => Some(Slot { hat: Some(c), ..slot }),
        (REMOVE_PERSON, None) if slot.shirt.is_some() => Some(Slot { shirt: None, ..slot }),
        (REMOVE_HAT, None) if slot.hat.is_some() => Some(Slot { hat: None, ..slot }),
        _ => None,
    }
}

fn slot_moves(slot: Slot) -> impl Iterator<Item = Slot> {
    let colored = [ADD_PERSON, ADD_HAT]
        .into_iter()
        .flat_map(|k| (0..COLORS.len() as u8).map(move |c| (k, Some(c))));
    let bare = [REMOVE_PERSON, REMOVE_HAT].into_iter().map(|k| (k, None));
    colored.chain(bare).filter_map(move |(k, c)| apply_slot(slot, k, c))
}

fn distance_table() -> &'static [[u8; SLOT_CODES]; SLOT_CODES] {
    static TABLE: OnceLock<[[u8; SLOT_CODES]; SLOT_CODES]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut table = [[u8::MAX; SLOT_CODES]; SLOT_CODES];
        for (from, row) in table.iter_mut().enumerate() {
            row[from] = 0;
            let mut queue = VecDeque::from([Slot::from_code(from)]);
            while let Some(s) = queue.pop_front() {
                let d = row[s.code()];
                for n in slot_moves(s) {
                    if row[n.code()] == u8::MAX {
                        row[n.code()] = d + 1;
                        queue.push_back(n);
                    }
                }
            }
        }
        table
    })
}

/// Minimum number of single-position actions turning `a` into `b`.
pub fn slot_distance(a: Slot, b: Slot) -> u32 {
    u32::from(distance_table()[a.code()][b.code()])
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SceneState {
    positions: Vec<Slot>,
}

impl SceneState {
    pub fn positions(&self) -> &[Slot] {
        &self.positions
    }
}

#[derive(Clone, Debug)]
pub struct Scene {
    space: Arc<ActionSpace>,
}

impl Default for Scene {
    fn default() -> Self {
        Self::new()
    }
}

impl Scene {
    pub fn new() -> Self {
        let names = (1..=SCENE_POSITIONS).map(|i| i.to_string()).collect();
        let colors = COLORS.iter().map(|c| c.to_string()).collect();
        let space = ActionSpace::new(
            &[
                ("add_person", Arity::Binary),
                ("add_hat", Arity::Binary),
                ("remove_person", Arity::Unary),
                ("remove_hat", Arity::Unary),
            ],
            names,
            colors,
        );
        Self { space: Arc::new(space) }
    }

    pub fn state(&self, positions: Vec<Slot>) -> Result<SceneState, DomainError> {
        let s = SceneState { positions };
        self.validate_state(&s)?;
        Ok(s)
    }

    pub fn empty_state(&self) -> SceneState {
        SceneState {
            positions: vec![Slot::default(); SCENE_POSITIONS],
        }
    }

    pub fn add_person(&self, position: usize, color: u8) -> Action {
        Action::raw(ADD_PERSON as u8, Some(pos_arg(position)), Some(color_arg(color)))
    }

    pub fn add_hat(&self, position: usize, color: u8) -> Action {
        Action::raw(ADD_HAT as u8, Some(pos_arg(position)), Some(color_arg(color)))
    }

    pub fn remove_person(&self, position: usize) -> Action {
        Action::raw(REMOVE_PERSON as u8, Some(pos_arg(position)), None)
    }

    pub fn remove_hat(&self, position: usize) -> Action {
        Action::raw(REMOVE_HAT as u8, Some(pos_arg(position)), None)
    }
}

fn pos_arg(position: usize) -> u8 {
    assert!((1..=SCENE_POSITIONS).contains(&position), "position {position} out of range");
    (position - 1) as u8
}

fn color_arg(color: u8) -> u8 {
    assert!((color as usize) < COLORS.len(), "color index out of range");
    color
}

impl Domain for Scene {
    type State = SceneState;

    fn name(&self) -> &'static str {
        "scene"
    }

    fn action_space(&self) -> &Arc<ActionSpace> {
        &self.space
    }

    fn transition(&self, state: &SceneState, action: Action) -> SceneState {
        let Some(p) = action.arg1().filter(|&p| p < state.positions.len()) else {
            return state.clone();
        };
        match apply_slot(state.positions[p], action.kind(), action.arg2().map(|c| c as u8)) {
            Some(slot) => {
                let mut next = state.clone();
                next.positions[p] = slot;
                next
            }
            None => state.clone(),
        }
    }

    fn distance(&self, a: &SceneState, b: &SceneState) -> u32 {
        a.positions.iter().zip(&b.positions).map(|(x, y)| slot_distance(*x, *y)).sum()
    }

    fn parse_state(&self, text: &str) -> Result<SceneState, DomainError> {
        let tokens: Vec<&str> = text.split_whitespace().collect();
        if tokens.len() != SCENE_POSITIONS {
            return Err(DomainError::state(
                text,
                format!("expected {SCENE_POSITIONS} positions, found {}", tokens.len()),
            ));
        }
        let code = |c: char| -> Result<Option<u8>, DomainError> {
            if c == '_' {
                Ok(None)
            } else {
                code_index(&COLORS, c)
                    .map(Some)
                    .ok_or_else(|| DomainError::state(text, format!("unknown color {c:?}")))
            }
        };
        let mut positions = Vec::with_capacity(SCENE_POSITIONS);
        for (i, tok) in tokens.iter().enumerate() {
            let body: Vec<char> = split_indexed(text, tok, i + 1)?.chars().collect();
            if body.len() != 2 {
                return Err(DomainError::state(text, format!("position {} needs two codes", i + 1)));
            }
            positions.push(Slot {
                shirt: code(body[0])?,
                hat: code(body[1])?,
            });
        }
        Ok(SceneState { positions })
    }

    fn format_state(&self, state: &SceneState) -> String {
        let ch = |c: Option<u8>| c.map_or('_', |c| COLORS[c as usize]);
        state
            .positions
            .iter()
            .enumerate()
            .map(|(i, s)| format!("{}:{}{}", i + 1, ch(s.shirt), ch(s.hat)))
            .collect::<Vec<_>>()
            .join(" ")
    }

    fn validate_state(&self, state: &SceneState) -> Result<(), DomainError> {
        if state.positions.len() != SCENE_POSITIONS {
            return Err(DomainError::Invalid(format!(
                "expected {SCENE_POSITIONS} positions, found {}",
                state.positions.len()
            )));
        }
        let ok = |c: Option<u8>| c.is_none_or(|c| (c as usize) < COLORS.len());
        if !state.positions.iter().all(|s| ok(s.shirt) && ok(s.hat)) {
            return Err(DomainError::Invalid("color index out of range".into()));
        }
        Ok(())
    }
}
