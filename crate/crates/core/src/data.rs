//! SCONE interaction files and per-instruction examples.
//!
//! Each line is tab-separated: `id`, `state_0`, then alternating
//! `utterance_i` and `state_i` for every turn. States use the owning
//! domain's state-string grammar.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::Serialize;

use crate::env::Domain;
use crate::error::DataError;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Turn<S> {
    /// Utterance exactly as it appears in the file.
    pub utterance: String,
    pub tokens: Vec<String>,
    pub post_state: S,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InteractionRecord<S> {
    pub id: String,
    pub initial_state: S,
    pub turns: Vec<Turn<S>>,
}

impl<S> InteractionRecord<S> {
    /// State before turn `i` (zero-based).
    pub fn start_of(&self, i: usize) -> &S {
        if i == 0 {
            &self.initial_state
        } else {
            &self.turns[i - 1].post_state
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InstructionExample<S> {
    pub interaction_id: String,
    /// Zero-based position of the interaction in its record list.
    pub interaction: usize,
    /// Zero-based turn index.
    pub turn: usize,
    pub instruction: Vec<String>,
    pub history: Vec<Vec<String>>,
    pub start: S,
    pub goal: S,
}

/// Whitespace split and lowercase.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_lowercase).collect()
}

pub fn parse_line<D: Domain>(domain: &D, line: &str, path: &str, line_no: usize) -> Result<InteractionRecord<D::State>, DataError> {
    let line_err = |reason: String| DataError::Line {
        path: path.to_string(),
        line: line_no,
        reason,
    };
    let cols: Vec<&str> = line.split('\t').collect();
    if cols.len() < 4 || !cols.len().is_multiple_of(2) {
        return Err(line_err(format!(
            "expected id, initial state and utterance/state pairs, found {} columns",
            cols.len()
        )));
    }
    let state = |text: &str| {
        domain.parse_state(text).map_err(|source| DataError::State {
            path: path.to_string(),
            line: line_no,
            source,
        })
    };
    let initial_state = state(cols[1])?;
    let mut turns = Vec::with_capacity((cols.len() - 2) / 2);
    for pair in cols[2..].chunks(2) {
        let tokens = tokenize(pair[0]);
        if tokens.is_empty() {
            return Err(line_err(format!("empty utterance in turn {}", turns.len() + 1)));
        }
        turns.push(Turn {
            utterance: pair[0].to_string(),
            tokens,
            post_state: state(pair[1])?,
        });
    }
    Ok(InteractionRecord {
        id: cols[0].to_string(),
        initial_state,
        turns,
    })
}

pub fn format_line<D: Domain>(domain: &D, record: &InteractionRecord<D::State>) -> String {
    let mut cols = vec![record.id.clone(), domain.format_state(&record.initial_state)];
    for t in &record.turns {
        cols.push(t.utterance.clone());
        cols.push(domain.format_state(&t.post_state));
    }
    cols.join("\t")
}

/// Parses every non-blank line from `reader`; `label` names the source in errors.
pub fn parse_scone<D: Domain, R: BufRead>(domain: &D, reader: R, label: &str) -> Result<Vec<InteractionRecord<D::State>>, DataError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim_end_matches(['\r', '\n']);
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse_line(domain, line, label, i + 1)?);
    }
    Ok(out)
}

pub fn parse_scone_file<D: Domain>(domain: &D, path: &Path) -> Result<Vec<InteractionRecord<D::State>>, DataError> {
    let file = File::open(path)?;
    parse_scone(domain, BufReader::new(file), &path.display().to_string())
}

/// One example per turn, with all earlier instructions as history.
pub fn make_examples<S: Clone>(records: &[InteractionRecord<S>]) -> Vec<InstructionExample<S>> {
    let mut out = Vec::new();
    for (r, rec) in records.iter().enumerate() {
        let mut history: Vec<Vec<String>> = Vec::new();
        for (i, turn) in rec.turns.iter().enumerate() {
            out.push(InstructionExample {
                interaction_id: rec.id.clone(),
                interaction: r,
                turn: i,
                instruction: turn.tokens.clone(),
                history: history.clone(),
                start: rec.start_of(i).clone(),
                goal: turn.post_state.clone(),
            });
            history.push(turn.tokens.clone());
        }
    }
    out
}

pub fn mean_instruction_length<S>(examples: &[InstructionExample<S>]) -> f64 {
    if examples.is_empty() {
        return 0.0;
    }
    examples.iter().map(|e| e.instruction.len()).sum::<usize>() as f64 / examples.len() as f64
}

#[derive(Serialize)]
struct ExampleDump<'a> {
    interaction_id: &'a str,
    turn: usize,
    instruction: String,
    history: Vec<String>,
    start: String,
    goal: String,
}

/// One JSON object per example, for debugging.
pub fn dump_examples<D: Domain>(domain: &D, examples: &[InstructionExample<D::State>]) -> String {
    let mut out = String::new();
    for e in examples {
        let d = ExampleDump {
            interaction_id: &e.interaction_id,
            turn: e.turn,
            instruction: e.instruction.join(" "),
            history: e.history.iter().map(|h| h.join(" ")).collect(),
            start: domain.format_state(&e.start),
            goal: domain.format_state(&e.goal),
        };
        out.push_str(&serde_json::to_string(&d).expect("example dump serializes"));
        out.push('\n');
    }
    out
}
