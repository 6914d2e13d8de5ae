//! Exact-match task completion: Inst, 3utts, and 5utts.

use serde::{Deserialize, Serialize};

use crate::data::InteractionRecord;
use crate::env::{Action, Domain};
use crate::error::PolicyError;
use crate::policy::{Policy, StateEncoding};
use crate::reward::RewardFn;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Accuracy {
    pub correct: usize,
    pub total: usize,
    pub accuracy: f64,
}

impl Accuracy {
    pub fn from_outcomes(outcomes: impl IntoIterator<Item = bool>) -> Option<Self> {
        let (mut correct, mut total) = (0, 0);
        for o in outcomes {
            total += 1;
            correct += usize::from(o);
        }
        (total > 0).then(|| Accuracy {
            correct,
            total,
            accuracy: correct as f64 / total as f64,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstructionOutcome {
    pub interaction_id: String,
    pub turn: usize,
    pub success: bool,
    /// Total shaped reward of the greedy rollout.
    pub reward: f64,
    pub actions: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InteractionOutcome {
    pub interaction_id: String,
    /// `None` when the interaction is too short for the measure.
    pub three: Option<bool>,
    pub five: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub domain: String,
    pub inst: Option<Accuracy>,
    pub three_utts: Option<Accuracy>,
    pub five_utts: Option<Accuracy>,
    pub mean_reward: f64,
    pub instructions: Vec<InstructionOutcome>,
    pub interactions: Vec<InteractionOutcome>,
}

impl EvalReport {
    /// Recomputes the accuracies from the stored outcomes.
    pub fn recompute(&self) -> (Option<Accuracy>, Option<Accuracy>, Option<Accuracy>) {
        (
            Accuracy::from_outcomes(self.instructions.iter().map(|o| o.success)),
            Accuracy::from_outcomes(self.interactions.iter().filter_map(|o| o.three)),
            Accuracy::from_outcomes(self.interactions.iter().filter_map(|o| o.five)),
        )
    }

    pub fn inst_accuracy(&self) -> f64 {
        self.inst.map_or(0.0, |a| a.accuracy)
    }
}

/// Anything that maps an instruction in context to an action sequence.
pub trait Executor<D: Domain> {
    fn execute(
        &self,
        instruction: &[String],
        history: &[Vec<String>],
        start: &D::State,
        horizon: usize,
    ) -> Result<Vec<Action>, PolicyError>;
}

impl<D: StateEncoding> Executor<D> for Policy<D> {
    fn execute(
        &self,
        instruction: &[String],
        history: &[Vec<String>],
        start: &D::State,
        horizon: usize,
    ) -> Result<Vec<Action>, PolicyError> {
        Ok(self.greedy(instruction, history, start, horizon)?.execution.actions())
    }
}

/// Total shaped reward of `actions` from `start`, with the horizon-failure
/// rule applied when the sequence does not end in `STOP`.
pub fn rollout_reward<D: Domain>(domain: &D, start: &D::State, goal: &D::State, actions: &[Action], delta: f64) -> f64 {
    let r = RewardFn::new(domain, goal, delta);
    let mut s = start.clone();
    let mut total = 0.0;
    for (i, &a) in actions.iter().enumerate() {
        let next = domain.transition(&s, a);
        let last = i + 1 == actions.len();
        total += if last && !a.is_stop() {
            r.horizon_failure_reward(&s, a, &next)
        } else {
            r.reward(&s, a, &next)
        };
        s = next;
    }
    total
}

fn run<D: Domain, E: Executor<D>>(
    domain: &D,
    exec: &E,
    rec: &InteractionRecord<D::State>,
    turn: usize,
    start: &D::State,
    history: &[Vec<String>],
    horizon: usize,
) -> Result<(Vec<Action>, D::State), PolicyError> {
    let actions = exec.execute(&rec.turns[turn].tokens, history, start, horizon)?;
    let end = crate::env::apply_sequence(domain, start, &actions);
    Ok((actions, end))
}

/// Greedy evaluation from annotated starts (Inst) and chained from each
/// interaction's initial state (3utts, 5utts).
pub fn evaluate<D: Domain, E: Executor<D>>(
    domain: &D,
    exec: &E,
    records: &[InteractionRecord<D::State>],
    horizon: usize,
    delta: f64,
) -> Result<EvalReport, PolicyError> {
    let mut instructions = Vec::new();
    let mut interactions = Vec::new();
    for rec in records {
        let history: Vec<Vec<String>> = rec.turns.iter().map(|t| t.tokens.clone()).collect();
        for (i, turn) in rec.turns.iter().enumerate() {
            let start = rec.start_of(i);
            let (actions, end) = run(domain, exec, rec, i, start, &history[..i], horizon)?;
            instructions.push(InstructionOutcome {
                interaction_id: rec.id.clone(),
                turn: i,
                success: end == turn.post_state,
                reward: rollout_reward(domain, start, &turn.post_state, &actions, delta),
                actions: actions.iter().map(|a| domain.format_action(*a)).collect(),
            });
        }
        let mut chained = rec.initial_state.clone();
        let mut at = Vec::new();
        for i in 0..rec.turns.len().min(5) {
            chained = run(domain, exec, rec, i, &chained, &history[..i], horizon)?.1;
            at.push(chained.clone());
        }
        let check = |n: usize| (rec.turns.len() >= n).then(|| at[n - 1] == rec.turns[n - 1].post_state);
        interactions.push(InteractionOutcome {
            interaction_id: rec.id.clone(),
            three: check(3),
            five: check(5),
        });
    }
    let mean_reward = if instructions.is_empty() {
        0.0
    } else {
        instructions.iter().map(|o| o.reward).sum::<f64>() / instructions.len() as f64
    };
    let mut report = EvalReport {
        domain: domain.name().to_string(),
        inst: None,
        three_utts: None,
        five_utts: None,
        mean_reward,
        instructions,
        interactions,
    };
    (report.inst, report.three_utts, report.five_utts) = report.recompute();
    Ok(report)
}
