mod common;

use std::collections::HashMap;

use common::*;
use proptest::prelude::*;
use sestra::data::InteractionRecord;
use sestra::domains::{Alchemy, AlchemyState};
use sestra::error::PolicyError;
use sestra::eval::{evaluate, Executor};
use sestra::{Action, Domain};

/// Replays annotated actions looked up by instruction text; STOPs on
/// anything it does not know.
struct Replay {
    domain: Alchemy,
    table: HashMap<String, Vec<&'static str>>,
}

impl Executor<Alchemy> for Replay {
    fn execute(&self, instruction: &[String], _: &[Vec<String>], _: &AlchemyState, horizon: usize) -> Result<Vec<Action>, PolicyError> {
        let actions = match self.table.get(&instruction.join(" ")) {
            Some(a) => a.iter().map(|t| self.domain.parse_action(t).unwrap()).collect(),
            None => vec![Action::STOP],
        };
        Ok(actions.into_iter().take(horizon).collect())
    }
}

struct AlwaysStop;

impl<D: Domain> Executor<D> for AlwaysStop {
    fn execute(&self, _: &[String], _: &[Vec<String>], _: &D::State, _: usize) -> Result<Vec<Action>, PolicyError> {
        Ok(vec![Action::STOP])
    }
}

fn replay() -> (Replay, InteractionRecord<AlchemyState>) {
    let f = fig1();
    let table = f
        .record
        .turns
        .iter()
        .zip(f.annotated)
        .map(|(t, a)| (t.tokens.join(" "), a))
        .collect();
    (Replay { domain: f.domain, table }, f.record)
}

#[test]
fn oracle_scores_one_everywhere() {
    let (oracle, rec) = replay();
    let report = evaluate(&oracle.domain, &oracle, &[rec], 7, 0.15).unwrap();
    assert_eq!(report.inst.unwrap().accuracy, 1.0);
    assert_eq!(report.three_utts.unwrap().accuracy, 1.0);
    assert_eq!(report.five_utts.unwrap().accuracy, 1.0);
    assert_eq!(report.recompute(), (report.inst, report.three_utts, report.five_utts));
    assert!(report.instructions.iter().all(|o| o.reward > 0.0));
}

#[test]
fn failing_the_fourth_turn_only_breaks_five_utts() {
    let (oracle, rec) = replay();
    let mut broken = rec.clone();
    broken.id = "broken".into();
    broken.turns[3].tokens.push("please".into());
    let report = evaluate(&oracle.domain, &oracle, &[rec, broken], 7, 0.15).unwrap();
    assert_eq!(report.five_utts.unwrap().accuracy, 0.5);
    assert_eq!(report.three_utts.unwrap().accuracy, 1.0);
    let inst = report.inst.unwrap();
    assert_eq!((inst.correct, inst.total), (9, 10));
}

#[test]
fn always_stop_succeeds_only_on_no_op_instructions() {
    let (_, mut rec) = replay();
    let unchanged = rec.turns[1].post_state.clone();
    rec.turns[2].post_state = unchanged.clone();
    rec.turns[3].post_state = unchanged.clone();
    rec.turns[4].post_state = unchanged;
    let d = Alchemy::new();
    let report = evaluate(&d, &AlwaysStop, &[rec.clone()], 7, 0.15).unwrap();
    for o in &report.instructions {
        assert_eq!(o.success, rec.start_of(o.turn) == &rec.turns[o.turn].post_state);
    }
    assert_eq!(report.inst.unwrap().correct, 3);
    assert_eq!(report.five_utts.unwrap().accuracy, 0.0);
}

#[test]
fn short_interactions_have_no_interaction_measures() {
    let (oracle, mut rec) = replay();
    rec.turns.truncate(2);
    let report = evaluate(&oracle.domain, &oracle, &[rec], 7, 0.15).unwrap();
    assert!(report.three_utts.is_none() && report.five_utts.is_none());
    assert_eq!(report.inst.unwrap().accuracy, 1.0);
}

#[test]
fn untrained_policy_scores_near_zero() {
    let policy = toy_policy(4, 1);
    let records = sestra::synthetic::mini_alchemy_records(40, 3);
    let report = evaluate(policy.domain(), &policy, &records, 7, 0.15).unwrap();
    assert!(report.inst_accuracy() < 0.2);
    assert_eq!(report.instructions.len(), 40);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn inst_accuracy_ignores_record_order(seed in 0u64..1000) {
        let policy = toy_policy(4, 2);
        let records = sestra::synthetic::mini_alchemy_records(12, seed);
        let mut shuffled = records.clone();
        shuffled.reverse();
        shuffled.rotate_left((seed % 12) as usize);
        let a = evaluate(policy.domain(), &policy, &records, 7, 0.15).unwrap();
        let b = evaluate(policy.domain(), &policy, &shuffled, 7, 0.15).unwrap();
        prop_assert_eq!(a.inst, b.inst);
        prop_assert_eq!(a.recompute(), (a.inst, a.three_utts, a.five_utts));
    }
}
