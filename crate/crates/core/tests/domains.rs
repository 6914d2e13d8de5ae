mod common;

use common::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sestra::domains::{slot_distance, Alchemy, Scene, Slot, Tangrams, COLORS, SCENE_POSITIONS};
use sestra::{apply_sequence, Action, AgentContext, Domain, Execution};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn pick_action<D: Domain>(d: &D, i: usize) -> Action {
    let space = d.action_space();
    space.get(i % space.len())
}

#[test]
fn action_counts_and_order() {
    for (len, space) in [
        (50, Alchemy::new().action_space().clone()),
        (141, Scene::new().action_space().clone()),
        (31, Tangrams::new().action_space().clone()),
    ] {
        assert_eq!(space.len(), len);
        assert!(space.get(0).is_stop());
        let unique: std::collections::HashSet<_> = space.actions().iter().collect();
        assert_eq!(unique.len(), len);
        let mut sorted = space.actions().to_vec();
        sorted.sort();
        assert_eq!(sorted, space.actions());
    }
}

#[test]
fn fig1_replays_from_start_to_goal() {
    let f = fig1();
    let mut state = f.record.initial_state.clone();
    for (turn, actions) in f.record.turns.iter().zip(&f.annotated) {
        for text in actions {
            let a = f.domain.parse_action(text).unwrap();
            let next = f.domain.transition(&state, a);
            assert!(
                a.is_stop() || next != state,
                "{text} is invalid in {}",
                f.domain.format_state(&state)
            );
            state = next;
        }
        assert_eq!(state, turn.post_state, "after {:?}", turn.utterance);
    }
}

#[test]
fn scene_examples() {
    let d = Scene::new();
    let red = COLORS.iter().position(|&c| c == 'r').unwrap() as u8;
    let blue = COLORS.iter().position(|&c| c == 'b').unwrap() as u8;
    let empty = d.empty_state();
    let mut v = vec![Slot::default(); SCENE_POSITIONS];
    v[1] = Slot {
        shirt: Some(red),
        hat: None,
    };
    assert_eq!(d.distance(&d.state(v.clone()).unwrap(), &empty), 1);
    v[1].hat = Some(blue);
    assert_eq!(d.distance(&d.state(v).unwrap(), &empty), 2);
}

#[test]
fn tangrams_remove_shifts_left() {
    let d = Tangrams::new();
    let s = d.parse_state("1:A 2:B 3:C 4:D").unwrap();
    assert_eq!(d.format_state(&d.transition(&s, d.remove(2))), "1:A 2:C 3:D");
    assert_eq!(d.format_state(&d.transition(&s, d.insert(5, 4))), "1:A 2:B 3:C 4:D 5:E");
    assert_eq!(d.transition(&s, d.insert(3, 0)), s);
}

#[test]
fn scene_slot_distance_matches_bfs_for_every_pair() {
    let d = Scene::new();
    let all: Vec<Slot> = (0..=COLORS.len())
        .flat_map(|s| (0..=COLORS.len()).map(move |h| (s, h)))
        .map(|(s, h)| Slot {
            shirt: (s > 0).then(|| (s - 1) as u8),
            hat: (h > 0).then(|| (h - 1) as u8),
        })
        .collect();
    for &a in &all {
        for &b in &all {
            let expected = scene_slot_bfs(&d, a, b, 3).unwrap();
            assert_eq!(slot_distance(a, b), expected, "{a:?} -> {b:?}");
            assert!(expected <= 4);
        }
    }
}

#[test]
fn stop_is_idempotent() {
    let d = Alchemy::new();
    let mut r = rng(4);
    for n in 0..10 {
        let s = random_alchemy_state(&d, &mut r, 4);
        assert_eq!(apply_sequence(&d, &s, &vec![Action::STOP; n]), s);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn alchemy_push_then_pop_is_identity(seed in 0u64..10_000, beaker in 1usize..=7, color in 0u8..6) {
        let d = Alchemy::new();
        let s = random_alchemy_state(&d, &mut rng(seed), 4);
        let pushed = d.transition(&s, d.push(beaker, color));
        prop_assert_ne!(&pushed, &s);
        prop_assert_eq!(d.transition(&pushed, d.pop(beaker)), s);
    }

    #[test]
    fn tangrams_insert_remove_inverses(seed in 0u64..10_000, pos in 1usize..=5, shape in 0u8..5) {
        let d = Tangrams::new();
        let s = random_tangrams_state(&d, &mut rng(seed));
        let inserted = d.transition(&s, d.insert(pos, shape));
        if inserted != s {
            prop_assert_eq!(d.transition(&inserted, d.remove(pos)), s.clone());
        }
        let removed = d.transition(&s, d.remove(pos));
        if removed != s {
            let t = s.figures()[pos - 1];
            prop_assert_eq!(d.transition(&removed, d.insert(pos, t)), s);
        }
    }

    #[test]
    fn identity_on_invalid_and_stop(seed in 0u64..10_000, i in 0usize..200) {
        let mut r = rng(seed);
        let a = Alchemy::new();
        let s = random_alchemy_state(&a, &mut r, 4);
        let act = pick_action(&a, i);
        let n = a.transition(&s, act);
        let applies = match (act.kind(), act.arg1()) {
            (1, Some(b)) => !s.beakers()[b].is_empty(),
            (2, Some(_)) => true,
            _ => false,
        };
        prop_assert_eq!(n != s, applies);
        prop_assert!(a.validate_state(&n).is_ok());
        prop_assert_eq!(a.transition(&s, Action::STOP), s);

        let sc = Scene::new();
        let s = random_scene_state(&sc, &mut r);
        prop_assert!(sc.validate_state(&sc.transition(&s, pick_action(&sc, i))).is_ok());
        prop_assert_eq!(sc.transition(&s, Action::STOP), s);

        let t = Tangrams::new();
        let s = random_tangrams_state(&t, &mut r);
        prop_assert!(t.validate_state(&t.transition(&s, pick_action(&t, i))).is_ok());
        prop_assert_eq!(t.transition(&s, Action::STOP), s);
    }

    #[test]
    fn distances_are_metrics(seed in 0u64..10_000) {
        let mut r = rng(seed);
        let a = Alchemy::new();
        let (x, y) = (random_alchemy_state(&a, &mut r, 4), random_alchemy_state(&a, &mut r, 4));
        prop_assert_eq!(a.distance(&x, &x), 0);
        prop_assert_eq!(a.distance(&x, &y), a.distance(&y, &x));
        prop_assert_eq!(a.distance(&x, &y) == 0, x == y);

        let sc = Scene::new();
        let (x, y) = (random_scene_state(&sc, &mut r), random_scene_state(&sc, &mut r));
        prop_assert_eq!(sc.distance(&x, &x), 0);
        prop_assert_eq!(sc.distance(&x, &y), sc.distance(&y, &x));
        prop_assert_eq!(sc.distance(&x, &y) == 0, x == y);

        let t = Tangrams::new();
        let (x, y) = (random_tangrams_state(&t, &mut r), random_tangrams_state(&t, &mut r));
        prop_assert_eq!(t.distance(&x, &x), 0);
        prop_assert_eq!(t.distance(&x, &y), t.distance(&y, &x));
        prop_assert_eq!(t.distance(&x, &y) == 0, x == y);
    }

    #[test]
    fn one_action_moves_distance_by_at_most_one(seed in 0u64..10_000, i in 0usize..200) {
        let mut r = rng(seed);
        let a = Alchemy::new();
        let (s, g) = (random_alchemy_state(&a, &mut r, 4), random_alchemy_state(&a, &mut r, 4));
        let n = a.transition(&s, pick_action(&a, i));
        prop_assert!(a.distance(&s, &g).abs_diff(a.distance(&n, &g)) <= 1);

        let sc = Scene::new();
        let (s, g) = (random_scene_state(&sc, &mut r), random_scene_state(&sc, &mut r));
        let n = sc.transition(&s, pick_action(&sc, i));
        prop_assert!(sc.distance(&s, &g).abs_diff(sc.distance(&n, &g)) <= 1);

        let t = Tangrams::new();
        let (s, g) = (random_tangrams_state(&t, &mut r), random_tangrams_state(&t, &mut r));
        let n = t.transition(&s, pick_action(&t, i));
        prop_assert!(t.distance(&s, &g).abs_diff(t.distance(&n, &g)) <= 1);
    }

    #[test]
    fn distances_match_edit_distance_oracles(seed in 0u64..10_000) {
        let mut r = rng(seed);
        let a = Alchemy::new();
        let (x, y) = (random_alchemy_state(&a, &mut r, 4), random_alchemy_state(&a, &mut r, 4));
        let expected: u32 = x.beakers().iter().zip(y.beakers()).map(|(p, q)| edit_distance_oracle(p, q, 1)).sum();
        prop_assert_eq!(a.distance(&x, &y), expected);

        let t = Tangrams::new();
        let (x, y) = (random_tangrams_state(&t, &mut r), random_tangrams_state(&t, &mut r));
        prop_assert_eq!(t.distance(&x, &y), edit_distance_oracle(x.figures(), y.figures(), 2));
    }

    #[test]
    fn state_strings_round_trip(seed in 0u64..10_000) {
        let mut r = rng(seed);
        let a = Alchemy::new();
        let s = random_alchemy_state(&a, &mut r, 4);
        prop_assert_eq!(a.parse_state(&a.format_state(&s)).unwrap(), s);
        let sc = Scene::new();
        let s = random_scene_state(&sc, &mut r);
        prop_assert_eq!(sc.parse_state(&sc.format_state(&s)).unwrap(), s);
        let t = Tangrams::new();
        let s = random_tangrams_state(&t, &mut r);
        prop_assert_eq!(t.parse_state(&t.format_state(&s)).unwrap(), s);
    }

    #[test]
    fn action_strings_round_trip(i in 0usize..141) {
        let sc = Scene::new();
        let act = pick_action(&sc, i);
        prop_assert_eq!(sc.parse_action(&sc.format_action(act)).unwrap(), act);
        let a = Alchemy::new();
        let act = pick_action(&a, i);
        prop_assert_eq!(a.parse_action(&a.format_action(act)).unwrap(), act);
    }

    #[test]
    fn fold_and_context_agree(seed in 0u64..10_000, picks in prop::collection::vec(1usize..200, 0..12)) {
        let d = Alchemy::new();
        let s = random_alchemy_state(&d, &mut rng(seed), 3);
        let actions: Vec<Action> = picks.iter().map(|&i| pick_action(&d, i)).filter(|a| !a.is_stop()).collect();
        let folded = apply_sequence(&d, &s, &actions);
        prop_assert_eq!(&folded, &apply_sequence(&d, &s, &actions));
        let instr = vec!["x".to_string()];
        let mut ctx = AgentContext::new(&instr, &[], &s);
        let mut exec = Execution::new(s.clone());
        for &a in &actions {
            ctx.apply(&d, a);
            exec.push(&d, a);
            prop_assert!(ctx.is_consistent(&d));
        }
        prop_assert_eq!(ctx.current_state(), &folded);
        prop_assert!(exec.is_consistent(&d));
        prop_assert_eq!(exec.final_state(), &folded);
    }
}
