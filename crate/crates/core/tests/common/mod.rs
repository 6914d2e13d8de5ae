//! Independent oracles, fixtures, and random generators shared by the
//! integration tests.

#![allow(dead_code)]

use std::collections::{HashSet, VecDeque};

use rand::Rng;
use sestra::data::{tokenize, InteractionRecord, Turn};
use sestra::domains::{
    Alchemy, AlchemyState, Scene, SceneState, Slot, Tangrams, TangramsState, COLORS, SCENE_POSITIONS, SHAPES, TANGRAMS_MAX_LEN,
};
use sestra::{Action, Domain};

pub fn random_alchemy_state(d: &Alchemy, rng: &mut impl Rng, max_units: usize) -> AlchemyState {
    let beakers = (0..d.num_beakers())
        .map(|_| {
            let n = rng.gen_range(0..=max_units);
            (0..n).map(|_| rng.gen_range(0..COLORS.len() as u8)).collect()
        })
        .collect();
    d.state(beakers).unwrap()
}

pub fn random_slot(rng: &mut impl Rng) -> Slot {
    let mut pick = || rng.gen_bool(0.6).then(|| rng.gen_range(0..COLORS.len() as u8));
    Slot {
        shirt: pick(),
        hat: pick(),
    }
}

pub fn random_scene_state(d: &Scene, rng: &mut impl Rng) -> SceneState {
    d.state((0..SCENE_POSITIONS).map(|_| random_slot(rng)).collect()).unwrap()
}

pub fn random_tangrams_state(d: &Tangrams, rng: &mut impl Rng) -> TangramsState {
    let mut shapes: Vec<u8> = (0..SHAPES.len() as u8).collect();
    for i in (1..shapes.len()).rev() {
        shapes.swap(i, rng.gen_range(0..=i));
    }
    let n = rng.gen_range(0..=TANGRAMS_MAX_LEN);
    d.state(shapes[..n].to_vec()).unwrap()
}

/// Full-matrix edit distance with unit insert/delete and substitution cost `sub`.
pub fn edit_distance_oracle(a: &[u8], b: &[u8], sub: u32) -> u32 {
    let mut m = vec![vec![0u32; b.len() + 1]; a.len() + 1];
    for (i, row) in m.iter_mut().enumerate() {
        row[0] = i as u32;
    }
    for (j, cell) in m[0].iter_mut().enumerate() {
        *cell = j as u32;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let diag = m[i - 1][j - 1] + if a[i - 1] == b[j - 1] { 0 } else { sub };
            m[i][j] = diag.min(m[i - 1][j] + 1).min(m[i][j - 1] + 1);
        }
    }
    m[a.len()][b.len()]
}

/// BFS distance between two slots using only the actions that address one
/// position of an otherwise empty scene, through the domain transition.
pub fn scene_slot_bfs(d: &Scene, from: Slot, to: Slot, position: usize) -> Option<u32> {
    let place = |s: Slot| {
        let mut v = vec![Slot::default(); SCENE_POSITIONS];
        v[position] = s;
        d.state(v).unwrap()
    };
    let goal = place(to);
    let actions: Vec<Action> = d
        .action_space()
        .actions()
        .iter()
        .copied()
        .filter(|a| a.arg1() == Some(position))
        .collect();
    let start = place(from);
    let mut seen = HashSet::from([start.clone()]);
    let mut queue = VecDeque::from([(start, 0u32)]);
    while let Some((s, dist)) = queue.pop_front() {
        if s == goal {
            return Some(dist);
        }
        for &a in &actions {
            let n = d.transition(&s, a);
            if seen.insert(n.clone()) {
                queue.push_back((n, dist + 1));
            }
        }
    }
    None
}

/// Plain breadth-first search in canonical action order, returning the first
/// shortest path found (without the final `STOP`).
pub fn bfs_shortest<D: Domain>(d: &D, start: &D::State, goal: &D::State, max_depth: usize) -> Option<Vec<Action>> {
    let actions: Vec<Action> = d.action_space().actions().iter().copied().filter(|a| !a.is_stop()).collect();
    let mut seen = HashSet::from([start.clone()]);
    let mut frontier = vec![(start.clone(), Vec::new())];
    for _ in 0..=max_depth {
        let mut next = Vec::new();
        for (s, path) in frontier {
            if s == *goal {
                return Some(path);
            }
            for &a in &actions {
                let n = d.transition(&s, a);
                if seen.insert(n.clone()) {
                    let mut p = path.clone();
                    p.push(a);
                    next.push((n, p));
                }
            }
        }
        frontier = next;
    }
    None
}

/// Every shortest action sequence from `start` to `goal`, by exhaustive
/// enumeration of sequences up to `max_depth`.
pub fn exhaustive_shortest_len<D: Domain>(d: &D, start: &D::State, goal: &D::State, max_depth: usize) -> Option<usize> {
    let actions: Vec<Action> = d.action_space().actions().iter().copied().filter(|a| !a.is_stop()).collect();
    let mut layer = vec![start.clone()];
    for depth in 0..=max_depth {
        if layer.iter().any(|s| s == goal) {
            return Some(depth);
        }
        layer = layer
            .iter()
            .flat_map(|s| actions.iter().map(move |&a| d.transition(s, a)))
            .collect();
    }
    None
}

/// The five-instruction interaction of the introductory Alchemy example,
/// with each instruction's annotated action sequence.
pub struct Fig1 {
    pub domain: Alchemy,
    pub record: InteractionRecord<AlchemyState>,
    pub annotated: Vec<Vec<&'static str>>,
}

pub fn fig1() -> Fig1 {
    let domain = Alchemy::new();
    let state = |s: &str| domain.parse_state(s).unwrap();
    let turns = [
        ("throw out first beaker", "1:_ 2:_ 3:p 4:_ 5:y 6:oo 7:r"),
        ("pour sixth beaker into last one", "1:_ 2:_ 3:p 4:_ 5:y 6:_ 7:roo"),
        ("it turns brown", "1:_ 2:_ 3:p 4:_ 5:y 6:_ 7:bbb"),
        ("pour purple beaker into yellow one", "1:_ 2:_ 3:_ 4:_ 5:yp 6:_ 7:bbb"),
        ("throw out two units of brown one", "1:_ 2:_ 3:_ 4:_ 5:yp 6:_ 7:b"),
    ];
    let record = InteractionRecord {
        id: "fig1".into(),
        initial_state: state("1:g 2:_ 3:p 4:_ 5:y 6:oo 7:r"),
        turns: turns
            .iter()
            .map(|(u, s)| Turn {
                utterance: u.to_string(),
                tokens: tokenize(u),
                post_state: state(s),
            })
            .collect(),
    };
    let annotated = vec![
        vec!["pop 1", "STOP"],
        vec!["pop 6", "pop 6", "push 7 o", "push 7 o", "STOP"],
        vec!["pop 7", "pop 7", "pop 7", "push 7 b", "push 7 b", "push 7 b", "STOP"],
        vec!["pop 3", "push 5 p", "STOP"],
        vec!["pop 7", "pop 7", "STOP"],
    ];
    Fig1 { domain, record, annotated }
}

/// A two-turn interaction over the two-beaker Alchemy variant whose
/// vocabulary has exactly ten entries.
pub fn toy_record() -> InteractionRecord<AlchemyState> {
    let d = sestra::synthetic::mini_alchemy();
    let state = |s: &str| d.parse_state(s).unwrap();
    let turn = |u: &str, s: &str| Turn {
        utterance: u.to_string(),
        tokens: tokenize(u),
        post_state: state(s),
    };
    InteractionRecord {
        id: "toy".into(),
        initial_state: state("1:go 2:_"),
        turns: vec![
            turn("pour first into second", "1:g 2:o"),
            turn("drain second beaker then", "1:g 2:_"),
        ],
    }
}

pub fn toy_policy(hidden: usize, seed: u64) -> sestra::policy::Policy<Alchemy> {
    use rand::SeedableRng;
    let rec = toy_record();
    let vocab = sestra::vocab::Vocabulary::build(rec.turns.iter().map(|t| &t.tokens), 1);
    assert_eq!(vocab.len(), 10);
    let cfg = sestra::policy::ModelConfig::toy(sestra::domains::DomainKind::Alchemy, hidden);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    sestra::policy::Policy::new(sestra::synthetic::mini_alchemy(), cfg, vocab, &mut rng).unwrap()
}

/// Teacher-forced log-likelihood of `indices` plus an expected-reward term
/// at every step, on the second turn of [`toy_record`].
pub fn composed_objective<'p>(policy: &sestra::policy::Policy<Alchemy>, g: &mut autodiff::Graph<'p>, indices: &[usize]) -> autodiff::Var {
    use rand::SeedableRng;
    let rec = toy_record();
    let history = vec![rec.turns[0].tokens.clone()];
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
    let mut choose = |k: usize, _: &[f64], _: &mut dyn rand::RngCore| indices[k];
    let trace = policy
        .trace(
            g,
            &rec.turns[1].tokens,
            &history,
            rec.start_of(1),
            indices.len(),
            false,
            &mut rng,
            &mut choose,
        )
        .unwrap();
    let n = policy.num_actions();
    let rewards: Vec<f64> = (0..n).map(|i| ((i * 7) % 5) as f64 * 0.3 - 0.6).collect();
    let mut total = g.zeros(1);
    for st in &trace.steps {
        let lp = g.gather(st.output.log_probs, vec![st.index]);
        total = g.add(total, lp);
        let r = g.input(rewards.clone());
        let e = g.dot(st.output.probs, r);
        total = g.add(total, e);
    }
    g.sum(total)
}

/// Gradient of `J(θ) = Σ_a R_a π_a + λ H(π)` with `π = softmax(θ)` through
/// the training objective, and its worst relative error against central
/// differences of a direct evaluation of `J`.
pub fn bandit_gradient(theta: &[f64], rewards: &[f64], lambda: f64) -> (Vec<f64>, f64) {
    use autodiff::gradcheck::relative_error;
    let mut params = autodiff::ParamSet::new();
    let id = params
        .add("theta", autodiff::Tensor::new(vec![theta.len()], theta.to_vec()).unwrap())
        .unwrap();
    let mut grads = autodiff::Gradients::zeros_like(&params);
    {
        let mut g = autodiff::Graph::new(&params);
        let t = g.param(id);
        let p = g.softmax(t);
        let j = sestra::training::objectives::expected_reward_objective(&mut g, p, rewards.to_vec(), lambda).unwrap();
        g.backward(j, &mut grads).unwrap();
    }
    let direct = |th: &[f64]| {
        let m = th.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = th.iter().map(|v| (v - m).exp()).sum();
        let p: Vec<f64> = th.iter().map(|v| (v - m).exp() / z).collect();
        let e: f64 = p.iter().zip(rewards).map(|(p, r)| p * r).sum();
        let h: f64 = -p.iter().map(|p| p * p.ln()).sum::<f64>();
        e + lambda * h
    };
    let analytic = grads.get(id).to_vec();
    let h = 1e-5;
    let mut worst = 0.0f64;
    for i in 0..theta.len() {
        let mut plus = theta.to_vec();
        plus[i] += h;
        let mut minus = theta.to_vec();
        minus[i] -= h;
        let numeric = (direct(&plus) - direct(&minus)) / (2.0 * h);
        worst = worst.max(relative_error(analytic[i], numeric));
    }
    (analytic, worst)
}

/// Trains the supervised baseline on 50 miniature examples for up to 50
/// epochs. Returns the first epoch whose teacher-forced argmax matched every
/// demonstration, and the fraction of examples whose greedy rollout
/// reproduces its demonstration afterwards.
pub fn supervised_overfit() -> (Option<usize>, f64) {
    use rand::SeedableRng;
    use sestra::training::{generate_demonstration, train, Algorithm, TrainConfig, DEFAULT_NODE_CAP};
    let records = sestra::synthetic::mini_alchemy_records(50, 21);
    let examples = sestra::data::make_examples(&records);
    let vocab = sestra::vocab::Vocabulary::build(examples.iter().map(|e| &e.instruction), 1);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
    let cfg_model = sestra::policy::ModelConfig::toy(sestra::domains::DomainKind::Alchemy, 32);
    let mut policy = sestra::policy::Policy::new(sestra::synthetic::mini_alchemy(), cfg_model, vocab, &mut rng).unwrap();
    let mut cfg = TrainConfig::new(sestra::domains::DomainKind::Alchemy, Algorithm::Supervised, 0);
    cfg.max_epochs = 50;
    cfg.batch_size = 1;
    let mut first = None;
    train(
        &mut policy,
        &records,
        &[],
        &cfg,
        &mut |r| {
            if first.is_none() && r.train_success == 1.0 {
                first = Some(r.epoch);
            }
        },
        &mut |_| {},
    )
    .unwrap();
    let replayed = examples
        .iter()
        .filter(|ex| {
            let demo = generate_demonstration(policy.domain(), &ex.start, &ex.goal, DEFAULT_NODE_CAP).unwrap();
            let r = policy.greedy(&ex.instruction, &ex.history, &ex.start, demo.len()).unwrap();
            r.execution.actions() == demo
        })
        .count();
    (first, replayed as f64 / examples.len() as f64)
}

/// Interaction counts per split of the public SCONE release.
pub const SCONE_COUNTS: [(&str, [usize; 3]); 3] = [
    ("alchemy", [3657, 245, 899]),
    ("scene", [3352, 198, 1035]),
    ("tangrams", [4189, 199, 800]),
];

pub const SCONE_SPLITS: [&str; 3] = ["train", "dev", "test"];

fn check_scone_split<D: Domain>(d: &D, path: &std::path::Path, expected: usize) -> Vec<String> {
    let mut problems = Vec::new();
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => return vec![format!("{}: {e}", path.display())],
    };
    let label = path.display().to_string();
    let records = match sestra::data::parse_scone(d, text.as_bytes(), &label) {
        Ok(r) => r,
        Err(e) => return vec![e.to_string()],
    };
    if records.len() != expected {
        problems.push(format!("{label}: {} interactions, expected {expected}", records.len()));
    }
    let lines = text.lines().map(|l| l.trim_end_matches('\r')).filter(|l| !l.trim().is_empty());
    for (i, (line, rec)) in lines.zip(&records).enumerate() {
        if sestra::data::format_line(d, rec) != line {
            problems.push(format!("{label}:{}: line does not round trip", i + 1));
        }
    }
    let examples = sestra::data::make_examples(&records);
    for w in examples.windows(2) {
        if w[0].interaction_id == w[1].interaction_id && w[0].goal != w[1].start {
            problems.push(format!("{label}: chain broken in {}", w[0].interaction_id));
        }
    }
    problems
}

/// Checks counts, line round trips, and chaining for every split found in
/// `dir`, which holds `<domain>-<split>.tsv` files.
pub fn check_scone_dir(dir: &std::path::Path) -> Vec<String> {
    let mut problems = Vec::new();
    for (name, counts) in SCONE_COUNTS {
        for (split, expected) in SCONE_SPLITS.iter().zip(counts) {
            let path = dir.join(format!("{name}-{split}.tsv"));
            problems.extend(match name {
                "alchemy" => check_scone_split(&Alchemy::new(), &path, expected),
                "scene" => check_scone_split(&Scene::new(), &path, expected),
                _ => check_scone_split(&Tangrams::new(), &path, expected),
            });
        }
    }
    problems
}

/// A toy policy trained briefly on the miniature task, and the attention
/// archives of both turns of [`toy_record`].
pub fn trained_toy_archives() -> Vec<sestra::attention::AttentionArchive> {
    use rand::SeedableRng;
    use sestra::training::{train, Algorithm, TrainConfig};
    let records = sestra::synthetic::mini_alchemy_records(40, 31);
    let toy = toy_record();
    let mut sentences: Vec<Vec<String>> = records.iter().map(|r| r.turns[0].tokens.clone()).collect();
    sentences.extend(toy.turns.iter().map(|t| t.tokens.clone()));
    let vocab = sestra::vocab::Vocabulary::build(sentences.iter(), 1);
    let cfg_model = sestra::policy::ModelConfig::toy(sestra::domains::DomainKind::Alchemy, 8);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    let mut policy = sestra::policy::Policy::new(sestra::synthetic::mini_alchemy(), cfg_model, vocab, &mut rng).unwrap();
    let mut cfg = TrainConfig::new(sestra::domains::DomainKind::Alchemy, Algorithm::Sestra, 1);
    cfg.max_epochs = 5;
    cfg.batch_size = 4;
    train(&mut policy, &records, &[], &cfg, &mut |_| {}, &mut |_| {}).unwrap();
    (0..toy.turns.len())
        .map(|t| sestra::attention::dump_attention(&policy, &toy, t, cfg.reward.horizon).unwrap())
        .collect()
}

/// Every structural property of an archive, as a list of violations.
pub fn archive_problems(a: &sestra::attention::AttentionArchive) -> Vec<String> {
    let mut out = Vec::new();
    let names: Vec<&str> = a.heads.iter().map(|h| h.name.as_str()).collect();
    if names != sestra::attention::HEAD_NAMES {
        out.push(format!("heads {names:?}"));
    }
    let steps = a.actions.len();
    for h in &a.heads {
        let expected = if h.name == "previous_instructions" && a.turn == 0 {
            0
        } else {
            steps
        };
        if h.rows.len() != expected {
            out.push(format!("{}: {} rows, expected {expected}", h.name, h.rows.len()));
        }
        for (k, r) in h.rows.iter().enumerate() {
            if r.step != k || r.labels.len() != r.weights.len() || r.action != a.actions[k] {
                out.push(format!("{} row {k} malformed", h.name));
            }
            if r.weights.iter().any(|w| *w < 0.0) || (r.weights.iter().sum::<f64>() - 1.0).abs() > 1e-6 {
                out.push(format!("{} row {k} is not a distribution", h.name));
            }
        }
    }
    out
}
