//! Quick health checks of a build: domain transition properties on random
//! states and finite-difference checks of the differentiable layers and the
//! composed policy.

use anyhow::Result;
use autodiff::gradcheck::{check_gradients, GradCheckReport, DEFAULT_STEP};
use autodiff::nn::{attend, glorot_init, lstm_step, LstmParams, LstmState};
use autodiff::ParamSet;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sestra::domains::{Alchemy, DomainKind, Scene, Tangrams};
use sestra::policy::{Decoding, ModelConfig, Policy};
use sestra::reward::{problem_reward, RewardConfig};
use sestra::synthetic::mini_alchemy;
use sestra::vocab::Vocabulary;
use sestra::{Action, Domain};

const TOLERANCE: f64 = 1e-4;

fn random_walk<D: Domain>(d: &D, start: &D::State, rng: &mut impl Rng) -> D::State {
    let n = d.action_space().len();
    let mut s = start.clone();
    for _ in 0..rng.gen_range(0..16) {
        s = d.transition(&s, d.action_space().get(rng.gen_range(1..n)));
    }
    s
}

/// Violations of the transition contract over `count` random states.
fn domain_problems<D: Domain>(d: &D, empty: &D::State, count: usize, rng: &mut impl Rng) -> Vec<String> {
    let mut out = Vec::new();
    for _ in 0..count {
        let s = random_walk(d, empty, rng);
        let g = random_walk(d, empty, rng);
        let text = d.format_state(&s);
        if d.parse_state(&text).as_ref() != Ok(&s) {
            out.push(format!("{}: state {text:?} does not round trip", d.name()));
        }
        if d.transition(&s, Action::STOP) != s {
            out.push(format!("{}: STOP changed {text:?}", d.name()));
        }
        if d.distance(&s, &s) != 0 || d.distance(&s, &g) != d.distance(&g, &s) {
            out.push(format!("{}: distance is not a metric at {text:?}", d.name()));
        }
        for &a in d.action_space().actions() {
            let next = d.transition(&s, a);
            if d.validate_state(&next).is_err() {
                out.push(format!("{}: {} leaves the state space", d.name(), d.format_action(a)));
            }
            if next == s && !a.is_stop() && problem_reward(&s, a, &next, &g, 0.5) != -1.5 {
                out.push(format!("{}: invalid {} is not penalized", d.name(), d.format_action(a)));
            }
            if d.distance(&s, &g).abs_diff(d.distance(&next, &g)) > 1 {
                out.push(format!("{}: {} moves the distance by more than one", d.name(), d.format_action(a)));
            }
        }
    }
    out
}

fn lstm_report(rng: &mut ChaCha8Rng) -> Result<GradCheckReport> {
    let mut params = ParamSet::new();
    let lstm = LstmParams::register(&mut params, "lstm", 3, 4, rng)?;
    let inputs: Vec<Vec<f64>> = (0..3).map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    Ok(check_gradients(&mut params, DEFAULT_STEP, 64, |g| {
        let mut s = LstmState::zeros(g, 4);
        let mut total = g.zeros(4);
        for x in &inputs {
            let xv = g.input(x.clone());
            s = lstm_step(g, &lstm, xv, s).expect("matching sizes");
            total = g.add(total, s.h);
        }
        let sq = g.mul(total, total);
        g.sum(sq)
    })?)
}

fn attention_report(rng: &mut ChaCha8Rng) -> Result<GradCheckReport> {
    let mut params = ParamSet::new();
    let w = params.add("w", glorot_init(3, 5, rng)?)?;
    let keys = params.add("keys", glorot_init(4, 3, rng)?)?;
    let query = params.add("query", glorot_init(1, 5, rng)?)?;
    let probe = params.add("probe", glorot_init(1, 3, rng)?)?;
    Ok(check_gradients(&mut params, DEFAULT_STEP, 64, |g| {
        let ks: Vec<_> = (0..4).map(|i| g.row(keys, i)).collect();
        let q = g.param(query);
        let att = attend(g, &ks, q, w).expect("matching sizes");
        let p = g.param(probe);
        let z = g.dot(att.context, p);
        let h = g.entropy(att.weights);
        g.add(z, h)
    })?)
}

/// Teacher-forced log-likelihood of a fixed action sequence under a toy
/// two-beaker policy.
fn policy_report(rng: &mut ChaCha8Rng) -> Result<GradCheckReport> {
    let d = mini_alchemy();
    let instruction: Vec<String> = ["pour", "first", "into", "second"].map(String::from).to_vec();
    let history = vec![["empty", "the", "first"].map(String::from).to_vec()];
    let vocab = Vocabulary::build([&instruction, &history[0]], 1);
    let mut policy = Policy::new(d.clone(), ModelConfig::toy(DomainKind::Alchemy, 4), vocab, rng)?;
    let start = d.parse_state("1:go 2:_")?;
    let space = d.action_space().clone();
    let indices = [
        space.index_of(d.pop(1)).expect("in space"),
        space.index_of(d.push(2, 2)).expect("in space"),
        0,
    ];
    let structure = policy.clone();
    Ok(check_gradients(policy.params_mut(), DEFAULT_STEP, 24, |g| {
        let mut r = ChaCha8Rng::seed_from_u64(0);
        let mut choose = |k: usize, _: &[f64], _: &mut dyn RngCore| indices[k];
        let trace = structure
            .trace(g, &instruction, &history, &start, indices.len(), false, &mut r, &mut choose)
            .expect("valid toy inputs");
        let mut total = g.zeros(1);
        for st in &trace.steps {
            let lp = g.gather(st.output.log_probs, vec![st.index]);
            total = g.add(total, lp);
        }
        g.sum(total)
    })?)
}

/// A sampled rollout of a freshly built full-size policy per domain is
/// consistent with the domain's transitions.
fn full_size_problems(rng: &mut ChaCha8Rng) -> Result<Vec<String>> {
    fn one<D: sestra::policy::StateEncoding + Clone>(
        d: D,
        kind: DomainKind,
        start: D::State,
        rng: &mut ChaCha8Rng,
    ) -> Result<Option<String>> {
        let words: Vec<String> = ["move", "the", "last", "one"].map(String::from).to_vec();
        let vocab = Vocabulary::build([&words], 1);
        let policy = Policy::new(d.clone(), ModelConfig::for_domain(kind), vocab, rng)?;
        let horizon = RewardConfig::for_domain(kind).horizon;
        let r = policy.rollout(&words, &[], &start, horizon, Decoding::Sample, rng)?;
        Ok((!r.execution.is_consistent(&d)).then(|| format!("{} rollout is inconsistent", d.name())))
    }
    let a = Alchemy::new();
    let sc = Scene::new();
    let t = Tangrams::new();
    let starts = (
        a.parse_state("1:g 2:_ 3:p 4:_ 5:y 6:oo 7:r")?,
        sc.empty_state(),
        t.parse_state("1:A 2:B 3:C")?,
    );
    Ok([
        one(a, DomainKind::Alchemy, starts.0, rng)?,
        one(sc, DomainKind::Scene, starts.1, rng)?,
        one(t, DomainKind::Tangrams, starts.2, rng)?,
    ]
    .into_iter()
    .flatten()
    .collect())
}

fn line(ok: bool, name: &str, detail: String) -> bool {
    println!("{} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
    ok
}

fn grad_line(name: &str, report: &GradCheckReport) -> bool {
    line(
        report.passes(TOLERANCE),
        name,
        format!(
            "max relative error {:.2e} over {} entries",
            report.max_relative_error, report.entries_checked
        ),
    )
}

fn problems_line(name: &str, problems: &[String]) -> bool {
    line(problems.is_empty(), name, problems.first().cloned().unwrap_or_else(|| "ok".into()))
}

pub fn run(states: usize, seed: u64) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ok = true;
    let a = Alchemy::new();
    let empty = a.parse_state("1:_ 2:_ 3:_ 4:_ 5:_ 6:_ 7:_")?;
    ok &= problems_line("alchemy transitions", &domain_problems(&a, &empty, states, &mut rng));
    let sc = Scene::new();
    ok &= problems_line("scene transitions", &domain_problems(&sc, &sc.empty_state(), states, &mut rng));
    let t = Tangrams::new();
    ok &= problems_line("tangrams transitions", &domain_problems(&t, &t.parse_state("")?, states, &mut rng));
    ok &= grad_line("lstm gradients", &lstm_report(&mut rng)?);
    ok &= grad_line("attention gradients", &attention_report(&mut rng)?);
    ok &= grad_line("policy gradients", &policy_report(&mut rng)?);
    ok &= problems_line("full-size rollouts", &full_size_problems(&mut rng)?);
    if ok {
        Ok(())
    } else {
        anyhow::bail!("self-test failed")
    }
}
