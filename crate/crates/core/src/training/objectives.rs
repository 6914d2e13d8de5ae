//! Per-example losses. Each function builds one graph, back-propagates into
//! `grads`, and returns rollout statistics. Losses are negated objectives,
//! so descending them ascends the objective.

use autodiff::{Gradients, Graph, Var};
use rand::RngCore;

use super::ReturnMode;
use crate::data::InstructionExample;
use crate::env::Action;
use crate::error::TrainError;
use crate::policy::{greedy_index, sample_index, Policy, StateEncoding, Trace};
use crate::reward::{RewardConfig, RewardFn};

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ExampleStats {
    /// Total shaped reward of the sampled actions.
    pub reward: f64,
    pub steps: usize,
    pub success: bool,
    pub reward_queries: u64,
    pub loss: f64,
}

fn sampled_trace<'p, D: StateEncoding>(
    policy: &Policy<D>,
    g: &mut Graph<'p>,
    ex: &InstructionExample<D::State>,
    horizon: usize,
    rng: &mut dyn RngCore,
) -> Result<Trace<D::State>, TrainError> {
    let mut choose = |_: usize, p: &[f64], r: &mut dyn RngCore| sample_index(p, r);
    Ok(policy.trace(g, &ex.instruction, &ex.history, &ex.start, horizon, true, rng, &mut choose)?)
}

/// Reward of the sampled action at each step, with the last step of a
/// horizon-exhausted rollout overridden.
fn step_rewards<D: StateEncoding>(policy: &Policy<D>, trace: &Trace<D::State>, r: &RewardFn<D>) -> Vec<f64> {
    let d = policy.domain();
    let n = trace.steps.len();
    trace
        .steps
        .iter()
        .enumerate()
        .map(|(k, st)| {
            let next = d.transition(&st.state, st.action);
            if trace.hit_horizon && k + 1 == n {
                r.horizon_failure_reward(&st.state, st.action, &next)
            } else {
                r.reward(&st.state, st.action, &next)
            }
        })
        .collect()
}

fn backprop(g: &mut Graph, terms: &[Var], scale: f64, grads: &mut Gradients) -> Result<f64, TrainError> {
    let mut total = terms[0];
    for &t in &terms[1..] {
        total = g.add(total, t);
    }
    let loss = g.scale(total, scale);
    g.backward(loss, grads)?;
    Ok(g.scalar(loss))
}

fn stats<S: PartialEq>(trace: &Trace<S>, goal: &S, rewards: &[f64], queries: u64, loss: f64) -> ExampleStats {
    ExampleStats {
        reward: rewards.iter().sum(),
        steps: trace.steps.len(),
        success: !trace.hit_horizon && trace.final_state == *goal,
        reward_queries: queries,
        loss,
    }
}

/// Rewards of every action at `state`, as used by the all-action objective.
pub fn all_action_rewards<D: StateEncoding>(policy: &Policy<D>, state: &D::State, r: &RewardFn<D>, horizon_failure: bool) -> Vec<f64> {
    let d = policy.domain();
    d.action_space()
        .actions()
        .iter()
        .map(|&a| {
            let next = d.transition(state, a);
            if horizon_failure && !a.is_stop() {
                r.horizon_failure_reward(state, a, &next)
            } else {
                r.reward(state, a, &next)
            }
        })
        .collect()
}

/// `J_k = Σ_a R(s_k, a, T(s_k, a)) π(a) + λ H(π)` for one step.
pub fn expected_reward_objective(g: &mut Graph, probs: Var, rewards: Vec<f64>, lambda: f64) -> Result<Var, TrainError> {
    let r = g.input(rewards);
    let expected = g.dot(probs, r);
    if lambda == 0.0 {
        return Ok(expected);
    }
    let h = autodiff::nn::entropy(g, probs)?;
    let h = g.scale(h, lambda);
    Ok(g.add(expected, h))
}

/// Single-step reward observation: every action's reward is observed at
/// every visited state, weighting the gradient of its probability.
pub fn sestra_example<D: StateEncoding>(
    policy: &Policy<D>,
    ex: &InstructionExample<D::State>,
    cfg: &RewardConfig,
    grads: &mut Gradients,
    rng: &mut dyn RngCore,
) -> Result<ExampleStats, TrainError> {
    let mut g = Graph::new(policy.params());
    let trace = sampled_trace(policy, &mut g, ex, cfg.horizon, rng)?;
    let r = RewardFn::new(policy.domain(), &ex.goal, cfg.delta);
    let n = trace.steps.len();
    let mut terms = Vec::with_capacity(n);
    let mut sampled = Vec::with_capacity(n);
    for (k, st) in trace.steps.iter().enumerate() {
        let rewards = all_action_rewards(policy, &st.state, &r, trace.hit_horizon && k + 1 == n);
        sampled.push(rewards[st.index]);
        terms.push(expected_reward_objective(&mut g, st.output.probs, rewards, cfg.lambda)?);
    }
    let loss = backprop(&mut g, &terms, -1.0 / n as f64, grads)?;
    Ok(stats(&trace, &ex.goal, &sampled, r.queries(), loss))
}

fn log_prob(g: &mut Graph, log_probs: Var, index: usize) -> Var {
    let picked = g.gather(log_probs, vec![index]);
    g.sum(picked)
}

/// Immediate shaped reward of the sampled action times its log-probability
/// gradient, plus the entropy term.
pub fn contextual_bandit_example<D: StateEncoding>(
    policy: &Policy<D>,
    ex: &InstructionExample<D::State>,
    cfg: &RewardConfig,
    grads: &mut Gradients,
    rng: &mut dyn RngCore,
) -> Result<ExampleStats, TrainError> {
    let mut g = Graph::new(policy.params());
    let trace = sampled_trace(policy, &mut g, ex, cfg.horizon, rng)?;
    let r = RewardFn::new(policy.domain(), &ex.goal, cfg.delta);
    let rewards = step_rewards(policy, &trace, &r);
    let mut terms = Vec::with_capacity(rewards.len());
    for (st, &rew) in trace.steps.iter().zip(&rewards) {
        let lp = log_prob(&mut g, st.output.log_probs, st.index);
        let mut term = g.scale(lp, rew);
        if cfg.lambda != 0.0 {
            let h = autodiff::nn::entropy(&mut g, st.output.probs)?;
            let h = g.scale(h, cfg.lambda);
            term = g.add(term, h);
        }
        terms.push(term);
    }
    let loss = backprop(&mut g, &terms, -1.0 / rewards.len() as f64, grads)?;
    Ok(stats(&trace, &ex.goal, &rewards, r.queries(), loss))
}

/// Returns used to weight each step's log-probability.
pub fn returns(rewards: &[f64], mode: ReturnMode) -> Vec<f64> {
    match mode {
        ReturnMode::RewardToGo => {
            let mut out = vec![0.0; rewards.len()];
            let mut acc = 0.0;
            for k in (0..rewards.len()).rev() {
                acc += rewards[k];
                out[k] = acc;
            }
            out
        }
        ReturnMode::Episode => vec![rewards.iter().sum(); rewards.len()],
    }
}

/// REINFORCE with undiscounted shaped returns and no baseline.
pub fn policy_gradient_example<D: StateEncoding>(
    policy: &Policy<D>,
    ex: &InstructionExample<D::State>,
    cfg: &RewardConfig,
    mode: ReturnMode,
    grads: &mut Gradients,
    rng: &mut dyn RngCore,
) -> Result<ExampleStats, TrainError> {
    let mut g = Graph::new(policy.params());
    let trace = sampled_trace(policy, &mut g, ex, cfg.horizon, rng)?;
    let r = RewardFn::new(policy.domain(), &ex.goal, cfg.delta);
    let rewards = step_rewards(policy, &trace, &r);
    let weights = returns(&rewards, mode);
    let mut terms = Vec::with_capacity(rewards.len());
    for (st, &w) in trace.steps.iter().zip(&weights) {
        let lp = log_prob(&mut g, st.output.log_probs, st.index);
        terms.push(g.scale(lp, w));
    }
    let loss = backprop(&mut g, &terms, -1.0 / rewards.len() as f64, grads)?;
    Ok(stats(&trace, &ex.goal, &rewards, r.queries(), loss))
}

/// Negative log-likelihood of a demonstration under teacher forcing.
pub fn supervised_example<D: StateEncoding>(
    policy: &Policy<D>,
    ex: &InstructionExample<D::State>,
    demo: &[Action],
    grads: &mut Gradients,
    rng: &mut dyn RngCore,
) -> Result<ExampleStats, TrainError> {
    let space = policy.domain().action_space().clone();
    let indices: Vec<usize> = demo
        .iter()
        .map(|a| space.index_of(*a).expect("demonstration actions come from the action space"))
        .collect();
    let mut g = Graph::new(policy.params());
    let mut choose = |k: usize, _: &[f64], _: &mut dyn RngCore| indices[k];
    let trace = policy.trace(
        &mut g,
        &ex.instruction,
        &ex.history,
        &ex.start,
        indices.len(),
        true,
        rng,
        &mut choose,
    )?;
    let mut terms = Vec::with_capacity(indices.len());
    let mut greedy_match = true;
    for st in &trace.steps {
        greedy_match &= greedy_index(g.value(st.output.probs)) == st.index;
        terms.push(log_prob(&mut g, st.output.log_probs, st.index));
    }
    let loss = backprop(&mut g, &terms, -1.0, grads)?;
    Ok(ExampleStats {
        reward: 0.0,
        steps: trace.steps.len(),
        success: greedy_match,
        reward_queries: 0,
        loss,
    })
}
