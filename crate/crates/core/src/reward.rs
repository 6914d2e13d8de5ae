//! Problem reward, verbosity penalty, and potential-based shaping.

use std::cell::Cell;

use serde::{Deserialize, Serialize};

use crate::domains::DomainKind;
use crate::env::{Action, Domain};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardConfig {
    /// Verbosity penalty per action.
    pub delta: f64,
    /// Entropy regularization coefficient.
    pub lambda: f64,
    /// Maximum actions per instruction.
    pub horizon: usize,
}

impl RewardConfig {
    pub fn for_domain(kind: DomainKind) -> Self {
        match kind {
            DomainKind::Alchemy => Self {
                delta: 0.15,
                lambda: 0.1,
                horizon: 7,
            },
            DomainKind::Scene => Self {
                delta: 0.2,
                lambda: 0.07,
                horizon: 5,
            },
            DomainKind::Tangrams => Self {
                delta: 0.0,
                lambda: 0.1,
                horizon: 5,
            },
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.delta.is_finite() && self.delta >= 0.0) {
            return Err(format!("delta must be a finite non-negative number, got {}", self.delta));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(format!("lambda must be a finite non-negative number, got {}", self.lambda));
        }
        if self.horizon == 0 {
            return Err("horizon must be at least 1".into());
        }
        Ok(())
    }
}

/// The unshaped reward. `STOP` is classified before the `s = s'` case.
pub fn problem_reward<S: PartialEq>(s: &S, a: Action, s_next: &S, goal: &S, delta: f64) -> f64 {
    if a.is_stop() {
        if s_next == goal {
            1.0
        } else {
            -1.0
        }
    } else if s == s_next {
        -1.0 - delta
    } else {
        -delta
    }
}

/// `φ(s) = -distance(s, goal)`.
pub fn potential<D: Domain>(domain: &D, s: &D::State, goal: &D::State) -> f64 {
    -f64::from(domain.distance(s, goal))
}

pub fn shaped_reward<D: Domain>(domain: &D, s: &D::State, a: Action, s_next: &D::State, goal: &D::State, delta: f64) -> f64 {
    problem_reward(s, a, s_next, goal, delta) + shaping(domain, s, s_next, goal)
}

fn shaping<D: Domain>(domain: &D, s: &D::State, s_next: &D::State, goal: &D::State) -> f64 {
    if s == s_next {
        0.0
    } else {
        potential(domain, s_next, goal) - potential(domain, s, goal)
    }
}

/// Shaped reward bound to one example's goal, counting every query.
#[derive(Debug)]
pub struct RewardFn<'a, D: Domain> {
    domain: &'a D,
    goal: &'a D::State,
    delta: f64,
    queries: Cell<u64>,
}

impl<'a, D: Domain> RewardFn<'a, D> {
    pub fn new(domain: &'a D, goal: &'a D::State, delta: f64) -> Self {
        Self {
            domain,
            goal,
            delta,
            queries: Cell::new(0),
        }
    }

    pub fn goal(&self) -> &D::State {
        self.goal
    }

    /// `R(s, a, T(s, a))`.
    pub fn reward(&self, s: &D::State, a: Action, s_next: &D::State) -> f64 {
        self.queries.set(self.queries.get() + 1);
        shaped_reward(self.domain, s, a, s_next, self.goal, self.delta)
    }

    /// Reward for the last step of a rollout that exhausted its horizon:
    /// the problem reward becomes -1 and shaping is kept.
    pub fn horizon_failure_reward(&self, s: &D::State, _action: Action, s_next: &D::State) -> f64 {
        self.queries.set(self.queries.get() + 1);
        -1.0 + shaping(self.domain, s, s_next, self.goal)
    }

    pub fn queries(&self) -> u64 {
        self.queries.get()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::Alchemy;

    #[test]
    fn four_cases() {
        let d = Alchemy::new();
        let goal = d.parse_state("1:g 2:_ 3:_ 4:_ 5:_ 6:_ 7:_").unwrap();
        let other = d.parse_state("1:gg 2:_ 3:_ 4:_ 5:_ 6:_ 7:_").unwrap();
        let delta = RewardConfig::for_domain(DomainKind::Alchemy).delta;
        assert_eq!(problem_reward(&goal, Action::STOP, &goal, &goal, delta), 1.0);
        assert_eq!(problem_reward(&other, Action::STOP, &other, &goal, delta), -1.0);
        let bad = d.pop(2);
        assert_eq!(problem_reward(&goal, bad, &d.transition(&goal, bad), &goal, delta), -1.15);
        let pop = d.pop(1);
        let next = d.transition(&other, pop);
        assert_eq!(problem_reward(&other, pop, &next, &goal, delta), -0.15);
        assert_eq!(shaped_reward(&d, &other, pop, &next, &goal, 0.0), 1.0);
    }

    #[test]
    fn horizon_failure_keeps_shaping() {
        let d = Alchemy::new();
        let goal = d.parse_state("1:g 2:_ 3:_ 4:_ 5:_ 6:_ 7:_").unwrap();
        let s = d.parse_state("1:gg 2:_ 3:_ 4:_ 5:_ 6:_ 7:_").unwrap();
        let r = RewardFn::new(&d, &goal, 0.15);
        let next = d.transition(&s, d.pop(1));
        assert_eq!(r.horizon_failure_reward(&s, d.pop(1), &next), 0.0);
        assert_eq!(r.horizon_failure_reward(&s, d.pop(2), &s), -1.0);
        assert_eq!(r.queries(), 2);
    }

    #[test]
    fn defaults() {
        let a = RewardConfig::for_domain(DomainKind::Alchemy);
        assert_eq!((a.lambda, a.delta, a.horizon), (0.1, 0.15, 7));
        let s = RewardConfig::for_domain(DomainKind::Scene);
        assert_eq!((s.lambda, s.delta, s.horizon), (0.07, 0.2, 5));
        let t = RewardConfig::for_domain(DomainKind::Tangrams);
        assert_eq!((t.lambda, t.delta, t.horizon), (0.1, 0.0, 5));
    }
}
