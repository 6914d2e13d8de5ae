//! Shortest demonstrations by search over the transition function.

use std::collections::HashMap;

use thiserror::Error;

use crate::env::{Action, Domain};

pub const DEFAULT_NODE_CAP: usize = 1_000_000;

/// Depth beyond which the search gives up regardless of the node cap.
const MAX_DEPTH: u32 = 64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DemoError {
    #[error("search expanded more than {0} nodes")]
    BudgetExceeded(usize),
    #[error("goal unreachable within {0} actions")]
    Unreachable(u32),
}

/// The first shortest action sequence from `start` to `goal` in canonical
/// action order, followed by `STOP`.
///
/// The result is the sequence breadth-first search with canonical expansion
/// order returns (the lexicographically smallest shortest path). It is found
/// by iterative deepening guided by [`Domain::steps_lower_bound`], which
/// keeps memory flat and prunes far more than plain breadth-first search.
pub fn generate_demonstration<D: Domain>(domain: &D, start: &D::State, goal: &D::State, node_cap: usize) -> Result<Vec<Action>, DemoError> {
    let mut search = Search {
        domain,
        goal,
        actions: domain.action_space().actions().iter().copied().filter(|a| !a.is_stop()).collect(),
        expanded: 0,
        cap: node_cap,
        failed: HashMap::new(),
        path: Vec::new(),
    };
    let mut bound = domain.steps_lower_bound(start, goal);
    while bound <= MAX_DEPTH {
        search.failed.clear();
        if search.dfs(start, bound)? {
            let mut out = search.path;
            out.push(Action::STOP);
            return Ok(out);
        }
        bound += 1;
    }
    Err(DemoError::Unreachable(MAX_DEPTH))
}

struct Search<'a, D: Domain> {
    domain: &'a D,
    goal: &'a D::State,
    actions: Vec<Action>,
    expanded: usize,
    cap: usize,
    /// Largest remaining budget already shown insufficient for a state.
    failed: HashMap<D::State, u32>,
    path: Vec<Action>,
}

impl<D: Domain> Search<'_, D> {
    fn dfs(&mut self, state: &D::State, remaining: u32) -> Result<bool, DemoError> {
        if state == self.goal {
            return Ok(true);
        }
        if remaining == 0 || self.domain.steps_lower_bound(state, self.goal) > remaining {
            return Ok(false);
        }
        if self.failed.get(state).is_some_and(|&r| r >= remaining) {
            return Ok(false);
        }
        self.expanded += 1;
        if self.expanded > self.cap {
            return Err(DemoError::BudgetExceeded(self.cap));
        }
        for i in 0..self.actions.len() {
            let a = self.actions[i];
            let next = self.domain.transition(state, a);
            if next == *state {
                continue;
            }
            self.path.push(a);
            if self.dfs(&next, remaining - 1)? {
                return Ok(true);
            }
            self.path.pop();
        }
        self.failed.insert(state.clone(), remaining);
        Ok(false)
    }
}
