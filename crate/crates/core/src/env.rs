//! Domain-agnostic environment contract: factored actions, the [`Domain`]
//! trait, executions, and the agent context.

use std::collections::HashMap;
use std::fmt::Debug;
use std::hash::Hash;
use std::sync::Arc;

use crate::error::DomainError;

/// A factored action `type(arg1, arg2)`.
///
/// Type 0 is `STOP` in every domain. Arguments are zero-based indices into
/// the domain's first and second argument vocabularies, with `None` standing
/// for `NULL`. Actions are only handed out by an [`ActionSpace`], so values
/// outside a domain's ranges cannot be built.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Action {
    kind: u8,
    arg1: Option<u8>,
    arg2: Option<u8>,
}

impl Action {
    pub const STOP: Action = Action {
        kind: 0,
        arg1: None,
        arg2: None,
    };

    pub(crate) const fn raw(kind: u8, arg1: Option<u8>, arg2: Option<u8>) -> Self {
        Self { kind, arg1, arg2 }
    }

    pub fn kind(self) -> usize {
        self.kind as usize
    }

    pub fn arg1(self) -> Option<usize> {
        self.arg1.map(usize::from)
    }

    pub fn arg2(self) -> Option<usize> {
        self.arg2.map(usize::from)
    }

    pub fn is_stop(self) -> bool {
        self.kind == 0
    }

    /// `(type, arg1, arg2)` indices for the output layer; `NULL` is index 0
    /// of both argument vocabularies.
    pub fn factors(self) -> (usize, usize, usize) {
        (
            self.kind(),
            self.arg1.map_or(0, |a| a as usize + 1),
            self.arg2.map_or(0, |a| a as usize + 1),
        )
    }
}

/// How many arguments an action type takes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Arity {
    Nullary,
    Unary,
    Binary,
}

/// The complete, canonically ordered action list of a domain.
///
/// Order: `STOP`, then action types in declaration order, then `arg1`
/// ascending, then `arg2` in alphabet order.
#[derive(Debug)]
pub struct ActionSpace {
    actions: Vec<Action>,
    index: HashMap<Action, usize>,
    types: Vec<(&'static str, Arity)>,
    arg1_names: Vec<String>,
    arg2_names: Vec<String>,
}

impl ActionSpace {
    /// `types` excludes `STOP`, which is always prepended.
    pub fn new(types: &[(&'static str, Arity)], arg1_names: Vec<String>, arg2_names: Vec<String>) -> Self {
        let mut all_types = vec![("STOP", Arity::Nullary)];
        all_types.extend_from_slice(types);
        let mut actions = vec![Action::STOP];
        for (t, (_, arity)) in all_types.iter().enumerate().skip(1) {
            let kind = t as u8;
            match arity {
                Arity::Nullary => actions.push(Action::raw(kind, None, None)),
                Arity::Unary => {
                    for a in 0..arg1_names.len() {
                        actions.push(Action::raw(kind, Some(a as u8), None));
                    }
                }
                Arity::Binary => {
                    for a in 0..arg1_names.len() {
                        for b in 0..arg2_names.len() {
                            actions.push(Action::raw(kind, Some(a as u8), Some(b as u8)));
                        }
                    }
                }
            }
        }
        let index = actions.iter().enumerate().map(|(i, a)| (*a, i)).collect();
        Self {
            actions,
            index,
            types: all_types,
            arg1_names,
            arg2_names,
        }
    }

    pub fn actions(&self) -> &[Action] {
        &self.actions
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn get(&self, index: usize) -> Action {
        self.actions[index]
    }

    pub fn index_of(&self, action: Action) -> Option<usize> {
        self.index.get(&action).copied()
    }

    pub fn contains(&self, action: Action) -> bool {
        self.index.contains_key(&action)
    }

    /// Number of action types including `STOP`.
    pub fn num_types(&self) -> usize {
        self.types.len()
    }

    /// Size of the first-argument vocabulary including `NULL`.
    pub fn num_arg1(&self) -> usize {
        self.arg1_names.len() + 1
    }

    /// Size of the second-argument vocabulary including `NULL`.
    pub fn num_arg2(&self) -> usize {
        self.arg2_names.len() + 1
    }

    pub fn type_name(&self, kind: usize) -> &'static str {
        self.types[kind].0
    }

    pub fn arg1_names(&self) -> &[String] {
        &self.arg1_names
    }

    pub fn arg2_names(&self) -> &[String] {
        &self.arg2_names
    }

    /// Action by type name and argument names, e.g. `("push", Some("7"), Some("o"))`.
    pub fn lookup(&self, kind: &str, arg1: Option<&str>, arg2: Option<&str>) -> Result<Action, DomainError> {
        let bad = || DomainError::Action(format_parts(kind, arg1, arg2));
        let t = self
            .types
            .iter()
            .position(|(name, _)| name.eq_ignore_ascii_case(kind))
            .ok_or_else(bad)?;
        let find = |names: &[String], v: Option<&str>| -> Result<Option<u8>, DomainError> {
            match v {
                None => Ok(None),
                Some(v) => names.iter().position(|n| n == v).map(|i| Some(i as u8)).ok_or_else(bad),
            }
        };
        let action = Action::raw(t as u8, find(&self.arg1_names, arg1)?, find(&self.arg2_names, arg2)?);
        if self.contains(action) {
            Ok(action)
        } else {
            Err(bad())
        }
    }

    /// Parses the textual form produced by [`ActionSpace::format`].
    pub fn parse(&self, text: &str) -> Result<Action, DomainError> {
        let mut parts = text.split_whitespace();
        let kind = parts.next().ok_or_else(|| DomainError::Action(text.to_string()))?;
        let a1 = parts.next();
        let a2 = parts.next();
        if parts.next().is_some() {
            return Err(DomainError::Action(text.to_string()));
        }
        self.lookup(kind, a1, a2)
    }

    pub fn format(&self, action: Action) -> String {
        let mut out = self.type_name(action.kind()).to_string();
        if let Some(a) = action.arg1() {
            out.push(' ');
            out.push_str(&self.arg1_names[a]);
        }
        if let Some(b) = action.arg2() {
            out.push(' ');
            out.push_str(&self.arg2_names[b]);
        }
        out
    }
}

fn format_parts(kind: &str, a1: Option<&str>, a2: Option<&str>) -> String {
    [Some(kind), a1, a2].iter().flatten().copied().collect::<Vec<_>>().join(" ")
}

/// A deterministic instruction-execution environment.
///
/// Every transition is total: actions that do not apply return the input
/// state unchanged, and `STOP` never changes the state.
pub trait Domain: Clone + Debug + Send + Sync + 'static {
    type State: Clone + Eq + Hash + Debug + Send + Sync;

    fn name(&self) -> &'static str;

    fn action_space(&self) -> &Arc<ActionSpace>;

    fn transition(&self, state: &Self::State, action: Action) -> Self::State;

    /// Distance between states; the shaping potential is its negation.
    fn distance(&self, a: &Self::State, b: &Self::State) -> u32;

    /// A lower bound on the number of actions needed to reach `goal`.
    ///
    /// The default uses [`Domain::distance`], which is admissible whenever a
    /// single action moves the distance by at most one.
    fn steps_lower_bound(&self, state: &Self::State, goal: &Self::State) -> u32 {
        self.distance(state, goal)
    }

    fn parse_state(&self, text: &str) -> Result<Self::State, DomainError>;

    fn format_state(&self, state: &Self::State) -> String;

    fn validate_state(&self, state: &Self::State) -> Result<(), DomainError>;

    fn format_action(&self, action: Action) -> String {
        self.action_space().format(action)
    }

    fn parse_action(&self, text: &str) -> Result<Action, DomainError> {
        self.action_space().parse(text)
    }
}

/// Left fold of the transition over `actions`.
pub fn apply_sequence<D: Domain>(domain: &D, state: &D::State, actions: &[Action]) -> D::State {
    actions.iter().fold(state.clone(), |s, a| domain.transition(&s, *a))
}

/// `STOP`, or any action that changes the state.
pub fn is_valid<D: Domain>(domain: &D, state: &D::State, action: Action) -> bool {
    action.is_stop() || domain.transition(state, action) != *state
}

/// A sequence of `(state, action)` pairs with `s_{k+1} = T(s_k, a_k)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Execution<S> {
    steps: Vec<(S, Action)>,
    final_state: S,
}

impl<S: Clone + Eq> Execution<S> {
    pub fn new(start: S) -> Self {
        Self {
            steps: Vec::new(),
            final_state: start,
        }
    }

    pub fn steps(&self) -> &[(S, Action)] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn actions(&self) -> Vec<Action> {
        self.steps.iter().map(|(_, a)| *a).collect()
    }

    /// State after the last action.
    pub fn final_state(&self) -> &S {
        &self.final_state
    }

    pub fn stopped(&self) -> bool {
        self.steps.last().is_some_and(|(_, a)| a.is_stop())
    }

    /// Appends `(current, action)` and advances the current state.
    pub fn push<D: Domain<State = S>>(&mut self, domain: &D, action: Action) {
        assert!(!self.stopped(), "execution already ended with STOP");
        let next = domain.transition(&self.final_state, action);
        let current = std::mem::replace(&mut self.final_state, next);
        self.steps.push((current, action));
    }

    /// Checks the chaining and `STOP`-last invariants.
    pub fn is_consistent<D: Domain<State = S>>(&self, domain: &D) -> bool {
        let chained = self.steps.windows(2).all(|w| domain.transition(&w[0].0, w[0].1) == w[1].0);
        let last_ok = self.steps.last().is_none_or(|(s, a)| domain.transition(s, *a) == self.final_state);
        let stop_last = self.steps.iter().rev().skip(1).all(|(_, a)| !a.is_stop());
        chained && last_ok && stop_last
    }
}

/// Everything the policy conditions on at one step.
#[derive(Clone, Debug)]
pub struct AgentContext<'a, S> {
    pub current_instruction: &'a [String],
    pub history: &'a [Vec<String>],
    pub initial_state: &'a S,
    execution: Execution<S>,
}

impl<'a, S: Clone + Eq> AgentContext<'a, S> {
    pub fn new(current_instruction: &'a [String], history: &'a [Vec<String>], initial_state: &'a S) -> Self {
        Self {
            current_instruction,
            history,
            initial_state,
            execution: Execution::new(initial_state.clone()),
        }
    }

    pub fn current_state(&self) -> &S {
        self.execution.final_state()
    }

    pub fn execution(&self) -> &Execution<S> {
        &self.execution
    }

    pub fn into_execution(self) -> Execution<S> {
        self.execution
    }

    pub fn apply<D: Domain<State = S>>(&mut self, domain: &D, action: Action) {
        self.execution.push(domain, action);
    }

    /// `current_state` equals the initial state folded through the prefix.
    pub fn is_consistent<D: Domain<State = S>>(&self, domain: &D) -> bool {
        let replay = apply_sequence(domain, self.initial_state, &self.execution.actions());
        replay == *self.current_state() && self.execution.is_consistent(domain)
    }
}
