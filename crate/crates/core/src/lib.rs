//! Sequential instruction execution in the SCONE domains.
//!
//! The crate provides the Alchemy, Scene, and Tangrams environments, a shaped
//! reward, an attention-based encoder-decoder policy, and training with
//! single-step reward observation alongside policy-gradient, contextual-bandit,
//! and supervised baselines.

pub mod attention;
pub mod config;
pub mod data;
pub mod domains;
pub mod env;
pub mod error;
pub mod eval;
pub mod policy;
pub mod reward;
pub mod synthetic;
pub mod training;
pub mod vocab;

pub use env::{apply_sequence, is_valid, Action, ActionSpace, AgentContext, Domain, Execution};
