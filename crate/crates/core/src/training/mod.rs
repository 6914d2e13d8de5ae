//! Learning algorithms, early stopping, and model selection.

pub mod demos;
pub mod objectives;
mod patience;
mod split;

use std::time::Instant;

use autodiff::optim::{Adam, Optimizer, RmsProp};
use autodiff::{Gradients, ParamSet};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use demos::{generate_demonstration, DemoError, DEFAULT_NODE_CAP};
pub use objectives::ExampleStats;
pub use patience::{PatienceConfig, PatienceOutcome, PatienceState};
pub use split::split_validation;

use crate::data::{make_examples, InstructionExample, InteractionRecord};
use crate::domains::DomainKind;
use crate::env::Action;
use crate::error::TrainError;
use crate::eval::{evaluate, EvalReport};
use crate::policy::{Policy, StateEncoding};
use crate::reward::RewardConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Sestra,
    PolicyGradient,
    ContextualBandit,
    Supervised,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::Sestra,
        Algorithm::PolicyGradient,
        Algorithm::ContextualBandit,
        Algorithm::Supervised,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Sestra => "sestra",
            Algorithm::PolicyGradient => "policy_gradient",
            Algorithm::ContextualBandit => "contextual_bandit",
            Algorithm::Supervised => "supervised",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let norm = s.replace('-', "_").to_lowercase();
        Self::ALL
            .into_iter()
            .find(|a| a.name() == norm)
            .ok_or_else(|| format!("unknown algorithm {s:?}"))
    }
}

/// What weights each log-probability in the policy-gradient baseline.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReturnMode {
    /// Sum of rewards from the step to the end of the episode.
    RewardToGo,
    /// Sum over the whole episode, identical for every step.
    Episode,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    pub rmsprop_decay: f64,
    pub rmsprop_epsilon: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            rmsprop_decay: 0.9,
            rmsprop_epsilon: 1e-8,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub algorithm: Algorithm,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub validation_fraction: f64,
    pub seed: u64,
    pub reward: RewardConfig,
    #[serde(default = "default_return_mode")]
    pub return_mode: ReturnMode,
    #[serde(default = "default_node_cap")]
    pub demo_node_cap: usize,
    #[serde(default)]
    pub patience: PatienceConfig,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
}

fn default_return_mode() -> ReturnMode {
    ReturnMode::RewardToGo
}

fn default_node_cap() -> usize {
    DEFAULT_NODE_CAP
}

impl TrainConfig {
    pub fn new(kind: DomainKind, algorithm: Algorithm, seed: u64) -> Self {
        Self {
            algorithm,
            learning_rate: 0.001,
            batch_size: 20,
            max_epochs: 200,
            validation_fraction: 0.07,
            seed,
            reward: RewardConfig::for_domain(kind),
            return_mode: ReturnMode::RewardToGo,
            demo_node_cap: DEFAULT_NODE_CAP,
            patience: PatienceConfig::default(),
            optimizer: OptimizerConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if self.batch_size == 0 {
            return Err("batch_size must be at least 1".into());
        }
        if self.max_epochs == 0 {
            return Err("max_epochs must be at least 1".into());
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(format!("validation_fraction must be in (0, 1), got {}", self.validation_fraction));
        }
        self.reward.validate()
    }

    fn optimizer(&self) -> Box<dyn Optimizer> {
        let o = &self.optimizer;
        match self.algorithm {
            Algorithm::Supervised => Box::new(Adam::with_hyper(self.learning_rate, o.adam_beta1, o.adam_beta2, o.adam_epsilon)),
            _ => Box::new(RmsProp::with_hyper(self.learning_rate, o.rmsprop_decay, o.rmsprop_epsilon)),
        }
    }
}

/// One line of the training log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub seed: u64,
    pub algorithm: Algorithm,
    pub train_reward: f64,
    pub train_loss: f64,
    pub train_success: f64,
    pub validation_reward: Option<f64>,
    pub validation_inst: Option<f64>,
    pub validation_3utts: Option<f64>,
    pub validation_5utts: Option<f64>,
    pub patience: f64,
    pub improved: bool,
    pub selected: bool,
    pub wall_time_s: f64,
}

impl EpochRecord {
    /// The record as one JSON line without the trailing newline.
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("epoch record serializes")
    }
}

/// Appends each record as one JSON line.
pub fn write_log_line(out: &mut impl std::io::Write, record: &EpochRecord) -> std::io::Result<()> {
    writeln!(out, "{}", record.to_json_line())?;
    out.flush()
}

/// Parses a log written by [`write_log_line`].
pub fn read_log(text: &str) -> Result<Vec<EpochRecord>, serde_json::Error> {
    text.lines().filter(|l| !l.trim().is_empty()).map(serde_json::from_str).collect()
}

#[derive(Clone, Debug)]
pub struct SkippedExample {
    pub interaction_id: String,
    pub turn: usize,
    pub reason: String,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were kept; `None` keeps the last epoch.
    pub selected_epoch: Option<usize>,
    pub skipped: Vec<SkippedExample>,
}

/// RNG for one example, fixed by the seed, epoch, and position.
pub fn example_rng(seed: u64, epoch: usize, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((epoch as u64) << 32) | index as u64);
    rng
}

/// Demonstrations for `examples`; examples whose search fails are skipped.
pub fn demonstrations<D: StateEncoding>(
    policy: &Policy<D>,
    examples: &[InstructionExample<D::State>],
    node_cap: usize,
) -> (Vec<(usize, Vec<Action>)>, Vec<SkippedExample>) {
    let mut demos = Vec::new();
    let mut skipped = Vec::new();
    for (i, ex) in examples.iter().enumerate() {
        match generate_demonstration(policy.domain(), &ex.start, &ex.goal, node_cap) {
            Ok(d) => demos.push((i, d)),
            Err(e) => skipped.push(SkippedExample {
                interaction_id: ex.interaction_id.clone(),
                turn: ex.turn,
                reason: e.to_string(),
            }),
        }
    }
    (demos, skipped)
}

/// One example's gradient under the configured algorithm.
pub fn example_gradient<D: StateEncoding>(
    policy: &Policy<D>,
    ex: &InstructionExample<D::State>,
    demo: Option<&[Action]>,
    cfg: &TrainConfig,
    grads: &mut Gradients,
    rng: &mut ChaCha8Rng,
) -> Result<ExampleStats, TrainError> {
    match cfg.algorithm {
        Algorithm::Sestra => objectives::sestra_example(policy, ex, &cfg.reward, grads, rng),
        Algorithm::ContextualBandit => objectives::contextual_bandit_example(policy, ex, &cfg.reward, grads, rng),
        Algorithm::PolicyGradient => objectives::policy_gradient_example(policy, ex, &cfg.reward, cfg.return_mode, grads, rng),
        Algorithm::Supervised => {
            let demo = demo.ok_or_else(|| TrainError::Config("supervised training needs demonstrations".into()))?;
            objectives::supervised_example(policy, ex, demo, grads, rng)
        }
    }
}

/// Trains `policy` in place and leaves it at the selected checkpoint.
///
/// `on_epoch` sees each log record as soon as it is produced, and
/// `on_checkpoint` sees the parameters whenever a new best model is chosen.
pub fn train<D: StateEncoding>(
    policy: &mut Policy<D>,
    train_records: &[InteractionRecord<D::State>],
    validation: &[InteractionRecord<D::State>],
    cfg: &TrainConfig,
    on_epoch: &mut dyn FnMut(&EpochRecord),
    on_checkpoint: &mut dyn FnMut(&Policy<D>),
) -> Result<TrainOutcome, TrainError> {
    cfg.validate().map_err(TrainError::Config)?;
    let examples = make_examples(train_records);
    if examples.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let mut skipped = Vec::new();
    let mut demo_for: Vec<Option<Vec<Action>>> = vec![None; examples.len()];
    let mut usable: Vec<usize> = (0..examples.len()).collect();
    if cfg.algorithm == Algorithm::Supervised {
        let (demos, skip) = demonstrations(policy, &examples, cfg.demo_node_cap);
        skipped = skip;
        usable = demos.iter().map(|(i, _)| *i).collect();
        for (i, d) in demos {
            demo_for[i] = Some(d);
        }
        if usable.is_empty() {
            return Err(TrainError::EmptyDataset);
        }
    }
    let mut optimizer = cfg.optimizer();
    let mut grads = Gradients::zeros_like(policy.params());
    let mut patience = PatienceState::new(cfg.patience);
    let mut best_selection = f64::NEG_INFINITY;
    let mut best_params: Option<ParamSet> = None;
    let mut selected_epoch = None;
    let mut epochs = Vec::new();
    let started = Instant::now();
    for epoch in 1..=cfg.max_epochs {
        let mut order = usable.clone();
        order.shuffle(&mut example_rng(cfg.seed, epoch, usize::MAX >> 32));
        let (mut reward, mut loss, mut success) = (0.0, 0.0, 0usize);
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            grads.zero();
            for (j, &i) in batch.iter().enumerate() {
                let mut rng = example_rng(cfg.seed, epoch, b * cfg.batch_size + j);
                let s = example_gradient(policy, &examples[i], demo_for[i].as_deref(), cfg, &mut grads, &mut rng)?;
                reward += s.reward;
                loss += s.loss;
                success += usize::from(s.success);
            }
            if !grads.is_finite() {
                return Err(TrainError::NonFiniteGradient {
                    epoch,
                    example: b * cfg.batch_size,
                });
            }
            optimizer.step(policy.params_mut(), &grads)?;
        }
        let n = order.len() as f64;
        let report: Option<EvalReport> = if validation.is_empty() {
            None
        } else {
            Some(evaluate(
                policy.domain(),
                &*policy,
                validation,
                cfg.reward.horizon,
                cfg.reward.delta,
            )?)
        };
        let (outcome, selected) = match &report {
            Some(r) => {
                let stop_metric = match cfg.algorithm {
                    Algorithm::Supervised => r.inst_accuracy(),
                    _ => r.mean_reward,
                };
                let outcome = patience.step(epoch, stop_metric, cfg.max_epochs);
                let selection = r.five_utts.or(r.inst).map_or(0.0, |a| a.accuracy);
                let selected = outcome.improved && selection > best_selection;
                if selected {
                    best_selection = selection;
                    best_params = Some(policy.params().clone());
                    selected_epoch = Some(epoch);
                    on_checkpoint(policy);
                }
                (outcome, selected)
            }
            None => (
                PatienceOutcome {
                    improved: false,
                    stop: epoch >= cfg.max_epochs,
                },
                false,
            ),
        };
        let record = EpochRecord {
            epoch,
            seed: cfg.seed,
            algorithm: cfg.algorithm,
            train_reward: reward / n,
            train_loss: loss / n,
            train_success: success as f64 / n,
            validation_reward: report.as_ref().map(|r| r.mean_reward),
            validation_inst: report.as_ref().and_then(|r| r.inst.map(|a| a.accuracy)),
            validation_3utts: report.as_ref().and_then(|r| r.three_utts.map(|a| a.accuracy)),
            validation_5utts: report.as_ref().and_then(|r| r.five_utts.map(|a| a.accuracy)),
            patience: patience.remaining,
            improved: outcome.improved,
            selected,
            wall_time_s: started.elapsed().as_secs_f64(),
        };
        on_epoch(&record);
        epochs.push(record);
        if outcome.stop {
            break;
        }
    }
    if let Some(best) = best_params {
        policy.params_mut().copy_from(&best)?;
    }
    Ok(TrainOutcome {
        epochs,
        selected_epoch,
        skipped,
    })
}
