//! A miniature two-beaker Alchemy task with templated instructions.
//!
//! Every instruction needs pops followed by pushes: pouring a single-color
//! beaker into the other, or replacing a beaker's top unit with a named
//! color. Beakers start with at most two units.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{make_examples, tokenize, InteractionRecord, Turn};
use crate::domains::{Alchemy, AlchemyState, DomainKind, COLORS};
use crate::error::TrainError;
use crate::eval::evaluate;
use crate::policy::{ModelConfig, Policy};
use crate::training::{train, Algorithm, EpochRecord, TrainConfig};
use crate::vocab::Vocabulary;

pub const MINI_BEAKERS: usize = 2;

const COLOR_NAMES: [&str; 6] = ["brown", "green", "orange", "purple", "red", "yellow"];
const ORDINALS: [&str; 2] = ["first", "second"];

pub fn mini_alchemy() -> Alchemy {
    Alchemy::with_beakers(MINI_BEAKERS)
}

fn random_beaker(rng: &mut impl Rng, min: usize) -> Vec<u8> {
    let n = rng.gen_range(min..=2);
    (0..n).map(|_| rng.gen_range(0..COLORS.len() as u8)).collect()
}

/// `count` single-instruction interactions drawn with `seed`.
pub fn mini_alchemy_records(count: usize, seed: u64) -> Vec<InteractionRecord<AlchemyState>> {
    assert_eq!(COLOR_NAMES.len(), COLORS.len());
    let domain = mini_alchemy();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let src = rng.gen_range(0..MINI_BEAKERS);
            let (text, start, goal) = if rng.gen_bool(0.5) {
                let dst = 1 - src;
                let mut beakers = vec![Vec::new(); MINI_BEAKERS];
                let units = rng.gen_range(1..=2);
                let color = rng.gen_range(0..COLORS.len() as u8);
                beakers[src] = vec![color; units];
                beakers[dst] = random_beaker(&mut rng, 0);
                let mut after = beakers.clone();
                let moved = std::mem::take(&mut after[src]);
                after[dst].extend(moved.iter().rev());
                let text = format!("pour the {} beaker into the {} one", ORDINALS[src], ORDINALS[dst]);
                (text, beakers, after)
            } else {
                let mut beakers = vec![Vec::new(); MINI_BEAKERS];
                beakers[src] = random_beaker(&mut rng, 1);
                beakers[1 - src] = random_beaker(&mut rng, 0);
                let top = *beakers[src].last().expect("nonempty");
                let color = loop {
                    let c = rng.gen_range(0..COLORS.len() as u8);
                    if c != top {
                        break c;
                    }
                };
                let mut after = beakers.clone();
                *after[src].last_mut().expect("nonempty") = color;
                let text = format!(
                    "replace the top of the {} beaker with {}",
                    ORDINALS[src], COLOR_NAMES[color as usize]
                );
                (text, beakers, after)
            };
            let start = domain.state(start).expect("valid mini state");
            let goal = domain.state(goal).expect("valid mini state");
            InteractionRecord {
                id: format!("mini-{seed}-{i}"),
                initial_state: start,
                turns: vec![Turn {
                    tokens: tokenize(&text),
                    utterance: text,
                    post_state: goal,
                }],
            }
        })
        .collect()
}

/// Train, validation, and test sets of the miniature task plus the scaled
/// down model and batch settings.
#[derive(Clone, Debug)]
pub struct MiniExperiment {
    pub epochs: usize,
    pub hidden: usize,
    pub batch_size: usize,
    pub train: Vec<InteractionRecord<AlchemyState>>,
    pub validation: Vec<InteractionRecord<AlchemyState>>,
    pub test: Vec<InteractionRecord<AlchemyState>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MiniRun {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub epochs_run: usize,
    pub selected_epoch: Option<usize>,
    /// Held-out instruction task completion of the selected checkpoint.
    pub test_inst: f64,
}

impl Default for MiniExperiment {
    fn default() -> Self {
        Self {
            epochs: 100,
            hidden: 16,
            batch_size: 1,
            train: mini_alchemy_records(200, 11),
            validation: mini_alchemy_records(50, 13),
            test: mini_alchemy_records(100, 12),
        }
    }
}

impl MiniExperiment {
    pub fn config(&self, algorithm: Algorithm, seed: u64) -> TrainConfig {
        let mut cfg = TrainConfig::new(DomainKind::Alchemy, algorithm, seed);
        cfg.max_epochs = self.epochs;
        cfg.batch_size = self.batch_size;
        cfg
    }

    pub fn run(&self, algorithm: Algorithm, seed: u64, on_epoch: &mut dyn FnMut(&EpochRecord)) -> Result<MiniRun, TrainError> {
        let cfg = self.config(algorithm, seed);
        let examples = make_examples(&self.train);
        let vocab = Vocabulary::build(examples.iter().map(|e| &e.instruction), 1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = ModelConfig::toy(DomainKind::Alchemy, self.hidden);
        let mut policy = Policy::new(mini_alchemy(), model, vocab, &mut rng)?;
        let out = train(&mut policy, &self.train, &self.validation, &cfg, on_epoch, &mut |_| {})?;
        let report = evaluate(policy.domain(), &policy, &self.test, cfg.reward.horizon, cfg.reward.delta)?;
        Ok(MiniRun {
            algorithm,
            seed,
            epochs_run: out.epochs.len(),
            selected_epoch: out.selected_epoch,
            test_inst: report.inst_accuracy(),
        })
    }
}
