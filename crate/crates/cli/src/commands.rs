use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sestra::attention::dump_attention as dump;
use sestra::config::{Overrides, RunConfig};
use sestra::data::{make_examples, tokenize, InteractionRecord};
use sestra::error::{ConfigError, DataError, DomainError, PolicyError, TrainError};
use sestra::eval::{evaluate as run_evaluation, Accuracy};
use sestra::policy::{read_manifest, Policy, StateEncoding};
use sestra::reward::RewardConfig;
use sestra::training::{self, generate_demonstration, split_validation, write_log_line, EpochRecord};
use sestra::vocab::Vocabulary;

use crate::domain::{load_records, with_domain, DomainSpec};
use crate::{DumpAttentionArgs, EvaluateArgs, GenDemosArgs, RolloutArgs, TrainArgs};

/// Invalid flags, files, or input values.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

/// 1 for invalid input of any kind, 2 for everything else.
pub fn exit_code(e: &anyhow::Error) -> u8 {
    let invalid = e.chain().any(|c| {
        c.is::<UsageError>()
            || c.is::<ConfigError>()
            || c.is::<DataError>()
            || c.is::<DomainError>()
            || c.downcast_ref::<PolicyError>().is_some_and(invalid_policy_input)
            || c.downcast_ref::<TrainError>().is_some_and(|t| match t {
                TrainError::Config(_) | TrainError::EmptyDataset => true,
                TrainError::Policy(p) => invalid_policy_input(p),
                _ => false,
            })
    });
    if invalid {
        1
    } else {
        2
    }
}

fn invalid_policy_input(e: &PolicyError) -> bool {
    matches!(
        e,
        PolicyError::Domain(_)
            | PolicyError::EmptyInstruction
            | PolicyError::DomainMismatch { .. }
            | PolicyError::Config(_)
            | PolicyError::Manifest(_)
            | PolicyError::TurnOutOfRange { .. }
    )
}

fn read_input(path: &Path) -> Result<String> {
    if !path.is_file() {
        return Err(UsageError(format!("{} does not exist", path.display())).into());
    }
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn model_spec(model: &Path) -> Result<(DomainSpec, Option<RunConfig>)> {
    if !model.is_file() {
        return Err(UsageError(format!("model file {} does not exist", model.display())).into());
    }
    let (fingerprint, run) = read_manifest(model)?;
    let spec = DomainSpec::from_fingerprint(&fingerprint)?;
    let run = run.and_then(|v| serde_json::from_value::<RunConfig>(v).ok());
    Ok((spec, run))
}

fn reward_config<D: StateEncoding>(domain: &D, run: &Option<RunConfig>, horizon: Option<usize>) -> Result<RewardConfig> {
    let mut r = run
        .as_ref()
        .map_or_else(|| RewardConfig::for_domain(domain.kind()), |c| c.train.reward);
    if let Some(h) = horizon {
        r.horizon = h;
    }
    r.validate().map_err(UsageError)?;
    Ok(r)
}

#[derive(Debug, Serialize)]
struct SeedSummary {
    seed: u64,
    dir: String,
    epochs_run: usize,
    selected_epoch: Option<usize>,
    validation_inst: Option<f64>,
    validation_5utts: Option<f64>,
}

impl SeedSummary {
    fn score(&self) -> f64 {
        self.validation_5utts.or(self.validation_inst).unwrap_or(f64::NEG_INFINITY)
    }
}

#[derive(Debug, Serialize)]
struct TrainSummary {
    best_seed: u64,
    runs: Vec<SeedSummary>,
}

pub fn train(a: TrainArgs) -> Result<()> {
    let file = a.config.as_deref().map(read_input).transpose()?;
    let seeds = a.seeds.clone().unwrap_or_default();
    let overrides = Overrides {
        domain: a.domain,
        algorithm: a.algorithm,
        seed: a.seed.or_else(|| seeds.first().copied()),
        max_epochs: a.max_epochs,
    };
    let cfg = RunConfig::resolve(file.as_deref(), &overrides)?;
    if a.min_count == 0 {
        return Err(UsageError("--min-count must be at least 1".into()).into());
    }
    with_domain!(DomainSpec::from_kind(cfg.domain), |d| train_domain(d, &cfg, &a, &seeds))
}

fn train_domain<D: StateEncoding + Clone>(domain: D, cfg: &RunConfig, a: &TrainArgs, seeds: &[u64]) -> Result<()> {
    let records = load_records(&domain, &a.data, "train")?;
    let (tr, va) = split_validation(records.len(), cfg.train.validation_fraction, 0);
    let train_set: Vec<_> = tr.iter().map(|&i| records[i].clone()).collect();
    let validation: Vec<_> = va.iter().map(|&i| records[i].clone()).collect();
    let examples = make_examples(&train_set);
    let vocab = Vocabulary::build(examples.iter().map(|e| &e.instruction), a.min_count);
    eprintln!(
        "{}: {} training and {} validation interactions, vocabulary {}",
        domain.name(),
        train_set.len(),
        validation.len(),
        vocab.len()
    );
    let seeds = if seeds.is_empty() { vec![cfg.train.seed] } else { seeds.to_vec() };
    let mut runs = Vec::new();
    for &seed in &seeds {
        let dir = if seeds.len() > 1 {
            a.out.join(format!("seed-{seed}"))
        } else {
            a.out.clone()
        };
        let mut run_cfg = cfg.clone();
        run_cfg.train.seed = seed;
        runs.push(train_seed(&domain, &run_cfg, &vocab, &train_set, &validation, &dir)?);
    }
    if runs.len() > 1 {
        let best = runs
            .iter()
            .max_by(|x, y| x.score().total_cmp(&y.score()).then(y.seed.cmp(&x.seed)))
            .expect("at least one run");
        println!("best seed {} in {}", best.seed, best.dir);
        let summary = TrainSummary {
            best_seed: best.seed,
            runs,
        };
        fs::write(a.out.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    }
    Ok(())
}

fn train_seed<D: StateEncoding + Clone>(
    domain: &D,
    cfg: &RunConfig,
    vocab: &Vocabulary,
    train_set: &[InteractionRecord<D::State>],
    validation: &[InteractionRecord<D::State>],
    dir: &Path,
) -> Result<SeedSummary> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    fs::write(dir.join("config.toml"), cfg.to_toml())?;
    let run = serde_json::to_value(cfg)?;
    let model_path = dir.join("model.bin");
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.train.seed);
    let mut policy = Policy::new(domain.clone(), cfg.model.clone(), vocab.clone(), &mut rng)?;
    let mut log = BufWriter::new(File::create(dir.join("train.jsonl"))?);
    let mut log_error: Option<std::io::Error> = None;
    let mut save_error: Option<PolicyError> = None;
    let mut last: Option<EpochRecord> = None;
    let outcome = training::train(
        &mut policy,
        train_set,
        validation,
        &cfg.train,
        &mut |r| {
            if let Err(e) = write_log_line(&mut log, r) {
                log_error.get_or_insert(e);
            }
            eprintln!(
                "seed {} epoch {} reward {:.3} success {:.3} validation inst {}",
                r.seed,
                r.epoch,
                r.train_reward,
                r.train_success,
                r.validation_inst.map_or("-".into(), |v| format!("{v:.3}"))
            );
            last = Some(r.clone());
        },
        &mut |p| {
            if let Err(e) = p.save(&model_path, Some(&run)) {
                save_error.get_or_insert(e);
            }
        },
    )?;
    if let Some(e) = log_error {
        return Err(anyhow::Error::from(e).context("writing the training log"));
    }
    if let Some(e) = save_error {
        return Err(anyhow::Error::from(e).context("writing a checkpoint"));
    }
    log.flush()?;
    policy.save(&model_path, Some(&run))?;
    for s in &outcome.skipped {
        eprintln!("skipped {} turn {}: {}", s.interaction_id, s.turn, s.reason);
    }
    let chosen = outcome
        .selected_epoch
        .and_then(|e| outcome.epochs.iter().find(|r| r.epoch == e))
        .or(last.as_ref());
    let summary = SeedSummary {
        seed: cfg.train.seed,
        dir: dir.display().to_string(),
        epochs_run: outcome.epochs.len(),
        selected_epoch: outcome.selected_epoch,
        validation_inst: chosen.and_then(|r| r.validation_inst),
        validation_5utts: chosen.and_then(|r| r.validation_5utts),
    };
    println!(
        "seed {}: {} epochs, selected {:?}, model {}",
        summary.seed,
        summary.epochs_run,
        summary.selected_epoch,
        model_path.display()
    );
    Ok(summary)
}

fn show(acc: Option<Accuracy>) -> String {
    acc.map_or("n/a".into(), |a| format!("{:.4} ({}/{})", a.accuracy, a.correct, a.total))
}

pub fn evaluate(a: EvaluateArgs) -> Result<()> {
    let (spec, run) = model_spec(&a.model)?;
    with_domain!(spec, |d| evaluate_domain(d, &a, &run))
}

fn evaluate_domain<D: StateEncoding + Clone>(domain: D, a: &EvaluateArgs, run: &Option<RunConfig>) -> Result<()> {
    let reward = reward_config(&domain, run, a.horizon)?;
    let policy = Policy::load(domain.clone(), &a.model)?;
    let records = load_records(&domain, &a.data, &a.split)?;
    let report = run_evaluation(&domain, &policy, &records, reward.horizon, reward.delta)?;
    println!("inst {}", show(report.inst));
    println!("3utts {}", show(report.three_utts));
    println!("5utts {}", show(report.five_utts));
    println!("mean reward {:.4}", report.mean_reward);
    if let Some(path) = &a.report {
        fs::write(path, serde_json::to_string_pretty(&report)?).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RolloutInput {
    state: String,
    instruction: String,
    #[serde(default)]
    history: Vec<String>,
}

pub fn rollout(a: RolloutArgs) -> Result<()> {
    let input = match &a.input {
        Some(path) => serde_json::from_str(&read_input(path)?).map_err(|e| UsageError(format!("{}: {e}", path.display())))?,
        None => RolloutInput {
            state: a.state.clone().unwrap_or_default(),
            instruction: a.instruction.clone().unwrap_or_default(),
            history: a.history.clone(),
        },
    };
    let (spec, run) = model_spec(&a.model)?;
    with_domain!(spec, |d| rollout_domain(d, &a, &run, &input))
}

fn rollout_domain<D: StateEncoding + Clone>(domain: D, a: &RolloutArgs, run: &Option<RunConfig>, input: &RolloutInput) -> Result<()> {
    let reward = reward_config(&domain, run, a.horizon)?;
    let policy = Policy::load(domain.clone(), &a.model)?;
    let start = domain.parse_state(&input.state)?;
    let history: Vec<Vec<String>> = input.history.iter().map(|h| tokenize(h)).collect();
    let r = policy.greedy(&tokenize(&input.instruction), &history, &start, reward.horizon)?;
    for a in r.execution.actions() {
        println!("{}", domain.format_action(a));
    }
    println!("final {}", domain.format_state(r.execution.final_state()));
    if r.hit_horizon {
        println!("horizon reached without STOP");
    }
    Ok(())
}

pub fn dump_attention(a: DumpAttentionArgs) -> Result<()> {
    let (spec, run) = model_spec(&a.model)?;
    with_domain!(spec, |d| dump_domain(d, &a, &run))
}

fn dump_domain<D: StateEncoding + Clone>(domain: D, a: &DumpAttentionArgs, run: &Option<RunConfig>) -> Result<()> {
    let reward = reward_config(&domain, run, a.horizon)?;
    let policy = Policy::load(domain.clone(), &a.model)?;
    let records = load_records(&domain, &a.data, &a.split)?;
    let record = match &a.interaction {
        Some(id) => records
            .iter()
            .find(|r| &r.id == id)
            .ok_or_else(|| UsageError(format!("no interaction {id:?} in the data")))?,
        None => records.first().ok_or_else(|| UsageError("the data has no interactions".into()))?,
    };
    let archive = dump(&policy, record, a.turn, reward.horizon)?;
    archive.write(&a.out).with_context(|| format!("writing {}", a.out.display()))?;
    println!(
        "{} turn {}: {} steps, {} heads, written to {}",
        archive.interaction_id,
        archive.turn,
        archive.actions.len(),
        archive.heads.len(),
        a.out.display()
    );
    Ok(())
}

#[derive(Debug, Serialize)]
struct DemoLine<'a> {
    interaction_id: &'a str,
    turn: usize,
    actions: Vec<String>,
}

pub fn gen_demos(a: GenDemosArgs) -> Result<()> {
    with_domain!(DomainSpec::from_kind(a.domain), |d| gen_demos_domain(d, &a))
}

fn gen_demos_domain<D: StateEncoding>(domain: D, a: &GenDemosArgs) -> Result<()> {
    let records = load_records(&domain, &a.data.data, &a.data.split)?;
    let mut out: Box<dyn Write> = match &a.out {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(std::io::stdout().lock()),
    };
    let (mut written, mut skipped) = (0, 0);
    for ex in make_examples(&records) {
        match generate_demonstration(&domain, &ex.start, &ex.goal, a.node_cap) {
            Ok(demo) => {
                let line = DemoLine {
                    interaction_id: &ex.interaction_id,
                    turn: ex.turn,
                    actions: demo.iter().map(|&x| domain.format_action(x)).collect(),
                };
                writeln!(out, "{}", serde_json::to_string(&line)?)?;
                written += 1;
            }
            Err(e) => {
                eprintln!("skipped {} turn {}: {e}", ex.interaction_id, ex.turn);
                skipped += 1;
            }
        }
    }
    out.flush()?;
    eprintln!("{written} demonstrations, {skipped} skipped");
    Ok(())
}
