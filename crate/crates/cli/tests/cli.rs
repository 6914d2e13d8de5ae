use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sestra::data::{format_line, tokenize, InteractionRecord, Turn};
use sestra::domains::Alchemy;
use sestra::Domain;

const SMALL_MODEL: &str = r#"
[model]
word_dim = 8
action_part_dim = 8
color_dim = 4
position_dim = 4
encoder_hidden = 8
decoder_hidden = 8
state_hidden = 4

[train]
max_epochs = 2
batch_size = 5
"#;

fn sestra(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sestra")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

/// Five-turn Alchemy interactions built from random pops and pushes, with
/// utterances that name the changed beaker.
fn alchemy_lines(count: usize, seed: u64) -> String {
    let d = Alchemy::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lines = Vec::new();
    for i in 0..count {
        let beakers = (0..7)
            .map(|_| (0..rng.gen_range(0..=3)).map(|_| rng.gen_range(0..6u8)).collect())
            .collect();
        let initial_state = d.state(beakers).unwrap();
        let mut s = initial_state.clone();
        let mut turns = Vec::new();
        for _ in 0..5 {
            let b = rng.gen_range(1..=7);
            let (words, a) = if rng.gen_bool(0.5) {
                (format!("empty one unit of beaker {b}"), d.pop(b))
            } else {
                let c = rng.gen_range(0..6u8);
                (format!("add color {c} to beaker {b}"), d.push(b, c))
            };
            s = d.transition(&s, a);
            turns.push(Turn {
                tokens: tokenize(&words),
                utterance: words,
                post_state: s.clone(),
            });
        }
        lines.push(format_line(
            &d,
            &InteractionRecord {
                id: format!("int-{i}"),
                initial_state,
                turns,
            },
        ));
    }
    lines.join("\n") + "\n"
}

struct Workspace {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

impl Workspace {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        std::fs::create_dir_all(root.join("data")).unwrap();
        std::fs::write(root.join("data/alchemy-train.tsv"), alchemy_lines(30, 1)).unwrap();
        std::fs::write(root.join("data/alchemy-test.tsv"), alchemy_lines(6, 2)).unwrap();
        std::fs::write(root.join("small.toml"), SMALL_MODEL).unwrap();
        Self { _dir: dir, root }
    }

    fn path(&self, rel: &str) -> String {
        self.root.join(rel).display().to_string()
    }

    fn train(&self, out: &str, extra: &[&str]) -> Output {
        let (data, config, out) = (self.path("data"), self.path("small.toml"), self.path(out));
        let mut args = vec!["train", "--domain", "alchemy", "--data", &data, "--config", &config, "--out", &out];
        args.extend_from_slice(extra);
        sestra(&args)
    }
}

fn read(path: impl AsRef<Path>) -> String {
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn selftest_passes() {
    let out = sestra(&["selftest", "--states", "200"]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    assert!(stdout(&out).lines().all(|l| l.starts_with("PASS")));
}

#[test]
fn invalid_usage_exits_with_one() {
    assert_eq!(code(&sestra(&["train", "--unknown-flag"])), 1);
    assert_eq!(code(&sestra(&["no-such-command"])), 1);
    assert_eq!(code(&sestra(&["evaluate", "--model", "/no/such/model", "--data", "/tmp"])), 1);
    let ws = Workspace::new();
    let missing = ws.path("missing");
    assert_eq!(
        code(&sestra(&["train", "--domain", "alchemy", "--data", &missing, "--out", &missing])),
        1
    );
    std::fs::write(ws.root.join("bad.toml"), "[train]\nlearning_rat = 0.1\n").unwrap();
    let (data, bad, out) = (ws.path("data"), ws.path("bad.toml"), ws.path("out"));
    let r = sestra(&["train", "--domain", "alchemy", "--data", &data, "--config", &bad, "--out", &out]);
    assert_eq!(code(&r), 1);
    assert!(String::from_utf8_lossy(&r.stderr).contains("learning_rat"));
    std::fs::write(ws.root.join("neg.toml"), "[train.reward]\nlambda = -1.0\n").unwrap();
    let neg = ws.path("neg.toml");
    assert_eq!(
        code(&sestra(&[
            "train", "--domain", "alchemy", "--data", &data, "--config", &neg, "--out", &out
        ])),
        1
    );
    assert_eq!(code(&sestra(&["train", "--data", &data, "--out", &out])), 1);
}

#[test]
fn help_exits_with_zero() {
    let out = sestra(&["--help"]);
    assert_eq!(code(&out), 0);
    for sub in ["train", "evaluate", "rollout", "dump-attention", "gen-demos", "selftest"] {
        assert!(stdout(&out).contains(sub), "{sub}");
    }
}

#[test]
fn train_then_inspect_the_model() {
    let ws = Workspace::new();
    let out = ws.train("run", &["--algorithm", "sestra", "--seed", "4"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let config = read(ws.root.join("run/config.toml"));
    let parsed: sestra::config::RunConfig = resolved_config(&config);
    assert_eq!(parsed.train.seed, 4);
    assert_eq!(parsed.train.max_epochs, 2);
    assert_eq!(
        (parsed.train.reward.lambda, parsed.train.reward.delta, parsed.train.reward.horizon),
        (0.1, 0.15, 7)
    );
    let log = sestra::training::read_log(&read(ws.root.join("run/train.jsonl"))).unwrap();
    assert_eq!(log.len(), 2);
    assert!(log.iter().all(|r| r.seed == 4));

    let model = ws.path("run/model.bin");
    let (data, report) = (ws.path("data"), ws.path("report.json"));
    let ev = sestra(&[
        "evaluate", "--model", &model, "--data", &data, "--split", "test", "--report", &report,
    ]);
    assert_eq!(code(&ev), 0, "{}", String::from_utf8_lossy(&ev.stderr));
    assert!(stdout(&ev).starts_with("inst "));
    let rep: sestra::eval::EvalReport = serde_json::from_str(&read(&report)).unwrap();
    assert_eq!(rep.instructions.len(), 30);
    assert_eq!(rep.recompute(), (rep.inst, rep.three_utts, rep.five_utts));
    assert!(rep.inst_accuracy() < 0.5);

    let state = "1:g 2:_ 3:p 4:_ 5:y 6:oo 7:r";
    let ro = sestra(&[
        "rollout",
        "--model",
        &model,
        "--state",
        state,
        "--instruction",
        "empty one unit of beaker 1",
    ]);
    assert_eq!(code(&ro), 0, "{}", String::from_utf8_lossy(&ro.stderr));
    let text = stdout(&ro);
    let final_line = text.lines().find(|l| l.starts_with("final ")).unwrap();
    assert!(Alchemy::new().parse_state(&final_line["final ".len()..]).is_ok());
    let input = ws.path("input.json");
    std::fs::write(
        &input,
        format!(r#"{{"state": "{state}", "instruction": "add color 2 to beaker 3", "history": ["empty one unit of beaker 1"]}}"#),
    )
    .unwrap();
    assert_eq!(code(&sestra(&["rollout", "--model", &model, "--input", &input])), 0);
    let bad = sestra(&["rollout", "--model", &model, "--state", "1:zz", "--instruction", "x"]);
    assert_eq!(code(&bad), 1);

    let att = ws.path("attention.json");
    let dump = sestra(&[
        "dump-attention",
        "--model",
        &model,
        "--data",
        &data,
        "--interaction",
        "int-2",
        "--turn",
        "1",
        "--out",
        &att,
    ]);
    assert_eq!(code(&dump), 0, "{}", String::from_utf8_lossy(&dump.stderr));
    let archive: sestra::attention::AttentionArchive = serde_json::from_str(&read(&att)).unwrap();
    assert_eq!(archive.heads.len(), 6);
    assert_eq!(archive.interaction_id, "int-2");
    assert!(archive.max_row_error() < 1e-6);
    let far = sestra(&["dump-attention", "--model", &model, "--data", &data, "--turn", "9", "--out", &att]);
    assert_eq!(code(&far), 1);
}

fn resolved_config(text: &str) -> sestra::config::RunConfig {
    sestra::config::RunConfig::resolve(Some(text), &Default::default()).unwrap()
}

#[test]
fn seed_list_reports_the_best_run() {
    let ws = Workspace::new();
    let out = ws.train("seeds", &["--seeds", "0,1", "--max-epochs", "1"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for s in ["seeds/seed-0", "seeds/seed-1"] {
        assert!(ws.root.join(s).join("model.bin").is_file());
        assert!(ws.root.join(s).join("config.toml").is_file());
    }
    let summary: serde_json::Value = serde_json::from_str(&read(ws.root.join("seeds/summary.json"))).unwrap();
    assert_eq!(summary["runs"].as_array().unwrap().len(), 2);
    assert!(stdout(&out).contains("best seed"));
}

#[test]
fn demonstrations_cover_every_instruction() {
    let ws = Workspace::new();
    let (data, out) = (ws.path("data"), ws.path("demos.jsonl"));
    let r = sestra(&[
        "gen-demos",
        "--domain",
        "alchemy",
        "--data",
        &data,
        "--split",
        "test",
        "--out",
        &out,
    ]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    let lines: Vec<serde_json::Value> = read(&out).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 30);
    assert!(lines.iter().all(|l| l["actions"].as_array().unwrap().last().unwrap() == "STOP"));
}
