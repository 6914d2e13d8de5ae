//! Trains every reinforcement-learning algorithm on the miniature Alchemy
//! task and prints held-out instruction accuracy.
//!
//! Usage: `cargo run --release -p sestra --example mini_experiment [epochs] [seeds] [algorithm|all]`

use std::time::Instant;

use sestra::synthetic::MiniExperiment;
use sestra::training::Algorithm;

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mut exp = MiniExperiment::default();
    if let Some(e) = args.first() {
        exp.epochs = e.parse().expect("integer epoch count");
    }
    let seeds: u64 = args.get(1).map_or(3, |s| s.parse().expect("integer seed count"));
    let only: Option<Algorithm> = args.get(2).filter(|a| *a != "all").map(|a| a.parse().expect("algorithm name"));
    for alg in [Algorithm::Sestra, Algorithm::ContextualBandit, Algorithm::PolicyGradient] {
        if only.is_some_and(|o| o != alg) {
            continue;
        }
        for seed in 0..seeds {
            let t = Instant::now();
            let run = exp
                .run(alg, seed, &mut |r| {
                    if r.epoch % 10 == 0 {
                        eprintln!(
                            "  {} seed {} epoch {} reward {:.3} success {:.3}",
                            alg.name(),
                            seed,
                            r.epoch,
                            r.train_reward,
                            r.train_success
                        );
                    }
                })
                .expect("training failed");
            println!(
                "{} seed {} epochs {} selected {:?} test inst {:.3} ({:.1}s)",
                alg.name(),
                seed,
                run.epochs_run,
                run.selected_epoch,
                run.test_inst,
                t.elapsed().as_secs_f64()
            );
        }
    }
}
