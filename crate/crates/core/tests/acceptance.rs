//! All ten acceptance criteria on every acceptance seed, one line per run.

use std::process::ExitCode;

use hardy_lab::acceptance::{run_criterion, ACCEPTANCE_SEEDS, CRITERIA};

fn main() -> ExitCode {
    let mut failed = Vec::new();
    for c in CRITERIA {
        for seed in ACCEPTANCE_SEEDS {
            let outcome = run_criterion(c.id, seed).expect("known criterion");
            println!("{}", outcome.summary());
            if !outcome.pass() {
                failed.push((c.id, seed));
            }
        }
    }
    if failed.is_empty() {
        println!("acceptance: all {} criteria pass on seeds {:?}", CRITERIA.len(), ACCEPTANCE_SEEDS);
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed (criterion, seed): {failed:?}");
        ExitCode::FAILURE
    }
}
