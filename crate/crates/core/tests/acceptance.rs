//! Runs every acceptance criterion, prints one line each, and exits non-zero
//! if any of them failed.

use std::process::ExitCode;

use kgdamp::acceptance::{criterion_name, run_criterion, CRITERIA};

fn main() -> ExitCode {
    // `cargo test -- <filter>` narrows the run to criteria whose id or name matches
    let filters: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = Vec::new();
    let mut ran = 0;
    for id in 1..=CRITERIA {
        let name = criterion_name(id);
        let selected = filters.is_empty()
            || filters
                .iter()
                .any(|f| name.contains(f.as_str()) || id.to_string() == *f);
        if !selected {
            continue;
        }
        let outcome = run_criterion(id);
        ran += 1;
        println!("{}", outcome.line());
        if !outcome.passed {
            failed.push(id);
        }
    }
    println!("acceptance: {} of {ran} criteria passed", ran - failed.len());
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("failed criteria: {failed:?}");
        ExitCode::FAILURE
    }
}
