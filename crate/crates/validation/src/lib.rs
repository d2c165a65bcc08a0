//! Minimal runner for the acceptance suite: each criterion is a named check
//! with a wall-clock budget, reported on one line.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

/// Detail line on success, reason on failure.
pub type Outcome = Result<String, String>;

pub struct Criterion {
    pub id: u32,
    pub name: &'static str,
    /// Exceeding the budget fails the criterion even if the check held.
    pub limit: Duration,
    pub run: fn() -> Outcome,
}

/// Fails with `msg` unless `ok`.
pub fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn panic_message(p: Box<dyn std::any::Any + Send>) -> String {
    p.downcast_ref::<String>()
        .cloned()
        .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
        .unwrap_or_else(|| "panicked".into())
}

pub fn run_criterion(c: &Criterion) -> (Outcome, Duration) {
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(c.run)).unwrap_or_else(|p| Err(panic_message(p)));
    let elapsed = start.elapsed();
    let outcome = match outcome {
        Ok(d) if elapsed > c.limit => Err(format!("over the {} s budget; {d}", c.limit.as_secs())),
        o => o,
    };
    (outcome, elapsed)
}

/// Runs the criteria whose ids are in `selected` (all when empty).
pub fn run(criteria: &[Criterion], selected: &[u32]) -> ExitCode {
    let mut failed = 0;
    let mut ran = 0;
    for c in criteria.iter().filter(|c| selected.is_empty() || selected.contains(&c.id)) {
        let (outcome, elapsed) = run_criterion(c);
        ran += 1;
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {:>2} {:<20} {tag}  [{:.1} s]  {detail}", c.id, c.name, elapsed.as_secs_f64());
    }
    println!("acceptance: {} of {ran} criteria passed", ran - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
