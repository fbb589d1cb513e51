//! One pass/fail line per acceptance criterion. Exits nonzero when any fails.

mod formats;
mod gradients;
mod gradnorm;
mod mixup;
mod sampler;
mod topk;
mod training;
mod zeroshot;

use std::process::ExitCode;
use std::time::{Duration, Instant};

/// Pinned tolerances and budgets.
pub mod tol {
    use std::time::Duration;

    pub const GRAD_REL_ERR: f64 = 1e-3;
    pub const GRAD_REL_FLOOR: f64 = 1e-3;
    pub const GRAD_MIN_SHAPES: usize = 20;
    pub const GRAD_BUDGET: Duration = Duration::from_secs(10);

    pub const SAMPLER_DRAWS: usize = 100_000;
    pub const SAMPLER_MIN_P: f64 = 1e-3;
    pub const SAMPLER_BUDGET: Duration = Duration::from_secs(5);

    pub const MIXUP_LAMBDAS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];
    pub const MIXUP_ABS: f64 = 1e-6;

    pub const TOPK_INSTANCES: usize = 100;
    pub const TOPK_MAX_ROWS: usize = 200;
    pub const TOPK_MAX_CLASSES: usize = 50;

    pub const SEPARABLE_MAX_EPOCHS: usize = 50;
    pub const SEPARABLE_BUDGET: Duration = Duration::from_secs(30);

    pub const IMBALANCE_SEEDS: u64 = 10;
    pub const IMBALANCE_MIN_WINS: usize = 8;
    pub const IMBALANCE_BASELINE_RANGE: (f64, f64) = (0.5, 0.9);
    pub const IMBALANCE_TAIL_COUNT: usize = 3;
    pub const IMBALANCE_SPREAD: f64 = 0.55;
    pub const IMBALANCE_DIM: usize = 64;

    pub const GRADNORM_STEPS: usize = 200;
    pub const GRADNORM_SUM_ABS: f64 = 1e-9;
    pub const GRADNORM_SYMMETRY_ABS: f64 = 1e-6;

    pub const ZEROSHOT_MOCK_RUNS: usize = 100;
}

pub type Outcome = Result<String, String>;

/// Fails with `msg` unless `cond` holds.
pub fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

pub fn within_budget(elapsed: Duration, budget: Duration) -> Result<(), String> {
    ensure(elapsed < budget, || {
        format!("took {elapsed:.2?}, budget {budget:?}")
    })
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("gradient correctness", gradients::check),
        ("sampler balance", sampler::check),
        ("mixup algebra", mixup::check),
        ("top-k oracle equivalence", topk::check),
        ("separable end-to-end", training::separable),
        ("imbalance benefit", training::imbalance),
        ("gradnorm properties", gradnorm::check),
        ("zero-shot protocol", zeroshot::check),
        ("format stability", formats::check),
        ("early stopping", training::early_stopping),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".to_string()));
        let elapsed = start.elapsed();
        match outcome {
            Ok(detail) => println!("PASS  {name:<26} {detail} [{elapsed:.2?}]"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name:<26} {why} [{elapsed:.2?}]");
            }
        }
    }
    println!("{} of {} criteria passed", 10 - failed, 10);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
