//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails. Pass criterion numbers as arguments to run a subset:
//! `cargo test -p molt --test acceptance -- 3 7`.

mod determinism;
mod filter;
mod gradients;
mod normalization;
mod oracles;
mod symmetry;
mod transfer;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

/// `Ok(detail)` on success, `Err(reason)` on failure.
pub type Outcome = Result<String, String>;

struct Criterion {
    id: u32,
    name: &'static str,
    /// Wall-clock limit in seconds, where one is part of the criterion.
    budget: Option<f64>,
    run: fn() -> Outcome,
}

const CRITERIA: &[Criterion] = &[
    Criterion {
        id: 1,
        name: "equivariance",
        budget: Some(60.0),
        run: symmetry::run,
    },
    Criterion {
        id: 2,
        name: "gradients",
        budget: Some(120.0),
        run: gradients::run,
    },
    Criterion {
        id: 3,
        name: "oracles",
        budget: None,
        run: oracles::run,
    },
    Criterion {
        id: 4,
        name: "normalization",
        budget: None,
        run: normalization::run,
    },
    Criterion {
        id: 5,
        name: "discriminative-lr",
        budget: None,
        run: normalization::discriminative,
    },
    Criterion {
        id: 6,
        name: "transfer",
        budget: Some(600.0),
        run: transfer::run,
    },
    Criterion {
        id: 7,
        name: "trainer",
        budget: None,
        run: trainer::run,
    },
    Criterion {
        id: 8,
        name: "element-filter",
        budget: None,
        run: filter::run,
    },
    Criterion {
        id: 9,
        name: "determinism",
        budget: None,
        run: determinism::run,
    },
];

/// Fails with `what` when `ok` is false.
pub fn ensure(ok: bool, what: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(what())
    }
}

fn main() -> ExitCode {
    let selected: Vec<u32> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let mut failed = 0;
    for c in CRITERIA {
        if !selected.is_empty() && !selected.contains(&c.id) {
            continue;
        }
        let started = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(c.run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let secs = started.elapsed().as_secs_f64();
        let result = match (result, c.budget) {
            (Ok(_), Some(b)) if secs > b => Err(format!("took {secs:.1}s, limit {b:.0}s")),
            (r, _) => r,
        };
        match result {
            Ok(detail) => println!(
                "criterion {} PASS {}: {} [{:.1}s]",
                c.id, c.name, detail, secs
            ),
            Err(reason) => {
                failed += 1;
                println!(
                    "criterion {} FAIL {}: {} [{:.1}s]",
                    c.id, c.name, reason, secs
                );
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
