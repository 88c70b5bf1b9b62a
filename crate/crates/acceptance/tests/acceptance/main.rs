//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

use std::panic::{self, AssertUnwindSafe};
use std::time::{Duration, Instant};

macro_rules! ensure {
    ($cond:expr, $($arg:tt)+) => {
        if !$cond {
            return Err(format!($($arg)+));
        }
    };
}

mod coreset;
mod determinism;
mod gradients;
mod oracles;
mod service;

pub type CaseResult = Result<(), String>;

/// A named check.
pub struct Case {
    pub name: &'static str,
    pub run: fn() -> CaseResult,
}

pub fn case(name: &'static str, run: fn() -> CaseResult) -> Case {
    Case { name, run }
}

/// Outcome of one acceptance criterion.
pub struct Outcome {
    pub pass: bool,
    pub summary: String,
    /// Extra lines printed under the criterion line.
    pub details: Vec<String>,
}

impl Outcome {
    pub fn from_result(result: Result<String, String>) -> Self {
        match result {
            Ok(summary) => Outcome { pass: true, summary, details: Vec::new() },
            Err(summary) => Outcome { pass: false, summary, details: Vec::new() },
        }
    }
}

/// Runs `f`, turning a panic into an error message.
pub fn guarded<T>(f: impl FnOnce() -> Result<T, String>) -> Result<T, String> {
    match panic::catch_unwind(AssertUnwindSafe(f)) {
        Ok(r) => r,
        Err(payload) => Err(panic_message(payload)),
    }
}

fn panic_message(payload: Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = payload.downcast_ref::<&str>() {
        format!("panicked: {s}")
    } else if let Some(s) = payload.downcast_ref::<String>() {
        format!("panicked: {s}")
    } else {
        "panicked".to_string()
    }
}

/// Runs every case and reports failures as detail lines.
pub fn run_cases(cases: &[Case]) -> (usize, Vec<String>) {
    let mut failures = Vec::new();
    for c in cases {
        if let Err(e) = guarded(c.run) {
            failures.push(format!("{}: {e}", c.name));
        }
    }
    (cases.len() - failures.len(), failures)
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn main() {
    // panics inside checks are reported as failures, not as noise on stderr
    panic::set_hook(Box::new(|_| {}));
    let criteria: Vec<(&str, fn() -> Outcome)> = vec![
        ("forced-case suite", forced::criterion),
        ("gradient finite differences", gradients::criterion),
        ("greedy coreset brute-force equivalence", coreset::criterion),
        ("sampling distributions", sampling::criterion),
        ("end-to-end benefit over random", end_to_end::criterion),
        ("determinism and resume", determinism::criterion),
        ("stopping replay", stopping::criterion),
        ("service contract", service::criterion),
    ];
    println!("acceptance: {} criteria", criteria.len());
    let mut passed = 0;
    let total_start = Instant::now();
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = match panic::catch_unwind(run) {
            Ok(o) => o,
            Err(payload) => Outcome { pass: false, summary: panic_message(payload), details: Vec::new() },
        };
        let status = if outcome.pass { "PASS" } else { "FAIL" };
        println!(
            "[{status}] {} {name}: {} ({})",
            i + 1,
            outcome.summary,
            seconds(start.elapsed())
        );
        for line in &outcome.details {
            println!("       {line}");
        }
        passed += usize::from(outcome.pass);
    }
    println!(
        "acceptance: {passed}/{} criteria passed in {}",
        criteria.len(),
        seconds(total_start.elapsed())
    );
    if passed != criteria.len() {
        std::process::exit(1);
    }
}

pub fn seconds(d: Duration) -> String {
    format!("{:.1} s", d.as_secs_f64())
}
