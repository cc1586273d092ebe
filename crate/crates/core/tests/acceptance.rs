//! Runs the eight acceptance criteria at full size, one after another, and
//! prints a PASS/FAIL line for each. A criterion passes when every numeric
//! check holds and it finishes within its time budget.

use std::process::ExitCode;

use lecell::checks::{criterion, TITLES};
use lecell::report::Effort;

fn main() -> ExitCode {
    let mut failed = 0;
    for id in 1..=8u8 {
        let (section, timing) = criterion(id, Effort::Full);
        let ok = section.passed && timing.within;
        if !ok {
            failed += 1;
        }
        println!(
            "{} criterion {id}: {} ({:.2} s, budget {} s)",
            if ok { "PASS" } else { "FAIL" },
            TITLES[id as usize - 1],
            timing.seconds,
            timing.limit.unwrap_or(f64::INFINITY),
        );
        for c in &section.checks {
            println!("    [{}] {} = {:e} ({})", if c.passed { "ok" } else { "xx" }, c.name, c.value, c.bound);
        }
        for e in &section.exponents {
            println!(
                "    [{}] {} = {:.4} (expected {}, window [{:.4}, {:.4}])",
                if e.passed { "ok" } else { "xx" },
                e.name,
                e.measured,
                e.expected,
                e.window[0],
                e.window[1]
            );
        }
        for n in &section.notes {
            println!("    note: {n}");
        }
    }
    println!("acceptance: {} of 8 criteria passed", 8 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
