//! Runs every acceptance criterion and prints one PASS/FAIL line each.
//! Exits non-zero on any failure that is not a known discrepancy in the
//! stated target (see `acceptance::tolerated`).

use std::process::ExitCode;

use gcnpipe_core::acceptance;

fn main() -> ExitCode {
    let runners: [fn() -> acceptance::Outcome; 9] = [
        acceptance::aggregation_equivalence,
        acceptance::reuse_savings_bound,
        acceptance::gradient_check,
        acceptance::reduction_neutrality,
        acceptance::formula_reproduction,
        acceptance::model_simulator_agreement,
        acceptance::redundancy_effectiveness,
        acceptance::end_to_end_learning,
        acceptance::bram_constraint,
    ];
    let mut unexpected = 0;
    for run in runners {
        let o = run();
        println!("{o}");
        match acceptance::tolerated(&o) {
            Some(why) => println!("  known: {why}"),
            None if !o.passed => unexpected += 1,
            None => {}
        }
    }
    println!("acceptance: {unexpected} unexpected failure(s)");
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
