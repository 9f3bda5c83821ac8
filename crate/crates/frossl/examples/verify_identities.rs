//! Runs every property-check suite (norm dualities, invariance identities,
//! criterion decompositions, rotation invariance) and prints the table.
//!
//! Run with: cargo run --example verify_identities

use frossl::cli::verify_suite;

fn main() {
    let mut all_pass = true;
    for suite in ["identities", "propositions", "rotations"] {
        println!("-- suite: {suite}");
        for check in verify_suite(suite).expect("known suite") {
            let tag = if check.passed { "PASS" } else { "FAIL" };
            println!("{tag}  {:<48}  {}", check.name, check.detail);
            all_pass &= check.passed;
        }
    }
    std::process::exit(if all_pass { 0 } else { 1 });
}
