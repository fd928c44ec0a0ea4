//! Runs the special-function identities and the conservation suite.
//!
//! ```text
//! cargo run --release --example selftest
//! ```

use bcs_quench::selftest::{conservation_checks, special_function_checks};

fn main() {
    let checks: Vec<_> = special_function_checks()
        .into_iter()
        .chain(conservation_checks())
        .collect();
    for c in &checks {
        println!(
            "{:4} {:<34} error {:.1e} (tol {:.0e})",
            if c.passed { "ok" } else { "FAIL" },
            c.name,
            c.error,
            c.tolerance
        );
    }
    if checks.iter().any(|c| !c.passed) {
        std::process::exit(2);
    }
}
