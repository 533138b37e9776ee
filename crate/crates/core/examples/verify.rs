//! One suite of self-checks, printed criterion by criterion.

use stoptime::verify::{run_suite, Suite};

fn main() {
    let report = run_suite(Suite::Norms, 2);
    for c in &report.criteria {
        println!("{} {:>2} {} [{} checks, {:.1}s] {}", if c.passed { "PASS" } else { "FAIL" }, c.id, c.name, c.checks, c.seconds, c.detail);
    }
}
