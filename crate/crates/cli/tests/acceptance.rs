//! Runs every acceptance criterion at the default seed and tolerances.
//! Use `cargo test -p sbjo-cli --test acceptance -- --nocapture` to see
//! the per-criterion lines.

use sbjo_cli::suite::{run, SuiteConfig};

#[test]
fn all_criteria_pass() {
    let report = run(&SuiteConfig::default());
    for c in &report.criteria {
        println!("{}", c.line());
    }
    assert_eq!(report.criteria.len(), 12);
    let failed: Vec<String> = report
        .criteria
        .iter()
        .filter(|c| !c.pass)
        .map(|c| format!("{}: {}", c.id, c.detail))
        .collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
    assert!(report.pass);
}
