//! Scenario runner: loads a JSON scenario, runs its pipeline and produces a
//! report with a verdict per check.

pub mod report;
pub mod runners;
pub mod scenario;

use std::path::Path;
use std::time::Instant;

use report::Report;
use scenario::{InputError, Scenario};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Exit code for malformed scenarios.
pub const INPUT_ERROR: i32 = 2;

pub fn run(scenario: Scenario) -> Result<Report, InputError> {
    let start = Instant::now();
    let mut run = runners::Run::new(&scenario);
    runners::run(&mut run)?;
    let runners::Run { checks, details, grid, .. } = run;
    let verdict = Report::overall(&checks);
    Ok(Report {
        seed: scenario.seed,
        scenario: scenario.clone(),
        checks,
        verdict,
        grid,
        tool_version: TOOL_VERSION.to_string(),
        wall_ms: start.elapsed().as_millis() as u64,
        details,
    })
}

pub fn run_file(path: &Path) -> Result<Report, InputError> {
    run(Scenario::load(path)?)
}

/// Built-in examples whose name or description contains `filter`.
pub fn list_examples(filter: Option<&str>) -> Vec<(String, String)> {
    let needle = filter.map(str::to_lowercase);
    coupling_core::examples::registry()
        .into_iter()
        .filter(|(n, d)| needle.as_ref().is_none_or(|f| n.to_lowercase().contains(f) || d.to_lowercase().contains(f)))
        .collect()
}
