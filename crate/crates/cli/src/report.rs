//! Reports: every verdict is written next to the residual and tolerance that
//! produced it.

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::Value;

use crate::scenario::Scenario;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING-KEBAB-CASE")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
    IntegrableCandidate,
    NonIntegrable,
}

impl Verdict {
    pub fn is_failure(self) -> bool {
        matches!(self, Verdict::Fail | Verdict::NonIntegrable)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Inconclusive => "INCONCLUSIVE",
            Verdict::IntegrableCandidate => "INTEGRABLE-CANDIDATE",
            Verdict::NonIntegrable => "NON-INTEGRABLE",
        }
    }
}

/// Which side of the tolerance passes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Bound {
    Upper,
    Lower,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub residual: f64,
    pub tolerance: f64,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "is_upper")]
    pub bound: Bound,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

fn is_upper(b: &Bound) -> bool {
    *b == Bound::Upper
}

impl Check {
    /// Passes when `residual < tolerance`; a non-finite residual fails.
    pub fn below(name: impl Into<String>, residual: f64, tolerance: f64) -> Self {
        let ok = residual.is_finite() && residual < tolerance;
        Check { name: name.into(), residual, tolerance, verdict: pass(ok), bound: Bound::Upper, note: None }
    }

    /// Passes when `residual >= tolerance`.
    pub fn above(name: impl Into<String>, residual: f64, tolerance: f64) -> Self {
        let ok = residual.is_finite() && residual >= tolerance;
        Check { name: name.into(), residual, tolerance, verdict: pass(ok), bound: Bound::Lower, note: None }
    }

    pub fn with_verdict(mut self, verdict: Verdict) -> Self {
        self.verdict = verdict;
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

fn pass(ok: bool) -> Verdict {
    if ok {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub scenario: Scenario,
    pub checks: Vec<Check>,
    pub verdict: Verdict,
    pub grid: BTreeMap<String, usize>,
    pub seed: u64,
    pub tool_version: String,
    pub wall_ms: u64,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub details: BTreeMap<String, Value>,
}

impl Report {
    pub fn overall(checks: &[Check]) -> Verdict {
        if checks.is_empty() || checks.iter().any(|c| c.verdict.is_failure()) {
            Verdict::Fail
        } else {
            Verdict::Pass
        }
    }

    pub fn exit_code(&self) -> i32 {
        if self.verdict.is_failure() {
            1
        } else {
            0
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize") + "\n"
    }

    /// One line per check.
    pub fn summary(&self) -> String {
        let mut out = format!("{} [{}]: {}\n", self.scenario.name, self.scenario.kind, self.verdict.as_str());
        let width = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
        for c in &self.checks {
            let op = if c.bound == Bound::Upper { "<" } else { ">=" };
            out.push_str(&format!(
                "  {:<width$} {:>11.3e} {op} {:<9.1e} {}\n",
                c.name,
                c.residual,
                c.tolerance,
                c.verdict.as_str()
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdict_rules() {
        assert_eq!(Check::below("a", 1e-9, 1e-8).verdict, Verdict::Pass);
        assert_eq!(Check::below("a", f64::NAN, 1e-8).verdict, Verdict::Fail);
        assert_eq!(Check::above("a", 16.0, 8.0).verdict, Verdict::Pass);
        let inconclusive = Check::below("a", 0.0, 1.0).with_verdict(Verdict::Inconclusive);
        assert_eq!(Report::overall(std::slice::from_ref(&inconclusive)), Verdict::Pass);
        assert_eq!(Report::overall(&[inconclusive, Check::below("b", 2.0, 1.0)]), Verdict::Fail);
        assert_eq!(Report::overall(&[]), Verdict::Fail);
        assert_eq!(serde_json::to_string(&Verdict::NonIntegrable).unwrap(), "\"NON-INTEGRABLE\"");
    }
}
