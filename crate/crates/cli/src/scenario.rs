//! Scenario files: one JSON object naming a pipeline, its inputs, grid and
//! seed.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    CouplingCheck,
    YmhBuild,
    Transgress,
    So3Integrability,
    Apath,
    GroupoidCheck,
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default();
        f.write_str(&s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub kind: Kind,
    #[serde(default)]
    pub inputs: Value,
    /// Overrides of check tolerances, by check name (the part before `:`).
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
    /// Grid resolutions, by name.
    #[serde(default)]
    pub grid: BTreeMap<String, usize>,
    #[serde(default)]
    pub seed: u64,
}

/// An input error, reported with exit code 2.
#[derive(Debug)]
pub struct InputError(pub String);

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self, InputError> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| InputError(format!("scenario: {e}")))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, InputError> {
        let text = std::fs::read_to_string(path).map_err(|e| InputError(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| InputError(format!("{}: {}", path.display(), e.0)))
    }

    pub fn validate(&self) -> Result<(), InputError> {
        if self.name.trim().is_empty() {
            return Err(InputError("scenario: field `name` is empty".into()));
        }
        if let Some((k, _)) = self.grid.iter().find(|(_, v)| **v == 0) {
            return Err(InputError(format!("scenario: grid resolution `{k}` must be positive")));
        }
        if let Some((k, v)) = self.tolerances.iter().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
            return Err(InputError(format!("scenario: tolerance `{k}` = {v} must be finite and non-negative")));
        }
        Ok(())
    }

    /// Typed view of `inputs`; unknown fields are rejected.
    pub fn inputs<T: for<'de> Deserialize<'de>>(&self) -> Result<T, InputError> {
        let v = if self.inputs.is_null() { Value::Object(Default::default()) } else { self.inputs.clone() };
        serde_json::from_value(v).map_err(|e| InputError(format!("scenario inputs ({}): {e}", self.kind)))
    }

    pub fn grid_or(&self, name: &str, default: usize) -> usize {
        self.grid.get(name).copied().unwrap_or(default)
    }

    pub fn tolerance_or(&self, check: &str, default: f64) -> f64 {
        let key = check.split(':').next().unwrap_or(check);
        self.tolerances.get(key).copied().unwrap_or(default)
    }
}

/// A number given either literally or as a constant expression such as
/// `"8*pi"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Number {
    Literal(f64),
    Expression(String),
}

impl Number {
    pub fn value(&self) -> Result<f64, InputError> {
        match self {
            Number::Literal(v) => Ok(*v),
            Number::Expression(s) => coupling_core::expr::Expr::parse(s, &[])
                .map(|e| e.eval_f64(&[]))
                .map_err(|e| InputError(e.to_string())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_validates() {
        let s = Scenario::parse(r#"{"name": "a", "kind": "so3-integrability", "grid": {"n": 4}, "seed": 3}"#).unwrap();
        assert_eq!(s.kind, Kind::So3Integrability);
        assert_eq!(s.grid_or("n", 1), 4);
        assert_eq!(s.kind.to_string(), "so3-integrability");
        for bad in [
            r#"{"name": "a", "kind": "nope"}"#,
            r#"{"name": "a", "kind": "apath", "extra": 1}"#,
            r#"{"name": "a", "kind": "apath", "grid": {"n": 0}}"#,
            r#"{"name": "", "kind": "apath"}"#,
            "{\"name\": \"a\",\n \"kind\": }",
        ] {
            assert!(Scenario::parse(bad).is_err(), "{bad}");
        }
        let e = Scenario::parse("{\"name\": \"a\",\n \"kind\": }").unwrap_err();
        assert!(e.0.contains("line 2"), "{e}");
    }

    #[test]
    fn numbers() {
        assert_eq!(Number::Literal(2.0).value().unwrap(), 2.0);
        assert!((Number::Expression("8*pi".into()).value().unwrap() - 8.0 * std::f64::consts::PI).abs() < 1e-15);
        assert!(Number::Expression("8*q".into()).value().is_err());
    }
}
