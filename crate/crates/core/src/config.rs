//! JSON problem configs: either a full [`ProblemSpec`] or `{"builtin": name}`.

use serde::Deserialize;
use serde_json::Value;

use crate::problem::{validate, ProblemSpec, ValidatedProblem};
use crate::{Error, Result};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Builtin {
    builtin: String,
}

/// Parses a config document into an unvalidated spec.
pub fn parse_config(text: &str) -> Result<ProblemSpec> {
    let value: Value = serde_json::from_str(text)
        .map_err(|e| Error::Config(format!("malformed JSON: {e}")))?;
    let is_builtin = value.as_object().is_some_and(|o| o.contains_key("builtin"));
    if is_builtin {
        let b: Builtin = serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))?;
        return ProblemSpec::builtin(&b.builtin).ok_or_else(|| {
            Error::Config(format!(
                "unknown builtin problem \"{}\" (expected t1_linear or t2_pendulum)",
                b.builtin
            ))
        });
    }
    serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))
}

/// Parses and validates a config document.
pub fn load_config(text: &str) -> Result<ValidatedProblem> {
    validate(parse_config(text)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_and_full() {
        let vp = load_config(r#"{"builtin": "t2_pendulum"}"#).unwrap();
        assert_eq!(vp.spec(), &ProblemSpec::t2_pendulum());
        let text = serde_json::to_string(&ProblemSpec::t1_linear()).unwrap();
        assert_eq!(load_config(&text).unwrap().spec(), &ProblemSpec::t1_linear());
    }

    #[test]
    fn errors() {
        let e = load_config("{\n  \"builtin\": ").unwrap_err().to_string();
        assert!(e.contains("line 2"), "{e}");
        assert!(load_config(r#"{"builtin": "t3"}"#).is_err());
        assert!(load_config(r#"{"builtin": "t1_linear", "p": 2}"#).is_err());
        assert!(load_config(r#"{"n": 2}"#).is_err());
        let mut spec = ProblemSpec::t1_linear();
        spec.c = 0.5;
        let e = load_config(&serde_json::to_string(&spec).unwrap()).unwrap_err();
        assert!(matches!(e, Error::InvalidProblem(_)));
    }
}
