use serde::{Deserialize, Serialize};
use serde_json::Value;

/// How a syntactically valid but out-of-range `choice_id` is mapped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutOfRangePolicy {
    /// Clamp into `0..=K`.
    #[default]
    Clip,
    /// Map any out-of-range id to station-keeping.
    StationKeep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseStatus {
    Ok,
    Clipped,
    Defaulted,
}

/// Word limit the output schema asks for on each free-text field.
pub const WORD_LIMIT: usize = 15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub see: String,
    pub implications: String,
    pub action: String,
    pub choice_id: usize,
    pub confidence: f64,
    pub raw_text: String,
    pub parse_status: ParseStatus,
    /// Some free-text field is longer than the schema's word limit.
    pub over_word_limit: bool,
    /// Why the decision was defaulted, when it was.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

impl Decision {
    pub fn defaulted(raw_text: impl Into<String>, reason: impl Into<String>) -> Self {
        Self {
            see: String::new(),
            implications: String::new(),
            action: String::new(),
            choice_id: 0,
            confidence: 0.0,
            raw_text: raw_text.into(),
            parse_status: ParseStatus::Defaulted,
            over_word_limit: false,
            failure: Some(reason.into()),
        }
    }

    pub fn is_defaulted(&self) -> bool {
        self.parse_status == ParseStatus::Defaulted
    }
}

/// Parses model output under the default clip policy.
pub fn parse_decision(raw_text: &str, k: usize) -> Decision {
    parse_decision_with(raw_text, k, OutOfRangePolicy::Clip)
}

/// Strict parse of a single JSON object carrying `see`, `implications`,
/// `action`, `choice_id` and `confidence`. Every failure folds into
/// station-keeping with [`ParseStatus::Defaulted`].
pub fn parse_decision_with(raw_text: &str, k: usize, policy: OutOfRangePolicy) -> Decision {
    let value: Value = match serde_json::from_str(raw_text.trim()) {
        Ok(v) => v,
        Err(e) => return Decision::defaulted(raw_text, format!("invalid JSON: {e}")),
    };
    let Value::Object(obj) = value else {
        return Decision::defaulted(raw_text, "top-level value is not an object");
    };

    let mut texts = Vec::with_capacity(3);
    for key in ["see", "implications", "action"] {
        match obj.get(key) {
            Some(Value::String(s)) => texts.push(s.clone()),
            Some(_) => return Decision::defaulted(raw_text, format!("`{key}` is not a string")),
            None => return Decision::defaulted(raw_text, format!("missing `{key}`")),
        }
    }

    let Some(choice) = obj.get("choice_id") else {
        return Decision::defaulted(raw_text, "missing `choice_id`");
    };
    let Some(choice) = integral(choice) else {
        return Decision::defaulted(raw_text, "`choice_id` is not an integer");
    };
    let confidence = match obj.get("confidence") {
        Some(Value::Number(n)) => n.as_f64().unwrap_or(0.0).clamp(0.0, 1.0),
        Some(_) => return Decision::defaulted(raw_text, "`confidence` is not a number"),
        None => return Decision::defaulted(raw_text, "missing `confidence`"),
    };

    let (choice_id, parse_status) = if choice >= 0.0 && choice <= k as f64 {
        (choice as usize, ParseStatus::Ok)
    } else {
        let mapped = match policy {
            OutOfRangePolicy::Clip if choice < 0.0 => 0,
            OutOfRangePolicy::Clip => k,
            OutOfRangePolicy::StationKeep => 0,
        };
        (mapped, ParseStatus::Clipped)
    };

    let over_word_limit = texts.iter().any(|t| t.split_whitespace().count() > WORD_LIMIT);
    let mut texts = texts.into_iter();
    Decision {
        see: texts.next().unwrap_or_default(),
        implications: texts.next().unwrap_or_default(),
        action: texts.next().unwrap_or_default(),
        choice_id,
        confidence,
        raw_text: raw_text.to_string(),
        parse_status,
        over_word_limit,
        failure: None,
    }
}

/// Integral JSON number as f64 (exact for the magnitudes that matter here).
fn integral(v: &Value) -> Option<f64> {
    let Value::Number(n) = v else { return None };
    if let Some(i) = n.as_i64() {
        return Some(i as f64);
    }
    if let Some(u) = n.as_u64() {
        return Some(u as f64);
    }
    let f = n.as_f64()?;
    (f.is_finite() && f.fract() == 0.0).then_some(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn obj(choice: &str) -> String {
        format!(r#"{{"see":"fire on dock","implications":"heat and smoke","action":"keep clear to port","choice_id":{choice},"confidence":0.8}}"#)
    }

    #[test]
    fn happy_path() {
        let d = parse_decision(&obj("3"), 15);
        assert_eq!(d.choice_id, 3);
        assert_eq!(d.parse_status, ParseStatus::Ok);
        assert_eq!(d.see, "fire on dock");
        assert_eq!(d.confidence, 0.8);
    }

    #[test]
    fn prose_defaults() {
        let d = parse_decision("I choose 7", 15);
        assert_eq!(d.choice_id, 0);
        assert_eq!(d.parse_status, ParseStatus::Defaulted);
    }

    #[test]
    fn out_of_range_clips() {
        let d = parse_decision(&obj("22"), 15);
        assert_eq!((d.choice_id, d.parse_status), (15, ParseStatus::Clipped));
        let d = parse_decision(&obj("-4"), 15);
        assert_eq!((d.choice_id, d.parse_status), (0, ParseStatus::Clipped));
        let d = parse_decision_with(&obj("22"), 15, OutOfRangePolicy::StationKeep);
        assert_eq!((d.choice_id, d.parse_status), (0, ParseStatus::Clipped));
    }

    #[test]
    fn schema_violations_default() {
        let missing = r#"{"see":"a","implications":"b","action":"c","confidence":0.5}"#;
        assert!(parse_decision(missing, 15).is_defaulted());
        assert!(parse_decision(&obj("\"3\""), 15).is_defaulted());
        assert!(parse_decision(&obj("2.5"), 15).is_defaulted());
        assert!(parse_decision("[1,2]", 15).is_defaulted());
        assert!(parse_decision(&format!("{} trailing", obj("1")), 15).is_defaulted());
        assert!(parse_decision(&format!("```json\n{}\n```", obj("1")), 15).is_defaulted());
        let d = parse_decision(&obj("2.0"), 15);
        assert_eq!((d.choice_id, d.parse_status), (2, ParseStatus::Ok));
    }

    #[test]
    fn long_text_is_flagged_not_truncated() {
        let long = "word ".repeat(20);
        let raw = format!(r#"{{"see":"{long}","implications":"b","action":"c","choice_id":1,"confidence":1}}"#);
        let d = parse_decision(&raw, 3);
        assert!(d.over_word_limit);
        assert_eq!(d.see, long);
        assert_eq!(d.parse_status, ParseStatus::Ok);
    }

    proptest! {
        #[test]
        fn arbitrary_bytes_stay_in_range(bytes in proptest::collection::vec(any::<u8>(), 0..200), k in 0usize..20) {
            let text = String::from_utf8_lossy(&bytes);
            let d = parse_decision(&text, k);
            prop_assert!(d.choice_id <= k);
            if d.is_defaulted() { prop_assert_eq!(d.choice_id, 0); }
        }

        #[test]
        fn arbitrary_choice_stays_in_range(choice in any::<i64>(), k in 0usize..20) {
            let d = parse_decision(&obj(&choice.to_string()), k);
            prop_assert!(d.choice_id <= k);
        }
    }
}
