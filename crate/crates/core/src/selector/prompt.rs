use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const HEADER: &str = "You advise a small autonomous surface vessel from a single forward camera image.
The image shows K overlaid candidate trajectories labeled 1..{K} at circular endpoints; id 0 = KEEP STATION.

";

const FIELDS: &str = r#"- "see": what matters for safe, COLREG-compliant navigation (≤ 15 words).
- "implications": why it matters for safety of people and vessel (≤ 15 words).
- "action": short high-level maneuver (side/clearance/speed/readiness), no numeric ids (≤ 15 words).
"#;

const SCHEMA: &str = r#"Respond with a SINGLE JSON object only:
{ "see":"<≤ 15 words>", "implications":"<≤ 15 words>", "action":"<≤ 15 words>", "choice_id": <0..{K}>, "confidence": <0..1> }
Do not include any other text.
"#;

const CONSERVATIVE_LEAD: &str = "From ONLY what is visible now, be concise and conservative:\n";
const SAFETY_FIRST_LEAD: &str = "From ONLY what is visible now, be concise and safety-first:\n";
const PROACTIVE_RULES: &str = "Choose a numbered path when any option is clearly water-safe; use 0 only if all numbered options appear unsafe or an immediate stop is warranted.
If multiple numbered options are safe, prefer greater separation from hazards/keep-out regions, staying within the clear water corridor, modest forward progress; if still tied, slight starboard bias.
";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptVariant {
    Conservative,
    Neutral,
    Proactive,
}

impl PromptVariant {
    pub const ALL: [PromptVariant; 3] = [Self::Conservative, Self::Neutral, Self::Proactive];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Conservative => "conservative",
            Self::Neutral => "neutral",
            Self::Proactive => "proactive",
        }
    }

    fn template(&self) -> String {
        match self {
            Self::Conservative => {
                format!("{HEADER}{CONSERVATIVE_LEAD}{FIELDS}If uncertain, prefer 0. {SCHEMA}")
            }
            Self::Neutral => format!("{HEADER}{SAFETY_FIRST_LEAD}{FIELDS}{SCHEMA}"),
            Self::Proactive => format!("{HEADER}{SAFETY_FIRST_LEAD}{PROACTIVE_RULES}{FIELDS}{SCHEMA}"),
        }
    }
}

impl fmt::Display for PromptVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PromptVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "conservative" => Ok(Self::Conservative),
            "neutral" => Ok(Self::Neutral),
            "proactive" => Ok(Self::Proactive),
            other => Err(Error::invalid(format!("unknown prompt variant {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectorPrompt {
    pub variant: PromptVariant,
    pub k: usize,
    pub text: String,
}

/// Instruction prompt for `variant` with the candidate count substituted.
pub fn build_prompt(variant: PromptVariant, k: usize) -> SelectorPrompt {
    if k == 0 {
        tracing::warn!(%variant, "building selector prompt with no candidates; range 1..0 is empty");
    }
    SelectorPrompt { variant, k, text: variant.template().replace("{K}", &k.to_string()) }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conservative_contains_range_and_bias() {
        let p = build_prompt(PromptVariant::Conservative, 15);
        assert!(p.text.contains("labeled 1..15"));
        assert!(p.text.contains("If uncertain, prefer 0"));
        assert!(p.text.contains("\"choice_id\": <0..15>"));
        assert!(!p.text.contains("{K}"));
    }

    #[test]
    fn proactive_has_starboard_bias() {
        let p = build_prompt(PromptVariant::Proactive, 15);
        assert!(p.text.contains("slight starboard bias"));
        assert!(!p.text.contains("If uncertain"));
    }

    #[test]
    fn degenerate_k() {
        let p = build_prompt(PromptVariant::Neutral, 0);
        assert!(p.text.contains("labeled 1..0"));
        assert!(p.text.ends_with("Do not include any other text.\n"));
    }

    #[test]
    fn variant_parsing() {
        assert_eq!("proactive".parse::<PromptVariant>().unwrap(), PromptVariant::Proactive);
        assert!(matches!("bold".parse::<PromptVariant>(), Err(Error::InvalidArgument(_))));
    }
}
