use serde::{Deserialize, Serialize};

use super::{EditCategory, SynthesisError};

/// Original description, edit instruction and edited description for one edit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TextTriplet {
    pub original_description: String,
    pub edit_instruction: String,
    pub edited_description: String,
    pub category: EditCategory,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TripletReply {
    original_description: Option<String>,
    edit_instruction: Option<String>,
    edited_description: Option<String>,
}

// Verbs that commonly open a garment edit instruction.
const IMPERATIVE_VERBS: &[&str] = &[
    "add",
    "alter",
    "attach",
    "change",
    "convert",
    "crop",
    "dye",
    "eliminate",
    "extend",
    "lengthen",
    "make",
    "modify",
    "recolor",
    "remove",
    "replace",
    "reshape",
    "restyle",
    "shorten",
    "substitute",
    "swap",
    "switch",
    "take",
    "transform",
    "trim",
    "turn",
    "use",
    "widen",
    "narrow",
    "delete",
    "insert",
    "put",
    "give",
    "apply",
];

impl TextTriplet {
    pub fn new(
        original_description: &str,
        edit_instruction: &str,
        edited_description: &str,
        category: EditCategory,
    ) -> Result<Self, SynthesisError> {
        let clean = |field: &'static str, s: &str| {
            let t = s.split_whitespace().collect::<Vec<_>>().join(" ");
            if t.is_empty() {
                Err(SynthesisError::SchemaViolation { reason: format!("{field} is empty"), raw: String::new() })
            } else {
                Ok(t)
            }
        };
        let triplet = Self {
            original_description: clean("original_description", original_description)?,
            edit_instruction: clean("edit_instruction", edit_instruction)?,
            edited_description: clean("edited_description", edited_description)?,
            category,
        };
        if !triplet.instruction_looks_imperative() {
            log::warn!("edit instruction does not start with a known verb: {:?}", triplet.edit_instruction);
        }
        Ok(triplet)
    }

    /// Parses a backend reply: one JSON object with the three text fields.
    pub fn from_reply(raw: &str, category: EditCategory) -> Result<Self, SynthesisError> {
        let violation = |reason: String| SynthesisError::SchemaViolation { reason, raw: raw.to_string() };
        let reply: TripletReply = serde_json::from_str(raw.trim()).map_err(|e| violation(e.to_string()))?;
        let (Some(o), Some(i), Some(e)) =
            (reply.original_description, reply.edit_instruction, reply.edited_description)
        else {
            return Err(violation("reply is missing one of the three triplet fields".into()));
        };
        Self::new(&o, &i, &e, category).map_err(|err| match err {
            SynthesisError::SchemaViolation { reason, .. } => violation(reason),
            other => other,
        })
    }

    /// Advisory check only; a miss is logged, never rejected.
    pub fn instruction_looks_imperative(&self) -> bool {
        let first = self
            .edit_instruction
            .split_whitespace()
            .next()
            .map(|w| w.trim_matches(|c: char| !c.is_alphabetic()).to_ascii_lowercase())
            .unwrap_or_default();
        IMPERATIVE_VERBS.contains(&first.as_str())
    }

    pub fn word_counts(&self) -> [usize; 3] {
        [
            self.original_description.split_whitespace().count(),
            self.edit_instruction.split_whitespace().count(),
            self.edited_description.split_whitespace().count(),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SWEATER: &str = r#"{"original_description": "A gray turtleneck sweater with a ribbed texture",
        "edit_instruction": "Change the color of the sweater to blue",
        "edited_description": "A blue turtleneck sweater with a ribbed texture"}"#;

    #[test]
    fn parses_worked_example() {
        let t = TextTriplet::from_reply(SWEATER, EditCategory::ColorAlteration).unwrap();
        assert_eq!(t.original_description, "A gray turtleneck sweater with a ribbed texture");
        assert_eq!(t.edit_instruction, "Change the color of the sweater to blue");
        assert_eq!(t.edited_description, "A blue turtleneck sweater with a ribbed texture");
        assert!(t.instruction_looks_imperative());
        assert_eq!(t.word_counts(), [8, 8, 8]);
    }

    #[test]
    fn empty_or_missing_fields_are_violations() {
        let empty = r#"{"original_description":"a","edit_instruction":"  ","edited_description":"b"}"#;
        let err = TextTriplet::from_reply(empty, EditCategory::ObjectRemoval).unwrap_err();
        assert!(matches!(err, SynthesisError::SchemaViolation { ref raw, .. } if raw == empty), "{err:?}");
        let missing = r#"{"original_description":"a","edited_description":"b"}"#;
        assert!(matches!(
            TextTriplet::from_reply(missing, EditCategory::ObjectRemoval),
            Err(SynthesisError::SchemaViolation { .. })
        ));
        assert!(TextTriplet::from_reply("Sure! Here is a triplet", EditCategory::ObjectRemoval).is_err());
    }

    #[test]
    fn imperative_check_is_advisory() {
        let t = TextTriplet::new("a", "The sweater should be blue", "b", EditCategory::ColorAlteration).unwrap();
        assert!(!t.instruction_looks_imperative());
    }
}
