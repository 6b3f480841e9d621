use serde::{Deserialize, Serialize};

use crate::score::{QuestionId, Verdict};

/// A VQA reply with its raw text kept for audit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VqaVerdict {
    pub question_id: QuestionId,
    pub raw_reply: String,
    pub verdict: Verdict,
}

impl VqaVerdict {
    pub fn from_reply(question_id: QuestionId, raw_reply: String) -> Self {
        let verdict = normalize_vqa_reply(&raw_reply);
        Self { question_id, raw_reply, verdict }
    }
}

/// Lowercase, skip leading punctuation and whitespace, then look at the first
/// word: `yes` gives Yes, `no` gives No, anything else is Unparseable.
pub fn normalize_vqa_reply(raw: &str) -> Verdict {
    let lowered = raw.to_lowercase();
    let start = lowered.trim_start_matches(|c: char| !c.is_alphanumeric());
    let word: String = start.chars().take_while(|c| c.is_alphabetic()).collect();
    match word.as_str() {
        "yes" => Verdict::Yes,
        "no" => Verdict::No,
        _ => Verdict::Unparseable,
    }
}
