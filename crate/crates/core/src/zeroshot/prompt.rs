use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// The ranking instruction sent with every round; `{class_type}` is
/// substituted with the round's rank.
pub const PROMPT_TEMPLATE: &str =
    "Accurately identify and assign the correct {class_type} label to each image of
fungi, protozoa, or chromista utilizing all provided image views and associated
metadata (location, substrate, season) to ensure precision, especially for
fine-grained distinctions. Choose the top twenty most relevant labels ranked in
order from the available class labels, a confidence on the Likert scale between
1-5 on not-confident to confident and provide short reasoning (in under 50
words) for your selection.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassType {
    Family,
    Genus,
    Species,
}

impl ClassType {
    pub const ROUNDS: [ClassType; 3] = [ClassType::Family, ClassType::Genus, ClassType::Species];

    pub fn as_str(self) -> &'static str {
        match self {
            ClassType::Family => "family",
            ClassType::Genus => "genus",
            ClassType::Species => "species",
        }
    }
}

impl std::fmt::Display for ClassType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One round of ranking for one observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRequest {
    pub class_type: ClassType,
    pub candidates: Vec<String>,
    pub image_refs: Vec<String>,
    pub metadata_summary: String,
}

impl RoundRequest {
    /// Drops repeated candidates (keeping the first) and rejects an empty
    /// list or blank names.
    pub fn new(
        class_type: ClassType,
        candidates: impl IntoIterator<Item = String>,
        image_refs: Vec<String>,
        metadata_summary: impl Into<String>,
    ) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        let mut list = Vec::new();
        for c in candidates {
            if c.trim().is_empty() {
                return Err(Error::InvalidConfig(format!(
                    "blank {class_type} candidate"
                )));
            }
            if seen.insert(c.clone()) {
                list.push(c);
            }
        }
        if list.is_empty() {
            return Err(Error::InvalidConfig(format!("no {class_type} candidates")));
        }
        Ok(Self {
            class_type,
            candidates: list,
            image_refs,
            metadata_summary: metadata_summary.into(),
        })
    }
}

fn yaml_scalar(s: &str) -> String {
    let plain = !s.is_empty()
        && s == s.trim()
        && !s.starts_with(|c: char| "-?:,[]{}#&*!|>'\"%@`".contains(c))
        && !s.contains(": ")
        && !s.contains(" #")
        && !s.chars().any(char::is_control)
        && !matches!(
            s.to_ascii_lowercase().as_str(),
            "null" | "~" | "true" | "false" | "yes" | "no" | "on" | "off"
        )
        && s.parse::<f64>().is_err();
    if plain {
        s.to_string()
    } else {
        serde_json::to_string(s).expect("string serializes")
    }
}

/// The instruction for the round followed by the candidates as a YAML
/// sequence, one `- name` per line.
pub fn build_prompt(req: &RoundRequest) -> String {
    let list: Vec<String> = req
        .candidates
        .iter()
        .map(|c| format!("- {}", yaml_scalar(c)))
        .collect();
    format!(
        "{}\n\n{}",
        PROMPT_TEMPLATE.replace("{class_type}", req.class_type.as_str()),
        list.join("\n")
    )
}
