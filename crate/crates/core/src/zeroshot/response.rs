use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::similarity::{best_match, is_match};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankedCandidate {
    pub name: String,
    /// Likert confidence, 1 to 5.
    pub confidence: u8,
    #[serde(default)]
    pub reason: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub input: u64,
    pub output: u64,
}

impl TokenUsage {
    pub fn total(self) -> u64 {
        self.input + self.output
    }
}

/// A parsed completion for one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundResponse {
    pub candidates: Vec<RankedCandidate>,
    /// Items present in the completion that could not be read as a
    /// candidate (no name, confidence outside 1..=5).
    pub malformed: usize,
    pub raw_text: String,
    pub usage: TokenUsage,
    pub cost: f64,
}

impl RoundResponse {
    pub fn parse(raw_text: impl Into<String>, usage: TokenUsage, cost: f64) -> Self {
        let raw_text = raw_text.into();
        let (candidates, malformed) = parse_candidates(&raw_text);
        Self {
            candidates,
            malformed,
            raw_text,
            usage,
            cost,
        }
    }

    pub fn total_items(&self) -> usize {
        self.candidates.len() + self.malformed
    }
}

fn strip_fences(text: &str) -> &str {
    let t = text.trim();
    let Some(rest) = t.strip_prefix("```") else {
        return t;
    };
    let rest = rest.split_once('\n').map_or("", |(_, body)| body);
    rest.trim_end().strip_suffix("```").unwrap_or(rest).trim()
}

fn read_item(v: &Value) -> Option<RankedCandidate> {
    let name = v.get("name")?.as_str()?.trim();
    let confidence = v.get("confidence")?.as_u64()?;
    if name.is_empty() || !(1..=5).contains(&confidence) {
        return None;
    }
    Some(RankedCandidate {
        name: name.to_string(),
        confidence: confidence as u8,
        reason: v
            .get("reason")
            .and_then(Value::as_str)
            .unwrap_or_default()
            .to_string(),
    })
}

/// Reads `{"labels": [...]}` or a bare array of `{name, confidence, reason}`
/// objects, optionally inside a code fence. Returns the well-formed items
/// in order and the count of the rest; unreadable text yields nothing.
pub fn parse_candidates(text: &str) -> (Vec<RankedCandidate>, usize) {
    let Ok(value) = serde_json::from_str::<Value>(strip_fences(text)) else {
        return (Vec::new(), 0);
    };
    let items = match &value {
        Value::Array(a) => a,
        Value::Object(o) => match o.get("labels") {
            Some(Value::Array(a)) => a,
            _ => return (Vec::new(), 0),
        },
        _ => return (Vec::new(), 0),
    };
    let mut good = Vec::new();
    let mut bad = 0;
    for item in items {
        match read_item(item) {
            Some(c) => good.push(c),
            None => bad += 1,
        }
    }
    (good, bad)
}

/// Matches every returned name to its closest candidate. The response is
/// accepted when at least half its items match; accepted items are
/// replaced by their canonical candidate, in rank order, without repeats.
pub fn validate_response(
    resp: &RoundResponse,
    candidates: &[String],
) -> Result<Vec<RankedCandidate>> {
    if candidates.is_empty() {
        return Err(Error::InvalidConfig("empty candidate list".into()));
    }
    let total = resp.total_items();
    let mut valid = 0;
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for c in &resp.candidates {
        let Some((canon, sim)) = best_match(&c.name, candidates) else {
            continue;
        };
        if !is_match(sim) {
            continue;
        }
        valid += 1;
        if seen.insert(canon) {
            out.push(RankedCandidate {
                name: canon.to_string(),
                ..c.clone()
            });
        }
    }
    if total == 0 || valid < total.div_ceil(2) {
        return Err(Error::RejectedResponse { valid, total });
    }
    Ok(out)
}
