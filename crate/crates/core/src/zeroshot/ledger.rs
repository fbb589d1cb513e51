use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::response::{RoundResponse, TokenUsage};
use crate::{Error, Result};

/// US dollars per million tokens.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelRates {
    pub input_per_million: f64,
    pub output_per_million: f64,
}

impl ModelRates {
    pub fn cost(&self, usage: TokenUsage) -> f64 {
        (usage.input as f64 * self.input_per_million
            + usage.output as f64 * self.output_per_million)
            / 1e6
    }
}

/// Published rates for the models the protocol was run with.
pub const KNOWN_RATES: [(&str, ModelRates); 4] = [
    ("google/gemini-2.0-flash-001", rates(0.10, 0.40)),
    ("openai/gpt-4.1-mini-2025-04-14", rates(0.40, 1.60)),
    ("google/gemini-2.5-flash-preview-04-17", rates(0.15, 0.60)),
    ("mistralai/mistral-medium-3", rates(0.40, 2.00)),
];

const fn rates(input_per_million: f64, output_per_million: f64) -> ModelRates {
    ModelRates {
        input_per_million,
        output_per_million,
    }
}

pub fn known_rates(model: &str) -> Option<ModelRates> {
    KNOWN_RATES
        .iter()
        .find(|(m, _)| *m == model)
        .map(|&(_, r)| r)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct UsageTotals {
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub requests: u64,
    pub cost: f64,
}

/// Per-model usage, accumulated one response at a time.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct UsageLedger {
    pub models: BTreeMap<String, UsageTotals>,
}

pub const LEDGER_HEADER: [&str; 4] = [
    "Model Name",
    "Total Tokens (M)",
    "Total Requests (K)",
    "Total Cost ($)",
];

impl UsageLedger {
    pub fn record(&mut self, model: &str, usage: TokenUsage, cost: f64) {
        let t = self.models.entry(model.to_string()).or_default();
        t.input_tokens += usage.input;
        t.output_tokens += usage.output;
        t.requests += 1;
        t.cost += cost;
    }

    pub fn merge(&mut self, other: &UsageLedger) {
        for (model, o) in &other.models {
            let t = self.models.entry(model.clone()).or_default();
            t.input_tokens += o.input_tokens;
            t.output_tokens += o.output_tokens;
            t.requests += o.requests;
            t.cost += o.cost;
        }
    }

    pub fn totals(&self, model: &str) -> Option<&UsageTotals> {
        self.models.get(model)
    }

    /// One row per model: tokens in millions, requests in thousands, cost.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
        w.write_record(LEDGER_HEADER)
            .map_err(|e| Error::csv(path, e))?;
        for (model, t) in &self.models {
            let tokens = (t.input_tokens + t.output_tokens) as f64 / 1e6;
            w.write_record([
                model.clone(),
                format!("{tokens:.6}"),
                format!("{:.3}", t.requests as f64 / 1e3),
                format!("{:.6}", t.cost),
            ])
            .map_err(|e| Error::csv(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

pub fn record_usage(ledger: &mut UsageLedger, resp: &RoundResponse, model: &str) {
    ledger.record(model, resp.usage, resp.cost);
}
