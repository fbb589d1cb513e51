//! Hierarchical family → genus → species ranking with a language model.
//!
//! Each round sends the candidate names of one rank; accepted names narrow
//! the candidates of the next round. Transports implement
//! [`CompletionClient`]; [`EchoClient`] and [`FixtureClient`] run offline.
mod client;
#[cfg(feature = "http")]
mod http;
mod ledger;
mod prompt;
mod protocol;
mod response;
mod similarity;

pub use client::{
    estimate_tokens, render_candidates, Completion, CompletionClient, CompletionRequest,
    EchoClient, FixtureClient, FixtureEntry, FnClient, RecordingClient,
};
#[cfg(feature = "http")]
pub use http::{HttpClient, API_KEY_ENV, DEFAULT_ENDPOINT};
pub use ledger::{
    known_rates, record_usage, ModelRates, UsageLedger, UsageTotals, KNOWN_RATES, LEDGER_HEADER,
};
pub use prompt::{build_prompt, ClassType, RoundRequest, PROMPT_TEMPLATE};
pub use protocol::{
    classify_all, classify_observation, group_observations, rank_sum, write_zeroshot_submission,
    Chain, Classification, Observation, ProtocolConfig, RoundLog, ZeroShotOutcome,
};
pub use response::{
    parse_candidates, validate_response, RankedCandidate, RoundResponse, TokenUsage,
};
pub use similarity::{best_match, is_match, normalized_similarity, MATCH_THRESHOLD};
