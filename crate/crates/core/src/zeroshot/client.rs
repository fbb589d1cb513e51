use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::prompt::ClassType;
use super::response::{RankedCandidate, TokenUsage};
use crate::{Error, Result};

/// Everything a transport needs to issue one completion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub model: String,
    pub class_type: ClassType,
    pub prompt: String,
    pub candidates: Vec<String>,
    pub image_refs: Vec<String>,
    pub metadata_summary: String,
    pub temperature: f64,
    /// Zero-based retry counter within the round.
    pub attempt: usize,
    /// Zero-based index of the aggregation run.
    pub run: usize,
}

impl CompletionRequest {
    /// Hex SHA-256 of the request's JSON form; keys fixture transcripts.
    pub fn digest(&self) -> String {
        let json = serde_json::to_string(self).expect("request serializes");
        Sha256::digest(json.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    pub usage: TokenUsage,
}

pub trait CompletionClient: Send + Sync {
    fn complete(&self, request: &CompletionRequest) -> Result<Completion>;
}

impl<C: CompletionClient + ?Sized> CompletionClient for &C {
    fn complete(&self, request: &CompletionRequest) -> Result<Completion> {
        (**self).complete(request)
    }
}

impl<C: CompletionClient + ?Sized> CompletionClient for Box<C> {
    fn complete(&self, request: &CompletionRequest) -> Result<Completion> {
        (**self).complete(request)
    }
}

/// Rough token count used by offline transports: one per four bytes.
pub fn estimate_tokens(text: &str) -> u64 {
    text.len().div_ceil(4) as u64
}

/// Serializes candidates the way a structured-output model answers.
pub fn render_candidates(candidates: &[RankedCandidate]) -> String {
    serde_json::json!({ "labels": candidates }).to_string()
}

/// Offline transport that ranks the first `take` candidates in list order,
/// all with confidence 5.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EchoClient {
    pub take: usize,
}

impl Default for EchoClient {
    fn default() -> Self {
        Self { take: 20 }
    }
}

impl CompletionClient for EchoClient {
    fn complete(&self, request: &CompletionRequest) -> Result<Completion> {
        let picked: Vec<RankedCandidate> = request
            .candidates
            .iter()
            .take(self.take)
            .map(|c| RankedCandidate {
                name: c.clone(),
                confidence: 5,
                reason: String::new(),
            })
            .collect();
        let text = render_candidates(&picked);
        Ok(Completion {
            usage: TokenUsage {
                input: estimate_tokens(&request.prompt)
                    + estimate_tokens(&request.metadata_summary),
                output: estimate_tokens(&text),
            },
            text,
        })
    }
}

/// Wraps a closure as a transport; handy for scripted tests.
pub struct FnClient<F>(pub F);

impl<F> CompletionClient for FnClient<F>
where
    F: Fn(&CompletionRequest) -> Result<Completion> + Send + Sync,
{
    fn complete(&self, request: &CompletionRequest) -> Result<Completion> {
        (self.0)(request)
    }
}

/// One line of a fixture transcript.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureEntry {
    pub digest: String,
    pub response: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_tokens: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_tokens: Option<u64>,
}

/// Replays canned completions keyed by request digest.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FixtureClient {
    entries: HashMap<String, FixtureEntry>,
}

impl FixtureClient {
    pub fn new(entries: impl IntoIterator<Item = FixtureEntry>) -> Self {
        Self {
            entries: entries.into_iter().map(|e| (e.digest.clone(), e)).collect(),
        }
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut entries = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            entries.push(
                serde_json::from_str(&line).map_err(|e| Error::SchemaViolation {
                    line: i + 1,
                    message: e.to_string(),
                })?,
            );
        }
        Ok(Self::new(entries))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl CompletionClient for FixtureClient {
    fn complete(&self, request: &CompletionRequest) -> Result<Completion> {
        let digest = request.digest();
        let e = self.entries.get(&digest).ok_or_else(|| {
            Error::TransportFailure(format!("no fixture entry for request {digest}"))
        })?;
        Ok(Completion {
            usage: TokenUsage {
                input: e
                    .input_tokens
                    .unwrap_or_else(|| estimate_tokens(&request.prompt)),
                output: e
                    .output_tokens
                    .unwrap_or_else(|| estimate_tokens(&e.response)),
            },
            text: e.response.clone(),
        })
    }
}

/// Passes requests through and keeps every exchange for replay.
pub struct RecordingClient<C> {
    inner: C,
    entries: Mutex<Vec<FixtureEntry>>,
}

impl<C: CompletionClient> RecordingClient<C> {
    pub fn new(inner: C) -> Self {
        Self {
            inner,
            entries: Mutex::new(Vec::new()),
        }
    }

    /// Recorded exchanges sorted by digest.
    pub fn entries(&self) -> Vec<FixtureEntry> {
        let mut v = self.entries.lock().expect("recorder lock").clone();
        v.sort_by(|a, b| a.digest.cmp(&b.digest));
        v.dedup_by(|a, b| a.digest == b.digest);
        v
    }

    pub fn write_fixture(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = Vec::new();
        for e in self.entries() {
            serde_json::to_writer(&mut out, &e)?;
            out.push(b'\n');
        }
        std::fs::File::create(path)
            .and_then(|mut f| f.write_all(&out))
            .map_err(|e| Error::io(path, e))
    }
}

impl<C: CompletionClient> CompletionClient for RecordingClient<C> {
    fn complete(&self, request: &CompletionRequest) -> Result<Completion> {
        let c = self.inner.complete(request)?;
        self.entries
            .lock()
            .expect("recorder lock")
            .push(FixtureEntry {
                digest: request.digest(),
                response: c.text.clone(),
                input_tokens: Some(c.usage.input),
                output_tokens: Some(c.usage.output),
            });
        Ok(c)
    }
}
