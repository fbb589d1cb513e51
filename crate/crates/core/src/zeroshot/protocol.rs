use std::collections::{BTreeSet, HashMap};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use super::client::{CompletionClient, CompletionRequest};
use super::ledger::{known_rates, ModelRates, UsageLedger};
use super::prompt::{build_prompt, ClassType, RoundRequest};
use super::response::{validate_response, RankedCandidate, RoundResponse, TokenUsage};
use crate::dataio::{LabelSpace, ObservationRecord, TaxonomyTree};
use crate::{Error, Result};

/// Knobs of the three-round protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProtocolConfig {
    pub model: String,
    pub temperature: f64,
    /// How many of a round's ranked items may pass to the next round.
    pub top_k: usize,
    /// Minimum Likert confidence for an item to pass to the next round.
    pub min_confidence: u8,
    pub max_retries: usize,
    /// Independent runs per observation, merged by rank sum.
    pub runs: usize,
    pub concurrency: usize,
    /// Species returned per observation.
    pub final_count: usize,
    /// Overrides the built-in rates for `model`.
    pub rates: Option<ModelRates>,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            model: "google/gemini-2.0-flash-001".into(),
            temperature: 0.2,
            top_k: 20,
            min_confidence: 2,
            max_retries: 2,
            runs: 1,
            concurrency: 4,
            final_count: 10,
            rates: None,
        }
    }
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.top_k == 0 {
            return bad("top_k must be at least 1");
        }
        if !(1..=5).contains(&self.min_confidence) {
            return bad("min_confidence must be between 1 and 5");
        }
        if self.runs == 0 || self.concurrency == 0 || self.final_count == 0 {
            return bad("runs, concurrency and final_count must be positive");
        }
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return bad("temperature must be non-negative");
        }
        Ok(())
    }

    /// Explicit rates, else the built-in ones for the model, else free.
    pub fn effective_rates(&self) -> ModelRates {
        self.rates
            .or_else(|| known_rates(&self.model))
            .unwrap_or(ModelRates {
                input_per_million: 0.0,
                output_per_million: 0.0,
            })
    }
}

/// All images of one observation and its prompt metadata.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub observation_id: String,
    pub image_refs: Vec<String>,
    pub metadata_summary: String,
}

fn metadata_summary(r: &ObservationRecord) -> String {
    [
        ("location", &r.location),
        ("substrate", &r.substrate),
        ("season", &r.season),
    ]
    .iter()
    .filter_map(|(k, v)| v.as_deref().map(|v| format!("{k}: {v}")))
    .collect::<Vec<_>>()
    .join("; ")
}

/// Groups image records by observation id, in order of first appearance.
/// Metadata comes from the first record of each group.
pub fn group_observations(records: &[ObservationRecord]) -> Vec<Observation> {
    let mut index: HashMap<&str, usize> = HashMap::new();
    let mut out: Vec<Observation> = Vec::new();
    for r in records {
        let i = *index.entry(&r.observation_id).or_insert_with(|| {
            out.push(Observation {
                observation_id: r.observation_id.clone(),
                image_refs: Vec::new(),
                metadata_summary: metadata_summary(r),
            });
            out.len() - 1
        });
        if let Some(p) = &r.image_path {
            if !out[i].image_refs.contains(p) {
                out[i].image_refs.push(p.clone());
            }
        }
    }
    out
}

/// One completion issued while classifying an observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundLog {
    pub class_type: ClassType,
    pub run: usize,
    pub attempt: usize,
    pub accepted: bool,
    pub usage: TokenUsage,
    pub cost: f64,
}

/// The accepted sets of one run, round by round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chain {
    pub families: Vec<String>,
    pub genera: Vec<String>,
    pub species: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub observation_id: String,
    /// Ranked species, at most `final_count`.
    pub species: Vec<String>,
    /// True when every run exhausted its retries and the most frequent
    /// training species were returned instead.
    pub fallback: bool,
    pub chains: Vec<Chain>,
    pub rounds: Vec<RoundLog>,
}

struct Runner<'a, C> {
    tree: &'a TaxonomyTree,
    client: &'a C,
    config: &'a ProtocolConfig,
    rates: ModelRates,
}

impl<C: CompletionClient> Runner<'_, C> {
    fn round(
        &self,
        obs: &Observation,
        class_type: ClassType,
        candidates: Vec<String>,
        run: usize,
        log: &mut Vec<RoundLog>,
    ) -> Result<Vec<RankedCandidate>> {
        let req = RoundRequest::new(
            class_type,
            candidates,
            obs.image_refs.clone(),
            obs.metadata_summary.clone(),
        )?;
        let prompt = build_prompt(&req);
        for attempt in 0..=self.config.max_retries {
            let completion = self.client.complete(&CompletionRequest {
                model: self.config.model.clone(),
                class_type,
                prompt: prompt.clone(),
                candidates: req.candidates.clone(),
                image_refs: req.image_refs.clone(),
                metadata_summary: req.metadata_summary.clone(),
                temperature: self.config.temperature,
                attempt,
                run,
            })?;
            let cost = self.rates.cost(completion.usage);
            let resp = RoundResponse::parse(completion.text, completion.usage, cost);
            let verdict = validate_response(&resp, &req.candidates);
            log.push(RoundLog {
                class_type,
                run,
                attempt,
                accepted: verdict.is_ok(),
                usage: resp.usage,
                cost,
            });
            match verdict {
                Ok(v) => return Ok(v),
                Err(Error::RejectedResponse { .. }) => continue,
                Err(e) => return Err(e),
            }
        }
        Err(Error::ExhaustedRetries {
            class_type: class_type.as_str(),
            attempts: self.config.max_retries + 1,
        })
    }

    /// The top items that are confident enough, or the single top item when
    /// none is.
    fn passing(&self, ranked: &[RankedCandidate]) -> Vec<String> {
        let top = &ranked[..ranked.len().min(self.config.top_k)];
        let mut keep: Vec<String> = top
            .iter()
            .filter(|c| c.confidence >= self.config.min_confidence)
            .map(|c| c.name.clone())
            .collect();
        if keep.is_empty() {
            keep.extend(top.first().map(|c| c.name.clone()));
        }
        keep
    }

    fn chain(&self, obs: &Observation, run: usize, log: &mut Vec<RoundLog>) -> Result<Chain> {
        let all_families: Vec<String> = self.tree.families().map(str::to_owned).collect();
        let ranked = self.round(obs, ClassType::Family, all_families, run, log)?;
        let families = self.passing(&ranked);

        let genus_candidates = self.tree.genera_under(families.iter().map(String::as_str));
        let ranked = self.round(obs, ClassType::Genus, genus_candidates, run, log)?;
        let genera = self.passing(&ranked);

        let pool = self.tree.species_under(genera.iter().map(String::as_str));
        let ranked = self.round(obs, ClassType::Species, pool.clone(), run, log)?;
        let n = self.config.final_count;
        let mut species: Vec<String> = ranked.into_iter().take(n).map(|c| c.name).collect();
        if species.len() < n {
            let mut rest: Vec<&String> = pool.iter().filter(|s| !species.contains(s)).collect();
            rest.sort_by(|a, b| {
                self.tree
                    .species_frequency(b)
                    .cmp(&self.tree.species_frequency(a))
                    .then_with(|| a.cmp(b))
            });
            let missing = n - species.len();
            species.extend(rest.into_iter().take(missing).cloned());
        }
        Ok(Chain {
            families,
            genera,
            species,
        })
    }

    fn classify(&self, obs: &Observation) -> Result<Classification> {
        let mut rounds = Vec::new();
        let mut chains = Vec::new();
        for run in 0..self.config.runs {
            match self.chain(obs, run, &mut rounds) {
                Ok(c) => chains.push(c),
                Err(Error::ExhaustedRetries { .. }) => {}
                Err(e) => return Err(e),
            }
        }
        let n = self.config.final_count;
        let (species, fallback) = if chains.is_empty() {
            (
                self.tree
                    .species_by_frequency()
                    .into_iter()
                    .take(n)
                    .collect(),
                true,
            )
        } else {
            (
                rank_sum(chains.iter().map(|c| c.species.as_slice()), n),
                false,
            )
        };
        Ok(Classification {
            observation_id: obs.observation_id.clone(),
            species,
            fallback,
            chains,
            rounds,
        })
    }
}

/// Merges ranked lists by summed rank; an item missing from a list counts
/// as rank `n + 1` there. Ties keep order of first appearance.
pub fn rank_sum<'a>(lists: impl IntoIterator<Item = &'a [String]>, n: usize) -> Vec<String> {
    let lists: Vec<&[String]> = lists.into_iter().collect();
    let mut order: Vec<&String> = Vec::new();
    for l in &lists {
        for s in l.iter() {
            if !order.contains(&s) {
                order.push(s);
            }
        }
    }
    let score = |s: &String| -> usize {
        lists
            .iter()
            .map(|l| l.iter().position(|x| x == s).map_or(n + 1, |p| p + 1))
            .sum()
    };
    let mut scored: Vec<(usize, usize, &String)> = order
        .iter()
        .enumerate()
        .map(|(i, s)| (score(s), i, *s))
        .collect();
    scored.sort();
    scored
        .into_iter()
        .take(n)
        .map(|(_, _, s)| s.clone())
        .collect()
}

/// Runs the family, genus and species rounds for one observation.
///
/// A round whose responses are all rejected ends that run; when no run
/// completes, the most frequent training species are returned with
/// `fallback` set. Transport failures are returned as errors.
pub fn classify_observation<C: CompletionClient>(
    obs: &Observation,
    tree: &TaxonomyTree,
    client: &C,
    config: &ProtocolConfig,
) -> Result<Classification> {
    config.validate()?;
    Runner {
        tree,
        client,
        config,
        rates: config.effective_rates(),
    }
    .classify(obs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroShotOutcome {
    pub results: Vec<Classification>,
    pub ledger: UsageLedger,
}

/// Classifies every observation with at most `config.concurrency` in
/// flight. Results are in input order and the ledger is filled in that
/// order, so output does not depend on scheduling.
pub fn classify_all<C: CompletionClient>(
    observations: &[Observation],
    tree: &TaxonomyTree,
    client: &C,
    config: &ProtocolConfig,
) -> Result<ZeroShotOutcome> {
    config.validate()?;
    let runner = Runner {
        tree,
        client,
        config,
        rates: config.effective_rates(),
    };
    let next = AtomicUsize::new(0);
    let workers = config.concurrency.min(observations.len()).max(1);
    let mut slots: Vec<Option<Result<Classification>>> =
        (0..observations.len()).map(|_| None).collect();
    let done: Vec<Vec<(usize, Result<Classification>)>> =
        if cfg!(target_arch = "wasm32") || workers == 1 {
            vec![observations
                .iter()
                .enumerate()
                .map(|(i, o)| (i, runner.classify(o)))
                .collect()]
        } else {
            std::thread::scope(|s| {
                let handles: Vec<_> = (0..workers)
                    .map(|_| {
                        s.spawn(|| {
                            let mut mine = Vec::new();
                            loop {
                                let i = next.fetch_add(1, Ordering::Relaxed);
                                let Some(o) = observations.get(i) else { break };
                                mine.push((i, runner.classify(o)));
                            }
                            mine
                        })
                    })
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("worker panicked"))
                    .collect()
            })
        };
    for (i, r) in done.into_iter().flatten() {
        slots[i] = Some(r);
    }
    let mut ledger = UsageLedger::default();
    let mut results = Vec::with_capacity(observations.len());
    for r in slots {
        let c = r.expect("every observation classified")?;
        for round in &c.rounds {
            ledger.record(&config.model, round.usage, round.cost);
        }
        results.push(c);
    }
    Ok(ZeroShotOutcome { results, ledger })
}

/// Writes `observation_id,rank1..rankN` with the category id of each
/// ranked species; short lists leave trailing cells empty.
pub fn write_zeroshot_submission(
    results: &[Classification],
    tree: &TaxonomyTree,
    labels: &LabelSpace,
    n: usize,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    let mut header = vec!["observation_id".to_string()];
    header.extend((1..=n).map(|r| format!("rank{r}")));
    w.write_record(&header).map_err(|e| Error::csv(path, e))?;
    for c in results {
        let mut row = vec![c.observation_id.clone()];
        let mut seen = BTreeSet::new();
        for s in &c.species {
            let class = tree.class_of_species(s).ok_or_else(|| {
                Error::InconsistentTaxonomy(format!("species {s:?} not in training taxonomy"))
            })?;
            if seen.insert(class) && row.len() <= n {
                row.push(labels.name(class).to_string());
            }
        }
        row.resize(n + 1, String::new());
        w.write_record(&row).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
