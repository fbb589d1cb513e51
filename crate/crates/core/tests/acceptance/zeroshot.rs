use std::collections::BTreeSet;
use std::path::PathBuf;

use longtail::dataio::{
    build_label_space, build_taxonomy, generate_holdout, generate_synthetic, Split, SyntheticSpec,
    TaxonomyTree,
};
use longtail::zeroshot::{
    classify_all, classify_observation, group_observations, is_match, normalized_similarity,
    render_candidates, validate_response, Classification, Completion, CompletionRequest,
    FixtureClient, FnClient, Observation, ProtocolConfig, RankedCandidate, RecordingClient,
    RoundResponse, TokenUsage,
};
use longtail::{rng, Error};
use rand::seq::IndexedRandom;
use rand::Rng;

use crate::{ensure, tol, Outcome};

fn world() -> (TaxonomyTree, Vec<Observation>) {
    let spec = SyntheticSpec {
        num_classes: 60,
        dim: 4,
        head_count: 12,
        tail_count: 1,
        cluster_spread: 0.5,
        seed: 8,
    };
    let (_, records) = generate_synthetic(&spec).unwrap();
    let labels = build_label_space(&records).unwrap();
    let tree = build_taxonomy(&records, &labels).unwrap();
    let (_, held) = generate_holdout(&spec, 1, Split::Test, 2).unwrap();
    (tree, group_observations(&held))
}

fn fixture_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/zeroshot_transcript.jsonl")
}

/// The transport the checked-in transcript was recorded from: the first
/// genus attempt of every run is garbage, otherwise the first three
/// candidates come back with confidences 5, 3 and 1.
fn scripted(req: &CompletionRequest) -> longtail::Result<Completion> {
    let text = if req.class_type.as_str() == "genus" && req.attempt == 0 {
        "I am not sure which genus this is.".to_string()
    } else {
        let picked: Vec<RankedCandidate> = req
            .candidates
            .iter()
            .skip(req.run)
            .zip([5, 3, 1])
            .map(|(c, confidence)| RankedCandidate {
                name: c.clone(),
                confidence,
                reason: "cap shape".into(),
            })
            .collect();
        render_candidates(&picked)
    };
    Ok(Completion {
        usage: TokenUsage {
            input: 100 + req.candidates.len() as u64,
            output: text.len() as u64 / 4,
        },
        text,
    })
}

fn json(results: &[Classification]) -> Vec<u8> {
    serde_json::to_vec(results).unwrap()
}

fn fixture_determinism(
    tree: &TaxonomyTree,
    observations: &[Observation],
) -> Result<String, String> {
    let obs = &observations[..6];
    let config = ProtocolConfig {
        runs: 2,
        ..ProtocolConfig::default()
    };
    if std::env::var_os("LONGTAIL_REGEN_FIXTURES").is_some() {
        let rec = RecordingClient::new(FnClient(scripted));
        classify_all(obs, tree, &rec, &config).map_err(|e| e.to_string())?;
        rec.write_fixture(fixture_path())
            .map_err(|e| e.to_string())?;
    }
    let fixture = FixtureClient::from_path(fixture_path()).map_err(|e| e.to_string())?;
    let once = |c: &ProtocolConfig| -> Result<Vec<u8>, String> {
        let r: longtail::Result<Vec<Classification>> = obs
            .iter()
            .map(|o| classify_observation(o, tree, &fixture, c))
            .collect();
        Ok(json(&r.map_err(|e| e.to_string())?))
    };
    let first = once(&config)?;
    ensure(once(&config)? == first, || "replays differ".into())?;
    for concurrency in [1, 3, 4] {
        let c = ProtocolConfig {
            concurrency,
            ..config.clone()
        };
        let all = classify_all(obs, tree, &fixture, &c).map_err(|e| e.to_string())?;
        ensure(json(&all.results) == first, || {
            format!("classify_all with concurrency {concurrency} differs")
        })?;
    }
    let live: longtail::Result<Vec<Classification>> = obs
        .iter()
        .map(|o| classify_observation(o, tree, &FnClient(scripted), &config))
        .collect();
    ensure(json(&live.map_err(|e| e.to_string())?) == first, || {
        "transcript replay differs from the scripted transport".into()
    })?;
    Ok(format!(
        "{} fixture entries, {} bytes identical",
        fixture.len(),
        first.len()
    ))
}

fn digest_seed(req: &CompletionRequest, salt: u64) -> u64 {
    u64::from_str_radix(&req.digest()[..16], 16).unwrap() ^ salt
}

/// A mock that mixes real candidates, near-misses, garbage and malformed
/// items, sometimes enough to be rejected.
fn noisy(req: &CompletionRequest, salt: u64) -> longtail::Result<Completion> {
    let mut r = rng::stream(digest_seed(req, salt), &[]);
    let n = r.random_range(1..=req.candidates.len().min(25) + 3);
    let garbage_rate = [0.0, 0.2, 0.6, 0.97][r.random_range(0..4)];
    let items: Vec<String> = (0..n)
        .map(|i| {
            let conf = r.random_range(1..=5u8);
            let name = if r.random_bool(garbage_rate) {
                format!("zz-unknown-{i}")
            } else {
                let c = req.candidates.choose(&mut r).unwrap();
                if r.random_bool(0.3) {
                    format!("  {} ", c.to_uppercase())
                } else {
                    c.clone()
                }
            };
            if r.random_bool(0.05) {
                format!(r#"{{"name":"{name}","confidence":9}}"#)
            } else {
                format!(r#"{{"name":"{name}","confidence":{conf},"reason":"r"}}"#)
            }
        })
        .collect();
    Ok(Completion {
        text: format!(r#"{{"labels":[{}]}}"#, items.join(",")),
        usage: TokenUsage {
            input: 10,
            output: 5,
        },
    })
}

fn set(v: &[String]) -> BTreeSet<&str> {
    v.iter().map(String::as_str).collect()
}

fn invariants(
    c: &Classification,
    tree: &TaxonomyTree,
    config: &ProtocolConfig,
) -> Result<(), String> {
    let id = &c.observation_id;
    let n = config.final_count;
    ensure(c.species.len() <= n, || {
        format!("{id}: {} species", c.species.len())
    })?;
    ensure(set(&c.species).len() == c.species.len(), || {
        format!("{id}: repeated species")
    })?;
    ensure(c.species.iter().all(|s| tree.contains_species(s)), || {
        format!("{id}: species outside the taxonomy")
    })?;
    if c.fallback {
        let top: Vec<String> = tree.species_by_frequency().into_iter().take(n).collect();
        return ensure(c.chains.is_empty() && c.species == top, || {
            format!("{id}: fallback is not the frequency ranking")
        });
    }
    let mut reachable = BTreeSet::new();
    for chain in &c.chains {
        let families: BTreeSet<&str> = tree.families().collect();
        ensure(
            !chain.families.is_empty() && chain.families.len() <= config.top_k,
            || format!("{id}: {} families kept", chain.families.len()),
        )?;
        ensure(set(&chain.families).is_subset(&families), || {
            format!("{id}: unknown family")
        })?;
        let genera = tree.genera_under(chain.families.iter().map(String::as_str));
        ensure(set(&chain.genera).is_subset(&set(&genera)), || {
            format!("{id}: genus outside the accepted families")
        })?;
        let species = tree.species_under(chain.genera.iter().map(String::as_str));
        ensure(set(&chain.species).is_subset(&set(&species)), || {
            format!("{id}: species outside the accepted genera")
        })?;
        ensure(chain.species.len() == n.min(species.len()), || {
            format!("{id}: chain holds {} species", chain.species.len())
        })?;
        reachable.extend(chain.species.iter().map(String::as_str));
    }
    ensure(set(&c.species).is_subset(&reachable), || {
        format!("{id}: output not from any chain")
    })?;
    let attempts = config.max_retries + 1;
    ensure(c.rounds.iter().all(|r| r.attempt < attempts), || {
        format!("{id}: too many attempts")
    })
}

fn randomized(tree: &TaxonomyTree, observations: &[Observation]) -> Result<String, String> {
    let mut r = rng::stream(5, &[]);
    let (mut fallbacks, mut retried) = (0, 0);
    for i in 0..tol::ZEROSHOT_MOCK_RUNS {
        let config = ProtocolConfig {
            runs: r.random_range(1..=3),
            top_k: r.random_range(1..=20),
            min_confidence: r.random_range(1..=5),
            ..ProtocolConfig::default()
        };
        let salt = r.random();
        let obs = &observations[i % observations.len()];
        let client = FnClient(move |req: &CompletionRequest| noisy(req, salt));
        let c = classify_observation(obs, tree, &client, &config).map_err(|e| e.to_string())?;
        invariants(&c, tree, &config).map_err(|e| format!("mock run {i}: {e}"))?;
        fallbacks += usize::from(c.fallback);
        retried += usize::from(c.rounds.iter().any(|x| x.attempt > 0));
    }
    Ok(format!(
        "{} mock runs ({fallbacks} fallbacks, {retried} with retries)",
        tol::ZEROSHOT_MOCK_RUNS
    ))
}

fn half_boundary() -> Result<String, String> {
    let candidates: Vec<String> = (0..20).map(|i| format!("Genus{i:04}")).collect();
    let response = |valid: usize| {
        let items: Vec<String> = (0..20)
            .map(|i| {
                let name = if i < valid {
                    candidates[i].clone()
                } else {
                    format!("unrelated label {i}")
                };
                format!(r#"{{"name":"{name}","confidence":4}}"#)
            })
            .collect();
        RoundResponse::parse(format!("[{}]", items.join(",")), TokenUsage::default(), 0.0)
    };
    let ten = validate_response(&response(10), &candidates).map_err(|e| e.to_string())?;
    ensure(ten.len() == 10, || format!("10 of 20 kept {}", ten.len()))?;
    match validate_response(&response(9), &candidates) {
        Err(Error::RejectedResponse {
            valid: 9,
            total: 20,
        }) => {}
        other => return Err(format!("9 of 20 gave {other:?}")),
    }
    Ok(String::new())
}

fn similarity_boundary() -> Result<String, String> {
    let cases = [
        ("Amanitacea", "Amanitaceb", true),
        ("Amanitacea", "Amanitacbb", false),
        ("Cortinarius violacea", "Cortinarius violacxx", true),
        ("Cortinarius violacea", "CORTINARIUS VIOLACXX", true),
        ("Cortinarius violacea", "Cortinarius violaxxx", false),
    ];
    for (a, b, accept) in cases {
        let s = normalized_similarity(a, b);
        ensure(is_match(s) == accept, || {
            format!("{a:?} vs {b:?}: similarity {s}")
        })?;
    }
    let s = normalized_similarity("Amanitacea", "Amanitaceb");
    ensure(s == 0.9, || format!("one edit in ten gave {s}"))?;
    let candidates = vec!["Amanitacea".to_string(), "Boletaceae".to_string()];
    let resp = RoundResponse::parse(
        r#"[{"name":"amanitaceb","confidence":3},{"name":"Boletacexx","confidence":3}]"#,
        TokenUsage::default(),
        0.0,
    );
    let kept = validate_response(&resp, &candidates).map_err(|e| e.to_string())?;
    ensure(kept.len() == 1 && kept[0].name == "Amanitacea", || {
        format!("canonicalized to {kept:?}")
    })?;
    Ok(String::new())
}

pub fn check() -> Outcome {
    let (tree, observations) = world();
    let fixture = fixture_determinism(&tree, &observations)?;
    let random = randomized(&tree, &observations)?;
    half_boundary()?;
    similarity_boundary()?;
    Ok(format!(
        "{fixture}; {random}; 10/20 accepted, 9/20 rejected; similarity 0.9 accepted, 0.8 rejected"
    ))
}
