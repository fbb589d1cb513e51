/// Minimum similarity for a returned name to count as a candidate match.
pub const MATCH_THRESHOLD: f64 = 0.9;

fn fold(s: &str) -> String {
    s.trim().to_lowercase()
}

/// `1 − levenshtein(a, b) / max(|a|, |b|)` over trimmed, case-folded
/// strings, counted in chars. Two empty strings are identical.
pub fn normalized_similarity(a: &str, b: &str) -> f64 {
    strsim::normalized_levenshtein(&fold(a), &fold(b))
}

/// The candidate closest to `name`, first in candidate order on ties.
pub fn best_match<'a>(name: &str, candidates: &'a [String]) -> Option<(&'a str, f64)> {
    let folded = fold(name);
    let mut best: Option<(&str, f64)> = None;
    for c in candidates {
        let s = strsim::normalized_levenshtein(&folded, &fold(c));
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((c, s));
        }
    }
    best
}

/// Whether a similarity clears [`MATCH_THRESHOLD`], allowing for rounding.
pub fn is_match(similarity: f64) -> bool {
    similarity >= MATCH_THRESHOLD - 1e-12
}
