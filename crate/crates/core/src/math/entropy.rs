//! Predictive entropy and the entropy-normalized commit confidence.

use std::sync::Arc;

use super::dist::{validate_probs, TokenDistribution, Vocabulary};
use super::MathError;
use crate::policy::ConnectiveCandidate;

/// Shannon entropy in nats of a validated distribution. `0 ln 0` is taken as 0.
pub fn entropy(dist: &TokenDistribution) -> f64 {
    entropy_of(dist.probs())
}

/// Entropy of a raw probability slice after validation.
pub fn entropy_checked(probs: &[f64]) -> Result<f64, MathError> {
    validate_probs(probs, None)?;
    Ok(entropy_of(probs))
}

fn entropy_of(probs: &[f64]) -> f64 {
    let h: f64 = probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.ln())
        .sum();
    // rounding can leave a tiny negative value for point masses
    h.max(0.0)
}

/// A distribution with entropy `h` nats that puts its largest mass on `token`
/// and spreads the rest uniformly. Fails when `h` exceeds `ln |V|`.
pub fn distribution_with_entropy(
    vocab: Arc<Vocabulary>,
    token: &str,
    h: f64,
) -> Result<TokenDistribution, MathError> {
    let n = vocab.size();
    let idx = vocab
        .index_of(token)
        .ok_or_else(|| MathError::UnknownToken(token.to_string()))?;
    if !h.is_finite() || h < 0.0 || h > (n as f64).ln() + 1e-12 {
        return Err(MathError::NonFinite(h));
    }
    if n == 1 || h == 0.0 {
        return TokenDistribution::point_mass(vocab, token);
    }
    let family = |p: f64| {
        let mut v = vec![(1.0 - p) / (n - 1) as f64; n];
        v[idx] = p;
        v
    };
    // entropy decreases monotonically in p on [1/n, 1]
    let (mut lo, mut hi) = (1.0 / n as f64, 1.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if entropy_of(&family(mid)) > h {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut v = family(lo);
    let rest: f64 = v
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != idx)
        .map(|(_, p)| p)
        .sum();
    v[idx] = 1.0 - rest;
    TokenDistribution::new(vocab, v)
}

/// Mean per-token entropy over the non-marker tokens of a candidate.
pub fn mean_connective_entropy(candidate: &ConnectiveCandidate) -> Result<f64, MathError> {
    let (sum, n) = candidate
        .tokens()
        .iter()
        .filter(|t| !t.is_marker)
        .fold((0.0, 0usize), |(s, n), t| (s + entropy(&t.dist), n + 1));
    if n == 0 {
        return Err(MathError::EmptyCandidate);
    }
    Ok(sum / n as f64)
}

/// `1 - sum(mean_entropy_i) / (m * h_max)`, clamped to `[0, 1]`.
pub fn confidence(candidates: &[ConnectiveCandidate], h_max: f64) -> Result<f64, MathError> {
    let entropies = candidates
        .iter()
        .map(mean_connective_entropy)
        .collect::<Result<Vec<_>, _>>()?;
    confidence_from_entropies(&entropies, h_max)
}

/// Same as [`confidence`] but over precomputed mean entropies.
pub fn confidence_from_entropies(mean_entropies: &[f64], h_max: f64) -> Result<f64, MathError> {
    if mean_entropies.is_empty() {
        return Err(MathError::NoCandidates);
    }
    if !(h_max > 0.0) || !h_max.is_finite() {
        return Err(MathError::InvalidHMax(h_max));
    }
    let m = mean_entropies.len() as f64;
    let total: f64 = mean_entropies.iter().sum();
    Ok((1.0 - total / (m * h_max)).clamp(0.0, 1.0))
}
