use std::collections::HashMap;
use std::sync::Arc;

use super::MathError;

/// Absolute tolerance on the total mass of a distribution.
pub const MASS_TOLERANCE: f64 = 1e-9;

/// Ordered set of distinct tokens with a bijective index mapping.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn new<I, S>(tokens: I) -> Result<Self, MathError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let tokens: Vec<String> = tokens.into_iter().map(Into::into).collect();
        if tokens.is_empty() {
            return Err(MathError::EmptyVocabulary);
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(MathError::DuplicateToken(t.clone()));
            }
        }
        Ok(Self { tokens, index })
    }

    pub fn size(&self) -> usize {
        self.tokens.len()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, index: usize) -> Option<&str> {
        self.tokens.get(index).map(String::as_str)
    }
}

/// A next-token probability distribution over a shared [`Vocabulary`].
#[derive(Debug, Clone, PartialEq)]
pub struct TokenDistribution {
    vocab: Arc<Vocabulary>,
    probs: Vec<f64>,
}

impl TokenDistribution {
    /// Validates length, non-negativity and unit mass.
    pub fn new(vocab: Arc<Vocabulary>, probs: Vec<f64>) -> Result<Self, MathError> {
        validate_probs(&probs, Some(vocab.size()))?;
        Ok(Self { vocab, probs })
    }

    /// Puts all mass on `token`.
    pub fn point_mass(vocab: Arc<Vocabulary>, token: &str) -> Result<Self, MathError> {
        let idx = vocab
            .index_of(token)
            .ok_or_else(|| MathError::UnknownToken(token.to_string()))?;
        let mut probs = vec![0.0; vocab.size()];
        probs[idx] = 1.0;
        Ok(Self { vocab, probs })
    }

    pub fn uniform(vocab: Arc<Vocabulary>) -> Self {
        let n = vocab.size();
        Self {
            probs: vec![1.0 / n as f64; n],
            vocab,
        }
    }

    pub fn vocab(&self) -> &Arc<Vocabulary> {
        &self.vocab
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob_of(&self, token: &str) -> Result<f64, MathError> {
        self.vocab
            .index_of(token)
            .map(|i| self.probs[i])
            .ok_or_else(|| MathError::UnknownToken(token.to_string()))
    }
}

/// Checks that `probs` is a proper probability vector.
pub(crate) fn validate_probs(probs: &[f64], expected_len: Option<usize>) -> Result<(), MathError> {
    if let Some(n) = expected_len {
        if probs.len() != n {
            return Err(MathError::LengthMismatch {
                expected: n,
                found: probs.len(),
            });
        }
    }
    if probs.is_empty() {
        return Err(MathError::EmptyDistribution);
    }
    for &p in probs {
        if !p.is_finite() || !(0.0..=1.0 + MASS_TOLERANCE).contains(&p) {
            return Err(MathError::InvalidProbability(p));
        }
    }
    let mass: f64 = probs.iter().sum();
    if (mass - 1.0).abs() > MASS_TOLERANCE {
        return Err(MathError::MassNotOne(mass));
    }
    Ok(())
}
