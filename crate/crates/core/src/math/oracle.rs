//! Next-token probability oracles.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;
use std::sync::Arc;

use serde::Deserialize;

use super::dist::{validate_probs, TokenDistribution, Vocabulary};
use super::MathError;

/// Which model an oracle stands in for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelRole {
    /// Trained small model.
    Small,
    /// Pretrained small model before adaptation.
    SmallBase,
    /// Large model.
    Large,
}

/// Deterministic source of next-token distributions.
pub trait ProbabilityOracle: Send + Sync {
    fn role(&self) -> ModelRole;

    fn vocab(&self) -> &Arc<Vocabulary>;

    /// Distribution over the next token given `context`.
    fn next(&self, context: &[String]) -> Result<TokenDistribution, MathError>;
}

/// Oracle backed by a table of `context -> distribution` rows.
///
/// Lookup uses the longest suffix of the context that has a row, down to the
/// empty context. A context with no matching suffix is an error.
#[derive(Debug, Clone)]
pub struct TabularOracle {
    role: ModelRole,
    vocab: Arc<Vocabulary>,
    rows: HashMap<String, TokenDistribution>,
}

/// Separator used to join context tokens into a table key.
pub const CONTEXT_SEPARATOR: &str = " ";

pub fn context_key(tokens: &[String]) -> String {
    tokens.join(CONTEXT_SEPARATOR)
}

impl TabularOracle {
    /// Builds from sparse rows. The vocabulary is the sorted union of every
    /// token mentioned in any row.
    pub fn from_rows(
        role: ModelRole,
        rows: BTreeMap<String, BTreeMap<String, f64>>,
    ) -> Result<Self, MathError> {
        let tokens: BTreeSet<&String> = rows.values().flat_map(|r| r.keys()).collect();
        let vocab = Arc::new(Vocabulary::new(tokens.into_iter().cloned())?);
        Self::with_vocab(role, vocab, rows)
    }

    /// Builds from sparse rows over an explicit vocabulary.
    pub fn with_vocab(
        role: ModelRole,
        vocab: Arc<Vocabulary>,
        rows: BTreeMap<String, BTreeMap<String, f64>>,
    ) -> Result<Self, MathError> {
        let mut dense_rows = HashMap::with_capacity(rows.len());
        for (key, row) in rows {
            let mut probs = vec![0.0; vocab.size()];
            for (tok, p) in row {
                let i = vocab
                    .index_of(&tok)
                    .ok_or_else(|| MathError::UnknownToken(tok.clone()))?;
                probs[i] = p;
            }
            validate_probs(&probs, Some(vocab.size())).map_err(|e| MathError::BadRow {
                context: key.clone(),
                reason: e.to_string(),
            })?;
            dense_rows.insert(key, TokenDistribution::new(vocab.clone(), probs)?);
        }
        Ok(Self {
            role,
            vocab,
            rows: dense_rows,
        })
    }

    /// Loads the JSON table format: `{"context key": {"token": prob, ...}, ...}`.
    pub fn from_json(role: ModelRole, json: &str) -> Result<Self, MathError> {
        #[derive(Deserialize)]
        #[serde(transparent)]
        struct Table(BTreeMap<String, BTreeMap<String, f64>>);
        let table: Table =
            serde_json::from_str(json).map_err(|e| MathError::Parse(e.to_string()))?;
        Self::from_rows(role, table.0)
    }

    pub fn load(role: ModelRole, path: &Path) -> Result<Self, MathError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| MathError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(role, &text)
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }
}

impl ProbabilityOracle for TabularOracle {
    fn role(&self) -> ModelRole {
        self.role
    }

    fn vocab(&self) -> &Arc<Vocabulary> {
        &self.vocab
    }

    fn next(&self, context: &[String]) -> Result<TokenDistribution, MathError> {
        for start in 0..=context.len() {
            if let Some(d) = self.rows.get(&context_key(&context[start..])) {
                return Ok(d.clone());
            }
        }
        Err(MathError::NoContext(context_key(context)))
    }
}

/// Oracle that assigns the same probability `p` to whatever token comes next
/// in a fixed target, spreading the rest uniformly. Useful for closed forms.
#[derive(Debug, Clone)]
pub struct ConstantOracle {
    role: ModelRole,
    vocab: Arc<Vocabulary>,
    target: Vec<String>,
    context_len: usize,
    p: f64,
}

impl ConstantOracle {
    /// `target` is the sequence the oracle will be scored on and
    /// `context_len` the number of tokens that precede it.
    pub fn new(
        role: ModelRole,
        vocab: Arc<Vocabulary>,
        context_len: usize,
        target: Vec<String>,
        p: f64,
    ) -> Result<Self, MathError> {
        if !(0.0..=1.0).contains(&p) || (p < 1.0 && vocab.size() < 2) {
            return Err(MathError::InvalidProbability(p));
        }
        for t in &target {
            if vocab.index_of(t).is_none() {
                return Err(MathError::UnknownToken(t.clone()));
            }
        }
        Ok(Self {
            role,
            vocab,
            target,
            context_len,
            p,
        })
    }
}

impl ProbabilityOracle for ConstantOracle {
    fn role(&self) -> ModelRole {
        self.role
    }

    fn vocab(&self) -> &Arc<Vocabulary> {
        &self.vocab
    }

    fn next(&self, context: &[String]) -> Result<TokenDistribution, MathError> {
        let pos = context
            .len()
            .checked_sub(self.context_len)
            .ok_or_else(|| MathError::NoContext(context_key(context)))?;
        let Some(tok) = self.target.get(pos) else {
            return Ok(TokenDistribution::uniform(self.vocab.clone()));
        };
        let n = self.vocab.size();
        let hit = self.vocab.index_of(tok).expect("checked at construction");
        let rest = if n > 1 {
            (1.0 - self.p) / (n - 1) as f64
        } else {
            0.0
        };
        let mut probs = vec![rest; n];
        probs[hit] = self.p;
        // fold rounding residue into the target entry
        let residue = 1.0 - probs.iter().sum::<f64>();
        probs[hit] += residue;
        TokenDistribution::new(self.vocab.clone(), probs)
    }
}
