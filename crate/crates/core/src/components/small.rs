use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use super::scenario::Scenario;
use super::ComponentError;
use crate::math::{
    distribution_with_entropy, tokenize, DialogueSample, TokenDistribution, Vocabulary,
};
use crate::policy::{CandidateToken, ConnectiveCandidate};

/// The lightweight connective model.
pub trait SmallModel: Send + Sync {
    /// Up to `m` connective candidates for a (partial) transcript.
    fn candidates(&self, text: &str, m: usize) -> Vec<ConnectiveCandidate>;

    /// A short full response, when the model can produce one.
    fn short_response(&self, _text: &str) -> Option<Vec<String>> {
        None
    }
}

/// Lowercases and strips surrounding punctuation from every word.
pub fn normalize_text(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|w| {
            w.trim_matches(|c: char| !c.is_alphanumeric() && c != '\'')
                .to_lowercase()
        })
        .filter(|w| !w.is_empty())
        .collect()
}

fn key_of(text: &str) -> String {
    normalize_text(text).join(" ")
}

/// Returns fixed candidates per normalized transcript.
#[derive(Debug, Clone, Default)]
pub struct ScriptedSmallModel {
    by_text: HashMap<String, Vec<ConnectiveCandidate>>,
    default: Vec<ConnectiveCandidate>,
}

impl ScriptedSmallModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, text: &str, candidates: Vec<ConnectiveCandidate>) -> Self {
        self.insert(text, candidates);
        self
    }

    pub fn insert(&mut self, text: &str, candidates: Vec<ConnectiveCandidate>) {
        self.by_text.insert(key_of(text), candidates);
    }

    /// Candidates for any transcript without a script entry.
    pub fn with_default(mut self, candidates: Vec<ConnectiveCandidate>) -> Self {
        self.default = candidates;
        self
    }
}

impl SmallModel for ScriptedSmallModel {
    fn candidates(&self, text: &str, m: usize) -> Vec<ConnectiveCandidate> {
        let v = self.by_text.get(&key_of(text)).unwrap_or(&self.default);
        v.iter().take(m).cloned().collect()
    }
}

/// Size of the synthetic vocabulary behind scripted confidences.
const SCRIPT_VOCAB: usize = 64;

impl ScriptedSmallModel {
    /// Builds a model that reports `script.confidence[i]` for the i-th
    /// hypothesis of `scenario` under `h_max`, offering a single candidate.
    ///
    /// Hypotheses with the same normalized text keep the first value.
    pub fn from_script(scenario: &Scenario, h_max: f64) -> Result<Option<Self>, ComponentError> {
        let Some(script) = &scenario.small else {
            return Ok(None);
        };
        scenario.validate()?;
        let words = tokenize(&script.connective);
        let mut tokens: Vec<String> = words.clone();
        let mut i = 0;
        while tokens.len() < SCRIPT_VOCAB {
            let t = format!("<f{i}>");
            if !tokens.contains(&t) {
                tokens.push(t);
            }
            i += 1;
        }
        tokens.dedup();
        let vocab = Arc::new(Vocabulary::new(tokens).map_err(math_err)?);
        let texts = scenario
            .chunks
            .iter()
            .map(|c| c.partial.as_str())
            .chain(std::iter::once(scenario.final_transcript.as_str()));
        let mut model = Self::new();
        for (text, &conf) in texts.zip(&script.confidence) {
            if text.trim().is_empty() || model.by_text.contains_key(&key_of(text)) {
                continue;
            }
            let h = ((1.0 - conf) * h_max).min((SCRIPT_VOCAB as f64).ln());
            let cand_tokens = words
                .iter()
                .map(|w| {
                    Ok(CandidateToken {
                        text: w.clone(),
                        dist: distribution_with_entropy(vocab.clone(), w, h)?,
                        is_marker: false,
                    })
                })
                .collect::<Result<Vec<_>, crate::math::MathError>>()
                .map_err(math_err)?;
            let cand = ConnectiveCandidate::new(cand_tokens, conf).map_err(math_err)?;
            model.insert(text, vec![cand]);
        }
        Ok(Some(model))
    }
}

fn math_err(e: crate::math::MathError) -> ComponentError {
    ComponentError::Config(format!("small script: {e}"))
}

/// Terminates a connective in the per-token distributions.
pub const END_TOKEN: &str = "</c>";

/// Weight of the uniform component in backed-off distributions.
const BACKOFF_UNIFORM_WEIGHT: f64 = 0.5;
/// Additive smoothing mass spread over the vocabulary for seen prefixes.
const SEEN_SMOOTHING_MASS: f64 = 0.01;

#[derive(Debug, Clone, Default)]
struct Row {
    /// connective tokens -> count
    counts: BTreeMap<Vec<String>, u32>,
    response: Option<Vec<String>>,
}

/// Prefix-conditioned connective frequency table built from a dialogue dataset.
///
/// Every prefix of every user input maps to the connectives that followed it.
/// A transcript whose normalized form was never seen falls back to the global
/// connective distribution, flattened toward uniform.
#[derive(Debug, Clone)]
pub struct TabularSmallModel {
    vocab: Arc<Vocabulary>,
    rows: HashMap<String, Row>,
    global: Row,
}

impl TabularSmallModel {
    /// Returns `None` for a dataset with no connectives at all.
    pub fn from_samples(samples: &[DialogueSample]) -> Option<Self> {
        let mut rows: HashMap<String, Row> = HashMap::new();
        let mut global = Row::default();
        let mut tokens = BTreeSet::new();
        for s in samples {
            if s.connective.is_empty() {
                continue;
            }
            tokens.extend(s.connective.iter().cloned());
            let words = normalize_text(&s.user.join(" "));
            for len in 1..=words.len() {
                let row = rows.entry(words[..len].join(" ")).or_default();
                *row.counts.entry(s.connective.clone()).or_default() += 1;
                if len == words.len() && row.response.is_none() {
                    row.response = Some(s.response.clone());
                }
            }
            *global.counts.entry(s.connective.clone()).or_default() += 1;
        }
        if global.counts.is_empty() {
            return None;
        }
        tokens.insert(END_TOKEN.to_string());
        let vocab = Arc::new(Vocabulary::new(tokens).expect("non-empty, deduplicated"));
        Some(Self {
            vocab,
            rows,
            global,
        })
    }

    pub fn vocab(&self) -> &Arc<Vocabulary> {
        &self.vocab
    }

    /// Distribution of the token following `prefix` among the row's connectives.
    fn next_token_dist(&self, row: &Row, prefix: &[String], backoff: bool) -> TokenDistribution {
        let n = self.vocab.size();
        let mut counts = vec![0.0; n];
        for (conn, &c) in &row.counts {
            if conn.len() < prefix.len() || conn[..prefix.len()] != *prefix {
                continue;
            }
            let next = conn.get(prefix.len()).map_or(END_TOKEN, String::as_str);
            counts[self.vocab.index_of(next).expect("token in vocab")] += c as f64;
        }
        let total: f64 = counts.iter().sum();
        let probs: Vec<f64> = if backoff {
            let w = BACKOFF_UNIFORM_WEIGHT;
            counts
                .iter()
                .map(|c| (1.0 - w) * c / total + w / n as f64)
                .collect()
        } else {
            let alpha = SEEN_SMOOTHING_MASS / n as f64;
            let z = total + SEEN_SMOOTHING_MASS;
            counts.iter().map(|c| (c + alpha) / z).collect()
        };
        let probs = renormalize(probs);
        TokenDistribution::new(self.vocab.clone(), probs).expect("valid by construction")
    }

    fn candidate(&self, row: &Row, conn: &[String], backoff: bool) -> ConnectiveCandidate {
        let mut tokens = Vec::with_capacity(conn.len());
        let mut score = 1.0;
        for i in 0..conn.len() {
            let dist = self.next_token_dist(row, &conn[..i], backoff);
            score *= dist.prob_of(&conn[i]).expect("token in vocab");
            tokens.push(CandidateToken {
                text: conn[i].clone(),
                dist,
                is_marker: false,
            });
        }
        ConnectiveCandidate::new(tokens, score.clamp(0.0, 1.0)).expect("non-empty connective")
    }
}

fn renormalize(mut probs: Vec<f64>) -> Vec<f64> {
    let z: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= z;
    }
    let residue = 1.0 - probs.iter().sum::<f64>();
    if let Some(max) = probs.iter_mut().max_by(|a, b| a.total_cmp(b)) {
        *max += residue;
    }
    probs
}

impl SmallModel for TabularSmallModel {
    fn candidates(&self, text: &str, m: usize) -> Vec<ConnectiveCandidate> {
        let key = key_of(text);
        let (row, backoff) = match self.rows.get(&key) {
            Some(r) => (r, false),
            None => (&self.global, true),
        };
        let mut ranked: Vec<(&Vec<String>, u32)> =
            row.counts.iter().map(|(k, &v)| (k, v)).collect();
        // count descending, then token order; BTreeMap iteration already sorts keys
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        ranked
            .into_iter()
            .take(m)
            .map(|(conn, _)| self.candidate(row, conn, backoff))
            .collect()
    }

    fn short_response(&self, text: &str) -> Option<Vec<String>> {
        self.rows
            .get(&key_of(text))
            .and_then(|r| r.response.clone())
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::math::mean_connective_entropy;

    fn sample(id: &str, u: &str, c: &str) -> DialogueSample {
        DialogueSample::new(id, u, c, "some response")
    }

    fn dataset() -> Vec<DialogueSample> {
        vec![
            sample("1", "how are you today", "Well,"),
            sample("2", "how are things going", "Well,"),
            sample("3", "how much does it cost", "So,"),
            sample("4", "what time is it", "Let me see,"),
            sample("5", "what is your name", "Oh,"),
        ]
    }

    #[test]
    fn determined_prefix_ranks_first_with_low_entropy() {
        let m = TabularSmallModel::from_samples(&dataset()).unwrap();
        let c = m.candidates("How are", 5);
        assert_eq!(c[0].text(), "Well,");
        assert_eq!(c.len(), 1);
        assert!(mean_connective_entropy(&c[0]).unwrap() < 0.1);
    }

    #[test]
    fn ambiguous_prefix_has_higher_entropy() {
        let m = TabularSmallModel::from_samples(&dataset()).unwrap();
        let c = m.candidates("how", 5);
        assert_eq!(c.len(), 2);
        assert_eq!(c[0].text(), "Well,");
        assert!(
            mean_connective_entropy(&c[0]).unwrap()
                > mean_connective_entropy(&m.candidates("how are", 5)[0]).unwrap()
        );
    }

    #[test]
    fn unseen_prefix_backs_off_to_marginal() {
        let m = TabularSmallModel::from_samples(&dataset()).unwrap();
        let c = m.candidates("zebra crossing", 5);
        assert_eq!(c.len(), 4);
        assert_eq!(c[0].text(), "Well,");
        let unseen = c
            .iter()
            .map(|x| mean_connective_entropy(x).unwrap())
            .fold(f64::INFINITY, f64::min);
        let seen = mean_connective_entropy(&m.candidates("what time", 5)[0]).unwrap();
        assert!(unseen >= seen);
    }

    #[test]
    fn m_limits_candidates() {
        let m = TabularSmallModel::from_samples(&dataset()).unwrap();
        assert_eq!(m.candidates("zebra", 1).len(), 1);
    }

    #[test]
    fn scores_are_probabilities() {
        let m = TabularSmallModel::from_samples(&dataset()).unwrap();
        for c in m.candidates("what", 5) {
            assert!((0.0..=1.0).contains(&c.model_score()));
        }
    }

    #[test]
    fn short_response_on_full_input() {
        let m = TabularSmallModel::from_samples(&dataset()).unwrap();
        assert_eq!(
            m.short_response("What time is it?").unwrap().join(" "),
            "some response"
        );
        assert!(m.short_response("what time").is_none());
    }

    #[test]
    fn empty_connective_dataset() {
        assert!(TabularSmallModel::from_samples(&[sample("1", "a b", "")]).is_none());
    }

    proptest! {
        #[test]
        fn unseen_dominates_determined_seen(
            conns in prop::collection::vec(prop::sample::select(vec!["Well,", "So,", "Oh,", "I see,", "Right, so", "Hmm"]), 1..12),
        ) {
            let samples: Vec<_> = conns
                .iter()
                .enumerate()
                .map(|(i, c)| sample(&i.to_string(), &format!("unique{i} words here"), c))
                .collect();
            let m = TabularSmallModel::from_samples(&samples).unwrap();
            let unseen_min = m
                .candidates("never seen before", 10)
                .iter()
                .map(|c| mean_connective_entropy(c).unwrap())
                .fold(f64::INFINITY, f64::min);
            for i in 0..samples.len() {
                let seen = m.candidates(&format!("unique{i}"), 10);
                prop_assert_eq!(seen.len(), 1);
                prop_assert!(mean_connective_entropy(&seen[0]).unwrap() <= unseen_min);
            }
        }
    }
}
