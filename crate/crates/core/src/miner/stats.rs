use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::MinerError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Category {
    Cdm,
    Edm,
    Idm,
    Tom,
    Dmm,
    Am,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordSource {
    PosExtraction,
    LlmGeneration,
}

/// One mined turn. Serializes with the dialogue-sample keys `u`, `c`, `R`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnectiveRecord {
    pub id: String,
    #[serde(rename = "u")]
    pub s1: String,
    #[serde(rename = "c", default)]
    pub connective: String,
    #[serde(rename = "R")]
    pub remainder: String,
    /// `NONE` exactly when the connective is empty; unset when unknown.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<Category>,
    pub source: RecordSource,
}

impl ConnectiveRecord {
    pub fn new(
        id: impl Into<String>,
        s1: impl Into<String>,
        connective: impl Into<String>,
        remainder: impl Into<String>,
        source: RecordSource,
    ) -> Self {
        let connective = connective.into();
        let category = connective.is_empty().then_some(Category::None);
        Self {
            id: id.into(),
            s1: s1.into(),
            connective,
            remainder: remainder.into(),
            category,
            source,
        }
    }

    pub fn validate(&self) -> Result<(), MinerError> {
        let empty = self.connective.trim().is_empty();
        let none = self.category == Some(Category::None);
        if empty != none {
            return Err(MinerError::Invalid(format!(
                "record {}: category NONE must go with an empty connective",
                self.id
            )));
        }
        Ok(())
    }
}

pub fn read_records(reader: impl BufRead) -> Result<Vec<ConnectiveRecord>, MinerError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| MinerError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |reason: String| MinerError::Parse {
            line: i + 1,
            reason,
        };
        let r: ConnectiveRecord =
            serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
        r.validate().map_err(|e| parse_err(e.to_string()))?;
        out.push(r);
    }
    Ok(out)
}

pub fn write_records(mut w: impl Write, records: &[ConnectiveRecord]) -> Result<(), MinerError> {
    for r in records {
        let line = serde_json::to_string(r).map_err(|e| MinerError::Io(e.to_string()))?;
        writeln!(w, "{line}").map_err(|e| MinerError::Io(e.to_string()))?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetStats {
    pub total_samples: usize,
    pub samples_with_connectives: usize,
    pub connective_types: usize,
    pub normalized_entropy: f64,
}

/// Shannon entropy of the counts divided by ln(number of labels); 0 for one
/// label or none.
pub fn normalized_entropy(counts: &[usize]) -> f64 {
    let counts: Vec<f64> = counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| c as f64)
        .collect();
    if counts.len() <= 1 {
        return 0.0;
    }
    let total: f64 = counts.iter().sum();
    let h: f64 = counts
        .iter()
        .map(|c| {
            let p = c / total;
            -p * p.ln()
        })
        .sum();
    (h / (counts.len() as f64).ln()).clamp(0.0, 1.0)
}

/// Lowercased connective with surrounding punctuation and whitespace removed.
fn label_of(connective: &str) -> String {
    connective
        .trim_matches(|c: char| !c.is_alphanumeric())
        .to_lowercase()
}

pub fn dataset_stats(records: &[ConnectiveRecord]) -> DatasetStats {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for r in records {
        let label = label_of(&r.connective);
        if !label.is_empty() {
            *counts.entry(label).or_default() += 1;
        }
    }
    let counts: Vec<usize> = counts.into_values().collect();
    DatasetStats {
        total_samples: records.len(),
        samples_with_connectives: counts.iter().sum(),
        connective_types: counts.len(),
        normalized_entropy: normalized_entropy(&counts),
    }
}

/// Markdown table with one row per named dataset.
pub fn render_stats_row(rows: &[(&str, &DatasetStats)]) -> String {
    let mut out = String::from(
        "| Dataset | Total Samples | Samples with Connectives | Connective Types | Normalized Entropy |\n\
         |---|---|---|---|---|\n",
    );
    for (name, s) in rows {
        out.push_str(&format!(
            "| {name} | {} | {} | {} | {:.2} |\n",
            s.total_samples, s.samples_with_connectives, s.connective_types, s.normalized_entropy
        ));
    }
    out
}

/// Train, validation and test parts.
pub type Splits<T> = (Vec<T>, Vec<T>, Vec<T>);

/// Seeded shuffle, then contiguous cuts at floor(n·r0) and floor(n·(r0+r1)).
pub fn split_dataset<T: Clone>(
    items: &[T],
    ratios: [f64; 3],
    seed: u64,
) -> Result<Splits<T>, MinerError> {
    if ratios.iter().any(|r| !r.is_finite() || *r < 0.0)
        || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9
    {
        return Err(MinerError::Invalid(format!(
            "split ratios {ratios:?} must be non-negative and sum to 1"
        )));
    }
    let mut shuffled = items.to_vec();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n = shuffled.len() as f64;
    let a = (n * ratios[0] + 1e-9).floor() as usize;
    let b = ((n * (ratios[0] + ratios[1]) + 1e-9).floor() as usize).min(shuffled.len());
    let test = shuffled.split_off(b);
    let val = shuffled.split_off(a);
    Ok((shuffled, val, test))
}
