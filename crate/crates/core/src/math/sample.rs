use std::io::{BufRead, Write};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::MathError;

/// Length of one audio chunk.
pub const CHUNK_MS: u64 = 500;

/// One user-input / connective / response record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DialogueSample {
    pub id: String,
    #[serde(rename = "u", with = "token_text")]
    pub user: Vec<String>,
    #[serde(rename = "c", with = "token_text", default)]
    pub connective: Vec<String>,
    #[serde(rename = "R", with = "token_text")]
    pub response: Vec<String>,
    /// Response of the pretrained small model, when available.
    #[serde(
        rename = "R_S",
        with = "opt_token_text",
        default,
        skip_serializing_if = "Option::is_none"
    )]
    pub small_response: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audio_ms: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chunk_count: Option<u32>,
}

impl DialogueSample {
    pub fn new(id: impl Into<String>, user: &str, connective: &str, response: &str) -> Self {
        Self {
            id: id.into(),
            user: tokenize(user),
            connective: tokenize(connective),
            response: tokenize(response),
            small_response: None,
            audio_ms: None,
            chunk_count: None,
        }
    }

    pub fn with_audio_ms(mut self, audio_ms: u64) -> Self {
        self.audio_ms = Some(audio_ms);
        self.chunk_count = Some(chunks_for(audio_ms));
        self
    }

    /// Fills `chunk_count` from `audio_ms` and checks the field invariants.
    pub fn normalize(mut self) -> Result<Self, MathError> {
        if self.user.is_empty() {
            return Err(MathError::InvalidSample {
                id: self.id,
                reason: "empty user input".into(),
            });
        }
        match (self.audio_ms, self.chunk_count) {
            (Some(ms), None) => self.chunk_count = Some(chunks_for(ms)),
            (Some(ms), Some(n)) if n != chunks_for(ms) => {
                return Err(MathError::InvalidSample {
                    id: self.id,
                    reason: format!("chunk_count {n} does not match audio_ms {ms}"),
                })
            }
            _ => {}
        }
        Ok(self)
    }

    /// The connective followed by the response, as spoken.
    pub fn rendered_output(&self) -> Vec<String> {
        self.connective
            .iter()
            .chain(&self.response)
            .cloned()
            .collect()
    }
}

pub fn chunks_for(audio_ms: u64) -> u32 {
    audio_ms.div_ceil(CHUNK_MS) as u32
}

/// Whitespace tokenization shared by every text-to-token conversion.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().map(String::from).collect()
}

/// Cuts the user input to the prefix heard after `chunks_available` chunks.
pub fn truncate_sample(
    sample: &DialogueSample,
    chunks_available: u32,
) -> Result<DialogueSample, MathError> {
    let total = sample
        .chunk_count
        .ok_or_else(|| MathError::MissingChunkCount(sample.id.clone()))?;
    if chunks_available == 0 || chunks_available > total {
        return Err(MathError::ChunksOutOfRange {
            available: chunks_available,
            total,
        });
    }
    let n = sample.user.len() as u64;
    let keep = (n * chunks_available as u64).div_ceil(total as u64).max(1) as usize;
    let mut out = sample.clone();
    out.user.truncate(keep);
    Ok(out)
}

pub fn read_samples(reader: impl BufRead) -> Result<Vec<DialogueSample>, MathError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| MathError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let s: DialogueSample = serde_json::from_str(&line)
            .map_err(|e| MathError::Parse(format!("line {}: {e}", i + 1)))?;
        out.push(s.normalize()?);
    }
    Ok(out)
}

pub fn write_samples(mut w: impl Write, samples: &[DialogueSample]) -> Result<(), MathError> {
    for s in samples {
        let line = serde_json::to_string(s).map_err(|e| MathError::Parse(e.to_string()))?;
        writeln!(w, "{line}").map_err(|e| MathError::Io(e.to_string()))?;
    }
    Ok(())
}

/// Token sequences travel as either a whitespace-joined string or an array.
#[derive(Deserialize)]
#[serde(untagged)]
enum TokenText {
    Text(String),
    Tokens(Vec<String>),
}

impl From<TokenText> for Vec<String> {
    fn from(t: TokenText) -> Self {
        match t {
            TokenText::Text(s) => tokenize(&s),
            TokenText::Tokens(v) => v,
        }
    }
}

mod token_text {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[String], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&v.join(" "))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<String>, D::Error> {
        Ok(TokenText::deserialize(d)?.into())
    }
}

mod opt_token_text {
    use super::*;

    pub fn serialize<S: Serializer>(v: &Option<Vec<String>>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(v) => s.serialize_str(&v.join(" ")),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Vec<String>>, D::Error> {
        Ok(Option::<TokenText>::deserialize(d)?.map(Into::into))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chunk_count_from_audio() {
        assert_eq!(chunks_for(0), 0);
        assert_eq!(chunks_for(1), 1);
        assert_eq!(chunks_for(500), 1);
        assert_eq!(chunks_for(501), 2);
        let s = DialogueSample::new("a", "hi there", "Well,", "yes").with_audio_ms(1700);
        assert_eq!(s.chunk_count, Some(4));
    }

    #[test]
    fn parses_both_token_forms() {
        let text = r#"{"id":"1","u":"how are you","c":["Well,"],"R":"fine thanks","audio_ms":1200}
{"id":"2","u":["hi"],"R":"hello"}
"#;
        let v = read_samples(text.as_bytes()).unwrap();
        assert_eq!(v[0].user, vec!["how", "are", "you"]);
        assert_eq!(v[0].connective, vec!["Well,"]);
        assert_eq!(v[0].chunk_count, Some(3));
        assert!(v[1].connective.is_empty());
        assert_eq!(v[1].audio_ms, None);
    }

    #[test]
    fn rejects_empty_user_and_bad_chunks() {
        assert!(read_samples(r#"{"id":"x","u":"","R":"r"}"#.as_bytes()).is_err());
        assert!(read_samples(
            r#"{"id":"x","u":"a","R":"r","audio_ms":1000,"chunk_count":5}"#.as_bytes()
        )
        .is_err());
    }

    #[test]
    fn connective_precedes_response() {
        let s = DialogueSample::new("a", "q", "I see,", "the answer");
        assert_eq!(s.rendered_output(), vec!["I", "see,", "the", "answer"]);
    }

    #[test]
    fn truncation_rules() {
        let s = DialogueSample::new("a", "1 2 3 4 5 6 7 8", "Well,", "r").with_audio_ms(2000);
        assert_eq!(truncate_sample(&s, 4).unwrap(), s);
        assert_eq!(truncate_sample(&s, 2).unwrap().user, tokenize("1 2 3 4"));
        let s = DialogueSample::new("b", "1 2 3", "", "r").with_audio_ms(2000);
        let t = truncate_sample(&s, 1).unwrap();
        assert_eq!(t.user, tokenize("1"));
        assert_eq!(t.response, s.response);
        assert!(truncate_sample(&s, 0).is_err());
        assert!(truncate_sample(&s, 5).is_err());
    }
}
