use std::io::BufRead;

use serde::de::{self, Deserializer};
use serde::Deserialize;

use super::pos::{classify_prefix, lexicon_tag, Lexicons, PosTag, PrefixClass, TaggedToken};
use super::MinerError;

/// Default cap on connective length in word tokens.
pub const DEFAULT_MAX_TOKENS: usize = 6;

const DELIMITERS: &[char] = &[',', '.', '!', '?', ';', ':'];

/// Splits after every delimiter; the segments concatenate back to `text`.
pub fn split_by_punctuation(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    for (i, c) in text.char_indices() {
        if DELIMITERS.contains(&c) {
            let end = i + c.len_utf8();
            out.push(&text[start..end]);
            start = end;
        }
    }
    if start < text.len() {
        out.push(&text[start..]);
    }
    out
}

/// One line of a tagged corpus.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct TaggedTurn {
    #[serde(default)]
    pub id: Option<String>,
    pub s1: String,
    pub s2: String,
    /// `[text, pos, flags...]` entries; tagged with the built-in lexicon
    /// tagger when absent.
    #[serde(default, deserialize_with = "de_tokens")]
    pub s2_tokens: Option<Vec<TaggedToken>>,
}

fn de_tokens<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Vec<TaggedToken>>, D::Error> {
    let raw: Option<Vec<Vec<String>>> = Option::deserialize(d)?;
    let Some(raw) = raw else { return Ok(None) };
    raw.into_iter()
        .map(|entry| {
            let mut it = entry.into_iter();
            let text = it
                .next()
                .ok_or_else(|| de::Error::custom("empty token entry"))?;
            let pos: PosTag = it
                .next()
                .ok_or_else(|| de::Error::custom(format!("token {text:?} has no tag")))?
                .parse()
                .expect("infallible");
            let mut tok = TaggedToken::new(text, pos);
            for flag in it {
                tok = match flag.as_str() {
                    "meta" | "is_meta_verb" => tok.meta(),
                    "abstract" | "is_abstract_noun" => tok.abstract_noun(),
                    "concrete" | "is_concrete_entity" => tok.concrete(),
                    other => return Err(de::Error::custom(format!("unknown flag {other:?}"))),
                };
            }
            Ok(tok)
        })
        .collect::<Result<Vec<_>, _>>()
        .map(Some)
}

pub fn read_tagged(reader: impl BufRead) -> Result<Vec<TaggedTurn>, MinerError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| MinerError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let turn: TaggedTurn = serde_json::from_str(&line).map_err(|e| MinerError::Parse {
            line: i + 1,
            reason: e.to_string(),
        })?;
        out.push(turn);
    }
    Ok(out)
}

/// Why accumulation stopped before the end of the turn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// The candidate contains a proper noun, concrete entity, number or content word.
    Content,
    /// The candidate fits none of the allowed tag patterns.
    Pos,
    /// The candidate exceeds the token cap.
    Length,
    /// Every segment qualified, which would leave no response.
    WholeTurn,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Extraction {
    pub connective: String,
    pub remainder: String,
    pub class: Option<PrefixClass>,
    pub segments_used: usize,
    pub stop: Option<StopReason>,
}

/// Accumulates leading punctuation segments of `s2` while the accumulated
/// prefix stays a valid connective.
///
/// `tokens` must cover `s2` in order; each token is assigned to the segment
/// its first character falls in.
pub fn extract_connective(
    s2: &str,
    tokens: &[TaggedToken],
    max_tokens: usize,
) -> Result<Extraction, MinerError> {
    if s2.trim().is_empty() {
        return Err(MinerError::Invalid("empty turn".into()));
    }
    let segments = split_by_punctuation(s2);
    let mut bounds = Vec::with_capacity(segments.len());
    let mut end = 0;
    for s in &segments {
        end += s.len();
        bounds.push(end);
    }
    let seg_of = align(s2, tokens)?
        .into_iter()
        .map(|start| {
            bounds
                .iter()
                .position(|&b| start < b)
                .unwrap_or(segments.len() - 1)
        })
        .collect::<Vec<_>>();

    let mut used = 0;
    let mut class = None;
    let mut stop = None;
    for k in 0..segments.len() {
        let candidate: Vec<TaggedToken> = tokens
            .iter()
            .zip(&seg_of)
            .filter(|(_, &s)| s <= k)
            .map(|(t, _)| t.clone())
            .collect();
        let words = candidate.iter().filter(|t| !t.is_punctuation()).count();
        if words == 0 {
            // a bare delimiter segment cannot start a connective
            stop = Some(StopReason::Pos);
            break;
        }
        if candidate
            .iter()
            .any(|t| !t.is_punctuation() && t.is_substantial())
        {
            stop = Some(StopReason::Content);
            break;
        }
        let c = classify_prefix(&candidate);
        if c == PrefixClass::Reject {
            stop = Some(StopReason::Pos);
            break;
        }
        if words > max_tokens {
            stop = Some(StopReason::Length);
            break;
        }
        used = k + 1;
        class = Some(c);
    }
    if used == segments.len() {
        used = 0;
        class = None;
        stop = Some(StopReason::WholeTurn);
    }
    let cut = if used == 0 { 0 } else { bounds[used - 1] };
    Ok(Extraction {
        connective: s2[..cut].trim().to_string(),
        remainder: s2[cut..].trim_start().to_string(),
        class,
        segments_used: used,
        stop,
    })
}

/// Tags `s2` with the lexicon tagger, then extracts.
pub fn extract_from_text(
    s2: &str,
    lex: &Lexicons,
    max_tokens: usize,
) -> Result<Extraction, MinerError> {
    extract_connective(s2, &lexicon_tag(s2, lex), max_tokens)
}

/// Byte offset of each token's first character in `text`.
fn align(text: &str, tokens: &[TaggedToken]) -> Result<Vec<usize>, MinerError> {
    let mut cursor = 0;
    let mut starts = Vec::with_capacity(tokens.len());
    for t in tokens {
        let rest = &text[cursor..];
        let skipped = rest.len() - rest.trim_start().len();
        let at = cursor + skipped;
        if !text[at..].starts_with(t.text.as_str()) || t.text.is_empty() {
            return Err(MinerError::Invalid(format!(
                "token {:?} does not match the text at byte {at}",
                t.text
            )));
        }
        starts.push(at);
        cursor = at + t.text.len();
    }
    if !text[cursor..].trim().is_empty() {
        return Err(MinerError::Invalid(format!(
            "tokens do not cover {:?}",
            &text[cursor..]
        )));
    }
    Ok(starts)
}
