use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::MinerError;

/// Closed part-of-speech tag set; every tag outside it maps to `Other`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum PosTag {
    Intj,
    Adv,
    Pron,
    Aux,
    Verb,
    Part,
    Adj,
    Noun,
    Sconj,
    Propn,
    Num,
    Other,
}

impl FromStr for PosTag {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.to_ascii_uppercase().as_str() {
            "INTJ" => PosTag::Intj,
            "ADV" => PosTag::Adv,
            "PRON" => PosTag::Pron,
            "AUX" => PosTag::Aux,
            "VERB" => PosTag::Verb,
            "PART" => PosTag::Part,
            "ADJ" => PosTag::Adj,
            "NOUN" => PosTag::Noun,
            "SCONJ" => PosTag::Sconj,
            "PROPN" => PosTag::Propn,
            "NUM" => PosTag::Num,
            _ => PosTag::Other,
        })
    }
}

impl fmt::Display for PosTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            PosTag::Intj => "INTJ",
            PosTag::Adv => "ADV",
            PosTag::Pron => "PRON",
            PosTag::Aux => "AUX",
            PosTag::Verb => "VERB",
            PosTag::Part => "PART",
            PosTag::Adj => "ADJ",
            PosTag::Noun => "NOUN",
            PosTag::Sconj => "SCONJ",
            PosTag::Propn => "PROPN",
            PosTag::Num => "NUM",
            PosTag::Other => "OTHER",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaggedToken {
    pub text: String,
    pub pos: PosTag,
    pub is_meta_verb: bool,
    pub is_abstract_noun: bool,
    pub is_concrete_entity: bool,
}

impl TaggedToken {
    /// Builds a token, dropping flags that contradict the tag.
    pub fn new(text: impl Into<String>, pos: PosTag) -> Self {
        Self {
            text: text.into(),
            pos,
            is_meta_verb: false,
            is_abstract_noun: false,
            is_concrete_entity: false,
        }
    }

    pub fn meta(mut self) -> Self {
        self.is_meta_verb = self.pos == PosTag::Verb;
        self
    }

    pub fn abstract_noun(mut self) -> Self {
        self.is_abstract_noun = self.pos == PosTag::Noun;
        self
    }

    pub fn concrete(mut self) -> Self {
        self.is_concrete_entity = true;
        self
    }

    /// Applies lexicon membership on top of explicit flags.
    pub fn with_lexicons(mut self, lex: &Lexicons) -> Self {
        let key = self.text.to_lowercase();
        if self.pos == PosTag::Verb && lex.meta_verbs.contains(&key) {
            self.is_meta_verb = true;
        }
        if self.pos == PosTag::Noun && lex.abstract_nouns.contains(&key) {
            self.is_abstract_noun = true;
        }
        if lex.concrete_entities.contains(&key) {
            self.is_concrete_entity = true;
        }
        self
    }

    pub fn is_punctuation(&self) -> bool {
        !self.text.is_empty() && self.text.chars().all(|c| !c.is_alphanumeric())
    }

    fn in_a(&self) -> bool {
        match self.pos {
            PosTag::Intj | PosTag::Adv | PosTag::Pron | PosTag::Aux | PosTag::Part => true,
            PosTag::Verb => self.is_meta_verb,
            _ => false,
        }
    }

    fn in_b(&self) -> bool {
        match self.pos {
            PosTag::Adj | PosTag::Adv | PosTag::Sconj => true,
            PosTag::Noun => self.is_abstract_noun,
            _ => false,
        }
    }

    /// Proper nouns, concrete entities, numbers, content verbs and content nouns.
    pub fn is_substantial(&self) -> bool {
        if self.is_concrete_entity {
            return true;
        }
        match self.pos {
            PosTag::Propn | PosTag::Num => true,
            PosTag::Verb => !self.is_meta_verb,
            PosTag::Noun => !self.is_abstract_noun,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrefixClass {
    TypeA,
    TypeB,
    Mixed,
    Reject,
}

/// Decides whether a token sequence can be a turn-initial connective.
///
/// Punctuation tokens are ignored; an empty word sequence is rejected.
pub fn classify_prefix(tokens: &[TaggedToken]) -> PrefixClass {
    let words: Vec<&TaggedToken> = tokens.iter().filter(|t| !t.is_punctuation()).collect();
    if words.is_empty() || words.iter().any(|t| t.is_substantial()) {
        return PrefixClass::Reject;
    }
    if words.iter().any(|t| !t.in_a() && !t.in_b()) {
        return PrefixClass::Reject;
    }
    let has_adj = words.iter().any(|t| t.pos == PosTag::Adj);
    if words.iter().all(|t| t.in_a()) {
        return PrefixClass::TypeA;
    }
    // some token is B-only from here on, so the adjective requirement applies
    if !has_adj {
        return PrefixClass::Reject;
    }
    if words.iter().all(|t| t.in_b()) {
        PrefixClass::TypeB
    } else {
        PrefixClass::Mixed
    }
}

/// Meta-verb, abstract-noun and concrete-entity word lists.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Lexicons {
    pub meta_verbs: HashSet<String>,
    pub abstract_nouns: HashSet<String>,
    pub concrete_entities: HashSet<String>,
}

pub const META_VERBS_FILE: &str = "meta_verbs.txt";
pub const ABSTRACT_NOUNS_FILE: &str = "abstract_nouns.txt";
pub const CONCRETE_ENTITIES_FILE: &str = "concrete_entities.txt";

fn parse_list(text: &str) -> HashSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect()
}

impl Lexicons {
    /// The lists shipped with the crate.
    pub fn builtin() -> Self {
        Self {
            meta_verbs: parse_list(include_str!("../../data/lexicons/meta_verbs.txt")),
            abstract_nouns: parse_list(include_str!("../../data/lexicons/abstract_nouns.txt")),
            concrete_entities: parse_list(include_str!(
                "../../data/lexicons/concrete_entities.txt"
            )),
        }
    }

    /// Reads the three list files from `dir`.
    pub fn load_dir(dir: &Path) -> Result<Self, MinerError> {
        let read = |name: &str| {
            let path = dir.join(name);
            std::fs::read_to_string(&path)
                .map(|t| parse_list(&t))
                .map_err(|e| MinerError::Io(format!("{}: {e}", path.display())))
        };
        Ok(Self {
            meta_verbs: read(META_VERBS_FILE)?,
            abstract_nouns: read(ABSTRACT_NOUNS_FILE)?,
            concrete_entities: read(CONCRETE_ENTITIES_FILE)?,
        })
    }
}

const INTERJECTIONS: &[&str] = &[
    "oh", "ah", "well", "hey", "wow", "hmm", "um", "uh", "yes", "yeah", "no", "okay", "ok",
    "alright", "hi", "hello", "oops", "huh", "mhm", "aha", "gosh", "yep", "nope", "right",
];
const ADVERBS: &[&str] = &[
    "honestly",
    "actually",
    "really",
    "anyway",
    "anyways",
    "so",
    "then",
    "now",
    "however",
    "nevertheless",
    "moreover",
    "besides",
    "therefore",
    "thus",
    "first",
    "also",
    "still",
    "indeed",
    "frankly",
    "basically",
    "obviously",
    "clearly",
    "certainly",
    "definitely",
    "absolutely",
    "exactly",
    "maybe",
    "perhaps",
    "just",
    "too",
    "again",
    "otherwise",
    "meanwhile",
    "instead",
    "sure",
    "of",
    "course",
    "by",
    "speaking",
    "personally",
];
const PRONOUNS: &[&str] = &[
    "i", "you", "we", "it", "that", "this", "they", "he", "she", "me", "which", "what",
];
const AUXILIARIES: &[&str] = &[
    "is", "are", "was", "were", "be", "do", "does", "did", "can", "could", "will", "would",
    "should", "may", "might", "must", "have", "has", "had", "'s", "'m", "am",
];
const PARTICLES: &[&str] = &["not", "n't", "to"];
const ADJECTIVES: &[&str] = &[
    "good",
    "great",
    "fine",
    "true",
    "interesting",
    "nice",
    "fair",
    "cool",
    "sorry",
    "glad",
    "funny",
    "strange",
    "awesome",
    "wonderful",
    "lovely",
    "sad",
    "amazing",
    "other",
];
const SUBORDINATORS: &[&str] = &[
    "but", "because", "although", "though", "if", "since", "while", "unless",
];

/// Splits text into word and punctuation tokens and tags them from closed
/// word lists. Unknown words are tagged as nouns, so they count as content.
pub fn lexicon_tag(text: &str, lex: &Lexicons) -> Vec<TaggedToken> {
    let mut out = Vec::new();
    let mut word_index = 0usize;
    for raw in split_words(text) {
        let token = if raw.chars().all(|c| !c.is_alphanumeric()) {
            TaggedToken::new(raw, PosTag::Other)
        } else {
            let key = raw.to_lowercase();
            let has = |list: &[&str]| list.contains(&key.as_str());
            let pos = if lex.meta_verbs.contains(&key) {
                PosTag::Verb
            } else if has(INTERJECTIONS) {
                PosTag::Intj
            } else if has(ADVERBS) {
                PosTag::Adv
            } else if has(PRONOUNS) {
                PosTag::Pron
            } else if has(AUXILIARIES) {
                PosTag::Aux
            } else if has(PARTICLES) {
                PosTag::Part
            } else if has(ADJECTIVES) {
                PosTag::Adj
            } else if has(SUBORDINATORS) {
                PosTag::Sconj
            } else if raw.chars().all(|c| c.is_ascii_digit()) {
                PosTag::Num
            } else if word_index > 0 && raw.chars().next().is_some_and(char::is_uppercase) {
                PosTag::Propn
            } else if matches!(key.as_str(), "the" | "a" | "an" | "and" | "or") {
                PosTag::Other
            } else {
                PosTag::Noun
            };
            word_index += 1;
            TaggedToken::new(raw, pos)
        };
        out.push(token.with_lexicons(lex));
    }
    out
}

/// Words keep internal apostrophes and hyphens; every other non-alphanumeric
/// character is its own token.
fn split_words(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for c in text.chars() {
        if c.is_alphanumeric() || ((c == '\'' || c == '-') && !cur.is_empty()) {
            cur.push(c);
        } else {
            if !cur.is_empty() {
                out.push(std::mem::take(&mut cur));
            }
            if !c.is_whitespace() {
                out.push(c.to_string());
            }
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(text: &str, pos: PosTag) -> TaggedToken {
        TaggedToken::new(text, pos)
    }

    #[test]
    fn classification_examples() {
        assert_eq!(
            classify_prefix(&[t("Well", PosTag::Intj)]),
            PrefixClass::TypeA
        );
        assert_eq!(
            classify_prefix(&[t("Sounds", PosTag::Verb).meta(), t("good", PosTag::Adj)]),
            PrefixClass::Mixed
        );
        assert_eq!(
            classify_prefix(&[t("Paris", PosTag::Propn)]),
            PrefixClass::Reject
        );
        assert_eq!(
            classify_prefix(&[t("Honestly", PosTag::Adv), t("great", PosTag::Adj)]),
            PrefixClass::TypeB
        );
        // B-only tags without an adjective
        assert_eq!(
            classify_prefix(&[t("But", PosTag::Sconj), t("anyway", PosTag::Adv)]),
            PrefixClass::Reject
        );
        assert_eq!(
            classify_prefix(&[t("go", PosTag::Verb)]),
            PrefixClass::Reject
        );
        assert_eq!(
            classify_prefix(&[t(",", PosTag::Other)]),
            PrefixClass::Reject
        );
        assert_eq!(
            classify_prefix(&[t("Well", PosTag::Intj), t(",", PosTag::Other)]),
            PrefixClass::TypeA
        );
    }

    #[test]
    fn substantial_tokens_always_reject() {
        let filler = [
            t("oh", PosTag::Intj),
            t("nice", PosTag::Adj),
            t("fact", PosTag::Noun).abstract_noun(),
        ];
        for bad in [
            t("Paris", PosTag::Propn),
            t("point", PosTag::Noun).abstract_noun().concrete(),
        ] {
            for i in 0..=filler.len() {
                let mut v = filler.to_vec();
                v.insert(i, bad.clone());
                assert_eq!(classify_prefix(&v), PrefixClass::Reject);
            }
        }
    }

    #[test]
    fn flags_follow_tags() {
        assert!(!t("fact", PosTag::Adj).abstract_noun().is_abstract_noun);
        assert!(!t("look", PosTag::Noun).meta().is_meta_verb);
        let lex = Lexicons::builtin();
        assert!(t("look", PosTag::Verb).with_lexicons(&lex).is_meta_verb);
        assert!(!t("look", PosTag::Noun).with_lexicons(&lex).is_meta_verb);
    }

    #[test]
    fn lexicon_tagger() {
        let lex = Lexicons::builtin();
        let tags: Vec<(String, PosTag)> = lexicon_tag("Well, I see. Paris is 3 hours away!", &lex)
            .into_iter()
            .map(|t| (t.text, t.pos))
            .collect();
        assert_eq!(tags[0], ("Well".into(), PosTag::Intj));
        assert_eq!(tags[1], (",".into(), PosTag::Other));
        assert_eq!(tags[3], ("see".into(), PosTag::Verb));
        assert_eq!(tags[5], ("Paris".into(), PosTag::Propn));
        assert_eq!(tags[7], ("3".into(), PosTag::Num));
        assert_eq!(tags.last().unwrap().0, "!");
    }

    #[test]
    fn unknown_tags_map_to_other() {
        assert_eq!("det".parse::<PosTag>().unwrap(), PosTag::Other);
        assert_eq!("sconj".parse::<PosTag>().unwrap(), PosTag::Sconj);
    }
}
