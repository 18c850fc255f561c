//! Text normalization into token streams at word or letter granularity.
//!
//! Both tokenizers apply Unicode NFC first and case-fold to lower case.
//!
//! Words are maximal runs of alphanumeric characters; an apostrophe or hyphen
//! is kept only when it sits between two alphanumerics (`it's`,
//! `state-of-the-art`). Everything else separates words. Word vocabularies are
//! built in first-appearance order.
//!
//! Letters use the fixed 45-symbol [`LETTER_ALPHABET`]: `a`–`z`, `0`–`9`,
//! space, and `. , ; : ' - ? !`. Runs of whitespace collapse to one space and
//! any other character is dropped.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

/// The fixed letter alphabet, in token-ID order.
pub const LETTER_ALPHABET: [char; 45] = [
    'a', 'b', 'c', 'd', 'e', 'f', 'g', 'h', 'i', 'j', 'k', 'l', 'm', 'n', 'o', 'p', 'q', 'r', 's', 't', 'u', 'v', 'w',
    'x', 'y', 'z', '0', '1', '2', '3', '4', '5', '6', '7', '8', '9', ' ', '.', ',', ';', ':', '\'', '-', '?', '!',
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    Letter,
    Word,
}

impl fmt::Display for Granularity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Granularity::Letter => "letter",
            Granularity::Word => "word",
        })
    }
}

impl FromStr for Granularity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "letter" | "letters" | "char" => Ok(Granularity::Letter),
            "word" | "words" => Ok(Granularity::Word),
            other => Err(format!("unknown granularity {other:?} (expected word or letter)")),
        }
    }
}

/// Bijection between surface tokens and dense IDs `0..len`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    entries: Vec<String>,
    index: HashMap<String, u32>,
    granularity: Granularity,
}

impl Vocabulary {
    pub fn new(granularity: Granularity) -> Self {
        Vocabulary {
            entries: Vec::new(),
            index: HashMap::new(),
            granularity,
        }
    }

    /// The 45-symbol letter vocabulary.
    pub fn letters() -> Self {
        let mut vocab = Vocabulary::new(Granularity::Letter);
        for c in LETTER_ALPHABET {
            vocab.intern(&c.to_string());
        }
        vocab
    }

    /// Builds a vocabulary from entries in ID order. Duplicates are rejected.
    pub fn from_entries<I, S>(granularity: Granularity, entries: I) -> Result<Self, String>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut vocab = Vocabulary::new(granularity);
        for entry in entries {
            let entry = entry.into();
            if vocab.index.contains_key(&entry) {
                return Err(format!("duplicate vocabulary entry {entry:?}"));
            }
            vocab.intern(&entry);
        }
        Ok(vocab)
    }

    /// Returns the ID of `token`, assigning the next free ID if it is new.
    pub fn intern(&mut self, token: &str) -> u32 {
        if let Some(&id) = self.index.get(token) {
            return id;
        }
        let id = u32::try_from(self.entries.len()).expect("vocabulary exceeds u32 IDs");
        self.entries.push(token.to_owned());
        self.index.insert(token.to_owned(), id);
        id
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.entries.get(id as usize).map(String::as_str)
    }

    pub fn entries(&self) -> &[String] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn granularity(&self) -> Granularity {
        self.granularity
    }
}

/// Merges vocabularies built independently into one whose IDs follow the
/// lexicographic order of surface tokens. Returns the merged vocabulary and,
/// for each input, the old-ID → new-ID table.
pub fn merge_vocabularies(vocabs: &[&Vocabulary]) -> Result<(Vocabulary, Vec<Vec<u32>>), String> {
    let granularity = match vocabs.first() {
        Some(v) => v.granularity,
        None => return Ok((Vocabulary::new(Granularity::Word), Vec::new())),
    };
    if vocabs.iter().any(|v| v.granularity != granularity) {
        return Err("cannot merge letter and word vocabularies".into());
    }
    let surfaces: BTreeSet<&str> = vocabs
        .iter()
        .flat_map(|v| v.entries.iter().map(String::as_str))
        .collect();
    let merged = Vocabulary::from_entries(granularity, surfaces)?;
    let remaps = vocabs
        .iter()
        .map(|v| {
            v.entries
                .iter()
                .map(|e| merged.id(e).expect("merged vocabulary covers every input"))
                .collect()
        })
        .collect();
    Ok((merged, remaps))
}

/// A token-ID sequence together with its vocabulary and provenance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenStream {
    pub tokens: Vec<u32>,
    pub vocab: Vocabulary,
    pub source_meta: BTreeMap<String, String>,
}

impl TokenStream {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn granularity(&self) -> Granularity {
        self.vocab.granularity
    }

    pub fn with_meta(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.source_meta.insert(key.into(), value.into());
        self
    }

    /// Surface tokens in stream order.
    pub fn surfaces(&self) -> impl Iterator<Item = &str> + '_ {
        self.tokens
            .iter()
            .map(|&id| self.vocab.token(id).expect("token IDs are within the vocabulary"))
    }

    /// Renders the stream back to text: words joined by single spaces,
    /// letters concatenated.
    pub fn detokenize(&self) -> String {
        match self.granularity() {
            Granularity::Word => self.surfaces().collect::<Vec<_>>().join(" "),
            Granularity::Letter => self.surfaces().collect(),
        }
    }

    /// Rewrites token IDs through `remap` and swaps in `vocab`.
    pub fn remap(self, vocab: Vocabulary, remap: &[u32]) -> TokenStream {
        TokenStream {
            tokens: self.tokens.iter().map(|&t| remap[t as usize]).collect(),
            vocab,
            source_meta: self.source_meta,
        }
    }
}

pub fn tokenize(text: &str, granularity: Granularity) -> TokenStream {
    match granularity {
        Granularity::Word => tokenize_words(text),
        Granularity::Letter => tokenize_letters(text),
    }
}

fn is_apostrophe(c: char) -> bool {
    matches!(c, '\'' | '\u{2019}')
}

fn is_hyphen(c: char) -> bool {
    matches!(c, '-' | '\u{2010}')
}

/// Iterates over the normalized words of `text` without building a vocabulary.
pub fn words(text: &str) -> impl Iterator<Item = String> + '_ {
    let mut chars = text.nfc().peekable();
    std::iter::from_fn(move || {
        let mut word = String::new();
        while let Some(c) = chars.next() {
            if c.is_alphanumeric() {
                word.extend(c.to_lowercase());
            } else if !word.is_empty()
                && (is_apostrophe(c) || is_hyphen(c))
                && chars.peek().is_some_and(|n| n.is_alphanumeric())
            {
                word.push(if is_apostrophe(c) { '\'' } else { '-' });
            } else if !word.is_empty() {
                return Some(word);
            }
        }
        (!word.is_empty()).then_some(word)
    })
}

/// Number of words `tokenize_words` would produce, without interning.
pub fn count_words(text: &str) -> usize {
    words(text).count()
}

pub fn tokenize_words(text: &str) -> TokenStream {
    let mut vocab = Vocabulary::new(Granularity::Word);
    let tokens = words(text).map(|w| vocab.intern(&w)).collect();
    TokenStream {
        tokens,
        vocab,
        source_meta: BTreeMap::new(),
    }
}

fn letter_id(c: char) -> Option<u32> {
    match c {
        'a'..='z' => Some(c as u32 - 'a' as u32),
        '0'..='9' => Some(26 + c as u32 - '0' as u32),
        ' ' => Some(36),
        '.' => Some(37),
        ',' => Some(38),
        ';' => Some(39),
        ':' => Some(40),
        '\'' | '\u{2019}' => Some(41),
        '-' | '\u{2010}' => Some(42),
        '?' => Some(43),
        '!' => Some(44),
        _ => None,
    }
}

const SPACE_ID: u32 = 36;

pub fn tokenize_letters(text: &str) -> TokenStream {
    let mut tokens = Vec::with_capacity(text.len());
    for c in text.nfc().flat_map(char::to_lowercase) {
        let id = if c.is_whitespace() {
            SPACE_ID
        } else {
            match letter_id(c) {
                Some(id) => id,
                None => continue,
            }
        };
        if id == SPACE_ID && tokens.last() == Some(&SPACE_ID) {
            continue;
        }
        tokens.push(id);
    }
    TokenStream {
        tokens,
        vocab: Vocabulary::letters(),
        source_meta: BTreeMap::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn surfaces(s: &TokenStream) -> Vec<&str> {
        s.surfaces().collect()
    }

    #[test]
    fn words_basic() {
        let s = tokenize_words("Hello, world!");
        assert_eq!(surfaces(&s), ["hello", "world"]);
        assert_eq!(s.tokens, [0, 1]);
    }

    #[test]
    fn words_empty() {
        let s = tokenize_words("");
        assert!(s.is_empty());
        assert!(s.vocab.is_empty());
        assert!(tokenize_words(" ,.;-- ' ").is_empty());
    }

    #[test]
    fn words_apostrophe_hyphen_case() {
        let s = tokenize_words("It's state-of-the-art. IT'S");
        assert_eq!(surfaces(&s), ["it's", "state-of-the-art", "it's"]);
        assert_eq!(s.tokens, [0, 1, 0]);
    }

    #[test]
    fn words_edge_punctuation() {
        let s = tokenize_words("'quoted' -dash- rock 'n' roll -- a--b x'");
        assert_eq!(surfaces(&s), ["quoted", "dash", "rock", "n", "roll", "a", "b", "x"]);
    }

    #[test]
    fn words_curly_apostrophe_and_digits() {
        let s = tokenize_words("Don\u{2019}t 42nd COVID-19");
        assert_eq!(surfaces(&s), ["don't", "42nd", "covid-19"]);
    }

    #[test]
    fn words_nfc_stable() {
        let composed = tokenize_words("caf\u{e9} CAF\u{c9}");
        let decomposed = tokenize_words("cafe\u{301} CAFE\u{301}");
        assert_eq!(composed, decomposed);
        assert_eq!(composed.tokens, [0, 0]);
    }

    #[test]
    fn letters_basic() {
        let s = tokenize_letters("Ab  c");
        assert_eq!(surfaces(&s), ["a", "b", " ", "c"]);
    }

    #[test]
    fn letters_drop_out_of_alphabet() {
        let s = tokenize_letters("café");
        assert_eq!(s.detokenize(), "caf");
        assert_eq!(tokenize_letters("cafe\u{301}").detokenize(), "caf");
    }

    #[test]
    fn letters_whitespace_runs() {
        let s = tokenize_letters("a \t\n b\r\n\nc");
        assert_eq!(s.detokenize(), "a b c");
        assert_eq!(tokenize_letters("x é y").detokenize(), "x y");
    }

    #[test]
    fn letter_alphabet_is_fixed() {
        assert_eq!(tokenize_letters("").vocab.len(), 45);
        assert_eq!(tokenize_letters("zzz").vocab.len(), 45);
        let v = Vocabulary::letters();
        for (i, c) in LETTER_ALPHABET.iter().enumerate() {
            assert_eq!(v.id(&c.to_string()), Some(i as u32));
            assert_eq!(letter_id(*c), Some(i as u32));
        }
    }

    #[test]
    fn letters_marks() {
        let s = tokenize_letters("Hi! Why? a;b:c, d.e-f'g");
        assert_eq!(s.detokenize(), "hi! why? a;b:c, d.e-f'g");
    }

    #[test]
    fn count_words_matches_tokenizer() {
        let text = "One two, three-four five's. ÆSIR ǅemal";
        assert_eq!(count_words(text), tokenize_words(text).len());
    }

    #[test]
    fn vocabulary_rejects_duplicates() {
        assert!(Vocabulary::from_entries(Granularity::Word, ["a", "b", "a"]).is_err());
    }

    #[test]
    fn merge_is_lexicographic() {
        let a = tokenize_words("pear apple pear");
        let b = tokenize_words("zebra apple");
        let (merged, remaps) = merge_vocabularies(&[&a.vocab, &b.vocab]).unwrap();
        assert_eq!(merged.entries(), ["apple", "pear", "zebra"]);
        let a2 = a.clone().remap(merged.clone(), &remaps[0]);
        let b2 = b.clone().remap(merged, &remaps[1]);
        assert_eq!(a2.tokens, [1, 0, 1]);
        assert_eq!(b2.tokens, [2, 0]);
        assert_eq!(a2.detokenize(), a.detokenize());
        assert_eq!(b2.detokenize(), b.detokenize());
    }

    #[test]
    fn granularity_parse() {
        assert_eq!("Word".parse::<Granularity>().unwrap(), Granularity::Word);
        assert_eq!("letter".parse::<Granularity>().unwrap(), Granularity::Letter);
        assert!("byte".parse::<Granularity>().is_err());
    }
}
