//! Synthetic error corpora for channel training.
//!
//! Each vocabulary word gets a corpus of corrupted forms produced by
//! six generating functions (deletion, insertion, substitution,
//! transposition, white-space insertion, double stroke). Insertions and
//! substitutions come in two modes: keyboard-neighbor (the training
//! default) and full-alphabet (used to cross-check candidate counts
//! against the classic `57n + 27` single-error formula).
//!
//! The generating functions return one string per applied operation, so
//! duplicates can occur; deduplication happens when a corpus is
//! assembled.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{CtrError, Result};
use crate::od::Lexicon;

/// Immediate left/right key neighbors per character.
#[derive(Debug, Clone)]
pub struct KeyboardLayout {
    neighbors: BTreeMap<char, Vec<char>>,
}

impl KeyboardLayout {
    /// Row-adjacency neighbors for a standard QWERTY layout.
    pub fn qwerty() -> Self {
        Self::from_rows(&["1234567890", "qwertyuiop", "asdfghjkl", "zxcvbnm"])
    }

    /// Builds the neighbor map from keyboard rows (each row a string of
    /// adjacent keys).
    pub fn from_rows(rows: &[&str]) -> Self {
        let mut neighbors: BTreeMap<char, Vec<char>> = BTreeMap::new();
        for row in rows {
            let chars: Vec<char> = row.chars().collect();
            for (i, &c) in chars.iter().enumerate() {
                let entry = neighbors.entry(c).or_default();
                if i > 0 {
                    entry.push(chars[i - 1]);
                }
                if i + 1 < chars.len() {
                    entry.push(chars[i + 1]);
                }
            }
        }
        KeyboardLayout { neighbors }
    }

    /// Parses `char<TAB>neighbors` lines.
    pub fn parse(text: &str) -> Result<Self> {
        let mut neighbors: BTreeMap<char, Vec<char>> = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim_end();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, rest) = line.split_once('\t').ok_or_else(|| {
                CtrError::Parse(format!("keyboard line {}: expected char<TAB>neighbors", lineno + 1))
            })?;
            let mut key_chars = key.chars();
            let key = key_chars.next().ok_or_else(|| {
                CtrError::Parse(format!("keyboard line {}: empty key", lineno + 1))
            })?;
            if key_chars.next().is_some() {
                return Err(CtrError::Parse(format!(
                    "keyboard line {}: key must be a single character",
                    lineno + 1
                )));
            }
            let ns: Vec<char> = rest.chars().filter(|c| !c.is_whitespace()).collect();
            if ns.len() > 2 {
                return Err(CtrError::Parse(format!(
                    "keyboard line {}: at most two immediate neighbors allowed",
                    lineno + 1
                )));
            }
            neighbors.insert(key, ns);
        }
        Ok(KeyboardLayout { neighbors })
    }

    pub fn neighbors(&self, c: char) -> &[char] {
        self.neighbors.get(&c).map(Vec::as_slice).unwrap_or(&[])
    }
}

/// The operation that produced a corruption.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ErrorOp {
    Deletion,
    Insertion,
    Substitution,
    Transposition,
    SpaceInsertion,
    DoubleStroke,
}

impl fmt::Display for ErrorOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            ErrorOp::Deletion => "deletion",
            ErrorOp::Insertion => "insertion",
            ErrorOp::Substitution => "substitution",
            ErrorOp::Transposition => "transposition",
            ErrorOp::SpaceInsertion => "space-insertion",
            ErrorOp::DoubleStroke => "double-stroke",
        };
        f.write_str(name)
    }
}

/// One corruption per character position, that character removed.
/// Zero-length results are dropped (nothing can emit an empty string).
pub fn gen_deletions(word: &str) -> Vec<String> {
    let chars: Vec<char> = word.chars().collect();
    (0..chars.len())
        .map(|i| chars.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &c)| c).collect())
        .filter(|s: &String| !s.is_empty())
        .collect()
}

/// Keyboard-neighbor insertions: at each gap, every neighbor of the
/// characters adjacent to the gap.
pub fn gen_insertions(word: &str, kb: &KeyboardLayout) -> Vec<String> {
    let chars: Vec<char> = word.chars().collect();
    let mut out = Vec::new();
    for gap in 0..=chars.len() {
        let mut candidates: Vec<char> = Vec::new();
        if gap > 0 {
            candidates.extend(kb.neighbors(chars[gap - 1]));
        }
        if gap < chars.len() {
            candidates.extend(kb.neighbors(chars[gap]));
        }
        candidates.dedup();
        for c in candidates {
            out.push(insert_at(&chars, gap, c));
        }
    }
    out
}

/// Full-alphabet insertions: every alphabet character at every gap
/// (`|alphabet| * (n+1)` results).
pub fn gen_insertions_full(word: &str, alphabet: &[char]) -> Vec<String> {
    let chars: Vec<char> = word.chars().collect();
    let mut out = Vec::new();
    for gap in 0..=chars.len() {
        for &c in alphabet {
            out.push(insert_at(&chars, gap, c));
        }
    }
    out
}

/// Keyboard-neighbor substitutions: each character replaced by each of
/// its neighbors.
pub fn gen_substitutions(word: &str, kb: &KeyboardLayout) -> Vec<String> {
    let chars: Vec<char> = word.chars().collect();
    let mut out = Vec::new();
    for (i, &c) in chars.iter().enumerate() {
        for &n in kb.neighbors(c) {
            out.push(replace_at(&chars, i, n));
        }
    }
    out
}

/// Full-alphabet substitutions: each character replaced by every other
/// alphabet character (`(|alphabet| - 1) * n` results).
pub fn gen_substitutions_full(word: &str, alphabet: &[char]) -> Vec<String> {
    let chars: Vec<char> = word.chars().collect();
    let mut out = Vec::new();
    for (i, &c) in chars.iter().enumerate() {
        for &a in alphabet {
            if a != c {
                out.push(replace_at(&chars, i, a));
            }
        }
    }
    out
}

/// One corruption per adjacent pair, swapped (`n-1` results; swapping
/// identical characters yields the source and is dropped at assembly).
pub fn gen_transpositions(word: &str) -> Vec<String> {
    let chars: Vec<char> = word.chars().collect();
    (0..chars.len().saturating_sub(1))
        .map(|i| {
            let mut c = chars.clone();
            c.swap(i, i + 1);
            c.into_iter().collect()
        })
        .collect()
}

/// A space inserted at each interior position of the word body (the
/// part after any leading space), so no result starts with two spaces.
pub fn gen_space_insertions(word: &str) -> Vec<String> {
    let chars: Vec<char> = word.chars().collect();
    let body_start = if chars.first() == Some(&' ') { 1 } else { 0 };
    (body_start + 1..chars.len())
        .map(|gap| insert_at(&chars, gap, ' '))
        .collect()
}

/// Each character doubled, one corruption per position.
pub fn gen_double_strokes(word: &str) -> Vec<String> {
    let chars: Vec<char> = word.chars().collect();
    (0..chars.len()).map(|i| insert_at(&chars, i, chars[i])).collect()
}

fn insert_at(chars: &[char], gap: usize, c: char) -> String {
    let mut s: String = chars[..gap].iter().collect();
    s.push(c);
    s.extend(&chars[gap..]);
    s
}

fn replace_at(chars: &[char], i: usize, c: char) -> String {
    let mut v = chars.to_vec();
    v[i] = c;
    v.into_iter().collect()
}

/// Single-error candidate count for a length-`n` word over an alphabet
/// of `alphabet_size` characters: deletions `n`, insertions
/// `alphabet_size * (n+1)`, substitutions `(alphabet_size - 1) * n`,
/// transpositions `n - 1`. With the classic 28-character alphabet this
/// is `57n + 27`.
pub fn count_single_error_candidates(n: usize, alphabet_size: usize) -> usize {
    n + alphabet_size * (n + 1) + (alphabet_size - 1) * n + (n - 1)
}

/// Which generating functions to apply when assembling a corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GenOptions {
    pub deletions: bool,
    pub insertions: bool,
    pub substitutions: bool,
    pub transpositions: bool,
    pub space_insertions: bool,
    pub double_strokes: bool,
}

impl GenOptions {
    /// The default training recipe: deletions, substitutions and
    /// white-space insertions.
    pub fn default_recipe() -> Self {
        GenOptions {
            deletions: true,
            insertions: false,
            substitutions: true,
            transpositions: false,
            space_insertions: true,
            double_strokes: false,
        }
    }

    /// Corpora for punctuation and number words: space insertions only.
    pub fn space_only() -> Self {
        GenOptions {
            deletions: false,
            insertions: false,
            substitutions: false,
            transpositions: false,
            space_insertions: true,
            double_strokes: false,
        }
    }
}

/// A source word with its deduplicated corruptions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ErrorCorpus {
    pub source: String,
    /// Distinct corruptions with the operation that first produced each.
    pub corruptions: Vec<(String, ErrorOp)>,
}

impl ErrorCorpus {
    /// Applies the selected generating functions and deduplicates.
    /// Empty results and results identical to the source are dropped.
    pub fn generate(source: &str, opts: &GenOptions, kb: &KeyboardLayout) -> Self {
        let mut corpus = ErrorCorpus { source: source.to_string(), corruptions: Vec::new() };
        let add = |strings: Vec<String>, op: ErrorOp, corpus: &mut ErrorCorpus| {
            for s in strings {
                if s.is_empty() || s == corpus.source {
                    continue;
                }
                if !corpus.corruptions.iter().any(|(c, _)| *c == s) {
                    corpus.corruptions.push((s, op));
                }
            }
        };
        if opts.deletions {
            add(gen_deletions(source), ErrorOp::Deletion, &mut corpus);
        }
        if opts.insertions {
            add(gen_insertions(source, kb), ErrorOp::Insertion, &mut corpus);
        }
        if opts.substitutions {
            add(gen_substitutions(source, kb), ErrorOp::Substitution, &mut corpus);
        }
        if opts.transpositions {
            add(gen_transpositions(source), ErrorOp::Transposition, &mut corpus);
        }
        if opts.space_insertions {
            add(gen_space_insertions(source), ErrorOp::SpaceInsertion, &mut corpus);
        }
        if opts.double_strokes {
            add(gen_double_strokes(source), ErrorOp::DoubleStroke, &mut corpus);
        }
        corpus
    }

    /// The strings a word model trains on: the pristine form first, then
    /// every corruption.
    pub fn training_strings(&self) -> Vec<&str> {
        std::iter::once(self.source.as_str())
            .chain(self.corruptions.iter().map(|(s, _)| s.as_str()))
            .collect()
    }
}

/// Removes corruptions that are valid vocabulary words (ignoring any
/// leading space), so word models never train to recognize other words.
pub fn filter_real_words(corpus: &ErrorCorpus, lexicon: &Lexicon) -> ErrorCorpus {
    ErrorCorpus {
        source: corpus.source.clone(),
        corruptions: corpus
            .corruptions
            .iter()
            .filter(|(s, _)| !lexicon.contains_word(s.strip_prefix(' ').unwrap_or(s)))
            .cloned()
            .collect(),
    }
}
