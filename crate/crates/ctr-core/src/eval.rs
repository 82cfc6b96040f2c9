//! Evaluation protocol: key sets, outcome matching, and per-category
//! recall/precision.
//!
//! A key set holds hand-made `(original, corrected)` pairs. The error
//! pairs (`original != corrected`) form the key `A`; the system's
//! candidate set `C` holds every change it made plus every key error it
//! left untouched, and `B = A ∩ C` is what it got exactly right.
//! Recall is `|B|/|A|·100`, precision `|B|/|C|·100`; by construction
//! `|C| >= |A|`, so precision can never exceed recall. The same
//! accounting is repeated per error span, with spans classified along
//! three orthogonal axes: misspelling/run-on/split, nonword/real-word,
//! and single/multiple.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{CtrError, Result};
use crate::od::Lexicon;

/// Segmentation structure of an error span.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Structure {
    /// Same number of tokens on both sides.
    Misspelling,
    /// Two or more words written as one token: the correction has more
    /// tokens.
    RunOn,
    /// One word written as several tokens: the correction has fewer.
    Split,
}

/// Whether the erroneous tokens happen to be vocabulary words.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lexical {
    Nonword,
    RealWord,
}

/// Whether one basic operation suffices to explain the error.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Multiplicity {
    Single,
    Multiple,
}

/// Full classification of one error span.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ErrorClass {
    pub structure: Structure,
    pub lexical: Lexical,
    pub multiplicity: Multiplicity,
}

/// Minimal number of unit edits (insert, delete, substitute, or swap
/// of adjacent characters) turning `a` into `b`.
pub fn osa_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let (m, n) = (a.len(), b.len());
    let mut d = vec![vec![0usize; n + 1]; m + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=n {
        d[0][j] = j;
    }
    for i in 1..=m {
        for j in 1..=n {
            let sub = if a[i - 1] == b[j - 1] { 0 } else { 1 };
            let mut best = (d[i - 1][j] + 1).min(d[i][j - 1] + 1).min(d[i - 1][j - 1] + sub);
            if i > 1 && j > 1 && a[i - 1] == b[j - 2] && a[i - 2] == b[j - 1] {
                best = best.min(d[i - 2][j - 2] + 1);
            }
            d[i][j] = best;
        }
    }
    d[m][n]
}

/// Classifies one aligned error span against the lexicon.
pub fn classify_error(
    original: &str,
    corrected: &str,
    lexicon: &Lexicon,
) -> Result<ErrorClass> {
    if original == corrected {
        return Err(CtrError::Evaluation(format!(
            "identical spans {original:?} are not an error"
        )));
    }
    let orig_tokens: Vec<&str> = original.split_whitespace().collect();
    let corr_tokens: Vec<&str> = corrected.split_whitespace().collect();
    let structure = match corr_tokens.len().cmp(&orig_tokens.len()) {
        std::cmp::Ordering::Greater => Structure::RunOn,
        std::cmp::Ordering::Less => Structure::Split,
        std::cmp::Ordering::Equal => Structure::Misspelling,
    };
    let lexical = if !orig_tokens.is_empty()
        && orig_tokens.iter().all(|t| lexicon.contains_word(t))
    {
        Lexical::RealWord
    } else {
        Lexical::Nonword
    };
    let multiplicity = if osa_distance(original, corrected) > 1 {
        Multiplicity::Multiple
    } else {
        Multiplicity::Single
    };
    Ok(ErrorClass { structure, lexical, multiplicity })
}

/// Aligns two utterances token-by-token and returns the differing
/// spans as `(original, corrected)` string pairs, left to right.
///
/// The alignment is a minimal-edit matching over whitespace tokens:
/// exact one-to-one matches are free, and every other local operation
/// (substitution, merging up to four tokens into one, splitting one
/// into up to four, insertion, deletion) costs one, with ties resolved
/// toward one-to-one matches.
pub fn align_spans(original: &str, corrected: &str) -> Vec<(String, String)> {
    const GROUP: usize = 4;
    let o: Vec<&str> = original.split_whitespace().collect();
    let c: Vec<&str> = corrected.split_whitespace().collect();
    let (m, n) = (o.len(), c.len());
    let mut d = vec![vec![usize::MAX; n + 1]; m + 1];
    // back[i][j] = (tokens consumed from original, from corrected).
    let mut back = vec![vec![(0usize, 0usize); n + 1]; m + 1];
    d[0][0] = 0;
    for i in 0..=m {
        for j in 0..=n {
            if i == 0 && j == 0 {
                continue;
            }
            let mut best = usize::MAX;
            let mut step = (0, 0);
            let mut consider = |cost: usize, take: (usize, usize)| {
                if cost < best {
                    best = cost;
                    step = take;
                }
            };
            if i >= 1 && j >= 1 {
                let sub = if o[i - 1] == c[j - 1] { 0 } else { 1 };
                consider(d[i - 1][j - 1].saturating_add(sub), (1, 1));
            }
            for k in 2..=GROUP {
                if i >= k && j >= 1 {
                    consider(d[i - k][j - 1].saturating_add(1), (k, 1));
                }
                if i >= 1 && j >= k {
                    consider(d[i - 1][j - k].saturating_add(1), (1, k));
                }
            }
            if i >= 1 {
                consider(d[i - 1][j].saturating_add(1), (1, 0));
            }
            if j >= 1 {
                consider(d[i][j - 1].saturating_add(1), (0, 1));
            }
            d[i][j] = best;
            back[i][j] = step;
        }
    }
    let mut spans = Vec::new();
    let (mut i, mut j) = (m, n);
    while i > 0 || j > 0 {
        let (di, dj) = back[i][j];
        let orig_span = o[i - di..i].join(" ");
        let corr_span = c[j - dj..j].join(" ");
        if orig_span != corr_span {
            spans.push((orig_span, corr_span));
        }
        i -= di;
        j -= dj;
    }
    spans.reverse();
    spans
}

/// Hand-made reference pairs; erroneous pairs form the key `A`.
#[derive(Debug, Clone)]
pub struct KeySet {
    pairs: Vec<(String, String)>,
}

impl KeySet {
    /// Builds a key set, rejecting conflicting duplicates.
    pub fn new(pairs: Vec<(String, String)>) -> Result<Self> {
        let mut seen: BTreeMap<&str, &str> = BTreeMap::new();
        for (orig, corr) in &pairs {
            if let Some(prev) = seen.insert(orig, corr) {
                if prev != corr {
                    return Err(CtrError::Evaluation(format!(
                        "conflicting corrections for {orig:?}"
                    )));
                }
            }
        }
        Ok(KeySet { pairs })
    }

    /// Parses tab-separated `original<TAB>corrected` lines; blank lines
    /// are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (no, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (orig, corr) = line.split_once('\t').ok_or_else(|| {
                CtrError::Parse(format!("key line {}: expected a tab separator", no + 1))
            })?;
            pairs.push((orig.to_string(), corr.to_string()));
        }
        KeySet::new(pairs)
    }

    pub fn pairs(&self) -> &[(String, String)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// One line of the evaluation report.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoryRow {
    pub category: String,
    /// `|A|`: errors in the key.
    pub key: usize,
    /// `|B|`: key errors the system repaired exactly.
    pub matched: usize,
    /// `|C|`: system changes plus unrepaired key errors.
    pub candidates: usize,
    pub recall: f64,
    pub precision: f64,
}

/// The full per-category evaluation report.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub rows: Vec<CategoryRow>,
}

impl Report {
    pub fn row(&self, category: &str) -> Option<&CategoryRow> {
        self.rows.iter().find(|r| r.category == category)
    }

    /// Machine-readable form: one tab-separated line per category.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("category\tkey\tmatched\tcandidates\trecall\tprecision\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{:.1}\t{:.1}\n",
                r.category, r.key, r.matched, r.candidates, r.recall, r.precision
            ));
        }
        out
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<12} {:>6} {:>6} {:>6} {:>8} {:>10}",
            "category", "|A|", "|B|", "|C|", "recall", "precision"
        )?;
        for r in &self.rows {
            writeln!(
                f,
                "{:<12} {:>6} {:>6} {:>6} {:>8.1} {:>10.1}",
                r.category, r.key, r.matched, r.candidates, r.recall, r.precision
            )?;
        }
        Ok(())
    }
}

#[derive(Default, Clone, Copy)]
struct Tally {
    key: usize,
    matched: usize,
    candidates: usize,
}

impl Tally {
    fn row(&self, category: &str) -> CategoryRow {
        let recall = if self.key == 0 { 100.0 } else { self.matched as f64 / self.key as f64 * 100.0 };
        let precision = if self.candidates == 0 {
            100.0
        } else {
            self.matched as f64 / self.candidates as f64 * 100.0
        };
        CategoryRow {
            category: category.to_string(),
            key: self.key,
            matched: self.matched,
            candidates: self.candidates,
            recall,
            precision,
        }
    }
}

const CATEGORIES: [&str; 8] =
    ["total", "misspelling", "run-on", "split", "nonword", "real-word", "single", "multiple"];

fn category_indices(class: ErrorClass) -> [usize; 4] {
    let s = match class.structure {
        Structure::Misspelling => 1,
        Structure::RunOn => 2,
        Structure::Split => 3,
    };
    let l = match class.lexical {
        Lexical::Nonword => 4,
        Lexical::RealWord => 5,
    };
    let m = match class.multiplicity {
        Multiplicity::Single => 6,
        Multiplicity::Multiple => 7,
    };
    [0, s, l, m]
}

/// Scores a system run against a key set.
///
/// `run` holds `(input, output)` pairs and must cover every key input.
/// The report carries an utterance-level row followed by one row per
/// error category; counting is order-independent over the run pairs.
pub fn evaluate(
    run: &[(String, String)],
    key: &KeySet,
    lexicon: &Lexicon,
) -> Result<Report> {
    let mut run_map: BTreeMap<&str, &str> = BTreeMap::new();
    for (input, output) in run {
        if let Some(prev) = run_map.insert(input, output) {
            if prev != output {
                return Err(CtrError::Evaluation(format!(
                    "conflicting run outputs for {input:?}"
                )));
            }
        }
    }
    let mut key_map: BTreeMap<&str, &str> = BTreeMap::new();
    for (orig, corr) in key.pairs() {
        key_map.insert(orig, corr);
        if !run_map.contains_key(orig.as_str()) {
            return Err(CtrError::Evaluation(format!(
                "key input {orig:?} missing from the run"
            )));
        }
    }

    let mut utterances = Tally::default();
    let mut tallies = [Tally::default(); CATEGORIES.len()];

    for (&input, &output) in &run_map {
        let key_corr = key_map.get(input).copied();
        let in_key = key_corr.is_some_and(|c| c != input);
        let changed = output != input;
        if in_key {
            utterances.key += 1;
        }
        if changed || in_key {
            utterances.candidates += 1;
        }
        if in_key && Some(output) == key_corr {
            utterances.matched += 1;
        }

        // Span-level accounting for this utterance.
        let key_spans: Vec<(String, String)> = match key_corr {
            Some(corr) if corr != input => align_spans(input, corr),
            _ => Vec::new(),
        };
        let sys_spans: Vec<(String, String)> =
            if changed { align_spans(input, output) } else { Vec::new() };

        let mut key_unmatched: Vec<bool> = vec![true; key_spans.len()];
        for span in &sys_spans {
            if let Some(k) = key_spans
                .iter()
                .enumerate()
                .position(|(i, ks)| key_unmatched[i] && ks == span)
            {
                key_unmatched[k] = false;
            }
        }
        for span in &key_spans {
            let class = classify_error(&span.0, &span.1, lexicon)?;
            for idx in category_indices(class) {
                tallies[idx].key += 1;
            }
        }
        for span in &sys_spans {
            let class = classify_error(&span.0, &span.1, lexicon)?;
            let matched = key_spans.contains(span);
            for idx in category_indices(class) {
                tallies[idx].candidates += 1;
                if matched {
                    tallies[idx].matched += 1;
                }
            }
        }
        for (span, unmatched) in key_spans.iter().zip(&key_unmatched) {
            if *unmatched {
                let class = classify_error(&span.0, &span.1, lexicon)?;
                for idx in category_indices(class) {
                    tallies[idx].candidates += 1;
                }
            }
        }
    }

    let mut rows = vec![utterances.row("utterances")];
    for (tally, name) in tallies.iter().zip(CATEGORIES) {
        rows.push(tally.row(name));
    }
    Ok(Report { rows })
}
