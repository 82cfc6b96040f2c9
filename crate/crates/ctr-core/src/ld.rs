//! Linguistic decoders: language models over vocabulary word ids,
//! realized as HMMs whose observables are words.
//!
//! Three kinds are supported. The baseline is no model at all: tokens
//! circulate through a single context at zero cost, so recognition is
//! driven purely by the channel. The unigram model has one emitting
//! state whose observation row holds word frequencies. The tag bigram
//! model has one emitting state per tag; transitions carry tag-to-tag
//! probabilities and each state emits only words belonging to its tag,
//! a constraint that survives both training and smoothing.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use crate::error::{CtrError, Result};
use crate::hmm::{self, Hmm, ObservationSequence};
use crate::model_io;

/// Default smoothing floors for bigram models.
pub const DEFAULT_EPS_TRANS: f64 = 1e-3;
pub const DEFAULT_EPS_OBS_BIGRAM: f64 = 1e-3;
/// Default smoothing floor for the unigram model.
pub const DEFAULT_EPS_OBS_UNIGRAM: f64 = 1e-4;

/// An ordered tag inventory with per-word ambiguity classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TagSet {
    tags: Vec<String>,
    tag_index: BTreeMap<String, usize>,
    /// Word -> sorted tag indices.
    membership: BTreeMap<String, Vec<usize>>,
}

impl TagSet {
    pub fn new(tags: Vec<String>, membership: Vec<(String, Vec<String>)>) -> Result<Self> {
        let mut tag_index = BTreeMap::new();
        for (i, t) in tags.iter().enumerate() {
            if tag_index.insert(t.clone(), i).is_some() {
                return Err(CtrError::Input(format!("duplicate tag {t:?}")));
            }
        }
        let mut member_map: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (word, word_tags) in membership {
            let entry = member_map.entry(word).or_default();
            for t in word_tags {
                let idx = *tag_index
                    .get(&t)
                    .ok_or_else(|| CtrError::Input(format!("unknown tag {t:?}")))?;
                if !entry.contains(&idx) {
                    entry.push(idx);
                }
            }
            entry.sort_unstable();
        }
        Ok(TagSet { tags, tag_index, membership: member_map })
    }

    /// Parses a tag-set file: bare `TAG` lines declare tags in order;
    /// `word<TAB>TAG[,TAG...]` lines declare membership.
    pub fn parse(text: &str) -> Result<Self> {
        let mut tags = Vec::new();
        let mut membership = Vec::new();
        for line in text.lines() {
            let line = line.trim_end();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            match line.split_once('\t') {
                None => tags.push(line.to_string()),
                Some((word, ts)) => membership.push((
                    word.to_string(),
                    ts.split(',').map(|t| t.trim().to_string()).collect(),
                )),
            }
        }
        TagSet::new(tags, membership)
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    pub fn tag(&self, idx: usize) -> &str {
        &self.tags[idx]
    }

    pub fn tags(&self) -> &[String] {
        &self.tags
    }

    pub fn find_tag(&self, name: &str) -> Option<usize> {
        self.tag_index.get(name).copied()
    }

    /// Tag indices `word` may carry; empty if unknown.
    pub fn tags_of(&self, word: &str) -> &[usize] {
        self.membership.get(word).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Largest ambiguity class; drives the n-best requirement.
    pub fn max_ambiguity(&self) -> usize {
        self.membership.values().map(Vec::len).max().unwrap_or(1).max(1)
    }
}

/// Sentences of (word, tag) pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaggedCorpus {
    pub sentences: Vec<Vec<(String, String)>>,
}

impl TaggedCorpus {
    /// Parses one sentence per line, tokens as `word/TAG`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut sentences = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut sentence = Vec::new();
            for token in line.split_whitespace() {
                let (word, tag) = token.rsplit_once('/').ok_or_else(|| {
                    CtrError::Parse(format!("token {token:?} is not word/TAG"))
                })?;
                if word.is_empty() || tag.is_empty() {
                    return Err(CtrError::Parse(format!("token {token:?} is not word/TAG")));
                }
                sentence.push((word.to_string(), tag.to_string()));
            }
            sentences.push(sentence);
        }
        Ok(TaggedCorpus { sentences })
    }
}

/// Parses an untagged corpus: whitespace-tokenized lines, one sentence
/// per line.
pub fn parse_untagged(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .map(|l| l.split_whitespace().map(str::to_string).collect::<Vec<_>>())
        .filter(|s| !s.is_empty())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LdKind {
    Baseline,
    Unigram,
    Bigram,
}

impl LdKind {
    fn name(self) -> &'static str {
        match self {
            LdKind::Baseline => "baseline",
            LdKind::Unigram => "unigram",
            LdKind::Bigram => "bigram",
        }
    }
}

/// A linguistic decoder: context states over vocabulary observables.
#[derive(Debug, Clone, PartialEq)]
pub struct LdModel {
    kind: LdKind,
    vocab: Vec<String>,
    vocab_index: BTreeMap<String, usize>,
    /// Context (state) names; a single `"*"` outside bigram models.
    contexts: Vec<String>,
    /// Word index -> context indices allowed to emit it.
    membership: Vec<Vec<usize>>,
    /// `None` for the baseline, which adds no cost anywhere.
    hmm: Option<Hmm>,
}

impl LdModel {
    pub fn kind(&self) -> LdKind {
        self.kind
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn word_index(&self, word: &str) -> Option<usize> {
        self.vocab_index.get(word).copied()
    }

    pub fn num_contexts(&self) -> usize {
        self.contexts.len()
    }

    pub fn context_name(&self, ctx: usize) -> &str {
        &self.contexts[ctx]
    }

    /// Contexts allowed to hypothesize `word_idx`.
    pub fn membership(&self, word_idx: usize) -> &[usize] {
        &self.membership[word_idx]
    }

    pub fn max_ambiguity(&self) -> usize {
        self.membership.iter().map(Vec::len).max().unwrap_or(1)
    }

    /// The underlying HMM, when the decoder has one.
    pub fn hmm(&self) -> Option<&Hmm> {
        self.hmm.as_ref()
    }

    /// Precomputed negative-log tables for recognition.
    pub fn costs(&self) -> LdCosts {
        let g = self.num_contexts();
        match &self.hmm {
            None => LdCosts {
                baseline: true,
                num_contexts: g,
                entry: Vec::new(),
                trans: Vec::new(),
                exit: Vec::new(),
                obs: Vec::new(),
                membership: self.membership.clone(),
                contexts: self.contexts.clone(),
            },
            Some(hmm) => {
                let v = self.vocab.len();
                let neg = |p: f64| if p <= 0.0 { f64::INFINITY } else { -p.ln() };
                let entry = (0..g).map(|c| neg(hmm.transition(0, c + 1))).collect();
                let exit = (0..g).map(|c| neg(hmm.transition(c + 1, g + 1))).collect();
                let mut trans = Vec::with_capacity(g * g);
                for from in 0..g {
                    for to in 0..g {
                        trans.push(neg(hmm.transition(from + 1, to + 1)));
                    }
                }
                let mut obs = Vec::with_capacity(g * v);
                for ctx in 0..g {
                    for w in 0..v {
                        obs.push(neg(hmm.observation(ctx + 1, w)));
                    }
                }
                LdCosts {
                    baseline: false,
                    num_contexts: g,
                    entry,
                    trans,
                    exit,
                    obs,
                    membership: self.membership.clone(),
                    contexts: self.contexts.clone(),
                }
            }
        }
    }
}

/// Negative-log cost view of an [`LdModel`]; the baseline returns zero
/// everywhere.
#[derive(Debug, Clone)]
pub struct LdCosts {
    baseline: bool,
    num_contexts: usize,
    entry: Vec<f64>,
    trans: Vec<f64>,
    exit: Vec<f64>,
    /// Row-major context x word.
    obs: Vec<f64>,
    membership: Vec<Vec<usize>>,
    contexts: Vec<String>,
}

impl LdCosts {
    pub fn num_contexts(&self) -> usize {
        self.num_contexts
    }

    pub fn context_name(&self, ctx: usize) -> &str {
        &self.contexts[ctx]
    }

    /// Cost of entering `ctx` as the first context of the utterance.
    pub fn entry_cost(&self, ctx: usize) -> f64 {
        if self.baseline {
            0.0
        } else {
            self.entry[ctx]
        }
    }

    /// Cost of moving from context `from` to context `to`.
    pub fn trans_cost(&self, from: usize, to: usize) -> f64 {
        if self.baseline {
            0.0
        } else {
            self.trans[from * self.num_contexts + to]
        }
    }

    /// Cost of ending the utterance in `ctx`.
    pub fn exit_cost(&self, ctx: usize) -> f64 {
        if self.baseline {
            0.0
        } else {
            self.exit[ctx]
        }
    }

    /// Cost of `ctx` hypothesizing word `word_idx`.
    pub fn obs_cost(&self, ctx: usize, word_idx: usize) -> f64 {
        if self.baseline {
            0.0
        } else {
            self.obs[ctx * self.membership.len() + word_idx]
        }
    }

    /// Contexts that may hypothesize `word_idx`.
    pub fn contexts_for(&self, word_idx: usize) -> &[usize] {
        &self.membership[word_idx]
    }
}

/// The degenerate decoder: one context, every cost zero, so recognition
/// cost is pure channel alignment cost.
pub fn build_baseline(vocab: Vec<String>) -> LdModel {
    let n = vocab.len();
    let vocab_index = index_vocab(&vocab);
    LdModel {
        kind: LdKind::Baseline,
        vocab,
        vocab_index,
        contexts: vec!["*".to_string()],
        membership: vec![vec![0]; n],
        hmm: None,
    }
}

fn index_vocab(vocab: &[String]) -> BTreeMap<String, usize> {
    vocab.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect()
}

/// Unigram decoder: a single context whose observation row holds
/// relative word frequencies, smoothed so every in-vocabulary word
/// keeps nonzero probability.
pub fn build_unigram(corpus: &[Vec<String>], vocab: &[String], eps_obs: f64) -> Result<LdModel> {
    let vocab_index = index_vocab(vocab);
    let mut counts = vec![0usize; vocab.len()];
    let mut total = 0usize;
    for sentence in corpus {
        for word in sentence {
            let idx = *vocab_index
                .get(word)
                .ok_or_else(|| CtrError::Input(format!("corpus word {word:?} not in vocabulary")))?;
            counts[idx] += 1;
            total += 1;
        }
    }
    if total == 0 {
        return Err(CtrError::Training("empty unigram training corpus".into()));
    }
    let raw: Vec<f64> = counts.iter().map(|&c| c as f64 / total as f64).collect();
    let smoothed = hmm::smooth_additive(&raw, &vec![true; vocab.len()], eps_obs)?;
    // One emitting state; continuing and stopping are equally likely.
    let hmm = Hmm::new(
        3,
        vocab.len(),
        vec![vec![1.0, 0.0], vec![0.5, 0.5]],
        vec![smoothed],
    )?;
    Ok(LdModel {
        kind: LdKind::Unigram,
        vocab: vocab.to_vec(),
        vocab_index,
        contexts: vec!["*".to_string()],
        membership: vec![vec![0]; vocab.len()],
        hmm: Some(hmm),
    })
}

fn membership_table(tags: &TagSet, vocab: &[String]) -> Result<Vec<Vec<usize>>> {
    vocab
        .iter()
        .map(|w| {
            let m = tags.tags_of(w);
            if m.is_empty() {
                Err(CtrError::Input(format!("word {w:?} belongs to no tag")))
            } else {
                Ok(m.to_vec())
            }
        })
        .collect()
}

/// Supervised tag-bigram decoder estimated from a tagged corpus.
///
/// The entry row comes from sentence-initial tags, the exit column from
/// sentence-final tags, interior rows from tag-pair counts, and each
/// tag's observation row from (tag, word) counts. Transition rows are
/// smoothed over all destinations; observation smoothing is restricted
/// to each tag's membership, so non-member words stay at exactly zero.
/// Tags absent from the corpus fall back to uniform rows (logged).
pub fn build_bigram_supervised(
    tc: &TaggedCorpus,
    tags: &TagSet,
    vocab: &[String],
    eps_trans: f64,
    eps_obs: f64,
) -> Result<LdModel> {
    let g = tags.len();
    if g == 0 {
        return Err(CtrError::Input("empty tag set".into()));
    }
    let vocab_index = index_vocab(vocab);
    let membership = membership_table(tags, vocab)?;

    let mut entry_counts = vec![0f64; g];
    let mut pair_counts = vec![vec![0f64; g]; g];
    let mut final_counts = vec![0f64; g];
    let mut obs_counts = vec![vec![0f64; vocab.len()]; g];
    for sentence in &tc.sentences {
        if sentence.is_empty() {
            continue;
        }
        let mut prev: Option<usize> = None;
        for (word, tag) in sentence {
            let t = tags
                .find_tag(tag)
                .ok_or_else(|| CtrError::Input(format!("corpus tag {tag:?} not in tag set")))?;
            let w = *vocab_index
                .get(word)
                .ok_or_else(|| CtrError::Input(format!("corpus word {word:?} not in vocabulary")))?;
            if !membership[w].contains(&t) {
                return Err(CtrError::Input(format!(
                    "corpus tags {word:?} as {tag:?}, outside its ambiguity class"
                )));
            }
            match prev {
                None => entry_counts[t] += 1.0,
                Some(p) => pair_counts[p][t] += 1.0,
            }
            obs_counts[t][w] += 1.0;
            prev = Some(t);
        }
        final_counts[prev.unwrap()] += 1.0;
    }

    // Entry row over destinations 1..=g plus the exit column (never used
    // from the entry state: empty utterances are not modeled).
    let entry_total: f64 = entry_counts.iter().sum();
    if entry_total == 0.0 {
        return Err(CtrError::Training("empty bigram training corpus".into()));
    }
    let mut trans_rows = Vec::with_capacity(g + 1);
    let entry_raw: Vec<f64> =
        entry_counts.iter().map(|&c| c / entry_total).chain([0.0]).collect();
    trans_rows.push(hmm::smooth_additive(
        &entry_raw,
        &(0..=g).map(|j| j < g).collect::<Vec<_>>(),
        eps_trans,
    )?);
    for t in 0..g {
        let row_total: f64 = pair_counts[t].iter().sum::<f64>() + final_counts[t];
        let raw: Vec<f64> = if row_total == 0.0 {
            log::warn!("tag {:?} absent from corpus; using uniform transitions", tags.tag(t));
            vec![1.0 / (g + 1) as f64; g + 1]
        } else {
            pair_counts[t]
                .iter()
                .map(|&c| c / row_total)
                .chain([final_counts[t] / row_total])
                .collect()
        };
        trans_rows.push(hmm::smooth_additive(&raw, &vec![true; g + 1], eps_trans)?);
    }

    let mut obs_rows = Vec::with_capacity(g);
    for t in 0..g {
        let eligible: Vec<bool> = (0..vocab.len()).map(|w| membership[w].contains(&t)).collect();
        let member_count = eligible.iter().filter(|&&e| e).count();
        if member_count == 0 {
            return Err(CtrError::Training(format!("tag {:?} has no member words", tags.tag(t))));
        }
        let total: f64 = obs_counts[t].iter().sum();
        let raw: Vec<f64> = if total == 0.0 {
            log::warn!("tag {:?} unobserved; using uniform emissions over members", tags.tag(t));
            eligible.iter().map(|&e| if e { 1.0 / member_count as f64 } else { 0.0 }).collect()
        } else {
            obs_counts[t].iter().map(|&c| c / total).collect()
        };
        obs_rows.push(hmm::smooth_additive(&raw, &eligible, eps_obs)?);
    }

    let hmm = Hmm::new(g + 2, vocab.len(), trans_rows, obs_rows)?;
    Ok(LdModel {
        kind: LdKind::Bigram,
        vocab: vocab.to_vec(),
        vocab_index,
        contexts: tags.tags().to_vec(),
        membership,
        hmm: Some(hmm),
    })
}

/// Unsupervised tag-bigram decoder: starts from uniform transitions and
/// membership-constrained uniform emissions, trains with Baum-Welch on
/// word-id sequences, then smooths. Membership zeros survive training
/// (zero emissions collect zero expected counts) and smoothing.
pub fn build_bigram_unsupervised(
    corpus: &[Vec<String>],
    tags: &TagSet,
    vocab: &[String],
    max_iters: usize,
    eps_trans: f64,
    eps_obs: f64,
) -> Result<LdModel> {
    let g = tags.len();
    if g == 0 {
        return Err(CtrError::Input("empty tag set".into()));
    }
    let vocab_index = index_vocab(vocab);
    let membership = membership_table(tags, vocab)?;

    let mut trans_rows = Vec::with_capacity(g + 1);
    trans_rows.push((0..=g).map(|j| if j < g { 1.0 / g as f64 } else { 0.0 }).collect());
    for _ in 0..g {
        trans_rows.push(vec![1.0 / (g + 1) as f64; g + 1]);
    }
    let mut obs_rows = Vec::with_capacity(g);
    for t in 0..g {
        let members: Vec<usize> =
            (0..vocab.len()).filter(|&w| membership[w].contains(&t)).collect();
        if members.is_empty() {
            return Err(CtrError::Training(format!("tag {:?} has no member words", tags.tag(t))));
        }
        let mut row = vec![0.0; vocab.len()];
        for &w in &members {
            row[w] = 1.0 / members.len() as f64;
        }
        obs_rows.push(row);
    }
    let init = Hmm::new(g + 2, vocab.len(), trans_rows, obs_rows)?;

    let mut sequences = Vec::with_capacity(corpus.len());
    for sentence in corpus {
        if sentence.is_empty() {
            continue;
        }
        let ids: Vec<usize> = sentence
            .iter()
            .map(|w| {
                vocab_index
                    .get(w)
                    .copied()
                    .ok_or_else(|| CtrError::Input(format!("corpus word {w:?} not in vocabulary")))
            })
            .collect::<Result<_>>()?;
        sequences.push(ObservationSequence::new(ids, vocab.len())?);
    }
    let outcome = hmm::baum_welch_multi(&init, &sequences, max_iters, 1e-9)?;
    let mut trained = outcome.model;

    // Smooth in place: transitions over every destination, emissions
    // over members only.
    let mut smoothed_trans = Vec::with_capacity(g + 1);
    let entry_eligible: Vec<bool> = (0..=g).map(|j| j < g).collect();
    smoothed_trans.push(hmm::smooth_additive(trained.transition_row(0), &entry_eligible, eps_trans)?);
    for t in 0..g {
        smoothed_trans
            .push(hmm::smooth_additive(trained.transition_row(t + 1), &vec![true; g + 1], eps_trans)?);
    }
    let mut smoothed_obs = Vec::with_capacity(g);
    for t in 0..g {
        let eligible: Vec<bool> = (0..vocab.len()).map(|w| membership[w].contains(&t)).collect();
        smoothed_obs.push(hmm::smooth_additive(trained.observation_row(t + 1), &eligible, eps_obs)?);
    }
    trained = Hmm::new(g + 2, vocab.len(), smoothed_trans, smoothed_obs)?;

    Ok(LdModel {
        kind: LdKind::Bigram,
        vocab: vocab.to_vec(),
        vocab_index,
        contexts: tags.tags().to_vec(),
        membership,
        hmm: Some(trained),
    })
}

/// Writes a decoder in the versioned text format.
pub fn write_ld<W: Write>(w: &mut W, ld: &LdModel) -> Result<()> {
    writeln!(w, "ctrld 1")?;
    writeln!(w, "kind {}", ld.kind.name())?;
    writeln!(w, "vocab {}", ld.vocab.len())?;
    for word in &ld.vocab {
        writeln!(w, "{}", model_io::escape_symbol(word))?;
    }
    writeln!(w, "contexts {}", ld.contexts.len())?;
    for c in &ld.contexts {
        writeln!(w, "{}", model_io::escape_symbol(c))?;
    }
    writeln!(w, "membership")?;
    for (i, m) in ld.membership.iter().enumerate() {
        let ctxs: Vec<String> = m.iter().map(usize::to_string).collect();
        writeln!(w, "{i} {}", ctxs.join(" "))?;
    }
    if let Some(hmm) = &ld.hmm {
        let symbols: Vec<String> = ld.vocab.clone();
        model_io::write_hmm(w, hmm, &symbols)?;
    }
    Ok(())
}

/// Reads a decoder written by [`write_ld`].
pub fn read_ld<R: BufRead>(r: &mut R) -> Result<LdModel> {
    let mut lines = model_io::Lines::new(r);
    let header = lines.next_line()?;
    if header.trim() != "ctrld 1" {
        return Err(CtrError::Parse(format!("not a decoder file: {header:?}")));
    }
    let kind_line = lines.next_line()?;
    let kind = match kind_line.strip_prefix("kind ").map(str::trim) {
        Some("baseline") => LdKind::Baseline,
        Some("unigram") => LdKind::Unigram,
        Some("bigram") => LdKind::Bigram,
        _ => return Err(CtrError::Parse(format!("bad kind line {kind_line:?}"))),
    };
    let v: usize = lines.keyword_value("vocab")?;
    let mut vocab = Vec::with_capacity(v);
    for _ in 0..v {
        vocab.push(model_io::unescape_symbol(&lines.next_line()?)?);
    }
    let g: usize = lines.keyword_value("contexts")?;
    let mut contexts = Vec::with_capacity(g);
    for _ in 0..g {
        contexts.push(model_io::unescape_symbol(&lines.next_line()?)?);
    }
    lines.expect("membership")?;
    let mut membership = Vec::with_capacity(v);
    for expect_i in 0..v {
        let line = lines.next_line()?;
        let mut parts = line.split_whitespace();
        let i: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| CtrError::Parse(format!("bad membership line {line:?}")))?;
        if i != expect_i {
            return Err(CtrError::Parse("membership lines out of order".into()));
        }
        let ctxs: Vec<usize> = parts
            .map(|s| {
                s.parse::<usize>()
                    .ok()
                    .filter(|&c| c < g)
                    .ok_or_else(|| CtrError::Parse(format!("bad membership line {line:?}")))
            })
            .collect::<Result<_>>()?;
        if ctxs.is_empty() {
            return Err(CtrError::Parse(format!("word {expect_i} belongs to no context")));
        }
        membership.push(ctxs);
    }
    let hmm = match kind {
        LdKind::Baseline => None,
        _ => {
            let (hmm, symbols) = model_io::read_hmm(r)?;
            if symbols != vocab {
                return Err(CtrError::Parse("decoder symbol table disagrees with vocabulary".into()));
            }
            if hmm.num_states() != g + 2 || hmm.alphabet_size() != v {
                return Err(CtrError::Parse("decoder model dimensions disagree with header".into()));
            }
            Some(hmm)
        }
    };
    let vocab_index = index_vocab(&vocab);
    Ok(LdModel { kind, vocab, vocab_index, contexts, membership, hmm })
}
