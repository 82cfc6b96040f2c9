//! Orthographic decoder: one left-to-right character HMM per
//! vocabulary word.
//!
//! A word model has one emitting state per character (plus an optional
//! initial space state for connected recognition), entry and exit
//! states, and left-to-right transitions with self-loops and skips up
//! to a bound `delta`. Self-loops absorb insertions, skips absorb
//! deletions, and each state's observation row — biased toward its own
//! character — absorbs substitutions. With a space state and `delta >=
//! 2`, the entry transition that skips the space state lets a model
//! start mid-string, which is what makes run-ons recoverable.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use crate::alphabet::CharacterAlphabet;
use crate::errgen::{filter_real_words, ErrorCorpus, GenOptions, KeyboardLayout};
use crate::error::{CtrError, Result};
use crate::hmm::{self, Hmm, ObservationSequence};
use crate::model_io;

/// Default skip bound.
pub const DEFAULT_DELTA: usize = 2;
/// Default observation-smoothing floor after channel training.
pub const DEFAULT_EPS_OBS: f64 = 1e-4;
/// Default Baum-Welch iteration cap for word models.
pub const DEFAULT_MAX_ITERS: usize = 50;
/// Default log-likelihood convergence threshold.
pub const DEFAULT_CONV_EPS: f64 = 1e-6;

const SELF_LOOP_WEIGHT: f64 = 0.1;
const ADVANCE_WEIGHT: f64 = 0.8;
const SKIP_WEIGHT: f64 = 0.1;
const OWN_CHAR_WEIGHT: f64 = 0.9;

/// A per-word character HMM.
#[derive(Debug, Clone, PartialEq)]
pub struct WordModel {
    /// The modeled word; includes the leading space in connected mode.
    pub model_id: String,
    pub hmm: Hmm,
    /// Skip bound: no transition advances more than `delta` states.
    pub delta: usize,
}

/// One vocabulary entry: the plain word plus whether it is a "special"
/// word (punctuation, numbers) that trains on space corruptions only.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexiconEntry {
    pub word: String,
    pub special: bool,
}

impl LexiconEntry {
    pub fn new(word: impl Into<String>) -> Self {
        LexiconEntry { word: word.into(), special: false }
    }

    pub fn special(word: impl Into<String>) -> Self {
        LexiconEntry { word: word.into(), special: true }
    }
}

/// Builds an untrained word model over `word`'s characters.
///
/// When `with_space_state` is set a leading space state is prepended
/// (unless `word` already starts with one) and the resulting model id
/// carries the leading space.
pub fn build_word_model(
    word: &str,
    alphabet: &CharacterAlphabet,
    with_space_state: bool,
    delta: usize,
) -> Result<WordModel> {
    if word.is_empty() {
        return Err(CtrError::Input("cannot model an empty word".into()));
    }
    if delta < 1 {
        return Err(CtrError::Parameter("delta must be at least 1".into()));
    }
    let model_id = if with_space_state && !word.starts_with(' ') {
        format!(" {word}")
    } else {
        word.to_string()
    };
    let symbols = alphabet.encode_strict(&model_id)?;
    let m = symbols.len();
    let n = m + 2;
    let k = alphabet.len();

    let mut trans_rows = Vec::with_capacity(n - 1);
    for i in 0..=m {
        // Destinations 1..=m+1; allowed j in [max(i,1), min(i+delta, m+1)].
        let mut row = vec![0.0; m + 1];
        let lo = i.max(1);
        let hi = (i + delta).min(m + 1);
        let skip_count = (lo..=hi).filter(|&j| j > i + 1).count();
        for j in lo..=hi {
            let w = if j == i {
                SELF_LOOP_WEIGHT
            } else if j == i + 1 {
                ADVANCE_WEIGHT
            } else {
                SKIP_WEIGHT / skip_count as f64
            };
            row[j - 1] = w;
        }
        let sum: f64 = row.iter().sum();
        for v in &mut row {
            *v /= sum;
        }
        trans_rows.push(row);
    }

    let mut obs_rows = Vec::with_capacity(m);
    for &sym in &symbols {
        let row = if k == 1 {
            vec![1.0]
        } else {
            let rest = (1.0 - OWN_CHAR_WEIGHT) / (k - 1) as f64;
            (0..k).map(|s| if s == sym { OWN_CHAR_WEIGHT } else { rest }).collect()
        };
        obs_rows.push(row);
    }

    Ok(WordModel { model_id, hmm: Hmm::new(n, k, trans_rows, obs_rows)?, delta })
}

/// Trains a word model on its error corpus, then floors the observation
/// rows so every emission stays survivable.
///
/// Transitions are left as Baum-Welch produced them (its expected
/// counts keep structural zeros at exactly zero). In the observation
/// rows, entries below `eps_obs` — unseen or negligible events — are
/// raised to `eps_obs` with the rest of the row scaled down.
pub fn train_word_model(
    model: &WordModel,
    alphabet: &CharacterAlphabet,
    corpus: &[&str],
    eps_obs: f64,
    max_iters: usize,
    conv_eps: f64,
) -> Result<WordModel> {
    let mut sequences = Vec::new();
    for s in corpus {
        if s.is_empty() {
            continue;
        }
        sequences.push(ObservationSequence::new(alphabet.encode_strict(s)?, alphabet.len())?);
    }
    let outcome = hmm::baum_welch_multi(&model.hmm, &sequences, max_iters, conv_eps)?;
    let mut trained = outcome.model;
    let k = alphabet.len();
    if eps_obs * k as f64 >= 1.0 {
        return Err(CtrError::Parameter(format!(
            "eps_obs {eps_obs} too large for an alphabet of {k}"
        )));
    }
    // Entries below this threshold are treated as unseen; anything kept
    // still clears eps_obs after the smoothing scale-down.
    let unseen_threshold = eps_obs / (1.0 - eps_obs * k as f64);
    let eligible = vec![true; k];
    for j in 1..trained.num_states() - 1 {
        let zeroed: Vec<f64> = trained
            .observation_row(j)
            .iter()
            .map(|&p| if p < unseen_threshold { 0.0 } else { p })
            .collect();
        // Renormalize before smoothing so the floor is exact.
        let sum: f64 = zeroed.iter().sum();
        if sum <= 0.0 {
            return Err(CtrError::Training(format!(
                "observation row {j} lost all mass during training"
            )));
        }
        let renorm: Vec<f64> = zeroed.into_iter().map(|p| p / sum).collect();
        let smoothed = hmm::smooth_additive(&renorm, &eligible, eps_obs)?;
        trained.set_observation_row(j, smoothed)?;
    }
    Ok(WordModel { model_id: model.model_id.clone(), hmm: trained, delta: model.delta })
}

/// The full set of word models plus the shared character alphabet.
#[derive(Debug, Clone)]
pub struct Lexicon {
    models: Vec<WordModel>,
    /// Plain vocabulary words (no leading space), parallel to `models`.
    words: Vec<String>,
    special: Vec<bool>,
    index: BTreeMap<String, usize>,
    alphabet: CharacterAlphabet,
    with_space: bool,
    delta: usize,
}

impl Lexicon {
    /// Builds untrained models for every entry. Model ids must be
    /// unique.
    pub fn build(entries: &[LexiconEntry], with_space: bool, delta: usize) -> Result<Self> {
        let alphabet = CharacterAlphabet::from_words(entries.iter().map(|e| e.word.as_str()));
        let mut models = Vec::with_capacity(entries.len());
        let mut words = Vec::with_capacity(entries.len());
        let mut special = Vec::with_capacity(entries.len());
        let mut index = BTreeMap::new();
        for (i, entry) in entries.iter().enumerate() {
            let model = build_word_model(&entry.word, &alphabet, with_space, delta)?;
            if index.insert(entry.word.clone(), i).is_some() {
                return Err(CtrError::Input(format!("duplicate vocabulary word {:?}", entry.word)));
            }
            models.push(model);
            words.push(entry.word.clone());
            special.push(entry.special);
        }
        Ok(Lexicon { models, words, special, index, alphabet, with_space, delta })
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn model(&self, idx: usize) -> &WordModel {
        &self.models[idx]
    }

    /// Plain vocabulary word (no leading space).
    pub fn word(&self, idx: usize) -> &str {
        &self.words[idx]
    }

    pub fn is_special(&self, idx: usize) -> bool {
        self.special[idx]
    }

    pub fn find(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn contains_word(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    pub fn alphabet(&self) -> &CharacterAlphabet {
        &self.alphabet
    }

    pub fn with_space(&self) -> bool {
        self.with_space
    }

    pub fn delta(&self) -> usize {
        self.delta
    }

    pub fn replace_model(&mut self, idx: usize, model: WordModel) {
        self.models[idx] = model;
    }
}

/// Channel-training configuration for a whole lexicon.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub recipe: GenOptions,
    pub keyboard: KeyboardLayout,
    pub eps_obs: f64,
    pub filter_real_words: bool,
    pub max_iters: usize,
    pub conv_eps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            recipe: GenOptions::default_recipe(),
            keyboard: KeyboardLayout::qwerty(),
            eps_obs: DEFAULT_EPS_OBS,
            filter_real_words: true,
            max_iters: DEFAULT_MAX_ITERS,
            conv_eps: DEFAULT_CONV_EPS,
        }
    }
}

/// Replaces characters that lack their own symbol with the reserved
/// unknown character, so corpus strings (whose keyboard-neighbor
/// substitutions may fall outside the lexicon alphabet) stay encodable.
pub fn sanitize(alphabet: &CharacterAlphabet, s: &str) -> String {
    s.chars()
        .map(|c| if alphabet.contains(c) { c } else { crate::alphabet::UNK_CHAR })
        .collect()
}

/// Generates an error corpus for every word and trains its model.
/// Special words use space-insertion corruptions only.
pub fn train_lexicon(lexicon: &mut Lexicon, config: &TrainConfig) -> Result<()> {
    for idx in 0..lexicon.len() {
        let model_id = lexicon.model(idx).model_id.clone();
        let opts = if lexicon.is_special(idx) { GenOptions::space_only() } else { config.recipe };
        let mut corpus = ErrorCorpus::generate(&model_id, &opts, &config.keyboard);
        if config.filter_real_words {
            corpus = filter_real_words(&corpus, lexicon);
        }
        let sanitized: Vec<String> = corpus
            .training_strings()
            .iter()
            .map(|s| sanitize(lexicon.alphabet(), s))
            .collect();
        let strings: Vec<&str> = sanitized.iter().map(String::as_str).collect();
        let trained = train_word_model(
            lexicon.model(idx),
            lexicon.alphabet(),
            &strings,
            config.eps_obs,
            config.max_iters,
            config.conv_eps,
        )?;
        lexicon.replace_model(idx, trained);
        log::debug!("trained model {model_id:?} on {} strings", strings.len());
    }
    Ok(())
}

/// Isolated word recognition: runs every word model over `input` with
/// beam pruning and returns the cheapest reading.
///
/// Returns the plain vocabulary word and its alignment cost. Ties are
/// broken toward the lexicographically smallest word.
pub fn best_word_isolated(lexicon: &Lexicon, input: &str, beam: f64) -> Result<(String, f64)> {
    if input.is_empty() {
        return Err(CtrError::Input("empty input".into()));
    }
    if lexicon.is_empty() {
        return Err(CtrError::NoHypothesis("empty lexicon".into()));
    }
    let symbols = lexicon.alphabet().encode(input);
    let costs: Vec<_> = (0..lexicon.len()).map(|i| lexicon.model(i).hmm.costs()).collect();
    let mut nets: Vec<_> = (0..lexicon.len())
        .map(|i| crate::token::TokenNetwork::new(&costs[i], lexicon.word(i), 1))
        .collect();
    for net in &mut nets {
        net.inject(crate::token::Token::start());
    }
    for &sym in &symbols {
        for net in &mut nets {
            net.step_model(sym);
        }
        let global_best =
            nets.iter().filter(|n| n.is_active()).map(|n| n.best_cost()).fold(f64::INFINITY, f64::min);
        // Once pruned, a model stays deactivated for the rest of the
        // isolated-word run.
        crate::token::beam_prune(&mut nets, global_best, beam)?;
    }
    let mut best: Option<(String, f64)> = None;
    for net in &nets {
        if let Some(tok) = net.exit_tokens().first() {
            let better = match &best {
                None => true,
                Some((w, c)) => {
                    tok.cost < *c || (tok.cost == *c && net.model_id() < w.as_str())
                }
            };
            if better {
                best = Some((net.model_id().to_string(), tok.cost));
            }
        }
    }
    best.ok_or_else(|| CtrError::NoHypothesis(format!("no model accepts {input:?}")))
}

/// Writes a trained lexicon as a directory: a manifest plus one model
/// file per word in the shared text format.
pub fn write_lexicon(dir: &Path, lexicon: &Lexicon) -> Result<()> {
    fs::create_dir_all(dir)?;
    let symbols: Vec<String> =
        lexicon.alphabet().chars().iter().map(|&c| c.to_string()).collect();
    let mut manifest = BufWriter::new(fs::File::create(dir.join("manifest.txt"))?);
    writeln!(manifest, "ctrlex 1")?;
    writeln!(manifest, "space {}", if lexicon.with_space() { 1 } else { 0 })?;
    writeln!(manifest, "delta {}", lexicon.delta())?;
    writeln!(manifest, "words {}", lexicon.len())?;
    for i in 0..lexicon.len() {
        writeln!(
            manifest,
            "{i} {} {}",
            if lexicon.is_special(i) { "special" } else { "normal" },
            model_io::escape_symbol(lexicon.word(i)),
        )?;
        let mut f = BufWriter::new(fs::File::create(dir.join(model_file_name(i)))?);
        model_io::write_hmm(&mut f, &lexicon.model(i).hmm, &symbols)?;
        f.flush()?;
    }
    manifest.flush()?;
    Ok(())
}

fn model_file_name(i: usize) -> String {
    format!("model_{i:04}.txt")
}

/// Reads a lexicon directory written by [`write_lexicon`].
pub fn read_lexicon(dir: &Path) -> Result<Lexicon> {
    let mut manifest = BufReader::new(fs::File::open(dir.join("manifest.txt"))?);
    let mut lines = model_io::Lines::new(&mut manifest);
    let header = lines.next_line()?;
    if header.trim() != "ctrlex 1" {
        return Err(CtrError::Parse(format!("not a lexicon manifest: {header:?}")));
    }
    let with_space: u8 = lines.keyword_value("space")?;
    let delta: usize = lines.keyword_value("delta")?;
    let count: usize = lines.keyword_value("words")?;

    let mut models = Vec::with_capacity(count);
    let mut words = Vec::with_capacity(count);
    let mut special = Vec::with_capacity(count);
    let mut index = BTreeMap::new();
    let mut alphabet: Option<CharacterAlphabet> = None;
    for expect_i in 0..count {
        let line = lines.next_line()?;
        let mut parts = line.splitn(3, ' ');
        let i: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| CtrError::Parse(format!("bad manifest line {line:?}")))?;
        if i != expect_i {
            return Err(CtrError::Parse(format!("manifest entries out of order at {line:?}")));
        }
        let kind = parts
            .next()
            .ok_or_else(|| CtrError::Parse(format!("bad manifest line {line:?}")))?;
        let word = model_io::unescape_symbol(
            parts.next().ok_or_else(|| CtrError::Parse(format!("bad manifest line {line:?}")))?,
        )?;

        let mut f = BufReader::new(fs::File::open(dir.join(model_file_name(i)))?);
        let (hmm, symbols) = model_io::read_hmm(&mut f)?;
        let chars: Vec<char> = symbols
            .iter()
            .map(|s| {
                let mut cs = s.chars();
                match (cs.next(), cs.next()) {
                    (Some(c), None) => Ok(c),
                    _ => Err(CtrError::Parse(format!("model symbol {s:?} is not a character"))),
                }
            })
            .collect::<Result<_>>()?;
        let this_alpha = CharacterAlphabet::from_chars(chars)?;
        match &alphabet {
            None => alphabet = Some(this_alpha),
            Some(a) if *a == this_alpha => {}
            Some(_) => {
                return Err(CtrError::Parse(format!(
                    "model {i} uses a different alphabet than the rest of the lexicon"
                )))
            }
        }
        let model_id =
            if with_space == 1 && !word.starts_with(' ') { format!(" {word}") } else { word.clone() };
        index.insert(word.clone(), i);
        models.push(WordModel { model_id, hmm, delta });
        words.push(word);
        special.push(kind == "special");
    }
    if index.len() != count {
        return Err(CtrError::Parse("duplicate word in manifest".into()));
    }
    let alphabet = alphabet
        .ok_or_else(|| CtrError::Parse("lexicon has no words".into()))?;
    Ok(Lexicon { models, words, special, index, alphabet, with_space: with_space == 1, delta })
}
