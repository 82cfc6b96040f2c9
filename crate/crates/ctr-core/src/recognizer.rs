//! Connected text recognition: the search that couples the linguistic
//! decoder (LD) to the orthographic decoder (OD) word models.
//!
//! Per input character, LD contexts hypothesize word models (adding the
//! LD transition and observation costs), every active word network is
//! stepped and beam-pruned, exit tokens propagate back up to the
//! context that proposed them, the survivors are recorded as word link
//! records, and the LD exit is hypothesized. At the end of input, the
//! cheapest exit token's record chain is backtracked into the word
//! sequence and its boundaries — so tokenization falls out of the same
//! search that picks the words.

use crate::error::{CtrError, Result};
use crate::hmm::CostModel;
use crate::ld::{LdCosts, LdModel};
use crate::od::Lexicon;
use crate::token::{beam_prune, Token, TokenNetwork, WlrArena, WlrId};

/// Search parameters.
#[derive(Debug, Clone)]
pub struct RecognizerConfig {
    /// Beam width `B`; `+inf` never prunes.
    pub beam_width: f64,
    /// Tokens retained per state. Must be at least the largest
    /// tag-ambiguity class for the best path to be guaranteed.
    pub n_best: usize,
    /// Annotate each output word with the context that proposed it.
    pub emit_tags: bool,
}

impl Default for RecognizerConfig {
    fn default() -> Self {
        RecognizerConfig { beam_width: f64::INFINITY, n_best: 1, emit_tags: false }
    }
}

/// One decoded hypothesis, plus lower-ranked alternatives when n-best
/// search retains them.
#[derive(Debug, Clone, PartialEq)]
pub struct RecognitionResult {
    /// Plain vocabulary words, in order.
    pub words: Vec<String>,
    /// Character index (1-based) where each word ends; the last equals
    /// the input length.
    pub boundaries: Vec<usize>,
    /// Context names per word, when requested.
    pub tags: Option<Vec<String>>,
    pub total_cost: f64,
    pub alternatives: Vec<RecognitionResult>,
}

impl RecognitionResult {
    /// The corrected text: words joined by single spaces.
    pub fn text(&self) -> String {
        self.words.join(" ")
    }
}

/// An in-progress recognition accepting one character at a time.
pub struct Session<'a> {
    lexicon: &'a Lexicon,
    ld: LdCosts,
    cfg: RecognizerConfig,
    /// One token network per vocabulary word, parallel to the lexicon.
    nets: Vec<TokenNetwork<CostModel>>,
    /// LD observable index per lexicon word.
    ld_word: Vec<usize>,
    /// Tokens resting in each LD context after the last step.
    ld_tokens: Vec<Vec<Token>>,
    /// Set until the first character: hypotheses come from the LD entry
    /// state.
    at_entry: bool,
    arena: WlrArena,
    t: usize,
    finished: bool,
    /// Exit hypotheses `(cost, path, context)` as of the current step.
    exit_candidates: Vec<(f64, WlrId, usize)>,
}

impl<'a> Session<'a> {
    /// Initializes a session over shared, immutable models.
    pub fn new(ld: &LdModel, lexicon: &'a Lexicon, cfg: RecognizerConfig) -> Result<Self> {
        if cfg.n_best < 1 {
            return Err(CtrError::Parameter("n_best must be at least 1".into()));
        }
        if cfg.beam_width < 0.0 || cfg.beam_width.is_nan() {
            return Err(CtrError::Parameter(format!(
                "beam width {} must be nonnegative",
                cfg.beam_width
            )));
        }
        let mut ld_word = Vec::with_capacity(lexicon.len());
        for i in 0..lexicon.len() {
            let idx = ld.word_index(lexicon.word(i)).ok_or_else(|| {
                CtrError::Input(format!(
                    "lexicon word {:?} missing from the decoder vocabulary",
                    lexicon.word(i)
                ))
            })?;
            ld_word.push(idx);
        }
        let nets = (0..lexicon.len())
            .map(|i| TokenNetwork::new(lexicon.model(i).hmm.costs(), lexicon.word(i), cfg.n_best))
            .collect();
        let costs = ld.costs();
        let num_contexts = costs.num_contexts();
        Ok(Session {
            lexicon,
            ld: costs,
            cfg,
            nets,
            ld_word,
            ld_tokens: vec![Vec::new(); num_contexts],
            at_entry: true,
            arena: WlrArena::new(),
            t: 0,
            finished: false,
            exit_candidates: Vec::new(),
        })
    }

    /// Consumes the next input character.
    pub fn feed(&mut self, c: char) -> Result<()> {
        if self.finished {
            return Err(CtrError::Input("session already finalized".into()));
        }
        self.t += 1;
        let sym = self.lexicon.alphabet().symbol_of(c);
        let g = self.ld.num_contexts();

        // Reactivation: the cheapest way into each context, either from
        // the LD entry state (before the first character) or from the
        // tokens the previous step left in the contexts.
        let mut incoming: Vec<Option<(f64, WlrId)>> = vec![None; g];
        if self.at_entry {
            for (ctx, slot) in incoming.iter_mut().enumerate() {
                let cost = self.ld.entry_cost(ctx);
                if cost < f64::INFINITY {
                    *slot = Some((cost, 0));
                }
            }
            self.at_entry = false;
        } else {
            for (ctx, slot) in incoming.iter_mut().enumerate() {
                let mut best: Option<(f64, WlrId)> = None;
                for prev in 0..g {
                    let tc = self.ld.trans_cost(prev, ctx);
                    for tok in &self.ld_tokens[prev] {
                        let cand = tok.cost + tc;
                        if cand < f64::INFINITY && best.is_none_or(|(b, _)| cand < b) {
                            best = Some((cand, tok.path));
                        }
                    }
                }
                *slot = best;
            }
        }
        for w in 0..self.nets.len() {
            let word_id = self.ld_word[w];
            for &ctx in self.ld.contexts_for(word_id) {
                if let Some((base, path)) = incoming[ctx] {
                    let cost = base + self.ld.obs_cost(ctx, word_id);
                    if cost < f64::INFINITY {
                        self.nets[w].inject(Token { cost, path, origin: ctx });
                    }
                }
            }
        }
        for slot in &mut self.ld_tokens {
            slot.clear();
        }

        // Step every active word network, then prune against the global
        // optimum. A pruned network can be reactivated by a later
        // hypothesis.
        for net in &mut self.nets {
            net.step_model(sym);
        }
        let global_best = self
            .nets
            .iter()
            .filter(|n| n.is_active())
            .map(|n| n.best_cost())
            .fold(f64::INFINITY, f64::min);
        beam_prune(&mut self.nets, global_best, self.cfg.beam_width)?;

        // Upward propagation: exit tokens return to the context that
        // proposed them; each context keeps its n-best, cheapest first
        // (ties toward the lexicographically smaller word).
        let mut per_ctx: Vec<Vec<(f64, WlrId, usize)>> = vec![Vec::new(); g];
        for (w, net) in self.nets.iter().enumerate() {
            for tok in net.exit_tokens() {
                per_ctx[tok.origin].push((tok.cost, tok.path, w));
            }
        }
        for (ctx, candidates) in per_ctx.iter_mut().enumerate() {
            candidates.sort_by(|a, b| {
                a.0.partial_cmp(&b.0)
                    .unwrap()
                    .then_with(|| self.lexicon.word(a.2).cmp(self.lexicon.word(b.2)))
            });
            candidates.truncate(self.cfg.n_best);
            for &(cost, path, w) in candidates.iter() {
                let mut token = Token { cost, path, origin: ctx };
                self.arena.record_decision(
                    &mut token,
                    self.lexicon.word(w),
                    self.t,
                    Some(ctx),
                );
                self.ld_tokens[ctx].push(token);
            }
        }

        // Hypothesize the LD exit; only the final step's hypotheses are
        // ever consumed.
        self.exit_candidates.clear();
        for ctx in 0..g {
            let ec = self.ld.exit_cost(ctx);
            for tok in &self.ld_tokens[ctx] {
                let cand = tok.cost + ec;
                if cand < f64::INFINITY {
                    self.exit_candidates.push((cand, tok.path, ctx));
                }
            }
        }
        self.exit_candidates
            .sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.2.cmp(&b.2)));
        self.exit_candidates.truncate(self.cfg.n_best);
        Ok(())
    }

    /// Closes the session and backtracks the surviving hypotheses.
    pub fn finalize(&mut self) -> Result<RecognitionResult> {
        if self.finished {
            return Err(CtrError::Input("session already finalized".into()));
        }
        if self.t == 0 {
            return Err(CtrError::Input("no input fed to session".into()));
        }
        self.finished = true;
        if self.exit_candidates.is_empty() {
            return Err(CtrError::NoHypothesis(
                "no complete path through the input survived".into(),
            ));
        }
        let mut results = Vec::with_capacity(self.exit_candidates.len());
        for &(cost, path, _) in &self.exit_candidates {
            results.push(self.backtrack_one(cost, path)?);
        }
        let mut best = results.remove(0);
        best.alternatives = results;
        Ok(best)
    }

    fn backtrack_one(&self, total_cost: f64, path: WlrId) -> Result<RecognitionResult> {
        let chain = self.arena.backtrack(path)?;
        let words: Vec<String> = chain.iter().map(|w| w.word.clone()).collect();
        let boundaries: Vec<usize> = chain.iter().map(|w| w.time).collect();
        let tags = if self.cfg.emit_tags {
            Some(
                chain
                    .iter()
                    .map(|w| {
                        w.context
                            .map(|c| self.ld.context_name(c).to_string())
                            .ok_or_else(|| CtrError::Corrupt("word record lost its context".into()))
                    })
                    .collect::<Result<Vec<_>>>()?,
            )
        } else {
            None
        };
        Ok(RecognitionResult { words, boundaries, tags, total_cost, alternatives: Vec::new() })
    }
}

/// Batch recognition of one utterance.
pub fn recognize(
    ld: &LdModel,
    lexicon: &Lexicon,
    input: &str,
    cfg: RecognizerConfig,
) -> Result<RecognitionResult> {
    let mut session = Session::new(ld, lexicon, cfg)?;
    for c in input.chars() {
        session.feed(c)?;
    }
    session.finalize()
}

/// N-best recognition: the `n` cheapest hypotheses, best first.
pub fn recognize_nbest(
    ld: &LdModel,
    lexicon: &Lexicon,
    input: &str,
    mut cfg: RecognizerConfig,
    n: usize,
) -> Result<Vec<RecognitionResult>> {
    if n < 1 {
        return Err(CtrError::Parameter("n must be at least 1".into()));
    }
    cfg.n_best = cfg.n_best.max(n);
    let mut best = recognize(ld, lexicon, input, cfg)?;
    let mut alternatives = std::mem::take(&mut best.alternatives);
    let mut out = vec![best];
    out.append(&mut alternatives);
    out.truncate(n);
    Ok(out)
}
