//! Discrete-observation hidden Markov models with a non-emitting entry
//! state and an absorbing exit state.
//!
//! State `0` is the entry state, state `N-1` the exit state and states
//! `1..N-1` emit symbols. The transition matrix has no entry column and
//! no exit row; the exit column replaces the usual final-state
//! convention and is reestimated like any other parameter.
//!
//! Forward, backward and Baum-Welch run in the probability domain with
//! per-time scaling coefficients so long sequences do not underflow.
//! Viterbi runs in the cost domain (negative natural logarithms), where
//! an impossible alignment is the `+inf` sentinel rather than an error.

use crate::error::{CtrError, Result};

const ROW_SUM_TOL: f64 = 1e-9;

/// A discrete HMM with entry state `0` and exit state `num_states - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Hmm {
    num_states: usize,
    alphabet_size: usize,
    /// Row-major, `(N-1) x (N-1)`: source `0..N-1`, destination `1..N`.
    trans: Vec<f64>,
    /// Row-major, `(N-2) x K`: emitting state `1..N-1` by symbol.
    obs: Vec<f64>,
}

impl Hmm {
    /// Builds a model from per-row distributions.
    ///
    /// `transitions[i][d]` is the probability of moving from state `i`
    /// to state `d + 1` (destinations never include the entry state).
    /// `observations[j][k]` is the probability that emitting state
    /// `j + 1` produces symbol `k`.
    pub fn new(
        num_states: usize,
        alphabet_size: usize,
        transitions: Vec<Vec<f64>>,
        observations: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if num_states < 3 {
            return Err(CtrError::InvalidModel(format!(
                "need at least 3 states (entry, one emitting, exit), got {num_states}"
            )));
        }
        if alphabet_size == 0 {
            return Err(CtrError::InvalidModel("alphabet must be non-empty".into()));
        }
        if transitions.len() != num_states - 1 {
            return Err(CtrError::InvalidModel(format!(
                "expected {} transition rows, got {}",
                num_states - 1,
                transitions.len()
            )));
        }
        if observations.len() != num_states - 2 {
            return Err(CtrError::InvalidModel(format!(
                "expected {} observation rows, got {}",
                num_states - 2,
                observations.len()
            )));
        }
        let mut trans = Vec::with_capacity((num_states - 1) * (num_states - 1));
        for (i, row) in transitions.iter().enumerate() {
            validate_row(row, num_states - 1, &format!("transition row {i}"))?;
            trans.extend_from_slice(row);
        }
        let mut obs = Vec::with_capacity((num_states - 2) * alphabet_size);
        for (j, row) in observations.iter().enumerate() {
            validate_row(row, alphabet_size, &format!("observation row {}", j + 1))?;
            obs.extend_from_slice(row);
        }
        Ok(Hmm { num_states, alphabet_size, trans, obs })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet_size
    }

    pub fn entry_state(&self) -> usize {
        0
    }

    pub fn exit_state(&self) -> usize {
        self.num_states - 1
    }

    /// `a_{ij}`. Structurally absent moves (out of the exit state, into
    /// the entry state) are probability zero.
    pub fn transition(&self, from: usize, to: usize) -> f64 {
        debug_assert!(from < self.num_states && to < self.num_states);
        if from == self.exit_state() || to == 0 {
            return 0.0;
        }
        self.trans[from * (self.num_states - 1) + (to - 1)]
    }

    /// `b_j(k)` for an emitting state `j`.
    pub fn observation(&self, state: usize, symbol: usize) -> f64 {
        debug_assert!(state >= 1 && state < self.exit_state());
        debug_assert!(symbol < self.alphabet_size);
        self.obs[(state - 1) * self.alphabet_size + symbol]
    }

    /// Transition row of `from`, indexed by destination `1..N`.
    pub fn transition_row(&self, from: usize) -> &[f64] {
        let w = self.num_states - 1;
        &self.trans[from * w..(from + 1) * w]
    }

    pub fn observation_row(&self, state: usize) -> &[f64] {
        let k = self.alphabet_size;
        &self.obs[(state - 1) * k..state * k]
    }

    /// Replaces one observation row, keeping the stochasticity invariant.
    pub fn set_observation_row(&mut self, state: usize, row: Vec<f64>) -> Result<()> {
        validate_row(&row, self.alphabet_size, &format!("observation row {state}"))?;
        let k = self.alphabet_size;
        self.obs[(state - 1) * k..state * k].copy_from_slice(&row);
        Ok(())
    }

    /// Precomputed negative-log-probability tables for cost-domain search.
    pub fn costs(&self) -> CostModel {
        CostModel {
            num_states: self.num_states,
            alphabet_size: self.alphabet_size,
            trans_cost: self.trans.iter().map(|&p| neg_ln(p)).collect(),
            obs_cost: self.obs.iter().map(|&p| neg_ln(p)).collect(),
        }
    }

    fn check_obs(&self, obs: &ObservationSequence) -> Result<()> {
        if obs.alphabet_size() != self.alphabet_size {
            return Err(CtrError::Input(format!(
                "observation alphabet {} does not match model alphabet {}",
                obs.alphabet_size(),
                self.alphabet_size
            )));
        }
        Ok(())
    }
}

fn validate_row(row: &[f64], len: usize, what: &str) -> Result<()> {
    if row.len() != len {
        return Err(CtrError::InvalidModel(format!(
            "{what}: expected {len} entries, got {}",
            row.len()
        )));
    }
    let mut sum = 0.0;
    for &p in row {
        if !(0.0..=1.0).contains(&p) || !p.is_finite() {
            return Err(CtrError::InvalidModel(format!("{what}: probability {p} out of range")));
        }
        sum += p;
    }
    if (sum - 1.0).abs() > ROW_SUM_TOL {
        return Err(CtrError::InvalidModel(format!("{what}: sums to {sum}, not 1")));
    }
    Ok(())
}

fn neg_ln(p: f64) -> f64 {
    if p <= 0.0 {
        f64::INFINITY
    } else {
        -p.ln()
    }
}

/// Negative-log tables derived from an [`Hmm`].
#[derive(Debug, Clone)]
pub struct CostModel {
    num_states: usize,
    alphabet_size: usize,
    trans_cost: Vec<f64>,
    obs_cost: Vec<f64>,
}

impl CostModel {
    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet_size
    }

    pub fn exit_state(&self) -> usize {
        self.num_states - 1
    }

    /// `-ln a_{ij}`; `+inf` for impossible moves.
    pub fn trans_cost(&self, from: usize, to: usize) -> f64 {
        if from == self.num_states - 1 || to == 0 {
            return f64::INFINITY;
        }
        self.trans_cost[from * (self.num_states - 1) + (to - 1)]
    }

    /// `-ln b_j(k)`; `+inf` for zero-probability emissions.
    pub fn obs_cost(&self, state: usize, symbol: usize) -> f64 {
        self.obs_cost[(state - 1) * self.alphabet_size + symbol]
    }
}

/// A validated symbol sequence `o_1..o_T` over a fixed alphabet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObservationSequence {
    symbols: Vec<usize>,
    alphabet_size: usize,
}

impl ObservationSequence {
    pub fn new(symbols: Vec<usize>, alphabet_size: usize) -> Result<Self> {
        if symbols.is_empty() {
            return Err(CtrError::Input("observation sequence must be non-empty".into()));
        }
        if let Some(&bad) = symbols.iter().find(|&&s| s >= alphabet_size) {
            return Err(CtrError::Input(format!(
                "symbol index {bad} out of range for alphabet of {alphabet_size}"
            )));
        }
        Ok(ObservationSequence { symbols, alphabet_size })
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet_size
    }

    pub fn symbols(&self) -> &[usize] {
        &self.symbols
    }
}

/// Scaled forward trellis. `alpha(t, i)` reconstructs the unscaled
/// variable (which may underflow to zero for long sequences; the scaled
/// representation and `log_prob` stay finite).
#[derive(Debug, Clone)]
pub struct ForwardTrellis {
    /// `alpha_hat[t][i]`, scaled so each row with `t >= 1` sums to 1.
    scaled: Vec<Vec<f64>>,
    /// Scale coefficient per time step, `c_0 = 1`.
    scales: Vec<f64>,
    log_prob: f64,
}

impl ForwardTrellis {
    /// `log P(O|M)`; `-inf` when the model cannot generate the sequence.
    pub fn log_prob(&self) -> f64 {
        self.log_prob
    }

    /// `P(O|M)` in the probability domain.
    pub fn prob(&self) -> f64 {
        self.log_prob.exp()
    }

    /// Unscaled `alpha_t(i)`.
    pub fn alpha(&self, t: usize, i: usize) -> f64 {
        // alpha_hat_t = (prod_{s<=t} c_s) * alpha_t
        let log_c: f64 = self.scales[..=t].iter().map(|c| c.ln()).sum();
        self.scaled[t][i] * (-log_c).exp()
    }

    pub(crate) fn scaled(&self) -> &[Vec<f64>] {
        &self.scaled
    }

    pub(crate) fn scales(&self) -> &[f64] {
        &self.scales
    }
}

/// Scaled backward trellis sharing the forward scale coefficients.
#[derive(Debug, Clone)]
pub struct BackwardTrellis {
    /// `beta_hat[t][i] = (prod_{s=t..T} c_s) * beta_t(i)`.
    scaled: Vec<Vec<f64>>,
    scales: Vec<f64>,
}

impl BackwardTrellis {
    /// Unscaled `beta_t(i)`.
    pub fn beta(&self, t: usize, i: usize) -> f64 {
        let log_d: f64 = self.scales[t..].iter().map(|c| c.ln()).sum();
        self.scaled[t][i] * (-log_d).exp()
    }

    pub(crate) fn scaled(&self) -> &[Vec<f64>] {
        &self.scaled
    }
}

/// Forward pass: `P(O|M)` plus the alpha trellis for reestimation.
pub fn forward(hmm: &Hmm, obs: &ObservationSequence) -> Result<ForwardTrellis> {
    hmm.check_obs(obs)?;
    let n = hmm.num_states();
    let t_len = obs.len();
    let mut scaled = vec![vec![0.0; n]; t_len + 1];
    let mut scales = vec![1.0; t_len + 1];
    scaled[0][0] = 1.0;

    let mut dead = false;
    for (t, &sym) in obs.symbols().iter().enumerate() {
        let t = t + 1;
        if dead {
            continue;
        }
        let mut sum = 0.0;
        for j in 1..n - 1 {
            let mut acc = 0.0;
            for i in 0..n - 1 {
                acc += scaled[t - 1][i] * hmm.transition(i, j);
            }
            let v = acc * hmm.observation(j, sym);
            scaled[t][j] = v;
            sum += v;
        }
        if sum <= 0.0 {
            dead = true;
            continue;
        }
        scales[t] = 1.0 / sum;
        for j in 1..n - 1 {
            scaled[t][j] *= scales[t];
        }
    }

    let log_prob = if dead {
        f64::NEG_INFINITY
    } else {
        let s: f64 = (0..n - 1).map(|i| scaled[t_len][i] * hmm.transition(i, n - 1)).sum();
        if s <= 0.0 {
            f64::NEG_INFINITY
        } else {
            // P = S / prod(c): alpha_hat carries the accumulated scales.
            s.ln() - scales.iter().map(|c| c.ln()).sum::<f64>()
        }
    };
    Ok(ForwardTrellis { scaled, scales, log_prob })
}

/// Backward pass; `beta(0, entry)` equals `P(O|M)`.
pub fn backward(hmm: &Hmm, obs: &ObservationSequence) -> Result<BackwardTrellis> {
    let fwd = forward(hmm, obs)?;
    Ok(backward_scaled(hmm, obs, &fwd))
}

pub(crate) fn backward_scaled(
    hmm: &Hmm,
    obs: &ObservationSequence,
    fwd: &ForwardTrellis,
) -> BackwardTrellis {
    let n = hmm.num_states();
    let t_len = obs.len();
    let scales = fwd.scales();
    let mut scaled = vec![vec![0.0; n]; t_len + 1];
    for i in 0..n - 1 {
        scaled[t_len][i] = scales[t_len] * hmm.transition(i, n - 1);
    }
    for t in (0..t_len).rev() {
        let sym = obs.symbols()[t];
        for i in 0..n - 1 {
            let mut acc = 0.0;
            for j in 1..n - 1 {
                acc += hmm.transition(i, j) * hmm.observation(j, sym) * scaled[t + 1][j];
            }
            scaled[t][i] = scales[t] * acc;
        }
    }
    BackwardTrellis { scaled, scales: scales.to_vec() }
}

/// Joint probability of the sequence and the best state path, plus the
/// path itself (emitting states, one per symbol). A zero-probability
/// input yields `(0.0, [])`.
pub fn viterbi(hmm: &Hmm, obs: &ObservationSequence) -> Result<(f64, Vec<usize>)> {
    let (cost, path) = viterbi_cost(hmm, obs)?;
    if cost.is_infinite() {
        Ok((0.0, Vec::new()))
    } else {
        Ok(((-cost).exp(), path))
    }
}

/// Cost-domain Viterbi: `-ln P(O, Q*|M)` with `+inf` for impossible
/// alignments. Equal-cost predecessors resolve to the lowest state index.
pub fn viterbi_cost(hmm: &Hmm, obs: &ObservationSequence) -> Result<(f64, Vec<usize>)> {
    hmm.check_obs(obs)?;
    let costs = hmm.costs();
    viterbi_cost_with(&costs, obs.symbols())
}

pub(crate) fn viterbi_cost_with(costs: &CostModel, symbols: &[usize]) -> Result<(f64, Vec<usize>)> {
    let n = costs.num_states();
    let t_len = symbols.len();
    let mut delta = vec![f64::INFINITY; n];
    delta[0] = 0.0;
    let mut psi = vec![vec![0usize; n]; t_len + 1];
    let mut next = vec![f64::INFINITY; n];

    for (t, &sym) in symbols.iter().enumerate() {
        let t = t + 1;
        for j in 1..n - 1 {
            let mut best = f64::INFINITY;
            let mut arg = 0;
            for i in 0..n - 1 {
                // Same candidate expression as the token-passing step so
                // the two stay bitwise identical.
                let cand = delta[i] + costs.trans_cost(i, j) + costs.obs_cost(j, sym);
                if cand < best {
                    best = cand;
                    arg = i;
                }
            }
            next[j] = best;
            psi[t][j] = arg;
        }
        next[0] = f64::INFINITY;
        std::mem::swap(&mut delta, &mut next);
    }

    let mut best = f64::INFINITY;
    let mut last = 0;
    for i in 1..n - 1 {
        let cand = delta[i] + costs.trans_cost(i, n - 1);
        if cand < best {
            best = cand;
            last = i;
        }
    }
    if best.is_infinite() {
        return Ok((f64::INFINITY, Vec::new()));
    }
    let mut path = vec![0usize; t_len];
    let mut state = last;
    for t in (1..=t_len).rev() {
        path[t - 1] = state;
        state = psi[t][state];
    }
    Ok((best, path))
}

/// Per-sequence expected counts, normalized by sequence likelihood.
#[derive(Debug, Clone)]
struct Counts {
    /// Expected transitions from `i` to `j` (interior columns plus exit).
    num_trans: Vec<Vec<f64>>,
    num_exit: Vec<f64>,
    /// Expected emissions of symbol `k` in state `j`.
    num_obs: Vec<Vec<f64>>,
    /// Expected visits to state `i`.
    den: Vec<f64>,
}

impl Counts {
    fn zero(n: usize, k: usize) -> Self {
        Counts {
            num_trans: vec![vec![0.0; n]; n],
            num_exit: vec![0.0; n],
            num_obs: vec![vec![0.0; k]; n],
            den: vec![0.0; n],
        }
    }
}

/// Accumulates one sequence's expected counts into `acc`. Returns the
/// sequence log-likelihood, or `None` when the model cannot generate it.
fn accumulate(hmm: &Hmm, obs: &ObservationSequence, acc: &mut Counts) -> Result<Option<f64>> {
    let fwd = forward(hmm, obs)?;
    if fwd.log_prob() == f64::NEG_INFINITY {
        return Ok(None);
    }
    let bwd = backward_scaled(hmm, obs, &fwd);
    let n = hmm.num_states();
    let t_len = obs.len();
    let a = fwd.scaled();
    let b = bwd.scaled();
    let c = fwd.scales();
    // S = C_T * P(O|M); every pooled term below carries the same factor,
    // so dividing by S leaves likelihood-normalized expectations.
    let s: f64 = (0..n - 1).map(|i| a[t_len][i] * hmm.transition(i, n - 1)).sum();

    for i in 0..n - 1 {
        let mut visits = 0.0;
        for t in 0..=t_len {
            visits += a[t][i] * b[t][i] / c[t];
        }
        acc.den[i] += visits / s;

        for j in 1..n - 1 {
            let aij = hmm.transition(i, j);
            if aij == 0.0 {
                continue;
            }
            let mut x = 0.0;
            for t in 0..t_len {
                x += a[t][i] * aij * hmm.observation(j, obs.symbols()[t + 1 - 1]) * b[t + 1][j];
            }
            acc.num_trans[i][j] += x / s;
        }
        acc.num_exit[i] += a[t_len][i] * hmm.transition(i, n - 1) / s;
    }
    for j in 1..n - 1 {
        for (t, &sym) in obs.symbols().iter().enumerate() {
            let t = t + 1;
            acc.num_obs[j][sym] += a[t][j] * b[t][j] / c[t] / s;
        }
    }
    Ok(Some(fwd.log_prob()))
}

fn reestimate(hmm: &Hmm, counts: &Counts) -> Result<Hmm> {
    let n = hmm.num_states();
    let k = hmm.alphabet_size();
    let mut trans_rows = Vec::with_capacity(n - 1);
    for i in 0..n - 1 {
        let mut row = vec![0.0; n - 1];
        if counts.den[i] > 0.0 {
            for j in 1..n - 1 {
                row[j - 1] = counts.num_trans[i][j];
            }
            row[n - 2] = counts.num_exit[i];
            let sum: f64 = row.iter().sum();
            if sum > 0.0 {
                for v in &mut row {
                    *v /= sum;
                }
            } else {
                row.copy_from_slice(hmm.transition_row(i));
            }
        } else {
            // Unvisited state: no evidence, keep the prior row.
            row.copy_from_slice(hmm.transition_row(i));
        }
        trans_rows.push(row);
    }
    let mut obs_rows = Vec::with_capacity(n - 2);
    for j in 1..n - 1 {
        let sum: f64 = counts.num_obs[j].iter().sum();
        let row = if sum > 0.0 {
            counts.num_obs[j].iter().map(|&v| v / sum).collect()
        } else {
            hmm.observation_row(j).to_vec()
        };
        obs_rows.push(row);
    }
    for row in trans_rows.iter().chain(obs_rows.iter()) {
        if row.iter().any(|v| !v.is_finite()) {
            return Err(CtrError::Numeric("non-finite parameter after reestimation".into()));
        }
    }
    let _ = k;
    Hmm::new(n, hmm.alphabet_size(), trans_rows, obs_rows)
}

/// Outcome of a Baum-Welch run.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Hmm,
    /// Corpus log-likelihood measured before each reestimation step.
    pub log_likelihoods: Vec<f64>,
    /// Sequences skipped because the initial model assigns them zero
    /// probability.
    pub skipped: usize,
}

/// Baum-Welch reestimation on a single sequence.
pub fn baum_welch(
    hmm: &Hmm,
    obs: &ObservationSequence,
    max_iters: usize,
    conv_eps: f64,
) -> Result<TrainOutcome> {
    let outcome = baum_welch_multi(hmm, std::slice::from_ref(obs), max_iters, conv_eps)?;
    if outcome.skipped > 0 {
        return Err(CtrError::Training(
            "model assigns zero probability to the training sequence".into(),
        ));
    }
    Ok(outcome)
}

/// Baum-Welch over a corpus: expected counts are pooled across all
/// sequences before normalizing. Impossible sequences are skipped (and
/// counted); training fails only if none remain.
pub fn baum_welch_multi(
    hmm: &Hmm,
    corpus: &[ObservationSequence],
    max_iters: usize,
    conv_eps: f64,
) -> Result<TrainOutcome> {
    if corpus.is_empty() {
        return Err(CtrError::Training("empty training corpus".into()));
    }
    let mut model = hmm.clone();
    let mut history: Vec<f64> = Vec::new();
    let mut skipped = 0;

    for iter in 0..max_iters {
        let mut counts = Counts::zero(model.num_states(), model.alphabet_size());
        let mut total_ll = 0.0;
        let mut used = 0;
        let mut skip = 0;
        for obs in corpus {
            match accumulate(&model, obs, &mut counts)? {
                Some(ll) => {
                    total_ll += ll;
                    used += 1;
                }
                None => skip += 1,
            }
        }
        if used == 0 {
            return Err(CtrError::Training(
                "every training sequence has zero probability under the model".into(),
            ));
        }
        if iter == 0 {
            skipped = skip;
            if skip > 0 {
                log::warn!("baum_welch_multi: skipped {skip} impossible sequence(s)");
            }
        }
        let converged = history.last().is_some_and(|&prev| total_ll - prev < conv_eps);
        history.push(total_ll);
        if converged {
            break;
        }
        model = reestimate(&model, &counts)?;
    }
    Ok(TrainOutcome { model, log_likelihoods: history, skipped })
}

/// Additive smoothing of one probability row.
///
/// Every zero entry whose index is `eligible` is raised to `eps`; the
/// nonzero entries are scaled down by `1 - eps * z` (`z` raised entries)
/// so the row still sums to one. Ineligible zero entries stay exactly
/// zero.
pub fn smooth_additive(row: &[f64], eligible: &[bool], eps: f64) -> Result<Vec<f64>> {
    if eligible.len() != row.len() {
        return Err(CtrError::Parameter("eligibility mask length mismatch".into()));
    }
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(CtrError::Parameter(format!("smoothing epsilon {eps} must be positive")));
    }
    let z = row
        .iter()
        .zip(eligible)
        .filter(|&(&p, &e)| e && p == 0.0)
        .count();
    if z == 0 {
        return Ok(row.to_vec());
    }
    let raised = eps * z as f64;
    if raised >= 1.0 {
        return Err(CtrError::Parameter(format!(
            "epsilon {eps} too large: {z} raised entries would carry mass {raised}"
        )));
    }
    let scale = 1.0 - raised;
    Ok(row
        .iter()
        .zip(eligible)
        .map(|(&p, &e)| if p == 0.0 { if e { eps } else { 0.0 } } else { p * scale })
        .collect())
}
