//! Shared helpers for unit tests: random model generation and
//! brute-force reference implementations kept deliberately naive.

use crate::hmm::{Hmm, ObservationSequence};
use rand::Rng;

/// Random fully-connected HMM with strictly positive parameters.
pub fn random_hmm<R: Rng>(rng: &mut R, n: usize, k: usize) -> Hmm {
    let trans = (0..n - 1).map(|_| random_row(rng, n - 1)).collect();
    let obs = (0..n - 2).map(|_| random_row(rng, k)).collect();
    Hmm::new(n, k, trans, obs).unwrap()
}

pub fn random_row<R: Rng>(rng: &mut R, len: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..len).map(|_| rng.gen_range(0.05..1.0)).collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / sum).collect()
}

pub fn random_obs<R: Rng>(rng: &mut R, t: usize, k: usize) -> ObservationSequence {
    let symbols = (0..t).map(|_| rng.gen_range(0..k)).collect();
    ObservationSequence::new(symbols, k).unwrap()
}

/// Total probability by summing over every emitting-state sequence.
pub fn brute_force_forward(hmm: &Hmm, symbols: &[usize]) -> f64 {
    let n = hmm.num_states();
    let emitting: Vec<usize> = (1..n - 1).collect();
    let mut total = 0.0;
    for seq in cartesian(&emitting, symbols.len()) {
        total += path_prob(hmm, symbols, &seq);
    }
    total
}

/// Max-probability state sequence by exhaustive enumeration.
pub fn brute_force_viterbi(hmm: &Hmm, symbols: &[usize]) -> (f64, Vec<usize>) {
    let n = hmm.num_states();
    let emitting: Vec<usize> = (1..n - 1).collect();
    let mut best = 0.0;
    let mut best_seq = Vec::new();
    for seq in cartesian(&emitting, symbols.len()) {
        let p = path_prob(hmm, symbols, &seq);
        if p > best {
            best = p;
            best_seq = seq;
        }
    }
    (best, best_seq)
}

/// Unscaled backward variable by enumerating suffix state sequences.
pub fn brute_force_beta(hmm: &Hmm, symbols: &[usize], t: usize, i: usize) -> f64 {
    let n = hmm.num_states();
    let suffix = &symbols[t..];
    if suffix.is_empty() {
        return hmm.transition(i, n - 1);
    }
    let emitting: Vec<usize> = (1..n - 1).collect();
    let mut total = 0.0;
    for seq in cartesian(&emitting, suffix.len()) {
        let mut p = hmm.transition(i, seq[0]) * hmm.observation(seq[0], suffix[0]);
        for s in 1..seq.len() {
            p *= hmm.transition(seq[s - 1], seq[s]) * hmm.observation(seq[s], suffix[s]);
        }
        p *= hmm.transition(*seq.last().unwrap(), n - 1);
        total += p;
    }
    total
}

fn path_prob(hmm: &Hmm, symbols: &[usize], seq: &[usize]) -> f64 {
    let n = hmm.num_states();
    let mut p = hmm.transition(0, seq[0]) * hmm.observation(seq[0], symbols[0]);
    for t in 1..seq.len() {
        p *= hmm.transition(seq[t - 1], seq[t]) * hmm.observation(seq[t], symbols[t]);
    }
    p * hmm.transition(*seq.last().unwrap(), n - 1)
}

/// All length-`len` sequences over `items`.
pub fn cartesian(items: &[usize], len: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..len {
        let mut next = Vec::with_capacity(out.len() * items.len());
        for prefix in &out {
            for &it in items {
                let mut s = prefix.clone();
                s.push(it);
                next.push(s);
            }
        }
        out = next;
    }
    out
}
