//! Shared fixtures and brute-force oracles for the integration tests.
#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use pollforge::corpus::{PollSample, Split};
use pollforge::formatting::TaskKind;
use pollforge::model::{BackboneConfig, ReferenceModel, TokenSequence, EOS_ID};
use pollforge::trainer::EncodedInstance;

pub fn tiny_model(vocab: usize, hidden: usize, layers: usize, seed: u64) -> ReferenceModel {
    ReferenceModel::new(BackboneConfig {
        vocab_size: vocab,
        hidden_dim: hidden,
        layers,
        heads: 2,
        ffn_dim: hidden + hidden / 2,
        max_positions: 24,
        init_seed: seed,
    })
    .unwrap()
}

/// Ids drawn from the non-reserved range `3..vocab`.
pub fn random_ids(rng: &mut ChaCha8Rng, vocab: usize, min: usize, max: usize) -> Vec<u32> {
    let n = rng.gen_range(min..=max);
    (0..n).map(|_| rng.gen_range(3..vocab as u32)).collect()
}

pub fn random_instance(rng: &mut ChaCha8Rng, vocab: usize, kind: TaskKind) -> EncodedInstance {
    EncodedInstance {
        sample_id: format!("r{}", rng.gen::<u32>()),
        kind,
        source: TokenSequence(random_ids(rng, vocab, 1, 8)),
        target: TokenSequence(random_ids(rng, vocab, 0, 6)).with_eos(),
    }
}

pub fn sample(id: &str, post: &str, comments: &[&str], question: &str, answers: &[&str], split: Split) -> PollSample {
    PollSample {
        id: id.into(),
        post: post.into(),
        comments: comments.iter().map(|s| s.to_string()).collect(),
        question: question.into(),
        answers: answers.iter().map(|s| s.to_string()).collect(),
        split,
    }
}

// ---- metric oracles: direct counting, full-table LCS, literal BLEU formula ----

fn ngrams(tokens: &[u32], n: usize) -> Vec<Vec<u32>> {
    if n == 0 || tokens.len() < n {
        return vec![];
    }
    (0..=tokens.len() - n).map(|i| tokens[i..i + n].to_vec()).collect()
}

fn count(list: &[Vec<u32>], g: &[u32]) -> usize {
    list.iter().filter(|x| x.as_slice() == g).count()
}

/// Clipped overlap by scanning each distinct candidate n-gram once.
fn clipped_overlap(cand: &[Vec<u32>], reference: &[Vec<u32>]) -> usize {
    let mut seen: Vec<&Vec<u32>> = Vec::new();
    let mut total = 0;
    for g in cand {
        if seen.contains(&g) {
            continue;
        }
        seen.push(g);
        total += count(cand, g).min(count(reference, g));
    }
    total
}

fn f_measure(hits: usize, c: usize, r: usize) -> f64 {
    if hits == 0 {
        return 0.0;
    }
    let p = hits as f64 / c as f64;
    let rec = hits as f64 / r as f64;
    100.0 * (2.0 * p * rec) / (p + rec)
}

pub fn oracle_rouge_n(c: &[u32], r: &[u32], n: usize) -> f64 {
    let (cg, rg) = (ngrams(c, n), ngrams(r, n));
    f_measure(clipped_overlap(&cg, &rg), cg.len(), rg.len())
}

pub fn oracle_lcs(a: &[u32], b: &[u32]) -> usize {
    let mut t = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            t[i][j] = if a[i - 1] == b[j - 1] {
                t[i - 1][j - 1] + 1
            } else {
                t[i - 1][j].max(t[i][j - 1])
            };
        }
    }
    t[a.len()][b.len()]
}

pub fn oracle_rouge_l(c: &[u32], r: &[u32]) -> f64 {
    f_measure(oracle_lcs(c, r), c.len(), r.len())
}

/// Geometric mean of modified precisions over the orders the candidate has,
/// zero-match orders smoothed to eps/total, zero overall without unigram matches,
/// times the brevity penalty against the single reference.
pub fn oracle_bleu(c: &[u32], r: &[u32], n: usize) -> f64 {
    if c.is_empty() {
        return 0.0;
    }
    let mut precisions = Vec::new();
    for k in 1..=n {
        let cg = ngrams(c, k);
        if cg.is_empty() {
            break;
        }
        let hits = clipped_overlap(&cg, &ngrams(r, k));
        if k == 1 && hits == 0 {
            return 0.0;
        }
        precisions.push(if hits == 0 { 1e-9 / cg.len() as f64 } else { hits as f64 / cg.len() as f64 });
    }
    let geo = precisions.iter().map(|p| p.ln()).sum::<f64>() / precisions.len() as f64;
    let bp = if c.len() > r.len() { 1.0 } else { (1.0 - r.len() as f64 / c.len() as f64).exp() };
    100.0 * bp * geo.exp()
}

// ---- statistics oracle ----

pub fn oracle_mean(v: &[f64]) -> f64 {
    let mut s = 0.0;
    for x in v {
        s += x;
    }
    s / v.len() as f64
}

pub fn oracle_population_std(v: &[f64]) -> f64 {
    let m = oracle_mean(v);
    let mut s = 0.0;
    for x in v {
        s += (x - m) * (x - m);
    }
    (s / v.len() as f64).sqrt()
}

// ---- decoding oracle ----

/// Every output the decoder can produce within `max_len` steps: sequences that
/// end in EOS, plus full-length sequences without it.
pub fn all_outputs(vocab: u32, max_len: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut frontier: Vec<Vec<u32>> = vec![vec![]];
    for step in 0..max_len {
        let mut next = Vec::new();
        for prefix in &frontier {
            for t in 0..vocab {
                let mut s = prefix.clone();
                s.push(t);
                if t == EOS_ID || step + 1 == max_len {
                    out.push(s);
                } else {
                    next.push(s);
                }
            }
        }
        frontier = next;
    }
    out
}
