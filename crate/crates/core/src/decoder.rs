//! Greedy and beam-search decoding, and poll prediction through the main prompt.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::PollSample;
use crate::formatting::{build_source, parse_for_kind, FormatError, GenerationOutput, Limits, TaskFormat, TaskKind};
use crate::model::{Backbone, ModelError, TokenSequence, BOS_ID, EOS_ID};
use crate::tokenizer::Tokenizer;

#[derive(Debug, thiserror::Error)]
pub enum DecodeError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Format(#[from] FormatError),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecodeConfig {
    pub beam_size: usize,
    pub max_output_len: usize,
    /// GNMT-style exponent; 0 disables the penalty.
    pub length_penalty: f64,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        Self {
            beam_size: 1,
            max_output_len: 128,
            length_penalty: 0.0,
        }
    }
}

impl DecodeConfig {
    fn adjusted(&self, log_prob: f64, len: usize) -> f64 {
        if self.length_penalty == 0.0 {
            log_prob
        } else {
            log_prob / ((5.0 + len as f64) / 6.0).powf(self.length_penalty)
        }
    }
}

/// A finished decoding result.
#[derive(Clone, Debug, PartialEq)]
pub struct Hypothesis {
    /// Emitted tokens, ending with [`EOS_ID`] unless cut at the length limit.
    pub tokens: Vec<u32>,
    /// Sum of token log-probabilities.
    pub log_prob: f64,
    /// `log_prob` after the optional length penalty; used for ranking.
    pub score: f64,
}

/// Index of the largest probability, preferring the lower token id on ties.
fn argmax(dist: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in dist.iter().enumerate() {
        if p > dist[best] {
            best = i;
        }
    }
    best
}

fn prefix_of(tokens: &[u32]) -> TokenSequence {
    let mut ids = Vec::with_capacity(tokens.len() + 1);
    ids.push(BOS_ID);
    ids.extend_from_slice(tokens);
    TokenSequence(ids)
}

fn effective_max_len<B: Backbone + ?Sized>(model: &B, cfg: &DecodeConfig) -> usize {
    cfg.max_output_len.min(model.max_positions()).max(1)
}

fn greedy<B: Backbone + ?Sized>(model: &B, memory: &crate::model::MemoryBank, cfg: &DecodeConfig) -> Result<Hypothesis, ModelError> {
    let max_len = effective_max_len(model, cfg);
    let mut tokens = Vec::new();
    let mut log_prob = 0.0;
    while tokens.len() < max_len {
        let dist = model.next_token_distribution(&prefix_of(&tokens), memory)?;
        let t = argmax(&dist);
        log_prob += dist[t].ln();
        tokens.push(t as u32);
        if t as u32 == EOS_ID {
            break;
        }
    }
    let score = cfg.adjusted(log_prob, tokens.len());
    Ok(Hypothesis { tokens, log_prob, score })
}

fn better(a: &Hypothesis, b: &Hypothesis) -> bool {
    match a.score.total_cmp(&b.score) {
        std::cmp::Ordering::Greater => true,
        std::cmp::Ordering::Less => false,
        std::cmp::Ordering::Equal => a.tokens < b.tokens,
    }
}

fn beam<B: Backbone + ?Sized>(model: &B, memory: &crate::model::MemoryBank, cfg: &DecodeConfig) -> Result<Hypothesis, ModelError> {
    let max_len = effective_max_len(model, cfg);
    let width = cfg.beam_size;
    let mut beams: Vec<(Vec<u32>, f64)> = vec![(Vec::new(), 0.0)];
    let mut finished: Vec<Hypothesis> = Vec::new();
    for step in 0..max_len {
        // (log-prob, token, beam index)
        let mut candidates: Vec<(f64, u32, usize)> = Vec::with_capacity(beams.len() * model.vocab_size());
        for (bi, (tokens, lp)) in beams.iter().enumerate() {
            let dist = model.next_token_distribution(&prefix_of(tokens), memory)?;
            for (t, p) in dist.iter().enumerate() {
                candidates.push((lp + p.ln(), t as u32, bi));
            }
        }
        candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        candidates.truncate(width);
        let last_step = step + 1 == max_len;
        let mut next = Vec::with_capacity(width);
        for (lp, t, bi) in candidates {
            let mut tokens = beams[bi].0.clone();
            tokens.push(t);
            if t == EOS_ID || last_step {
                let score = cfg.adjusted(lp, tokens.len());
                finished.push(Hypothesis { tokens, log_prob: lp, score });
            } else {
                next.push((tokens, lp));
            }
        }
        if next.is_empty() {
            break;
        }
        beams = next;
    }
    let mut best = finished.pop().expect("at least one finished hypothesis");
    for h in finished {
        if better(&h, &best) {
            best = h;
        }
    }
    Ok(best)
}

/// Decodes one hypothesis from an already-encoded source.
///
/// Width 1 is greedy argmax chaining. Wider beams rank by summed log-probability
/// (plus the optional length penalty) with ties broken by lower token id, then
/// earlier beam; the greedy path is also kept as a candidate so a wider beam
/// never returns a lower score than width 1.
pub fn generate_from_memory<B: Backbone + ?Sized>(
    model: &B,
    memory: &crate::model::MemoryBank,
    cfg: &DecodeConfig,
) -> Result<Hypothesis, ModelError> {
    let greedy_hyp = greedy(model, memory, cfg)?;
    if cfg.beam_size <= 1 {
        return Ok(greedy_hyp);
    }
    let beam_hyp = beam(model, memory, cfg)?;
    Ok(if better(&greedy_hyp, &beam_hyp) { greedy_hyp } else { beam_hyp })
}

pub fn generate_scored<B: Backbone + ?Sized>(model: &B, source: &TokenSequence, cfg: &DecodeConfig) -> Result<Hypothesis, ModelError> {
    let memory = model.encode(source)?;
    generate_from_memory(model, &memory, cfg)
}

pub fn generate<B: Backbone + ?Sized>(model: &B, source: &TokenSequence, cfg: &DecodeConfig) -> Result<TokenSequence, ModelError> {
    Ok(TokenSequence(generate_scored(model, source, cfg)?.tokens))
}

/// Everything needed to go from a corpus record to a parsed poll.
pub struct PollGenerator<'a, B: Backbone + ?Sized> {
    pub model: &'a B,
    pub tokenizer: &'a dyn Tokenizer,
    pub format: &'a TaskFormat,
    pub limits: Limits,
    pub decode: DecodeConfig,
    /// Drop exact-duplicate answer choices after parsing.
    pub dedupe: bool,
}

impl<B: Backbone + ?Sized> PollGenerator<'_, B> {
    fn source_ids(&self, kind: TaskKind, sample: &PollSample) -> Result<TokenSequence, DecodeError> {
        let limit = self.limits.max_source_len.min(self.model.max_positions());
        let text = build_source(kind, sample, self.format, self.tokenizer, limit)?;
        Ok(self.tokenizer.encode(&text))
    }

    /// Generates with the prompt of `kind` and parses the result for that kind.
    pub fn predict_kind(&self, kind: TaskKind, sample: &PollSample) -> Result<GenerationOutput, DecodeError> {
        let source = self.source_ids(kind, sample)?;
        let cfg = DecodeConfig {
            max_output_len: self.decode.max_output_len.min(self.limits.max_target_len),
            ..self.decode
        };
        let tokens = generate(self.model, &source, &cfg)?;
        let body: Vec<u32> = tokens.0.into_iter().take_while(|&t| t != EOS_ID).collect();
        let raw = self.tokenizer.decode(&body);
        Ok(parse_for_kind(kind, &raw, &self.format.tokens, self.dedupe))
    }

    /// Inference uses only the main-task prompt.
    pub fn predict_poll(&self, sample: &PollSample) -> Result<GenerationOutput, DecodeError> {
        self.predict_kind(TaskKind::Main, sample)
    }

    /// Predictions in input order.
    pub fn predict_all(&self, kind: TaskKind, samples: &[&PollSample]) -> Result<Vec<GenerationOutput>, DecodeError>
    where
        B: Sync,
    {
        samples.par_iter().map(|s| self.predict_kind(kind, s)).collect()
    }
}
