//! ROUGE-1/L and BLEU-1/3 over segmentation-free tokens, per-target poll
//! evaluation, and multi-seed aggregation.
//!
//! All scores are on a 0..100 scale. ROUGE is reported as F1. BLEU uses
//! add-epsilon smoothing on zero n-gram matches and drops orders for which the
//! candidate has no n-grams at all, so any non-empty string scores 100 against
//! itself.

use std::collections::HashMap;
use std::hash::Hash;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::PollSample;
use crate::formatting::GenerationOutput;
use crate::text::{is_cjk, segment};

/// Smoothing mass for n-gram orders with zero clipped matches.
pub const BLEU_EPSILON: f64 = 1e-9;
/// Delimiter placed between answer choices before scoring them as one string.
pub const ANSWER_JOIN: &str = " ; ";

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("prediction/reference mismatch: {0}")]
    IdMismatch(String),
    #[error("aggregation needs at least 2 seed reports, got {0}")]
    TooFewSeeds(usize),
}

/// Lowercased tokens: one per CJK character, one per run of other
/// alphanumerics; punctuation and whitespace are dropped.
pub fn tokenize_for_metrics(text: &str) -> Vec<String> {
    segment(text, &[])
        .into_iter()
        .map(|(s, e)| &text[s..e])
        .filter(|piece| {
            piece
                .chars()
                .next()
                .is_some_and(|c| is_cjk(c) || c.is_alphanumeric())
        })
        .map(str::to_lowercase)
        .collect()
}

fn ngram_counts<T: Eq + Hash>(tokens: &[T], n: usize) -> HashMap<&[T], usize> {
    let mut map = HashMap::new();
    if n == 0 || tokens.len() < n {
        return map;
    }
    for w in tokens.windows(n) {
        *map.entry(w).or_insert(0) += 1;
    }
    map
}

fn f1(overlap: f64, cand_total: f64, ref_total: f64) -> f64 {
    if overlap == 0.0 || cand_total == 0.0 || ref_total == 0.0 {
        return 0.0;
    }
    let p = overlap / cand_total;
    let r = overlap / ref_total;
    100.0 * 2.0 * p * r / (p + r)
}

/// ROUGE-N F1 with clipped n-gram overlap.
pub fn rouge_n<T: Eq + Hash>(candidate: &[T], reference: &[T], n: usize) -> f64 {
    let cand = ngram_counts(candidate, n);
    let refs = ngram_counts(reference, n);
    let cand_total: usize = cand.values().sum();
    let ref_total: usize = refs.values().sum();
    let overlap: usize = cand
        .iter()
        .map(|(g, c)| refs.get(g).map_or(0, |r| (*c).min(*r)))
        .sum();
    f1(overlap as f64, cand_total as f64, ref_total as f64)
}

/// Longest common subsequence length with a rolling row.
pub fn lcs_len<T: Eq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { cur[j].max(prev[j + 1]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// ROUGE-L F1 from the longest common subsequence.
pub fn rouge_l<T: Eq>(candidate: &[T], reference: &[T]) -> f64 {
    f1(
        lcs_len(candidate, reference) as f64,
        candidate.len() as f64,
        reference.len() as f64,
    )
}

/// BLEU with uniform weights over orders `1..=n`, max-reference clipping, and
/// the closest-reference-length brevity penalty.
pub fn bleu_n<T: Eq + Hash>(candidate: &[T], references: &[&[T]], n: usize) -> f64 {
    if candidate.is_empty() || references.is_empty() || n == 0 {
        return 0.0;
    }
    let mut log_sum = 0.0;
    let mut orders = 0usize;
    for k in 1..=n {
        let cand = ngram_counts(candidate, k);
        let total: usize = cand.values().sum();
        if total == 0 {
            continue;
        }
        let ref_counts: Vec<_> = references.iter().map(|r| ngram_counts(r, k)).collect();
        let clipped: usize = cand
            .iter()
            .map(|(g, c)| {
                let max_ref = ref_counts.iter().map(|m| m.get(g).copied().unwrap_or(0)).max().unwrap_or(0);
                (*c).min(max_ref)
            })
            .sum();
        if k == 1 && clipped == 0 {
            return 0.0;
        }
        let p = if clipped == 0 {
            BLEU_EPSILON / total as f64
        } else {
            clipped as f64 / total as f64
        };
        log_sum += p.ln();
        orders += 1;
    }
    let c = candidate.len();
    let r = references
        .iter()
        .map(|r| r.len())
        .min_by_key(|&len| (len.abs_diff(c), len))
        .expect("non-empty references");
    let bp = if c > r { 1.0 } else { (1.0 - r as f64 / c as f64).exp() };
    100.0 * bp * (log_sum / orders as f64).exp()
}

/// The four reported scores for one target.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TargetScores {
    pub rouge1: f64,
    #[serde(rename = "rougeL")]
    pub rouge_l: f64,
    pub bleu1: f64,
    pub bleu3: f64,
}

impl TargetScores {
    pub const METRICS: [&'static str; 4] = ["rouge1", "rougeL", "bleu1", "bleu3"];

    pub fn score(candidate: &str, reference: &str) -> Self {
        let c = tokenize_for_metrics(candidate);
        let r = tokenize_for_metrics(reference);
        Self {
            rouge1: rouge_n(&c, &r, 1),
            rouge_l: rouge_l(&c, &r),
            bleu1: bleu_n(&c, &[&r], 1),
            bleu3: bleu_n(&c, &[&r], 3),
        }
    }

    pub fn values(&self) -> [f64; 4] {
        [self.rouge1, self.rouge_l, self.bleu1, self.bleu3]
    }

    pub fn get(&self, metric: &str) -> Option<f64> {
        Self::METRICS.iter().position(|m| *m == metric).map(|i| self.values()[i])
    }

    pub fn from_values(v: [f64; 4]) -> Self {
        Self {
            rouge1: v[0],
            rouge_l: v[1],
            bleu1: v[2],
            bleu3: v[3],
        }
    }

    fn zip(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        let (a, b) = (self.values(), other.values());
        Self::from_values([f(a[0], b[0]), f(a[1], b[1]), f(a[2], b[2]), f(a[3], b[3])])
    }

    pub fn mean_with(&self, other: &Self) -> Self {
        self.zip(other, |a, b| (a + b) / 2.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Poll,
    Question,
    Answers,
}

impl Target {
    pub const ALL: [Target; 3] = [Target::Poll, Target::Question, Target::Answers];

    pub fn as_str(self) -> &'static str {
        match self {
            Target::Poll => "poll",
            Target::Question => "question",
            Target::Answers => "answers",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub question: TargetScores,
    pub answers: TargetScores,
    /// Metric-wise mean of the question and answers rows.
    pub poll: TargetScores,
    pub n_samples: usize,
}

impl MetricReport {
    pub fn from_targets(question: TargetScores, answers: TargetScores, n_samples: usize) -> Self {
        Self {
            question,
            answers,
            poll: question.mean_with(&answers),
            n_samples,
        }
    }

    pub fn target(&self, t: Target) -> &TargetScores {
        match t {
            Target::Poll => &self.poll,
            Target::Question => &self.question,
            Target::Answers => &self.answers,
        }
    }
}

/// A generation tied to its corpus id; the prediction-file record.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    pub raw: String,
    pub question: String,
    pub answers: Vec<String>,
    pub parse_ok: bool,
}

impl Prediction {
    pub fn new(id: impl Into<String>, out: GenerationOutput) -> Self {
        Self {
            id: id.into(),
            raw: out.raw,
            question: out.question,
            answers: out.answers,
            parse_ok: out.parse_ok,
        }
    }

    /// Hypothesis strings actually scored; unparseable output scores as empty.
    pub fn hypotheses(&self) -> (String, String) {
        if self.parse_ok {
            (self.question.clone(), self.answers.join(ANSWER_JOIN))
        } else {
            (String::new(), String::new())
        }
    }
}

/// Per-sample scores for the question and answers targets, used by the averages below.
pub fn score_sample(pred: &Prediction, gold: &PollSample) -> (TargetScores, TargetScores) {
    let (q, a) = pred.hypotheses();
    (
        TargetScores::score(&q, &gold.question),
        TargetScores::score(&a, &gold.answers.join(ANSWER_JOIN)),
    )
}

fn mean_scores(rows: &[TargetScores]) -> TargetScores {
    if rows.is_empty() {
        return TargetScores::default();
    }
    let mut acc = [0.0; 4];
    for r in rows {
        for (a, v) in acc.iter_mut().zip(r.values()) {
            *a += v;
        }
    }
    let n = rows.len() as f64;
    TargetScores::from_values(acc.map(|v| v / n))
}

/// Averages per-sample scores. Every reference must have exactly one prediction with its id.
pub fn evaluate_predictions(preds: &[Prediction], refs: &[PollSample]) -> Result<MetricReport, MetricsError> {
    if preds.len() != refs.len() {
        return Err(MetricsError::IdMismatch(format!(
            "{} predictions for {} references",
            preds.len(),
            refs.len()
        )));
    }
    let by_id: HashMap<&str, &Prediction> = preds.iter().map(|p| (p.id.as_str(), p)).collect();
    if by_id.len() != preds.len() {
        return Err(MetricsError::IdMismatch("duplicate prediction ids".into()));
    }
    let mut q_rows = Vec::with_capacity(refs.len());
    let mut a_rows = Vec::with_capacity(refs.len());
    for gold in refs {
        let pred = by_id
            .get(gold.id.as_str())
            .ok_or_else(|| MetricsError::IdMismatch(format!("no prediction for {:?}", gold.id)))?;
        let (q, a) = score_sample(pred, gold);
        q_rows.push(q);
        a_rows.push(a);
    }
    Ok(MetricReport::from_targets(mean_scores(&q_rows), mean_scores(&a_rows), refs.len()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedAggregate {
    pub mean: MetricReport,
    /// Population standard deviation over seeds.
    pub std: MetricReport,
    pub seeds: Vec<u64>,
    /// Mean of the poll-row standard deviations across the four metrics.
    pub mean_poll_std: f64,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn aggregate_seeds(reports: &[MetricReport], seeds: &[u64]) -> Result<SeedAggregate, MetricsError> {
    if reports.len() < 2 {
        return Err(MetricsError::TooFewSeeds(reports.len()));
    }
    let stats = |pick: &dyn Fn(&MetricReport) -> TargetScores| {
        let mut means = [0.0; 4];
        let mut stds = [0.0; 4];
        for m in 0..4 {
            let col: Vec<f64> = reports.iter().map(|r| pick(r).values()[m]).collect();
            (means[m], stds[m]) = mean_std(&col);
        }
        (TargetScores::from_values(means), TargetScores::from_values(stds))
    };
    let (qm, qs) = stats(&|r| r.question);
    let (am, as_) = stats(&|r| r.answers);
    let (pm, ps) = stats(&|r| r.poll);
    let n = reports[0].n_samples;
    Ok(SeedAggregate {
        mean: MetricReport {
            question: qm,
            answers: am,
            poll: pm,
            n_samples: n,
        },
        std: MetricReport {
            question: qs,
            answers: as_,
            poll: ps,
            n_samples: n,
        },
        seeds: seeds.to_vec(),
        mean_poll_std: ps.values().iter().sum::<f64>() / 4.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Split;

    fn toks(s: &str) -> Vec<&str> {
        s.split_whitespace().collect()
    }

    #[test]
    fn metric_tokenization() {
        assert_eq!(tokenize_for_metrics("你好ab 你"), vec!["你", "好", "ab", "你"]);
        assert!(tokenize_for_metrics("").is_empty());
        assert_eq!(tokenize_for_metrics("你好, world!"), vec!["你", "好", "world"]);
        assert_eq!(tokenize_for_metrics("Hello WORLD"), vec!["hello", "world"]);
    }

    #[test]
    fn rouge_examples() {
        assert_eq!(rouge_n(&toks("a b c"), &toks("a b c"), 1), 100.0);
        assert_eq!(rouge_n(&toks("a b"), &toks("c d"), 1), 0.0);
        assert!((rouge_n(&toks("a b c"), &toks("a c d"), 1) - 200.0 / 3.0).abs() < 1e-9);
        assert!((rouge_l(&toks("a b c"), &toks("c b a")) - 100.0 / 3.0).abs() < 1e-9);
        assert_eq!(rouge_l(&toks(""), &toks("a")), 0.0);
        assert_eq!(rouge_n(&toks("a"), &toks("a"), 2), 0.0);
    }

    #[test]
    fn bleu_examples() {
        assert!((bleu_n(&toks("a b c d"), &[&toks("a b c d")], 3) - 100.0).abs() < 1e-9);
        assert!((bleu_n(&toks("a a"), &[&toks("a")], 1) - 50.0).abs() < 1e-9);
        // c = 2, r = 4: BP = exp(1 - 2) and p1 = 1.
        let short = bleu_n(&toks("a b"), &[&toks("a b c d")], 1);
        assert!((short - 100.0 * (-1.0f64).exp()).abs() < 1e-9);
        assert_eq!(bleu_n(&toks("x y"), &[&toks("a b")], 3), 0.0);
        assert_eq!(bleu_n(&toks(""), &[&toks("a")], 1), 0.0);
        assert!((bleu_n(&toks("a"), &[&toks("a")], 3) - 100.0).abs() < 1e-9);
    }

    fn gold(id: &str, q: &str, answers: &[&str]) -> PollSample {
        PollSample {
            id: id.into(),
            post: "p".into(),
            comments: vec![],
            question: q.into(),
            answers: answers.iter().map(|s| s.to_string()).collect(),
            split: Split::Test,
        }
    }

    fn pred(id: &str, q: &str, answers: &[&str], ok: bool) -> Prediction {
        Prediction {
            id: id.into(),
            raw: String::new(),
            question: q.into(),
            answers: answers.iter().map(|s| s.to_string()).collect(),
            parse_ok: ok,
        }
    }

    #[test]
    fn perfect_and_failed_predictions() {
        let refs = vec![gold("1", "你喜欢猫吗", &["喜欢", "不喜欢"]), gold("2", "do you ski", &["yes", "no"])];
        let perfect = vec![pred("2", "do you ski", &["yes", "no"], true), pred("1", "你喜欢猫吗", &["喜欢", "不喜欢"], true)];
        let r = evaluate_predictions(&perfect, &refs).unwrap();
        for t in Target::ALL {
            for v in r.target(t).values() {
                assert!((v - 100.0).abs() < 1e-9);
            }
        }
        let failed = vec![pred("1", "你喜欢猫吗", &["喜欢"], false), pred("2", "", &[], false)];
        let r = evaluate_predictions(&failed, &refs).unwrap();
        for t in Target::ALL {
            assert_eq!(r.target(t).values(), [0.0; 4]);
        }
    }

    #[test]
    fn id_mismatch_is_an_error() {
        let refs = vec![gold("1", "q", &["a", "b"])];
        assert!(evaluate_predictions(&[pred("9", "q", &["a"], true)], &refs).is_err());
        assert!(evaluate_predictions(&[], &refs).is_err());
    }

    #[test]
    fn seed_aggregation() {
        let report = |r1: f64| MetricReport {
            poll: TargetScores {
                rouge1: r1,
                ..Default::default()
            },
            ..Default::default()
        };
        let agg = aggregate_seeds(&[report(46.0), report(48.0)], &[40, 41]).unwrap();
        assert_eq!(agg.mean.poll.rouge1, 47.0);
        assert_eq!(agg.std.poll.rouge1, 1.0);
        assert_eq!(agg.mean_poll_std, 0.25);

        let same = aggregate_seeds(&[report(3.0), report(3.0), report(3.0)], &[1, 2, 3]).unwrap();
        assert!(same.std.poll.values().iter().all(|v| *v == 0.0));
        assert!(aggregate_seeds(&[report(1.0)], &[1]).is_err());
    }
}
