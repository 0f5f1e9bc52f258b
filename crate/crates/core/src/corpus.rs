//! Poll corpus records: loading, validation, splits, and the subsetting used
//! by the comment-proportion and training-scale sweeps.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::formatting::SpecialTokens;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: missing field `{field}`")]
    MissingField { line: usize, field: &'static str },
    #[error("line {line}: post is empty")]
    EmptyPost { line: usize },
    #[error("line {line}: question is empty")]
    EmptyQuestion { line: usize },
    #[error("line {line}: answer {index} is empty")]
    EmptyAnswer { line: usize, index: usize },
    #[error("line {line}: a poll needs at least 2 answers, found {found}")]
    TooFewAnswers { line: usize, found: usize },
    #[error("line {line}: duplicate id {id:?}")]
    DuplicateId { line: usize, id: String },
    #[error("line {line}: content contains reserved token {token:?}")]
    ReservedToken { line: usize, token: String },
    #[error("line {line}: {message}")]
    MalformedLine { line: usize, message: String },
    #[error("comment percentage {0} outside 0..=100")]
    PercentOutOfRange(u32),
    #[error("training fraction {0} outside (0, 1]")]
    FractionOutOfRange(f64),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CorpusError {
    /// Short stable name used in load reports.
    pub fn kind(&self) -> &'static str {
        match self {
            CorpusError::MissingField { .. } => "MissingField",
            CorpusError::EmptyPost { .. } => "EmptyPost",
            CorpusError::EmptyQuestion { .. } => "EmptyQuestion",
            CorpusError::EmptyAnswer { .. } => "EmptyAnswer",
            CorpusError::TooFewAnswers { .. } => "TooFewAnswers",
            CorpusError::DuplicateId { .. } => "DuplicateId",
            CorpusError::ReservedToken { .. } => "ReservedToken",
            CorpusError::MalformedLine { .. } => "MalformedLine",
            CorpusError::PercentOutOfRange(_) => "PercentOutOfRange",
            CorpusError::FractionOutOfRange(_) => "FractionOutOfRange",
            CorpusError::Io(_) => "Io",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Valid, Split::Test];
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        })
    }
}

/// One post with its chronological comments and the author's poll.
/// Field order is the canonical JSONL key order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PollSample {
    pub id: String,
    pub post: String,
    pub comments: Vec<String>,
    pub question: String,
    pub answers: Vec<String>,
    pub split: Split,
}

impl PollSample {
    fn validate(&self, line: usize, toks: &SpecialTokens) -> Result<(), CorpusError> {
        if self.post.trim().is_empty() {
            return Err(CorpusError::EmptyPost { line });
        }
        if self.question.trim().is_empty() {
            return Err(CorpusError::EmptyQuestion { line });
        }
        if self.answers.len() < 2 {
            return Err(CorpusError::TooFewAnswers {
                line,
                found: self.answers.len(),
            });
        }
        if let Some(index) = self.answers.iter().position(|a| a.trim().is_empty()) {
            return Err(CorpusError::EmptyAnswer { line, index });
        }
        let fields = std::iter::once(&self.post)
            .chain(&self.comments)
            .chain(std::iter::once(&self.question))
            .chain(&self.answers);
        for text in fields {
            if let Some(token) = toks.find_in(text) {
                return Err(CorpusError::ReservedToken {
                    line,
                    token: token.to_string(),
                });
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: PathBuf,
    pub loaded_at: DateTime<Utc>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corpus {
    pub samples: Vec<PollSample>,
    pub provenance: Option<Provenance>,
}

/// Outcome of a lenient load: how many records were kept and why others were skipped.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadReport {
    pub loaded: usize,
    pub skipped: usize,
    pub errors_by_kind: BTreeMap<String, usize>,
    pub messages: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub samples: usize,
    pub per_split: BTreeMap<String, usize>,
    pub mean_comments: f64,
    pub zero_comment_samples: usize,
    pub mean_answers: f64,
    pub max_answers: usize,
}

impl Corpus {
    pub fn new(samples: Vec<PollSample>) -> Self {
        Self {
            samples,
            provenance: None,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &PollSample> {
        self.samples.iter().filter(move |s| s.split == split)
    }

    pub fn count(&self, split: Split) -> usize {
        self.split(split).count()
    }

    pub fn get(&self, id: &str) -> Option<&PollSample> {
        self.samples.iter().find(|s| s.id == id)
    }

    pub fn stats(&self) -> CorpusStats {
        let n = self.samples.len();
        let per_split = Split::ALL
            .iter()
            .map(|s| (s.to_string(), self.count(*s)))
            .collect();
        let total_comments: usize = self.samples.iter().map(|s| s.comments.len()).sum();
        let total_answers: usize = self.samples.iter().map(|s| s.answers.len()).sum();
        let denom = n.max(1) as f64;
        CorpusStats {
            samples: n,
            per_split,
            mean_comments: total_comments as f64 / denom,
            zero_comment_samples: self.samples.iter().filter(|s| s.comments.is_empty()).count(),
            mean_answers: total_answers as f64 / denom,
            max_answers: self.samples.iter().map(|s| s.answers.len()).max().unwrap_or(0),
        }
    }

    /// Canonical JSONL bytes, one record per line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for s in &self.samples {
            out.push_str(&serde_json::to_string(s).expect("sample serializes"));
            out.push('\n');
        }
        out
    }

    /// SHA-256 of the canonical JSONL form.
    pub fn content_hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_jsonl().as_bytes()))
    }

    /// Applies `f` to every sample of the listed splits.
    pub fn map_splits(&self, splits: &[Split], f: impl Fn(&PollSample) -> PollSample) -> Corpus {
        Corpus {
            samples: self
                .samples
                .iter()
                .map(|s| if splits.contains(&s.split) { f(s) } else { s.clone() })
                .collect(),
            provenance: self.provenance.clone(),
        }
    }
}

fn parse_record(line_no: usize, line: &str) -> Result<PollSample, CorpusError> {
    let value: serde_json::Value = serde_json::from_str(line).map_err(|e| CorpusError::MalformedLine {
        line: line_no,
        message: e.to_string(),
    })?;
    let obj = value.as_object().ok_or_else(|| CorpusError::MalformedLine {
        line: line_no,
        message: "record is not a JSON object".into(),
    })?;
    for field in ["id", "post", "comments", "question", "answers", "split"] {
        if !obj.contains_key(field) {
            return Err(CorpusError::MissingField { line: line_no, field });
        }
    }
    serde_json::from_value(value).map_err(|e| CorpusError::MalformedLine {
        line: line_no,
        message: e.to_string(),
    })
}

/// Parses JSONL text with the default reserved tokens.
pub fn parse_corpus(text: &str, strict: bool) -> Result<(Corpus, LoadReport), CorpusError> {
    parse_corpus_with(text, strict, &SpecialTokens::default())
}

/// Parses JSONL text. Strict mode aborts on the first invalid record; lenient
/// mode skips it and tallies the reason in the report. Blank lines are ignored.
pub fn parse_corpus_with(text: &str, strict: bool, toks: &SpecialTokens) -> Result<(Corpus, LoadReport), CorpusError> {
    let mut samples = Vec::new();
    let mut report = LoadReport::default();
    let mut ids = HashSet::new();
    for (i, line) in BufReader::new(text.as_bytes()).lines().enumerate() {
        let line = line?;
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let checked = parse_record(line_no, &line).and_then(|s| {
            s.validate(line_no, toks)?;
            if ids.contains(&s.id) {
                return Err(CorpusError::DuplicateId {
                    line: line_no,
                    id: s.id,
                });
            }
            Ok(s)
        });
        match checked {
            Ok(s) => {
                ids.insert(s.id.clone());
                samples.push(s);
            }
            Err(e) if strict => return Err(e),
            Err(e) => {
                report.skipped += 1;
                *report.errors_by_kind.entry(e.kind().to_string()).or_default() += 1;
                report.messages.push(e.to_string());
            }
        }
    }
    report.loaded = samples.len();
    Ok((Corpus::new(samples), report))
}

pub fn load_corpus(path: &Path, strict: bool) -> Result<(Corpus, LoadReport), CorpusError> {
    load_corpus_with(path, strict, &SpecialTokens::default())
}

pub fn load_corpus_with(path: &Path, strict: bool, toks: &SpecialTokens) -> Result<(Corpus, LoadReport), CorpusError> {
    let text = fs::read_to_string(path)?;
    let (mut corpus, report) = parse_corpus_with(&text, strict, toks)?;
    corpus.provenance = Some(Provenance {
        source: path.to_path_buf(),
        loaded_at: Utc::now(),
    });
    Ok((corpus, report))
}

pub fn save_corpus(corpus: &Corpus, path: &Path) -> Result<(), CorpusError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut f = fs::File::create(path)?;
    f.write_all(corpus.to_jsonl().as_bytes())?;
    Ok(())
}

/// Number of comments kept under a percentage: `ceil(n · percent / 100)`.
pub fn kept_comment_count(n: usize, percent: u32) -> usize {
    (n * percent as usize).div_ceil(100)
}

/// Keeps the chronologically first `ceil(n · percent / 100)` comments.
pub fn truncate_comments(sample: &PollSample, percent: u32) -> Result<PollSample, CorpusError> {
    if percent > 100 {
        return Err(CorpusError::PercentOutOfRange(percent));
    }
    let keep = kept_comment_count(sample.comments.len(), percent);
    Ok(PollSample {
        comments: sample.comments[..keep].to_vec(),
        ..sample.clone()
    })
}

/// Uniformly samples `round(fraction · |train|)` train records without
/// replacement; kept records stay in their original order, valid/test untouched.
pub fn subsample_training(corpus: &Corpus, fraction: f64, seed: u64) -> Result<Corpus, CorpusError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(CorpusError::FractionOutOfRange(fraction));
    }
    let train_positions: Vec<usize> = corpus
        .samples
        .iter()
        .enumerate()
        .filter(|(_, s)| s.split == Split::Train)
        .map(|(i, _)| i)
        .collect();
    let n = train_positions.len();
    let k = ((fraction * n as f64).round() as usize).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen: Vec<usize> = rand::seq::index::sample(&mut rng, n, k).into_vec();
    chosen.sort_unstable();
    let keep: HashSet<usize> = chosen.into_iter().map(|i| train_positions[i]).collect();
    Ok(Corpus {
        samples: corpus
            .samples
            .iter()
            .enumerate()
            .filter(|(i, s)| s.split != Split::Train || keep.contains(i))
            .map(|(_, s)| s.clone())
            .collect(),
        provenance: corpus.provenance.clone(),
    })
}
