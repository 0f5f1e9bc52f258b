//! Prompt-prefixed source/target construction for the three tasks, and
//! parsing of generated text back into a structured poll.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, PollSample, Split};
use crate::tokenizer::Tokenizer;

#[derive(Debug, Error, PartialEq)]
pub enum FormatError {
    #[error("prompt needs {needed} tokens but the source limit is {limit}")]
    PromptDoesNotFit { needed: usize, limit: usize },
    #[error("unknown task kind {0:?}")]
    UnknownTask(String),
    #[error("task set must not be empty")]
    EmptyTaskSet,
    #[error("invalid special tokens: {0}")]
    InvalidTokens(String),
}

/// Which objective an instance trains.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    /// Question then answers; the only kind used at inference.
    Main,
    /// Question only.
    Qg,
    /// Answers only.
    Ag,
}

impl TaskKind {
    pub const ALL: [TaskKind; 3] = [TaskKind::Main, TaskKind::Qg, TaskKind::Ag];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::Main => "main",
            TaskKind::Qg => "qg",
            TaskKind::Ag => "ag",
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskKind {
    type Err = FormatError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "main" => Ok(TaskKind::Main),
            "qg" | "q" => Ok(TaskKind::Qg),
            "ag" | "a" => Ok(TaskKind::Ag),
            other => Err(FormatError::UnknownTask(other.to_string())),
        }
    }
}

/// Non-empty set of task kinds, iterated in `Main, Qg, Ag` order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<TaskKind>", into = "Vec<TaskKind>")]
pub struct TaskSet(BTreeSet<TaskKind>);

impl TaskSet {
    pub fn new(kinds: impl IntoIterator<Item = TaskKind>) -> Result<Self, FormatError> {
        let set: BTreeSet<_> = kinds.into_iter().collect();
        if set.is_empty() {
            return Err(FormatError::EmptyTaskSet);
        }
        Ok(Self(set))
    }

    /// `{Main, Qg, Ag}`
    pub fn full() -> Self {
        Self(TaskKind::ALL.into_iter().collect())
    }

    pub fn main_only() -> Self {
        Self([TaskKind::Main].into_iter().collect())
    }

    pub fn contains(&self, kind: TaskKind) -> bool {
        self.0.contains(&kind)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = TaskKind> + '_ {
        self.0.iter().copied()
    }

    /// True when the set trains more than one target (both question and answers are scored).
    pub fn is_multi_objective(&self) -> bool {
        self.contains(TaskKind::Main) || (self.contains(TaskKind::Qg) && self.contains(TaskKind::Ag))
    }

    /// Kind used to produce predictions: `Main` when trained, otherwise the single auxiliary kind.
    pub fn inference_kind(&self) -> TaskKind {
        if self.contains(TaskKind::Main) {
            TaskKind::Main
        } else {
            *self.0.iter().next().expect("non-empty task set")
        }
    }
}

impl TryFrom<Vec<TaskKind>> for TaskSet {
    type Error = FormatError;

    fn try_from(v: Vec<TaskKind>) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<TaskSet> for Vec<TaskKind> {
    fn from(s: TaskSet) -> Self {
        s.0.into_iter().collect()
    }
}

impl FromStr for TaskSet {
    type Err = FormatError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let kinds = s
            .split(',')
            .filter(|p| !p.trim().is_empty())
            .map(TaskKind::from_str)
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(kinds)
    }
}

impl fmt::Display for TaskSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<&str> = self.iter().map(TaskKind::as_str).collect();
        f.write_str(&parts.join(","))
    }
}

/// Surface forms of the four reserved control tokens.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpecialTokens {
    pub question_tok: String,
    pub answers_tok: String,
    pub field_sep: String,
    pub answer_sep: String,
}

impl Default for SpecialTokens {
    fn default() -> Self {
        Self {
            question_tok: "<question>".into(),
            answers_tok: "<answers>".into(),
            field_sep: "[SEP]".into(),
            answer_sep: "<ans_sep>".into(),
        }
    }
}

impl SpecialTokens {
    pub fn surfaces(&self) -> Vec<&str> {
        vec![
            self.question_tok.as_str(),
            self.answers_tok.as_str(),
            self.field_sep.as_str(),
            self.answer_sep.as_str(),
        ]
    }

    pub fn validate(&self) -> Result<(), FormatError> {
        let s = self.surfaces();
        if s.iter().any(|t| t.trim().is_empty()) {
            return Err(FormatError::InvalidTokens("surfaces must be non-empty".into()));
        }
        for i in 0..s.len() {
            for j in (i + 1)..s.len() {
                if s[i] == s[j] {
                    return Err(FormatError::InvalidTokens(format!("{:?} used twice", s[i])));
                }
            }
        }
        Ok(())
    }

    /// First reserved surface occurring inside `text`, if any.
    pub fn find_in<'a>(&'a self, text: &str) -> Option<&'a str> {
        self.surfaces().into_iter().find(|t| text.contains(t))
    }
}

/// Task prompt templates; `{question}` and `{answers}` expand to the token surfaces.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TaskPrompts {
    pub main: String,
    pub qg: String,
    pub ag: String,
}

impl Default for TaskPrompts {
    fn default() -> Self {
        Self {
            main: "generate {question} then {answers}".into(),
            qg: "generate {question}".into(),
            ag: "generate {answers}".into(),
        }
    }
}

impl TaskPrompts {
    pub fn render(&self, kind: TaskKind, toks: &SpecialTokens) -> String {
        let template = match kind {
            TaskKind::Main => &self.main,
            TaskKind::Qg => &self.qg,
            TaskKind::Ag => &self.ag,
        };
        template
            .replace("{question}", &toks.question_tok)
            .replace("{answers}", &toks.answers_tok)
    }
}

/// Token budgets for encoder inputs and decoder outputs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Limits {
    pub max_source_len: usize,
    pub max_target_len: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            max_source_len: 1024,
            max_target_len: 128,
        }
    }
}

/// Control-token surfaces plus prompts: everything needed to lay out text.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TaskFormat {
    pub tokens: SpecialTokens,
    pub prompts: TaskPrompts,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskInstance {
    pub sample_id: String,
    pub kind: TaskKind,
    pub source: String,
    pub target: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationOutput {
    pub question: String,
    pub answers: Vec<String>,
    pub raw: String,
    pub parse_ok: bool,
}

/// Lays out `prompt SEP post SEP comment_1 SEP ...` and cuts the token suffix
/// beyond `max_source_len`, so comments go last-first, then the post tail.
pub fn build_source(
    kind: TaskKind,
    sample: &PollSample,
    format: &TaskFormat,
    tokenizer: &dyn Tokenizer,
    max_source_len: usize,
) -> Result<String, FormatError> {
    let prompt = format.prompts.render(kind, &format.tokens);
    let sep = &format.tokens.field_sep;
    let needed = tokenizer.count(&prompt) + tokenizer.count(sep) + 1;
    if max_source_len < needed {
        return Err(FormatError::PromptDoesNotFit {
            needed,
            limit: max_source_len,
        });
    }
    let mut text = format!("{prompt} {sep} {}", sample.post);
    for c in &sample.comments {
        text.push(' ');
        text.push_str(sep);
        text.push(' ');
        text.push_str(c);
    }
    let spans = tokenizer.spans(&text);
    if spans.len() > max_source_len {
        text.truncate(spans[max_source_len - 1].1);
    }
    Ok(text)
}

pub fn build_target(kind: TaskKind, sample: &PollSample, toks: &SpecialTokens) -> String {
    let answers = || sample.answers.join(&format!(" {} ", toks.answer_sep));
    match kind {
        TaskKind::Main => format!(
            "{} {} {} {}",
            toks.question_tok,
            sample.question,
            toks.answers_tok,
            answers()
        ),
        TaskKind::Qg => format!("{} {}", toks.question_tok, sample.question),
        TaskKind::Ag => format!("{} {}", toks.answers_tok, answers()),
    }
}

/// Expands the train split into `|task_set|` instances per sample and shuffles
/// them once with `shuffle_seed`.
pub fn expand_to_instances(
    corpus: &Corpus,
    task_set: &TaskSet,
    format: &TaskFormat,
    tokenizer: &dyn Tokenizer,
    limits: &Limits,
    shuffle_seed: u64,
) -> Result<Vec<TaskInstance>, FormatError> {
    let mut out = Vec::with_capacity(corpus.count(Split::Train) * task_set.len());
    for sample in corpus.split(Split::Train) {
        for kind in task_set.iter() {
            out.push(TaskInstance {
                sample_id: sample.id.clone(),
                kind,
                source: build_source(kind, sample, format, tokenizer, limits.max_source_len)?,
                target: build_target(kind, sample, &format.tokens),
            });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(shuffle_seed);
    out.shuffle(&mut rng);
    Ok(out)
}

/// Evaluation instances of one split, in corpus order, never shuffled.
pub fn expand_eval_instances(
    corpus: &Corpus,
    split: Split,
    kind: TaskKind,
    format: &TaskFormat,
    tokenizer: &dyn Tokenizer,
    limits: &Limits,
) -> Result<Vec<TaskInstance>, FormatError> {
    corpus
        .split(split)
        .map(|sample| {
            Ok(TaskInstance {
                sample_id: sample.id.clone(),
                kind,
                source: build_source(kind, sample, format, tokenizer, limits.max_source_len)?,
                target: build_target(kind, sample, &format.tokens),
            })
        })
        .collect()
}

fn split_on_any<'a>(text: &'a str, seps: &[&str]) -> Vec<&'a str> {
    let mut pieces = Vec::new();
    let mut start = 0;
    let mut i = 0;
    while i < text.len() {
        if let Some(sep) = seps.iter().find(|s| text[i..].starts_with(**s)) {
            pieces.push(&text[start..i]);
            i += sep.len();
            start = i;
        } else {
            i += text[i..].chars().next().map_or(1, char::len_utf8);
        }
    }
    pieces.push(&text[start..]);
    pieces
}

fn clean_pieces(text: &str, toks: &SpecialTokens) -> Vec<String> {
    split_on_any(text, &toks.surfaces())
        .into_iter()
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(str::to_string)
        .collect()
}

fn dedupe_in_place(answers: &mut Vec<String>) {
    let mut seen = std::collections::HashSet::new();
    answers.retain(|a| seen.insert(a.clone()));
}

/// Parses a `question_tok Q answers_tok A_1 answer_sep A_2 ...` string.
/// Failures are reported through `parse_ok`, never as errors.
pub fn parse_generation(raw: &str, toks: &SpecialTokens, dedupe: bool) -> GenerationOutput {
    let failed = || GenerationOutput {
        raw: raw.to_string(),
        ..GenerationOutput::default()
    };
    let Some(q_at) = raw.find(&toks.question_tok) else {
        return failed();
    };
    let after_q = q_at + toks.question_tok.len();
    let Some(a_rel) = raw[after_q..].find(&toks.answers_tok) else {
        return failed();
    };
    let question = clean_pieces(&raw[after_q..after_q + a_rel], toks).join(" ");
    let mut answers = clean_pieces(&raw[after_q + a_rel + toks.answers_tok.len()..], toks);
    if dedupe {
        dedupe_in_place(&mut answers);
    }
    let parse_ok = !question.is_empty() && !answers.is_empty();
    GenerationOutput {
        question,
        answers,
        raw: raw.to_string(),
        parse_ok,
    }
}

/// Parses the output of any task kind; single-target kinds fill only their field.
pub fn parse_for_kind(kind: TaskKind, raw: &str, toks: &SpecialTokens, dedupe: bool) -> GenerationOutput {
    let mut out = GenerationOutput {
        raw: raw.to_string(),
        ..GenerationOutput::default()
    };
    match kind {
        TaskKind::Main => return parse_generation(raw, toks, dedupe),
        TaskKind::Qg => {
            if let Some(at) = raw.find(&toks.question_tok) {
                out.question = clean_pieces(&raw[at + toks.question_tok.len()..], toks).join(" ");
                out.parse_ok = !out.question.is_empty();
            }
        }
        TaskKind::Ag => {
            if let Some(at) = raw.find(&toks.answers_tok) {
                out.answers = clean_pieces(&raw[at + toks.answers_tok.len()..], toks);
                if dedupe {
                    dedupe_in_place(&mut out.answers);
                }
                out.parse_ok = !out.answers.is_empty();
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{PollSample, Split};
    use crate::tokenizer::VocabTokenizer;

    fn sample(post: &str, comments: &[&str], q: &str, answers: &[&str]) -> PollSample {
        PollSample {
            id: "s1".into(),
            post: post.into(),
            comments: comments.iter().map(|s| s.to_string()).collect(),
            question: q.into(),
            answers: answers.iter().map(|s| s.to_string()).collect(),
            split: Split::Train,
        }
    }

    fn tokenizer() -> VocabTokenizer {
        VocabTokenizer::build(SpecialTokens::default(), ["generate then p c1 c2"], 1)
    }

    #[test]
    fn source_layouts() {
        let f = TaskFormat::default();
        let t = tokenizer();
        let s = sample("p", &[], "q", &["a", "b"]);
        assert_eq!(
            build_source(TaskKind::Main, &s, &f, &t, 1024).unwrap(),
            "generate <question> then <answers> [SEP] p"
        );
        let s = sample("p", &["c1", "c2"], "q", &["a", "b"]);
        assert_eq!(
            build_source(TaskKind::Qg, &s, &f, &t, 1024).unwrap(),
            "generate <question> [SEP] p [SEP] c1 [SEP] c2"
        );
    }

    #[test]
    fn long_sources_are_cut_to_the_limit() {
        let f = TaskFormat::default();
        let t = tokenizer();
        let post = vec!["w"; 1500].join(" ");
        let comments: Vec<String> = (0..10).map(|i| vec![format!("c{i}"); 50].join(" ")).collect();
        let s = PollSample {
            comments,
            ..sample(&post, &[], "q", &["a", "b"])
        };
        let full = build_source(TaskKind::Main, &s, &f, &t, usize::MAX).unwrap();
        assert!(t.count(&full) >= 2000);
        let cut = build_source(TaskKind::Main, &s, &f, &t, 1024).unwrap();
        assert_eq!(t.count(&cut), 1024);
        assert!(cut.starts_with("generate <question> then <answers> [SEP] w w"));
        assert!(full.starts_with(&cut));
        assert!(!cut.contains("c0"));
    }

    #[test]
    fn prompt_must_fit() {
        let t = tokenizer();
        let s = sample("p", &[], "q", &["a", "b"]);
        let err = build_source(TaskKind::Main, &s, &TaskFormat::default(), &t, 5).unwrap_err();
        assert_eq!(err, FormatError::PromptDoesNotFit { needed: 6, limit: 5 });
        assert!(build_source(TaskKind::Main, &s, &TaskFormat::default(), &t, 6).is_ok());
    }

    #[test]
    fn target_layouts() {
        let toks = SpecialTokens::default();
        let s = sample("p", &[], "q", &["a", "b"]);
        assert_eq!(build_target(TaskKind::Main, &s, &toks), "<question> q <answers> a <ans_sep> b");
        assert_eq!(build_target(TaskKind::Qg, &s, &toks), "<question> q");
        let s = sample("p", &[], "q", &["x", "y", "z"]);
        assert_eq!(build_target(TaskKind::Ag, &s, &toks), "<answers> x <ans_sep> y <ans_sep> z");
    }

    #[test]
    fn parsing() {
        let toks = SpecialTokens::default();
        let ok = parse_generation("<question> q <answers> a <ans_sep> b", &toks, false);
        assert_eq!((ok.question.as_str(), ok.answers.clone(), ok.parse_ok), ("q", vec!["a".to_string(), "b".to_string()], true));

        let bad = parse_generation("garbage with no tokens", &toks, false);
        assert!(!bad.parse_ok);
        assert_eq!(bad.raw, "garbage with no tokens");

        let dup = "<question> q <answers> a <ans_sep> a <ans_sep> b";
        assert_eq!(parse_generation(dup, &toks, true).answers, vec!["a", "b"]);
        assert_eq!(parse_generation(dup, &toks, false).answers, vec!["a", "a", "b"]);

        assert!(!parse_generation("<question> <answers> a", &toks, false).parse_ok);
        assert!(!parse_generation("<question> q <answers> <ans_sep>", &toks, false).parse_ok);
        assert!(!parse_generation("<answers> a <question> q", &toks, false).parse_ok);
    }

    #[test]
    fn single_kind_parsing() {
        let toks = SpecialTokens::default();
        let q = parse_for_kind(TaskKind::Qg, "<question> q", &toks, false);
        assert!(q.parse_ok);
        assert_eq!(q.question, "q");
        let a = parse_for_kind(TaskKind::Ag, "<answers> x <ans_sep> y", &toks, false);
        assert_eq!(a.answers, vec!["x", "y"]);
        assert!(!parse_for_kind(TaskKind::Ag, "x y", &toks, false).parse_ok);
    }

    #[test]
    fn task_set_parsing() {
        assert_eq!("main,qg,ag".parse::<TaskSet>().unwrap(), TaskSet::full());
        assert_eq!("ag,main".parse::<TaskSet>().unwrap().to_string(), "main,ag");
        assert!("".parse::<TaskSet>().is_err());
        assert!("main,xx".parse::<TaskSet>().is_err());
        assert_eq!("qg".parse::<TaskSet>().unwrap().inference_kind(), TaskKind::Qg);
        assert!(!"qg".parse::<TaskSet>().unwrap().is_multi_objective());
        assert!("main".parse::<TaskSet>().unwrap().is_multi_objective());
    }

    #[test]
    fn special_tokens_validation() {
        assert!(SpecialTokens::default().validate().is_ok());
        let mut t = SpecialTokens::default();
        t.answer_sep = t.field_sep.clone();
        assert!(t.validate().is_err());
    }
}
