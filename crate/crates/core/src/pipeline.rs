//! One training run end to end: declarative run config, tokenizer building,
//! training, prediction, evaluation and checkpoint files.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::{Corpus, CorpusError, PollSample, Split};
use crate::decoder::{DecodeConfig, DecodeError, PollGenerator};
use crate::formatting::{Limits, TaskFormat, TaskKind, TaskSet};
use crate::metrics::{evaluate_predictions, MetricReport, MetricsError, Prediction};
use crate::model::{Backbone, BackboneConfig, Checkpoint, ModelError, ReferenceModel};
use crate::tokenizer::{Tokenizer, VocabTokenizer};
use crate::trainer::{train, TrainConfig, TrainContext, TrainError, TrainHistory};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("config: {0}")]
    Config(String),
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Backbone shape; the vocabulary size comes from the tokenizer and the
/// initialization seed from the training seed.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub hidden_dim: usize,
    pub layers: usize,
    pub heads: usize,
    pub ffn_dim: usize,
    pub max_positions: usize,
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self {
            hidden_dim: 32,
            layers: 1,
            heads: 4,
            ffn_dim: 64,
            max_positions: 64,
        }
    }
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// JSONL corpus; relative paths resolve against the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corpus: Option<PathBuf>,
    #[serde(default)]
    pub model: ModelSpec,
    pub train: TrainConfig,
    #[serde(default)]
    pub format: TaskFormat,
    #[serde(default)]
    pub limits: Limits,
    #[serde(default)]
    pub decode: DecodeConfig,
    /// Training-split words seen fewer times map to the unknown token.
    #[serde(default = "one")]
    pub min_count: usize,
    #[serde(default)]
    pub dedupe_answers: bool,
}

impl RunConfig {
    /// Reference-model settings sized for the synthetic corpus.
    pub fn desk(task_set: TaskSet, seed: u64) -> Self {
        Self {
            corpus: None,
            model: ModelSpec::default(),
            train: TrainConfig::desk(task_set, seed),
            format: TaskFormat::default(),
            limits: Limits {
                max_source_len: 64,
                max_target_len: 32,
            },
            decode: DecodeConfig {
                max_output_len: 32,
                ..Default::default()
            },
            min_count: 1,
            dedupe_answers: false,
        }
    }

    pub fn from_yaml(text: &str) -> Result<Self, PipelineError> {
        serde_yaml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let mut cfg = Self::from_yaml(&text)?;
        if let (Some(c), Some(dir)) = (&cfg.corpus, path.parent()) {
            if c.is_relative() {
                cfg.corpus = Some(dir.join(c));
            }
        }
        Ok(cfg)
    }

    pub fn to_yaml(&self) -> String {
        serde_yaml::to_string(self).expect("config serializes")
    }

    /// Hash of everything that affects training and decoding (the corpus path is excluded).
    pub fn config_hash(&self) -> String {
        let mut c = self.clone();
        c.corpus = None;
        hex::encode(Sha256::digest(serde_json::to_vec(&c).expect("config serializes")))
    }

    pub fn backbone_config(&self, vocab_size: usize) -> BackboneConfig {
        BackboneConfig {
            vocab_size,
            hidden_dim: self.model.hidden_dim,
            layers: self.model.layers,
            heads: self.model.heads,
            ffn_dim: self.model.ffn_dim,
            max_positions: self.model.max_positions,
            init_seed: self.train.seed,
        }
    }

    pub fn load_corpus(&self) -> Result<Corpus, PipelineError> {
        let path = self
            .corpus
            .as_ref()
            .ok_or_else(|| PipelineError::Config("no corpus path".into()))?;
        let (corpus, _) = crate::corpus::load_corpus_with(path, false, &self.format.tokens)?;
        Ok(corpus)
    }
}

/// Vocabulary from the training split plus the prompt words.
pub fn build_tokenizer(corpus: &Corpus, format: &TaskFormat, min_count: usize) -> VocabTokenizer {
    let prompts: Vec<String> = TaskKind::ALL
        .iter()
        .map(|&k| format.prompts.render(k, &format.tokens))
        .collect();
    let mut texts: Vec<&str> = Vec::new();
    for s in corpus.split(Split::Train) {
        texts.push(&s.post);
        texts.extend(s.comments.iter().map(String::as_str));
        texts.push(&s.question);
        texts.extend(s.answers.iter().map(String::as_str));
    }
    // Prompt words must never fall below the threshold.
    for p in &prompts {
        for _ in 0..min_count.max(1) {
            texts.push(p);
        }
    }
    VocabTokenizer::build(format.tokens.clone(), texts, min_count)
}

pub struct TrainedRun {
    pub model: ReferenceModel,
    pub tokenizer: VocabTokenizer,
    pub history: TrainHistory,
}

pub fn train_run(corpus: &Corpus, cfg: &RunConfig) -> Result<TrainedRun, PipelineError> {
    let tokenizer = build_tokenizer(corpus, &cfg.format, cfg.min_count);
    let model = ReferenceModel::new(cfg.backbone_config(tokenizer.vocab_size()))?;
    let ctx = TrainContext {
        tokenizer: &tokenizer,
        format: &cfg.format,
        limits: cfg.limits,
    };
    let outcome = train(model, corpus, &cfg.train, &ctx)?;
    Ok(TrainedRun {
        model: outcome.model,
        tokenizer,
        history: outcome.history,
    })
}

/// Predictions for every sample of `split` using the prompt of `kind`.
pub fn predict_split<B: Backbone>(
    model: &B,
    tokenizer: &dyn Tokenizer,
    cfg: &RunConfig,
    corpus: &Corpus,
    split: Split,
    kind: TaskKind,
) -> Result<Vec<Prediction>, PipelineError> {
    let samples: Vec<&PollSample> = corpus.split(split).collect();
    let generator = PollGenerator {
        model,
        tokenizer,
        format: &cfg.format,
        limits: cfg.limits,
        decode: cfg.decode,
        dedupe: cfg.dedupe_answers,
    };
    let outs = generator.predict_all(kind, &samples)?;
    Ok(samples
        .iter()
        .zip(outs)
        .map(|(s, o)| Prediction::new(s.id.clone(), o))
        .collect())
}

pub fn evaluate_split(preds: &[Prediction], corpus: &Corpus, split: Split) -> Result<MetricReport, PipelineError> {
    let refs: Vec<PollSample> = corpus.split(split).cloned().collect();
    Ok(evaluate_predictions(preds, &refs)?)
}

/// Joins question-only and answers-only predictions into poll records.
pub fn merge_single_task(questions: &[Prediction], answers: &[Prediction]) -> Vec<Prediction> {
    questions
        .iter()
        .zip(answers)
        .map(|(q, a)| {
            debug_assert_eq!(q.id, a.id);
            Prediction {
                id: q.id.clone(),
                raw: format!("{} {}", q.raw, a.raw),
                question: q.question.clone(),
                answers: a.answers.clone(),
                parse_ok: q.parse_ok && a.parse_ok,
            }
        })
        .collect()
}

pub const CHECKPOINT_FILE: &str = "model.pfck";
pub const HISTORY_FILE: &str = "history.json";
pub const CONFIG_FILE: &str = "run.yaml";

/// Writes `model.pfck`, `history.json` and the resolved `run.yaml` into `dir`.
pub fn save_run(dir: &Path, run: &TrainedRun, cfg: &RunConfig) -> Result<(), PipelineError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let ckpt = Checkpoint {
        config: run.model.config().clone(),
        params: crate::model::TrainableBackbone::parameters(&run.model).clone(),
        tokenizer: run.tokenizer.to_json(),
        tokenizer_fingerprint: run.tokenizer.fingerprint(),
        metadata: serde_json::json!({
            "run_config": cfg,
            "selected": run.history.selected,
        }),
    };
    ckpt.save(&dir.join(CHECKPOINT_FILE))?;
    let hist = dir.join(HISTORY_FILE);
    fs::write(&hist, serde_json::to_string_pretty(&run.history).expect("history serializes")).map_err(io_err(&hist))?;
    let conf = dir.join(CONFIG_FILE);
    fs::write(&conf, cfg.to_yaml()).map_err(io_err(&conf))?;
    Ok(())
}

/// Loads a checkpoint file (or a run directory containing one).
pub fn load_run(path: &Path) -> Result<(ReferenceModel, VocabTokenizer, RunConfig), PipelineError> {
    let file = if path.is_dir() { path.join(CHECKPOINT_FILE) } else { path.to_path_buf() };
    let ckpt = Checkpoint::load(&file)?;
    let tokenizer = VocabTokenizer::from_json(&ckpt.tokenizer)
        .map_err(|e| PipelineError::Config(format!("tokenizer: {e}")))?;
    if tokenizer.fingerprint() != ckpt.tokenizer_fingerprint {
        return Err(PipelineError::Config("tokenizer fingerprint mismatch".into()));
    }
    let cfg: RunConfig = serde_json::from_value(ckpt.metadata["run_config"].clone())
        .map_err(|e| PipelineError::Config(format!("run config: {e}")))?;
    let model = ReferenceModel::from_parameters(ckpt.config, ckpt.params)?;
    Ok((model, tokenizer, cfg))
}

pub fn write_predictions(path: &Path, preds: &[Prediction]) -> Result<(), PipelineError> {
    let mut out = String::new();
    for p in preds {
        out.push_str(&serde_json::to_string(p).expect("prediction serializes"));
        out.push('\n');
    }
    fs::write(path, out).map_err(io_err(path))
}

pub fn read_predictions(path: &Path) -> Result<Vec<Prediction>, PipelineError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| PipelineError::Config(format!("{}:{}: {e}", path.display(), i + 1)))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn yaml_round_trip_and_hash() {
        let cfg = RunConfig::desk(TaskSet::full(), 40);
        let back = RunConfig::from_yaml(&cfg.to_yaml()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.config_hash(), cfg.config_hash());
        let mut other = cfg.clone();
        other.train.seed = 41;
        assert_ne!(other.config_hash(), cfg.config_hash());
    }

    #[test]
    fn tokenizer_covers_prompts() {
        let corpus = crate::synthetic::synthetic_corpus(20, 1);
        let format = TaskFormat::default();
        let tok = build_tokenizer(&corpus, &format, 3);
        for k in TaskKind::ALL {
            let ids = tok.encode(&format.prompts.render(k, &format.tokens));
            assert!(!ids.0.contains(&crate::tokenizer::UNK_ID));
        }
    }
}
