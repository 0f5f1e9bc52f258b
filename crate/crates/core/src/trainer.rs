//! Per-task losses, their weighted combination, and the multi-objective
//! training loop with validation-based checkpoint selection.
//!
//! Each task loss is the mean over that task's instances in the batch of the
//! per-token target negative log-likelihood. The combined objective is
//! `main + gamma_q * qg + gamma_a * ag`; a task absent from a batch contributes 0.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, Split};
use crate::decoder::{DecodeConfig, DecodeError, PollGenerator};
use crate::formatting::{expand_to_instances, FormatError, Limits, TaskFormat, TaskInstance, TaskKind, TaskSet};
use crate::metrics::{rouge_n, tokenize_for_metrics, ANSWER_JOIN};
use crate::model::{AdamW, AdamWConfig, Backbone, Gradients, ModelError, TokenSequence, TrainableBackbone, WeightedExample};
use crate::tokenizer::Tokenizer;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("the {0} split is empty")]
    EmptySplit(Split),
    #[error("batch is empty")]
    EmptyBatch,
    #[error("no epochs recorded")]
    EmptyHistory,
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Decode(#[from] DecodeError),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    /// Linear decay from the initial rate to 0 over all steps.
    #[default]
    LinearDecay,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub gamma_q: f64,
    pub gamma_a: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    #[serde(default)]
    pub schedule: Schedule,
    pub task_set: TaskSet,
    #[serde(default)]
    pub grad_clip: Option<f64>,
    #[serde(default)]
    pub optimizer: AdamWConfig,
}

impl TrainConfig {
    /// Published settings for a pretrained backbone: AdamW at 3e-5 with linear
    /// decay, equal task weights, 20 epochs for single-task sets and 10 otherwise.
    /// Batch size is not published; 8 is a placeholder.
    pub fn published(task_set: TaskSet, seed: u64) -> Self {
        let epochs = if task_set.len() == 1 { 20 } else { 10 };
        Self {
            gamma_q: 1.0,
            gamma_a: 1.0,
            learning_rate: 3e-5,
            epochs,
            batch_size: 8,
            seed,
            schedule: Schedule::LinearDecay,
            task_set,
            grad_clip: None,
            optimizer: AdamWConfig::default(),
        }
    }

    /// Settings that train the reference model from scratch on desk-scale corpora.
    pub fn desk(task_set: TaskSet, seed: u64) -> Self {
        Self {
            learning_rate: 3e-3,
            epochs: 30,
            batch_size: 16,
            grad_clip: Some(1.0),
            ..Self::published(task_set, seed)
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        if !(self.learning_rate > 0.0) {
            return Err(TrainError::InvalidConfig("learning_rate must be positive".into()));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(TrainError::InvalidConfig("epochs and batch_size must be at least 1".into()));
        }
        if self.gamma_q < 0.0 || self.gamma_a < 0.0 {
            return Err(TrainError::InvalidConfig("task weights must be non-negative".into()));
        }
        Ok(())
    }

    pub fn weight(&self, kind: TaskKind) -> f64 {
        match kind {
            TaskKind::Main => 1.0,
            TaskKind::Qg => self.gamma_q,
            TaskKind::Ag => self.gamma_a,
        }
    }

    /// Learning rate before update `step` of `total_steps` (0-based).
    pub fn lr_at(&self, step: usize, total_steps: usize) -> f64 {
        match self.schedule {
            Schedule::LinearDecay => {
                self.learning_rate * (1.0 - step as f64 / total_steps.max(1) as f64).max(0.0)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskCounts {
    pub main: usize,
    pub qg: usize,
    pub ag: usize,
}

impl TaskCounts {
    pub fn get(&self, kind: TaskKind) -> usize {
        match kind {
            TaskKind::Main => self.main,
            TaskKind::Qg => self.qg,
            TaskKind::Ag => self.ag,
        }
    }

    fn bump(&mut self, kind: TaskKind) {
        match kind {
            TaskKind::Main => self.main += 1,
            TaskKind::Qg => self.qg += 1,
            TaskKind::Ag => self.ag += 1,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub main: f64,
    pub qg: f64,
    pub ag: f64,
    pub combined: f64,
    pub counts: TaskCounts,
}

impl LossBreakdown {
    fn from_parts(main: f64, qg: f64, ag: f64, counts: TaskCounts, cfg: &TrainConfig) -> Self {
        Self {
            main,
            qg,
            ag,
            combined: main + cfg.gamma_q * qg + cfg.gamma_a * ag,
            counts,
        }
    }
}

/// A task instance mapped to ids; `target` ends with the end-of-sequence token.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedInstance {
    pub sample_id: String,
    pub kind: TaskKind,
    pub source: TokenSequence,
    pub target: TokenSequence,
}

impl EncodedInstance {
    pub fn encode(inst: &TaskInstance, tokenizer: &dyn Tokenizer, max_target_len: usize) -> Self {
        let mut target = tokenizer.encode(&inst.target);
        target.0.truncate(max_target_len.saturating_sub(1));
        Self {
            sample_id: inst.sample_id.clone(),
            kind: inst.kind,
            source: tokenizer.encode(&inst.source),
            target: target.with_eos(),
        }
    }
}

/// `−log Pr(target | source) / |target|`.
pub fn instance_loss<B: Backbone + ?Sized>(model: &B, source: &TokenSequence, target: &TokenSequence) -> Result<f64, TrainError> {
    let lp = model.sequence_log_prob(source, target)?;
    Ok(-lp / target.len() as f64)
}

fn breakdown_from(batch: &[EncodedInstance], per_token: &[f64], cfg: &TrainConfig) -> LossBreakdown {
    let mut sums = [0.0f64; 3];
    let mut counts = TaskCounts::default();
    for (inst, loss) in batch.iter().zip(per_token) {
        sums[inst.kind as usize] += loss;
        counts.bump(inst.kind);
    }
    let mean = |k: TaskKind| {
        let c = counts.get(k);
        if c == 0 {
            0.0
        } else {
            sums[k as usize] / c as f64
        }
    };
    LossBreakdown::from_parts(mean(TaskKind::Main), mean(TaskKind::Qg), mean(TaskKind::Ag), counts, cfg)
}

/// Forward-only weighted batch loss.
pub fn combined_loss<B: Backbone + ?Sized>(batch: &[EncodedInstance], model: &B, cfg: &TrainConfig) -> Result<LossBreakdown, TrainError> {
    if batch.is_empty() {
        return Err(TrainError::EmptyBatch);
    }
    let per_token = batch
        .iter()
        .map(|i| instance_loss(model, &i.source, &i.target))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(breakdown_from(batch, &per_token, cfg))
}

/// Weighted batch loss and its gradient. Instance `i` of kind `k` carries
/// weight `gamma_k / (count_k · |target_i|)` in the summed-NLL objective.
pub fn combined_loss_and_grad<B: TrainableBackbone>(
    batch: &[EncodedInstance],
    model: &B,
    cfg: &TrainConfig,
) -> Result<(LossBreakdown, Gradients), TrainError> {
    if batch.is_empty() {
        return Err(TrainError::EmptyBatch);
    }
    let mut counts = TaskCounts::default();
    for inst in batch {
        counts.bump(inst.kind);
    }
    let examples: Vec<WeightedExample<'_>> = batch
        .iter()
        .map(|i| WeightedExample {
            source: &i.source,
            target: &i.target,
            weight: cfg.weight(i.kind) / (counts.get(i.kind) as f64 * i.target.len() as f64),
        })
        .collect();
    let (nlls, grads) = model.weighted_nll_grad(&examples)?;
    let per_token: Vec<f64> = nlls
        .iter()
        .zip(batch)
        .map(|(nll, i)| nll / i.target.len() as f64)
        .collect();
    Ok((breakdown_from(batch, &per_token, cfg), grads))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Component means over the epoch's batches; counts are epoch totals.
    pub train: LossBreakdown,
    pub val_question_rouge1: f64,
    pub val_answers_rouge1: f64,
    pub selection_score: f64,
    pub checkpoint_id: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    pub steps: Vec<LossBreakdown>,
    pub selected: Option<String>,
}

pub fn checkpoint_id(epoch: usize) -> String {
    format!("epoch-{epoch}")
}

/// Validation score used for selection: question ROUGE-1 for question-only
/// sets, answers ROUGE-1 for answers-only sets, their mean otherwise.
pub fn selection_score(task_set: &TaskSet, question_r1: f64, answers_r1: f64) -> f64 {
    if task_set.is_multi_objective() {
        (question_r1 + answers_r1) / 2.0
    } else if task_set.contains(TaskKind::Qg) {
        question_r1
    } else {
        answers_r1
    }
}

/// Best epoch by selection score; ties go to the earliest.
pub fn select_checkpoint(history: &TrainHistory, task_set: &TaskSet) -> Result<String, TrainError> {
    let mut best: Option<(f64, &EpochRecord)> = None;
    for rec in &history.epochs {
        let s = selection_score(task_set, rec.val_question_rouge1, rec.val_answers_rouge1);
        if best.is_none_or(|(b, _)| s > b) {
            best = Some((s, rec));
        }
    }
    best.map(|(_, r)| r.checkpoint_id.clone()).ok_or(TrainError::EmptyHistory)
}

/// Shared text-layout settings for training and inference.
#[derive(Clone, Copy)]
pub struct TrainContext<'a> {
    pub tokenizer: &'a dyn Tokenizer,
    pub format: &'a TaskFormat,
    pub limits: Limits,
}

impl TrainContext<'_> {
    fn clamped_limits<B: Backbone + ?Sized>(&self, model: &B) -> Limits {
        Limits {
            max_source_len: self.limits.max_source_len.min(model.max_positions()),
            max_target_len: self.limits.max_target_len.min(model.max_positions()),
        }
    }
}

/// Instances of the train split, shuffled once by the config seed, then mapped to ids.
pub fn prepare_training_data<B: Backbone + ?Sized>(
    model: &B,
    corpus: &Corpus,
    cfg: &TrainConfig,
    ctx: &TrainContext<'_>,
) -> Result<Vec<EncodedInstance>, TrainError> {
    let limits = ctx.clamped_limits(model);
    let instances = expand_to_instances(corpus, &cfg.task_set, ctx.format, ctx.tokenizer, &limits, cfg.seed)?;
    Ok(instances
        .iter()
        .map(|i| EncodedInstance::encode(i, ctx.tokenizer, limits.max_target_len))
        .collect())
}

/// Greedy generation on the valid split; returns (question ROUGE-1, answers ROUGE-1).
pub fn validation_rouge1<B: Backbone>(model: &B, corpus: &Corpus, task_set: &TaskSet, ctx: &TrainContext<'_>) -> Result<(f64, f64), TrainError> {
    let samples: Vec<_> = corpus.split(Split::Valid).collect();
    let generator = PollGenerator {
        model,
        tokenizer: ctx.tokenizer,
        format: ctx.format,
        limits: ctx.limits,
        decode: DecodeConfig {
            beam_size: 1,
            max_output_len: ctx.limits.max_target_len,
            length_penalty: 0.0,
        },
        dedupe: false,
    };
    let kinds: Vec<TaskKind> = if task_set.contains(TaskKind::Main) {
        vec![TaskKind::Main]
    } else {
        task_set.iter().collect()
    };
    let mut q = 0.0;
    let mut a = 0.0;
    for kind in kinds {
        let outputs = generator.predict_all(kind, &samples)?;
        for (out, gold) in outputs.iter().zip(&samples) {
            if kind != TaskKind::Ag {
                q += rouge_n(&tokenize_for_metrics(&out.question), &tokenize_for_metrics(&gold.question), 1);
            }
            if kind != TaskKind::Qg {
                a += rouge_n(
                    &tokenize_for_metrics(&out.answers.join(ANSWER_JOIN)),
                    &tokenize_for_metrics(&gold.answers.join(ANSWER_JOIN)),
                    1,
                );
            }
        }
    }
    let n = samples.len().max(1) as f64;
    Ok((q / n, a / n))
}

pub struct TrainOutcome<B> {
    /// Weights from the selected epoch.
    pub model: B,
    pub history: TrainHistory,
}

/// Runs the multi-objective loop: one shuffled expansion of the train split,
/// fixed batch order every epoch, AdamW with linearly decaying rate, and a
/// greedy validation pass after each epoch that decides which weights to keep.
pub fn train<B: TrainableBackbone>(
    mut model: B,
    corpus: &Corpus,
    cfg: &TrainConfig,
    ctx: &TrainContext<'_>,
) -> Result<TrainOutcome<B>, TrainError> {
    cfg.validate()?;
    for split in [Split::Train, Split::Valid] {
        if corpus.count(split) == 0 {
            return Err(TrainError::EmptySplit(split));
        }
    }
    let data = prepare_training_data(&model, corpus, cfg, ctx)?;
    let batches: Vec<&[EncodedInstance]> = data.chunks(cfg.batch_size).collect();
    let total_steps = cfg.epochs * batches.len();
    let mut optimizer = AdamW::new(cfg.optimizer);
    let mut history = TrainHistory::default();
    let mut best: Option<(f64, B)> = None;
    let mut step = 0;

    for epoch in 1..=cfg.epochs {
        let mut sums = [0.0f64; 4];
        let mut counts = TaskCounts::default();
        for batch in &batches {
            let (loss, mut grads) = combined_loss_and_grad(batch, &model, cfg)?;
            if let Some(max_norm) = cfg.grad_clip {
                let norm = grads.global_norm();
                if norm > max_norm {
                    grads.scale(max_norm / norm);
                }
            }
            model.apply_gradient(&grads, &mut optimizer, cfg.lr_at(step, total_steps))?;
            step += 1;
            sums[0] += loss.main;
            sums[1] += loss.qg;
            sums[2] += loss.ag;
            sums[3] += loss.combined;
            counts.main += loss.counts.main;
            counts.qg += loss.counts.qg;
            counts.ag += loss.counts.ag;
            history.steps.push(loss);
        }
        let nb = batches.len() as f64;
        let train = LossBreakdown {
            main: sums[0] / nb,
            qg: sums[1] / nb,
            ag: sums[2] / nb,
            combined: sums[3] / nb,
            counts,
        };
        let (vq, va) = validation_rouge1(&model, corpus, &cfg.task_set, ctx)?;
        let score = selection_score(&cfg.task_set, vq, va);
        log::info!(
            "epoch {epoch}/{}: loss {:.4} (main {:.4} qg {:.4} ag {:.4}) val R1 q {:.2} a {:.2}",
            cfg.epochs,
            train.combined,
            train.main,
            train.qg,
            train.ag,
            vq,
            va
        );
        history.epochs.push(EpochRecord {
            epoch,
            train,
            val_question_rouge1: vq,
            val_answers_rouge1: va,
            selection_score: score,
            checkpoint_id: checkpoint_id(epoch),
        });
        if best.as_ref().is_none_or(|(b, _)| score > *b) {
            best = Some((score, model.clone()));
        }
    }
    history.selected = Some(select_checkpoint(&history, &cfg.task_set)?);
    let (_, model) = best.expect("at least one epoch");
    Ok(TrainOutcome { model, history })
}
