//! Experiment grids: ablations, the single-task baseline, comment-proportion
//! and training-size sweeps, multi-seed aggregation and report export.
//!
//! A plan expands to one run per (variant, seed). Each finished run leaves a
//! record file keyed by a hash of everything that determines it, so re-running
//! a plan skips completed work. Failed runs mark their cells failed instead of
//! aborting the grid.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::{subsample_training, truncate_comments, Corpus, Split};
use crate::formatting::{TaskKind, TaskSet};
use crate::metrics::{MetricReport, Prediction, Target, TargetScores};
use crate::pipeline::{evaluate_split, io_err, predict_split, train_run, write_predictions, PipelineError, RunConfig};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
    #[error("unknown report format {0:?}")]
    UnknownFormat(String),
    #[error("report: {0}")]
    Report(String),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

/// One row of a plan: training overrides plus corpus transforms.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Variant {
    pub label: String,
    pub task_set: Option<TaskSet>,
    pub gamma_q: Option<f64>,
    pub gamma_a: Option<f64>,
    pub epochs: Option<usize>,
    pub learning_rate: Option<f64>,
    pub batch_size: Option<usize>,
    /// Keep the first n% of comments in every split.
    pub comment_percent: Option<u32>,
    /// Keep this fraction of the training split.
    pub train_fraction: Option<f64>,
    /// Train separate question-only and answers-only models and join their outputs.
    pub single_task_pair: bool,
    /// Position on a sweep curve.
    pub x: Option<f64>,
}

impl Variant {
    pub fn labeled(label: impl Into<String>) -> Self {
        Self {
            label: label.into(),
            ..Default::default()
        }
    }

    pub fn with_tasks(label: &str, tasks: &str) -> Self {
        Self {
            task_set: Some(tasks.parse().expect("valid task list")),
            ..Self::labeled(label)
        }
    }

    /// Run config for this variant and seed.
    pub fn apply(&self, base: &RunConfig, seed: u64) -> RunConfig {
        let mut cfg = base.clone();
        let t = &mut cfg.train;
        t.seed = seed;
        if let Some(ts) = &self.task_set {
            t.task_set = ts.clone();
        }
        if let Some(g) = self.gamma_q {
            t.gamma_q = g;
        }
        if let Some(g) = self.gamma_a {
            t.gamma_a = g;
        }
        if let Some(e) = self.epochs {
            t.epochs = e;
        }
        if let Some(lr) = self.learning_rate {
            t.learning_rate = lr;
        }
        if let Some(b) = self.batch_size {
            t.batch_size = b;
        }
        cfg
    }

    /// The corpus this variant trains and tests on.
    pub fn transform_corpus(&self, corpus: &Corpus, seed: u64) -> Result<Corpus, PipelineError> {
        let mut c = corpus.clone();
        if let Some(p) = self.comment_percent {
            let mut samples = Vec::with_capacity(c.samples.len());
            for s in &c.samples {
                samples.push(truncate_comments(s, p)?);
            }
            c.samples = samples;
        }
        if let Some(f) = self.train_fraction {
            c = subsample_training(&c, f, seed)?;
        }
        Ok(c)
    }
}

fn default_seeds() -> Vec<u64> {
    vec![40, 41, 42, 43, 44]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub name: String,
    pub base: RunConfig,
    pub variants: Vec<Variant>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Run records, predictions and reports go here; `None` keeps everything in memory.
    #[serde(default)]
    pub outputs: Option<PathBuf>,
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.seeds.is_empty() {
            return Err(ExperimentError::InvalidPlan("at least one seed is required".into()));
        }
        if self.variants.is_empty() {
            return Err(ExperimentError::InvalidPlan("no variants".into()));
        }
        let mut seen = HashSet::new();
        for v in &self.variants {
            if !seen.insert(v.label.as_str()) {
                return Err(ExperimentError::InvalidPlan(format!("duplicate variant label {:?}", v.label)));
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let mut plan: Self = serde_yaml::from_str(&text).map_err(|e| ExperimentError::InvalidPlan(e.to_string()))?;
        let dir = path.parent().unwrap_or(Path::new("."));
        if let Some(c) = &plan.base.corpus {
            if c.is_relative() {
                plan.base.corpus = Some(dir.join(c));
            }
        }
        if let Some(o) = &plan.outputs {
            if o.is_relative() {
                plan.outputs = Some(dir.join(o));
            }
        }
        plan.validate()?;
        Ok(plan)
    }

    /// Every (variant, seed) pair, variants outer.
    pub fn runs(&self) -> Vec<(&Variant, u64)> {
        self.variants
            .iter()
            .flat_map(|v| self.seeds.iter().map(move |&s| (v, s)))
            .collect()
    }
}

pub fn ablation_variants() -> Vec<Variant> {
    vec![
        Variant::with_tasks("UniPoll", "main,qg,ag"),
        Variant::with_tasks("w.o.A", "main,qg"),
        Variant::with_tasks("w.o.Q", "main,ag"),
        Variant::with_tasks("w.o.Q,A", "main"),
    ]
}

pub fn single_task_variant() -> Variant {
    Variant {
        single_task_pair: true,
        ..Variant::labeled("single-task")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum RunStatus {
    Ok { report: MetricReport },
    Failed { error: String },
}

/// What one (variant, seed) run produced and where to find it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub variant: String,
    pub seed: u64,
    pub run_hash: String,
    /// Selected checkpoint of each trained model.
    pub checkpoint_ids: Vec<String>,
    /// Final-epoch mean combined training loss of each trained model.
    pub final_train_loss: Vec<f64>,
    pub predictions_file: Option<String>,
    #[serde(flatten)]
    pub status: RunStatus,
}

impl RunRecord {
    pub fn report(&self) -> Option<&MetricReport> {
        match &self.status {
            RunStatus::Ok { report } => Some(report),
            RunStatus::Failed { .. } => None,
        }
    }
}

fn run_hash(variant: &Variant, cfg: &RunConfig, corpus_hash: &str) -> String {
    let key = serde_json::json!({
        "config": cfg.config_hash(),
        "comment_percent": variant.comment_percent,
        "train_fraction": variant.train_fraction,
        "single_task_pair": variant.single_task_pair,
        "corpus": corpus_hash,
    });
    hex::encode(Sha256::digest(key.to_string().as_bytes()))
}

fn file_stem(variant: &str, seed: u64, hash: &str) -> String {
    let safe: String = variant
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' })
        .collect();
    format!("{safe}-s{seed}-{}", &hash[..12])
}

struct RunOutput {
    report: MetricReport,
    predictions: Vec<Prediction>,
    checkpoint_ids: Vec<String>,
    final_train_loss: Vec<f64>,
}

fn final_loss(h: &crate::trainer::TrainHistory) -> f64 {
    h.epochs.last().map_or(f64::NAN, |e| e.train.combined)
}

fn execute(corpus: &Corpus, variant: &Variant, cfg: &RunConfig, seed: u64) -> Result<RunOutput, PipelineError> {
    let corpus = variant.transform_corpus(corpus, seed)?;
    if variant.single_task_pair {
        let mut qcfg = cfg.clone();
        qcfg.train.task_set = TaskSet::new([TaskKind::Qg]).expect("non-empty");
        let mut acfg = cfg.clone();
        acfg.train.task_set = TaskSet::new([TaskKind::Ag]).expect("non-empty");
        let qrun = train_run(&corpus, &qcfg)?;
        let arun = train_run(&corpus, &acfg)?;
        let qp = predict_split(&qrun.model, &qrun.tokenizer, &qcfg, &corpus, Split::Test, TaskKind::Qg)?;
        let ap = predict_split(&arun.model, &arun.tokenizer, &acfg, &corpus, Split::Test, TaskKind::Ag)?;
        // Question scores come only from the question model, answers only from the answers model.
        let qr = evaluate_split(&qp, &corpus, Split::Test)?;
        let ar = evaluate_split(&ap, &corpus, Split::Test)?;
        let report = MetricReport::from_targets(qr.question, ar.answers, qr.n_samples);
        Ok(RunOutput {
            report,
            predictions: crate::pipeline::merge_single_task(&qp, &ap),
            checkpoint_ids: vec![
                qrun.history.selected.clone().unwrap_or_default(),
                arun.history.selected.clone().unwrap_or_default(),
            ],
            final_train_loss: vec![final_loss(&qrun.history), final_loss(&arun.history)],
        })
    } else {
        let run = train_run(&corpus, cfg)?;
        let kind = cfg.train.task_set.inference_kind();
        let preds = if kind == TaskKind::Main {
            predict_split(&run.model, &run.tokenizer, cfg, &corpus, Split::Test, kind)?
        } else {
            // A question-only or answers-only model; a two-auxiliary set is run once per prompt.
            let mut merged: Option<Vec<Prediction>> = None;
            for k in cfg.train.task_set.iter() {
                let p = predict_split(&run.model, &run.tokenizer, cfg, &corpus, Split::Test, k)?;
                merged = Some(match (merged, k) {
                    (None, _) => p,
                    (Some(q), TaskKind::Ag) => crate::pipeline::merge_single_task(&q, &p),
                    (Some(prev), _) => prev,
                });
            }
            merged.expect("non-empty task set")
        };
        let report = evaluate_split(&preds, &corpus, Split::Test)?;
        Ok(RunOutput {
            report,
            predictions: preds,
            checkpoint_ids: vec![run.history.selected.clone().unwrap_or_default()],
            final_train_loss: vec![final_loss(&run.history)],
        })
    }
}

fn existing_record(dir: &Path, stem: &str, hash: &str) -> Option<RunRecord> {
    let text = fs::read_to_string(dir.join(format!("{stem}.json"))).ok()?;
    let rec: RunRecord = serde_json::from_str(&text).ok()?;
    (rec.run_hash == hash && rec.report().is_some()).then_some(rec)
}

/// Runs (or resumes) every (variant, seed) pair of the plan.
pub fn run_plan_records(corpus: &Corpus, plan: &ExperimentPlan) -> Result<Vec<RunRecord>, ExperimentError> {
    plan.validate()?;
    let corpus_hash = corpus.content_hash();
    let runs_dir = plan.outputs.as_ref().map(|o| o.join("runs"));
    if let Some(d) = &runs_dir {
        fs::create_dir_all(d).map_err(|e| PipelineError::Io {
            path: d.clone(),
            source: e,
        })?;
    }
    let records = plan
        .runs()
        .into_par_iter()
        .map(|(variant, seed)| {
            let cfg = variant.apply(&plan.base, seed);
            let hash = run_hash(variant, &cfg, &corpus_hash);
            let stem = file_stem(&variant.label, seed, &hash);
            if let Some(d) = &runs_dir {
                if let Some(rec) = existing_record(d, &stem, &hash) {
                    log::info!("{} seed {seed}: reusing {stem}", variant.label);
                    return rec;
                }
            }
            log::info!("{} seed {seed}: training", variant.label);
            let mut rec = RunRecord {
                variant: variant.label.clone(),
                seed,
                run_hash: hash,
                checkpoint_ids: vec![],
                final_train_loss: vec![],
                predictions_file: None,
                status: RunStatus::Failed { error: String::new() },
            };
            match execute(corpus, variant, &cfg, seed) {
                Ok(out) => {
                    rec.checkpoint_ids = out.checkpoint_ids;
                    rec.final_train_loss = out.final_train_loss;
                    rec.status = RunStatus::Ok { report: out.report };
                    if let Some(d) = &runs_dir {
                        let name = format!("{stem}.preds.jsonl");
                        match write_predictions(&d.join(&name), &out.predictions) {
                            Ok(()) => rec.predictions_file = Some(name),
                            Err(e) => rec.status = RunStatus::Failed { error: e.to_string() },
                        }
                    }
                }
                Err(e) => {
                    log::warn!("{} seed {seed} failed: {e}", variant.label);
                    rec.status = RunStatus::Failed { error: e.to_string() };
                }
            }
            if let Some(d) = &runs_dir {
                let path = d.join(format!("{stem}.json"));
                if let Err(e) = fs::write(&path, serde_json::to_string_pretty(&rec).expect("record serializes")) {
                    log::warn!("could not write {}: {e}", path.display());
                }
            }
            rec
        })
        .collect();
    Ok(records)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub variant: String,
    #[serde(default)]
    pub x: Option<f64>,
    pub target: Target,
    pub metric: String,
    pub mean: Option<f64>,
    /// Population standard deviation over seeds.
    pub std: Option<f64>,
    pub n_seeds: usize,
    /// Set when any seed of the variant failed; the cell then has no value.
    #[serde(default)]
    pub failed: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunRef {
    pub variant: String,
    pub seed: u64,
    pub run_hash: String,
    pub checkpoint_ids: Vec<String>,
    pub predictions_file: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TableMetadata {
    pub config_hash: String,
    pub corpus_hash: String,
    pub seeds: Vec<u64>,
    pub runs: Vec<RunRef>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub name: String,
    pub rows: Vec<ResultRow>,
    pub metadata: TableMetadata,
}

fn population_mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

impl ResultTable {
    /// Rows for every (variant, target, metric) in plan order.
    pub fn from_records(plan: &ExperimentPlan, records: &[RunRecord], corpus_hash: &str) -> Self {
        let mut rows = Vec::new();
        for v in &plan.variants {
            let recs: Vec<&RunRecord> = records.iter().filter(|r| r.variant == v.label).collect();
            let failures: Vec<String> = recs
                .iter()
                .filter_map(|r| match &r.status {
                    RunStatus::Failed { error } => Some(format!("seed {}: {error}", r.seed)),
                    RunStatus::Ok { .. } => None,
                })
                .collect();
            let reports: Vec<&MetricReport> = recs.iter().filter_map(|r| r.report()).collect();
            for target in Target::ALL {
                for (mi, metric) in TargetScores::METRICS.iter().enumerate() {
                    let (mean, std, failed) = if failures.is_empty() && !reports.is_empty() {
                        let vals: Vec<f64> = reports.iter().map(|r| r.target(target).values()[mi]).collect();
                        let (m, s) = population_mean_std(&vals);
                        (Some(m), Some(s), None)
                    } else if failures.is_empty() {
                        (None, None, Some("no runs".to_string()))
                    } else {
                        (None, None, Some(failures.join("; ")))
                    };
                    rows.push(ResultRow {
                        variant: v.label.clone(),
                        x: v.x,
                        target,
                        metric: metric.to_string(),
                        mean,
                        std,
                        n_seeds: reports.len(),
                        failed,
                    });
                }
            }
        }
        Self {
            name: plan.name.clone(),
            rows,
            metadata: TableMetadata {
                config_hash: plan.base.config_hash(),
                corpus_hash: corpus_hash.to_string(),
                seeds: plan.seeds.clone(),
                runs: records
                    .iter()
                    .map(|r| RunRef {
                        variant: r.variant.clone(),
                        seed: r.seed,
                        run_hash: r.run_hash.clone(),
                        checkpoint_ids: r.checkpoint_ids.clone(),
                        predictions_file: r.predictions_file.clone(),
                    })
                    .collect(),
            },
        }
    }

    pub fn cell(&self, variant: &str, target: Target, metric: &str) -> Option<&ResultRow> {
        self.rows
            .iter()
            .find(|r| r.variant == variant && r.target == target && r.metric == metric)
    }

    pub fn mean(&self, variant: &str, target: Target, metric: &str) -> Option<f64> {
        self.cell(variant, target, metric).and_then(|r| r.mean)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ExperimentError> {
        serde_json::from_str(text).map_err(|e| ExperimentError::Report(e.to_string()))
    }

    /// One line per cell. Floats are written in shortest round-trip form.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["variant", "x", "target", "metric", "mean", "std", "n_seeds", "failed"])
            .expect("in-memory write");
        let opt = |v: Option<f64>| v.map(|f| f.to_string()).unwrap_or_default();
        for r in &self.rows {
            w.write_record([
                r.variant.clone(),
                opt(r.x),
                r.target.as_str().to_string(),
                r.metric.clone(),
                opt(r.mean),
                opt(r.std),
                r.n_seeds.to_string(),
                r.failed.clone().unwrap_or_default(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }

    /// Rows from [`Self::to_csv`] output; metadata is not carried by CSV.
    pub fn from_csv(name: &str, text: &str) -> Result<Self, ExperimentError> {
        let err = |e: String| ExperimentError::Report(e);
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| err(e.to_string()))?;
            let f = |i: usize| rec.get(i).unwrap_or("");
            let opt = |s: &str| -> Result<Option<f64>, ExperimentError> {
                if s.is_empty() {
                    Ok(None)
                } else {
                    s.parse().map(Some).map_err(|_| err(format!("bad number {s:?}")))
                }
            };
            let target = match f(2) {
                "poll" => Target::Poll,
                "question" => Target::Question,
                "answers" => Target::Answers,
                t => return Err(err(format!("bad target {t:?}"))),
            };
            rows.push(ResultRow {
                variant: f(0).to_string(),
                x: opt(f(1))?,
                target,
                metric: f(3).to_string(),
                mean: opt(f(4))?,
                std: opt(f(5))?,
                n_seeds: f(6).parse().map_err(|_| err(format!("bad seed count {:?}", f(6))))?,
                failed: (!f(7).is_empty()).then(|| f(7).to_string()),
            });
        }
        Ok(Self {
            name: name.to_string(),
            rows,
            metadata: TableMetadata::default(),
        })
    }

    /// Variant/target rows by metric columns, `mean ± std` to two decimals.
    pub fn render_text(&self) -> String {
        let mut metrics: Vec<&str> = Vec::new();
        let mut keys: Vec<(&str, Target)> = Vec::new();
        let mut cells: BTreeMap<(usize, usize), String> = BTreeMap::new();
        for r in &self.rows {
            let mi = match metrics.iter().position(|m| *m == r.metric) {
                Some(i) => i,
                None => {
                    metrics.push(&r.metric);
                    metrics.len() - 1
                }
            };
            let ki = match keys.iter().position(|k| *k == (r.variant.as_str(), r.target)) {
                Some(i) => i,
                None => {
                    keys.push((&r.variant, r.target));
                    keys.len() - 1
                }
            };
            let text = match (r.mean, r.std) {
                (Some(m), Some(s)) => format!("{m:.2} ± {s:.2}"),
                (Some(m), None) => format!("{m:.2}"),
                _ => "failed".to_string(),
            };
            cells.insert((ki, mi), text);
        }
        let mut grid: Vec<Vec<String>> = vec![std::iter::once("variant".to_string())
            .chain(std::iter::once("target".to_string()))
            .chain(metrics.iter().map(|m| m.to_string()))
            .collect()];
        for (ki, (v, t)) in keys.iter().enumerate() {
            let mut line = vec![v.to_string(), t.as_str().to_string()];
            for mi in 0..metrics.len() {
                line.push(cells.get(&(ki, mi)).cloned().unwrap_or_else(|| "-".into()));
            }
            grid.push(line);
        }
        let widths: Vec<usize> = (0..grid[0].len())
            .map(|c| grid.iter().map(|row| row[c].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for row in &grid {
            let mut line = String::new();
            for (c, cell) in row.iter().enumerate() {
                if c > 0 {
                    line.push_str("  ");
                }
                let pad = widths[c] - cell.chars().count();
                if c < 2 {
                    line.push_str(cell);
                    line.extend(std::iter::repeat_n(' ', pad));
                } else {
                    line.extend(std::iter::repeat_n(' ', pad));
                    line.push_str(cell);
                }
            }
            let _ = writeln!(out, "{}", line.trim_end());
        }
        out
    }
}

pub fn run_plan(corpus: &Corpus, plan: &ExperimentPlan) -> Result<ResultTable, ExperimentError> {
    let records = run_plan_records(corpus, plan)?;
    Ok(ResultTable::from_records(plan, &records, &corpus.content_hash()))
}

/// UniPoll, w.o.A, w.o.Q and w.o.Q,A for every seed.
pub fn run_ablation(corpus: &Corpus, base: &RunConfig, seeds: &[u64], outputs: Option<PathBuf>) -> Result<ResultTable, ExperimentError> {
    run_plan(
        corpus,
        &ExperimentPlan {
            name: "ablation".into(),
            base: base.clone(),
            variants: ablation_variants(),
            seeds: seeds.to_vec(),
            outputs,
        },
    )
}

/// A question-only and an answers-only model per seed, reported as one row set.
pub fn run_single_task_baseline(
    corpus: &Corpus,
    base: &RunConfig,
    seeds: &[u64],
    outputs: Option<PathBuf>,
) -> Result<ResultTable, ExperimentError> {
    run_plan(
        corpus,
        &ExperimentPlan {
            name: "single-task".into(),
            base: base.clone(),
            variants: vec![single_task_variant()],
            seeds: seeds.to_vec(),
            outputs,
        },
    )
}

pub fn comment_sweep_plan(base: &RunConfig, percents: &[u32], seeds: &[u64], outputs: Option<PathBuf>) -> ExperimentPlan {
    ExperimentPlan {
        name: "comment-sweep".into(),
        base: base.clone(),
        variants: percents
            .iter()
            .map(|&p| Variant {
                comment_percent: Some(p),
                x: Some(p as f64),
                ..Variant::labeled(format!("comments-{p}"))
            })
            .collect(),
        seeds: seeds.to_vec(),
        outputs,
    }
}

/// Comment truncation applies to the train and test splits alike.
pub fn comment_sweep(
    corpus: &Corpus,
    base: &RunConfig,
    percents: &[u32],
    seeds: &[u64],
    outputs: Option<PathBuf>,
) -> Result<ResultTable, ExperimentError> {
    run_plan(corpus, &comment_sweep_plan(base, percents, seeds, outputs))
}

pub fn data_scale_plan(base: &RunConfig, fractions: &[f64], seeds: &[u64], outputs: Option<PathBuf>) -> ExperimentPlan {
    ExperimentPlan {
        name: "data-scale".into(),
        base: base.clone(),
        variants: fractions
            .iter()
            .map(|&f| Variant {
                train_fraction: Some(f),
                x: Some(f),
                ..Variant::labeled(format!("data-{f}"))
            })
            .collect(),
        seeds: seeds.to_vec(),
        outputs,
    }
}

/// Validation and test splits stay intact.
pub fn data_scale_sweep(
    corpus: &Corpus,
    base: &RunConfig,
    fractions: &[f64],
    seeds: &[u64],
    outputs: Option<PathBuf>,
) -> Result<ResultTable, ExperimentError> {
    run_plan(corpus, &data_scale_plan(base, fractions, seeds, outputs))
}

/// Writes `<name>.json`, `<name>.csv` and/or `<name>.txt` per table. `format`
/// is `json`, `csv`, `text` or `all`.
pub fn export_report(tables: &[ResultTable], format: &str, dir: &Path) -> Result<Vec<PathBuf>, ExperimentError> {
    let exts: &[&str] = match format {
        "json" => &["json"],
        "csv" => &["csv"],
        "text" | "txt" => &["txt"],
        "all" => &["json", "csv", "txt"],
        other => return Err(ExperimentError::UnknownFormat(other.to_string())),
    };
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut written = Vec::new();
    for t in tables {
        for ext in exts {
            let body = match *ext {
                "json" => t.to_json(),
                "csv" => t.to_csv(),
                _ => format!(
                    "{}\nconfig {}  corpus {}  seeds {:?}\n\n{}",
                    t.name,
                    t.metadata.config_hash,
                    t.metadata.corpus_hash,
                    t.metadata.seeds,
                    t.render_text()
                ),
            };
            let path = dir.join(format!("{}.{ext}", t.name));
            fs::write(&path, body).map_err(io_err(&path))?;
            written.push(path);
        }
    }
    Ok(written)
}
