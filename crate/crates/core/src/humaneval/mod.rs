//! Blind human rating of generated polls.
//!
//! A session mixes every registered system's output with the gold poll for the
//! first N test samples. Every rater sees every item in a rater-specific order.
//! Which system produced an item is kept server-side; [`ItemView`] is the only
//! item shape that leaves through rater-facing calls.
//!
//! Ratings go to an append-only log (fsynced before acknowledgment) with a
//! periodic snapshot; loading replays the log past the snapshot.

pub mod http;

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::{DateTime, Utc};
use parking_lot::{Mutex, RwLock};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::{load_corpus, Split};
use crate::pipeline::read_predictions;

pub const GOLD: &str = "GOLD";
const SNAPSHOT_EVERY: usize = 64;

#[derive(Debug, Error)]
pub enum HumanEvalError {
    #[error("system {system:?} has no prediction for sample {sample_id:?}")]
    PredictionsMissingSample { system: String, sample_id: String },
    #[error("duplicate system label {0:?}")]
    DuplicateSystemLabel(String),
    #[error("{field} = {value} is outside 1..4")]
    ScoreOutOfRange { field: &'static str, value: i64 },
    #[error("unknown session {0:?}")]
    UnknownSession(String),
    #[error("unknown rater {0:?}")]
    UnknownRater(String),
    #[error("unknown item {0:?}")]
    UnknownItem(String),
    #[error("invalid session config: {0}")]
    InvalidConfig(String),
    #[error("storage: {0}")]
    Storage(String),
}

impl HumanEvalError {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::PredictionsMissingSample { .. } => "PredictionsMissingSample",
            Self::DuplicateSystemLabel(_) => "DuplicateSystemLabel",
            Self::ScoreOutOfRange { .. } => "ScoreOutOfRange",
            Self::UnknownSession(_) => "UnknownSession",
            Self::UnknownRater(_) => "UnknownRater",
            Self::UnknownItem(_) => "UnknownItem",
            Self::InvalidConfig(_) => "InvalidConfig",
            Self::Storage(_) => "Storage",
        }
    }
}

fn storage(e: impl std::fmt::Display) -> HumanEvalError {
    HumanEvalError::Storage(e.to_string())
}

fn default_sample_count() -> usize {
    100
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    /// System label to predictions file (JSONL of prediction records).
    pub systems: BTreeMap<String, PathBuf>,
    /// Corpus whose test split supplies the samples and gold polls.
    pub gold: PathBuf,
    /// First N samples of the test split.
    #[serde(default = "default_sample_count")]
    pub sample_count: usize,
    pub raters: Vec<String>,
    #[serde(default)]
    pub shuffle_seed: u64,
}

impl SessionConfig {
    pub fn load(path: &Path) -> Result<Self, HumanEvalError> {
        let text = fs::read_to_string(path).map_err(storage)?;
        let mut cfg: Self = serde_yaml::from_str(&text).map_err(|e| HumanEvalError::InvalidConfig(e.to_string()))?;
        let dir = path.parent().unwrap_or(Path::new("."));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        };
        fix(&mut cfg.gold);
        cfg.systems.values_mut().for_each(fix);
        Ok(cfg)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemContext {
    pub post: String,
    pub comments: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PollView {
    pub question: String,
    pub answers: Vec<String>,
}

/// Server-side item; never serialized to raters.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingItem {
    pub item_id: String,
    pub sample_id: String,
    pub context: ItemContext,
    pub poll: PollView,
    pub hidden_system: String,
}

/// What a rater sees.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ItemView {
    pub item_id: String,
    pub sample_id: String,
    pub context: ItemContext,
    pub poll: PollView,
}

impl From<&RatingItem> for ItemView {
    fn from(item: &RatingItem) -> Self {
        Self {
            item_id: item.item_id.clone(),
            sample_id: item.sample_id.clone(),
            context: item.context.clone(),
            poll: item.poll.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingSubmission {
    pub rater_id: String,
    pub item_id: String,
    pub relevance: i64,
    pub fluency: i64,
    pub engagingness: i64,
    pub qa_consistency: i64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingRecord {
    pub rater_id: String,
    pub item_id: String,
    pub relevance: u8,
    pub fluency: u8,
    pub engagingness: u8,
    pub qa_consistency: u8,
    pub submitted_at: DateTime<Utc>,
    /// Session-wide submission counter; the highest wins for a (rater, item) pair.
    pub seq: u64,
}

impl RatingRecord {
    pub const CRITERIA: [&'static str; 4] = ["relevance", "fluency", "engagingness", "qa_consistency"];

    pub fn scores(&self) -> [u8; 4] {
        [self.relevance, self.fluency, self.engagingness, self.qa_consistency]
    }
}

fn check_score(field: &'static str, value: i64) -> Result<u8, HumanEvalError> {
    if (1..=4).contains(&value) {
        Ok(value as u8)
    } else {
        Err(HumanEvalError::ScoreOutOfRange { field, value })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Progress {
    pub rater_id: String,
    pub rated: usize,
    pub total: usize,
    pub fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum NextItem {
    Item { item: ItemView, progress: Progress },
    Done { progress: Progress },
}

/// Immutable part of a session: items and each rater's presentation order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub id: String,
    pub config: SessionConfig,
    pub items: Vec<RatingItem>,
    /// Rater id to item indices in presentation order.
    pub orders: BTreeMap<String, Vec<usize>>,
    pub created_at: DateTime<Utc>,
}

fn rater_rng(shuffle_seed: u64, rater: &str) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(shuffle_seed.to_le_bytes());
    h.update(rater.as_bytes());
    let digest = h.finalize();
    ChaCha8Rng::from_seed(digest.into())
}

/// Presentation order of `n` items for one rater.
pub fn rater_order(shuffle_seed: u64, rater: &str, n: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rater_rng(shuffle_seed, rater));
    order
}

/// Builds the item set: one item per (sample, system) plus one gold item per sample.
pub fn create_session(cfg: &SessionConfig) -> Result<Session, HumanEvalError> {
    if cfg.systems.is_empty() {
        return Err(HumanEvalError::InvalidConfig("at least one system is required".into()));
    }
    if cfg.raters.is_empty() {
        return Err(HumanEvalError::InvalidConfig("at least one rater is required".into()));
    }
    let mut seen = std::collections::HashSet::new();
    for r in &cfg.raters {
        if !seen.insert(r) {
            return Err(HumanEvalError::InvalidConfig(format!("duplicate rater {r:?}")));
        }
    }
    if let Some(l) = cfg.systems.keys().find(|l| l.eq_ignore_ascii_case(GOLD)) {
        return Err(HumanEvalError::DuplicateSystemLabel(l.clone()));
    }
    let (corpus, _) = load_corpus(&cfg.gold, false).map_err(|e| HumanEvalError::InvalidConfig(e.to_string()))?;
    let test: Vec<_> = corpus.split(Split::Test).collect();
    if cfg.sample_count == 0 || cfg.sample_count > test.len() {
        return Err(HumanEvalError::InvalidConfig(format!(
            "sample_count {} not in 1..={} (test split size)",
            cfg.sample_count,
            test.len()
        )));
    }
    let samples = &test[..cfg.sample_count];
    let mut polls: BTreeMap<&str, HashMap<String, PollView>> = BTreeMap::new();
    for (label, path) in &cfg.systems {
        let preds = read_predictions(path).map_err(|e| HumanEvalError::InvalidConfig(e.to_string()))?;
        let by_id = preds
            .into_iter()
            .map(|p| {
                (
                    p.id,
                    PollView {
                        question: p.question,
                        answers: p.answers,
                    },
                )
            })
            .collect();
        polls.insert(label, by_id);
    }
    let mut items = Vec::new();
    for s in samples {
        let context = ItemContext {
            post: s.post.clone(),
            comments: s.comments.clone(),
        };
        for (label, by_id) in &polls {
            let poll = by_id
                .get(&s.id)
                .ok_or_else(|| HumanEvalError::PredictionsMissingSample {
                    system: label.to_string(),
                    sample_id: s.id.clone(),
                })?
                .clone();
            items.push(RatingItem {
                item_id: uuid::Uuid::new_v4().to_string(),
                sample_id: s.id.clone(),
                context: context.clone(),
                poll,
                hidden_system: label.to_string(),
            });
        }
        items.push(RatingItem {
            item_id: uuid::Uuid::new_v4().to_string(),
            sample_id: s.id.clone(),
            context,
            poll: PollView {
                question: s.question.clone(),
                answers: s.answers.clone(),
            },
            hidden_system: GOLD.to_string(),
        });
    }
    let orders = cfg
        .raters
        .iter()
        .map(|r| (r.clone(), rater_order(cfg.shuffle_seed, r, items.len())))
        .collect();
    Ok(Session {
        id: uuid::Uuid::new_v4().to_string(),
        config: cfg.clone(),
        items,
        orders,
        created_at: Utc::now(),
    })
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CriterionMeans {
    pub relevance: f64,
    pub fluency: f64,
    pub engagingness: f64,
    pub qa_consistency: f64,
    pub n_records: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Coverage {
    pub expected: usize,
    pub submitted: usize,
    pub fraction: f64,
    pub per_rater: BTreeMap<String, usize>,
    pub per_system: BTreeMap<String, usize>,
}

/// Share of co-rated items on which two raters gave the same score, averaged over rater pairs.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Agreement {
    pub relevance: Option<f64>,
    pub fluency: Option<f64>,
    pub engagingness: Option<f64>,
    pub qa_consistency: Option<f64>,
    pub rater_pairs: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub systems: BTreeMap<String, CriterionMeans>,
    pub raters: BTreeMap<String, CriterionMeans>,
    pub coverage: Coverage,
    pub agreement: Agreement,
}

/// Keeps the highest-`seq` record per (rater, item).
pub fn latest_records(records: &[RatingRecord]) -> BTreeMap<(String, String), RatingRecord> {
    let mut latest: BTreeMap<(String, String), RatingRecord> = BTreeMap::new();
    for r in records {
        let key = (r.rater_id.clone(), r.item_id.clone());
        match latest.get(&key) {
            Some(prev) if prev.seq >= r.seq => {}
            _ => {
                latest.insert(key, r.clone());
            }
        }
    }
    latest
}

fn means(groups: BTreeMap<String, Vec<[u8; 4]>>) -> BTreeMap<String, CriterionMeans> {
    groups
        .into_iter()
        .map(|(k, rows)| {
            let n = rows.len();
            let mut sums = [0u64; 4];
            for r in &rows {
                for (s, v) in sums.iter_mut().zip(r) {
                    *s += *v as u64;
                }
            }
            let m = |i: usize| sums[i] as f64 / n as f64;
            (
                k,
                CriterionMeans {
                    relevance: m(0),
                    fluency: m(1),
                    engagingness: m(2),
                    qa_consistency: m(3),
                    n_records: n,
                },
            )
        })
        .collect()
}

/// Per-system and per-rater means over the latest records. Scores are small
/// integers summed exactly, so the result does not depend on record order.
pub fn aggregate_records(session: &Session, records: &[RatingRecord]) -> AggregateReport {
    let system_of: HashMap<&str, &str> = session
        .items
        .iter()
        .map(|i| (i.item_id.as_str(), i.hidden_system.as_str()))
        .collect();
    let latest = latest_records(records);
    let mut by_system: BTreeMap<String, Vec<[u8; 4]>> = BTreeMap::new();
    let mut by_rater: BTreeMap<String, Vec<[u8; 4]>> = BTreeMap::new();
    let mut by_item: BTreeMap<&str, BTreeMap<&str, [u8; 4]>> = BTreeMap::new();
    for ((rater, item), rec) in &latest {
        let Some(system) = system_of.get(item.as_str()) else {
            continue;
        };
        by_system.entry(system.to_string()).or_default().push(rec.scores());
        by_rater.entry(rater.clone()).or_default().push(rec.scores());
        by_item.entry(item).or_default().insert(rater, rec.scores());
    }
    let systems = means(by_system);
    let raters = means(by_rater);

    let mut per_system: BTreeMap<String, usize> = systems.iter().map(|(k, v)| (k.clone(), v.n_records)).collect();
    for label in session.config.systems.keys().map(String::as_str).chain([GOLD]) {
        per_system.entry(label.to_string()).or_insert(0);
    }
    let per_rater: BTreeMap<String, usize> = session
        .orders
        .keys()
        .map(|r| (r.clone(), raters.get(r).map_or(0, |m| m.n_records)))
        .collect();
    let expected = session.items.len() * session.orders.len();
    let submitted: usize = per_rater.values().sum();

    let rater_ids: Vec<&String> = session.orders.keys().collect();
    let mut pair_rates: [Vec<f64>; 4] = Default::default();
    let mut rater_pairs = 0;
    for a in 0..rater_ids.len() {
        for b in a + 1..rater_ids.len() {
            let mut co = 0;
            let mut same = [0usize; 4];
            for scores in by_item.values() {
                if let (Some(x), Some(y)) = (scores.get(rater_ids[a].as_str()), scores.get(rater_ids[b].as_str())) {
                    co += 1;
                    for c in 0..4 {
                        if x[c] == y[c] {
                            same[c] += 1;
                        }
                    }
                }
            }
            if co > 0 {
                rater_pairs += 1;
                for c in 0..4 {
                    pair_rates[c].push(same[c] as f64 / co as f64);
                }
            }
        }
    }
    let mean_rate = |c: usize| {
        (!pair_rates[c].is_empty()).then(|| pair_rates[c].iter().sum::<f64>() / pair_rates[c].len() as f64)
    };
    AggregateReport {
        systems,
        raters,
        coverage: Coverage {
            expected,
            submitted,
            fraction: if expected == 0 { 0.0 } else { submitted as f64 / expected as f64 },
            per_rater,
            per_system,
        },
        agreement: Agreement {
            relevance: mean_rate(0),
            fluency: mean_rate(1),
            engagingness: mean_rate(2),
            qa_consistency: mean_rate(3),
            rater_pairs,
        },
    }
}

#[derive(Serialize, Deserialize)]
struct Snapshot {
    /// Number of log lines folded into `records`.
    log_lines: usize,
    records: Vec<RatingRecord>,
}

struct Ratings {
    latest: BTreeMap<(String, String), RatingRecord>,
    next_seq: u64,
    log_lines: usize,
}

/// A live session: immutable items plus the mutable rating state.
pub struct SessionHandle {
    pub session: Session,
    item_index: HashMap<String, usize>,
    ratings: RwLock<Ratings>,
    /// Single writer for the rating log.
    log: Mutex<Option<File>>,
    dir: Option<PathBuf>,
}

fn fsync_write(path: &Path, bytes: &[u8]) -> Result<(), HumanEvalError> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = File::create(&tmp).map_err(storage)?;
        f.write_all(bytes).map_err(storage)?;
        f.sync_all().map_err(storage)?;
    }
    fs::rename(&tmp, path).map_err(storage)?;
    Ok(())
}

impl SessionHandle {
    fn new(session: Session, records: Vec<RatingRecord>, log_lines: usize, dir: Option<PathBuf>) -> Result<Self, HumanEvalError> {
        let item_index = session
            .items
            .iter()
            .enumerate()
            .map(|(i, it)| (it.item_id.clone(), i))
            .collect();
        let latest = latest_records(&records);
        let next_seq = records.iter().map(|r| r.seq + 1).max().unwrap_or(0);
        let log = match &dir {
            Some(d) => Some(
                OpenOptions::new()
                    .create(true)
                    .append(true)
                    .open(d.join("ratings.log"))
                    .map_err(storage)?,
            ),
            None => None,
        };
        Ok(Self {
            session,
            item_index,
            ratings: RwLock::new(Ratings {
                latest,
                next_seq,
                log_lines,
            }),
            log: Mutex::new(log),
            dir,
        })
    }

    fn check_rater(&self, rater: &str) -> Result<&Vec<usize>, HumanEvalError> {
        self.session
            .orders
            .get(rater)
            .ok_or_else(|| HumanEvalError::UnknownRater(rater.to_string()))
    }

    pub fn progress(&self, rater: &str) -> Result<Progress, HumanEvalError> {
        let order = self.check_rater(rater)?;
        let ratings = self.ratings.read();
        let rated = order
            .iter()
            .filter(|&&i| {
                ratings
                    .latest
                    .contains_key(&(rater.to_string(), self.session.items[i].item_id.clone()))
            })
            .count();
        Ok(Progress {
            rater_id: rater.to_string(),
            rated,
            total: order.len(),
            fraction: if order.is_empty() { 1.0 } else { rated as f64 / order.len() as f64 },
        })
    }

    /// First unrated item in the rater's order.
    pub fn next_item(&self, rater: &str) -> Result<NextItem, HumanEvalError> {
        let order = self.check_rater(rater)?;
        let progress = self.progress(rater)?;
        let ratings = self.ratings.read();
        let next = order.iter().map(|&i| &self.session.items[i]).find(|it| {
            !ratings
                .latest
                .contains_key(&(rater.to_string(), it.item_id.clone()))
        });
        Ok(match next {
            Some(it) => NextItem::Item {
                item: ItemView::from(it),
                progress,
            },
            None => NextItem::Done { progress },
        })
    }

    /// Validates, appends to the log and syncs it, then updates the in-memory state.
    pub fn submit(&self, sub: &RatingSubmission) -> Result<RatingRecord, HumanEvalError> {
        self.check_rater(&sub.rater_id)?;
        if !self.item_index.contains_key(&sub.item_id) {
            return Err(HumanEvalError::UnknownItem(sub.item_id.clone()));
        }
        let relevance = check_score("relevance", sub.relevance)?;
        let fluency = check_score("fluency", sub.fluency)?;
        let engagingness = check_score("engagingness", sub.engagingness)?;
        let qa_consistency = check_score("qa_consistency", sub.qa_consistency)?;

        let mut log = self.log.lock();
        let seq = self.ratings.read().next_seq;
        let rec = RatingRecord {
            rater_id: sub.rater_id.clone(),
            item_id: sub.item_id.clone(),
            relevance,
            fluency,
            engagingness,
            qa_consistency,
            submitted_at: Utc::now(),
            seq,
        };
        if let Some(f) = log.as_mut() {
            let mut line = serde_json::to_vec(&rec).map_err(storage)?;
            line.push(b'\n');
            f.write_all(&line).map_err(storage)?;
            f.sync_data().map_err(storage)?;
        }
        let snapshot_due = {
            let mut r = self.ratings.write();
            r.next_seq = seq + 1;
            r.log_lines += 1;
            r.latest.insert((rec.rater_id.clone(), rec.item_id.clone()), rec.clone());
            r.log_lines % SNAPSHOT_EVERY == 0
        };
        if snapshot_due {
            if let Err(e) = self.write_snapshot() {
                log::warn!("snapshot failed: {e}");
            }
        }
        Ok(rec)
    }

    pub fn records(&self) -> Vec<RatingRecord> {
        self.ratings.read().latest.values().cloned().collect()
    }

    pub fn aggregate(&self) -> AggregateReport {
        aggregate_records(&self.session, &self.records())
    }

    fn write_snapshot(&self) -> Result<(), HumanEvalError> {
        let Some(dir) = &self.dir else { return Ok(()) };
        let snap = {
            let r = self.ratings.read();
            Snapshot {
                log_lines: r.log_lines,
                records: r.latest.values().cloned().collect(),
            }
        };
        fsync_write(&dir.join("snapshot.json"), &serde_json::to_vec(&snap).map_err(storage)?)
    }

    fn load(dir: &Path) -> Result<Self, HumanEvalError> {
        let session: Session =
            serde_json::from_slice(&fs::read(dir.join("session.json")).map_err(storage)?).map_err(storage)?;
        let (mut records, skip) = match fs::read(dir.join("snapshot.json")) {
            Ok(bytes) => {
                let s: Snapshot = serde_json::from_slice(&bytes).map_err(storage)?;
                (s.records, s.log_lines)
            }
            Err(_) => (Vec::new(), 0),
        };
        let log = fs::read_to_string(dir.join("ratings.log")).unwrap_or_default();
        let mut lines = 0;
        for line in log.lines() {
            lines += 1;
            if lines <= skip || line.trim().is_empty() {
                continue;
            }
            // A torn final line from a crash mid-write was never acknowledged.
            match serde_json::from_str::<RatingRecord>(line) {
                Ok(r) => records.push(r),
                Err(e) => log::warn!("skipping unreadable log line {lines}: {e}"),
            }
        }
        Self::new(session, records, lines, Some(dir.to_path_buf()))
    }
}

/// All sessions, optionally persisted under `data_dir/<session id>/`.
pub struct HumanEvalStore {
    data_dir: Option<PathBuf>,
    sessions: RwLock<HashMap<String, Arc<SessionHandle>>>,
}

impl HumanEvalStore {
    pub fn in_memory() -> Self {
        Self {
            data_dir: None,
            sessions: RwLock::new(HashMap::new()),
        }
    }

    /// Opens `data_dir` and reloads every session found there.
    pub fn open(data_dir: &Path) -> Result<Self, HumanEvalError> {
        fs::create_dir_all(data_dir).map_err(storage)?;
        let mut sessions = HashMap::new();
        for entry in fs::read_dir(data_dir).map_err(storage)? {
            let path = entry.map_err(storage)?.path();
            if path.join("session.json").is_file() {
                let h = SessionHandle::load(&path)?;
                sessions.insert(h.session.id.clone(), Arc::new(h));
            }
        }
        Ok(Self {
            data_dir: Some(data_dir.to_path_buf()),
            sessions: RwLock::new(sessions),
        })
    }

    pub fn create(&self, cfg: &SessionConfig) -> Result<Arc<SessionHandle>, HumanEvalError> {
        let session = create_session(cfg)?;
        let dir = match &self.data_dir {
            Some(d) => {
                let dir = d.join(&session.id);
                fs::create_dir_all(&dir).map_err(storage)?;
                fsync_write(&dir.join("session.json"), &serde_json::to_vec(&session).map_err(storage)?)?;
                Some(dir)
            }
            None => None,
        };
        let handle = Arc::new(SessionHandle::new(session, Vec::new(), 0, dir)?);
        self.sessions.write().insert(handle.session.id.clone(), handle.clone());
        Ok(handle)
    }

    pub fn get(&self, id: &str) -> Result<Arc<SessionHandle>, HumanEvalError> {
        self.sessions
            .read()
            .get(id)
            .cloned()
            .ok_or_else(|| HumanEvalError::UnknownSession(id.to_string()))
    }

    pub fn session_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.sessions.read().keys().cloned().collect();
        ids.sort();
        ids
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orders_differ_between_raters_and_are_stable() {
        let a = rater_order(7, "r1", 40);
        let b = rater_order(7, "r2", 40);
        assert_ne!(a, b);
        assert_eq!(a, rater_order(7, "r1", 40));
        let mut sorted = a.clone();
        sorted.sort();
        assert_eq!(sorted, (0..40).collect::<Vec<_>>());
    }

    #[test]
    fn score_range() {
        assert!(check_score("relevance", 5).is_err());
        assert!(check_score("relevance", 0).is_err());
        assert_eq!(check_score("fluency", 4).unwrap(), 4);
    }
}
