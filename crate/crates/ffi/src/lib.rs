//! C ABI over pollforge.
//!
//! Every fallible call returns a [`PfStatus`]; on failure the message is
//! available from [`pf_last_error`] on the same thread. Handles are opaque and
//! must be released with their `_free` function. Strings returned by
//! `pf_poll_*` borrow from the poll handle and live as long as it does.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use pollforge::corpus::{PollSample, Split};
use pollforge::decoder::PollGenerator;
use pollforge::formatting::{parse_generation, GenerationOutput, SpecialTokens};
use pollforge::metrics::{bleu_n, rouge_l, rouge_n, tokenize_for_metrics, TargetScores};
use pollforge::model::ReferenceModel;
use pollforge::pipeline::{load_run, RunConfig};
use pollforge::tokenizer::VocabTokenizer;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Io = 4,
    Model = 5,
    Panic = 6,
}

/// ROUGE-1, ROUGE-L, BLEU-1 and BLEU-3 on a 0-100 scale.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PfScores {
    pub rouge1: f64,
    pub rouge_l: f64,
    pub bleu1: f64,
    pub bleu3: f64,
}

/// A trained model with its tokenizer and run settings.
pub struct PfModel {
    model: ReferenceModel,
    tokenizer: VocabTokenizer,
    config: RunConfig,
}

/// A parsed poll.
pub struct PfPoll {
    question: CString,
    answers: Vec<CString>,
    raw: CString,
    parse_ok: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let s = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(s).unwrap_or_default());
}

fn fail(status: PfStatus, msg: impl Into<String>) -> PfStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> PfStatus) -> PfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(PfStatus::Panic, "internal panic"),
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, PfStatus> {
    if p.is_null() {
        return Err(fail(PfStatus::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(PfStatus::InvalidUtf8, format!("{name} is not UTF-8")))
}

fn cstring(s: &str) -> CString {
    CString::new(s.replace('\0', " ")).expect("nul bytes removed")
}

impl PfPoll {
    fn from_output(out: GenerationOutput) -> Box<Self> {
        Box::new(Self {
            question: cstring(&out.question),
            answers: out.answers.iter().map(|a| cstring(a)).collect(),
            raw: cstring(&out.raw),
            parse_ok: out.parse_ok,
        })
    }
}

/// Message for the last failed call on this thread; empty if none. Owned by the library.
#[no_mangle]
pub extern "C" fn pf_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn pf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// All four scores of `candidate` against `reference`.
///
/// # Safety
/// `candidate` and `reference` must be NUL-terminated strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pf_score(candidate: *const c_char, reference: *const c_char, out: *mut PfScores) -> PfStatus {
    guard(|| {
        let (c, r) = match (str_arg(candidate, "candidate"), str_arg(reference, "reference")) {
            (Ok(c), Ok(r)) => (c, r),
            (Err(s), _) | (_, Err(s)) => return s,
        };
        if out.is_null() {
            return fail(PfStatus::NullPointer, "out is null");
        }
        let s = TargetScores::score(c, r);
        *out = PfScores {
            rouge1: s.rouge1,
            rouge_l: s.rouge_l,
            bleu1: s.bleu1,
            bleu3: s.bleu3,
        };
        PfStatus::Ok
    })
}

/// Which single metric [`pf_metric`] computes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PfMetric {
    RougeN = 0,
    RougeL = 1,
    BleuN = 2,
}

/// One metric; `n` is the n-gram order for ROUGE-N and BLEU-N and ignored for ROUGE-L.
///
/// # Safety
/// String arguments must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pf_metric(
    metric: PfMetric,
    candidate: *const c_char,
    reference: *const c_char,
    n: usize,
    out: *mut f64,
) -> PfStatus {
    guard(|| {
        let (c, r) = match (str_arg(candidate, "candidate"), str_arg(reference, "reference")) {
            (Ok(c), Ok(r)) => (c, r),
            (Err(s), _) | (_, Err(s)) => return s,
        };
        if out.is_null() {
            return fail(PfStatus::NullPointer, "out is null");
        }
        if n == 0 && metric != PfMetric::RougeL {
            return fail(PfStatus::InvalidArgument, "n must be at least 1");
        }
        let c = tokenize_for_metrics(c);
        let r = tokenize_for_metrics(r);
        *out = match metric {
            PfMetric::RougeN => rouge_n(&c, &r, n),
            PfMetric::RougeL => rouge_l(&c, &r),
            PfMetric::BleuN => bleu_n(&c, &[&r], n),
        };
        PfStatus::Ok
    })
}

/// Splits raw generated text into question and answers using the default control tokens.
///
/// # Safety
/// `raw` must be NUL-terminated; `out` must be writable. Free the result with [`pf_poll_free`].
#[no_mangle]
pub unsafe extern "C" fn pf_parse_generation(raw: *const c_char, dedupe: bool, out: *mut *mut PfPoll) -> PfStatus {
    guard(|| {
        let raw = match str_arg(raw, "raw") {
            Ok(r) => r,
            Err(s) => return s,
        };
        if out.is_null() {
            return fail(PfStatus::NullPointer, "out is null");
        }
        let parsed = parse_generation(raw, &SpecialTokens::default(), dedupe);
        *out = Box::into_raw(PfPoll::from_output(parsed));
        PfStatus::Ok
    })
}

/// # Safety
/// `poll` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn pf_poll_question(poll: *const PfPoll) -> *const c_char {
    poll.as_ref().map_or(ptr::null(), |p| p.question.as_ptr())
}

/// # Safety
/// `poll` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn pf_poll_raw(poll: *const PfPoll) -> *const c_char {
    poll.as_ref().map_or(ptr::null(), |p| p.raw.as_ptr())
}

/// # Safety
/// `poll` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn pf_poll_answer_count(poll: *const PfPoll) -> usize {
    poll.as_ref().map_or(0, |p| p.answers.len())
}

/// Null when `index` is out of range.
///
/// # Safety
/// `poll` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn pf_poll_answer(poll: *const PfPoll, index: usize) -> *const c_char {
    poll.as_ref()
        .and_then(|p| p.answers.get(index))
        .map_or(ptr::null(), |a| a.as_ptr())
}

/// # Safety
/// `poll` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn pf_poll_parse_ok(poll: *const PfPoll) -> bool {
    poll.as_ref().is_some_and(|p| p.parse_ok)
}

/// # Safety
/// `poll` must come from this library (or be null) and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn pf_poll_free(poll: *mut PfPoll) {
    if !poll.is_null() {
        drop(Box::from_raw(poll));
    }
}

/// Loads a checkpoint file or a run directory written by `pollforge train`.
///
/// # Safety
/// `path` must be NUL-terminated; `out` must be writable. Free with [`pf_model_free`].
#[no_mangle]
pub unsafe extern "C" fn pf_model_load(path: *const c_char, out: *mut *mut PfModel) -> PfStatus {
    guard(|| {
        let path = match str_arg(path, "path") {
            Ok(p) => p,
            Err(s) => return s,
        };
        if out.is_null() {
            return fail(PfStatus::NullPointer, "out is null");
        }
        match load_run(Path::new(path)) {
            Ok((model, tokenizer, config)) => {
                *out = Box::into_raw(Box::new(PfModel {
                    model,
                    tokenizer,
                    config,
                }));
                PfStatus::Ok
            }
            Err(e) => fail(PfStatus::Io, e.to_string()),
        }
    })
}

/// Generates a poll for a post and its comments with the main-task prompt.
/// `beam_size` 0 keeps the checkpoint's setting.
///
/// # Safety
/// `model` must come from [`pf_model_load`]; `post` must be NUL-terminated;
/// `comments` must point to `n_comments` NUL-terminated strings (may be null
/// when `n_comments` is 0); `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pf_model_generate(
    model: *const PfModel,
    post: *const c_char,
    comments: *const *const c_char,
    n_comments: usize,
    beam_size: usize,
    out: *mut *mut PfPoll,
) -> PfStatus {
    guard(|| {
        let Some(m) = model.as_ref() else {
            return fail(PfStatus::NullPointer, "model is null");
        };
        let post = match str_arg(post, "post") {
            Ok(p) => p,
            Err(s) => return s,
        };
        if out.is_null() {
            return fail(PfStatus::NullPointer, "out is null");
        }
        if n_comments > 0 && comments.is_null() {
            return fail(PfStatus::NullPointer, "comments is null");
        }
        let mut cs = Vec::with_capacity(n_comments);
        for i in 0..n_comments {
            match str_arg(*comments.add(i), "comment") {
                Ok(c) => cs.push(c.to_string()),
                Err(s) => return s,
            }
        }
        let sample = PollSample {
            id: String::new(),
            post: post.to_string(),
            comments: cs,
            question: String::new(),
            answers: Vec::new(),
            split: Split::Test,
        };
        let mut decode = m.config.decode;
        if beam_size > 0 {
            decode.beam_size = beam_size;
        }
        let generator = PollGenerator {
            model: &m.model,
            tokenizer: &m.tokenizer,
            format: &m.config.format,
            limits: m.config.limits,
            decode,
            dedupe: m.config.dedupe_answers,
        };
        match generator.predict_poll(&sample) {
            Ok(o) => {
                *out = Box::into_raw(PfPoll::from_output(o));
                PfStatus::Ok
            }
            Err(e) => fail(PfStatus::Model, e.to_string()),
        }
    })
}

/// # Safety
/// `model` must come from [`pf_model_load`] (or be null) and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn pf_model_free(model: *mut PfModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}
