use std::ffi::{CStr, CString};
use std::path::Path;
use std::ptr;

use pollforge::formatting::TaskSet;
use pollforge::pipeline::{save_run, train_run, RunConfig};
use pollforge_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

unsafe fn text(p: *const std::ffi::c_char) -> String {
    CStr::from_ptr(p).to_str().unwrap().to_string()
}

#[test]
fn scores_match_core() {
    let mut out = PfScores::default();
    let st = unsafe { pf_score(c("the cat sat").as_ptr(), c("the cat sat").as_ptr(), &mut out) };
    assert_eq!(st, PfStatus::Ok);
    assert_eq!(out.rouge1, 100.0);
    assert_eq!(out.bleu3, 100.0);

    let mut v = 0.0;
    let st = unsafe { pf_metric(PfMetric::RougeN, c("a b c").as_ptr(), c("a c d").as_ptr(), 1, &mut v) };
    assert_eq!(st, PfStatus::Ok);
    assert!((v - 200.0 / 3.0).abs() < 1e-12);

    let st = unsafe { pf_metric(PfMetric::BleuN, c("a").as_ptr(), c("a").as_ptr(), 0, &mut v) };
    assert_eq!(st, PfStatus::InvalidArgument);
}

#[test]
fn null_and_utf8_errors_set_message() {
    let mut out = PfScores::default();
    let st = unsafe { pf_score(ptr::null(), c("x").as_ptr(), &mut out) };
    assert_eq!(st, PfStatus::NullPointer);
    assert!(unsafe { text(pf_last_error()) }.contains("candidate"));

    let bad = [0xffu8, 0xfe, 0];
    let st = unsafe { pf_score(bad.as_ptr().cast(), c("x").as_ptr(), &mut out) };
    assert_eq!(st, PfStatus::InvalidUtf8);
}

#[test]
fn parse_generation_handle() {
    let mut poll = ptr::null_mut();
    let raw = c("<question> which color <answers> red <ans_sep> blue <ans_sep> red");
    assert_eq!(unsafe { pf_parse_generation(raw.as_ptr(), true, &mut poll) }, PfStatus::Ok);
    unsafe {
        assert!(pf_poll_parse_ok(poll));
        assert_eq!(text(pf_poll_question(poll)), "which color");
        assert_eq!(pf_poll_answer_count(poll), 2);
        assert_eq!(text(pf_poll_answer(poll, 1)), "blue");
        assert!(pf_poll_answer(poll, 2).is_null());
        pf_poll_free(poll);
        pf_poll_free(ptr::null_mut());
    }
}

#[test]
fn model_round_trip_through_handle() {
    let corpus = pollforge::synthetic::synthetic_corpus(60, 3);
    let mut cfg = RunConfig::desk(TaskSet::full(), 40);
    cfg.train.epochs = 2;
    let run = train_run(&corpus, &cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_run(dir.path(), &run, &cfg).unwrap();

    let mut model = ptr::null_mut();
    let path = c(dir.path().to_str().unwrap());
    assert_eq!(unsafe { pf_model_load(path.as_ptr(), &mut model) }, PfStatus::Ok);
    let comments = [c("nice week"), c("my friend said")];
    let ptrs: Vec<_> = comments.iter().map(|s| s.as_ptr()).collect();
    let mut poll = ptr::null_mut();
    let st = unsafe { pf_model_generate(model, c("coffee color today").as_ptr(), ptrs.as_ptr(), 2, 0, &mut poll) };
    assert_eq!(st, PfStatus::Ok);
    unsafe {
        assert!(!pf_poll_raw(poll).is_null());
        pf_poll_free(poll);
        pf_model_free(model);
    }

    let missing = c("/nonexistent/model.pfck");
    let mut m2 = ptr::null_mut();
    assert_eq!(unsafe { pf_model_load(missing.as_ptr(), &mut m2) }, PfStatus::Io);
    assert!(m2.is_null());
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/pollforge.h")).unwrap();
    for name in [
        "pf_last_error",
        "pf_score",
        "pf_metric",
        "pf_parse_generation",
        "pf_poll_free",
        "pf_model_load",
        "pf_model_generate",
        "pf_model_free",
        "typedef struct PfModel PfModel",
        "PF_STATUS_OK",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
    // The header must also compile as C when a compiler is around.
    if let Ok(out) = std::process::Command::new("cc")
        .args(["-fsyntax-only", "-x", "c", "-std=c99"])
        .arg(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/pollforge.h"))
        .output()
    {
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
}
