use std::fs;

use pollforge::experiments::{
    export_report, run_plan, ExperimentError, ExperimentPlan, ResultRow, ResultTable, TableMetadata, Variant,
};
use pollforge::formatting::TaskSet;
use pollforge::metrics::Target;
use pollforge::pipeline::RunConfig;
use pollforge::synthetic::synthetic_corpus;

fn row(variant: &str, target: Target, metric: &str, mean: Option<f64>, std: Option<f64>) -> ResultRow {
    ResultRow {
        variant: variant.into(),
        x: None,
        target,
        metric: metric.into(),
        mean,
        std,
        n_seeds: 5,
        failed: mean.is_none().then(|| "seed 41: diverged".to_string()),
    }
}

fn table() -> ResultTable {
    ResultTable {
        name: "t".into(),
        rows: vec![
            row("UniPoll", Target::Poll, "rouge1", Some(40.123456789), Some(0.1 + 0.2)),
            row("UniPoll", Target::Poll, "bleu3", Some(7.0), Some(0.0)),
            row("w.o.Q,A", Target::Poll, "rouge1", None, None),
            row("w.o.Q,A", Target::Poll, "bleu3", Some(1e-17), Some(3.5)),
        ],
        metadata: TableMetadata {
            config_hash: "abc".into(),
            corpus_hash: "def".into(),
            seeds: vec![40, 41],
            runs: vec![],
        },
    }
}

#[test]
fn json_and_csv_round_trip_exactly() {
    let t = table();
    assert_eq!(ResultTable::from_json(&t.to_json()).unwrap(), t);
    let back = ResultTable::from_csv("t", &t.to_csv()).unwrap();
    assert_eq!(back.rows, t.rows);
}

#[test]
fn text_rendering() {
    let expected = "\
variant  target        rouge1        bleu3
UniPoll  poll    40.12 ± 0.30  7.00 ± 0.00
w.o.Q,A  poll          failed  0.00 ± 3.50
";
    assert_eq!(table().render_text(), expected);
}

#[test]
fn export_writes_requested_formats() {
    let dir = tempfile::tempdir().unwrap();
    let files = export_report(&[table()], "all", dir.path()).unwrap();
    assert_eq!(files.len(), 3);
    for f in &files {
        assert!(fs::metadata(f).unwrap().len() > 0);
    }
    assert!(matches!(export_report(&[table()], "xlsx", dir.path()), Err(ExperimentError::UnknownFormat(_))));
}

fn small_plan(outputs: &std::path::Path) -> ExperimentPlan {
    let mut base = RunConfig::desk(TaskSet::full(), 40);
    base.train.epochs = 2;
    ExperimentPlan {
        name: "small".into(),
        base,
        variants: vec![
            Variant::labeled("UniPoll"),
            Variant {
                batch_size: Some(0),
                ..Variant::labeled("broken")
            },
        ],
        seeds: vec![40, 41],
        outputs: Some(outputs.to_path_buf()),
    }
}

#[test]
fn failed_runs_mark_cells_and_finished_runs_resume() {
    let corpus = synthetic_corpus(60, 2);
    let dir = tempfile::tempdir().unwrap();
    let plan = small_plan(dir.path());
    let first = run_plan(&corpus, &plan).unwrap();

    let ok = first.cell("UniPoll", Target::Poll, "rouge1").unwrap();
    assert!(ok.mean.is_some() && ok.failed.is_none());
    assert_eq!(ok.n_seeds, 2);
    for r in first.rows.iter().filter(|r| r.variant == "broken") {
        assert!(r.mean.is_none() && r.failed.is_some(), "{r:?}");
    }
    assert!(first.render_text().contains("failed"));

    // Completed runs are reused from disk; their predictions files stay untouched.
    let runs = dir.path().join("runs");
    let preds: Vec<_> = fs::read_dir(&runs)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.to_string_lossy().ends_with(".preds.jsonl"))
        .collect();
    assert_eq!(preds.len(), 2);
    let stamps: Vec<_> = preds.iter().map(|p| fs::metadata(p).unwrap().modified().unwrap()).collect();
    let second = run_plan(&corpus, &plan).unwrap();
    assert_eq!(second.rows, first.rows);
    let again: Vec<_> = preds.iter().map(|p| fs::metadata(p).unwrap().modified().unwrap()).collect();
    assert_eq!(stamps, again);
    assert_eq!(second.metadata.runs.len(), 4);
}

#[test]
fn plan_files_reject_unknown_keys() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("plan.yaml");
    let base = RunConfig::desk(TaskSet::full(), 40).to_yaml();
    let indented: String = base.lines().map(|l| format!("  {l}\n")).collect();
    fs::write(&path, format!("name: p\nbase:\n{indented}variants:\n  - label: a\n    gama_q: 0.5\n")).unwrap();
    assert!(ExperimentPlan::load(&path).is_err());
    fs::write(&path, format!("name: p\nbase:\n{indented}variants:\n  - label: a\n    gamma_q: 0.5\n")).unwrap();
    let plan = ExperimentPlan::load(&path).unwrap();
    assert_eq!(plan.seeds, vec![40, 41, 42, 43, 44]);
    assert_eq!(plan.variants[0].apply(&plan.base, 42).train.gamma_q, 0.5);
}
