use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use pollforge::corpus::{save_corpus, Split};
use pollforge::formatting::GenerationOutput;
use pollforge::humaneval::http::router;
use pollforge::humaneval::{HumanEvalStore, SessionConfig};
use pollforge::metrics::Prediction;
use pollforge::pipeline::write_predictions;
use pollforge::synthetic::synthetic_corpus;

const SYSTEMS: [&str; 3] = ["unipoll", "t5", "bart"];

/// Corpus with 100 test samples and three systems whose outputs carry their
/// label, so a leak would be visible in any response body.
fn fixture(dir: &Path, raters: &[&str], sample_count: usize) -> SessionConfig {
    let corpus = synthetic_corpus(1000, 3);
    let gold = dir.join("gold.jsonl");
    save_corpus(&corpus, &gold).unwrap();
    let mut systems = BTreeMap::new();
    for sys in SYSTEMS {
        let preds: Vec<Prediction> = corpus
            .split(Split::Test)
            .map(|s| {
                Prediction::new(
                    s.id.clone(),
                    GenerationOutput {
                        question: format!("generated question {}", s.id),
                        answers: vec!["first".into(), "second".into()],
                        raw: String::new(),
                        parse_ok: true,
                    },
                )
            })
            .collect();
        let path = dir.join(format!("{sys}.jsonl"));
        write_predictions(&path, &preds).unwrap();
        systems.insert(sys.to_string(), path);
    }
    SessionConfig {
        systems,
        gold,
        sample_count,
        raters: raters.iter().map(|r| r.to_string()).collect(),
        shuffle_seed: 9,
    }
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map_or(Body::empty(), |b| Body::from(b.to_string())))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let v = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap_or(Value::String(String::from_utf8_lossy(&bytes).into()))
    };
    (status, v)
}

fn assert_blind(v: &Value) {
    let text = v.to_string();
    for needle in ["hidden_system", "system", "GOLD", "unipoll", "t5", "bart"] {
        assert!(!text.contains(needle), "rater-facing body mentions {needle:?}: {text}");
    }
}

fn rating(rater: &str, item: &str, s: [i64; 4]) -> Value {
    json!({"rater_id": rater, "item_id": item, "relevance": s[0], "fluency": s[1], "engagingness": s[2], "qa_consistency": s[3]})
}

async fn create(app: &Router, cfg: &SessionConfig) -> (String, Value) {
    let (status, v) = call(app, "POST", "/sessions", Some(serde_json::to_value(cfg).unwrap())).await;
    assert_eq!(status, StatusCode::CREATED, "{v}");
    (v["session_id"].as_str().unwrap().to_string(), v)
}

#[tokio::test]
async fn full_session_arithmetic_and_blinding() {
    let dir = tempfile::tempdir().unwrap();
    let raters = ["r1", "r2", "r3", "r4"];
    let cfg = fixture(dir.path(), &raters, 100);
    let app = router(Arc::new(HumanEvalStore::in_memory()), None);
    let (id, created) = create(&app, &cfg).await;
    assert_eq!(created["items"], 400);
    assert_eq!(created["raters"], 4);
    assert_eq!(created["expected_ratings"], 1600);

    let mut seen = std::collections::HashSet::new();
    for round in 0..400 {
        let (s, v) = call(&app, "GET", &format!("/sessions/{id}/next?rater=r1"), None).await;
        assert_eq!(s, StatusCode::OK);
        assert_eq!(v["status"], "item");
        if round % 50 == 0 {
            assert_blind(&v);
        }
        let item = v["item"]["item_id"].as_str().unwrap().to_string();
        assert!(seen.insert(item.clone()), "item served twice");
        let (s, ack) = call(&app, "POST", &format!("/sessions/{id}/ratings"), Some(rating("r1", &item, [3, 3, 2, 4]))).await;
        assert_eq!(s, StatusCode::OK, "{ack}");
        assert_blind(&ack);
        assert_eq!(ack["progress"]["rated"], round + 1);
    }
    let (_, v) = call(&app, "GET", &format!("/sessions/{id}/next?rater=r1"), None).await;
    assert_eq!(v["status"], "done");
    let (_, p) = call(&app, "GET", &format!("/sessions/{id}/progress?rater=r1"), None).await;
    assert_blind(&p);
    assert_eq!(p["fraction"], 1.0);

    let (_, agg) = call(&app, "GET", &format!("/sessions/{id}/aggregate"), None).await;
    assert_eq!(agg["coverage"]["expected"], 1600);
    assert_eq!(agg["coverage"]["submitted"], 400);
    assert_eq!(agg["systems"].as_object().unwrap().len(), 4);
    assert_eq!(agg["systems"]["GOLD"]["n_records"], 100);
    assert_eq!(agg["systems"]["unipoll"]["engagingness"], 2.0);
}

#[tokio::test]
async fn orders_are_per_rater_permutations() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture(dir.path(), &["a", "b"], 10);
    let app = router(Arc::new(HumanEvalStore::in_memory()), None);
    let (id, _) = create(&app, &cfg).await;
    let mut orders = Vec::new();
    for r in ["a", "b"] {
        let mut order = Vec::new();
        loop {
            let (_, v) = call(&app, "GET", &format!("/sessions/{id}/next?rater={r}"), None).await;
            if v["status"] == "done" {
                break;
            }
            let item = v["item"]["item_id"].as_str().unwrap().to_string();
            call(&app, "POST", &format!("/sessions/{id}/ratings"), Some(rating(r, &item, [1, 1, 1, 1]))).await;
            order.push(item);
        }
        assert_eq!(order.len(), 40);
        orders.push(order);
    }
    assert_ne!(orders[0], orders[1]);
    let mut a = orders[0].clone();
    let mut b = orders[1].clone();
    a.sort();
    b.sort();
    assert_eq!(a, b);
}

#[tokio::test]
async fn invalid_input_is_rejected_with_typed_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture(dir.path(), &["r1"], 5);
    let app = router(Arc::new(HumanEvalStore::in_memory()), None);
    let (id, _) = create(&app, &cfg).await;
    let (_, v) = call(&app, "GET", &format!("/sessions/{id}/next?rater=r1"), None).await;
    let item = v["item"]["item_id"].as_str().unwrap().to_string();

    for bad in [[0, 2, 2, 2], [2, 5, 2, 2], [2, 2, -1, 2], [2, 2, 2, 9]] {
        let (s, e) = call(&app, "POST", &format!("/sessions/{id}/ratings"), Some(rating("r1", &item, bad))).await;
        assert_eq!(s, StatusCode::BAD_REQUEST);
        assert_eq!(e["error"], "ScoreOutOfRange");
    }
    let (s, e) = call(&app, "POST", &format!("/sessions/{id}/ratings"), Some(rating("nobody", &item, [2; 4]))).await;
    assert_eq!((s, e["error"].as_str()), (StatusCode::NOT_FOUND, Some("UnknownRater")));
    let (s, e) = call(&app, "POST", &format!("/sessions/{id}/ratings"), Some(rating("r1", "no-such-item", [2; 4]))).await;
    assert_eq!((s, e["error"].as_str()), (StatusCode::NOT_FOUND, Some("UnknownItem")));
    let (s, e) = call(&app, "GET", "/sessions/nope/progress?rater=r1", None).await;
    assert_eq!((s, e["error"].as_str()), (StatusCode::NOT_FOUND, Some("UnknownSession")));

    let (_, p) = call(&app, "GET", &format!("/sessions/{id}/progress?rater=r1"), None).await;
    assert_eq!(p["rated"], 0);
}

#[tokio::test]
async fn session_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let app = router(Arc::new(HumanEvalStore::in_memory()), None);

    let mut cfg = fixture(dir.path(), &["r1"], 5);
    let path = cfg.systems["t5"].clone();
    cfg.systems.insert("GOLD".into(), path);
    let (s, e) = call(&app, "POST", "/sessions", Some(serde_json::to_value(&cfg).unwrap())).await;
    assert_eq!((s, e["error"].as_str()), (StatusCode::BAD_REQUEST, Some("DuplicateSystemLabel")));

    let mut cfg = fixture(dir.path(), &["r1"], 5);
    let short = dir.path().join("short.jsonl");
    std::fs::write(&short, "").unwrap();
    cfg.systems.insert("partial".into(), short);
    let (s, e) = call(&app, "POST", "/sessions", Some(serde_json::to_value(&cfg).unwrap())).await;
    assert_eq!((s, e["error"].as_str()), (StatusCode::BAD_REQUEST, Some("PredictionsMissingSample")));
}

#[tokio::test]
async fn resubmission_overwrites_and_means_average_raters() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture(dir.path(), &["r1", "r2"], 1);
    let app = router(Arc::new(HumanEvalStore::in_memory()), None);
    let (id, _) = create(&app, &cfg).await;

    let store_items = {
        let (_, v) = call(&app, "GET", &format!("/sessions/{id}/next?rater=r1"), None).await;
        v["item"]["item_id"].as_str().unwrap().to_string()
    };
    let url = format!("/sessions/{id}/ratings");
    call(&app, "POST", &url, Some(rating("r1", &store_items, [1, 1, 1, 1]))).await;
    call(&app, "POST", &url, Some(rating("r1", &store_items, [2, 2, 2, 2]))).await;
    call(&app, "POST", &url, Some(rating("r2", &store_items, [3, 3, 3, 3]))).await;

    let (_, p) = call(&app, "GET", &format!("/sessions/{id}/progress?rater=r1"), None).await;
    assert_eq!(p["rated"], 1);
    let (_, agg) = call(&app, "GET", &format!("/sessions/{id}/aggregate"), None).await;
    assert_eq!(agg["coverage"]["submitted"], 2);
    let rated: Vec<&Value> = agg["systems"].as_object().unwrap().values().filter(|m| m["n_records"] == 2).collect();
    assert_eq!(rated.len(), 1);
    assert_eq!(rated[0]["relevance"], 2.5);
    assert_eq!(agg["agreement"]["rater_pairs"], 1);
    assert_eq!(agg["agreement"]["fluency"], 0.0);
}

#[tokio::test]
async fn ratings_survive_a_restart() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let cfg = fixture(dir.path(), &["r1", "r2"], 50);
    let id;
    let mut submitted = Vec::new();
    {
        let store = Arc::new(HumanEvalStore::open(&data).unwrap());
        let app = router(store, None);
        id = create(&app, &cfg).await.0;
        // More than one snapshot interval, so reload exercises snapshot plus log replay.
        for i in 0..150 {
            let (_, v) = call(&app, "GET", &format!("/sessions/{id}/next?rater=r1"), None).await;
            let item = v["item"]["item_id"].as_str().unwrap().to_string();
            let s = [1 + i % 4, 1 + (i / 4) % 4, 2, 3];
            let (st, _) = call(&app, "POST", &format!("/sessions/{id}/ratings"), Some(rating("r1", &item, s))).await;
            assert_eq!(st, StatusCode::OK);
            submitted.push(item);
        }
    }
    let before = {
        let store = HumanEvalStore::open(&data).unwrap();
        store.get(&id).unwrap().aggregate()
    };
    let store = Arc::new(HumanEvalStore::open(&data).unwrap());
    assert_eq!(store.session_ids(), vec![id.clone()]);
    let h = store.get(&id).unwrap();
    assert_eq!(h.records().len(), 150);
    assert_eq!(h.progress("r1").unwrap().rated, 150);
    assert_eq!(h.aggregate(), before);
    let app = router(store, None);
    let (_, v) = call(&app, "GET", &format!("/sessions/{id}/next?rater=r1"), None).await;
    let next = v["item"]["item_id"].as_str().unwrap();
    assert!(!submitted.iter().any(|s| s == next));
}

#[tokio::test]
async fn static_assets_are_served_beside_the_api() {
    let dir = tempfile::tempdir().unwrap();
    let assets = dir.path().join("ui");
    std::fs::create_dir_all(&assets).unwrap();
    std::fs::write(assets.join("index.html"), "<html>rater</html>").unwrap();
    let app = router(Arc::new(HumanEvalStore::in_memory()), Some(assets));
    let (s, v) = call(&app, "GET", "/index.html", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v, Value::String("<html>rater</html>".into()));
    let (s, _) = call(&app, "GET", "/sessions/x/progress?rater=a", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}
