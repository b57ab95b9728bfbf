use std::sync::{Arc, Mutex};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use blunder_cli::quiz::{router, Quiz, Scored, Stats};
use blunder_core::ingest::Instance;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

fn instance(fen: &str, is_blunder: bool, b: u32) -> Instance {
    Instance {
        fen: fen.to_string(),
        canonical_fen: fen.to_string(),
        mv: "a1a2".to_string(),
        is_blunder,
        n: 10,
        b,
        elo: 1500,
        opp_elo: 1400,
        time_left: Some(30.0),
        time_spent: None,
        game_id: "g".to_string(),
    }
}

fn pool() -> Vec<Scored> {
    let fens = [
        "k7/8/1K6/8/8/8/2Q5/8 w - - 0 1",
        "k7/8/2K5/8/8/8/8/1Q6 w - - 0 1",
        "8/8/8/8/2K1Q3/8/1k6/8 w - - 0 1",
        "8/3K4/8/5P2/5k2/8/8/8 w - - 0 1",
    ];
    let mut out = Vec::new();
    for (i, fen) in fens.iter().enumerate() {
        // Blunders get the higher score, so the model is always right.
        out.push(Scored { instance: instance(fen, i % 2 == 0, 1 + i as u32), score: if i % 2 == 0 { 0.9 } else { 0.1 } });
    }
    // Black to move: never served.
    out.push(Scored { instance: instance("k7/1Q6/1K6/8/8/8/8/8 b - - 0 1", true, 1), score: 0.5 });
    out
}

fn app(quiz: Quiz) -> (Router, Arc<Mutex<Quiz>>) {
    let shared = Arc::new(Mutex::new(quiz));
    (router(shared.clone(), None), shared)
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri).header("content-type", "application/json");
    let req = req.body(body.map_or(Body::empty(), |b| Body::from(b.to_string()))).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let ct = resp.headers().get("content-type").map(|v| v.to_str().unwrap().to_string());
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    if uri.starts_with("/api") {
        assert_eq!(ct.as_deref(), Some("application/json"), "{uri}");
    }
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

#[tokio::test]
async fn pair_hides_the_answer() {
    let (app, quiz) = app(Quiz::new(pool(), 1, false));
    assert_eq!(quiz.lock().unwrap().pool_len(), 4);
    let mut ids = std::collections::HashSet::new();
    for _ in 0..50 {
        let (status, v) = call(&app, "GET", "/api/quiz/pair", None).await;
        assert_eq!(status, StatusCode::OK);
        let obj = v.as_object().unwrap();
        let mut keys: Vec<_> = obj.keys().cloned().collect();
        keys.sort();
        assert_eq!(keys, ["instance_a", "instance_b", "pair_id"]);
        let id = obj["pair_id"].as_str().unwrap().to_string();
        let q = quiz.lock().unwrap();
        let p = q.pair(&id).unwrap();
        let fens = [p.instance_a.fen.as_str(), p.instance_b.fen.as_str()];
        let blunders = fens.iter().filter(|f| pool().iter().any(|s| s.instance.fen == **f && s.instance.is_blunder)).count();
        assert_eq!(blunders, 1);
        assert!(fens.iter().all(|f| f.contains(" w ")));
        assert_eq!(p.model_guess, p.blunder_side);
        assert!(ids.insert(id));
    }
}

#[tokio::test]
async fn guesses_and_errors() {
    let (app, quiz) = app(Quiz::new(pool(), 2, false));
    let (_, v) = call(&app, "GET", "/api/quiz/pair", None).await;
    let id = v["pair_id"].as_str().unwrap().to_string();
    let side = quiz.lock().unwrap().pair(&id).unwrap().blunder_side;
    let choice = serde_json::to_value(side).unwrap();

    let body = json!({ "pair_id": id, "participant": "p1", "choice": choice });
    let (status, v) = call(&app, "POST", "/api/quiz/guess", Some(body.clone())).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["correct"], true);

    let (status, v) = call(&app, "POST", "/api/quiz/guess", Some(body)).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert!(v["error"].is_string());

    let (status, _) =
        call(&app, "POST", "/api/quiz/guess", Some(json!({ "pair_id": "nope", "participant": "p1", "choice": "A" }))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, v) = call(&app, "POST", "/api/quiz/guess", Some(json!({ "pair_id": id, "choice": "C" }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(v["error"].is_string());
    let (status, _) = call(&app, "GET", "/api/quiz/nothing", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let (status, v) = call(&app, "GET", "/api/quiz/stats", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["human"]["accuracy"], 1.0);
    assert_eq!(v["participants"]["p1"]["guesses"], 1);
    assert_eq!(v["model"]["accuracy"], 1.0);
}

#[tokio::test]
async fn empty_pool_is_unavailable() {
    let only_blunders: Vec<Scored> = pool().into_iter().filter(|s| s.instance.is_blunder).collect();
    let (app, _) = app(Quiz::new(only_blunders, 3, false));
    let (status, v) = call(&app, "GET", "/api/quiz/pair", None).await;
    assert_eq!(status, StatusCode::SERVICE_UNAVAILABLE);
    assert!(v["error"].is_string());
}

#[tokio::test]
async fn root_serves_a_page() {
    let (app, _) = app(Quiz::new(pool(), 4, false));
    let resp = app.oneshot(Request::get("/").body(Body::empty()).unwrap()).await.unwrap();
    assert_eq!(resp.status(), StatusCode::OK);

    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("index.html"), "<p>bundle</p>").unwrap();
    let app = router(Arc::new(Mutex::new(Quiz::new(pool(), 4, false))), Some(dir.path().to_path_buf()));
    let resp = app.oneshot(Request::get("/").body(Body::empty()).unwrap()).await.unwrap();
    let body = resp.into_body().collect().await.unwrap().to_bytes();
    assert_eq!(&body[..], b"<p>bundle</p>");
}

#[test]
fn store_survives_a_restart() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("log.jsonl");
    let mut q = Quiz::new(pool(), 5, false).with_store(&path, 5).unwrap();
    let mut ids = Vec::new();
    for k in 0..20 {
        let v = q.serve_pair().unwrap();
        let req = serde_json::from_value(json!({ "pair_id": v.pair_id, "participant": format!("u{}", k % 3), "choice": "A" }));
        q.guess(req.unwrap()).unwrap();
        ids.push(v.pair_id);
    }
    let live = serde_json::to_string(&q.stats()).unwrap();
    drop(q);

    // A torn write at the end is dropped on reopen.
    use std::io::Write;
    std::fs::OpenOptions::new().append(true).open(&path).unwrap().write_all(b"{\"event\":\"gue").unwrap();
    let mut q = Quiz::new(pool(), 5, false).with_store(&path, 5).unwrap();
    assert_eq!(serde_json::to_string(&q.stats()).unwrap(), live);
    let dup = serde_json::from_value(json!({ "pair_id": ids[0], "participant": "u0", "choice": "B" })).unwrap();
    assert!(q.guess(dup).is_err());
    let next = q.serve_pair().unwrap();
    assert!(!ids.contains(&next.pair_id));
    drop(q);
    let replayed: Stats = Quiz::replay(&path).unwrap();
    assert_eq!(replayed.pairs_served, 21);
    assert_eq!(replayed.human.guesses, 20);
}

#[test]
fn beta_matched_pairs() {
    let mut q = Quiz::new(pool(), 6, true);
    for _ in 0..20 {
        let v = q.serve_pair().unwrap();
        let p = q.pair(&v.pair_id).unwrap().clone();
        assert_ne!(p.instance_a.fen, p.instance_b.fen);
    }
}
