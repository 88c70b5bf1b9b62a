//! Annotation service contract, exercised in-process through the router.

use std::collections::BTreeMap;
use std::future::Future;
use std::path::PathBuf;
use std::sync::Arc;

use al_core::corpus::{load_dataset, read_assignments_csv, DataFormat, LabelMode, LabelSet, LabelSpace};
use al_server::{router, AppConfig};
use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tempfile::TempDir;
use tower::ServiceExt;

use crate::{case, Case, CaseResult, Outcome};

const WORDS: [[&str; 6]; 2] = [
    ["goal", "match", "striker", "league", "coach", "score"],
    ["vote", "party", "senate", "ballot", "policy", "minister"],
];
const CLASSES: [&str; 2] = ["politics", "sports"];
const SEEDS: usize = 6;
const K: usize = 10;

fn block_on<F: Future>(f: F) -> F::Output {
    tokio::runtime::Builder::new_multi_thread()
        .worker_threads(2)
        .enable_all()
        .build()
        .expect("tokio runtime")
        .block_on(f)
}

struct Fixture {
    dir: TempDir,
    data: PathBuf,
    truth: Vec<&'static str>,
}

/// Two-topic corpus of `n` documents; the first `SEEDS` carry labels.
fn fixture(n: usize) -> Fixture {
    let dir = tempfile::tempdir().expect("tempdir");
    let mut csv = String::from("text,label\n");
    let mut truth = Vec::new();
    for i in 0..n {
        let topic = i % 2;
        let name = if topic == 0 { "sports" } else { "politics" };
        let w = &WORDS[topic];
        let text = format!("{} {} {} filler{}", w[i % 6], w[(i / 2 + 1) % 6], w[(i / 3 + 2) % 6], i % 7);
        let label = if i < SEEDS { name } else { "" };
        csv.push_str(&format!("{text},{label}\n"));
        truth.push(name);
    }
    let data = dir.path().join("corpus.csv");
    std::fs::write(&data, csv).expect("write corpus");
    Fixture { dir, data, truth }
}

impl Fixture {
    fn config(&self, sessions: &str) -> AppConfig {
        let mut c = AppConfig::new(&self.data, self.dir.path().join(sessions));
        c.batch_size = K;
        c
    }

    fn sessions(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn answer(&self, ids: &[usize]) -> Value {
        let labels: BTreeMap<String, Vec<&str>> =
            ids.iter().map(|&i| (i.to_string(), vec![self.truth[i]])).collect();
        json!(labels)
    }
}

fn app(config: &AppConfig) -> Result<Router, String> {
    Ok(router(Arc::new(config.open().map_err(|e| e.to_string())?)))
}

async fn call_raw(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>) {
    let builder = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(v) => builder
            .header("content-type", "application/json")
            .body(Body::from(serde_json::to_vec(&v).expect("json")))
            .expect("request"),
        None => builder.body(Body::empty()).expect("request"),
    };
    let res = app.clone().oneshot(req).await.expect("infallible service");
    let status = res.status();
    let bytes = res.into_body().collect().await.expect("body").to_bytes().to_vec();
    (status, bytes)
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let (status, bytes) = call_raw(app, method, uri, body).await;
    let value = serde_json::from_slice(&bytes).unwrap_or(Value::Null);
    (status, value)
}

async fn session(app: &Router) -> Result<String, String> {
    let (status, body) = call(app, "POST", "/api/session", None).await;
    ensure!(status == StatusCode::OK, "POST /api/session: {status} {body}");
    body["session_id"].as_str().map(String::from).ok_or("no session_id".into())
}

async fn batch(app: &Router, id: &str) -> Value {
    call(app, "GET", &format!("/api/session/{id}/batch"), None).await.1
}

async fn status(app: &Router, id: &str) -> Value {
    call(app, "GET", &format!("/api/session/{id}/status"), None).await.1
}

async fn submit(app: &Router, id: &str, seq: &Value, labels: Value) -> (StatusCode, Value) {
    call(app, "POST", &format!("/api/session/{id}/labels"), Some(json!({ "seq": seq, "labels": labels }))).await
}

fn ids(batch: &Value) -> Vec<usize> {
    batch["batch"]
        .as_array()
        .map(|a| a.iter().filter_map(|d| d["doc_id"].as_u64()).map(|v| v as usize).collect())
        .unwrap_or_default()
}

/// `rounds` batch/submit cycles; responses without wall-clock fields.
async fn drive(app: &Router, id: &str, f: &Fixture, rounds: usize) -> Vec<Value> {
    let mut out = Vec::new();
    for _ in 0..rounds {
        let b = batch(app, id).await;
        let (_, mut res) = submit(app, id, &b["seq"], f.answer(&ids(&b))).await;
        if let Some(o) = res.as_object_mut() {
            o.remove("retrain_ms");
        }
        out.push(b);
        out.push(res);
    }
    out
}

pub fn fresh_batch_has_k_docs() -> CaseResult {
    block_on(async {
        let f = fixture(60);
        let app = app(&f.config("s"))?;
        let id = session(&app).await?;
        let b = batch(&app, &id).await;
        ensure!(ids(&b).len() == K, "batch {b}");
        ensure!(b["done"] == false, "done flag on a fresh session");
        Ok(())
    })
}

pub fn batch_is_idempotent() -> CaseResult {
    block_on(async {
        let f = fixture(60);
        let app = app(&f.config("s"))?;
        let id = session(&app).await?;
        let first = batch(&app, &id).await;
        let second = batch(&app, &id).await;
        ensure!(first == second, "{first} vs {second}");
        ensure!(first["seq"].is_u64(), "no seq");
        Ok(())
    })
}

pub fn exhausted_pool_is_done() -> CaseResult {
    block_on(async {
        let f = fixture(30);
        let app = app(&f.config("s"))?;
        let id = session(&app).await?;
        for _ in 0..10 {
            let b = batch(&app, &id).await;
            if b["done"] == true {
                ensure!(b["batch"] == json!([]), "terminal batch {b}");
                ensure!(status(&app, &id).await["unlabeled"] == 0, "pool not empty");
                return Ok(());
            }
            let (code, _) = submit(&app, &id, &b["seq"], f.answer(&ids(&b))).await;
            ensure!(code == StatusCode::OK, "submit {code}");
        }
        Err("pool never reported done".into())
    })
}

pub fn full_batch_grows_labeled() -> CaseResult {
    block_on(async {
        let f = fixture(60);
        let app = app(&f.config("s"))?;
        let id = session(&app).await?;
        let b = batch(&app, &id).await;
        let (code, res) = submit(&app, &id, &b["seq"], f.answer(&ids(&b))).await;
        ensure!(code == StatusCode::OK, "{code} {res}");
        ensure!(res["labeled"] == SEEDS + K, "labeled {}", res["labeled"]);
        ensure!(res["unlabeled"] == 60 - SEEDS - K, "unlabeled {}", res["unlabeled"]);
        ensure!(res["round"] == 1, "round {}", res["round"]);
        Ok(())
    })
}

/// Partial, extra and stale submissions conflict and change nothing, on
/// the wire or on disk.
pub fn conflicts_are_atomic() -> CaseResult {
    block_on(async {
        let f = fixture(60);
        let app = app(&f.config("s"))?;
        let id = session(&app).await?;
        let b = batch(&app, &id).await;
        let batch_ids = ids(&b);
        let manifest = f.sessions("s").join(&id).join("session.json");
        let on_disk = std::fs::read(&manifest).map_err(|e| e.to_string())?;

        let mut partial = f.answer(&batch_ids);
        partial.as_object_mut().unwrap().remove(&batch_ids[0].to_string());
        let (code, body) = submit(&app, &id, &b["seq"], partial).await;
        ensure!(code == StatusCode::CONFLICT, "partial: {code}");
        ensure!(body["detail"]["missing"] == json!([batch_ids[0]]), "partial detail {body}");

        let mut extra = f.answer(&batch_ids);
        extra.as_object_mut().unwrap().insert("0".into(), json!(["sports"]));
        let (code, body) = submit(&app, &id, &b["seq"], extra).await;
        ensure!(code == StatusCode::CONFLICT, "extra: {code}");
        ensure!(body["detail"]["extra"] == json!([0]), "extra detail {body}");

        let (code, _) = submit(&app, &id, &json!(0), f.answer(&batch_ids)).await;
        ensure!(code == StatusCode::CONFLICT, "stale seq: {code}");

        ensure!(status(&app, &id).await["labeled"] == SEEDS, "pools moved");
        ensure!(batch(&app, &id).await == b, "pending batch changed");
        ensure!(std::fs::read(&manifest).map_err(|e| e.to_string())? == on_disk, "session file rewritten");
        Ok(())
    })
}

pub fn concurrent_duplicates_have_one_winner() -> CaseResult {
    block_on(async {
        let f = fixture(60);
        let app = app(&f.config("s"))?;
        let id = session(&app).await?;
        let b = batch(&app, &id).await;
        let body = json!({ "seq": b["seq"], "labels": f.answer(&ids(&b)) });
        let uri = format!("/api/session/{id}/labels");
        let tasks: Vec<_> = (0..4)
            .map(|_| {
                let (app, uri, body) = (app.clone(), uri.clone(), body.clone());
                tokio::spawn(async move { call(&app, "POST", &uri, Some(body)).await.0 })
            })
            .collect();
        let mut codes = Vec::new();
        for t in tasks {
            codes.push(t.await.map_err(|e| e.to_string())?);
        }
        let ok = codes.iter().filter(|&&c| c == StatusCode::OK).count();
        let conflict = codes.iter().filter(|&&c| c == StatusCode::CONFLICT).count();
        ensure!(ok == 1 && conflict == 3, "codes {codes:?}");
        ensure!(status(&app, &id).await["labeled"] == SEEDS + K, "pools double-moved");
        Ok(())
    })
}

/// Constant labels until the advisory fires; each response's statistic is
/// replayed from the reported kappas.
pub fn constant_labels_reach_should_stop() -> CaseResult {
    block_on(async {
        let f = fixture(120);
        let mut config = f.config("s");
        config.stopping = vec!["kappa_average(3,0.99)".parse().map_err(|e: al_core::Error| e.to_string())?];
        let app = app(&config)?;
        let id = session(&app).await?;
        let mut kappas: Vec<f64> = Vec::new();
        for _ in 0..10 {
            let b = batch(&app, &id).await;
            let labels: BTreeMap<String, Vec<&str>> =
                ids(&b).iter().map(|i| (i.to_string(), vec!["sports"])).collect();
            let (code, res) = submit(&app, &id, &b["seq"], json!(labels)).await;
            ensure!(code == StatusCode::OK, "{code} {res}");
            kappas.push(res["kappa"].as_f64().ok_or("no kappa")?);
            let mean = (kappas.len() >= 3).then(|| kappas[kappas.len() - 3..].iter().sum::<f64>() / 3.0);
            ensure!(res["stopping"]["value"].as_f64() == mean, "value {} vs replay {mean:?}", res["stopping"]["value"]);
            let expect = mean.is_some_and(|m| m >= 0.99);
            ensure!(res["stopping"]["should_stop"] == expect, "should_stop disagrees with replay");
            if expect {
                return Ok(());
            }
        }
        Err(format!("never advised stopping; kappas {kappas:?}"))
    })
}

pub fn new_session_status() -> CaseResult {
    block_on(async {
        let f = fixture(60);
        let app = app(&f.config("s"))?;
        let id = session(&app).await?;
        let s = status(&app, &id).await;
        ensure!(s["round"] == 0 && s["labeled"] == SEEDS, "status {s}");
        Ok(())
    })
}

async fn labeled_session(f: &Fixture, rounds: usize) -> Result<(Router, String), String> {
    let app = app(&f.config("s"))?;
    let id = session(&app).await?;
    drive(&app, &id, f, rounds).await;
    Ok((app, id))
}

pub fn export_counts_labeled() -> CaseResult {
    block_on(async {
        let f = fixture(60);
        let (app, id) = labeled_session(&f, 2).await?;
        let (code, csv) = call_raw(&app, "GET", &format!("/api/session/{id}/export?format=csv"), None).await;
        ensure!(code == StatusCode::OK, "export {code}");
        let rows = String::from_utf8_lossy(&csv).lines().count() - 1;
        let labeled = status(&app, &id).await["labeled"].as_u64().unwrap_or(0) as usize;
        ensure!(rows == labeled, "{rows} rows for {labeled} labeled");
        Ok(())
    })
}

/// Both export formats reload to the collected assignments.
pub fn export_round_trips() -> CaseResult {
    block_on(async {
        let f = fixture(60);
        let (app, id) = labeled_session(&f, 2).await?;
        let space = LabelSpace::new(LabelMode::SingleLabel, CLASSES.map(String::from).to_vec())
            .map_err(|e| e.to_string())?;
        let source = load_dataset(&f.data, DataFormat::Csv, Some(space.clone())).map_err(|e| e.to_string())?;

        let (_, csv) = call_raw(&app, "GET", &format!("/api/session/{id}/export?format=csv"), None).await;
        let rows = read_assignments_csv(csv.as_slice(), &space).map_err(|e| e.to_string())?;
        ensure!(rows.len() == SEEDS + 2 * K, "{} rows", rows.len());
        for (doc, set) in &rows {
            let want = LabelSet::single(space.class_index(f.truth[*doc]).ok_or("class")?);
            ensure!(*set == want, "doc {doc}: exported {set:?}");
        }

        let (_, jsonl) = call_raw(&app, "GET", &format!("/api/session/{id}/export?format=jsonl"), None).await;
        let path = f.dir.path().join("export.jsonl");
        std::fs::write(&path, &jsonl).map_err(|e| e.to_string())?;
        let reloaded = load_dataset(&path, DataFormat::Jsonl, Some(space)).map_err(|e| e.to_string())?;
        ensure!(reloaded.len() == rows.len(), "jsonl has {} rows", reloaded.len());
        for (k, (doc, set)) in rows.iter().enumerate() {
            ensure!(reloaded.text(k) == source.text(*doc), "text of row {k}");
            ensure!(reloaded.label(k) == Some(set), "label of row {k}");
        }
        Ok(())
    })
}

async fn restart_matches(f: &Fixture, strategy: &str) -> Result<(), String> {
    let mut straight_cfg = f.config(&format!("straight-{strategy}"));
    straight_cfg.strategy = strategy.parse().map_err(|e: al_core::Error| e.to_string())?;
    let straight = app(&straight_cfg)?;
    let sid = session(&straight).await?;
    let mut expected = drive(&straight, &sid, f, 5).await;
    expected.push(batch(&straight, &sid).await);

    let mut cfg = straight_cfg.clone();
    cfg.session_dir = f.sessions(&format!("restarted-{strategy}"));
    let first = app(&cfg)?;
    let rid = session(&first).await?;
    let mut got = drive(&first, &rid, f, 2).await;
    let pending = batch(&first, &rid).await;
    drop(first);

    // restart with a batch pending
    let second = app(&cfg)?;
    ensure!(session(&second).await? == rid, "session id changed across restart");
    got.extend(drive(&second, &rid, f, 1).await);
    ensure!(got[4] == pending, "pending batch lost across restart");
    drop(second);

    // restart between rounds
    let third = app(&cfg)?;
    got.extend(drive(&third, &rid, f, 2).await);
    got.push(batch(&third, &rid).await);
    ensure!(got == expected, "{strategy}: restarted trajectory diverges");
    let (_, a) = call_raw(&straight, "GET", &format!("/api/session/{sid}/export"), None).await;
    let (_, b) = call_raw(&third, "GET", &format!("/api/session/{rid}/export"), None).await;
    ensure!(a == b, "{strategy}: exports differ");
    Ok(())
}

pub fn restart_equals_uninterrupted() -> CaseResult {
    block_on(async {
        let f = fixture(80);
        for strategy in ["breaking_ties", "random", "greedy_coreset"] {
            restart_matches(&f, strategy).await?;
        }
        Ok(())
    })
}

/// Examples of the service operations.
pub fn example_cases() -> Vec<Case> {
    vec![
        case("service: fresh session batch of k", fresh_batch_has_k_docs),
        case("service: batch idempotent", batch_is_idempotent),
        case("service: exhausted pool done", exhausted_pool_is_done),
        case("service: full batch grows labeled", full_batch_grows_labeled),
        case("service: missing id conflicts atomically", conflicts_are_atomic),
        case("service: constant labels advise stop", constant_labels_reach_should_stop),
        case("service: new session status", new_session_status),
        case("service: export row count", export_counts_labeled),
        case("service: export reload round-trip", export_round_trips),
    ]
}

pub fn criterion() -> Outcome {
    let checks = [
        case("batch idempotence", batch_is_idempotent),
        case("409 atomicity", conflicts_are_atomic),
        case("concurrent duplicate submits", concurrent_duplicates_have_one_winner),
        case("crash-restart trajectory equality", restart_equals_uninterrupted),
        case("export round-trip", export_round_trips),
    ];
    let (passed, failures) = crate::run_cases(&checks);
    Outcome {
        pass: failures.is_empty(),
        summary: format!(
            "{passed}/{} contract checks ({})",
            checks.len(),
            checks.iter().map(|c| c.name).collect::<Vec<_>>().join(", ")
        ),
        details: failures,
    }
}
