//! Curation API over a seeded state directory, driven through the router.

use std::collections::BTreeSet;
use std::path::Path;
use std::process::Command;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use rigor_core::detectors::{Criterion, ToolVerdict};
use rigor_core::pipeline::{add_controls, build_queue, upsert_results, Layout};
use rigor_server::api::{router, AppState};
use serde_json::{json, Value};
use tower::ServiceExt;

const TOOLS: [&str; 3] = ["SciScore", "Barzooka", "ODDPub"];

// Papers 0..n; paper i gets a deterministic mix of verdicts, with evidence
// that names tools.
fn seed_state(root: &Path, n: usize) -> Layout {
    let layout = Layout::new(root);
    let mut verdicts = Vec::new();
    for i in 0..n {
        for (j, tool) in TOOLS.iter().enumerate() {
            let present = match i % 4 {
                0 => true,
                1 => false,
                _ => (i / 4 + j) % 2 == 0,
            };
            let mut v = ToolVerdict::new(&format!("PMC{}", 1000 + i), tool, Criterion::Blinding, present);
            if present {
                v.evidence = vec![format!("Scorers were blinded ({} flagged; see {}).", tool, TOOLS[(j + 1) % 3])];
            }
            verdicts.push(v);
        }
    }
    upsert_results(&layout, Criterion::Blinding, verdicts).unwrap();
    build_queue(&layout, Criterion::Blinding, 1, "https://example.org/{pmcid}").unwrap();
    add_controls(&layout, Criterion::Blinding, 2, 8, "https://example.org/{pmcid}").unwrap();
    layout
}

fn app(layout: &Layout) -> Router {
    router(Arc::new(AppState::open(layout.clone()).unwrap()))
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, String) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string()))
            .unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, String::from_utf8(bytes.to_vec()).unwrap())
}

async fn next(app: &Router, curator: &str) -> Value {
    let (s, body) = call(app, "GET", &format!("/api/queue/next?criterion=blinding&curator={curator}"), None).await;
    assert_eq!(s, StatusCode::OK, "{body}");
    serde_json::from_str(&body).unwrap()
}

fn label(item_id: &str, decision: &str, curator: &str) -> Value {
    json!({ "item_id": item_id, "decision": decision, "curator": curator, "notes": "" })
}

fn leaks_tool(body: &str) -> bool {
    let lower = body.to_lowercase();
    TOOLS.iter().any(|t| lower.contains(&t.to_lowercase()))
}

#[tokio::test]
async fn criteria_are_listed() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(&seed_state(dir.path(), 8));
    let (s, body) = call(&app, "GET", "/api/criteria", None).await;
    assert_eq!(s, StatusCode::OK);
    let list: Vec<Value> = serde_json::from_str(&body).unwrap();
    assert_eq!(list.len(), Criterion::ALL.len());
    let blinding = list.iter().find(|c| c["id"] == "blinding").unwrap();
    assert_eq!(blinding["has_queue"], true);
    assert_eq!(blinding["has_report"], false);
}

#[tokio::test]
async fn unknown_criterion_is_not_found() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(&seed_state(dir.path(), 8));
    for uri in [
        "/api/queue/next?criterion=telepathy&curator=a",
        "/api/progress?criterion=telepathy",
        "/api/reports/telepathy",
    ] {
        assert_eq!(call(&app, "GET", uri, None).await.0, StatusCode::NOT_FOUND, "{uri}");
    }
    let (s, body) = call(&app, "GET", "/api/queue/next?criterion=blinding", None).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(serde_json::from_str::<Value>(&body).unwrap()["fields"], json!(["curator"]));
}

#[tokio::test]
async fn empty_queue_is_done() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(&seed_state(dir.path(), 8));
    let (s, body) = call(&app, "GET", "/api/queue/next?criterion=power&curator=a", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(serde_json::from_str::<Value>(&body).unwrap(), json!({ "status": "done" }));
}

#[tokio::test]
async fn wire_never_reveals_tools_or_origin() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(&seed_state(dir.path(), 40));
    let mut seen = 0;
    loop {
        let (s, body) = call(&app, "GET", "/api/queue/next?criterion=blinding&curator=a", None).await;
        assert_eq!(s, StatusCode::OK);
        assert!(!leaks_tool(&body), "{body}");
        assert!(!body.contains("origin") && !body.contains("control"), "{body}");
        let v: Value = serde_json::from_str(&body).unwrap();
        if v["status"] == "done" {
            break;
        }
        let id = v["item"]["item_id"].as_str().unwrap();
        let (s, body) = call(&app, "POST", "/api/labels", Some(label(id, "yes", "a"))).await;
        assert_eq!(s, StatusCode::CREATED, "{body}");
        assert!(!leaks_tool(&body));
        seen += 1;
    }
    // 20 disagreement papers (i % 4 in {2, 3}) plus 8 controls.
    assert_eq!(seen, 28);
    let (_, progress) = call(&app, "GET", "/api/progress?criterion=blinding", None).await;
    assert!(!leaks_tool(&progress));
}

#[tokio::test]
async fn label_errors_map_to_statuses() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(&seed_state(dir.path(), 12));
    let a = next(&app, "a").await;
    let id = a["item"]["item_id"].as_str().unwrap().to_string();

    // Someone else cannot label an item leased to a.
    let (s, _) = call(&app, "POST", "/api/labels", Some(label(&id, "no", "b"))).await;
    assert_eq!(s, StatusCode::CONFLICT);

    let (s, body) = call(&app, "POST", "/api/labels", Some(label(&id, "yes", "a"))).await;
    assert_eq!(s, StatusCode::CREATED);
    let stored: Value = serde_json::from_str(&body).unwrap();
    assert!(stored["timestamp"].as_str().unwrap().ends_with('Z'));

    let (s, _) = call(&app, "POST", "/api/labels", Some(label(&id, "no", "a"))).await;
    assert_eq!(s, StatusCode::CONFLICT);

    let (s, _) = call(&app, "POST", "/api/labels", Some(label("blinding-PMC1", "no", "a"))).await;
    assert_eq!(s, StatusCode::NOT_FOUND);

    let (s, body) = call(&app, "POST", "/api/labels", Some(json!({ "item_id": id, "decision": "maybe" }))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(serde_json::from_str::<Value>(&body).unwrap()["fields"], json!(["curator", "decision"]));
}

#[tokio::test]
async fn restart_replays_the_label_log() {
    let dir = tempfile::tempdir().unwrap();
    let layout = seed_state(dir.path(), 24);
    let before = {
        let app = app(&layout);
        for (k, decision) in ["yes", "complicated", "no", "complicated"].iter().enumerate() {
            let v = next(&app, "a").await;
            let id = v["item"]["item_id"].as_str().unwrap().to_string();
            assert_eq!(call(&app, "POST", "/api/labels", Some(label(&id, decision, "a"))).await.0, StatusCode::CREATED, "{k}");
        }
        call(&app, "GET", "/api/progress?criterion=blinding", None).await.1
    };
    let after = call(&app(&layout), "GET", "/api/progress?criterion=blinding", None).await.1;
    assert_eq!(before, after);
    let p: Value = serde_json::from_str(&after).unwrap();
    assert_eq!(p["pass2"]["total"], 2);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_curators_get_disjoint_items() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(&seed_state(dir.path(), 2200));
    let poll = |curator: &'static str| {
        let app = app.clone();
        tokio::spawn(async move {
            let mut got = Vec::new();
            for _ in 0..500 {
                let v = next(&app, curator).await;
                let id = v["item"]["item_id"].as_str().expect("queue not exhausted").to_string();
                let (s, body) = call(&app, "POST", "/api/labels", Some(label(&id, "no", curator))).await;
                assert_eq!(s, StatusCode::CREATED, "{curator} {id}: {body}");
                got.push(id);
            }
            got
        })
    };
    let (a, b) = (poll("a"), poll("b"));
    let (a, b) = (a.await.unwrap(), b.await.unwrap());
    let a: BTreeSet<String> = a.into_iter().collect();
    let b: BTreeSet<String> = b.into_iter().collect();
    assert_eq!(a.len() + b.len(), 1000);
    assert!(a.is_disjoint(&b));
}

#[tokio::test]
async fn cli_and_http_reports_match() {
    let dir = tempfile::tempdir().unwrap();
    let layout = seed_state(dir.path(), 40);
    let app = app(&layout);
    let (s, body) = call(&app, "GET", "/api/reports/blinding?format=md", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert_eq!(serde_json::from_str::<Value>(&body).unwrap()["status"], "pending");

    loop {
        let v = next(&app, "a").await;
        if v["status"] == "done" {
            break;
        }
        let id = v["item"]["item_id"].as_str().unwrap().to_string();
        let pmc: usize = v["item"]["pmcid"].as_str().unwrap()[3..].parse().unwrap();
        let decision = if pmc % 3 == 0 { "yes" } else { "no" };
        call(&app, "POST", "/api/labels", Some(label(&id, decision, "a"))).await;
    }

    let rigor = |args: &[&str]| {
        let out = Command::new(env!("CARGO_BIN_EXE_rigor"))
            .arg("--out")
            .arg(dir.path())
            .args(args)
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        String::from_utf8(out.stdout).unwrap()
    };
    rigor(&["evaluate", "--criterion", "blinding"]);
    for format in ["md", "csv", "json"] {
        let cli = rigor(&["report", "--criterion", "blinding", "--format", format]);
        let (s, http) = call(&app, "GET", &format!("/api/reports/blinding?format={format}"), None).await;
        assert_eq!(s, StatusCode::OK);
        assert_eq!(cli, http, "{format}");
    }
    let (_, list) = call(&app, "GET", "/api/criteria", None).await;
    assert!(list.contains("\"has_report\":true"));
}
