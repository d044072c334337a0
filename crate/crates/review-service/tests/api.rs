use std::path::Path;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use chrono::{DateTime, Utc};
use http_body_util::BodyExt;
use leakcheck_core::audit::{finalize_report, read_label_log};
use leakcheck_core::{AuditReport, Label, QueueEntry};
use leakcheck_review_service::{router, AppState, ImageRoots, LabelLog, LabelSubmission, ReviewState};
use leakcheck_testkit::fixture_audit;
use serde_json::{json, Value};
use tower::ServiceExt;

struct Fixture {
    _dir: tempfile::TempDir,
    root: std::path::PathBuf,
    report: AuditReport,
    queue: Vec<QueueEntry>,
}

impl Fixture {
    fn new(k: usize) -> Self {
        let out = fixture_audit(k);
        let dir = tempfile::tempdir().unwrap();
        Self { root: dir.path().to_owned(), _dir: dir, report: out.report, queue: out.queue }
    }

    fn labels(&self) -> std::path::PathBuf {
        self.root.join("labels.jsonl")
    }

    fn state(&self) -> AppState {
        let log = LabelLog::open(&self.labels()).unwrap();
        let state = ReviewState::new(self.report.clone(), self.queue.clone(), log).unwrap();
        let mut roots = ImageRoots::new();
        roots.insert("real", self.root.join("images/real"));
        roots.insert("synthetic", self.root.join("images/synthetic"));
        AppState::new(state, roots)
    }

    fn app(&self) -> Router {
        router(self.state(), None)
    }
}

async fn call(app: &Router, req: Request<Body>) -> (StatusCode, Vec<u8>) {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let body = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, body)
}

async fn get(app: &Router, uri: &str) -> (StatusCode, Value) {
    let (s, b) = call(app, Request::get(uri).body(Body::empty()).unwrap()).await;
    (s, serde_json::from_slice(&b).unwrap_or(Value::Null))
}

async fn post(app: &Router, body: Value) -> (StatusCode, Value) {
    let req = Request::post("/api/labels")
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))
        .unwrap();
    let (s, b) = call(app, req).await;
    (s, serde_json::from_slice(&b).unwrap_or(Value::Null))
}

fn ts(secs: i64) -> DateTime<Utc> {
    DateTime::from_timestamp(1_700_000_000 + secs, 0).unwrap()
}

fn log_len(p: &Path) -> usize {
    read_label_log(p).unwrap().len()
}

#[tokio::test]
async fn fresh_reviewer_gets_rank_one_then_done() {
    let f = Fixture::new(3);
    let app = f.app();
    let (s, v) = get(&app, "/api/queue/next?reviewer=alice").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["rank"], 1);
    assert_eq!(v["pair_id"], f.queue[0].pair_id.as_str());
    for q in &f.queue {
        let (s, _) = post(&app, json!({"pair_id": q.pair_id, "reviewer_id": "alice", "label": "leaked"})).await;
        assert_eq!(s, StatusCode::OK);
    }
    let (_, v) = get(&app, "/api/queue/next?reviewer=alice").await;
    assert_eq!(v, json!({"done": true}));
    let (_, v) = get(&app, "/api/queue/next?reviewer=bob").await;
    assert_eq!(v["rank"], 1);
    let (s, _) = get(&app, "/api/queue/next?reviewer=").await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn interleaved_reviewers_each_see_every_pair_once() {
    let f = Fixture::new(10);
    let app = f.app();
    let mut seen: [Vec<String>; 2] = Default::default();
    let names = ["alice", "bob"];
    let mut done = [false; 2];
    let mut step = 0usize;
    while !done.iter().all(|&d| d) {
        // uneven interleaving: bob moves twice for every alice move
        let who = if step.is_multiple_of(3) { 0 } else { 1 };
        step += 1;
        if done[who] {
            continue;
        }
        let (_, v) = get(&app, &format!("/api/queue/next?reviewer={}", names[who])).await;
        if v.get("done").is_some() {
            done[who] = true;
            continue;
        }
        let pid = v["pair_id"].as_str().unwrap().to_owned();
        let (s, _) = post(&app, json!({"pair_id": pid, "reviewer_id": names[who], "label": "uncertain"})).await;
        assert_eq!(s, StatusCode::OK);
        seen[who].push(pid);
    }
    let expected: Vec<String> = f.queue.iter().map(|q| q.pair_id.clone()).collect();
    assert_eq!(seen[0], expected);
    assert_eq!(seen[1], expected);
    assert_eq!(log_len(&f.labels()), 20);
}

#[tokio::test]
async fn submissions_are_validated_and_idempotent() {
    let f = Fixture::new(3);
    let app = f.app();
    let pid = f.queue[0].pair_id.clone();
    let body = json!({"pair_id": pid, "reviewer_id": "alice", "label": "leaked", "timestamp": ts(5)});
    let (s, v) = post(&app, body.clone()).await;
    assert_eq!((s, v["ok"].clone(), v["duplicate"].clone()), (StatusCode::OK, json!(true), json!(false)));
    assert_eq!(log_len(&f.labels()), 1);

    let (s, v) = post(&app, body).await;
    assert_eq!((s, v["ok"].clone(), v["duplicate"].clone()), (StatusCode::OK, json!(true), json!(true)));
    assert_eq!(log_len(&f.labels()), 1);

    let (s, v) = post(&app, json!({"pair_id": pid, "reviewer_id": "alice", "label": "maybe"})).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert!(v["error"].as_str().unwrap().contains("invalid label"));

    let (s, _) = post(&app, json!({"pair_id": "s9-r9", "reviewer_id": "alice", "label": "leaked"})).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (s, _) = post(&app, json!({"pair_id": pid, "reviewer_id": " ", "label": "leaked"})).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = post(&app, json!({"pair_id": pid, "reviewer_id": "bob", "label": "leaked", "supersedes": 0})).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(log_len(&f.labels()), 1);
}

#[tokio::test]
async fn relabel_links_previous_record() {
    let f = Fixture::new(3);
    let app = f.app();
    let pid = f.queue[1].pair_id.clone();
    post(&app, json!({"pair_id": pid, "reviewer_id": "alice", "label": "leaked"})).await;
    // a retry without timestamp of the same verdict is a no-op
    let (_, v) = post(&app, json!({"pair_id": pid, "reviewer_id": "alice", "label": "leaked"})).await;
    assert_eq!(v["duplicate"], true);
    let (_, v) = post(&app, json!({"pair_id": pid, "reviewer_id": "alice", "label": "no_face"})).await;
    assert_eq!(v["record_id"], 1);
    let log = read_label_log(&f.labels()).unwrap();
    assert_eq!(log.len(), 2);
    assert_eq!(log[1].supersedes, Some(0));

    let (s, detail) = get(&app, &format!("/api/pairs/{pid}")).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(detail["labels"].as_array().unwrap().len(), 2);
    assert_eq!(detail["rank"], 2);
    assert!(detail["synth_image"].as_str().unwrap().starts_with("/images/synthetic/"));
    let (_, r) = get(&app, "/api/report").await;
    assert_eq!(
        r["review"]["tallies"],
        json!({"leaked": 0, "child": 0, "no_face": 1, "not_same_identity": 0, "uncertain": 0})
    );
    assert_eq!(r["review"]["superseded_records"], json!([0]));
    let (s, _) = get(&app, "/api/pairs/nope").await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn report_tallies_follow_the_log() {
    let f = Fixture::new(5);
    let app = f.app();
    let (_, r) = get(&app, "/api/report").await;
    assert_eq!(r["review"]["records"], 0);
    assert!(r["review"]["tallies"].as_object().unwrap().values().all(|v| v == 0));
    let labels = ["leaked", "child", "no_face", "not_same_identity", "uncertain"];
    for (q, l) in f.queue.iter().zip(labels) {
        post(&app, json!({"pair_id": q.pair_id, "reviewer_id": "a", "label": l})).await;
        post(&app, json!({"pair_id": q.pair_id, "reviewer_id": "b", "label": "leaked"})).await;
    }
    post(&app, json!({"pair_id": f.queue[4].pair_id, "reviewer_id": "a", "label": "leaked"})).await;
    let (_, r) = get(&app, "/api/report").await;
    let tallies = r["review"]["tallies"].as_object().unwrap();
    let sum: u64 = tallies.values().map(|v| v.as_u64().unwrap()).sum();
    let superseded = r["review"]["superseded_records"].as_array().unwrap().len();
    assert_eq!(sum as usize + superseded, 11);
    assert_eq!(sum, 10);
    assert_eq!(tallies["leaked"], 7);
    // required_reviewers defaults to 1, so unanimous-leaked pairs with two
    // reviewers are rank 1 and rank 5
    assert_eq!(r["review"]["consensus_leaked_count"], 2);
}

fn session() -> Vec<LabelSubmission> {
    let fix = fixture_audit(6);
    let mut out = Vec::new();
    let script: [(usize, &str, &str); 9] = [
        (0, "alice", "leaked"),
        (0, "bob", "leaked"),
        (1, "alice", "child"),
        (2, "bob", "no_face"),
        (1, "bob", "leaked"),
        (3, "alice", "uncertain"),
        (3, "alice", "not_same_identity"),
        (4, "bob", "leaked"),
        (5, "alice", "leaked"),
    ];
    for (n, (q, who, label)) in script.into_iter().enumerate() {
        out.push(LabelSubmission {
            pair_id: fix.queue[q].pair_id.clone(),
            reviewer_id: who.into(),
            label: label.into(),
            timestamp: Some(ts(n as i64 * 60)),
            supersedes: None,
        });
    }
    out
}

#[tokio::test]
async fn recorded_session_replays_to_golden_report() {
    let f = Fixture::new(6);
    let app = f.app();
    for sub in session() {
        let (s, _) = post(&app, serde_json::to_value(&sub).unwrap()).await;
        assert_eq!(s, StatusCode::OK);
    }
    let (_, bytes) = call(&app, Request::get("/api/report").body(Body::empty()).unwrap()).await;
    let served: AuditReport = serde_json::from_slice(&bytes).unwrap();

    // replay the persisted log from scratch, with no service involved
    let replayed = finalize_report(&f.report, &f.queue, &read_label_log(&f.labels()).unwrap()).unwrap();
    assert_eq!(served.to_json(), replayed.to_json());

    // a restarted service reads the same log and serves the same report
    let restarted = f.app();
    let (_, again) = call(&restarted, Request::get("/api/report").body(Body::empty()).unwrap()).await;
    assert_eq!(again, bytes);

    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/session_review.json");
    let review = serde_json::to_string_pretty(&replayed.review).unwrap() + "\n";
    if std::env::var_os("LEAKCHECK_BLESS").is_some() {
        std::fs::write(&golden, &review).unwrap();
    }
    assert_eq!(review, std::fs::read_to_string(&golden).unwrap());
    let log = std::fs::read_to_string(f.labels()).unwrap();
    let golden_log = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/session_labels.jsonl");
    if std::env::var_os("LEAKCHECK_BLESS").is_some() {
        std::fs::write(&golden_log, &log).unwrap();
    }
    assert_eq!(log, std::fs::read_to_string(&golden_log).unwrap());
}

#[tokio::test]
async fn concurrent_appends_are_serialized() {
    let f = Fixture::new(8);
    let app = f.app();
    let mut tasks = Vec::new();
    for r in 0..4 {
        for q in f.queue.clone() {
            let app = app.clone();
            tasks.push(tokio::spawn(async move {
                post(&app, json!({"pair_id": q.pair_id, "reviewer_id": format!("r{r}"), "label": "leaked"})).await
            }));
        }
    }
    for t in tasks {
        assert_eq!(t.await.unwrap().0, StatusCode::OK);
    }
    let log = read_label_log(&f.labels()).unwrap();
    assert_eq!(log.len(), 32);
    for (n, r) in log.iter().enumerate() {
        assert_eq!(r.record_id, n as u64);
        assert_eq!(r.supersedes, None);
    }
}

#[tokio::test]
async fn images_are_served_inside_roots_only() {
    let f = Fixture::new(3);
    let real = f.root.join("images/real/sub");
    std::fs::create_dir_all(&real).unwrap();
    std::fs::create_dir_all(f.root.join("images/synthetic")).unwrap();
    std::fs::write(real.join("face one.png"), b"\x89PNG").unwrap();
    std::fs::write(f.root.join("images/secret.txt"), b"secret").unwrap();
    let app = f.app();

    let (s, body) = call(&app, Request::get("/images/real/sub/face%20one.png").body(Body::empty()).unwrap()).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(body, b"\x89PNG");
    for uri in [
        "/images/real/../secret.txt",
        "/images/real/%2E%2E/secret.txt",
        "/images/real/sub/%2E%2E%2F%2E%2E%2Fsecret.txt",
        "/images/real/%2Fetc%2Fpasswd",
        "/images/unknown/sub/face%20one.png",
        "/images/real/sub",
    ] {
        let (s, body) = call(&app, Request::get(uri).body(Body::empty()).unwrap()).await;
        assert_ne!(s, StatusCode::OK, "{uri}");
        assert_ne!(body, b"secret", "{uri}");
    }
}

#[tokio::test]
async fn root_serves_ui() {
    let f = Fixture::new(3);
    let (s, body) = call(&f.app(), Request::get("/").body(Body::empty()).unwrap()).await;
    assert_eq!(s, StatusCode::OK);
    assert!(String::from_utf8(body).unwrap().contains("/api/queue/next"));

    let ui = f.root.join("ui");
    std::fs::create_dir_all(&ui).unwrap();
    std::fs::write(ui.join("index.html"), "<p>bundle</p>").unwrap();
    let app = router(f.state(), Some(ui));
    let (s, body) = call(&app, Request::get("/").body(Body::empty()).unwrap()).await;
    assert_eq!((s, body), (StatusCode::OK, b"<p>bundle</p>".to_vec()));
    let (_, v) = get(&app, "/api/queue/next?reviewer=x").await;
    assert_eq!(v["rank"], 1);
}

#[test]
fn existing_log_with_unknown_pair_is_rejected() {
    let f = Fixture::new(3);
    let mut log = LabelLog::open(&f.labels()).unwrap();
    log.append(leakcheck_core::ReviewRecord {
        record_id: 0,
        pair_id: "s99-r99".into(),
        reviewer_id: "a".into(),
        label: Label::Leaked,
        timestamp: ts(0),
        supersedes: None,
    })
    .unwrap();
    drop(log);
    let log = LabelLog::open(&f.labels()).unwrap();
    assert!(ReviewState::new(f.report.clone(), f.queue.clone(), log).is_err());
}
