mod common;

use std::sync::Arc;

use axum::http::StatusCode;
use common::*;
use kidsask_core::dialogue::{Session, Stage};
use kidsask_core::ids::SessionId;
use kidsask_core::store::{ContentDatabase, EventStore, FileEventStore, MemoryEventStore};
use kidsask_server::state::check_servable;
use serde_json::json;

#[tokio::test]
async fn full_session_over_the_api_never_shows_scoring_to_the_child() {
    let clock = TestClock::new();
    let state = memory_state(&clock);
    let client = Client::in_process(state.clone());
    for condition in ["hand_incentive", "auto_incentive", "auto_open"] {
        let mut log = Transcript::default();
        let sid = full_flow(&client, &format!("p-{condition}"), condition, Some(&clock), &mut log).await;
        for (endpoint, reply) in &log.0 {
            assert_child_safe(endpoint, &reply.body);
        }
        let s = state.session_snapshot(&SessionId::new(sid.clone())).await.unwrap();
        assert_eq!(s.stage, Stage::Done);
        assert_eq!(s.accepted_questions().count(), 18);
        // every served cue was approved and fits the condition
        for t in s.training_log.iter().flat_map(|p| &p.turns) {
            assert!(t.cue.is_approved());
            assert!(s.condition.serves(&t.cue));
        }
        // one event per state-changing request, replay reproduces the state
        let stored = state.store.load(&SessionId::new(sid)).unwrap();
        assert_eq!(stored, s.event_log);
        assert_eq!(Session::replay(&stored).unwrap(), s);
    }
}

#[tokio::test]
async fn every_state_changing_request_appends_exactly_one_event() {
    let clock = TestClock::new();
    let state = memory_state(&clock);
    let client = Client::in_process(state.clone());
    let r = client.child("POST", "/sessions", Some(json!({ "participant_id": "p1", "condition": "auto_open" }))).await;
    let sid = r.ok()["session_id"].as_str().unwrap().to_string();
    let id = SessionId::new(sid.clone());
    let count = || state.store.load(&id).unwrap().len();
    assert_eq!(count(), 1);
    let st = client.child("GET", &format!("/sessions/{sid}/state"), None).await;
    let item = st.ok()["quiz"]["item_id"].as_str().unwrap().to_string();
    assert_eq!(count(), 1, "reads do not write");
    client.child("POST", &format!("/sessions/{sid}/quiz"), Some(json!({ "item_id": item, "action": "answer", "answer": "x" }))).await.ok();
    assert_eq!(count(), 2);
    client.child("POST", &format!("/sessions/{sid}/quiz"), Some(json!({ "action": "confidence", "confidence": 2 }))).await.ok();
    assert_eq!(count(), 3);
    // a rejected request writes nothing
    let r = client.child("POST", &format!("/sessions/{sid}/quiz"), Some(json!({ "action": "confidence", "confidence": 2 }))).await;
    assert_eq!(r.status, StatusCode::CONFLICT);
    assert_eq!(r.reason(), "no_pending_item");
    assert_eq!(count(), 3);
}

#[tokio::test]
async fn dialogue_errors_map_to_409_with_reason_codes() {
    let clock = TestClock::new();
    let client = Client::in_process(memory_state(&clock));
    let r = client.child("POST", "/sessions", Some(json!({ "participant_id": "p1", "condition": "hand_incentive" }))).await;
    let sid = r.ok()["session_id"].as_str().unwrap().to_string();
    let base = format!("/sessions/{sid}");
    let cases = [
        ("POST", "quiz", json!({ "action": "confidence", "confidence": 3 }), "no_pending_item"),
        ("POST", "quiz", json!({ "item_id": "nope", "action": "skip" }), "unknown_quiz_item"),
        ("POST", "theme", json!({ "theme_id": "space" }), "wrong_stage"),
        ("POST", "finished-reading", json!({ "text_id": "big-bang" }), "wrong_stage"),
        ("POST", "question", json!({ "raw": "Why?" }), "wrong_stage"),
        ("POST", "fluency", json!({ "phase": "post", "text_id": "big-bang" }), "wrong_phase"),
        ("POST", "fluency", json!({ "phase": "pre", "raw": "Why?" }), "fluency_not_started"),
        ("POST", "fluency", json!({ "phase": "pre", "text_id": "nope" }), "unknown_text"),
        ("POST", "finish", json!({}), "wrong_stage"),
    ];
    for (method, path, body, reason) in cases {
        let r = client.child(method, &format!("{base}/{path}"), Some(body.clone())).await;
        assert_eq!(r.status, StatusCode::CONFLICT, "{path} {body}");
        assert_eq!(r.reason(), reason, "{path} {body}");
        assert_child_safe(path, &r.body);
    }
    let r = client.child("GET", &format!("{base}/cue-turn"), None).await;
    assert_eq!((r.status, r.reason()), (StatusCode::CONFLICT, "wrong_stage"));

    let st = client.child("GET", &format!("{base}/state"), None).await;
    let item = st.ok()["quiz"]["item_id"].as_str().unwrap().to_string();
    client.child("POST", &format!("{base}/quiz"), Some(json!({ "item_id": item, "action": "answer", "answer": "x" }))).await.ok();
    let r = client.child("POST", &format!("{base}/quiz"), Some(json!({ "action": "confidence", "confidence": 9 }))).await;
    assert_eq!(r.reason(), "confidence_out_of_range");
    let r = client.child("POST", &format!("{base}/quiz"), Some(json!({ "item_id": item, "action": "skip" }))).await;
    assert_eq!(r.reason(), "awaiting_confidence");
}

#[tokio::test]
async fn malformed_bodies_are_400() {
    let clock = TestClock::new();
    let client = Client::in_process(memory_state(&clock));
    let r = client.child("POST", "/sessions", Some(json!({ "participant_id": "p1", "condition": "auto_open" }))).await;
    let sid = r.ok()["session_id"].as_str().unwrap().to_string();
    let cases: Vec<(String, String)> = vec![
        ("/sessions".into(), "{not json".into()),
        ("/sessions".into(), json!({ "participant": "p1" }).to_string()),
        ("/sessions".into(), json!({ "participant_id": "p1", "condition": "group9" }).to_string()),
        (format!("/sessions/{sid}/quiz"), json!({ "item_id": "x", "action": "dance" }).to_string()),
        (format!("/sessions/{sid}/quiz"), json!({ "item_id": "x", "action": "answer" }).to_string()),
        (format!("/sessions/{sid}/quiz"), json!({ "action": "skip" }).to_string()),
        (format!("/sessions/{sid}/question"), json!({ "raw": 5 }).to_string()),
        (format!("/sessions/{sid}/fluency"), json!({ "phase": "pre" }).to_string()),
        (format!("/sessions/{sid}/fluency"), json!({ "phase": "pre", "text_id": "x", "raw": "y" }).to_string()),
        (format!("/sessions/{sid}/theme"), "".into()),
    ];
    for (uri, body) in cases {
        let (status, text) = client.raw("POST", &uri, Some(CHILD), Some(body.clone())).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{uri} {body}: {text}");
        assert!(text.contains("malformed_body"), "{text}");
    }
    let r = client.child("GET", "/sessions/s99999/state", None).await;
    assert_eq!((r.status, r.reason()), (StatusCode::NOT_FOUND, "unknown_session"));
}

#[tokio::test]
async fn conditions_come_from_the_assignment_table() {
    let clock = TestClock::new();
    let client = Client::in_process(memory_state(&clock));
    let r = client.child("POST", "/sessions", Some(json!({ "participant_id": "p-assigned" }))).await;
    assert_eq!(r.status, StatusCode::CREATED);
    assert_eq!(r.body["condition"], "auto_incentive");
    assert_eq!(r.body["stage"], "quiz");
    let r = client.child("POST", "/sessions", Some(json!({ "participant_id": "p-assigned", "condition": "auto_open" }))).await;
    assert_eq!(r.reason(), "condition_conflict");
    let r = client.child("POST", "/sessions", Some(json!({ "participant_id": "stranger" }))).await;
    assert_eq!(r.reason(), "participant_not_assigned");
}

#[tokio::test]
async fn roles_are_separated() {
    let clock = TestClock::new();
    let client = Client::in_process(memory_state(&clock));
    let body = || Some(json!({ "participant_id": "p1", "condition": "auto_open" }));
    assert_eq!(client.call("POST", "/sessions", None, body()).await.status, StatusCode::UNAUTHORIZED);
    assert_eq!(client.call("POST", "/sessions", Some("bogus"), body()).await.status, StatusCode::UNAUTHORIZED);
    assert_eq!(client.call("POST", "/sessions", Some(REVIEWER), body()).await.status, StatusCode::FORBIDDEN);
    for (method, uri) in [("GET", "/review/cues?status=pending"), ("GET", "/report"), ("GET", "/review/questions")] {
        assert_eq!(client.call(method, uri, Some(CHILD), None).await.status, StatusCode::FORBIDDEN, "{uri}");
        assert_eq!(client.call(method, uri, None, None).await.status, StatusCode::UNAUTHORIZED, "{uri}");
    }
    let r = client.call("POST", "/review/cues/gen-ok", Some(CHILD), Some(json!({ "verdict": "rejected", "reason": "x" }))).await;
    assert_eq!(r.status, StatusCode::FORBIDDEN);
    let r = client.call("POST", "/annotations", Some(CHILD), Some(json!({ "records": [] }))).await;
    assert_eq!(r.status, StatusCode::FORBIDDEN);
    assert_eq!(client.call("GET", "/health", None, None).await.body["status"], "ok");
}

#[tokio::test]
async fn reviewer_console_flow() {
    let clock = TestClock::new();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("content.json");
    let state = {
        let c = clock.0.clone();
        let opts = kidsask_server::state::ServiceOptions {
            auth: auth(),
            clock: Arc::new(move || *c.lock().unwrap()),
            ..Default::default()
        };
        kidsask_server::state::AppState::new(content(), Some(path.clone()), Arc::new(MemoryEventStore::new()), opts).unwrap()
    };
    let client = Client::in_process(state.clone());
    let r = client.call("GET", "/review/cues?status=pending", Some(REVIEWER), None).await;
    let ids: Vec<&str> = r.ok()["cues"].as_array().unwrap().iter().map(|c| c["id"].as_str().unwrap()).collect();
    assert_eq!(ids, ["gen-ok", "gen-flagged"]);
    let rev0 = r.body["revision"].as_u64().unwrap();

    let grid = json!({ "relatedness": 4, "divergence_level": 3, "offensiveness": 5 });
    // flagged cue needs an explicit override
    let r = client
        .call("POST", "/review/cues/gen-flagged", Some(REVIEWER), Some(json!({ "verdict": "approved", "annotations": grid })))
        .await;
    assert_eq!((r.status, r.reason()), (StatusCode::CONFLICT, "flagged_without_override"));
    let r = client.call("POST", "/review/cues/gen-ok", Some(REVIEWER), Some(json!({ "verdict": "approved" }))).await;
    assert_eq!(r.reason(), "missing_annotations");
    let r = client
        .call("POST", "/review/cues/gen-ok", Some(REVIEWER), Some(json!({ "verdict": "approved", "annotations": grid })))
        .await;
    assert_eq!(r.ok()["cue"]["review_status"]["status"], "approved");
    assert_eq!(r.body["cue"]["review_status"]["annotator"], ANNOTATOR);
    assert_eq!(r.body["revision"].as_u64().unwrap(), rev0 + 1);
    // approved cues are immutable
    let r = client
        .call("POST", "/review/cues/gen-ok", Some(REVIEWER), Some(json!({ "verdict": "rejected", "reason": "changed my mind" })))
        .await;
    assert_eq!(r.reason(), "already_reviewed");
    let r = client
        .call("POST", "/review/cues/gen-flagged", Some(REVIEWER), Some(json!({ "verdict": "rejected", "reason": "offensive" })))
        .await;
    assert_eq!(r.ok()["cue"]["review_status"]["status"], "rejected");
    let r = client.call("POST", "/review/cues/nope", Some(REVIEWER), Some(json!({ "verdict": "rejected", "reason": "x" }))).await;
    assert_eq!(r.status, StatusCode::NOT_FOUND);
    assert_eq!(client.call("GET", "/review/cues?status=pending", Some(REVIEWER), None).await.body["cues"], json!([]));

    // persisted
    let saved = ContentDatabase::load(&path).unwrap();
    assert_eq!(saved.revision, rev0 + 2);
    assert!(saved.cue(&"gen-ok".into()).unwrap().is_approved());
}

#[tokio::test]
async fn annotations_feed_the_study_grade_report() {
    let clock = TestClock::new();
    let state = memory_state(&clock);
    let client = Client::in_process(state.clone());
    let mut log = Transcript::default();
    full_flow(&client, "p-open", "auto_open", None, &mut log).await;

    let r = client.call("GET", "/report?mode=machine_only", Some(REVIEWER), None).await;
    assert_eq!(r.status, StatusCode::OK);
    let csv = r.body.as_str().unwrap().to_string();
    assert!(csv.starts_with("# MACHINE-ONLY"));
    assert!(csv.contains("participant,p-open,auto_open"));

    // collect machine labels that still need a human
    let r = client.call("GET", "/review/questions", Some(REVIEWER), None).await;
    let pending: Vec<(String, String)> = r.ok()["questions"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|q| q["divergence"]["needs_human"] == true)
        .map(|q| (q["id"].as_str().unwrap().to_string(), q["divergence"]["label"].as_str().unwrap().to_string()))
        .collect();
    let study = client.call("GET", "/report", Some(REVIEWER), None).await;
    if pending.is_empty() {
        assert_eq!(study.status, StatusCode::OK);
    } else {
        assert_eq!((study.status, study.reason()), (StatusCode::CONFLICT, "unresolved_labels"));
        let records: Vec<_> = pending
            .iter()
            .map(|(id, label)| {
                json!({
                    "annotator_id": ANNOTATOR,
                    "target": { "type": "question", "id": id },
                    "grid": { "kind": "divergence_label", "value": label },
                    "timestamp": "2024-05-06T10:00:00Z",
                })
            })
            .collect();
        let r = client.call("POST", "/annotations", Some(REVIEWER), Some(json!({ "records": records.clone() }))).await;
        assert_eq!(r.ok()["stored"], records.len());
        let r = client.call("POST", "/annotations", Some(REVIEWER), Some(json!({ "records": records }))).await;
        assert_eq!(r.reason(), "duplicate_annotation");
        let study = client.call("GET", "/report", Some(REVIEWER), None).await;
        assert_eq!(study.status, StatusCode::OK, "{}", study.body);
        assert!(!study.body.as_str().unwrap().starts_with('#'));
    }

    let bad = json!({ "records": [{
        "annotator_id": "someone-else",
        "target": { "type": "question", "id": "x" },
        "grid": { "kind": "relatedness", "value": 3 },
        "timestamp": "2024-05-06T10:00:00Z",
    }]});
    assert_eq!(client.call("POST", "/annotations", Some(REVIEWER), Some(bad)).await.reason(), "annotator_mismatch");
    let out_of_range = json!({ "records": [{
        "annotator_id": ANNOTATOR,
        "target": { "type": "cue", "id": "big-bang-3-1" },
        "grid": { "kind": "relatedness", "value": 9 },
        "timestamp": "2024-05-06T10:00:00Z",
    }]});
    assert_eq!(client.call("POST", "/annotations", Some(REVIEWER), Some(out_of_range)).await.reason(), "invalid_grid");
}

#[tokio::test]
async fn retried_writes_are_idempotent_by_seq() {
    let clock = TestClock::new();
    let state = memory_state(&clock);
    let client = Client::in_process(state.clone());
    let r = client.child("POST", "/sessions", Some(json!({ "participant_id": "p1", "condition": "auto_open" }))).await;
    let sid = r.ok()["session_id"].as_str().unwrap().to_string();
    assert_eq!(r.body["seq"], 1);
    let st = client.child("GET", &format!("/sessions/{sid}/state"), None).await;
    let item = st.ok()["quiz"]["item_id"].as_str().unwrap().to_string();
    let body = json!({ "item_id": item, "action": "skip", "seq": 2 });
    let first = client.child("POST", &format!("/sessions/{sid}/quiz"), Some(body.clone())).await;
    let again = client.child("POST", &format!("/sessions/{sid}/quiz"), Some(body)).await;
    assert_eq!(first.status, StatusCode::OK);
    assert_eq!(first.body, again.body);
    assert_eq!(state.store.load(&SessionId::new(sid.clone())).unwrap().len(), 2);
    let r = client.child("POST", &format!("/sessions/{sid}/quiz"), Some(json!({ "item_id": "x", "action": "skip", "seq": 7 }))).await;
    assert_eq!(r.reason(), "seq_mismatch");
    let r = client.child("POST", &format!("/sessions/{sid}/quiz"), Some(json!({ "item_id": "x", "action": "skip", "seq": 1 }))).await;
    assert_eq!(r.reason(), "seq_already_applied");
}

#[tokio::test]
async fn restart_replays_in_flight_sessions_to_the_same_stage() {
    let clock = TestClock::new();
    let dir = tempfile::tempdir().unwrap();
    let store: Arc<dyn EventStore> = Arc::new(FileEventStore::open(dir.path()).unwrap());
    let state = state_with(store, &clock, content());
    let client = Client::in_process(state.clone());

    // one session paused mid-training, one waiting for a quiz confidence
    let r = client.child("POST", "/sessions", Some(json!({ "participant_id": "a", "condition": "auto_open" }))).await;
    let a = r.ok()["session_id"].as_str().unwrap().to_string();
    loop {
        let st = client.child("GET", &format!("/sessions/{a}/state"), None).await;
        let Some(item) = st.body["quiz"]["item_id"].as_str().map(str::to_string) else { break };
        client.child("POST", &format!("/sessions/{a}/quiz"), Some(json!({ "item_id": item, "action": "skip" }))).await.ok();
    }
    client.child("POST", &format!("/sessions/{a}/theme"), Some(json!({ "theme_id": "space" }))).await.ok();
    client.child("POST", &format!("/sessions/{a}/finished-reading"), Some(json!({ "text_id": "big-bang" }))).await.ok();
    let turn = client.child("GET", &format!("/sessions/{a}/cue-turn"), None).await.ok().clone();

    let r = client.child("POST", "/sessions", Some(json!({ "participant_id": "b", "condition": "hand_incentive" }))).await;
    let b = r.ok()["session_id"].as_str().unwrap().to_string();
    let st = client.child("GET", &format!("/sessions/{b}/state"), None).await;
    let item = st.body["quiz"]["item_id"].as_str().unwrap().to_string();
    client.child("POST", &format!("/sessions/{b}/quiz"), Some(json!({ "item_id": item, "action": "answer", "answer": "no idea" }))).await.ok();

    let before_a = state.session_snapshot(&SessionId::new(a.clone())).await.unwrap();
    let before_b = state.session_snapshot(&SessionId::new(b.clone())).await.unwrap();
    drop(client);
    drop(state);

    // "crash": a fresh process over the same files
    let store: Arc<dyn EventStore> = Arc::new(FileEventStore::open(dir.path()).unwrap());
    let state = state_with(store, &clock, content());
    assert_eq!(state.session_snapshot(&SessionId::new(a.clone())).await.unwrap(), before_a);
    assert_eq!(state.session_snapshot(&SessionId::new(b.clone())).await.unwrap(), before_b);
    let client = Client::in_process(state.clone());
    assert_eq!(client.child("GET", &format!("/sessions/{a}/cue-turn"), None).await.ok()["cue"], turn["cue"]);
    let r = client.child("POST", &format!("/sessions/{a}/question"), Some(json!({ "raw": "Why is the universe so hot at the beginning?" }))).await;
    r.ok();
    let r = client.child("POST", &format!("/sessions/{b}/quiz"), Some(json!({ "action": "confidence", "confidence": 1 }))).await;
    r.ok();
    // new sessions do not reuse ids
    let r = client.child("POST", "/sessions", Some(json!({ "participant_id": "c", "condition": "auto_open" }))).await;
    let c = r.ok()["session_id"].as_str().unwrap().to_string();
    assert!(c != a && c != b);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_sessions_over_tcp_do_not_cross_talk() {
    let clock = TestClock::new();
    let state = memory_state(&clock);
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let base = format!("http://{}", listener.local_addr().unwrap());
    let app = kidsask_server::api::router(state.clone());
    let server = tokio::spawn(async move { axum::serve(listener, app).await });
    let client = Client::Http { base, http: reqwest::Client::new() };
    assert_eq!(client.call("GET", "/health", None, None).await.ok()["status"], "ok");

    let runs = ["hand_incentive", "auto_incentive", "auto_open", "auto_open"].into_iter().enumerate().map(|(i, cond)| {
        let client = client.clone();
        tokio::spawn(async move {
            let mut log = Transcript::default();
            let sid = full_flow(&client, &format!("kid-{i}"), cond, None, &mut log).await;
            (sid, format!("kid-{i}"), cond)
        })
    });
    let mut results = Vec::new();
    for h in runs.collect::<Vec<_>>() {
        results.push(h.await.unwrap());
    }
    for (sid, participant, cond) in results {
        let events = state.store.load(&SessionId::new(sid.clone())).unwrap();
        let s = Session::replay(&events).unwrap();
        assert_eq!(s.session_id.as_str(), sid);
        assert_eq!(s.participant_id.as_str(), participant);
        assert_eq!(s.condition.as_str(), cond);
        assert_eq!(s.accepted_questions().count(), 18);
        assert!(s.all_questions().all(|q| q.session_id.as_str() == sid));
        assert_eq!(s.stage, Stage::Done);
    }
    server.abort();
}

#[test]
fn serve_refuses_content_without_approved_cues() {
    let db = ContentDatabase::new(kidsask_core::samples::sample_corpus());
    let err = check_servable(&db).unwrap_err().to_string();
    assert!(err.contains("no approved cue sets"), "{err}");
    assert!(check_servable(&content()).is_ok());
}
