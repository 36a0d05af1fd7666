#![allow(dead_code)]

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use chrono::{DateTime, Duration, TimeZone, Utc};
use kidsask_core::cue_pipeline::{screen_offensive, Blocklist, CueContent, CueSet, GenerationConfig, Provenance};
use kidsask_core::samples;
use kidsask_core::store::{ContentDatabase, EventStore, MemoryEventStore};
use kidsask_server::api::router;
use kidsask_server::config::AuthConfig;
use kidsask_server::state::{AppState, ServiceOptions};
use serde_json::{json, Value};
use tower::ServiceExt;

pub const CHILD: &str = "kid-token";
pub const REVIEWER: &str = "rev-token";
pub const ANNOTATOR: &str = "ann-1";

pub fn t0() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2024, 5, 6, 9, 0, 0).unwrap()
}

/// Sample corpus with demo cues plus one pending generated cue and one
/// pending cue the blocklist flags.
pub fn content() -> ContentDatabase {
    let mut db = ContentDatabase::new(samples::sample_corpus());
    db.import_reviewed(samples::demo_cues(db.corpus(), t0())).unwrap();
    let blocklist = Blocklist::new("en", ["stupid"]);
    let generated = |id: &str, content: CueContent| {
        let mut c = CueSet::pending(
            id,
            "big-bang".into(),
            content.clone(),
            Provenance::Generated {
                config: GenerationConfig::default(),
                prompt_id: "open-test".into(),
                raw_output: kidsask_core::cue_pipeline::format_cue(&content),
            },
        );
        c.screen = Some(screen_offensive(&c, &blocklist, "en"));
        c
    };
    db.publish(vec![
        generated("gen-ok", CueContent::open("Why", "universe", "temperature")),
        generated("gen-flagged", CueContent::open("Why", "stupid", "universe")),
    ])
    .unwrap();
    db
}

#[derive(Clone)]
pub struct TestClock(pub Arc<Mutex<DateTime<Utc>>>);

impl TestClock {
    pub fn new() -> Self {
        Self(Arc::new(Mutex::new(t0())))
    }

    pub fn advance(&self, d: Duration) {
        *self.0.lock().unwrap() += d;
    }
}

pub fn auth() -> AuthConfig {
    AuthConfig { child_tokens: vec![CHILD.into()], reviewers: BTreeMap::from([(REVIEWER.into(), ANNOTATOR.into())]) }
}

pub fn state_with(store: Arc<dyn EventStore>, clock: &TestClock, db: ContentDatabase) -> Arc<AppState> {
    let c = clock.0.clone();
    let opts = ServiceOptions {
        auth: auth(),
        assignments: BTreeMap::from([("p-assigned".into(), kidsask_core::dialogue::Condition::AutoIncentive)]),
        clock: Arc::new(move || *c.lock().unwrap()),
        ..ServiceOptions::default()
    };
    AppState::new(db, None, store, opts).unwrap()
}

pub fn memory_state(clock: &TestClock) -> Arc<AppState> {
    state_with(Arc::new(MemoryEventStore::new()), clock, content())
}

/// Talks to the API either in-process or over TCP.
#[derive(Clone)]
pub enum Client {
    InProcess(Router),
    Http { base: String, http: reqwest::Client },
}

#[derive(Debug, Clone)]
pub struct Reply {
    pub status: StatusCode,
    pub body: Value,
}

impl Reply {
    pub fn ok(&self) -> &Value {
        assert!(self.status.is_success(), "unexpected {}: {}", self.status, self.body);
        &self.body
    }

    pub fn reason(&self) -> &str {
        self.body["reason"].as_str().unwrap_or("")
    }
}

impl Client {
    pub fn in_process(state: Arc<AppState>) -> Self {
        Client::InProcess(router(state))
    }

    pub async fn raw(&self, method: &str, uri: &str, token: Option<&str>, body: Option<String>) -> (StatusCode, String) {
        match self {
            Client::InProcess(app) => {
                let mut req = Request::builder().method(method).uri(uri);
                if let Some(t) = token {
                    req = req.header("authorization", format!("Bearer {t}"));
                }
                if body.is_some() {
                    req = req.header("content-type", "application/json");
                }
                let req = req.body(body.map(Body::from).unwrap_or_else(Body::empty)).unwrap();
                let resp = app.clone().oneshot(req).await.unwrap();
                let status = resp.status();
                let bytes = axum::body::to_bytes(resp.into_body(), usize::MAX).await.unwrap();
                (status, String::from_utf8(bytes.to_vec()).unwrap())
            }
            Client::Http { base, http } => {
                let method = reqwest::Method::from_bytes(method.as_bytes()).unwrap();
                let mut req = http.request(method, format!("{base}{uri}"));
                if let Some(t) = token {
                    req = req.bearer_auth(t);
                }
                if let Some(b) = body {
                    req = req.header("content-type", "application/json").body(b);
                }
                let resp = req.send().await.unwrap();
                let status = StatusCode::from_u16(resp.status().as_u16()).unwrap();
                (status, resp.text().await.unwrap())
            }
        }
    }

    pub async fn call(&self, method: &str, uri: &str, token: Option<&str>, body: Option<Value>) -> Reply {
        let (status, text) = self.raw(method, uri, token, body.map(|b| b.to_string())).await;
        let body = if text.is_empty() { Value::Null } else { serde_json::from_str(&text).unwrap_or(Value::String(text)) };
        Reply { status, body }
    }

    pub async fn child(&self, method: &str, uri: &str, body: Option<Value>) -> Reply {
        self.call(method, uri, Some(CHILD), body).await
    }
}

/// Keys that would leak scoring, review or model data to a child.
pub const FORBIDDEN_KEYS: &[&str] = &[
    "acceptance",
    "accepted",
    "reject_reason",
    "divergence",
    "divergent",
    "label",
    "needs_human",
    "confidence_score",
    "quality",
    "high_level",
    "construction",
    "qword_use",
    "used_cues",
    "annotations",
    "relatedness",
    "divergence_level",
    "offensiveness",
    "offensiveness_label",
    "screen",
    "review_status",
    "provenance",
    "raw_output",
    "prompt_id",
    "reference_answer",
    "normalized",
    "source",
];

pub fn keys(v: &Value, out: &mut Vec<String>) {
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                out.push(k.clone());
                keys(x, out);
            }
        }
        Value::Array(a) => a.iter().for_each(|x| keys(x, out)),
        _ => {}
    }
}

/// Scoring fields or label words found in a child-facing response.
pub fn child_leaks(v: &Value) -> Vec<String> {
    let mut ks = Vec::new();
    keys(v, &mut ks);
    let mut out: Vec<String> = ks.into_iter().filter(|k| FORBIDDEN_KEYS.contains(&k.as_str())).map(|k| format!("key `{k}`")).collect();
    let text = v.to_string().to_lowercase();
    for word in ["convergent", "divergent", "unrelated", "not_a_question", "duplicate"] {
        if text.contains(word) {
            out.push(format!("word `{word}`"));
        }
    }
    out
}

pub fn assert_child_safe(endpoint: &str, v: &Value) {
    let leaks = child_leaks(v);
    assert!(leaks.is_empty(), "{endpoint}: child response carries {leaks:?}: {v}");
}

/// Every child response seen during a flow, by endpoint label.
#[derive(Default)]
pub struct Transcript(pub Vec<(String, Reply)>);

impl Transcript {
    pub fn push(&mut self, label: &str, r: &Reply) {
        self.0.push((label.to_string(), r.clone()));
    }
}

/// Drives one child through quiz, theme, three texts and the post fluency
/// test. Returns the session id.
pub async fn full_flow(client: &Client, participant: &str, condition: &str, clock: Option<&TestClock>, log: &mut Transcript) -> String {
    let r = client.child("POST", "/sessions", Some(json!({ "participant_id": participant, "condition": condition }))).await;
    log.push("POST /sessions", &r);
    let sid = r.ok()["session_id"].as_str().unwrap().to_string();
    let base = format!("/sessions/{sid}");

    let mut answered = false;
    loop {
        let st = client.child("GET", &format!("{base}/state"), None).await;
        log.push("GET state", &st);
        let quiz = st.ok()["quiz"].clone();
        if quiz.is_null() || quiz["next"] == "theme_choice" {
            break;
        }
        let item = quiz["item_id"].as_str().unwrap().to_string();
        if !answered {
            let r = client.child("POST", &format!("{base}/quiz"), Some(json!({ "item_id": item, "action": "answer", "answer": "A big explosion" }))).await;
            log.push("POST quiz answer", &r);
            assert_eq!(r.ok()["quiz"]["next"], "confidence");
            let r = client.child("POST", &format!("{base}/quiz"), Some(json!({ "action": "confidence", "confidence": 4 }))).await;
            log.push("POST quiz confidence", &r);
            r.ok();
            answered = true;
        } else {
            let r = client.child("POST", &format!("{base}/quiz"), Some(json!({ "item_id": item, "action": "skip" }))).await;
            log.push("POST quiz skip", &r);
            r.ok();
        }
    }

    let r = client.child("POST", &format!("{base}/fluency"), Some(json!({ "phase": "pre", "text_id": "microbes" }))).await;
    log.push("POST fluency start", &r);
    r.ok();
    let r = client
        .child("POST", &format!("{base}/fluency"), Some(json!({ "phase": "pre", "raw": "Why are microbes so small?", "client_elapsed_ms": 900 })))
        .await;
    log.push("POST fluency submit", &r);
    assert_eq!(r.ok()["status"], "counted");

    let st = client.child("GET", &format!("{base}/state"), None).await;
    log.push("GET state", &st);
    assert!(st.ok()["themes"].as_array().unwrap().iter().any(|t| t["id"] == "space"));
    let r = client.child("POST", &format!("{base}/theme"), Some(json!({ "theme_id": "space" }))).await;
    log.push("POST theme", &r);
    let mut text_id = r.ok()["text"]["id"].as_str().unwrap().to_string();

    let corpus = samples::sample_corpus();
    for text_index in 0..3 {
        let r = client.child("POST", &format!("{base}/finished-reading"), Some(json!({ "text_id": text_id }))).await;
        log.push("POST finished-reading", &r);
        r.ok();
        let questions = samples::scripted_questions(corpus.text(&text_id.as_str().into()).unwrap());
        // one rejected attempt on the first turn of the first text
        if text_index == 0 {
            let t = client.child("GET", &format!("{base}/cue-turn"), None).await;
            log.push("GET cue-turn", &t);
            let r = client.child("POST", &format!("{base}/question"), Some(json!({ "raw": "What are dinosaurs?" }))).await;
            log.push("POST question (rejected)", &r);
            assert_eq!(r.ok()["next"], "question");
        }
        for (i, q) in questions.iter().enumerate() {
            let t = client.child("GET", &format!("{base}/cue-turn"), None).await;
            log.push("GET cue-turn", &t);
            let turn = t.ok();
            assert_eq!(turn["kind"], "turn");
            assert_eq!(turn["turn_index"], i);
            let expected_shape = if condition == "auto_open" { "keywords" } else { "answer_sentence" };
            assert!(!turn["cue"][expected_shape].is_null(), "{turn}");
            let r = client.child("POST", &format!("{base}/question"), Some(json!({ "raw": q }))).await;
            log.push("POST question", &r);
            let next = r.ok()["next"].as_str().unwrap().to_string();
            let want = match (text_index, i) {
                (2, 5) => "training_complete",
                (_, 5) => "read_next_text",
                _ => "next_cue",
            };
            assert_eq!(next, want, "text {text_index} question {i}: {q}");
        }
        let t = client.child("GET", &format!("{base}/cue-turn"), None).await;
        log.push("GET cue-turn", &t);
        let body = t.ok();
        if text_index < 2 {
            assert_eq!(body["kind"], "text_complete");
            text_id = body["next_text"]["id"].as_str().unwrap().to_string();
        } else {
            assert_eq!(body["kind"], "training_complete");
        }
    }

    let r = client.child("POST", &format!("{base}/fluency"), Some(json!({ "phase": "post", "text_id": "light-bulb" }))).await;
    log.push("POST fluency start", &r);
    r.ok();
    for q in ["Why does a filament glow with electricity?", "What if light bulbs never existed?"] {
        let r = client.child("POST", &format!("{base}/fluency"), Some(json!({ "phase": "post", "raw": q, "client_elapsed_ms": 1000 }))).await;
        log.push("POST fluency submit", &r);
        r.ok();
    }
    if let Some(clock) = clock {
        clock.advance(Duration::seconds(121));
        let r = client.child("POST", &format!("{base}/fluency"), Some(json!({ "phase": "post", "raw": "How do bulbs work?" }))).await;
        log.push("POST fluency late", &r);
        assert_eq!(r.status, StatusCode::CONFLICT);
        assert_eq!(r.reason(), "fluency_window_closed");
    }
    let r = client.child("POST", &format!("{base}/finish"), None).await;
    log.push("POST finish", &r);
    assert_eq!(r.ok()["stage"], "done");
    sid
}
