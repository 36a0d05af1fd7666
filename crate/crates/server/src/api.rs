//! HTTP routes. Child routes take a child token, `/review/*`, `/annotations`
//! and `/report` take a reviewer token. Errors are JSON
//! `{"reason": <code>, "message": <text>}`; dialogue errors use the dialogue
//! error codes with status 409, malformed bodies get 400.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, Utc};
use kidsask_core::analytics::{export_report, participant_metrics, AnalyticsError, MetricsContext, ReportMode};
use kidsask_core::cue_pipeline::{CueAnnotations, ReviewDecision, ReviewError, Verdict};
use kidsask_core::dialogue::{
    Condition, DialogueContext, DialogueError, FluencyOutcome, NextCueTurn, Phase, Session, FLUENCY_WINDOW_MS,
};
use kidsask_core::dialogue::quiz_plan;
use kidsask_core::ids::{AnnotatorId, CueId, ParticipantId, QuizItemId, SessionId, TextId, ThemeId};
use kidsask_core::scoring::{validate_grid, AnnotationRecord, GridError};
use kidsask_core::store::StoreError;
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::state::{AppState, SessionSlot};
use crate::views::{CaptureView, QuizView, StateView, TextView, TurnView};

#[derive(Debug, Clone)]
pub struct ApiError {
    pub status: StatusCode,
    pub reason: String,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, reason: &str, message: impl Into<String>) -> Self {
        Self { status, reason: reason.to_string(), message: message.into() }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "malformed_body", message)
    }

    pub fn not_found(reason: &str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, reason, message)
    }

    pub fn conflict(reason: &str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::CONFLICT, reason, message)
    }

    fn internal(e: impl std::fmt::Display) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string())
    }

    fn body(&self) -> Value {
        json!({ "reason": self.reason, "message": self.message })
    }
}

impl From<DialogueError> for ApiError {
    fn from(e: DialogueError) -> Self {
        Self::conflict(e.code(), e.to_string())
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::UnknownCue(_) => Self::not_found("unknown_cue", e.to_string()),
            StoreError::Review(r) => r.into(),
            other => Self::internal(other),
        }
    }
}

impl From<ReviewError> for ApiError {
    fn from(e: ReviewError) -> Self {
        let (status, reason) = match &e {
            ReviewError::AlreadyReviewed(_) => (StatusCode::CONFLICT, "already_reviewed"),
            ReviewError::FlaggedWithoutOverride(_) => (StatusCode::CONFLICT, "flagged_without_override"),
            ReviewError::NotScreened(_) => (StatusCode::CONFLICT, "not_screened"),
            ReviewError::OutOfRange { .. } => (StatusCode::UNPROCESSABLE_ENTITY, "grid_out_of_range"),
            ReviewError::MissingAnnotations(_) => (StatusCode::UNPROCESSABLE_ENTITY, "missing_annotations"),
            ReviewError::EmptyReason => (StatusCode::UNPROCESSABLE_ENTITY, "empty_reason"),
        };
        Self::new(status, reason, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body())).into_response()
    }
}

type ApiResult = Result<Response, ApiError>;

fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(e.to_string()))
}

fn reply(status: u16, v: Value) -> Response {
    (StatusCode::from_u16(status).expect("valid status"), Json(v)).into_response()
}

// ---- auth ----

fn bearer(headers: &HeaderMap) -> Option<&str> {
    headers.get(header::AUTHORIZATION)?.to_str().ok()?.strip_prefix("Bearer ").map(str::trim)
}

fn require_child(state: &AppState, headers: &HeaderMap) -> Result<(), ApiError> {
    let auth = &state.opts.auth;
    if auth.child_tokens.is_empty() {
        return Ok(());
    }
    match bearer(headers) {
        Some(t) if auth.child_tokens.iter().any(|c| c == t) => Ok(()),
        Some(t) if auth.reviewers.contains_key(t) => {
            Err(ApiError::new(StatusCode::FORBIDDEN, "forbidden", "reviewer tokens cannot act as a child"))
        }
        _ => Err(ApiError::new(StatusCode::UNAUTHORIZED, "unauthorized", "child token required")),
    }
}

fn require_reviewer(state: &AppState, headers: &HeaderMap) -> Result<AnnotatorId, ApiError> {
    match bearer(headers) {
        Some(t) => match state.opts.auth.reviewers.get(t) {
            Some(annotator) => Ok(AnnotatorId::new(annotator.clone())),
            None if state.opts.auth.child_tokens.iter().any(|c| c == t) => {
                Err(ApiError::new(StatusCode::FORBIDDEN, "forbidden", "reviewer role required"))
            }
            None => Err(ApiError::new(StatusCode::UNAUTHORIZED, "unauthorized", "unknown token")),
        },
        None => Err(ApiError::new(StatusCode::UNAUTHORIZED, "unauthorized", "reviewer token required")),
    }
}

// ---- session plumbing ----

type OpResult = Result<(u16, Value), ApiError>;

/// Runs one write against a session under its lock. New events are appended
/// to the store before the in-memory state is replaced. `seq`, when given,
/// is the seq the write's event will get; a repeat of an applied seq returns
/// the original response.
async fn write_session<F>(state: &AppState, id: &SessionId, seq: Option<u64>, op: F) -> ApiResult
where
    F: FnOnce(&mut Session, &DialogueContext<'_>, DateTime<Utc>) -> OpResult,
{
    let slot = state.slot(id)?;
    let mut slot = slot.lock().await;
    let before = slot.session.event_log.len() as u64;
    if let Some(seq) = seq {
        if seq <= before {
            return match slot.responses.get(&seq) {
                Some((status, v)) => Ok(reply(*status, v.clone())),
                None => Err(ApiError::conflict("seq_already_applied", format!("event {seq} was already applied"))),
            };
        }
        if seq != before + 1 {
            return Err(ApiError::conflict("seq_mismatch", format!("next seq is {}, got {seq}", before + 1)));
        }
    }
    let mut work = slot.session.clone();
    let result = {
        let content = state.content.read().expect("content lock");
        let ctx = DialogueContext { content: &*content, scorer: &state.opts.scorer, utterances: &state.opts.utterances };
        op(&mut work, &ctx, state.now())
    };
    let fresh = &work.event_log[before as usize..];
    for e in fresh {
        state.store.append(id, e).map_err(ApiError::internal)?;
    }
    let response = match result {
        Ok((status, mut v)) => {
            v["seq"] = json!(work.event_log.len());
            (status, v)
        }
        Err(e) => (e.status.as_u16(), e.body()),
    };
    if let Some(last) = fresh.last() {
        slot.responses.insert(last.seq, response.clone());
    }
    let SessionSlot { session, .. } = &mut *slot;
    *session = work;
    Ok(reply(response.0, response.1))
}

fn text_view(ctx: &DialogueContext<'_>, id: &TextId) -> Option<TextView> {
    ctx.content.corpus().text(id).map(TextView::new)
}

// ---- child routes ----

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateSession {
    participant_id: ParticipantId,
    #[serde(default)]
    condition: Option<Condition>,
}

async fn create_session(State(state): State<Arc<AppState>>, headers: HeaderMap, body: Bytes) -> ApiResult {
    require_child(&state, &headers)?;
    let req: CreateSession = parse(&body)?;
    if req.participant_id.as_str().trim().is_empty() {
        return Err(ApiError::bad_request("participant_id is empty"));
    }
    let condition = match (state.opts.assignments.get(&req.participant_id), req.condition) {
        (Some(a), Some(b)) if *a != b => {
            return Err(ApiError::conflict("condition_conflict", format!("participant is assigned to {a}")))
        }
        (Some(a), _) => *a,
        (None, Some(b)) => b,
        (None, None) => {
            return Err(ApiError::conflict(
                "participant_not_assigned",
                format!("participant `{}` has no condition; run `assign` or pass one", req.participant_id),
            ))
        }
    };
    let id = state.next_session_id();
    let plan = {
        let content = state.content.read().expect("content lock");
        quiz_plan(content.corpus(), state.opts.quiz_shuffle_seed)
    };
    let n: usize = id.as_str()[1..].parse().unwrap_or(0);
    let session = Session::start(id.clone(), req.participant_id, condition, plan, n, state.now());
    for e in &session.event_log {
        state.store.append(&id, e)?;
    }
    let v = json!({
        "session_id": id,
        "condition": session.condition,
        "stage": session.stage,
        "seq": session.event_log.len(),
    });
    let slot = SessionSlot { session, responses: Default::default() };
    state.sessions.lock().expect("session map lock").insert(id, Arc::new(tokio::sync::Mutex::new(slot)));
    Ok(reply(201, v))
}

async fn get_state(State(state): State<Arc<AppState>>, headers: HeaderMap, Path(id): Path<String>) -> ApiResult {
    require_child(&state, &headers)?;
    let slot = state.slot(&SessionId::new(id))?;
    let slot = slot.lock().await;
    let content = state.content.read().expect("content lock");
    let view = StateView::new(&slot.session, content.corpus(), state.now());
    Ok(Json(view).into_response())
}

#[derive(Deserialize)]
#[serde(rename_all = "snake_case")]
enum QuizAction {
    Skip,
    Answer,
    Confidence,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct QuizRequest {
    #[serde(default)]
    item_id: Option<QuizItemId>,
    action: QuizAction,
    #[serde(default)]
    answer: Option<String>,
    #[serde(default)]
    confidence: Option<i64>,
    #[serde(default)]
    seq: Option<u64>,
}

fn quiz_reply(s: &Session, ctx: &DialogueContext<'_>) -> OpResult {
    Ok((200, json!({ "stage": s.stage, "quiz": QuizView::new(s, ctx.content.corpus()) })))
}

async fn quiz(State(state): State<Arc<AppState>>, headers: HeaderMap, Path(id): Path<String>, body: Bytes) -> ApiResult {
    require_child(&state, &headers)?;
    let req: QuizRequest = parse(&body)?;
    let item = || req.item_id.clone().ok_or_else(|| ApiError::bad_request("item_id is required"));
    match req.action {
        QuizAction::Skip | QuizAction::Answer if req.confidence.is_some() => {
            return Err(ApiError::bad_request("confidence is sent with action `confidence`"))
        }
        QuizAction::Answer if req.answer.as_deref().is_none_or(|a| a.trim().is_empty()) => {
            return Err(ApiError::bad_request("answer is required"))
        }
        QuizAction::Confidence if req.confidence.is_none() => return Err(ApiError::bad_request("confidence is required")),
        _ => {}
    }
    let item_id = match req.action {
        QuizAction::Confidence => None,
        _ => Some(item()?),
    };
    write_session(&state, &SessionId::new(id), req.seq, move |s, ctx, now| {
        match req.action {
            QuizAction::Skip => s.quiz_skip(item_id.as_ref().expect("checked"), now)?,
            QuizAction::Answer => s.quiz_answer(item_id.as_ref().expect("checked"), req.answer.as_deref().unwrap_or(""), now)?,
            QuizAction::Confidence => s.submit_confidence(req.confidence.expect("checked"), now)?,
        };
        quiz_reply(s, ctx)
    })
    .await
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ThemeRequest {
    theme_id: ThemeId,
    #[serde(default)]
    seq: Option<u64>,
}

async fn theme(State(state): State<Arc<AppState>>, headers: HeaderMap, Path(id): Path<String>, body: Bytes) -> ApiResult {
    require_child(&state, &headers)?;
    let req: ThemeRequest = parse(&body)?;
    write_session(&state, &SessionId::new(id), req.seq, move |s, ctx, now| {
        s.choose_theme(&req.theme_id, ctx, now)?;
        let first = s.current_text_id().and_then(|t| text_view(ctx, t));
        Ok((200, json!({ "stage": s.stage, "chosen_theme": req.theme_id, "text": first })))
    })
    .await
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ReadingRequest {
    text_id: TextId,
    #[serde(default)]
    seq: Option<u64>,
}

async fn finished_reading(
    State(state): State<Arc<AppState>>,
    headers: HeaderMap,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult {
    require_child(&state, &headers)?;
    let req: ReadingRequest = parse(&body)?;
    write_session(&state, &SessionId::new(id), req.seq, move |s, _, now| {
        s.finished_reading(&req.text_id, now)?;
        Ok((200, json!({ "stage": s.stage, "text_id": req.text_id, "reading_confirmed": true })))
    })
    .await
}

#[derive(Deserialize)]
struct SeqQuery {
    seq: Option<u64>,
}

async fn cue_turn(
    State(state): State<Arc<AppState>>,
    headers: HeaderMap,
    Path(id): Path<String>,
    Query(q): Query<SeqQuery>,
) -> ApiResult {
    require_child(&state, &headers)?;
    write_session(&state, &SessionId::new(id), q.seq, |s, ctx, now| {
        let v = match s.next_cue_turn(ctx, now)? {
            NextCueTurn::Turn(t) => {
                let mut v = serde_json::to_value(TurnView::new(&t)).expect("view serializes");
                v["kind"] = json!("turn");
                v
            }
            NextCueTurn::TextComplete { next_text } => {
                json!({ "kind": "text_complete", "next_text": text_view(ctx, &next_text) })
            }
            NextCueTurn::TrainingComplete => json!({ "kind": "training_complete" }),
        };
        Ok((200, v))
    })
    .await
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct QuestionRequest {
    raw: String,
    #[serde(default)]
    seq: Option<u64>,
}

async fn question(State(state): State<Arc<AppState>>, headers: HeaderMap, Path(id): Path<String>, body: Bytes) -> ApiResult {
    require_child(&state, &headers)?;
    let req: QuestionRequest = parse(&body)?;
    write_session(&state, &SessionId::new(id), req.seq, move |s, ctx, now| {
        let ack = s.record_question(&req.raw, ctx, now)?;
        Ok((200, json!({ "message": ack.message, "next": ack.next })))
    })
    .await
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FluencyRequest {
    phase: Phase,
    #[serde(default)]
    text_id: Option<TextId>,
    #[serde(default)]
    raw: Option<String>,
    #[serde(default)]
    client_elapsed_ms: Option<i64>,
    #[serde(default)]
    seq: Option<u64>,
}

/// `{phase, text_id}` opens a capture; `{phase, raw, client_elapsed_ms}`
/// submits one question to it.
async fn fluency(State(state): State<Arc<AppState>>, headers: HeaderMap, Path(id): Path<String>, body: Bytes) -> ApiResult {
    require_child(&state, &headers)?;
    let req: FluencyRequest = parse(&body)?;
    match (&req.text_id, &req.raw) {
        (Some(_), Some(_)) => return Err(ApiError::bad_request("send either text_id (start) or raw (submit)")),
        (None, None) => return Err(ApiError::bad_request("text_id or raw is required")),
        _ => {}
    }
    write_session(&state, &SessionId::new(id), req.seq, move |s, ctx, now| {
        if let Some(text_id) = &req.text_id {
            s.fluency_start(req.phase, text_id, ctx, now)?;
            return Ok((
                200,
                json!({ "phase": req.phase, "text": text_view(ctx, text_id), "window_ms": FLUENCY_WINDOW_MS }),
            ));
        }
        let raw = req.raw.as_deref().unwrap_or_default();
        match s.fluency_submit(req.phase, raw, req.client_elapsed_ms, now)? {
            FluencyOutcome::Counted { elapsed_ms } => {
                let capture = s.capture(req.phase).map(|c| CaptureView::new(c, now));
                Ok((200, json!({ "status": "counted", "elapsed_ms": elapsed_ms, "capture": capture })))
            }
            FluencyOutcome::Late { elapsed_ms } => Err(ApiError::conflict(
                "fluency_window_closed",
                format!("the {FLUENCY_WINDOW_MS} ms window closed {} ms ago", elapsed_ms - FLUENCY_WINDOW_MS),
            )),
        }
    })
    .await
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct FinishRequest {
    #[serde(default)]
    seq: Option<u64>,
}

async fn finish(State(state): State<Arc<AppState>>, headers: HeaderMap, Path(id): Path<String>, body: Bytes) -> ApiResult {
    require_child(&state, &headers)?;
    let req: FinishRequest = if body.is_empty() { FinishRequest::default() } else { parse(&body)? };
    write_session(&state, &SessionId::new(id), req.seq, |s, _, now| {
        s.finish(now)?;
        Ok((200, json!({ "stage": s.stage })))
    })
    .await
}

// ---- reviewer routes ----

#[derive(Deserialize)]
struct CueQuery {
    status: Option<String>,
}

async fn list_cues(State(state): State<Arc<AppState>>, headers: HeaderMap, Query(q): Query<CueQuery>) -> ApiResult {
    require_reviewer(&state, &headers)?;
    let content = state.content.read().expect("content lock");
    let cues: Vec<_> = match q.status.as_deref() {
        None => content.all_cues().iter().collect(),
        Some(s @ ("pending" | "approved" | "rejected")) => content.cues_with_status(s),
        Some(other) => return Err(ApiError::bad_request(format!("unknown status `{other}`"))),
    };
    Ok(Json(json!({ "revision": content.revision, "cues": cues })).into_response())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GridValues {
    relatedness: u8,
    divergence_level: u8,
    offensiveness: u8,
}

#[derive(Deserialize)]
struct ReviewRequest {
    #[serde(flatten)]
    verdict: Verdict,
    #[serde(default)]
    annotations: Option<GridValues>,
    #[serde(default)]
    override_screen: bool,
}

async fn review_cue(
    State(state): State<Arc<AppState>>,
    headers: HeaderMap,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult {
    let annotator = require_reviewer(&state, &headers)?;
    let req: ReviewRequest = parse(&body)?;
    let decision = ReviewDecision {
        verdict: req.verdict,
        annotations: req.annotations.map(|g| CueAnnotations::new(g.relatedness, g.divergence_level, g.offensiveness)),
        annotator,
        override_screen: req.override_screen,
    };
    let mut content = state.content.write().expect("content lock");
    let mut next = content.clone();
    let cue = next.review(&CueId::new(id), decision, state.now())?.clone();
    if let Some(path) = &state.content_path {
        next.save(path)?;
    }
    *content = next;
    Ok(Json(json!({ "revision": content.revision, "cue": cue })).into_response())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AnnotationBatch {
    records: Vec<AnnotationRecord>,
}

async fn annotations(State(state): State<Arc<AppState>>, headers: HeaderMap, body: Bytes) -> ApiResult {
    let annotator = require_reviewer(&state, &headers)?;
    let batch: AnnotationBatch = parse(&body)?;
    if batch.records.is_empty() {
        return Err(ApiError::bad_request("records is empty"));
    }
    let mut ledger = state.ledger.lock().expect("ledger lock");
    let mut next = ledger.clone();
    for (i, r) in batch.records.iter().enumerate() {
        if r.annotator_id != annotator {
            return Err(ApiError::new(
                StatusCode::FORBIDDEN,
                "annotator_mismatch",
                format!("records[{i}] is signed by `{}`, token belongs to `{annotator}`", r.annotator_id),
            ));
        }
        validate_grid(r).map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_grid", format!("records[{i}]: {e}")))?;
        next.insert(r.clone()).map_err(|e| match e {
            GridError::Duplicate { .. } => ApiError::conflict("duplicate_annotation", format!("records[{i}]: {e}")),
            other => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_grid", format!("records[{i}]: {other}")),
        })?;
    }
    for r in &batch.records {
        state.store.append_annotation(r)?;
    }
    *ledger = next;
    Ok(Json(json!({ "stored": batch.records.len(), "total": ledger.records().len() })).into_response())
}

#[derive(Deserialize)]
struct ReportQuery {
    mode: Option<ReportMode>,
}

async fn report(State(state): State<Arc<AppState>>, headers: HeaderMap, Query(q): Query<ReportQuery>) -> ApiResult {
    require_reviewer(&state, &headers)?;
    let mode = q.mode.unwrap_or(ReportMode::StudyGrade);
    let sessions = state.all_sessions().await;
    let content = state.content.read().expect("content lock");
    let ledger = state.ledger.lock().expect("ledger lock").clone();
    let ctx = MetricsContext {
        corpus: content.corpus(),
        scorer: &state.opts.scorer,
        ledger: &ledger,
        surveys: &state.opts.surveys,
        mode,
    };
    let mut rows = Vec::new();
    for s in sessions.iter().filter(|s| s.is_complete()) {
        rows.push(participant_metrics(s, &ctx).map_err(|e| match e {
            AnalyticsError::UnresolvedLabels(ids) => ApiError {
                status: StatusCode::CONFLICT,
                reason: "unresolved_labels".into(),
                message: format!("{} question(s) need a human divergence label: {}", ids.len(), ids.join(", ")),
            },
            other => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "report_failed", other.to_string()),
        })?);
    }
    let csv = export_report(&rows, mode);
    Ok(([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], csv).into_response())
}

/// Every scored question (training and fluency) with its machine labels.
/// Reviewer-only; this is where human labelling starts.
async fn review_questions(State(state): State<Arc<AppState>>, headers: HeaderMap) -> ApiResult {
    require_reviewer(&state, &headers)?;
    let sessions = state.all_sessions().await;
    let content = state.content.read().expect("content lock");
    let mut out = Vec::new();
    for s in &sessions {
        out.extend(s.all_questions().cloned());
        for phase in [Phase::Pre, Phase::Post] {
            if let Some(c) = s.capture(phase) {
                if let Ok(qs) = kidsask_core::analytics::score_capture(s, c, content.corpus(), &state.opts.scorer) {
                    out.extend(qs);
                }
            }
        }
    }
    Ok(Json(json!({ "questions": out })).into_response())
}

async fn health(State(state): State<Arc<AppState>>) -> Json<Value> {
    let content = state.content.read().expect("content lock");
    Json(json!({
        "status": "ok",
        "revision": content.revision,
        "approved_cues": content.approved_count(),
    }))
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/state", get(get_state))
        .route("/sessions/{id}/quiz", post(quiz))
        .route("/sessions/{id}/theme", post(theme))
        .route("/sessions/{id}/finished-reading", post(finished_reading))
        .route("/sessions/{id}/cue-turn", get(cue_turn))
        .route("/sessions/{id}/question", post(question))
        .route("/sessions/{id}/fluency", post(fluency))
        .route("/sessions/{id}/finish", post(finish))
        .route("/review/cues", get(list_cues))
        .route("/review/cues/{id}", post(review_cue))
        .route("/review/questions", get(review_questions))
        .route("/annotations", post(annotations))
        .route("/report", get(report))
        .with_state(state)
}
