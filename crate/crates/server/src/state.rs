use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use anyhow::{bail, Context};
use chrono::{DateTime, Utc};
use kidsask_core::analytics::SurveyResponse;
use kidsask_core::dialogue::{Condition, Session, UtterancePool};
use kidsask_core::ids::{ParticipantId, SessionId};
use kidsask_core::scoring::{AnnotationLedger, Scorer};
use kidsask_core::store::{ContentDatabase, EventStore};
use serde_json::Value;

use crate::api::ApiError;
use crate::config::AuthConfig;

pub type Clock = Arc<dyn Fn() -> DateTime<Utc> + Send + Sync>;

pub fn system_clock() -> Clock {
    Arc::new(Utc::now)
}

/// A live session plus the responses already given, keyed by the seq of the
/// event each one produced, so a retried write can be answered again.
pub struct SessionSlot {
    pub session: Session,
    pub responses: BTreeMap<u64, (u16, Value)>,
}

/// Everything the service needs besides content and storage.
pub struct ServiceOptions {
    pub scorer: Scorer,
    pub utterances: UtterancePool,
    pub auth: AuthConfig,
    pub assignments: BTreeMap<ParticipantId, Condition>,
    pub surveys: Vec<SurveyResponse>,
    pub quiz_shuffle_seed: Option<u64>,
    pub clock: Clock,
}

impl Default for ServiceOptions {
    fn default() -> Self {
        Self {
            scorer: Scorer::default(),
            utterances: UtterancePool::default(),
            auth: AuthConfig::default(),
            assignments: BTreeMap::new(),
            surveys: Vec::new(),
            quiz_shuffle_seed: None,
            clock: system_clock(),
        }
    }
}

pub struct AppState {
    pub content: RwLock<ContentDatabase>,
    pub content_path: Option<PathBuf>,
    pub store: Arc<dyn EventStore>,
    pub sessions: Mutex<HashMap<SessionId, Arc<tokio::sync::Mutex<SessionSlot>>>>,
    pub ledger: Mutex<AnnotationLedger>,
    pub opts: ServiceOptions,
    next_session: AtomicU64,
}

/// Refuses content with nothing a child could be shown.
pub fn check_servable(db: &ContentDatabase) -> anyhow::Result<()> {
    if db.approved_count() == 0 {
        bail!("content database has no approved cue sets; run `gen-cues` and `review approve` first");
    }
    let gaps = db.coverage().into_iter().filter(|(_, n)| *n == 0).count();
    if gaps > 0 {
        tracing::warn!(gaps, "some (text, condition) pairs have no approved cue set; their themes cannot be chosen");
    }
    Ok(())
}

impl AppState {
    /// Builds the state and replays every stored session and annotation.
    pub fn new(
        content: ContentDatabase,
        content_path: Option<PathBuf>,
        store: Arc<dyn EventStore>,
        opts: ServiceOptions,
    ) -> anyhow::Result<Arc<Self>> {
        opts.utterances.validate().map_err(anyhow::Error::msg)?;
        let mut sessions = HashMap::new();
        let mut max_n = 0;
        for id in store.sessions()? {
            let events = store.load(&id)?;
            let session = Session::replay(&events).with_context(|| format!("replaying session {id}"))?;
            if let Some(n) = id.as_str().strip_prefix('s').and_then(|n| n.parse::<u64>().ok()) {
                max_n = max_n.max(n);
            }
            sessions.insert(id, Arc::new(tokio::sync::Mutex::new(SessionSlot { session, responses: BTreeMap::new() })));
        }
        let mut ledger = AnnotationLedger::new();
        for record in store.annotations()? {
            ledger.insert(record).context("replaying annotations")?;
        }
        Ok(Arc::new(Self {
            content: RwLock::new(content),
            content_path,
            store,
            sessions: Mutex::new(sessions),
            ledger: Mutex::new(ledger),
            opts,
            next_session: AtomicU64::new(max_n + 1),
        }))
    }

    pub fn now(&self) -> DateTime<Utc> {
        (self.opts.clock)()
    }

    pub fn next_session_id(&self) -> SessionId {
        SessionId::new(format!("s{:05}", self.next_session.fetch_add(1, Ordering::SeqCst)))
    }

    pub fn slot(&self, id: &SessionId) -> Result<Arc<tokio::sync::Mutex<SessionSlot>>, ApiError> {
        self.sessions
            .lock()
            .expect("session map lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found("unknown_session", format!("no session `{id}`")))
    }

    /// A copy of one session's current state.
    pub async fn session_snapshot(&self, id: &SessionId) -> Option<Session> {
        let slot = self.sessions.lock().expect("session map lock").get(id).cloned()?;
        let guard = slot.lock().await;
        Some(guard.session.clone())
    }

    pub async fn all_sessions(&self) -> Vec<Session> {
        let slots: Vec<_> = self.sessions.lock().expect("session map lock").values().cloned().collect();
        let mut out = Vec::with_capacity(slots.len());
        for slot in slots {
            out.push(slot.lock().await.session.clone());
        }
        out.sort_by(|a, b| a.session_id.cmp(&b.session_id));
        out
    }
}
