//! Persistence: the content database (corpus plus published cues) and the
//! append-only event stores for sessions and annotations.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use serde::Serialize;
use serde_json::Value;
use thiserror::Error;

use crate::corpus::{Corpus, CorpusError};
use crate::cue_pipeline::{apply_review, CueSet, ReviewDecision, ReviewError, ReviewStatus};
use crate::dialogue::{Condition, ContentView, SessionEvent};
use crate::ids::{CueId, SessionId, TextId};
use crate::scoring::AnnotationRecord;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("malformed content database: {0}")]
    Malformed(String),
    #[error("cue `{0}` already exists")]
    DuplicateCue(CueId),
    #[error("cue `{0}` not found")]
    UnknownCue(CueId),
    #[error("cue `{cue}` points at unknown text `{text}`")]
    DanglingText { cue: CueId, text: TextId },
    #[error("cue `{0}` is invalid: {1}")]
    InvalidCue(CueId, String),
    #[error("only pending cues can be published; `{0}` is {1}")]
    NotPending(CueId, &'static str),
    #[error(transparent)]
    Review(#[from] ReviewError),
    #[error("session id `{0}` is not usable as a file name")]
    BadSessionId(String),
    #[error("event for `{session}` has seq {got}, expected {expected}")]
    SeqGap { session: String, expected: u64, got: u64 },
    #[error("{path}: line {line}: {message}")]
    Corrupt { path: String, line: usize, message: String },
    #[error("{0}: {1}")]
    Io(String, #[source] io::Error),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |e| StoreError::Io(path.display().to_string(), e)
}

/// Corpus plus every published cue. `revision` increments on each mutation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContentDatabase {
    pub revision: u64,
    #[serde(flatten)]
    corpus: Corpus,
    cues: Vec<CueSet>,
}

impl ContentDatabase {
    pub fn new(corpus: Corpus) -> Self {
        Self { revision: 0, corpus, cues: Vec::new() }
    }

    pub fn corpus(&self) -> &Corpus {
        &self.corpus
    }

    /// Every cue regardless of status, in publication order.
    pub fn all_cues(&self) -> &[CueSet] {
        &self.cues
    }

    pub fn cue(&self, id: &CueId) -> Option<&CueSet> {
        self.cues.iter().find(|c| &c.id == id)
    }

    /// Cues whose status label (`pending`, `approved`, `rejected`) matches.
    pub fn cues_with_status(&self, status: &str) -> Vec<&CueSet> {
        self.cues.iter().filter(|c| c.review_status.label() == status).collect()
    }

    pub fn approved_count(&self) -> usize {
        self.cues.iter().filter(|c| c.is_approved()).count()
    }

    fn check_cue(&self, c: &CueSet) -> Result<(), StoreError> {
        if self.corpus.text(&c.text_id).is_none() {
            return Err(StoreError::DanglingText { cue: c.id.clone(), text: c.text_id.clone() });
        }
        c.content.validate().map_err(|m| StoreError::InvalidCue(c.id.clone(), m))
    }

    /// Appends pending cues. Nothing is written if any cue is rejected.
    pub fn publish(&mut self, cues: Vec<CueSet>) -> Result<usize, StoreError> {
        let mut ids: HashSet<&CueId> = self.cues.iter().map(|c| &c.id).collect();
        for c in &cues {
            if !matches!(c.review_status, ReviewStatus::Pending) {
                return Err(StoreError::NotPending(c.id.clone(), c.review_status.label()));
            }
            if !ids.insert(&c.id) {
                return Err(StoreError::DuplicateCue(c.id.clone()));
            }
            self.check_cue(c)?;
        }
        let n = cues.len();
        self.cues.extend(cues);
        if n > 0 {
            self.revision += 1;
        }
        Ok(n)
    }

    /// Inserts already-reviewed cues as-is (hand-authored sets, imports).
    pub fn import_reviewed(&mut self, cues: Vec<CueSet>) -> Result<usize, StoreError> {
        let mut ids: HashSet<&CueId> = self.cues.iter().map(|c| &c.id).collect();
        for c in &cues {
            if !ids.insert(&c.id) {
                return Err(StoreError::DuplicateCue(c.id.clone()));
            }
            self.check_cue(c)?;
        }
        let n = cues.len();
        self.cues.extend(cues);
        if n > 0 {
            self.revision += 1;
        }
        Ok(n)
    }

    /// Applies a review decision to a pending cue.
    pub fn review(&mut self, id: &CueId, decision: ReviewDecision, at: DateTime<Utc>) -> Result<&CueSet, StoreError> {
        let i = self.cues.iter().position(|c| &c.id == id).ok_or_else(|| StoreError::UnknownCue(id.clone()))?;
        self.cues[i] = apply_review(&self.cues[i], decision, at)?;
        self.revision += 1;
        Ok(&self.cues[i])
    }

    /// Approved cue count per (text, condition), zeros included.
    pub fn coverage(&self) -> BTreeMap<(TextId, Condition), usize> {
        let mut out = BTreeMap::new();
        for t in &self.corpus.texts {
            for c in Condition::ALL {
                let n = self.cues.iter().filter(|q| q.text_id == t.id && c.serves(q)).count();
                out.insert((t.id.clone(), c), n);
            }
        }
        out
    }

    pub fn from_json(src: &[u8]) -> Result<Self, StoreError> {
        let corpus = Corpus::ingest(src)?;
        let doc: Value = serde_json::from_slice(src).map_err(|e| StoreError::Malformed(e.to_string()))?;
        let revision = match doc.get("revision") {
            None => 0,
            Some(v) => v.as_u64().ok_or_else(|| StoreError::Malformed("revision must be a non-negative integer".into()))?,
        };
        let cues: Vec<CueSet> = match doc.get("cues") {
            None => Vec::new(),
            Some(v) => serde_json::from_value(v.clone()).map_err(|e| StoreError::Malformed(format!("cues: {e}")))?,
        };
        let mut db = Self::new(corpus);
        db.import_reviewed(cues)?;
        db.revision = revision;
        Ok(db)
    }

    pub fn to_json(&self) -> Vec<u8> {
        serde_json::to_vec_pretty(self).expect("content database serializes")
    }

    pub fn load(path: &Path) -> Result<Self, StoreError> {
        Self::from_json(&fs::read(path).map_err(io_err(path))?)
    }

    /// Writes through a sibling temp file and a rename.
    pub fn save(&self, path: &Path) -> Result<(), StoreError> {
        let tmp = path.with_extension("json.tmp");
        fs::write(&tmp, self.to_json()).map_err(io_err(&tmp))?;
        fs::rename(&tmp, path).map_err(io_err(path))
    }
}

impl ContentView for ContentDatabase {
    fn corpus(&self) -> &Corpus {
        &self.corpus
    }

    fn approved_cues(&self, text: &TextId) -> Vec<&CueSet> {
        self.cues.iter().filter(|c| &c.text_id == text && c.is_approved()).collect()
    }
}

/// Append-only storage for session events and annotation records.
pub trait EventStore: Send + Sync {
    /// Appends one event. `seq` must be exactly one past the stored tail.
    fn append(&self, session: &SessionId, event: &SessionEvent) -> Result<(), StoreError>;
    fn load(&self, session: &SessionId) -> Result<Vec<SessionEvent>, StoreError>;
    fn sessions(&self) -> Result<Vec<SessionId>, StoreError>;
    fn append_annotation(&self, record: &AnnotationRecord) -> Result<(), StoreError>;
    fn annotations(&self) -> Result<Vec<AnnotationRecord>, StoreError>;
}

fn check_seq(session: &SessionId, tail: u64, event: &SessionEvent) -> Result<(), StoreError> {
    if event.seq != tail + 1 {
        return Err(StoreError::SeqGap { session: session.to_string(), expected: tail + 1, got: event.seq });
    }
    Ok(())
}

#[derive(Debug, Default)]
pub struct MemoryEventStore {
    sessions: Mutex<BTreeMap<SessionId, Vec<SessionEvent>>>,
    annotations: Mutex<Vec<AnnotationRecord>>,
}

impl MemoryEventStore {
    pub fn new() -> Self {
        Self::default()
    }
}

impl EventStore for MemoryEventStore {
    fn append(&self, session: &SessionId, event: &SessionEvent) -> Result<(), StoreError> {
        let mut map = self.sessions.lock().expect("store lock");
        let log = map.entry(session.clone()).or_default();
        check_seq(session, log.len() as u64, event)?;
        log.push(event.clone());
        Ok(())
    }

    fn load(&self, session: &SessionId) -> Result<Vec<SessionEvent>, StoreError> {
        Ok(self.sessions.lock().expect("store lock").get(session).cloned().unwrap_or_default())
    }

    fn sessions(&self) -> Result<Vec<SessionId>, StoreError> {
        Ok(self.sessions.lock().expect("store lock").keys().cloned().collect())
    }

    fn append_annotation(&self, record: &AnnotationRecord) -> Result<(), StoreError> {
        self.annotations.lock().expect("store lock").push(record.clone());
        Ok(())
    }

    fn annotations(&self) -> Result<Vec<AnnotationRecord>, StoreError> {
        Ok(self.annotations.lock().expect("store lock").clone())
    }
}

/// One JSONL file per session under `sessions/`, plus `annotations.jsonl`.
/// Each append is flushed to disk before it returns.
#[derive(Debug)]
pub struct FileEventStore {
    root: PathBuf,
    tails: Mutex<HashMap<SessionId, u64>>,
    annotation_lock: Mutex<()>,
}

fn valid_session_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 128 && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, StoreError> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(StoreError::Io(path.display().to_string(), e)),
    };
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| StoreError::Corrupt {
            path: path.display().to_string(),
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

fn append_line(path: &Path, line: &str) -> Result<(), StoreError> {
    let mut f = OpenOptions::new().create(true).append(true).open(path).map_err(io_err(path))?;
    f.write_all(line.as_bytes()).and_then(|_| f.write_all(b"\n")).map_err(io_err(path))?;
    f.sync_data().map_err(io_err(path))
}

impl FileEventStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        let dir = root.join("sessions");
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        Ok(Self { root, tails: Mutex::new(HashMap::new()), annotation_lock: Mutex::new(()) })
    }

    fn session_path(&self, session: &SessionId) -> Result<PathBuf, StoreError> {
        if !valid_session_id(session.as_str()) {
            return Err(StoreError::BadSessionId(session.to_string()));
        }
        Ok(self.root.join("sessions").join(format!("{session}.jsonl")))
    }
}

impl EventStore for FileEventStore {
    fn append(&self, session: &SessionId, event: &SessionEvent) -> Result<(), StoreError> {
        let path = self.session_path(session)?;
        let mut tails = self.tails.lock().expect("store lock");
        let tail = match tails.get(session) {
            Some(t) => *t,
            None => read_jsonl::<SessionEvent>(&path)?.last().map_or(0, |e| e.seq),
        };
        check_seq(session, tail, event)?;
        append_line(&path, &serde_json::to_string(event).expect("events serialize"))?;
        tails.insert(session.clone(), event.seq);
        Ok(())
    }

    fn load(&self, session: &SessionId) -> Result<Vec<SessionEvent>, StoreError> {
        read_jsonl(&self.session_path(session)?)
    }

    fn sessions(&self) -> Result<Vec<SessionId>, StoreError> {
        let dir = self.root.join("sessions");
        let mut out = Vec::new();
        for entry in fs::read_dir(&dir).map_err(io_err(&dir))? {
            let path = entry.map_err(io_err(&dir))?.path();
            if path.extension().is_some_and(|e| e == "jsonl") {
                if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                    out.push(SessionId::new(stem));
                }
            }
        }
        out.sort();
        Ok(out)
    }

    fn append_annotation(&self, record: &AnnotationRecord) -> Result<(), StoreError> {
        let _guard = self.annotation_lock.lock().expect("store lock");
        append_line(&self.root.join("annotations.jsonl"), &serde_json::to_string(record).expect("records serialize"))
    }

    fn annotations(&self) -> Result<Vec<AnnotationRecord>, StoreError> {
        read_jsonl(&self.root.join("annotations.jsonl"))
    }
}
