use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::session::QuizSlot;
use super::{Condition, Phase};
use crate::cue_pipeline::CueSet;
use crate::ids::{ParticipantId, QuizItemId, SessionId, TextId, ThemeId};
use crate::scoring::ChildQuestion;

/// One line of a session's event stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEvent {
    /// Dense from 1 within a session.
    pub seq: u64,
    #[serde(with = "millis")]
    pub timestamp: DateTime<Utc>,
    #[serde(flatten)]
    pub body: EventBody,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum EventBody {
    Started {
        session_id: SessionId,
        participant_id: ParticipantId,
        condition: Condition,
        /// Quiz items in presentation order.
        quiz: Vec<QuizSlot>,
        utterance_offset: usize,
    },
    QuizSkipped {
        item_id: QuizItemId,
    },
    QuizAnswered {
        item_id: QuizItemId,
        answer: String,
    },
    QuizConfidence {
        confidence: u8,
    },
    ThemeChosen {
        theme_id: ThemeId,
        texts: Vec<TextId>,
    },
    ReadingFinished {
        text_id: TextId,
    },
    CueServed {
        cue: CueSet,
        utterance_id: String,
        utterance: String,
    },
    QuestionRecorded {
        question: ChildQuestion,
    },
    FluencyStarted {
        phase: Phase,
        text_id: TextId,
    },
    FluencySubmitted {
        phase: Phase,
        raw: String,
        elapsed_ms: i64,
        client_elapsed_ms: Option<i64>,
        late: bool,
    },
    Finished,
}

impl EventBody {
    pub fn kind(&self) -> &'static str {
        match self {
            EventBody::Started { .. } => "started",
            EventBody::QuizSkipped { .. } => "quiz_skipped",
            EventBody::QuizAnswered { .. } => "quiz_answered",
            EventBody::QuizConfidence { .. } => "quiz_confidence",
            EventBody::ThemeChosen { .. } => "theme_chosen",
            EventBody::ReadingFinished { .. } => "reading_finished",
            EventBody::CueServed { .. } => "cue_served",
            EventBody::QuestionRecorded { .. } => "question_recorded",
            EventBody::FluencyStarted { .. } => "fluency_started",
            EventBody::FluencySubmitted { .. } => "fluency_submitted",
            EventBody::Finished => "finished",
        }
    }
}

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("event stream is empty")]
    Empty,
    #[error("first event must be `started`, got `{0}`")]
    NotStarted(&'static str),
    #[error("sequence gap: expected {expected}, got {got}")]
    SeqGap { expected: u64, got: u64 },
    #[error("event {seq} (`{kind}`) does not fit the session state: {detail}")]
    Inconsistent { seq: u64, kind: &'static str, detail: String },
    #[error("line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
}

pub fn events_to_jsonl(events: &[SessionEvent]) -> String {
    let mut out = String::new();
    for e in events {
        out.push_str(&serde_json::to_string(e).expect("events serialize"));
        out.push('\n');
    }
    out
}

/// Parses a JSONL stream, ignoring blank lines.
pub fn events_from_jsonl(src: &str) -> Result<Vec<SessionEvent>, ReplayError> {
    src.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|source| ReplayError::Json { line: i + 1, source }))
        .collect()
}

/// RFC 3339 with millisecond precision.
mod millis {
    use chrono::{DateTime, SecondsFormat, Utc};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(t: &DateTime<Utc>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&t.to_rfc3339_opts(SecondsFormat::Millis, true))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DateTime<Utc>, D::Error> {
        let s = String::deserialize(d)?;
        DateTime::parse_from_rfc3339(&s).map(|t| t.with_timezone(&Utc)).map_err(serde::de::Error::custom)
    }
}
