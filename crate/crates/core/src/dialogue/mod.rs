//! Session state machine for one participant: quiz, theme choice, the cue
//! training loop and the timed fluency captures.
//!
//! Sessions are event-sourced. Every operation validates against the current
//! state, appends one [`SessionEvent`] and folds it in with [`Session::apply`].
//! Replaying the log reproduces the session exactly; no content lookups or
//! random draws happen during replay.

mod assign;
mod event;
mod session;
mod utterance;

pub use assign::{assign_conditions, balance_objective, AssignmentError, ParticipantProfile, PROFILE_MEASURES};
pub use event::{events_from_jsonl, events_to_jsonl, EventBody, ReplayError, SessionEvent};
pub use session::{
    quiz_plan, CueTurn, CueTurnLog, FluencyCapture, FluencyOutcome, FluencySubmission, NextCueTurn, NextStep, QuestionAck,
    QuizEntry, QuizNext, QuizOutcome, QuizSlot, Session, TextProgress,
};
pub use utterance::{feedback_hits, neutral_acks, UtterancePool, UtteranceTemplate, FEEDBACK_DENYLIST};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Corpus;
use crate::cue_pipeline::{CueMode, CueSet};
use crate::ids::{TextId, ThemeId};
use crate::scoring::Scorer;

/// Texts per training session and accepted questions per text.
pub const TEXTS_PER_SESSION: usize = 3;
pub const QUESTIONS_PER_TEXT: usize = 6;
/// Inclusive fluency window.
pub const FLUENCY_WINDOW_MS: i64 = 120_000;

pub const CONFIDENCE_LABELS: [&str; 5] =
    ["Super not confident", "Not confident", "A little confident", "Confident", "Super confident"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    /// Group 1: hand-written incentive cues.
    HandIncentive,
    /// Group 2: generated incentive cues.
    AutoIncentive,
    /// Group 3: generated open cues.
    AutoOpen,
}

impl Condition {
    pub const ALL: [Condition; 3] = [Condition::HandIncentive, Condition::AutoIncentive, Condition::AutoOpen];

    pub fn group(self) -> u8 {
        match self {
            Condition::HandIncentive => 1,
            Condition::AutoIncentive => 2,
            Condition::AutoOpen => 3,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Condition::HandIncentive => "hand_incentive",
            Condition::AutoIncentive => "auto_incentive",
            Condition::AutoOpen => "auto_open",
        }
    }

    pub fn mode(self) -> CueMode {
        match self {
            Condition::HandIncentive | Condition::AutoIncentive => CueMode::Incentive,
            Condition::AutoOpen => CueMode::Open,
        }
    }

    pub fn expects_hand_cues(self) -> bool {
        self == Condition::HandIncentive
    }

    /// Approved, and provenance and mode match this condition.
    pub fn serves(self, cue: &CueSet) -> bool {
        cue.is_approved() && cue.mode() == self.mode() && cue.provenance.is_hand() == self.expects_hand_cues()
    }
}

impl std::str::FromStr for Condition {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "hand_incentive" | "1" => Ok(Condition::HandIncentive),
            "auto_incentive" | "2" => Ok(Condition::AutoIncentive),
            "auto_open" | "3" => Ok(Condition::AutoOpen),
            other => Err(format!("unknown condition `{other}`")),
        }
    }
}

impl std::fmt::Display for Condition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Quiz,
    ThemeChoice,
    Training,
    PostTests,
    Done,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Pre,
    Post,
}

/// Read access to published content. Implementations must only hand out
/// Approved cue sets.
pub trait ContentView {
    fn corpus(&self) -> &Corpus;
    fn approved_cues(&self, text: &TextId) -> Vec<&CueSet>;
}

/// What an operation needs beyond the session itself.
pub struct DialogueContext<'a> {
    pub content: &'a dyn ContentView,
    pub scorer: &'a Scorer,
    pub utterances: &'a UtterancePool,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum DialogueError {
    #[error("operation needs stage {expected:?}, session is in {actual:?}")]
    WrongStage { expected: Stage, actual: Stage },
    #[error("no quiz answer is waiting for a confidence rating")]
    NoPendingItem,
    #[error("a confidence rating is required before the next quiz item")]
    AwaitingConfidence,
    #[error("quiz item `{0}` is not part of this session's quiz")]
    UnknownQuizItem(String),
    #[error("quiz item `{0}` was already logged")]
    ItemAlreadyLogged(String),
    #[error("confidence {0} outside 1..=5")]
    ConfidenceOutOfRange(i64),
    #[error("unknown theme `{0}`")]
    UnknownTheme(String),
    #[error("theme `{0}` was not part of the quiz")]
    ThemeNotInQuiz(String),
    #[error("not enough content for theme `{theme}`: {detail}")]
    InsufficientContent { theme: String, detail: String },
    #[error("the current text has not been marked as read")]
    ReadingNotConfirmed,
    #[error("expected text `{expected}`, got `{got}`")]
    WrongText { expected: String, got: String },
    #[error("reading of the current text was already confirmed")]
    ReadingAlreadyConfirmed,
    #[error("no unused approved cue left for text `{0}`")]
    CuePoolExhausted(String),
    #[error("no cue turn is waiting for a question")]
    NoOpenTurn,
    #[error("{phase:?} fluency capture is not allowed in stage {stage:?}")]
    WrongPhase { phase: Phase, stage: Stage },
    #[error("{0:?} fluency capture has not been started")]
    FluencyNotStarted(Phase),
    #[error("{0:?} fluency capture was already started")]
    FluencyAlreadyStarted(Phase),
    #[error("unknown text `{0}`")]
    UnknownText(String),
    #[error("no question lexicon for locale `{0}`")]
    LexiconMissing(String),
}

impl DialogueError {
    /// Stable machine-readable reason code.
    pub fn code(&self) -> &'static str {
        match self {
            DialogueError::WrongStage { .. } => "wrong_stage",
            DialogueError::NoPendingItem => "no_pending_item",
            DialogueError::AwaitingConfidence => "awaiting_confidence",
            DialogueError::UnknownQuizItem(_) => "unknown_quiz_item",
            DialogueError::ItemAlreadyLogged(_) => "item_already_logged",
            DialogueError::ConfidenceOutOfRange(_) => "confidence_out_of_range",
            DialogueError::UnknownTheme(_) => "unknown_theme",
            DialogueError::ThemeNotInQuiz(_) => "theme_not_in_quiz",
            DialogueError::InsufficientContent { .. } => "insufficient_content",
            DialogueError::ReadingNotConfirmed => "reading_not_confirmed",
            DialogueError::WrongText { .. } => "wrong_text",
            DialogueError::ReadingAlreadyConfirmed => "reading_already_confirmed",
            DialogueError::CuePoolExhausted(_) => "cue_pool_exhausted",
            DialogueError::NoOpenTurn => "no_open_turn",
            DialogueError::WrongPhase { .. } => "wrong_phase",
            DialogueError::FluencyNotStarted(_) => "fluency_not_started",
            DialogueError::FluencyAlreadyStarted(_) => "fluency_already_started",
            DialogueError::UnknownText(_) => "unknown_text",
            DialogueError::LexiconMissing(_) => "lexicon_missing",
        }
    }
}

/// Texts a session would train on for a theme, in corpus order.
pub fn training_texts(corpus: &Corpus, theme: &ThemeId) -> Vec<TextId> {
    corpus.texts_for_theme(theme).take(TEXTS_PER_SESSION).map(|t| t.id.clone()).collect()
}
