//! Offline cue generation: zero-shot prompts over a pluggable language-model
//! backend, parsing of the raw completions, random sampling for review, an
//! offensiveness screen and the human review transition that makes a cue
//! servable.

mod backend;
mod parse;
mod pipeline;
mod prompt;
mod review;
mod stats;

pub use backend::{BackendError, FailingBackend, LanguageModelBackend, MockBackend};
pub use parse::{format_cue, parse_cue_output, ParseError};
pub use pipeline::{generate_candidates, CallFailure, GenerationBatch, PipelineError, PipelineRun, PipelineSettings, RawCandidate};
pub use prompt::{build_prompt, PromptError, PromptTemplates};
pub use review::{apply_review, sample_for_review, screen_offensive, Blocklist, ReviewDecision, ReviewError, ScreenResult, Verdict};
pub use stats::{qword_stats, QwordStats};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::ids::{AnnotatorId, CueId, TextId};

/// Study model settings: `text-davinci-002` at temperature 0.7.
pub const STUDY_MODEL: &str = "text-davinci-002";
pub const STUDY_TEMPERATURE: f64 = 0.7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerationConfig {
    pub model_name: String,
    pub temperature: f64,
    pub max_output_tokens: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self { model_name: STUDY_MODEL.into(), temperature: STUDY_TEMPERATURE, max_output_tokens: 64, seed: None }
    }
}

impl GenerationConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.temperature) {
            return Err(format!("temperature {} outside [0, 1]", self.temperature));
        }
        if self.max_output_tokens == 0 {
            return Err("max_output_tokens must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CueMode {
    /// Questioning word plus the answer to one divergent question.
    Incentive,
    /// Questioning word plus two keywords from the text.
    Open,
}

impl CueMode {
    pub fn as_str(self) -> &'static str {
        match self {
            CueMode::Incentive => "incentive",
            CueMode::Open => "open",
        }
    }
}

impl std::str::FromStr for CueMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "incentive" => Ok(CueMode::Incentive),
            "open" => Ok(CueMode::Open),
            other => Err(format!("unknown cue mode `{other}` (expected incentive|open)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CuePayload {
    Incentive { answer_sentence: String },
    Open { keywords: (String, String) },
}

/// The child-visible part of a cue set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CueContent {
    pub question_word: String,
    pub payload: CuePayload,
}

impl CueContent {
    pub fn incentive(question_word: &str, answer_sentence: &str) -> Self {
        Self {
            question_word: question_word.into(),
            payload: CuePayload::Incentive { answer_sentence: answer_sentence.into() },
        }
    }

    pub fn open(question_word: &str, first: &str, second: &str) -> Self {
        Self { question_word: question_word.into(), payload: CuePayload::Open { keywords: (first.into(), second.into()) } }
    }

    pub fn mode(&self) -> CueMode {
        match self.payload {
            CuePayload::Incentive { .. } => CueMode::Incentive,
            CuePayload::Open { .. } => CueMode::Open,
        }
    }

    /// Question word followed by the payload strings.
    pub fn texts(&self) -> Vec<&str> {
        let mut out = vec![self.question_word.as_str()];
        match &self.payload {
            CuePayload::Incentive { answer_sentence } => out.push(answer_sentence),
            CuePayload::Open { keywords } => {
                out.push(&keywords.0);
                out.push(&keywords.1);
            }
        }
        out
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.question_word.trim().is_empty() {
            return Err("empty question word".into());
        }
        match &self.payload {
            CuePayload::Incentive { answer_sentence } if answer_sentence.trim().is_empty() => Err("empty answer sentence".into()),
            CuePayload::Open { keywords: (a, b) } if a.trim().is_empty() || b.trim().is_empty() => Err("empty keyword".into()),
            CuePayload::Open { keywords: (a, b) } if a.trim().to_lowercase() == b.trim().to_lowercase() => {
                Err("keywords must be distinct".into())
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Hand,
    Generated { config: GenerationConfig, prompt_id: String, raw_output: String },
}

impl Provenance {
    pub fn is_hand(&self) -> bool {
        matches!(self, Provenance::Hand)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ReviewStatus {
    Pending,
    Approved { annotator: AnnotatorId, at: DateTime<Utc> },
    Rejected { reason: String, annotator: AnnotatorId, at: DateTime<Utc> },
}

impl ReviewStatus {
    pub fn label(&self) -> &'static str {
        match self {
            ReviewStatus::Pending => "pending",
            ReviewStatus::Approved { .. } => "approved",
            ReviewStatus::Rejected { .. } => "rejected",
        }
    }
}

/// Offensiveness scale labels. 5 is the non-offensive extreme.
pub const OFFENSIVENESS_LABELS: [&str; 5] = [
    "very offensive for a 10-year-old child",
    "offensive for a 10-year-old child",
    "somewhat offensive for a 10-year-old child",
    "barely offensive for a 10-year-old child",
    "Not at all offensive for a 10-year-old child",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CueAnnotations {
    /// 1 (not at all related) .. 5 (super related).
    pub relatedness: u8,
    /// 1 (stated in the text) .. 3 (not at all stated).
    pub divergence_level: u8,
    /// 1 (very offensive) .. 5 (not at all offensive).
    pub offensiveness: u8,
    /// Label text for the offensiveness value, stored to pin the polarity.
    pub offensiveness_label: String,
}

impl CueAnnotations {
    pub fn new(relatedness: u8, divergence_level: u8, offensiveness: u8) -> Self {
        let label = offensiveness
            .checked_sub(1)
            .and_then(|i| OFFENSIVENESS_LABELS.get(i as usize))
            .copied()
            .unwrap_or("out of range");
        Self { relatedness, divergence_level, offensiveness, offensiveness_label: label.to_string() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CueSet {
    pub id: CueId,
    pub text_id: TextId,
    #[serde(flatten)]
    pub content: CueContent,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_question: Option<String>,
    pub provenance: Provenance,
    pub review_status: ReviewStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotations: Option<CueAnnotations>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub screen: Option<ScreenResult>,
}

impl CueSet {
    pub fn pending(id: impl Into<CueId>, text_id: TextId, content: CueContent, provenance: Provenance) -> Self {
        Self {
            id: id.into(),
            text_id,
            content,
            target_question: None,
            provenance,
            review_status: ReviewStatus::Pending,
            annotations: None,
            screen: None,
        }
    }

    pub fn mode(&self) -> CueMode {
        self.content.mode()
    }

    pub fn is_approved(&self) -> bool {
        matches!(self.review_status, ReviewStatus::Approved { .. })
    }
}

impl From<String> for CueId {
    fn from(s: String) -> Self {
        CueId(s)
    }
}
