//! JSON shapes sent to children. They are built field by field from session
//! state so that scoring data, reviewer annotations and model provenance have
//! no path into a child response.

use chrono::{DateTime, Utc};
use kidsask_core::corpus::{Corpus, ResourceText};
use kidsask_core::cue_pipeline::{CueMode, CuePayload, CueSet};
use kidsask_core::dialogue::{
    Condition, CueTurn, FluencyCapture, QuizNext, Session, Stage, CONFIDENCE_LABELS, FLUENCY_WINDOW_MS, TEXTS_PER_SESSION,
};
use serde::Serialize;

#[derive(Debug, Serialize)]
pub struct TextView {
    pub id: String,
    pub title: String,
    pub body: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub audio_ref: Option<String>,
}

impl TextView {
    pub fn new(t: &ResourceText) -> Self {
        Self { id: t.id.to_string(), title: t.title.clone(), body: t.body.clone(), audio_ref: t.audio_ref.clone() }
    }
}

#[derive(Debug, Serialize)]
pub struct CueView {
    pub cue_id: String,
    pub mode: CueMode,
    pub question_word: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub answer_sentence: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub keywords: Option<[String; 2]>,
}

impl CueView {
    pub fn new(c: &CueSet) -> Self {
        let (answer_sentence, keywords) = match &c.content.payload {
            CuePayload::Incentive { answer_sentence } => (Some(answer_sentence.clone()), None),
            CuePayload::Open { keywords: (a, b) } => (None, Some([a.clone(), b.clone()])),
        };
        Self {
            cue_id: c.id.to_string(),
            mode: c.mode(),
            question_word: c.content.question_word.clone(),
            answer_sentence,
            keywords,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct TurnView {
    pub text_id: String,
    pub text_index: usize,
    pub turn_index: usize,
    pub cue: CueView,
    pub utterance: String,
}

impl TurnView {
    pub fn new(t: &CueTurn) -> Self {
        Self {
            text_id: t.text_id.to_string(),
            text_index: t.text_index,
            turn_index: t.turn_index,
            cue: CueView::new(&t.cue),
            utterance: t.utterance.clone(),
        }
    }
}

#[derive(Debug, Serialize)]
#[serde(tag = "next", rename_all = "snake_case")]
pub enum QuizView {
    Item { item_id: String, theme_id: String, prompt: String, position: usize, total: usize },
    Confidence { labels: [&'static str; 5] },
    ThemeChoice,
}

impl QuizView {
    pub fn new(s: &Session, corpus: &Corpus) -> Self {
        match s.quiz_next() {
            QuizNext::Item { item_id } => {
                let item = corpus.quiz_item(&item_id);
                QuizView::Item {
                    theme_id: item.map(|i| i.theme_id.to_string()).unwrap_or_default(),
                    prompt: item.map(|i| i.prompt.clone()).unwrap_or_default(),
                    item_id: item_id.to_string(),
                    position: s.quiz_log.len() + 1,
                    total: s.quiz.len(),
                }
            }
            QuizNext::Confidence { .. } => QuizView::Confidence { labels: CONFIDENCE_LABELS },
            QuizNext::ThemeChoice => QuizView::ThemeChoice,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct ThemeView {
    pub id: String,
    pub title: String,
}

#[derive(Debug, Serialize)]
pub struct TrainingView {
    pub text_index: usize,
    pub texts_total: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub text: Option<TextView>,
    pub reading_confirmed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub turn: Option<TurnView>,
}

#[derive(Debug, Serialize)]
pub struct CaptureView {
    pub text_id: String,
    pub started_at: DateTime<Utc>,
    pub submitted: usize,
    pub window_ms: i64,
    pub remaining_ms: i64,
}

impl CaptureView {
    pub fn new(c: &FluencyCapture, now: DateTime<Utc>) -> Self {
        let elapsed = (now - c.started_at).num_milliseconds().max(0);
        Self {
            text_id: c.text_id.to_string(),
            started_at: c.started_at,
            submitted: c.counted().count(),
            window_ms: FLUENCY_WINDOW_MS,
            remaining_ms: (FLUENCY_WINDOW_MS - elapsed).max(0),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct FluencyView {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pre: Option<CaptureView>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub post: Option<CaptureView>,
}

#[derive(Debug, Serialize)]
pub struct StateView {
    pub session_id: String,
    pub participant_id: String,
    pub condition: Condition,
    pub stage: Stage,
    /// Sequence number of the last event; the next write gets `seq + 1`.
    pub seq: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quiz: Option<QuizView>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub themes: Option<Vec<ThemeView>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chosen_theme: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub training: Option<TrainingView>,
    pub fluency: FluencyView,
}

impl StateView {
    pub fn new(s: &Session, corpus: &Corpus, now: DateTime<Utc>) -> Self {
        let themes = (s.stage == Stage::ThemeChoice).then(|| {
            s.quiz_themes()
                .into_iter()
                .filter_map(|id| corpus.theme(id))
                .map(|t| ThemeView { id: t.id.to_string(), title: t.title.clone() })
                .collect()
        });
        let training = (s.stage == Stage::Training).then(|| TrainingView {
            text_index: s.current_text,
            texts_total: TEXTS_PER_SESSION,
            text: s.current_text_id().and_then(|id| corpus.text(id)).map(TextView::new),
            reading_confirmed: s.reading_confirmed,
            turn: s.open_turn().as_ref().map(TurnView::new),
        });
        Self {
            session_id: s.session_id.to_string(),
            participant_id: s.participant_id.to_string(),
            condition: s.condition,
            stage: s.stage,
            seq: s.event_log.len() as u64,
            quiz: (s.stage == Stage::Quiz).then(|| QuizView::new(s, corpus)),
            themes,
            chosen_theme: s.chosen_theme.as_ref().map(|t| t.to_string()),
            training,
            fluency: FluencyView {
                pre: s.fluency_pre.as_ref().map(|c| CaptureView::new(c, now)),
                post: s.fluency_post.as_ref().map(|c| CaptureView::new(c, now)),
            },
        }
    }
}
