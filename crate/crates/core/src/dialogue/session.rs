use std::collections::{BTreeSet, HashSet};

use chrono::{DateTime, SubsecRound, Utc};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::event::{EventBody, ReplayError, SessionEvent};
use super::utterance::neutral_acks;
use super::{
    training_texts, Condition, DialogueContext, DialogueError, Phase, Stage, CONFIDENCE_LABELS, FLUENCY_WINDOW_MS,
    QUESTIONS_PER_TEXT, TEXTS_PER_SESSION,
};
use crate::corpus::Corpus;
use crate::cue_pipeline::CueSet;
use crate::ids::{CueId, ParticipantId, QuestionId, QuizItemId, SessionId, TextId, ThemeId};
use crate::scoring::{ChildQuestion, QuestionContext, QuestionSlot};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuizSlot {
    pub item_id: QuizItemId,
    pub theme_id: ThemeId,
}

/// Quiz items in corpus order, optionally shuffled with a seed.
pub fn quiz_plan(corpus: &Corpus, shuffle_seed: Option<u64>) -> Vec<QuizSlot> {
    let mut plan: Vec<QuizSlot> = corpus
        .quiz_items
        .iter()
        .map(|q| QuizSlot { item_id: q.id.clone(), theme_id: q.theme_id.clone() })
        .collect();
    if let Some(seed) = shuffle_seed {
        plan.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    plan
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum QuizOutcome {
    Skipped,
    Answered { answer: String, confidence: u8 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuizEntry {
    pub item_id: QuizItemId,
    #[serde(flatten)]
    pub outcome: QuizOutcome,
}

/// What the quiz needs next.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "next", rename_all = "snake_case")]
pub enum QuizNext {
    Item { item_id: QuizItemId },
    Confidence { labels: [&'static str; 5] },
    ThemeChoice,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CueTurnLog {
    pub cue: CueSet,
    pub utterance_id: String,
    pub utterance: String,
    /// The accepted question that closed the turn.
    pub question: Option<ChildQuestion>,
    /// Rejected attempts, in order.
    pub attempts: Vec<ChildQuestion>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextProgress {
    pub text_id: TextId,
    pub turns: Vec<CueTurnLog>,
}

impl TextProgress {
    pub fn accepted(&self) -> usize {
        self.turns.iter().filter(|t| t.question.is_some()).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluencySubmission {
    pub raw: String,
    pub at: DateTime<Utc>,
    /// Server-measured time since the capture started.
    pub elapsed_ms: i64,
    pub client_elapsed_ms: Option<i64>,
    /// Arrived after the window; kept for audit, never scored.
    pub late: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluencyCapture {
    pub phase: Phase,
    pub text_id: TextId,
    pub started_at: DateTime<Utc>,
    pub submissions: Vec<FluencySubmission>,
}

impl FluencyCapture {
    pub fn counted(&self) -> impl Iterator<Item = &FluencySubmission> {
        self.submissions.iter().filter(|s| !s.late)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum FluencyOutcome {
    Counted { elapsed_ms: i64 },
    Late { elapsed_ms: i64 },
}

/// A served cue with the agent's message.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CueTurn {
    pub text_id: TextId,
    pub text_index: usize,
    pub turn_index: usize,
    pub cue: CueSet,
    pub utterance_id: String,
    pub utterance: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NextCueTurn {
    Turn(CueTurn),
    /// The previous text is done; `next_text` must be read before more cues.
    TextComplete { next_text: TextId },
    TrainingComplete,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NextStep {
    /// The turn is still open; ask for another question.
    Question,
    NextCue,
    ReadNextText,
    TrainingComplete,
}

/// Agent reply to a typed question. Carries no verdict.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct QuestionAck {
    pub message: String,
    pub next: NextStep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub session_id: SessionId,
    pub participant_id: ParticipantId,
    pub condition: Condition,
    pub stage: Stage,
    pub quiz: Vec<QuizSlot>,
    pub quiz_log: Vec<QuizEntry>,
    pub pending_answer: Option<(QuizItemId, String)>,
    pub chosen_theme: Option<ThemeId>,
    pub texts: Vec<TextId>,
    pub current_text: usize,
    pub reading_confirmed: bool,
    pub training_log: Vec<TextProgress>,
    pub served_cues: BTreeSet<CueId>,
    pub utterance_offset: usize,
    pub turns_served: usize,
    pub questions_recorded: usize,
    pub fluency_pre: Option<FluencyCapture>,
    pub fluency_post: Option<FluencyCapture>,
    pub event_log: Vec<SessionEvent>,
}

fn ms(at: DateTime<Utc>) -> DateTime<Utc> {
    at.trunc_subsecs(3)
}

impl Session {
    pub fn start(
        session_id: SessionId,
        participant_id: ParticipantId,
        condition: Condition,
        quiz: Vec<QuizSlot>,
        utterance_offset: usize,
        at: DateTime<Utc>,
    ) -> Self {
        let event = SessionEvent {
            seq: 1,
            timestamp: ms(at),
            body: EventBody::Started { session_id, participant_id, condition, quiz, utterance_offset },
        };
        Self::replay(std::slice::from_ref(&event)).expect("a started event always replays")
    }

    /// Rebuilds a session from its full event stream.
    pub fn replay(events: &[SessionEvent]) -> Result<Self, ReplayError> {
        let first = events.first().ok_or(ReplayError::Empty)?;
        let EventBody::Started { session_id, participant_id, condition, quiz, utterance_offset } = &first.body else {
            return Err(ReplayError::NotStarted(first.body.kind()));
        };
        if first.seq != 1 {
            return Err(ReplayError::SeqGap { expected: 1, got: first.seq });
        }
        let mut s = Session {
            session_id: session_id.clone(),
            participant_id: participant_id.clone(),
            condition: *condition,
            stage: if quiz.is_empty() { Stage::ThemeChoice } else { Stage::Quiz },
            quiz: quiz.clone(),
            quiz_log: Vec::new(),
            pending_answer: None,
            chosen_theme: None,
            texts: Vec::new(),
            current_text: 0,
            reading_confirmed: false,
            training_log: Vec::new(),
            served_cues: BTreeSet::new(),
            utterance_offset: *utterance_offset,
            turns_served: 0,
            questions_recorded: 0,
            fluency_pre: None,
            fluency_post: None,
            event_log: vec![first.clone()],
        };
        for e in &events[1..] {
            s.apply(e)?;
        }
        Ok(s)
    }

    /// Folds one event into the state. Pure apart from `self`.
    pub fn apply(&mut self, e: &SessionEvent) -> Result<(), ReplayError> {
        let expected = self.event_log.len() as u64 + 1;
        if e.seq != expected {
            return Err(ReplayError::SeqGap { expected, got: e.seq });
        }
        let bad = |detail: &str| ReplayError::Inconsistent { seq: e.seq, kind: e.body.kind(), detail: detail.into() };
        match &e.body {
            EventBody::Started { .. } => return Err(bad("session already started")),
            EventBody::QuizSkipped { item_id } => {
                self.quiz_log.push(QuizEntry { item_id: item_id.clone(), outcome: QuizOutcome::Skipped });
                self.maybe_finish_quiz();
            }
            EventBody::QuizAnswered { item_id, answer } => {
                self.pending_answer = Some((item_id.clone(), answer.clone()));
            }
            EventBody::QuizConfidence { confidence } => {
                let (item_id, answer) = self.pending_answer.take().ok_or_else(|| bad("no pending answer"))?;
                self.quiz_log.push(QuizEntry { item_id, outcome: QuizOutcome::Answered { answer, confidence: *confidence } });
                self.maybe_finish_quiz();
            }
            EventBody::ThemeChosen { theme_id, texts } => {
                self.chosen_theme = Some(theme_id.clone());
                self.texts = texts.clone();
                self.training_log = texts.iter().map(|t| TextProgress { text_id: t.clone(), turns: Vec::new() }).collect();
                self.stage = Stage::Training;
            }
            EventBody::ReadingFinished { .. } => self.reading_confirmed = true,
            EventBody::CueServed { cue, utterance_id, utterance } => {
                let progress = self.training_log.get_mut(self.current_text).ok_or_else(|| bad("no current text"))?;
                progress.turns.push(CueTurnLog {
                    cue: cue.clone(),
                    utterance_id: utterance_id.clone(),
                    utterance: utterance.clone(),
                    question: None,
                    attempts: Vec::new(),
                });
                self.served_cues.insert(cue.id.clone());
                self.turns_served += 1;
            }
            EventBody::QuestionRecorded { question } => {
                let progress = self.training_log.get_mut(self.current_text).ok_or_else(|| bad("no current text"))?;
                let turn = progress.turns.last_mut().filter(|t| t.question.is_none()).ok_or_else(|| bad("no open turn"))?;
                self.questions_recorded += 1;
                if question.is_accepted() {
                    turn.question = Some(question.clone());
                    if progress.accepted() == QUESTIONS_PER_TEXT {
                        self.current_text += 1;
                        self.reading_confirmed = false;
                        if self.current_text == self.texts.len() {
                            self.stage = Stage::PostTests;
                        }
                    }
                } else {
                    turn.attempts.push(question.clone());
                }
            }
            EventBody::FluencyStarted { phase, text_id } => {
                let capture =
                    FluencyCapture { phase: *phase, text_id: text_id.clone(), started_at: e.timestamp, submissions: Vec::new() };
                *self.capture_slot(*phase) = Some(capture);
            }
            EventBody::FluencySubmitted { phase, raw, elapsed_ms, client_elapsed_ms, late } => {
                let capture = self.capture_slot(*phase).as_mut().ok_or_else(|| bad("capture not started"))?;
                capture.submissions.push(FluencySubmission {
                    raw: raw.clone(),
                    at: e.timestamp,
                    elapsed_ms: *elapsed_ms,
                    client_elapsed_ms: *client_elapsed_ms,
                    late: *late,
                });
            }
            EventBody::Finished => self.stage = Stage::Done,
        }
        self.event_log.push(e.clone());
        Ok(())
    }

    fn commit(&mut self, body: EventBody, at: DateTime<Utc>) -> &SessionEvent {
        let event = SessionEvent { seq: self.event_log.len() as u64 + 1, timestamp: ms(at), body };
        self.apply(&event).expect("validated events apply cleanly");
        self.event_log.last().expect("just pushed")
    }

    fn maybe_finish_quiz(&mut self) {
        if self.pending_answer.is_none() && self.quiz_log.len() == self.quiz.len() {
            self.stage = Stage::ThemeChoice;
        }
    }

    fn capture_slot(&mut self, phase: Phase) -> &mut Option<FluencyCapture> {
        match phase {
            Phase::Pre => &mut self.fluency_pre,
            Phase::Post => &mut self.fluency_post,
        }
    }

    pub fn capture(&self, phase: Phase) -> Option<&FluencyCapture> {
        match phase {
            Phase::Pre => self.fluency_pre.as_ref(),
            Phase::Post => self.fluency_post.as_ref(),
        }
    }

    fn require(&self, expected: Stage) -> Result<(), DialogueError> {
        if self.stage == expected {
            Ok(())
        } else {
            Err(DialogueError::WrongStage { expected, actual: self.stage })
        }
    }

    // ---- quiz ----

    pub fn quiz_next(&self) -> QuizNext {
        if self.stage != Stage::Quiz {
            return QuizNext::ThemeChoice;
        }
        if self.pending_answer.is_some() {
            return QuizNext::Confidence { labels: CONFIDENCE_LABELS };
        }
        let logged: HashSet<&QuizItemId> = self.quiz_log.iter().map(|e| &e.item_id).collect();
        match self.quiz.iter().find(|s| !logged.contains(&s.item_id)) {
            Some(slot) => QuizNext::Item { item_id: slot.item_id.clone() },
            None => QuizNext::ThemeChoice,
        }
    }

    fn check_quiz_item(&self, item_id: &QuizItemId) -> Result<(), DialogueError> {
        self.require(Stage::Quiz)?;
        if self.pending_answer.is_some() {
            return Err(DialogueError::AwaitingConfidence);
        }
        if !self.quiz.iter().any(|s| &s.item_id == item_id) {
            return Err(DialogueError::UnknownQuizItem(item_id.to_string()));
        }
        if self.quiz_log.iter().any(|e| &e.item_id == item_id) {
            return Err(DialogueError::ItemAlreadyLogged(item_id.to_string()));
        }
        Ok(())
    }

    pub fn quiz_skip(&mut self, item_id: &QuizItemId, at: DateTime<Utc>) -> Result<QuizNext, DialogueError> {
        self.check_quiz_item(item_id)?;
        self.commit(EventBody::QuizSkipped { item_id: item_id.clone() }, at);
        Ok(self.quiz_next())
    }

    pub fn quiz_answer(&mut self, item_id: &QuizItemId, answer: &str, at: DateTime<Utc>) -> Result<QuizNext, DialogueError> {
        self.check_quiz_item(item_id)?;
        self.commit(EventBody::QuizAnswered { item_id: item_id.clone(), answer: answer.to_string() }, at);
        Ok(self.quiz_next())
    }

    pub fn submit_confidence(&mut self, confidence: i64, at: DateTime<Utc>) -> Result<QuizNext, DialogueError> {
        self.require(Stage::Quiz)?;
        if self.pending_answer.is_none() {
            return Err(DialogueError::NoPendingItem);
        }
        if !(1..=5).contains(&confidence) {
            return Err(DialogueError::ConfidenceOutOfRange(confidence));
        }
        self.commit(EventBody::QuizConfidence { confidence: confidence as u8 }, at);
        Ok(self.quiz_next())
    }

    // ---- theme choice ----

    /// Themes that had at least one quiz item.
    pub fn quiz_themes(&self) -> BTreeSet<&ThemeId> {
        self.quiz.iter().map(|s| &s.theme_id).collect()
    }

    pub fn choose_theme(&mut self, theme_id: &ThemeId, ctx: &DialogueContext<'_>, at: DateTime<Utc>) -> Result<(), DialogueError> {
        self.require(Stage::ThemeChoice)?;
        let corpus = ctx.content.corpus();
        if corpus.theme(theme_id).is_none() {
            return Err(DialogueError::UnknownTheme(theme_id.to_string()));
        }
        if !self.quiz_themes().contains(theme_id) {
            return Err(DialogueError::ThemeNotInQuiz(theme_id.to_string()));
        }
        let texts = training_texts(corpus, theme_id);
        let insufficient = |detail: String| DialogueError::InsufficientContent { theme: theme_id.to_string(), detail };
        if texts.len() < TEXTS_PER_SESSION {
            return Err(insufficient(format!("{} texts, need {TEXTS_PER_SESSION}", texts.len())));
        }
        for t in &texts {
            let n = ctx.content.approved_cues(t).into_iter().filter(|c| self.condition.serves(c)).count();
            if n < QUESTIONS_PER_TEXT {
                return Err(insufficient(format!(
                    "text `{t}` has {n} approved {} cues, need {QUESTIONS_PER_TEXT}",
                    self.condition
                )));
            }
        }
        self.commit(EventBody::ThemeChosen { theme_id: theme_id.clone(), texts }, at);
        Ok(())
    }

    // ---- training ----

    pub fn current_text_id(&self) -> Option<&TextId> {
        self.texts.get(self.current_text)
    }

    pub fn finished_reading(&mut self, text_id: &TextId, at: DateTime<Utc>) -> Result<(), DialogueError> {
        self.require(Stage::Training)?;
        let expected = self.current_text_id().expect("training has a current text");
        if expected != text_id {
            return Err(DialogueError::WrongText { expected: expected.to_string(), got: text_id.to_string() });
        }
        if self.reading_confirmed {
            return Err(DialogueError::ReadingAlreadyConfirmed);
        }
        self.commit(EventBody::ReadingFinished { text_id: text_id.clone() }, at);
        Ok(())
    }

    pub fn open_turn(&self) -> Option<CueTurn> {
        if self.stage != Stage::Training {
            return None;
        }
        let progress = self.training_log.get(self.current_text)?;
        let turn = progress.turns.last().filter(|t| t.question.is_none())?;
        Some(CueTurn {
            text_id: progress.text_id.clone(),
            text_index: self.current_text,
            turn_index: progress.turns.len() - 1,
            cue: turn.cue.clone(),
            utterance_id: turn.utterance_id.clone(),
            utterance: turn.utterance.clone(),
        })
    }

    fn training_done(&self) -> bool {
        !self.texts.is_empty() && self.current_text >= self.texts.len()
    }

    /// Serves the next cue, or repeats the open one. Advancing past a finished
    /// text happens when its sixth question is accepted; this reports it.
    pub fn next_cue_turn(&mut self, ctx: &DialogueContext<'_>, at: DateTime<Utc>) -> Result<NextCueTurn, DialogueError> {
        if self.stage > Stage::Training && self.training_done() {
            return Ok(NextCueTurn::TrainingComplete);
        }
        self.require(Stage::Training)?;
        if let Some(turn) = self.open_turn() {
            return Ok(NextCueTurn::Turn(turn));
        }
        let text_id = self.current_text_id().expect("training has a current text").clone();
        if !self.reading_confirmed {
            let fresh = self.training_log[self.current_text].turns.is_empty();
            return if self.current_text > 0 && fresh {
                Ok(NextCueTurn::TextComplete { next_text: text_id })
            } else {
                Err(DialogueError::ReadingNotConfirmed)
            };
        }
        let cue = ctx
            .content
            .approved_cues(&text_id)
            .into_iter()
            .find(|c| c.text_id == text_id && self.condition.serves(c) && !self.served_cues.contains(&c.id))
            .cloned()
            .ok_or_else(|| DialogueError::CuePoolExhausted(text_id.to_string()))?;
        let template = ctx.utterances.pick(self.condition, self.utterance_offset, self.turns_served).ok_or_else(|| {
            DialogueError::InsufficientContent { theme: self.condition.to_string(), detail: "empty utterance pool".into() }
        })?;
        let utterance = ctx.utterances.render(template, &cue);
        self.commit(EventBody::CueServed { cue, utterance_id: template.id.clone(), utterance }, at);
        Ok(NextCueTurn::Turn(self.open_turn().expect("cue just served")))
    }

    /// Accepted normalized questions asked so far in training.
    pub fn accepted_normalized(&self) -> HashSet<String> {
        self.accepted_questions().map(|q| q.normalized.clone()).collect()
    }

    pub fn accepted_questions(&self) -> impl Iterator<Item = &ChildQuestion> {
        self.training_log.iter().flat_map(|p| p.turns.iter().filter_map(|t| t.question.as_ref()))
    }

    /// Every training question in the order it was typed per turn.
    pub fn all_questions(&self) -> impl Iterator<Item = &ChildQuestion> {
        self.training_log
            .iter()
            .flat_map(|p| p.turns.iter().flat_map(|t| t.attempts.iter().chain(t.question.as_ref())))
    }

    pub fn record_question(&mut self, raw: &str, ctx: &DialogueContext<'_>, at: DateTime<Utc>) -> Result<QuestionAck, DialogueError> {
        self.require(Stage::Training)?;
        let turn = self.open_turn().ok_or(DialogueError::NoOpenTurn)?;
        let corpus = ctx.content.corpus();
        let text = corpus.text(&turn.text_id).ok_or_else(|| DialogueError::UnknownText(turn.text_id.to_string()))?;
        let theme = corpus.theme(&text.theme_id);
        let locale = theme.map_or("en", |t| t.locale.as_str());
        let lex = ctx.scorer.lexicon(locale).map_err(|_| DialogueError::LexiconMissing(locale.to_string()))?;
        let qctx = QuestionContext { text, theme_title: theme.map(|t| t.title.as_str()), cue: Some(&turn.cue) };
        let slot = QuestionSlot {
            id: QuestionId::new(format!("{}-q{}", self.session_id, self.questions_recorded + 1)),
            session_id: self.session_id.clone(),
            turn_index: turn.turn_index,
        };
        let question = ctx.scorer.score(slot, raw, &qctx, &self.accepted_normalized(), lex);
        let accepted = question.is_accepted();
        self.commit(EventBody::QuestionRecorded { question }, at);

        let (acks, reprompts) = neutral_acks();
        let n = self.questions_recorded;
        let (message, next) = if !accepted {
            (reprompts[n % reprompts.len()], NextStep::Question)
        } else if self.stage == Stage::PostTests {
            (acks[n % acks.len()], NextStep::TrainingComplete)
        } else if self.current_text != turn.text_index {
            (acks[n % acks.len()], NextStep::ReadNextText)
        } else {
            (acks[n % acks.len()], NextStep::NextCue)
        };
        Ok(QuestionAck { message: message.to_string(), next })
    }

    // ---- fluency ----

    fn check_phase(&self, phase: Phase) -> Result<(), DialogueError> {
        let ok = match phase {
            Phase::Pre => matches!(self.stage, Stage::Quiz | Stage::ThemeChoice),
            Phase::Post => self.stage == Stage::PostTests,
        };
        if ok {
            Ok(())
        } else {
            Err(DialogueError::WrongPhase { phase, stage: self.stage })
        }
    }

    pub fn fluency_start(
        &mut self,
        phase: Phase,
        text_id: &TextId,
        ctx: &DialogueContext<'_>,
        at: DateTime<Utc>,
    ) -> Result<(), DialogueError> {
        self.check_phase(phase)?;
        if self.capture(phase).is_some() {
            return Err(DialogueError::FluencyAlreadyStarted(phase));
        }
        if ctx.content.corpus().text(text_id).is_none() {
            return Err(DialogueError::UnknownText(text_id.to_string()));
        }
        self.commit(EventBody::FluencyStarted { phase, text_id: text_id.clone() }, at);
        Ok(())
    }

    /// Logs a fluency question. The server clock decides lateness; the
    /// client's own elapsed time is stored for audit only.
    pub fn fluency_submit(
        &mut self,
        phase: Phase,
        raw: &str,
        client_elapsed_ms: Option<i64>,
        at: DateTime<Utc>,
    ) -> Result<FluencyOutcome, DialogueError> {
        self.check_phase(phase)?;
        let started = self.capture(phase).ok_or(DialogueError::FluencyNotStarted(phase))?.started_at;
        let elapsed_ms = (ms(at) - started).num_milliseconds().max(0);
        let late = elapsed_ms > FLUENCY_WINDOW_MS;
        self.commit(EventBody::FluencySubmitted { phase, raw: raw.to_string(), elapsed_ms, client_elapsed_ms, late }, at);
        Ok(if late { FluencyOutcome::Late { elapsed_ms } } else { FluencyOutcome::Counted { elapsed_ms } })
    }

    pub fn finish(&mut self, at: DateTime<Utc>) -> Result<(), DialogueError> {
        self.require(Stage::PostTests)?;
        self.commit(EventBody::Finished, at);
        Ok(())
    }

    pub fn is_complete(&self) -> bool {
        self.training_done() && self.stage >= Stage::PostTests
    }
}
