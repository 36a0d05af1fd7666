//! Question rubrics: acceptance, convergent/divergent triage, the syntactic
//! quality grid, cue-usage detection and annotation agreement.
//!
//! Every function here is pure. Machine outputs are suggestions; human
//! annotation records take precedence through [`AnnotationLedger::reconcile`].

mod acceptance;
mod annotation;
mod cue_usage;
mod divergence;
mod lexicon;
mod syntax;

pub use acceptance::{accept_question, is_interrogative, is_related_to_text, uses_cue_tokens, Acceptance, QuestionContext, RejectReason};
pub use annotation::{
    mean_quality, percent_agreement, reconcile_quality, validate_grid, AgreementError, AnnotationLedger, AnnotationRecord,
    AnnotationTarget, Grid, GridError, GridKind, ReconciledQuality, ReconciledQuestion,
};
pub use cue_usage::detect_cue_usage;
pub use divergence::{classify_divergence, DivergenceLabel, DivergenceSuggestion};
pub use lexicon::{LexiconError, LexiconSet, QuestionLexicon};
pub use syntax::{high_level, syntactic_score, QualityBreakdown};

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::ids::{QuestionId, SessionId, TextId};
use crate::text;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Thresholds {
    /// Shared content tokens with the text needed for relatedness.
    pub relatedness_min_shared: usize,
    /// Share of a question's content tokens one sentence must contain for the
    /// answer to count as explicitly stated.
    pub convergence_overlap: f64,
    /// Machine labels below this confidence are queued for a human.
    pub needs_human_below: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self { relatedness_min_shared: 2, convergence_overlap: 0.6, needs_human_below: 0.8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LabelSource {
    Machine { confidence: f64 },
    Human,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceAssessment {
    pub label: DivergenceLabel,
    pub source: LabelSource,
    pub needs_human: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UsageSource {
    Machine,
    HumanOverride,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CueUsage {
    pub used: bool,
    pub source: UsageSource,
}

/// A question typed by a participant together with its machine scoring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChildQuestion {
    pub id: QuestionId,
    pub session_id: SessionId,
    pub text_id: TextId,
    pub turn_index: usize,
    pub raw: String,
    pub normalized: String,
    pub acceptance: Acceptance,
    /// Set only on accepted questions.
    pub divergence: Option<DivergenceAssessment>,
    pub used_cues: Option<CueUsage>,
    pub quality: Option<QualityBreakdown>,
}

impl ChildQuestion {
    pub fn is_accepted(&self) -> bool {
        self.acceptance.is_accepted()
    }
}

/// Where a question sits in a session.
#[derive(Debug, Clone)]
pub struct QuestionSlot {
    pub id: QuestionId,
    pub session_id: SessionId,
    pub turn_index: usize,
}

/// Lexicons plus thresholds; the full machine scoring pass.
#[derive(Debug, Clone)]
pub struct Scorer {
    pub lexicons: LexiconSet,
    pub thresholds: Thresholds,
}

impl Default for Scorer {
    fn default() -> Self {
        Self { lexicons: LexiconSet::builtin(), thresholds: Thresholds::default() }
    }
}

impl Scorer {
    pub fn new(lexicons: LexiconSet, thresholds: Thresholds) -> Self {
        Self { lexicons, thresholds }
    }

    pub fn lexicon(&self, locale: &str) -> Result<&QuestionLexicon, LexiconError> {
        self.lexicons.get(locale)
    }

    /// Runs acceptance and, for accepted questions, divergence triage, cue
    /// usage and the syntactic grid.
    pub fn score(
        &self,
        slot: QuestionSlot,
        raw: &str,
        ctx: &QuestionContext<'_>,
        prior: &HashSet<String>,
        lex: &QuestionLexicon,
    ) -> ChildQuestion {
        let acceptance = accept_question(raw, ctx, prior, lex, &self.thresholds);
        let mut q = ChildQuestion {
            id: slot.id,
            session_id: slot.session_id,
            text_id: ctx.text.id.clone(),
            turn_index: slot.turn_index,
            raw: raw.to_string(),
            normalized: text::normalize(raw),
            acceptance,
            divergence: None,
            used_cues: None,
            quality: None,
        };
        if acceptance.is_accepted() {
            let d = classify_divergence(raw, ctx.text, lex, &self.thresholds);
            q.divergence = Some(DivergenceAssessment {
                label: d.label,
                source: LabelSource::Machine { confidence: d.confidence },
                needs_human: d.needs_human,
            });
            q.used_cues = ctx.cue.map(|c| CueUsage { used: detect_cue_usage(raw, c, lex), source: UsageSource::Machine });
            q.quality = Some(syntactic_score(raw, lex));
        }
        q
    }
}
