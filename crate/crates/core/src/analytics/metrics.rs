use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use super::stats::{summarize, Summary};
use super::survey::{survey_deltas, PrePost, SurveyResponse};
use super::AnalyticsError;
use crate::corpus::Corpus;
use crate::dialogue::{Condition, FluencyCapture, Phase, Session};
use crate::ids::{ParticipantId, QuestionId};
use crate::scoring::{
    AnnotationLedger, ChildQuestion, DivergenceLabel, QuestionContext, QuestionSlot, ReconciledQuestion, Scorer,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportMode {
    /// Every machine label flagged for review must carry a human label.
    StudyGrade,
    /// Triage output over raw machine labels.
    MachineOnly,
}

/// Divergent-question counts for one fluency capture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluencyScore {
    /// Questions typed inside the window.
    pub submitted: usize,
    /// Unique accepted questions.
    pub accepted: usize,
    pub divergent: usize,
    pub divergent_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantMetrics {
    pub participant_id: ParticipantId,
    pub condition: Condition,
    pub accepted_unique: usize,
    pub divergent_pct: Option<f64>,
    pub convergent_pct: Option<f64>,
    pub mean_quality: Option<f64>,
    pub cue_usage_pct: Option<f64>,
    pub fluency_pre: Option<FluencyScore>,
    pub fluency_post: Option<FluencyScore>,
    pub survey_deltas: BTreeMap<String, PrePost>,
}

/// Everything a metrics pass reads besides the session.
pub struct MetricsContext<'a> {
    pub corpus: &'a Corpus,
    pub scorer: &'a Scorer,
    pub ledger: &'a AnnotationLedger,
    pub surveys: &'a [SurveyResponse],
    pub mode: ReportMode,
}

/// Scores every in-window submission of a capture with the full acceptance
/// pipeline. Ids are `{session}-{phase}-{n}`; duplicates are judged within
/// the capture.
pub fn score_capture(
    session: &Session,
    capture: &FluencyCapture,
    corpus: &Corpus,
    scorer: &Scorer,
) -> Result<Vec<ChildQuestion>, AnalyticsError> {
    let text = corpus.text(&capture.text_id).ok_or_else(|| AnalyticsError::UnknownText(capture.text_id.to_string()))?;
    let theme = corpus.theme(&text.theme_id);
    let locale = theme.map_or("en", |t| t.locale.as_str());
    let lex = scorer.lexicon(locale).map_err(|_| AnalyticsError::LexiconMissing(locale.to_string()))?;
    let ctx = QuestionContext { text, theme_title: theme.map(|t| t.title.as_str()), cue: None };
    let phase = match capture.phase {
        Phase::Pre => "pre",
        Phase::Post => "post",
    };
    let mut prior = HashSet::new();
    let mut out = Vec::new();
    for (i, sub) in capture.counted().enumerate() {
        let slot = QuestionSlot {
            id: QuestionId::new(format!("{}-{phase}-{}", session.session_id, i + 1)),
            session_id: session.session_id.clone(),
            turn_index: i,
        };
        let mut q = scorer.score(slot, &sub.raw, &ctx, &prior, lex);
        q.text_id = capture.text_id.clone();
        if q.is_accepted() {
            prior.insert(q.normalized.clone());
        }
        out.push(q);
    }
    Ok(out)
}

/// Reconciled accepted questions with repeats (equal normalized form)
/// counted once, keeping the first.
fn unique_accepted(questions: &[ChildQuestion], ledger: &AnnotationLedger) -> Vec<ReconciledQuestion> {
    let mut seen = HashSet::new();
    questions
        .iter()
        .map(|q| ledger.reconcile(q))
        .filter(|r| r.accepted && seen.insert(r.normalized.clone()))
        .collect()
}

fn pct(part: usize, whole: usize) -> Option<f64> {
    (whole > 0).then(|| 100.0 * part as f64 / whole as f64)
}

fn check_resolved(view: &[ReconciledQuestion], mode: ReportMode) -> Result<(), AnalyticsError> {
    if mode == ReportMode::MachineOnly {
        return Ok(());
    }
    let open: Vec<String> = view.iter().filter(|r| r.divergence_unresolved).map(|r| r.id.to_string()).collect();
    if open.is_empty() {
        Ok(())
    } else {
        Err(AnalyticsError::UnresolvedLabels(open))
    }
}

fn fluency_score(
    s: &Session,
    phase: Phase,
    ctx: &MetricsContext<'_>,
) -> Result<Option<FluencyScore>, AnalyticsError> {
    let Some(capture) = s.capture(phase) else { return Ok(None) };
    let scored = score_capture(s, capture, ctx.corpus, ctx.scorer)?;
    let view = unique_accepted(&scored, ctx.ledger);
    check_resolved(&view, ctx.mode)?;
    let labeled = view.iter().filter(|r| r.divergence.is_some()).count();
    let divergent = view.iter().filter(|r| r.divergence == Some(DivergenceLabel::Divergent)).count();
    Ok(Some(FluencyScore { submitted: scored.len(), accepted: view.len(), divergent, divergent_pct: pct(divergent, labeled) }))
}

/// Outcome measures of one completed session over the reconciled view.
pub fn participant_metrics(s: &Session, ctx: &MetricsContext<'_>) -> Result<ParticipantMetrics, AnalyticsError> {
    if !s.is_complete() {
        return Err(AnalyticsError::IncompleteSession(s.session_id.to_string()));
    }
    let questions: Vec<ChildQuestion> = s.all_questions().cloned().collect();
    let view = unique_accepted(&questions, ctx.ledger);
    check_resolved(&view, ctx.mode)?;

    let labeled: Vec<_> = view.iter().filter_map(|r| r.divergence).collect();
    let divergent = labeled.iter().filter(|l| **l == DivergenceLabel::Divergent).count();
    let qualities: Vec<f64> = view.iter().filter_map(|r| r.quality.map(|q| q.total)).collect();
    let usage: Vec<bool> = view.iter().filter_map(|r| r.used_cues).collect();

    Ok(ParticipantMetrics {
        participant_id: s.participant_id.clone(),
        condition: s.condition,
        accepted_unique: view.len(),
        divergent_pct: pct(divergent, labeled.len()),
        convergent_pct: pct(labeled.len() - divergent, labeled.len()),
        mean_quality: summarize(&qualities).map(|q| q.mean),
        cue_usage_pct: pct(usage.iter().filter(|u| **u).count(), usage.len()),
        fluency_pre: fluency_score(s, Phase::Pre, ctx)?,
        fluency_post: fluency_score(s, Phase::Post, ctx)?,
        survey_deltas: survey_deltas(&s.participant_id, ctx.surveys)?,
    })
}

/// Metric columns summarized per condition, in report order.
pub const SUMMARY_METRICS: [&str; 6] =
    ["divergent_pct", "mean_quality", "cue_usage_pct", "fluency_pre", "fluency_post", "fluency_delta"];

impl ParticipantMetrics {
    pub fn metric(&self, name: &str) -> Option<f64> {
        match name {
            "divergent_pct" => self.divergent_pct,
            "convergent_pct" => self.convergent_pct,
            "mean_quality" => self.mean_quality,
            "cue_usage_pct" => self.cue_usage_pct,
            "accepted_unique" => Some(self.accepted_unique as f64),
            "fluency_pre" => self.fluency_pre.map(|f| f.divergent as f64),
            "fluency_post" => self.fluency_post.map(|f| f.divergent as f64),
            "fluency_delta" => match (self.fluency_pre, self.fluency_post) {
                (Some(a), Some(b)) => Some(b.divergent as f64 - a.divergent as f64),
                _ => None,
            },
            "fluency_pre_pct" => self.fluency_pre.and_then(|f| f.divergent_pct),
            "fluency_post_pct" => self.fluency_post.and_then(|f| f.divergent_pct),
            _ => None,
        }
    }
}

/// Per-condition n / mean / sample sd for each summary metric. Missing
/// values are left out of n.
pub fn group_summary(
    ms: &[ParticipantMetrics],
) -> Result<BTreeMap<Condition, BTreeMap<&'static str, Summary>>, AnalyticsError> {
    if ms.is_empty() {
        return Err(AnalyticsError::Empty);
    }
    let mut out = BTreeMap::new();
    for c in Condition::ALL {
        let group: Vec<&ParticipantMetrics> = ms.iter().filter(|m| m.condition == c).collect();
        if group.is_empty() {
            continue;
        }
        let mut per_metric = BTreeMap::new();
        for name in SUMMARY_METRICS {
            let values: Vec<f64> = group.iter().filter_map(|m| m.metric(name)).collect();
            if let Some(s) = summarize(&values) {
                per_metric.insert(name, s);
            }
        }
        out.insert(c, per_metric);
    }
    Ok(out)
}
