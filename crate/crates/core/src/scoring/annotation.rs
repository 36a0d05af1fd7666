//! Human annotation records: grid validation, inter-rater agreement and the
//! reconciled (human over machine) view of scored questions.

use std::collections::HashMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::acceptance::Acceptance;
use super::divergence::DivergenceLabel;
use super::syntax::QualityBreakdown;
use super::ChildQuestion;
use crate::ids::{AnnotatorId, CueId, QuestionId};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", content = "id", rename_all = "snake_case")]
pub enum AnnotationTarget {
    Cue(CueId),
    Question(QuestionId),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Grid {
    /// 1..=5
    Relatedness(u8),
    /// 1..=3
    DivergenceLevel(u8),
    /// 1..=5, 5 = not at all offensive
    Offensiveness(u8),
    DivergenceLabel(DivergenceLabel),
    Quality(QualityBreakdown),
    Acceptance(Acceptance),
    CueUsage(bool),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridKind {
    Relatedness,
    DivergenceLevel,
    Offensiveness,
    DivergenceLabel,
    Quality,
    Acceptance,
    CueUsage,
}

impl Grid {
    pub fn kind(&self) -> GridKind {
        match self {
            Grid::Relatedness(_) => GridKind::Relatedness,
            Grid::DivergenceLevel(_) => GridKind::DivergenceLevel,
            Grid::Offensiveness(_) => GridKind::Offensiveness,
            Grid::DivergenceLabel(_) => GridKind::DivergenceLabel,
            Grid::Quality(_) => GridKind::Quality,
            Grid::Acceptance(_) => GridKind::Acceptance,
            Grid::CueUsage(_) => GridKind::CueUsage,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub annotator_id: AnnotatorId,
    pub target: AnnotationTarget,
    pub grid: Grid,
    pub timestamp: DateTime<Utc>,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum GridError {
    #[error("{kind:?} value {value} outside {min}..={max}")]
    OutOfRange { kind: GridKind, value: u8, min: u8, max: u8 },
    #[error("quality breakdown {0:?} is not a valid grid value")]
    InvalidQuality(QualityBreakdown),
    #[error("unknown grid kind: {0}")]
    UnknownKind(String),
    #[error("malformed annotation record: {0}")]
    Malformed(String),
    #[error("annotator `{annotator}` already recorded {kind:?} for {target:?}")]
    Duplicate { annotator: AnnotatorId, target: AnnotationTarget, kind: GridKind },
}

impl AnnotationRecord {
    /// Parses one JSON record and validates its grid value.
    pub fn from_json(src: &str) -> Result<Self, GridError> {
        let record: Self = serde_json::from_str(src).map_err(|e| {
            let msg = e.to_string();
            if msg.contains("unknown variant") {
                GridError::UnknownKind(msg)
            } else {
                GridError::Malformed(msg)
            }
        })?;
        validate_grid(&record)?;
        Ok(record)
    }
}

pub fn validate_grid(record: &AnnotationRecord) -> Result<(), GridError> {
    let range = |kind, value: u8, min, max| {
        if (min..=max).contains(&value) {
            Ok(())
        } else {
            Err(GridError::OutOfRange { kind, value, min, max })
        }
    };
    match &record.grid {
        Grid::Relatedness(v) => range(GridKind::Relatedness, *v, 1, 5),
        Grid::DivergenceLevel(v) => range(GridKind::DivergenceLevel, *v, 1, 3),
        Grid::Offensiveness(v) => range(GridKind::Offensiveness, *v, 1, 5),
        Grid::Quality(q) if !q.is_valid() => Err(GridError::InvalidQuality(*q)),
        _ => Ok(()),
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum AgreementError {
    #[error("annotation lists are empty")]
    Empty,
    #[error("annotation lists cover different targets")]
    MismatchedTargets,
    #[error("annotation lists mix grid kinds")]
    MixedKinds,
}

/// Share of targets on which two annotators gave exactly the same value. Both
/// lists must cover the same targets in the same order with one grid kind.
pub fn percent_agreement(a: &[AnnotationRecord], b: &[AnnotationRecord]) -> Result<f64, AgreementError> {
    if a.is_empty() && b.is_empty() {
        return Err(AgreementError::Empty);
    }
    if a.len() != b.len() || a.iter().zip(b).any(|(x, y)| x.target != y.target) {
        return Err(AgreementError::MismatchedTargets);
    }
    let kind = a[0].grid.kind();
    if a.iter().chain(b).any(|r| r.grid.kind() != kind) {
        return Err(AgreementError::MixedKinds);
    }
    let equal = a.iter().zip(b).filter(|(x, y)| x.grid == y.grid).count();
    Ok(equal as f64 / a.len() as f64)
}

/// Component-wise mean of quality breakdowns; halves are exact in `f64`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReconciledQuality {
    pub high_level: f64,
    pub construction: f64,
    pub qword_use: f64,
    pub total: f64,
}

impl From<QualityBreakdown> for ReconciledQuality {
    fn from(q: QualityBreakdown) -> Self {
        Self {
            high_level: q.high_level.into(),
            construction: q.construction.into(),
            qword_use: q.qword_use.into(),
            total: q.total.into(),
        }
    }
}

pub fn reconcile_quality(a: QualityBreakdown, b: QualityBreakdown) -> ReconciledQuality {
    mean_quality(&[a, b]).expect("two breakdowns")
}

pub fn mean_quality(items: &[QualityBreakdown]) -> Option<ReconciledQuality> {
    if items.is_empty() {
        return None;
    }
    let n = items.len() as f64;
    let mean = |f: fn(&QualityBreakdown) -> u8| items.iter().map(|q| f64::from(f(q))).sum::<f64>() / n;
    let high_level = mean(|q| q.high_level);
    let construction = mean(|q| q.construction);
    let qword_use = mean(|q| q.qword_use);
    Some(ReconciledQuality { high_level, construction, qword_use, total: high_level + construction + qword_use })
}

/// Append-only store with one record per (annotator, target, grid kind).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AnnotationLedger {
    records: Vec<AnnotationRecord>,
}

impl AnnotationLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn records(&self) -> &[AnnotationRecord] {
        &self.records
    }

    pub fn insert(&mut self, record: AnnotationRecord) -> Result<(), GridError> {
        validate_grid(&record)?;
        let kind = record.grid.kind();
        if self
            .records
            .iter()
            .any(|r| r.annotator_id == record.annotator_id && r.target == record.target && r.grid.kind() == kind)
        {
            return Err(GridError::Duplicate { annotator: record.annotator_id, target: record.target, kind });
        }
        self.records.push(record);
        Ok(())
    }

    fn for_question<'a>(&'a self, id: &'a QuestionId, kind: GridKind) -> impl Iterator<Item = &'a AnnotationRecord> + 'a {
        self.records
            .iter()
            .filter(move |r| matches!(&r.target, AnnotationTarget::Question(q) if q == id) && r.grid.kind() == kind)
    }

    /// Most recent human record of a kind; later insertion wins ties.
    fn latest<'a>(&'a self, id: &'a QuestionId, kind: GridKind) -> Option<&'a Grid> {
        self.for_question(id, kind)
            .enumerate()
            .max_by_key(|(i, r)| (r.timestamp, *i))
            .map(|(_, r)| &r.grid)
    }

    /// All records of one annotator for one grid kind, keyed by target.
    pub fn by_annotator(&self, annotator: &AnnotatorId, kind: GridKind) -> HashMap<AnnotationTarget, &AnnotationRecord> {
        self.records
            .iter()
            .filter(|r| &r.annotator_id == annotator && r.grid.kind() == kind)
            .map(|r| (r.target.clone(), r))
            .collect()
    }

    /// Human-over-machine view of one scored question.
    pub fn reconcile(&self, q: &ChildQuestion) -> ReconciledQuestion {
        let accepted = match self.latest(&q.id, GridKind::Acceptance) {
            Some(Grid::Acceptance(a)) => a.is_accepted(),
            _ => q.acceptance.is_accepted(),
        };
        let (divergence, divergence_from_human) = match self.latest(&q.id, GridKind::DivergenceLabel) {
            Some(Grid::DivergenceLabel(l)) => (Some(*l), true),
            _ => (q.divergence.as_ref().map(|d| d.label), false),
        };
        let machine_needs_human = q.divergence.as_ref().is_none_or(|d| d.needs_human);
        let used_cues = match self.latest(&q.id, GridKind::CueUsage) {
            Some(Grid::CueUsage(b)) => Some(*b),
            _ => q.used_cues.as_ref().map(|u| u.used),
        };
        let human_quality: Vec<QualityBreakdown> = self
            .for_question(&q.id, GridKind::Quality)
            .filter_map(|r| match &r.grid {
                Grid::Quality(b) => Some(*b),
                _ => None,
            })
            .collect();
        let quality = mean_quality(&human_quality).or_else(|| q.quality.map(Into::into));
        ReconciledQuestion {
            id: q.id.clone(),
            normalized: q.normalized.clone(),
            accepted,
            divergence,
            divergence_unresolved: accepted && !divergence_from_human && machine_needs_human,
            used_cues,
            quality,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReconciledQuestion {
    pub id: QuestionId,
    pub normalized: String,
    pub accepted: bool,
    pub divergence: Option<DivergenceLabel>,
    /// Accepted, flagged for human review by the machine, and not yet labeled.
    pub divergence_unresolved: bool,
    pub used_cues: Option<bool>,
    pub quality: Option<ReconciledQuality>,
}
