use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{CueAnnotations, CueSet, ReviewStatus};
use crate::ids::{AnnotatorId, CueId};
use crate::text;

/// Uniform sample without replacement of `min(k, len)` candidates, returned in
/// their original order. No quality filtering happens here: convergent-leading
/// cues stay in the pool.
pub fn sample_for_review<T: Clone>(candidates: &[T], k: usize, rng_seed: u64) -> Vec<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let amount = k.min(candidates.len());
    let mut picked = rand::seq::index::sample(&mut rng, candidates.len(), amount).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| candidates[i].clone()).collect()
}

/// Locale-keyed list of blocked words and phrases, loaded from configuration.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Blocklist {
    #[serde(flatten)]
    pub entries: BTreeMap<String, Vec<String>>,
}

impl Blocklist {
    pub fn new(locale: &str, words: impl IntoIterator<Item = impl Into<String>>) -> Self {
        let mut entries = BTreeMap::new();
        entries.insert(locale.to_string(), words.into_iter().map(Into::into).collect());
        Self { entries }
    }

    pub fn from_toml(src: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(src)
    }

    fn for_locale(&self, locale: &str) -> &[String] {
        let primary = locale.split(['-', '_']).next().unwrap_or(locale);
        self.entries.get(locale).or_else(|| self.entries.get(primary)).map(Vec::as_slice).unwrap_or(&[])
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScreenResult {
    pub flagged: bool,
    pub matches: Vec<String>,
}

/// Case-insensitive, word-boundary match of every blocklist entry against the
/// cue's visible strings.
pub fn screen_offensive(c: &CueSet, blocklist: &Blocklist, locale: &str) -> ScreenResult {
    let mut strings = c.content.texts();
    if let Some(t) = &c.target_question {
        strings.push(t);
    }
    let tokens: Vec<String> = strings.iter().flat_map(|s| text::tokens(s)).collect();
    let matches: Vec<String> = blocklist
        .for_locale(locale)
        .iter()
        .filter(|entry| text::contains_sequence(&tokens, &text::tokens(entry)))
        .cloned()
        .collect();
    ScreenResult { flagged: !matches.is_empty(), matches }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    Approved,
    Rejected { reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewDecision {
    #[serde(flatten)]
    pub verdict: Verdict,
    pub annotations: Option<CueAnnotations>,
    pub annotator: AnnotatorId,
    /// Explicit human override of a positive offensiveness screen.
    #[serde(default)]
    pub override_screen: bool,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ReviewError {
    #[error("cue `{0}` was already reviewed")]
    AlreadyReviewed(CueId),
    #[error("{grid} value {value} outside {min}..={max}")]
    OutOfRange { grid: &'static str, value: u8, min: u8, max: u8 },
    #[error("cue `{0}` was flagged by the offensiveness screen; approval needs an explicit override")]
    FlaggedWithoutOverride(CueId),
    #[error("cue `{0}` was not screened before approval")]
    NotScreened(CueId),
    #[error("approval of `{0}` requires annotations")]
    MissingAnnotations(CueId),
    #[error("rejection needs a reason")]
    EmptyReason,
}

fn check_range(grid: &'static str, value: u8, min: u8, max: u8) -> Result<(), ReviewError> {
    if (min..=max).contains(&value) {
        Ok(())
    } else {
        Err(ReviewError::OutOfRange { grid, value, min, max })
    }
}

/// Moves a pending cue to Approved or Rejected. Reviewed cues never
/// transition again.
pub fn apply_review(c: &CueSet, decision: ReviewDecision, at: DateTime<Utc>) -> Result<CueSet, ReviewError> {
    if !matches!(c.review_status, ReviewStatus::Pending) {
        return Err(ReviewError::AlreadyReviewed(c.id.clone()));
    }
    if let Some(a) = &decision.annotations {
        check_range("relatedness", a.relatedness, 1, 5)?;
        check_range("divergence_level", a.divergence_level, 1, 3)?;
        check_range("offensiveness", a.offensiveness, 1, 5)?;
    }
    let mut out = c.clone();
    out.review_status = match decision.verdict {
        Verdict::Approved => {
            let screen = c.screen.as_ref().ok_or_else(|| ReviewError::NotScreened(c.id.clone()))?;
            if screen.flagged && !decision.override_screen {
                return Err(ReviewError::FlaggedWithoutOverride(c.id.clone()));
            }
            if decision.annotations.is_none() {
                return Err(ReviewError::MissingAnnotations(c.id.clone()));
            }
            ReviewStatus::Approved { annotator: decision.annotator, at }
        }
        Verdict::Rejected { reason } => {
            if reason.trim().is_empty() {
                return Err(ReviewError::EmptyReason);
            }
            ReviewStatus::Rejected { reason, annotator: decision.annotator, at }
        }
    };
    if let Some(a) = decision.annotations {
        out.annotations = Some(CueAnnotations::new(a.relatedness, a.divergence_level, a.offensiveness));
    }
    Ok(out)
}
