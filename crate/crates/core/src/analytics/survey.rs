use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::AnalyticsError;
use crate::ids::ParticipantId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurveyPhase {
    Pre,
    Post,
    Once,
}

/// One participant's answers to one instrument. The instrument itself (item
/// wording) lives outside the tool; only numbers and subscale layout are kept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurveyResponse {
    pub participant_id: ParticipantId,
    pub instrument: String,
    pub phase: SurveyPhase,
    pub items: Vec<f64>,
    /// Inclusive value range declared by the instrument.
    pub item_range: (f64, f64),
    /// Named subscales as item index lists.
    #[serde(default)]
    pub subscales: BTreeMap<String, Vec<usize>>,
}

impl SurveyResponse {
    pub fn validate(&self) -> Result<(), AnalyticsError> {
        let (lo, hi) = self.item_range;
        let bad = |m: String| AnalyticsError::InvalidSurvey { instrument: self.instrument.clone(), message: m };
        if let Some((i, v)) = self.items.iter().enumerate().find(|(_, v)| !(lo..=hi).contains(*v)) {
            return Err(bad(format!("item {i} = {v} outside [{lo}, {hi}]")));
        }
        for (name, idx) in &self.subscales {
            if let Some(i) = idx.iter().find(|i| **i >= self.items.len()) {
                return Err(bad(format!("subscale `{name}` index {i} out of range")));
            }
        }
        Ok(())
    }

    /// `total` over all items plus one total per subscale.
    pub fn totals(&self) -> BTreeMap<String, f64> {
        let mut out = BTreeMap::new();
        out.insert("total".to_string(), self.items.iter().sum());
        for (name, idx) in &self.subscales {
            out.insert(name.clone(), idx.iter().map(|i| self.items[*i]).sum());
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrePost {
    pub pre: f64,
    pub post: f64,
    pub delta: f64,
}

impl PrePost {
    pub fn new(pre: f64, post: f64) -> Self {
        Self { pre, post, delta: post - pre }
    }
}

/// Pre/post totals of one instrument scale (`total` or a subscale name).
pub fn pre_post_delta(pre: &SurveyResponse, post: &SurveyResponse, scale: &str) -> Result<PrePost, AnalyticsError> {
    if pre.participant_id != post.participant_id || pre.instrument != post.instrument {
        return Err(AnalyticsError::MismatchedResponses);
    }
    if pre.phase != SurveyPhase::Pre {
        return Err(AnalyticsError::MissingPhase("pre"));
    }
    if post.phase != SurveyPhase::Post {
        return Err(AnalyticsError::MissingPhase("post"));
    }
    pre.validate()?;
    post.validate()?;
    let get = |r: &SurveyResponse| {
        r.totals().get(scale).copied().ok_or_else(|| AnalyticsError::InvalidSurvey {
            instrument: r.instrument.clone(),
            message: format!("no scale `{scale}`"),
        })
    };
    Ok(PrePost::new(get(pre)?, get(post)?))
}

/// Fluency pre/post from divergent-question counts.
pub fn fluency_delta(pre: Option<usize>, post: Option<usize>) -> Result<PrePost, AnalyticsError> {
    let pre = pre.ok_or(AnalyticsError::MissingPhase("pre"))?;
    let post = post.ok_or(AnalyticsError::MissingPhase("post"))?;
    Ok(PrePost::new(pre as f64, post as f64))
}

/// Every instrument with both a pre and a post response, keyed
/// `instrument` for the total and `instrument.subscale` otherwise.
pub fn survey_deltas(
    participant: &ParticipantId,
    responses: &[SurveyResponse],
) -> Result<BTreeMap<String, PrePost>, AnalyticsError> {
    let mut out = BTreeMap::new();
    let mine: Vec<&SurveyResponse> = responses.iter().filter(|r| &r.participant_id == participant).collect();
    for pre in mine.iter().filter(|r| r.phase == SurveyPhase::Pre) {
        let Some(post) = mine.iter().find(|r| r.phase == SurveyPhase::Post && r.instrument == pre.instrument) else {
            continue;
        };
        for scale in pre.totals().keys() {
            let key = if scale == "total" { pre.instrument.clone() } else { format!("{}.{scale}", pre.instrument) };
            out.insert(key, pre_post_delta(pre, post, scale)?);
        }
    }
    Ok(out)
}
