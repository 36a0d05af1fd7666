use serde::{Deserialize, Serialize};

use super::lexicon::QuestionLexicon;
use super::Thresholds;
use crate::corpus::ResourceText;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DivergenceLabel {
    Convergent,
    Divergent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceSuggestion {
    pub label: DivergenceLabel,
    pub confidence: f64,
    pub needs_human: bool,
    /// Highest share of the question's content tokens found in one sentence.
    pub best_overlap: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub best_sentence: Option<usize>,
}

/// Answer-span heuristic: a question is convergent when one sentence of the
/// text contains at least `convergence_overlap` of its content tokens.
/// Confidence is the distance from the threshold, scaled to [0, 1] on each
/// side of it.
pub fn classify_divergence(raw: &str, t: &ResourceText, lex: &QuestionLexicon, thresholds: &Thresholds) -> DivergenceSuggestion {
    let question = lex.content_token_set(raw);
    let mut best_overlap = 0.0;
    let mut best_sentence = None;
    if !question.is_empty() {
        for (i, s) in t.sentences.iter().enumerate() {
            let sentence = lex.content_token_set(s);
            let overlap = question.intersection(&sentence).count() as f64 / question.len() as f64;
            if overlap > best_overlap {
                best_overlap = overlap;
                best_sentence = Some(i);
            }
        }
    }
    let theta = thresholds.convergence_overlap;
    let (label, confidence) = if best_overlap >= theta {
        let span = 1.0 - theta;
        (DivergenceLabel::Convergent, if span > 0.0 { (best_overlap - theta) / span } else { 1.0 })
    } else {
        (DivergenceLabel::Divergent, if theta > 0.0 { (theta - best_overlap) / theta } else { 1.0 })
    };
    DivergenceSuggestion {
        label,
        confidence,
        needs_human: confidence < thresholds.needs_human_below,
        best_overlap,
        best_sentence,
    }
}
