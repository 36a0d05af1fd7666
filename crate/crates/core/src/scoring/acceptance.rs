use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::lexicon::QuestionLexicon;
use super::Thresholds;
use crate::corpus::ResourceText;
use crate::cue_pipeline::CueSet;
use crate::text;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    NotAQuestion,
    Unrelated,
    Duplicate,
    /// Assigned by human annotators only.
    NotSerious,
}

impl RejectReason {
    pub fn as_str(self) -> &'static str {
        match self {
            RejectReason::NotAQuestion => "not_a_question",
            RejectReason::Unrelated => "unrelated",
            RejectReason::Duplicate => "duplicate",
            RejectReason::NotSerious => "not_serious",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "verdict", content = "reason", rename_all = "snake_case")]
pub enum Acceptance {
    Accepted,
    Rejected(RejectReason),
}

impl Acceptance {
    pub fn is_accepted(self) -> bool {
        matches!(self, Acceptance::Accepted)
    }
}

/// The text a question is asked about, plus the cue on screen when it was
/// typed (none during the fluency test).
#[derive(Debug, Clone, Copy)]
pub struct QuestionContext<'a> {
    pub text: &'a ResourceText,
    pub theme_title: Option<&'a str>,
    pub cue: Option<&'a CueSet>,
}

/// Interrogative form: a terminal question mark, or a leading questioning or
/// auxiliary word.
pub fn is_interrogative(raw: &str, lex: &QuestionLexicon) -> bool {
    if raw.trim_end().ends_with('?') {
        return true;
    }
    text::tokens(raw).first().is_some_and(|t| lex.is_questioning_word(t) || lex.is_aux(t))
}

/// Shares enough content tokens with the text or theme title. The bar is
/// `min(threshold, number of content tokens in the question)` so that a
/// question with a single content word can still qualify.
pub fn is_related_to_text(raw: &str, ctx: &QuestionContext<'_>, lex: &QuestionLexicon, thresholds: &Thresholds) -> bool {
    let question = lex.content_token_set(raw);
    if question.is_empty() {
        return false;
    }
    let mut source = lex.content_token_set(&ctx.text.body);
    source.extend(lex.content_token_set(&ctx.text.title));
    if let Some(title) = ctx.theme_title {
        source.extend(lex.content_token_set(title));
    }
    let shared = question.intersection(&source).count();
    shared >= thresholds.relatedness_min_shared.min(question.len())
}

/// Uses at least one content token of the cue payload or target question.
pub fn uses_cue_tokens(raw: &str, cue: &CueSet, lex: &QuestionLexicon) -> bool {
    let question = lex.content_token_set(raw);
    let mut cue_tokens: HashSet<String> = HashSet::new();
    for s in cue.content.texts().into_iter().skip(1) {
        cue_tokens.extend(lex.content_tokens(s));
    }
    if let Some(t) = &cue.target_question {
        cue_tokens.extend(lex.content_tokens(t));
    }
    !question.is_disjoint(&cue_tokens)
}

/// Machine acceptance verdict. Criteria are checked in order: interrogative
/// form, relatedness (text overlap or cue use), then duplicates among prior
/// accepted normalized questions.
pub fn accept_question(
    raw: &str,
    ctx: &QuestionContext<'_>,
    prior: &HashSet<String>,
    lex: &QuestionLexicon,
    thresholds: &Thresholds,
) -> Acceptance {
    if raw.trim().is_empty() || !is_interrogative(raw, lex) {
        return Acceptance::Rejected(RejectReason::NotAQuestion);
    }
    let related = is_related_to_text(raw, ctx, lex, thresholds) || ctx.cue.is_some_and(|c| uses_cue_tokens(raw, c, lex));
    if !related {
        return Acceptance::Rejected(RejectReason::Unrelated);
    }
    if prior.contains(&text::normalize(raw)) {
        return Acceptance::Rejected(RejectReason::Duplicate);
    }
    Acceptance::Accepted
}
