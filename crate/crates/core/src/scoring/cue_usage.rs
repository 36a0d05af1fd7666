use super::acceptance::uses_cue_tokens;
use super::lexicon::QuestionLexicon;
use crate::cue_pipeline::CueSet;
use crate::text;

/// Whether a question builds on the cue it was typed under.
///
/// A question counts as using the cue when it equals the cue's target
/// question, contains a compound cue question word ("what difference") as a
/// token run, or shares a content token with the answer sentence or either
/// keyword. Single interrogatives ("what", "why") are not evidence on their
/// own since nearly every question starts with one.
pub fn detect_cue_usage(raw: &str, cue: &CueSet, lex: &QuestionLexicon) -> bool {
    let normalized = text::normalize(raw);
    if cue.target_question.as_deref().is_some_and(|t| text::normalize(t) == normalized) {
        return true;
    }
    if lex.is_compound(&cue.content.question_word)
        && text::contains_sequence(&text::tokens(raw), &text::tokens(&cue.content.question_word))
    {
        return true;
    }
    uses_cue_tokens(raw, cue, lex)
}
