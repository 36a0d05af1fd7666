use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::CueMode;
use crate::corpus::ResourceText;

pub(crate) const TEXT_START: &str = "Text:\n";
pub(crate) const TEXT_END: &str = "\n\nInstruction:";
pub(crate) const OPEN_MARKER: &str = "two key words";

/// Zero-shot prompt templates. `{text}` is replaced by the text body; the
/// text comes first, the instruction after it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PromptTemplates {
    pub incentive: String,
    pub open: String,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        Self {
            incentive: "Text:\n{text}\n\nInstruction: Read the text above. Think of a curious question a \
                        10-year-old child could ask about it whose answer is not written in the text. \
                        Give one questioning word to start that question and one sentence that answers it.\n\
                        Reply on one line in the form: questioning word | answer sentence"
                .into(),
            open: "Text:\n{text}\n\nInstruction: Read the text above. Give one questioning word and two key \
                   words that name important ideas of the text, so that a 10-year-old child can use them \
                   to ask curious questions.\n\
                   Reply on one line in the form: questioning word | key word, key word"
                .into(),
        }
    }
}

impl PromptTemplates {
    pub fn template(&self, mode: CueMode) -> &str {
        match mode {
            CueMode::Incentive => &self.incentive,
            CueMode::Open => &self.open,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PromptError {
    #[error("text `{0}` has an empty body")]
    EmptyBody(String),
    #[error("{0} template has no {{text}} placeholder")]
    MissingPlaceholder(&'static str),
}

pub fn build_prompt(t: &ResourceText, mode: CueMode, templates: &PromptTemplates) -> Result<String, PromptError> {
    if t.body.trim().is_empty() {
        return Err(PromptError::EmptyBody(t.id.to_string()));
    }
    let template = templates.template(mode);
    if !template.contains("{text}") {
        return Err(PromptError::MissingPlaceholder(mode.as_str()));
    }
    Ok(template.replace("{text}", t.body.trim()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samples::sample_corpus;

    fn pasteur() -> ResourceText {
        sample_corpus().text(&"pasteur".into()).unwrap().clone()
    }

    #[test]
    fn incentive_prompt_puts_text_before_instruction() {
        let t = pasteur();
        let p = build_prompt(&t, CueMode::Incentive, &PromptTemplates::default()).unwrap();
        let body_at = p.find(&t.body).unwrap();
        let instr_at = p.find("Instruction:").unwrap();
        assert!(body_at < instr_at);
        assert!(p.contains("questioning word | answer sentence"));
        assert!(!p.contains(OPEN_MARKER));
    }

    #[test]
    fn open_prompt_requests_two_key_words() {
        let p = build_prompt(&pasteur(), CueMode::Open, &PromptTemplates::default()).unwrap();
        assert!(p.contains("two key words"));
        assert!(p.contains("key word, key word"));
    }

    #[test]
    fn empty_body_is_an_error() {
        let mut t = pasteur();
        t.body = "  ".into();
        assert_eq!(build_prompt(&t, CueMode::Open, &PromptTemplates::default()), Err(PromptError::EmptyBody("pasteur".into())));
    }

    #[test]
    fn template_without_placeholder_is_rejected() {
        let templates = PromptTemplates { incentive: "no text here".into(), ..Default::default() };
        assert!(build_prompt(&pasteur(), CueMode::Incentive, &templates).is_err());
    }
}
