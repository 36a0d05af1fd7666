use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::Condition;
use crate::cue_pipeline::{CuePayload, CueSet};

/// Phrases an agent message must never contain: the agent does not comment on
/// the quality of a child's question.
pub const FEEDBACK_DENYLIST: &[&str] = &[
    "good",
    "great",
    "excellent",
    "well done",
    "correct",
    "incorrect",
    "wrong",
    "right",
    "bad",
    "perfect",
    "mistake",
    "not a question",
    "try harder",
    "nice question",
    "bravo",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UtteranceTemplate {
    pub id: String,
    /// Slots: `{question_word}`, `{answer_sentence}`, `{keyword1}`,
    /// `{keyword2}`, `{starters}`.
    pub template: String,
}

impl UtteranceTemplate {
    fn new(id: &str, template: &str) -> Self {
        Self { id: id.into(), template: template.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct UtterancePool {
    pub templates: BTreeMap<Condition, Vec<UtteranceTemplate>>,
    /// Alternative starters offered in open-cue turns.
    pub starters: Vec<String>,
}

fn incentive_templates(prefix: &str) -> Vec<UtteranceTemplate> {
    vec![
        UtteranceTemplate::new(
            &format!("{prefix}-1"),
            "Here is a questioning word: \"{question_word}\". And here is the answer to a question: \"{answer_sentence}\". Which question could go with them?",
        ),
        UtteranceTemplate::new(
            &format!("{prefix}-2"),
            "Let's find another question together. Start with \"{question_word}\". The answer is: \"{answer_sentence}\". What is the question?",
        ),
        UtteranceTemplate::new(
            &format!("{prefix}-3"),
            "New cue! Questioning word: \"{question_word}\". Answer: \"{answer_sentence}\". Type the question you think of.",
        ),
    ]
}

impl Default for UtterancePool {
    fn default() -> Self {
        let open = vec![
            UtteranceTemplate::new(
                "open-1",
                "You could start with \"{question_word}\" and use the words \"{keyword1}\" and \"{keyword2}\". You can also use other starters, like {starters}.",
            ),
            UtteranceTemplate::new(
                "open-2",
                "Here are two key words: \"{keyword1}\" and \"{keyword2}\". Try the questioning word \"{question_word}\", or pick another starter such as {starters}.",
            ),
            UtteranceTemplate::new(
                "open-3",
                "Let's ask something new about \"{keyword1}\" and \"{keyword2}\". \"{question_word}\" is one way to begin; other starters work too: {starters}.",
            ),
        ];
        let mut templates = BTreeMap::new();
        templates.insert(Condition::HandIncentive, incentive_templates("hand"));
        templates.insert(Condition::AutoIncentive, incentive_templates("auto"));
        templates.insert(Condition::AutoOpen, open);
        let starters = ["why", "how", "what if", "what difference", "what would happen"].map(String::from).to_vec();
        Self { templates, starters }
    }
}

impl UtterancePool {
    pub fn for_condition(&self, c: Condition) -> &[UtteranceTemplate] {
        self.templates.get(&c).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Every condition needs two or more templates with distinct ids; open
    /// templates must offer the alternative starters.
    pub fn validate(&self) -> Result<(), String> {
        for c in Condition::ALL {
            let pool = self.for_condition(c);
            if pool.len() < 2 {
                return Err(format!("{c}: need at least 2 utterance templates, got {}", pool.len()));
            }
            let mut ids: Vec<&str> = pool.iter().map(|t| t.id.as_str()).collect();
            ids.sort_unstable();
            ids.dedup();
            if ids.len() != pool.len() {
                return Err(format!("{c}: duplicate template ids"));
            }
            for t in pool {
                let needed: &[&str] = match c.mode() {
                    crate::cue_pipeline::CueMode::Incentive => &["{question_word}", "{answer_sentence}"],
                    crate::cue_pipeline::CueMode::Open => &["{question_word}", "{keyword1}", "{keyword2}", "{starters}"],
                };
                if let Some(slot) = needed.iter().find(|s| !t.template.contains(**s)) {
                    return Err(format!("{c}: template `{}` lacks {slot}", t.id));
                }
            }
        }
        if self.starters.is_empty() {
            return Err("starter list is empty".into());
        }
        Ok(())
    }

    /// Template for the `n`-th cue turn of a session. Consecutive turns
    /// always get different templates when the pool has two or more.
    pub fn pick(&self, c: Condition, offset: usize, n: usize) -> Option<&UtteranceTemplate> {
        let pool = self.for_condition(c);
        (!pool.is_empty()).then(|| &pool[(offset + n) % pool.len()])
    }

    pub fn render(&self, t: &UtteranceTemplate, cue: &CueSet) -> String {
        let mut out = t
            .template
            .replace("{question_word}", &cue.content.question_word)
            .replace("{starters}", &self.starters.iter().map(|s| format!("\"{s}\"")).collect::<Vec<_>>().join(", "));
        match &cue.content.payload {
            CuePayload::Incentive { answer_sentence } => out = out.replace("{answer_sentence}", answer_sentence),
            CuePayload::Open { keywords } => {
                out = out.replace("{keyword1}", &keywords.0).replace("{keyword2}", &keywords.1);
            }
        }
        out
    }
}

/// Neutral replies after a question. The first list follows a question that
/// closes the turn, the second asks for another try without judging.
pub fn neutral_acks() -> (&'static [&'static str], &'static [&'static str]) {
    (
        &["Thank you for your question!", "Thanks, I have noted your question.", "Thank you! Let's continue."],
        &[
            "Okay. Type a question about the text when you are ready.",
            "Thanks. Let's keep going: ask me a question about the text.",
        ],
    )
}

/// Lowercase word-boundary search for denylisted feedback phrases.
pub fn feedback_hits(message: &str) -> Vec<&'static str> {
    let words: Vec<String> = crate::text::tokens(message);
    FEEDBACK_DENYLIST
        .iter()
        .copied()
        .filter(|phrase| crate::text::contains_sequence(&words, &crate::text::tokens(phrase)))
        .collect()
}
