//! Syntactic quality grid: one point for a high-level question, 1–4 points for
//! the construction and 1–3 points for the use of questioning words.

use serde::{Deserialize, Serialize};

use super::lexicon::QuestionLexicon;
use crate::text;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct QualityBreakdown {
    pub high_level: u8,
    pub construction: u8,
    pub qword_use: u8,
    pub total: u8,
}

impl QualityBreakdown {
    /// Builds a breakdown from components; `None` when a component is out of
    /// its grid range.
    pub fn new(high_level: u8, construction: u8, qword_use: u8) -> Option<Self> {
        let ok = high_level <= 1 && (1..=4).contains(&construction) && (1..=3).contains(&qword_use);
        ok.then(|| Self { high_level, construction, qword_use, total: high_level + construction + qword_use })
    }

    pub fn is_valid(&self) -> bool {
        Self::new(self.high_level, self.construction, self.qword_use).is_some_and(|b| b.total == self.total)
    }
}

/// Where the first questioning word sits and which starter it opens.
struct Analysis {
    tokens: Vec<String>,
    qword_at: Option<usize>,
    terminal_mark: bool,
}

fn analyze(raw: &str, lex: &QuestionLexicon) -> Analysis {
    let tokens = text::tokens(raw);
    let qword_at = tokens.iter().position(|t| lex.is_questioning_word(t));
    Analysis { tokens, qword_at, terminal_mark: raw.trim_end().ends_with('?') }
}

fn starts_with_any(tokens: &[String], patterns: &[String]) -> bool {
    patterns.iter().any(|p| {
        let p = text::tokens(p);
        !p.is_empty() && tokens.starts_with(&p)
    })
}

/// Inversion or wh-fronting after a sentence-initial questioning word.
fn interrogative_order(tokens: &[String], lex: &QuestionLexicon) -> bool {
    let Some(wh) = tokens.first() else { return false };
    if starts_with_any(tokens, &lex.compound_words)
        && tokens.len() > 1
        && matches!(tokens[1].as_str(), "if" | "come" | "not" | "si")
    {
        // "what if", "how come": the clause keeps declarative order.
        return tokens.len() > 2;
    }
    let Some(next) = tokens.get(1) else { return false };
    if lex.is_aux(next) {
        return true;
    }
    if lex.is_determiner(next) {
        return false;
    }
    if lex.wh_with_complement.contains(wh) {
        for t in tokens.iter().skip(1).take(3) {
            if lex.is_determiner(t) {
                break;
            }
            if lex.is_aux(t) {
                return true;
            }
        }
    }
    lex.wh_subjects.contains(wh) && !lex.is_questioning_word(next)
}

pub fn high_level(raw: &str, lex: &QuestionLexicon) -> bool {
    let a = analyze(raw, lex);
    match a.qword_at {
        Some(i) => starts_with_any(&a.tokens[i..], &lex.high_level_patterns),
        None => false,
    }
}

/// Scores a question on the syntactic grid.
pub fn syntactic_score(raw: &str, lex: &QuestionLexicon) -> QualityBreakdown {
    let a = analyze(raw, lex);
    let construction = match a.qword_at {
        None => 1,
        Some(0) if a.terminal_mark && interrogative_order(&a.tokens, lex) => 4,
        Some(0) => 3,
        Some(_) => 2,
    };
    let qword_use = match (a.qword_at, a.tokens.first()) {
        (Some(_), _) => 3,
        (None, Some(first)) if lex.is_aux(first) => 2,
        _ => 1,
    };
    let high = match a.qword_at {
        Some(i) => u8::from(starts_with_any(&a.tokens[i..], &lex.high_level_patterns)),
        None => 0,
    };
    QualityBreakdown::new(high, construction, qword_use).expect("grid components in range")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn score(q: &str) -> (u8, u8, u8, u8) {
        let b = syntactic_score(q, &QuestionLexicon::english());
        (b.high_level, b.construction, b.qword_use, b.total)
    }

    #[test]
    fn dinosaur_grid_examples() {
        assert_eq!(score("Why are dinosaurs big?"), (1, 4, 3, 8));
        assert_eq!(score("Dinosaurs were big?"), (0, 1, 1, 2));
        assert_eq!(score("The dinosaurs were how big?"), (0, 2, 3, 5));
        assert_eq!(score("Are dinosaurs big?"), (0, 1, 2, 3));
        assert_eq!(score("Why the dinosaurs are big ?"), (1, 3, 3, 7));
    }

    #[test]
    fn fact_versus_mechanism() {
        assert_eq!(score("How big is a dinosaur?").0, 0);
        assert_eq!(score("Why were dinosaurs so big?").0, 1);
        assert_eq!(score("How big were the dinosaurs?"), (0, 4, 3, 7));
    }

    #[test]
    fn wh_subject_and_compounds() {
        assert_eq!(score("What caused the birth of the universe?").1, 4);
        assert_eq!(score("Who discovered vaccines?").1, 4);
        assert_eq!(score("What if the Moon disappeared?"), (1, 4, 3, 8));
        assert_eq!(score("What is the difference between vaccines and medicine?"), (1, 4, 3, 8));
        assert_eq!(score("What other foods are pasteurised?").1, 4);
    }

    #[test]
    fn missing_question_mark_drops_to_three() {
        assert_eq!(score("What caused the Big Bang explosion").1, 3);
    }

    #[test]
    fn degenerate_inputs_stay_in_range() {
        for q in ["", "?", "Why?", "what", "123"] {
            let b = syntactic_score(q, &QuestionLexicon::english());
            assert!(b.is_valid(), "{q}: {b:?}");
        }
    }

    #[test]
    fn component_ranges() {
        assert!(QualityBreakdown::new(0, 0, 1).is_none());
        assert!(QualityBreakdown::new(2, 1, 1).is_none());
        assert!(QualityBreakdown::new(0, 1, 4).is_none());
        assert_eq!(QualityBreakdown::new(1, 4, 3).unwrap().total, 8);
    }
}
