use std::collections::BTreeMap;

use serde::Serialize;

use super::CueSet;
use crate::text;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QwordStats {
    pub histogram: BTreeMap<String, usize>,
    /// Share of cues whose question word is compound; 0 for an empty list.
    pub compound_ratio: f64,
}

/// Question-word distribution of a cue list. A question word is compound when
/// it appears in `compound_lexicon` or spans several tokens.
pub fn qword_stats(cues: &[CueSet], compound_lexicon: &[String]) -> QwordStats {
    let mut histogram = BTreeMap::new();
    let mut compound = 0usize;
    for c in cues {
        let key = c.content.question_word.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
        let is_compound = text::tokens(&key).len() > 1 || compound_lexicon.iter().any(|w| w.to_lowercase() == key);
        compound += usize::from(is_compound);
        *histogram.entry(key).or_insert(0) += 1;
    }
    let compound_ratio = if cues.is_empty() { 0.0 } else { compound as f64 / cues.len() as f64 };
    QwordStats { histogram, compound_ratio }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cue_pipeline::{CueContent, Provenance};

    fn with_words(words: &[&str]) -> Vec<CueSet> {
        words
            .iter()
            .enumerate()
            .map(|(i, w)| CueSet::pending(format!("c{i}"), "t".into(), CueContent::open(w, "a", "b"), Provenance::Hand))
            .collect()
    }

    #[test]
    fn single_words_only() {
        let s = qword_stats(&with_words(&["What", "what ", "WHAT"]), &[]);
        assert_eq!(s.compound_ratio, 0.0);
        assert_eq!(s.histogram.get("what"), Some(&3));
    }

    #[test]
    fn half_compound() {
        let s = qword_stats(&with_words(&["What difference", "What", "What if", "Why"]), &[]);
        assert_eq!(s.compound_ratio, 0.5);
        assert_eq!(s.histogram.len(), 4);
    }

    #[test]
    fn lexicon_marks_single_token_compounds() {
        let s = qword_stats(&with_words(&["Wherefore", "Why"]), &["wherefore".to_string()]);
        assert_eq!(s.compound_ratio, 0.5);
    }

    #[test]
    fn empty_list() {
        let s = qword_stats(&[], &[]);
        assert!(s.histogram.is_empty());
        assert_eq!(s.compound_ratio, 0.0);
    }
}
