use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text;

/// Locale-specific word lists driving the rule-based question analysis.
/// Multi-word entries are written with single spaces and matched as token
/// sequences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionLexicon {
    pub locale: String,
    pub questioning_words: Vec<String>,
    pub compound_words: Vec<String>,
    pub aux_inversion_words: Vec<String>,
    /// Starters whose answer explains a mechanism or relationship.
    pub high_level_patterns: Vec<String>,
    /// Wh-words that may be followed by a modifier or noun before the verb
    /// ("how big were", "what other foods are").
    pub wh_with_complement: Vec<String>,
    /// Wh-words that can stand as the subject of the verb ("who discovered").
    pub wh_subjects: Vec<String>,
    /// Determiners and pronouns; a wh-word followed by one of these has not
    /// been inverted ("why the dinosaurs are").
    pub determiners: Vec<String>,
    pub stopwords: Vec<String>,
}

#[derive(Debug, Error, PartialEq)]
pub enum LexiconError {
    #[error("lexicon `{locale}`: list `{list}` is empty")]
    EmptyList { locale: String, list: &'static str },
    #[error("lexicon `{locale}`: entry `{entry}` is not lowercase")]
    NotLowercase { locale: String, entry: String },
    #[error("no lexicon for locale `{0}`")]
    MissingLocale(String),
    #[error("invalid lexicon file: {0}")]
    Parse(String),
}

fn words(s: &str) -> Vec<String> {
    s.split(',').map(|w| w.trim().to_string()).filter(|w| !w.is_empty()).collect()
}

impl QuestionLexicon {
    pub fn english() -> Self {
        Self {
            locale: "en".into(),
            questioning_words: words("what, why, how, who, whom, whose, when, where, which"),
            compound_words: words(
                "what difference, what if, what other, how come, what relation, what kind, \
                 what would, what will, what makes, what happens, how else, why not",
            ),
            aux_inversion_words: words(
                "is, are, was, were, am, do, does, did, can, could, will, would, shall, should, \
                 has, have, had, may, might, must, isn't, aren't, don't, doesn't, didn't",
            ),
            high_level_patterns: words(
                "why, how come, what if, what difference, what is the difference, \
                 what are the differences, what was the difference, what relation, \
                 what is the relation, what is the relationship, what would happen, \
                 what will happen, what happens if, what makes, what causes, what caused, \
                 how does, how do, how did, what would, why not",
            ),
            wh_with_complement: words("how, what, which, whose"),
            wh_subjects: words("what, who, which"),
            determiners: words(
                "the, a, an, this, that, these, those, my, your, his, her, its, our, their, \
                 it, they, he, she, we, you, i, there, some, all",
            ),
            stopwords: words(
                "a, an, the, and, or, but, if, of, to, in, on, at, by, for, with, from, into, \
                 about, as, than, then, so, too, very, just, also, not, no, yes, it, its, this, \
                 that, these, those, there, here, he, she, they, them, we, you, i, me, my, your, \
                 his, her, our, their, what, why, how, who, whom, whose, when, where, which, \
                 is, are, was, were, am, be, been, being, do, does, did, done, doing, can, could, \
                 will, would, shall, should, has, have, had, may, might, must, get, got, make, \
                 made, many, much, more, most, some, any, all, each, other, such, own, same, \
                 mean, means, meant, meaning, thing, things, happen, happens, happened, way, \
                 kind, come, came, one, ones, s, t, only, like, up, out, over, after, before",
            ),
        }
    }

    /// A minimal French lexicon; elided forms ("qu'est") split on the
    /// apostrophe during tokenization.
    pub fn french() -> Self {
        Self {
            locale: "fr".into(),
            questioning_words: words("quoi, que, qu, pourquoi, comment, qui, quand, où, quel, quelle, quels, quelles, combien, lequel, laquelle"),
            compound_words: words("quelle différence, et si, quels autres, quelles autres, comment se fait, pourquoi pas, est ce que"),
            aux_inversion_words: words("est, sont, était, étaient, as, a, ont, peut, peuvent, fait, font"),
            high_level_patterns: words("pourquoi, quelle différence, quelle est la différence, et si, comment se fait, que se passerait, qu est ce qui cause, comment"),
            wh_with_complement: words("combien, quel, quelle, quels, quelles, comment"),
            wh_subjects: words("qui, qu, quel, quelle"),
            determiners: words("le, la, les, un, une, des, ce, cette, ces, mon, ton, son, sa, ses, il, elle, ils, elles, on, je, tu, nous, vous"),
            stopwords: words(
                "le, la, les, un, une, des, de, du, d, l, et, ou, à, au, aux, en, dans, sur, par, pour, avec, \
                 ce, cette, ces, il, elle, ils, elles, on, je, tu, nous, vous, qui, que, qu, quoi, pourquoi, \
                 comment, quand, où, quel, quelle, quels, quelles, combien, est, sont, était, étaient, être, \
                 a, as, ont, avoir, fait, font, faire, se, sa, son, ses, ne, pas, plus, veut, dire",
            ),
        }
    }

    pub fn validate(&self) -> Result<(), LexiconError> {
        let lists: [(&'static str, &Vec<String>); 4] = [
            ("questioning_words", &self.questioning_words),
            ("compound_words", &self.compound_words),
            ("aux_inversion_words", &self.aux_inversion_words),
            ("high_level_patterns", &self.high_level_patterns),
        ];
        for (name, list) in lists {
            if list.is_empty() {
                return Err(LexiconError::EmptyList { locale: self.locale.clone(), list: name });
            }
        }
        let all = self
            .questioning_words
            .iter()
            .chain(&self.compound_words)
            .chain(&self.aux_inversion_words)
            .chain(&self.high_level_patterns)
            .chain(&self.stopwords);
        for entry in all {
            if entry.to_lowercase() != *entry {
                return Err(LexiconError::NotLowercase { locale: self.locale.clone(), entry: entry.clone() });
            }
        }
        Ok(())
    }

    pub fn is_questioning_word(&self, token: &str) -> bool {
        self.questioning_words.iter().any(|w| w == token)
    }

    pub fn is_aux(&self, token: &str) -> bool {
        self.aux_inversion_words.iter().any(|w| w == token)
    }

    pub fn is_determiner(&self, token: &str) -> bool {
        self.determiners.iter().any(|w| w == token)
    }

    pub fn is_stopword(&self, token: &str) -> bool {
        self.stopwords.iter().any(|w| w == token)
    }

    /// Stemmed, stopword-free tokens.
    pub fn content_tokens(&self, s: &str) -> Vec<String> {
        text::tokens(s).into_iter().filter(|t| !self.is_stopword(t)).map(|t| text::stem(&t)).collect()
    }

    pub fn content_token_set(&self, s: &str) -> HashSet<String> {
        self.content_tokens(s).into_iter().collect()
    }

    /// A question word is compound when it is listed as such or spans more
    /// than one token.
    pub fn is_compound(&self, question_word: &str) -> bool {
        let norm = text::tokens(question_word).join(" ");
        text::tokens(question_word).len() > 1 || self.compound_words.contains(&norm)
    }
}

/// Lexicons keyed by locale tag.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct LexiconSet {
    lexicons: BTreeMap<String, QuestionLexicon>,
}

impl LexiconSet {
    pub fn builtin() -> Self {
        let mut set = Self::default();
        set.insert(QuestionLexicon::english());
        set.insert(QuestionLexicon::french());
        set
    }

    pub fn insert(&mut self, lexicon: QuestionLexicon) {
        self.lexicons.insert(lexicon.locale.clone(), lexicon);
    }

    /// Looks up a lexicon by exact tag, then by primary language subtag
    /// ("en-GB" falls back to "en").
    pub fn get(&self, locale: &str) -> Result<&QuestionLexicon, LexiconError> {
        let primary = locale.split(['-', '_']).next().unwrap_or(locale);
        self.lexicons
            .get(locale)
            .or_else(|| self.lexicons.get(primary))
            .ok_or_else(|| LexiconError::MissingLocale(locale.to_string()))
    }

    pub fn from_toml(src: &str) -> Result<QuestionLexicon, LexiconError> {
        let lex: QuestionLexicon = toml::from_str(src).map_err(|e| LexiconError::Parse(e.to_string()))?;
        lex.validate()?;
        Ok(lex)
    }

    /// Every locale used by the given corpus must resolve to a valid lexicon.
    pub fn check_covers<'a>(&self, locales: impl IntoIterator<Item = &'a str>) -> Result<(), LexiconError> {
        for locale in locales {
            self.get(locale)?.validate()?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_lexicons_are_valid() {
        QuestionLexicon::english().validate().unwrap();
        QuestionLexicon::french().validate().unwrap();
    }

    #[test]
    fn locale_fallback_to_primary_subtag() {
        let set = LexiconSet::builtin();
        assert_eq!(set.get("en-GB").unwrap().locale, "en");
        assert_eq!(set.get("de").unwrap_err(), LexiconError::MissingLocale("de".into()));
    }

    #[test]
    fn uppercase_entries_are_rejected() {
        let mut lex = QuestionLexicon::english();
        lex.questioning_words.push("What".into());
        assert!(matches!(lex.validate(), Err(LexiconError::NotLowercase { .. })));
    }

    #[test]
    fn content_tokens_drop_frame_words() {
        let lex = QuestionLexicon::english();
        assert_eq!(lex.content_tokens("What does 'microscopic' mean?"), vec!["microscopic"]);
        assert_eq!(lex.content_tokens("What caused the birth of the universe?"), vec!["caus", "birth", "univers"]);
    }

    #[test]
    fn compound_detection() {
        let lex = QuestionLexicon::english();
        assert!(lex.is_compound("What difference"));
        assert!(lex.is_compound("What if"));
        assert!(!lex.is_compound("Why"));
    }

    #[test]
    fn toml_round_trip() {
        let lex = QuestionLexicon::english();
        let src = toml::to_string(&lex).unwrap();
        assert_eq!(LexiconSet::from_toml(&src).unwrap(), lex);
    }
}
