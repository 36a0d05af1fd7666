//! Wire shape of a completion: `question word | answer sentence` for
//! incentive cues, `question word | keyword, keyword` for open cues.

use thiserror::Error;

use super::{CueContent, CueMode, CuePayload};

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("expected question word and answer, got `{0}`")]
    ExpectedAnswer(String),
    #[error("expected question word and two key words, got `{0}`")]
    ExpectedKeywords(String),
    #[error("empty question word in `{0}`")]
    EmptyQuestionWord(String),
    #[error("expected two distinct key words, got `{0}`")]
    IdenticalKeywords(String),
}

fn clean(s: &str) -> &str {
    s.trim().trim_matches(|c| matches!(c, '"' | '\'' | '“' | '”' | '«' | '»')).trim()
}

pub fn parse_cue_output(raw: &str, mode: CueMode) -> Result<CueContent, ParseError> {
    let line = raw.trim();
    let shape_error = |s: &str| match mode {
        CueMode::Incentive => ParseError::ExpectedAnswer(s.to_string()),
        CueMode::Open => ParseError::ExpectedKeywords(s.to_string()),
    };
    let (qw, rest) = line.split_once('|').ok_or_else(|| shape_error(line))?;
    let question_word = clean(qw);
    if question_word.is_empty() {
        return Err(ParseError::EmptyQuestionWord(line.to_string()));
    }
    let rest = clean(rest);
    let payload = match mode {
        CueMode::Incentive => {
            if rest.is_empty() || rest.contains('|') {
                return Err(shape_error(line));
            }
            CuePayload::Incentive { answer_sentence: rest.to_string() }
        }
        CueMode::Open => {
            let parts: Vec<&str> = rest.split(',').map(clean).collect();
            match parts.as_slice() {
                [a, b] if !a.is_empty() && !b.is_empty() => {
                    if a.to_lowercase() == b.to_lowercase() {
                        return Err(ParseError::IdenticalKeywords(line.to_string()));
                    }
                    CuePayload::Open { keywords: (a.to_string(), b.to_string()) }
                }
                _ => return Err(shape_error(line)),
            }
        }
    };
    Ok(CueContent { question_word: question_word.to_string(), payload })
}

pub fn format_cue(content: &CueContent) -> String {
    match &content.payload {
        CuePayload::Incentive { answer_sentence } => format!("{} | {}", content.question_word, answer_sentence),
        CuePayload::Open { keywords } => format!("{} | {}, {}", content.question_word, keywords.0, keywords.1),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pasteur_incentive_cue() {
        let c = parse_cue_output(
            "What difference | The vaccine avoids the disease whilst medicine treats it",
            CueMode::Incentive,
        )
        .unwrap();
        assert_eq!(c, CueContent::incentive("What difference", "The vaccine avoids the disease whilst medicine treats it"));
    }

    #[test]
    fn pasteur_open_cue() {
        let c = parse_cue_output("What other | Canning, Freezing", CueMode::Open).unwrap();
        assert_eq!(c, CueContent::open("What other", "Canning", "Freezing"));
    }

    #[test]
    fn malformed_outputs_name_the_expected_shape() {
        let err = parse_cue_output("just one blob", CueMode::Incentive).unwrap_err();
        assert!(err.to_string().starts_with("expected question word and answer"));
        let err = parse_cue_output("What | only", CueMode::Open).unwrap_err();
        assert!(err.to_string().starts_with("expected question word and two key words"));
        assert_eq!(
            parse_cue_output("Why | Lava, lava", CueMode::Open).unwrap_err(),
            ParseError::IdenticalKeywords("Why | Lava, lava".into())
        );
        assert!(matches!(parse_cue_output(" | answer", CueMode::Incentive), Err(ParseError::EmptyQuestionWord(_))));
        assert!(parse_cue_output("Why | a, b, c", CueMode::Open).is_err());
    }

    #[test]
    fn surrounding_whitespace_and_quotes_are_trimmed() {
        let c = parse_cue_output("\n  \"What if\" |  \"Gravity, Moon\" \n", CueMode::Open).unwrap();
        assert_eq!(c, CueContent::open("What if", "Gravity", "Moon"));
    }

    fn field() -> impl Strategy<Value = String> {
        "[A-Za-z][A-Za-z0-9 ]{0,20}[A-Za-z0-9]".prop_map(|s| s.split_whitespace().collect::<Vec<_>>().join(" "))
    }

    proptest! {
        #[test]
        fn parse_inverts_format(qw in field(), a in field(), b in field(), open in any::<bool>()) {
            let content = if open {
                prop_assume!(a.to_lowercase() != b.to_lowercase());
                CueContent::open(&qw, &a, &b)
            } else {
                CueContent::incentive(&qw, &a)
            };
            let wire = format_cue(&content);
            prop_assert_eq!(parse_cue_output(&wire, content.mode()).unwrap(), content);
        }
    }
}
