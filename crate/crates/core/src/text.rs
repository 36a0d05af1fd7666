//! Tokenization and normalization shared by the corpus, the cue pipeline and
//! the rubrics.

/// Abbreviations that end with a period but never close a sentence.
const ABBREVIATIONS: &[&str] = &[
    "mr", "mrs", "ms", "dr", "prof", "st", "jr", "sr", "vs", "etc", "e.g", "i.e", "approx", "fig",
    "mt", "cf", "mme", "mlle",
];

/// Splits a body into sentences on `.`, `!` or `?` followed by whitespace or
/// the end of the text. Closing quotes and brackets directly after the
/// terminator stay with the sentence.
pub fn split_sentences(body: &str) -> Vec<String> {
    let chars: Vec<(usize, char)> = body.char_indices().collect();
    let mut sentences = Vec::new();
    let mut start = 0usize;
    let mut i = 0usize;
    while i < chars.len() {
        let (_, c) = chars[i];
        if matches!(c, '.' | '!' | '?') {
            let mut j = i + 1;
            while j < chars.len() && matches!(chars[j].1, '.' | '!' | '?' | '"' | '\'' | ')' | ']' | '»' | '”' | '’') {
                j += 1;
            }
            let at_boundary = j == chars.len() || chars[j].1.is_whitespace();
            if at_boundary && !(c == '.' && ends_with_abbreviation(&body[start..chars[i].0])) {
                let end = if j == chars.len() { body.len() } else { chars[j].0 };
                push_trimmed(&mut sentences, &body[start..end]);
                start = end;
            }
            i = j;
        } else {
            i += 1;
        }
    }
    push_trimmed(&mut sentences, &body[start..]);
    sentences
}

fn push_trimmed(out: &mut Vec<String>, s: &str) {
    let s = s.trim();
    if !s.is_empty() {
        out.push(s.to_string());
    }
}

fn ends_with_abbreviation(prefix: &str) -> bool {
    let last = prefix
        .rsplit(|c: char| c.is_whitespace() || c == '(')
        .next()
        .unwrap_or("")
        .to_lowercase();
    // Single capital initials ("J. Smith") also count.
    ABBREVIATIONS.contains(&last.as_str()) || (last.chars().count() == 1 && last.chars().all(char::is_alphabetic))
}

/// Whitespace-token count.
pub fn word_count(body: &str) -> usize {
    body.split_whitespace().count()
}

/// Case-folds, collapses whitespace and strips terminal punctuation.
pub fn normalize(raw: &str) -> String {
    let collapsed = raw.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
    collapsed
        .trim_end_matches(|c: char| matches!(c, '?' | '!' | '.' | '…') || c.is_whitespace())
        .to_string()
}

/// Lowercase word tokens; anything that is not alphanumeric separates words.
/// Single-letter fragments (possessive "s", elided "l") are dropped.
pub fn tokens(s: &str) -> Vec<String> {
    s.split(|c: char| !c.is_alphanumeric())
        .filter(|t| t.chars().count() > 1 || t.chars().all(|c| c.is_ascii_digit()) && !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Light suffix stripping: one inflectional suffix, then a trailing `e`, each
/// only when at least three characters remain.
pub fn stem(token: &str) -> String {
    const RULES: &[(&str, &str)] = &[("ies", "y"), ("ing", ""), ("ed", ""), ("es", ""), ("s", "")];
    let mut out = token.to_string();
    for (suffix, replacement) in RULES {
        if let Some(base) = token.strip_suffix(suffix) {
            if *suffix == "s" && (base.ends_with('s') || base.ends_with('u') || base.ends_with('i')) {
                continue;
            }
            if base.chars().count() >= 3 {
                out = format!("{base}{replacement}");
                break;
            }
        }
    }
    if out.chars().count() > 3 && out.ends_with('e') {
        out.pop();
    }
    out
}

/// True when `needle` occurs as a contiguous run inside `haystack`.
pub fn contains_sequence(haystack: &[String], needle: &[String]) -> bool {
    !needle.is_empty() && haystack.windows(needle.len()).any(|w| w == needle)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_on_terminators_and_keeps_decimals() {
        let s = split_sentences("It is 13.8 billion years old. Why? Dr. Lemaitre said so! End");
        assert_eq!(s, vec!["It is 13.8 billion years old.", "Why?", "Dr. Lemaitre said so!", "End"]);
    }

    #[test]
    fn keeps_closing_quotes_with_sentence() {
        let s = split_sentences("He said \"stop.\" Then he left.");
        assert_eq!(s, vec!["He said \"stop.\"", "Then he left."]);
    }

    #[test]
    fn normalize_collapses_and_strips() {
        assert_eq!(normalize("  What   IS this ?? "), "what is this");
        assert_eq!(normalize("Why?"), "why");
    }

    #[test]
    fn tokens_drop_punctuation_and_fragments() {
        assert_eq!(tokens("What does 'microscopic' mean?"), vec!["what", "does", "microscopic", "mean"]);
        assert_eq!(tokens("the universe's 10 degrees"), vec!["the", "universe", "10", "degrees"]);
    }

    #[test]
    fn stemming_is_light() {
        assert_eq!(stem("explosions"), "explosion");
        assert_eq!(stem("caused"), "caus");
        assert_eq!(stem("cause"), "caus");
        assert_eq!(stem("causes"), "caus");
        assert_eq!(stem("bodies"), "body");
        assert_eq!(stem("universe"), "univers");
        assert_eq!(stem("gas"), "gas");
        assert_eq!(stem("virus"), "virus");
        assert_eq!(stem("is"), "is");
    }

    #[test]
    fn sequence_containment() {
        let hay = tokens("what is the difference between them");
        assert!(contains_sequence(&hay, &tokens("the difference")));
        assert!(!contains_sequence(&hay, &tokens("difference the")));
        assert!(!contains_sequence(&hay, &[]));
    }
}
