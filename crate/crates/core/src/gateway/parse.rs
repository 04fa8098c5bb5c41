//! Verdict parsing for model responses.
//!
//! Classification answers are read with three rules applied in order:
//! 1. exact schema lines (`Applicability: Yes`, `Adherence: No`);
//! 2. the question keyword followed by yes/no on the same line, case-insensitive, markdown stripped;
//! 3. the first standalone yes/no after the keyword anywhere in the text.
//!
//! Anything beyond rule 1 marks the result `Repaired`. An adherence answer
//! without an applicability answer implies the practice applies.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::AdherenceLabel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ParseStatus {
    Clean,
    Repaired,
    Failed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClassificationParse {
    /// `None` only when `status` is `Failed`.
    pub label: Option<AdherenceLabel>,
    pub status: ParseStatus,
}

const APPLICABILITY: &str = "applicab";
const ADHERENCE: &str = "adheren";

fn strip_markdown(line: &str) -> String {
    line.chars()
        .filter(|c| !matches!(c, '*' | '_' | '`' | '#' | '>' | '~'))
        .collect::<String>()
        .to_lowercase()
}

/// Standalone yes/no words in `text`, with their byte offsets.
fn yes_no_words(text: &str) -> impl Iterator<Item = (usize, bool)> + '_ {
    let mut start = None;
    let mut words = Vec::new();
    for (i, c) in text.char_indices().chain(std::iter::once((text.len(), ' '))) {
        if c.is_alphanumeric() {
            start.get_or_insert(i);
        } else if let Some(s) = start.take() {
            match &text[s..i] {
                "yes" => words.push((s, true)),
                "no" => words.push((s, false)),
                _ => {}
            }
        }
    }
    words.into_iter()
}

fn exact_schema(raw: &str, key: &str) -> Option<bool> {
    raw.lines().find_map(|line| match line.trim().strip_prefix(key)?.trim() {
        "Yes" => Some(true),
        "No" => Some(false),
        _ => None,
    })
}

fn same_line(lines: &[String], keyword: &str) -> Option<bool> {
    lines.iter().find_map(|line| {
        let at = line.find(keyword)?;
        yes_no_words(&line[at..]).next().map(|(_, v)| v)
    })
}

fn after_keyword(text: &str, keyword: &str, other: &str) -> Option<bool> {
    let at = text.find(keyword)?;
    let rest = &text[at + keyword.len()..];
    let window = match rest.find(other) {
        Some(end) => &rest[..end],
        None => rest,
    };
    yes_no_words(window).next().map(|(_, v)| v)
}

pub fn parse_classification(raw: &str) -> ClassificationParse {
    let mut repaired = false;
    let lines: Vec<String> = raw.lines().map(strip_markdown).collect();
    let normalized = lines.join("\n");

    let mut answer = |exact_key: &str, keyword: &str, other: &str| {
        exact_schema(raw, exact_key).or_else(|| {
            let v = same_line(&lines, keyword).or_else(|| after_keyword(&normalized, keyword, other));
            repaired |= v.is_some();
            v
        })
    };
    let applicability = answer("Applicability:", APPLICABILITY, ADHERENCE);
    let adherence = answer("Adherence:", ADHERENCE, APPLICABILITY);

    let label = match (applicability, adherence) {
        (Some(false), _) => Some(AdherenceLabel::NotApplicable),
        (Some(true), Some(true)) => Some(AdherenceLabel::Followed),
        (Some(true), Some(false)) => Some(AdherenceLabel::NotFollowed),
        (None, Some(adh)) => {
            repaired = true;
            Some(if adh { AdherenceLabel::Followed } else { AdherenceLabel::NotFollowed })
        }
        (_, None) => None,
    };
    let status = match label {
        None => ParseStatus::Failed,
        Some(_) if repaired => ParseStatus::Repaired,
        Some(_) => ParseStatus::Clean,
    };
    ClassificationParse { label, status }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreParse {
    pub value: f64,
    pub status: ParseStatus,
}

#[derive(Debug, Error, PartialEq)]
pub enum ScoreParseError {
    #[error("no numeric SCORE line in response")]
    Missing,
    #[error("score {0} is outside [0, 1]")]
    OutOfRange(f64),
}

/// Numbers in `text`: digits with an optional fraction, keeping a leading minus.
fn numbers(text: &str) -> Vec<f64> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let starts_number = bytes[i].is_ascii_digit()
            || (bytes[i] == b'.' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit));
        if !starts_number {
            i += 1;
            continue;
        }
        let negative = i > 0 && bytes[i - 1] == b'-';
        let start = i;
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            i += 1;
        }
        if i < bytes.len() && bytes[i] == b'.' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit) {
            i += 1;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
        }
        if let Ok(v) = text[start..i].parse::<f64>() {
            out.push(if negative { -v } else { v });
        }
    }
    out
}

fn score_line(raw: &str) -> Option<(f64, bool)> {
    raw.lines().find_map(|line| {
        let exact = line.trim_start().starts_with("SCORE:");
        let norm = strip_markdown(line);
        let rest = norm.trim_start().strip_prefix("score")?.trim_start();
        let rest = rest.strip_prefix(':').or_else(|| rest.strip_prefix('='))?;
        numbers(rest).first().map(|v| (*v, exact))
    })
}

fn last_sentence(raw: &str) -> Option<&str> {
    let chars: Vec<(usize, char)> = raw.char_indices().collect();
    let mut sentences = Vec::new();
    let mut start = 0;
    for (k, &(i, c)) in chars.iter().enumerate() {
        let next_is_digit = chars.get(k + 1).is_some_and(|(_, n)| n.is_ascii_digit());
        let ends = matches!(c, '!' | '?' | '\n') || (c == '.' && !next_is_digit);
        if ends {
            sentences.push(&raw[start..i]);
            start = i + c.len_utf8();
        }
    }
    sentences.push(&raw[start..]);
    sentences.into_iter().rev().find(|s| s.chars().any(char::is_alphanumeric))
}

/// Reads the `SCORE: x` answer line; falls back to a single number in the
/// final sentence. Out-of-range values are errors, never clamped.
pub fn parse_score(raw: &str) -> Result<ScoreParse, ScoreParseError> {
    let (value, status) = match score_line(raw) {
        Some((v, true)) => (v, ParseStatus::Clean),
        Some((v, false)) => (v, ParseStatus::Repaired),
        None => {
            let nums = last_sentence(raw).map(numbers).unwrap_or_default();
            match nums.as_slice() {
                [v] => (*v, ParseStatus::Repaired),
                _ => return Err(ScoreParseError::Missing),
            }
        }
    };
    if !(0.0..=1.0).contains(&value) {
        return Err(ScoreParseError::OutOfRange(value));
    }
    Ok(ScoreParse { value, status })
}

#[cfg(test)]
mod tests {
    use super::*;
    use AdherenceLabel::*;

    fn parse(raw: &str) -> (Option<AdherenceLabel>, ParseStatus) {
        let p = parse_classification(raw);
        (p.label, p.status)
    }

    #[test]
    fn contract_table_on_clean_input() {
        assert_eq!(parse("Applicability: Yes\nAdherence: Yes"), (Some(Followed), ParseStatus::Clean));
        assert_eq!(parse("Applicability: Yes\nAdherence: No"), (Some(NotFollowed), ParseStatus::Clean));
        assert_eq!(parse("Applicability: No"), (Some(NotApplicable), ParseStatus::Clean));
        assert_eq!(parse("Applicability: No\nAdherence: Yes"), (Some(NotApplicable), ParseStatus::Clean));
    }

    #[test]
    fn implied_applicability_is_repaired() {
        assert_eq!(
            parse("The practice applies. Adherence: **Yes**."),
            (Some(Followed), ParseStatus::Repaired)
        );
    }

    #[test]
    fn markdown_and_case_drift() {
        assert_eq!(
            parse("**Applicability**: yes\n**Adherence**: NO"),
            (Some(NotFollowed), ParseStatus::Repaired)
        );
        assert_eq!(
            parse("- applicability — Yes, it handles input\n- adherence — yes"),
            (Some(Followed), ParseStatus::Repaired)
        );
    }

    #[test]
    fn keyword_then_answer_on_later_line() {
        let raw = "Applicability:\nYes, request parameters are read.\nAdherence:\nNo.";
        assert_eq!(parse(raw), (Some(NotFollowed), ParseStatus::Repaired));
    }

    #[test]
    fn window_stops_at_other_keyword() {
        // the "no" belongs to adherence, so applicability stays unanswered
        let raw = "Applicability is obvious here.\nAdherence: No";
        assert_eq!(parse(raw), (Some(NotFollowed), ParseStatus::Repaired));
    }

    #[test]
    fn unanswerable_is_failed() {
        assert_eq!(parse(""), (None, ParseStatus::Failed));
        assert_eq!(parse("I cannot determine this."), (None, ParseStatus::Failed));
        assert_eq!(parse("Applicability: Yes"), (None, ParseStatus::Failed));
        assert_eq!(parse("yes no yes"), (None, ParseStatus::Failed));
    }

    #[test]
    fn yes_inside_words_is_not_an_answer() {
        assert_eq!(parse("Applicability: eyes nose\nAdherence: notably"), (None, ParseStatus::Failed));
    }

    #[test]
    fn score_schema_line() {
        assert_eq!(
            parse_score("SCORE: 0.73 — because the query is parameterized"),
            Ok(ScoreParse { value: 0.73, status: ParseStatus::Clean })
        );
        assert_eq!(
            parse_score("JUSTIFICATION: fine\nSCORE: 1"),
            Ok(ScoreParse { value: 1.0, status: ParseStatus::Clean })
        );
        assert_eq!(
            parse_score("**Score**: 0.25"),
            Ok(ScoreParse { value: 0.25, status: ParseStatus::Repaired })
        );
    }

    #[test]
    fn score_out_of_range() {
        assert_eq!(parse_score("SCORE: 1.2"), Err(ScoreParseError::OutOfRange(1.2)));
        assert_eq!(parse_score("SCORE: -0.1"), Err(ScoreParseError::OutOfRange(-0.1)));
    }

    #[test]
    fn score_fallback_to_final_sentence() {
        let raw = "Practices 8 and 15 are violated. Overall I would put it at 0.4.";
        assert_eq!(parse_score(raw), Ok(ScoreParse { value: 0.4, status: ParseStatus::Repaired }));
        assert_eq!(parse_score("Between 0.2 and 0.4."), Err(ScoreParseError::Missing));
        assert_eq!(parse_score("No idea."), Err(ScoreParseError::Missing));
    }
}
