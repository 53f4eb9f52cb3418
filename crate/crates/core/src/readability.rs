//! Flesch Reading Ease scoring.
//!
//! `score = C - 1.015 * (words / sentences) - 84.6 * (syllables / words)`
//!
//! `C` defaults to 206.185; [`FleschConstant::Canonical`] switches to the
//! textbook 206.835. Scores are not clamped, so very short plain sentences can
//! exceed 100.
//!
//! A word is a whitespace-delimited token that still contains a letter after
//! enclosing punctuation is stripped. Numerals and bare symbols are ignored.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::text::{self, Token};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ReadabilityError {
    #[error("`{0}` has no alphabetic characters")]
    NoAlphabetic(String),
    #[error("text `{0}` has no words or sentences")]
    EmptyText(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FleschConstant {
    /// 206.185
    #[default]
    Published,
    /// 206.835
    Canonical,
}

impl FleschConstant {
    pub fn value(self) -> f64 {
        match self {
            FleschConstant::Published => 206.185,
            FleschConstant::Canonical => 206.835,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TextStatistics {
    pub total_words: usize,
    pub total_sentences: usize,
    pub total_syllables: usize,
}

impl TextStatistics {
    pub fn new(total_words: usize, total_sentences: usize, total_syllables: usize) -> Self {
        TextStatistics {
            total_words,
            total_sentences,
            total_syllables,
        }
    }

    /// Counts words, sentences, and syllables after stripping list markers
    /// and glossary asterisks.
    pub fn from_text(text: &str) -> Self {
        let prose = strip_formatting(text);
        let mut stats = TextStatistics::default();
        for sentence in segment_sentences(&prose) {
            let mut words_here = 0;
            for tok in sentence.split_whitespace() {
                let Some(word) = word_core(tok) else { continue };
                words_here += 1;
                stats.total_syllables += syllables_in_token(word);
            }
            if words_here > 0 {
                stats.total_words += words_here;
                stats.total_sentences += 1;
            }
        }
        stats
    }

    pub fn merge(self, other: TextStatistics) -> TextStatistics {
        TextStatistics {
            total_words: self.total_words + other.total_words,
            total_sentences: self.total_sentences + other.total_sentences,
            total_syllables: self.total_syllables + other.total_syllables,
        }
    }
}

/// Removes numbered-paragraph markers (`1)`, `2/10`) at line starts and the
/// `*` glossary marks. Everything else is left untouched.
pub fn strip_formatting(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut cursor = 0;
    for tok in text::tokens(text) {
        if text::is_list_marker(&tok) {
            out.push_str(&text[cursor..tok.start]);
            cursor = tok.end;
        }
    }
    out.push_str(&text[cursor..]);
    out.replace('*', "")
}

/// Strips enclosing punctuation; `None` if no letter remains.
fn word_core(token: &str) -> Option<&str> {
    let core = token.trim_matches(|c: char| !c.is_alphanumeric());
    core.chars().any(char::is_alphabetic).then_some(core)
}

fn syllables_in_token(word: &str) -> usize {
    let parts: usize = word
        .split(['-', '/', '\u{2013}', '\u{2014}'])
        .filter_map(|p| count_syllables(p).ok())
        .sum();
    parts.max(1)
}

/// Splits on `.`, `!`, `?` followed by whitespace or end of text, with an
/// abbreviation guard (`v.`, `U.S.`, `Mr.`, `No. 5`, `e.g.`) and no split
/// after numbered-list markers. Returned slices are trimmed and nonempty.
pub fn segment_sentences(text: &str) -> Vec<&str> {
    let toks = text::tokens(text);
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    for (i, tok) in toks.iter().enumerate() {
        let s = *start.get_or_insert(tok.start);
        if text::ends_sentence(tok, toks.get(i + 1)) {
            out.push(&text[s..tok.end]);
            start = None;
        }
    }
    if let (Some(s), Some(last)) = (start, toks.last()) {
        out.push(&text[s..last.end]);
    }
    out
}

/// Indices of tokens that close a sentence.
pub(crate) fn sentence_end_flags(toks: &[Token<'_>]) -> Vec<bool> {
    (0..toks.len())
        .map(|i| text::ends_sentence(&toks[i], toks.get(i + 1)))
        .collect()
}

fn is_vowel(c: u8) -> bool {
    matches!(c, b'a' | b'e' | b'i' | b'o' | b'u' | b'y')
}

/// Vowel-group syllable heuristic.
///
/// Counts maximal runs of `aeiouy`, then drops a trailing silent `e` (also in
/// `-es` and `-ed` endings that are not pronounced), except for a
/// consonant + `le`/`les` ending. Contractions like `isn't` add back the
/// syllable lost with the apostrophe. Never returns less than 1.
pub fn count_syllables(word: &str) -> Result<usize, ReadabilityError> {
    let letters: Vec<u8> = word
        .chars()
        .filter(char::is_ascii_alphabetic)
        .map(|c| c.to_ascii_lowercase() as u8)
        .collect();
    if letters.is_empty() {
        if word.chars().any(char::is_alphabetic) {
            // Non-ASCII letters: one syllable per word.
            return Ok(1);
        }
        return Err(ReadabilityError::NoAlphabetic(word.to_string()));
    }

    let mut groups = 0usize;
    let mut prev_vowel = false;
    for &c in &letters {
        let v = is_vowel(c);
        if v && !prev_vowel {
            groups += 1;
        }
        prev_vowel = v;
    }

    let n = letters.len();
    let at = |i: usize| letters[i];
    let consonant = |i: usize| !is_vowel(letters[i]);

    if n >= 2 && at(n - 1) == b'e' && consonant(n - 2) {
        let consonant_le = n >= 3 && at(n - 2) == b'l' && consonant(n - 3);
        if !consonant_le {
            groups = groups.saturating_sub(1);
        }
    } else if n >= 3 && at(n - 2) == b'e' && consonant(n - 3) {
        match at(n - 1) {
            b's' => {
                let stem = at(n - 3);
                let sibilant = matches!(stem, b's' | b'x' | b'z' | b'c' | b'g')
                    || (n >= 4 && at(n - 3) == b'h' && matches!(at(n - 4), b'c' | b's'));
                let consonant_les = n >= 4 && stem == b'l' && consonant(n - 4);
                if !sibilant && !consonant_les {
                    groups = groups.saturating_sub(1);
                }
            }
            b'd' if !matches!(at(n - 3), b't' | b'd') => {
                groups = groups.saturating_sub(1);
            }
            _ => {}
        }
    }

    let lower = word.to_lowercase().replace('\u{2019}', "'");
    if let Some(stem) = lower.strip_suffix("n't") {
        if stem.chars().last().is_some_and(|c| "sdl".contains(c)) {
            groups += 1;
        }
    }

    Ok(groups.max(1))
}

pub fn flesch_reading_ease(stats: &TextStatistics) -> Result<f64, ReadabilityError> {
    flesch_reading_ease_with(stats, FleschConstant::default())
}

pub fn flesch_reading_ease_with(
    stats: &TextStatistics,
    constant: FleschConstant,
) -> Result<f64, ReadabilityError> {
    if stats.total_words == 0 || stats.total_sentences == 0 {
        return Err(ReadabilityError::EmptyText(String::new()));
    }
    let words = stats.total_words as f64;
    let sentences = stats.total_sentences as f64;
    let syllables = stats.total_syllables as f64;
    Ok(constant.value() - 1.015 * (words / sentences) - 84.6 * (syllables / words))
}

/// Conventional Flesch interpretation bands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Band {
    VeryEasy,
    Easy,
    FairlyEasy,
    PlainEnglish,
    FairlyDifficult,
    HardToRead,
    VeryDifficult,
}

impl Band {
    pub fn label(self) -> &'static str {
        match self {
            Band::VeryEasy => "very easy",
            Band::Easy => "easy",
            Band::FairlyEasy => "fairly easy",
            Band::PlainEnglish => "plain English",
            Band::FairlyDifficult => "fairly difficult",
            Band::HardToRead => "hard to read",
            Band::VeryDifficult => "very difficult to read",
        }
    }
}

impl fmt::Display for Band {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Maps a score to its band. A score of exactly 30 is "very difficult to
/// read"; every other boundary belongs to the band above it.
pub fn interpret_score(score: f64) -> Band {
    match score {
        s if s >= 90.0 => Band::VeryEasy,
        s if s >= 80.0 => Band::Easy,
        s if s >= 70.0 => Band::FairlyEasy,
        s if s >= 60.0 => Band::PlainEnglish,
        s if s >= 50.0 => Band::FairlyDifficult,
        s if s > 30.0 => Band::HardToRead,
        _ => Band::VeryDifficult,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredText {
    pub text_id: String,
    pub stats: TextStatistics,
    pub score: f64,
    pub band: Band,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReadabilityReport {
    pub per_text: Vec<ScoredText>,
    pub mean_score: f64,
}

impl ReadabilityReport {
    pub fn mean_band(&self) -> Band {
        interpret_score(self.mean_score)
    }

    /// `text_id,words,sentences,syllables,flesch,band` rows with header.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["text_id", "words", "sentences", "syllables", "flesch", "band"])
            .expect("in-memory csv");
        for t in &self.per_text {
            w.write_record([
                t.text_id.clone(),
                t.stats.total_words.to_string(),
                t.stats.total_sentences.to_string(),
                t.stats.total_syllables.to_string(),
                format!("{:.3}", t.score),
                t.band.label().to_string(),
            ])
            .expect("in-memory csv");
        }
        String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf8 csv")
    }
}

pub fn score_text(
    text_id: &str,
    text: &str,
    constant: FleschConstant,
) -> Result<ScoredText, ReadabilityError> {
    let stats = TextStatistics::from_text(text);
    let score = flesch_reading_ease_with(&stats, constant)
        .map_err(|_| ReadabilityError::EmptyText(text_id.to_string()))?;
    Ok(ScoredText {
        text_id: text_id.to_string(),
        stats,
        score,
        band: interpret_score(score),
    })
}

pub fn score_corpus<S: AsRef<str>, T: AsRef<str>>(
    texts: &[(S, T)],
) -> Result<ReadabilityReport, ReadabilityError> {
    score_corpus_with(texts, FleschConstant::default())
}

pub fn score_corpus_with<S: AsRef<str>, T: AsRef<str>>(
    texts: &[(S, T)],
    constant: FleschConstant,
) -> Result<ReadabilityReport, ReadabilityError> {
    let per_text = texts
        .iter()
        .map(|(id, text)| score_text(id.as_ref(), text.as_ref(), constant))
        .collect::<Result<Vec<_>, _>>()?;
    let mean_score = if per_text.is_empty() {
        f64::NAN
    } else {
        per_text.iter().map(|t| t.score).sum::<f64>() / per_text.len() as f64
    };
    Ok(ReadabilityReport {
        per_text,
        mean_score,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flesch_hand_evaluated() {
        let s = flesch_reading_ease(&TextStatistics::new(100, 5, 150)).unwrap();
        assert!((s - 58.985).abs() < 1e-9);
        let s = flesch_reading_ease(&TextStatistics::new(6, 1, 6)).unwrap();
        assert!((s - 115.495).abs() < 1e-9);
    }

    #[test]
    fn canonical_constant_shifts_by_065() {
        let st = TextStatistics::new(100, 5, 150);
        let a = flesch_reading_ease_with(&st, FleschConstant::Published).unwrap();
        let b = flesch_reading_ease_with(&st, FleschConstant::Canonical).unwrap();
        assert!((b - a - 0.65).abs() < 1e-9);
    }

    #[test]
    fn cat_sat_counts() {
        let st = TextStatistics::from_text("The cat sat on the mat.");
        assert_eq!(st, TextStatistics::new(6, 1, 6));
        let s = flesch_reading_ease(&st).unwrap();
        assert!((s - 115.495).abs() < 1e-9);
    }

    #[test]
    fn empty_text_errors() {
        assert!(matches!(
            flesch_reading_ease(&TextStatistics::new(0, 0, 0)),
            Err(ReadabilityError::EmptyText(_))
        ));
        assert!(matches!(
            score_text("t1", "  1) 2) ", FleschConstant::Published),
            Err(ReadabilityError::EmptyText(id)) if id == "t1"
        ));
    }

    #[test]
    fn sentences() {
        assert_eq!(
            segment_sentences("The cat sat. The dog ran."),
            ["The cat sat.", "The dog ran."]
        );
        assert_eq!(segment_sentences("Roe v. Wade was decided."), ["Roe v. Wade was decided."]);
        assert!(segment_sentences("").is_empty());
        assert!(segment_sentences("   \n ").is_empty());
        assert_eq!(segment_sentences("no punctuation here"), ["no punctuation here"]);
        assert_eq!(
            segment_sentences("Is it? Yes! It is."),
            ["Is it?", "Yes!", "It is."]
        );
    }

    #[test]
    fn abbreviation_guards() {
        let s = segment_sentences("The U.S. Supreme Court ruled. Mr. Smith won.");
        assert_eq!(s, ["The U.S. Supreme Court ruled.", "Mr. Smith won."]);
        let s = segment_sentences("See No. 5 for details. Pens, paper, etc. were bought.");
        assert_eq!(s, ["See No. 5 for details.", "Pens, paper, etc. were bought."]);
        let s = segment_sentences("They said no. Then they left.");
        assert_eq!(s.len(), 2);
        let s = segment_sentences("Bring pens, etc. The meeting starts soon.");
        assert_eq!(s.len(), 2);
        let s = segment_sentences("He said \"stop.\" Then he left.");
        assert_eq!(s, ["He said \"stop.\"", "Then he left."]);
        let s = segment_sentences("The fee was 3.5 dollars. Fine.");
        assert_eq!(s.len(), 2);
    }

    #[test]
    fn numbered_markers_do_not_end_sentences() {
        let text = "1) The first point.\n\n2. The second point.\n\n3/10 Third.";
        let s = segment_sentences(text);
        assert_eq!(s, ["1) The first point.", "2. The second point.", "3/10 Third."]);
    }

    #[test]
    fn syllable_examples() {
        assert_eq!(count_syllables("cat").unwrap(), 1);
        assert_eq!(count_syllables("table").unwrap(), 2);
        assert_eq!(count_syllables("scrutiny").unwrap(), 3);
        assert_eq!(count_syllables("the").unwrap(), 1);
        assert_eq!(count_syllables("whole").unwrap(), 1);
        assert_eq!(count_syllables("tables").unwrap(), 2);
        assert_eq!(count_syllables("makes").unwrap(), 1);
        assert_eq!(count_syllables("cases").unwrap(), 2);
        assert_eq!(count_syllables("asked").unwrap(), 1);
        assert_eq!(count_syllables("decided").unwrap(), 3);
        assert_eq!(count_syllables("isn't").unwrap(), 2);
        assert_eq!(count_syllables("don't").unwrap(), 1);
        assert!(matches!(
            count_syllables("1234"),
            Err(ReadabilityError::NoAlphabetic(_))
        ));
    }

    #[test]
    fn word_rules() {
        // numerals and symbols are not words; hyphen parts are summed
        let st = TextStatistics::from_text("In 2018, a 7th-grade text & more.");
        assert_eq!(st.total_words, 5);
        assert_eq!(st.total_sentences, 1);
        assert_eq!(
            st.total_syllables,
            1 + 1 + (1 + 1) + 1 + 1,
            "in + a + 7th-grade + text + more"
        );
    }

    #[test]
    fn formatting_is_stripped() {
        let raw = "1) A *term here.\n\n2) Next line.\n\n*Term: meaning.";
        let stripped = strip_formatting(raw);
        assert!(!stripped.contains('*'));
        assert!(!stripped.contains("1)"));
        assert_eq!(
            TextStatistics::from_text(raw),
            TextStatistics::from_text(&stripped)
        );
    }

    #[test]
    fn bands() {
        assert_eq!(interpret_score(65.0).label(), "plain English");
        assert_eq!(interpret_score(40.0).label(), "hard to read");
        assert_eq!(interpret_score(15.0).label(), "very difficult to read");
        assert_eq!(interpret_score(30.0).label(), "very difficult to read");
        assert_eq!(interpret_score(95.0), Band::VeryEasy);
        assert_eq!(interpret_score(85.0), Band::Easy);
        assert_eq!(interpret_score(75.0), Band::FairlyEasy);
        assert_eq!(interpret_score(55.0), Band::FairlyDifficult);
        assert_eq!(interpret_score(-20.0), Band::VeryDifficult);
        assert_eq!(interpret_score(130.0), Band::VeryEasy);
    }

    #[test]
    fn corpus_mean() {
        let single = score_corpus(&[("a", "The cat sat on the mat.")]).unwrap();
        assert_eq!(single.mean_score, single.per_text[0].score);
        let twins = score_corpus(&[("a", "A dog ran far."), ("b", "A dog ran far.")]).unwrap();
        assert_eq!(twins.per_text[0].score, twins.per_text[1].score);
        assert_eq!(twins.mean_score, twins.per_text[0].score);
        let err = score_corpus(&[("ok", "Fine text."), ("bad", "42")]).unwrap_err();
        assert_eq!(err, ReadabilityError::EmptyText("bad".into()));
    }

    #[test]
    fn csv_layout() {
        let r = score_corpus(&[("a", "The cat sat on the mat.")]).unwrap();
        let csv = r.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "text_id,words,sentences,syllables,flesch,band");
        assert_eq!(lines.next().unwrap(), "a,6,1,6,115.495,very easy");
    }
}
