//! Whitespace tokenization with byte offsets, plus the sentence-end rule shared
//! by the chunker and the readability scorer.

/// A maximal non-whitespace run and its byte range in the source.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Token<'a> {
    pub text: &'a str,
    pub start: usize,
    pub end: usize,
    /// True when only whitespace containing a newline (or nothing) precedes it
    /// on its line.
    pub line_start: bool,
}

pub(crate) fn tokens(text: &str) -> Vec<Token<'_>> {
    let mut out = Vec::new();
    let mut start = None;
    let mut line_start = true;
    let mut token_line_start = true;
    for (i, ch) in text.char_indices() {
        if ch.is_whitespace() {
            if let Some(s) = start.take() {
                out.push(Token {
                    text: &text[s..i],
                    start: s,
                    end: i,
                    line_start: token_line_start,
                });
                line_start = false;
            }
            if ch == '\n' {
                line_start = true;
            }
        } else if start.is_none() {
            start = Some(i);
            token_line_start = line_start;
        }
    }
    if let Some(s) = start {
        out.push(Token {
            text: &text[s..],
            start: s,
            end: text.len(),
            line_start: token_line_start,
        });
    }
    out
}

const CLOSERS: &[char] = &['"', '\'', ')', ']', '}', '\u{2019}', '\u{201D}', '*'];

const ALWAYS_GUARDED: &[&str] = &[
    "v.", "vs.", "mr.", "mrs.", "ms.", "dr.", "st.", "jr.", "sr.", "prof.", "inc.", "co.",
    "corp.", "ltd.", "ct.", "cf.", "pa.", "supp.", "art.", "sec.",
];

/// Numbered-paragraph marker such as `1)`, `2.`, or `3/10` at the start of a line.
pub(crate) fn is_list_marker(token: &Token<'_>) -> bool {
    token.line_start && is_marker_text(token.text)
}

pub(crate) fn is_marker_text(text: &str) -> bool {
    let digits_then = |s: &str, tail: &str| {
        s.strip_suffix(tail)
            .is_some_and(|d| !d.is_empty() && d.bytes().all(|b| b.is_ascii_digit()))
    };
    if digits_then(text, ")") || digits_then(text, ".") {
        return true;
    }
    match text.split_once('/') {
        Some((a, b)) => {
            !a.is_empty()
                && !b.is_empty()
                && a.bytes().all(|c| c.is_ascii_digit())
                && b.bytes().all(|c| c.is_ascii_digit())
        }
        None => false,
    }
}

fn is_initialism(word: &str) -> bool {
    // U.S., e.g., i.e., D.C., R.
    let bytes = word.as_bytes();
    bytes.len() >= 2
        && bytes.len().is_multiple_of(2)
        && bytes
            .chunks(2)
            .all(|p| p[0].is_ascii_alphabetic() && p[1] == b'.')
}

/// Whether `token` closes a sentence, given the token that follows it.
pub(crate) fn ends_sentence(token: &Token<'_>, next: Option<&Token<'_>>) -> bool {
    let core = token.text.trim_end_matches(CLOSERS);
    if !core.ends_with(['.', '!', '?']) {
        return false;
    }
    if is_list_marker(token) {
        return false;
    }
    if core.ends_with(['!', '?']) {
        return true;
    }
    let word = core.trim_start_matches(|c: char| !c.is_alphanumeric());
    let lower = word.to_lowercase();
    if ALWAYS_GUARDED.contains(&lower.as_str()) || is_initialism(word) {
        return false;
    }
    let next_first = next.and_then(|n| {
        n.text
            .trim_start_matches(|c: char| !c.is_alphanumeric())
            .chars()
            .next()
    });
    match lower.as_str() {
        "no." | "nos." => !next_first.is_some_and(|c| c.is_ascii_digit()),
        "etc." => next_first.is_none_or(|c| c.is_uppercase()),
        _ => true,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn offsets_cover_tokens() {
        let src = "  one two\n three ";
        let toks = tokens(src);
        let words: Vec<_> = toks.iter().map(|t| t.text).collect();
        assert_eq!(words, ["one", "two", "three"]);
        for t in &toks {
            assert_eq!(&src[t.start..t.end], t.text);
        }
        assert!(toks[0].line_start);
        assert!(!toks[1].line_start);
        assert!(toks[2].line_start);
    }

    #[test]
    fn markers() {
        assert!(is_marker_text("1)"));
        assert!(is_marker_text("10."));
        assert!(is_marker_text("2/10"));
        assert!(!is_marker_text("a)"));
        assert!(!is_marker_text("/10"));
    }
}
