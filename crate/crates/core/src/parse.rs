//! Shared helpers for the three plain-text model formats.

use thiserror::Error;

/// A parse failure with 1-based line and column of the offending token.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}, column {col}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl ParseError {
    pub fn new(line: usize, col: usize, message: impl Into<String>) -> Self {
        Self { line, col, message: message.into() }
    }
}

/// Strips a `#` comment, returning the payload part of the line.
pub(crate) fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(idx) => &line[..idx],
        None => line,
    }
}

/// Whitespace-separated tokens with their 1-based starting columns.
pub(crate) fn tokens_with_cols(line: &str) -> Vec<(&str, usize)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in line.char_indices() {
        if c.is_whitespace() {
            if let Some(s) = start.take() {
                out.push((&line[s..i], s + 1));
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push((&line[s..], s + 1));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokens_carry_columns() {
        let toks = tokens_with_cols("  a  bc d");
        assert_eq!(toks, vec![("a", 3), ("bc", 6), ("d", 9)]);
    }

    #[test]
    fn comments_are_stripped() {
        assert_eq!(strip_comment("1 2 # three"), "1 2 ");
        assert_eq!(strip_comment("# all"), "");
        assert_eq!(strip_comment("plain"), "plain");
    }

}
