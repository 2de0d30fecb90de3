//! Answer extraction.
//!
//! Rules, tried in order on the trimmed response:
//!
//! 1. The response opens with a standalone option letter, optionally wrapped
//!    in `(…)`, `[…]` or `**…**` and followed by end of text or one of
//!    `. ) ] : , ;` or a line break: `A`, `(B)`, `**C**`, `D. Hotpot`.
//! 2. The last occurrence of `answer is X`, `answer: X` or `answer X`, same
//!    wrappers. An upper-case letter may also be followed by a space
//!    (`The answer is B because …`); a lower-case one must be followed by end
//!    of text or punctuation, so `the answer is a tie` does not match.
//! 3. The whole response equals exactly one option text (case-insensitive,
//!    trailing full stop ignored).
//!
//! A letter at a matched site that lies beyond the option count makes the
//! answer `Unparsed`; later rules are not consulted.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parsed {
    Index(usize),
    Unparsed,
}

impl Parsed {
    pub fn index(self) -> Option<usize> {
        match self {
            Parsed::Index(i) => Some(i),
            Parsed::Unparsed => None,
        }
    }
}

/// Option letter for a zero-based index (`0 → 'A'`).
pub fn letter(index: usize) -> char {
    (b'A' + index as u8) as char
}

/// `"A, B, C or D"`.
pub fn letter_list(n: usize) -> String {
    let letters: Vec<String> = (0..n).map(|i| letter(i).to_string()).collect();
    match letters.len() {
        0 => String::new(),
        1 => letters[0].clone(),
        k => format!("{} or {}", letters[..k - 1].join(", "), letters[k - 1]),
    }
}

fn leading_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"^(?:\*\*|\(|\[)?[ \t]*([A-Za-z])(?:[ \t]*(?:\*\*|[.):\],;])|\s*$|[ \t]*\r?\n)").expect("valid regex")
    })
}

fn answer_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?i:answer)(?:\s+is)?\s*:?\s*(?:\*\*|\(|\[)?\s*([A-Za-z])\s*(?:\*\*|\)|\])?(?P<tail>$|[.):\],;!*]|\s)")
            .expect("valid regex")
    })
}

fn from_letter(c: char, n_options: usize) -> Parsed {
    let i = (c.to_ascii_uppercase() as u8 - b'A') as usize;
    if i < n_options {
        Parsed::Index(i)
    } else {
        Parsed::Unparsed
    }
}

/// Extract the chosen option from `raw`. `options` supplies the option
/// texts for the full-text rule; its length is the option count.
pub fn parse_answer<S: AsRef<str>>(raw: &str, options: &[S]) -> Parsed {
    let n = options.len();
    let text = raw.trim();
    if text.is_empty() || n == 0 {
        return Parsed::Unparsed;
    }
    if let Some(c) = leading_re().captures(text) {
        return from_letter(c[1].chars().next().expect("one letter"), n);
    }
    let mut last = None;
    for c in answer_re().captures_iter(text) {
        let ch = c[1].chars().next().expect("one letter");
        let tail = c.name("tail").map(|m| m.as_str()).unwrap_or("");
        let spaced = tail.chars().next().is_some_and(char::is_whitespace);
        if ch.is_ascii_lowercase() && spaced && !tail.contains('\n') {
            continue;
        }
        last = Some(ch);
    }
    if let Some(ch) = last {
        return from_letter(ch, n);
    }
    let norm = |s: &str| s.trim().trim_end_matches('.').trim().to_lowercase();
    let target = norm(text);
    let hits: Vec<usize> = options
        .iter()
        .enumerate()
        .filter(|(_, o)| norm(o.as_ref()) == target)
        .map(|(i, _)| i)
        .collect();
    match hits.as_slice() {
        [i] => Parsed::Index(*i),
        _ => Parsed::Unparsed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FOUR: [&str; 4] = ["Hotpot", "Bakery", "Spa", "Cinema"];

    #[test]
    fn rule_examples() {
        assert_eq!(parse_answer("A", &FOUR), Parsed::Index(0));
        assert_eq!(parse_answer("I think the answer is (C).", &FOUR), Parsed::Index(2));
        assert_eq!(parse_answer("E", &FOUR), Parsed::Unparsed);
        assert_eq!(parse_answer("spa.", &FOUR), Parsed::Index(2));
    }

    #[test]
    fn letter_lists() {
        assert_eq!(letter_list(2), "A or B");
        assert_eq!(letter_list(4), "A, B, C or D");
    }
}
