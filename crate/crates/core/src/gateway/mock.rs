use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use regex::Regex;

use super::types::ChatRequest;
use crate::rng::fnv1a64;

/// What a mock endpoint does with one attempt.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MockReply {
    Text(String),
    /// Simulated HTTP failure. 429 and 5xx are retried like a remote would be.
    Fail { status: u16, message: String },
}

pub type Responder = Arc<dyn Fn(&ChatRequest, u32) -> MockReply + Send + Sync>;

/// Rule applied when no fixture matches a request's fingerprint.
#[derive(Clone)]
pub enum MockFallback {
    /// Reply with one option letter picked by the request fingerprint:
    /// `letter = 'A' + fnv1a64(fingerprint) mod n`. With `n_options` unset,
    /// `n` is the number of consecutive `A.`, `B.`, … lines in the last user
    /// message (4 when none are found).
    OptionLetter { n_options: Option<usize> },
    Fixed(String),
    /// Arbitrary deterministic function of the request and 1-based attempt.
    Responder(Responder),
}

impl fmt::Debug for MockFallback {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MockFallback::OptionLetter { n_options } => f
                .debug_struct("OptionLetter")
                .field("n_options", n_options)
                .finish(),
            MockFallback::Fixed(t) => f.debug_tuple("Fixed").field(t).finish(),
            MockFallback::Responder(_) => f.write_str("Responder(..)"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MockScript {
    /// Request fingerprint → canned completion text.
    pub fixtures: BTreeMap<String, String>,
    pub fallback: MockFallback,
}

impl Default for MockScript {
    fn default() -> Self {
        Self {
            fixtures: BTreeMap::new(),
            fallback: MockFallback::OptionLetter { n_options: None },
        }
    }
}

impl MockScript {
    pub fn with_fixtures(fixtures: BTreeMap<String, String>) -> Self {
        Self { fixtures, ..Self::default() }
    }

    pub fn responder<F>(f: F) -> Self
    where
        F: Fn(&ChatRequest, u32) -> MockReply + Send + Sync + 'static,
    {
        Self {
            fixtures: BTreeMap::new(),
            fallback: MockFallback::Responder(Arc::new(f)),
        }
    }

    pub fn insert(&mut self, request: &ChatRequest, text: impl Into<String>) {
        self.fixtures.insert(request.fingerprint(), text.into());
    }

    pub fn reply(&self, request: &ChatRequest, attempt: u32) -> MockReply {
        if let Some(text) = self.fixtures.get(&request.fingerprint()) {
            return MockReply::Text(text.clone());
        }
        match &self.fallback {
            MockFallback::OptionLetter { n_options } => {
                let n = n_options
                    .unwrap_or_else(|| count_lettered_options(request.last_user_content()))
                    .max(1);
                MockReply::Text(hash_letter(&request.fingerprint(), n).to_string())
            }
            MockFallback::Fixed(text) => MockReply::Text(text.clone()),
            MockFallback::Responder(f) => f(request, attempt),
        }
    }
}

pub fn hash_letter(fingerprint: &str, n_options: usize) -> char {
    (b'A' + (fnv1a64(fingerprint.as_bytes()) % n_options.max(1) as u64) as u8) as char
}

/// Number of consecutive lettered option lines (`A. …`, `B. …`) in `text`,
/// counted from `A`; 4 when there are none.
pub fn count_lettered_options(text: &str) -> usize {
    static LINE: std::sync::OnceLock<Regex> = std::sync::OnceLock::new();
    let re = LINE.get_or_init(|| Regex::new(r"^([A-T])\. ").expect("valid regex"));
    let letters: Vec<u8> = text
        .lines()
        .filter_map(|l| re.captures(l.trim_start()).map(|c| c[1].as_bytes()[0]))
        .collect();
    // Use the last run starting at A, so exemplars before the target question
    // do not inflate the count.
    let mut best = 0;
    let mut run = 0;
    for l in letters {
        if l == b'A' {
            run = 1;
        } else if l == b'A' + run as u8 {
            run += 1;
        } else {
            run = 0;
        }
        best = run;
    }
    if best == 0 {
        4
    } else {
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::ChatMessage;

    fn q(n: usize) -> ChatRequest {
        let mut body = String::from("Question: pick one\n");
        for i in 0..n {
            body.push_str(&format!("{}. option {i}\n", (b'A' + i as u8) as char));
        }
        ChatRequest::new(vec![ChatMessage::user(body)], 64)
    }

    #[test]
    fn fallback_letter_is_in_range_and_stable() {
        let script = MockScript::default();
        let r = q(4);
        let a = script.reply(&r, 1);
        let b = script.reply(&r, 1);
        assert_eq!(a, b);
        let MockReply::Text(t) = a else { panic!() };
        assert!(["A", "B", "C", "D"].contains(&t.as_str()));
    }

    #[test]
    fn fixture_overrides_fallback() {
        let r = q(4);
        let mut script = MockScript::default();
        script.insert(&r, "Z");
        assert_eq!(script.reply(&r, 1), MockReply::Text("Z".into()));
    }

    #[test]
    fn counts_last_option_run() {
        let text = "A. x\nB. y\nAnswer: A\n\nA. p\nB. q\nC. r\n";
        assert_eq!(count_lettered_options(text), 3);
        assert_eq!(count_lettered_options("no options"), 4);
    }
}
