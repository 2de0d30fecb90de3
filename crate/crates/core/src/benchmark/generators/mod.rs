//! One question generator per task type.
//!
//! A generator lists candidate keys (merchant ids, user ids, review ids,
//! lexicon pairs, interaction keys) and turns one key into a draft question
//! or a skip reason. Drafts carry the correct option first, except binary
//! questions whose Yes/No order is fixed.

pub mod composite;
pub mod fundamentals;
pub mod context_tasks;
pub mod interaction;

use serde_json::Value;

use super::context::BuildContext;
use super::options::sample_distractors;
use super::BenchmarkError;
use crate::platform::MerchantRecord;
use crate::rng::SplitMix64;

pub const YES: &str = "Yes";
pub const NO: &str = "No";

#[derive(Debug, Clone, PartialEq)]
pub struct Draft {
    pub stem: String,
    pub options: Vec<String>,
    pub correct_index: usize,
    pub source_ids: Vec<String>,
    pub params: Value,
    /// Gate evidence; `passed: true` is added on emission.
    pub qc: Value,
}

pub type Attempt = Result<Draft, String>;

pub struct Generator {
    pub candidates: fn(&BuildContext) -> Result<Vec<String>, BenchmarkError>,
    pub build: fn(&BuildContext, &str, &mut SplitMix64) -> Attempt,
}

pub fn generator(task_id: &str) -> Option<Generator> {
    fundamentals::generator(task_id)
        .or_else(|| context_tasks::generator(task_id))
        .or_else(|| interaction::generator(task_id))
        .or_else(|| composite::generator(task_id))
}

/// Correct option followed by `k` sampled distractors.
pub(crate) fn with_distractors<S: AsRef<str>>(
    correct: &str,
    pool: &[S],
    k: usize,
    rng: &mut SplitMix64,
) -> Result<Vec<String>, String> {
    let d = sample_distractors(correct, pool, k, rng.next_u64()).map_err(|e| e.to_string())?;
    let mut out = vec![correct.to_string()];
    out.extend(d);
    Ok(out)
}

pub(crate) fn yes_no(answer: bool) -> (Vec<String>, usize) {
    (vec![YES.to_string(), NO.to_string()], if answer { 0 } else { 1 })
}

pub(crate) fn ground_truth() -> Value {
    serde_json::json!({"gate": "ground_truth"})
}

pub(crate) fn products_text(m: &MerchantRecord) -> String {
    if m.products.is_empty() {
        "none listed".to_string()
    } else {
        m.products.iter().map(|p| p.name.as_str()).collect::<Vec<_>>().join(", ")
    }
}

pub(crate) fn merchant_brief(m: &MerchantRecord) -> String {
    if m.introduction.trim().is_empty() {
        format!("{} ({})", m.name, m.leaf_category())
    } else {
        format!("{} ({}): {}", m.name, m.leaf_category(), m.introduction.trim())
    }
}

/// Attribute dimensions of `m` whose value is spelled out in its introduction.
pub(crate) fn described_attributes(m: &MerchantRecord) -> Vec<(&str, &str)> {
    let intro = m.introduction.to_lowercase();
    m.attributes
        .iter()
        .filter(|(_, v)| !v.trim().is_empty() && intro.contains(&v.to_lowercase()))
        .map(|(k, v)| (k.as_str(), v.as_str()))
        .collect()
}

pub(crate) fn pick<'t, T>(items: &'t [T], rng: &mut SplitMix64) -> &'t T {
    &items[rng.below_usize(items.len())]
}

/// Key for a pair of texts; the separator never occurs in record text.
pub(crate) fn pair_key(a: &str, b: &str) -> String {
    format!("{a}\u{1f}{b}")
}

pub(crate) fn split_pair(key: &str) -> (&str, &str) {
    key.split_once('\u{1f}').unwrap_or((key, ""))
}
