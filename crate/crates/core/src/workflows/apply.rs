//! Batch appliers: merchant function tags, query suggestions and review
//! score cards.
//!
//! Each item is one request; output failing validation is re-requested
//! (with the attempt number in the prompt) up to three more times and then
//! becomes an error record. One bad item never stops a batch.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::gateway::{validated_batch, ChatRequest, EndpointConfig, Gateway, GatewayError};
use crate::platform::{MerchantRecord, ReviewRecord};
use crate::prompts::{PromptCatalog, PromptPair};

/// First attempt plus three retries.
pub const APPLY_MAX_ATTEMPTS: u32 = 4;
pub const MAX_TAGS: usize = 10;
pub const MAX_TAG_WORDS: usize = 10;

/// The seven review dimensions with their maximum score. The two with
/// maximum 1 are yes/no judgments.
pub const REVIEW_DIMENSIONS: [(&str, u8); 7] = [
    ("in_depth_content", 5),
    ("actionable_suggestions", 5),
    ("natural_expression", 5),
    ("credible_engaging_language", 5),
    ("non_promotional", 1),
    ("non_ai_generated", 1),
    ("overall_usefulness", 5),
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApplyFailure {
    pub id: String,
    pub error: String,
    pub attempts: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub last_output: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ApplyRecord<T> {
    Ok(T),
    Failed(ApplyFailure),
}

impl<T> ApplyRecord<T> {
    pub fn ok(&self) -> Option<&T> {
        match self {
            ApplyRecord::Ok(t) => Some(t),
            ApplyRecord::Failed(_) => None,
        }
    }

    pub fn failure(&self) -> Option<&ApplyFailure> {
        match self {
            ApplyRecord::Ok(_) => None,
            ApplyRecord::Failed(f) => Some(f),
        }
    }
}

/// One JSON object per line.
pub fn records_jsonl<T: Serialize>(records: &[ApplyRecord<T>]) -> String {
    records.iter().map(|r| serde_json::to_string(r).expect("record serializes") + "\n").collect()
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApplySummary {
    pub items: usize,
    pub ok: usize,
    pub failed: usize,
    pub calls: usize,
}

pub fn summarize_records<T>(records: &[ApplyRecord<T>], calls: usize) -> ApplySummary {
    let ok = records.iter().filter(|r| r.ok().is_some()).count();
    ApplySummary { items: records.len(), ok, failed: records.len() - ok, calls }
}

fn request(pair: &PromptPair, input: &serde_json::Value, attempt: u32, max_tokens: u32, tag: &str) -> ChatRequest {
    ChatRequest::new(pair.render(&[("attempt", &attempt.to_string()), ("input", &input.to_string())]), max_tokens)
        .with_tag(tag)
}

fn collapse(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Strip list markers and quotes from one item of a model list.
fn clean_item(s: &str) -> String {
    let s = s.trim();
    let s = s.trim_start_matches(['-', '*', '•']).trim_start();
    let digits = s.chars().take_while(char::is_ascii_digit).count();
    let s = if digits > 0 && s[digits..].starts_with(['.', ')']) { &s[digits + 1..] } else { s };
    collapse(s.trim().trim_matches(['"', '\'', '“', '”']).trim())
}

// ---- function tags

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionTagSet {
    pub merchant_id: String,
    pub tags: Vec<String>,
    pub model: String,
    pub request_fingerprint: String,
    pub attempts: u32,
    /// Tag count before truncation to the maximum, when the model gave more.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncated_from: Option<usize>,
}

/// Parse a `;`- or line-separated tag list: 1 to 10 distinct tags of at most
/// 10 words. Longer lists are cut to the first 10.
pub fn parse_tags(text: &str) -> Result<(Vec<String>, Option<usize>), String> {
    let mut seen = BTreeSet::new();
    let mut tags = Vec::new();
    for raw in text.split([';', '\n', '；']) {
        let tag = clean_item(raw);
        if tag.is_empty() {
            continue;
        }
        let words = tag.split_whitespace().count();
        if words > MAX_TAG_WORDS {
            return Err(format!("tag `{tag}` has {words} words (max {MAX_TAG_WORDS})"));
        }
        if seen.insert(tag.to_lowercase()) {
            tags.push(tag);
        }
    }
    if tags.is_empty() {
        return Err("no tags in response".into());
    }
    let truncated = (tags.len() > MAX_TAGS).then_some(tags.len());
    tags.truncate(MAX_TAGS);
    Ok((tags, truncated))
}

fn tag_input(m: &MerchantRecord) -> serde_json::Value {
    json!({"name": m.name, "category": m.leaf_category(), "category_path": m.category_path_text(), "introduction": m.introduction})
}

pub fn generate_function_tags_batch(
    merchants: &[&MerchantRecord],
    gateway: &Gateway,
    endpoint: &EndpointConfig,
    max_parallel: usize,
) -> Result<Vec<ApplyRecord<FunctionTagSet>>, GatewayError> {
    let pair = &PromptCatalog::builtin().apply.tags;
    let inputs: Vec<serde_json::Value> = merchants.iter().map(|m| tag_input(m)).collect();
    let slots = validated_batch(
        gateway,
        endpoint,
        max_parallel,
        merchants.len(),
        APPLY_MAX_ATTEMPTS,
        |i, round| request(pair, &inputs[i], round, 128, "apply.tags"),
        |_, resp| parse_tags(&resp.text),
    )?;
    Ok(merchants
        .iter()
        .zip(slots)
        .map(|(m, v)| match v.outcome {
            Ok((tags, truncated_from)) => {
                if let Some(n) = truncated_from {
                    log::warn!("{}: model returned {n} tags, kept the first {MAX_TAGS}", m.merchant_id);
                }
                ApplyRecord::Ok(FunctionTagSet {
                    merchant_id: m.merchant_id.clone(),
                    tags,
                    model: endpoint.model_name.clone(),
                    request_fingerprint: v.fingerprint,
                    attempts: v.attempts,
                    truncated_from,
                })
            }
            Err(r) => ApplyRecord::Failed(ApplyFailure {
                id: m.merchant_id.clone(),
                error: r.reason,
                attempts: v.attempts,
                last_output: r.output,
            }),
        })
        .collect())
}

pub fn generate_function_tags(
    merchant: &MerchantRecord,
    gateway: &Gateway,
    endpoint: &EndpointConfig,
) -> Result<ApplyRecord<FunctionTagSet>, GatewayError> {
    Ok(generate_function_tags_batch(&[merchant], gateway, endpoint, 1)?.remove(0))
}

// ---- query suggestions

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryItem {
    pub item_id: String,
    pub name: String,
    pub category: String,
    pub description: String,
    #[serde(default)]
    pub attributes: Vec<String>,
    #[serde(default)]
    pub products: Vec<String>,
}

impl QueryItem {
    pub fn from_merchant(m: &MerchantRecord) -> Self {
        Self {
            item_id: m.merchant_id.clone(),
            name: m.name.clone(),
            category: m.leaf_category().to_string(),
            description: m.introduction.clone(),
            attributes: m.attribute_texts(),
            products: m.products.iter().map(|p| p.name.clone()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuerySuggestion {
    pub query: String,
    /// Shortest typed prefix that singles this query out within the set.
    pub prefix: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuerySuggestionSet {
    pub item_id: String,
    pub suggestions: Vec<QuerySuggestion>,
    pub model: String,
    pub request_fingerprint: String,
    pub attempts: u32,
}

/// One query per line; list markers stripped, whitespace collapsed,
/// case-insensitive duplicates dropped.
pub fn parse_queries(text: &str) -> Result<Vec<String>, String> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for line in text.lines() {
        let q = clean_item(line);
        if !q.is_empty() && seen.insert(q.to_lowercase()) {
            out.push(q);
        }
    }
    if out.is_empty() {
        return Err("no queries in response".into());
    }
    Ok(out)
}

/// For each query, the shortest prefix (case-insensitive) that no other
/// query in the set starts with. A query that is itself a prefix of another
/// gets its full text.
pub fn shortest_unique_prefixes(queries: &[String]) -> Vec<String> {
    let lower: Vec<Vec<char>> = queries.iter().map(|q| q.to_lowercase().chars().collect()).collect();
    queries
        .iter()
        .enumerate()
        .map(|(i, q)| {
            let chars: Vec<char> = q.chars().collect();
            let n = (1..=lower[i].len())
                .find(|&n| lower.iter().enumerate().all(|(j, o)| j == i || o.len() < n || o[..n] != lower[i][..n]))
                .unwrap_or(chars.len());
            chars[..n.min(chars.len())].iter().collect()
        })
        .collect()
}

pub fn generate_query_suggestions_batch(
    items: &[QueryItem],
    gateway: &Gateway,
    endpoint: &EndpointConfig,
    max_parallel: usize,
) -> Result<Vec<ApplyRecord<QuerySuggestionSet>>, GatewayError> {
    let pair = &PromptCatalog::builtin().apply.queries;
    let inputs: Vec<serde_json::Value> = items
        .iter()
        .map(|it| {
            json!({"name": it.name, "category": it.category, "description": it.description, "attributes": it.attributes, "products": it.products})
        })
        .collect();
    let slots = validated_batch(
        gateway,
        endpoint,
        max_parallel,
        items.len(),
        APPLY_MAX_ATTEMPTS,
        |i, round| request(pair, &inputs[i], round, 256, "apply.queries"),
        |_, resp| parse_queries(&resp.text),
    )?;
    let ids: Vec<String> = items.iter().map(|i| i.item_id.clone()).collect();
    Ok(ids
        .iter()
        .zip(slots)
        .map(|(id, v)| match v.outcome {
            Ok(queries) => {
                let prefixes = shortest_unique_prefixes(&queries);
                ApplyRecord::Ok(QuerySuggestionSet {
                    item_id: id.clone(),
                    suggestions: queries.into_iter().zip(prefixes).map(|(query, prefix)| QuerySuggestion { query, prefix }).collect(),
                    model: endpoint.model_name.clone(),
                    request_fingerprint: v.fingerprint,
                    attempts: v.attempts,
                })
            }
            Err(r) => ApplyRecord::Failed(ApplyFailure { id: id.clone(), error: r.reason, attempts: v.attempts, last_output: r.output }),
        })
        .collect())
}

pub fn generate_query_suggestions(
    item: &QueryItem,
    gateway: &Gateway,
    endpoint: &EndpointConfig,
) -> Result<ApplyRecord<QuerySuggestionSet>, GatewayError> {
    Ok(generate_query_suggestions_batch(std::slice::from_ref(item), gateway, endpoint, 1)?.remove(0))
}

// ---- review score cards

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewScoreCard {
    pub review_id: String,
    pub in_depth_content: u8,
    pub actionable_suggestions: u8,
    pub natural_expression: u8,
    pub credible_engaging_language: u8,
    pub non_promotional: u8,
    pub non_ai_generated: u8,
    pub overall_usefulness: u8,
    pub model: String,
    pub request_fingerprint: String,
    pub attempts: u32,
}

impl ReviewScoreCard {
    /// Scores in [`REVIEW_DIMENSIONS`] order.
    pub fn scores(&self) -> [u8; 7] {
        [
            self.in_depth_content,
            self.actionable_suggestions,
            self.natural_expression,
            self.credible_engaging_language,
            self.non_promotional,
            self.non_ai_generated,
            self.overall_usefulness,
        ]
    }
}

/// Read one `name: score` line per dimension. Every dimension must appear
/// with an integer in range; unrelated lines are ignored.
pub fn parse_review_scores(text: &str) -> Result<[u8; 7], String> {
    let mut got: [Option<u8>; 7] = [None; 7];
    for line in text.lines() {
        let line = clean_item(line).replace("**", "");
        let Some((key, value)) = line.split_once([':', '=']) else { continue };
        let key = key.trim().to_lowercase().replace([' ', '-', '&'], "_").replace("__", "_");
        let Some(k) = REVIEW_DIMENSIONS.iter().position(|(name, _)| *name == key) else { continue };
        let value = value.trim();
        let head = value.split(['/', ' ', '(']).next().unwrap_or("");
        let v: u8 = head.parse().map_err(|_| format!("{key}: `{value}` is not an integer score"))?;
        let max = REVIEW_DIMENSIONS[k].1;
        if v > max {
            return Err(format!("{key}: {v} is outside 0..={max}"));
        }
        if got[k].is_some_and(|prev| prev != v) {
            return Err(format!("{key}: conflicting scores"));
        }
        got[k] = Some(v);
    }
    let missing: Vec<&str> = REVIEW_DIMENSIONS.iter().zip(&got).filter(|(_, g)| g.is_none()).map(|((n, _), _)| *n).collect();
    if !missing.is_empty() {
        return Err(format!("missing dimensions: {}", missing.join(", ")));
    }
    Ok(got.map(|g| g.expect("checked")))
}

pub fn score_review_dimensions_batch(
    reviews: &[&ReviewRecord],
    gateway: &Gateway,
    endpoint: &EndpointConfig,
    max_parallel: usize,
) -> Result<Vec<ApplyRecord<ReviewScoreCard>>, GatewayError> {
    let pair = &PromptCatalog::builtin().apply.review;
    let inputs: Vec<serde_json::Value> = reviews.iter().map(|r| json!({"text": r.text.trim()})).collect();
    let slots = validated_batch(
        gateway,
        endpoint,
        max_parallel,
        reviews.len(),
        APPLY_MAX_ATTEMPTS,
        |i, round| request(pair, &inputs[i], round, 128, "apply.review"),
        |i, resp| {
            if reviews[i].text.trim().is_empty() {
                return Err("review text is empty".into());
            }
            parse_review_scores(&resp.text)
        },
    )?;
    Ok(reviews
        .iter()
        .zip(slots)
        .map(|(r, v)| match v.outcome {
            Ok(s) => ApplyRecord::Ok(ReviewScoreCard {
                review_id: r.review_id.clone(),
                in_depth_content: s[0],
                actionable_suggestions: s[1],
                natural_expression: s[2],
                credible_engaging_language: s[3],
                non_promotional: s[4],
                non_ai_generated: s[5],
                overall_usefulness: s[6],
                model: endpoint.model_name.clone(),
                request_fingerprint: v.fingerprint,
                attempts: v.attempts,
            }),
            Err(e) => ApplyRecord::Failed(ApplyFailure { id: r.review_id.clone(), error: e.reason, attempts: v.attempts, last_output: e.output }),
        })
        .collect())
}

pub fn score_review_dimensions(
    review: &ReviewRecord,
    gateway: &Gateway,
    endpoint: &EndpointConfig,
) -> Result<ApplyRecord<ReviewScoreCard>, GatewayError> {
    Ok(score_review_dimensions_batch(&[review], gateway, endpoint, 1)?.remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn prefixes() {
        assert_eq!(shortest_unique_prefixes(&s(&["ketoconazole ointment", "keto diet plan"])), s(&["ketoc", "keto "]));
        assert_eq!(shortest_unique_prefixes(&s(&["hotpot"])), s(&["h"]));
        assert_eq!(shortest_unique_prefixes(&s(&["tea", "tea house"])), s(&["tea", "tea "]));
    }

    #[test]
    fn tags() {
        let (t, cut) = parse_tags("suitable for family outing; group dining").unwrap();
        assert_eq!(t, s(&["suitable for family outing", "group dining"]));
        assert_eq!(cut, None);
        let (t, _) = parse_tags("1. Date night\n2. date  night\n- quiet").unwrap();
        assert_eq!(t, s(&["Date night", "quiet"]));
        assert!(parse_tags(" ; ").is_err());
        assert!(parse_tags("one two three four five six seven eight nine ten eleven").is_err());
    }

    #[test]
    fn review_lines() {
        let ok = "in_depth_content: 4\nactionable suggestions: 3\n**natural_expression**: 5\ncredible_engaging_language: 2/5\nnon_promotional: 1\nnon_ai_generated: 0\noverall_usefulness: 4";
        assert_eq!(parse_review_scores(ok).unwrap(), [4, 3, 5, 2, 1, 0, 4]);
        assert!(parse_review_scores(&ok.replace("non_promotional: 1", "non_promotional: 3")).is_err());
        assert!(parse_review_scores(&ok.replace("overall_usefulness: 4", "")).unwrap_err().contains("overall_usefulness"));
    }
}
