//! A deterministic stand-in for a capable model, used by mock endpoints.
//!
//! Requests are routed by their tag. Agent prompts carry their structured
//! input on the `INPUT:` line, so replies can satisfy the same validators a
//! real model has to satisfy. Untagged or evaluation requests fall back to a
//! fingerprint-derived option letter.

use serde_json::{json, Value};

use crate::gateway::{count_lettered_options, hash_letter, ChatRequest, MockReply, MockScript};
use crate::prompts::input_of;
use crate::rng::fnv1a64;

/// Mock script answering every agent prompt of the toolkit.
pub fn agent_script() -> MockScript {
    MockScript::responder(|request, _attempt| MockReply::Text(agent_reply(request)))
}

pub fn agent_reply(request: &ChatRequest) -> String {
    let tag = request.request_tag.as_str();
    let prompt = request.last_user_content();
    let input = input_of(prompt).unwrap_or(Value::Null);
    match tag {
        "synth.template" => templates_reply(&input),
        "synth.merchant" => merchant_reply(&input["values"]),
        "synth.user" => user_reply(&input["values"]),
        "synth.interaction" => interaction_reply(&input["values"]),
        "synth.instruction" => instruction_reply(&input),
        "synth.direct" => direct_reply(&input),
        "apply.tags" => tags_reply(&input),
        "apply.queries" => queries_reply(&input),
        "apply.review" => review_reply(&input),
        t if t.starts_with("workflow.") => workflow_reply(request, &input),
        _ => hash_letter(&request.fingerprint(), count_lettered_options(prompt)).to_string(),
    }
}

fn s<'a>(v: &'a Value, key: &str) -> &'a str {
    v.get(key).and_then(Value::as_str).unwrap_or("")
}

const PATTERNS: [(&str, &str); 12] = [
    ("Given {a}, what else can you tell me?", "Here is the information: {b}."),
    ("Describe the record with {a}.", "It has {b}."),
    ("I know {a}. Fill in the rest.", "The remaining details are {b}."),
    ("What do we know when {a}?", "We know that {b}."),
    ("Can you complete this profile: {a}?", "Certainly: {b}."),
    ("Tell me more about the case where {a}.", "In that case, {b}."),
    ("Based on {a}, summarize the key facts.", "Key facts: {b}."),
    ("Here is a clue: {a}. What follows?", "What follows is {b}."),
    ("Suppose {a}. What is the full picture?", "The full picture includes {b}."),
    ("Please expand on {a}.", "Expanded: {b}."),
    ("Using {a}, answer with the other details.", "The other details: {b}."),
    ("Start from {a} and explain.", "Explanation: {b}."),
];

fn templates_reply(input: &Value) -> String {
    let fields: Vec<String> = input["fields"]
        .as_array()
        .map(|a| a.iter().filter_map(|v| v.as_str().map(str::to_string)).collect())
        .unwrap_or_default();
    if fields.is_empty() {
        return "[]".to_string();
    }
    let round = input["round"].as_u64().unwrap_or(1);
    let mention = |names: &[String]| {
        names
            .iter()
            .map(|f| format!("{} {{{f}}}", f.replace('_', " ")))
            .collect::<Vec<_>>()
            .join(" and ")
    };
    let mut out = Vec::new();
    for (i, (ins, outp)) in PATTERNS.iter().enumerate() {
        // Split point rotates so the instruction/output division varies.
        let split = if fields.len() == 1 { 1 } else { 1 + i % (fields.len() - 1) };
        let (head, tail) = fields.split_at(split);
        let tail_text = if tail.is_empty() { mention(head) } else { mention(tail) };
        out.push(json!({
            "instruction": format!("{} (variant {round}.{})", ins.replace("{a}", &mention(head)), i + 1),
            "output": outp.replace("{b}", &tail_text),
        }));
    }
    out.push(json!({"instruction": "What does {price} buy here?", "output": "Nothing."}));
    serde_json::to_string(&out).expect("json")
}

fn reason(seed_text: &str, options: &[&str]) -> String {
    options[(fnv1a64(seed_text.as_bytes()) % options.len() as u64) as usize].to_string()
}

fn merchant_reply(v: &Value) -> String {
    let (name, intro, cat) = (s(v, "name"), s(v, "introduction"), s(v, "category"));
    let why = reason(
        name,
        &[
            "what I offer every day is exactly what customers expect from this kind of place",
            "my menu and services match the core needs of this category",
            "customers come to me for the typical experience this category promises",
        ],
    );
    format!("I am {name}, {intro}. I belong to {cat} because {why}.")
}

fn user_reply(v: &Value) -> String {
    let why = reason(
        s(v, "profile"),
        &[
            "it fitted my routine and my interests",
            "it was convenient and matched what people like me enjoy",
            "I wanted something that suits my lifestyle at that moment",
        ],
    );
    format!(
        "I am a user with profile {}. I went to {} at {} at {}, because {why}.",
        s(v, "profile"),
        s(v, "merchant"),
        s(v, "time"),
        s(v, "address")
    )
}

fn interaction_reply(v: &Value) -> String {
    format!(
        "In a {} day scenario at {}, a user with profile {} says: 'I am looking for a good {} nearby.' The merchant replies: 'Welcome to {}, we are at {} and ready for you.' The conversation continues with the user saying 'That sounds right, I will come now', leading to a successful transaction.",
        s(v, "weather"),
        s(v, "time"),
        s(v, "profile"),
        s(v, "category"),
        s(v, "merchant"),
        s(v, "address"),
    )
}

fn instruction_reply(input: &Value) -> String {
    let text = s(input, "text");
    let head: String = text.split_whitespace().take(8).collect::<Vec<_>>().join(" ");
    match s(input, "kind") {
        "merchant" => format!("Which category does this merchant belong to, and why? ({head} ...)"),
        "user" => format!("Why did this user make this visit? ({head} ...)"),
        _ => format!("How could a conversation between this user and the merchant lead to a purchase? ({head} ...)"),
    }
}

fn direct_reply(input: &Value) -> String {
    let values = &input["values"];
    let raw: Vec<String> = values
        .as_object()
        .map(|o| {
            o.iter()
                .filter_map(|(k, v)| v.as_str().filter(|t| !t.is_empty()).map(|t| format!("{k}: {t}")))
                .collect()
        })
        .unwrap_or_default();
    let subject = [s(values, "name"), s(values, "merchant"), s(values, "profile")]
        .into_iter()
        .find(|t| !t.is_empty())
        .unwrap_or("this record")
        .to_string();
    json!({
        "instruction": format!("Summarize what is known about {subject}."),
        "output": raw.join("; "),
    })
    .to_string()
}

fn tags_reply(input: &Value) -> String {
    let cat = s(input, "category").to_lowercase();
    let mut tags = vec![format!("good for {cat} lovers"), "popular with locals".to_string()];
    let extra = [
        "suitable for family outing",
        "group dining",
        "good for a romantic date",
        "quick solo visit",
        "business meeting friendly",
    ];
    tags.push(reason(s(input, "name"), &extra));
    tags.join("; ")
}

fn queries_reply(input: &Value) -> String {
    let mut lines = vec![
        s(input, "name").to_lowercase(),
        format!("{} near me", s(input, "category").to_lowercase()),
    ];
    if let Some(products) = input["products"].as_array() {
        for p in products.iter().filter_map(Value::as_str).take(3) {
            lines.push(p.to_lowercase());
        }
    }
    lines.retain(|l| !l.trim().is_empty());
    lines.join("\n")
}

fn review_reply(input: &Value) -> String {
    let h = fnv1a64(s(input, "text").as_bytes());
    let score = |shift: u32| (h >> shift) % 6;
    let bit = |shift: u32| (h >> shift) % 2;
    format!(
        "in_depth_content: {}\nactionable_suggestions: {}\nnatural_expression: {}\ncredible_engaging_language: {}\nnon_promotional: {}\nnon_ai_generated: {}\noverall_usefulness: {}",
        score(0),
        score(8),
        score(16),
        score(24),
        bit(32),
        bit(40),
        score(48)
    )
}

fn workflow_reply(request: &ChatRequest, input: &Value) -> String {
    let step = s(input, "step");
    if input["final"].as_bool().unwrap_or(false) {
        let n = input["n_options"].as_u64().unwrap_or(4) as usize;
        format!("The answer is {}", hash_letter(&request.fingerprint(), n))
    } else {
        format!("Analysis for {step}: the available evidence points to a few plausible options.")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::ChatMessage;
    use crate::synthesis::{check_narrative, validate_template, FieldCombination, NarrativeInput, SourceKind};
    use std::collections::BTreeMap;

    #[test]
    fn template_reply_is_mostly_valid() {
        let combo = FieldCombination::new(SourceKind::Merchant, &["name", "introduction", "category"]).unwrap();
        let text = templates_reply(&json!({"fields": combo.fields, "round": 1}));
        let v: Vec<Value> = serde_json::from_str(&text).unwrap();
        let valid = v
            .iter()
            .filter(|t| validate_template(&combo, s(t, "instruction"), s(t, "output")).is_ok())
            .count();
        assert_eq!(valid, 12);
        assert_eq!(v.len(), 13);
    }

    #[test]
    fn merchant_reply_passes_verbatim_rule() {
        let mut values = BTreeMap::new();
        values.insert("name".to_string(), "Lakeview Spa".to_string());
        values.insert("introduction".to_string(), "a quiet spa by the lake".to_string());
        values.insert("category".to_string(), "Spa".to_string());
        let input = NarrativeInput { kind: SourceKind::Merchant, source_ids: vec![], values };
        let req = crate::synthesis::narrative_request(&input, 1);
        let text = agent_reply(&req);
        assert!(text.starts_with("I am Lakeview Spa, a quiet spa by the lake. I belong to Spa because"));
        check_narrative(&input, &text).unwrap();
    }

    #[test]
    fn untagged_requests_get_a_letter() {
        let req = ChatRequest::new(vec![ChatMessage::user("Question: x\nA. a\nB. b")], 8);
        let t = agent_reply(&req);
        assert!(t == "A" || t == "B");
    }
}
