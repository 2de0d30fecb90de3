use std::collections::{BTreeMap, BTreeSet};

use serde_json::json;

use super::{ground_truth, with_distractors, yes_no, Attempt, Draft, Generator};
use crate::benchmark::context::BuildContext;
use crate::benchmark::qc::{gate_annotations, AnnotationVerdict};
use crate::benchmark::BenchmarkError;
use crate::platform::{Action, AnnotationRecord, ReviewDimension};
use crate::rng::SplitMix64;

/// Orders a user needs before a preference question is asked.
pub const MIN_PREFERENCE_ORDERS: usize = 3;
/// The top consumer group must beat the runner-up by this factor.
pub const GROUP_MARGIN: f64 = 1.2;

pub const INFORMATION_POINT_LABELS: [&str; 4] = ["0", "1", "2", "3 or more"];

pub fn generator(task_id: &str) -> Option<Generator> {
    let (candidates, build): (fn(&BuildContext) -> Result<Vec<String>, BenchmarkError>, fn(&BuildContext, &str, &mut SplitMix64) -> Attempt) =
        match task_id {
            "target_group_identification" => (leaf_keys, target_group),
            "user_preference_prediction" => (user_keys, user_preference),
            "review_information_points" => (|c| review_keys(c, ReviewDimension::InformationPoints), |c, k, r| review_question(c, k, r, ReviewDimension::InformationPoints)),
            "review_guidance_value" => (|c| review_keys(c, ReviewDimension::GuidanceValue), |c, k, r| review_question(c, k, r, ReviewDimension::GuidanceValue)),
            "review_colloquialism" => (|c| review_keys(c, ReviewDimension::Colloquialism), |c, k, r| review_question(c, k, r, ReviewDimension::Colloquialism)),
            "review_real_examples" => (|c| review_keys(c, ReviewDimension::RealExamples), |c, k, r| review_question(c, k, r, ReviewDimension::RealExamples)),
            "review_language_appeal" => (|c| review_keys(c, ReviewDimension::LanguageAppeal), |c, k, r| review_question(c, k, r, ReviewDimension::LanguageAppeal)),
            "non_marketing_content" => (|c| review_keys(c, ReviewDimension::NonMarketing), |c, k, r| review_question(c, k, r, ReviewDimension::NonMarketing)),
            "human_written_content" => (|c| review_keys(c, ReviewDimension::HumanWritten), |c, k, r| review_question(c, k, r, ReviewDimension::HumanWritten)),
            "overall_review_usefulness" => (|c| review_keys(c, ReviewDimension::OverallUsefulness), |c, k, r| review_question(c, k, r, ReviewDimension::OverallUsefulness)),
            _ => return None,
        };
    Some(Generator { candidates, build })
}

fn leaf_keys(ctx: &BuildContext) -> Result<Vec<String>, BenchmarkError> {
    Ok(ctx.leaves.iter().map(|l| l.to_string()).collect())
}

fn user_keys(ctx: &BuildContext) -> Result<Vec<String>, BenchmarkError> {
    Ok(ctx.user_interactions.keys().filter(|u| ctx.user(u).is_some()).map(|u| u.to_string()).collect())
}

fn target_group(ctx: &BuildContext, key: &str, rng: &mut SplitMix64) -> Attempt {
    let attr = ctx.options.group_attribute.as_str();
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    let mut all_groups = BTreeSet::new();
    for u in ctx.bundle.users.iter() {
        if let Some(g) = u.profile.get(attr) {
            all_groups.insert(g.as_str());
        }
    }
    for m in ctx.merchants.iter().filter(|m| m.leaf_category() == key) {
        for it in ctx.orders_by_merchant.get(m.merchant_id.as_str()).into_iter().flatten() {
            if let Some(g) = ctx.user(&it.user_id).and_then(|u| u.profile.get(attr)) {
                *counts.entry(g.as_str()).or_insert(0) += 1;
            }
        }
    }
    let mut ranked: Vec<(&str, usize)> = counts.iter().map(|(g, c)| (*g, *c)).collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    let (top, top_n) = *ranked.first().ok_or("no orders from profiled users")?;
    let second_n = ranked.get(1).map(|r| r.1).unwrap_or(0);
    if top_n < ctx.qc().min_support {
        return Err(format!("qc: support {top_n} < {}", ctx.qc().min_support));
    }
    if (top_n as f64) < second_n as f64 * GROUP_MARGIN {
        return Err("qc: top group not dominant".into());
    }
    let pool: Vec<&str> = all_groups.into_iter().collect();
    let options = with_distractors(top, &pool, 3, rng)?;
    Ok(Draft {
        stem: format!("Service type: {key}\nWhich consumer group is this service most suitable for?"),
        options,
        correct_index: 0,
        source_ids: vec![],
        params: json!({"category": key, "group_attribute": attr, "orders": counts}),
        qc: json!({"gate": "group_support", "support": top_n, "runner_up": second_n, "margin": GROUP_MARGIN}),
    })
}

fn user_preference(ctx: &BuildContext, key: &str, rng: &mut SplitMix64) -> Attempt {
    let u = ctx.user(key).ok_or("unknown user")?;
    let history = ctx.user_interactions.get(key).ok_or("user has no interactions")?;
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    let mut touched = BTreeSet::new();
    for it in history {
        let Some(m) = ctx.merchant(&it.merchant_id) else { continue };
        touched.insert(m.leaf_category());
        if it.action == Action::Order {
            *counts.entry(m.leaf_category()).or_insert(0) += 1;
        }
    }
    let total: usize = counts.values().sum();
    if total < MIN_PREFERENCE_ORDERS {
        return Err(format!("{total} orders < {MIN_PREFERENCE_ORDERS}"));
    }
    let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    if ranked.len() > 1 && ranked[0].1 == ranked[1].1 {
        return Err("no single preferred category".into());
    }
    let pool: Vec<&str> = ctx.leaves.iter().copied().filter(|l| !touched.contains(l)).collect();
    let options = with_distractors(ranked[0].0, &pool, 3, rng)?;
    Ok(Draft {
        stem: format!(
            "User profile: {}\nWhich kind of service is this user most likely to consume?",
            u.profile_text()
        ),
        options,
        correct_index: 0,
        source_ids: vec![u.user_id.clone()],
        params: json!({}),
        qc: ground_truth(),
    })
}

fn review_keys(ctx: &BuildContext, dim: ReviewDimension) -> Result<Vec<String>, BenchmarkError> {
    let keys: Vec<String> = ctx
        .bundle
        .reviews
        .iter()
        .filter(|r| !r.annotations_for(dim).is_empty())
        .map(|r| r.review_id.clone())
        .collect();
    if keys.is_empty() {
        return Err(BenchmarkError::MissingAnnotations { dimension: dim.as_str().to_string() });
    }
    Ok(keys)
}

/// Canonical form of an annotation label, or `None` when it lies outside
/// the dimension's label domain.
pub fn canonical_label(dim: ReviewDimension, raw: &str) -> Option<String> {
    let t = raw.trim().to_lowercase();
    if dim == ReviewDimension::InformationPoints {
        if t == "3 or more" || t == "3+" {
            return Some("3 or more".into());
        }
        let n: u32 = t.parse().ok()?;
        return Some(INFORMATION_POINT_LABELS[(n as usize).min(3)].to_string());
    }
    match t.as_str() {
        "yes" | "true" | "1" | "y" => Some("yes".into()),
        "no" | "false" | "0" | "n" => Some("no".into()),
        _ => None,
    }
}

fn review_stem(dim: ReviewDimension) -> &'static str {
    match dim {
        ReviewDimension::InformationPoints => "How many distinct informative points does this review contain?",
        ReviewDimension::GuidanceValue => "Does this review give other customers practical guidance?",
        ReviewDimension::Colloquialism => "Is this review written in a natural, colloquial way?",
        ReviewDimension::RealExamples => "Does this review describe real, concrete experiences from the visit?",
        ReviewDimension::LanguageAppeal => "Is the language of this review vivid and engaging?",
        ReviewDimension::NonMarketing => "Is this review free of marketing or promotional content?",
        ReviewDimension::HumanWritten => "Was this review written by a real person rather than generated text?",
        ReviewDimension::OverallUsefulness => "Is this review useful overall?",
    }
}

fn review_question(ctx: &BuildContext, key: &str, rng: &mut SplitMix64, dim: ReviewDimension) -> Attempt {
    let r = ctx.review(key).ok_or("unknown review")?;
    let mut normalized = Vec::new();
    for a in r.annotations_for(dim) {
        let label = canonical_label(dim, &a.label).ok_or_else(|| format!("label `{}` outside domain", a.label))?;
        normalized.push(AnnotationRecord { annotator_id: a.annotator_id.clone(), dimension: dim, label });
    }
    let refs: Vec<&AnnotationRecord> = normalized.iter().collect();
    let (label, annotators) = match gate_annotations(&refs, ctx.qc()) {
        AnnotationVerdict::Accepted { label, annotators } => (label, annotators),
        AnnotationVerdict::Rejected { reason } => return Err(format!("qc: {reason}")),
    };
    let (options, correct_index) = if dim == ReviewDimension::InformationPoints {
        (with_distractors(&label, &INFORMATION_POINT_LABELS, 3, rng)?, 0)
    } else {
        yes_no(label == "yes")
    };
    Ok(Draft {
        stem: format!("Review: \"{}\"\n{}", r.text.trim(), review_stem(dim)),
        options,
        correct_index,
        source_ids: vec![r.review_id.clone()],
        params: json!({"dimension": dim.as_str()}),
        qc: json!({"gate": "annotator_consensus", "label": label, "annotators": annotators}),
    })
}
