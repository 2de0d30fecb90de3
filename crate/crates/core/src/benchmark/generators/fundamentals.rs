use std::collections::BTreeSet;

use serde_json::json;

use super::{
    described_attributes, ground_truth, pair_key, pick, products_text, split_pair, with_distractors, yes_no,
    Attempt, Draft, Generator,
};
use crate::benchmark::context::BuildContext;
use crate::benchmark::BenchmarkError;
use crate::platform::ordered_pair;
use crate::rng::SplitMix64;

pub fn generator(task_id: &str) -> Option<Generator> {
    let (candidates, build): (fn(&BuildContext) -> Result<Vec<String>, BenchmarkError>, fn(&BuildContext, &str, &mut SplitMix64) -> Attempt) =
        match task_id {
            "category_prediction" => (named_merchants, category_prediction),
            "attribute_mining" => (named_merchants, attribute_mining),
            "attribute_value_extraction" => (all_merchants, attribute_value_extraction),
            "multi_level_category_prediction" => (named_merchants, multi_level_category),
            "category_based_merchant_selection" => (named_merchants, category_based_selection),
            "attribute_based_category_selection" => (attribute_texts, attribute_based_category),
            "same_category_judgment" => (named_merchants, same_category_judgment),
            "same_category_selection" => (named_merchants, same_category_selection),
            "attribute_value_reasonableness" => (all_merchants, attribute_reasonableness),
            "attribute_value_identification" => (all_merchants, attribute_identification),
            "attribute_value_synonym_detection" => (synonym_terms, synonym_detection),
            "attribute_value_containment" => (containment_pairs, containment),
            "attribute_compatibility" => (compatibility_pairs, compatibility),
            "mathematical_operations" => (all_merchants, mathematical_operations),
            "function_tag_prediction" => (all_merchants, function_tag_prediction),
            "brand_positioning" => (brand_pairs, brand_positioning),
            "brand_similarity" => (similar_brand_keys, brand_similarity),
            "category_complementarity" => (complement_keys, category_complementarity),
            _ => return None,
        };
    Some(Generator { candidates, build })
}

fn named_merchants(ctx: &BuildContext) -> Result<Vec<String>, BenchmarkError> {
    Ok(ctx.named_merchants().map(|m| m.merchant_id.clone()).collect())
}

fn all_merchants(ctx: &BuildContext) -> Result<Vec<String>, BenchmarkError> {
    Ok(ctx.merchants.iter().map(|m| m.merchant_id.clone()).collect())
}

fn draft(stem: String, options: Vec<String>, correct_index: usize, source_ids: Vec<String>, params: serde_json::Value) -> Draft {
    Draft { stem, options, correct_index, source_ids, params, qc: ground_truth() }
}

fn category_prediction(ctx: &BuildContext, key: &str, rng: &mut SplitMix64) -> Attempt {
    let m = ctx.merchant(key).ok_or("unknown merchant")?;
    let leaf = m.leaf_category();
    if leaf.is_empty() {
        return Err("merchant has no category".into());
    }
    let pool: Vec<&str> = ctx.leaves.iter().copied().collect();
    let options = with_distractors(leaf, &pool, 3, rng)?;
    Ok(draft(
        format!(
            "Merchant name: {}\nRelated products: {}\nWhich category does this merchant belong to?",
            m.name,
            products_text(m)
        ),
        options,
        0,
        vec![m.merchant_id.clone()],
        json!({}),
    ))
}

fn attribute_mining(ctx: &BuildContext, key: &str, rng: &mut SplitMix64) -> Attempt {
    let m = ctx.merchant(key).ok_or("unknown merchant")?;
    let attrs: Vec<(&String, &String)> = m.attributes.iter().collect();
    if attrs.is_empty() {
        return Err("merchant has no attributes".into());
    }
    let (dim, value) = *pick(&attrs, rng);
    let correct = format!("{dim}: {value}");
    // Other values of dimensions the merchant holds cannot apply, since a
    // merchant carries one value per dimension.
    let mut pool = Vec::new();
    for (d, own) in &m.attributes {
        for v in ctx.attribute_values.get(d.as_str()).into_iter().flatten() {
            if *v != own.as_str() {
                pool.push(format!("{d}: {v}"));
            }
        }
    }
    let options = with_distractors(&correct, &pool, 3, rng)?;
    Ok(draft(
        format!(
            "Merchant name: {}\nRelated products: {}\nWhich of the following attributes applies to this merchant?",
            m.name,
            products_text(m)
        ),
        options,
        0,
        vec![m.merchant_id.clone()],
        json!({"dimension": dim}),
    ))
}

fn attribute_value_extraction(ctx: &BuildContext, key: &str, rng: &mut SplitMix64) -> Attempt {
    let m = ctx.merchant(key).ok_or("unknown merchant")?;
    let attrs = described_attributes(m);
    if attrs.is_empty() {
        return Err("no attribute value stated in the description".into());
    }
    let (dim, value) = *pick(&attrs, rng);
    // Same-dimension alternatives first, topped up with values of other
    // dimensions that the description does not mention.
    let intro = m.introduction.to_lowercase();
    let mut options = vec![value.to_string()];
    options.extend(ctx.attribute_values[dim].iter().filter(|v| **v != value).map(|v| v.to_string()));
    options.truncate(4);
    if options.len() < 4 {
        let filler: Vec<&str> = ctx
            .attribute_values
            .iter()
            .filter(|(d, _)| **d != dim)
            .flat_map(|(_, vals)| vals.iter().copied())
            .filter(|v| !intro.contains(&v.to_lowercase()))
            .collect();
        let extra = with_distractors(value, &filler, 4 - options.len(), rng)?;
        options.extend(extra.into_iter().skip(1));
    }
    Ok(draft(
        format!(
            "Merchant description: {}\nAttribute: {dim}\nWhich value of this attribute does the description give?",
            m.introduction.trim()
        ),
        options,
        0,
        vec![m.merchant_id.clone()],
        json!({"dimension": dim}),
    ))
}

fn multi_level_category(ctx: &BuildContext, key: &str, rng: &mut SplitMix64) -> Attempt {
    let m = ctx.merchant(key).ok_or("unknown merchant")?;
    if m.category_path.len() < 2 {
        return Err("category path has a single level".into());
    }
    let pool: Vec<&String> = ctx.path_texts.iter().collect();
    let options = with_distractors(&m.category_path_text(), &pool, 3, rng)?;
    Ok(draft(
        format!(
            "Merchant name: {}\nRelated products: {}\nWhat is the full category path of this merchant, from the top level down to the finest level?",
            m.name,
            products_text(m)
        ),
        options,
        0,
        vec![m.merchant_id.clone()],
        json!({}),
    ))
}

fn category_based_selection(ctx: &BuildContext, key: &str, rng: &mut SplitMix64) -> Attempt {
    let m = ctx.merchant(key).ok_or("unknown merchant")?;
    let leaf = m.leaf_category();
    let pool: Vec<&str> = ctx
        .named_merchants()
        .filter(|o| o.leaf_category() != leaf)
        .map(|o| o.name.as_str())
        .collect();
    let options = with_distractors(&m.name, &pool, 3, rng)?;
    Ok(draft(
        format!("Category: {leaf}\nWhich of the following merchants belongs to this category?"),
        options,
        0,
        vec![m.merchant_id.clone()],
        json!({"category": leaf}),
    ))
}

fn attribute_texts(ctx: &BuildContext) -> Result<Vec<String>, BenchmarkError> {
    let set: BTreeSet<String> = ctx.merchants.iter().flat_map(|m| m.attribute_texts()).collect();
    Ok(set.into_iter().collect())
}

fn attribute_based_category(ctx: &BuildContext, key: &str, rng: &mut SplitMix64) -> Attempt {
    let mut holders: std::collections::BTreeMap<&str, usize> = Default::default();
    for m in &ctx.merchants {
        if !m.leaf_category().is_empty() && m.attribute_texts().iter().any(|t| t == key) {
            *holders.entry(m.leaf_category()).or_insert(0) += 1;
        }
    }
    let (&leaf, _) = holders
        .iter()
        .max_by(|a, b| a.1.cmp(b.1).then_with(|| b.0.cmp(a.0)))
        .ok_or("attribute held by no categorised merchant")?;
    let pool: Vec<&str> = ctx.leaves.iter().copied().filter(|l| !holders.contains_key(l)).collect();
    let options = with_distractors(leaf, &pool, 3, rng)?;
    Ok(draft(
        format!("Attribute: {key}\nWhich of the following categories does this attribute apply to?"),
        options,
        0,
        vec![],
        json!({"attribute": key}),
    ))
}

fn same_category_judgment(ctx: &BuildContext, key: &str, rng: &mut SplitMix64) -> Attempt {
    let m = ctx.merchant(key).ok_or("unknown merchant")?;
    let leaf = m.leaf_category();
    let positive = rng.below(2) == 0;
    let partners: Vec<_> = ctx
        .named_merchants()
        .filter(|o| o.merchant_id != m.merchant_id && !o.leaf_category().is_empty())
        .filter(|o| (o.leaf_category() == leaf) == positive)
        .collect();
    if partners.is_empty() {
        return Err("no partner merchant".into());
    }
    let other = *pick(&partners, rng);
    let (options, correct) = yes_no(positive);
    Ok(draft(
        format!("Do the merchants \"{}\" and \"{}\" belong to the same category?", m.name, other.name),
        options,
        correct,
        vec![m.merchant_id.clone(), other.merchant_id.clone()],
        json!({}),
    ))
}

fn same_category_selection(ctx: &BuildContext, key: &str, rng: &mut SplitMix64) -> Attempt {
    let m = ctx.merchant(key).ok_or("unknown merchant")?;
    let leaf = m.leaf_category();
    let same: Vec<_> = ctx
        .named_merchants()
        .filter(|o| o.merchant_id != m.merchant_id && o.leaf_category() == leaf)
        .collect();
    if same.is_empty() || leaf.is_empty() {
        return Err("no other merchant in the category".into());
    }
    let other = *pick(&same, rng);
    let pool: Vec<&str> = ctx
        .named_merchants()
        .filter(|o| o.leaf_category() != leaf)
        .map(|o| o.name.as_str())
        .collect();
    let options = with_distractors(&other.name, &pool, 3, rng)?;
    Ok(draft(
        format!("Merchant: {}\nWhich of the following merchants belongs to the same category?", m.name),
        options,
        0,
        vec![m.merchant_id.clone(), other.merchant_id.clone()],
        json!({}),
    ))
}

fn attribute_reasonableness(ctx: &BuildContext, key: &str, rng: &mut SplitMix64) -> Attempt {
    let m = ctx.merchant(key).ok_or("unknown merchant")?;
    let attrs = described_attributes(m);
    if attrs.is_empty() {
        return Err("no attribute value stated in the description".into());
    }
    let (dim, own) = *pick(&attrs, rng);
    let positive = rng.below(2) == 0;
    let value = if positive {
        own
    } else {
        let others: Vec<&str> = ctx.attribute_values[dim].iter().copied().filter(|v| *v != own).collect();
        if others.is_empty() {
            return Err("attribute has a single observed value".into());
        }
        *pick(&others, rng)
    };
    let (options, correct) = yes_no(positive);
    Ok(draft(
        format!(
            "Merchant description: {}\nIs \"{value}\" a reasonable value of the attribute \"{dim}\" for this merchant?",
            m.introduction.trim()
        ),
        options,
        correct,
        vec![m.merchant_id.clone()],
        json!({"dimension": dim, "value": value}),
    ))
}

fn attribute_identification(ctx: &BuildContext, key: &str, rng: &mut SplitMix64) -> Attempt {
    let m = ctx.merchant(key).ok_or("unknown merchant")?;
    let attrs = described_attributes(m);
    if attrs.is_empty() {
        return Err("no attribute value stated in the description".into());
    }
    let (dim, value) = *pick(&attrs, rng);
    let pool: Vec<&str> = ctx
        .attribute_values
        .iter()
        .filter(|(_, vals)| !vals.contains(value))
        .map(|(d, _)| *d)
        .collect();
    let options = with_distractors(dim, &pool, 3, rng)?;
    Ok(draft(
        format!(
            "Merchant description: {}\nWhich attribute does the value \"{value}\" describe?",
            m.introduction.trim()
        ),
        options,
        0,
        vec![m.merchant_id.clone()],
        json!({"value": value}),
    ))
}

fn synonym_terms(ctx: &BuildContext) -> Result<Vec<String>, BenchmarkError> {
    Ok(ctx.bundle.lexicon.synonym_classes().into_iter().flatten().collect())
}

fn synonym_detection(ctx: &BuildContext, key: &str, rng: &mut SplitMix64) -> Attempt {
    let classes = ctx.bundle.lexicon.synonym_classes();
    let own = classes.iter().find(|c| c.contains(key)).ok_or("term not in a synonym class")?;
    let positive = rng.below(2) == 0;
    let partners: Vec<&String> = if positive {
        own.iter().filter(|t| *t != key).collect()
    } else {
        classes.iter().flatten().filter(|t| !own.contains(*t)).collect()
    };
    if partners.is_empty() {
        return Err("no partner term".into());
    }
    let other = *pick(&partners, rng);
    let (options, correct) = yes_no(positive);
    Ok(draft(
        format!("Do the attribute values \"{key}\" and \"{other}\" express the same meaning?"),
        options,
        correct,
        vec![],
        json!({"a": key, "b": other}),
    ))
}

fn containment_pairs(ctx: &BuildContext) -> Result<Vec<String>, BenchmarkError> {
    Ok(ctx
        .bundle
        .lexicon
        .containment_closure()
        .into_iter()
        .map(|(b, n)| pair_key(&b, &n))
        .collect())
}

fn containment(ctx: &BuildContext, key: &str, rng: &mut SplitMix64) -> Attempt {
    let (broad, narrow) = split_pair(key);
    let closure = ctx.bundle.lexicon.containment_closure();
    let positive = rng.below(2) == 0;
    // Negatives reverse the pair, which is only sound without a cycle.
    let (a, b) = if positive || closure.contains(&(narrow.to_string(), broad.to_string())) {
        (broad, narrow)
    } else {
        (narrow, broad)
    };
    let answer = closure.contains(&(a.to_string(), b.to_string()));
    let (options, correct) = yes_no(answer);
    Ok(draft(
        format!("Does the attribute value \"{a}\" include \"{b}\"?"),
        options,
        correct,
        vec![],
        json!({"a": a, "b": b}),
    ))
}

/// Value pairs seen together on some merchant and never declared
/// incompatible.
fn cooccurring_pairs(ctx: &BuildContext) -> BTreeSet<(String, String)> {
    let incompatible = ctx.bundle.lexicon.incompatible_pairs();
    let mut together = BTreeSet::new();
    for m in &ctx.merchants {
        let values: Vec<&String> = m.attributes.values().collect();
        for (i, a) in values.iter().enumerate() {
            for b in &values[i + 1..] {
                if a != b {
                    together.insert(ordered_pair(a, b));
                }
            }
        }
    }
    together.retain(|p| !incompatible.contains(p));
    together
}

fn compatibility_pairs(ctx: &BuildContext) -> Result<Vec<String>, BenchmarkError> {
    Ok(cooccurring_pairs(ctx).iter().map(|(a, b)| pair_key(a, b)).collect())
}

/// A coin decides the polarity; negatives replace the candidate pair with a
/// declared incompatible pair that no merchant holds together.
fn compatibility(ctx: &BuildContext, key: &str, rng: &mut SplitMix64) -> Attempt {
    let positive = rng.below(2) == 0;
    let (a, b) = if positive {
        let (a, b) = split_pair(key);
        (a.to_string(), b.to_string())
    } else {
        let together = cooccurring_pairs(ctx);
        let negatives: Vec<(String, String)> = ctx
            .bundle
            .lexicon
            .incompatible_pairs()
            .into_iter()
            .filter(|p| !together.contains(p))
            .collect();
        if negatives.is_empty() {
            return Err("lexicon has no incompatible pairs".into());
        }
        pick(&negatives, rng).clone()
    };
    let (a, b) = if rng.below(2) == 0 { (a, b) } else { (b, a) };
    let (options, correct) = yes_no(positive);
    Ok(draft(
        format!("Can the attribute values \"{a}\" and \"{b}\" describe the same merchant?"),
        options,
        correct,
        vec![],
        json!({"a": a, "b": b}),
    ))
}

fn mathematical_operations(ctx: &BuildContext, key: &str, rng: &mut SplitMix64) -> Attempt {
    let m = ctx.merchant(key).ok_or("unknown merchant")?;
    let priced: Vec<(&str, u64)> = m
        .products
        .iter()
        .filter_map(|p| p.price.map(|x| (p.name.as_str(), x as u64)))
        .filter(|(_, x)| *x > 0)
        .collect();
    if priced.len() < 2 {
        return Err("fewer than two priced products".into());
    }
    let idx = rng.sample_indices(priced.len(), 2);
    let (p1, c1) = priced[idx[0]];
    let (p2, c2) = priced[idx[1]];
    let q1 = 1 + rng.below(3);
    let q2 = 1 + rng.below(3);
    let total = q1 * c1 + q2 * c2;
    let mut wrong = BTreeSet::new();
    for cand in [
        (q1 + 1) * c1 + q2 * c2,
        q1 * c1 + (q2 + 1) * c2,
        c1 + c2,
        q2 * c1 + q1 * c2,
        total + 10,
        total.saturating_sub(10),
        q1 * c1 + q2 * c2 + c1.min(c2),
        (q1 + q2) * c1.max(c2),
    ] {
        if cand > 0 && cand != total {
            wrong.insert(format!("{cand} yuan"));
        }
    }
    let pool: Vec<String> = wrong.into_iter().collect();
    let options = with_distractors(&format!("{total} yuan"), &pool, 3, rng)?;
    Ok(draft(
        format!(
            "At {}, {p1} costs {c1} yuan and {p2} costs {c2} yuan. What is the total price of {q1} x {p1} and {q2} x {p2}?",
            m.name
        ),
        options,
        0,
        vec![m.merchant_id.clone()],
        json!({"products": [p1, p2], "quantities": [q1, q2]}),
    ))
}

fn function_tag_prediction(ctx: &BuildContext, key: &str, rng: &mut SplitMix64) -> Attempt {
    let m = ctx.merchant(key).ok_or("unknown merchant")?;
    if m.function_tags.is_empty() || m.introduction.trim().is_empty() {
        return Err("merchant lacks description or function tags".into());
    }
    let tag = pick(&m.function_tags, rng);
    let pool: Vec<&str> = ctx
        .function_tags
        .iter()
        .copied()
        .filter(|t| !m.function_tags.iter().any(|own| own == t))
        .collect();
    let options = with_distractors(tag, &pool, 3, rng)?;
    Ok(draft(
        format!(
            "Merchant: {}\nDescription: {}\nWhich of the following function tags fits this merchant?",
            m.name,
            m.introduction.trim()
        ),
        options,
        0,
        vec![m.merchant_id.clone()],
        json!({}),
    ))
}

fn brand_pairs(ctx: &BuildContext) -> Result<Vec<String>, BenchmarkError> {
    let tiers = ctx.bundle.lexicon.brand_tiers();
    let brands: Vec<(&String, &u8)> = tiers.iter().collect();
    let mut out = Vec::new();
    for (i, (a, ta)) in brands.iter().enumerate() {
        for (b, tb) in &brands[i + 1..] {
            if ta != tb {
                out.push(pair_key(a, b));
            }
        }
    }
    Ok(out)
}

fn brand_positioning(ctx: &BuildContext, key: &str, rng: &mut SplitMix64) -> Attempt {
    let tiers = ctx.bundle.lexicon.brand_tiers();
    let (a, b) = split_pair(key);
    let (a, b) = if rng.below(2) == 0 { (a, b) } else { (b, a) };
    let (ta, tb) = (tiers.get(a).ok_or("unknown brand")?, tiers.get(b).ok_or("unknown brand")?);
    let (options, correct) = yes_no(ta > tb);
    Ok(draft(
        format!("Is the brand \"{a}\" positioned as more premium than \"{b}\"?"),
        options,
        correct,
        vec![],
        json!({"a": a, "b": b}),
    ))
}

fn similar_brand_keys(ctx: &BuildContext) -> Result<Vec<String>, BenchmarkError> {
    Ok(ctx.bundle.lexicon.similar_brands().into_keys().collect())
}

fn known_brands(ctx: &BuildContext) -> BTreeSet<String> {
    let mut all: BTreeSet<String> = ctx.bundle.lexicon.brand_tiers().into_keys().collect();
    all.extend(ctx.bundle.lexicon.similar_brands().into_keys());
    all.extend(ctx.merchants.iter().filter_map(|m| m.brand.clone()));
    all
}

fn brand_similarity(ctx: &BuildContext, key: &str, rng: &mut SplitMix64) -> Attempt {
    let similar = ctx.bundle.lexicon.similar_brands();
    let own: Vec<&String> = similar.get(key).ok_or("brand has no similar brand")?.iter().collect();
    let correct = *pick(&own, rng);
    let pool: Vec<String> = known_brands(ctx)
        .into_iter()
        .filter(|b| b != key && !own.contains(&b))
        .collect();
    let options = with_distractors(correct, &pool, 3, rng)?;
    Ok(draft(
        format!("Which of the following brands is most similar to \"{key}\"?"),
        options,
        0,
        vec![],
        json!({"brand": key}),
    ))
}

fn complement_keys(ctx: &BuildContext) -> Result<Vec<String>, BenchmarkError> {
    Ok(ctx.bundle.lexicon.complements().into_keys().collect())
}

fn category_complementarity(ctx: &BuildContext, key: &str, rng: &mut SplitMix64) -> Attempt {
    let complements = ctx.bundle.lexicon.complements();
    let own: Vec<&String> = complements.get(key).ok_or("category has no complement")?.iter().collect();
    let correct = *pick(&own, rng);
    let related = |c: &str| {
        c == key
            || own.iter().any(|o| *o == c)
            || complements.get(c).is_some_and(|s| s.contains(key))
    };
    let mut pool: BTreeSet<&str> = ctx.leaves.iter().copied().collect();
    for (c, set) in &complements {
        pool.insert(c);
        pool.extend(set.iter().map(String::as_str));
    }
    let pool: Vec<&str> = pool.into_iter().filter(|c| !related(c)).collect();
    let options = with_distractors(correct, &pool, 3, rng)?;
    Ok(draft(
        format!("Category: {key}\nWhich of the following categories is most often consumed together with it?"),
        options,
        0,
        vec![],
        json!({"category": key}),
    ))
}
