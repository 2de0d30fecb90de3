use serde_json::json;

use super::{ground_truth, with_distractors, Attempt, Draft, Generator};
use crate::benchmark::context::BuildContext;
use crate::benchmark::BenchmarkError;
use crate::platform::{Action, InteractionRecord, MerchantRecord};
use crate::rng::SplitMix64;

/// Past interactions shown before a held-out target.
pub const HISTORY_LEN: usize = 6;
pub const MIN_HISTORY: usize = 2;

pub fn generator(task_id: &str) -> Option<Generator> {
    let (candidates, build): (fn(&BuildContext) -> Result<Vec<String>, BenchmarkError>, fn(&BuildContext, &str, &mut SplitMix64) -> Attempt) =
        match task_id {
            "recommendation" => (order_users, recommendation),
            "search" => (search_keys, search),
            "content_marketing" => (review_click_keys, content_marketing),
            _ => return None,
        };
    Some(Generator { candidates, build })
}

pub fn merchant_option(m: &MerchantRecord) -> String {
    format!("{} ({})", m.name, m.leaf_category())
}

/// Time, weekday, weather and position of an interaction.
pub fn context_line(ctx: &BuildContext, it: &InteractionRecord) -> String {
    let t = it.local_time(ctx.bundle.utc_offset_minutes);
    let date = ctx.bundle.local_date(it);
    let weather = ctx
        .user(&it.user_id)
        .and_then(|u| ctx.calendar(&u.city).iter().find(|d| d.date == date).map(|d| d.weather.as_str()))
        .unwrap_or("unknown");
    format!(
        "{date} {:02}:{:02} ({}), weather {weather}, near ({:.3}, {:.3})",
        t.hour(),
        t.minute(),
        t.weekday(),
        it.location.latitude,
        it.location.longitude
    )
}

fn history_lines(ctx: &BuildContext, history: &[&InteractionRecord]) -> String {
    history
        .iter()
        .filter_map(|h| {
            let m = ctx.merchant(&h.merchant_id)?;
            let t = h.local_time(ctx.bundle.utc_offset_minutes);
            Some(format!(
                "- {} {:02}:{:02} {} {}",
                ctx.bundle.local_date(h),
                t.hour(),
                t.minute(),
                h.action.as_str(),
                merchant_option(m)
            ))
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Named same-city merchants the user never interacted with.
fn unvisited_pool(ctx: &BuildContext, user: &str, city: &str) -> Vec<String> {
    ctx.city_merchants(city)
        .into_iter()
        .filter(|m| !ctx.has_visited(user, &m.merchant_id))
        .map(merchant_option)
        .collect()
}

fn order_users(ctx: &BuildContext) -> Result<Vec<String>, BenchmarkError> {
    Ok(ctx
        .user_interactions
        .iter()
        .filter(|(_, its)| its.iter().any(|i| i.action == Action::Order))
        .map(|(u, _)| u.to_string())
        .collect())
}

fn recommendation(ctx: &BuildContext, key: &str, rng: &mut SplitMix64) -> Attempt {
    let u = ctx.user(key).ok_or("unknown user")?;
    let its = &ctx.user_interactions[key];
    let pos = its.iter().rposition(|i| i.action == Action::Order).ok_or("user has no order")?;
    let target = its[pos];
    let history = &its[pos.saturating_sub(HISTORY_LEN)..pos];
    if history.len() < MIN_HISTORY {
        return Err("history too short".into());
    }
    let m = ctx.merchant(&target.merchant_id).ok_or("unknown merchant")?;
    if !ctx.has_unique_name(m) {
        return Err("target merchant name is ambiguous".into());
    }
    let options = with_distractors(&merchant_option(m), &unvisited_pool(ctx, key, &m.city), 3, rng)?;
    Ok(Draft {
        stem: format!(
            "User profile: {}\nRecent behaviour (oldest first):\n{}\nCurrent context: {}\nWhich merchant will this user order from next?",
            u.profile_text(),
            history_lines(ctx, history),
            context_line(ctx, target)
        ),
        options,
        correct_index: 0,
        source_ids: vec![u.user_id.clone(), target.key(), m.merchant_id.clone()],
        params: json!({"target": target.key(), "history": history.iter().map(|h| h.key()).collect::<Vec<_>>()}),
        qc: ground_truth(),
    })
}

fn search_keys(ctx: &BuildContext) -> Result<Vec<String>, BenchmarkError> {
    let mut keys: Vec<String> = ctx
        .bundle
        .interactions
        .iter()
        .filter(|i| i.query.as_deref().is_some_and(|q| !q.trim().is_empty()))
        .map(|i| i.key())
        .collect();
    keys.sort();
    Ok(keys)
}

fn search(ctx: &BuildContext, key: &str, rng: &mut SplitMix64) -> Attempt {
    let it = *ctx.interaction_by_key.get(key).ok_or("unknown interaction")?;
    let u = ctx.user(&it.user_id).ok_or("unknown user")?;
    let m = ctx.merchant(&it.merchant_id).ok_or("unknown merchant")?;
    if !ctx.has_unique_name(m) {
        return Err("clicked merchant name is ambiguous".into());
    }
    let query = it.query.as_deref().unwrap_or_default();
    let options = with_distractors(&merchant_option(m), &unvisited_pool(ctx, &u.user_id, &m.city), 3, rng)?;
    Ok(Draft {
        stem: format!(
            "User profile: {}\nSearch query: \"{}\"\nContext: {}\nWhich merchant in the results will this user click?",
            u.profile_text(),
            query.trim(),
            context_line(ctx, it)
        ),
        options,
        correct_index: 0,
        source_ids: vec![u.user_id.clone(), it.key(), m.merchant_id.clone()],
        params: json!({"query": query}),
        qc: ground_truth(),
    })
}

fn review_click_keys(ctx: &BuildContext) -> Result<Vec<String>, BenchmarkError> {
    let mut keys: Vec<String> = ctx
        .bundle
        .interactions
        .iter()
        .filter(|i| i.review_id.as_deref().is_some_and(|r| ctx.review(r).is_some()))
        .map(|i| i.key())
        .collect();
    keys.sort();
    Ok(keys)
}

fn content_marketing(ctx: &BuildContext, key: &str, rng: &mut SplitMix64) -> Attempt {
    let it = *ctx.interaction_by_key.get(key).ok_or("unknown interaction")?;
    let u = ctx.user(&it.user_id).ok_or("unknown user")?;
    let review = ctx.review(it.review_id.as_deref().unwrap_or_default()).ok_or("unknown review")?;
    let touched: std::collections::BTreeSet<&str> = ctx.user_interactions[it.user_id.as_str()]
        .iter()
        .filter_map(|i| i.review_id.as_deref())
        .collect();
    let pool: Vec<&str> = ctx
        .bundle
        .reviews
        .iter()
        .filter(|r| r.user_id != u.user_id && !touched.contains(r.review_id.as_str()))
        .map(|r| r.text.trim())
        .collect();
    let options = with_distractors(review.text.trim(), &pool, 3, rng)?;
    Ok(Draft {
        stem: format!(
            "User profile: {}\nContext: {}\nWhich of the following reviews is this user most interested in?",
            u.profile_text(),
            context_line(ctx, it)
        ),
        options,
        correct_index: 0,
        source_ids: vec![u.user_id.clone(), it.key(), review.review_id.clone()],
        params: json!({}),
        qc: ground_truth(),
    })
}
