use std::collections::BTreeMap;

use serde_json::json;

use super::{ground_truth, merchant_brief, with_distractors, Attempt, Draft, Generator};
use crate::benchmark::context::BuildContext;
use crate::benchmark::geo::compute_distance;
use crate::benchmark::qc::{check_stat_sufficiency, detect_stable_trend, TrendDirection};
use crate::benchmark::BenchmarkError;
use crate::platform::{Season, Weather};
use crate::rng::SplitMix64;

/// Ratio buckets for quantitative impact questions: `< 0.8`, `[0.8, 1)`,
/// `[1, 1.25)`, `>= 1.25`.
pub const RATIO_EDGES: [f64; 3] = [0.8, 1.0, 1.25];
/// Ratios this close (relative) to an edge are too ambiguous to ask about.
pub const RATIO_EDGE_MARGIN: f64 = 0.03;
/// Distances this close (relative) to a bucket edge are skipped.
pub const DISTANCE_EDGE_MARGIN: f64 = 0.03;
/// The nearest merchant must beat the runner-up by this factor.
pub const NEAREST_MARGIN: f64 = 1.2;
/// The peak period must beat the runner-up by this factor.
pub const PEAK_MARGIN: f64 = 1.2;

pub const PERIODS: [(&str, u8, u8); 5] = [
    ("Morning (06:00-11:00)", 6, 11),
    ("Lunch (11:00-14:00)", 11, 14),
    ("Afternoon (14:00-17:00)", 14, 17),
    ("Dinner (17:00-21:00)", 17, 21),
    ("Late night (21:00-06:00)", 21, 6),
];

pub fn period_of_hour(hour: u8) -> usize {
    PERIODS
        .iter()
        .position(|(_, start, end)| {
            if start < end {
                (*start..*end).contains(&hour)
            } else {
                hour >= *start || hour < *end
            }
        })
        .expect("periods cover the day")
}

pub const RAIN_LABELS: [&str; 2] = ["Consumption increases on rainy days", "Consumption decreases on rainy days"];

pub fn ratio_labels(condition: &str) -> [String; 4] {
    [
        format!("Drops by more than 20% {condition}"),
        format!("Drops by up to 20% {condition}"),
        format!("Rises by less than 25% {condition}"),
        format!("Rises by 25% or more {condition}"),
    ]
}

pub fn ratio_bucket(ratio: f64) -> usize {
    RATIO_EDGES.iter().take_while(|e| ratio >= **e).count()
}

pub fn generator(task_id: &str) -> Option<Generator> {
    let (candidates, build): (fn(&BuildContext) -> Result<Vec<String>, BenchmarkError>, fn(&BuildContext, &str, &mut SplitMix64) -> Attempt) =
        match task_id {
            "weather_impact_qualitative" => (calendar_merchants, weather_qualitative),
            "weather_impact_quantitative" => (calendar_merchants, weather_quantitative),
            "seasonal_impact_qualitative" => (calendar_merchants, seasonal_qualitative),
            "seasonal_impact_quantitative" => (calendar_merchants, seasonal_quantitative),
            "nearest_merchant_selection" => (named_merchants, nearest_merchant),
            "distance_estimation" => (named_merchants, distance_estimation),
            "administrative_division" => (named_merchants, administrative_division),
            "business_district_identification" => (named_merchants, business_district),
            "operating_hours_prediction" => (named_merchants, operating_hours),
            "peak_hours_prediction" => (ordered_merchants, peak_hours),
            _ => return None,
        };
    Some(Generator { candidates, build })
}

fn named_merchants(ctx: &BuildContext) -> Result<Vec<String>, BenchmarkError> {
    Ok(ctx.named_merchants().map(|m| m.merchant_id.clone()).collect())
}

fn calendar_merchants(ctx: &BuildContext) -> Result<Vec<String>, BenchmarkError> {
    Ok(ctx
        .named_merchants()
        .filter(|m| !ctx.calendar(&m.city).is_empty() && ctx.daily_orders.contains_key(m.merchant_id.as_str()))
        .map(|m| m.merchant_id.clone())
        .collect())
}

fn ordered_merchants(ctx: &BuildContext) -> Result<Vec<String>, BenchmarkError> {
    Ok(ctx
        .named_merchants()
        .filter(|m| ctx.orders_by_merchant.contains_key(m.merchant_id.as_str()))
        .map(|m| m.merchant_id.clone())
        .collect())
}

fn weather_qualitative(ctx: &BuildContext, key: &str, rng: &mut SplitMix64) -> Attempt {
    let m = ctx.merchant(key).ok_or("unknown merchant")?;
    let rainy = ctx.order_group(m, "rainy", |d| d.weather == Weather::Rainy);
    let sunny = ctx.order_group(m, "sunny", |d| d.weather == Weather::Sunny);
    let verdict = check_stat_sufficiency(&[rainy.clone(), sunny.clone()], ctx.qc());
    if !verdict.passed {
        return Err(format!("qc: {}", verdict.failing.join("; ")));
    }
    let trend = detect_stable_trend(&rainy.values(), &sunny.values(), ctx.qc(), rng.next_u64());
    let correct_index = match trend.direction {
        TrendDirection::AHigher => 0,
        TrendDirection::BHigher => 1,
        TrendDirection::None => return Err("qc: no stable weather trend".into()),
    };
    Ok(Draft {
        stem: format!(
            "Merchant: {}\nCompared with sunny days, how does consumption at this merchant change on rainy days?",
            merchant_brief(m)
        ),
        options: RAIN_LABELS.iter().map(|s| s.to_string()).collect(),
        correct_index,
        source_ids: vec![m.merchant_id.clone()],
        params: json!({"measure": "daily_orders", "a": "rainy", "b": "sunny"}),
        qc: json!({"gate": "sufficiency+bootstrap", "sufficiency": verdict, "trend": trend}),
    })
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn ratio_question(
    ctx: &BuildContext,
    key: &str,
    a: (&str, &dyn Fn(&crate::platform::CalendarDay) -> bool),
    b: (&str, &dyn Fn(&crate::platform::CalendarDay) -> bool),
    condition: &str,
    stem: &str,
) -> Attempt {
    let m = ctx.merchant(key).ok_or("unknown merchant")?;
    let ga = ctx.order_group(m, a.0, a.1);
    let gb = ctx.order_group(m, b.0, b.1);
    let verdict = check_stat_sufficiency(&[ga.clone(), gb.clone()], ctx.qc());
    if !verdict.passed {
        return Err(format!("qc: {}", verdict.failing.join("; ")));
    }
    let (ma, mb) = (mean(&ga.values()), mean(&gb.values()));
    if mb <= 0.0 {
        return Err("no baseline consumption".into());
    }
    let ratio = ma / mb;
    if RATIO_EDGES.iter().any(|e| ((ratio - e) / e).abs() < RATIO_EDGE_MARGIN) {
        return Err(format!("ratio {ratio:.3} too close to a bucket edge"));
    }
    Ok(Draft {
        stem: format!("Merchant: {}\n{stem}", merchant_brief(m)),
        options: ratio_labels(condition).to_vec(),
        correct_index: ratio_bucket(ratio),
        source_ids: vec![m.merchant_id.clone()],
        params: json!({"measure": "daily_orders", "a": a.0, "b": b.0, "ratio": ratio, "edges": RATIO_EDGES}),
        qc: json!({"gate": "sufficiency", "sufficiency": verdict, "edge_margin": RATIO_EDGE_MARGIN}),
    })
}

fn weather_quantitative(ctx: &BuildContext, key: &str, _rng: &mut SplitMix64) -> Attempt {
    ratio_question(
        ctx,
        key,
        ("rainy", &|d| d.weather == Weather::Rainy),
        ("sunny", &|d| d.weather == Weather::Sunny),
        "on rainy days",
        "Compared with sunny days, by how much does daily consumption change on rainy days?",
    )
}

fn seasonal_quantitative(ctx: &BuildContext, key: &str, _rng: &mut SplitMix64) -> Attempt {
    ratio_question(
        ctx,
        key,
        ("summer", &|d| d.season == Season::Summer),
        ("winter", &|d| d.season == Season::Winter),
        "in summer",
        "Compared with winter, by how much does daily consumption change in summer?",
    )
}

pub fn season_label(s: Season) -> &'static str {
    match s {
        Season::Spring => "Spring",
        Season::Summer => "Summer",
        Season::Autumn => "Autumn",
        Season::Winter => "Winter",
    }
}

fn seasonal_qualitative(ctx: &BuildContext, key: &str, rng: &mut SplitMix64) -> Attempt {
    let m = ctx.merchant(key).ok_or("unknown merchant")?;
    let groups: Vec<_> = Season::ALL
        .iter()
        .map(|s| ctx.order_group(m, s.as_str(), |d| d.season == *s))
        .collect();
    let verdict = check_stat_sufficiency(&groups, ctx.qc());
    if !verdict.passed {
        return Err(format!("qc: {}", verdict.failing.join("; ")));
    }
    let mut ranked: Vec<(usize, f64)> = groups.iter().enumerate().map(|(i, g)| (i, mean(&g.values()))).collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let (top, second) = (ranked[0].0, ranked[1].0);
    let trend = detect_stable_trend(&groups[top].values(), &groups[second].values(), ctx.qc(), rng.next_u64());
    if trend.direction != TrendDirection::AHigher {
        return Err("qc: peak season not stable against the runner-up".into());
    }
    Ok(Draft {
        stem: format!("Merchant: {}\nIn which season is consumption at this merchant highest?", merchant_brief(m)),
        options: Season::ALL.iter().map(|s| season_label(*s).to_string()).collect(),
        correct_index: top,
        source_ids: vec![m.merchant_id.clone()],
        params: json!({"measure": "daily_orders", "runner_up": Season::ALL[second].as_str()}),
        qc: json!({"gate": "sufficiency+bootstrap", "sufficiency": verdict, "trend": trend}),
    })
}

fn distance(a: &crate::platform::MerchantRecord, b: &crate::platform::MerchantRecord) -> Result<f64, String> {
    compute_distance(a.location.point(), b.location.point()).map_err(|e| e.to_string())
}

fn nearest_merchant(ctx: &BuildContext, key: &str, rng: &mut SplitMix64) -> Attempt {
    let m = ctx.merchant(key).ok_or("unknown merchant")?;
    let mut others = Vec::new();
    for o in ctx.city_merchants(&m.city) {
        if o.merchant_id != m.merchant_id {
            others.push((distance(m, o)?, o));
        }
    }
    if others.len() < 4 {
        return Err("fewer than four other merchants in the city".into());
    }
    others.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.merchant_id.cmp(&b.1.merchant_id)));
    let (d1, nearest) = others[0];
    if others[1].0 < d1 * NEAREST_MARGIN + 50.0 {
        return Err("nearest merchant not clearly nearest".into());
    }
    let pool: Vec<&str> = others
        .iter()
        .filter(|(d, _)| *d >= d1 * 1.5 + 100.0)
        .map(|(_, o)| o.name.as_str())
        .collect();
    let options = with_distractors(&nearest.name, &pool, 3, rng)?;
    Ok(Draft {
        stem: format!(
            "Merchant: {}\nAddress: {}\nWhich of the following merchants is nearest to it?",
            m.name, m.location.address
        ),
        options,
        correct_index: 0,
        source_ids: vec![m.merchant_id.clone(), nearest.merchant_id.clone()],
        params: json!({"distance_m": d1}),
        qc: ground_truth(),
    })
}

fn distance_estimation(ctx: &BuildContext, key: &str, rng: &mut SplitMix64) -> Attempt {
    let m = ctx.merchant(key).ok_or("unknown merchant")?;
    let others: Vec<_> = ctx
        .city_merchants(&m.city)
        .into_iter()
        .filter(|o| o.merchant_id != m.merchant_id)
        .collect();
    if others.is_empty() {
        return Err("no other merchant in the city".into());
    }
    // Stratify by bucket so every range is represented.
    let buckets = &ctx.options.distance_buckets;
    let target = rng.below_usize(buckets.count());
    let mut in_bucket = Vec::new();
    for o in &others {
        if buckets.bucket_of(distance(m, o)?) == target {
            in_bucket.push(*o);
        }
    }
    let pool = if in_bucket.is_empty() { &others } else { &in_bucket };
    let o = pool[rng.below_usize(pool.len())];
    let d = distance(m, o)?;
    if buckets.edge_margin(d) < DISTANCE_EDGE_MARGIN {
        return Err(format!("distance {d:.0} m too close to a bucket edge"));
    }
    Ok(Draft {
        stem: format!(
            "Merchant A: {} ({})\nMerchant B: {} ({})\nHow far apart are these two merchants?",
            m.name, m.location.address, o.name, o.location.address
        ),
        options: buckets.labels(),
        correct_index: buckets.bucket_of(d),
        source_ids: vec![m.merchant_id.clone(), o.merchant_id.clone()],
        params: json!({"distance_m": d, "edges_m": buckets.edges_m}),
        qc: ground_truth(),
    })
}

fn administrative_division(ctx: &BuildContext, key: &str, rng: &mut SplitMix64) -> Attempt {
    let m = ctx.merchant(key).ok_or("unknown merchant")?;
    let district = m.district.as_deref().filter(|d| !d.is_empty()).ok_or("merchant has no district")?;
    let pool: Vec<&str> = ctx
        .merchants
        .iter()
        .filter(|o| o.city.eq_ignore_ascii_case(&m.city))
        .filter_map(|o| o.district.as_deref())
        .collect();
    let options = with_distractors(district, &pool, 3, rng)?;
    let landmark = m.business_district.as_deref().unwrap_or(m.location.address.as_str());
    Ok(Draft {
        stem: format!(
            "Merchant: {}\nNearby landmark: {landmark}\nWhich administrative district of {} is this merchant in?",
            m.name, m.city
        ),
        options,
        correct_index: 0,
        source_ids: vec![m.merchant_id.clone()],
        params: json!({}),
        qc: ground_truth(),
    })
}

fn business_district(ctx: &BuildContext, key: &str, rng: &mut SplitMix64) -> Attempt {
    let m = ctx.merchant(key).ok_or("unknown merchant")?;
    let bd = m
        .business_district
        .as_deref()
        .filter(|d| !d.is_empty())
        .ok_or("merchant has no business district")?;
    let pool: Vec<&str> = ctx
        .merchants
        .iter()
        .filter(|o| o.city.eq_ignore_ascii_case(&m.city))
        .filter_map(|o| o.business_district.as_deref())
        .collect();
    let options = with_distractors(bd, &pool, 9, rng)?;
    Ok(Draft {
        stem: format!(
            "Merchant: {}\nAddress: {}\nIn which business district of {} is this merchant located?",
            m.name, m.location.address, m.city
        ),
        options,
        correct_index: 0,
        source_ids: vec![m.merchant_id.clone()],
        params: json!({}),
        qc: ground_truth(),
    })
}

fn operating_hours(ctx: &BuildContext, key: &str, rng: &mut SplitMix64) -> Attempt {
    let m = ctx.merchant(key).ok_or("unknown merchant")?;
    if m.operating_hours.is_empty() {
        return Err("merchant has no operating hours".into());
    }
    let pool: Vec<&String> = ctx.hours_texts.iter().collect();
    let options = with_distractors(&m.hours_text(), &pool, 3, rng)?;
    Ok(Draft {
        stem: format!("Merchant: {}\nWhat are this merchant's operating hours most likely to be?", merchant_brief(m)),
        options,
        correct_index: 0,
        source_ids: vec![m.merchant_id.clone()],
        params: json!({}),
        qc: ground_truth(),
    })
}

fn peak_hours(ctx: &BuildContext, key: &str, rng: &mut SplitMix64) -> Attempt {
    let m = ctx.merchant(key).ok_or("unknown merchant")?;
    let orders = ctx.orders_by_merchant.get(key).map(Vec::as_slice).unwrap_or(&[]);
    if orders.len() < ctx.qc().min_peak_orders {
        return Err(format!("qc: {} orders < {}", orders.len(), ctx.qc().min_peak_orders));
    }
    let mut counts = [0usize; PERIODS.len()];
    for it in orders {
        counts[period_of_hour(it.local_time(ctx.bundle.utc_offset_minutes).hour())] += 1;
    }
    let mut ranked: Vec<usize> = (0..PERIODS.len()).collect();
    ranked.sort_by(|a, b| counts[*b].cmp(&counts[*a]).then(a.cmp(b)));
    let (top, second) = (counts[ranked[0]], counts[ranked[1]]);
    if (top as f64) < second as f64 * PEAK_MARGIN || top == second {
        return Err("qc: peak period not dominant".into());
    }
    let correct = PERIODS[ranked[0]].0;
    let pool: Vec<&str> = PERIODS.iter().map(|p| p.0).collect();
    let options = with_distractors(correct, &pool, 3, rng)?;
    let counts_by_label: BTreeMap<&str, usize> = PERIODS.iter().zip(counts).map(|(p, c)| (p.0, c)).collect();
    Ok(Draft {
        stem: format!(
            "Merchant: {}\nDuring which period of the day does this merchant see the most consumption?",
            merchant_brief(m)
        ),
        options,
        correct_index: 0,
        source_ids: vec![m.merchant_id.clone()],
        params: json!({"counts": counts_by_label}),
        qc: json!({"gate": "peak_support", "orders": orders.len(), "margin": PEAK_MARGIN}),
    })
}
