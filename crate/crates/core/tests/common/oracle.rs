//! Brute-force recomputation of every benchmark answer straight from the
//! bundle. Shares no code with the generators beyond record accessors.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use localeval::benchmark::{BenchmarkFile, BenchmarkQuestion};
use localeval::platform::{Action, InteractionRecord, MerchantRecord, StoreBundle};

const R: f64 = 6_371_000.0;

pub fn haversine(a: (f64, f64), b: (f64, f64)) -> f64 {
    let (p1, p2) = (a.0.to_radians(), b.0.to_radians());
    let dp = p2 - p1;
    let dl = (b.1 - a.1).to_radians();
    let h = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * R * h.sqrt().asin()
}

fn civil_date(ts: i64, offset_min: i32) -> String {
    let days = (ts + offset_min as i64 * 60).div_euclid(86_400);
    // Howard Hinnant's days-from-civil inverse.
    let z = days + 719_468;
    let era = z.div_euclid(146_097);
    let doe = z - era * 146_097;
    let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365;
    let y = yoe + era * 400;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let d = doy - (153 * mp + 2) / 5 + 1;
    let m = if mp < 10 { mp + 3 } else { mp - 9 };
    format!("{:04}-{:02}-{:02}", if m <= 2 { y + 1 } else { y }, m, d)
}

fn local_hour(ts: i64, offset_min: i32) -> i64 {
    (ts + offset_min as i64 * 60).rem_euclid(86_400) / 3600
}

pub struct Oracle<'a> {
    pub b: &'a StoreBundle,
    pub file: &'a BenchmarkFile,
}

fn leaf(m: &MerchantRecord) -> &str {
    m.category_path.last().map(String::as_str).unwrap_or("")
}

impl<'a> Oracle<'a> {
    fn m(&self, id: &str) -> &'a MerchantRecord {
        self.b.merchants.iter().find(|m| m.merchant_id == id).expect("merchant")
    }

    fn by_name(&self, name: &str) -> Vec<&'a MerchantRecord> {
        self.b.merchants.iter().filter(|m| m.name == name).collect()
    }

    fn by_option(&self, opt: &str) -> Vec<&'a MerchantRecord> {
        self.b.merchants.iter().filter(|m| format!("{} ({})", m.name, leaf(m)) == opt).collect()
    }

    fn orders_of(&self, merchant: &str) -> Vec<&'a InteractionRecord> {
        self.b
            .interactions
            .iter()
            .filter(|i| i.merchant_id == merchant && i.action == Action::Order)
            .collect()
    }

    fn daily_means(&self, m: &MerchantRecord, keep: impl Fn(&localeval::platform::CalendarDay) -> bool) -> (usize, f64) {
        let mut per_day: BTreeMap<String, f64> = BTreeMap::new();
        for it in self.orders_of(&m.merchant_id) {
            *per_day.entry(civil_date(it.timestamp, self.b.utc_offset_minutes)).or_insert(0.0) += 1.0;
        }
        let days: Vec<_> = self.b.calendar.iter().filter(|d| d.city.eq_ignore_ascii_case(&m.city) && keep(d)).collect();
        let total: f64 = days.iter().map(|d| per_day.get(&d.date).copied().unwrap_or(0.0)).sum();
        (days.len(), total / days.len() as f64)
    }

    fn visited(&self, user: &str) -> BTreeSet<&'a str> {
        self.b.interactions.iter().filter(|i| i.user_id == user).map(|i| i.merchant_id.as_str()).collect()
    }

    fn synonyms(&self) -> Vec<BTreeSet<String>> {
        let mut adj: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for e in &self.b.lexicon.entries {
            if let localeval::platform::LexiconEntry::Synonym { a, b } = e {
                adj.entry(a.clone()).or_default().push(b.clone());
                adj.entry(b.clone()).or_default().push(a.clone());
            }
        }
        let mut seen = BTreeSet::new();
        let mut classes = Vec::new();
        for start in adj.keys() {
            if seen.contains(start) {
                continue;
            }
            let mut class = BTreeSet::new();
            let mut q = VecDeque::from([start.clone()]);
            while let Some(x) = q.pop_front() {
                if class.insert(x.clone()) {
                    q.extend(adj[&x].iter().cloned());
                }
            }
            seen.extend(class.iter().cloned());
            classes.push(class);
        }
        classes
    }

    fn contains(&self, a: &str, b: &str) -> bool {
        let mut stack = vec![a.to_string()];
        let mut seen = BTreeSet::new();
        while let Some(x) = stack.pop() {
            for e in &self.b.lexicon.entries {
                if let localeval::platform::LexiconEntry::Contains { broad, narrow } = e {
                    if *broad == x && seen.insert(narrow.clone()) {
                        if narrow == b {
                            return true;
                        }
                        stack.push(narrow.clone());
                    }
                }
            }
        }
        false
    }

    fn incompatible(&self, a: &str, b: &str) -> bool {
        self.b.lexicon.entries.iter().any(|e| {
            matches!(e, localeval::platform::LexiconEntry::Incompatible { a: x, b: y }
                if (x == a && y == b) || (x == b && y == a))
        })
    }

    fn held_together(&self, a: &str, b: &str) -> bool {
        self.b.merchants.iter().any(|m| {
            let vals: Vec<&String> = m.attributes.values().collect();
            vals.iter().any(|v| *v == a) && vals.iter().any(|v| *v == b)
        })
    }

    fn complement(&self, c: &str, k: &str) -> bool {
        self.b.lexicon.entries.iter().any(|e| {
            matches!(e, localeval::platform::LexiconEntry::Complement { category, complement }
                if category == c && complement == k)
        })
    }

    fn similar(&self, a: &str, b: &str) -> bool {
        self.b.lexicon.entries.iter().any(|e| {
            matches!(e, localeval::platform::LexiconEntry::SimilarBrand { a: x, b: y }
                if (x == a && y == b) || (x == b && y == a))
        })
    }

    fn tier(&self, brand: &str) -> u8 {
        self.b
            .lexicon
            .entries
            .iter()
            .find_map(|e| match e {
                localeval::platform::LexiconEntry::BrandTier { brand: x, tier } if x == brand => Some(*tier),
                _ => None,
            })
            .expect("brand tier")
    }

    /// Recompute the answer of `q`; `Err` explains any disagreement.
    pub fn check(&self, q: &BenchmarkQuestion) -> Result<(), String> {
        let correct = q.options[q.correct_index].as_str();
        let others: Vec<&str> =
            q.options.iter().enumerate().filter(|(i, _)| *i != q.correct_index).map(|(_, o)| o.as_str()).collect();
        let src = &q.construction.source_ids;
        let p = &q.construction.params;
        let ps = |k: &str| p[k].as_str().unwrap_or_default().to_string();
        let yes = correct == "Yes";
        let ensure = |ok: bool, what: &str| if ok { Ok(()) } else { Err(format!("{}: {what}", q.question_id)) };
        match q.task_type.as_str() {
            "category_prediction" => {
                let m = self.m(&src[0]);
                ensure(correct == leaf(m) && others.iter().all(|o| *o != leaf(m)), "leaf")
            }
            "attribute_mining" => {
                let m = self.m(&src[0]);
                let own: Vec<String> = m.attributes.iter().map(|(k, v)| format!("{k}: {v}")).collect();
                ensure(own.iter().any(|t| t == correct) && others.iter().all(|o| !own.iter().any(|t| t == o)), "attribute")
            }
            "attribute_value_extraction" => {
                let m = self.m(&src[0]);
                let v = &m.attributes[&ps("dimension")];
                ensure(
                    correct == v && m.introduction.to_lowercase().contains(&v.to_lowercase()) && !others.contains(&v.as_str()),
                    "extracted value",
                )
            }
            "multi_level_category_prediction" => {
                let path = self.m(&src[0]).category_path.join(" > ");
                ensure(correct == path && !others.contains(&path.as_str()), "path")
            }
            "category_based_merchant_selection" => {
                let cat = ps("category");
                let hit = self.by_name(correct);
                ensure(
                    hit.len() == 1
                        && leaf(hit[0]) == cat
                        && others.iter().all(|o| self.by_name(o).iter().all(|m| leaf(m) != cat)),
                    "merchant of category",
                )
            }
            "attribute_based_category_selection" => {
                let attr = ps("attribute");
                let has = |l: &str| {
                    self.b.merchants.iter().any(|m| {
                        leaf(m) == l && m.attributes.iter().any(|(k, v)| format!("{k}: {v}") == attr)
                    })
                };
                ensure(has(correct) && others.iter().all(|o| !has(o)), "category holding attribute")
            }
            "same_category_judgment" => {
                let same = leaf(self.m(&src[0])) == leaf(self.m(&src[1]));
                ensure(same == yes, "same category")
            }
            "same_category_selection" => {
                let l = leaf(self.m(&src[0]));
                let hit = self.by_name(correct);
                ensure(
                    hit.len() == 1
                        && leaf(hit[0]) == l
                        && hit[0].merchant_id != src[0]
                        && others.iter().all(|o| self.by_name(o).iter().all(|m| leaf(m) != l)),
                    "same-category merchant",
                )
            }
            "attribute_value_reasonableness" => {
                let m = self.m(&src[0]);
                ensure((m.attributes[&ps("dimension")] == ps("value")) == yes, "reasonable value")
            }
            "attribute_value_identification" => {
                let v = ps("value");
                let m = self.m(&src[0]);
                let anywhere = |d: &str| self.b.merchants.iter().any(|x| x.attributes.get(d) == Some(&v));
                ensure(
                    m.attributes.get(correct) == Some(&v) && others.iter().all(|d| !anywhere(d)),
                    "dimension of value",
                )
            }
            "attribute_value_synonym_detection" => {
                let (a, b) = (ps("a"), ps("b"));
                let same = self.synonyms().iter().any(|c| c.contains(&a) && c.contains(&b));
                ensure(same == yes, "synonymy")
            }
            "attribute_value_containment" => ensure(self.contains(&ps("a"), &ps("b")) == yes, "containment"),
            "attribute_compatibility" => {
                let (a, b) = (ps("a"), ps("b"));
                if yes {
                    ensure(self.held_together(&a, &b) && !self.incompatible(&a, &b), "compatible pair")
                } else {
                    ensure(self.incompatible(&a, &b) && !self.held_together(&a, &b), "incompatible pair")
                }
            }
            "mathematical_operations" => {
                let m = self.m(&src[0]);
                let price = |n: &str| m.products.iter().find(|x| x.name == n).and_then(|x| x.price).unwrap() as u64;
                let names = p["products"].as_array().unwrap();
                let qty = p["quantities"].as_array().unwrap();
                let total: u64 = (0..2)
                    .map(|i| price(names[i].as_str().unwrap()) * qty[i].as_u64().unwrap())
                    .sum();
                ensure(correct == format!("{total} yuan") && !others.contains(&format!("{total} yuan").as_str()), "total")
            }
            "function_tag_prediction" => {
                let m = self.m(&src[0]);
                ensure(
                    m.function_tags.iter().any(|t| t == correct) && others.iter().all(|o| !m.function_tags.iter().any(|t| t == o)),
                    "function tag",
                )
            }
            "brand_positioning" => ensure((self.tier(&ps("a")) > self.tier(&ps("b"))) == yes, "tier order"),
            "brand_similarity" => {
                let b = ps("brand");
                ensure(self.similar(&b, correct) && others.iter().all(|o| !self.similar(&b, o) && *o != b), "similar brand")
            }
            "category_complementarity" => {
                let c = ps("category");
                ensure(
                    self.complement(&c, correct)
                        && others.iter().all(|o| !self.complement(&c, o) && !self.complement(o, &c) && *o != c),
                    "complement",
                )
            }
            "weather_impact_qualitative" => {
                let m = self.m(&src[0]);
                let (nr, rainy) = self.daily_means(m, |d| d.weather == localeval::platform::Weather::Rainy);
                let (ns, sunny) = self.daily_means(m, |d| d.weather == localeval::platform::Weather::Sunny);
                let min = self.file.manifest.qc.min_days;
                ensure(nr >= min && ns >= min, "enough days")?;
                ensure((rainy > sunny) == correct.contains("increases"), "rain direction")
            }
            "weather_impact_quantitative" | "seasonal_impact_quantitative" => {
                use localeval::platform::{Season, Weather};
                let m = self.m(&src[0]);
                let ((na, a), (nb, b)) = if q.task_type.starts_with("weather") {
                    (self.daily_means(m, |d| d.weather == Weather::Rainy), self.daily_means(m, |d| d.weather == Weather::Sunny))
                } else {
                    (self.daily_means(m, |d| d.season == Season::Summer), self.daily_means(m, |d| d.season == Season::Winter))
                };
                let min = self.file.manifest.qc.min_days;
                ensure(na >= min && nb >= min, "enough days")?;
                let r = a / b;
                let bucket = [0.8, 1.0, 1.25].iter().filter(|e| r >= **e).count();
                ensure(q.correct_index == bucket, "ratio bucket")
            }
            "seasonal_impact_qualitative" => {
                use localeval::platform::Season;
                let m = self.m(&src[0]);
                let means: Vec<f64> = Season::ALL.iter().map(|s| self.daily_means(m, |d| d.season == *s).1).collect();
                let best = (0..4).fold(0, |bi, i| if means[i] > means[bi] { i } else { bi });
                ensure(q.correct_index == best && correct.eq_ignore_ascii_case(Season::ALL[best].as_str()), "peak season")
            }
            "nearest_merchant_selection" => {
                let m = self.m(&src[0]);
                let here = (m.location.latitude, m.location.longitude);
                let d = |x: &MerchantRecord| haversine(here, (x.location.latitude, x.location.longitude));
                let unique = |x: &&MerchantRecord| self.by_name(&x.name).len() == 1;
                let best = self
                    .b
                    .merchants
                    .iter()
                    .filter(|x| x.merchant_id != m.merchant_id && x.city == m.city)
                    .filter(unique)
                    .min_by(|a, b| d(a).total_cmp(&d(b)))
                    .unwrap();
                let dc = d(best);
                ensure(
                    best.name == correct && others.iter().all(|o| self.by_name(o).iter().all(|x| d(x) > dc)),
                    "nearest",
                )
            }
            "distance_estimation" => {
                let (a, b) = (self.m(&src[0]), self.m(&src[1]));
                let dist = haversine((a.location.latitude, a.location.longitude), (b.location.latitude, b.location.longitude));
                let edges = &self.file.manifest.distance_buckets.edges_m;
                ensure(q.correct_index == edges.iter().filter(|e| dist >= **e).count(), "distance bucket")
            }
            "administrative_division" => {
                let d = self.m(&src[0]).district.clone().unwrap();
                ensure(correct == d && !others.contains(&d.as_str()), "district")
            }
            "business_district_identification" => {
                let d = self.m(&src[0]).business_district.clone().unwrap();
                ensure(correct == d && !others.contains(&d.as_str()), "business district")
            }
            "operating_hours_prediction" => {
                let h = self.m(&src[0]).hours_text();
                ensure(correct == h && !others.contains(&h.as_str()), "hours")
            }
            "peak_hours_prediction" => {
                let spans = [(6, 11, "Morning"), (11, 14, "Lunch"), (14, 17, "Afternoon"), (17, 21, "Dinner")];
                let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
                for it in self.orders_of(&src[0]) {
                    let h = local_hour(it.timestamp, self.b.utc_offset_minutes);
                    let name = spans.iter().find(|(a, b, _)| h >= *a && h < *b).map(|s| s.2).unwrap_or("Late night");
                    *counts.entry(name).or_insert(0) += 1;
                }
                let best = counts.iter().max_by_key(|(_, c)| **c).unwrap().0;
                ensure(correct.starts_with(best), "peak period")
            }
            "target_group_identification" => {
                let cat = ps("category");
                let attr = &self.file.manifest.group_attribute;
                let mut counts: BTreeMap<String, usize> = BTreeMap::new();
                for it in self.b.interactions.iter().filter(|i| i.action == Action::Order) {
                    if leaf(self.m(&it.merchant_id)) != cat {
                        continue;
                    }
                    if let Some(g) = self.b.users.iter().find(|u| u.user_id == it.user_id).and_then(|u| u.profile.get(attr)) {
                        *counts.entry(g.clone()).or_insert(0) += 1;
                    }
                }
                let top = counts.iter().max_by_key(|(_, c)| **c).unwrap();
                ensure(top.0 == correct && others.iter().all(|o| counts.get(*o).copied().unwrap_or(0) < *top.1), "top group")
            }
            "user_preference_prediction" => {
                let user = &src[0];
                let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
                let mut touched = BTreeSet::new();
                for it in self.b.interactions.iter().filter(|i| &i.user_id == user) {
                    let l = leaf(self.m(&it.merchant_id));
                    touched.insert(l);
                    if it.action == Action::Order {
                        *counts.entry(l).or_insert(0) += 1;
                    }
                }
                let max = *counts.values().max().unwrap();
                let tops: Vec<_> = counts.iter().filter(|(_, c)| **c == max).collect();
                ensure(
                    tops.len() == 1 && *tops[0].0 == correct && others.iter().all(|o| !touched.contains(o)),
                    "preferred category",
                )
            }
            t if t.starts_with("review_") || t.ends_with("_content") || t == "overall_review_usefulness" => {
                let dim = ps("dimension");
                let r = self.b.reviews.iter().find(|r| r.review_id == src[0]).unwrap();
                let labels: Vec<String> = r
                    .annotations
                    .iter()
                    .filter(|a| a.dimension.as_str() == dim)
                    .map(|a| {
                        let l = a.label.trim().to_lowercase();
                        if dim == "information_points" {
                            match l.parse::<u32>() {
                                Ok(n) if n >= 3 => "3 or more".to_string(),
                                Ok(n) => n.to_string(),
                                Err(_) => l,
                            }
                        } else {
                            l
                        }
                    })
                    .collect();
                let annotators: BTreeSet<_> =
                    r.annotations.iter().filter(|a| a.dimension.as_str() == dim).map(|a| &a.annotator_id).collect();
                ensure(annotators.len() >= self.file.manifest.qc.min_annotators, "annotator count")?;
                ensure(labels.iter().all(|l| *l == labels[0]), "unanimity")?;
                let want = if dim == "information_points" { labels[0].clone() } else if labels[0] == "yes" { "Yes".into() } else { "No".into() };
                ensure(correct == want, "consensus label")
            }
            "recommendation" => {
                let user = &src[0];
                let its: Vec<&InteractionRecord> = self.b.interactions.iter().filter(|i| &i.user_id == user).collect();
                let last = its.iter().filter(|i| i.action == Action::Order).max_by_key(|i| i.timestamp).unwrap();
                ensure(last.key() == ps("target"), "held-out target is the last order")?;
                let target = self.m(&last.merchant_id);
                let visited = self.visited(user);
                ensure(
                    self.by_option(correct).iter().any(|m| m.merchant_id == target.merchant_id)
                        && others.iter().all(|o| self.by_option(o).iter().all(|m| !visited.contains(m.merchant_id.as_str()))),
                    "recommendation target",
                )
            }
            "search" => {
                let it = self.b.interactions.iter().find(|i| i.key() == src[1]).unwrap();
                let visited = self.visited(&it.user_id);
                ensure(
                    it.query.is_some()
                        && self.by_option(correct).iter().any(|m| m.merchant_id == it.merchant_id)
                        && others.iter().all(|o| self.by_option(o).iter().all(|m| !visited.contains(m.merchant_id.as_str()))),
                    "clicked merchant",
                )
            }
            "content_marketing" => {
                let it = self.b.interactions.iter().find(|i| i.key() == src[1]).unwrap();
                let r = self.b.reviews.iter().find(|r| Some(&r.review_id) == it.review_id.as_ref()).unwrap();
                let foreign = |t: &str| self.b.reviews.iter().any(|x| x.text.trim() == t && x.user_id != it.user_id);
                ensure(correct == r.text.trim() && others.iter().all(|o| foreign(o) && *o != correct), "clicked review")
            }
            other => Err(format!("no oracle for task {other}")),
        }
    }

    /// Check every question; returns the failures.
    pub fn check_all(&self) -> Vec<String> {
        self.file.questions.iter().filter_map(|q| self.check(q).err()).collect()
    }
}
