use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::geo::DistanceBuckets;
use super::qc::{ConditionGroup, DaySample, QCConfig};
use crate::platform::{Action, CalendarDay, InteractionRecord, MerchantRecord, ReviewRecord, StoreBundle, UserRecord};

/// Knobs for a benchmark build.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BuildOptions {
    pub qc: QCConfig,
    pub distance_buckets: DistanceBuckets,
    /// User-profile key whose values name consumer groups.
    pub group_attribute: String,
    pub questions_per_task: usize,
    /// Restrict the build to these task ids; empty means all 41.
    pub tasks: Vec<String>,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self {
            qc: QCConfig::default(),
            distance_buckets: DistanceBuckets::default(),
            group_attribute: "segment".to_string(),
            questions_per_task: 13,
            tasks: Vec::new(),
        }
    }
}

/// Indexes over a (city-filtered) bundle shared by all generators.
pub struct BuildContext<'a> {
    pub bundle: &'a StoreBundle,
    pub options: &'a BuildOptions,
    pub merchants: Vec<&'a MerchantRecord>,
    name_counts: BTreeMap<&'a str, usize>,
    pub leaves: BTreeSet<&'a str>,
    pub path_texts: BTreeSet<String>,
    /// Attribute dimension → every value seen on some merchant.
    pub attribute_values: BTreeMap<&'a str, BTreeSet<&'a str>>,
    pub function_tags: BTreeSet<&'a str>,
    pub hours_texts: BTreeSet<String>,
    /// Orders per merchant per local date.
    pub daily_orders: HashMap<&'a str, BTreeMap<String, u32>>,
    pub orders_by_merchant: HashMap<&'a str, Vec<&'a InteractionRecord>>,
    /// Interactions per user, oldest first.
    pub user_interactions: BTreeMap<&'a str, Vec<&'a InteractionRecord>>,
    pub visited: HashMap<&'a str, BTreeSet<&'a str>>,
    pub interaction_by_key: HashMap<String, &'a InteractionRecord>,
    calendars: BTreeMap<String, Vec<&'a CalendarDay>>,
}

impl<'a> BuildContext<'a> {
    pub fn new(bundle: &'a StoreBundle, options: &'a BuildOptions) -> Self {
        let mut merchants: Vec<&MerchantRecord> = bundle.merchants.iter().collect();
        merchants.sort_by(|a, b| a.merchant_id.cmp(&b.merchant_id));
        let mut name_counts = BTreeMap::new();
        let mut leaves = BTreeSet::new();
        let mut path_texts = BTreeSet::new();
        let mut attribute_values: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        let mut function_tags = BTreeSet::new();
        let mut hours_texts = BTreeSet::new();
        for m in &merchants {
            *name_counts.entry(m.name.as_str()).or_insert(0) += 1;
            if !m.leaf_category().is_empty() {
                leaves.insert(m.leaf_category());
                path_texts.insert(m.category_path_text());
            }
            for (k, v) in &m.attributes {
                attribute_values.entry(k.as_str()).or_default().insert(v.as_str());
            }
            function_tags.extend(m.function_tags.iter().map(String::as_str));
            if !m.operating_hours.is_empty() {
                hours_texts.insert(m.hours_text());
            }
        }
        let mut daily_orders: HashMap<&str, BTreeMap<String, u32>> = HashMap::new();
        let mut orders_by_merchant: HashMap<&str, Vec<&InteractionRecord>> = HashMap::new();
        let mut user_interactions: BTreeMap<&str, Vec<&InteractionRecord>> = BTreeMap::new();
        let mut visited: HashMap<&str, BTreeSet<&str>> = HashMap::new();
        let mut interaction_by_key = HashMap::new();
        for it in bundle.interactions.iter() {
            if it.action == Action::Order {
                *daily_orders
                    .entry(it.merchant_id.as_str())
                    .or_default()
                    .entry(bundle.local_date(it))
                    .or_insert(0) += 1;
                orders_by_merchant.entry(it.merchant_id.as_str()).or_default().push(it);
            }
            user_interactions.entry(it.user_id.as_str()).or_default().push(it);
            visited.entry(it.user_id.as_str()).or_default().insert(it.merchant_id.as_str());
            interaction_by_key.insert(it.key(), it);
        }
        for list in user_interactions.values_mut() {
            list.sort_by(|a, b| a.timestamp.cmp(&b.timestamp).then_with(|| a.key().cmp(&b.key())));
        }
        let mut calendars: BTreeMap<String, Vec<&CalendarDay>> = BTreeMap::new();
        for d in bundle.calendar.iter() {
            calendars.entry(d.city.to_lowercase()).or_default().push(d);
        }
        for days in calendars.values_mut() {
            days.sort_by(|a, b| a.date.cmp(&b.date));
        }
        Self {
            bundle,
            options,
            merchants,
            name_counts,
            leaves,
            path_texts,
            attribute_values,
            function_tags,
            hours_texts,
            daily_orders,
            orders_by_merchant,
            user_interactions,
            visited,
            interaction_by_key,
            calendars,
        }
    }

    pub fn qc(&self) -> &QCConfig {
        &self.options.qc
    }

    pub fn merchant(&self, id: &str) -> Option<&'a MerchantRecord> {
        self.bundle.merchants.get(id)
    }

    pub fn user(&self, id: &str) -> Option<&'a UserRecord> {
        self.bundle.users.get(id)
    }

    pub fn review(&self, id: &str) -> Option<&'a ReviewRecord> {
        self.bundle.reviews.get(id)
    }

    /// Names held by exactly one merchant can stand in for the merchant.
    pub fn has_unique_name(&self, m: &MerchantRecord) -> bool {
        !m.name.trim().is_empty() && self.name_counts.get(m.name.as_str()) == Some(&1)
    }

    pub fn named_merchants(&self) -> impl Iterator<Item = &'a MerchantRecord> + '_ {
        self.merchants.iter().copied().filter(|m| self.has_unique_name(m))
    }

    pub fn city_merchants(&self, city: &str) -> Vec<&'a MerchantRecord> {
        self.named_merchants().filter(|m| m.city.eq_ignore_ascii_case(city)).collect()
    }

    pub fn calendar(&self, city: &str) -> &[&'a CalendarDay] {
        self.calendars.get(&city.to_lowercase()).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn has_visited(&self, user: &str, merchant: &str) -> bool {
        self.visited.get(user).is_some_and(|s| s.contains(merchant))
    }

    /// Daily order counts of a merchant for every calendar day of its city
    /// that satisfies `keep`; days without orders count as zero.
    pub fn order_group(
        &self,
        merchant: &MerchantRecord,
        condition: &str,
        keep: impl Fn(&CalendarDay) -> bool,
    ) -> ConditionGroup {
        let counts = self.daily_orders.get(merchant.merchant_id.as_str());
        let samples = self
            .calendar(&merchant.city)
            .iter()
            .filter(|d| keep(d))
            .map(|d| DaySample {
                date: d.date.clone(),
                value: counts.and_then(|c| c.get(&d.date)).copied().unwrap_or(0) as f64,
                is_holiday: d.is_holiday,
            })
            .collect();
        ConditionGroup { condition: condition.to_string(), samples }
    }
}
