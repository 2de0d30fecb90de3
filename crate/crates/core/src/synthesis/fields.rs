use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::platform::{format_minutes, InteractionRecord, MerchantRecord, StoreBundle, UserRecord};

/// Entity kinds that feed the synthesis agents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    Merchant,
    User,
    Interaction,
}

impl SourceKind {
    pub const ALL: [SourceKind; 3] = [SourceKind::Merchant, SourceKind::User, SourceKind::Interaction];

    pub fn as_str(self) -> &'static str {
        match self {
            SourceKind::Merchant => "merchant",
            SourceKind::User => "user",
            SourceKind::Interaction => "interaction",
        }
    }

    /// Field names a template may refer to.
    pub fn fields(self) -> &'static [&'static str] {
        match self {
            SourceKind::Merchant => &[
                "name",
                "introduction",
                "category",
                "category_path",
                "brand",
                "address",
                "city",
                "district",
                "business_district",
                "hours",
                "attributes",
                "products",
                "function_tags",
            ],
            SourceKind::User => &["profile", "city"],
            SourceKind::Interaction => &[
                "profile", "merchant", "category", "address", "time", "weekday", "weather", "action", "query",
            ],
        }
    }
}

impl fmt::Display for SourceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Every field name any kind knows about.
pub fn all_field_names() -> Vec<&'static str> {
    let mut all: Vec<&'static str> = SourceKind::ALL.iter().flat_map(|k| k.fields().iter().copied()).collect();
    all.sort_unstable();
    all.dedup();
    all
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FieldCombination {
    pub kind: SourceKind,
    pub fields: Vec<String>,
}

impl FieldCombination {
    pub fn new(kind: SourceKind, fields: &[&str]) -> Result<Self, String> {
        let c = Self { kind, fields: fields.iter().map(|f| f.to_string()).collect() };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.fields.is_empty() {
            return Err(format!("{} combination has no fields", self.kind));
        }
        for f in &self.fields {
            if !self.kind.fields().contains(&f.as_str()) {
                return Err(format!("`{f}` is not a {} field", self.kind));
            }
        }
        let mut sorted = self.fields.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != self.fields.len() {
            return Err(format!("{} combination repeats a field", self.kind));
        }
        Ok(())
    }

    pub fn id(&self) -> String {
        format!("{}:{}", self.kind, self.fields.join("+"))
    }

    pub fn contains(&self, field: &str) -> bool {
        self.fields.iter().any(|f| f == field)
    }
}

/// Combinations used when none are configured.
pub fn default_combinations() -> Vec<FieldCombination> {
    let m = SourceKind::Merchant;
    let i = SourceKind::Interaction;
    [
        (m, &["name", "introduction", "category"][..]),
        (m, &["name", "category_path"]),
        (m, &["name", "address", "district"]),
        (m, &["name", "hours"]),
        (m, &["name", "brand", "category"]),
        (m, &["name", "attributes"]),
        (m, &["name", "products", "category"]),
        (m, &["name", "business_district", "city"]),
        (m, &["name", "introduction", "function_tags"]),
        (SourceKind::User, &["profile", "city"]),
        (i, &["profile", "merchant", "time", "action"]),
        (i, &["merchant", "category", "weather", "time"]),
        (i, &["profile", "query", "merchant"]),
    ]
    .into_iter()
    .map(|(k, f)| FieldCombination::new(k, f).expect("default combinations are valid"))
    .collect()
}

/// One source record flattened to template fields. Missing values are empty
/// strings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldRecord {
    pub kind: SourceKind,
    pub source_ids: Vec<String>,
    pub values: BTreeMap<String, String>,
}

impl FieldRecord {
    pub fn get(&self, field: &str) -> &str {
        self.values.get(field).map(String::as_str).unwrap_or("")
    }

    /// Compact `key: value` rendering of non-empty fields.
    pub fn raw_text(&self) -> String {
        self.values
            .iter()
            .filter(|(_, v)| !v.is_empty())
            .map(|(k, v)| format!("{k}: {v}"))
            .collect::<Vec<_>>()
            .join("; ")
    }
}

pub fn merchant_fields(m: &MerchantRecord) -> FieldRecord {
    let mut v = BTreeMap::new();
    v.insert("name".to_string(), m.name.clone());
    v.insert("introduction".to_string(), m.introduction.clone());
    v.insert("category".to_string(), m.leaf_category().to_string());
    v.insert("category_path".to_string(), m.category_path_text());
    v.insert("brand".to_string(), m.brand.clone().unwrap_or_default());
    v.insert("address".to_string(), m.location.address.clone());
    v.insert("city".to_string(), m.city.clone());
    v.insert("district".to_string(), m.district.clone().unwrap_or_default());
    v.insert("business_district".to_string(), m.business_district.clone().unwrap_or_default());
    v.insert(
        "hours".to_string(),
        if m.operating_hours.is_empty() { String::new() } else { m.hours_text() },
    );
    v.insert("attributes".to_string(), m.attribute_texts().join(", "));
    v.insert(
        "products".to_string(),
        m.products
            .iter()
            .map(|p| match p.price {
                Some(price) => format!("{} ({price} yuan)", p.name),
                None => p.name.clone(),
            })
            .collect::<Vec<_>>()
            .join(", "),
    );
    v.insert("function_tags".to_string(), m.function_tags.join(", "));
    FieldRecord { kind: SourceKind::Merchant, source_ids: vec![m.merchant_id.clone()], values: v }
}

pub fn user_fields(u: &UserRecord) -> FieldRecord {
    let mut v = BTreeMap::new();
    v.insert("profile".to_string(), u.profile_text());
    v.insert("city".to_string(), u.city.clone());
    FieldRecord { kind: SourceKind::User, source_ids: vec![u.user_id.clone()], values: v }
}

const WEEKDAYS: [&str; 7] = ["Monday", "Tuesday", "Wednesday", "Thursday", "Friday", "Saturday", "Sunday"];

/// Local `YYYY-MM-DD HH:MM` of an interaction.
pub fn interaction_time_text(bundle: &StoreBundle, it: &InteractionRecord) -> String {
    let t = it.local_time(bundle.utc_offset_minutes);
    format!(
        "{} {}",
        bundle.local_date(it),
        format_minutes((t.hour() as u16) * 60 + t.minute() as u16)
    )
}

/// Interaction joined with its user, merchant and calendar day. `None` when
/// a referenced record is missing.
pub fn interaction_fields(bundle: &StoreBundle, it: &InteractionRecord) -> Option<FieldRecord> {
    let user = bundle.users.get(&it.user_id)?;
    let merchant = bundle.merchants.get(&it.merchant_id)?;
    let date = bundle.local_date(it);
    let weather = bundle
        .calendar_for(&merchant.city)
        .get(&date)
        .map(|d| d.weather.as_str().to_string())
        .unwrap_or_default();
    let weekday = it.local_time(bundle.utc_offset_minutes).weekday().number_days_from_monday() as usize;
    let mut v = BTreeMap::new();
    v.insert("profile".to_string(), user.profile_text());
    v.insert("merchant".to_string(), merchant.name.clone());
    v.insert("category".to_string(), merchant.leaf_category().to_string());
    v.insert("address".to_string(), merchant.location.address.clone());
    v.insert("time".to_string(), interaction_time_text(bundle, it));
    v.insert("weekday".to_string(), WEEKDAYS[weekday].to_string());
    v.insert("weather".to_string(), weather);
    v.insert("action".to_string(), it.action.as_str().to_string());
    v.insert("query".to_string(), it.query.clone().unwrap_or_default());
    Some(FieldRecord {
        kind: SourceKind::Interaction,
        source_ids: vec![it.key(), it.user_id.clone(), it.merchant_id.clone()],
        values: v,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn combinations_validate_field_names() {
        assert!(FieldCombination::new(SourceKind::Merchant, &["name", "price"]).is_err());
        assert!(FieldCombination::new(SourceKind::Merchant, &[]).is_err());
        assert!(FieldCombination::new(SourceKind::User, &["profile", "profile"]).is_err());
        let c = FieldCombination::new(SourceKind::Merchant, &["name", "introduction", "category"]).unwrap();
        assert_eq!(c.id(), "merchant:name+introduction+category");
        for c in default_combinations() {
            c.validate().unwrap();
        }
    }
}
