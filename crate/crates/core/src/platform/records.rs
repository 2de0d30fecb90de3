use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use time::{Date, Month, OffsetDateTime, UtcOffset};

/// Fields not interpreted by the toolkit, preserved verbatim on export.
pub type ExtraFields = BTreeMap<String, Value>;

pub const MINUTES_PER_DAY: u16 = 1440;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub latitude: f64,
    pub longitude: f64,
}

impl GeoPoint {
    pub fn new(latitude: f64, longitude: f64) -> Self {
        Self { latitude, longitude }
    }

    pub fn is_valid(&self) -> bool {
        self.latitude.is_finite()
            && self.longitude.is_finite()
            && (-90.0..=90.0).contains(&self.latitude)
            && (-180.0..=180.0).contains(&self.longitude)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Location {
    pub latitude: f64,
    pub longitude: f64,
    #[serde(default)]
    pub address: String,
}

impl Location {
    pub fn point(&self) -> GeoPoint {
        GeoPoint::new(self.latitude, self.longitude)
    }
}

/// One opening interval on one weekday (0 = Monday). Minutes of day,
/// `open < close`, `close` may be 1440 for midnight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct OpeningInterval {
    pub weekday: u8,
    pub open: u16,
    pub close: u16,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Product {
    pub name: String,
    /// Whole currency units.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub price: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MerchantRecord {
    pub merchant_id: String,
    pub name: String,
    #[serde(default)]
    pub introduction: String,
    pub category_path: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub brand: Option<String>,
    pub location: Location,
    #[serde(default)]
    pub operating_hours: Vec<OpeningInterval>,
    pub city: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub district: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub business_district: Option<String>,
    /// Attribute dimension → value, e.g. `"parking" → "free parking"`.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub attributes: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub products: Vec<Product>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub function_tags: Vec<String>,
    #[serde(flatten)]
    pub extra: ExtraFields,
}

impl MerchantRecord {
    pub fn leaf_category(&self) -> &str {
        self.category_path.last().map(String::as_str).unwrap_or("")
    }

    pub fn top_category(&self) -> &str {
        self.category_path.first().map(String::as_str).unwrap_or("")
    }

    pub fn category_path_text(&self) -> String {
        self.category_path.join(" > ")
    }

    pub fn attribute_texts(&self) -> Vec<String> {
        self.attributes
            .iter()
            .map(|(k, v)| format!("{k}: {v}"))
            .collect()
    }

    pub fn hours_text(&self) -> String {
        render_hours(&self.operating_hours)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserRecord {
    pub user_id: String,
    pub profile: BTreeMap<String, String>,
    pub city: String,
    #[serde(flatten)]
    pub extra: ExtraFields,
}

impl UserRecord {
    /// `key: value` pairs joined with `, ` in key order.
    pub fn profile_text(&self) -> String {
        self.profile
            .iter()
            .map(|(k, v)| format!("{k}: {v}"))
            .collect::<Vec<_>>()
            .join(", ")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Browse,
    Click,
    Order,
    Search,
}

impl Action {
    pub fn as_str(self) -> &'static str {
        match self {
            Action::Browse => "browse",
            Action::Click => "click",
            Action::Order => "order",
            Action::Search => "search",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionRecord {
    pub user_id: String,
    pub merchant_id: String,
    /// Epoch seconds.
    pub timestamp: i64,
    pub location: GeoPoint,
    pub action: Action,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub query: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub review_id: Option<String>,
    #[serde(flatten)]
    pub extra: ExtraFields,
}

impl InteractionRecord {
    pub fn key(&self) -> String {
        format!(
            "{}|{}|{}|{}",
            self.user_id,
            self.merchant_id,
            self.timestamp,
            self.action.as_str()
        )
    }

    pub fn local_time(&self, utc_offset_minutes: i32) -> OffsetDateTime {
        local_time(self.timestamp, utc_offset_minutes)
    }
}

pub fn local_time(timestamp: i64, utc_offset_minutes: i32) -> OffsetDateTime {
    let offset = UtcOffset::from_whole_seconds(utc_offset_minutes * 60).unwrap_or(UtcOffset::UTC);
    OffsetDateTime::from_unix_timestamp(timestamp)
        .unwrap_or(OffsetDateTime::UNIX_EPOCH)
        .to_offset(offset)
}

/// Review quality dimensions carried by annotations.
///
/// The eight values line up one-to-one with the review tasks of the
/// benchmark; [`ReviewDimension::scorecard_field`] folds them onto the
/// seven fields of a review score card.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReviewDimension {
    InformationPoints,
    GuidanceValue,
    Colloquialism,
    RealExamples,
    LanguageAppeal,
    NonMarketing,
    HumanWritten,
    OverallUsefulness,
}

impl ReviewDimension {
    pub const ALL: [ReviewDimension; 8] = [
        ReviewDimension::InformationPoints,
        ReviewDimension::GuidanceValue,
        ReviewDimension::Colloquialism,
        ReviewDimension::RealExamples,
        ReviewDimension::LanguageAppeal,
        ReviewDimension::NonMarketing,
        ReviewDimension::HumanWritten,
        ReviewDimension::OverallUsefulness,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ReviewDimension::InformationPoints => "information_points",
            ReviewDimension::GuidanceValue => "guidance_value",
            ReviewDimension::Colloquialism => "colloquialism",
            ReviewDimension::RealExamples => "real_examples",
            ReviewDimension::LanguageAppeal => "language_appeal",
            ReviewDimension::NonMarketing => "non_marketing",
            ReviewDimension::HumanWritten => "human_written",
            ReviewDimension::OverallUsefulness => "overall_usefulness",
        }
    }

    /// Score-card field this annotation dimension informs.
    pub fn scorecard_field(self) -> &'static str {
        match self {
            ReviewDimension::InformationPoints => "in_depth_content",
            ReviewDimension::GuidanceValue => "actionable_suggestions",
            ReviewDimension::Colloquialism => "natural_expression",
            ReviewDimension::RealExamples | ReviewDimension::LanguageAppeal => {
                "credible_engaging_language"
            }
            ReviewDimension::NonMarketing => "non_promotional",
            ReviewDimension::HumanWritten => "non_ai_generated",
            ReviewDimension::OverallUsefulness => "overall_usefulness",
        }
    }
}

impl fmt::Display for ReviewDimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub annotator_id: String,
    pub dimension: ReviewDimension,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewRecord {
    pub review_id: String,
    pub user_id: String,
    pub merchant_id: String,
    pub text: String,
    #[serde(default)]
    pub annotations: Vec<AnnotationRecord>,
    #[serde(flatten)]
    pub extra: ExtraFields,
}

impl ReviewRecord {
    pub fn annotations_for(&self, dimension: ReviewDimension) -> Vec<&AnnotationRecord> {
        self.annotations
            .iter()
            .filter(|a| a.dimension == dimension)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weather {
    Sunny,
    Rainy,
    Other,
}

impl Weather {
    pub fn as_str(self) -> &'static str {
        match self {
            Weather::Sunny => "sunny",
            Weather::Rainy => "rainy",
            Weather::Other => "other",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Season {
    Spring,
    Summer,
    Autumn,
    Winter,
}

impl Season {
    pub const ALL: [Season; 4] = [Season::Spring, Season::Summer, Season::Autumn, Season::Winter];

    pub fn as_str(self) -> &'static str {
        match self {
            Season::Spring => "spring",
            Season::Summer => "summer",
            Season::Autumn => "autumn",
            Season::Winter => "winter",
        }
    }

    /// Meteorological season of a calendar month.
    pub fn of_month(month: Month, hemisphere: Hemisphere) -> Season {
        let northern = match month {
            Month::March | Month::April | Month::May => Season::Spring,
            Month::June | Month::July | Month::August => Season::Summer,
            Month::September | Month::October | Month::November => Season::Autumn,
            Month::December | Month::January | Month::February => Season::Winter,
        };
        match hemisphere {
            Hemisphere::Northern => northern,
            Hemisphere::Southern => match northern {
                Season::Spring => Season::Autumn,
                Season::Summer => Season::Winter,
                Season::Autumn => Season::Spring,
                Season::Winter => Season::Summer,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hemisphere {
    #[default]
    Northern,
    Southern,
}

/// One day of context for one city. Dates are `YYYY-MM-DD`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalendarDay {
    pub city: String,
    pub date: String,
    pub weather: Weather,
    pub is_holiday: bool,
    pub season: Season,
    #[serde(flatten)]
    pub extra: ExtraFields,
}

impl CalendarDay {
    pub fn key(&self) -> String {
        format!("{}|{}", self.city, self.date)
    }

    pub fn parsed_date(&self) -> Option<Date> {
        parse_date(&self.date)
    }
}

pub fn parse_date(text: &str) -> Option<Date> {
    Date::parse(text, time::macros::format_description!("[year]-[month]-[day]")).ok()
}

pub fn format_date(date: Date) -> String {
    date.format(time::macros::format_description!("[year]-[month]-[day]"))
        .expect("date formatting")
}

pub fn format_minutes(minutes: u16) -> String {
    format!("{:02}:{:02}", minutes / 60, minutes % 60)
}

const WEEKDAY_NAMES: [&str; 7] = ["Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun"];

/// Compact weekly schedule, e.g. `Mon-Fri 10:00-22:00; Sat-Sun 09:00-23:00`.
///
/// Consecutive weekdays sharing the same intervals are grouped; a week with
/// a single pattern renders as `Daily …`.
pub fn render_hours(intervals: &[OpeningInterval]) -> String {
    if intervals.is_empty() {
        return "hours not listed".to_string();
    }
    let mut by_day: Vec<Vec<(u16, u16)>> = vec![Vec::new(); 7];
    for iv in intervals {
        if (iv.weekday as usize) < 7 {
            by_day[iv.weekday as usize].push((iv.open, iv.close));
        }
    }
    for day in &mut by_day {
        day.sort_unstable();
    }
    let day_text = |day: &Vec<(u16, u16)>| -> String {
        if day.is_empty() {
            "closed".to_string()
        } else {
            day.iter()
                .map(|(o, c)| format!("{}-{}", format_minutes(*o), format_minutes(*c)))
                .collect::<Vec<_>>()
                .join(", ")
        }
    };
    if by_day.iter().all(|d| *d == by_day[0]) {
        return format!("Daily {}", day_text(&by_day[0]));
    }
    let mut parts = Vec::new();
    let mut start = 0;
    while start < 7 {
        let mut end = start;
        while end + 1 < 7 && by_day[end + 1] == by_day[start] {
            end += 1;
        }
        let days = if start == end {
            WEEKDAY_NAMES[start].to_string()
        } else {
            format!("{}-{}", WEEKDAY_NAMES[start], WEEKDAY_NAMES[end])
        };
        parts.push(format!("{days} {}", day_text(&by_day[start])));
        start = end + 1;
    }
    parts.join("; ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hours_render_daily_and_grouped() {
        let daily: Vec<_> = (0..7)
            .map(|d| OpeningInterval { weekday: d, open: 600, close: 1320 })
            .collect();
        assert_eq!(render_hours(&daily), "Daily 10:00-22:00");

        let mut split = daily.clone();
        split[5].close = 1440;
        split[6].close = 1440;
        assert_eq!(
            render_hours(&split),
            "Mon-Fri 10:00-22:00; Sat-Sun 10:00-24:00"
        );
    }

    #[test]
    fn seasons_follow_hemisphere() {
        assert_eq!(Season::of_month(Month::July, Hemisphere::Northern), Season::Summer);
        assert_eq!(Season::of_month(Month::July, Hemisphere::Southern), Season::Winter);
        assert_eq!(Season::of_month(Month::December, Hemisphere::Northern), Season::Winter);
    }
}
