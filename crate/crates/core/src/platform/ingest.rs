use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::lexicon::LexiconEntry;
use super::records::*;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {rejected} of {total} lines rejected, the file probably does not hold {kind} records")]
    TooManyRejected {
        path: PathBuf,
        kind: EntityKind,
        rejected: usize,
        total: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityKind {
    Merchants,
    Users,
    Interactions,
    Reviews,
    Calendar,
    Lexicon,
}

impl EntityKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EntityKind::Merchants => "merchants",
            EntityKind::Users => "users",
            EntityKind::Interactions => "interactions",
            EntityKind::Reviews => "reviews",
            EntityKind::Calendar => "calendar",
            EntityKind::Lexicon => "lexicon",
        }
    }

    pub fn file_name(self) -> String {
        format!("{}.jsonl", self.as_str())
    }
}

impl fmt::Display for EntityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for EntityKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "merchants" => EntityKind::Merchants,
            "users" => EntityKind::Users,
            "interactions" => EntityKind::Interactions,
            "reviews" => EntityKind::Reviews,
            "calendar" => EntityKind::Calendar,
            "lexicon" => EntityKind::Lexicon,
            other => return Err(format!("unknown record kind `{other}`")),
        })
    }
}

#[derive(Debug, Clone, Default)]
pub struct IngestOptions {
    pub hemisphere: Hemisphere,
}

/// Case-insensitive substring screen over record text fields.
#[derive(Debug, Clone, Default)]
pub struct Denylist {
    terms: Vec<String>,
}

impl Denylist {
    pub fn new<I, S>(terms: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let terms = terms
            .into_iter()
            .map(|t| t.as_ref().trim().to_lowercase())
            .filter(|t| !t.is_empty())
            .collect();
        Self { terms }
    }

    /// One term per line, UTF-8. Blank lines are ignored.
    pub fn load(path: &Path) -> Result<Self, IngestError> {
        let text = fs::read_to_string(path).map_err(|source| IngestError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(Self::new(text.lines()))
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// First denylisted term found in `text`, if any.
    pub fn find(&self, text: &str) -> Option<&str> {
        let lower = text.to_lowercase();
        self.terms
            .iter()
            .find(|t| lower.contains(t.as_str()))
            .map(String::as_str)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IssueKind {
    Malformed,
    Invariant,
    Scrubbed,
    Duplicate,
    Reference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineIssue {
    /// 1-based line number in the source file.
    pub line: usize,
    pub kind: IssueKind,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub kind: EntityKind,
    pub path: String,
    pub lines: usize,
    pub accepted: usize,
    pub repaired: usize,
    pub scrubbed: usize,
    pub malformed: usize,
    pub invalid: usize,
    pub duplicates: usize,
    pub issues: Vec<LineIssue>,
}

impl IngestReport {
    fn new(kind: EntityKind, path: &Path) -> Self {
        Self {
            kind,
            path: path.display().to_string(),
            lines: 0,
            accepted: 0,
            repaired: 0,
            scrubbed: 0,
            malformed: 0,
            invalid: 0,
            duplicates: 0,
            issues: Vec::new(),
        }
    }

    pub fn rejected(&self) -> usize {
        self.scrubbed + self.malformed + self.invalid + self.duplicates
    }

    fn reject(&mut self, line: usize, kind: IssueKind, detail: impl Into<String>) {
        match kind {
            IssueKind::Malformed => self.malformed += 1,
            IssueKind::Invariant | IssueKind::Reference => self.invalid += 1,
            IssueKind::Scrubbed => self.scrubbed += 1,
            IssueKind::Duplicate => self.duplicates += 1,
        }
        self.issues.push(LineIssue { line, kind, detail: detail.into() });
    }
}

/// Outcome of normalising one parsed record.
pub enum Checked {
    Valid,
    Repaired(String),
}

/// A record kind that can be ingested from JSONL.
pub trait Entity: Serialize + DeserializeOwned + Clone {
    const KIND: EntityKind;
    /// Whether two records with the same key are a data error.
    const UNIQUE: bool = true;

    fn key(&self) -> String;

    /// Apply deterministic repairs, then check the type invariants.
    /// `Err` carries a `field: reason` description.
    fn check(&mut self, opts: &IngestOptions) -> Result<Checked, String>;

    /// Free-text fields subject to denylist screening.
    fn texts(&self) -> Vec<&str>;
}

/// Immutable, order-preserving collection of one record kind.
#[derive(Debug, Clone, PartialEq)]
pub struct Store<T> {
    records: Vec<T>,
    index: BTreeMap<String, usize>,
}

impl<T> Default for Store<T> {
    fn default() -> Self {
        Self { records: Vec::new(), index: BTreeMap::new() }
    }
}

impl<T: Entity> Store<T> {
    /// Build a store from already-validated records. Later duplicates of a
    /// unique key are dropped.
    pub fn from_records(records: Vec<T>) -> Self {
        let mut store = Store::default();
        for r in records {
            store.push(r);
        }
        store
    }

    fn push(&mut self, record: T) -> bool {
        let key = record.key();
        if T::UNIQUE && self.index.contains_key(&key) {
            return false;
        }
        self.index.entry(key).or_insert(self.records.len());
        self.records.push(record);
        true
    }

    pub fn get(&self, key: &str) -> Option<&T> {
        self.index.get(key).map(|i| &self.records[*i])
    }

    pub fn contains(&self, key: &str) -> bool {
        self.index.contains_key(key)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, T> {
        self.records.iter()
    }

    pub fn records(&self) -> &[T] {
        &self.records
    }

    pub fn filter(&self, keep: impl Fn(&T) -> bool) -> Self {
        Self::from_records(self.records.iter().filter(|r| keep(r)).cloned().collect())
    }

    /// Canonical JSONL encoding (one record per line, struct field order).
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn export(&self, path: &Path) -> Result<(), IngestError> {
        let mut f = fs::File::create(path).map_err(|source| IngestError::Write {
            path: path.to_path_buf(),
            source,
        })?;
        f.write_all(self.to_jsonl().as_bytes())
            .map_err(|source| IngestError::Write { path: path.to_path_buf(), source })
    }
}

impl<'a, T> IntoIterator for &'a Store<T> {
    type Item = &'a T;
    type IntoIter = std::slice::Iter<'a, T>;
    fn into_iter(self) -> Self::IntoIter {
        self.records.iter()
    }
}

/// Read a JSONL file of `T` records.
///
/// Malformed lines, invariant violations, duplicates and denylist hits are
/// skipped and reported with their line number. More than half of the
/// non-blank lines rejected is fatal.
pub fn ingest<T: Entity>(
    path: &Path,
    denylist: &Denylist,
    opts: &IngestOptions,
) -> Result<(Store<T>, IngestReport), IngestError> {
    let text = fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let (store, report) = ingest_str::<T>(&text, path, denylist, opts);
    if report.lines > 0 && report.rejected() * 2 > report.lines {
        return Err(IngestError::TooManyRejected {
            path: path.to_path_buf(),
            kind: T::KIND,
            rejected: report.rejected(),
            total: report.lines,
        });
    }
    Ok((store, report))
}

pub fn ingest_str<T: Entity>(
    text: &str,
    path: &Path,
    denylist: &Denylist,
    opts: &IngestOptions,
) -> (Store<T>, IngestReport) {
    let mut report = IngestReport::new(T::KIND, path);
    let mut store = Store::default();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        report.lines += 1;
        let mut record: T = match serde_json::from_str(line) {
            Ok(r) => r,
            Err(e) => {
                report.reject(line_no, IssueKind::Malformed, e.to_string());
                continue;
            }
        };
        let repaired = match record.check(opts) {
            Ok(Checked::Valid) => None,
            Ok(Checked::Repaired(what)) => Some(what),
            Err(why) => {
                report.reject(line_no, IssueKind::Invariant, why);
                continue;
            }
        };
        if let Some(term) = record.texts().into_iter().find_map(|t| denylist.find(t)) {
            report.reject(line_no, IssueKind::Scrubbed, format!("scrubbed: contains denylisted term `{term}`"));
            continue;
        }
        let key = record.key();
        if !store.push(record) {
            report.reject(line_no, IssueKind::Duplicate, format!("duplicate key `{key}`"));
            continue;
        }
        if let Some(what) = repaired {
            report.repaired += 1;
            log::debug!("{}:{line_no}: repaired {what}", path.display());
        }
        report.accepted += 1;
    }
    (store, report)
}

fn require_non_empty(field: &str, value: &str) -> Result<(), String> {
    if value.trim().is_empty() {
        Err(format!("{field}: must be non-empty"))
    } else {
        Ok(())
    }
}

fn check_point(field: &str, lat: f64, lon: f64) -> Result<(), String> {
    if !lat.is_finite() || !(-90.0..=90.0).contains(&lat) {
        return Err(format!("{field}.latitude: {lat} outside [-90, 90]"));
    }
    if !lon.is_finite() || !(-180.0..=180.0).contains(&lon) {
        return Err(format!("{field}.longitude: {lon} outside [-180, 180]"));
    }
    Ok(())
}

/// Split intervals that wrap past midnight into two intervals, one ending at
/// 24:00 and one starting at 00:00 on the following weekday.
fn split_overnight(intervals: &mut Vec<OpeningInterval>) -> bool {
    let mut changed = false;
    let mut out = Vec::with_capacity(intervals.len());
    for iv in intervals.iter() {
        if iv.close < iv.open && iv.open < MINUTES_PER_DAY && iv.weekday < 7 {
            changed = true;
            out.push(OpeningInterval { weekday: iv.weekday, open: iv.open, close: MINUTES_PER_DAY });
            if iv.close > 0 {
                out.push(OpeningInterval { weekday: (iv.weekday + 1) % 7, open: 0, close: iv.close });
            }
        } else {
            out.push(*iv);
        }
    }
    if changed {
        out.sort();
        *intervals = out;
    }
    changed
}

impl Entity for MerchantRecord {
    const KIND: EntityKind = EntityKind::Merchants;

    fn key(&self) -> String {
        self.merchant_id.clone()
    }

    fn check(&mut self, _opts: &IngestOptions) -> Result<Checked, String> {
        let mut repairs = Vec::new();
        let before = self.category_path.len();
        self.category_path.retain(|c| !c.trim().is_empty());
        if self.category_path.len() != before {
            repairs.push("empty category_path segments");
        }
        if split_overnight(&mut self.operating_hours) {
            repairs.push("overnight operating_hours");
        }
        require_non_empty("merchant_id", &self.merchant_id)?;
        require_non_empty("name", &self.name)?;
        require_non_empty("city", &self.city)?;
        if self.category_path.is_empty() {
            return Err("category_path: must be non-empty".into());
        }
        check_point("location", self.location.latitude, self.location.longitude)?;
        for iv in &self.operating_hours {
            if iv.weekday > 6 {
                return Err(format!("operating_hours.weekday: {} outside 0-6", iv.weekday));
            }
            if iv.open >= iv.close || iv.close > MINUTES_PER_DAY {
                return Err(format!(
                    "operating_hours: interval {}-{} on weekday {} must satisfy open < close <= 1440",
                    iv.open, iv.close, iv.weekday
                ));
            }
        }
        Ok(if repairs.is_empty() {
            Checked::Valid
        } else {
            Checked::Repaired(repairs.join(", "))
        })
    }

    fn texts(&self) -> Vec<&str> {
        let mut out = vec![self.name.as_str(), self.introduction.as_str(), self.location.address.as_str()];
        out.extend(self.category_path.iter().map(String::as_str));
        out.extend(self.brand.as_deref());
        out.extend(self.attributes.values().map(String::as_str));
        out.extend(self.products.iter().map(|p| p.name.as_str()));
        out.extend(self.function_tags.iter().map(String::as_str));
        out
    }
}

impl Entity for UserRecord {
    const KIND: EntityKind = EntityKind::Users;

    fn key(&self) -> String {
        self.user_id.clone()
    }

    fn check(&mut self, _opts: &IngestOptions) -> Result<Checked, String> {
        require_non_empty("user_id", &self.user_id)?;
        require_non_empty("city", &self.city)?;
        if self.profile.keys().any(|k| k.trim().is_empty()) {
            return Err("profile: attribute names must be non-empty".into());
        }
        Ok(Checked::Valid)
    }

    fn texts(&self) -> Vec<&str> {
        self.profile.values().map(String::as_str).collect()
    }
}

impl Entity for InteractionRecord {
    const KIND: EntityKind = EntityKind::Interactions;
    const UNIQUE: bool = false;

    fn key(&self) -> String {
        InteractionRecord::key(self)
    }

    fn check(&mut self, _opts: &IngestOptions) -> Result<Checked, String> {
        require_non_empty("user_id", &self.user_id)?;
        require_non_empty("merchant_id", &self.merchant_id)?;
        check_point("location", self.location.latitude, self.location.longitude)?;
        if self.action == Action::Search && self.query.as_deref().is_none_or(|q| q.trim().is_empty()) {
            return Err("query: search actions must carry a query".into());
        }
        Ok(Checked::Valid)
    }

    fn texts(&self) -> Vec<&str> {
        self.query.as_deref().into_iter().collect()
    }
}

impl Entity for ReviewRecord {
    const KIND: EntityKind = EntityKind::Reviews;

    fn key(&self) -> String {
        self.review_id.clone()
    }

    fn check(&mut self, _opts: &IngestOptions) -> Result<Checked, String> {
        require_non_empty("review_id", &self.review_id)?;
        require_non_empty("text", &self.text)?;
        let mut seen = std::collections::BTreeSet::new();
        for a in &self.annotations {
            require_non_empty("annotations.annotator_id", &a.annotator_id)?;
            if !seen.insert((a.annotator_id.as_str(), a.dimension)) {
                return Err(format!(
                    "annotations: annotator `{}` labelled `{}` twice",
                    a.annotator_id, a.dimension
                ));
            }
        }
        Ok(Checked::Valid)
    }

    fn texts(&self) -> Vec<&str> {
        vec![self.text.as_str()]
    }
}

impl Entity for CalendarDay {
    const KIND: EntityKind = EntityKind::Calendar;

    fn key(&self) -> String {
        CalendarDay::key(self)
    }

    fn check(&mut self, opts: &IngestOptions) -> Result<Checked, String> {
        require_non_empty("city", &self.city)?;
        let date = self
            .parsed_date()
            .ok_or_else(|| format!("date: `{}` is not YYYY-MM-DD", self.date))?;
        let expected = Season::of_month(date.month(), opts.hemisphere);
        if expected != self.season {
            return Err(format!(
                "season: `{}` inconsistent with {} (expected `{}`)",
                self.season.as_str(),
                self.date,
                expected.as_str()
            ));
        }
        Ok(Checked::Valid)
    }

    fn texts(&self) -> Vec<&str> {
        Vec::new()
    }
}

impl Entity for LexiconEntry {
    const KIND: EntityKind = EntityKind::Lexicon;

    fn key(&self) -> String {
        serde_json::to_string(self).expect("lexicon entry serializes")
    }

    fn check(&mut self, _opts: &IngestOptions) -> Result<Checked, String> {
        let lex = super::lexicon::Lexicon::new(vec![self.clone()]);
        if lex.texts().iter().any(|t| t.trim().is_empty()) {
            return Err("relation terms must be non-empty".into());
        }
        Ok(Checked::Valid)
    }

    fn texts(&self) -> Vec<&str> {
        Vec::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn merchant_line(id: &str, lat: f64) -> String {
        format!(
            r#"{{"merchant_id":"{id}","name":"Shop {id}","introduction":"A shop","category_path":["Food","Hotpot"],"location":{{"latitude":{lat},"longitude":116.4,"address":"1 Road"}},"city":"beijing"}}"#
        )
    }

    fn ingest_text<T: Entity>(text: &str, deny: &Denylist) -> (Store<T>, IngestReport) {
        ingest_str::<T>(text, Path::new("mem.jsonl"), deny, &IngestOptions::default())
    }

    #[test]
    fn three_valid_merchants() {
        let text = [merchant_line("m1", 39.9), merchant_line("m2", 39.8), merchant_line("m3", 39.7)].join("\n");
        let (store, report) = ingest_text::<MerchantRecord>(&text, &Denylist::default());
        assert_eq!(store.len(), 3);
        assert_eq!(report.accepted, 3);
        assert_eq!(report.rejected(), 0);
    }

    #[test]
    fn latitude_out_of_range_is_reported_with_line_and_field() {
        let text = [merchant_line("m1", 39.9), merchant_line("m2", 99.0)].join("\n");
        let (store, report) = ingest_text::<MerchantRecord>(&text, &Denylist::default());
        assert_eq!(store.len(), 1);
        assert_eq!(report.issues.len(), 1);
        assert_eq!(report.issues[0].line, 2);
        assert_eq!(report.issues[0].kind, IssueKind::Invariant);
        assert!(report.issues[0].detail.contains("location.latitude"));
    }

    #[test]
    fn denylisted_review_is_scrubbed() {
        let text = concat!(
            r#"{"review_id":"r1","user_id":"u1","merchant_id":"m1","text":"Great noodles"}"#,
            "\n",
            r#"{"review_id":"r2","user_id":"u1","merchant_id":"m1","text":"The waiter was a JERK"}"#
        );
        let deny = Denylist::new(["jerk"]);
        let (store, report) = ingest_text::<ReviewRecord>(text, &deny);
        assert_eq!(store.len(), 1);
        assert_eq!(report.scrubbed, 1);
        assert!(report.issues[0].detail.starts_with("scrubbed"));
    }

    #[test]
    fn malformed_lines_are_skipped() {
        let text = [merchant_line("m1", 39.9), "{not json".to_string(), merchant_line("m2", 39.9)].join("\n");
        let (store, report) = ingest_text::<MerchantRecord>(&text, &Denylist::default());
        assert_eq!(store.len(), 2);
        assert_eq!(report.malformed, 1);
        assert_eq!(report.issues[0].line, 2);
    }

    #[test]
    fn mostly_rejected_file_is_fatal() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.jsonl");
        fs::write(&path, "{}\n{}\n".to_string() + &merchant_line("m1", 1.0)).unwrap();
        let err = ingest::<MerchantRecord>(&path, &Denylist::default(), &IngestOptions::default()).unwrap_err();
        assert!(matches!(err, IngestError::TooManyRejected { rejected: 2, total: 3, .. }));
    }

    #[test]
    fn unreadable_file_is_fatal() {
        let err = ingest::<MerchantRecord>(Path::new("/nonexistent/x.jsonl"), &Denylist::default(), &IngestOptions::default())
            .unwrap_err();
        assert!(matches!(err, IngestError::Io { .. }));
    }

    #[test]
    fn overnight_hours_are_split() {
        let line = r#"{"merchant_id":"m1","name":"Bar","category_path":["Nightlife"],"location":{"latitude":1,"longitude":1},"city":"x","operating_hours":[{"weekday":6,"open":1200,"close":120}]}"#;
        let (store, report) = ingest_text::<MerchantRecord>(line, &Denylist::default());
        assert_eq!(report.repaired, 1);
        let hours = &store.records()[0].operating_hours;
        assert_eq!(
            hours,
            &vec![
                OpeningInterval { weekday: 0, open: 0, close: 120 },
                OpeningInterval { weekday: 6, open: 1200, close: 1440 },
            ]
        );
    }

    #[test]
    fn search_without_query_is_rejected() {
        let line = r#"{"user_id":"u","merchant_id":"m","timestamp":0,"location":{"latitude":0,"longitude":0},"action":"search"}"#;
        let (store, report) = ingest_text::<InteractionRecord>(line, &Denylist::default());
        assert!(store.is_empty());
        assert!(report.issues[0].detail.starts_with("query"));
    }

    #[test]
    fn inconsistent_season_is_rejected() {
        let line = r#"{"city":"x","date":"2024-07-01","weather":"sunny","is_holiday":false,"season":"winter"}"#;
        let (store, _) = ingest_text::<CalendarDay>(line, &Denylist::default());
        assert!(store.is_empty());
    }

    #[test]
    fn duplicate_annotation_is_rejected() {
        let line = r#"{"review_id":"r","user_id":"u","merchant_id":"m","text":"ok","annotations":[{"annotator_id":"a","dimension":"guidance_value","label":"yes"},{"annotator_id":"a","dimension":"guidance_value","label":"no"}]}"#;
        let (store, _) = ingest_text::<ReviewRecord>(line, &Denylist::default());
        assert!(store.is_empty());
    }

    #[test]
    fn extra_fields_survive_round_trip() {
        let line = r#"{"user_id":"u1","profile":{"age_band":"25-34"},"city":"x","vip_level":3}"#;
        let (store, _) = ingest_text::<UserRecord>(line, &Denylist::default());
        let again = ingest_text::<UserRecord>(&store.to_jsonl(), &Denylist::default()).0;
        assert_eq!(store, again);
        assert!(store.to_jsonl().contains("\"vip_level\":3"));
    }
}
