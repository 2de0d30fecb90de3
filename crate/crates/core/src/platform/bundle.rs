use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::ingest::*;
use super::lexicon::{Lexicon, LexiconEntry};
use super::records::*;
use crate::digest::sha256_hex;
use crate::rng::SplitMix64;

/// Default local-time offset applied to interaction timestamps (UTC+8).
pub const DEFAULT_UTC_OFFSET_MINUTES: i32 = 480;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceFile {
    pub kind: EntityKind,
    pub path: String,
    pub sha256: String,
    pub records: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceManifest {
    pub files: Vec<SourceFile>,
    /// Unix seconds. Not part of [`StoreBundle::content_hash`].
    pub ingested_at: u64,
}

#[derive(Debug, Clone, Default)]
pub struct BundleOptions {
    pub ingest: IngestOptions,
    pub utc_offset_minutes: Option<i32>,
}

/// All platform stores plus the optional lexicon, with referential
/// integrity enforced.
#[derive(Debug, Clone, PartialEq)]
pub struct StoreBundle {
    pub merchants: Store<MerchantRecord>,
    pub users: Store<UserRecord>,
    pub interactions: Store<InteractionRecord>,
    pub reviews: Store<ReviewRecord>,
    pub calendar: Store<CalendarDay>,
    pub lexicon: Lexicon,
    pub utc_offset_minutes: i32,
    pub manifest: SourceManifest,
}

#[derive(Debug, Error)]
#[error("requested {requested} records but the store holds only {available}")]
pub struct SampleError {
    pub requested: usize,
    pub available: usize,
}

/// `n` distinct records chosen by a SplitMix64-driven Fisher–Yates prefix.
pub fn sample_entities<T>(records: &[T], n: usize, seed: u64) -> Result<Vec<&T>, SampleError> {
    if n > records.len() {
        return Err(SampleError { requested: n, available: records.len() });
    }
    let mut rng = SplitMix64::new(seed);
    Ok(rng
        .sample_indices(records.len(), n)
        .into_iter()
        .map(|i| &records[i])
        .collect())
}

impl StoreBundle {
    /// Assemble a bundle from in-memory stores, dropping records that break
    /// referential integrity. Dropped records are returned as issues keyed
    /// by their position in the source store (1-based).
    pub fn assemble(
        merchants: Store<MerchantRecord>,
        users: Store<UserRecord>,
        interactions: Store<InteractionRecord>,
        reviews: Store<ReviewRecord>,
        calendar: Store<CalendarDay>,
        lexicon: Lexicon,
        utc_offset_minutes: i32,
    ) -> (Self, Vec<(EntityKind, LineIssue)>) {
        let mut issues = Vec::new();
        let mut kept_reviews = Vec::new();
        for (i, r) in reviews.iter().enumerate() {
            let missing = if !users.contains(&r.user_id) {
                Some(format!("user_id `{}` not in user store", r.user_id))
            } else if !merchants.contains(&r.merchant_id) {
                Some(format!("merchant_id `{}` not in merchant store", r.merchant_id))
            } else {
                None
            };
            match missing {
                Some(detail) => issues.push((
                    EntityKind::Reviews,
                    LineIssue { line: i + 1, kind: IssueKind::Reference, detail },
                )),
                None => kept_reviews.push(r.clone()),
            }
        }
        let reviews = Store::from_records(kept_reviews);
        let mut kept = Vec::new();
        for (i, it) in interactions.iter().enumerate() {
            let missing = if !users.contains(&it.user_id) {
                Some(format!("user_id `{}` not in user store", it.user_id))
            } else if !merchants.contains(&it.merchant_id) {
                Some(format!("merchant_id `{}` not in merchant store", it.merchant_id))
            } else if let Some(rid) = it.review_id.as_deref().filter(|r| !reviews.contains(r)) {
                Some(format!("review_id `{rid}` not in review store"))
            } else {
                None
            };
            match missing {
                Some(detail) => issues.push((
                    EntityKind::Interactions,
                    LineIssue { line: i + 1, kind: IssueKind::Reference, detail },
                )),
                None => kept.push(it.clone()),
            }
        }
        let interactions = Store::from_records(kept);
        let mut bundle = StoreBundle {
            merchants,
            users,
            interactions,
            reviews,
            calendar,
            lexicon,
            utc_offset_minutes,
            manifest: SourceManifest { files: Vec::new(), ingested_at: 0 },
        };
        bundle.manifest.files = bundle.synthetic_manifest_files();
        (bundle, issues)
    }

    fn synthetic_manifest_files(&self) -> Vec<SourceFile> {
        self.canonical_files()
            .into_iter()
            .map(|(kind, text, records)| SourceFile {
                kind,
                path: kind.file_name(),
                sha256: sha256_hex(text.as_bytes()),
                records,
            })
            .collect()
    }

    fn canonical_files(&self) -> Vec<(EntityKind, String, usize)> {
        let lexicon = Store::from_records(self.lexicon.entries.clone());
        vec![
            (EntityKind::Merchants, self.merchants.to_jsonl(), self.merchants.len()),
            (EntityKind::Users, self.users.to_jsonl(), self.users.len()),
            (EntityKind::Interactions, self.interactions.to_jsonl(), self.interactions.len()),
            (EntityKind::Reviews, self.reviews.to_jsonl(), self.reviews.len()),
            (EntityKind::Calendar, self.calendar.to_jsonl(), self.calendar.len()),
            (EntityKind::Lexicon, lexicon.to_jsonl(), lexicon.len()),
        ]
    }

    /// Load `<dir>/{merchants,users,interactions,reviews,calendar}.jsonl`
    /// and the optional `<dir>/lexicon.jsonl`.
    pub fn load_dir(
        dir: &Path,
        denylist: &Denylist,
        opts: &BundleOptions,
    ) -> Result<(Self, Vec<IngestReport>), IngestError> {
        let io = &opts.ingest;
        let (merchants, r1) = ingest::<MerchantRecord>(&dir.join(EntityKind::Merchants.file_name()), denylist, io)?;
        let (users, r2) = ingest::<UserRecord>(&dir.join(EntityKind::Users.file_name()), denylist, io)?;
        let (interactions, r3) =
            ingest::<InteractionRecord>(&dir.join(EntityKind::Interactions.file_name()), denylist, io)?;
        let (reviews, r4) = ingest::<ReviewRecord>(&dir.join(EntityKind::Reviews.file_name()), denylist, io)?;
        let (calendar, r5) = ingest::<CalendarDay>(&dir.join(EntityKind::Calendar.file_name()), denylist, io)?;
        let mut reports = vec![r1, r2, r3, r4, r5];
        let lexicon_path = dir.join(EntityKind::Lexicon.file_name());
        let lexicon = if lexicon_path.exists() {
            let (store, report) = ingest::<LexiconEntry>(&lexicon_path, denylist, io)?;
            reports.push(report);
            Lexicon::new(store.records().to_vec())
        } else {
            Lexicon::default()
        };
        // Lexicon terms are not record text, but screen them all the same.
        let lexicon = Lexicon::new(
            lexicon
                .entries
                .into_iter()
                .filter(|e| Lexicon::new(vec![e.clone()]).texts().iter().all(|t| denylist.find(t).is_none()))
                .collect(),
        );
        let (mut bundle, issues) = Self::assemble(
            merchants,
            users,
            interactions,
            reviews,
            calendar,
            lexicon,
            opts.utc_offset_minutes.unwrap_or(DEFAULT_UTC_OFFSET_MINUTES),
        );
        for (kind, issue) in issues {
            if let Some(report) = reports.iter_mut().find(|r| r.kind == kind) {
                report.accepted -= 1;
                report.invalid += 1;
                report.issues.push(issue);
            }
        }
        let mut files = Vec::new();
        for (kind, _, records) in bundle.canonical_files() {
            let path = dir.join(kind.file_name());
            if kind == EntityKind::Lexicon && !path.exists() {
                continue;
            }
            let bytes = fs::read(&path).map_err(|source| IngestError::Io { path: path.clone(), source })?;
            files.push(SourceFile {
                kind,
                path: path.display().to_string(),
                sha256: sha256_hex(&bytes),
                records,
            });
        }
        bundle.manifest = SourceManifest {
            files,
            ingested_at: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        };
        Ok((bundle, reports))
    }

    /// Write every store as canonical JSONL into `dir`.
    pub fn export_dir(&self, dir: &Path) -> Result<(), IngestError> {
        fs::create_dir_all(dir).map_err(|source| IngestError::Write { path: dir.to_path_buf(), source })?;
        for (kind, text, _) in self.canonical_files() {
            if kind == EntityKind::Lexicon && self.lexicon.is_empty() {
                continue;
            }
            let path = dir.join(kind.file_name());
            fs::write(&path, text).map_err(|source| IngestError::Write { path, source })?;
        }
        Ok(())
    }

    /// SHA-256 over the canonical encoding of every store. Independent of
    /// file paths and ingest time.
    pub fn content_hash(&self) -> String {
        let mut all = String::new();
        for (kind, text, _) in self.canonical_files() {
            all.push_str(kind.as_str());
            all.push('\n');
            all.push_str(&text);
        }
        all.push_str(&format!("utc_offset_minutes={}", self.utc_offset_minutes));
        sha256_hex(all.as_bytes())
    }

    /// Restrict to one city. Users, interactions and reviews follow the
    /// merchants they reference; the calendar is filtered by its city tag.
    pub fn filter_city(&self, city: &str) -> StoreBundle {
        let merchants = self.merchants.filter(|m| m.city.eq_ignore_ascii_case(city));
        let interactions = self.interactions.filter(|i| merchants.contains(&i.merchant_id));
        let reviews = self.reviews.filter(|r| merchants.contains(&r.merchant_id));
        let active: BTreeSet<&str> = interactions
            .iter()
            .map(|i| i.user_id.as_str())
            .chain(reviews.iter().map(|r| r.user_id.as_str()))
            .collect();
        let users = self
            .users
            .filter(|u| u.city.eq_ignore_ascii_case(city) || active.contains(u.user_id.as_str()));
        let calendar = self.calendar.filter(|d| d.city.eq_ignore_ascii_case(city));
        let (mut bundle, _) = Self::assemble(
            merchants,
            users,
            interactions,
            reviews,
            calendar,
            self.lexicon.clone(),
            self.utc_offset_minutes,
        );
        bundle.manifest.ingested_at = self.manifest.ingested_at;
        bundle
    }

    /// Calendar entries of one city, keyed by date.
    pub fn calendar_for(&self, city: &str) -> BTreeMap<String, &CalendarDay> {
        self.calendar
            .iter()
            .filter(|d| d.city.eq_ignore_ascii_case(city))
            .map(|d| (d.date.clone(), d))
            .collect()
    }

    /// Local calendar date of an interaction, `YYYY-MM-DD`.
    pub fn local_date(&self, interaction: &InteractionRecord) -> String {
        format_date(interaction.local_time(self.utc_offset_minutes).date())
    }

    pub fn interactions_of_user(&self, user_id: &str) -> Vec<&InteractionRecord> {
        let mut out: Vec<_> = self.interactions.iter().filter(|i| i.user_id == user_id).collect();
        out.sort_by_key(|i| i.timestamp);
        out
    }

    pub fn reviews_of_merchant(&self, merchant_id: &str) -> Vec<&ReviewRecord> {
        self.reviews.iter().filter(|r| r.merchant_id == merchant_id).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sampling_whole_store_returns_everything() {
        let items: Vec<u32> = (0..5).collect();
        let mut picked: Vec<u32> = sample_entities(&items, 5, 7).unwrap().into_iter().copied().collect();
        picked.sort_unstable();
        assert_eq!(picked, items);
    }

    #[test]
    fn sampling_is_deterministic() {
        let items: Vec<u32> = (0..100).collect();
        let a = sample_entities(&items, 10, 1).unwrap();
        let b = sample_entities(&items, 10, 1).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn oversampling_names_both_numbers() {
        let items = [1, 2, 3];
        let err = sample_entities(&items, 4, 0).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains('4') && msg.contains('3'));
    }
}
