//! Aggregate behaviour of users whose profiles resemble a given user's.
//!
//! Models get these numbers in the first workflow step because they have no
//! retrieval access to the platform logs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::platform::StoreBundle;

/// Default number of profile attributes two users must share.
pub const DEFAULT_MIN_SHARED: usize = 2;
const TOP: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimilarProfileStats {
    pub user_id: String,
    pub min_shared: usize,
    pub similar_users: usize,
    pub interactions: usize,
    /// Leaf categories of the merchants they interacted with, most frequent first.
    pub top_categories: Vec<(String, usize)>,
    pub top_merchants: Vec<(String, usize)>,
    pub actions: BTreeMap<String, usize>,
}

fn shared(a: &BTreeMap<String, String>, b: &BTreeMap<String, String>) -> usize {
    a.iter().filter(|(k, v)| b.get(*k).is_some_and(|w| w.eq_ignore_ascii_case(v))).count()
}

fn top(counts: BTreeMap<String, usize>) -> Vec<(String, usize)> {
    let mut v: Vec<(String, usize)> = counts.into_iter().collect();
    v.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    v.truncate(TOP);
    v
}

/// Statistics over the other users of the same city sharing at least
/// `min_shared` profile attribute values with `user_id`. `None` when the user
/// is unknown.
pub fn similar_profile_stats(bundle: &StoreBundle, user_id: &str, min_shared: usize) -> Option<SimilarProfileStats> {
    let me = bundle.users.get(user_id)?;
    let peers: Vec<&str> = bundle
        .users
        .iter()
        .filter(|u| u.user_id != me.user_id && u.city == me.city && shared(&me.profile, &u.profile) >= min_shared.max(1))
        .map(|u| u.user_id.as_str())
        .collect();
    let mut categories = BTreeMap::new();
    let mut merchants = BTreeMap::new();
    let mut actions = BTreeMap::new();
    let mut interactions = 0;
    for peer in &peers {
        for it in bundle.interactions_of_user(peer) {
            interactions += 1;
            *actions.entry(it.action.as_str().to_string()).or_insert(0) += 1;
            if let Some(m) = bundle.merchants.get(&it.merchant_id) {
                *categories.entry(m.leaf_category().to_string()).or_insert(0) += 1;
                *merchants.entry(m.name.clone()).or_insert(0) += 1;
            }
        }
    }
    Some(SimilarProfileStats {
        user_id: me.user_id.clone(),
        min_shared,
        similar_users: peers.len(),
        interactions,
        top_categories: top(categories),
        top_merchants: top(merchants),
        actions,
    })
}

impl SimilarProfileStats {
    /// Plain-text block embedded in step prompts.
    pub fn render(&self) -> String {
        if self.similar_users == 0 {
            return format!("No other users share at least {} profile attributes with this user.", self.min_shared);
        }
        let list = |v: &[(String, usize)]| v.iter().map(|(k, n)| format!("{k} ({n})")).collect::<Vec<_>>().join(", ");
        let actions = self.actions.iter().map(|(k, n)| format!("{k} {n}")).collect::<Vec<_>>().join(", ");
        format!(
            "{} users share at least {} profile attributes with this user; they have {} interactions ({actions}).\nMost frequent categories: {}\nMost frequent merchants: {}",
            self.similar_users,
            self.min_shared,
            self.interactions,
            list(&self.top_categories),
            list(&self.top_merchants)
        )
    }
}
