//! Domain knowledge relations that raw platform records do not carry.
//!
//! A handful of benchmark tasks ask about relations between attribute values,
//! categories and brands (synonymy, containment, complementarity, brand
//! tiers). Those relations are supplied as a JSONL lexicon, one relation per
//! line, tagged by `relation`.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "relation", rename_all = "snake_case")]
pub enum LexiconEntry {
    /// Two attribute values with the same meaning.
    Synonym { a: String, b: String },
    /// `broad` semantically contains `narrow`.
    Contains { broad: String, narrow: String },
    /// Two attribute values that cannot describe the same merchant.
    Incompatible { a: String, b: String },
    /// `complement` is consumed together with `category`.
    Complement { category: String, complement: String },
    /// Brand positioning tier, higher is more premium.
    BrandTier { brand: String, tier: u8 },
    SimilarBrand { a: String, b: String },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Lexicon {
    pub entries: Vec<LexiconEntry>,
}

impl Lexicon {
    pub fn new(entries: Vec<LexiconEntry>) -> Self {
        Self { entries }
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Synonym classes (connected components of the synonym relation),
    /// each sorted, classes sorted by first member.
    pub fn synonym_classes(&self) -> Vec<BTreeSet<String>> {
        let mut classes: Vec<BTreeSet<String>> = Vec::new();
        for e in &self.entries {
            if let LexiconEntry::Synonym { a, b } = e {
                let hits: Vec<usize> = classes
                    .iter()
                    .enumerate()
                    .filter(|(_, c)| c.contains(a) || c.contains(b))
                    .map(|(i, _)| i)
                    .collect();
                let mut merged: BTreeSet<String> = [a.clone(), b.clone()].into();
                for i in hits.iter().rev() {
                    merged.extend(classes.remove(*i));
                }
                classes.push(merged);
            }
        }
        classes.sort();
        classes
    }

    pub fn are_synonyms(&self, a: &str, b: &str) -> bool {
        a != b
            && self
                .synonym_classes()
                .iter()
                .any(|c| c.contains(a) && c.contains(b))
    }

    /// Transitive closure of `contains`, as `(broad, narrow)` pairs.
    pub fn containment_closure(&self) -> BTreeSet<(String, String)> {
        let mut closure: BTreeSet<(String, String)> = self
            .entries
            .iter()
            .filter_map(|e| match e {
                LexiconEntry::Contains { broad, narrow } => Some((broad.clone(), narrow.clone())),
                _ => None,
            })
            .collect();
        loop {
            let mut added = Vec::new();
            for (a, b) in &closure {
                for (c, d) in &closure {
                    if b == c && a != d && !closure.contains(&(a.clone(), d.clone())) {
                        added.push((a.clone(), d.clone()));
                    }
                }
            }
            if added.is_empty() {
                break;
            }
            closure.extend(added);
        }
        closure
    }

    pub fn incompatible_pairs(&self) -> BTreeSet<(String, String)> {
        self.entries
            .iter()
            .filter_map(|e| match e {
                LexiconEntry::Incompatible { a, b } => Some(ordered_pair(a, b)),
                _ => None,
            })
            .collect()
    }

    pub fn complements(&self) -> BTreeMap<String, BTreeSet<String>> {
        let mut out: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for e in &self.entries {
            if let LexiconEntry::Complement { category, complement } = e {
                out.entry(category.clone()).or_default().insert(complement.clone());
            }
        }
        out
    }

    pub fn brand_tiers(&self) -> BTreeMap<String, u8> {
        self.entries
            .iter()
            .filter_map(|e| match e {
                LexiconEntry::BrandTier { brand, tier } => Some((brand.clone(), *tier)),
                _ => None,
            })
            .collect()
    }

    /// Symmetric similar-brand relation.
    pub fn similar_brands(&self) -> BTreeMap<String, BTreeSet<String>> {
        let mut out: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for e in &self.entries {
            if let LexiconEntry::SimilarBrand { a, b } = e {
                out.entry(a.clone()).or_default().insert(b.clone());
                out.entry(b.clone()).or_default().insert(a.clone());
            }
        }
        out
    }

    /// Every text mentioned by the lexicon, for denylist screening.
    pub fn texts(&self) -> Vec<&str> {
        let mut out = Vec::new();
        for e in &self.entries {
            match e {
                LexiconEntry::Synonym { a, b }
                | LexiconEntry::Incompatible { a, b }
                | LexiconEntry::SimilarBrand { a, b } => {
                    out.push(a.as_str());
                    out.push(b.as_str());
                }
                LexiconEntry::Contains { broad, narrow } => {
                    out.push(broad.as_str());
                    out.push(narrow.as_str());
                }
                LexiconEntry::Complement { category, complement } => {
                    out.push(category.as_str());
                    out.push(complement.as_str());
                }
                LexiconEntry::BrandTier { brand, .. } => out.push(brand.as_str()),
            }
        }
        out
    }
}

pub fn ordered_pair(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn syn(a: &str, b: &str) -> LexiconEntry {
        LexiconEntry::Synonym { a: a.into(), b: b.into() }
    }

    #[test]
    fn synonym_classes_merge_transitively() {
        let lex = Lexicon::new(vec![syn("a", "b"), syn("c", "d"), syn("b", "c")]);
        let classes = lex.synonym_classes();
        assert_eq!(classes.len(), 1);
        assert!(lex.are_synonyms("a", "d"));
        assert!(!lex.are_synonyms("a", "a"));
    }

    #[test]
    fn containment_is_transitive() {
        let lex = Lexicon::new(vec![
            LexiconEntry::Contains { broad: "food".into(), narrow: "hotpot".into() },
            LexiconEntry::Contains { broad: "hotpot".into(), narrow: "beef hotpot".into() },
        ]);
        assert!(lex
            .containment_closure()
            .contains(&("food".to_string(), "beef hotpot".to_string())));
    }
}
