use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::platform::AnnotationRecord;
use crate::rng::{derive_seed, fnv1a64, SplitMix64};

/// Quality-control thresholds applied while building questions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QCConfig {
    /// Minimum number of days observed under each condition (e.g. rainy).
    pub min_days: usize,
    /// Largest allowed spread of holiday share between condition groups.
    pub balance_tolerance: f64,
    pub min_annotators: usize,
    pub bootstrap_resamples: usize,
    pub ci_level: f64,
    /// Minimum orders before a merchant's peak period is trusted.
    pub min_peak_orders: usize,
    /// Minimum orders behind a target-group answer.
    pub min_support: usize,
}

impl Default for QCConfig {
    fn default() -> Self {
        Self {
            min_days: 10,
            balance_tolerance: 0.2,
            min_annotators: 2,
            bootstrap_resamples: 1000,
            ci_level: 0.95,
            min_peak_orders: 20,
            min_support: 5,
        }
    }
}

/// Lowest values accepted in strict mode.
pub const STRICT_MIN_DAYS: usize = 10;
pub const STRICT_MIN_ANNOTATORS: usize = 2;

impl QCConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.min_days == 0 {
            return Err("qc.min_days must be >= 1".into());
        }
        if self.min_annotators == 0 {
            return Err("qc.min_annotators must be >= 1".into());
        }
        if !(0.0..=1.0).contains(&self.balance_tolerance) {
            return Err("qc.balance_tolerance must lie in [0, 1]".into());
        }
        if self.bootstrap_resamples < 10 {
            return Err("qc.bootstrap_resamples must be >= 10".into());
        }
        if !(self.ci_level > 0.0 && self.ci_level < 1.0) {
            return Err("qc.ci_level must lie in (0, 1)".into());
        }
        Ok(())
    }

    /// Violations of the floor values: at least 10 days per condition and
    /// at least 2 annotators.
    pub fn strict_violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.min_days < STRICT_MIN_DAYS {
            out.push(format!("qc.min_days = {} is below the floor of {STRICT_MIN_DAYS}", self.min_days));
        }
        if self.min_annotators < STRICT_MIN_ANNOTATORS {
            out.push(format!(
                "qc.min_annotators = {} is below the floor of {STRICT_MIN_ANNOTATORS}",
                self.min_annotators
            ));
        }
        out
    }
}

/// One observed day: the measured value and whether it was a holiday.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DaySample {
    pub date: String,
    pub value: f64,
    pub is_holiday: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionGroup {
    pub condition: String,
    pub samples: Vec<DaySample>,
}

impl ConditionGroup {
    pub fn values(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.value).collect()
    }

    pub fn holiday_share(&self) -> f64 {
        if self.samples.is_empty() {
            0.0
        } else {
            self.samples.iter().filter(|s| s.is_holiday).count() as f64 / self.samples.len() as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QCVerdict {
    pub passed: bool,
    /// Human-readable failing clauses, e.g. `rainy: 9 < 10`.
    pub failing: Vec<String>,
    pub days: BTreeMap<String, usize>,
    pub holiday_share: BTreeMap<String, f64>,
}

/// Every group needs `min_days` samples, and holiday shares may differ
/// between groups by at most `balance_tolerance`.
pub fn check_stat_sufficiency(groups: &[ConditionGroup], qc: &QCConfig) -> QCVerdict {
    let mut failing = Vec::new();
    let mut days = BTreeMap::new();
    let mut shares = BTreeMap::new();
    for g in groups {
        days.insert(g.condition.clone(), g.samples.len());
        shares.insert(g.condition.clone(), g.holiday_share());
        if g.samples.len() < qc.min_days {
            failing.push(format!("{}: {} < {}", g.condition, g.samples.len(), qc.min_days));
        }
    }
    if groups.len() >= 2 {
        let (lo, hi) = groups.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), g| {
            let s = g.holiday_share();
            (lo.min(s), hi.max(s))
        });
        if hi - lo > qc.balance_tolerance + 1e-12 {
            let detail = groups
                .iter()
                .map(|g| format!("{} {:.2}", g.condition, g.holiday_share()))
                .collect::<Vec<_>>()
                .join(", ");
            failing.push(format!(
                "holiday balance: share spread {:.2} > {:.2} ({detail})",
                hi - lo,
                qc.balance_tolerance
            ));
        }
    }
    QCVerdict { passed: failing.is_empty(), failing, days, holiday_share: shares }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrendDirection {
    AHigher,
    BHigher,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendVerdict {
    pub direction: TrendDirection,
    /// `mean(A) - mean(B)`.
    pub effect: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub resamples: usize,
    pub ci_level: f64,
}

fn group_seed(seed: u64, values: &[f64]) -> u64 {
    let mut bytes = Vec::with_capacity(values.len() * 8);
    for v in values {
        bytes.extend_from_slice(&v.to_bits().to_le_bytes());
    }
    derive_seed(seed ^ fnv1a64(&bytes), "bootstrap")
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Seeded percentile-bootstrap confidence interval on `mean(A) - mean(B)`.
///
/// Protocol: each group is resampled by its own generator, seeded with
/// `derive_seed(seed ^ fnv1a64(le_bytes(values)), "bootstrap")`; every
/// resample draws `len` indices with `below(len)` and averages them in draw
/// order. With `R` resamples sorted ascending and `k = floor(R * (1 - level)
/// / 2)`, the interval is `[d[k], d[R - 1 - k]]`. The seeding makes the
/// result exactly antisymmetric under swapping the groups. A direction is
/// reported only when the interval excludes zero.
pub fn detect_stable_trend(a: &[f64], b: &[f64], qc: &QCConfig, seed: u64) -> TrendVerdict {
    let effect = if a.is_empty() || b.is_empty() { 0.0 } else { mean(a) - mean(b) };
    let r = qc.bootstrap_resamples.max(1);
    if a.is_empty() || b.is_empty() {
        return TrendVerdict {
            direction: TrendDirection::None,
            effect,
            ci_low: 0.0,
            ci_high: 0.0,
            resamples: r,
            ci_level: qc.ci_level,
        };
    }
    let mut ra = SplitMix64::new(group_seed(seed, a));
    let mut rb = SplitMix64::new(group_seed(seed, b));
    let mut diffs = Vec::with_capacity(r);
    for _ in 0..r {
        let ma = resample_mean(a, &mut ra);
        let mb = resample_mean(b, &mut rb);
        diffs.push(ma - mb);
    }
    diffs.sort_by(|x, y| x.total_cmp(y));
    let k = ((r as f64) * (1.0 - qc.ci_level) / 2.0).floor() as usize;
    let k = k.min(r - 1 - k.min(r - 1));
    let (lo, hi) = (diffs[k], diffs[r - 1 - k]);
    let direction = if lo > 0.0 {
        TrendDirection::AHigher
    } else if hi < 0.0 {
        TrendDirection::BHigher
    } else {
        TrendDirection::None
    };
    TrendVerdict { direction, effect, ci_low: lo, ci_high: hi, resamples: r, ci_level: qc.ci_level }
}

fn resample_mean(xs: &[f64], rng: &mut SplitMix64) -> f64 {
    let mut sum = 0.0;
    for _ in 0..xs.len() {
        sum += xs[rng.below_usize(xs.len())];
    }
    sum / xs.len() as f64
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "verdict")]
pub enum AnnotationVerdict {
    Accepted { label: String, annotators: usize },
    Rejected { reason: String },
}

/// Consensus gate: accepted only when at least `min_annotators` distinct
/// annotators labelled the dimension and all gave the same label.
pub fn gate_annotations(annotations: &[&AnnotationRecord], qc: &QCConfig) -> AnnotationVerdict {
    let mut by_annotator: BTreeMap<&str, &str> = BTreeMap::new();
    for a in annotations {
        if let Some(prev) = by_annotator.insert(a.annotator_id.as_str(), a.label.as_str()) {
            if prev != a.label {
                return AnnotationVerdict::Rejected {
                    reason: format!("annotator {} gave conflicting labels", a.annotator_id),
                };
            }
        }
    }
    if by_annotator.len() < qc.min_annotators {
        return AnnotationVerdict::Rejected { reason: "insufficient annotators".into() };
    }
    let mut labels: Vec<&str> = by_annotator.values().copied().collect();
    labels.sort_unstable();
    labels.dedup();
    if labels.len() == 1 {
        AnnotationVerdict::Accepted { label: labels[0].to_string(), annotators: by_annotator.len() }
    } else {
        AnnotationVerdict::Rejected { reason: format!("no consensus: {}", labels.join(" vs ")) }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::platform::ReviewDimension;

    fn group(name: &str, n: usize, holidays: usize) -> ConditionGroup {
        ConditionGroup {
            condition: name.into(),
            samples: (0..n)
                .map(|i| DaySample { date: format!("d{i}"), value: 1.0, is_holiday: i < holidays })
                .collect(),
        }
    }

    #[test]
    fn sufficiency_clauses() {
        let qc = QCConfig::default();
        assert!(check_stat_sufficiency(&[group("rainy", 10, 3), group("sunny", 10, 3)], &qc).passed);
        let v = check_stat_sufficiency(&[group("rainy", 9, 3), group("sunny", 15, 4)], &qc);
        assert!(!v.passed);
        assert_eq!(v.failing[0], "rainy: 9 < 10");
        let v = check_stat_sufficiency(&[group("rainy", 10, 9), group("sunny", 10, 1)], &qc);
        assert!(!v.passed);
        assert!(v.failing[0].starts_with("holiday balance"));
    }

    #[test]
    fn trend_cases() {
        let qc = QCConfig::default();
        let a: Vec<f64> = (0..15).map(|i| (i % 4) as f64).collect();
        let v = detect_stable_trend(&a, &a, &qc, 1);
        assert_eq!(v.direction, TrendDirection::None);
        let v = detect_stable_trend(&[20.0; 10], &[10.0; 10], &qc, 1);
        assert_eq!(v.direction, TrendDirection::AHigher);
        assert!(v.ci_low > 0.0);
        let c = [3.0; 12];
        assert_eq!(detect_stable_trend(&c, &c, &qc, 9).direction, TrendDirection::None);
    }

    #[test]
    fn trend_is_antisymmetric() {
        let qc = QCConfig::default();
        let a = [1.0, 3.0, 2.0, 5.0, 4.0, 2.0, 6.0, 1.0, 3.0, 2.0];
        let b = [0.0, 1.0, 2.0, 1.0, 0.0, 3.0, 1.0, 2.0, 0.0, 1.0, 1.0];
        let ab = detect_stable_trend(&a, &b, &qc, 5);
        let ba = detect_stable_trend(&b, &a, &qc, 5);
        assert_eq!(ab.ci_low, -ba.ci_high);
        assert_eq!(ab.ci_high, -ba.ci_low);
        assert_eq!(ab.effect, -ba.effect);
        assert_eq!(ab.direction, TrendDirection::AHigher);
        assert_eq!(ba.direction, TrendDirection::BHigher);
    }

    #[test]
    fn annotation_gate() {
        let qc = QCConfig::default();
        let mk = |who: &str, label: &str| AnnotationRecord {
            annotator_id: who.into(),
            dimension: ReviewDimension::GuidanceValue,
            label: label.into(),
        };
        let (a, b, c) = (mk("a1", "yes"), mk("a2", "yes"), mk("a2", "no"));
        assert_eq!(
            gate_annotations(&[&a, &b], &qc),
            AnnotationVerdict::Accepted { label: "yes".into(), annotators: 2 }
        );
        assert!(matches!(gate_annotations(&[&a, &c], &qc), AnnotationVerdict::Rejected { .. }));
        assert_eq!(
            gate_annotations(&[&a], &qc),
            AnnotationVerdict::Rejected { reason: "insufficient annotators".into() }
        );
    }
}
