//! Accuracy tables and ranking.
//!
//! Task accuracy is the share of correct answers in percent. A category
//! score is the plain mean of its tasks' accuracies and the overall score
//! the plain mean over every task, so categories weigh in proportion to
//! their task counts.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::run::ModelRun;
use super::EvalError;
use crate::benchmark::{task_by_id, BenchmarkFile, Category};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskScore {
    pub correct: usize,
    pub total: usize,
}

impl TaskScore {
    pub fn accuracy(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            100.0 * self.correct as f64 / self.total as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable {
    pub label: String,
    pub endpoint_id: String,
    pub strategy: String,
    pub benchmark_id: String,
    pub tasks: BTreeMap<String, TaskScore>,
    pub categories: BTreeMap<Category, f64>,
    pub overall: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank: Option<usize>,
}

impl ScoreTable {
    /// Build from per-task counts; tasks with no questions are left out.
    pub fn from_tasks(
        label: impl Into<String>,
        endpoint_id: impl Into<String>,
        strategy: impl Into<String>,
        benchmark_id: impl Into<String>,
        tasks: BTreeMap<String, TaskScore>,
    ) -> Result<Self, EvalError> {
        let tasks: BTreeMap<String, TaskScore> = tasks.into_iter().filter(|(_, s)| s.total > 0).collect();
        let mut per_cat: BTreeMap<Category, Vec<f64>> = BTreeMap::new();
        for (id, s) in &tasks {
            let t = task_by_id(id).ok_or_else(|| EvalError::Parse(format!("unknown task `{id}`")))?;
            per_cat.entry(t.category).or_default().push(s.accuracy());
        }
        let categories = per_cat.iter().map(|(c, v)| (*c, mean(v))).collect();
        let all: Vec<f64> = tasks.values().map(TaskScore::accuracy).collect();
        Ok(Self {
            label: label.into(),
            endpoint_id: endpoint_id.into(),
            strategy: strategy.into(),
            benchmark_id: benchmark_id.into(),
            overall: if all.is_empty() { 0.0 } else { mean(&all) },
            tasks,
            categories,
            rank: None,
        })
    }

    pub fn category(&self, c: Category) -> Option<f64> {
        self.categories.get(&c).copied()
    }

    /// Category scores weighted by the number of scored tasks per category.
    pub fn weighted_overall(&self) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for (c, score) in &self.categories {
            let w = self.tasks.keys().filter(|t| task_by_id(t).map(|t| t.category) == Some(*c)).count() as f64;
            num += w * score;
            den += w;
        }
        if den == 0.0 {
            0.0
        } else {
            num / den
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("score table serializes") + "\n"
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Two-decimal display rounding.
pub fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

pub fn score_run(run: &ModelRun, benchmark: &BenchmarkFile) -> Result<ScoreTable, EvalError> {
    let id = benchmark.benchmark_id();
    if run.benchmark_id != id || run.benchmark_version != benchmark.version {
        return Err(EvalError::VersionMismatch {
            run: format!("{} (v{})", run.benchmark_id, run.benchmark_version),
            benchmark: format!("{} (v{})", id, benchmark.version),
        });
    }
    if run.answers.len() != benchmark.questions.len() {
        return Err(EvalError::VersionMismatch {
            run: format!("{} answers", run.answers.len()),
            benchmark: format!("{} questions", benchmark.questions.len()),
        });
    }
    let mut tasks: BTreeMap<String, TaskScore> = BTreeMap::new();
    for (q, a) in benchmark.questions.iter().zip(&run.answers) {
        if q.question_id != a.question_id {
            return Err(EvalError::VersionMismatch { run: a.question_id.clone(), benchmark: q.question_id.clone() });
        }
        let s = tasks.entry(q.task_type.clone()).or_insert(TaskScore { correct: 0, total: 0 });
        s.total += 1;
        if a.correct {
            s.correct += 1;
        }
    }
    ScoreTable::from_tasks(run.label(), &run.endpoint_id, run.strategy.label(), id, tasks)
}

fn order(a: &ScoreTable, b: &ScoreTable) -> Ordering {
    let key = |t: &ScoreTable| Category::ALL.map(|c| t.category(c).unwrap_or(f64::NEG_INFINITY));
    b.overall
        .total_cmp(&a.overall)
        .then_with(|| {
            let (ka, kb) = (key(a), key(b));
            ka.iter().zip(&kb).map(|(x, y)| y.total_cmp(x)).find(|o| *o != Ordering::Equal).unwrap_or(Ordering::Equal)
        })
        .then_with(|| a.endpoint_id.cmp(&b.endpoint_id))
        .then_with(|| a.label.cmp(&b.label))
}

/// Sort by overall score (descending), then category scores in category
/// order, then endpoint id, and assign ranks 1..n.
pub fn rank_tables(tables: &mut [ScoreTable]) {
    tables.sort_by(order);
    for (i, t) in tables.iter_mut().enumerate() {
        t.rank = Some(i + 1);
    }
}

/// Score differences of one table against a baseline, per category and
/// overall.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub label: String,
    pub baseline: String,
    pub categories: BTreeMap<Category, f64>,
    pub overall: f64,
}

pub fn compare(table: &ScoreTable, baseline: &ScoreTable) -> Comparison {
    let categories = table
        .categories
        .iter()
        .filter_map(|(c, v)| baseline.category(*c).map(|b| (*c, v - b)))
        .collect();
    Comparison {
        label: table.label.clone(),
        baseline: baseline.label.clone(),
        categories,
        overall: table.overall - baseline.overall,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(scores: &[(&str, usize, usize)]) -> ScoreTable {
        let tasks = scores.iter().map(|(t, c, n)| (t.to_string(), TaskScore { correct: *c, total: *n })).collect();
        ScoreTable::from_tasks("r", "e", "zero_shot", "b", tasks).unwrap()
    }

    #[test]
    fn category_is_plain_mean_of_tasks() {
        let t = table(&[("category_prediction", 2, 2), ("attribute_mining", 0, 2)]);
        assert_eq!(t.category(Category::ServiceFundamentals), Some(50.0));
        assert_eq!(t.overall, 50.0);
    }

    #[test]
    fn overall_matches_weighted_categories() {
        let t = table(&[
            ("category_prediction", 2, 3),
            ("attribute_mining", 1, 3),
            ("peak_hours_prediction", 3, 3),
            ("recommendation", 0, 3),
        ]);
        assert!((t.overall - t.weighted_overall()).abs() < 1e-12);
    }

    #[test]
    fn ranking_orders_by_overall_then_categories() {
        let mut a = table(&[("category_prediction", 1, 2), ("peak_hours_prediction", 1, 2)]);
        a.endpoint_id = "a".into();
        let mut b = table(&[("category_prediction", 2, 2), ("peak_hours_prediction", 0, 2)]);
        b.endpoint_id = "b".into();
        let mut c = table(&[("category_prediction", 2, 2), ("peak_hours_prediction", 2, 2)]);
        c.endpoint_id = "c".into();
        let mut v = vec![a, b, c];
        rank_tables(&mut v);
        let ids: Vec<_> = v.iter().map(|t| (t.endpoint_id.as_str(), t.rank.unwrap())).collect();
        assert_eq!(ids, [("c", 1), ("b", 2), ("a", 3)]);
    }
}
