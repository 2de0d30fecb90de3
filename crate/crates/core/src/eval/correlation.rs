//! Pearson correlation across models' task and category scores.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::score::ScoreTable;
use crate::benchmark::{Category, REGISTRY};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CorrelationError {
    #[error("vectors differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least 2 observations, got {0}")]
    TooShort(usize),
    #[error("correlation undefined: {0} is constant")]
    Constant(&'static str),
    #[error("need at least 3 runs, got {0}")]
    TooFewRuns(usize),
    #[error("runs were scored on different benchmarks ({0} and {1})")]
    MixedBenchmarks(String, String),
}

/// Sample Pearson correlation coefficient.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, CorrelationError> {
    if x.len() != y.len() {
        return Err(CorrelationError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(CorrelationError::TooShort(x.len()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(CorrelationError::Constant("x"));
    }
    if syy == 0.0 {
        return Err(CorrelationError::Constant("y"));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Symmetric correlation matrix with unit diagonal over the given columns.
/// Every column must be non-constant.
pub fn correlation_matrix(columns: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, CorrelationError> {
    let k = columns.len();
    let mut m = vec![vec![0.0; k]; k];
    for i in 0..k {
        m[i][i] = 1.0;
        for j in i + 1..k {
            let r = pearson(&columns[i], &columns[j])?;
            m[i][j] = r;
            m[j][i] = r;
        }
    }
    Ok(m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionStats {
    pub pairs: usize,
    pub mean: f64,
    /// Sample standard deviation (n − 1).
    pub sd: f64,
    pub min: f64,
    pub max: f64,
}

/// Statistics over the strict upper triangle of a correlation matrix.
pub fn off_diagonal_stats(m: &[Vec<f64>]) -> Option<DistributionStats> {
    let v: Vec<f64> = (0..m.len()).flat_map(|i| (i + 1..m.len()).map(move |j| m[i][j])).collect();
    if v.is_empty() {
        return None;
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let sd = if v.len() > 1 { (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() } else { 0.0 };
    Some(DistributionStats {
        pairs: v.len(),
        mean,
        sd,
        min: v.iter().copied().fold(f64::INFINITY, f64::min),
        max: v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub runs: Vec<String>,
    pub tasks: Vec<String>,
    pub task_matrix: Vec<Vec<f64>>,
    /// Tasks left out because every run scored the same on them, or because
    /// some run has no score for them.
    pub excluded_tasks: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub task_stats: Option<DistributionStats>,
    pub categories: Vec<Category>,
    pub category_matrix: Vec<Vec<f64>>,
    pub excluded_categories: Vec<Category>,
}

fn is_constant(v: &[f64]) -> bool {
    v.iter().all(|x| *x == v[0])
}

pub fn correlation_analysis(tables: &[ScoreTable]) -> Result<CorrelationReport, CorrelationError> {
    if tables.len() < 3 {
        return Err(CorrelationError::TooFewRuns(tables.len()));
    }
    if let Some(t) = tables.iter().find(|t| t.benchmark_id != tables[0].benchmark_id) {
        return Err(CorrelationError::MixedBenchmarks(tables[0].benchmark_id.clone(), t.benchmark_id.clone()));
    }
    let present: BTreeSet<&str> = tables.iter().flat_map(|t| t.tasks.keys().map(String::as_str)).collect();
    let mut tasks = Vec::new();
    let mut task_cols = Vec::new();
    let mut excluded_tasks = Vec::new();
    for t in REGISTRY.iter().filter(|t| present.contains(t.id)) {
        let col: Option<Vec<f64>> = tables.iter().map(|s| s.tasks.get(t.id).map(|x| x.accuracy())).collect();
        match col {
            Some(c) if !is_constant(&c) => {
                tasks.push(t.id.to_string());
                task_cols.push(c);
            }
            _ => excluded_tasks.push(t.id.to_string()),
        }
    }
    let mut categories = Vec::new();
    let mut cat_cols = Vec::new();
    let mut excluded_categories = Vec::new();
    for c in Category::ALL {
        let col: Option<Vec<f64>> = tables.iter().map(|s| s.category(c)).collect();
        match col {
            Some(v) if !is_constant(&v) => {
                categories.push(c);
                cat_cols.push(v);
            }
            Some(_) => excluded_categories.push(c),
            None => {}
        }
    }
    let task_matrix = correlation_matrix(&task_cols)?;
    Ok(CorrelationReport {
        runs: tables.iter().map(|t| t.label.clone()).collect(),
        task_stats: off_diagonal_stats(&task_matrix),
        tasks,
        task_matrix,
        excluded_tasks,
        categories,
        category_matrix: correlation_matrix(&cat_cols)?,
        excluded_categories,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_correlations() {
        assert_eq!(pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap(), 1.0);
        assert_eq!(pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(), -1.0);
    }

    #[test]
    fn degenerate_inputs() {
        assert_eq!(pearson(&[1.0, 1.0], &[1.0, 2.0]), Err(CorrelationError::Constant("x")));
        assert_eq!(pearson(&[1.0], &[1.0]), Err(CorrelationError::TooShort(1)));
        assert_eq!(pearson(&[1.0, 2.0], &[1.0]), Err(CorrelationError::LengthMismatch(2, 1)));
    }
}
