//! Published LocalEval leaderboard (30 models) and its arithmetic check.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::correlation::{correlation_matrix, CorrelationError};
use super::EvalError;

const BUILTIN: &str = include_str!("../../assets/table1.csv");

/// Task counts per category: 18 / 10 / 10 / 3.
pub const CATEGORY_WEIGHTS: [f64; 4] = [18.0, 10.0, 10.0, 3.0];
pub const DEFAULT_TOLERANCE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1Row {
    pub model_type: String,
    pub model: String,
    pub service_fundamentals: f64,
    pub service_with_context: f64,
    pub user_service_interaction: f64,
    pub composite: f64,
    pub overall: f64,
    pub rank: u32,
}

impl Table1Row {
    pub fn categories(&self) -> [f64; 4] {
        [self.service_fundamentals, self.service_with_context, self.user_service_interaction, self.composite]
    }

    pub fn weighted_mean(&self, weights: [f64; 4]) -> f64 {
        let c = self.categories();
        let num: f64 = c.iter().zip(weights).map(|(s, w)| s * w).sum();
        num / weights.iter().sum::<f64>()
    }
}

pub fn parse_table1(text: &str) -> Result<Vec<Table1Row>, EvalError> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let rows: Result<Vec<Table1Row>, _> = reader.deserialize().collect();
    let rows = rows.map_err(|e| EvalError::Parse(format!("table fixture: {e}")))?;
    if rows.is_empty() {
        return Err(EvalError::Parse("table fixture has no rows".into()));
    }
    Ok(rows)
}

pub fn load_table1(path: &Path) -> Result<Vec<Table1Row>, EvalError> {
    let text = std::fs::read_to_string(path).map_err(|e| EvalError::Io { path: path.display().to_string(), reason: e.to_string() })?;
    parse_table1(&text)
}

/// The bundled copy of the published table.
pub fn builtin_table1() -> Vec<Table1Row> {
    parse_table1(BUILTIN).expect("bundled table parses")
}

pub fn builtin_table1_csv() -> &'static str {
    BUILTIN
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowVerdict {
    pub model: String,
    pub weighted: f64,
    pub published: f64,
    pub deviation: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableVerification {
    pub weights: [f64; 4],
    pub tolerance: f64,
    pub rows: Vec<RowVerdict>,
    pub failed: usize,
    pub worst: Option<RowVerdict>,
}

impl TableVerification {
    pub fn passed(&self) -> bool {
        self.failed == 0
    }
}

/// Compare every row's published overall score with the weighted mean of its
/// category scores.
pub fn verify_published_table(rows: &[Table1Row], weights: [f64; 4], tolerance: f64) -> TableVerification {
    let verdicts: Vec<RowVerdict> = rows
        .iter()
        .map(|r| {
            let weighted = r.weighted_mean(weights);
            let deviation = (weighted - r.overall).abs();
            RowVerdict {
                model: r.model.clone(),
                weighted,
                published: r.overall,
                deviation,
                pass: deviation <= tolerance,
            }
        })
        .collect();
    let worst = verdicts.iter().max_by(|a, b| a.deviation.total_cmp(&b.deviation)).cloned();
    TableVerification {
        weights,
        tolerance,
        failed: verdicts.iter().filter(|v| !v.pass).count(),
        rows: verdicts,
        worst,
    }
}

/// 4×4 Pearson matrix of the category columns across the table's models.
pub fn category_correlation(rows: &[Table1Row]) -> Result<Vec<Vec<f64>>, CorrelationError> {
    let cols: Vec<Vec<f64>> = (0..4).map(|i| rows.iter().map(|r| r.categories()[i]).collect()).collect();
    correlation_matrix(&cols)
}
