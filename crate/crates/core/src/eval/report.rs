//! Markdown and CSV score reports.
//!
//! Column order is fixed: SF, SwC, USI, Comp, Overall, Rank. The CSV form
//! also carries every task as `correct/total` and the unrounded scores, so
//! it reads back into identical [`ScoreTable`]s.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::score::{round2, Comparison, ScoreTable, TaskScore};
use super::EvalError;
use crate::benchmark::{Category, REGISTRY};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Markdown,
    Csv,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "markdown" | "md" => Ok(Self::Markdown),
            "csv" => Ok(Self::Csv),
            other => Err(format!("unknown report format `{other}` (markdown or csv)")),
        }
    }
}

fn cell(x: Option<f64>) -> String {
    x.map(|v| format!("{:.2}", round2(v))).unwrap_or_else(|| "-".into())
}

pub fn render_report(tables: &[ScoreTable], comparisons: &[Comparison], format: ReportFormat) -> String {
    match format {
        ReportFormat::Markdown => render_markdown(tables, comparisons),
        ReportFormat::Csv => render_csv(tables),
    }
}

fn render_markdown(tables: &[ScoreTable], comparisons: &[Comparison]) -> String {
    let mut out = String::from("| Run | SF | SwC | USI | Comp | Overall | Rank |\n|---|---:|---:|---:|---:|---:|---:|\n");
    for t in tables {
        let cats: Vec<String> = Category::ALL.iter().map(|c| cell(t.category(*c))).collect();
        let rank = t.rank.map(|r| r.to_string()).unwrap_or_else(|| "-".into());
        let _ = writeln!(out, "| {} | {} | {} | {} |", t.label.replace('|', "\\|"), cats.join(" | "), cell(Some(t.overall)), rank);
    }
    if !comparisons.is_empty() {
        out.push_str("\n| Run | Baseline | ΔSF | ΔSwC | ΔUSI | ΔComp | ΔOverall |\n|---|---|---:|---:|---:|---:|---:|\n");
        for c in comparisons {
            let d = |x: Option<f64>| x.map(|v| format!("{:+.2}", round2(v))).unwrap_or_else(|| "-".into());
            let cats: Vec<String> = Category::ALL.iter().map(|k| d(c.categories.get(k).copied())).collect();
            let _ = writeln!(out, "| {} | {} | {} | {} |", c.label, c.baseline, cats.join(" | "), d(Some(c.overall)));
        }
    }
    out
}

const FIXED: [&str; 10] = ["run", "endpoint_id", "strategy", "benchmark_id", "SF", "SwC", "USI", "Comp", "Overall", "Rank"];

fn render_csv(tables: &[ScoreTable]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = FIXED.iter().map(|s| s.to_string()).collect();
    header.extend(REGISTRY.iter().map(|t| t.id.to_string()));
    w.write_record(&header).expect("in-memory write");
    for t in tables {
        let mut rec = vec![t.label.clone(), t.endpoint_id.clone(), t.strategy.clone(), t.benchmark_id.clone()];
        rec.extend(Category::ALL.iter().map(|c| t.category(*c).map(|v| v.to_string()).unwrap_or_default()));
        rec.push(t.overall.to_string());
        rec.push(t.rank.map(|r| r.to_string()).unwrap_or_default());
        rec.extend(
            REGISTRY
                .iter()
                .map(|task| t.tasks.get(task.id).map(|s| format!("{}/{}", s.correct, s.total)).unwrap_or_default()),
        );
        w.write_record(&rec).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

/// Read tables back from the CSV form.
pub fn parse_report_csv(text: &str) -> Result<Vec<ScoreTable>, EvalError> {
    let bad = |m: String| EvalError::Parse(format!("report csv: {m}"));
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = r.headers().map_err(|e| bad(e.to_string()))?.iter().map(str::to_string).collect();
    if header.len() < FIXED.len() || header[..FIXED.len()] != FIXED {
        return Err(bad(format!("unexpected header {header:?}")));
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let num = |i: usize| -> Result<Option<f64>, EvalError> {
            let s = &rec[i];
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse::<f64>().map(Some).map_err(|e| bad(format!("{s}: {e}")))
            }
        };
        let mut categories = BTreeMap::new();
        for (k, c) in Category::ALL.iter().enumerate() {
            if let Some(v) = num(4 + k)? {
                categories.insert(*c, v);
            }
        }
        let mut tasks = BTreeMap::new();
        for (i, name) in header.iter().enumerate().skip(FIXED.len()) {
            let s = &rec[i];
            if s.is_empty() {
                continue;
            }
            let (c, t) = s.split_once('/').ok_or_else(|| bad(format!("{name}: `{s}` is not correct/total")))?;
            let parse = |x: &str| x.parse::<usize>().map_err(|e| bad(format!("{name}: {e}")));
            tasks.insert(name.clone(), TaskScore { correct: parse(c)?, total: parse(t)? });
        }
        out.push(ScoreTable {
            label: rec[0].to_string(),
            endpoint_id: rec[1].to_string(),
            strategy: rec[2].to_string(),
            benchmark_id: rec[3].to_string(),
            tasks,
            categories,
            overall: num(8)?.ok_or_else(|| bad("missing overall".into()))?,
            rank: if rec[9].is_empty() { None } else { Some(rec[9].parse().map_err(|e| bad(format!("rank: {e}")))?) },
        });
    }
    Ok(out)
}
