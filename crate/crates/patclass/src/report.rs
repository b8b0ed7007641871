//! JSON and CSV renderings of evaluation results.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_rational::Ratio;
use patclass_core::labels::LabelVocabulary;
use patclass_core::metrics::{percent_2dp_u64, EvalReport, ImprovementRow};
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RatioJson {
    pub numerator: u64,
    pub denominator: u64,
    pub percent: String,
}

impl From<Ratio<u64>> for RatioJson {
    fn from(r: Ratio<u64>) -> Self {
        RatioJson {
            numerator: *r.numer(),
            denominator: *r.denom(),
            percent: percent_2dp_u64(r),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConfusionJson {
    pub gold: String,
    pub predicted: String,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EvalReportJson {
    pub num_docs: usize,
    pub accuracy: RatioJson,
    pub recall_at: BTreeMap<String, RatioJson>,
    pub confusion: Vec<ConfusionJson>,
}

fn code(labels: &LabelVocabulary, i: usize) -> String {
    labels.label(i).map_or_else(|| i.to_string(), |l| l.to_string())
}

impl EvalReportJson {
    pub fn new(report: &EvalReport, labels: &LabelVocabulary) -> Self {
        EvalReportJson {
            num_docs: report.num_docs,
            accuracy: report.accuracy.into(),
            recall_at: report.recall_at.iter().map(|(n, r)| (n.to_string(), (*r).into())).collect(),
            confusion: report
                .confusion
                .iter()
                .map(|(&(g, p), &count)| ConfusionJson {
                    gold: code(labels, g),
                    predicted: code(labels, p),
                    count,
                })
                .collect(),
        }
    }
}

pub fn render_report_json(report: &EvalReport, labels: &LabelVocabulary) -> String {
    let mut s = serde_json::to_string_pretty(&EvalReportJson::new(report, labels)).expect("report serializes");
    s.push('\n');
    s
}

/// `metric,numerator,denominator,percent`, one row per metric.
pub fn render_report_csv(report: &EvalReport) -> String {
    let mut out = String::from("metric,numerator,denominator,percent\n");
    let mut row = |name: &str, r: Ratio<u64>| {
        writeln!(out, "{name},{},{},{}", r.numer(), r.denom(), percent_2dp_u64(r)).expect("write to String");
    };
    row("accuracy", report.accuracy);
    for (n, r) in &report.recall_at {
        row(&format!("r_at_{n}"), *r);
    }
    out
}

/// One-line human summary: accuracy and each recall cut-off as percentages.
pub fn metrics_line(report: &EvalReport) -> String {
    let mut s = format!("docs {} accuracy {}", report.num_docs, percent_2dp_u64(report.accuracy));
    for (n, r) in &report.recall_at {
        if *n > 1 {
            write!(s, " r@{n} {}", percent_2dp_u64(*r)).expect("write to String");
        }
    }
    s
}

pub const IMPROVEMENT_HEADER: &str = "architecture,member_1,member_2,member_3,mean,ensemble,improvement_pct";

pub fn render_improvement_csv(rows: &[ImprovementRow]) -> String {
    let mut out = format!("{IMPROVEMENT_HEADER}\n");
    for r in rows {
        let pct = patclass_core::metrics::percent_2dp;
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.architecture,
            pct(r.members[0]),
            pct(r.members[1]),
            pct(r.members[2]),
            r.mean_pct(),
            pct(r.ensemble),
            r.improvement_2dp()
        )
        .expect("write to String");
    }
    out
}
