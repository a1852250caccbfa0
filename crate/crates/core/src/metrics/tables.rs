use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{MetricReport, MetricsError, Result};

pub const TABLE2_HEADER: [&str; 4] = ["Question", "Chi-Square Test", "Jaccard Index", "Mutual Information"];
pub const TABLE3_HEADER: [&str; 7] = [
    "Model",
    "AUC",
    "Balanced Accuracy",
    "Memory Consumption",
    "Training Time",
    "Prediction Time",
    "Flags",
];

/// A number together with the exact text it was printed as, so rendering
/// reproduces the source precision ("12.0" stays "12.0").
#[derive(Debug, Clone, PartialEq)]
pub struct ReportedValue {
    pub value: f64,
    pub repr: String,
}

impl ReportedValue {
    pub fn fixed(value: f64, decimals: usize) -> Self {
        Self {
            value,
            repr: format!("{value:.decimals$}"),
        }
    }
}

impl FromStr for ReportedValue {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let repr = s.trim();
        let value: f64 = repr.parse().map_err(|_| format!("`{repr}` is not a number"))?;
        if !value.is_finite() {
            return Err(format!("`{repr}` is not finite"));
        }
        Ok(Self {
            value,
            repr: repr.to_string(),
        })
    }
}

impl fmt::Display for ReportedValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(&self.repr)
    }
}

impl Serialize for ReportedValue {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.repr)
    }
}

impl<'de> Deserialize<'de> for ReportedValue {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            Number(serde_json::Number),
        }
        let text = match Raw::deserialize(d)? {
            Raw::Text(t) => t,
            Raw::Number(n) => n.to_string(),
        };
        text.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table2Row {
    pub question: String,
    pub chi_square: ReportedValue,
    pub jaccard: ReportedValue,
    pub mutual_information: ReportedValue,
}

impl Table2Row {
    /// Row for a computed report, printed to four decimals.
    pub fn from_report(question_label: &str, report: &MetricReport) -> Self {
        Self {
            question: question_label.to_string(),
            chi_square: ReportedValue::fixed(report.chi_square, 4),
            jaccard: ReportedValue::fixed(report.jaccard, 4),
            mutual_information: ReportedValue::fixed(report.nmi, 4),
        }
    }
}

fn render_columns(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: Vec<&str>| {
        let padded: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, &w)| format!("{c:<w$}"))
            .collect();
        padded.join(" | ").trim_end().to_string()
    };
    let mut out = line(header.to_vec());
    out.push('\n');
    out.push_str(&widths.iter().map(|&w| "-".repeat(w)).collect::<Vec<_>>().join("-+-"));
    out.push('\n');
    for row in rows {
        out.push_str(&line(row.iter().map(String::as_str).collect()));
        out.push('\n');
    }
    out
}

/// Aligned plain-text table with the question/chi-square/Jaccard/MI columns.
pub fn render_table2(rows: &[Table2Row]) -> String {
    let cells: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.question.clone(),
                r.chi_square.repr.clone(),
                r.jaccard.repr.clone(),
                r.mutual_information.repr.clone(),
            ]
        })
        .collect();
    render_columns(&TABLE2_HEADER, &cells)
}

/// Data lines of a pipe- or tab-delimited table, with 1-based line numbers.
/// Header, separator, blank and caption lines are skipped.
fn data_lines<'a>(text: &'a str, first_header: &str) -> impl Iterator<Item = (usize, Vec<&'a str>)> + 'a {
    let first_header = first_header.to_string();
    text.lines().enumerate().filter_map(move |(i, line)| {
        let cells: Vec<&str> = if line.contains('|') {
            line.split('|').map(str::trim).collect()
        } else if line.contains('\t') {
            line.split('\t').map(str::trim).collect()
        } else {
            return None;
        };
        let separator = cells.iter().all(|c| c.chars().all(|ch| ch == '-' || ch == '+'));
        if separator || cells[0] == first_header {
            return None;
        }
        Some((i + 1, cells))
    })
}

fn cell(cells: &[&str], idx: usize, line: usize) -> Result<ReportedValue> {
    cells
        .get(idx)
        .ok_or_else(|| MetricsError::TableParse {
            line,
            reason: format!("missing column {}", idx + 1),
        })?
        .parse()
        .map_err(|reason| MetricsError::TableParse { line, reason })
}

/// Inverse of [`render_table2`]; also reads the tab-separated form.
pub fn parse_table2(text: &str) -> Result<Vec<Table2Row>> {
    data_lines(text, TABLE2_HEADER[0])
        .map(|(line, cells)| {
            Ok(Table2Row {
                question: cells[0].to_string(),
                chi_square: cell(&cells, 1, line)?,
                jaccard: cell(&cells, 2, line)?,
                mutual_information: cell(&cells, 3, line)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelPerfRecord {
    pub model_name: String,
    pub auc: ReportedValue,
    pub balanced_accuracy: ReportedValue,
    pub memory_consumption: ReportedValue,
    pub training_time: ReportedValue,
    pub prediction_time: ReportedValue,
}

impl ModelPerfRecord {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(MetricsError::InvalidRecord(format!("{}: {m}", self.model_name)));
        for (name, v) in [("auc", &self.auc), ("balanced accuracy", &self.balanced_accuracy)] {
            if !(0.0..=1.0).contains(&v.value) {
                return bad(format!("{name} {} outside [0, 1]", v.repr));
            }
        }
        for (name, v) in [
            ("memory", &self.memory_consumption),
            ("training time", &self.training_time),
            ("prediction time", &self.prediction_time),
        ] {
            if v.value < 0.0 {
                return bad(format!("{name} {} is negative", v.repr));
            }
        }
        Ok(())
    }
}

fn arg_by(rows: &[ModelPerfRecord], key: impl Fn(&ModelPerfRecord) -> f64, better: fn(f64, f64) -> bool) -> usize {
    let mut best = 0;
    for (i, r) in rows.iter().enumerate().skip(1) {
        if better(key(r), key(&rows[best])) {
            best = i;
        }
    }
    best
}

/// Performance table flagging the highest-AUC and fastest-training rows, and
/// the slowest-training row when there is more than one.
pub fn benchmark_report(rows: &[ModelPerfRecord]) -> Result<String> {
    if rows.is_empty() {
        return Err(MetricsError::EmptyBenchmark);
    }
    for r in rows {
        r.validate()?;
    }
    let top_auc = arg_by(rows, |r| r.auc.value, |a, b| a > b);
    let fastest = arg_by(rows, |r| r.training_time.value, |a, b| a < b);
    let slowest = arg_by(rows, |r| r.training_time.value, |a, b| a > b);
    let cells: Vec<Vec<String>> = rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut flags = Vec::new();
            if i == top_auc {
                flags.push("highest AUC");
            }
            if i == fastest {
                flags.push("fastest training");
            }
            if rows.len() > 1 && i == slowest {
                flags.push("slowest training");
            }
            vec![
                r.model_name.clone(),
                r.auc.repr.clone(),
                r.balanced_accuracy.repr.clone(),
                r.memory_consumption.repr.clone(),
                r.training_time.repr.clone(),
                r.prediction_time.repr.clone(),
                flags.join(", "),
            ]
        })
        .collect();
    Ok(render_columns(&TABLE3_HEADER, &cells))
}

/// Reads rendered benchmark tables or tab-separated rows; the flag column
/// is ignored.
pub fn parse_benchmark(text: &str) -> Result<Vec<ModelPerfRecord>> {
    data_lines(text, TABLE3_HEADER[0])
        .map(|(line, cells)| {
            let record = ModelPerfRecord {
                model_name: cells[0].to_string(),
                auc: cell(&cells, 1, line)?,
                balanced_accuracy: cell(&cells, 2, line)?,
                memory_consumption: cell(&cells, 3, line)?,
                training_time: cell(&cells, 4, line)?,
                prediction_time: cell(&cells, 5, line)?,
            };
            record.validate()?;
            Ok(record)
        })
        .collect()
}
