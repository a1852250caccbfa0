use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{MetricsError, Result};
use crate::gateway::CategoryOutcome;
use crate::profile::{Profile, Question};

/// P(response | profile category). Rows with no parsed answers stay all
/// zero and are listed in `empty_rows`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub question_id: String,
    pub variable: String,
    pub rows: Vec<String>,
    pub cols: Vec<String>,
    pub cells: Vec<Vec<f64>>,
    pub respondents: Vec<u64>,
    pub empty_rows: Vec<String>,
}

/// `outcomes[i]` belongs to `profiles[i]`; outcomes for other questions and
/// unparseable answers are skipped.
pub fn heatmap(
    outcomes: &[CategoryOutcome],
    profiles: &[Profile],
    question: &Question,
    variable: &str,
    row_categories: &[String],
) -> Result<Heatmap> {
    if outcomes.len() != profiles.len() {
        return Err(MetricsError::Misaligned {
            outcomes: outcomes.len(),
            profiles: profiles.len(),
        });
    }
    let mut counts = vec![vec![0u64; question.scale.len()]; row_categories.len()];
    for (outcome, profile) in outcomes.iter().zip(profiles) {
        if outcome.question_id != question.id {
            continue;
        }
        let Some(category) = &outcome.category else { continue };
        let Some(value) = profile.get(variable) else { continue };
        let Some(r) = row_categories.iter().position(|c| c == value) else { continue };
        let Some(c) = question.scale.iter().position(|s| s == category) else { continue };
        counts[r][c] += 1;
    }
    let respondents: Vec<u64> = counts.iter().map(|r| r.iter().sum()).collect();
    let cells = counts
        .iter()
        .zip(&respondents)
        .map(|(row, &n)| row.iter().map(|&v| if n == 0 { 0.0 } else { v as f64 / n as f64 }).collect())
        .collect();
    let empty_rows = row_categories
        .iter()
        .zip(&respondents)
        .filter(|(_, &n)| n == 0)
        .map(|(c, _)| c.clone())
        .collect();
    Ok(Heatmap {
        question_id: question.id.clone(),
        variable: variable.to_string(),
        rows: row_categories.to_vec(),
        cols: question.scale.clone(),
        cells,
        respondents,
        empty_rows,
    })
}

/// Color bands are 0.05 wide.
const BANDS: usize = 20;

fn band(value: f64) -> usize {
    ((value * BANDS as f64).floor() as usize).min(BANDS - 1)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

impl Heatmap {
    pub fn band_of(&self, row: usize, col: usize) -> usize {
        band(self.cells[row][col])
    }

    /// Labelled matrix; the first column is the row label, the last flags
    /// rows with no respondents.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec![self.variable.clone()];
        header.extend(self.cols.iter().cloned());
        header.push("empty".into());
        w.write_record(&header).expect("in-memory write");
        for (i, row) in self.rows.iter().enumerate() {
            let mut rec = vec![row.clone()];
            rec.extend(self.cells[i].iter().map(|v| format!("{v:.6}")));
            rec.push(self.empty_rows.contains(row).to_string());
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
    }

    pub fn to_svg(&self) -> String {
        let (cell_w, cell_h, left, top) = (110usize, 28usize, 220usize, 60usize);
        let width = left + cell_w * self.cols.len() + 20;
        let height = top + cell_h * self.rows.len() + 20;
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">"#
        );
        let _ = writeln!(s, r#"<title>{} by {}</title>"#, escape(&self.question_id), escape(&self.variable));
        for (j, col) in self.cols.iter().enumerate() {
            let x = left + j * cell_w + cell_w / 2;
            let _ = writeln!(s, r#"<text x="{x}" y="{}" text-anchor="middle">{}</text>"#, top - 10, escape(col));
        }
        for (i, row) in self.rows.iter().enumerate() {
            let y = top + i * cell_h;
            let flagged = self.empty_rows.contains(row);
            let label = if flagged { format!("{row} (no respondents)") } else { row.clone() };
            let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, left - 8, y + cell_h / 2 + 4, escape(&label));
            for (j, &v) in self.cells[i].iter().enumerate() {
                let x = left + j * cell_w;
                let shade = 255 - (band(v) * 255 / (BANDS - 1));
                let fill = if flagged { "#dddddd".to_string() } else { format!("rgb({shade},{shade},255)") };
                let _ = writeln!(
                    s,
                    r#"<rect x="{x}" y="{y}" width="{cell_w}" height="{cell_h}" fill="{fill}" stroke="white"/><text x="{}" y="{}" text-anchor="middle">{v:.2}</text>"#,
                    x + cell_w / 2,
                    y + cell_h / 2 + 4
                );
            }
        }
        s.push_str("</svg>\n");
        s
    }
}
