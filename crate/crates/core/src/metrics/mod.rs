//! Alignment scores between synthetic and expected response distributions.
//!
//! All logarithms are base 2. Distributions over different category sets
//! are compared on the union of their categories, absent ones counting 0.

mod heatmap;
mod tables;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::CategoryOutcome;
use crate::profile::Question;
use crate::survey::CategoricalDistribution;

pub use heatmap::{heatmap, Heatmap};
pub use tables::{
    benchmark_report, parse_benchmark, parse_table2, render_table2, ModelPerfRecord, ReportedValue,
    Table2Row, TABLE2_HEADER, TABLE3_HEADER,
};

/// Mass below this is treated as zero.
const EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("expected mass is zero for category `{0}` but observed mass is not")]
    ZeroExpectedCategory(String),
    #[error("distribution for `{0}` has no positive count")]
    EmptyDistribution(String),
    #[error("invalid count {value} for category `{category}`")]
    InvalidCount { category: String, value: f64 },
    #[error("category `{category}` is not on the scale of `{question_id}`")]
    OffScale { question_id: String, category: String },
    #[error("comparing `{0}` against `{1}`")]
    QuestionMismatch(String, String),
    #[error("invalid joint distribution: {0}")]
    InvalidJoint(String),
    #[error("both marginals are deterministic")]
    DegenerateMarginals,
    #[error("error rate {0} outside [0, 1]")]
    InvalidErrorRate(f64),
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error("{outcomes} outcomes but {profiles} profiles")]
    Misaligned { outcomes: usize, profiles: usize },
    #[error("table line {line}: {reason}")]
    TableParse { line: usize, reason: String },
    #[error("benchmark report needs at least one row")]
    EmptyBenchmark,
}

pub type Result<T> = std::result::Result<T, MetricsError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistributionKind {
    Observed,
    Expected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseDistribution {
    pub question_id: String,
    pub counts: IndexMap<String, f64>,
    pub kind: DistributionKind,
}

impl ResponseDistribution {
    /// Counts keyed by category; every category must be on the question's scale.
    pub fn new(
        question: &Question,
        counts: impl IntoIterator<Item = (String, f64)>,
        kind: DistributionKind,
    ) -> Result<Self> {
        let mut map: IndexMap<String, f64> = question.scale.iter().map(|c| (c.clone(), 0.0)).collect();
        for (category, value) in counts {
            let slot = map.get_mut(&category).ok_or_else(|| MetricsError::OffScale {
                question_id: question.id.clone(),
                category: category.clone(),
            })?;
            *slot += value;
        }
        let dist = Self {
            question_id: question.id.clone(),
            counts: map,
            kind,
        };
        dist.validate()?;
        Ok(dist)
    }

    /// Expected counts from a probability distribution scaled to `total`.
    pub fn expected(question: &Question, dist: &CategoricalDistribution, total: f64) -> Result<Self> {
        Self::new(
            question,
            dist.mass.iter().map(|(c, p)| (c.clone(), p * total)),
            DistributionKind::Expected,
        )
    }

    /// Observed counts from parsed outcomes; unparseable and other-question
    /// outcomes are skipped.
    pub fn observed(question: &Question, outcomes: &[CategoryOutcome]) -> Result<Self> {
        Self::new(
            question,
            outcomes
                .iter()
                .filter(|o| o.question_id == question.id)
                .filter_map(|o| o.category.clone())
                .map(|c| (c, 1.0)),
            DistributionKind::Observed,
        )
    }

    pub fn validate(&self) -> Result<()> {
        for (category, &value) in &self.counts {
            if !value.is_finite() || value < 0.0 {
                return Err(MetricsError::InvalidCount {
                    category: category.clone(),
                    value,
                });
            }
        }
        if self.total() <= 0.0 {
            return Err(MetricsError::EmptyDistribution(self.question_id.clone()));
        }
        Ok(())
    }

    pub fn total(&self) -> f64 {
        self.counts.values().sum()
    }

    pub fn count(&self, category: &str) -> f64 {
        self.counts.get(category).copied().unwrap_or(0.0)
    }

    pub fn probability(&self, category: &str) -> f64 {
        self.count(category) / self.total()
    }
}

/// Union of both category sets, `a`'s order first.
fn categories<'a>(a: &'a ResponseDistribution, b: &'a ResponseDistribution) -> Vec<&'a str> {
    let mut out: Vec<&str> = a.counts.keys().map(String::as_str).collect();
    for c in b.counts.keys() {
        if !a.counts.contains_key(c) {
            out.push(c);
        }
    }
    out
}

fn same_question(a: &ResponseDistribution, b: &ResponseDistribution) -> Result<()> {
    if a.question_id != b.question_id {
        return Err(MetricsError::QuestionMismatch(a.question_id.clone(), b.question_id.clone()));
    }
    Ok(())
}

/// Pearson statistic with expected counts rescaled to the observed total.
pub fn chi_square(observed: &ResponseDistribution, expected: &ResponseDistribution) -> Result<f64> {
    same_question(observed, expected)?;
    observed.validate()?;
    expected.validate()?;
    let scale = observed.total() / expected.total();
    let mut stat = 0.0;
    for c in categories(observed, expected) {
        let o = observed.count(c);
        let e = expected.count(c) * scale;
        if e <= EPS {
            if o > EPS {
                return Err(MetricsError::ZeroExpectedCategory(c.to_string()));
            }
            continue;
        }
        stat += (o - e) * (o - e) / e;
    }
    Ok(stat)
}

fn plogp(p: f64) -> f64 {
    if p > 0.0 {
        p * p.log2()
    } else {
        0.0
    }
}

/// Shannon entropy in bits of a probability vector.
pub fn entropy_of(probabilities: &[f64]) -> f64 {
    -probabilities.iter().map(|&p| plogp(p)).sum::<f64>()
}

pub fn entropy(dist: &CategoricalDistribution) -> f64 {
    entropy_of(&dist.mass.values().copied().collect::<Vec<_>>())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointDistribution {
    pub rows: Vec<String>,
    pub cols: Vec<String>,
    /// `mass[i][j]` is P(row i, col j).
    pub mass: Vec<Vec<f64>>,
}

impl JointDistribution {
    pub fn new(rows: Vec<String>, cols: Vec<String>, mass: Vec<Vec<f64>>) -> Result<Self> {
        let joint = Self { rows, cols, mass };
        joint.validate()?;
        Ok(joint)
    }

    /// Unlabelled joint; rows and columns are named by index.
    pub fn from_matrix(mass: Vec<Vec<f64>>) -> Result<Self> {
        let rows = (0..mass.len()).map(|i| i.to_string()).collect();
        let cols = (0..mass.first().map_or(0, Vec::len)).map(|j| j.to_string()).collect();
        Self::new(rows, cols, mass)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(MetricsError::InvalidJoint(m.to_string()));
        if self.rows.is_empty() || self.cols.is_empty() {
            return bad("empty joint");
        }
        if self.mass.len() != self.rows.len() || self.mass.iter().any(|r| r.len() != self.cols.len()) {
            return bad("shape does not match labels");
        }
        if self.mass.iter().flatten().any(|&p| !p.is_finite() || p < 0.0) {
            return bad("negative or non-finite entry");
        }
        let total: f64 = self.mass.iter().flatten().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(MetricsError::InvalidJoint(format!("total mass {total} is not 1")));
        }
        Ok(())
    }

    pub fn row_marginal(&self) -> Vec<f64> {
        self.mass.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn col_marginal(&self) -> Vec<f64> {
        (0..self.cols.len()).map(|j| self.mass.iter().map(|r| r[j]).sum()).collect()
    }

    pub fn transpose(&self) -> Self {
        Self {
            rows: self.cols.clone(),
            cols: self.rows.clone(),
            mass: (0..self.cols.len())
                .map(|j| self.mass.iter().map(|r| r[j]).collect())
                .collect(),
        }
    }
}

pub fn mutual_information(joint: &JointDistribution) -> f64 {
    let px = joint.row_marginal();
    let py = joint.col_marginal();
    let mut mi = 0.0;
    for (i, row) in joint.mass.iter().enumerate() {
        for (j, &p) in row.iter().enumerate() {
            if p > 0.0 {
                mi += p * (p / (px[i] * py[j])).log2();
            }
        }
    }
    mi.max(0.0)
}

/// `2 I(X;Y) / (H(X) + H(Y))`, clamped into [0, 1] against rounding.
pub fn nmi(joint: &JointDistribution) -> Result<f64> {
    let denom = entropy_of(&joint.row_marginal()) + entropy_of(&joint.col_marginal());
    if denom <= EPS {
        return Err(MetricsError::DegenerateMarginals);
    }
    Ok((2.0 * mutual_information(joint) / denom).clamp(0.0, 1.0))
}

/// Σ min / Σ max over normalized category mass.
pub fn jaccard_weighted(observed: &ResponseDistribution, expected: &ResponseDistribution) -> f64 {
    let (to, te) = (observed.total(), expected.total());
    let (mut lo, mut hi) = (0.0, 0.0);
    for c in categories(observed, expected) {
        let o = observed.count(c) / to;
        let e = expected.count(c) / te;
        lo += o.min(e);
        hi += o.max(e);
    }
    if hi <= 0.0 {
        return 0.0;
    }
    (lo / hi).clamp(0.0, 1.0)
}

/// Comonotone coupling of the two distributions over their shared ordered
/// scale: mass is matched in category order (north-west corner rule), so
/// identical distributions give a diagonal joint.
pub fn comonotone_joint(observed: &ResponseDistribution, expected: &ResponseDistribution) -> Result<JointDistribution> {
    let cats = categories(observed, expected);
    let p: Vec<f64> = cats.iter().map(|c| observed.probability(c)).collect();
    let q: Vec<f64> = cats.iter().map(|c| expected.probability(c)).collect();
    let n = cats.len();
    let mut mass = vec![vec![0.0; n]; n];
    let (mut rest_p, mut rest_q) = (p, q);
    let (mut i, mut j) = (0, 0);
    while i < n && j < n {
        let m = rest_p[i].min(rest_q[j]);
        mass[i][j] += m;
        rest_p[i] -= m;
        rest_q[j] -= m;
        if rest_p[i] <= EPS {
            i += 1;
        } else {
            j += 1;
        }
    }
    let labels: Vec<String> = cats.iter().map(|c| c.to_string()).collect();
    let total: f64 = mass.iter().flatten().sum();
    for v in mass.iter_mut().flatten() {
        *v /= total;
    }
    JointDistribution::new(labels.clone(), labels, mass)
}

/// Two-row joint stacking the distributions as conditionals of a uniform
/// binary source indicator. Identical distributions give NMI 0 here, so it
/// measures separability of the sources rather than agreement.
pub fn source_indicator_joint(
    observed: &ResponseDistribution,
    expected: &ResponseDistribution,
) -> Result<JointDistribution> {
    let cats = categories(observed, expected);
    let row = |d: &ResponseDistribution| cats.iter().map(|c| d.probability(c) / 2.0).collect::<Vec<_>>();
    JointDistribution::new(
        vec!["observed".into(), "expected".into()],
        cats.iter().map(|c| c.to_string()).collect(),
        vec![row(observed), row(expected)],
    )
}

fn nmi_with_degenerate_fallback(observed: &ResponseDistribution, expected: &ResponseDistribution) -> Result<f64> {
    match nmi(&comonotone_joint(observed, expected)?) {
        Err(MetricsError::DegenerateMarginals) => {
            let identical = categories(observed, expected)
                .iter()
                .all(|c| (observed.probability(c) - expected.probability(c)).abs() <= 1e-12);
            Ok(if identical { 1.0 } else { 0.0 })
        }
        other => other,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub question_id: String,
    pub chi_square: f64,
    pub jaccard: f64,
    pub nmi: f64,
    pub n_observed: u64,
    pub n_expected: u64,
    /// Answers that matched no category; excluded from the scores above.
    #[serde(default)]
    pub unparseable: u64,
    /// Jaccard with unparseable answers kept as an extra category that the
    /// expected side never emits.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jaccard_bucketed: Option<f64>,
}

pub fn evaluate_question(observed: &ResponseDistribution, expected: &ResponseDistribution) -> Result<MetricReport> {
    Ok(MetricReport {
        question_id: observed.question_id.clone(),
        chi_square: chi_square(observed, expected)?,
        jaccard: jaccard_weighted(observed, expected),
        nmi: nmi_with_degenerate_fallback(observed, expected)?,
        n_observed: observed.total().round() as u64,
        n_expected: expected.total().round() as u64,
        unparseable: 0,
        jaccard_bucketed: None,
    })
}

/// Score a question's outcomes, reporting dropped and bucketed treatments
/// of unparseable answers side by side.
pub fn evaluate_outcomes(
    question: &Question,
    outcomes: &[CategoryOutcome],
    expected: &ResponseDistribution,
) -> Result<MetricReport> {
    let relevant: Vec<&CategoryOutcome> = outcomes.iter().filter(|o| o.question_id == question.id).collect();
    let unparseable = relevant.iter().filter(|o| o.is_unparseable()).count();
    let observed = ResponseDistribution::observed(question, outcomes)?;
    let mut report = evaluate_question(&observed, expected)?;
    report.unparseable = unparseable as u64;

    let bucket = "\u{0}unparseable";
    let mut bucketed = observed.clone();
    bucketed.counts.insert(bucket.into(), unparseable as f64);
    let mut padded = expected.clone();
    padded.counts.insert(bucket.into(), 0.0);
    report.jaccard_bucketed = Some(jaccard_weighted(&bucketed, &padded));
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeThresholds {
    pub gap: f64,
    pub bias: f64,
}

impl Default for RegimeThresholds {
    fn default() -> Self {
        Self { gap: 0.10, bias: 0.25 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    HighVariance,
    HighBias,
    Balanced,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeDiagnosis {
    pub train_error: f64,
    pub test_error: f64,
    pub regime: Regime,
}

pub fn regime_classify(train_error: f64, test_error: f64, thresholds: RegimeThresholds) -> Result<RegimeDiagnosis> {
    for e in [train_error, test_error] {
        if !(0.0..=1.0).contains(&e) {
            return Err(MetricsError::InvalidErrorRate(e));
        }
    }
    let gap = test_error - train_error;
    let regime = if gap > thresholds.gap {
        Regime::HighVariance
    } else if train_error > thresholds.bias && test_error > thresholds.bias {
        Regime::HighBias
    } else {
        Regime::Balanced
    };
    Ok(RegimeDiagnosis {
        train_error,
        test_error,
        regime,
    })
}
