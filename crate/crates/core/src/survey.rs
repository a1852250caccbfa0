//! Categorical survey ingestion and preprocessing.
//!
//! Cells hold either a category label of the column's variable or one of the
//! three recognised missing codes (`-8`, `-2`, `-1`). Everything else is
//! rejected at load time.

use std::collections::BTreeSet;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use indexmap::IndexMap;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("header lacks schema variable `{0}`")]
    MissingColumn(String),
    #[error("row {row}, column `{column}`: `{value}` is neither a category nor a missing code")]
    InvalidValue {
        row: usize,
        column: String,
        value: String,
    },
    #[error("dataset has no records")]
    EmptyDataset,
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("variable `{0}` has no valid values to impute from")]
    AllMissing(String),
    #[error("variable `{0}` still contains missing codes")]
    ContainsMissing(String),
    #[error("every category of `{0}` falls below the minimum share")]
    EverythingRemoved(String),
    #[error("minimum share {0} outside [0, 1)")]
    InvalidThreshold(f64),
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, IngestError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariableKind {
    Demographic,
    Opinion,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableSchema {
    pub name: String,
    pub categories: Vec<String>,
    pub kind: VariableKind,
    /// Categories form an ordered agreement scale.
    #[serde(default)]
    pub likert: bool,
}

impl VariableSchema {
    pub fn new(name: impl Into<String>, categories: &[&str], kind: VariableKind) -> Self {
        Self {
            name: name.into(),
            categories: categories.iter().map(|c| c.to_string()).collect(),
            kind,
            likert: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.trim().is_empty() {
            return Err(IngestError::InvalidSchema("empty variable name".into()));
        }
        if self.categories.len() < 2 {
            return Err(IngestError::InvalidSchema(format!(
                "`{}` needs at least 2 categories",
                self.name
            )));
        }
        let mut seen = BTreeSet::new();
        for c in &self.categories {
            if c.trim().is_empty() {
                return Err(IngestError::InvalidSchema(format!(
                    "`{}` has an empty category label",
                    self.name
                )));
            }
            if !seen.insert(c.as_str()) {
                return Err(IngestError::InvalidSchema(format!(
                    "`{}` repeats category `{c}`",
                    self.name
                )));
            }
        }
        Ok(())
    }

    pub fn category_index(&self, label: &str) -> Option<usize> {
        self.categories.iter().position(|c| c == label)
    }
}

/// Validate a whole schema list: each variable valid, names unique.
pub fn validate_schema(schema: &[VariableSchema]) -> Result<()> {
    let mut names = BTreeSet::new();
    for var in schema {
        var.validate()?;
        if !names.insert(var.name.as_str()) {
            return Err(IngestError::InvalidSchema(format!(
                "duplicate variable `{}`",
                var.name
            )));
        }
    }
    Ok(())
}

pub fn load_schema(path: &Path) -> Result<Vec<VariableSchema>> {
    let schema: Vec<VariableSchema> = serde_json::from_reader(std::fs::File::open(path)?)?;
    validate_schema(&schema)?;
    Ok(schema)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingCode {
    Inapplicable,
    Refusal,
    DontKnow,
}

impl MissingCode {
    pub const ALL: [MissingCode; 3] = [Self::Inapplicable, Self::Refusal, Self::DontKnow];

    pub fn from_code(code: i64) -> Option<Self> {
        match code {
            -8 => Some(Self::Inapplicable),
            -2 => Some(Self::Refusal),
            -1 => Some(Self::DontKnow),
            _ => None,
        }
    }

    pub fn code(self) -> i64 {
        match self {
            Self::Inapplicable => -8,
            Self::Refusal => -2,
            Self::DontKnow => -1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Value {
    Category(usize),
    Missing(MissingCode),
}

impl Value {
    pub fn category(self) -> Option<usize> {
        match self {
            Value::Category(i) => Some(i),
            Value::Missing(_) => None,
        }
    }
}

/// Parse one cell against its variable. Exact category labels win over the
/// integer reading, so numeric labels such as `"1"` stay categories.
pub fn parse_cell(var: &VariableSchema, raw: &str) -> Option<Value> {
    let cell = raw.trim();
    if let Some(i) = var.category_index(cell) {
        return Some(Value::Category(i));
    }
    cell.parse::<i64>()
        .ok()
        .and_then(MissingCode::from_code)
        .map(Value::Missing)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurveyDataset {
    pub schema: Vec<VariableSchema>,
    /// One row per respondent, values in schema order.
    pub records: Vec<Vec<Value>>,
    pub provenance: String,
}

impl SurveyDataset {
    pub fn new(
        schema: Vec<VariableSchema>,
        records: Vec<Vec<Value>>,
        provenance: impl Into<String>,
    ) -> Result<Self> {
        validate_schema(&schema)?;
        for (r, row) in records.iter().enumerate() {
            if row.len() != schema.len() {
                return Err(IngestError::InvalidSchema(format!(
                    "row {} has {} values for {} variables",
                    r + 1,
                    row.len(),
                    schema.len()
                )));
            }
            for (var, value) in schema.iter().zip(row) {
                if let Value::Category(i) = value {
                    if *i >= var.categories.len() {
                        return Err(IngestError::InvalidValue {
                            row: r + 1,
                            column: var.name.clone(),
                            value: i.to_string(),
                        });
                    }
                }
            }
        }
        Ok(Self {
            schema,
            records,
            provenance: provenance.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn variable_index(&self, name: &str) -> Result<usize> {
        self.schema
            .iter()
            .position(|v| v.name == name)
            .ok_or_else(|| IngestError::UnknownVariable(name.to_string()))
    }

    pub fn variable(&self, name: &str) -> Result<&VariableSchema> {
        Ok(&self.schema[self.variable_index(name)?])
    }

    pub fn column(&self, name: &str) -> Result<Vec<Value>> {
        let idx = self.variable_index(name)?;
        Ok(self.records.iter().map(|r| r[idx]).collect())
    }

    /// Label of a cell as written to disk.
    pub fn cell_text(&self, row: usize, col: usize) -> String {
        match self.records[row][col] {
            Value::Category(i) => self.schema[col].categories[i].clone(),
            Value::Missing(code) => code.code().to_string(),
        }
    }

    fn category_counts(&self, idx: usize) -> Vec<usize> {
        let mut counts = vec![0usize; self.schema[idx].categories.len()];
        for row in &self.records {
            if let Value::Category(c) = row[idx] {
                counts[c] += 1;
            }
        }
        counts
    }
}

/// Read a comma-separated survey with a header row. Extra columns are ignored.
pub fn read_survey<R: Read>(
    reader: R,
    schema: &[VariableSchema],
    provenance: &str,
) -> Result<SurveyDataset> {
    validate_schema(schema)?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let positions = schema
        .iter()
        .map(|var| {
            headers
                .iter()
                .position(|h| h.trim() == var.name)
                .ok_or_else(|| IngestError::MissingColumn(var.name.clone()))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut records = Vec::new();
    for (r, row) in rdr.records().enumerate() {
        let row = row?;
        let mut values = Vec::with_capacity(schema.len());
        for (var, &pos) in schema.iter().zip(&positions) {
            let raw = row.get(pos).unwrap_or("");
            let value = parse_cell(var, raw).ok_or_else(|| IngestError::InvalidValue {
                row: r + 1,
                column: var.name.clone(),
                value: raw.to_string(),
            })?;
            values.push(value);
        }
        records.push(values);
    }
    if records.is_empty() {
        return Err(IngestError::EmptyDataset);
    }
    Ok(SurveyDataset {
        schema: schema.to_vec(),
        records,
        provenance: provenance.to_string(),
    })
}

pub fn load_survey(path: &Path, schema: &[VariableSchema]) -> Result<SurveyDataset> {
    let file = std::fs::File::open(path)?;
    read_survey(file, schema, &path.display().to_string())
}

/// Write in the same delimited format `read_survey` accepts.
pub fn write_survey<W: Write>(dataset: &SurveyDataset, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(dataset.schema.iter().map(|v| v.name.as_str()))?;
    for r in 0..dataset.len() {
        wtr.write_record((0..dataset.schema.len()).map(|c| dataset.cell_text(r, c)))?;
    }
    wtr.flush()?;
    Ok(())
}

/// Replace every missing code of `variable` with an independent draw from the
/// empirical distribution of its valid values.
pub fn impute_invalid(dataset: &SurveyDataset, variable: &str, seed: u64) -> Result<SurveyDataset> {
    let idx = dataset.variable_index(variable)?;
    let counts = dataset.category_counts(idx);
    if counts.iter().all(|&c| c == 0) {
        return Err(IngestError::AllMissing(variable.to_string()));
    }
    let sampler = WeightedIndex::new(&counts)
        .map_err(|e| IngestError::InvalidDistribution(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = dataset.clone();
    for row in &mut out.records {
        if let Value::Missing(_) = row[idx] {
            row[idx] = Value::Category(sampler.sample(&mut rng));
        }
    }
    Ok(out)
}

/// Which missing codes drop the whole record instead of being imputed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MissingPolicy {
    pub exclude: BTreeSet<MissingCode>,
}

impl Default for MissingPolicy {
    /// `-8` is a structural skip and is excluded; `-1`/`-2` are imputed.
    fn default() -> Self {
        Self {
            exclude: [MissingCode::Inapplicable].into_iter().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Preprocessed {
    pub dataset: SurveyDataset,
    pub excluded_records: usize,
    pub imputed_values: usize,
}

/// Apply the missing-value policy to every variable: drop records carrying an
/// excluded code, then impute the rest per variable with derived seeds.
pub fn apply_missing_policy(
    dataset: &SurveyDataset,
    policy: &MissingPolicy,
    seed: u64,
) -> Result<Preprocessed> {
    let kept: Vec<Vec<Value>> = dataset
        .records
        .iter()
        .filter(|row| {
            !row.iter()
                .any(|v| matches!(v, Value::Missing(code) if policy.exclude.contains(code)))
        })
        .cloned()
        .collect();
    let excluded_records = dataset.len() - kept.len();
    if kept.is_empty() {
        return Err(IngestError::EmptyDataset);
    }
    let mut current = SurveyDataset {
        schema: dataset.schema.clone(),
        records: kept,
        provenance: dataset.provenance.clone(),
    };
    let imputed_values = current
        .records
        .iter()
        .flatten()
        .filter(|v| matches!(v, Value::Missing(_)))
        .count();
    for (i, var) in dataset.schema.iter().enumerate() {
        let has_missing = current
            .records
            .iter()
            .any(|r| matches!(r[i], Value::Missing(_)));
        if has_missing {
            current = impute_invalid(&current, &var.name, seed.wrapping_add(i as u64))?;
        }
    }
    Ok(Preprocessed {
        dataset: current,
        excluded_records,
        imputed_values,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutlierRemoval {
    pub dataset: SurveyDataset,
    pub dropped: usize,
    pub dropped_categories: Vec<String>,
}

/// Drop records whose category for `variable` has empirical share below
/// `min_share`.
pub fn remove_outliers(
    dataset: &SurveyDataset,
    variable: &str,
    min_share: f64,
) -> Result<OutlierRemoval> {
    if !(0.0..1.0).contains(&min_share) {
        return Err(IngestError::InvalidThreshold(min_share));
    }
    let idx = dataset.variable_index(variable)?;
    if dataset
        .records
        .iter()
        .any(|r| matches!(r[idx], Value::Missing(_)))
    {
        return Err(IngestError::ContainsMissing(variable.to_string()));
    }
    if dataset.is_empty() {
        return Err(IngestError::EmptyDataset);
    }
    let counts = dataset.category_counts(idx);
    let total = dataset.len() as f64;
    let rare: Vec<bool> = counts
        .iter()
        .map(|&c| c > 0 && (c as f64 / total) < min_share)
        .collect();
    let records: Vec<Vec<Value>> = dataset
        .records
        .iter()
        .filter(|row| match row[idx] {
            Value::Category(c) => !rare[c],
            Value::Missing(_) => unreachable!(),
        })
        .cloned()
        .collect();
    if records.is_empty() {
        return Err(IngestError::EverythingRemoved(variable.to_string()));
    }
    let dropped_categories = rare
        .iter()
        .enumerate()
        .filter(|(_, r)| **r)
        .map(|(i, _)| dataset.schema[idx].categories[i].clone())
        .collect();
    Ok(OutlierRemoval {
        dropped: dataset.len() - records.len(),
        dataset: SurveyDataset {
            schema: dataset.schema.clone(),
            records,
            provenance: dataset.provenance.clone(),
        },
        dropped_categories,
    })
}

/// Empirical probability mass over the categories of one variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoricalDistribution {
    pub variable: String,
    pub mass: IndexMap<String, f64>,
    pub support_count: usize,
}

impl CategoricalDistribution {
    pub fn new(
        variable: impl Into<String>,
        mass: IndexMap<String, f64>,
        support_count: usize,
    ) -> Result<Self> {
        let dist = Self {
            variable: variable.into(),
            mass,
            support_count,
        };
        dist.validate()?;
        Ok(dist)
    }

    /// Normalise arbitrary non-negative weights.
    pub fn from_weights<'a>(
        variable: impl Into<String>,
        weights: impl IntoIterator<Item = (&'a str, f64)>,
    ) -> Result<Self> {
        let raw: Vec<(&str, f64)> = weights.into_iter().collect();
        let total: f64 = raw.iter().map(|(_, w)| w).sum();
        if !(total > 0.0) || raw.iter().any(|(_, w)| !(*w >= 0.0)) {
            return Err(IngestError::InvalidDistribution(
                "weights must be non-negative with a positive total".into(),
            ));
        }
        let mass = raw
            .iter()
            .map(|(k, w)| (k.to_string(), w / total))
            .collect();
        Self::new(variable, mass, total.round() as usize)
    }

    pub fn validate(&self) -> Result<()> {
        if self.mass.is_empty() {
            return Err(IngestError::InvalidDistribution(format!(
                "`{}` has no categories",
                self.variable
            )));
        }
        if self.mass.values().any(|p| !(*p >= 0.0)) {
            return Err(IngestError::InvalidDistribution(format!(
                "`{}` has a negative probability",
                self.variable
            )));
        }
        let total: f64 = self.mass.values().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(IngestError::InvalidDistribution(format!(
                "`{}` sums to {total}",
                self.variable
            )));
        }
        Ok(())
    }

    pub fn probability(&self, category: &str) -> f64 {
        self.mass.get(category).copied().unwrap_or(0.0)
    }

    /// Categories carrying positive mass.
    pub fn support(&self) -> Vec<&str> {
        self.mass
            .iter()
            .filter(|(_, p)| **p > 0.0)
            .map(|(c, _)| c.as_str())
            .collect()
    }
}

impl fmt::Display for CategoricalDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {{", self.variable)?;
        for (i, (c, p)) in self.mass.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}: {p:.4}")?;
        }
        write!(f, "}} (n={})", self.support_count)
    }
}

/// Empirical distribution of a fully valid variable. Only observed
/// categories appear, in schema order.
pub fn standardize(dataset: &SurveyDataset, variable: &str) -> Result<CategoricalDistribution> {
    let idx = dataset.variable_index(variable)?;
    if dataset
        .records
        .iter()
        .any(|r| matches!(r[idx], Value::Missing(_)))
    {
        return Err(IngestError::ContainsMissing(variable.to_string()));
    }
    if dataset.is_empty() {
        return Err(IngestError::EmptyDataset);
    }
    let counts = dataset.category_counts(idx);
    let n = dataset.len();
    let mass = dataset.schema[idx]
        .categories
        .iter()
        .zip(&counts)
        .filter(|(_, &c)| c > 0)
        .map(|(label, &c)| (label.clone(), c as f64 / n as f64))
        .collect();
    CategoricalDistribution::new(variable, mass, n)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> Vec<VariableSchema> {
        vec![
            VariableSchema::new("age", &["10 – 19", "20 – 29", "30 – 39"], VariableKind::Demographic),
            VariableSchema::new("qualification", &["Degree", "A-level", "None"], VariableKind::Demographic),
        ]
    }

    fn read(text: &str) -> Result<SurveyDataset> {
        read_survey(text.as_bytes(), &schema(), "fixture")
    }

    #[test]
    fn three_valid_rows() {
        let ds = read("age,qualification\n10 – 19,Degree\n20 – 29,None\n30 – 39,A-level\n").unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.records[1], vec![Value::Category(1), Value::Category(2)]);
    }

    #[test]
    fn dont_know_is_retained_as_missing() {
        let ds = read("age,qualification\n-1,Degree\n").unwrap();
        assert_eq!(ds.records[0][0], Value::Missing(MissingCode::DontKnow));
    }

    #[test]
    fn only_three_negative_codes_are_missing() {
        let accepted: Vec<i64> = (-20..0).filter(|c| MissingCode::from_code(*c).is_some()).collect();
        assert_eq!(accepted, vec![-8, -2, -1]);
        match read("age,qualification\n-5,Degree\n") {
            Err(IngestError::InvalidValue { row, column, value }) => {
                assert_eq!((row, column.as_str(), value.as_str()), (1, "age", "-5"));
            }
            other => panic!("expected InvalidValue, got {other:?}"),
        }
    }

    #[test]
    fn unknown_label_and_missing_column_and_empty() {
        assert!(matches!(
            read("age,qualification\n40 – 49,Degree\n"),
            Err(IngestError::InvalidValue { .. })
        ));
        assert!(matches!(read("age\n10 – 19\n"), Err(IngestError::MissingColumn(c)) if c == "qualification"));
        assert!(matches!(read("age,qualification\n"), Err(IngestError::EmptyDataset)));
    }

    #[test]
    fn schema_invariants() {
        let one = VariableSchema::new("x", &["a"], VariableKind::Opinion);
        assert!(one.validate().is_err());
        let dup = VariableSchema::new("x", &["a", "a"], VariableKind::Opinion);
        assert!(dup.validate().is_err());
        let blank = VariableSchema::new("x", &["a", " "], VariableKind::Opinion);
        assert!(blank.validate().is_err());
    }

    fn single(values: &[Value]) -> SurveyDataset {
        let schema = vec![VariableSchema::new("v", &["c1", "c2", "c3"], VariableKind::Opinion)];
        SurveyDataset::new(schema, values.iter().map(|v| vec![*v]).collect(), "t").unwrap()
    }

    #[test]
    fn imputation_without_missing_is_noop() {
        let ds = single(&[Value::Category(0), Value::Category(1), Value::Category(2)]);
        for seed in 0..5 {
            assert_eq!(impute_invalid(&ds, "v", seed).unwrap(), ds);
        }
    }

    #[test]
    fn imputation_of_all_missing_fails() {
        let ds = single(&[
            Value::Missing(MissingCode::Inapplicable),
            Value::Missing(MissingCode::Refusal),
            Value::Missing(MissingCode::DontKnow),
        ]);
        assert!(matches!(impute_invalid(&ds, "v", 1), Err(IngestError::AllMissing(_))));
    }

    #[test]
    fn imputation_only_touches_missing_slots() {
        let ds = single(&[
            Value::Category(0),
            Value::Category(0),
            Value::Category(1),
            Value::Missing(MissingCode::DontKnow),
        ]);
        let out = impute_invalid(&ds, "v", 42).unwrap();
        assert_eq!(&out.records[..3], &ds.records[..3]);
        assert!(matches!(out.records[3][0], Value::Category(0) | Value::Category(1)));
        assert_eq!(out, impute_invalid(&ds, "v", 42).unwrap());
    }

    #[test]
    fn missing_policy_excludes_inapplicable_by_default() {
        let ds = single(&[
            Value::Category(0),
            Value::Missing(MissingCode::Inapplicable),
            Value::Missing(MissingCode::Refusal),
        ]);
        let out = apply_missing_policy(&ds, &MissingPolicy::default(), 3).unwrap();
        assert_eq!(out.excluded_records, 1);
        assert_eq!(out.imputed_values, 1);
        assert_eq!(out.dataset.records, vec![vec![Value::Category(0)], vec![Value::Category(0)]]);
    }

    fn shares_fixture() -> SurveyDataset {
        // 30 / 19 / 1 of 50 records: shares 0.60, 0.38, 0.02
        let mut values = vec![Value::Category(0); 30];
        values.extend(vec![Value::Category(1); 19]);
        values.push(Value::Category(2));
        single(&values)
    }

    #[test]
    fn outliers_below_share_are_dropped() {
        let out = remove_outliers(&shares_fixture(), "v", 0.05).unwrap();
        assert_eq!(out.dropped, 1);
        assert_eq!(out.dropped_categories, vec!["c3".to_string()]);
        assert_eq!(out.dataset.len(), 49);
    }

    #[test]
    fn zero_share_threshold_keeps_everything() {
        let ds = shares_fixture();
        let out = remove_outliers(&ds, "v", 0.0).unwrap();
        assert_eq!(out.dropped, 0);
        assert_eq!(out.dataset, ds);
    }

    #[test]
    fn uniform_shares_above_threshold_remove_everything() {
        let ds = single(&[Value::Category(0), Value::Category(1)]);
        assert!(matches!(
            remove_outliers(&ds, "v", 0.6),
            Err(IngestError::EverythingRemoved(_))
        ));
        assert!(matches!(remove_outliers(&ds, "v", 1.0), Err(IngestError::InvalidThreshold(_))));
    }

    #[test]
    fn outliers_require_imputed_column() {
        let ds = single(&[Value::Category(0), Value::Missing(MissingCode::DontKnow)]);
        assert!(matches!(remove_outliers(&ds, "v", 0.1), Err(IngestError::ContainsMissing(_))));
    }

    #[test]
    fn standardize_counts() {
        let ds = single(&[Value::Category(0), Value::Category(0), Value::Category(1)]);
        let d = standardize(&ds, "v").unwrap();
        assert_eq!(d.support_count, 3);
        assert_eq!(d.mass.len(), 2);
        assert!((d.probability("c1") - 2.0 / 3.0).abs() < 1e-12);
        assert!((d.probability("c2") - 1.0 / 3.0).abs() < 1e-12);

        let one = single(&[Value::Category(2); 4]);
        let d = standardize(&one, "v").unwrap();
        assert_eq!(d.mass.len(), 1);
        assert_eq!(d.probability("c3"), 1.0);
    }

    #[test]
    fn distribution_rejects_bad_mass() {
        let mass: IndexMap<String, f64> = [("a".to_string(), 0.5), ("b".to_string(), 0.4)].into_iter().collect();
        assert!(CategoricalDistribution::new("x", mass, 10).is_err());
        let mass: IndexMap<String, f64> = [("a".to_string(), 1.5), ("b".to_string(), -0.5)].into_iter().collect();
        assert!(CategoricalDistribution::new("x", mass, 10).is_err());
    }
}
