//! (k, k^m)-anonymization of transactional code-set records.
//!
//! A cluster is a list of records, each a set of [`Code`]s. The greedy
//! [`gendiag`] routine merges codes that share a utility constraint until
//! every itemset of at most `m` codes is supported by zero or at least `k`
//! records, suppressing codes when no legal merge remains.
//! [`verify_km_anonymity`] checks the result by exhaustive enumeration.

mod code;
mod gendiag;
mod itemsets;
mod verify;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use code::{Code, Itemset};
pub use gendiag::{gendiag, replay, Action, AnonymizationOutcome, OutcomeDocument};
pub use itemsets::{find_unprotected_itemsets, support};
pub use verify::verify_km_anonymity;

/// Refuse enumerations larger than this many candidate itemsets.
pub const DEFAULT_MAX_CANDIDATES: usize = 1_000_000;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AnonymizeError {
    #[error("enumeration needs {needed} candidate itemsets, cap is {cap}")]
    CombinatorialBudgetExceeded { needed: usize, cap: usize },
    #[error("utility loss is only defined for generalized codes, got `{0}`")]
    NotGeneralized(Code),
    #[error("invalid code label `{0}`")]
    InvalidLabel(String),
    #[error("code `{0}` is outside the code universe")]
    OutsideUniverse(String),
    #[error("record {0} holds overlapping codes")]
    OverlappingCodes(usize),
    #[error("utility constraints overlap on `{0}`")]
    OverlappingConstraints(String),
    #[error("invalid parameters: k and m must be at least 1")]
    InvalidParams,
}

pub type Result<T> = std::result::Result<T, AnonymizeError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnonymizationParams {
    /// Minimum number of supporting records per protected itemset.
    pub k: usize,
    /// Largest itemset size protected.
    pub m: usize,
    #[serde(default = "default_cap")]
    pub max_candidates: usize,
}

fn default_cap() -> usize {
    DEFAULT_MAX_CANDIDATES
}

impl AnonymizationParams {
    pub fn new(k: usize, m: usize) -> Result<Self> {
        let params = Self {
            k,
            m,
            max_candidates: DEFAULT_MAX_CANDIDATES,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.m == 0 {
            return Err(AnonymizeError::InvalidParams);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordCluster {
    pub records: Vec<BTreeSet<Code>>,
    pub code_universe: BTreeSet<String>,
}

impl RecordCluster {
    pub fn new(records: Vec<BTreeSet<Code>>, code_universe: BTreeSet<String>) -> Result<Self> {
        let cluster = Self {
            records,
            code_universe,
        };
        cluster.validate()?;
        Ok(cluster)
    }

    /// Universe taken as every leaf that occurs in the records.
    pub fn from_records(records: Vec<BTreeSet<Code>>) -> Result<Self> {
        let universe = records
            .iter()
            .flatten()
            .flat_map(|c| c.leaves().map(str::to_string).collect::<Vec<_>>())
            .collect();
        Self::new(records, universe)
    }

    /// Build from label lists, e.g. `[["a"], ["(a|b)"]]`.
    pub fn from_labels<S: AsRef<str>>(
        records: &[Vec<S>],
        universe: Option<&[S]>,
    ) -> Result<Self> {
        let parsed = records
            .iter()
            .map(|r| r.iter().map(|l| l.as_ref().parse::<Code>()).collect())
            .collect::<Result<Vec<BTreeSet<Code>>>>()?;
        match universe {
            Some(u) => Self::new(parsed, u.iter().map(|l| l.as_ref().to_string()).collect()),
            None => Self::from_records(parsed),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (i, record) in self.records.iter().enumerate() {
            let mut seen = BTreeSet::new();
            for code in record {
                for leaf in code.leaves() {
                    if !self.code_universe.contains(leaf) {
                        return Err(AnonymizeError::OutsideUniverse(leaf.to_string()));
                    }
                    if !seen.insert(leaf) {
                        return Err(AnonymizeError::OverlappingCodes(i));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Distinct codes occurring in at least one record.
    pub fn present_codes(&self) -> BTreeSet<Code> {
        self.records.iter().flatten().cloned().collect()
    }

    /// Covered-leaf fraction of a generalized code.
    pub fn utility_loss(&self, generalized: &Code) -> Result<f64> {
        match generalized {
            Code::Leaf(_) => Err(AnonymizeError::NotGeneralized(generalized.clone())),
            Code::Generalized(leaves) => {
                Ok(leaves.len() as f64 / self.code_universe.len().max(1) as f64)
            }
        }
    }

    pub fn record_labels(&self) -> Vec<Vec<String>> {
        self.records
            .iter()
            .map(|r| r.iter().map(Code::to_string).collect())
            .collect()
    }
}

/// Disjoint groups of leaf labels that may be generalized together.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UtilityConstraintSet {
    pub constraints: Vec<BTreeSet<String>>,
}

impl UtilityConstraintSet {
    pub fn new(constraints: Vec<BTreeSet<String>>) -> Result<Self> {
        let set = Self { constraints };
        set.validate(None)?;
        Ok(set)
    }

    pub fn from_labels(groups: &[&[&str]]) -> Result<Self> {
        Self::new(
            groups
                .iter()
                .map(|g| g.iter().map(|s| s.to_string()).collect())
                .collect(),
        )
    }

    pub fn validate(&self, universe: Option<&BTreeSet<String>>) -> Result<()> {
        let mut seen = BTreeSet::new();
        for constraint in &self.constraints {
            for leaf in constraint {
                code::check_label(leaf)?;
                if !seen.insert(leaf) {
                    return Err(AnonymizeError::OverlappingConstraints(leaf.clone()));
                }
                if let Some(u) = universe {
                    if !u.contains(leaf) {
                        return Err(AnonymizeError::OutsideUniverse(leaf.clone()));
                    }
                }
            }
        }
        Ok(())
    }

    /// Index of the constraint containing every leaf of `code`.
    pub fn constraint_of(&self, code: &Code) -> Option<usize> {
        self.constraints
            .iter()
            .position(|c| code.leaves().all(|l| c.contains(l)))
    }
}

/// On-disk cluster document: records as arrays of code labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub universe: Option<Vec<String>>,
    pub records: Vec<Vec<String>>,
}

impl ClusterDocument {
    pub fn into_cluster(self) -> Result<RecordCluster> {
        RecordCluster::from_labels(&self.records, self.universe.as_deref())
    }

    pub fn from_cluster(cluster: &RecordCluster) -> Self {
        Self {
            universe: Some(cluster.code_universe.iter().cloned().collect()),
            records: cluster.record_labels(),
        }
    }
}
