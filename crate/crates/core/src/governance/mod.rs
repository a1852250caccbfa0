//! Compliance artifacts wrapped around each run: risk tier, pillar
//! scorecard, transformation checklist, impact assessment and audit log.

pub mod audit;
mod dpia;
mod risk;
mod scorecard;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use audit::{audit_append, AuditEntry, AuditError, AuditLog, GENESIS_HASH};
pub use dpia::{generate_dpia, AnonymizationDigest, DpiaInputs, DpiaReport, Verdict, OVERSIGHT_REQUIRED_NOTE};
pub use risk::{classify_risk, RiskRule, RiskTier, RuleCondition, RuleTable, Sector, Tier, UseCaseDescriptor};
pub use scorecard::{pillar_scorecard, ControlChecks, PillarScorecard, Rating, RunStats, ScorecardInputs, AMBER_AT, GREEN_AT};

#[derive(Debug, Error)]
pub enum GovernanceError {
    #[error("risk rule table is empty")]
    EmptyRuleTable,
    #[error("no risk rule matched the use case")]
    NoRuleMatched,
    #[error("scorecard needs at least one metric report")]
    NoMetrics,
    #[error("{0:?} tier requires a human-oversight statement")]
    MissingOversightStatement(Tier),
    #[error("checklist is missing dimension {0:?}")]
    IncompleteChecklist(Dimension),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dimension {
    Strategy,
    SupplyChain,
    Governance,
    Processes,
    Measurement,
    CultureAndSkills,
    Data,
    Technology,
}

impl Dimension {
    pub const ALL: [Dimension; 8] = [
        Dimension::Strategy,
        Dimension::SupplyChain,
        Dimension::Governance,
        Dimension::Processes,
        Dimension::Measurement,
        Dimension::CultureAndSkills,
        Dimension::Data,
        Dimension::Technology,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Dimension::Strategy => "Strategy",
            Dimension::SupplyChain => "Supply Chain",
            Dimension::Governance => "Governance",
            Dimension::Processes => "Processes",
            Dimension::Measurement => "Measurement",
            Dimension::CultureAndSkills => "Culture and Skills",
            Dimension::Data => "Data",
            Dimension::Technology => "Technology",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChecklistStatus {
    Addressed,
    Partial,
    Unaddressed,
    NotApplicable,
}

/// Self-declared attestation; the toolkit records it, never computes it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TransformationChecklist {
    pub answers: BTreeMap<Dimension, ChecklistStatus>,
}

impl TransformationChecklist {
    pub fn uniform(status: ChecklistStatus) -> Self {
        Self {
            answers: Dimension::ALL.iter().map(|&d| (d, status)).collect(),
        }
    }

    pub fn validate(&self) -> Result<(), GovernanceError> {
        match Dimension::ALL.iter().find(|d| !self.answers.contains_key(d)) {
            Some(&d) => Err(GovernanceError::IncompleteChecklist(d)),
            None => Ok(()),
        }
    }
}
