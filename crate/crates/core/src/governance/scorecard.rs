use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::GovernanceError;
use crate::metrics::MetricReport;

pub const ETHICS_FORMULA: &str = "ethics = mean of per-question NMI";
pub const DESIRABILITY_FORMULA: &str = "desirability = mean of per-question weighted Jaccard";
pub const CONTROL_FORMULA: &str =
    "control = satisfied / 3 over {human oversight declared, audit chain valid, stub reproducibility verified}";
pub const VIABILITY_FORMULA: &str =
    "viability = min(1, runtime budget / runtime, cost budget / cost); unset budgets are ignored";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControlChecks {
    pub human_oversight_declared: bool,
    pub audit_chain_valid: bool,
    pub reproducibility_verified: bool,
}

impl ControlChecks {
    pub fn fraction(&self) -> f64 {
        let met = [self.human_oversight_declared, self.audit_chain_valid, self.reproducibility_verified]
            .iter()
            .filter(|&&b| b)
            .count();
        met as f64 / 3.0
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub runtime_seconds: f64,
    #[serde(default)]
    pub cost: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub runtime_budget_seconds: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost_budget: Option<f64>,
}

impl RunStats {
    pub fn viability(&self) -> f64 {
        let ratio = |budget: Option<f64>, used: f64| match budget {
            Some(b) if used > 0.0 => (b / used).max(0.0),
            _ => 1.0,
        };
        ratio(self.runtime_budget_seconds, self.runtime_seconds)
            .min(ratio(self.cost_budget, self.cost))
            .min(1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorecardInputs {
    pub nmi: IndexMap<String, f64>,
    pub jaccard: IndexMap<String, f64>,
    pub checks: ControlChecks,
    pub run_stats: RunStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PillarScorecard {
    pub ethics: f64,
    pub control: f64,
    pub viability: f64,
    pub desirability: f64,
    pub inputs: ScorecardInputs,
    pub formulas: Vec<String>,
}

/// Lower bounds of the traffic-light bands, applied to every pillar alike.
pub const GREEN_AT: f64 = 0.7;
pub const AMBER_AT: f64 = 0.4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rating {
    Green,
    Amber,
    Red,
}

impl Rating {
    pub fn of(score: f64) -> Self {
        if score >= GREEN_AT {
            Rating::Green
        } else if score >= AMBER_AT {
            Rating::Amber
        } else {
            Rating::Red
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Rating::Green => "green",
            Rating::Amber => "amber",
            Rating::Red => "red",
        }
    }
}

impl PillarScorecard {
    /// (name, score) in fixed order.
    pub fn pillars(&self) -> [(&'static str, f64); 4] {
        [
            ("Ethics", self.ethics),
            ("Control", self.control),
            ("Viability", self.viability),
            ("Desirability", self.desirability),
        ]
    }

    pub fn all_green(&self) -> bool {
        self.pillars().iter().all(|&(_, v)| Rating::of(v) == Rating::Green)
    }
}

pub fn pillar_scorecard(
    metrics: &[MetricReport],
    checks: ControlChecks,
    run_stats: RunStats,
) -> Result<PillarScorecard, GovernanceError> {
    if metrics.is_empty() {
        return Err(GovernanceError::NoMetrics);
    }
    let n = metrics.len() as f64;
    let unit = |v: f64| v.clamp(0.0, 1.0);
    Ok(PillarScorecard {
        ethics: unit(metrics.iter().map(|m| m.nmi).sum::<f64>() / n),
        desirability: unit(metrics.iter().map(|m| m.jaccard).sum::<f64>() / n),
        control: checks.fraction(),
        viability: run_stats.viability(),
        inputs: ScorecardInputs {
            nmi: metrics.iter().map(|m| (m.question_id.clone(), m.nmi)).collect(),
            jaccard: metrics.iter().map(|m| (m.question_id.clone(), m.jaccard)).collect(),
            checks,
            run_stats,
        },
        formulas: [ETHICS_FORMULA, CONTROL_FORMULA, VIABILITY_FORMULA, DESIRABILITY_FORMULA]
            .map(String::from)
            .to_vec(),
    })
}
