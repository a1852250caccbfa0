use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{
    GovernanceError, PillarScorecard, Rating, RiskTier, Tier, TransformationChecklist, UseCaseDescriptor, AMBER_AT, GREEN_AT,
};
use crate::anonymizer::{AnonymizationOutcome, AnonymizationParams};
use crate::digest::sha256_hex;
use crate::metrics::MetricReport;

pub const OVERSIGHT_REQUIRED_NOTE: &str =
    "High and Unacceptable tiers require a human-oversight statement before a report can be issued.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Proceed,
    ProceedWithRemediation,
    DoNotProceed,
}

impl Verdict {
    pub fn label(self) -> &'static str {
        match self {
            Verdict::Proceed => "proceed",
            Verdict::ProceedWithRemediation => "proceed with remediation",
            Verdict::DoNotProceed => "do not proceed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnonymizationDigest {
    pub k: usize,
    pub m: usize,
    pub records: usize,
    pub generalizations: usize,
    pub suppressed: usize,
    pub verified: bool,
    /// SHA-256 of the outcome document JSON.
    pub outcome_sha256: String,
}

impl AnonymizationDigest {
    pub fn new(outcome: &AnonymizationOutcome, params: &AnonymizationParams, verified: bool) -> Self {
        let doc = serde_json::to_string(&outcome.to_document()).expect("outcome document serializes");
        Self {
            k: params.k,
            m: params.m,
            records: outcome.cluster.len(),
            generalizations: outcome.generalizations(),
            suppressed: outcome.suppressed,
            verified,
            outcome_sha256: sha256_hex(doc.as_bytes()),
        }
    }
}

/// Everything a report is assembled from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DpiaInputs {
    pub use_case: UseCaseDescriptor,
    pub tier: RiskTier,
    pub oversight_statement: Option<String>,
    pub minimization_findings: Vec<String>,
    pub anonymization_summary: Option<AnonymizationDigest>,
    pub scorecard: PillarScorecard,
    pub checklist: TransformationChecklist,
    pub metric_reports: Vec<MetricReport>,
    pub timestamp: String,
    pub toolkit_version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DpiaReport {
    pub use_case: UseCaseDescriptor,
    pub tier: RiskTier,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oversight_statement: Option<String>,
    pub minimization_findings: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anonymization_summary: Option<AnonymizationDigest>,
    pub scorecard: PillarScorecard,
    pub checklist: TransformationChecklist,
    pub metric_reports: Vec<MetricReport>,
    pub verdict: Verdict,
    pub timestamp: String,
    pub toolkit_version: String,
}

/// Unacceptable never proceeds; minimization findings demand remediation.
pub fn generate_dpia(inputs: DpiaInputs) -> Result<DpiaReport, GovernanceError> {
    let has_statement = inputs
        .oversight_statement
        .as_deref()
        .is_some_and(|s| !s.trim().is_empty());
    if inputs.tier.tier.requires_oversight() && !has_statement {
        return Err(GovernanceError::MissingOversightStatement(inputs.tier.tier));
    }
    inputs.checklist.validate()?;
    let verdict = if inputs.tier.tier == Tier::Unacceptable {
        Verdict::DoNotProceed
    } else if !inputs.minimization_findings.is_empty() {
        Verdict::ProceedWithRemediation
    } else {
        Verdict::Proceed
    };
    Ok(DpiaReport {
        use_case: inputs.use_case,
        tier: inputs.tier,
        oversight_statement: inputs.oversight_statement,
        minimization_findings: inputs.minimization_findings,
        anonymization_summary: inputs.anonymization_summary,
        scorecard: inputs.scorecard,
        checklist: inputs.checklist,
        metric_reports: inputs.metric_reports,
        verdict,
        timestamp: inputs.timestamp,
        toolkit_version: inputs.toolkit_version,
    })
}

impl DpiaReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, GovernanceError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_markdown(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# Data Protection Impact Assessment\n");
        let _ = writeln!(s, "- Generated: {}", self.timestamp);
        let _ = writeln!(s, "- Toolkit version: {}", self.toolkit_version);
        let _ = writeln!(s, "- Verdict: **{}**\n", self.verdict.label());

        let _ = writeln!(s, "## Use case\n");
        let u = &self.use_case;
        let _ = writeln!(s, "| Field | Value |\n|---|---|");
        let _ = writeln!(s, "| Sector | {} |", serde_json::to_value(u.sector).expect("enum").as_str().unwrap_or(""));
        let _ = writeln!(s, "| Automated decision affecting rights | {} |", u.automated_decision_affecting_rights);
        let _ = writeln!(s, "| Mass surveillance capability | {} |", u.mass_surveillance_capability);
        let _ = writeln!(s, "| Human oversight declared | {} |", u.human_oversight_declared);
        let _ = writeln!(s, "| Personal data processed | {} |\n", u.personal_data_processed);

        let _ = writeln!(s, "## Risk tier\n");
        let _ = writeln!(s, "Tier: **{:?}** (fired rules: {})\n", self.tier.tier, self.tier.rationale.join(", "));
        match &self.oversight_statement {
            Some(stmt) => {
                let _ = writeln!(s, "Human oversight: {stmt}\n");
            }
            None => {
                let _ = writeln!(s, "Human oversight: none declared\n");
            }
        }

        let _ = writeln!(s, "## Data minimization\n");
        if self.minimization_findings.is_empty() {
            let _ = writeln!(s, "Every collected profiling variable is used.\n");
        } else {
            for v in &self.minimization_findings {
                let _ = writeln!(s, "- `{v}` is collected but never used in prompts");
            }
            s.push('\n');
        }

        if let Some(a) = &self.anonymization_summary {
            let _ = writeln!(s, "## Anonymization\n");
            let _ = writeln!(
                s,
                "k = {}, m = {}; {} records, {} generalizations, {} suppressed codes; verified: {}; outcome sha256 `{}`\n",
                a.k, a.m, a.records, a.generalizations, a.suppressed, a.verified, a.outcome_sha256
            );
        }

        let c = &self.scorecard;
        let _ = writeln!(s, "## Pillar scorecard\n");
        let _ = writeln!(s, "| Pillar | Score | Rating |\n|---|---|---|");
        for (name, v) in c.pillars() {
            let _ = writeln!(s, "| {name} | {v:.4} | {} |", Rating::of(v).label());
        }
        s.push('\n');
        let _ = writeln!(s, "- ratings: green at {GREEN_AT} and above, amber at {AMBER_AT} and above, red below");
        for f in &c.formulas {
            let _ = writeln!(s, "- {f}");
        }
        s.push('\n');

        let _ = writeln!(s, "## Transformation checklist\n");
        let _ = writeln!(s, "| Dimension | Status |\n|---|---|");
        for (d, status) in &self.checklist.answers {
            let status = serde_json::to_value(status).expect("enum");
            let _ = writeln!(s, "| {} | {} |", d.label(), status.as_str().unwrap_or(""));
        }
        s.push('\n');

        let _ = writeln!(s, "## Alignment metrics\n");
        let _ = writeln!(s, "| Question | Chi-Square Test | Jaccard Index | Mutual Information | n | Unparseable |");
        let _ = writeln!(s, "|---|---|---|---|---|---|");
        for m in &self.metric_reports {
            let _ = writeln!(
                s,
                "| {} | {:.4} | {:.4} | {:.4} | {} | {} |",
                m.question_id, m.chi_square, m.jaccard, m.nmi, m.n_observed, m.unparseable
            );
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::governance::{classify_risk, pillar_scorecard, ChecklistStatus, ControlChecks, RuleTable, RunStats, Sector};

    fn metric() -> MetricReport {
        MetricReport {
            question_id: "pollution".into(),
            chi_square: 0.1234,
            jaccard: 0.99,
            nmi: 0.98,
            n_observed: 100,
            n_expected: 100,
            unparseable: 0,
            jaccard_bucketed: Some(0.99),
        }
    }

    fn inputs(use_case: UseCaseDescriptor) -> DpiaInputs {
        DpiaInputs {
            use_case,
            tier: classify_risk(&use_case, &RuleTable::default()).unwrap(),
            oversight_statement: None,
            minimization_findings: vec![],
            anonymization_summary: None,
            scorecard: pillar_scorecard(&[metric()], ControlChecks::default(), RunStats::default()).unwrap(),
            checklist: TransformationChecklist::uniform(ChecklistStatus::Addressed),
            metric_reports: vec![metric()],
            timestamp: "2026-01-01T00:00:00Z".into(),
            toolkit_version: "0.1.0".into(),
        }
    }

    fn minimal() -> UseCaseDescriptor {
        UseCaseDescriptor {
            sector: Sector::Research,
            automated_decision_affecting_rights: false,
            mass_surveillance_capability: false,
            human_oversight_declared: false,
            personal_data_processed: false,
        }
    }

    #[test]
    fn minimal_tier_proceeds() {
        let r = generate_dpia(inputs(minimal())).unwrap();
        assert_eq!(r.verdict, Verdict::Proceed);
        assert!(r.minimization_findings.is_empty());
        assert!(r.to_markdown().contains("Verdict: **proceed**"));
    }

    #[test]
    fn findings_demand_remediation() {
        let mut i = inputs(minimal());
        i.minimization_findings = vec!["ethnicity".into()];
        let r = generate_dpia(i).unwrap();
        assert_eq!(r.verdict, Verdict::ProceedWithRemediation);
        assert!(r.to_markdown().contains("`ethnicity`"));
    }

    #[test]
    fn high_tier_needs_oversight_statement() {
        let mut d = minimal();
        d.sector = Sector::Healthcare;
        d.automated_decision_affecting_rights = true;
        assert!(matches!(generate_dpia(inputs(d)), Err(GovernanceError::MissingOversightStatement(Tier::High))));
        let mut i = inputs(d);
        i.oversight_statement = Some("   ".into());
        assert!(generate_dpia(i).is_err());
        let mut i = inputs(d);
        i.oversight_statement = Some("Clinician signs off every decision".into());
        assert_eq!(generate_dpia(i).unwrap().verdict, Verdict::Proceed);
    }

    #[test]
    fn unacceptable_never_proceeds() {
        let mut d = minimal();
        d.mass_surveillance_capability = true;
        let mut i = inputs(d);
        i.oversight_statement = Some("Board review".into());
        assert_eq!(generate_dpia(i).unwrap().verdict, Verdict::DoNotProceed);
    }

    #[test]
    fn json_roundtrip() {
        let r = generate_dpia(inputs(minimal())).unwrap();
        assert_eq!(DpiaReport::from_json(&r.to_json()).unwrap(), r);
    }
}
