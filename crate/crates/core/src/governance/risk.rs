use std::path::Path;

use serde::{Deserialize, Serialize};

use super::GovernanceError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sector {
    Healthcare,
    LawEnforcement,
    Finance,
    Education,
    Retail,
    Research,
    Other,
}

/// Every flag is required when deserializing; there is no unknown state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UseCaseDescriptor {
    pub sector: Sector,
    pub automated_decision_affecting_rights: bool,
    pub mass_surveillance_capability: bool,
    pub human_oversight_declared: bool,
    pub personal_data_processed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Tier {
    Unacceptable,
    High,
    Limited,
    Minimal,
}

impl Tier {
    pub fn requires_oversight(self) -> bool {
        matches!(self, Tier::Unacceptable | Tier::High)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RiskTier {
    pub tier: Tier,
    /// Ids of every rule that matched, in table order; the first set the tier.
    pub rationale: Vec<String>,
}

/// Conjunction of the listed tests; an empty condition always matches.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleCondition {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sector_in: Option<Vec<Sector>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub automated_decision_affecting_rights: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mass_surveillance_capability: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub human_oversight_declared: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub personal_data_processed: Option<bool>,
}

impl RuleCondition {
    pub fn matches(&self, d: &UseCaseDescriptor) -> bool {
        let flag = |want: Option<bool>, have: bool| want.map_or(true, |w| w == have);
        self.sector_in.as_ref().map_or(true, |s| s.contains(&d.sector))
            && flag(self.automated_decision_affecting_rights, d.automated_decision_affecting_rights)
            && flag(self.mass_surveillance_capability, d.mass_surveillance_capability)
            && flag(self.human_oversight_declared, d.human_oversight_declared)
            && flag(self.personal_data_processed, d.personal_data_processed)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RiskRule {
    pub id: String,
    pub tier: Tier,
    #[serde(default)]
    pub when: RuleCondition,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleTable {
    pub rules: Vec<RiskRule>,
}

impl Default for RuleTable {
    fn default() -> Self {
        let rule = |id: &str, tier, when| RiskRule { id: id.into(), tier, when };
        Self {
            rules: vec![
                rule(
                    "mass-surveillance",
                    Tier::Unacceptable,
                    RuleCondition {
                        mass_surveillance_capability: Some(true),
                        ..RuleCondition::default()
                    },
                ),
                rule(
                    "sensitive-sector-automated-decision",
                    Tier::High,
                    RuleCondition {
                        sector_in: Some(vec![Sector::Healthcare, Sector::LawEnforcement, Sector::Finance]),
                        automated_decision_affecting_rights: Some(true),
                        ..RuleCondition::default()
                    },
                ),
                rule(
                    "personal-data-no-rights-impact",
                    Tier::Limited,
                    RuleCondition {
                        personal_data_processed: Some(true),
                        automated_decision_affecting_rights: Some(false),
                        ..RuleCondition::default()
                    },
                ),
                rule("fallback-minimal", Tier::Minimal, RuleCondition::default()),
            ],
        }
    }
}

impl RuleTable {
    pub fn load(path: &Path) -> Result<Self, GovernanceError> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// First matching rule sets the tier.
pub fn classify_risk(descriptor: &UseCaseDescriptor, rules: &RuleTable) -> Result<RiskTier, GovernanceError> {
    if rules.rules.is_empty() {
        return Err(GovernanceError::EmptyRuleTable);
    }
    let fired: Vec<&RiskRule> = rules.rules.iter().filter(|r| r.when.matches(descriptor)).collect();
    let first = fired.first().ok_or(GovernanceError::NoRuleMatched)?;
    Ok(RiskTier {
        tier: first.tier,
        rationale: fired.iter().map(|r| r.id.clone()).collect(),
    })
}
