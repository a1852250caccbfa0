//! Stakeholder profiles and prompt rendering.
//!
//! Profiles are drawn variable by variable from standardized marginals and
//! rendered through a [`PromptTemplate`]: a preamble, one sub-prompt per
//! profiling variable, the question, and an answer instruction that lists
//! the permitted scale and the word limit.

use std::collections::BTreeSet;

use indexmap::IndexMap;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::digest::sha256_hex;
use crate::survey::{CategoricalDistribution, VariableKind, VariableSchema};

pub const CATEGORY_PLACEHOLDER: &str = "{category}";
pub const QUESTION_PLACEHOLDER: &str = "{question}";

#[derive(Debug, Error, PartialEq)]
pub enum ProfileError {
    #[error("profile lacks templated variable `{0}`")]
    MissingVariable(String),
    #[error("invalid template: {0}")]
    InvalidTemplate(String),
    #[error("invalid profile schema: {0}")]
    InvalidSchema(String),
    #[error("invalid question bank: {0}")]
    InvalidQuestion(String),
    #[error("sample size must be at least 1")]
    InvalidSampleSize,
    #[error("invalid distribution for `{0}`")]
    InvalidDistribution(String),
}

pub type Result<T> = std::result::Result<T, ProfileError>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProfileSchema {
    pub variables: Vec<VariableSchema>,
}

impl ProfileSchema {
    pub fn new(variables: Vec<VariableSchema>) -> Result<Self> {
        if variables.is_empty() {
            return Err(ProfileError::InvalidSchema("no profiling variables".into()));
        }
        let mut names = BTreeSet::new();
        for v in &variables {
            if v.kind != VariableKind::Demographic {
                return Err(ProfileError::InvalidSchema(format!(
                    "`{}` is not a demographic variable",
                    v.name
                )));
            }
            if !names.insert(v.name.as_str()) {
                return Err(ProfileError::InvalidSchema(format!("duplicate `{}`", v.name)));
            }
        }
        Ok(Self { variables })
    }

    /// The demographic subset of a survey schema, in schema order.
    pub fn from_survey(schema: &[VariableSchema]) -> Result<Self> {
        Self::new(
            schema
                .iter()
                .filter(|v| v.kind == VariableKind::Demographic)
                .cloned()
                .collect(),
        )
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.variables.iter().map(|v| v.name.as_str())
    }
}

/// Variable → category label, in schema order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Profile {
    pub assignment: IndexMap<String, String>,
}

impl Profile {
    pub fn get(&self, variable: &str) -> Option<&str> {
        self.assignment.get(variable).map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub id: String,
    pub preamble: String,
    /// Variable → pattern containing `{category}` once.
    pub sub_prompt_patterns: IndexMap<String, String>,
    /// Pattern containing `{question}` once.
    pub question_pattern: String,
    pub answer_instruction: String,
    pub max_answer_words: usize,
}

impl PromptTemplate {
    pub fn validate(&self) -> Result<()> {
        for (var, pattern) in &self.sub_prompt_patterns {
            if pattern.matches(CATEGORY_PLACEHOLDER).count() != 1 {
                return Err(ProfileError::InvalidTemplate(format!(
                    "sub-prompt for `{var}` must contain {CATEGORY_PLACEHOLDER} exactly once"
                )));
            }
        }
        if self.question_pattern.matches(QUESTION_PLACEHOLDER).count() != 1 {
            return Err(ProfileError::InvalidTemplate(format!(
                "question pattern must contain {QUESTION_PLACEHOLDER} exactly once"
            )));
        }
        if self.max_answer_words == 0 {
            return Err(ProfileError::InvalidTemplate("answer word limit must be at least 1".into()));
        }
        Ok(())
    }

    /// Template for the four household-survey profiling variables.
    pub fn survey_default() -> Self {
        let patterns = [
            ("age", "You are aged {category}."),
            ("qualification", "Your highest qualification is {category}."),
            ("ethnicity", "Your ethnic group is {category}."),
            ("job", "Your current job is {category}."),
        ];
        Self {
            id: "survey-default-v1".into(),
            preamble: "You are answering a UK household survey. Answer as the person described below would.".into(),
            sub_prompt_patterns: patterns
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
            question_pattern: "Question: {question}".into(),
            answer_instruction: "Reply with the single option that best matches this person's view.".into(),
            max_answer_words: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Question {
    pub id: String,
    pub text: String,
    pub scale: Vec<String>,
}

pub const LIKERT_5: [&str; 5] = [
    "strongly agree",
    "tend to agree",
    "neither agree nor disagree",
    "tend to disagree",
    "strongly disagree",
];

/// The ten environmental-attitude questions, labelled as in the published
/// comparison table.
pub const TABLE2_QUESTIONS: [(&str, &str); 10] = [
    ("lifestyle", "Describe your lifestyle"),
    ("personal_impact", "Personal Impact on Climate"),
    ("willing_to_pay", "Willing to Pay"),
    ("personal_change", "Personal Change"),
    ("environ_disaster", "Environ. Disaster"),
    ("green_tariff", "Green Tariff"),
    ("pollution", "Pollution"),
    ("environ_group", "Environ. Group"),
    ("climate_control", "Climate Change Control"),
    ("climate_impact", "Climate Change Impact"),
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct QuestionBank {
    pub questions: Vec<Question>,
}

impl QuestionBank {
    pub fn new(questions: Vec<Question>) -> Result<Self> {
        let bank = Self { questions };
        bank.validate()?;
        Ok(bank)
    }

    pub fn validate(&self) -> Result<()> {
        let mut ids = BTreeSet::new();
        for q in &self.questions {
            if !ids.insert(q.id.as_str()) {
                return Err(ProfileError::InvalidQuestion(format!("duplicate id `{}`", q.id)));
            }
            if q.scale.len() < 2 {
                return Err(ProfileError::InvalidQuestion(format!(
                    "`{}` needs at least 2 scale categories",
                    q.id
                )));
            }
        }
        Ok(())
    }

    /// Ten questions on a 5-point agreement scale. The scales are
    /// placeholders; override per question from configuration.
    pub fn table2_default() -> Self {
        Self {
            questions: TABLE2_QUESTIONS
                .iter()
                .map(|(id, text)| Question {
                    id: id.to_string(),
                    text: text.to_string(),
                    scale: LIKERT_5.iter().map(|s| s.to_string()).collect(),
                })
                .collect(),
        }
    }

    pub fn get(&self, id: &str) -> Option<&Question> {
        self.questions.iter().find(|q| q.id == id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BundleProvenance {
    pub seed: u64,
    pub template_id: String,
    /// Position of the bundle within its run.
    pub ordinal: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub profile: Profile,
    pub question: Question,
    pub rendered: String,
    pub provenance: BundleProvenance,
}

impl PromptBundle {
    /// SHA-256 of the rendered prompt.
    pub fn fingerprint(&self) -> String {
        sha256_hex(self.rendered.as_bytes())
    }
}

/// Sample `n` profiles, each variable drawn independently from its marginal.
pub fn sample_profiles(
    distributions: &[CategoricalDistribution],
    n: usize,
    seed: u64,
) -> Result<Vec<Profile>> {
    if n == 0 {
        return Err(ProfileError::InvalidSampleSize);
    }
    let samplers = distributions
        .iter()
        .map(|d| {
            d.validate()
                .map_err(|_| ProfileError::InvalidDistribution(d.variable.clone()))?;
            WeightedIndex::new(d.mass.values().copied())
                .map_err(|_| ProfileError::InvalidDistribution(d.variable.clone()))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n)
        .map(|_| Profile {
            assignment: distributions
                .iter()
                .zip(&samplers)
                .map(|(d, s)| {
                    let (label, _) = d.mass.get_index(s.sample(&mut rng)).expect("index in range");
                    (d.variable.clone(), label.clone())
                })
                .collect(),
        })
        .collect())
}

fn answer_line(template: &PromptTemplate, question: &Question) -> String {
    let options = question
        .scale
        .iter()
        .map(|c| format!("\"{c}\""))
        .collect::<Vec<_>>()
        .join(", ");
    let lead = template.answer_instruction.trim();
    let sep = if lead.is_empty() { "" } else { " " };
    format!(
        "{lead}{sep}Choose one of: {options}. Answer in at most {} words.",
        template.max_answer_words
    )
}

/// Assemble the full prompt for one profile and question.
pub fn render_prompt(
    profile: &Profile,
    question: &Question,
    template: &PromptTemplate,
) -> Result<PromptBundle> {
    render_with_provenance(profile, question, template, 0, 0)
}

pub fn render_with_provenance(
    profile: &Profile,
    question: &Question,
    template: &PromptTemplate,
    seed: u64,
    ordinal: u64,
) -> Result<PromptBundle> {
    template.validate()?;
    if let Some(missing) = template
        .sub_prompt_patterns
        .keys()
        .find(|var| !profile.assignment.contains_key(*var))
    {
        return Err(ProfileError::MissingVariable(missing.clone()));
    }
    let mut lines = Vec::new();
    if !template.preamble.trim().is_empty() {
        lines.push(template.preamble.clone());
    }
    for (var, category) in &profile.assignment {
        if let Some(pattern) = template.sub_prompt_patterns.get(var) {
            lines.push(pattern.replace(CATEGORY_PLACEHOLDER, category));
        }
    }
    lines.push(template.question_pattern.replace(QUESTION_PLACEHOLDER, &question.text));
    lines.push(answer_line(template, question));
    Ok(PromptBundle {
        profile: profile.clone(),
        question: question.clone(),
        rendered: lines.join("\n"),
        provenance: BundleProvenance {
            seed,
            template_id: template.id.clone(),
            ordinal,
        },
    })
}

/// Schema variables with no sub-prompt: ingested but never used.
pub fn check_minimization(schema: &ProfileSchema, template: &PromptTemplate) -> Vec<String> {
    schema
        .variables
        .iter()
        .filter(|v| !template.sub_prompt_patterns.contains_key(&v.name))
        .map(|v| v.name.clone())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dist(var: &str, pairs: &[(&str, f64)]) -> CategoricalDistribution {
        CategoricalDistribution::from_weights(var, pairs.iter().copied()).unwrap()
    }

    fn profile(pairs: &[(&str, &str)]) -> Profile {
        Profile {
            assignment: pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
        }
    }

    fn demo(name: &str) -> VariableSchema {
        VariableSchema::new(name, &["x", "y"], VariableKind::Demographic)
    }

    #[test]
    fn degenerate_marginals_give_identical_profiles() {
        let ds = [dist("age", &[("30 – 39", 1.0)]), dist("qualification", &[("Degree", 1.0)])];
        let profiles = sample_profiles(&ds, 50, 9).unwrap();
        assert!(profiles.iter().all(|p| p == &profiles[0]));
        assert_eq!(profiles[0].get("age"), Some("30 – 39"));
    }

    #[test]
    fn sampling_is_seeded() {
        let ds = [dist("age", &[("a", 0.5), ("b", 0.5)]), dist("job", &[("x", 0.2), ("y", 0.8)])];
        assert_eq!(sample_profiles(&ds, 100, 3).unwrap(), sample_profiles(&ds, 100, 3).unwrap());
        assert_ne!(sample_profiles(&ds, 100, 3).unwrap(), sample_profiles(&ds, 100, 4).unwrap());
        assert_eq!(sample_profiles(&ds, 0, 3), Err(ProfileError::InvalidSampleSize));
    }

    #[test]
    fn rendered_prompt_contains_parts_once() {
        let template = PromptTemplate::survey_default();
        let bank = QuestionBank::table2_default();
        let q = bank.get("environ_disaster").unwrap();
        let p = profile(&[("age", "30 – 39"), ("qualification", "Degree")]);
        let mut t = template.clone();
        t.sub_prompt_patterns.retain(|k, _| k == "age" || k == "qualification");
        let bundle = render_prompt(&p, q, &t).unwrap();
        assert_eq!(bundle.rendered.matches("You are aged 30 – 39.").count(), 1);
        assert_eq!(bundle.rendered.matches("Your highest qualification is Degree.").count(), 1);
        assert_eq!(bundle.rendered.matches("Environ. Disaster").count(), 1);
        assert!(bundle.rendered.ends_with("Answer in at most 4 words."));
    }

    #[test]
    fn empty_template_renders_preamble_question_instruction() {
        let mut t = PromptTemplate::survey_default();
        t.sub_prompt_patterns.clear();
        let q = QuestionBank::table2_default().questions[0].clone();
        let bundle = render_prompt(&profile(&[("age", "a")]), &q, &t).unwrap();
        let lines: Vec<&str> = bundle.rendered.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], t.preamble);
        assert_eq!(lines[1], "Question: Describe your lifestyle");
    }

    #[test]
    fn likert_scale_is_enumerated() {
        let bank = QuestionBank::table2_default();
        let q = bank.get("willing_to_pay").unwrap();
        assert_eq!(q.text, "Willing to Pay");
        let bundle = render_prompt(&profile(&[]), q, &PromptTemplate {
            sub_prompt_patterns: IndexMap::new(),
            ..PromptTemplate::survey_default()
        })
        .unwrap();
        for option in LIKERT_5 {
            assert!(bundle.rendered.contains(&format!("\"{option}\"")));
        }
    }

    #[test]
    fn missing_variable_is_reported() {
        let t = PromptTemplate::survey_default();
        let q = QuestionBank::table2_default().questions[0].clone();
        assert_eq!(
            render_prompt(&profile(&[("age", "a")]), &q, &t),
            Err(ProfileError::MissingVariable("qualification".into()))
        );
    }

    #[test]
    fn template_validation() {
        let mut t = PromptTemplate::survey_default();
        t.sub_prompt_patterns.insert("age".into(), "no placeholder".into());
        assert!(t.validate().is_err());
        let mut t = PromptTemplate::survey_default();
        t.question_pattern = "{question} {question}".into();
        assert!(t.validate().is_err());
        let mut t = PromptTemplate::survey_default();
        t.max_answer_words = 0;
        assert!(t.validate().is_err());
    }

    #[test]
    fn minimization_findings() {
        let mut t = PromptTemplate::survey_default();
        t.sub_prompt_patterns.retain(|k, _| k == "age");
        let schema = ProfileSchema::new(vec![demo("age"), demo("ethnicity")]).unwrap();
        assert_eq!(check_minimization(&schema, &t), vec!["ethnicity".to_string()]);
        let full = ProfileSchema::new(vec![demo("age")]).unwrap();
        assert!(check_minimization(&full, &t).is_empty());
        let empty = ProfileSchema { variables: vec![] };
        assert!(check_minimization(&empty, &t).is_empty());
    }

    #[test]
    fn profile_schema_rejects_opinion_variables() {
        let opinion = VariableSchema::new("q", &["a", "b"], VariableKind::Opinion);
        assert!(ProfileSchema::new(vec![opinion.clone()]).is_err());
        assert!(ProfileSchema::new(vec![]).is_err());
        let s = ProfileSchema::from_survey(&[demo("age"), opinion]).unwrap();
        assert_eq!(s.names().collect::<Vec<_>>(), vec!["age"]);
    }

    #[test]
    fn bank_validation() {
        let mut bank = QuestionBank::table2_default();
        assert!(bank.validate().is_ok());
        bank.questions[1].id = bank.questions[0].id.clone();
        assert!(bank.validate().is_err());
    }

    proptest! {
        #[test]
        fn rendering_is_injective(a in 0usize..4, b in 0usize..4, c in 0usize..4, d in 0usize..4) {
            let ages = ["10 – 19", "20 – 29", "30 – 39", "70 or older"];
            let quals = ["Degree", "A-level", "GCSE", "None"];
            let template = PromptTemplate {
                sub_prompt_patterns: PromptTemplate::survey_default()
                    .sub_prompt_patterns
                    .into_iter()
                    .filter(|(k, _)| k == "age" || k == "qualification")
                    .collect(),
                ..PromptTemplate::survey_default()
            };
            let q = QuestionBank::table2_default().questions[0].clone();
            let p1 = profile(&[("age", ages[a]), ("qualification", quals[b])]);
            let p2 = profile(&[("age", ages[c]), ("qualification", quals[d])]);
            let r1 = render_prompt(&p1, &q, &template).unwrap().rendered;
            let r2 = render_prompt(&p2, &q, &template).unwrap().rendered;
            prop_assert_eq!(p1 == p2, r1 == r2);
            // compliant template: every category appears in the prompt
            prop_assert!(r1.contains(ages[a]) && r1.contains(quals[b]));
        }
    }
}
