//! Stage implementations. Each stage reads its inputs from the run
//! directory, writes fixed-name outputs there and appends one audit entry.

use std::collections::BTreeMap;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use chrono::{SecondsFormat, Utc};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;
use synthgov_core::anonymizer::{
    gendiag, verify_km_anonymity, AnonymizationParams, Code, OutcomeDocument, RecordCluster, UtilityConstraintSet,
};
use synthgov_core::digest::sha256_hex;
use synthgov_core::gateway::{
    run_batch, BatchConfig, CategoryOutcome, CompletionBackend, Dispatcher, RemoteBackend, StubBackend, StubSpec,
};
use synthgov_core::governance::{
    classify_risk, generate_dpia, pillar_scorecard, AnonymizationDigest, AuditLog, ControlChecks, DpiaInputs,
    DpiaReport, PillarScorecard, RiskTier, RuleTable, RunStats, Tier, Verdict,
};
use synthgov_core::metrics::{
    evaluate_outcomes, heatmap, render_table2, MetricReport, ResponseDistribution, Table2Row,
};
use synthgov_core::profile::{
    check_minimization, render_with_provenance, sample_profiles, Profile, ProfileSchema, PromptBundle,
    PromptTemplate, QuestionBank,
};
use synthgov_core::review::{
    build_review_tasks, export_jsonl, review_import, AgreementStats, AnnotationStore, ReviewTask,
};
use synthgov_core::survey::{
    apply_missing_policy, load_schema, load_survey, remove_outliers, standardize, write_survey,
    CategoricalDistribution, MissingPolicy, VariableKind, VariableSchema,
};
use synthgov_core::TOOLKIT_VERSION;

use crate::config::LoadedConfig;
use crate::error::{CliError, Result};

pub const MANIFEST: &str = "manifest.json";
pub const AUDIT: &str = "audit.jsonl";
pub const PREPROCESSED: &str = "preprocessed.csv";
pub const INGEST: &str = "ingest.json";
pub const ANONYMIZED: &str = "anonymized.json";
pub const PROFILES: &str = "profiles.jsonl";
pub const BUNDLES: &str = "bundles.jsonl";
pub const PROFILING: &str = "profiling.json";
pub const OUTCOMES: &str = "outcomes.jsonl";
pub const SIMULATION: &str = "simulation.json";
pub const METRICS: &str = "metrics.json";
pub const TABLE2: &str = "table2.txt";
pub const HEATMAPS: &str = "heatmaps";
pub const GOVERNANCE: &str = "governance.json";
pub const DPIA: &str = "dpia.json";
pub const DPIA_MD: &str = "dpia.md";
pub const REVIEW_TASKS: &str = "review_tasks.json";
pub const ANNOTATIONS: &str = "annotations.jsonl";
pub const AGREEMENT: &str = "agreement.json";

const ACTOR: &str = "synthgov-cli";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Stub,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub toolkit_version: String,
    pub seed: u64,
    pub config: PathBuf,
    pub config_sha256: String,
    pub backend: BackendKind,
    pub created: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub records_in: usize,
    pub excluded_records: usize,
    pub imputed_values: usize,
    pub outlier_records: usize,
    pub records_out: usize,
    pub demographics: Vec<CategoricalDistribution>,
    pub expected: Vec<CategoricalDistribution>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnonymizationArtifact {
    pub params: AnonymizationParams,
    pub verified: bool,
    pub digest: AnonymizationDigest,
    pub outcome: OutcomeDocument,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfilingSummary {
    pub template_id: String,
    pub profiles: usize,
    pub questions: usize,
    pub minimization_findings: Vec<String>,
    pub distributions: Vec<CategoricalDistribution>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub backend: BackendKind,
    pub model_id: String,
    pub requests: usize,
    pub failures: usize,
    pub unparseable: usize,
    pub over_limit: usize,
    pub mean_words: f64,
    pub runtime_seconds: f64,
    pub cost: f64,
    pub reproducibility_verified: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GovernanceSummary {
    pub tier: RiskTier,
    pub scorecard: PillarScorecard,
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut text = String::new();
    for item in items {
        text.push_str(&serde_json::to_string(item)?);
        text.push('\n');
    }
    fs::write(path, text)?;
    Ok(())
}

fn read_artifact(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| {
        CliError::Data(format!("{}: {e} (run the stage that produces it first)", path.display()))
    })
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_str(&read_artifact(path)?).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    read_artifact(path)?
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| CliError::Data(format!("{} line {}: {e}", path.display(), i + 1)))
        })
        .collect()
}

fn file_digest(path: &Path) -> Result<String> {
    Ok(sha256_hex(&fs::read(path)?))
}

/// Code label for one survey answer; the variable name keeps codes of
/// different variables apart.
pub fn answer_code(variable: &str, category: &str) -> String {
    format!("{variable}={category}")
}

pub struct Pipeline {
    cfg: LoadedConfig,
    run_dir: PathBuf,
    backend: BackendKind,
}

impl Pipeline {
    pub fn new(cfg: LoadedConfig, run_dir: impl Into<PathBuf>, backend: BackendKind) -> Result<Self> {
        let run_dir = run_dir.into();
        fs::create_dir_all(&run_dir)?;
        Ok(Self { cfg, run_dir, backend })
    }

    pub fn run_dir(&self) -> &Path {
        &self.run_dir
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.run_dir.join(name)
    }

    fn seed(&self) -> u64 {
        self.cfg.config.seed
    }

    /// Write the manifest if absent, or always when `fresh`.
    pub fn ensure_manifest(&self, fresh: bool) -> Result<Manifest> {
        let path = self.path(MANIFEST);
        if !fresh && path.exists() {
            return read_json(&path);
        }
        let manifest = Manifest {
            toolkit_version: TOOLKIT_VERSION.into(),
            seed: self.seed(),
            config: self.cfg.path.clone(),
            config_sha256: self.cfg.sha256.clone(),
            backend: self.backend,
            created: Utc::now().to_rfc3339_opts(SecondsFormat::Secs, true),
        };
        write_json(&path, &manifest)?;
        Ok(manifest)
    }

    fn load_audit(&self) -> Result<AuditLog> {
        let log = AuditLog::read(&self.path(AUDIT))?;
        log.verify()?;
        Ok(log)
    }

    /// Append one stage entry recording output digests.
    fn record_stage(&self, log: Option<AuditLog>, stage: &str, outputs: &[&str], summary: serde_json::Value) -> Result<()> {
        let mut log = match log {
            Some(l) => l,
            None => self.load_audit()?,
        };
        let mut digests = BTreeMap::new();
        for name in outputs {
            digests.insert(name.to_string(), file_digest(&self.path(name))?);
        }
        log.append(stage, ACTOR, &json!({ "outputs": digests, "summary": summary }))?;
        log.write(&self.path(AUDIT))?;
        Ok(())
    }

    pub fn schema(&self) -> Result<Vec<VariableSchema>> {
        Ok(load_schema(&self.cfg.config.schema)?)
    }

    fn demographics(&self, schema: &[VariableSchema]) -> Result<ProfileSchema> {
        Ok(ProfileSchema::from_survey(schema)?)
    }

    pub fn questions(&self) -> Result<QuestionBank> {
        match &self.cfg.config.questions {
            None => Ok(QuestionBank::table2_default()),
            Some(p) => {
                let bank: QuestionBank = serde_json::from_reader(BufReader::new(fs::File::open(p)?))
                    .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
                bank.validate().map_err(|e| CliError::Config(e.to_string()))?;
                Ok(bank)
            }
        }
    }

    pub fn template(&self) -> Result<PromptTemplate> {
        let t = match &self.cfg.config.template {
            None => PromptTemplate::survey_default(),
            Some(p) => serde_json::from_reader(BufReader::new(fs::File::open(p)?))
                .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?,
        };
        t.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(t)
    }

    pub fn ingest(&self) -> Result<IngestSummary> {
        self.ensure_manifest(false)?;
        let audit = self.load_audit()?;
        let schema = self.schema()?;
        let bank = self.questions()?;
        let raw = load_survey(&self.cfg.config.survey, &schema)?;
        let policy = MissingPolicy {
            exclude: self.cfg.config.preprocess.exclude_set()?,
        };
        let pre = apply_missing_policy(&raw, &policy, self.seed())?;
        let mut dataset = pre.dataset;
        let mut outlier_records = 0;
        if let Some(share) = self.cfg.config.preprocess.outlier_min_share {
            for var in schema.iter().filter(|v| v.kind == VariableKind::Demographic) {
                let removal = remove_outliers(&dataset, &var.name, share)?;
                outlier_records += removal.dropped;
                dataset = removal.dataset;
            }
        }
        let mut csv = Vec::new();
        write_survey(&dataset, &mut csv)?;
        fs::write(self.path(PREPROCESSED), csv)?;

        let demographics = self
            .demographics(&schema)?
            .variables
            .iter()
            .map(|v| standardize(&dataset, &v.name))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let mut expected = Vec::new();
        for q in &bank.questions {
            let var = schema
                .iter()
                .find(|v| v.name == q.id && v.kind == VariableKind::Opinion)
                .ok_or_else(|| CliError::Config(format!("question `{}` has no opinion column in the schema", q.id)))?;
            let dist = standardize(&dataset, &var.name)?;
            if let Some(c) = dist.mass.keys().find(|c| !q.scale.contains(c)) {
                return Err(CliError::Data(format!("`{c}` in column `{}` is not on the question's scale", q.id)));
            }
            expected.push(dist);
        }
        let summary = IngestSummary {
            records_in: raw.len(),
            excluded_records: pre.excluded_records,
            imputed_values: pre.imputed_values,
            outlier_records,
            records_out: dataset.len(),
            demographics,
            expected,
        };
        write_json(&self.path(INGEST), &summary)?;
        self.record_stage(
            Some(audit),
            "ingest",
            &[PREPROCESSED, INGEST],
            json!({ "records_in": summary.records_in, "records_out": summary.records_out, "imputed": summary.imputed_values }),
        )?;
        Ok(summary)
    }

    fn preprocessed(&self, schema: &[VariableSchema]) -> Result<synthgov_core::survey::SurveyDataset> {
        let path = self.path(PREPROCESSED);
        read_artifact(&path)?;
        Ok(load_survey(&path, schema)?)
    }

    pub fn anonymize(&self) -> Result<AnonymizationArtifact> {
        self.ensure_manifest(false)?;
        let audit = self.load_audit()?;
        let schema = self.schema()?;
        let demo = self.demographics(&schema)?;
        let dataset = self.preprocessed(&schema)?;
        let cols: Vec<usize> = demo
            .variables
            .iter()
            .map(|v| dataset.variable_index(&v.name))
            .collect::<std::result::Result<_, _>>()?;
        let records: Vec<Vec<String>> = (0..dataset.len())
            .map(|r| {
                cols.iter()
                    .map(|&c| answer_code(&dataset.schema[c].name, &dataset.cell_text(r, c)))
                    .collect()
            })
            .collect();
        let groups: Vec<Vec<String>> = demo
            .variables
            .iter()
            .map(|v| v.categories.iter().map(|c| answer_code(&v.name, c)).collect())
            .collect();
        let universe: Vec<String> = groups.iter().flatten().cloned().collect();
        let cluster = RecordCluster::from_labels(&records, Some(&universe))?;
        let constraints = UtilityConstraintSet::new(
            groups.iter().map(|g| g.iter().cloned().collect()).collect(),
        )?;
        let params = self.cfg.config.anonymization.params()?;
        let outcome = gendiag(&cluster, &constraints, &params)?;
        let verified = verify_km_anonymity(&outcome.cluster, &params);
        if !verified {
            return Err(CliError::Data("anonymized cluster failed verification".into()));
        }
        let artifact = AnonymizationArtifact {
            params,
            verified,
            digest: AnonymizationDigest::new(&outcome, &params, verified),
            outcome: outcome.to_document(),
        };
        write_json(&self.path(ANONYMIZED), &artifact)?;
        self.record_stage(
            Some(audit),
            "anonymize",
            &[ANONYMIZED],
            json!({ "generalizations": artifact.digest.generalizations, "suppressed": artifact.digest.suppressed }),
        )?;
        Ok(artifact)
    }

    /// Per-variable category weights from the anonymized records. A
    /// generalized code spreads its unit weight evenly over its leaves;
    /// suppressed codes contribute nothing.
    fn anonymized_distributions(&self, demo: &ProfileSchema, doc: &OutcomeDocument) -> Result<Vec<CategoricalDistribution>> {
        let mut weights: BTreeMap<&str, BTreeMap<String, f64>> = BTreeMap::new();
        for v in &demo.variables {
            weights.insert(&v.name, v.categories.iter().map(|c| (c.clone(), 0.0)).collect());
        }
        for record in &doc.records {
            for label in record {
                let code = Code::from_str(label).map_err(|e| CliError::Data(e.to_string()))?;
                let leaves: Vec<&str> = code.leaves().collect();
                let share = 1.0 / leaves.len() as f64;
                for leaf in leaves {
                    let (var, cat) = leaf
                        .split_once('=')
                        .ok_or_else(|| CliError::Data(format!("code `{leaf}` names no variable")))?;
                    if let Some(slot) = weights.get_mut(var).and_then(|m| m.get_mut(cat)) {
                        *slot += share;
                    }
                }
            }
        }
        demo.variables
            .iter()
            .map(|v| {
                let w = &weights[v.name.as_str()];
                CategoricalDistribution::from_weights(&v.name, v.categories.iter().map(|c| (c.as_str(), w[c])))
                    .map_err(|_| CliError::Data(format!("every `{}` value was suppressed", v.name)))
            })
            .collect()
    }

    pub fn profiles(&self) -> Result<ProfilingSummary> {
        self.ensure_manifest(false)?;
        let audit = self.load_audit()?;
        let schema = self.schema()?;
        let demo = self.demographics(&schema)?;
        let bank = self.questions()?;
        let template = self.template()?;
        let anonymized: AnonymizationArtifact = read_json(&self.path(ANONYMIZED))?;
        let distributions = self.anonymized_distributions(&demo, &anonymized.outcome)?;
        let n = self.cfg.config.simulation.profiles;
        let profiles = sample_profiles(&distributions, n, self.seed())?;
        let nq = bank.questions.len() as u64;
        let mut bundles = Vec::with_capacity(profiles.len() * bank.questions.len());
        for (p, profile) in profiles.iter().enumerate() {
            for (qi, q) in bank.questions.iter().enumerate() {
                bundles.push(render_with_provenance(profile, q, &template, self.seed(), p as u64 * nq + qi as u64)?);
            }
        }
        write_jsonl(&self.path(PROFILES), &profiles)?;
        write_jsonl(&self.path(BUNDLES), &bundles)?;
        let summary = ProfilingSummary {
            template_id: template.id.clone(),
            profiles: profiles.len(),
            questions: bank.questions.len(),
            minimization_findings: check_minimization(&demo, &template),
            distributions,
        };
        write_json(&self.path(PROFILING), &summary)?;
        self.record_stage(
            Some(audit),
            "profiles",
            &[PROFILES, BUNDLES, PROFILING],
            json!({ "profiles": summary.profiles, "bundles": bundles.len(), "minimization_findings": summary.minimization_findings }),
        )?;
        Ok(summary)
    }

    fn stub_spec(&self) -> Result<StubSpec> {
        let spec = match &self.cfg.config.stub {
            Some(p) => serde_json::from_reader(BufReader::new(fs::File::open(p)?))
                .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?,
            None => {
                let ingest: IngestSummary = read_json(&self.path(INGEST))?;
                StubSpec {
                    per_question: ingest.expected.into_iter().map(|d| (d.variable.clone(), d)).collect(),
                    seed: self.seed(),
                }
            }
        };
        spec.validate(&self.questions()?)?;
        Ok(spec)
    }

    fn backend_instance(&self) -> Result<Arc<dyn CompletionBackend>> {
        Ok(match self.backend {
            BackendKind::Stub => Arc::new(StubBackend::new(self.stub_spec()?)?),
            BackendKind::Remote => Arc::new(
                RemoteBackend::from_env(Duration::from_secs(60)).map_err(|e| CliError::Config(e.to_string()))?,
            ),
        })
    }

    fn batch_config(&self, template: &PromptTemplate) -> BatchConfig {
        let sim = &self.cfg.config.simulation;
        BatchConfig {
            model_id: sim.model_id.clone(),
            temperature: sim.temperature,
            max_output_words: template.max_answer_words,
            concurrency: sim.concurrency,
        }
    }

    pub fn simulate(&self) -> Result<SimulationSummary> {
        self.ensure_manifest(false)?;
        let audit = Arc::new(Mutex::new(self.load_audit()?));
        let bundles: Vec<PromptBundle> = read_jsonl(&self.path(BUNDLES))?;
        let template = self.template()?;
        let sim = &self.cfg.config.simulation;
        let batch = self.batch_config(&template);
        let dispatcher = Dispatcher::new(self.backend_instance()?)
            .with_retry(sim.retry)
            .with_audit(audit.clone(), ACTOR);
        let started = Instant::now();
        let outcomes = run_batch(&bundles, &dispatcher, &batch);
        let runtime = started.elapsed().as_secs_f64();
        drop(dispatcher);
        write_jsonl(&self.path(OUTCOMES), &outcomes)?;

        let reproducibility_verified = match self.backend {
            BackendKind::Stub => {
                let sample = &bundles[..sim.reproducibility_sample.min(bundles.len())];
                let fresh = Dispatcher::new(self.backend_instance()?);
                let again = run_batch(sample, &fresh, &BatchConfig { concurrency: 1, ..batch.clone() });
                !sample.is_empty() && again.iter().zip(&outcomes).all(|(a, b)| a.text == b.text)
            }
            BackendKind::Remote => false,
        };
        let failures = outcomes.iter().filter(|o| o.error.is_some()).count();
        let words: usize = outcomes.iter().map(|o| o.word_count).sum();
        let summary = SimulationSummary {
            backend: self.backend,
            model_id: sim.model_id.clone(),
            requests: outcomes.len(),
            failures,
            unparseable: outcomes.iter().filter(|o| o.is_unparseable() && o.error.is_none()).count(),
            over_limit: outcomes.iter().filter(|o| o.over_limit).count(),
            mean_words: if outcomes.is_empty() { 0.0 } else { words as f64 / outcomes.len() as f64 },
            runtime_seconds: runtime,
            cost: outcomes.len() as f64 * sim.cost_per_request,
            reproducibility_verified,
        };
        write_json(&self.path(SIMULATION), &summary)?;
        let log = Arc::try_unwrap(audit)
            .map_err(|_| CliError::Data("audit log still shared".into()))?
            .into_inner()
            .map_err(|_| CliError::Data("audit lock poisoned".into()))?;
        self.record_stage(
            Some(log),
            "simulate",
            &[OUTCOMES, SIMULATION],
            json!({ "requests": summary.requests, "failures": failures, "reproducibility_verified": reproducibility_verified }),
        )?;
        if !outcomes.is_empty() && failures as f64 / outcomes.len() as f64 > sim.max_failure_share {
            let first = outcomes.iter().find_map(|o| o.error.clone()).unwrap_or_default();
            return Err(CliError::Backend(format!("{failures} of {} requests failed; first: {first}", outcomes.len())));
        }
        Ok(summary)
    }

    pub fn evaluate(&self) -> Result<Vec<MetricReport>> {
        self.ensure_manifest(false)?;
        let audit = self.load_audit()?;
        let schema = self.schema()?;
        let bank = self.questions()?;
        let ingest: IngestSummary = read_json(&self.path(INGEST))?;
        let outcomes: Vec<CategoryOutcome> = read_jsonl(&self.path(OUTCOMES))?;
        let mut reports = Vec::new();
        let mut rows = Vec::new();
        for q in &bank.questions {
            let dist = ingest
                .expected
                .iter()
                .find(|d| d.variable == q.id)
                .ok_or_else(|| CliError::Data(format!("no expected distribution for `{}`", q.id)))?;
            let expected = ResponseDistribution::expected(q, dist, dist.support_count as f64)?;
            let report = evaluate_outcomes(q, &outcomes, &expected)?;
            rows.push(Table2Row::from_report(&q.text, &report));
            reports.push(report);
        }
        write_json(&self.path(METRICS), &reports)?;
        fs::write(self.path(TABLE2), render_table2(&rows))?;
        let mut outputs = vec![METRICS.to_string(), TABLE2.to_string()];

        if let Some(var) = &self.cfg.config.evaluation.heatmap_variable {
            let demo = self.demographics(&schema)?;
            let variable = demo
                .variables
                .iter()
                .find(|v| &v.name == var)
                .ok_or_else(|| CliError::Config(format!("heatmap variable `{var}` is not a profiling variable")))?;
            let profiles: Vec<Profile> = read_jsonl(&self.path(PROFILES))?;
            let mut by_ordinal: BTreeMap<u64, &CategoryOutcome> = BTreeMap::new();
            for o in &outcomes {
                by_ordinal.insert(o.ordinal, o);
            }
            fs::create_dir_all(self.path(HEATMAPS))?;
            let nq = bank.questions.len() as u64;
            for (qi, q) in bank.questions.iter().enumerate() {
                let mut aligned_outcomes = Vec::new();
                let mut aligned_profiles = Vec::new();
                for (p, profile) in profiles.iter().enumerate() {
                    if let Some(o) = by_ordinal.get(&(p as u64 * nq + qi as u64)) {
                        aligned_outcomes.push((*o).clone());
                        aligned_profiles.push(profile.clone());
                    }
                }
                let h = heatmap(&aligned_outcomes, &aligned_profiles, q, var, &variable.categories)?;
                for (ext, body) in [("csv", h.to_csv()), ("svg", h.to_svg())] {
                    let name = format!("{HEATMAPS}/{}.{ext}", q.id);
                    fs::write(self.path(&name), body)?;
                    outputs.push(name);
                }
            }
        }
        let refs: Vec<&str> = outputs.iter().map(String::as_str).collect();
        self.record_stage(Some(audit), "evaluate", &refs, json!({ "questions": reports.len() }))?;
        Ok(reports)
    }

    pub fn govern(&self) -> Result<GovernanceSummary> {
        self.ensure_manifest(false)?;
        let audit = AuditLog::read(&self.path(AUDIT))?;
        let audit_chain_valid = audit.verify().is_ok();
        let gov = &self.cfg.config.governance;
        let rules = match &gov.rules {
            Some(p) => RuleTable::load(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?,
            None => RuleTable::default(),
        };
        let tier = classify_risk(&gov.use_case, &rules)?;
        let metrics: Vec<MetricReport> = read_json(&self.path(METRICS))?;
        let sim: SimulationSummary = read_json(&self.path(SIMULATION))?;
        let checks = ControlChecks {
            human_oversight_declared: gov.use_case.human_oversight_declared,
            audit_chain_valid,
            reproducibility_verified: sim.reproducibility_verified,
        };
        let stats = RunStats {
            runtime_seconds: sim.runtime_seconds,
            cost: sim.cost,
            runtime_budget_seconds: gov.runtime_budget_seconds,
            cost_budget: gov.cost_budget,
        };
        let summary = GovernanceSummary {
            tier,
            scorecard: pillar_scorecard(&metrics, checks, stats)?,
        };
        write_json(&self.path(GOVERNANCE), &summary)?;
        if !audit_chain_valid {
            return Err(CliError::Data("audit chain failed verification".into()));
        }
        self.record_stage(
            Some(audit),
            "govern",
            &[GOVERNANCE],
            json!({ "tier": summary.tier.tier, "rationale": summary.tier.rationale }),
        )?;
        Ok(summary)
    }

    /// Assemble the impact assessment. Deterministic for a given run
    /// directory: the timestamp comes from the manifest.
    pub fn report(&self) -> Result<DpiaReport> {
        let manifest = self.ensure_manifest(false)?;
        let audit = self.load_audit()?;
        let gov: GovernanceSummary = read_json(&self.path(GOVERNANCE))?;
        let profiling: ProfilingSummary = read_json(&self.path(PROFILING))?;
        let anonymized: Option<AnonymizationArtifact> = if self.path(ANONYMIZED).exists() {
            Some(read_json(&self.path(ANONYMIZED))?)
        } else {
            None
        };
        let metrics: Vec<MetricReport> = read_json(&self.path(METRICS))?;
        let g = &self.cfg.config.governance;
        let report = generate_dpia(DpiaInputs {
            use_case: g.use_case,
            tier: gov.tier,
            oversight_statement: g.oversight_statement.clone(),
            minimization_findings: profiling.minimization_findings,
            anonymization_summary: anonymized.map(|a| a.digest),
            scorecard: gov.scorecard,
            checklist: g.checklist.clone(),
            metric_reports: metrics,
            timestamp: manifest.created,
            toolkit_version: manifest.toolkit_version,
        })?;
        fs::write(self.path(DPIA), report.to_json() + "\n")?;
        fs::write(self.path(DPIA_MD), report.to_markdown())?;
        self.record_stage(Some(audit), "report", &[DPIA, DPIA_MD], json!({ "verdict": report.verdict }))?;
        if report.verdict == Verdict::DoNotProceed {
            return Err(CliError::Veto(format!("{:?} tier: {}", Tier::Unacceptable, report.tier.rationale.join(", "))));
        }
        Ok(report)
    }

    /// Every stage in order on a fresh manifest.
    pub fn run_all(&self) -> Result<DpiaReport> {
        self.ensure_manifest(true)?;
        self.ingest()?;
        self.anonymize()?;
        self.profiles()?;
        self.simulate()?;
        self.evaluate()?;
        self.govern()?;
        self.report()
    }

    pub fn review_tasks(&self) -> Result<Vec<ReviewTask>> {
        self.ensure_manifest(false)?;
        let audit = self.load_audit()?;
        let schema = self.schema()?;
        let bank = self.questions()?;
        let review = &self.cfg.config.review;
        let question = match &review.question {
            Some(id) => bank
                .get(id)
                .ok_or_else(|| CliError::Config(format!("review question `{id}` is not in the bank")))?,
            None => &bank.questions[0],
        };
        let dataset = self.preprocessed(&schema)?;
        let col = dataset.variable_index(&question.id)?;
        let human: Vec<String> = (0..dataset.len()).map(|r| dataset.cell_text(r, col)).collect();
        let outcomes: Vec<CategoryOutcome> = read_jsonl(&self.path(OUTCOMES))?;
        let synthetic: Vec<String> = outcomes
            .iter()
            .filter(|o| o.question_id == question.id && !o.text.trim().is_empty())
            .map(|o| o.text.clone())
            .collect();
        let (h, s) = review.ratio;
        let blocks = if h + s == 0 { 0 } else { review.max_tasks / (h + s) };
        let take = |v: &[String], n: usize| v[..n.min(v.len())].to_vec();
        let tasks = build_review_tasks(&take(&human, blocks * h), &take(&synthetic, blocks * s), review.ratio, self.seed())
            .map_err(|e| CliError::Config(e.to_string()))?;
        write_json(&self.path(REVIEW_TASKS), &tasks)?;
        if !self.path(ANNOTATIONS).exists() {
            fs::write(self.path(ANNOTATIONS), "")?;
        }
        self.record_stage(Some(audit), "review-tasks", &[REVIEW_TASKS], json!({ "tasks": tasks.len() }))?;
        Ok(tasks)
    }

    pub fn load_store(run_dir: &Path) -> Result<AnnotationStore> {
        let tasks: Vec<ReviewTask> = read_json(&run_dir.join(REVIEW_TASKS))?;
        let mut store = AnnotationStore::new(tasks)?;
        let path = run_dir.join(ANNOTATIONS);
        if path.exists() {
            for a in review_import(BufReader::new(fs::File::open(&path)?))? {
                store.add(a)?;
            }
        }
        Ok(store)
    }

    /// Merge an annotation file into the run and report agreement with
    /// accuracy against the hidden sources.
    pub fn review_import(&self, file: &Path) -> Result<AgreementStats> {
        let audit = self.load_audit()?;
        let mut store = Self::load_store(&self.run_dir)?;
        let incoming = review_import(BufReader::new(fs::File::open(file)?))?;
        for a in &incoming {
            store.add(a.clone())?;
        }
        fs::write(self.path(ANNOTATIONS), export_jsonl(store.annotations()))?;
        let stats = store.agreement()?;
        write_json(&self.path(AGREEMENT), &stats)?;
        self.record_stage(
            Some(audit),
            "review-import",
            &[ANNOTATIONS, AGREEMENT],
            json!({ "imported": incoming.len(), "raw_agreement": stats.raw_agreement }),
        )?;
        Ok(stats)
    }
}

/// Standalone anonymization of a cluster document, as used by the golden
/// files: returns the outcome document as pretty JSON.
pub fn anonymize_document(cluster: &Path, constraints: &Path, k: usize, m: usize) -> Result<String> {
    let doc: synthgov_core::anonymizer::ClusterDocument = serde_json::from_str(&read_artifact(cluster)?)
        .map_err(|e| CliError::Data(format!("{}: {e}", cluster.display())))?;
    let constraints: UtilityConstraintSet = serde_json::from_str(&read_artifact(constraints)?)
        .map_err(|e| CliError::Data(format!("{}: {e}", constraints.display())))?;
    let params = AnonymizationParams::new(k, m).map_err(|e| CliError::Config(e.to_string()))?;
    let outcome = gendiag(&doc.into_cluster()?, &constraints, &params)?;
    let mut text = serde_json::to_string_pretty(&outcome.to_document())?;
    text.push('\n');
    Ok(text)
}
