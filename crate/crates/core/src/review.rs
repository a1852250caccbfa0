//! Blinded expert review: tasks mixing human and synthetic statements,
//! annotation storage, JSONL import/export and inter-rater agreement.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::BufRead;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReviewError {
    #[error("line {0}: malformed annotation")]
    ParseError(usize),
    #[error("line {0}: duplicate annotation for the same task and annotator")]
    DuplicateAnnotation(usize),
    #[error("annotator {annotator} already annotated task {task_id}")]
    Duplicate { task_id: String, annotator: String },
    #[error("unknown task `{0}`")]
    UnknownTask(String),
    #[error("invalid annotation: {0}")]
    InvalidAnnotation(&'static str),
    #[error("no two annotators share a task")]
    InsufficientOverlap,
    #[error("duplicate task id `{0}`")]
    DuplicateTask(String),
    #[error("invalid mix ratio {0}:{1}")]
    InvalidRatio(usize, usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, ReviewError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Source {
    Human,
    Synthetic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Judgement {
    Human,
    AI,
}

impl Judgement {
    pub fn is_correct_for(self, source: Source) -> bool {
        matches!((self, source), (Judgement::Human, Source::Human) | (Judgement::AI, Source::Synthetic))
    }
}

/// Full task including ground truth; never sent to annotators.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewTask {
    pub id: String,
    pub statement: String,
    pub source_hidden: Source,
}

/// Annotator-facing projection of a task.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskView {
    pub task_id: String,
    pub statement: String,
    pub position: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Annotation {
    pub task_id: String,
    pub annotator_id: String,
    pub verdict: Judgement,
    #[serde(default)]
    pub reasoning: String,
    #[serde(default)]
    pub timestamp: String,
}

impl Annotation {
    pub fn validate(&self) -> Result<()> {
        if self.task_id.trim().is_empty() {
            return Err(ReviewError::InvalidAnnotation("empty task id"));
        }
        if self.annotator_id.trim().is_empty() {
            return Err(ReviewError::InvalidAnnotation("empty annotator id"));
        }
        Ok(())
    }

    fn key(&self) -> (String, String) {
        (self.task_id.clone(), self.annotator_id.clone())
    }
}

/// Interleave human and synthetic statements at `human:synthetic`, shuffled
/// with `seed`. Uses as many whole ratio blocks as both pools allow.
pub fn build_review_tasks(
    human: &[String],
    synthetic: &[String],
    ratio: (usize, usize),
    seed: u64,
) -> Result<Vec<ReviewTask>> {
    let (h, s) = ratio;
    if h == 0 && s == 0 {
        return Err(ReviewError::InvalidRatio(h, s));
    }
    let blocks = [(human.len(), h), (synthetic.len(), s)]
        .iter()
        .filter(|(_, r)| *r > 0)
        .map(|(n, r)| n / r)
        .min()
        .unwrap_or(0);
    let mut pool: Vec<(Source, &String)> = human[..blocks * h]
        .iter()
        .map(|t| (Source::Human, t))
        .chain(synthetic[..blocks * s].iter().map(|t| (Source::Synthetic, t)))
        .collect();
    pool.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok(pool
        .into_iter()
        .enumerate()
        .map(|(i, (source, text))| ReviewTask {
            id: format!("task-{:04}", i + 1),
            statement: text.clone(),
            source_hidden: source,
        })
        .collect())
}

/// Tasks plus the annotations collected so far. One annotation per
/// (task, annotator); writers are expected to hold exclusive access.
#[derive(Debug, Clone, Default)]
pub struct AnnotationStore {
    tasks: Vec<ReviewTask>,
    annotations: Vec<Annotation>,
    seen: HashSet<(String, String)>,
}

impl AnnotationStore {
    pub fn new(tasks: Vec<ReviewTask>) -> Result<Self> {
        let mut ids = BTreeSet::new();
        for t in &tasks {
            if !ids.insert(t.id.as_str()) {
                return Err(ReviewError::DuplicateTask(t.id.clone()));
            }
        }
        Ok(Self {
            tasks,
            ..Self::default()
        })
    }

    pub fn tasks(&self) -> &[ReviewTask] {
        &self.tasks
    }

    pub fn annotations(&self) -> &[Annotation] {
        &self.annotations
    }

    pub fn add(&mut self, annotation: Annotation) -> Result<()> {
        annotation.validate()?;
        if !self.tasks.iter().any(|t| t.id == annotation.task_id) {
            return Err(ReviewError::UnknownTask(annotation.task_id));
        }
        if !self.seen.insert(annotation.key()) {
            return Err(ReviewError::Duplicate {
                task_id: annotation.task_id,
                annotator: annotation.annotator_id,
            });
        }
        self.annotations.push(annotation);
        Ok(())
    }

    /// First task in order the annotator has not annotated yet.
    pub fn next_task(&self, annotator_id: &str) -> Option<TaskView> {
        let total = self.tasks.len();
        self.tasks.iter().enumerate().find_map(|(i, t)| {
            (!self.seen.contains(&(t.id.clone(), annotator_id.to_string()))).then(|| TaskView {
                task_id: t.id.clone(),
                statement: t.statement.clone(),
                position: i + 1,
                total,
            })
        })
    }

    pub fn agreement(&self) -> Result<AgreementStats> {
        let mut stats = inter_rater_agreement(&self.annotations)?;
        stats.accuracy = Some(accuracy(&self.tasks, &self.annotations));
        Ok(stats)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairAgreement {
    pub annotator_a: String,
    pub annotator_b: String,
    pub shared_tasks: usize,
    pub agreement: f64,
    pub kappa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    /// Fraction of annotators judging each task correctly.
    pub per_task: BTreeMap<String, f64>,
    pub overall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementStats {
    /// Mean of pairwise raw agreement over pairs sharing a task.
    pub raw_agreement: f64,
    pub mean_kappa: f64,
    pub pairs: Vec<PairAgreement>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<AccuracyReport>,
}

fn cohen_kappa(pairs: &[(Judgement, Judgement)]) -> f64 {
    let n = pairs.len() as f64;
    let p_o = pairs.iter().filter(|(a, b)| a == b).count() as f64 / n;
    let share = |f: fn(&(Judgement, Judgement)) -> bool| pairs.iter().filter(|p| f(p)).count() as f64 / n;
    let a_h = share(|p| p.0 == Judgement::Human);
    let b_h = share(|p| p.1 == Judgement::Human);
    let p_e = a_h * b_h + (1.0 - a_h) * (1.0 - b_h);
    if (1.0 - p_e).abs() < 1e-12 {
        return if (p_o - 1.0).abs() < 1e-12 { 1.0 } else { 0.0 };
    }
    (p_o - p_e) / (1.0 - p_e)
}

pub fn inter_rater_agreement(annotations: &[Annotation]) -> Result<AgreementStats> {
    let mut by_annotator: BTreeMap<&str, BTreeMap<&str, Judgement>> = BTreeMap::new();
    for a in annotations {
        by_annotator
            .entry(a.annotator_id.as_str())
            .or_default()
            .insert(a.task_id.as_str(), a.verdict);
    }
    let names: Vec<&str> = by_annotator.keys().copied().collect();
    let mut pairs = Vec::new();
    for (i, a) in names.iter().enumerate() {
        for b in &names[i + 1..] {
            let shared: Vec<(Judgement, Judgement)> = by_annotator[a]
                .iter()
                .filter_map(|(task, &va)| by_annotator[b].get(task).map(|&vb| (va, vb)))
                .collect();
            if shared.is_empty() {
                continue;
            }
            let agree = shared.iter().filter(|(x, y)| x == y).count();
            pairs.push(PairAgreement {
                annotator_a: a.to_string(),
                annotator_b: b.to_string(),
                shared_tasks: shared.len(),
                agreement: agree as f64 / shared.len() as f64,
                kappa: cohen_kappa(&shared),
            });
        }
    }
    if pairs.is_empty() {
        return Err(ReviewError::InsufficientOverlap);
    }
    let n = pairs.len() as f64;
    Ok(AgreementStats {
        raw_agreement: pairs.iter().map(|p| p.agreement).sum::<f64>() / n,
        mean_kappa: pairs.iter().map(|p| p.kappa).sum::<f64>() / n,
        pairs,
        accuracy: None,
    })
}

/// Accuracy against ground truth; annotations for unknown tasks are ignored.
pub fn accuracy(tasks: &[ReviewTask], annotations: &[Annotation]) -> AccuracyReport {
    let truth: BTreeMap<&str, Source> = tasks.iter().map(|t| (t.id.as_str(), t.source_hidden)).collect();
    let mut tally: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for a in annotations {
        if let Some(&source) = truth.get(a.task_id.as_str()) {
            let e = tally.entry(a.task_id.clone()).or_default();
            e.1 += 1;
            if a.verdict.is_correct_for(source) {
                e.0 += 1;
            }
        }
    }
    let (right, total) = tally.values().fold((0, 0), |(r, t), &(a, b)| (r + a, t + b));
    AccuracyReport {
        per_task: tally.into_iter().map(|(k, (r, t))| (k, r as f64 / t as f64)).collect(),
        overall: if total == 0 { 0.0 } else { right as f64 / total as f64 },
    }
}

/// Parse annotation JSONL. Blank lines are skipped; line numbers are 1-based.
pub fn review_import(reader: impl BufRead) -> Result<Vec<Annotation>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let annotation: Annotation =
            serde_json::from_str(&line).map_err(|_| ReviewError::ParseError(i + 1))?;
        annotation.validate().map_err(|_| ReviewError::ParseError(i + 1))?;
        if !seen.insert(annotation.key()) {
            return Err(ReviewError::DuplicateAnnotation(i + 1));
        }
        out.push(annotation);
    }
    Ok(out)
}

pub fn export_jsonl(annotations: &[Annotation]) -> String {
    annotations
        .iter()
        .map(|a| serde_json::to_string(a).expect("annotation serializes") + "\n")
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ann(task: &str, who: &str, verdict: Judgement) -> Annotation {
        Annotation {
            task_id: task.into(),
            annotator_id: who.into(),
            verdict,
            reasoning: "r".into(),
            timestamp: String::new(),
        }
    }

    #[test]
    fn identical_verdicts() {
        let mut v = Vec::new();
        for i in 0..10 {
            let j = if i % 2 == 0 { Judgement::Human } else { Judgement::AI };
            v.push(ann(&i.to_string(), "a", j));
            v.push(ann(&i.to_string(), "b", j));
        }
        let s = inter_rater_agreement(&v).unwrap();
        assert_eq!(s.raw_agreement, 1.0);
        assert_eq!(s.pairs[0].kappa, 1.0);
    }

    #[test]
    fn total_disagreement() {
        let mut v = Vec::new();
        for i in 0..10 {
            let (x, y) = if i % 2 == 0 { (Judgement::Human, Judgement::AI) } else { (Judgement::AI, Judgement::Human) };
            v.push(ann(&i.to_string(), "a", x));
            v.push(ann(&i.to_string(), "b", y));
        }
        let s = inter_rater_agreement(&v).unwrap();
        assert_eq!(s.raw_agreement, 0.0);
        assert!((s.pairs[0].kappa + 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_raters_agreeing_have_kappa_one() {
        let v = vec![ann("1", "a", Judgement::AI), ann("1", "b", Judgement::AI)];
        assert_eq!(inter_rater_agreement(&v).unwrap().mean_kappa, 1.0);
    }

    #[test]
    fn overlap_required() {
        assert!(matches!(inter_rater_agreement(&[ann("1", "a", Judgement::AI)]), Err(ReviewError::InsufficientOverlap)));
        let v = vec![ann("1", "a", Judgement::AI), ann("2", "b", Judgement::AI)];
        assert!(matches!(inter_rater_agreement(&v), Err(ReviewError::InsufficientOverlap)));
    }

    #[test]
    fn import_errors_and_roundtrip() {
        assert!(review_import("".as_bytes()).unwrap().is_empty());
        let good = export_jsonl(&[ann("1", "a", Judgement::AI), ann("1", "b", Judgement::Human)]);
        let bad = format!("{good}{{oops\n");
        assert!(matches!(review_import(bad.as_bytes()), Err(ReviewError::ParseError(3))));
        let dup = format!("{good}{}", export_jsonl(&[ann("1", "a", Judgement::Human)]));
        assert!(matches!(review_import(dup.as_bytes()), Err(ReviewError::DuplicateAnnotation(3))));
        let back = review_import(good.as_bytes()).unwrap();
        assert_eq!(export_jsonl(&back), good);
    }

    #[test]
    fn task_mix_and_store() {
        let human: Vec<String> = (0..5).map(|i| format!("h{i}")).collect();
        let synth: Vec<String> = (0..3).map(|i| format!("s{i}")).collect();
        let tasks = build_review_tasks(&human, &synth, (1, 1), 7).unwrap();
        assert_eq!(tasks.len(), 6);
        assert_eq!(tasks.iter().filter(|t| t.source_hidden == Source::Human).count(), 3);
        assert!(build_review_tasks(&human, &synth, (0, 0), 7).is_err());

        let mut store = AnnotationStore::new(tasks.clone()).unwrap();
        let first = store.next_task("a").unwrap();
        assert_eq!((first.position, first.total), (1, 6));
        store.add(ann(&first.task_id, "a", Judgement::AI)).unwrap();
        assert!(matches!(store.add(ann(&first.task_id, "a", Judgement::AI)), Err(ReviewError::Duplicate { .. })));
        assert!(matches!(store.add(ann("nope", "a", Judgement::AI)), Err(ReviewError::UnknownTask(_))));
        assert_eq!(store.next_task("a").unwrap().position, 2);
        assert_eq!(store.next_task("b").unwrap().position, 1);
    }

    #[test]
    fn accuracy_against_truth() {
        let tasks = vec![
            ReviewTask { id: "1".into(), statement: "x".into(), source_hidden: Source::Human },
            ReviewTask { id: "2".into(), statement: "y".into(), source_hidden: Source::Synthetic },
        ];
        let v = vec![ann("1", "a", Judgement::Human), ann("1", "b", Judgement::AI), ann("2", "a", Judgement::AI)];
        let r = accuracy(&tasks, &v);
        assert_eq!(r.per_task["1"], 0.5);
        assert_eq!(r.per_task["2"], 1.0);
        assert!((r.overall - 2.0 / 3.0).abs() < 1e-12);
    }
}
