use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::itemsets::unprotected;
use super::{
    support, AnonymizationParams, Code, Itemset, RecordCluster, Result, UtilityConstraintSet,
};

/// One step applied to the working cluster.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum Action {
    /// `code` and `partner` were replaced by `into` in every record.
    Generalize { code: Code, partner: Code, into: Code },
    /// `code` was deleted from every record; `leaves` were added to `s`.
    Suppress { code: Code, leaves: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnonymizationOutcome {
    pub cluster: RecordCluster,
    /// Number of leaf codes suppressed.
    pub suppressed: usize,
    pub trace: Vec<Action>,
}

/// Serialized form: the anonymized cluster plus `s` and the trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeDocument {
    pub universe: Vec<String>,
    pub records: Vec<Vec<String>>,
    pub suppressed: usize,
    pub trace: Vec<Action>,
}

impl AnonymizationOutcome {
    pub fn to_document(&self) -> OutcomeDocument {
        OutcomeDocument {
            universe: self.cluster.code_universe.iter().cloned().collect(),
            records: self.cluster.record_labels(),
            suppressed: self.suppressed,
            trace: self.trace.clone(),
        }
    }

    pub fn generalizations(&self) -> usize {
        self.trace
            .iter()
            .filter(|a| matches!(a, Action::Generalize { .. }))
            .count()
    }
}

fn rewrite(set: &mut BTreeSet<Code>, code: &Code, partner: &Code, into: &Code) {
    let hit = set.remove(code) | set.remove(partner);
    if hit {
        set.insert(into.clone());
    }
}

fn apply(records: &mut [BTreeSet<Code>], action: &Action) -> usize {
    match action {
        Action::Generalize {
            code,
            partner,
            into,
        } => {
            for r in records.iter_mut() {
                rewrite(r, code, partner, into);
            }
            0
        }
        Action::Suppress { code, leaves } => {
            for r in records.iter_mut() {
                r.remove(code);
            }
            *leaves
        }
    }
}

fn apply_to_queue(queue: &BTreeSet<Itemset>, action: &Action) -> BTreeSet<Itemset> {
    queue
        .iter()
        .map(|set| {
            let mut set = set.clone();
            apply(std::slice::from_mut(&mut set), action);
            set
        })
        .filter(|set| !set.is_empty())
        .collect()
}

/// Replay a trace on the original cluster, returning the records and `s`.
pub fn replay(cluster: &RecordCluster, trace: &[Action]) -> (RecordCluster, usize) {
    let mut records = cluster.records.clone();
    let mut suppressed = 0;
    for action in trace {
        suppressed += apply(&mut records, action);
    }
    (
        RecordCluster {
            records,
            code_universe: cluster.code_universe.clone(),
        },
        suppressed,
    )
}

/// Most supported itemset of the queue; ties go to the smallest itemset.
fn most_supported(records: &[BTreeSet<Code>], queue: &BTreeSet<Itemset>) -> Itemset {
    let mut best: Option<(usize, &Itemset)> = None;
    for set in queue {
        let n = support(records, set);
        if best.map_or(true, |(b, _)| n > b) {
            best = Some((n, set));
        }
    }
    best.expect("queue is non-empty").1.clone()
}

/// Minimum-loss merge `(u, u')` with `u` in `p` and both codes inside the
/// same utility constraint. Loss grows with the merged leaf count, so the
/// comparison runs on counts; ties resolve to the smallest `(u, u')`.
fn best_merge(
    records: &[BTreeSet<Code>],
    constraints: &UtilityConstraintSet,
    p: &Itemset,
) -> Option<(Code, Code)> {
    let present: BTreeSet<Code> = records.iter().flatten().cloned().collect();
    let mut best: Option<(usize, &Code, &Code)> = None;
    for u in p {
        let Some(group) = constraints.constraint_of(u) else {
            continue;
        };
        for partner in &present {
            if partner == u || constraints.constraint_of(partner) != Some(group) {
                continue;
            }
            let loss = u.merge(partner).leaf_count();
            let candidate = (loss, u, partner);
            if best.map_or(true, |b| candidate < b) {
                best = Some(candidate);
            }
        }
    }
    best.map(|(_, u, partner)| (u.clone(), partner.clone()))
}

/// Code of `p` occurring in the fewest records; ties go to the smallest code.
fn least_supported(records: &[BTreeSet<Code>], p: &Itemset) -> Code {
    let mut best: Option<(usize, &Code)> = None;
    for code in p {
        let n = records.iter().filter(|r| r.contains(code)).count();
        if best.map_or(true, |(b, _)| n < b) {
            best = Some((n, code));
        }
    }
    best.expect("itemset is non-empty").1.clone()
}

/// Greedy utility-constrained generalization with suppression fallback.
///
/// The unprotected-itemset queue is rewritten in place as codes merge or
/// disappear. When it drains, it is recomputed from the working cluster so
/// the result always passes [`super::verify_km_anonymity`].
pub fn gendiag(
    cluster: &RecordCluster,
    constraints: &UtilityConstraintSet,
    params: &AnonymizationParams,
) -> Result<AnonymizationOutcome> {
    params.validate()?;
    let k = params.k;
    let mut records = cluster.records.clone();
    let mut suppressed = 0usize;
    let mut trace = Vec::new();
    let mut queue: BTreeSet<Itemset> = BTreeSet::new();

    loop {
        if queue.is_empty() {
            queue = unprotected(&records, params)?.into_iter().collect();
            if queue.is_empty() {
                break;
            }
        }
        let mut p = most_supported(&records, &queue);

        loop {
            let n = support(&records, &p);
            if p.is_empty() || n == 0 || n >= k {
                break;
            }
            if let Some((code, partner)) = best_merge(&records, constraints, &p) {
                let into = code.merge(&partner);
                let action = Action::Generalize {
                    code,
                    partner,
                    into,
                };
                apply(&mut records, &action);
                apply(std::slice::from_mut(&mut p), &action);
                queue = apply_to_queue(&queue, &action);
                trace.push(action);
            } else {
                while !p.is_empty() && support(&records, &p) < k {
                    let code = least_supported(&records, &p);
                    let action = Action::Suppress {
                        leaves: code.leaf_count(),
                        code,
                    };
                    suppressed += apply(&mut records, &action);
                    apply(std::slice::from_mut(&mut p), &action);
                    queue = apply_to_queue(&queue, &action);
                    trace.push(action);
                }
            }
        }
        queue.remove(&p);
    }

    Ok(AnonymizationOutcome {
        cluster: RecordCluster {
            records,
            code_universe: cluster.code_universe.clone(),
        },
        suppressed,
        trace,
    })
}
