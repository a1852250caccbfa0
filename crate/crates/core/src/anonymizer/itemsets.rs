use std::collections::{BTreeMap, BTreeSet};

use itertools::Itertools;

use super::{AnonymizationParams, AnonymizeError, Code, Itemset, RecordCluster, Result};

/// Number of records containing every code of `itemset`.
pub fn support(records: &[BTreeSet<Code>], itemset: &Itemset) -> usize {
    records.iter().filter(|r| itemset.is_subset(r)).count()
}

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: usize = 1;
    for i in 0..k {
        acc = acc.saturating_mul(n - i) / (i + 1);
    }
    acc
}

/// Count of per-record sub-itemsets of size 1..=m, saturating.
pub(super) fn candidate_count(records: &[BTreeSet<Code>], m: usize) -> usize {
    records
        .iter()
        .map(|r| (1..=m).map(|i| binomial(r.len(), i)).fold(0usize, usize::saturating_add))
        .fold(0usize, usize::saturating_add)
}

/// Support of every itemset of at most `m` codes that occurs in at least one
/// record.
pub(super) fn itemset_supports(
    records: &[BTreeSet<Code>],
    params: &AnonymizationParams,
) -> Result<BTreeMap<Itemset, usize>> {
    let needed = candidate_count(records, params.m);
    if needed > params.max_candidates {
        return Err(AnonymizeError::CombinatorialBudgetExceeded {
            needed,
            cap: params.max_candidates,
        });
    }
    let mut counts: BTreeMap<Itemset, usize> = BTreeMap::new();
    for record in records {
        for size in 1..=params.m.min(record.len()) {
            for combo in record.iter().combinations(size) {
                *counts.entry(combo.into_iter().cloned().collect()).or_default() += 1;
            }
        }
    }
    Ok(counts)
}

pub(super) fn unprotected(
    records: &[BTreeSet<Code>],
    params: &AnonymizationParams,
) -> Result<Vec<Itemset>> {
    let mut found: Vec<Itemset> = itemset_supports(records, params)?
        .into_iter()
        .filter(|(_, n)| *n < params.k)
        .map(|(set, _)| set)
        .collect();
    found.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    Ok(found)
}

/// Every itemset of at most `m` codes supported by between 1 and k−1
/// records, ordered by size and then lexicographically.
pub fn find_unprotected_itemsets(
    cluster: &RecordCluster,
    params: &AnonymizationParams,
) -> Result<Vec<Itemset>> {
    params.validate()?;
    unprotected(&cluster.records, params)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cluster(records: &[&[&str]]) -> RecordCluster {
        let owned: Vec<Vec<&str>> = records.iter().map(|r| r.to_vec()).collect();
        RecordCluster::from_labels(&owned, None).unwrap()
    }

    fn set(labels: &[&str]) -> Itemset {
        labels.iter().map(|l| l.parse().unwrap()).collect()
    }

    #[test]
    fn singleton_below_k() {
        let c = cluster(&[&["a"], &["a"], &["b"]]);
        let p = AnonymizationParams::new(2, 1).unwrap();
        assert_eq!(find_unprotected_itemsets(&c, &p).unwrap(), vec![set(&["b"])]);
    }

    #[test]
    fn identical_records_are_protected() {
        let c = cluster(&[&["a", "b"], &["a", "b"], &["a", "b"]]);
        for k in 1..=3 {
            let p = AnonymizationParams::new(k, 2).unwrap();
            assert!(find_unprotected_itemsets(&c, &p).unwrap().is_empty());
        }
    }

    #[test]
    fn pairs_are_enumerated() {
        let c = cluster(&[&["a", "b"], &["a"]]);
        let p = AnonymizationParams::new(2, 2).unwrap();
        assert_eq!(
            find_unprotected_itemsets(&c, &p).unwrap(),
            vec![set(&["b"]), set(&["a", "b"])]
        );
    }

    #[test]
    fn budget_is_enforced() {
        let labels: Vec<String> = (0..30).map(|i| format!("c{i}")).collect();
        let c = RecordCluster::from_labels(&[labels], None).unwrap();
        let mut p = AnonymizationParams::new(2, 3).unwrap();
        p.max_candidates = 1000;
        // 30 + 435 + 4060 candidates
        assert_eq!(
            find_unprotected_itemsets(&c, &p),
            Err(AnonymizeError::CombinatorialBudgetExceeded { needed: 4525, cap: 1000 })
        );
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(5, 2), 10);
        assert_eq!(binomial(30, 3), 4060);
        assert_eq!(binomial(2, 3), 0);
    }
}
