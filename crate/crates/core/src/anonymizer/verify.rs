use itertools::Itertools;

use super::{AnonymizationParams, Itemset, RecordCluster};

/// Exhaustive (k, k^m) check: every combination of up to `m` distinct codes
/// present in the cluster must be supported by 0 or at least `k` records.
///
/// Enumerates the full code alphabet rather than per-record subsets, so it
/// shares no logic with [`super::find_unprotected_itemsets`].
pub fn verify_km_anonymity(cluster: &RecordCluster, params: &AnonymizationParams) -> bool {
    let alphabet: Vec<_> = cluster.present_codes().into_iter().collect();
    for size in 1..=params.m.min(alphabet.len()) {
        for combo in alphabet.iter().combinations(size) {
            let itemset: Itemset = combo.into_iter().cloned().collect();
            let mut n = 0usize;
            for record in &cluster.records {
                if itemset.iter().all(|c| record.contains(c)) {
                    n += 1;
                }
            }
            if n > 0 && n < params.k {
                return false;
            }
        }
    }
    true
}
