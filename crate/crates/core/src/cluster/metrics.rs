//! Misclassification error between a reference partition and a clustering.

use std::collections::BTreeMap;
use std::collections::BTreeSet;

use super::ClusterError;

/// Groups labeled records into a partition; groups ordered by label name,
/// members sorted. Input pairs are `(record_id, label)`.
pub fn partition_from_labels<'a>(
    pairs: impl IntoIterator<Item = (&'a str, &'a str)>,
) -> Vec<Vec<String>> {
    let mut groups: BTreeMap<&str, Vec<String>> = BTreeMap::new();
    for (id, label) in pairs {
        groups.entry(label).or_default().push(id.to_string());
    }
    groups
        .into_values()
        .map(|mut members| {
            members.sort();
            members
        })
        .collect()
}

/// Misclassification error `M_E = (1/N) * sum |  |D_i| - |D'_i|  |` over
/// clusters matched by maximum overlap.
///
/// `before` is the reference partition (N = its total size), `after` the
/// produced clusters; both must have the same cluster count. Matching is
/// greedy: repeatedly pair the two clusters sharing the most records, ties
/// to the smaller indices.
pub fn misclassification_error(
    before: &[Vec<String>],
    after: &[Vec<String>],
) -> Result<f64, ClusterError> {
    if before.len() != after.len() {
        return Err(ClusterError::ClusterCountMismatch(
            before.len(),
            after.len(),
        ));
    }
    let k = before.len();
    let n: usize = before.iter().map(|c| c.len()).sum();
    if n == 0 {
        return Ok(0.0);
    }

    let after_sets: Vec<BTreeSet<&str>> = after
        .iter()
        .map(|c| c.iter().map(|s| s.as_str()).collect())
        .collect();
    let mut overlap = vec![0usize; k * k];
    for (i, group) in before.iter().enumerate() {
        for (j, set) in after_sets.iter().enumerate() {
            overlap[i * k + j] = group.iter().filter(|id| set.contains(id.as_str())).count();
        }
    }

    let mut used_before = vec![false; k];
    let mut used_after = vec![false; k];
    let mut total = 0.0f64;
    for _ in 0..k {
        let mut best = (0usize, 0usize, 0usize, false);
        for i in 0..k {
            if used_before[i] {
                continue;
            }
            for j in 0..k {
                if used_after[j] {
                    continue;
                }
                if !best.3 || overlap[i * k + j] > best.0 {
                    best = (overlap[i * k + j], i, j, true);
                }
            }
        }
        let (_, i, j, _) = best;
        used_before[i] = true;
        used_after[j] = true;
        total += (before[i].len() as f64 - after[j].len() as f64).abs();
    }
    Ok(total / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn named(groups: &[&[&str]]) -> Vec<Vec<String>> {
        groups
            .iter()
            .map(|g| g.iter().map(|s| s.to_string()).collect())
            .collect()
    }

    #[test]
    fn identical_partitions_score_zero() {
        let p = named(&[&["a", "b", "c"], &["d", "e"]]);
        assert_eq!(misclassification_error(&p, &p).unwrap(), 0.0);
    }

    #[test]
    fn spec_size_example() {
        // N = 10, before sizes (6, 4), after sizes (5, 5): 2/10.
        let before = named(&[
            &["a", "b", "c", "d", "e", "f"],
            &["g", "h", "i", "j"],
        ]);
        let after = named(&[
            &["a", "b", "c", "d", "e"],
            &["f", "g", "h", "i", "j"],
        ]);
        let me = misclassification_error(&before, &after).unwrap();
        assert_eq!(me, 0.2);
    }

    #[test]
    fn count_mismatch_is_an_error() {
        let before = named(&[&["a"], &["b"]]);
        let after = named(&[&["a", "b"]]);
        assert!(matches!(
            misclassification_error(&before, &after),
            Err(ClusterError::ClusterCountMismatch(2, 1))
        ));
    }

    #[test]
    fn labels_group_deterministically() {
        let partition = partition_from_labels([
            ("x2", "whorl"),
            ("x1", "arch"),
            ("x3", "whorl"),
            ("x0", "arch"),
        ]);
        assert_eq!(
            partition,
            named(&[&["x0", "x1"], &["x2", "x3"]])
        );
    }

    proptest! {
        #[test]
        fn error_is_zero_iff_matched_sizes_agree(
            sizes in proptest::collection::vec(1usize..6, 2..5),
        ) {
            // Build a partition and a relabeled copy of itself: M_E must be 0.
            let mut id = 0usize;
            let before: Vec<Vec<String>> = sizes
                .iter()
                .map(|&s| {
                    (0..s)
                        .map(|_| {
                            id += 1;
                            format!("r{id}")
                        })
                        .collect()
                })
                .collect();
            let mut after = before.clone();
            after.rotate_left(1);
            prop_assert_eq!(misclassification_error(&before, &after).unwrap(), 0.0);
        }
    }
}
