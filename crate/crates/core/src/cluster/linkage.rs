//! Classical agglomerative clustering over the angular code embedding,
//! with the seven standard linkage update rules.

use std::str::FromStr;

use super::{ClusterError, ClusterModel, Merge};
use crate::rfpcode::{angular_embedding, MetaBase};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Linkage {
    Single,
    Complete,
    Average,
    Weighted,
    Centroid,
    Median,
    Ward,
}

impl Linkage {
    pub const ALL: [Linkage; 7] = [
        Linkage::Single,
        Linkage::Complete,
        Linkage::Average,
        Linkage::Weighted,
        Linkage::Centroid,
        Linkage::Median,
        Linkage::Ward,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Linkage::Single => "single",
            Linkage::Complete => "complete",
            Linkage::Average => "average",
            Linkage::Weighted => "weighted",
            Linkage::Centroid => "centroid",
            Linkage::Median => "median",
            Linkage::Ward => "ward",
        }
    }

    /// Centroid, median and ward update squared distances.
    fn squared(self) -> bool {
        matches!(self, Linkage::Centroid | Linkage::Median | Linkage::Ward)
    }
}

impl FromStr for Linkage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Linkage::ALL
            .into_iter()
            .find(|l| l.name() == s)
            .ok_or_else(|| format!("unknown linkage {s:?}"))
    }
}

/// Agglomerative clustering down to `k` clusters.
///
/// Records embed as 64-dimensional unit vectors (each code a unit vector at
/// angle `2*pi*c/8`, scaled by `1/sqrt(32)`), the base distance is
/// Euclidean, and inter-cluster distances follow the Lance–Williams update
/// for the chosen linkage. Ties merge the pair with the smallest member
/// ids. The merge log stores the merge distance in the goodness slot.
pub fn linkage_cluster(
    meta: &MetaBase,
    linkage: Linkage,
    k: usize,
) -> Result<ClusterModel, ClusterError> {
    let n = meta.len();
    if n < k {
        return Err(ClusterError::TooFewRecords { needed: k, have: n });
    }
    let ids: Vec<&str> = meta.records.iter().map(|r| r.image_id.as_str()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| ids[i]);
    let mut rank = vec![0usize; n];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r;
    }

    let points: Vec<Vec<f64>> = meta
        .records
        .iter()
        .map(|r| angular_embedding(&r.codes))
        .collect();
    let mut dist = vec![0.0f64; n * n];
    for a in 0..n {
        for b in a + 1..n {
            let d2: f64 = points[a]
                .iter()
                .zip(&points[b])
                .map(|(x, y)| (x - y) * (x - y))
                .sum();
            let d = if linkage.squared() { d2 } else { d2.sqrt() };
            dist[a * n + b] = d;
            dist[b * n + a] = d;
        }
    }

    struct Node {
        members: Vec<usize>,
        min_rank: usize,
    }
    let mut nodes: Vec<Option<Node>> = (0..n)
        .map(|i| {
            Some(Node {
                members: vec![i],
                min_rank: rank[i],
            })
        })
        .collect();
    let mut alive: Vec<usize> = (0..n).collect();
    let mut dendrogram = Vec::new();

    while alive.len() > k {
        // Scan for the closest active pair; ties by smallest min-ranks.
        let mut best: Option<(f64, usize, usize, usize, usize)> = None;
        for ai in 0..alive.len() {
            for bi in ai + 1..alive.len() {
                let (a, b) = (alive[ai], alive[bi]);
                let d = dist[a * n + b];
                let (ra, rb) = (
                    nodes[a].as_ref().unwrap().min_rank,
                    nodes[b].as_ref().unwrap().min_rank,
                );
                let key = (d, ra.min(rb), ra.max(rb));
                let better = match best {
                    None => true,
                    Some((bd, br1, br2, _, _)) => key < (bd, br1, br2),
                };
                if better {
                    best = Some((key.0, key.1, key.2, a.min(b), a.max(b)));
                }
            }
        }
        let (d_uv, _, _, u, v) = best.expect("at least two clusters remain");

        let nu = nodes[u].as_ref().unwrap().members.len() as f64;
        let nv = nodes[v].as_ref().unwrap().members.len() as f64;
        // Lance–Williams update of every survivor's distance to the merge.
        for &x in &alive {
            if x == u || x == v {
                continue;
            }
            let nx = nodes[x].as_ref().unwrap().members.len() as f64;
            let dux = dist[u * n + x];
            let dvx = dist[v * n + x];
            let new = match linkage {
                Linkage::Single => 0.5 * dux + 0.5 * dvx - 0.5 * (dux - dvx).abs(),
                Linkage::Complete => 0.5 * dux + 0.5 * dvx + 0.5 * (dux - dvx).abs(),
                Linkage::Average => (nu * dux + nv * dvx) / (nu + nv),
                Linkage::Weighted => 0.5 * dux + 0.5 * dvx,
                Linkage::Centroid => {
                    (nu * dux + nv * dvx) / (nu + nv) - nu * nv * d_uv / ((nu + nv) * (nu + nv))
                }
                Linkage::Median => 0.5 * dux + 0.5 * dvx - 0.25 * d_uv,
                Linkage::Ward => {
                    ((nx + nu) * dux + (nx + nv) * dvx - nx * d_uv) / (nx + nu + nv)
                }
            };
            dist[u * n + x] = new;
            dist[x * n + u] = new;
        }

        let node_v = nodes[v].take().unwrap();
        let node_u = nodes[u].as_mut().unwrap();
        let (first, second) = if node_u.min_rank < node_v.min_rank {
            (node_u.min_rank, node_v.min_rank)
        } else {
            (node_v.min_rank, node_u.min_rank)
        };
        let name_of = |r: usize| ids[order[r]].to_string();
        dendrogram.push(Merge {
            left: name_of(first),
            right: name_of(second),
            merged: name_of(first),
            goodness: if linkage.squared() { d_uv.sqrt() } else { d_uv },
        });
        node_u.members.extend(node_v.members);
        node_u.min_rank = node_u.min_rank.min(node_v.min_rank);
        alive.retain(|&x| x != v);
    }

    let mut survivors: Vec<Node> = nodes.into_iter().flatten().collect();
    survivors.sort_by_key(|c| c.min_rank);
    let clusters = survivors
        .into_iter()
        .map(|c| {
            let mut ms: Vec<String> = c.members.iter().map(|&m| ids[m].to_string()).collect();
            ms.sort();
            ms
        })
        .collect();
    Ok(ClusterModel {
        clusters,
        outliers: Vec::new(),
        dendrogram,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rfpcode::RidgeFlowPattern;

    fn meta_from(codes: Vec<Vec<u8>>) -> MetaBase {
        MetaBase {
            records: codes
                .into_iter()
                .enumerate()
                .map(|(i, c)| RidgeFlowPattern::new(format!("r{i:03}"), c))
                .collect(),
        }
    }

    #[test]
    fn identical_records_merge_first_at_zero() {
        let meta = meta_from(vec![
            vec![0; 32],
            vec![4; 32],
            vec![0; 32],
            vec![2; 32],
        ]);
        let model = linkage_cluster(&meta, Linkage::Complete, 2).unwrap();
        let first = &model.dendrogram[0];
        assert_eq!(first.goodness, 0.0);
        assert_eq!((first.left.as_str(), first.right.as_str()), ("r000", "r002"));
    }

    #[test]
    fn every_linkage_recovers_two_obvious_groups() {
        let mut codes = vec![vec![0u8; 32]; 4];
        codes.extend(vec![vec![4u8; 32]; 4]);
        // Slight within-group variation.
        codes[1][0] = 1;
        codes[5][0] = 5;
        let meta = meta_from(codes);
        for linkage in Linkage::ALL {
            let model = linkage_cluster(&meta, linkage, 2).unwrap();
            assert_eq!(model.k(), 2, "{linkage:?}");
            assert_eq!(model.clusters[0].len(), 4, "{linkage:?}");
        }
    }

    #[test]
    fn single_vs_complete_differ_on_chains() {
        // A chain of records, each close to the next: single linkage chains
        // them into one elongated cluster while complete linkage balances.
        let mut codes = Vec::new();
        for i in 0..8 {
            let mut c = vec![0u8; 32];
            for slot in c.iter_mut().take(i * 4) {
                *slot = 1;
            }
            codes.push(c);
        }
        let meta = meta_from(codes);
        let single = linkage_cluster(&meta, Linkage::Single, 2).unwrap();
        let complete = linkage_cluster(&meta, Linkage::Complete, 2).unwrap();
        let sizes = |m: &ClusterModel| {
            let mut s: Vec<usize> = m.clusters.iter().map(|c| c.len()).collect();
            s.sort();
            s
        };
        assert_eq!(sizes(&single), vec![1, 7]);
        assert_eq!(sizes(&complete), vec![4, 4]);
    }
}
