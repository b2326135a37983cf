//! Link-based agglomerative clustering of ridge-flow records: neighbor and
//! link computation, goodness-driven heap merging to `k` classes, the seven
//! classical linkage variants and the misclassification-error metric.

mod linkage;
mod metrics;

pub use linkage::{linkage_cluster, Linkage};
pub use metrics::{misclassification_error, partition_from_labels};

use std::cmp::Ordering;
use std::collections::{BinaryHeap, BTreeMap};

use thiserror::Error;

use crate::rfpcode::MetaBase;

#[derive(Debug, Error)]
pub enum ClusterError {
    #[error("similarity threshold must lie strictly between 0 and 1, got {0}")]
    BadTheta(f64),
    #[error("need at least {needed} non-outlier records, have {have}")]
    TooFewRecords { needed: usize, have: usize },
    #[error("code sequences differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("cluster counts differ: {0} vs {1}")]
    ClusterCountMismatch(usize, usize),
}

/// Clustering parameters: the neighbor threshold `theta` and the target
/// cluster count `k`.
#[derive(Debug, Clone, Copy)]
pub struct SimilarityParams {
    pub theta: f64,
    pub k: usize,
}

impl Default for SimilarityParams {
    fn default() -> Self {
        Self { theta: 0.5, k: 6 }
    }
}

impl SimilarityParams {
    /// Goodness exponent `f(theta) = (1 - theta) / (1 + theta)`.
    pub fn f_exp(&self) -> f64 {
        (1.0 - self.theta) / (1.0 + self.theta)
    }

    pub fn validate(&self) -> Result<(), ClusterError> {
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(ClusterError::BadTheta(self.theta));
        }
        Ok(())
    }
}

/// One merge step of the dendrogram. Clusters are named by their smallest
/// member id, so the log is stable under input reordering; `merged` is
/// always the smaller of `left` and `right`.
#[derive(Debug, Clone, PartialEq)]
pub struct Merge {
    pub left: String,
    pub right: String,
    pub merged: String,
    pub goodness: f64,
}

/// Final partition plus the merge history that produced it.
///
/// `clusters` holds the k clusters (members sorted by id, clusters ordered
/// by smallest member), `outliers` the records excluded from clustering.
/// Replaying `dendrogram` over the non-outlier singletons reproduces the
/// clusters exactly (modulo the smallest-stay-out rule when merging stopped
/// early).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ClusterModel {
    pub clusters: Vec<Vec<String>>,
    pub outliers: Vec<String>,
    pub dendrogram: Vec<Merge>,
}

impl ClusterModel {
    pub fn k(&self) -> usize {
        self.clusters.len()
    }

    /// record-id → cluster-id (1-based).
    pub fn partition(&self) -> BTreeMap<&str, u32> {
        let mut map = BTreeMap::new();
        for (i, members) in self.clusters.iter().enumerate() {
            for m in members {
                map.insert(m.as_str(), (i + 1) as u32);
            }
        }
        map
    }
}

/// Similarity of two code sequences: with `m` the number of agreeing
/// positions, `sim = m / (2n - m)` — the Jaccard coefficient over
/// `(position, code)` item sets.
pub fn sim(a: &[u8], b: &[u8]) -> Result<f64, ClusterError> {
    if a.len() != b.len() {
        return Err(ClusterError::LengthMismatch(a.len(), b.len()));
    }
    let m = a.iter().zip(b).filter(|(x, y)| x == y).count() as f64;
    Ok(m / (2.0 * a.len() as f64 - m))
}

/// Neighbor sets and common-neighbor link counts of a record collection.
#[derive(Debug, Clone)]
pub struct NeighborData {
    /// Per record: indices of records with `sim >= theta` (self excluded).
    pub neighbors: Vec<Vec<u32>>,
    /// Symmetric record-level link table; `links[p][q]` is the number of
    /// common neighbors of p and q. Absent entries are zero.
    pub links: Vec<BTreeMap<u32, u64>>,
}

impl NeighborData {
    pub fn link(&self, p: usize, q: usize) -> u64 {
        self.links[p].get(&(q as u32)).copied().unwrap_or(0)
    }

    /// Records with an empty neighbor set (noise per the neighbor
    /// definition; they join no cluster).
    pub fn outliers(&self) -> Vec<usize> {
        (0..self.neighbors.len())
            .filter(|&i| self.neighbors[i].is_empty())
            .collect()
    }
}

/// Computes neighbor sets and link counts over encoded records.
pub fn compute_nhbr(records: &[&[u8]], theta: f64) -> Result<NeighborData, ClusterError> {
    let n = records.len();
    let mut neighbors: Vec<Vec<u32>> = vec![Vec::new(); n];
    for p in 0..n {
        for q in p + 1..n {
            if sim(records[p], records[q])? >= theta {
                neighbors[p].push(q as u32);
                neighbors[q].push(p as u32);
            }
        }
    }
    let mut links: Vec<BTreeMap<u32, u64>> = vec![BTreeMap::new(); n];
    for nbrs in &neighbors {
        for i in 0..nbrs.len() {
            for j in i + 1..nbrs.len() {
                let (a, b) = (nbrs[i], nbrs[j]);
                *links[a as usize].entry(b).or_insert(0) += 1;
                *links[b as usize].entry(a).or_insert(0) += 1;
            }
        }
    }
    Ok(NeighborData { neighbors, links })
}

/// Merge goodness of two clusters: the cross-link count normalized by the
/// expected link mass, `link / ((nu+nv)^(1+2f) - nu^(1+2f) - nv^(1+2f))`
/// with `f = (1-theta)/(1+theta)`.
pub fn goodness(link: u64, size_u: usize, size_v: usize, theta: f64) -> f64 {
    let f = (1.0 - theta) / (1.0 + theta);
    let e = 1.0 + 2.0 * f;
    let denom =
        ((size_u + size_v) as f64).powf(e) - (size_u as f64).powf(e) - (size_v as f64).powf(e);
    link as f64 / denom
}

/// Candidate merge in the priority queue. Orders by goodness descending,
/// then by the smaller min-member rank of each side ascending.
#[derive(Debug, PartialEq)]
struct PairEntry {
    goodness: f64,
    rank_u: usize,
    rank_v: usize,
    u: u32,
    v: u32,
}

impl Eq for PairEntry {}

impl Ord for PairEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.goodness
            .total_cmp(&other.goodness)
            .then_with(|| other.rank_u.cmp(&self.rank_u))
            .then_with(|| other.rank_v.cmp(&self.rank_v))
    }
}

impl PartialOrd for PairEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct Cluster {
    members: Vec<usize>,
    min_rank: usize,
}

/// Link-based agglomerative clustering.
///
/// Records with no neighbors at `theta` are set aside as outliers. The rest
/// start as singletons; the pair with the best goodness merges (links add up
/// across the merge) until `k` clusters remain or no linked pair is left.
/// If more than `k` zero-link clusters remain, the `k` largest stay and the
/// rest are reported as outliers. All ties break on the records' sorted-id
/// ranks, so the result is independent of input order.
pub fn fprock_cluster(
    meta: &MetaBase,
    params: &SimilarityParams,
) -> Result<ClusterModel, ClusterError> {
    params.validate()?;
    let codes: Vec<&[u8]> = meta.records.iter().map(|r| r.codes.as_slice()).collect();
    let ids: Vec<&str> = meta.records.iter().map(|r| r.image_id.as_str()).collect();

    // Rank = position in the sorted id order; all tie-breaking uses ranks so
    // permuting the input changes nothing.
    let mut order: Vec<usize> = (0..ids.len()).collect();
    order.sort_by_key(|&i| ids[i]);
    let mut rank = vec![0usize; ids.len()];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r;
    }

    let nhbr = compute_nhbr(&codes, params.theta)?;
    let noise = nhbr.outliers();
    let is_noise = {
        let mut flags = vec![false; ids.len()];
        for &i in &noise {
            flags[i] = true;
        }
        flags
    };
    let active_records: Vec<usize> = (0..ids.len()).filter(|&i| !is_noise[i]).collect();
    if active_records.len() < params.k {
        return Err(ClusterError::TooFewRecords {
            needed: params.k,
            have: active_records.len(),
        });
    }

    // Singleton clusters; cluster ids grow as merges happen.
    let mut clusters: Vec<Option<Cluster>> = Vec::new();
    let mut cluster_of = vec![u32::MAX; ids.len()];
    for &rec in &active_records {
        cluster_of[rec] = clusters.len() as u32;
        clusters.push(Some(Cluster {
            members: vec![rec],
            min_rank: rank[rec],
        }));
    }

    // Cluster-level link table, initialized from record links.
    let mut links: Vec<BTreeMap<u32, u64>> = vec![BTreeMap::new(); clusters.len()];
    let mut heap = BinaryHeap::new();
    for (p, row) in nhbr.links.iter().enumerate() {
        for (&q, &l) in row {
            let (cu, cv) = (cluster_of[p], cluster_of[q as usize]);
            if cu < cv {
                links[cu as usize].insert(cv, l);
                links[cv as usize].insert(cu, l);
                let (ru, rv) = (rank[p], rank[q as usize]);
                heap.push(PairEntry {
                    goodness: goodness(l, 1, 1, params.theta),
                    rank_u: ru.min(rv),
                    rank_v: ru.max(rv),
                    u: cu,
                    v: cv,
                });
            }
        }
    }

    let mut alive = clusters.iter().filter(|c| c.is_some()).count();
    let mut dendrogram = Vec::new();
    while alive > params.k {
        // Pop until an entry whose clusters are both still alive.
        let entry = loop {
            match heap.pop() {
                Some(e) => {
                    if clusters[e.u as usize].is_some() && clusters[e.v as usize].is_some() {
                        break Some(e);
                    }
                }
                None => break None,
            }
        };
        let Some(entry) = entry else {
            break; // best goodness is zero: no linked pairs remain
        };

        let (u, v) = (entry.u as usize, entry.v as usize);
        let cu = clusters[u].take().unwrap();
        let cv = clusters[v].take().unwrap();
        alive -= 1;
        let w = clusters.len() as u32;

        // Cross-links are additive over the merge: for every third cluster
        // x, link(x, w) = link(x, u) + link(x, v).
        let lu = std::mem::take(&mut links[u]);
        let lv = std::mem::take(&mut links[v]);
        #[cfg(debug_assertions)]
        let expected_mass: u64 = lu
            .iter()
            .chain(lv.iter())
            .filter(|(&x, _)| x != u as u32 && x != v as u32)
            .map(|(_, &l)| l)
            .sum();
        let mut lw: BTreeMap<u32, u64> = BTreeMap::new();
        for (x, l) in lu.into_iter().chain(lv) {
            if x != u as u32 && x != v as u32 {
                *lw.entry(x).or_insert(0) += l;
            }
        }
        #[cfg(debug_assertions)]
        debug_assert_eq!(
            expected_mass,
            lw.values().sum::<u64>(),
            "merge must preserve total link mass"
        );

        let size_w = cu.members.len() + cv.members.len();
        let min_rank_w = cu.min_rank.min(cv.min_rank);
        for (&x, &l) in &lw {
            let xs = clusters[x as usize].as_ref().expect("link to dead cluster");
            links[x as usize].remove(&(u as u32));
            links[x as usize].remove(&(v as u32));
            links[x as usize].insert(w, l);
            heap.push(PairEntry {
                goodness: goodness(l, xs.members.len(), size_w, params.theta),
                rank_u: xs.min_rank.min(min_rank_w),
                rank_v: xs.min_rank.max(min_rank_w),
                u: x,
                v: w,
            });
        }
        let name = |c: &Cluster| {
            let rec = *c.members.iter().min_by_key(|&&m| rank[m]).unwrap();
            ids[rec].to_string()
        };
        let (first, second) = if cu.min_rank < cv.min_rank {
            (&cu, &cv)
        } else {
            (&cv, &cu)
        };
        dendrogram.push(Merge {
            left: name(first),
            right: name(second),
            merged: name(first),
            goodness: entry.goodness,
        });

        let mut members = cu.members;
        members.extend(cv.members);
        links.push(lw);
        clusters.push(Some(Cluster {
            members,
            min_rank: min_rank_w,
        }));
    }

    // Collect survivors; if more than k remain (merging ran dry), the k
    // largest stay clusters and the rest become outliers.
    let mut survivors: Vec<Cluster> = clusters.into_iter().flatten().collect();
    survivors.sort_by(|a, b| {
        b.members
            .len()
            .cmp(&a.members.len())
            .then(a.min_rank.cmp(&b.min_rank))
    });
    let mut outliers: Vec<String> = noise.iter().map(|&i| ids[i].to_string()).collect();
    for extra in survivors.split_off(params.k.min(survivors.len())) {
        outliers.extend(extra.members.iter().map(|&m| ids[m].to_string()));
    }
    outliers.sort();

    survivors.sort_by_key(|c| c.min_rank);
    let clusters: Vec<Vec<String>> = survivors
        .into_iter()
        .map(|c| {
            let mut ms: Vec<String> = c.members.iter().map(|&m| ids[m].to_string()).collect();
            ms.sort();
            ms
        })
        .collect();

    Ok(ClusterModel {
        clusters,
        outliers,
        dendrogram,
    })
}
