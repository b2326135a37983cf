//! Two-phase identification search over the clustered meta-base: a global
//! class match against the profile hierarchy, then local Euclidean
//! verification of (alpha, beta, gamma, delta) tuples, with penetration and
//! retrieval metrics.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::cluster::ClusterModel;
use crate::imaging::BinaryImage;
use crate::orientation::{CoreBits, CorePoint};
use crate::rfpcode::{angular_embedding, MetaBase};

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("cluster member {0:?} is not in the meta-base")]
    UnknownMember(String),
    #[error("cluster model is empty")]
    EmptyModel,
    #[error("code sequences differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
}

/// Prototype of one cluster (or internal hierarchy node): its medoid record,
/// feature means and the histogram of observed core codes.
#[derive(Debug, Clone)]
pub struct RfpProfile {
    /// 1-based cluster id for leaf profiles, `None` for internal nodes.
    pub cluster_id: Option<u32>,
    pub medoid: Vec<u8>,
    pub alpha_mean: f64,
    pub beta_mean: f64,
    pub delta_hist: BTreeMap<CoreBits, usize>,
    pub size: usize,
}

#[derive(Debug, Clone)]
pub struct ProfileNode {
    pub profile: RfpProfile,
    pub children: Option<(usize, usize)>,
}

/// Binary hierarchy over the leaf cluster profiles, used by the global
/// search phase to prune whole subtrees.
#[derive(Debug, Clone)]
pub struct ProfileHierarchy {
    pub nodes: Vec<ProfileNode>,
    pub root: usize,
    /// Node index of each cluster's leaf, ordered by cluster id.
    pub leaves: Vec<usize>,
}

/// The four query features: true minutiae count, recurrence ridge count,
/// ridge-flow codes and the 10-bit core code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryTuple {
    pub alpha: u32,
    pub beta: u32,
    pub gamma: Vec<u8>,
    pub delta: CoreBits,
}

/// Outcome of one identification query.
#[derive(Debug, Clone)]
pub struct SearchResult {
    /// `(record_id, distance)` ascending by distance, ties by id.
    pub ranked: Vec<(String, f64)>,
    /// Clusters selected by the global phase (all of them on a tie).
    pub class_chosen: Vec<u32>,
    /// Records scored in the local phase.
    pub comparisons: usize,
    /// Profile nodes compared in the global phase.
    pub profile_comparisons: usize,
    /// Fraction of the database touched: (records scored + profiles
    /// compared) / database size, capped at 1.
    pub penetration: f64,
}

/// Number of agreeing positions between two code sequences.
pub fn agreements(a: &[u8], b: &[u8]) -> Result<u32, SearchError> {
    if a.len() != b.len() {
        return Err(SearchError::LengthMismatch(a.len(), b.len()));
    }
    Ok(a.iter().zip(b).filter(|(x, y)| x == y).count() as u32)
}

/// Recurrence ridge count: 0→1 transitions along the horizontal scanline
/// through the core, restricted to the ROI when one is present.
pub fn compute_beta(skeleton: &BinaryImage, core: &CorePoint) -> u32 {
    if skeleton.height == 0 || skeleton.width == 0 {
        return 0;
    }
    let y = (core.y.round() as isize).clamp(0, skeleton.height as isize - 1) as usize;
    let mut count = 0;
    let mut prev = false;
    for x in 0..skeleton.width {
        let inside = skeleton.roi.as_ref().map_or(true, |r| r.contains(x, y));
        let bit = inside && skeleton.get(x, y);
        if bit && !prev {
            count += 1;
        }
        prev = bit;
    }
    count
}

/// Medoid of a record subset: the member minimizing total position mismatch
/// (Hamming) to the others; ties go to the smaller image id.
fn medoid_of<'a>(records: &[&'a crate::rfpcode::RidgeFlowPattern]) -> &'a crate::rfpcode::RidgeFlowPattern {
    let mut best: Option<(u64, &crate::rfpcode::RidgeFlowPattern)> = None;
    for cand in records {
        let total: u64 = records
            .iter()
            .map(|other| {
                cand.codes
                    .iter()
                    .zip(&other.codes)
                    .filter(|(a, b)| a != b)
                    .count() as u64
            })
            .sum();
        let better = match best {
            None => true,
            Some((bt, br)) => total < bt || (total == bt && cand.image_id < br.image_id),
        };
        if better {
            best = Some((total, cand));
        }
    }
    best.expect("medoid of a non-empty set").1
}

fn profile_of(
    cluster_id: Option<u32>,
    records: &[&crate::rfpcode::RidgeFlowPattern],
) -> RfpProfile {
    let medoid = medoid_of(records).codes.clone();
    let alpha_sum: u64 = records.iter().map(|r| r.alpha as u64).sum();
    let beta_sum: u64 = records.iter().map(|r| r.beta as u64).sum();
    let mut delta_hist = BTreeMap::new();
    for r in records {
        *delta_hist.entry(r.delta).or_insert(0) += 1;
    }
    RfpProfile {
        cluster_id,
        medoid,
        alpha_mean: alpha_sum as f64 / records.len() as f64,
        beta_mean: beta_sum as f64 / records.len() as f64,
        delta_hist,
        size: records.len(),
    }
}

/// Builds the leaf profiles and the pruning hierarchy above them.
///
/// The cluster model's merge log ends at the k-cut, so the hierarchy above
/// it is grown here: the two nodes whose medoids agree most merge first
/// (ties to smaller min member id), each internal node recomputing its
/// medoid over all descendant records.
pub fn build_profiles(
    model: &ClusterModel,
    meta: &MetaBase,
) -> Result<ProfileHierarchy, SearchError> {
    if model.clusters.is_empty() {
        return Err(SearchError::EmptyModel);
    }
    let by_id: BTreeMap<&str, &crate::rfpcode::RidgeFlowPattern> = meta
        .records
        .iter()
        .map(|r| (r.image_id.as_str(), r))
        .collect();

    let mut nodes: Vec<ProfileNode> = Vec::new();
    let mut leaves = Vec::new();
    // Active roots: (node index, descendant records, min member id).
    let mut active: Vec<(usize, Vec<&crate::rfpcode::RidgeFlowPattern>, String)> = Vec::new();
    for (i, members) in model.clusters.iter().enumerate() {
        let mut records = Vec::with_capacity(members.len());
        for id in members {
            let rec = by_id
                .get(id.as_str())
                .ok_or_else(|| SearchError::UnknownMember(id.clone()))?;
            records.push(*rec);
        }
        let node = ProfileNode {
            profile: profile_of(Some((i + 1) as u32), &records),
            children: None,
        };
        leaves.push(nodes.len());
        active.push((nodes.len(), records, members[0].clone()));
        nodes.push(node);
    }

    while active.len() > 1 {
        let mut best: Option<(u32, usize, usize)> = None;
        for a in 0..active.len() {
            for b in a + 1..active.len() {
                let agr = agreements(
                    &nodes[active[a].0].profile.medoid,
                    &nodes[active[b].0].profile.medoid,
                )?;
                // Order candidate pairs so the smaller min-member id leads.
                let (a, b) = if active[a].2 <= active[b].2 {
                    (a, b)
                } else {
                    (b, a)
                };
                let better = match best {
                    None => true,
                    Some((bg, bi, bj)) => {
                        agr > bg
                            || (agr == bg
                                && (active[a].2.as_str(), active[b].2.as_str())
                                    < (active[bi].2.as_str(), active[bj].2.as_str()))
                    }
                };
                if better {
                    best = Some((agr, a, b));
                }
            }
        }
        let (_, a, b) = best.expect("two active roots remain");
        let (bi, mut brecords, bmin) = active.swap_remove(b.max(a));
        let (ai, arecords, amin) = active.swap_remove(b.min(a));
        let mut records = arecords;
        records.append(&mut brecords);
        let node = ProfileNode {
            profile: profile_of(None, &records),
            children: Some((ai, bi)),
        };
        let min_id = if amin <= bmin { amin } else { bmin };
        active.push((nodes.len(), records, min_id));
        nodes.push(node);
    }

    let root = active[0].0;
    Ok(ProfileHierarchy {
        nodes,
        root,
        leaves,
    })
}

/// Read-only identification index: the meta-base, the partition and the
/// profile hierarchy, plus the normalization maxima for local distances.
#[derive(Debug, Clone)]
pub struct SearchIndex {
    records: Vec<crate::rfpcode::RidgeFlowPattern>,
    cluster_members: Vec<Vec<usize>>,
    hierarchy: ProfileHierarchy,
    alpha_max: f64,
    beta_max: f64,
}

impl SearchIndex {
    pub fn build(meta: &MetaBase, model: &ClusterModel) -> Result<Self, SearchError> {
        let hierarchy = build_profiles(model, meta)?;
        let index_of: BTreeMap<&str, usize> = meta
            .records
            .iter()
            .enumerate()
            .map(|(i, r)| (r.image_id.as_str(), i))
            .collect();
        let mut cluster_members = Vec::with_capacity(model.clusters.len());
        for members in &model.clusters {
            let mut idxs = Vec::with_capacity(members.len());
            for id in members {
                idxs.push(*index_of
                    .get(id.as_str())
                    .ok_or_else(|| SearchError::UnknownMember(id.clone()))?);
            }
            cluster_members.push(idxs);
        }
        let alpha_max = meta.records.iter().map(|r| r.alpha).max().unwrap_or(0);
        let beta_max = meta.records.iter().map(|r| r.beta).max().unwrap_or(0);
        Ok(Self {
            records: meta.records.clone(),
            cluster_members,
            hierarchy,
            alpha_max: alpha_max.max(1) as f64,
            beta_max: beta_max.max(1) as f64,
        })
    }

    pub fn database_size(&self) -> usize {
        self.records.len()
    }

    pub fn hierarchy(&self) -> &ProfileHierarchy {
        &self.hierarchy
    }

    /// Cluster id of a database record, if it is not an outlier.
    pub fn cluster_of(&self, record_id: &str) -> Option<u32> {
        for (i, members) in self.cluster_members.iter().enumerate() {
            if members
                .iter()
                .any(|&m| self.records[m].image_id == record_id)
            {
                return Some((i + 1) as u32);
            }
        }
        None
    }

    /// Phase I: descends the hierarchy, skipping any subtree whose medoid
    /// agrees with the candidate in fewer than `tau_prune` positions.
    /// Returns the winning cluster id(s) (all on a tie) and the number of
    /// profile comparisons. If pruning eliminates every leaf, all leaf
    /// profiles are compared instead.
    pub fn global_search(
        &self,
        candidate: &[u8],
        tau_prune: u32,
    ) -> Result<(Vec<u32>, usize), SearchError> {
        let mut comparisons = 0usize;
        let mut reached: Vec<(u32, u32)> = Vec::new(); // (cluster, agreements)
        let mut stack = vec![self.hierarchy.root];
        while let Some(node_idx) = stack.pop() {
            let node = &self.hierarchy.nodes[node_idx];
            let agr = agreements(candidate, &node.profile.medoid)?;
            comparisons += 1;
            if agr < tau_prune {
                continue;
            }
            match node.children {
                Some((a, b)) => {
                    stack.push(b);
                    stack.push(a);
                }
                None => reached.push((node.profile.cluster_id.unwrap(), agr)),
            }
        }
        if reached.is_empty() {
            // Everything pruned: fall back to comparing all leaf profiles.
            for &leaf in &self.hierarchy.leaves {
                let node = &self.hierarchy.nodes[leaf];
                let agr = agreements(candidate, &node.profile.medoid)?;
                comparisons += 1;
                reached.push((node.profile.cluster_id.unwrap(), agr));
            }
        }
        let best = reached.iter().map(|&(_, a)| a).max().unwrap_or(0);
        let mut winners: Vec<u32> = reached
            .into_iter()
            .filter(|&(_, a)| a == best)
            .map(|(c, _)| c)
            .collect();
        winners.sort_unstable();
        winners.dedup();
        Ok((winners, comparisons))
    }

    fn distance(&self, query: &QueryTuple, record: &crate::rfpcode::RidgeFlowPattern) -> f64 {
        let da = (query.alpha as f64 - record.alpha as f64) / self.alpha_max;
        let db = (query.beta as f64 - record.beta as f64) / self.beta_max;
        let eq = angular_embedding(&query.gamma);
        let er = angular_embedding(&record.codes);
        let dg: f64 = eq.iter().zip(&er).map(|(x, y)| (x - y) * (x - y)).sum();
        let dd = query.delta.hamming(record.delta) as f64 / 10.0;
        (da * da + db * db + dg + dd * dd).sqrt()
    }

    /// Phase II: scores every record of the selected clusters against the
    /// query tuple and ranks ascending (ties by record id).
    pub fn local_search(
        &self,
        query: &QueryTuple,
        clusters: &[u32],
        top_r: usize,
        profile_comparisons: usize,
    ) -> SearchResult {
        let mut scored: Vec<(String, f64)> = Vec::new();
        for &cid in clusters {
            for &rec in &self.cluster_members[(cid - 1) as usize] {
                let record = &self.records[rec];
                scored.push((record.image_id.clone(), self.distance(query, record)));
            }
        }
        let comparisons = scored.len();
        scored.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
        scored.truncate(top_r);
        let n = self.records.len().max(1);
        SearchResult {
            ranked: scored,
            class_chosen: clusters.to_vec(),
            comparisons,
            profile_comparisons,
            penetration: (((comparisons + profile_comparisons) as f64) / n as f64).min(1.0),
        }
    }

    /// Full two-phase query.
    pub fn query(
        &self,
        query: &QueryTuple,
        top_r: usize,
        tau_prune: u32,
    ) -> Result<SearchResult, SearchError> {
        let (winners, profile_comparisons) = self.global_search(&query.gamma, tau_prune)?;
        Ok(self.local_search(query, &winners, top_r, profile_comparisons))
    }

    /// Baseline: scores the whole database with the same distance.
    pub fn linear_scan(&self, query: &QueryTuple, top_r: usize) -> SearchResult {
        let mut scored: Vec<(String, f64)> = self
            .records
            .iter()
            .map(|r| (r.image_id.clone(), self.distance(query, r)))
            .collect();
        let comparisons = scored.len();
        scored.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
        scored.truncate(top_r);
        SearchResult {
            ranked: scored,
            class_chosen: Vec::new(),
            comparisons,
            profile_comparisons: 0,
            penetration: 1.0,
        }
    }
}

/// Accuracy and cost statistics of one search mode.
#[derive(Debug, Clone, Copy, Default)]
pub struct ModeStats {
    pub rank1_acc: f64,
    pub rankr_acc: f64,
    pub mean_penetration: f64,
    pub mean_comparisons: f64,
}

/// Evaluation of a labeled query set against clustered and linear search.
#[derive(Debug, Clone)]
pub struct EvalReport {
    pub db_size: usize,
    pub queries: usize,
    pub clustered: ModeStats,
    pub linear: ModeStats,
    /// Fraction of queries whose true record's cluster was selected in
    /// phase I.
    pub true_cluster_hit_rate: f64,
}

impl EvalReport {
    /// CSV rows: `db_size,mode,rank1_acc,rankr_acc,mean_penetration,
    /// mean_comparisons`. Header only when there were no queries.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "db_size,mode,rank1_acc,rankr_acc,mean_penetration,mean_comparisons\n",
        );
        if self.queries == 0 {
            return out;
        }
        for (mode, s) in [("clustered", &self.clustered), ("linear", &self.linear)] {
            writeln!(
                out,
                "{},{},{:.6},{:.6},{:.6},{:.6}",
                self.db_size, mode, s.rank1_acc, s.rankr_acc, s.mean_penetration, s.mean_comparisons
            )
            .unwrap();
        }
        out
    }
}

/// Runs every `(true_id, tuple)` query through both search modes.
pub fn evaluate_search(
    queries: &[(String, QueryTuple)],
    index: &SearchIndex,
    top_r: usize,
    tau_prune: u32,
) -> Result<EvalReport, SearchError> {
    let mut report = EvalReport {
        db_size: index.database_size(),
        queries: queries.len(),
        clustered: ModeStats::default(),
        linear: ModeStats::default(),
        true_cluster_hit_rate: 0.0,
    };
    if queries.is_empty() {
        return Ok(report);
    }
    let mut hits = 0usize;
    for (true_id, tuple) in queries {
        let clustered = index.query(tuple, top_r, tau_prune)?;
        let linear = index.linear_scan(tuple, top_r);
        if let Some(cid) = index.cluster_of(true_id) {
            if clustered.class_chosen.contains(&cid) {
                hits += 1;
            }
        }
        for (result, stats) in [
            (&clustered, &mut report.clustered),
            (&linear, &mut report.linear),
        ] {
            if result.ranked.first().map(|(id, _)| id.as_str()) == Some(true_id.as_str()) {
                stats.rank1_acc += 1.0;
            }
            if result.ranked.iter().any(|(id, _)| id == true_id) {
                stats.rankr_acc += 1.0;
            }
            stats.mean_penetration += result.penetration;
            stats.mean_comparisons += result.comparisons as f64;
        }
    }
    let n = queries.len() as f64;
    for stats in [&mut report.clustered, &mut report.linear] {
        stats.rank1_acc /= n;
        stats.rankr_acc /= n;
        stats.mean_penetration /= n;
        stats.mean_comparisons /= n;
    }
    report.true_cluster_hit_rate = hits as f64 / n;
    Ok(report)
}
