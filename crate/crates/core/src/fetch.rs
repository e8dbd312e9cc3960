//! Bridging and affiliation background-node fetching.
//!
//! A background node is *accessible* from a target when some path joins them
//! whose interior nodes are all backgrounds; targets stop propagation.
//!
//! * Bridging: the two nearest distinct accessible targets of a background
//!   node are at distances `a` and `b` with `a + b <= d1`.
//! * Affiliation: for each target, the `K` accessible backgrounds within `d2`
//!   hops with the largest Pearson correlation to the target's features.
//!
//! The two nearest targets come from a level-synchronous multi-source BFS in
//! which every background node accepts at most two labels (one per distinct
//! target) and relays each label once, so every adjacency list is scanned at
//! most twice. Within a level, candidate labels are applied in ascending
//! target id, which fixes which target wins a distance tie.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::dataset::{FeatureMatrix, RoleMask};
use crate::graph::{Graph, IdMap, NodeId};
use crate::{par, Error, Result};

/// Fetching depth and width.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FetchConfig {
    /// Budget on the summed distance to the two nearest distinct targets.
    pub d1: u32,
    /// Maximum hop distance of an affiliation node from its target.
    pub d2: u32,
    /// Affiliation nodes kept per target.
    pub k_affil: usize,
}

impl Default for FetchConfig {
    fn default() -> Self {
        FetchConfig {
            d1: 2,
            d2: 1,
            k_affil: 5,
        }
    }
}

impl FetchConfig {
    pub fn new(d1: u32, d2: u32, k_affil: usize) -> Result<Self> {
        let cfg = FetchConfig { d1, d2, k_affil };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d1 < 2 {
            return Err(Error::InvalidConfig(format!(
                "d1 must be at least 2 (a bridge needs one hop to each of two targets), got {}",
                self.d1
            )));
        }
        if self.d2 < 1 {
            return Err(Error::InvalidConfig(format!(
                "d2 must be at least 1, got {}",
                self.d2
            )));
        }
        Ok(())
    }

    /// Default ego-network hop cap used for structure sets: the deepest
    /// distance a fetched node can owe its selection to.
    pub fn default_hop_cap(&self) -> u32 {
        (self.d1 - 1).max(self.d2)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct TargetDistance {
    pub target: NodeId,
    pub dist: u32,
}

/// Nearest and second-nearest distinct accessible targets of a background.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DistanceRecord {
    pub best: TargetDistance,
    pub second: Option<TargetDistance>,
}

impl DistanceRecord {
    /// `best.dist + second.dist`, if a second target is accessible.
    pub fn bridge_sum(&self) -> Option<u32> {
        self.second.map(|s| self.best.dist + s.dist)
    }

    fn holds(&self, target: NodeId) -> bool {
        self.best.target == target || self.second.is_some_and(|s| s.target == target)
    }
}

/// Two-label multi-source BFS from every target, truncated at `max_depth`.
///
/// Returns one record per node; `None` for targets and for backgrounds with
/// no accessible target within `max_depth`.
pub fn nearest_two_targets(
    g: &Graph,
    roles: &RoleMask,
    max_depth: u32,
) -> Vec<Option<DistanceRecord>> {
    let mut records: Vec<Option<DistanceRecord>> = vec![None; g.node_count()];
    // (node, originating target) pairs settled at the current depth.
    let mut frontier: Vec<(NodeId, NodeId)> = roles.targets().iter().map(|&t| (t, t)).collect();
    let mut candidates: Vec<(NodeId, NodeId)> = Vec::new();
    for depth in 1..=max_depth {
        candidates.clear();
        for &(u, src) in &frontier {
            candidates.extend(
                g.neighbors(u)
                    .iter()
                    .filter(|&&v| roles.is_background(v))
                    .map(|&v| (v, src)),
            );
        }
        if candidates.is_empty() {
            break;
        }
        candidates.sort_unstable();
        candidates.dedup();
        frontier.clear();
        for &(v, src) in &candidates {
            let label = TargetDistance {
                target: src,
                dist: depth,
            };
            match &mut records[v.index()] {
                slot @ None => {
                    *slot = Some(DistanceRecord {
                        best: label,
                        second: None,
                    });
                }
                Some(rec) if rec.second.is_none() && !rec.holds(src) => rec.second = Some(label),
                Some(_) => continue,
            }
            frontier.push((v, src));
        }
    }
    records
}

/// Background nodes whose two nearest distinct accessible targets sum to at
/// most `d1` hops, in ascending id order, plus the distance records.
pub fn fetch_bridging(
    g: &Graph,
    roles: &RoleMask,
    d1: u32,
) -> Result<(Vec<NodeId>, Vec<Option<DistanceRecord>>)> {
    if d1 < 2 {
        return Err(Error::InvalidConfig(format!("d1 must be at least 2, got {d1}")));
    }
    let records = nearest_two_targets(g, roles, d1 - 1);
    let bridging = select_bridging(&records, d1);
    Ok((bridging, records))
}

fn select_bridging(records: &[Option<DistanceRecord>], d1: u32) -> Vec<NodeId> {
    records
        .iter()
        .enumerate()
        .filter(|(_, r)| r.and_then(|r| r.bridge_sum()).is_some_and(|s| s <= d1))
        .map(|(i, _)| NodeId(i as u32))
        .collect()
}

/// Pearson correlation over feature coordinates. A constant vector has no
/// defined correlation; it scores 0.
pub fn pearson(a: &[f32], b: &[f32]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let is_constant = |v: &[f32]| v.iter().all(|&x| x == v[0]);
    if a.is_empty() || is_constant(a) || is_constant(b) {
        return 0.0;
    }
    let n = a.len() as f64;
    let mean_a = a.iter().map(|&x| x as f64).sum::<f64>() / n;
    let mean_b = b.iter().map(|&x| x as f64).sum::<f64>() / n;
    let (mut cov, mut var_a, mut var_b) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        let dx = x as f64 - mean_a;
        let dy = y as f64 - mean_b;
        cov += dx * dy;
        var_a += dx * dx;
        var_b += dy * dy;
    }
    let denom = libm::sqrt(var_a * var_b);
    if denom == 0.0 {
        0.0
    } else {
        cov / denom
    }
}

/// Accessible backgrounds of `source` within `max_depth` hops, each with its
/// hop distance, in BFS order.
pub fn accessible_within(
    g: &Graph,
    roles: &RoleMask,
    source: NodeId,
    max_depth: u32,
) -> Vec<(NodeId, u32)> {
    let mut seen = BTreeSet::new();
    seen.insert(source);
    let mut out = Vec::new();
    let mut frontier = vec![source];
    let mut next = Vec::new();
    for depth in 1..=max_depth {
        for &u in &frontier {
            for &v in g.neighbors(u) {
                if roles.is_background(v) && seen.insert(v) {
                    out.push((v, depth));
                    next.push(v);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        core::mem::swap(&mut frontier, &mut next);
        next.clear();
    }
    out
}

/// A target that selected an affiliation node, with the correlation score.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AffiliationOwner {
    pub target: NodeId,
    pub pcc: f64,
}

/// An affiliation node with every target that selected it, ascending by
/// target id.
#[derive(Clone, Debug, PartialEq)]
pub struct Affiliation {
    pub node: NodeId,
    pub owners: Vec<AffiliationOwner>,
}

/// Top-`k_affil` correlated accessible backgrounds within `d2` hops of each
/// target, merged over targets and sorted by node id.
pub fn fetch_affiliation(
    g: &Graph,
    roles: &RoleMask,
    x: &FeatureMatrix,
    d2: u32,
    k_affil: usize,
) -> Result<Vec<Affiliation>> {
    if d2 < 1 {
        return Err(Error::InvalidConfig(format!("d2 must be at least 1, got {d2}")));
    }
    if x.rows() != g.node_count() {
        return Err(Error::SizeMismatch(format!(
            "{} feature rows for {} nodes",
            x.rows(),
            g.node_count()
        )));
    }
    if k_affil == 0 {
        return Ok(Vec::new());
    }
    if x.dim() < 2 {
        return Err(Error::FeatureDimTooSmall(x.dim()));
    }
    let targets = roles.targets();
    let picks = par::map_range(targets.len(), |i| {
        let t = targets[i];
        let mut scored: Vec<(NodeId, f64)> = accessible_within(g, roles, t, d2)
            .into_iter()
            .map(|(m, _)| (m, pearson(x.row(t.index()), x.row(m.index()))))
            .collect();
        // Largest correlation first; equal scores fall back to smaller id.
        scored.sort_unstable_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        scored.truncate(k_affil);
        scored
    });
    let mut merged: BTreeMap<NodeId, Vec<AffiliationOwner>> = BTreeMap::new();
    for (&target, picked) in targets.iter().zip(picks) {
        for (node, pcc) in picked {
            merged
                .entry(node)
                .or_default()
                .push(AffiliationOwner { target, pcc });
        }
    }
    Ok(merged
        .into_iter()
        .map(|(node, owners)| Affiliation { node, owners })
        .collect())
}

/// Why a background node was fetched.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct FetchedRole {
    pub bridging: bool,
    pub affiliation: bool,
}

impl FetchedRole {
    /// Selected only through feature correlation.
    pub fn affiliation_only(&self) -> bool {
        self.affiliation && !self.bridging
    }
}

/// Output of [`build_vanilla`]: the fetched sets and the induced subgraph
/// over targets plus fetched backgrounds.
#[derive(Clone, Debug, PartialEq)]
pub struct FetchResult {
    pub config: FetchConfig,
    pub bridging: Vec<NodeId>,
    pub affiliation: Vec<Affiliation>,
    /// Indexed by original node id.
    pub records: Vec<Option<DistanceRecord>>,
    pub vanilla: Graph,
    pub id_map: IdMap,
    /// Roles of the vanilla subgraph, in vanilla ids.
    pub vanilla_roles: RoleMask,
    /// Indexed by original node id; default for targets and unfetched nodes.
    roles_by_node: Vec<FetchedRole>,
}

impl FetchResult {
    /// All fetched background nodes, ascending original id.
    pub fn fetched(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.id_map
            .kept()
            .iter()
            .copied()
            .filter(|&u| self.is_fetched(u))
    }

    pub fn is_fetched(&self, u: NodeId) -> bool {
        let r = self.roles_by_node[u.index()];
        r.bridging || r.affiliation
    }

    pub fn role(&self, u: NodeId) -> FetchedRole {
        self.roles_by_node[u.index()]
    }

    pub fn fetched_count(&self) -> usize {
        self.id_map.len() - self.vanilla_roles.target_count()
    }

    /// Original node count of the graph the result was fetched from.
    pub fn original_node_count(&self) -> usize {
        self.roles_by_node.len()
    }

    /// Affiliation nodes selected by `target`.
    pub fn affiliation_of(&self, target: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.affiliation
            .iter()
            .filter(move |a| a.owners.iter().any(|o| o.target == target))
            .map(|a| a.node)
    }
}

/// Fetch both node sets and cut out the vanilla subgraph.
pub fn build_vanilla(
    g: &Graph,
    roles: &RoleMask,
    x: &FeatureMatrix,
    cfg: FetchConfig,
) -> Result<FetchResult> {
    cfg.validate()?;
    if roles.len() != g.node_count() {
        return Err(Error::SizeMismatch(format!(
            "role mask covers {} nodes, graph has {}",
            roles.len(),
            g.node_count()
        )));
    }
    let records = nearest_two_targets(g, roles, cfg.default_hop_cap());
    let bridging = select_bridging(&records, cfg.d1);
    let affiliation = fetch_affiliation(g, roles, x, cfg.d2, cfg.k_affil)?;

    let mut roles_by_node = vec![FetchedRole::default(); g.node_count()];
    for &b in &bridging {
        roles_by_node[b.index()].bridging = true;
    }
    for a in &affiliation {
        roles_by_node[a.node.index()].affiliation = true;
    }
    let keep: Vec<NodeId> = g
        .nodes()
        .filter(|&u| {
            let r = roles_by_node[u.index()];
            roles.is_target(u) || r.bridging || r.affiliation
        })
        .collect();
    let (vanilla, id_map) = g.induced_subgraph(&keep)?;
    let vanilla_roles = roles.restrict(id_map.kept())?;
    Ok(FetchResult {
        config: cfg,
        bridging,
        affiliation,
        records,
        vanilla,
        id_map,
        vanilla_roles,
        roles_by_node,
    })
}
