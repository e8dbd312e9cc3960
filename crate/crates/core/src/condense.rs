//! Condensation of the vanilla subgraph into a skeleton graph.
//!
//! Each fetched background node is described by its structure set: the
//! accessible targets within the hop cap, with their shortest hop distances.
//! Backgrounds with equal keys merge into one supernode whose feature is the
//! aggregate of its members.
//!
//! * [`Strategy::Alpha`] keys on the full set of `(target, distance)` pairs;
//!   skeleton edges are the quotient of the vanilla edges, all of weight 1.
//! * [`Strategy::Beta`] keys on the target set only. Each supernode links to
//!   each of its targets with raw weight `sum(1/d)` over member distances;
//!   the supernode/target block is then symmetrically normalized. Target to
//!   target edges are carried over with weight 1; background to background
//!   edges are dropped.
//! * [`Strategy::Gamma`] is Beta followed by folding: supernodes made only of
//!   affiliation-only members are removed and their features aggregated into
//!   the owning targets.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::dataset::FeatureMatrix;
use crate::fetch::{accessible_within, FetchResult};
use crate::graph::NodeId;
use crate::sig::round_sig9;
use crate::{par, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Strategy {
    Alpha,
    Beta,
    Gamma,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::Alpha => "alpha",
            Strategy::Beta => "beta",
            Strategy::Gamma => "gamma",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "alpha" => Some(Strategy::Alpha),
            "beta" => Some(Strategy::Beta),
            "gamma" => Some(Strategy::Gamma),
            _ => None,
        }
    }

    fn keeps_distances(self) -> bool {
        self == Strategy::Alpha
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Aggregation {
    #[default]
    Mean,
    Sum,
}

impl Aggregation {
    pub fn name(self) -> &'static str {
        match self {
            Aggregation::Mean => "mean",
            Aggregation::Sum => "sum",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "mean" => Some(Aggregation::Mean),
            "sum" => Some(Aggregation::Sum),
            _ => None,
        }
    }

    /// Element-wise pooling of `rows`, accumulated in `f64`.
    pub fn pool<'a>(self, dim: usize, rows: impl IntoIterator<Item = &'a [f32]>) -> Vec<f32> {
        let mut acc = vec![0.0f64; dim];
        let mut count = 0usize;
        for row in rows {
            for (a, &v) in acc.iter_mut().zip(row) {
                *a += v as f64;
            }
            count += 1;
        }
        if self == Aggregation::Mean && count > 0 {
            for a in &mut acc {
                *a /= count as f64;
            }
        }
        acc.into_iter().map(|v| v as f32).collect()
    }
}

impl fmt::Display for Aggregation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// How equal structure sets are detected.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Grouping {
    /// Exact comparison of the sorted pair list. Collision-free.
    #[default]
    Canonical,
    /// XOR of per-(target, distance) random 256-bit keys. Uses a fixed-width
    /// key per node instead of the pair list; distinct sets collide with
    /// probability about `2^-256` per pair of nodes.
    Xor { seed: u64 },
}

/// Structure set: accessible targets with shortest hop distances, sorted by
/// target id. Target ids are original graph ids.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Mss(Vec<(NodeId, u32)>);

impl Mss {
    /// Panics unless `pairs` is strictly ascending by target.
    pub fn from_pairs(pairs: Vec<(NodeId, u32)>) -> Self {
        assert!(
            pairs.windows(2).all(|w| w[0].0 < w[1].0),
            "structure set must be sorted by target without repeats"
        );
        Mss(pairs)
    }

    pub fn pairs(&self) -> &[(NodeId, u32)] {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    /// Drop distances.
    pub fn targets(&self) -> Vec<NodeId> {
        self.0.iter().map(|&(t, _)| t).collect()
    }

    pub fn distance_to(&self, t: NodeId) -> Option<u32> {
        self.0
            .binary_search_by_key(&t, |&(x, _)| x)
            .ok()
            .map(|i| self.0[i].1)
    }
}

/// Grouping key a supernode was formed under.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StructureKey {
    Full(Mss),
    TargetsOnly(Vec<NodeId>),
}

impl StructureKey {
    pub fn targets(&self) -> Vec<NodeId> {
        match self {
            StructureKey::Full(m) => m.targets(),
            StructureKey::TargetsOnly(t) => t.clone(),
        }
    }
}

/// Structure set of every fetched background node, ascending by original
/// id. Distances are measured on the vanilla subgraph along
/// background-interior paths, truncated at `hop_cap`.
pub fn compute_mss(fetch: &FetchResult, hop_cap: u32) -> Result<Vec<(NodeId, Mss)>> {
    if hop_cap < 1 {
        return Err(Error::InvalidConfig("hop cap must be at least 1".to_string()));
    }
    let g = &fetch.vanilla;
    let roles = &fetch.vanilla_roles;
    let targets = roles.targets();
    let reached = par::map_range(targets.len(), |i| {
        accessible_within(g, roles, targets[i], hop_cap)
    });
    let mut pairs: Vec<Vec<(NodeId, u32)>> = vec![Vec::new(); g.node_count()];
    // Targets ascend, so each list is built sorted by target.
    for (&t, hits) in targets.iter().zip(reached) {
        let t_orig = fetch.id_map.to_old(t);
        for (v, d) in hits {
            pairs[v.index()].push((t_orig, d));
        }
    }
    Ok(g.nodes()
        .filter(|&v| roles.is_background(v))
        .map(|v| {
            (
                fetch.id_map.to_old(v),
                Mss(core::mem::take(&mut pairs[v.index()])),
            )
        })
        .collect())
}

/// Raw supernode to target link before normalization.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TargetLink {
    /// Original target id.
    pub target: NodeId,
    /// `sum(1/d)` over the members' distances to `target`.
    pub raw_weight: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Supernode {
    /// Original ids, ascending.
    pub members: Vec<NodeId>,
    pub key: StructureKey,
    /// Empty for alpha.
    pub links: Vec<TargetLink>,
}

/// Undirected weighted skeleton edge between skeleton ids, `src < dst`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SkeletonEdge {
    pub src: u32,
    pub dst: u32,
    pub weight: f64,
}

/// Where a condensed background node ended up.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Assignment {
    /// Skeleton id of the supernode holding it.
    Supernode(u32),
    /// Skeleton id of the target it was folded into.
    Target(u32),
}

/// Condensed graph. Skeleton ids `0..targets.len()` are the preserved
/// targets in ascending original id; supernodes follow in ascending
/// grouping-key order.
#[derive(Clone, Debug, PartialEq)]
pub struct SkeletonGraph {
    pub strategy: Strategy,
    pub aggregation: Aggregation,
    pub targets: Vec<NodeId>,
    pub supernodes: Vec<Supernode>,
    /// Sorted by `(src, dst)`.
    pub edges: Vec<SkeletonEdge>,
    pub features: FeatureMatrix,
    /// Per target: affiliation nodes aggregated into its feature. Empty
    /// lists unless the strategy is gamma.
    pub folds: Vec<Vec<NodeId>>,
}

impl SkeletonGraph {
    pub fn node_count(&self) -> usize {
        self.targets.len() + self.supernodes.len()
    }

    pub fn target_count(&self) -> usize {
        self.targets.len()
    }

    /// Synthetic background nodes.
    pub fn background_count(&self) -> usize {
        self.supernodes.len()
    }

    pub fn supernode_id(&self, j: usize) -> u32 {
        (self.targets.len() + j) as u32
    }

    /// Every condensed background node and its assignment, ascending by
    /// original id. A node folded into several targets is assigned to the
    /// smallest one.
    pub fn membership(&self) -> BTreeMap<NodeId, Assignment> {
        let mut map = BTreeMap::new();
        for (j, s) in self.supernodes.iter().enumerate() {
            for &m in &s.members {
                map.insert(m, Assignment::Supernode(self.supernode_id(j)));
            }
        }
        for (i, folded) in self.folds.iter().enumerate() {
            for &m in folded {
                map.entry(m).or_insert(Assignment::Target(i as u32));
            }
        }
        map
    }

    /// Structural invariants that do not need the source dataset.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: alloc::string::String| Err(Error::Invariant(msg));
        if !self.targets.windows(2).all(|w| w[0] < w[1]) {
            return fail("targets are not strictly ascending".to_string());
        }
        if self.targets.is_empty() {
            return fail("skeleton has no targets".to_string());
        }
        let n = self.node_count();
        if self.features.rows() != n {
            return fail(format!(
                "{} feature rows for {n} skeleton nodes",
                self.features.rows()
            ));
        }
        if self.folds.len() != self.targets.len() {
            return fail(format!(
                "{} fold lists for {} targets",
                self.folds.len(),
                self.targets.len()
            ));
        }
        if self.strategy != Strategy::Gamma && self.folds.iter().any(|f| !f.is_empty()) {
            return fail(format!("strategy {} cannot fold nodes", self.strategy));
        }
        let is_target = |u: NodeId| self.targets.binary_search(&u).is_ok();
        let mut seen = BTreeMap::new();
        for (j, s) in self.supernodes.iter().enumerate() {
            if s.members.is_empty() {
                return fail(format!("supernode {} has no members", self.supernode_id(j)));
            }
            if !s.members.windows(2).all(|w| w[0] < w[1]) {
                return fail(format!(
                    "supernode {} member list is not strictly ascending",
                    self.supernode_id(j)
                ));
            }
            match (&s.key, self.strategy.keeps_distances()) {
                (StructureKey::Full(_), true) | (StructureKey::TargetsOnly(_), false) => {}
                _ => {
                    return fail(format!(
                        "supernode {} key does not match strategy {}",
                        self.supernode_id(j),
                        self.strategy
                    ))
                }
            }
            for &m in &s.members {
                if is_target(m) {
                    return fail(format!("target {m} listed as a supernode member"));
                }
                if seen.insert(m, j).is_some() {
                    return fail(format!("node {m} belongs to more than one supernode"));
                }
            }
            for l in &s.links {
                if !(l.raw_weight.is_finite() && l.raw_weight > 0.0) || !is_target(l.target) {
                    return fail(format!(
                        "supernode {} has an invalid link to {}",
                        self.supernode_id(j),
                        l.target
                    ));
                }
            }
        }
        for (i, folded) in self.folds.iter().enumerate() {
            for &m in folded {
                if seen.contains_key(&m) || is_target(m) {
                    return fail(format!(
                        "node {m} folded into target {i} is also kept elsewhere"
                    ));
                }
            }
        }
        let mut prev: Option<(u32, u32)> = None;
        for e in &self.edges {
            if e.src >= e.dst || e.dst as usize >= n {
                return fail(format!("bad edge ({}, {})", e.src, e.dst));
            }
            if prev.is_some_and(|p| p >= (e.src, e.dst)) {
                return fail(format!("edge ({}, {}) out of order or repeated", e.src, e.dst));
            }
            prev = Some((e.src, e.dst));
            if !(e.weight.is_finite() && e.weight > 0.0 && e.weight <= 1.0) {
                return fail(format!(
                    "edge ({}, {}) has weight {} outside (0, 1]",
                    e.src, e.dst, e.weight
                ));
            }
            let unit = self.strategy == Strategy::Alpha || (e.dst as usize) < self.targets.len();
            if unit && e.weight != 1.0 {
                return fail(format!(
                    "edge ({}, {}) must carry unit weight, found {}",
                    e.src, e.dst, e.weight
                ));
            }
            if self.strategy != Strategy::Alpha
                && (e.src as usize) >= self.targets.len()
            {
                return fail(format!(
                    "edge ({}, {}) joins two supernodes under strategy {}",
                    e.src, e.dst, self.strategy
                ));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CondenseOptions {
    pub strategy: Strategy,
    pub aggregation: Aggregation,
    /// Defaults to [`crate::FetchConfig::default_hop_cap`].
    pub hop_cap: Option<u32>,
    pub grouping: Grouping,
}

impl CondenseOptions {
    pub fn new(strategy: Strategy) -> Self {
        CondenseOptions {
            strategy,
            aggregation: Aggregation::Mean,
            hop_cap: None,
            grouping: Grouping::Canonical,
        }
    }

    pub fn with_aggregation(mut self, aggregation: Aggregation) -> Self {
        self.aggregation = aggregation;
        self
    }
}

pub fn condense_alpha(fetch: &FetchResult, x: &FeatureMatrix, agg: Aggregation) -> Result<SkeletonGraph> {
    condense(fetch, x, CondenseOptions::new(Strategy::Alpha).with_aggregation(agg))
}

pub fn condense_beta(fetch: &FetchResult, x: &FeatureMatrix, agg: Aggregation) -> Result<SkeletonGraph> {
    condense(fetch, x, CondenseOptions::new(Strategy::Beta).with_aggregation(agg))
}

pub fn condense_gamma(fetch: &FetchResult, x: &FeatureMatrix, agg: Aggregation) -> Result<SkeletonGraph> {
    condense(fetch, x, CondenseOptions::new(Strategy::Gamma).with_aggregation(agg))
}

fn xor_key_table(seed: u64) -> impl FnMut(NodeId, u32) -> [u64; 4] {
    let mut table: BTreeMap<(NodeId, u32), [u64; 4]> = BTreeMap::new();
    move |t, d| {
        *table.entry((t, d)).or_insert_with(|| {
            // Derived per pair so keys do not depend on visiting order.
            let mut rng =
                ChaCha20Rng::seed_from_u64(seed ^ ((t.0 as u64) << 32 | d as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            [rng.next_u64(), rng.next_u64(), rng.next_u64(), rng.next_u64()]
        })
    }
}

/// `x` holds the features of the original graph.
pub fn condense(fetch: &FetchResult, x: &FeatureMatrix, opts: CondenseOptions) -> Result<SkeletonGraph> {
    if x.rows() != fetch.original_node_count() {
        return Err(Error::SizeMismatch(format!(
            "{} feature rows for {} nodes",
            x.rows(),
            fetch.original_node_count()
        )));
    }
    let hop_cap = opts.hop_cap.unwrap_or_else(|| fetch.config.default_hop_cap());
    let mss = compute_mss(fetch, hop_cap)?;
    let key_of = |m: &Mss| {
        if opts.strategy.keeps_distances() {
            StructureKey::Full(m.clone())
        } else {
            StructureKey::TargetsOnly(m.targets())
        }
    };

    // (grouping key, structure key, members)
    let mut groups: Vec<(StructureKey, Vec<usize>)> = Vec::new();
    match opts.grouping {
        Grouping::Canonical => {
            let mut by_key: BTreeMap<StructureKey, Vec<usize>> = BTreeMap::new();
            for (i, (_, m)) in mss.iter().enumerate() {
                by_key.entry(key_of(m)).or_default().push(i);
            }
            groups.extend(by_key);
        }
        Grouping::Xor { seed } => {
            let mut key = xor_key_table(seed);
            let mut by_hash: BTreeMap<[u64; 4], (StructureKey, Vec<usize>)> = BTreeMap::new();
            for (i, (_, m)) in mss.iter().enumerate() {
                let mut h = [0u64; 4];
                for &(t, d) in m.pairs() {
                    let d = if opts.strategy.keeps_distances() { d } else { 0 };
                    for (a, b) in h.iter_mut().zip(key(t, d)) {
                        *a ^= b;
                    }
                }
                by_hash
                    .entry(h)
                    .or_insert_with(|| (key_of(m), Vec::new()))
                    .1
                    .push(i);
            }
            groups.extend(by_hash.into_values());
        }
    }

    let targets: Vec<NodeId> = fetch
        .vanilla_roles
        .targets()
        .iter()
        .map(|&t| fetch.id_map.to_old(t))
        .collect();
    let target_pos = |t: NodeId| targets.binary_search(&t).expect("target of structure set") as u32;

    // Gamma removes supernodes whose members were all fetched for
    // correlation alone.
    let mut folds: Vec<Vec<NodeId>> = vec![Vec::new(); targets.len()];
    if opts.strategy == Strategy::Gamma {
        groups.retain(|(_, members)| {
            let pure = members
                .iter()
                .all(|&i| fetch.role(mss[i].0).affiliation_only());
            if pure {
                for &i in members {
                    let node = mss[i].0;
                    let a = fetch
                        .affiliation
                        .binary_search_by_key(&node, |a| a.node)
                        .map(|p| &fetch.affiliation[p])
                        .expect("affiliation-only node has owners");
                    for o in &a.owners {
                        folds[target_pos(o.target) as usize].push(node);
                    }
                }
            }
            !pure
        });
        for f in &mut folds {
            f.sort_unstable();
        }
    }

    let n_targets = targets.len();
    let dim = x.dim();
    let mut supernodes = Vec::with_capacity(groups.len());
    for (key, members) in &groups {
        let mut links = Vec::new();
        if !opts.strategy.keeps_distances() {
            let mut raw: BTreeMap<NodeId, f64> = BTreeMap::new();
            for &i in members {
                for &(t, d) in mss[i].1.pairs() {
                    *raw.entry(t).or_insert(0.0) += 1.0 / d as f64;
                }
            }
            links = raw
                .into_iter()
                .map(|(target, raw_weight)| TargetLink { target, raw_weight })
                .collect();
        }
        supernodes.push(Supernode {
            members: members.iter().map(|&i| mss[i].0).collect(),
            key: key.clone(),
            links,
        });
    }

    let edges = match opts.strategy {
        Strategy::Alpha => {
            let mut unit = vec![0u32; fetch.vanilla.node_count()];
            for (pos, &t) in fetch.vanilla_roles.targets().iter().enumerate() {
                unit[t.index()] = pos as u32;
            }
            for (j, (_, members)) in groups.iter().enumerate() {
                for &i in members {
                    let v = fetch.id_map.to_new(mss[i].0).expect("fetched node in vanilla");
                    unit[v.index()] = (n_targets + j) as u32;
                }
            }
            let mut pairs: Vec<(u32, u32)> = fetch
                .vanilla
                .edges()
                .map(|(a, b)| (unit[a.index()], unit[b.index()]))
                .filter(|(a, b)| a != b)
                .map(|(a, b)| (a.min(b), a.max(b)))
                .collect();
            pairs.sort_unstable();
            pairs.dedup();
            pairs
                .into_iter()
                .map(|(src, dst)| SkeletonEdge { src, dst, weight: 1.0 })
                .collect()
        }
        Strategy::Beta | Strategy::Gamma => {
            let mut edges: Vec<SkeletonEdge> = fetch
                .vanilla
                .edges()
                .filter(|(a, b)| fetch.vanilla_roles.is_target(*a) && fetch.vanilla_roles.is_target(*b))
                .map(|(a, b)| SkeletonEdge {
                    src: target_pos(fetch.id_map.to_old(a)),
                    dst: target_pos(fetch.id_map.to_old(b)),
                    weight: 1.0,
                })
                .collect();
            // Symmetric normalization of the supernode/target block.
            let mut target_strength = vec![0.0f64; n_targets];
            for s in &supernodes {
                for l in &s.links {
                    target_strength[target_pos(l.target) as usize] += l.raw_weight;
                }
            }
            for (j, s) in supernodes.iter().enumerate() {
                let strength: f64 = s.links.iter().map(|l| l.raw_weight).sum();
                for l in &s.links {
                    let tp = target_pos(l.target);
                    let w = l.raw_weight
                        / libm::sqrt(strength * target_strength[tp as usize]);
                    edges.push(SkeletonEdge {
                        src: tp,
                        dst: (n_targets + j) as u32,
                        weight: round_sig9(w.min(1.0)),
                    });
                }
            }
            edges.sort_unstable_by_key(|e| (e.src, e.dst));
            edges
        }
    };

    let mut values = Vec::with_capacity((n_targets + supernodes.len()) * dim);
    for (i, &t) in targets.iter().enumerate() {
        if folds[i].is_empty() {
            values.extend_from_slice(x.row(t.index()));
        } else {
            let rows = core::iter::once(x.row(t.index()))
                .chain(folds[i].iter().map(|m| x.row(m.index())));
            values.extend(opts.aggregation.pool(dim, rows));
        }
    }
    for s in &supernodes {
        values.extend(opts.aggregation.pool(dim, s.members.iter().map(|m| x.row(m.index()))));
    }
    let features = FeatureMatrix::new(n_targets + supernodes.len(), dim, values)?;

    let skeleton = SkeletonGraph {
        strategy: opts.strategy,
        aggregation: opts.aggregation,
        targets,
        supernodes,
        edges,
        features,
        folds,
    };
    debug_assert_eq!(skeleton.validate(), Ok(()));
    Ok(skeleton)
}
