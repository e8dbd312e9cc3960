//! Linear message passing along paths, and a computational check that two
//! background nodes with equal structure sets are interchangeable for any
//! linear path-passing function ending at a shared target.
//!
//! A single step from `u` into `v` computes `AGGREGATE({x_v, x'_u}) W^i`.
//! Along a path `u_0 .. u_l` the running feature is folded step by step.
//! Several paths ending at one target `T` combine as
//! `AGGREGATE({x_T} ∪ {x'_{u*}}) W^T`, where `u*` is the node before `T` on
//! each path. All arithmetic is `f64`.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::condense::{Aggregation, Mss};
use crate::dataset::{FeatureMatrix, RoleMask};
use crate::fetch::accessible_within;
use crate::graph::{Graph, NodeId};
use crate::linalg::{max_abs_diff, vec_mat, Matrix};
use crate::{Error, Result};

/// Per-step weights `W^1..W^l`, the weight `W^T` applied at the meeting
/// target, and the pooling used by every step.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearPassSpec {
    pub steps: Vec<Matrix>,
    pub target_weight: Matrix,
    pub aggregation: Aggregation,
}

impl LinearPassSpec {
    /// Entries uniform in `[-1, 1]`.
    pub fn random<R: Rng>(dim: usize, steps: usize, aggregation: Aggregation, rng: &mut R) -> Self {
        let mut draw = || Matrix::from_fn(dim, dim, |_, _| rng.random_range(-1.0..=1.0));
        LinearPassSpec {
            steps: (0..steps).map(|_| draw()).collect(),
            target_weight: draw(),
            aggregation,
        }
    }

    pub fn identity(dim: usize, steps: usize, aggregation: Aggregation) -> Self {
        LinearPassSpec {
            steps: vec![Matrix::identity(dim); steps],
            target_weight: Matrix::identity(dim),
            aggregation,
        }
    }

    pub fn dim(&self) -> usize {
        self.target_weight.rows()
    }

    fn check(&self) -> Result<()> {
        let d = self.dim();
        let square = |m: &Matrix| m.rows() == d && m.cols() == d;
        if !square(&self.target_weight) || !self.steps.iter().all(square) {
            return Err(Error::SizeMismatch(format!(
                "all pass weights must be {d}x{d}"
            )));
        }
        Ok(())
    }
}

fn pool(agg: Aggregation, rows: &[&[f64]]) -> Vec<f64> {
    let mut out = vec![0.0; rows[0].len()];
    for r in rows {
        for (o, v) in out.iter_mut().zip(r.iter()) {
            *o += v;
        }
    }
    if agg == Aggregation::Mean {
        let n = rows.len() as f64;
        out.iter_mut().for_each(|o| *o /= n);
    }
    out
}

/// One linear message-passing step; `step` is 1-based.
pub fn lmp(spec: &LinearPassSpec, x_prev: &[f64], x_cur: &[f64], step: usize) -> Result<Vec<f64>> {
    spec.check()?;
    let w = step
        .checked_sub(1)
        .and_then(|i| spec.steps.get(i))
        .ok_or_else(|| Error::SizeMismatch(format!("no weight for step {step}")))?;
    if x_prev.len() != spec.dim() || x_cur.len() != spec.dim() {
        return Err(Error::SizeMismatch(format!(
            "feature length {} / {} against weight dimension {}",
            x_prev.len(),
            x_cur.len(),
            spec.dim()
        )));
    }
    Ok(vec_mat(&pool(spec.aggregation, &[x_cur, x_prev]), w))
}

/// Fold [`lmp`] along `path`, returning the running feature at its last
/// node. Needs at least two nodes.
pub fn lmpp_path(spec: &LinearPassSpec, x: &Matrix, path: &[NodeId]) -> Result<Vec<f64>> {
    if path.len() < 2 {
        return Err(Error::InvalidConfig(format!(
            "a path needs at least 2 nodes, got {}",
            path.len()
        )));
    }
    fold_path(spec, x, path)
}

fn fold_path(spec: &LinearPassSpec, x: &Matrix, path: &[NodeId]) -> Result<Vec<f64>> {
    let row = |u: NodeId| {
        if u.index() < x.rows() {
            Ok(x.row(u.index()))
        } else {
            Err(Error::UnknownNode(u))
        }
    };
    let mut cur = row(path[0])?.to_vec();
    for (i, &u) in path.iter().enumerate().skip(1) {
        cur = lmp(spec, &cur, row(u)?, i)?;
    }
    Ok(cur)
}

/// Combine several paths that all end at `target` (each path lists its
/// source first and `target` last).
pub fn multi_path_aggregate(
    spec: &LinearPassSpec,
    x: &Matrix,
    paths: &[Vec<NodeId>],
    target: NodeId,
) -> Result<Vec<f64>> {
    spec.check()?;
    let mut arrivals = Vec::with_capacity(paths.len());
    for p in paths {
        if p.len() < 2 || *p.last().unwrap() != target {
            return Err(Error::InvalidConfig(format!(
                "path must end at target {target} and have at least 2 nodes"
            )));
        }
        arrivals.push(fold_path(spec, x, &p[..p.len() - 1])?);
    }
    if target.index() >= x.rows() {
        return Err(Error::UnknownNode(target));
    }
    let mut rows: Vec<&[f64]> = vec![x.row(target.index())];
    rows.extend(arrivals.iter().map(|a| a.as_slice()));
    Ok(vec_mat(&pool(spec.aggregation, &rows), &spec.target_weight))
}

/// Hop distance to `target` of every node reachable along
/// background-interior paths (`u32::MAX` elsewhere, 0 at `target`).
fn distances_from(g: &Graph, roles: &RoleMask, target: NodeId) -> Vec<u32> {
    let mut dist = vec![u32::MAX; g.node_count()];
    dist[target.index()] = 0;
    for (v, d) in accessible_within(g, roles, target, u32::MAX) {
        dist[v.index()] = d;
    }
    dist
}

/// Lexicographically smallest shortest background-interior path from
/// `source` to `target`, listed source first.
pub fn canonical_path(
    g: &Graph,
    roles: &RoleMask,
    source: NodeId,
    target: NodeId,
) -> Option<Vec<NodeId>> {
    canonical_path_with(g, roles, &distances_from(g, roles, target), source, target)
}

fn canonical_path_with(
    g: &Graph,
    roles: &RoleMask,
    dist: &[u32],
    source: NodeId,
    target: NodeId,
) -> Option<Vec<NodeId>> {
    if dist[source.index()] == u32::MAX {
        return None;
    }
    let mut path = vec![source];
    let mut cur = source;
    while cur != target {
        let want = dist[cur.index()] - 1;
        cur = *g.neighbors(cur).iter().find(|&&w| {
            dist[w.index()] == want && (w == target || roles.is_background(w))
        })?;
        path.push(cur);
    }
    Some(path)
}

fn to_f64(x: &FeatureMatrix) -> Matrix {
    Matrix::from_vec(x.rows(), x.dim(), x.values().iter().map(|&v| v as f64).collect())
}

fn swapped(x: &Matrix, u: NodeId, v: NodeId) -> Matrix {
    let mut out = x.clone();
    let ru = x.row(u.index()).to_vec();
    let rv = x.row(v.index()).to_vec();
    out.row_mut(u.index()).copy_from_slice(&rv);
    out.row_mut(v.index()).copy_from_slice(&ru);
    out
}

/// Outcome of one swap evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct SwapOutcome {
    pub deviation: f64,
    /// The two source paths share no node other than the target.
    pub disjoint: bool,
}

/// `|f(X, P)[T] - f(X~, P)[T]|_inf` where `X~` swaps the rows of `u` and
/// `v` and `P` holds the canonical shortest paths from `u` and `v` to
/// `target`. Both sources must be accessible from `target`.
pub fn swap_deviation(
    spec: &LinearPassSpec,
    g: &Graph,
    roles: &RoleMask,
    x: &Matrix,
    u: NodeId,
    v: NodeId,
    target: NodeId,
) -> Result<SwapOutcome> {
    let dist = distances_from(g, roles, target);
    swap_deviation_with(spec, g, roles, x, &dist, u, v, target)
}

#[allow(clippy::too_many_arguments)]
fn swap_deviation_with(
    spec: &LinearPassSpec,
    g: &Graph,
    roles: &RoleMask,
    x: &Matrix,
    dist: &[u32],
    u: NodeId,
    v: NodeId,
    target: NodeId,
) -> Result<SwapOutcome> {
    let path = |s: NodeId| {
        canonical_path_with(g, roles, dist, s, target).ok_or_else(|| {
            Error::InvalidConfig(format!("{s} is not accessible from target {target}"))
        })
    };
    let (pu, pv) = (path(u)?, path(v)?);
    let disjoint = pu[..pu.len() - 1]
        .iter()
        .all(|a| !pv[..pv.len() - 1].contains(a));
    let paths = [pu, pv];
    let before = multi_path_aggregate(spec, x, &paths, target)?;
    let after = multi_path_aggregate(spec, &swapped(x, u, v), &paths, target)?;
    Ok(SwapOutcome {
        deviation: max_abs_diff(&before, &after),
        disjoint,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SwapReport {
    /// Distinct `(u, v, T)` triples with equal non-empty structure sets.
    pub qualifying_triples: usize,
    /// Triples evaluated (each under `trials` random specs).
    pub evaluated_triples: usize,
    pub disjoint_triples: usize,
    pub overlapping_triples: usize,
    pub evaluations: usize,
    pub max_deviation: f64,
    pub tolerance: f64,
}

impl SwapReport {
    /// True when every evaluation stayed within tolerance. With no
    /// qualifying triple this holds vacuously.
    pub fn passed(&self) -> bool {
        self.max_deviation <= self.tolerance
    }

    pub fn vacuous(&self) -> bool {
        self.qualifying_triples == 0
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SwapCheckConfig {
    /// Random weight draws per triple; aggregation alternates mean / sum.
    pub trials: usize,
    pub tolerance: f64,
    /// Cap on evaluated triples, sampled uniformly when exceeded.
    pub max_triples: usize,
    pub seed: u64,
}

impl Default for SwapCheckConfig {
    fn default() -> Self {
        SwapCheckConfig {
            trials: 4,
            tolerance: 1e-9,
            max_triples: 200,
            seed: 0,
        }
    }
}

/// Largest graph the swap check accepts.
pub const SWAP_CHECK_MAX_NODES: usize = 500;

/// Swap-invariance check over every pair of background nodes with equal
/// non-empty structure sets (uncapped hop distances on `g`) and each target
/// they share.
pub fn check_swap_invariance(
    g: &Graph,
    roles: &RoleMask,
    x: &FeatureMatrix,
    cfg: SwapCheckConfig,
) -> Result<SwapReport> {
    if g.node_count() > SWAP_CHECK_MAX_NODES {
        return Err(Error::InvalidConfig(format!(
            "swap check is limited to {SWAP_CHECK_MAX_NODES} nodes, graph has {}",
            g.node_count()
        )));
    }
    if x.rows() != g.node_count() {
        return Err(Error::SizeMismatch(format!(
            "{} feature rows for {} nodes",
            x.rows(),
            g.node_count()
        )));
    }
    let xf = to_f64(x);
    let dists: BTreeMap<NodeId, Vec<u32>> = roles
        .targets()
        .iter()
        .map(|&t| (t, distances_from(g, roles, t)))
        .collect();
    let mut groups: BTreeMap<Mss, Vec<NodeId>> = BTreeMap::new();
    for b in roles.backgrounds() {
        let pairs: Vec<(NodeId, u32)> = dists
            .iter()
            .filter(|(_, d)| d[b.index()] != u32::MAX)
            .map(|(&t, d)| (t, d[b.index()]))
            .collect();
        if !pairs.is_empty() {
            groups.entry(Mss::from_pairs(pairs)).or_default().push(b);
        }
    }
    let mut triples = Vec::new();
    for (mss, members) in &groups {
        for (i, &u) in members.iter().enumerate() {
            for &v in &members[i + 1..] {
                for &(t, _) in mss.pairs() {
                    triples.push((u, v, t));
                }
            }
        }
    }
    let qualifying = triples.len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    if triples.len() > cfg.max_triples {
        // Partial Fisher-Yates keeps a uniform sample in the prefix.
        for i in 0..cfg.max_triples {
            let j = rng.random_range(i..triples.len());
            triples.swap(i, j);
        }
        triples.truncate(cfg.max_triples);
        triples.sort_unstable();
    }
    let mut report = SwapReport {
        qualifying_triples: qualifying,
        evaluated_triples: triples.len(),
        disjoint_triples: 0,
        overlapping_triples: 0,
        evaluations: 0,
        max_deviation: 0.0,
        tolerance: cfg.tolerance,
    };
    for &(u, v, t) in &triples {
        let dist = &dists[&t];
        let steps = dist[u.index()] as usize;
        let mut disjoint = true;
        for trial in 0..cfg.trials {
            let agg = if trial % 2 == 0 { Aggregation::Mean } else { Aggregation::Sum };
            let spec = LinearPassSpec::random(x.dim(), steps.max(1), agg, &mut rng);
            let out = swap_deviation_with(&spec, g, roles, &xf, dist, u, v, t)?;
            disjoint = out.disjoint;
            report.max_deviation = report.max_deviation.max(out.deviation);
            report.evaluations += 1;
        }
        if disjoint {
            report.disjoint_triples += 1;
        } else {
            report.overlapping_triples += 1;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_graph;

    fn graph(n: usize, raw: &[(u32, u32)]) -> Graph {
        build_graph(n, raw.iter().map(|&(a, b)| (NodeId(a), NodeId(b)))).unwrap()
    }

    #[test]
    fn sum_identity_adds() {
        let spec = LinearPassSpec::identity(2, 1, Aggregation::Sum);
        assert_eq!(lmp(&spec, &[1.0, 2.0], &[3.0, 5.0], 1).unwrap(), vec![4.0, 7.0]);
    }

    #[test]
    fn mean_identity_fixed_point() {
        let spec = LinearPassSpec::identity(2, 3, Aggregation::Mean);
        assert_eq!(lmp(&spec, &[1.5, -2.0], &[1.5, -2.0], 1).unwrap(), vec![1.5, -2.0]);
        let x = Matrix::from_vec(4, 2, [0.25, 3.0].repeat(4));
        let path = [NodeId(0), NodeId(1), NodeId(2), NodeId(3)];
        assert_eq!(lmpp_path(&spec, &x, &path).unwrap(), vec![0.25, 3.0]);
    }

    #[test]
    fn two_node_path_sums_endpoints() {
        let spec = LinearPassSpec::identity(2, 1, Aggregation::Sum);
        let x = Matrix::from_vec(2, 2, vec![1.0, 2.0, 10.0, 20.0]);
        assert_eq!(
            lmpp_path(&spec, &x, &[NodeId(0), NodeId(1)]).unwrap(),
            vec![11.0, 22.0]
        );
    }

    #[test]
    fn errors() {
        let spec = LinearPassSpec::identity(2, 1, Aggregation::Sum);
        assert!(lmp(&spec, &[1.0], &[1.0, 2.0], 1).is_err());
        assert!(lmp(&spec, &[1.0, 1.0], &[1.0, 2.0], 2).is_err());
        let x = Matrix::zeros(2, 2);
        assert!(lmpp_path(&spec, &x, &[NodeId(0)]).is_err());
        assert!(lmpp_path(&spec, &x, &[NodeId(0), NodeId(5)]).is_err());
    }

    #[test]
    fn canonical_path_picks_smallest() {
        // 4 reaches target 0 through 2 or 3.
        let g = graph(5, &[(0, 2), (0, 3), (2, 4), (3, 4), (1, 4)]);
        let roles = RoleMask::from_targets(5, &[NodeId(0), NodeId(1)]).unwrap();
        assert_eq!(
            canonical_path(&g, &roles, NodeId(4), NodeId(0)),
            Some(vec![NodeId(4), NodeId(2), NodeId(0)])
        );
    }

    #[test]
    fn degenerate_swap_is_exact() {
        let g = graph(4, &[(0, 2), (2, 3), (3, 1)]);
        let roles = RoleMask::from_targets(4, &[NodeId(0), NodeId(1)]).unwrap();
        let x = Matrix::from_fn(4, 3, |i, j| (i * 3 + j) as f64 * 0.37 - 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let spec = LinearPassSpec::random(3, 2, Aggregation::Mean, &mut rng);
        let out = swap_deviation(&spec, &g, &roles, &x, NodeId(3), NodeId(3), NodeId(0)).unwrap();
        assert_eq!(out.deviation, 0.0);
    }

    #[test]
    fn swap_check_rejects_large_graph() {
        let g = Graph::empty(SWAP_CHECK_MAX_NODES + 1);
        let roles = RoleMask::from_targets(g.node_count(), &[NodeId(0)]).unwrap();
        let x = FeatureMatrix::zeros(g.node_count(), 2);
        assert!(check_swap_invariance(&g, &roles, &x, SwapCheckConfig::default()).is_err());
    }
}
