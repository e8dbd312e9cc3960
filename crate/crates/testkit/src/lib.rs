//! Independent reference implementations used only by tests.
//!
//! Everything here recomputes from the raw edge list with plain adjacency
//! sets and per-target BFS, never through the library's traversal code.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use skelgraph_core::{FeatureMatrix, Graph, NodeId, RoleMask};

pub type Adj = Vec<BTreeSet<u32>>;

pub fn adjacency(g: &Graph) -> Adj {
    let mut adj = vec![BTreeSet::new(); g.node_count()];
    for (u, v) in g.edges() {
        adj[u.index()].insert(v.0);
        adj[v.index()].insert(u.0);
    }
    adj
}

/// Random instance: `n` nodes, each pair joined with probability `p`,
/// a target fraction drawn from `[0.2, 0.5]`, and `dim` features drawn from
/// a small integer grid so that exact correlation ties occur.
pub struct Instance {
    pub graph: Graph,
    pub roles: RoleMask,
    pub features: FeatureMatrix,
}

pub fn random_instance(seed: u64, n: usize, p: f64, dim: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::new();
    for u in 0..n as u32 {
        for v in u + 1..n as u32 {
            if rng.random_bool(p) {
                pairs.push((NodeId(u), NodeId(v)));
            }
        }
    }
    let graph = skelgraph_core::graph::build_graph(n, pairs).unwrap();
    let frac = rng.random_range(0.2..=0.5);
    let mut mask: Vec<bool> = (0..n).map(|_| rng.random_bool(frac)).collect();
    mask[rng.random_range(0..n)] = true;
    let roles = RoleMask::new(mask).unwrap();
    let values = (0..n * dim)
        .map(|_| rng.random_range(-3i32..=3) as f32 * 0.5)
        .collect();
    let features = FeatureMatrix::new(n, dim, values).unwrap();
    Instance {
        graph,
        roles,
        features,
    }
}

/// BFS from `t` where only background nodes are entered. Returns hop
/// distances of reached backgrounds.
pub fn bfs_background(adj: &Adj, is_target: &[bool], t: u32, cap: u32) -> BTreeMap<u32, u32> {
    let mut dist = BTreeMap::new();
    let mut q = VecDeque::new();
    q.push_back((t, 0u32));
    let mut seen = BTreeSet::from([t]);
    while let Some((u, d)) = q.pop_front() {
        if d == cap {
            continue;
        }
        for &v in &adj[u as usize] {
            if !is_target[v as usize] && seen.insert(v) {
                dist.insert(v, d + 1);
                q.push_back((v, d + 1));
            }
        }
    }
    dist
}

/// All `(target, distance)` pairs of every reachable background, per
/// background, sorted by target.
pub fn all_target_distances(adj: &Adj, is_target: &[bool], cap: u32) -> BTreeMap<u32, Vec<(u32, u32)>> {
    let mut out: BTreeMap<u32, Vec<(u32, u32)>> = BTreeMap::new();
    for t in 0..adj.len() as u32 {
        if !is_target[t as usize] {
            continue;
        }
        for (b, d) in bfs_background(adj, is_target, t, cap) {
            out.entry(b).or_default().push((t, d));
        }
    }
    out
}

pub fn oracle_bridging(g: &Graph, roles: &RoleMask, d1: u32) -> BTreeSet<u32> {
    let adj = adjacency(g);
    let mut out = BTreeSet::new();
    for (b, pairs) in all_target_distances(&adj, roles.mask(), u32::MAX) {
        let mut ds: Vec<u32> = pairs.iter().map(|&(_, d)| d).collect();
        ds.sort();
        if ds.len() >= 2 && ds[0] + ds[1] <= d1 {
            out.insert(b);
        }
    }
    out
}

/// Textbook two-pass sample correlation; 0 for a constant vector.
pub fn oracle_pcc(a: &[f32], b: &[f32]) -> f64 {
    let n = a.len() as f64;
    let ma: f64 = a.iter().map(|&v| v as f64).sum::<f64>() / n;
    let mb: f64 = b.iter().map(|&v| v as f64).sum::<f64>() / n;
    let sa: f64 = a.iter().map(|&v| (v as f64 - ma).powi(2)).sum::<f64>();
    let sb: f64 = b.iter().map(|&v| (v as f64 - mb).powi(2)).sum::<f64>();
    let const_a = a.iter().all(|&v| v == a[0]);
    let const_b = b.iter().all(|&v| v == b[0]);
    if const_a || const_b {
        return 0.0;
    }
    let c: f64 = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| (x as f64 - ma) * (y as f64 - mb))
        .sum();
    c / (sa * sb).sqrt()
}

/// Node -> owning targets.
pub fn oracle_affiliation(
    g: &Graph,
    roles: &RoleMask,
    x: &FeatureMatrix,
    d2: u32,
    k: usize,
) -> BTreeMap<u32, BTreeSet<u32>> {
    let adj = adjacency(g);
    let mut out: BTreeMap<u32, BTreeSet<u32>> = BTreeMap::new();
    for &t in roles.targets() {
        let mut scored: Vec<(f64, u32)> = bfs_background(&adj, roles.mask(), t.0, d2)
            .keys()
            .map(|&m| (oracle_pcc(x.row(t.index()), x.row(m as usize)), m))
            .collect();
        scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
        for &(_, m) in scored.iter().take(k) {
            out.entry(m).or_default().insert(t.0);
        }
    }
    out
}

/// Brute-force structure sets on the subgraph of `g` induced by `keep`
/// (original ids), keyed by original id.
pub fn oracle_mss(
    g: &Graph,
    roles: &RoleMask,
    keep: &BTreeSet<u32>,
    cap: u32,
) -> BTreeMap<u32, Vec<(u32, u32)>> {
    let mut adj = vec![BTreeSet::new(); g.node_count()];
    for (u, v) in g.edges() {
        if keep.contains(&u.0) && keep.contains(&v.0) {
            adj[u.index()].insert(v.0);
            adj[v.index()].insert(u.0);
        }
    }
    let mut all = all_target_distances(&adj, roles.mask(), cap);
    keep.iter()
        .filter(|&&b| !roles.is_target(NodeId(b)))
        .map(|&b| (b, all.remove(&b).unwrap_or_default()))
        .collect()
}

/// Partition of nodes by the textual form of their key.
pub fn group_by_string_key(keys: &BTreeMap<u32, String>) -> BTreeSet<BTreeSet<u32>> {
    let mut groups: BTreeMap<&str, BTreeSet<u32>> = BTreeMap::new();
    for (n, k) in keys {
        groups.entry(k.as_str()).or_default().insert(*n);
    }
    groups.into_values().collect()
}

pub fn mss_string(pairs: &[(u32, u32)], with_distance: bool) -> String {
    pairs
        .iter()
        .map(|(t, d)| if with_distance { format!("{t}@{d}") } else { format!("{t}") })
        .collect::<Vec<_>>()
        .join(";")
}

/// Dense `D^-1/2 (A + I) D^-1/2` raised to `hops`, applied to `x`.
pub fn dense_propagate(n: usize, edges: &[(u32, u32, f64)], x: &[Vec<f64>], hops: usize) -> Vec<Vec<f64>> {
    let mut a = vec![vec![0.0; n]; n];
    for (i, row) in a.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for &(u, v, w) in edges {
        a[u as usize][v as usize] += w;
        a[v as usize][u as usize] += w;
    }
    let deg: Vec<f64> = a.iter().map(|r| r.iter().sum()).collect();
    for i in 0..n {
        for j in 0..n {
            a[i][j] /= (deg[i] * deg[j]).sqrt();
        }
    }
    let mut cur = x.to_vec();
    for _ in 0..hops {
        cur = (0..n)
            .map(|i| {
                (0..x[0].len())
                    .map(|c| (0..n).map(|j| a[i][j] * cur[j][c]).sum())
                    .collect()
            })
            .collect();
    }
    cur
}
