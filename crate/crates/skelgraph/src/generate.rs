//! Seeded stochastic-block-model datasets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric, Normal};
use skelgraph_core::graph::build_graph;
use skelgraph_core::{DatasetBundle, Error, FeatureMatrix, LabelVector, NodeId, Result, RoleMask};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SbmConfig {
    pub targets: usize,
    pub backgrounds: usize,
    pub communities: usize,
    /// Edge probability inside a community, for pairs with a target.
    pub p_intra: f64,
    /// Edge probability across communities, for pairs with a target.
    pub p_inter: f64,
    /// Background-background edge probability inside a community. The
    /// defaults make these edges only weakly community-aligned.
    pub p_bb_intra: f64,
    /// Background-background edge probability across communities.
    pub p_bb_inter: f64,
    pub dim: usize,
    /// Standard deviation of the per-node feature noise around the
    /// community centroid (centroid entries are standard normal).
    pub noise: f64,
}

impl Default for SbmConfig {
    fn default() -> Self {
        SbmConfig {
            targets: 2000,
            backgrounds: 8000,
            communities: 4,
            p_intra: 0.0024,
            p_inter: 0.0002,
            p_bb_intra: 0.0010,
            p_bb_inter: 0.0006,
            dim: 16,
            noise: 4.0,
        }
    }
}

impl SbmConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("p_intra", self.p_intra),
            ("p_inter", self.p_inter),
            ("p_bb_intra", self.p_bb_intra),
            ("p_bb_inter", self.p_bb_inter),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidConfig(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::InvalidConfig(format!("noise must be finite and non-negative, got {}", self.noise)));
        }
        if self.targets == 0 || self.communities == 0 || self.dim == 0 {
            return Err(Error::InvalidConfig(
                "targets, communities and dim must be positive".to_string(),
            ));
        }
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        self.targets + self.backgrounds
    }

    fn probability(&self, a: Block, b: Block) -> f64 {
        match (a.target || b.target, a.community == b.community) {
            (true, true) => self.p_intra,
            (true, false) => self.p_inter,
            (false, true) => self.p_bb_intra,
            (false, false) => self.p_bb_inter,
        }
    }

    /// Mean and variance of the edge count given the block sizes.
    pub fn edge_count_moments(&self, blocks: &[(Block, usize)]) -> (f64, f64) {
        let mut mean = 0.0;
        let mut var = 0.0;
        for (i, &(a, sa)) in blocks.iter().enumerate() {
            for &(b, sb) in &blocks[i..] {
                let pairs = if a == b { sa * sa.saturating_sub(1) / 2 } else { sa * sb } as f64;
                let p = self.probability(a, b);
                mean += pairs * p;
                var += pairs * p * (1.0 - p);
            }
        }
        (mean, var)
    }
}

/// Nodes sharing a role and a community.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Block {
    pub target: bool,
    pub community: u32,
}

/// Generated dataset plus the community of every node.
#[derive(Clone, Debug, PartialEq)]
pub struct Synthetic {
    pub bundle: DatasetBundle,
    pub community: Vec<u32>,
}

impl Synthetic {
    /// Every non-empty block with its size, ascending.
    pub fn block_sizes(&self) -> Vec<(Block, usize)> {
        let mut sizes = std::collections::BTreeMap::new();
        for (u, &community) in self.community.iter().enumerate() {
            let target = self.bundle.roles.is_target(NodeId(u as u32));
            *sizes.entry(Block { target, community }).or_insert(0) += 1;
        }
        sizes.into_iter().collect()
    }
}

/// Bernoulli(`p`) over every index in `0..len`, by geometric skipping.
fn bernoulli_indices(rng: &mut ChaCha8Rng, len: u64, p: f64, mut hit: impl FnMut(u64)) {
    if p <= 0.0 || len == 0 {
        return;
    }
    if p >= 1.0 {
        (0..len).for_each(hit);
        return;
    }
    let skip = Geometric::new(p).expect("probability in (0, 1)");
    let mut i = skip.sample(rng);
    while i < len {
        hit(i);
        i = i.saturating_add(1).saturating_add(skip.sample(rng));
    }
}

/// Position `k` of the strictly-upper-triangular pairs of `0..n`, row by row.
fn upper_pair(n: u64, mut k: u64) -> (u64, u64) {
    // Closed-form row estimate, then corrected against rounding.
    let nf = n as f64;
    let mut i = ((2.0 * nf - 1.0 - ((2.0 * nf - 1.0).powi(2) - 8.0 * k as f64).max(0.0).sqrt()) / 2.0) as u64;
    let start = |i: u64| i * (2 * n - i - 1) / 2;
    while i > 0 && start(i) > k {
        i -= 1;
    }
    while start(i + 1) <= k {
        i += 1;
    }
    k -= start(i);
    (i, i + 1 + k)
}

/// Nodes `0..targets` are targets; each node joins a uniform random
/// community, and each pair of nodes is joined independently with the
/// probability of its two blocks. Targets are labeled with their community.
/// Features are the community centroid plus isotropic Gaussian noise.
pub fn generate_synthetic(cfg: &SbmConfig, seed: u64) -> Result<Synthetic> {
    cfg.validate()?;
    let n = cfg.node_count();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let community: Vec<u32> = (0..n).map(|_| rng.random_range(0..cfg.communities as u32)).collect();
    let mut members: std::collections::BTreeMap<Block, Vec<u32>> = Default::default();
    for (u, &community) in community.iter().enumerate() {
        let target = u < cfg.targets;
        members.entry(Block { target, community }).or_default().push(u as u32);
    }
    let blocks: Vec<(Block, Vec<u32>)> = members.into_iter().collect();

    let mut pairs = Vec::new();
    for (i, (a, ma)) in blocks.iter().enumerate() {
        let na = ma.len() as u64;
        bernoulli_indices(&mut rng, na * na.saturating_sub(1) / 2, cfg.probability(*a, *a), |k| {
            let (i, j) = upper_pair(na, k);
            pairs.push((NodeId(ma[i as usize]), NodeId(ma[j as usize])));
        });
        for (b, mb) in &blocks[i + 1..] {
            let nb = mb.len() as u64;
            bernoulli_indices(&mut rng, na * nb, cfg.probability(*a, *b), |k| {
                pairs.push((NodeId(ma[(k / nb) as usize]), NodeId(mb[(k % nb) as usize])));
            });
        }
    }
    let graph = build_graph(n, pairs)?;

    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let centroids: Vec<Vec<f64>> = (0..cfg.communities)
        .map(|_| (0..cfg.dim).map(|_| normal.sample(&mut rng)).collect())
        .collect();
    let mut values = Vec::with_capacity(n * cfg.dim);
    for &c in &community {
        for &m in &centroids[c as usize] {
            values.push((m + cfg.noise * normal.sample(&mut rng)) as f32);
        }
    }
    let features = FeatureMatrix::new(n, cfg.dim, values)?;
    let roles = RoleMask::new((0..n).map(|u| u < cfg.targets).collect())?;
    let labels = LabelVector::new(
        (0..n).map(|u| (u < cfg.targets).then_some(community[u])).collect(),
        Some(cfg.communities as u32),
    )?;
    let bundle = DatasetBundle::with_numeric_ids(graph, roles, features, Some(labels))?;
    Ok(Synthetic { bundle, community })
}
