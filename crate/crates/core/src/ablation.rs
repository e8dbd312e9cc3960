//! Edge-cut ablations: remove one class of edges and re-score targets.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{DatasetBundle, RoleMask};
use crate::eval::{
    labeled_targets, mean_std, propagate, train_eval, PropClassifierConfig, Split, WeightedAdjacency,
};
use crate::linalg::Matrix;
use crate::graph::{Graph, NodeId};
use crate::{par, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CutKind {
    None,
    /// Uniform removal of `floor(ratio * |E|)` edges.
    Random,
    /// Target to target.
    Tt,
    /// Target to background.
    Tb,
    /// Background to background.
    Bb,
    /// Target to background edges at backgrounds adjacent to two or more
    /// targets (1-hop T-B-T bridges).
    Bridb,
}

impl CutKind {
    pub fn name(self) -> &'static str {
        match self {
            CutKind::None => "none",
            CutKind::Random => "random",
            CutKind::Tt => "tt",
            CutKind::Tb => "tb",
            CutKind::Bb => "bb",
            CutKind::Bridb => "bridb",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CutSpec {
    pub kind: CutKind,
    /// Used by [`CutKind::Random`] only.
    pub ratio: f64,
    pub seed: u64,
}

impl CutSpec {
    pub fn class(kind: CutKind) -> Self {
        CutSpec {
            kind,
            ratio: 0.0,
            seed: 0,
        }
    }

    pub fn random(ratio: f64, seed: u64) -> Self {
        CutSpec {
            kind: CutKind::Random,
            ratio,
            seed,
        }
    }

    /// Random cut removing the same fraction of edges as the class cut
    /// `kind` would.
    pub fn matched_random(g: &Graph, roles: &RoleMask, kind: CutKind, seed: u64) -> Self {
        let removed = g.edges().filter(|&(u, v)| in_class(g, roles, kind, u, v)).count();
        let ratio = if g.edge_count() == 0 {
            0.0
        } else {
            removed as f64 / g.edge_count() as f64
        };
        Self::random(ratio, seed)
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind == CutKind::Random && !(0.0..=1.0).contains(&self.ratio) {
            return Err(Error::InvalidConfig(format!(
                "cut ratio {} outside [0, 1]",
                self.ratio
            )));
        }
        Ok(())
    }
}

impl fmt::Display for CutSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            CutKind::Random => write!(f, "random:{:.4}", self.ratio),
            k => f.write_str(k.name()),
        }
    }
}

fn bridges(g: &Graph, roles: &RoleMask, b: NodeId) -> bool {
    roles.is_background(b) && g.neighbors(b).iter().filter(|&&t| roles.is_target(t)).take(2).count() == 2
}

fn in_class(g: &Graph, roles: &RoleMask, kind: CutKind, u: NodeId, v: NodeId) -> bool {
    let (tu, tv) = (roles.is_target(u), roles.is_target(v));
    match kind {
        CutKind::None | CutKind::Random => false,
        CutKind::Tt => tu && tv,
        CutKind::Tb => tu != tv,
        CutKind::Bb => !tu && !tv,
        CutKind::Bridb => tu != tv && (bridges(g, roles, u) || bridges(g, roles, v)),
    }
}

/// Edge counts per class; the three sum to `|E|`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EdgeClassCounts {
    pub tt: usize,
    pub tb: usize,
    pub bb: usize,
}

pub fn edge_class_counts(g: &Graph, roles: &RoleMask) -> EdgeClassCounts {
    let mut c = EdgeClassCounts::default();
    for (u, v) in g.edges() {
        match (roles.is_target(u), roles.is_target(v)) {
            (true, true) => c.tt += 1,
            (false, false) => c.bb += 1,
            _ => c.tb += 1,
        }
    }
    c
}

/// Same node set, edges of the chosen class removed.
pub fn apply_cut(g: &Graph, roles: &RoleMask, spec: &CutSpec) -> Result<Graph> {
    spec.validate()?;
    let kept: Vec<(NodeId, NodeId)> = match spec.kind {
        CutKind::Random => {
            let mut edges: Vec<(NodeId, NodeId)> = g.edges().collect();
            let remove = (spec.ratio * edges.len() as f64) as usize;
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            for i in 0..remove {
                let j = rng.random_range(i..edges.len());
                edges.swap(i, j);
            }
            edges.split_off(remove)
        }
        kind => g.edges().filter(|&(u, v)| !in_class(g, roles, kind, u, v)).collect(),
    };
    crate::graph::build_graph(g.node_count(), kept)
}

#[derive(Clone, Debug, PartialEq)]
pub struct AblationConfig {
    pub classifier: PropClassifierConfig,
    /// One classifier run (and one random-cut draw) per seed.
    pub seeds: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AblationRow {
    pub label: String,
    pub removed_edges: usize,
    pub mean: f64,
    pub std: f64,
    pub scores: Vec<f64>,
}

/// Test accuracy per cut spec, in the order given. Random cuts draw with
/// `spec.seed + run seed`.
pub fn run_ablation(
    bundle: &DatasetBundle,
    specs: &[CutSpec],
    cfg: &AblationConfig,
) -> Result<Vec<AblationRow>> {
    let labels = bundle.labels.as_ref().ok_or(Error::MissingLabels)?;
    for s in specs {
        s.validate()?;
    }
    let (rows, y) = labeled_targets(bundle.roles.targets(), labels);
    let rows: Vec<u32> = rows.into_iter().map(|t| t.0).collect();
    let classes = labels.num_classes() as usize;
    let results = par::map_range(specs.len(), |i| -> Result<AblationRow> {
        let spec = specs[i];
        let features_of = |g: &Graph| {
            let propagated = propagate(&WeightedAdjacency::from_graph(g), &bundle.features, cfg.classifier.hops);
            Matrix::from_fn(rows.len(), bundle.features.dim(), |r, j| propagated[(rows[r] as usize, j)])
        };
        let run = |x: &Matrix, seed: u64| -> Result<f64> {
            let split = Split::new(rows.len(), &cfg.classifier, seed);
            Ok(train_eval(x, &y, classes, &split, &cfg.classifier)?.test_accuracy)
        };
        let mut scores = Vec::with_capacity(cfg.seeds.len());
        let mut removed = 0;
        if spec.kind == CutKind::Random {
            for &seed in &cfg.seeds {
                let mut run_spec = spec;
                run_spec.seed = spec.seed.wrapping_add(seed);
                let cut = apply_cut(&bundle.graph, &bundle.roles, &run_spec)?;
                removed = bundle.graph.edge_count() - cut.edge_count();
                scores.push(run(&features_of(&cut), seed)?);
            }
        } else {
            // Class cuts do not depend on the seed; propagate once.
            let cut = apply_cut(&bundle.graph, &bundle.roles, &spec)?;
            removed = bundle.graph.edge_count() - cut.edge_count();
            let x = features_of(&cut);
            for &seed in &cfg.seeds {
                scores.push(run(&x, seed)?);
            }
        }
        let (mean, std) = mean_std(&scores);
        Ok(AblationRow {
            label: format!("{spec}"),
            removed_edges: removed,
            mean,
            std,
            scores,
        })
    });
    results.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_graph;

    // Targets 0, 1; backgrounds 2, 3, 4. 2 bridges 0 and 1.
    fn sample() -> (Graph, RoleMask) {
        let raw = [(0, 1), (0, 2), (1, 2), (2, 3), (3, 4), (1, 4)];
        let g = build_graph(5, raw.iter().map(|&(a, b)| (NodeId(a), NodeId(b)))).unwrap();
        (g, RoleMask::from_targets(5, &[NodeId(0), NodeId(1)]).unwrap())
    }

    #[test]
    fn class_counts_partition_edges() {
        let (g, r) = sample();
        let c = edge_class_counts(&g, &r);
        assert_eq!((c.tt, c.tb, c.bb), (1, 3, 2));
        assert_eq!(c.tt + c.tb + c.bb, g.edge_count());
    }

    #[test]
    fn zero_ratio_random_is_identity() {
        let (g, r) = sample();
        assert_eq!(apply_cut(&g, &r, &CutSpec::random(0.0, 3)).unwrap(), g);
        assert!(apply_cut(&g, &r, &CutSpec::random(1.5, 3)).is_err());
    }

    #[test]
    fn tb_then_bb_isolates_backgrounds() {
        let (g, r) = sample();
        let a = apply_cut(&g, &r, &CutSpec::class(CutKind::Tb)).unwrap();
        let b = apply_cut(&a, &r, &CutSpec::class(CutKind::Bb)).unwrap();
        assert_eq!(b.node_count(), g.node_count());
        for u in r.backgrounds() {
            assert_eq!(b.degree(u), 0);
        }
        assert_eq!(b.edge_count(), 1);
    }

    #[test]
    fn bridb_removes_bridge_incidence() {
        let (g, r) = sample();
        let c = apply_cut(&g, &r, &CutSpec::class(CutKind::Bridb)).unwrap();
        assert_eq!(c.degree(NodeId(2)), 1);
        assert!(c.has_edge(NodeId(1), NodeId(4)));
    }

    #[test]
    fn random_cut_reproducible() {
        let (g, r) = sample();
        let a = apply_cut(&g, &r, &CutSpec::random(0.5, 42)).unwrap();
        let b = apply_cut(&g, &r, &CutSpec::random(0.5, 42)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.edge_count(), 3);
    }

    #[test]
    fn matched_ratio_equals_class_fraction() {
        let (g, r) = sample();
        let m = CutSpec::matched_random(&g, &r, CutKind::Tb, 0);
        assert!((m.ratio - 0.5).abs() < 1e-12);
    }
}
