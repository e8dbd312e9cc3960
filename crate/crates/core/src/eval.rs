//! Linear feature propagation plus a multinomial logistic head: a
//! deterministic desk-scale stand-in for a trained GNN when scoring
//! target classification on original, cut and skeleton graphs.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::condense::SkeletonGraph;
use crate::dataset::{DatasetBundle, FeatureMatrix, LabelVector, RoleMask};
use crate::graph::{Graph, NodeId};
use crate::linalg::Matrix;
use crate::{par, Error, Result};

/// Weighted symmetric adjacency with implicit unit self-loops.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedAdjacency {
    offsets: Vec<usize>,
    neighbors: Vec<u32>,
    weights: Vec<f64>,
}

impl WeightedAdjacency {
    /// Unit weights on every edge.
    pub fn from_graph(g: &Graph) -> Self {
        let mut offsets = Vec::with_capacity(g.node_count() + 1);
        offsets.push(0);
        let mut neighbors = Vec::with_capacity(g.slot_count());
        for u in g.nodes() {
            neighbors.extend(g.neighbors(u).iter().map(|v| v.0));
            offsets.push(neighbors.len());
        }
        let weights = vec![1.0; neighbors.len()];
        WeightedAdjacency {
            offsets,
            neighbors,
            weights,
        }
    }

    /// Skeleton edges with their stored weights.
    pub fn from_skeleton(s: &SkeletonGraph) -> Self {
        Self::from_weighted_edges(
            s.node_count(),
            s.edges.iter().map(|e| (e.src, e.dst, e.weight)),
        )
    }

    /// Undirected `(u, v, w)` triples; each pair listed once.
    pub fn from_weighted_edges(n: usize, edges: impl Iterator<Item = (u32, u32, f64)>) -> Self {
        let mut arcs: Vec<(u32, u32, f64)> = Vec::new();
        for (u, v, w) in edges {
            arcs.push((u, v, w));
            arcs.push((v, u, w));
        }
        arcs.sort_unstable_by_key(|a| (a.0, a.1));
        let mut offsets = vec![0usize; n + 1];
        for a in &arcs {
            offsets[a.0 as usize + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        WeightedAdjacency {
            offsets,
            neighbors: arcs.iter().map(|a| a.1).collect(),
            weights: arcs.iter().map(|a| a.2).collect(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.offsets.len() - 1
    }

    fn row(&self, u: usize) -> (&[u32], &[f64]) {
        let r = self.offsets[u]..self.offsets[u + 1];
        (&self.neighbors[r.clone()], &self.weights[r])
    }

    /// Weighted degree including the self-loop.
    fn strength(&self, u: usize) -> f64 {
        1.0 + self.row(u).1.iter().sum::<f64>()
    }
}

/// `L` rounds of `x <- D^-1/2 (A + I) D^-1/2 x`.
pub fn propagate(adj: &WeightedAdjacency, x: &FeatureMatrix, hops: usize) -> Matrix {
    assert_eq!(adj.node_count(), x.rows(), "feature rows");
    let n = x.rows();
    let dim = x.dim();
    let mut cur = Matrix::from_vec(n, dim, x.values().iter().map(|&v| v as f64).collect());
    if hops == 0 {
        return cur;
    }
    let inv_sqrt: Vec<f64> = (0..n).map(|u| 1.0 / libm::sqrt(adj.strength(u))).collect();
    for _ in 0..hops {
        let prev = &cur;
        let rows = par::map_range(n, |u| {
            let mut out = vec![0.0; dim];
            let self_w = inv_sqrt[u] * inv_sqrt[u];
            for (o, v) in out.iter_mut().zip(prev.row(u)) {
                *o = self_w * v;
            }
            let (nbrs, ws) = adj.row(u);
            for (&v, &w) in nbrs.iter().zip(ws) {
                let c = w * inv_sqrt[u] * inv_sqrt[v as usize];
                for (o, x) in out.iter_mut().zip(prev.row(v as usize)) {
                    *o += c * x;
                }
            }
            out
        });
        cur = Matrix::from_vec(n, dim, rows.concat());
    }
    cur
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PropClassifierConfig {
    pub hops: usize,
    pub l2: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Fractions of labeled targets for training and validation; the rest
    /// is test.
    pub train_fraction: f64,
    pub val_fraction: f64,
}

impl Default for PropClassifierConfig {
    fn default() -> Self {
        PropClassifierConfig {
            hops: 2,
            l2: 1e-3,
            epochs: 300,
            learning_rate: 0.5,
            train_fraction: 0.6,
            val_fraction: 0.2,
        }
    }
}

impl PropClassifierConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.l2 >= 0.0
            && self.learning_rate > 0.0
            && self.train_fraction > 0.0
            && self.val_fraction >= 0.0
            && self.train_fraction + self.val_fraction < 1.0;
        if !ok {
            return Err(Error::InvalidConfig(format!(
                "classifier config out of range: {self:?}"
            )));
        }
        Ok(())
    }
}

/// Train / validation / test positions into a list of labeled targets.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    /// Seeded shuffle of `0..n`, cut by the configured fractions.
    pub fn new(n: usize, cfg: &PropClassifierConfig, seed: u64) -> Self {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let n_train = (n as f64 * cfg.train_fraction) as usize;
        let n_val = (n as f64 * cfg.val_fraction) as usize;
        let test = idx.split_off(n_train + n_val);
        let val = idx.split_off(n_train);
        Split {
            train: idx,
            val,
            test,
        }
    }
}

/// Softmax regression parameters: `classes x (dim + 1)`, bias last.
#[derive(Clone, Debug, PartialEq)]
pub struct LogisticModel {
    pub classes: usize,
    pub dim: usize,
    pub weights: Vec<f64>,
}

impl LogisticModel {
    pub fn zeros(classes: usize, dim: usize) -> Self {
        LogisticModel {
            classes,
            dim,
            weights: vec![0.0; classes * (dim + 1)],
        }
    }

    fn scores(&self, x: &[f64], out: &mut [f64]) {
        let stride = self.dim + 1;
        for (c, o) in out.iter_mut().enumerate() {
            let w = &self.weights[c * stride..(c + 1) * stride];
            *o = w[self.dim] + w[..self.dim].iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        }
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        let mut s = vec![0.0; self.classes];
        self.scores(x, &mut s);
        let mut best = 0;
        for c in 1..self.classes {
            if s[c] > s[best] {
                best = c;
            }
        }
        best
    }
}

fn softmax_in_place(s: &mut [f64]) {
    let max = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in s.iter_mut() {
        *v = libm::exp(*v - max);
        total += *v;
    }
    for v in s.iter_mut() {
        *v /= total;
    }
}

/// Mean cross-entropy over `rows` plus `l2/2 * |W|^2` (bias excluded), and
/// its gradient.
pub fn loss_and_grad(
    model: &LogisticModel,
    x: &Matrix,
    labels: &[usize],
    rows: &[usize],
    l2: f64,
) -> (f64, Vec<f64>) {
    let stride = model.dim + 1;
    let mut grad = vec![0.0; model.weights.len()];
    let mut loss = 0.0;
    let mut p = vec![0.0; model.classes];
    for &r in rows {
        let xr = x.row(r);
        model.scores(xr, &mut p);
        softmax_in_place(&mut p);
        loss -= libm::log(p[labels[r]].max(1e-300));
        for c in 0..model.classes {
            let g = p[c] - if c == labels[r] { 1.0 } else { 0.0 };
            let gw = &mut grad[c * stride..(c + 1) * stride];
            for (a, &b) in gw[..model.dim].iter_mut().zip(xr) {
                *a += g * b;
            }
            gw[model.dim] += g;
        }
    }
    let n = rows.len().max(1) as f64;
    loss /= n;
    grad.iter_mut().for_each(|g| *g /= n);
    for c in 0..model.classes {
        for j in 0..model.dim {
            let w = model.weights[c * stride + j];
            loss += 0.5 * l2 * w * w;
            grad[c * stride + j] += l2 * w;
        }
    }
    (loss, grad)
}

/// Column mean and standard deviation over `rows`.
fn standardizer(x: &Matrix, rows: &[usize]) -> (Vec<f64>, Vec<f64>) {
    let dim = x.cols();
    let n = rows.len().max(1) as f64;
    let mut mean = vec![0.0; dim];
    for &r in rows {
        for (m, v) in mean.iter_mut().zip(x.row(r)) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut sd = vec![0.0; dim];
    for &r in rows {
        for ((s, v), m) in sd.iter_mut().zip(x.row(r)).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    for s in &mut sd {
        *s = libm::sqrt(*s / n);
        if *s < 1e-12 {
            *s = 1.0;
        }
    }
    (mean, sd)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalScore {
    pub train_accuracy: f64,
    pub val_accuracy: f64,
    pub test_accuracy: f64,
}

/// Fit on `split.train`, score all three parts. `x` rows align with
/// `labels`; features are standardized with training statistics.
pub fn train_eval(
    x: &Matrix,
    labels: &[usize],
    classes: usize,
    split: &Split,
    cfg: &PropClassifierConfig,
) -> Result<EvalScore> {
    cfg.validate()?;
    if labels.len() != x.rows() {
        return Err(Error::SizeMismatch(format!(
            "{} labels for {} feature rows",
            labels.len(),
            x.rows()
        )));
    }
    let mut present = vec![false; classes];
    for &r in &split.train {
        present[labels[r]] = true;
    }
    if let Some(c) = present.iter().position(|p| !p) {
        return Err(Error::ClassAbsentFromTraining(c as u32));
    }
    let (mean, sd) = standardizer(x, &split.train);
    let z = Matrix::from_fn(x.rows(), x.cols(), |i, j| (x[(i, j)] - mean[j]) / sd[j]);
    let mut model = LogisticModel::zeros(classes, x.cols());
    for _ in 0..cfg.epochs {
        let (_, grad) = loss_and_grad(&model, &z, labels, &split.train, cfg.l2);
        for (w, g) in model.weights.iter_mut().zip(&grad) {
            *w -= cfg.learning_rate * g;
        }
    }
    let accuracy = |rows: &[usize]| {
        if rows.is_empty() {
            return 0.0;
        }
        let hits = rows
            .iter()
            .filter(|&&r| model.predict(z.row(r)) == labels[r])
            .count();
        hits as f64 / rows.len() as f64
    };
    Ok(EvalScore {
        train_accuracy: accuracy(&split.train),
        val_accuracy: accuracy(&split.val),
        test_accuracy: accuracy(&split.test),
    })
}

/// Labeled targets of a dataset, ascending, with their class indices.
pub fn labeled_targets(targets: &[NodeId], labels: &LabelVector) -> (Vec<NodeId>, Vec<usize>) {
    targets
        .iter()
        .filter_map(|&t| labels.get(t).map(|c| (t, c as usize)))
        .unzip()
}

/// Propagate over `adj`, then score the rows `rows` (graph ids of the
/// labeled targets, in label order).
pub fn score_rows(
    adj: &WeightedAdjacency,
    x: &FeatureMatrix,
    rows: &[u32],
    labels: &[usize],
    classes: usize,
    cfg: &PropClassifierConfig,
    seed: u64,
) -> Result<EvalScore> {
    let propagated = propagate(adj, x, cfg.hops);
    let picked = Matrix::from_fn(rows.len(), x.dim(), |i, j| propagated[(rows[i] as usize, j)]);
    let split = Split::new(rows.len(), cfg, seed);
    train_eval(&picked, labels, classes, &split, cfg)
}

/// Mean and sample standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, libm::sqrt(var))
}

/// A graph ready for scoring: weighted adjacency, node features and the
/// graph row of every preserved target.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalInput {
    pub adj: WeightedAdjacency,
    pub features: FeatureMatrix,
    /// `(original target id, row)` ascending by target id.
    pub targets: Vec<(NodeId, u32)>,
}

impl EvalInput {
    /// The bundle's own graph with unit weights.
    pub fn original(bundle: &DatasetBundle) -> Self {
        Self::from_graph(&bundle.graph, &bundle.roles, bundle.features.clone())
    }

    /// `g` with unit weights; targets are the rows flagged in `roles`.
    pub fn from_graph(g: &Graph, roles: &RoleMask, features: FeatureMatrix) -> Self {
        EvalInput {
            adj: WeightedAdjacency::from_graph(g),
            features,
            targets: roles.targets().iter().map(|&t| (t, t.0)).collect(),
        }
    }

    pub fn skeleton(s: &SkeletonGraph) -> Self {
        EvalInput {
            adj: WeightedAdjacency::from_skeleton(s),
            features: s.features.clone(),
            targets: s
                .targets
                .iter()
                .enumerate()
                .map(|(i, &t)| (t, i as u32))
                .collect(),
        }
    }

    /// Targets plus `keep` backgrounds drawn uniformly without replacement;
    /// the induced subgraph is scored with unit weights.
    pub fn random_subset(bundle: &DatasetBundle, keep: usize, seed: u64) -> Result<Self> {
        let mut backgrounds: Vec<NodeId> = bundle.roles.backgrounds().collect();
        if keep > backgrounds.len() {
            return Err(Error::InvalidConfig(format!(
                "cannot keep {keep} of {} background nodes",
                backgrounds.len()
            )));
        }
        backgrounds.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        backgrounds.truncate(keep);
        let mut kept: Vec<NodeId> = bundle.roles.targets().to_vec();
        kept.extend(backgrounds);
        kept.sort_unstable();
        let (g, map) = bundle.graph.induced_subgraph(&kept)?;
        let roles = bundle.roles.restrict(map.kept())?;
        let features = bundle.features.select_rows(map.kept());
        Ok(EvalInput {
            adj: WeightedAdjacency::from_graph(&g),
            features,
            targets: roles
                .targets()
                .iter()
                .map(|&t| (map.to_old(t), t.0))
                .collect(),
        })
    }

    pub fn target_ids(&self) -> Vec<NodeId> {
        self.targets.iter().map(|&(t, _)| t).collect()
    }

    /// Propagate once, then train and score under every seed's split. The
    /// split depends only on the seed and the labeled target list, so two
    /// inputs with the same targets are scored on identical splits.
    pub fn score(
        &self,
        labels: &LabelVector,
        cfg: &PropClassifierConfig,
        seeds: &[u64],
    ) -> Result<Vec<EvalScore>> {
        cfg.validate()?;
        let (rows, classes): (Vec<u32>, Vec<usize>) = self
            .targets
            .iter()
            .filter_map(|&(t, r)| labels.get(t).map(|c| (r, c as usize)))
            .unzip();
        if rows.is_empty() {
            return Err(Error::MissingLabels);
        }
        let propagated = propagate(&self.adj, &self.features, cfg.hops);
        let picked = Matrix::from_fn(rows.len(), self.features.dim(), |i, j| {
            propagated[(rows[i] as usize, j)]
        });
        let k = labels.num_classes() as usize;
        par::map_range(seeds.len(), |i| {
            let split = Split::new(rows.len(), cfg, seeds[i]);
            train_eval(&picked, &classes, k, &split, cfg)
        })
        .into_iter()
        .collect()
    }
}

/// Per-seed test accuracies of two pipelines over the same targets.
#[derive(Clone, Debug, PartialEq)]
pub struct CompareReport {
    pub seeds: Vec<u64>,
    pub first: Vec<f64>,
    pub second: Vec<f64>,
}

impl CompareReport {
    pub fn first_mean_std(&self) -> (f64, f64) {
        mean_std(&self.first)
    }

    pub fn second_mean_std(&self) -> (f64, f64) {
        mean_std(&self.second)
    }

    /// Mean and standard deviation of `second - first` per seed.
    pub fn delta(&self) -> (f64, f64) {
        let d: Vec<f64> = self
            .first
            .iter()
            .zip(&self.second)
            .map(|(a, b)| b - a)
            .collect();
        mean_std(&d)
    }
}

/// Score `first` and `second` on identical splits. Their target id sets
/// must be equal.
pub fn compare(
    first: &EvalInput,
    second: &EvalInput,
    labels: &LabelVector,
    cfg: &PropClassifierConfig,
    seeds: &[u64],
) -> Result<CompareReport> {
    if first.target_ids() != second.target_ids() {
        return Err(Error::TargetMismatch);
    }
    let test = |s: Vec<EvalScore>| s.into_iter().map(|e| e.test_accuracy).collect();
    Ok(CompareReport {
        seeds: seeds.to_vec(),
        first: test(first.score(labels, cfg, seeds)?),
        second: test(second.score(labels, cfg, seeds)?),
    })
}
