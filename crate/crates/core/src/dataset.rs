//! Node roles, features and labels bundled with a [`Graph`].

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::graph::{Graph, NodeId};
use crate::{Error, Result};

/// Partition of nodes into targets and backgrounds.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RoleMask {
    is_target: Vec<bool>,
    targets: Vec<NodeId>,
}

impl RoleMask {
    /// At least one node must be a target.
    pub fn new(is_target: Vec<bool>) -> Result<Self> {
        let targets: Vec<NodeId> = is_target
            .iter()
            .enumerate()
            .filter(|(_, &t)| t)
            .map(|(i, _)| NodeId(i as u32))
            .collect();
        if targets.is_empty() {
            return Err(Error::NoTargets);
        }
        Ok(RoleMask { is_target, targets })
    }

    pub fn from_targets(node_count: usize, targets: &[NodeId]) -> Result<Self> {
        let mut mask = alloc::vec![false; node_count];
        for &t in targets {
            *mask.get_mut(t.index()).ok_or(Error::UnknownNode(t))? = true;
        }
        Self::new(mask)
    }

    pub fn len(&self) -> usize {
        self.is_target.len()
    }

    pub fn is_empty(&self) -> bool {
        self.is_target.is_empty()
    }

    #[inline]
    pub fn is_target(&self, u: NodeId) -> bool {
        self.is_target[u.index()]
    }

    #[inline]
    pub fn is_background(&self, u: NodeId) -> bool {
        !self.is_target[u.index()]
    }

    /// Targets in ascending id order.
    pub fn targets(&self) -> &[NodeId] {
        &self.targets
    }

    pub fn target_count(&self) -> usize {
        self.targets.len()
    }

    pub fn background_count(&self) -> usize {
        self.is_target.len() - self.targets.len()
    }

    pub fn backgrounds(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.is_target
            .iter()
            .enumerate()
            .filter(|(_, &t)| !t)
            .map(|(i, _)| NodeId(i as u32))
    }

    pub fn mask(&self) -> &[bool] {
        &self.is_target
    }

    /// Mask restricted to `kept` (ascending original ids), renumbered.
    pub fn restrict(&self, kept: &[NodeId]) -> Result<Self> {
        Self::new(kept.iter().map(|&u| self.is_target(u)).collect())
    }
}

/// Row-major `rows x dim` matrix of 32-bit node features.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    rows: usize,
    dim: usize,
    values: Vec<f32>,
}

impl FeatureMatrix {
    pub fn new(rows: usize, dim: usize, values: Vec<f32>) -> Result<Self> {
        if values.len() != rows * dim {
            return Err(Error::SizeMismatch(format!(
                "{} feature values for {rows} rows of dimension {dim}",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::SizeMismatch(format!(
                "non-finite feature at row {}, column {}",
                pos / dim.max(1),
                pos % dim.max(1)
            )));
        }
        Ok(FeatureMatrix { rows, dim, values })
    }

    pub fn zeros(rows: usize, dim: usize) -> Self {
        FeatureMatrix {
            rows,
            dim,
            values: alloc::vec![0.0; rows * dim],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f32] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f32] {
        &mut self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    /// Rows selected in the given order.
    pub fn select_rows(&self, rows: &[NodeId]) -> FeatureMatrix {
        let mut values = Vec::with_capacity(rows.len() * self.dim);
        for r in rows {
            values.extend_from_slice(self.row(r.index()));
        }
        FeatureMatrix {
            rows: rows.len(),
            dim: self.dim,
            values,
        }
    }
}

/// Class labels, defined on target nodes only.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelVector {
    labels: Vec<Option<u32>>,
    num_classes: u32,
}

impl LabelVector {
    /// `num_classes` is inferred as `max label + 1` when not given.
    pub fn new(labels: Vec<Option<u32>>, num_classes: Option<u32>) -> Result<Self> {
        let max = labels.iter().flatten().copied().max();
        let num_classes = match (num_classes, max) {
            (Some(c), Some(m)) if m >= c => {
                return Err(Error::SizeMismatch(format!(
                    "label {m} is not below class count {c}"
                )))
            }
            (Some(c), _) => c,
            (None, Some(m)) => m + 1,
            (None, None) => 0,
        };
        Ok(LabelVector {
            labels,
            num_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn get(&self, u: NodeId) -> Option<u32> {
        self.labels[u.index()]
    }

    pub fn num_classes(&self) -> u32 {
        self.num_classes
    }

    pub fn as_slice(&self) -> &[Option<u32>] {
        &self.labels
    }
}

/// Everything needed to fetch, condense and score one dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetBundle {
    pub graph: Graph,
    pub roles: RoleMask,
    pub features: FeatureMatrix,
    pub labels: Option<LabelVector>,
    /// External id of each dense node id.
    pub external_ids: Vec<String>,
}

impl DatasetBundle {
    /// Checks that every component agrees on the node count and that labels
    /// sit on targets only.
    pub fn new(
        graph: Graph,
        roles: RoleMask,
        features: FeatureMatrix,
        labels: Option<LabelVector>,
        external_ids: Vec<String>,
    ) -> Result<Self> {
        let n = graph.node_count();
        let check = |what: &str, len: usize| {
            if len == n {
                Ok(())
            } else {
                Err(Error::SizeMismatch(format!(
                    "{what} covers {len} nodes but the graph has {n}"
                )))
            }
        };
        check("role mask", roles.len())?;
        check("feature matrix", features.rows())?;
        check("external id table", external_ids.len())?;
        if let Some(labels) = &labels {
            check("label vector", labels.len())?;
            for u in graph.nodes() {
                if labels.get(u).is_some() && roles.is_background(u) {
                    return Err(Error::SizeMismatch(format!(
                        "background node {u} carries a label"
                    )));
                }
            }
        }
        Ok(DatasetBundle {
            graph,
            roles,
            features,
            labels,
            external_ids,
        })
    }

    /// Bundle whose external ids are the decimal dense ids.
    pub fn with_numeric_ids(
        graph: Graph,
        roles: RoleMask,
        features: FeatureMatrix,
        labels: Option<LabelVector>,
    ) -> Result<Self> {
        let ids = (0..graph.node_count()).map(|i| format!("{i}")).collect();
        Self::new(graph, roles, features, labels, ids)
    }

    pub fn node_count(&self) -> usize {
        self.graph.node_count()
    }
}
