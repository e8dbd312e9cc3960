//! Immutable undirected graph in compressed sparse row form.
//!
//! Input edges are symmetrized on build: the toolkit reasons about undirected
//! reachability only, so direction is not preserved. Self-loops and repeated
//! edges are dropped and counted in [`BuildReport`].

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::{Error, Result};

/// Dense node index into a [`Graph`].
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
#[repr(transparent)]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl From<u32> for NodeId {
    fn from(v: u32) -> Self {
        NodeId(v)
    }
}

impl fmt::Debug for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Counts of input pairs discarded while building a [`Graph`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct BuildReport {
    pub self_loops: usize,
    /// Pairs that repeated an already-seen undirected edge (including the
    /// reverse direction of a directed input edge).
    pub duplicates: usize,
}

impl BuildReport {
    pub fn dropped(&self) -> usize {
        self.self_loops + self.duplicates
    }
}

/// Undirected simple graph. Neighbor lists are sorted ascending and the
/// adjacency is symmetric.
#[derive(Clone, PartialEq, Eq)]
pub struct Graph {
    offsets: Vec<usize>,
    neighbors: Vec<NodeId>,
}

impl fmt::Debug for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Graph")
            .field("node_count", &self.node_count())
            .field("edge_count", &self.edge_count())
            .finish()
    }
}

/// Build a graph from `(src, dst)` pairs; see [`Graph::from_edges`].
pub fn build_graph<I>(node_count: usize, pairs: I) -> Result<Graph>
where
    I: IntoIterator<Item = (NodeId, NodeId)>,
{
    Graph::from_edges(node_count, pairs).map(|(g, _)| g)
}

impl Graph {
    /// Graph with `node_count` isolated nodes.
    pub fn empty(node_count: usize) -> Self {
        Graph {
            offsets: vec![0; node_count + 1],
            neighbors: Vec::new(),
        }
    }

    /// Symmetrize, deduplicate and drop self-loops. The result depends only
    /// on the multiset of pairs, not on their order.
    pub fn from_edges<I>(node_count: usize, pairs: I) -> Result<(Graph, BuildReport)>
    where
        I: IntoIterator<Item = (NodeId, NodeId)>,
    {
        let mut report = BuildReport::default();
        let mut arcs: Vec<(NodeId, NodeId)> = Vec::new();
        let mut input_pairs = 0usize;
        for (u, v) in pairs {
            if u.index() >= node_count || v.index() >= node_count {
                return Err(Error::EndpointOutOfRange {
                    src: u.0,
                    dst: v.0,
                    node_count,
                });
            }
            if u == v {
                report.self_loops += 1;
                continue;
            }
            input_pairs += 1;
            arcs.push((u, v));
            arcs.push((v, u));
        }
        arcs.sort_unstable();
        arcs.dedup();
        report.duplicates = input_pairs - arcs.len() / 2;
        Ok((Self::from_sorted_arcs(node_count, &arcs), report))
    }

    /// `arcs` must be sorted, deduplicated, loop-free and symmetric.
    fn from_sorted_arcs(node_count: usize, arcs: &[(NodeId, NodeId)]) -> Graph {
        let mut offsets = vec![0usize; node_count + 1];
        for &(u, _) in arcs {
            offsets[u.index() + 1] += 1;
        }
        for i in 0..node_count {
            offsets[i + 1] += offsets[i];
        }
        Graph {
            offsets,
            neighbors: arcs.iter().map(|&(_, v)| v).collect(),
        }
    }

    #[inline]
    pub fn node_count(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Number of undirected edges.
    #[inline]
    pub fn edge_count(&self) -> usize {
        self.neighbors.len() / 2
    }

    pub fn contains(&self, u: NodeId) -> bool {
        u.index() < self.node_count()
    }

    /// Sorted neighbor list of `u`. Panics if `u` is out of range.
    #[inline]
    pub fn neighbors(&self, u: NodeId) -> &[NodeId] {
        &self.neighbors[self.offsets[u.index()]..self.offsets[u.index() + 1]]
    }

    /// Checked variant of [`Graph::neighbors`].
    pub fn try_neighbors(&self, u: NodeId) -> Result<&[NodeId]> {
        if !self.contains(u) {
            return Err(Error::UnknownNode(u));
        }
        Ok(self.neighbors(u))
    }

    #[inline]
    pub fn degree(&self, u: NodeId) -> usize {
        self.offsets[u.index() + 1] - self.offsets[u.index()]
    }

    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        self.contains(u) && self.contains(v) && self.neighbors(u).binary_search(&v).is_ok()
    }

    /// Offset of `u`'s first slot in the flat neighbor array. Slot `i` of
    /// node `u` holds `neighbors(u)[i]`; callers can key per-arc data by
    /// `slot_offset(u) + i`.
    #[inline]
    pub fn slot_offset(&self, u: NodeId) -> usize {
        self.offsets[u.index()]
    }

    /// Number of arc slots (`2 * edge_count`).
    pub fn slot_count(&self) -> usize {
        self.neighbors.len()
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.node_count() as u32).map(NodeId)
    }

    /// Undirected edges as `(u, v)` with `u < v`, in ascending order.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.nodes().flat_map(move |u| {
            self.neighbors(u)
                .iter()
                .copied()
                .filter(move |&v| u < v)
                .map(move |v| (u, v))
        })
    }

    /// Subgraph induced by `keep`. Kept nodes are renumbered `0..keep.len()`
    /// in ascending order of their original ids.
    pub fn induced_subgraph(&self, keep: &[NodeId]) -> Result<(Graph, IdMap)> {
        if keep.is_empty() {
            return Err(Error::EmptySelection);
        }
        let mut new_to_old = keep.to_vec();
        new_to_old.sort_unstable();
        new_to_old.dedup();
        let mut old_to_new = vec![None; self.node_count()];
        for (new, &old) in new_to_old.iter().enumerate() {
            if !self.contains(old) {
                return Err(Error::UnknownNode(old));
            }
            old_to_new[old.index()] = Some(NodeId(new as u32));
        }
        let mut offsets = Vec::with_capacity(new_to_old.len() + 1);
        offsets.push(0);
        let mut neighbors = Vec::new();
        for &old in &new_to_old {
            // Neighbor order is preserved since the renumbering is monotone.
            neighbors.extend(
                self.neighbors(old)
                    .iter()
                    .filter_map(|v| old_to_new[v.index()]),
            );
            offsets.push(neighbors.len());
        }
        Ok((
            Graph { offsets, neighbors },
            IdMap {
                new_to_old,
                old_to_new,
            },
        ))
    }
}

/// Order-preserving bijection between a kept node subset and `0..len`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdMap {
    new_to_old: Vec<NodeId>,
    old_to_new: Vec<Option<NodeId>>,
}

impl IdMap {
    pub fn len(&self) -> usize {
        self.new_to_old.len()
    }

    pub fn is_empty(&self) -> bool {
        self.new_to_old.is_empty()
    }

    pub fn to_old(&self, new: NodeId) -> NodeId {
        self.new_to_old[new.index()]
    }

    pub fn to_new(&self, old: NodeId) -> Option<NodeId> {
        self.old_to_new.get(old.index()).copied().flatten()
    }

    /// Original ids in ascending order; position = new id.
    pub fn kept(&self) -> &[NodeId] {
        &self.new_to_old
    }
}
