use alloc::string::String;

use crate::graph::NodeId;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[non_exhaustive]
pub enum Error {
    #[error("edge ({src}, {dst}) has an endpoint outside 0..{node_count}")]
    EndpointOutOfRange {
        src: u32,
        dst: u32,
        node_count: usize,
    },
    #[error("node {0:?} is not part of the graph")]
    UnknownNode(NodeId),
    #[error("node selection is empty")]
    EmptySelection,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("feature dimension {0} is too small; at least 2 coordinates are needed for correlation")]
    FeatureDimTooSmall(usize),
    #[error("size mismatch: {0}")]
    SizeMismatch(String),
    #[error("no target nodes in role mask")]
    NoTargets,
    #[error("labels are required for this operation")]
    MissingLabels,
    #[error("class {0} has no example in the training split")]
    ClassAbsentFromTraining(u32),
    #[error("target sets differ between the two inputs")]
    TargetMismatch,
    #[error("original background count is zero")]
    ZeroBackground,
    #[error("skeleton built with strategy {0} carries no hop distances")]
    DistancesUnavailable(&'static str),
    #[error("skeleton invariant violated: {0}")]
    Invariant(String),
}
