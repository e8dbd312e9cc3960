use std::path::Path;

use skelgraph_core::metrics::{
    compute_bcr, pattern_histogram, CompressionReport, StorageBreakdown, EDGE_RECORD_BYTES,
};
use skelgraph_core::{DatasetBundle, Strategy};

use crate::dataset_io::load_dataset;
use crate::error::Result;
use crate::skeleton_io::{load_skeleton, SkeletonBundle};

const F32_BYTES: u64 = 4;

/// Byte breakdown of a loaded dataset and skeleton, in the persisted
/// formats: feature rows as stored in `features.bin`, adjacency as one
/// edge record per stored edge.
pub fn report(original: &DatasetBundle, skeleton: &SkeletonBundle) -> Result<CompressionReport> {
    let s = &skeleton.skeleton;
    let row = |dim: usize| dim as u64 * F32_BYTES;
    let orig_bg = original.roles.background_count() as u64;
    let skel_bg = s.background_count() as u64;
    let histogram = match s.strategy {
        Strategy::Alpha => Some(pattern_histogram(s)?),
        _ => None,
    };
    Ok(CompressionReport {
        original_background_count: orig_bg,
        skeleton_background_count: skel_bg,
        bcr: compute_bcr(skel_bg, orig_bg)?,
        original: StorageBreakdown {
            target_features: original.roles.target_count() as u64 * row(original.features.dim()),
            background_features: orig_bg * row(original.features.dim()),
            adjacency: original.graph.edge_count() as u64 * EDGE_RECORD_BYTES,
        },
        skeleton: StorageBreakdown {
            target_features: s.target_count() as u64 * row(s.features.dim()),
            background_features: skel_bg * row(s.features.dim()),
            adjacency: s.edges.len() as u64 * EDGE_RECORD_BYTES,
        },
        pattern_histogram: histogram,
    })
}

/// [`report`] on the dataset and skeleton directories.
pub fn storage_report(dataset_dir: &Path, skeleton_dir: &Path) -> Result<CompressionReport> {
    report(&load_dataset(dataset_dir)?, &load_skeleton(skeleton_dir)?)
}
