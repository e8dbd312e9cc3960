//! Compression statistics.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::condense::{SkeletonGraph, StructureKey};
use crate::{Error, Result};

/// Background compression rate: skeleton backgrounds over original
/// backgrounds.
pub fn compute_bcr(skeleton_bg: u64, original_bg: u64) -> Result<f64> {
    if original_bg == 0 {
        return Err(Error::ZeroBackground);
    }
    Ok(skeleton_bg as f64 / original_bg as f64)
}

/// BCR truncated (not rounded) to three decimals, as an exact integer
/// count of thousandths. `373015 / 2474949` gives 150.
pub fn bcr_permille(skeleton_bg: u64, original_bg: u64) -> Result<u64> {
    if original_bg == 0 {
        return Err(Error::ZeroBackground);
    }
    Ok(((skeleton_bg as u128 * 1000) / original_bg as u128) as u64)
}

/// Three-decimal BCR text, e.g. `"0.150"`.
pub fn format_bcr(skeleton_bg: u64, original_bg: u64) -> Result<alloc::string::String> {
    let p = bcr_permille(skeleton_bg, original_bg)?;
    Ok(alloc::format!("{}.{:03}", p / 1000, p % 1000))
}

/// Sorted multiset of a supernode's hop distances to its targets.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PatternClass(Vec<u32>);

impl PatternClass {
    pub fn new(mut distances: Vec<u32>) -> Self {
        distances.sort_unstable();
        PatternClass(distances)
    }

    pub fn distances(&self) -> &[u32] {
        &self.0
    }
}

impl core::fmt::Display for PatternClass {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str("{")?;
        for (i, d) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{d}")?;
        }
        f.write_str("}")
    }
}

/// Supernode count per structural pattern. Needs distance-bearing keys,
/// i.e. an alpha skeleton.
pub fn pattern_histogram(skeleton: &SkeletonGraph) -> Result<BTreeMap<PatternClass, usize>> {
    let mut hist = BTreeMap::new();
    for s in &skeleton.supernodes {
        match &s.key {
            StructureKey::Full(mss) => {
                let class = PatternClass::new(mss.pairs().iter().map(|&(_, d)| d).collect());
                *hist.entry(class).or_insert(0) += 1;
            }
            StructureKey::TargetsOnly(_) => {
                return Err(Error::DistancesUnavailable(skeleton.strategy.name()))
            }
        }
    }
    if skeleton.strategy != crate::Strategy::Alpha {
        return Err(Error::DistancesUnavailable(skeleton.strategy.name()));
    }
    Ok(hist)
}

/// Storage decomposition of one graph, in bytes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StorageBreakdown {
    pub target_features: u64,
    pub background_features: u64,
    pub adjacency: u64,
}

impl StorageBreakdown {
    pub fn total(&self) -> u64 {
        self.target_features + self.background_features + self.adjacency
    }
}

/// Bytes charged per stored undirected edge: two `u32` endpoints and one
/// `f32` weight, whether or not the source format carries weights.
pub const EDGE_RECORD_BYTES: u64 = 12;

#[derive(Clone, Debug, PartialEq)]
pub struct CompressionReport {
    pub original_background_count: u64,
    pub skeleton_background_count: u64,
    pub bcr: f64,
    pub original: StorageBreakdown,
    pub skeleton: StorageBreakdown,
    /// Present for alpha skeletons.
    pub pattern_histogram: Option<BTreeMap<PatternClass, usize>>,
}
