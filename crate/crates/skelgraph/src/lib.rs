//! File formats, synthetic data and the command-line front end for
//! [`skelgraph_core`].
//!
//! A dataset directory holds an edge list, a binary feature matrix, the
//! target list and optional labels ([`dataset_io`]). [`compress`] fetches
//! and condenses it into a [`SkeletonBundle`], which [`save_skeleton`]
//! writes as a small set of tab-separated files plus a feature matrix
//! ([`skeleton_io`]). [`cli::run`] wires these into the `skelgraph` binary.

pub mod cli;
pub mod dataset_io;
mod error;
pub mod generate;
pub mod skeleton_io;
pub mod storage;

use skelgraph_core::condense::{condense, CondenseOptions};
use skelgraph_core::fetch::build_vanilla;
use skelgraph_core::{DatasetBundle, FetchConfig};

pub use crate::dataset_io::{dataset_digest, load_dataset, save_dataset};
pub use crate::error::{Error, Result};
pub use crate::generate::{generate_synthetic, SbmConfig, Synthetic};
pub use crate::skeleton_io::{load_skeleton, save_skeleton, Provenance, SkeletonBundle};
pub use crate::storage::storage_report;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CompressOptions {
    pub fetch: FetchConfig,
    pub condense: CondenseOptions,
}

/// Fetch, condense and attach provenance. Runs on the current rayon pool.
pub fn compress(bundle: &DatasetBundle, opts: &CompressOptions) -> Result<SkeletonBundle> {
    let fetch = build_vanilla(&bundle.graph, &bundle.roles, &bundle.features, opts.fetch)?;
    let skeleton = condense(&fetch, &bundle.features, opts.condense)?;
    skeleton.validate()?;
    Ok(SkeletonBundle {
        skeleton,
        provenance: Provenance {
            fetch: opts.fetch,
            hop_cap: opts.condense.hop_cap.unwrap_or_else(|| opts.fetch.default_hop_cap()),
            grouping: opts.condense.grouping,
            source_digest: dataset_digest(bundle),
        },
        external_ids: bundle.external_ids.clone(),
    })
}
