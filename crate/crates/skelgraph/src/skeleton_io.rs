//! Skeleton directories.
//!
//! | file             | columns                                                   |
//! |------------------|-----------------------------------------------------------|
//! | `nodes.tsv`      | id, kind (`target`/`super`), member_count, external_id, origin |
//! | `edges.tsv`      | src, dst, weight (9 significant digits)                   |
//! | `features.bin`   | GSKF feature matrix over skeleton ids                     |
//! | `membership.tsv` | external_id, skeleton id or `DROPPED`, origin             |
//! | `folds.tsv`      | target id, comma-separated origins folded into it         |
//! | `mss.tsv`        | super id, grouping key, comma-separated raw link weights  |
//! | `meta.json`      | strategy, fetch parameters, BCR, source digest, counts    |
//!
//! `origin` is the dense id in the source dataset; supernodes have none and
//! targets carry the number of folded nodes as their member count. Every
//! source node appears exactly once, either in `nodes.tsv` (targets) or in
//! `membership.tsv` (backgrounds), so the source id table is recoverable.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use skelgraph_core::condense::{Assignment, Grouping, Mss, SkeletonEdge, StructureKey, Supernode, TargetLink};
use skelgraph_core::metrics::format_bcr;
use skelgraph_core::sig::format_sig9;
use skelgraph_core::{Aggregation, FetchConfig, NodeId, SkeletonGraph, Strategy};

use crate::dataset_io::{data_lines, read_features, read_text, write_features, write_file};
use crate::error::{Error, Result};

pub const FORMAT: &str = "skelgraph-skeleton-v1";

/// Where a skeleton came from.
#[derive(Clone, Debug, PartialEq)]
pub struct Provenance {
    pub fetch: FetchConfig,
    pub hop_cap: u32,
    pub grouping: Grouping,
    /// [`crate::dataset_digest`] of the source dataset.
    pub source_digest: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SkeletonBundle {
    pub skeleton: SkeletonGraph,
    pub provenance: Provenance,
    /// External id of every source node, by source dense id.
    pub external_ids: Vec<String>,
}

impl SkeletonBundle {
    pub fn original_node_count(&self) -> usize {
        self.external_ids.len()
    }

    pub fn original_background_count(&self) -> usize {
        self.external_ids.len() - self.skeleton.target_count()
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Meta {
    format: String,
    strategy: String,
    aggregation: String,
    grouping: String,
    d1: u32,
    d2: u32,
    k_affil: usize,
    hop_cap: u32,
    /// Truncated to three decimals; absent without source backgrounds.
    bcr: Option<String>,
    source_digest: String,
    original_nodes: usize,
    original_backgrounds: usize,
    targets: usize,
    supernodes: usize,
    edges: usize,
}

pub fn grouping_name(g: Grouping) -> String {
    match g {
        Grouping::Canonical => "canonical".to_string(),
        Grouping::Xor { seed } => format!("xor:{seed}"),
    }
}

pub fn parse_grouping(s: &str) -> Option<Grouping> {
    match s {
        "canonical" => Some(Grouping::Canonical),
        _ => s
            .strip_prefix("xor:")
            .and_then(|seed| seed.parse().ok())
            .map(|seed| Grouping::Xor { seed }),
    }
}

fn key_text(key: &StructureKey) -> String {
    let parts: Vec<String> = match key {
        StructureKey::Full(m) => m.pairs().iter().map(|(t, d)| format!("{}:{d}", t.0)).collect(),
        StructureKey::TargetsOnly(ts) => ts.iter().map(|t| t.0.to_string()).collect(),
    };
    if parts.is_empty() {
        "-".to_string()
    } else {
        parts.join(",")
    }
}

fn list_or_dash(items: impl Iterator<Item = String>) -> String {
    let s: Vec<String> = items.collect();
    if s.is_empty() {
        "-".to_string()
    } else {
        s.join(",")
    }
}

/// Deterministic: identical bundles produce identical bytes.
pub fn save_skeleton(bundle: &SkeletonBundle, dir: &Path) -> Result<()> {
    let s = &bundle.skeleton;
    let ids = &bundle.external_ids;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let mut nodes = String::from("# id\tkind\tmember_count\texternal_id\torigin\n");
    for (i, t) in s.targets.iter().enumerate() {
        writeln!(nodes, "{i}\ttarget\t{}\t{}\t{}", s.folds[i].len(), ids[t.index()], t.0).unwrap();
    }
    for (j, sn) in s.supernodes.iter().enumerate() {
        writeln!(nodes, "{}\tsuper\t{}\t-\t-", s.supernode_id(j), sn.members.len()).unwrap();
    }
    write_file(&dir.join("nodes.tsv"), nodes.as_bytes())?;

    let mut edges = String::from("# src\tdst\tweight\n");
    for e in &s.edges {
        writeln!(edges, "{}\t{}\t{}", e.src, e.dst, format_sig9(e.weight)).unwrap();
    }
    write_file(&dir.join("edges.tsv"), edges.as_bytes())?;

    write_features(&dir.join("features.bin"), &s.features)?;

    let membership = s.membership();
    let mut is_target = vec![false; ids.len()];
    for t in &s.targets {
        is_target[t.index()] = true;
    }
    let mut text = String::from("# external_id\tassignment\torigin\n");
    for (u, id) in ids.iter().enumerate() {
        if is_target[u] {
            continue;
        }
        let a = match membership.get(&NodeId(u as u32)) {
            Some(Assignment::Supernode(k)) | Some(Assignment::Target(k)) => k.to_string(),
            None => "DROPPED".to_string(),
        };
        writeln!(text, "{id}\t{a}\t{u}").unwrap();
    }
    write_file(&dir.join("membership.tsv"), text.as_bytes())?;

    let mut folds = String::from("# target\tfolded_origins\n");
    for (i, f) in s.folds.iter().enumerate() {
        if !f.is_empty() {
            writeln!(folds, "{i}\t{}", list_or_dash(f.iter().map(|u| u.0.to_string()))).unwrap();
        }
    }
    write_file(&dir.join("folds.tsv"), folds.as_bytes())?;

    let mut mss = String::from("# super\tkey\traw_weights\n");
    for (j, sn) in s.supernodes.iter().enumerate() {
        let weights = list_or_dash(sn.links.iter().map(|l| l.raw_weight.to_string()));
        writeln!(mss, "{}\t{}\t{weights}", s.supernode_id(j), key_text(&sn.key)).unwrap();
    }
    write_file(&dir.join("mss.tsv"), mss.as_bytes())?;

    let p = &bundle.provenance;
    let original_backgrounds = bundle.original_background_count();
    let meta = Meta {
        format: FORMAT.to_string(),
        strategy: s.strategy.name().to_string(),
        aggregation: s.aggregation.name().to_string(),
        grouping: grouping_name(p.grouping),
        d1: p.fetch.d1,
        d2: p.fetch.d2,
        k_affil: p.fetch.k_affil,
        hop_cap: p.hop_cap,
        bcr: format_bcr(s.background_count() as u64, original_backgrounds as u64).ok(),
        source_digest: p.source_digest.clone(),
        original_nodes: ids.len(),
        original_backgrounds,
        targets: s.target_count(),
        supernodes: s.background_count(),
        edges: s.edges.len(),
    };
    let mut json = serde_json::to_string_pretty(&meta).expect("meta serializes");
    json.push('\n');
    write_file(&dir.join("meta.json"), json.as_bytes())
}

struct Table<'a> {
    path: &'a Path,
    rows: Vec<(usize, Vec<&'a str>)>,
}

fn table<'a>(path: &'a Path, text: &'a str, width: usize) -> Result<Table<'a>> {
    let mut rows = Vec::new();
    for (line, l) in data_lines(text) {
        let cols: Vec<&str> = l.split('\t').collect();
        if cols.len() != width {
            return Err(Error::parse(path, line, format!("expected {width} columns, found {}", cols.len())));
        }
        rows.push((line, cols));
    }
    Ok(Table { path, rows })
}

fn num<T: std::str::FromStr>(path: &Path, line: usize, s: &str, what: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::parse(path, line, format!("bad {what}: {s:?}")))
}

fn id_list(path: &Path, line: usize, s: &str) -> Result<Vec<u32>> {
    if s == "-" {
        return Ok(Vec::new());
    }
    s.split(',').map(|x| num(path, line, x, "id")).collect()
}

/// Inverse of [`save_skeleton`]; checks cross-file consistency and the
/// skeleton's structural invariants.
pub fn load_skeleton(dir: &Path) -> Result<SkeletonBundle> {
    let meta_path = dir.join("meta.json");
    let meta: Meta = serde_json::from_str(&read_text(&meta_path)?).map_err(|e| Error::Json {
        path: meta_path.clone(),
        source: e,
    })?;
    let bad_meta = |msg: String| Error::format(&meta_path, msg);
    if meta.format != FORMAT {
        return Err(bad_meta(format!("unsupported format {:?}", meta.format)));
    }
    let strategy = Strategy::parse(&meta.strategy).ok_or_else(|| bad_meta(format!("unknown strategy {:?}", meta.strategy)))?;
    let aggregation = Aggregation::parse(&meta.aggregation)
        .ok_or_else(|| bad_meta(format!("unknown aggregation {:?}", meta.aggregation)))?;
    let grouping = parse_grouping(&meta.grouping).ok_or_else(|| bad_meta(format!("unknown grouping {:?}", meta.grouping)))?;
    let fetch = FetchConfig::new(meta.d1, meta.d2, meta.k_affil).map_err(|e| bad_meta(e.to_string()))?;

    let n_orig = meta.original_nodes;
    let mut external_ids: Vec<Option<String>> = vec![None; n_orig];
    let mut claim = |path: &Path, line: usize, origin: u32, id: &str| -> Result<()> {
        let slot = external_ids
            .get_mut(origin as usize)
            .ok_or_else(|| Error::parse(path, line, format!("origin {origin} out of range")))?;
        if slot.is_some() {
            return Err(Error::parse(path, line, format!("origin {origin} listed twice")));
        }
        *slot = Some(id.to_string());
        Ok(())
    };

    // nodes.tsv
    let nodes_path = dir.join("nodes.tsv");
    let text = read_text(&nodes_path)?;
    let nodes = table(&nodes_path, &text, 5)?;
    let mut targets = Vec::new();
    let mut target_member_counts = Vec::new();
    let mut super_member_counts = Vec::new();
    for (i, (line, c)) in nodes.rows.iter().enumerate() {
        let line = *line;
        if num::<usize>(nodes.path, line, c[0], "id")? != i {
            return Err(Error::parse(nodes.path, line, "ids must be consecutive from 0"));
        }
        let count: usize = num(nodes.path, line, c[2], "member count")?;
        match c[1] {
            "target" if super_member_counts.is_empty() => {
                let origin: u32 = num(nodes.path, line, c[4], "origin")?;
                claim(nodes.path, line, origin, c[3])?;
                targets.push(NodeId(origin));
                target_member_counts.push(count);
            }
            "super" => super_member_counts.push(count),
            other => {
                return Err(Error::parse(nodes.path, line, format!("unexpected node kind {other:?}")))
            }
        }
    }
    if targets.len() != meta.targets || super_member_counts.len() != meta.supernodes {
        return Err(bad_meta("node counts disagree with nodes.tsv".to_string()));
    }
    let n_targets = targets.len();
    let n_nodes = n_targets + super_member_counts.len();

    // membership.tsv
    let mem_path = dir.join("membership.tsv");
    let text = read_text(&mem_path)?;
    let mem = table(&mem_path, &text, 3)?;
    let mut members: Vec<Vec<NodeId>> = vec![Vec::new(); super_member_counts.len()];
    let mut folded_to: BTreeMap<NodeId, u32> = BTreeMap::new();
    let mut last_origin = None;
    for (line, c) in &mem.rows {
        let line = *line;
        let origin: u32 = num(mem.path, line, c[2], "origin")?;
        if last_origin.is_some_and(|o| o >= origin) {
            return Err(Error::parse(mem.path, line, "origins must ascend"));
        }
        last_origin = Some(origin);
        claim(mem.path, line, origin, c[0])?;
        if c[1] == "DROPPED" {
            continue;
        }
        let k: u32 = num(mem.path, line, c[1], "assignment")?;
        if (k as usize) < n_targets {
            folded_to.insert(NodeId(origin), k);
        } else if (k as usize) < n_nodes {
            members[k as usize - n_targets].push(NodeId(origin));
        } else {
            return Err(Error::parse(mem.path, line, format!("assignment {k} out of range")));
        }
    }
    let external_ids: Vec<String> = external_ids
        .into_iter()
        .enumerate()
        .map(|(u, id)| id.ok_or_else(|| bad_meta(format!("source node {u} missing from nodes.tsv and membership.tsv"))))
        .collect::<Result<_>>()?;
    if n_orig - n_targets != meta.original_backgrounds {
        return Err(bad_meta("background count disagrees with membership.tsv".to_string()));
    }

    // folds.tsv
    let folds_path = dir.join("folds.tsv");
    let text = read_text(&folds_path)?;
    let ft = table(&folds_path, &text, 2)?;
    let mut folds = vec![Vec::new(); n_targets];
    for (line, c) in &ft.rows {
        let i: usize = num(ft.path, *line, c[0], "target id")?;
        if i >= n_targets || !folds[i].is_empty() {
            return Err(Error::parse(ft.path, *line, format!("bad or repeated target {i}")));
        }
        folds[i] = id_list(ft.path, *line, c[1])?.into_iter().map(NodeId).collect();
    }
    let mut smallest_owner: BTreeMap<NodeId, u32> = BTreeMap::new();
    for (i, f) in folds.iter().enumerate() {
        if f.len() != target_member_counts[i] {
            return Err(Error::format(&nodes_path, format!("target {i} member count disagrees with folds.tsv")));
        }
        for &u in f {
            smallest_owner.entry(u).or_insert(i as u32);
        }
    }
    if smallest_owner != folded_to {
        return Err(Error::format(&mem_path, "folded assignments disagree with folds.tsv"));
    }

    // mss.tsv
    let mss_path = dir.join("mss.tsv");
    let text = read_text(&mss_path)?;
    let mt = table(&mss_path, &text, 3)?;
    if mt.rows.len() != super_member_counts.len() {
        return Err(Error::format(&mss_path, "one row per supernode expected"));
    }
    let mut supernodes = Vec::with_capacity(mt.rows.len());
    for (j, (line, c)) in mt.rows.iter().enumerate() {
        let line = *line;
        if num::<usize>(mt.path, line, c[0], "super id")? != n_targets + j {
            return Err(Error::parse(mt.path, line, "super ids must follow nodes.tsv order"));
        }
        let key = if strategy == Strategy::Alpha {
            let mut pairs = Vec::new();
            if c[1] != "-" {
                for p in c[1].split(',') {
                    let (t, d) = p
                        .split_once(':')
                        .ok_or_else(|| Error::parse(mt.path, line, format!("bad key entry {p:?}")))?;
                    pairs.push((NodeId(num(mt.path, line, t, "target")?), num(mt.path, line, d, "distance")?));
                }
            }
            if !pairs.windows(2).all(|w| w[0].0 < w[1].0) {
                return Err(Error::parse(mt.path, line, "key targets must ascend"));
            }
            StructureKey::Full(Mss::from_pairs(pairs))
        } else {
            StructureKey::TargetsOnly(id_list(mt.path, line, c[1])?.into_iter().map(NodeId).collect())
        };
        let weights: Vec<f64> = if c[2] == "-" {
            Vec::new()
        } else {
            c[2].split(',').map(|w| num(mt.path, line, w, "raw weight")).collect::<Result<_>>()?
        };
        let links = if strategy == Strategy::Alpha {
            if !weights.is_empty() {
                return Err(Error::parse(mt.path, line, "alpha supernodes carry no raw weights"));
            }
            Vec::new()
        } else {
            let ts = key.targets();
            if ts.len() != weights.len() {
                return Err(Error::parse(mt.path, line, "one raw weight per key target expected"));
            }
            ts.into_iter()
                .zip(weights)
                .map(|(target, raw_weight)| TargetLink { target, raw_weight })
                .collect()
        };
        let m = std::mem::take(&mut members[j]);
        if m.len() != super_member_counts[j] {
            return Err(Error::format(&nodes_path, format!("supernode {} member count disagrees with membership.tsv", n_targets + j)));
        }
        supernodes.push(Supernode { members: m, key, links });
    }

    // edges.tsv
    let edges_path = dir.join("edges.tsv");
    let text = read_text(&edges_path)?;
    let et = table(&edges_path, &text, 3)?;
    let mut edges = Vec::with_capacity(et.rows.len());
    for (line, c) in &et.rows {
        let weight: f64 = num(et.path, *line, c[2], "weight")?;
        edges.push(SkeletonEdge {
            src: num(et.path, *line, c[0], "src")?,
            dst: num(et.path, *line, c[1], "dst")?,
            weight,
        });
    }
    if edges.len() != meta.edges {
        return Err(bad_meta("edge count disagrees with edges.tsv".to_string()));
    }

    let features_path = dir.join("features.bin");
    let features = read_features(&features_path)?;
    let skeleton = SkeletonGraph {
        strategy,
        aggregation,
        targets,
        supernodes,
        edges,
        features,
        folds,
    };
    skeleton
        .validate()
        .map_err(|e| Error::format(dir, format!("invalid skeleton: {e}")))?;
    Ok(SkeletonBundle {
        skeleton,
        provenance: Provenance {
            fetch,
            hop_cap: meta.hop_cap,
            grouping,
            source_digest: meta.source_digest,
        },
        external_ids,
    })
}
