//! Dataset directories.
//!
//! | file          | content                                                  |
//! |---------------|----------------------------------------------------------|
//! | `edges.tsv`   | `src<TAB>dst` external ids, `#` comments                 |
//! | `features.bin`| `GSKF`, u64 rows, u64 dim, then row-major f32 (all LE)   |
//! | `features.csv`| fallback when `features.bin` is absent                   |
//! | `targets.txt` | one external id per line                                 |
//! | `labels.tsv`  | optional, `id<TAB>class`                                 |
//! | `nodes.txt`   | optional, one external id per line in dense order        |
//!
//! Without `nodes.txt`, dense ids follow first appearance in `edges.tsv`,
//! then in `targets.txt`. With it, every id in the other files must be
//! listed there.

use std::collections::HashMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use sha2::{Digest, Sha256};
use skelgraph_core::graph::build_graph;
use skelgraph_core::{DatasetBundle, FeatureMatrix, LabelVector, NodeId, RoleMask};

use crate::error::{Error, Result};

pub const FEATURE_MAGIC: &[u8; 4] = b"GSKF";
const HEADER_LEN: usize = 4 + 8 + 8;

pub(crate) fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Non-empty, non-comment lines with their 1-based line numbers.
pub(crate) fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn encode_features(x: &FeatureMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + x.values().len() * 4);
    out.extend_from_slice(FEATURE_MAGIC);
    out.extend_from_slice(&(x.rows() as u64).to_le_bytes());
    out.extend_from_slice(&(x.dim() as u64).to_le_bytes());
    for v in x.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_features(path: &Path, bytes: &[u8]) -> Result<FeatureMatrix> {
    if bytes.len() < HEADER_LEN || &bytes[..4] != FEATURE_MAGIC {
        return Err(Error::format(path, "not a GSKF feature file"));
    }
    let word = |i: usize| u64::from_le_bytes(bytes[i..i + 8].try_into().unwrap());
    let (rows, dim) = (word(4), word(12));
    let body = &bytes[HEADER_LEN..];
    let declared = rows
        .checked_mul(dim)
        .and_then(|c| c.checked_mul(4))
        .ok_or_else(|| Error::format(path, "declared size overflows"))?;
    if declared != body.len() as u64 {
        return Err(Error::format(
            path,
            format!(
                "header declares {rows} x {dim} values ({declared} bytes) but the body has {} bytes",
                body.len()
            ),
        ));
    }
    let values = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    FeatureMatrix::new(rows as usize, dim as usize, values)
        .map_err(|e| Error::format(path, e.to_string()))
}

pub fn read_features(path: &Path) -> Result<FeatureMatrix> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_features(path, &bytes)
}

pub fn write_features(path: &Path, x: &FeatureMatrix) -> Result<()> {
    write_file(path, &encode_features(x))
}

/// Comma-separated rows; every row must have the same width.
pub fn read_features_csv(path: &Path) -> Result<FeatureMatrix> {
    let text = read_text(path)?;
    let mut values = Vec::new();
    let mut dim = None;
    let mut rows = 0;
    for (line, l) in data_lines(&text) {
        let before = values.len();
        for field in l.split(',') {
            let v: f32 = field
                .trim()
                .parse()
                .map_err(|_| Error::parse(path, line, format!("not a number: {field:?}")))?;
            values.push(v);
        }
        let width = values.len() - before;
        if *dim.get_or_insert(width) != width {
            return Err(Error::parse(
                path,
                line,
                format!("row has {width} values, expected {}", dim.unwrap()),
            ));
        }
        rows += 1;
    }
    FeatureMatrix::new(rows, dim.unwrap_or(0), values)
        .map_err(|e| Error::format(path, e.to_string()))
}

struct Dictionary {
    ids: Vec<String>,
    index: HashMap<String, u32>,
    frozen: bool,
}

impl Dictionary {
    fn open() -> Self {
        Dictionary {
            ids: Vec::new(),
            index: HashMap::new(),
            frozen: false,
        }
    }

    fn intern(&mut self, id: &str) -> Option<u32> {
        if let Some(&d) = self.index.get(id) {
            return Some(d);
        }
        if self.frozen {
            return None;
        }
        let d = self.ids.len() as u32;
        self.ids.push(id.to_string());
        self.index.insert(id.to_string(), d);
        Some(d)
    }
}

fn split_tab<'a>(path: &Path, line: usize, l: &'a str, what: &str) -> Result<(&'a str, &'a str)> {
    let mut parts = l.split('\t');
    match (parts.next(), parts.next(), parts.next()) {
        (Some(a), Some(b), None) if !a.is_empty() && !b.is_empty() => Ok((a, b)),
        _ => Err(Error::parse(path, line, format!("expected {what}"))),
    }
}

pub fn load_dataset(dir: &Path) -> Result<DatasetBundle> {
    let mut dict = Dictionary::open();
    let nodes_path = dir.join("nodes.txt");
    if nodes_path.exists() {
        let text = read_text(&nodes_path)?;
        for (line, l) in data_lines(&text) {
            if dict.index.contains_key(l) {
                return Err(Error::parse(&nodes_path, line, format!("duplicate id {l:?}")));
            }
            dict.intern(l);
        }
        dict.frozen = true;
    }
    let unknown = |path: &Path, line: usize, id: &str| Error::parse(path, line, format!("unknown node id {id:?}"));

    let edges_path = dir.join("edges.tsv");
    let text = read_text(&edges_path)?;
    let mut pairs = Vec::new();
    for (line, l) in data_lines(&text) {
        let (a, b) = split_tab(&edges_path, line, l, "src<TAB>dst")?;
        let u = dict.intern(a).ok_or_else(|| unknown(&edges_path, line, a))?;
        let v = dict.intern(b).ok_or_else(|| unknown(&edges_path, line, b))?;
        pairs.push((NodeId(u), NodeId(v)));
    }

    let targets_path = dir.join("targets.txt");
    let text = read_text(&targets_path)?;
    let mut targets = Vec::new();
    for (line, l) in data_lines(&text) {
        let t = dict.intern(l).ok_or_else(|| unknown(&targets_path, line, l))?;
        targets.push(NodeId(t));
    }
    dict.frozen = true;
    let n = dict.ids.len();
    let roles = RoleMask::from_targets(n, &targets).map_err(|e| Error::format(&targets_path, e.to_string()))?;
    let graph = build_graph(n, pairs)?;

    let bin = dir.join("features.bin");
    let (features_path, features) = if bin.exists() {
        let x = read_features(&bin)?;
        (bin, x)
    } else {
        let csv = dir.join("features.csv");
        let x = read_features_csv(&csv)?;
        (csv, x)
    };
    if features.rows() != n {
        return Err(Error::format(
            &features_path,
            format!("{} feature rows for {n} nodes", features.rows()),
        ));
    }

    let labels_path = dir.join("labels.tsv");
    let labels = if labels_path.exists() {
        let text = read_text(&labels_path)?;
        let mut labels = vec![None; n];
        for (line, l) in data_lines(&text) {
            let (id, class) = split_tab(&labels_path, line, l, "id<TAB>class")?;
            let u = dict.intern(id).ok_or_else(|| unknown(&labels_path, line, id))?;
            let c: u32 = class
                .parse()
                .map_err(|_| Error::parse(&labels_path, line, format!("bad class {class:?}")))?;
            if !roles.is_target(NodeId(u)) {
                return Err(Error::parse(&labels_path, line, format!("{id:?} is not a target")));
            }
            labels[u as usize] = Some(c);
        }
        Some(LabelVector::new(labels, None).map_err(|e| Error::format(&labels_path, e.to_string()))?)
    } else {
        None
    };
    Ok(DatasetBundle::new(graph, roles, features, labels, dict.ids)?)
}

/// Writes every file including `nodes.txt`, so isolated nodes and the dense
/// order survive a reload.
pub fn save_dataset(bundle: &DatasetBundle, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let ids = &bundle.external_ids;
    let mut text = String::new();
    for id in ids {
        text.push_str(id);
        text.push('\n');
    }
    write_file(&dir.join("nodes.txt"), text.as_bytes())?;

    let path = dir.join("edges.tsv");
    let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    let mut w = BufWriter::new(file);
    for (u, v) in bundle.graph.edges() {
        writeln!(w, "{}\t{}", ids[u.index()], ids[v.index()]).map_err(|e| Error::io(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let mut text = String::new();
    for t in bundle.roles.targets() {
        text.push_str(&ids[t.index()]);
        text.push('\n');
    }
    write_file(&dir.join("targets.txt"), text.as_bytes())?;
    write_features(&dir.join("features.bin"), &bundle.features)?;

    if let Some(labels) = &bundle.labels {
        let mut text = String::new();
        for (u, c) in labels.as_slice().iter().enumerate() {
            if let Some(c) = c {
                text.push_str(&format!("{}\t{c}\n", ids[u]));
            }
        }
        write_file(&dir.join("labels.tsv"), text.as_bytes())?;
    }
    Ok(())
}

/// SHA-256 over a canonical encoding of the bundle's content (node ids,
/// edges, roles, features, labels), independent of file layout.
pub fn dataset_digest(bundle: &DatasetBundle) -> String {
    let mut h = Sha256::new();
    h.update(b"skelgraph-dataset-v1");
    h.update((bundle.node_count() as u64).to_le_bytes());
    for id in &bundle.external_ids {
        h.update((id.len() as u64).to_le_bytes());
        h.update(id.as_bytes());
    }
    h.update((bundle.graph.edge_count() as u64).to_le_bytes());
    for (u, v) in bundle.graph.edges() {
        h.update(u.0.to_le_bytes());
        h.update(v.0.to_le_bytes());
    }
    h.update(bundle.roles.mask().iter().map(|&t| t as u8).collect::<Vec<_>>());
    h.update(encode_features(&bundle.features));
    match &bundle.labels {
        None => h.update([0u8]),
        Some(l) => {
            h.update([1u8]);
            h.update(l.num_classes().to_le_bytes());
            for c in l.as_slice() {
                h.update(c.map_or(u32::MAX, |c| c).to_le_bytes());
            }
        }
    }
    hex::encode(h.finalize())
}
