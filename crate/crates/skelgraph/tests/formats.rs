use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use skelgraph::dataset_io::{decode_features, encode_features, FEATURE_MAGIC};
use skelgraph::skeleton_io::FORMAT;
use skelgraph::{
    compress, generate_synthetic, load_dataset, load_skeleton, save_dataset, save_skeleton, CompressOptions,
    Error, SbmConfig,
};
use skelgraph_core::condense::CondenseOptions;
use skelgraph_core::{FeatureMatrix, FetchConfig, Strategy};

fn small() -> SbmConfig {
    SbmConfig {
        targets: 60,
        backgrounds: 240,
        p_intra: 0.03,
        p_inter: 0.004,
        p_bb_intra: 0.01,
        p_bb_inter: 0.006,
        dim: 5,
        ..SbmConfig::default()
    }
}

fn options(strategy: Strategy) -> CompressOptions {
    CompressOptions {
        fetch: FetchConfig::new(2, 1, 5).unwrap(),
        condense: CondenseOptions::new(strategy),
    }
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn write(dir: &Path, name: &str, text: &str) {
    fs::write(dir.join(name), text).unwrap();
}

#[test]
fn dataset_round_trip_is_exact() {
    let syn = generate_synthetic(&small(), 3).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    save_dataset(&syn.bundle, tmp.path()).unwrap();
    let back = load_dataset(tmp.path()).unwrap();
    assert_eq!(back.external_ids, syn.bundle.external_ids);
    let edges = |g: &skelgraph_core::Graph| g.edges().collect::<BTreeSet<_>>();
    assert_eq!(edges(&back.graph), edges(&syn.bundle.graph));
    let bits = |x: &FeatureMatrix| x.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&back.features), bits(&syn.bundle.features));
    assert_eq!(back.roles, syn.bundle.roles);
    assert_eq!(back.labels, syn.bundle.labels);
    assert_eq!(skelgraph::dataset_digest(&back), skelgraph::dataset_digest(&syn.bundle));
}

#[test]
fn hand_written_dataset_with_csv_features() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "edges.tsv", "# comment\na\tb\nb\tc\n\nc\ta\n");
    write(tmp.path(), "targets.txt", "a\nlonely\n");
    write(tmp.path(), "nodes.txt", "a\nb\nc\nlonely\n");
    write(tmp.path(), "features.csv", "1,2\n3,4\n5,6\n7,8\n");
    let d = load_dataset(tmp.path()).unwrap();
    assert_eq!(d.node_count(), 4);
    assert_eq!(d.graph.edge_count(), 3);
    assert_eq!(d.roles.target_count(), 2);
    assert_eq!(d.graph.degree(skelgraph_core::NodeId(3)), 0);
    assert_eq!(d.features.row(3), &[7.0, 8.0]);
}

#[test]
fn feature_row_mismatch_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "edges.tsv", "a\tb\n");
    write(tmp.path(), "targets.txt", "a\n");
    write(tmp.path(), "features.csv", "1,2\n");
    let err = load_dataset(tmp.path()).unwrap_err();
    assert!(matches!(err, Error::Format { .. }), "{err}");
    assert!(err.to_string().contains("1 feature rows for 2 nodes"), "{err}");
}

#[test]
fn malformed_lines_report_their_line_number() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "edges.tsv", "a\tb\nb\tc\nbroken line\n");
    write(tmp.path(), "targets.txt", "a\n");
    write(tmp.path(), "features.csv", "1\n2\n3\n");
    match load_dataset(tmp.path()).unwrap_err() {
        Error::Parse { line, .. } => assert_eq!(line, 3),
        e => panic!("unexpected {e}"),
    }

    write(tmp.path(), "edges.tsv", "a\tb\n");
    write(tmp.path(), "features.csv", "1\n2,3\n");
    match load_dataset(tmp.path()).unwrap_err() {
        Error::Parse { line, msg, .. } => assert_eq!((line, msg.contains("expected 1")), (2, true)),
        e => panic!("unexpected {e}"),
    }
}

#[test]
fn missing_file_is_an_io_error() {
    let tmp = tempfile::tempdir().unwrap();
    let err = load_dataset(tmp.path()).unwrap_err();
    assert!(matches!(err, Error::Io { .. }));
}

#[test]
fn binary_features_check_declared_shape() {
    let x = FeatureMatrix::new(3, 2, vec![1.0, -2.5, 0.0, f32::MIN_POSITIVE, 7.0, 1e30]).unwrap();
    let bytes = encode_features(&x);
    assert_eq!(&bytes[..4], FEATURE_MAGIC);
    assert_eq!(bytes.len(), 4 + 16 + 6 * 4);
    let p = Path::new("features.bin");
    assert_eq!(decode_features(p, &bytes).unwrap(), x);

    let mut wrong_rows = bytes.clone();
    wrong_rows[4] = 4;
    assert!(decode_features(p, &wrong_rows).is_err());
    assert!(decode_features(p, &bytes[..bytes.len() - 1]).is_err());
    let mut bad_magic = bytes.clone();
    bad_magic[0] = b'X';
    assert!(decode_features(p, &bad_magic).is_err());
}

#[test]
fn skeleton_round_trip_and_stable_bytes() {
    let syn = generate_synthetic(&small(), 5).unwrap();
    for strategy in [Strategy::Alpha, Strategy::Beta, Strategy::Gamma] {
        let sk = compress(&syn.bundle, &options(strategy)).unwrap();
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        save_skeleton(&sk, a.path()).unwrap();
        let back = load_skeleton(a.path()).unwrap();
        assert_eq!(back, sk, "{strategy}");
        save_skeleton(&back, b.path()).unwrap();
        assert_eq!(dir_bytes(a.path()), dir_bytes(b.path()), "{strategy}");
        let meta = fs::read_to_string(a.path().join("meta.json")).unwrap();
        assert!(meta.contains(FORMAT));
    }
}

#[test]
fn no_backgrounds_leaves_only_target_edges() {
    let cfg = SbmConfig {
        backgrounds: 0,
        ..small()
    };
    let syn = generate_synthetic(&cfg, 1).unwrap();
    let sk = compress(&syn.bundle, &options(Strategy::Gamma)).unwrap();
    assert_eq!(sk.skeleton.background_count(), 0);
    assert_eq!(sk.skeleton.edges.len(), syn.bundle.graph.edge_count());
    assert!(sk.skeleton.edges.iter().all(|e| e.weight == 1.0));
    let tmp = tempfile::tempdir().unwrap();
    save_skeleton(&sk, tmp.path()).unwrap();
    assert_eq!(load_skeleton(tmp.path()).unwrap(), sk);
}

#[test]
fn corrupted_skeleton_files_are_rejected() {
    let syn = generate_synthetic(&small(), 8).unwrap();
    let sk = compress(&syn.bundle, &options(Strategy::Beta)).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    save_skeleton(&sk, tmp.path()).unwrap();

    let edges = fs::read_to_string(tmp.path().join("edges.tsv")).unwrap();
    let mut lines: Vec<String> = edges.lines().map(String::from).collect();
    let i = lines.iter().position(|l| !l.starts_with('#') && !l.ends_with("\t1")).unwrap();
    let mut fields: Vec<&str> = lines[i].split('\t').collect();
    fields[2] = "1.5";
    lines[i] = fields.join("\t");
    write(tmp.path(), "edges.tsv", &(lines.join("\n") + "\n"));
    assert!(load_skeleton(tmp.path()).is_err());

    write(tmp.path(), "edges.tsv", &edges);
    load_skeleton(tmp.path()).unwrap();
    fs::remove_file(tmp.path().join("membership.tsv")).unwrap();
    assert!(matches!(load_skeleton(tmp.path()).unwrap_err(), Error::Io { .. }));
}

#[test]
fn storage_report_shrinks_adjacency_and_keeps_targets() {
    let syn = generate_synthetic(&small(), 9).unwrap();
    let sk = compress(&syn.bundle, &options(Strategy::Gamma)).unwrap();
    let r = skelgraph::storage::report(&syn.bundle, &sk).unwrap();
    assert_eq!(r.original.target_features, r.skeleton.target_features);
    assert_eq!(r.original.target_features, 60 * 5 * 4);
    assert!(r.skeleton.adjacency < r.original.adjacency);
    assert!(r.skeleton.background_features < r.original.background_features);
    assert!(r.pattern_histogram.is_none());

    let alpha = compress(&syn.bundle, &options(Strategy::Alpha)).unwrap();
    let r = skelgraph::storage::report(&syn.bundle, &alpha).unwrap();
    let total: usize = r.pattern_histogram.unwrap().values().sum();
    assert_eq!(total, alpha.skeleton.background_count());
}
