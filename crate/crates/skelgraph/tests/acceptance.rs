//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use skelgraph::{compress, generate_synthetic, save_dataset, CompressOptions, SbmConfig};
use skelgraph_core::ablation::{run_ablation, AblationConfig, CutKind, CutSpec};
use skelgraph_core::condense::{condense, CondenseOptions};
use skelgraph_core::eval::{compare, mean_std, EvalInput, PropClassifierConfig};
use skelgraph_core::fetch::{build_vanilla, fetch_affiliation, fetch_bridging};
use skelgraph_core::lmpp::{check_swap_invariance, SwapCheckConfig};
use skelgraph_core::metrics::format_bcr;
use skelgraph_core::{Aggregation, FetchConfig, NodeId, SkeletonGraph, Strategy};
use skelgraph_testkit::{
    group_by_string_key, mss_string, oracle_affiliation, oracle_bridging, oracle_mss, random_instance, Instance,
};

const FETCH_CONFIGS: [(u32, u32, usize); 3] = [(2, 1, 2), (3, 1, 5), (3, 3, 5)];
const BUNDLE_SEEDS: [u64; 5] = [0, 1, 2, 3, 4];
const EVAL_SEEDS: u64 = 10;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn secs(d: Duration) -> String {
    format!("{:.2}s", d.as_secs_f64())
}

fn fetch_oracle() -> Outcome {
    let start = Instant::now();
    let (mut runs, mut mismatches) = (0, Vec::new());
    for seed in 0..50u64 {
        let n = 20 + (seed as usize * 7) % 181;
        let inst = random_instance(seed, n, 3.0 / n as f64, 4);
        for (d1, d2, k) in FETCH_CONFIGS {
            let (bridging, _) = fetch_bridging(&inst.graph, &inst.roles, d1).unwrap();
            let got: BTreeSet<u32> = bridging.iter().map(|b| b.0).collect();
            let bridging_ok = got == oracle_bridging(&inst.graph, &inst.roles, d1);
            let aff = fetch_affiliation(&inst.graph, &inst.roles, &inst.features, d2, k).unwrap();
            let got: BTreeMap<u32, BTreeSet<u32>> = aff
                .iter()
                .map(|a| (a.node.0, a.owners.iter().map(|o| o.target.0).collect()))
                .collect();
            let aff_ok = got == oracle_affiliation(&inst.graph, &inst.roles, &inst.features, d2, k);
            if !(bridging_ok && aff_ok) {
                mismatches.push(format!("seed {seed} ({d1},{d2},{k})"));
            }
            runs += 1;
        }
    }
    let t = start.elapsed();
    outcome(
        mismatches.is_empty() && t < Duration::from_secs(30),
        format!("{runs} graph/config runs, {} mismatches {:?}, {} (limit 30s)", mismatches.len(), mismatches, secs(t)),
    )
}

fn swap_oracle() -> Outcome {
    let start = Instant::now();
    let (mut triples, mut worst, mut failed) = (0, 0.0f64, 0);
    for seed in 0..40u64 {
        let inst = random_instance(500 + seed, 60, 0.05, 3);
        let cfg = SwapCheckConfig {
            seed,
            ..SwapCheckConfig::default()
        };
        let r = check_swap_invariance(&inst.graph, &inst.roles, &inst.features, cfg).unwrap();
        triples += r.evaluated_triples;
        worst = worst.max(r.max_deviation);
        failed += usize::from(!r.passed());
    }
    let t = start.elapsed();
    outcome(
        triples >= 100 && worst <= 1e-9 && failed == 0 && t < Duration::from_secs(60),
        format!("{triples} triples (need 100), max deviation {worst:.2e} (limit 1e-9), {} (limit 60s)", secs(t)),
    )
}

fn partition(s: &SkeletonGraph) -> BTreeSet<BTreeSet<u32>> {
    s.supernodes.iter().map(|m| m.members.iter().map(|u| u.0).collect()).collect()
}

/// Every failed check on one instance.
fn condensation_failures(inst: &Instance, cfg: FetchConfig) -> Vec<&'static str> {
    let mut fails = Vec::new();
    let bridging = oracle_bridging(&inst.graph, &inst.roles, cfg.d1);
    let affiliation = oracle_affiliation(&inst.graph, &inst.roles, &inst.features, cfg.d2, cfg.k_affil);
    let mut keep: BTreeSet<u32> = inst.roles.targets().iter().map(|t| t.0).collect();
    keep.extend(&bridging);
    keep.extend(affiliation.keys());
    let mss = oracle_mss(&inst.graph, &inst.roles, &keep, cfg.default_hop_cap());

    let f = build_vanilla(&inst.graph, &inst.roles, &inst.features, cfg).unwrap();
    let run = |s, agg| condense(&f, &inst.features, CondenseOptions::new(s).with_aggregation(agg)).unwrap();
    let alpha = run(Strategy::Alpha, Aggregation::Mean);
    let beta = run(Strategy::Beta, Aggregation::Mean);

    let keys = |with_d| mss.iter().map(|(b, p)| (*b, mss_string(p, with_d))).collect::<BTreeMap<_, _>>();
    if partition(&alpha) != group_by_string_key(&keys(true)) {
        fails.push("alpha grouping");
    }
    if partition(&beta) != group_by_string_key(&keys(false)) {
        fails.push("beta grouping");
    }
    for s in &beta.supernodes {
        let mut want: BTreeMap<u32, f64> = BTreeMap::new();
        for m in &s.members {
            for &(t, d) in &mss[&m.0] {
                *want.entry(t).or_insert(0.0) += 1.0 / d as f64;
            }
        }
        let got: BTreeMap<u32, f64> = s.links.iter().map(|l| (l.target.0, l.raw_weight)).collect();
        if got != want {
            fails.push("beta raw weights");
            break;
        }
    }

    for agg in [Aggregation::Mean, Aggregation::Sum] {
        let gamma = run(Strategy::Gamma, agg);
        let beta = run(Strategy::Beta, agg);
        let pure = |u: &NodeId| !bridging.contains(&u.0) && affiliation.contains_key(&u.0);
        let mut folded: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
        for s in beta.supernodes.iter().filter(|s| s.members.iter().all(pure)) {
            for m in &s.members {
                for &t in &affiliation[&m.0] {
                    folded.entry(t).or_default().push(m.0);
                }
            }
        }
        for (i, t) in gamma.targets.iter().enumerate() {
            let mut rows = vec![t.0];
            rows.extend(folded.get(&t.0).into_iter().flatten());
            let mut want = vec![0.0f64; inst.features.dim()];
            for &r in &rows {
                for (w, v) in want.iter_mut().zip(inst.features.row(r as usize)) {
                    *w += *v as f64;
                }
            }
            if agg == Aggregation::Mean {
                want.iter_mut().for_each(|w| *w /= rows.len() as f64);
            }
            if gamma.features.row(i).iter().zip(&want).any(|(g, w)| (*g as f64 - w).abs() > 1e-6) {
                fails.push("gamma features");
                break;
            }
        }
        let t = inst.roles.target_count();
        if [&alpha, &beta, &gamma].iter().any(|s| s.target_count() != t) {
            fails.push("target count");
        }
        if !(gamma.node_count() <= beta.node_count() && beta.node_count() <= alpha.node_count()) {
            fails.push("node count order");
        }
    }
    fails
}

fn condensation_soundness() -> Outcome {
    let mut failures = Vec::new();
    for seed in 0..50u64 {
        let n = 30 + (seed as usize * 13) % 160;
        let inst = random_instance(2000 + seed, n, 2.5 / n as f64, 4);
        let (d1, d2, k) = FETCH_CONFIGS[seed as usize % 3];
        let cfg = FetchConfig::new(d1, d2, k).unwrap();
        for f in condensation_failures(&inst, cfg) {
            failures.push(format!("seed {seed}: {f}"));
        }
    }
    outcome(failures.is_empty(), format!("50 instances, failures: {failures:?}"))
}

fn bcr_table() -> Outcome {
    let table = [
        (373_015, 2_474_949, "0.150"),
        (6_349, 90_941, "0.069"),
        (479_861, 1_203_354, "0.398"),
        (2_970_934, 242_762_340, "0.012"),
    ];
    let got: Vec<String> = table.iter().map(|&(s, o, _)| format_bcr(s, o).unwrap()).collect();
    let want: Vec<&str> = table.iter().map(|r| r.2).collect();
    outcome(got == want, format!("got {got:?}, want {want:?}"))
}

struct Preservation {
    original: f64,
    skeleton: f64,
    random: f64,
    bcr: String,
}

fn preservation(bundle: &skelgraph_core::DatasetBundle, cfg: &PropClassifierConfig) -> Preservation {
    let opts = CompressOptions {
        fetch: FetchConfig::new(2, 1, 5).unwrap(),
        condense: CondenseOptions::new(Strategy::Gamma),
    };
    let sk = compress(bundle, &opts).unwrap();
    let labels = bundle.labels.as_ref().unwrap();
    let seeds: Vec<u64> = (0..EVAL_SEEDS).collect();
    let report = compare(
        &EvalInput::original(bundle),
        &EvalInput::skeleton(&sk.skeleton),
        labels,
        cfg,
        &seeds,
    )
    .unwrap();
    let keep = sk.skeleton.background_count();
    let random: Vec<f64> = seeds
        .iter()
        .map(|&s| {
            let subset = EvalInput::random_subset(bundle, keep, s).unwrap();
            subset.score(labels, cfg, &[s]).unwrap()[0].test_accuracy
        })
        .collect();
    Preservation {
        original: report.first_mean_std().0,
        skeleton: report.second_mean_std().0,
        random: mean_std(&random).0,
        bcr: format_bcr(keep as u64, bundle.roles.background_count() as u64).unwrap(),
    }
}

fn downstream(bundles: &[skelgraph_core::DatasetBundle]) -> Outcome {
    let start = Instant::now();
    let cfg = PropClassifierConfig::default();
    let mut pass = true;
    let mut parts = Vec::new();
    for (seed, b) in BUNDLE_SEEDS.iter().zip(bundles) {
        let p = preservation(b, &cfg);
        let delta = 100.0 * (p.skeleton - p.original);
        let margin = 100.0 * (p.skeleton - p.random);
        pass &= delta.abs() <= 3.0 && margin > 0.0;
        parts.push(format!(
            "bundle {seed}: original {:.2} gamma {:.2} (delta {delta:+.2}) random {:.2} (margin {margin:+.2}) BCR {}",
            100.0 * p.original,
            100.0 * p.skeleton,
            100.0 * p.random,
            p.bcr
        ));
    }
    let t = start.elapsed();
    pass &= t < Duration::from_secs(300);
    parts.push(format!("{} (limit 300s)", secs(t)));
    outcome(pass, parts.join("; "))
}

fn ablation(bundles: &[skelgraph_core::DatasetBundle]) -> Outcome {
    let cfg = AblationConfig {
        classifier: PropClassifierConfig::default(),
        seeds: (0..EVAL_SEEDS).collect(),
    };
    let mut pass = true;
    let mut parts = Vec::new();
    for (seed, b) in BUNDLE_SEEDS.iter().zip(bundles) {
        let mut specs = Vec::new();
        for kind in [CutKind::Tb, CutKind::Bb, CutKind::Bridb] {
            specs.push(CutSpec::class(kind));
            specs.push(CutSpec::matched_random(&b.graph, &b.roles, kind, 0));
        }
        let rows = run_ablation(b, &specs, &cfg).unwrap();
        let m: Vec<f64> = rows.iter().map(|r| 100.0 * r.mean).collect();
        pass &= m[0] < m[1] && m[2] >= m[3] - 0.5;
        parts.push(format!(
            "bundle {seed}: tb {:.2} < {:.2}, bb {:.2} >= {:.2} - 0.5, bridb {:.2} vs {:.2} (not gated)",
            m[0], m[1], m[2], m[3], m[4], m[5]
        ));
    }
    outcome(pass, parts.join("; "))
}

fn scaling() -> Outcome {
    let opts = CompressOptions {
        fetch: FetchConfig::new(2, 1, 5).unwrap(),
        condense: CondenseOptions::new(Strategy::Gamma),
    };
    // Average degree 8 and a 20% target share at every size.
    let mut times = Vec::new();
    let mut edges = Vec::new();
    for scale in [1usize, 2, 4, 8] {
        let n = 2500 * scale;
        let p = 8.0 / n as f64;
        let cfg = SbmConfig {
            targets: n / 5,
            backgrounds: n - n / 5,
            p_intra: 2.0 * p,
            p_inter: 2.0 * p / 3.0,
            p_bb_intra: 2.0 * p,
            p_bb_inter: 2.0 * p / 3.0,
            ..SbmConfig::default()
        };
        let bundle = generate_synthetic(&cfg, 100 + scale as u64).unwrap().bundle;
        edges.push(bundle.graph.edge_count());
        let best = (0..7)
            .map(|_| {
                let start = Instant::now();
                std::hint::black_box(compress(&bundle, &opts).unwrap());
                start.elapsed()
            })
            .min()
            .unwrap();
        times.push(best.as_secs_f64());
    }
    let ratios: Vec<f64> = times.windows(2).map(|w| w[1] / w[0]).collect();
    let pass = ratios.iter().all(|&r| r <= 2.6);
    let ms: Vec<String> = times.iter().map(|t| format!("{:.1}ms", 1000.0 * t)).collect();
    let rs: Vec<String> = ratios.iter().map(|r| format!("{r:.2}")).collect();
    outcome(pass, format!("edges {edges:?}, times {ms:?}, ratios {rs:?} (limit 2.6)"))
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

fn determinism(bundles: &[skelgraph_core::DatasetBundle]) -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let mut diffs = Vec::new();
    for (seed, b) in BUNDLE_SEEDS.iter().zip(bundles) {
        let data = tmp.path().join(format!("data{seed}"));
        save_dataset(b, &data).unwrap();
        let run = |threads: &str, name: &str| {
            let out = tmp.path().join(format!("{name}{seed}"));
            let status = Command::new(env!("CARGO_BIN_EXE_skelgraph"))
                .args(["--quiet", "--threads", threads, "compress", "--input"])
                .arg(&data)
                .arg("--out")
                .arg(&out)
                .status()
                .unwrap();
            assert!(status.success());
            dir_bytes(&out)
        };
        let one = run("1", "t1-");
        let eight = run("8", "t8-");
        let again = run("8", "t8b-");
        if one != eight {
            diffs.push(format!("bundle {seed}: threads 1 vs 8"));
        }
        if eight != again {
            diffs.push(format!("bundle {seed}: repeated run"));
        }
    }
    outcome(diffs.is_empty(), format!("5 bundles x (threads 1, 8, 8 again), differences: {diffs:?}"))
}

fn main() {
    let bundles: Vec<_> = BUNDLE_SEEDS
        .iter()
        .map(|&s| generate_synthetic(&SbmConfig::default(), s).unwrap().bundle)
        .collect();
    let criteria: [(&str, &dyn Fn() -> Outcome); 8] = [
        ("fetch oracle equivalence", &fetch_oracle),
        ("swap invariance oracle", &swap_oracle),
        ("condensation soundness", &condensation_soundness),
        ("BCR table", &bcr_table),
        ("downstream preservation", &|| downstream(&bundles)),
        ("ablation directionality", &|| ablation(&bundles)),
        ("complexity scaling", &scaling),
        ("determinism", &|| determinism(&bundles)),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        failed += usize::from(!o.pass);
        println!("{} {}. {name}: {}", if o.pass { "PASS" } else { "FAIL" }, i + 1, o.detail);
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
