use std::collections::{BTreeMap, BTreeSet};

use skelgraph_core::condense::{condense, CondenseOptions, Grouping, StructureKey};
use skelgraph_core::fetch::build_vanilla;
use skelgraph_core::{Aggregation, FetchConfig, FetchResult, NodeId, Strategy};
use skelgraph_testkit::{
    group_by_string_key, mss_string, oracle_affiliation, oracle_bridging, oracle_mss,
    random_instance, Instance,
};

struct Oracle {
    mss: BTreeMap<u32, Vec<(u32, u32)>>,
    bridging: BTreeSet<u32>,
    affiliation: BTreeMap<u32, BTreeSet<u32>>,
}

fn oracle(inst: &Instance, cfg: FetchConfig) -> Oracle {
    let bridging = oracle_bridging(&inst.graph, &inst.roles, cfg.d1);
    let affiliation = oracle_affiliation(&inst.graph, &inst.roles, &inst.features, cfg.d2, cfg.k_affil);
    let mut keep: BTreeSet<u32> = inst.roles.targets().iter().map(|t| t.0).collect();
    keep.extend(&bridging);
    keep.extend(affiliation.keys());
    let mss = oracle_mss(&inst.graph, &inst.roles, &keep, cfg.default_hop_cap());
    Oracle {
        mss,
        bridging,
        affiliation,
    }
}

fn partition(groups: impl Iterator<Item = Vec<NodeId>>) -> BTreeSet<BTreeSet<u32>> {
    groups.map(|m| m.iter().map(|u| u.0).collect()).collect()
}

fn instances() -> impl Iterator<Item = (u64, Instance, FetchConfig)> {
    (0..40u64).map(|seed| {
        let n = 30 + (seed as usize * 13) % 140;
        let inst = random_instance(1000 + seed, n, 2.5 / n as f64, 4);
        let cfg = match seed % 3 {
            0 => FetchConfig::new(2, 1, 2),
            1 => FetchConfig::new(3, 1, 5),
            _ => FetchConfig::new(3, 3, 5),
        }
        .unwrap();
        (seed, inst, cfg)
    })
}

fn run(f: &FetchResult, inst: &Instance, s: Strategy, agg: Aggregation) -> skelgraph_core::SkeletonGraph {
    let sk = condense(f, &inst.features, CondenseOptions::new(s).with_aggregation(agg)).unwrap();
    sk.validate().unwrap();
    sk
}

#[test]
fn grouping_matches_canonical_string_keys() {
    for (seed, inst, cfg) in instances() {
        let f = build_vanilla(&inst.graph, &inst.roles, &inst.features, cfg).unwrap();
        let o = oracle(&inst, cfg);
        let alpha = run(&f, &inst, Strategy::Alpha, Aggregation::Mean);
        let beta = run(&f, &inst, Strategy::Beta, Aggregation::Mean);

        let full: BTreeMap<u32, String> = o.mss.iter().map(|(b, p)| (*b, mss_string(p, true))).collect();
        let drop: BTreeMap<u32, String> = o.mss.iter().map(|(b, p)| (*b, mss_string(p, false))).collect();
        assert_eq!(
            partition(alpha.supernodes.iter().map(|s| s.members.clone())),
            group_by_string_key(&full),
            "alpha seed {seed}"
        );
        assert_eq!(
            partition(beta.supernodes.iter().map(|s| s.members.clone())),
            group_by_string_key(&drop),
            "beta seed {seed}"
        );
        for s in &alpha.supernodes {
            let StructureKey::Full(m) = &s.key else { panic!("alpha key") };
            let pairs: Vec<(u32, u32)> = m.pairs().iter().map(|(t, d)| (t.0, *d)).collect();
            assert_eq!(pairs, o.mss[&s.members[0].0]);
        }
    }
}

#[test]
fn beta_raw_weights_are_exact_inverse_distance_sums() {
    for (seed, inst, cfg) in instances() {
        let f = build_vanilla(&inst.graph, &inst.roles, &inst.features, cfg).unwrap();
        let o = oracle(&inst, cfg);
        let beta = run(&f, &inst, Strategy::Beta, Aggregation::Mean);
        for s in &beta.supernodes {
            let mut want: BTreeMap<u32, f64> = BTreeMap::new();
            for m in &s.members {
                for &(t, d) in &o.mss[&m.0] {
                    *want.entry(t).or_insert(0.0) += 1.0 / d as f64;
                }
            }
            let got: BTreeMap<u32, f64> = s.links.iter().map(|l| (l.target.0, l.raw_weight)).collect();
            assert_eq!(got, want, "seed {seed}");
        }
        for e in &beta.edges {
            assert!(e.weight > 0.0 && e.weight <= 1.0);
        }
    }
}

#[test]
fn gamma_folds_pure_affiliation_groups() {
    for (seed, inst, cfg) in instances() {
        let f = build_vanilla(&inst.graph, &inst.roles, &inst.features, cfg).unwrap();
        let o = oracle(&inst, cfg);
        for agg in [Aggregation::Mean, Aggregation::Sum] {
            let beta = run(&f, &inst, Strategy::Beta, agg);
            let gamma = run(&f, &inst, Strategy::Gamma, agg);
            let pure_only = |u: &NodeId| !o.bridging.contains(&u.0) && o.affiliation.contains_key(&u.0);
            let pure: Vec<_> = beta
                .supernodes
                .iter()
                .filter(|s| s.members.iter().all(pure_only))
                .collect();
            assert_eq!(gamma.supernodes.len(), beta.supernodes.len() - pure.len(), "seed {seed}");

            let mut folded: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
            for s in &pure {
                for m in &s.members {
                    for &t in &o.affiliation[&m.0] {
                        folded.entry(t).or_default().push(m.0);
                    }
                }
            }
            let dim = inst.features.dim();
            for (i, t) in gamma.targets.iter().enumerate() {
                let mut rows = vec![t.0];
                rows.extend(folded.get(&t.0).into_iter().flatten());
                let mut want = vec![0.0f64; dim];
                for &r in &rows {
                    for (w, v) in want.iter_mut().zip(inst.features.row(r as usize)) {
                        *w += *v as f64;
                    }
                }
                if agg == Aggregation::Mean {
                    want.iter_mut().for_each(|w| *w /= rows.len() as f64);
                }
                for (g, w) in gamma.features.row(i).iter().zip(&want) {
                    assert!((*g as f64 - w).abs() <= 1e-6, "seed {seed} target {t}");
                }
            }
        }
    }
}

#[test]
fn targets_preserved_and_node_counts_monotone() {
    for (seed, inst, cfg) in instances() {
        let f = build_vanilla(&inst.graph, &inst.roles, &inst.features, cfg).unwrap();
        let a = run(&f, &inst, Strategy::Alpha, Aggregation::Mean);
        let b = run(&f, &inst, Strategy::Beta, Aggregation::Mean);
        let g = run(&f, &inst, Strategy::Gamma, Aggregation::Mean);
        for s in [&a, &b, &g] {
            assert_eq!(s.targets, inst.roles.targets(), "seed {seed}");
        }
        assert!(g.node_count() <= b.node_count());
        assert!(b.node_count() <= a.node_count());
        assert!(a.node_count() <= f.vanilla.node_count());
    }
}

#[test]
fn every_fetched_node_lands_exactly_once() {
    for (seed, inst, cfg) in instances() {
        let f = build_vanilla(&inst.graph, &inst.roles, &inst.features, cfg).unwrap();
        let fetched: BTreeSet<NodeId> = f.fetched().collect();
        for s in [Strategy::Alpha, Strategy::Beta, Strategy::Gamma] {
            let sk = run(&f, &inst, s, Aggregation::Mean);
            let in_super: Vec<NodeId> = sk.supernodes.iter().flat_map(|s| s.members.clone()).collect();
            let in_fold: BTreeSet<NodeId> = sk.folds.iter().flatten().copied().collect();
            let super_set: BTreeSet<NodeId> = in_super.iter().copied().collect();
            assert_eq!(in_super.len(), super_set.len(), "seed {seed}");
            assert!(super_set.is_disjoint(&in_fold));
            assert_eq!(&super_set | &in_fold, fetched);
            assert_eq!(sk.membership().keys().copied().collect::<BTreeSet<_>>(), fetched);
        }
    }
}

#[test]
fn sum_pooling_conserves_feature_mass_in_alpha() {
    for (seed, inst, cfg) in instances() {
        let f = build_vanilla(&inst.graph, &inst.roles, &inst.features, cfg).unwrap();
        let a = run(&f, &inst, Strategy::Alpha, Aggregation::Sum);
        let dim = inst.features.dim();
        let mut want = vec![0.0f64; dim];
        for &u in f.id_map.kept() {
            for (w, v) in want.iter_mut().zip(inst.features.row(u.index())) {
                *w += *v as f64;
            }
        }
        let mut got = vec![0.0f64; dim];
        for r in 0..a.node_count() {
            for (g, v) in got.iter_mut().zip(a.features.row(r)) {
                *g += *v as f64;
            }
        }
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() <= 1e-6 * w.abs().max(1.0), "seed {seed}");
        }
    }
}

#[test]
fn xor_grouping_agrees_with_canonical() {
    for (_, inst, cfg) in instances().take(15) {
        let f = build_vanilla(&inst.graph, &inst.roles, &inst.features, cfg).unwrap();
        for s in [Strategy::Alpha, Strategy::Beta, Strategy::Gamma] {
            let canon = run(&f, &inst, s, Aggregation::Mean);
            let mut opts = CondenseOptions::new(s);
            opts.grouping = Grouping::Xor { seed: 9 };
            let xor = condense(&f, &inst.features, opts).unwrap();
            assert_eq!(
                partition(canon.supernodes.iter().map(|s| s.members.clone())),
                partition(xor.supernodes.iter().map(|s| s.members.clone()))
            );
        }
    }
}
