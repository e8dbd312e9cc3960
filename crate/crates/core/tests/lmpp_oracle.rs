use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use skelgraph_core::graph::build_graph;
use skelgraph_core::linalg::{max_abs_diff, vec_mat, Matrix};
use skelgraph_core::lmpp::{
    check_swap_invariance, lmpp_path, multi_path_aggregate, swap_deviation, LinearPassSpec,
    SwapCheckConfig,
};
use skelgraph_core::{Aggregation, FeatureMatrix, NodeId, RoleMask};
use skelgraph_testkit::random_instance;

fn random_x(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Matrix {
    Matrix::from_fn(n, dim, |_, _| rng.random_range(-2.0..2.0))
}

/// `sum_j c_j x_j W^j ... W^l` written out term by term: the node at path
/// position `j` (0-based) enters at step `max(j, 1)` with weight
/// `c^{l - max(j,1) + 1}` for mean pooling (`c = 1/2`) or 1 for sum.
fn telescoped(spec: &LinearPassSpec, x: &Matrix, path: &[usize]) -> Vec<f64> {
    let l = path.len() - 1;
    let c: f64 = match spec.aggregation {
        Aggregation::Mean => 0.5,
        Aggregation::Sum => 1.0,
    };
    let dim = x.cols();
    let mut total = vec![0.0; dim];
    for (j, &node) in path.iter().enumerate() {
        let first = j.max(1);
        let mut term = x.row(node).to_vec();
        for step in first..=l {
            term = vec_mat(&term, &spec.steps[step - 1]);
        }
        let scale = c.powi((l - first + 1) as i32);
        for (t, v) in total.iter_mut().zip(&term) {
            *t += scale * v;
        }
    }
    total
}

#[test]
fn path_fold_equals_closed_form_expansion() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for trial in 0..50 {
        let agg = if trial % 2 == 0 { Aggregation::Mean } else { Aggregation::Sum };
        let len = rng.random_range(2..7);
        let dim = rng.random_range(1..5);
        let spec = LinearPassSpec::random(dim, len - 1, agg, &mut rng);
        let x = random_x(&mut rng, 10, dim);
        let path: Vec<usize> = (0..len).map(|_| rng.random_range(0..10)).collect();
        let ids: Vec<NodeId> = path.iter().map(|&p| NodeId(p as u32)).collect();
        let got = lmpp_path(&spec, &x, &ids).unwrap();
        let want = telescoped(&spec, &x, &path);
        let scale = want.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        assert!(max_abs_diff(&got, &want) <= 1e-10 * scale, "trial {trial}");
    }
}

/// Two sources at the same distance to one target over disjoint chains.
#[test]
fn disjoint_equal_length_paths_are_swap_invariant() {
    // T=0; u=1-2-0 and v=3-4-0
    let g = build_graph(5, [(1, 2), (2, 0), (3, 4), (4, 0)].map(|(a, b)| (NodeId(a), NodeId(b)))).unwrap();
    let roles = RoleMask::from_targets(5, &[NodeId(0)]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for draw in 0..100 {
        let agg = if draw % 2 == 0 { Aggregation::Mean } else { Aggregation::Sum };
        let spec = LinearPassSpec::random(3, 2, agg, &mut rng);
        let x = random_x(&mut rng, 5, 3);
        let out = swap_deviation(&spec, &g, &roles, &x, NodeId(1), NodeId(3), NodeId(0)).unwrap();
        assert!(out.disjoint);
        assert!(out.deviation <= 1e-9, "draw {draw}: {}", out.deviation);
    }
}

/// Sources at different distances: the check must be able to fail.
#[test]
fn unequal_distances_break_invariance() {
    // u=1 adjacent to T=0; v=3 two hops away via 2
    let g = build_graph(4, [(1, 0), (3, 2), (2, 0)].map(|(a, b)| (NodeId(a), NodeId(b)))).unwrap();
    let roles = RoleMask::from_targets(4, &[NodeId(0)]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let spec = LinearPassSpec::random(3, 2, Aggregation::Mean, &mut rng);
    let x = random_x(&mut rng, 4, 3);
    let out = swap_deviation(&spec, &g, &roles, &x, NodeId(1), NodeId(3), NodeId(0)).unwrap();
    assert!(out.deviation > 1e-6);
}

/// The target output depends on a source only through the path length.
#[test]
fn arrival_depends_only_on_path_length() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let dim = 2;
    let spec = LinearPassSpec::random(dim, 3, Aggregation::Sum, &mut rng);
    let x = random_x(&mut rng, 8, dim);
    let a = vec![NodeId(1), NodeId(2), NodeId(3), NodeId(0)];
    let b = vec![NodeId(4), NodeId(5), NodeId(6), NodeId(0)];
    let mut swapped = x.clone();
    for (p, q) in [(1, 4), (2, 5), (3, 6)] {
        let (rp, rq) = (x.row(p).to_vec(), x.row(q).to_vec());
        swapped.row_mut(p).copy_from_slice(&rq);
        swapped.row_mut(q).copy_from_slice(&rp);
    }
    let before = multi_path_aggregate(&spec, &x, &[a.clone(), b.clone()], NodeId(0)).unwrap();
    let after = multi_path_aggregate(&spec, &swapped, &[a, b], NodeId(0)).unwrap();
    assert!(max_abs_diff(&before, &after) <= 1e-10);
}

#[test]
fn random_instances_pass_swap_check() {
    let mut evaluated = 0;
    for seed in 0..40 {
        let inst = random_instance(500 + seed, 60, 0.05, 3);
        let cfg = SwapCheckConfig {
            seed,
            ..SwapCheckConfig::default()
        };
        let r = check_swap_invariance(&inst.graph, &inst.roles, &inst.features, cfg).unwrap();
        assert!(r.passed(), "seed {seed}: {}", r.max_deviation);
        evaluated += r.evaluated_triples;
    }
    assert!(evaluated >= 100, "{evaluated}");
}

#[test]
fn swap_check_rejects_large_graphs() {
    let g = build_graph(501, std::iter::empty()).unwrap();
    let roles = RoleMask::from_targets(501, &[NodeId(0)]).unwrap();
    let x = FeatureMatrix::zeros(501, 2);
    assert!(check_swap_invariance(&g, &roles, &x, SwapCheckConfig::default()).is_err());
}
