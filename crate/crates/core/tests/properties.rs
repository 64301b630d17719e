use proptest::prelude::*;

use causa_core::assumptions::{check_common_support, check_subpopulation_overlap, GroupingRule};
use causa_core::dag::{CausalDag, DagError, DagSpec, NodeRole, NodeSpec};
use causa_core::dataset::{CausalDataset, Schema};
use causa_core::estimators::{
    ate_covariate_adjustment, ate_difference_in_means, estimate_propensity, fit_outcome_model, match_scores,
    PropensityModel,
};
use causa_core::interp::{fill_gaps, FillMethod};
use causa_core::netgraph::FeatureGraph;

fn names(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

/// Series on integer periods with interior gaps; the first and last are kept.
fn gapped_series() -> impl Strategy<Value = Vec<(f64, bool)>> {
    (4usize..14).prop_flat_map(|n| {
        proptest::collection::vec(any::<bool>(), n).prop_map(|mask| {
            let last = mask.len() - 1;
            mask.into_iter()
                .enumerate()
                .map(|(i, keep)| (i as f64, keep || i == 0 || i == last || i == 1))
                .collect()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn spline_exact_on_affine(a in -1e3f64..1e3, b in -1e6f64..1e6, series in gapped_series()) {
        let input: Vec<(f64, Option<f64>)> = series.iter().map(|&(t, keep)| (t, keep.then_some(a * t + b))).collect();
        let out = fill_gaps(&input, FillMethod::Cubic).unwrap();
        for (&(t, _), v) in series.iter().zip(&out) {
            let want = a * t + b;
            prop_assert!((v - want).abs() <= 1e-9 * want.abs().max(1.0), "t={t} got {v} want {want}");
        }
    }

    #[test]
    fn fill_is_idempotent(ys in proptest::collection::vec(-100.0f64..100.0, 4..12), series in gapped_series()) {
        let input: Vec<(f64, Option<f64>)> = series
            .iter()
            .enumerate()
            .map(|(i, &(t, keep))| (t, keep.then(|| ys[i % ys.len()])))
            .collect();
        for method in [FillMethod::Cubic, FillMethod::Pad, FillMethod::CubicPad] {
            let once = fill_gaps(&input, method).unwrap();
            let complete: Vec<(f64, Option<f64>)> = series.iter().zip(&once).map(|(&(t, _), &v)| (t, Some(v))).collect();
            prop_assert_eq!(fill_gaps(&complete, method).unwrap(), once);
        }
    }

    #[test]
    fn lagged_outcome_projects_back(values in proptest::collection::vec(-1e4f64..1e4, 6)) {
        let header = ["State", "Year", "T", "Users"];
        let rows: Vec<Vec<String>> = (0..6)
            .map(|i| {
                let entity = if i < 3 { "A" } else { "B" };
                vec![entity.to_string(), (2014 + i % 3).to_string(), (i % 2).to_string(), format!("{:?}", values[i])]
            })
            .collect();
        let schema = Schema {
            entity: "State".into(), period: "Year".into(), covariates: vec![], treatment: "T".into(), outcome: "Users".into(),
        };
        let ds = CausalDataset::from_records(&header, &rows, &schema).unwrap();
        let lagged = ds.derive_lagged_outcome("Pre", "Post").unwrap();
        prop_assert_eq!(lagged.len(), 2);
        let kept = lagged.numeric("Users").unwrap();
        prop_assert_eq!(kept, vec![values[1], values[4]]);
        prop_assert_eq!(lagged.numeric("Pre").unwrap(), vec![values[0], values[3]]);
        prop_assert_eq!(lagged.outcome().unwrap(), vec![values[2], values[5]]);
    }
}

/// Random DAG over `n` covariates feeding T and Y, in topological order.
fn dag_spec(n: usize, edges: &[(usize, usize)]) -> DagSpec {
    let mut nodes: Vec<NodeSpec> = (0..n).map(|i| NodeSpec { name: format!("X{i}"), role: NodeRole::Covariate }).collect();
    nodes.push(NodeSpec { name: "T".into(), role: NodeRole::Treatment });
    nodes.push(NodeSpec { name: "Y".into(), role: NodeRole::Outcome });
    let name = |i: usize| if i < n { format!("X{i}") } else if i == n { "T".into() } else { "Y".into() };
    DagSpec { nodes, edges: edges.iter().map(|&(a, b)| (name(a), name(b))).collect() }
}

fn forward_edges() -> impl Strategy<Value = (usize, Vec<(usize, usize)>)> {
    (2usize..7).prop_flat_map(|n| {
        let total = n + 2;
        let pairs: Vec<(usize, usize)> = (0..total).flat_map(|a| (a + 1..total).map(move |b| (a, b))).collect();
        proptest::sample::subsequence(pairs.clone(), 1..=pairs.len()).prop_map(move |e| (n, e))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn back_edge_is_rejected((n, edges) in forward_edges(), pick in any::<prop::sample::Index>()) {
        prop_assert!(CausalDag::build(&dag_spec(n, &edges)).is_ok());
        let (a, b) = edges[pick.index(edges.len())];
        let mut cyclic = edges.clone();
        // Reverse a path a → b by adding b → a.
        cyclic.push((b, a));
        prop_assert_eq!(CausalDag::build(&dag_spec(n, &cyclic)), Err(DagError::Cycle));
    }

    #[test]
    fn adjustment_set_ignores_listing_order((n, edges) in forward_edges(), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let spec = dag_spec(n, &edges);
        let mut shuffled = spec.clone();
        let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
        shuffled.nodes.shuffle(&mut rng);
        shuffled.edges.shuffle(&mut rng);
        let (a, b) = (CausalDag::build(&spec).unwrap(), CausalDag::build(&shuffled).unwrap());
        prop_assert_eq!(a.adjustment_set(), b.adjustment_set());
        prop_assert_eq!(a.to_dot(), b.to_dot());
    }
}

fn linear_dataset() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<bool>, Vec<f64>)> {
    (8usize..40).prop_flat_map(|n| {
        (
            proptest::collection::vec(-10.0f64..10.0, n),
            proptest::collection::vec(-10.0f64..10.0, n),
            proptest::collection::vec(any::<bool>(), n),
            proptest::collection::vec(-1.0f64..1.0, n),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn covariate_adjustment_equals_beta((x1, x2, t, noise) in linear_dataset(), beta in -50.0f64..50.0) {
        prop_assume!(t.iter().any(|&v| v) && t.iter().any(|&v| !v));
        let y: Vec<f64> = (0..t.len()).map(|i| 3.0 * x1[i] - x2[i] + beta * f64::from(u8::from(t[i])) + noise[i]).collect();
        let ds = CausalDataset::from_arrays(&[("x1", x1), ("x2", x2)], t, y).unwrap();
        let m = fit_outcome_model(&ds, &names(&["x1", "x2"])).unwrap();
        prop_assert!((ate_covariate_adjustment(&m, &ds).unwrap().value - m.beta).abs() < 1e-10);
    }

    #[test]
    fn propensity_affine_invariant(
        x in proptest::collection::vec(-3.0f64..3.0, 12..40),
        flips in proptest::collection::vec(any::<bool>(), 40),
        scale in prop_oneof![0.001f64..0.1, 0.5f64..2.0, 10.0f64..1000.0],
        sign in prop_oneof![Just(1.0f64), Just(-1.0)],
        shift in -1e4f64..1e4,
    ) {
        let t: Vec<bool> = x.iter().zip(&flips).map(|(v, f)| (*v > 0.0) ^ *f).collect();
        prop_assume!(t.iter().any(|&v| v) && t.iter().any(|&v| !v));
        let spread = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - x.iter().cloned().fold(f64::INFINITY, f64::min);
        prop_assume!(spread > 1e-3);
        let n = x.len();
        let a = CausalDataset::from_arrays(&[("x", x.clone())], t.clone(), vec![0.0; n]).unwrap();
        let moved: Vec<f64> = x.iter().map(|v| sign * scale * v + shift).collect();
        let b = CausalDataset::from_arrays(&[("x", moved)], t, vec![0.0; n]).unwrap();
        let (pa, pb) = (estimate_propensity(&a, &names(&["x"])).unwrap(), estimate_propensity(&b, &names(&["x"])).unwrap());
        for (s, r) in pa.scores.iter().zip(&pb.scores) {
            prop_assert!((s - r).abs() < 1e-8, "{s} vs {r}");
        }
    }

    #[test]
    fn matching_is_deterministic(scores in proptest::collection::vec(0.0f64..1.0, 4..30), t in proptest::collection::vec(any::<bool>(), 30)) {
        let t = &t[..scores.len()];
        prop_assume!(t.iter().any(|&v| v) && t.iter().any(|&v| !v));
        prop_assert_eq!(match_scores(&scores, t).unwrap(), match_scores(&scores, t).unwrap());
    }

    #[test]
    fn common_support_monotone_in_epsilon(scores in proptest::collection::vec(0.0f64..1.0, 2..20), e1 in 0.001f64..0.499, e2 in 0.001f64..0.499) {
        let n = scores.len();
        let t: Vec<bool> = (0..n).map(|i| i % 2 == 0).collect();
        let ds = CausalDataset::from_arrays(&[], t, vec![0.0; n]).unwrap();
        let m = PropensityModel::from_scores(scores);
        let (lo, hi) = (e1.min(e2), e1.max(e2));
        if check_common_support(&ds, &m, hi).unwrap().passed {
            prop_assert!(check_common_support(&ds, &m, lo).unwrap().passed);
        }
    }

    #[test]
    fn whole_overlap_iff_both_groups(t in proptest::collection::vec(any::<bool>(), 1..12)) {
        let n = t.len();
        let ds = CausalDataset::from_arrays(&[], t, vec![1.0; n]).unwrap();
        let whole = check_subpopulation_overlap(&ds, &GroupingRule::Whole).unwrap();
        prop_assert_eq!(whole[0].passed, ate_difference_in_means(&ds).is_ok());
    }
}

fn records() -> impl Strategy<Value = Vec<(String, String)>> {
    proptest::collection::vec((0u8..12, 0u8..8), 1..40)
        .prop_map(|v| v.into_iter().map(|(e, a)| (format!("e{e}"), format!("a{a}"))).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn handshake_lemma(recs in records()) {
        let g = FeatureGraph::build_bipartite(&recs).unwrap();
        let total: usize = g.degree_centrality().values().sum();
        prop_assert_eq!(total, 2 * g.edge_count());
    }

    #[test]
    fn build_is_order_insensitive(recs in records(), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut shuffled = recs.clone();
        shuffled.shuffle(&mut rand::rngs::StdRng::seed_from_u64(seed));
        prop_assert_eq!(FeatureGraph::build_bipartite(&recs).unwrap(), FeatureGraph::build_bipartite(&shuffled).unwrap());
    }

    #[test]
    fn neighborhood_monotone(recs in records(), pick in any::<prop::sample::Index>()) {
        let g = FeatureGraph::build_bipartite(&recs).unwrap();
        let seed = pick.index(g.vertex_count());
        let mut prev = g.ball(seed, 0);
        for r in 1..6 {
            let next = g.ball(seed, r);
            prop_assert!(prev.iter().all(|v| next.contains(v)));
            prev = next;
        }
    }

    #[test]
    fn dot_round_trip(recs in records()) {
        let g = FeatureGraph::build_bipartite(&recs).unwrap();
        prop_assert_eq!(FeatureGraph::parse_dot(&g.to_dot()).unwrap(), g.clone());
        prop_assert_eq!(FeatureGraph::parse_graphml(&g.to_graphml()).unwrap(), g);
    }
}
