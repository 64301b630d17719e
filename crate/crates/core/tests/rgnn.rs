use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use causa_core::netgraph::{FeatureGraph, VertexKey};
use causa_core::rgnn::{
    init_states, Activation, ReadoutLayer, RgnnConfig, RgnnModel, StateSet, DEFAULT_MAX_ITER, DEFAULT_TOLERANCE,
};

fn key(i: usize) -> VertexKey {
    VertexKey::entity(format!("v{i}"))
}

fn featured_graph(n: usize, edges: &[(usize, usize)], vdim: usize, edim: usize, rng: &mut ChaCha8Rng) -> FeatureGraph {
    FeatureGraph::with_features(
        (0..n).map(|i| (key(i), (0..vdim).map(|_| rng.random_range(-1.0..1.0)).collect())).collect(),
        edges.iter().map(|&(a, b)| (key(a), key(b), (0..edim).map(|_| rng.random_range(-1.0..1.0)).collect())).collect(),
    )
    .unwrap()
}

fn config(vdim: usize, edim: usize) -> RgnnConfig {
    RgnnConfig {
        vertex_dim: vdim,
        edge_dim: edim,
        state_dim: 2,
        hidden_dim: 3,
        hidden_activation: Activation::Tanh,
        readout: vec![ReadoutLayer { out: 2, act: Activation::Tanh }, ReadoutLayer { out: 1, act: Activation::Identity }],
        contraction_target: 0.9,
    }
}

#[test]
fn gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let g = featured_graph(3, &[(0, 1), (1, 2), (0, 2)], 2, 1, &mut rng);
    let model = RgnnModel::random(config(2, 1), 0.8, &mut rng).unwrap().certify_contraction(&g);
    let fp = model.run_to_fixed_point(&g, init_states(&g, 2), DEFAULT_TOLERANCE, DEFAULT_MAX_ITER).unwrap();
    let targets: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
    let (_, grad) = model.unrolled_loss_and_grad(&g, &fp.states, &targets, 10).unwrap();
    let theta = model.params();
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for k in 0..theta.len() {
        let loss_at = |delta: f64| {
            let mut m = model.clone();
            let mut p = theta.clone();
            p[k] += delta;
            m.set_params(&p);
            m.unrolled_loss_and_grad(&g, &fp.states, &targets, 10).unwrap().0
        };
        let numeric = (loss_at(h) - loss_at(-h)) / (2.0 * h);
        let rel = (grad[k] - numeric).abs() / grad[k].abs().max(numeric.abs()).max(1e-8);
        worst = worst.max(rel);
        assert!(rel < 1e-4, "param {k}: analytic {} numeric {numeric}", grad[k]);
    }
    assert!(worst < 1e-4);
}

#[test]
fn locality_on_a_path() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let path: Vec<(usize, usize)> = (0..6).map(|i| (i, i + 1)).collect();
    let g = featured_graph(7, &path, 2, 0, &mut rng);
    let model = RgnnModel::random(config(2, 0), 1.0, &mut rng).unwrap();
    let end = g.index_of(&key(0)).unwrap();
    let far = g.index_of(&key(6)).unwrap();
    let perturbed = g.with_vertex_features(end, vec![5.0, -3.0]).unwrap();
    let (mut a, mut b) = (init_states(&g, 2), init_states(&g, 2));
    for k in 1..=6 {
        a = model.transition_step(&g, &a).unwrap();
        b = model.transition_step(&perturbed, &b).unwrap();
        if k <= 5 {
            assert_eq!(a.state(far).iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.state(far).iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        } else {
            assert_ne!(a.state(far), b.state(far));
        }
    }
}

fn random_edges(n: usize, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if rng.random_bool(0.4) {
                edges.push((a, b));
            }
        }
    }
    edges
}

#[test]
fn certified_models_always_converge() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..100 {
        let n = rng.random_range(1..8);
        let edges = random_edges(n, &mut rng);
        let g = featured_graph(n, &edges, 1, 1, &mut rng);
        let m = RgnnModel::random(config(1, 1), 3.0, &mut rng).unwrap().certify_contraction(&g);
        let c = m.certificate().unwrap();
        assert!(c.bound <= 0.9 + 1e-12);
        let fp = m.run_to_fixed_point(&g, init_states(&g, 2), DEFAULT_TOLERANCE, DEFAULT_MAX_ITER).unwrap();
        // Convergence rate: Δ_k ≤ Δ_1 · c^(k−1).
        if let Some(&d0) = fp.log.first() {
            for (k, &d) in fp.log.iter().enumerate() {
                assert!(d <= d0 * 0.9f64.powi(k as i32) + 1e-12);
            }
        }
        for w in fp.log.windows(2) {
            assert!(w[1] <= 0.9 * w[0] + 1e-12);
        }
        // Uniqueness from another start.
        let other = StateSet::filled(n, 2, 1.0);
        let fq = m.run_to_fixed_point(&g, other, DEFAULT_TOLERANCE, DEFAULT_MAX_ITER).unwrap();
        assert!(fp.states.max_change(&fq.states) < 10.0 * DEFAULT_TOLERANCE);
    }
}

#[test]
fn uncertified_expansive_model_reports_non_convergence() {
    let g = FeatureGraph::new(vec![key(0), key(1)], vec![(key(0), key(1))]).unwrap();
    let m = causa_core::rgnn::scalar_model(1.5, 1.0, None, 0.9).unwrap();
    assert!(matches!(
        m.run_to_fixed_point(&g, init_states(&g, 1), 1e-8, 200),
        Err(causa_core::rgnn::RgnnError::NotConverged { max_iter: 200, .. })
    ));
    let fixed = m.certify_contraction(&g);
    assert!(fixed.run_to_fixed_point(&g, init_states(&g, 1), 1e-8, 200).is_ok());
}

#[test]
fn constant_readout_is_uniform() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let g = featured_graph(4, &[(0, 1), (2, 3)], 1, 0, &mut rng);
    let mut m = RgnnModel::random(config(1, 0), 1.0, &mut rng).unwrap();
    for l in &mut m.layers_mut()[2..] {
        l.w.iter_mut().for_each(|w| *w = 0.0);
    }
    let fp = m.certify_contraction(&g).run_to_fixed_point(&g, init_states(&g, 2), 1e-10, 1000).unwrap();
    let out = m.readout(&fp.states).unwrap();
    assert!(out.iter().all(|&o| o == out[0]));
}
