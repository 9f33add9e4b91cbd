use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

fn vec_leaf(g: &mut Graph, name: &str, v: &[f64]) -> NodeId {
    g.leaf(name, Array::vector(v.to_vec()))
}

#[test]
fn add_is_elementwise() {
    let mut g = Graph::new();
    let a = vec_leaf(&mut g, "a", &[1.0, 2.0]);
    let b = vec_leaf(&mut g, "b", &[3.0, 4.0]);
    let c = g.add(a, b).unwrap();
    assert_eq!(g.forward(c).unwrap().data(), &[4.0, 6.0]);
}

#[test]
fn matmul_by_identity_returns_input() {
    let mut g = Graph::new();
    let i3 = g.constant(Array::identity(3));
    let a = g.leaf("a", Array::matrix(3, 4, (0..12).map(|v| v as f64 * 0.5 - 2.0).collect()));
    let p = g.matmul(i3, a).unwrap();
    let expected = g.value(a).unwrap().clone();
    assert_eq!(g.forward(p).unwrap(), &expected);
}

#[test]
fn activations_at_zero() {
    let mut g = Graph::new();
    let z = g.constant(Array::scalar(0.0));
    let t = g.tanh(z);
    let s = g.sigmoid(z);
    assert_eq!(g.forward(t).unwrap().item(), 0.0);
    assert_eq!(g.forward(s).unwrap().item(), 0.5);
}

#[test]
fn shape_mismatch_names_tag_and_shapes() {
    let mut g = Graph::new();
    let a = vec_leaf(&mut g, "a", &[1.0, 2.0]);
    let b = vec_leaf(&mut g, "b", &[1.0, 2.0, 3.0]);
    match g.add(a, b) {
        Err(GraphError::Shape { tag, shapes }) => {
            assert_eq!(tag, Primitive::Add);
            assert_eq!(shapes, vec![vec![2], vec![3]]);
        }
        other => panic!("expected shape error, got {other:?}"),
    }
    let m = g.leaf("m", Array::zeros(&[2, 2]));
    let err = g.matmul(m, b).unwrap_err();
    assert!(err.to_string().contains("matmul"));
    assert!(g.slice(a, 1, 2).is_err());
    let s = g.leaf("s", Array::zeros(&[3, 2]));
    assert!(g.concat(a, s).is_err());
    assert!(g.broadcast(b, &[2, 3]).is_err());
}

#[test]
fn forward_sum_of_squares() {
    let mut g = Graph::new();
    let x = vec_leaf(&mut g, "x", &[3.0, 4.0]);
    let sq = g.square(x);
    let s = g.sum(sq);
    assert_eq!(g.forward(s).unwrap().item(), 25.0);
}

#[test]
fn log_of_exp_is_identity() {
    let mut g = Graph::new();
    let x = vec_leaf(&mut g, "x", &[0.7]);
    let e = g.exp(x);
    let l = g.log(e);
    assert!((g.forward(l).unwrap().item() - 0.7).abs() < 1e-15);
    assert_eq!(g.clamp_events(), 0);
}

#[test]
fn log_clamp_is_counted() {
    let mut g = Graph::new();
    let x = vec_leaf(&mut g, "x", &[0.0, -1.0, 2.0]);
    let l = g.log(x);
    let v = g.forward(l).unwrap().clone();
    assert!(v.is_finite());
    assert_eq!(v.data()[0], LOG_FLOOR.ln());
    assert_eq!(g.clamp_events(), 2);
}

#[test]
fn two_step_rnn_with_zero_weights_follows_bias_path() {
    // h_t = tanh(W x_t + U h_{t-1} + b), output sum(h_2).
    let mut g = Graph::new();
    let w = g.leaf("W", Array::zeros(&[2, 3]));
    let u = g.leaf("U", Array::zeros(&[2, 2]));
    let b = vec_leaf(&mut g, "b", &[0.5, -1.0]);
    let mut h = vec_leaf(&mut g, "h0", &[0.3, 0.9]);
    for t in 0..2 {
        let x = vec_leaf(&mut g, &format!("x{t}"), &[1.0 + t as f64, -2.0, 0.25]);
        let wx = g.matmul(w, x).unwrap();
        let uh = g.matmul(u, h).unwrap();
        let a = g.add(wx, uh).unwrap();
        let a = g.add(a, b).unwrap();
        h = g.tanh(a);
    }
    let out = g.sum(h);
    // tanh(0.5) + tanh(-1), evaluated by hand
    let expected = 0.46211715726000974 + -0.7615941559557649;
    assert!((g.forward(out).unwrap().item() - expected).abs() < 1e-15);
}

#[test]
fn unbound_leaf_is_named() {
    let mut g = Graph::new();
    let x = g.placeholder("input_x", &[2]);
    let s = g.sum(x);
    match g.forward(s) {
        Err(GraphError::UnboundLeaf(name)) => assert_eq!(name, "input_x"),
        other => panic!("unexpected {other:?}"),
    }
    g.bind(x, Array::vector(vec![1.0, 2.0])).unwrap();
    assert_eq!(g.forward(s).unwrap().item(), 3.0);
    assert!(g.bind(x, Array::vector(vec![1.0])).is_err());
}

#[test]
fn forward_is_idempotent() {
    let mut g = Graph::new();
    let x = vec_leaf(&mut g, "x", &[0.1, -0.4, 2.0]);
    let t = g.tanh(x);
    let e = g.exp(t);
    let s = g.sum(e);
    let first = g.forward(s).unwrap().item();
    let second = g.forward(s).unwrap().item();
    assert_eq!(first.to_bits(), second.to_bits());
}

#[test]
fn backward_quadratic() {
    let mut g = Graph::new();
    let x = vec_leaf(&mut g, "x", &[3.0, 4.0]);
    let sq = g.square(x);
    let s = g.sum(sq);
    g.forward(s).unwrap();
    g.backward(s).unwrap();
    assert_eq!(g.adjoint(x).unwrap().data(), &[6.0, 8.0]);
}

#[test]
fn fan_out_accumulates() {
    let mut g = Graph::new();
    let x = vec_leaf(&mut g, "x", &[1.5]);
    let y = g.add(x, x).unwrap();
    let s = g.sum(y);
    g.forward(s).unwrap();
    g.backward(s).unwrap();
    assert_eq!(g.adjoint(x).unwrap().data(), &[2.0]);
}

#[test]
fn splitting_a_use_into_two_branches_doubles_the_adjoint() {
    let build = |branches: usize| {
        let mut g = Graph::new();
        let x = vec_leaf(&mut g, "x", &[0.3, -0.7, 1.1]);
        let mut acc = None;
        for _ in 0..branches {
            let t = g.tanh(x);
            let sq = g.square(t);
            let s = g.sum(sq);
            acc = Some(match acc {
                None => s,
                Some(a) => g.add(a, s).unwrap(),
            });
        }
        let root = acc.unwrap();
        g.forward(root).unwrap();
        g.backward(root).unwrap();
        g.adjoint(x).unwrap().clone()
    };
    let one = build(1);
    let two = build(2);
    for (a, b) in one.data().iter().zip(two.data()) {
        assert_eq!(2.0 * a, *b);
    }
}

#[test]
fn backward_rejects_non_scalar_root() {
    let mut g = Graph::new();
    let x = vec_leaf(&mut g, "x", &[1.0, 2.0]);
    let t = g.tanh(x);
    g.forward(t).unwrap();
    assert!(matches!(g.backward(t), Err(GraphError::NonScalarRoot(_))));
}

#[test]
fn adjoints_reset_between_calls() {
    let mut g = Graph::new();
    let x = vec_leaf(&mut g, "x", &[2.0]);
    let sq = g.square(x);
    let s = g.sum(sq);
    g.forward(s).unwrap();
    g.backward(s).unwrap();
    g.backward(s).unwrap();
    assert_eq!(g.adjoint(x).unwrap().data(), &[4.0]);
}

#[test]
fn gradcheck_quadratic_bowl() {
    let mut g = Graph::new();
    let x = vec_leaf(&mut g, "x", &[0.5, -1.25, 2.0, 3.5]);
    let c = g.constant(Array::vector(vec![1.0, 2.0, -1.0, 0.0]));
    let d = g.sub(x, c).unwrap();
    let sq = g.square(d);
    let s = g.sum(sq);
    let report = check_gradients(&mut g, s, &[x], 1e-4, 1e-8).unwrap();
    assert!(report.passed, "{report:?}");
    assert!(report.max_rel_error() < 1e-8);
}

#[test]
fn gradcheck_tanh_chain_depth_ten() {
    let mut g = Graph::new();
    let x = vec_leaf(&mut g, "x", &[0.4, -0.9, 1.3]);
    let w = g.leaf("w", Array::matrix(3, 3, vec![0.9, -0.3, 0.2, 0.1, 1.1, -0.4, 0.5, 0.2, 0.8]));
    let mut h = x;
    for _ in 0..10 {
        let m = g.matmul(w, h).unwrap();
        h = g.tanh(m);
    }
    let s = g.sum(h);
    let report = check_gradients(&mut g, s, &[x, w], 1e-4, 1e-4).unwrap();
    assert!(report.passed, "{report:?}");
}

#[test]
fn gradcheck_flags_corrupted_rule() {
    let mut g = Graph::new();
    let x = vec_leaf(&mut g, "victim", &[0.4, -0.9]);
    let y = vec_leaf(&mut g, "bystander", &[1.0, 2.0]);
    let t = g.tanh(x);
    let m = g.mul(t, y).unwrap();
    let s = g.sum(m);
    g.fault = Some(Primitive::Tanh);
    let report = check_gradients(&mut g, s, &[x, y], 1e-4, 1e-4).unwrap();
    assert!(!report.passed);
    assert_eq!(report.failing(), vec!["victim"]);
}

/// Random graph over every primitive; returns the scalar root and its leaves.
fn random_graph(rng: &mut ChaCha8Rng) -> (Graph, NodeId, Vec<NodeId>) {
    let mut g = Graph::new();
    let leaf = |g: &mut Graph, name: &str, shape: &[usize], rng: &mut ChaCha8Rng| {
        let n: usize = shape.iter().product();
        let data = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        g.leaf(name, Array::new(shape.to_vec(), data))
    };
    let a = leaf(&mut g, "a", &[3, 2], rng);
    let b = leaf(&mut g, "b", &[3, 2], rng);
    let w = leaf(&mut g, "w", &[3, 3], rng);
    let v = leaf(&mut g, "v", &[3], rng);
    let leaves = vec![a, b, w, v];
    let mut pool = vec![a, b];
    let depth = rng.random_range(3..9);
    for _ in 0..depth {
        let x = pool[rng.random_range(0..pool.len())];
        let y = pool[rng.random_range(0..pool.len())];
        let n = match rng.random_range(0..13) {
            0 => g.add(x, y).unwrap(),
            1 => g.sub(x, y).unwrap(),
            2 => g.mul(x, y).unwrap(),
            3 => g.matmul(w, x).unwrap(),
            4 => g.tanh(x),
            5 => g.sigmoid(x),
            6 => {
                let t = g.tanh(x);
                g.exp(t)
            }
            7 => {
                // log of a strictly positive argument
                let sq = g.square(x);
                let p = g.offset(sq, 0.5).unwrap();
                g.log(p)
            }
            8 => g.square(x),
            9 => {
                let m = g.mean(x).unwrap();
                let mb = g.broadcast(m, &[3, 2]).unwrap();
                g.mul(x, mb).unwrap()
            }
            10 => {
                let c = g.concat(x, y).unwrap();
                let off = rng.random_range(0..4);
                g.slice(c, off, 3).unwrap()
            }
            11 => {
                let vb = g.broadcast(v, &[3, 2]).unwrap();
                g.add(x, vb).unwrap()
            }
            _ => {
                let s = g.sum(x);
                let sb = g.broadcast(s, &[3, 2]).unwrap();
                g.mul(y, sb).unwrap()
            }
        };
        pool.push(n);
    }
    let last = *pool.last().unwrap();
    let mix = g.mul(last, a).unwrap();
    let root = g.sum(mix);
    (g, root, leaves)
}

#[test]
fn backward_matches_finite_differences_on_random_graphs() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for i in 0..120 {
        let (mut g, root, leaves) = random_graph(&mut rng);
        let report = check_gradients(&mut g, root, &leaves, 1e-4, 1e-4).unwrap();
        assert!(report.passed, "graph {i}: {report:?}");
    }
}

#[test]
fn forward_and_backward_are_deterministic() {
    let run = || {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (mut g, root, leaves) = random_graph(&mut rng);
        let v = g.forward(root).unwrap().item();
        g.backward(root).unwrap();
        let adj: Vec<u64> = leaves
            .iter()
            .flat_map(|&l| g.adjoint(l).map(|a| a.data().to_vec()).unwrap_or_default())
            .map(f64::to_bits)
            .collect();
        (v.to_bits(), adj)
    };
    assert_eq!(run(), run());
}

#[test]
fn adjoint_shapes_match_values() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let (mut g, root, _) = random_graph(&mut rng);
        g.forward(root).unwrap();
        g.backward(root).unwrap();
        for id in g.ids() {
            if let (Some(v), Some(a)) = (g.value(id), g.adjoint(id)) {
                assert_eq!(v.shape(), a.shape());
                assert_eq!(v.shape(), g.shape(id));
            }
        }
    }
}

#[test]
fn cached_values_are_refreshed_after_bind() {
    let mut g = Graph::new();
    let x = g.placeholder("x", &[2]);
    g.bind(x, Array::vector(vec![0.0, 2.0])).unwrap();
    let l = g.log(x);
    let s = g.sum(l);
    let first = g.forward(s).unwrap().item();
    assert_eq!(g.clamp_events(), 1);
    // a second root sharing the cached subgraph still reports its clamps
    let t = g.tanh(s);
    g.forward(t).unwrap();
    assert_eq!(g.clamp_events(), 1);
    g.bind(x, Array::vector(vec![1.0, 2.0])).unwrap();
    let second = g.forward(s).unwrap().item();
    assert_eq!(second, 2.0_f64.ln());
    assert!(first < second);
    assert_eq!(g.clamp_events(), 0);
}
