use super::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn t(shape: &[usize], data: &[f64]) -> Tensor<f64> {
    Tensor::from_f64(shape, data).unwrap()
}

fn random(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f64> {
    let n: usize = shape.iter().product();
    t(shape, &(0..n).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<_>>())
}

#[test]
fn forward_examples() {
    let tape = Tape::<f64>::new();
    let a = tape.constant(t(&[2, 2], &[1.0, 2.0, 3.0, 4.0]));
    let x = tape.constant(t(&[2], &[1.0, 1.0]));
    assert_eq!(a.matmul(x).unwrap().value().data(), &[3.0, 7.0]);

    let z = tape.constant(t(&[3], &[-1.0, 0.0, 2.0]));
    assert_eq!(z.relu().value().data(), &[0.0, 0.0, 2.0]);

    let p = tape.constant(t(&[4], &[2.0, 4.0, 6.0, 8.0]));
    assert_eq!(p.avg_pool1d(2).unwrap().value().data(), &[3.0, 7.0]);
    assert_eq!(p.max_pool1d(2).unwrap().value().data(), &[4.0, 8.0]);
    assert_eq!(p.min_pool1d(2).unwrap().value().data(), &[2.0, 6.0]);
}

#[test]
fn shape_mismatch_names_the_node() {
    let tape = Tape::<f64>::new();
    let a = tape.constant(Tensor::zeros(&[2, 3]));
    let b = tape.constant(Tensor::zeros(&[2, 3]));
    match a.matmul(b) {
        Err(Error::ShapeMismatch { op, .. }) => assert_eq!(op, "matmul"),
        other => panic!("expected shape mismatch, got {other:?}"),
    }
    let c = tape.constant(Tensor::zeros(&[4]));
    assert!(matches!(a.add(c), Err(Error::ShapeMismatch { op: "add", .. })));
}

#[test]
fn linear_gradient() {
    let tape = Tape::<f64>::new();
    let w = tape.constant(t(&[2], &[2.0, -1.0]));
    let x = tape.var(t(&[2], &[3.0, 5.0]));
    let f = w.mul(x).unwrap().sum();
    let g = tape.grad(f, &[x]).unwrap();
    assert_eq!(g[0].data(), &[2.0, -1.0]);
}

#[test]
fn relu_subgradient() {
    for (x0, expected) in [(-1.0, 0.0), (2.0, 1.0), (0.0, 0.0)] {
        let tape = Tape::<f64>::new();
        let x = tape.var(Tensor::scalar(x0));
        let f = x.relu();
        assert_eq!(tape.grad(f, &[x]).unwrap()[0].item(), expected, "at {x0}");
    }
}

#[test]
fn square_relu_matmul_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let tape = Tape::<f64>::new();
    let w = tape.constant(random(&mut rng, &[4, 4]));
    let x = tape.var(random(&mut rng, &[4]));
    let f = w.matmul(x).unwrap().relu().square().sum();
    let dev = gradient_check(&tape, f, x, 1e-5).unwrap();
    assert!(dev < 1e-6, "deviation {dev}");
}

#[test]
fn constant_function_checks_to_zero() {
    let tape = Tape::<f64>::new();
    let x = tape.var(t(&[3], &[1.0, 2.0, 3.0]));
    let c = tape.constant(t(&[3], &[4.0, 5.0, 6.0]));
    let f = x.scale(0.0).add(c).unwrap().sum();
    let dev = gradient_check(&tape, f, x, 1e-5).unwrap();
    assert_eq!(dev, 0.0);
}

#[test]
fn three_layer_mlp_first_order_check() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let tape = Tape::<f64>::new();
    let x = tape.var(random(&mut rng, &[5, 6]));
    let w1 = tape.constant(random(&mut rng, &[8, 6]));
    let w2 = tape.constant(random(&mut rng, &[8, 8]));
    let w3 = tape.constant(random(&mut rng, &[3, 8]));
    let b1 = tape.constant(random(&mut rng, &[8]));
    let h = x.matmul_t(w1, false, true).unwrap().add(b1).unwrap().relu();
    let h = h.matmul_t(w2, false, true).unwrap().relu();
    let y = h.matmul_t(w3, false, true).unwrap().sum();
    let dev = gradient_check(&tape, y, x, 1e-5).unwrap();
    assert!(dev < 1e-5, "deviation {dev}");
}

#[test]
fn non_scalar_output_is_rejected() {
    let tape = Tape::<f64>::new();
    let x = tape.var(t(&[2], &[1.0, 2.0]));
    let y = x.square();
    assert!(matches!(
        tape.gradient(y, &[x], Order::First),
        Err(Error::NonScalarOutput(_))
    ));
}

#[test]
fn third_order_requests_are_unsupported() {
    let tape = Tape::<f64>::new();
    let x = tape.var(Tensor::scalar(1.0));
    let req = GradientRequest {
        output: x.square(),
        wrt: vec![x],
        order: 3,
    };
    assert!(matches!(tape.request(&req), Err(Error::UnsupportedOrder(3))));
    let ok = GradientRequest { order: 1, ..req };
    let map = tape.request(&ok).unwrap();
    assert_eq!(map[&x.id()].item(), 2.0);
}

#[test]
fn unreachable_leaf_gets_exact_zero() {
    let tape = Tape::<f64>::new();
    let x = tape.var(t(&[2], &[1.0, 2.0]));
    let unused = tape.var(t(&[3], &[7.0, 8.0, 9.0]));
    let f = x.square().sum();
    let g = tape.grad(f, &[x, unused]).unwrap();
    assert_eq!(g[1].data(), &[0.0, 0.0, 0.0]);
}

#[test]
fn double_backprop_through_gradient() {
    // z = (dy/dx)^3 + y with y = x^2; dz/dx = 24 x^2 + 2x = 100 at x = 2
    let tape = Tape::<f64>::new();
    let x = tape.var(Tensor::scalar(2.0));
    let y = x.square();
    let gx = tape.gradient(y, &[x], Order::Second).unwrap()[0];
    assert!(gx.requires_grad());
    let z = gx.square().mul(gx).unwrap().add(y).unwrap();
    let dz = tape.grad(z, &[x]).unwrap();
    assert!((dz[0].item() - 100.0).abs() < 1e-10);
}

#[test]
fn first_order_gradient_is_a_constant() {
    let tape = Tape::<f64>::new();
    let x = tape.var(Tensor::scalar(2.0));
    let gx = tape.gradient(x.square(), &[x], Order::First).unwrap()[0];
    assert!(!gx.requires_grad());
}

#[test]
fn second_order_through_relu_network_matches_finite_differences() {
    // d/dW sum_i x_i * dF/dx_i for F = v . relu(W x)
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let tape = Tape::<f64>::new();
    let w = tape.var(random(&mut rng, &[5, 4]));
    let v = tape.var(random(&mut rng, &[5]));
    let x = tape.var(random(&mut rng, &[4]));
    let f = w.matmul(x).unwrap().relu().mul(v).unwrap().sum();
    let g = tape.gradient(f, &[x], Order::Second).unwrap()[0];
    let attr = x.mul(g).unwrap().square().sum();
    let dev_w = gradient_check(&tape, attr, w, 1e-5).unwrap();
    let dev_v = gradient_check(&tape, attr, v, 1e-5).unwrap();
    assert!(dev_w < 1e-6 && dev_v < 1e-6, "{dev_w} {dev_v}");
}

#[test]
fn max_pool_routes_ties_to_first_element() {
    let tape = Tape::<f64>::new();
    let x = tape.var(t(&[4], &[3.0, 3.0, 1.0, 5.0]));
    let y = x.max_pool1d(2).unwrap().sum();
    let g = tape.grad(y, &[x]).unwrap();
    assert_eq!(g[0].data(), &[1.0, 0.0, 0.0, 1.0]);
}

#[test]
fn pooled_gradients_on_batches() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let tape = Tape::<f64>::new();
    let x = tape.var(random(&mut rng, &[3, 6]));
    let y = x.max_pool1d(3).unwrap().square().sum();
    assert!(gradient_check(&tape, y, x, 1e-6).unwrap() < 1e-6);
    let y = x.min_pool1d(2).unwrap().square().sum();
    assert!(gradient_check(&tape, y, x, 1e-6).unwrap() < 1e-6);
    let y = x.avg_pool1d(2).unwrap().square().sum();
    assert!(gradient_check(&tape, y, x, 1e-6).unwrap() < 1e-6);
}

#[test]
fn second_order_through_max_pool() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let tape = Tape::<f64>::new();
    let w = tape.var(random(&mut rng, &[6, 3]));
    let x = tape.var(random(&mut rng, &[3]));
    let f = w.matmul(x).unwrap().max_pool1d(2).unwrap().square().sum();
    let g = tape.gradient(f, &[x], Order::Second).unwrap()[0];
    let r = g.mul(x).unwrap().sum();
    assert!(gradient_check(&tape, r, w, 1e-6).unwrap() < 1e-6);
}

#[test]
fn forward_replay_is_bitwise_stable() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let tape = Tape::<f64>::new();
    let x = tape.var(random(&mut rng, &[2, 4]));
    let w = tape.constant(random(&mut rng, &[4, 4]));
    let y = x.matmul(w).unwrap().relu().max_pool1d(2).unwrap().exp().sum();
    let first = tape.recompute(y).unwrap();
    let second = tape.recompute(y).unwrap();
    assert_eq!(first.data()[0].to_bits(), second.data()[0].to_bits());
    assert_eq!(first.data()[0].to_bits(), y.item().to_bits());
}

#[test]
fn gather_and_scatter_are_adjoint() {
    let tape = Tape::<f64>::new();
    let x = tape.var(t(&[4], &[1.0, 2.0, 3.0, 4.0]));
    let idx: Arc<[usize]> = vec![3, 0, 3].into();
    let y = x.gather(idx.clone(), &[3]).unwrap();
    assert_eq!(y.value().data(), &[4.0, 1.0, 4.0]);
    let g = tape.grad(y.sum(), &[x]).unwrap();
    assert_eq!(g[0].data(), &[1.0, 0.0, 0.0, 2.0]);
    let s = y.scatter(idx, &[4]).unwrap();
    assert_eq!(s.value().data(), &[1.0, 0.0, 0.0, 8.0]);
}

#[test]
fn works_in_single_precision() {
    let tape = Tape::<f32>::new();
    let w = tape.constant(Tensor::from_f64(&[2], &[2.0, -1.0]).unwrap());
    let x = tape.var(Tensor::from_f64(&[2], &[3.0, 5.0]).unwrap());
    let f = w.mul(x).unwrap().sum();
    assert_eq!(f.item(), 1.0f32);
    assert_eq!(tape.grad(f, &[x]).unwrap()[0].data(), &[2.0f32, -1.0]);
}

#[test]
fn foreign_vars_are_rejected() {
    let a = Tape::<f64>::new();
    let b = Tape::<f64>::new();
    let x = a.var(Tensor::scalar(1.0));
    let y = b.var(Tensor::scalar(1.0));
    assert!(matches!(x.add(y), Err(Error::ForeignVar)));
}

fn away_from_zero() -> impl Strategy<Value = f64> {
    prop_oneof![-2.0..-0.05f64, 0.05..2.0f64]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn elementwise_primitives_match_finite_differences(
        vals in prop::collection::vec(away_from_zero(), 6),
        other in prop::collection::vec(away_from_zero(), 6),
    ) {
        type Build = for<'t> fn(Var<'t, f64>, Var<'t, f64>) -> Var<'t, f64>;
        let cases: [(&str, Build); 11] = [
            ("add", |x, y| x.add(y).unwrap()),
            ("sub", |x, y| x.sub(y).unwrap()),
            ("mul", |x, y| x.mul(y).unwrap()),
            ("scale", |x, _| x.scale(-1.7)),
            ("relu", |x, _| x.relu()),
            ("leaky", |x, _| x.leaky_relu(0.3)),
            ("abs", |x, _| x.abs()),
            ("log", |x, _| x.abs().ln()),
            ("exp", |x, _| x.exp()),
            ("recip", |x, _| x.recip()),
            ("square", |x, _| x.square()),
        ];
        for (name, build) in cases {
            let tape = Tape::<f64>::new();
            let x = tape.var(t(&[2, 3], &vals));
            let y = tape.var(t(&[2, 3], &other));
            let out = build(x, y);
            // weight outputs so the check is not symmetric in the elements
            let weights = tape.constant(t(&[2, 3], &[1.0, -2.0, 0.5, 3.0, -1.0, 2.0]));
            let f = out.mul(weights).unwrap().sum();
            for leaf in [x, y] {
                let g = tape.grad(f, &[leaf]).unwrap().remove(0);
                let fd = finite_difference_gradient(&tape, f, leaf, 1e-6).unwrap();
                for (a, b) in g.data().iter().zip(fd.data()) {
                    let tol = 1e-5 * (1.0 + a.abs().max(b.abs()));
                    prop_assert!((a - b).abs() < tol, "{name}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn broadcast_and_matmul_match_finite_differences(
        a in prop::collection::vec(-1.0..1.0f64, 12),
        b in prop::collection::vec(-1.0..1.0f64, 12),
        r in prop::collection::vec(-1.0..1.0f64, 4),
    ) {
        let tape = Tape::<f64>::new();
        let ma = tape.var(t(&[3, 4], &a));
        let mb = tape.var(t(&[4, 3], &b));
        let row = tape.var(t(&[4], &r));
        let f = ma.matmul(mb).unwrap().square().sum();
        for leaf in [ma, mb] {
            prop_assert!(gradient_check(&tape, f, leaf, 1e-6).unwrap() < 1e-6);
        }
        let shifted = ma.add(row).unwrap().mul(row).unwrap().square().sum();
        prop_assert!(gradient_check(&tape, shifted, row, 1e-6).unwrap() < 1e-6);
        let bc = row.broadcast_to(&[5, 4]).unwrap().square().sum();
        prop_assert!(gradient_check(&tape, bc, row, 1e-6).unwrap() < 1e-6);
        let tt = ma.matmul_t(ma, true, false).unwrap().square().sum();
        prop_assert!(gradient_check(&tape, tt, ma, 1e-6).unwrap() < 1e-5);
        let nt = mb.matmul_t(mb, false, true).unwrap().square().sum();
        prop_assert!(gradient_check(&tape, nt, mb, 1e-6).unwrap() < 1e-5);
        let tn = ma.matmul_t(mb, true, true).unwrap().square().sum();
        prop_assert!(gradient_check(&tape, tn, ma, 1e-6).unwrap() < 1e-5);
        prop_assert!(gradient_check(&tape, tn, mb, 1e-6).unwrap() < 1e-5);
    }
}
