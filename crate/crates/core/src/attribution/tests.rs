use std::collections::BTreeMap;

use approx::assert_relative_eq;
use proptest::prelude::*;
use rand::Rng;

use super::*;
use crate::autodiff::{finite_difference_gradient, Order, Tape};
use crate::network::{FnModel, Homogeneity, LinearCombination, Model, Network, NetworkSpec};
use crate::rng;

fn v(data: &[f64]) -> Tensor<f64> {
    Tensor::vector(data.to_vec())
}

fn linear(w: &[f64], bias: Option<f64>) -> Network<f64> {
    let spec = NetworkSpec::mlp(w.len(), &[], 1, bias.is_some());
    let mut params = BTreeMap::new();
    params.insert("layers.0.weight".into(), Tensor::from_f64(&[1, w.len()], w).unwrap());
    if let Some(b) = bias {
        params.insert("layers.0.bias".into(), v(&[b]));
    }
    Network::from_parts(spec, params).unwrap()
}

/// f(x) = 1 - relu(1 - x)
fn saturating() -> FnModel<'static, f64> {
    FnModel::new(1, 1, Homogeneity::NonHomogeneous(vec!["offset".into()]), |_, x| {
        Ok(x.neg().add_scalar(1.0).relu().neg().add_scalar(1.0))
    })
}

fn random_input(n: usize, seed: u64) -> Tensor<f64> {
    let mut r = rng::stream(seed, &[rng::tag("test-input")]);
    Tensor::vector((0..n).map(|_| r.gen_range(-2.0..2.0)).collect())
}

/// Plain-loop forward and input gradient of a ReLU MLP, kept
/// independent of the tape.
fn mlp_oracle_grad(net: &Network<f64>, x: &[f64], target: usize) -> Vec<f64> {
    let layers = net.spec().layers.len();
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for i in 0..layers {
        if let Some(w) = net.param(&format!("layers.{i}.weight")) {
            weights.push(w.clone());
            biases.push(net.param(&format!("layers.{i}.bias")).cloned());
        }
    }
    let mut acts = vec![x.to_vec()];
    let mut pre = Vec::new();
    for (li, w) in weights.iter().enumerate() {
        let (o, n) = (w.shape()[0], w.shape()[1]);
        let a = acts.last().unwrap();
        let b = |r: usize| biases[li].as_ref().map_or(0.0, |b| b.data()[r]);
        let z: Vec<f64> = (0..o)
            .map(|r| (0..n).map(|c| w.data()[r * n + c] * a[c]).sum::<f64>() + b(r))
            .collect();
        let last = li + 1 == weights.len();
        acts.push(if last { z.clone() } else { z.iter().map(|v| v.max(0.0)).collect() });
        pre.push(z);
    }
    let mut g = vec![0.0; weights.last().unwrap().shape()[0]];
    g[target] = 1.0;
    for li in (0..weights.len()).rev() {
        let w = &weights[li];
        let (o, n) = (w.shape()[0], w.shape()[1]);
        if li + 1 != weights.len() {
            for r in 0..o {
                if pre[li][r] <= 0.0 {
                    g[r] = 0.0;
                }
            }
        }
        g = (0..n).map(|c| (0..o).map(|r| w.data()[r * n + c] * g[r]).sum()).collect();
    }
    g
}

fn oracle_ig(net: &Network<f64>, x: &[f64], target: usize, steps: usize) -> Vec<f64> {
    let mut acc = vec![0.0; x.len()];
    for s in 0..steps {
        let t = (s as f64 + 0.5) / steps as f64;
        let p: Vec<f64> = x.iter().map(|v| v * t).collect();
        for (a, g) in acc.iter_mut().zip(mlp_oracle_grad(net, &p, target)) {
            *a += g;
        }
    }
    acc.iter().zip(x).map(|(a, xi)| a / steps as f64 * xi).collect()
}

#[test]
fn gradient_examples() {
    let lin = linear(&[2.0, -1.0], None);
    for x in [[3.0, 5.0], [-1.0, 0.0]] {
        assert_eq!(grad_attr(&lin, &v(&x), 0).unwrap().values.data(), &[2.0, -1.0]);
    }
    assert_eq!(grad_attr(&saturating(), &v(&[2.0]), 0).unwrap().values.data(), &[0.0]);

    let zero = FnModel::new(3, 1, Homogeneity::Homogeneous, |tape, x| x.matmul(tape.constant(Tensor::zeros(&[3, 1]))));
    assert_eq!(grad_attr(&zero, &v(&[1.0, 2.0, 3.0]), 0).unwrap().values.data(), &[0.0; 3]);

    assert!(matches!(
        grad_attr(&lin, &v(&[1.0, 1.0]), 1),
        Err(Error::InvalidTarget { target: 1, outputs: 1 })
    ));
    assert!(grad_attr(&lin, &v(&[1.0]), 0).is_err());
}

#[test]
fn input_x_gradient_examples() {
    let lin = linear(&[2.0, -1.0], None);
    assert_eq!(input_x_grad(&lin, &v(&[3.0, 5.0]), 0).unwrap().values.data(), &[6.0, -5.0]);
    assert_eq!(input_x_grad(&saturating(), &v(&[2.0]), 0).unwrap().values.data(), &[0.0]);
    assert_eq!(input_x_grad(&lin, &v(&[0.0, 0.0]), 0).unwrap().values.data(), &[0.0, 0.0]);
}

#[test]
fn x_gradient_examples() {
    let lin = linear(&[2.0, -1.0], None);
    let a = x_gradient(&lin, &v(&[3.0, 5.0]), 0).unwrap();
    assert_eq!(a.values.data(), &[6.0, -5.0]);
    assert_eq!(a.total(), 1.0);
    assert_eq!(a.method, Method::XGradient);
    assert_eq!(a.baseline, Baseline::Zero);

    match x_gradient(&linear(&[2.0], Some(1.0)), &v(&[1.0]), 0) {
        Err(Error::NotHomogeneous(r)) => assert_eq!(r, vec!["bias at layer 0"]),
        other => panic!("{other:?}"),
    }
    assert!(x_gradient(&saturating(), &v(&[1.0]), 0).is_err());
}

#[test]
fn x_gradient_is_complete_and_matches_the_fine_oracle() {
    for seed in 0..5 {
        let net = Network::<f64>::init(NetworkSpec::mlp(6, &[16, 16], 3, false), seed).unwrap();
        let x = random_input(6, seed);
        for target in 0..3 {
            let xg = x_gradient(&net, &x, target).unwrap();
            let fx = net.predict(&x).unwrap().data()[target];
            assert_relative_eq!(xg.total(), fx, max_relative = 1e-12, epsilon = 1e-14);

            let oracle = oracle_ig(&net, x.data(), target, 10_000);
            for (a, o) in xg.values.data().iter().zip(&oracle) {
                assert!((a - o).abs() <= 1e-3 * o.abs() + 1e-9, "{a} vs {o}");
            }
        }
    }
}

#[test]
fn oracle_gradient_agrees_with_the_tape() {
    let net = Network::<f64>::init(NetworkSpec::mlp(5, &[8, 8], 2, false), 9).unwrap();
    let x = random_input(5, 1);
    let tape_grad = grad_attr(&net, &x, 1).unwrap();
    let oracle = mlp_oracle_grad(&net, x.data(), 1);
    for (a, b) in tape_grad.values.data().iter().zip(&oracle) {
        assert_relative_eq!(*a, *b, max_relative = 1e-12, epsilon = 1e-14);
    }
}

fn square_model() -> FnModel<'static, f64> {
    FnModel::new(1, 1, Homogeneity::NonHomogeneous(vec!["degree 2".into()]), |_, x| Ok(x.square()))
}

fn product_model() -> FnModel<'static, f64> {
    FnModel::new(2, 1, Homogeneity::NonHomogeneous(vec!["degree 2".into()]), |_, x| {
        let m = x.shape()[0];
        let first = x.gather((0..m).map(|r| r * 2).collect(), &[m, 1])?;
        let second = x.gather((0..m).map(|r| r * 2 + 1).collect(), &[m, 1])?;
        first.mul(second)
    })
}

#[test]
fn closed_form_degree_k_examples() {
    let a = closed_form_ig_degree_k(&square_model(), &v(&[3.0]), 0, 2.0).unwrap();
    assert_eq!(a.values.data(), &[9.0]);

    let a = closed_form_ig_degree_k(&product_model(), &v(&[2.0, 3.0]), 0, 2.0).unwrap();
    assert_eq!(a.values.data(), &[3.0, 3.0]);
    assert_eq!(a.total(), 6.0);
    // fine Riemann rule splits the product equally as well
    let ig = integrated_gradients(&product_model(), &v(&[2.0, 3.0]), &Baseline::Zero, 0, 10_000).unwrap();
    for (a, b) in ig.values.data().iter().zip([3.0, 3.0]) {
        assert_relative_eq!(*a, b, max_relative = 1e-6);
    }

    let net = Network::<f64>::init(NetworkSpec::mlp(4, &[8], 2, false), 3).unwrap();
    let x = random_input(4, 3);
    let k1 = closed_form_ig_degree_k(&net, &x, 1, 1.0).unwrap();
    assert_eq!(k1.values, x_gradient(&net, &x, 1).unwrap().values);
}

#[test]
fn closed_form_refuses_wrong_degree() {
    assert!(matches!(
        closed_form_ig_degree_k(&square_model(), &v(&[3.0]), 0, 1.0),
        Err(Error::HomogeneityProbeFailed { .. })
    ));
    let biased = linear(&[2.0], Some(1.0));
    assert!(closed_form_ig_degree_k(&biased, &v(&[3.0]), 0, 1.0).is_err());
    assert!(closed_form_ig_degree_k(&square_model(), &v(&[3.0]), 0, 0.5).is_err());
}

#[test]
fn integrated_gradients_resolves_saturation() {
    let ig = integrated_gradients(&saturating(), &v(&[2.0]), &Baseline::Zero, 0, 128).unwrap();
    assert!((ig.values.data()[0] - 1.0).abs() <= 0.02);
    assert_eq!(ig.steps, 128);
}

#[test]
fn integrated_gradients_is_exact_on_linear_models() {
    let lin = linear(&[2.0, -1.0], Some(0.5));
    let base = Baseline::Tensor(v(&[1.0, 1.0]));
    for steps in [1, 2, 7, 128] {
        let ig = integrated_gradients(&lin, &v(&[3.0, 5.0]), &base, 0, steps).unwrap();
        assert_relative_eq!(ig.values.data()[0], 4.0, max_relative = 1e-15);
        assert_relative_eq!(ig.values.data()[1], -4.0, max_relative = 1e-15);
    }
    assert!(integrated_gradients(&lin, &v(&[3.0, 5.0]), &Baseline::Tensor(v(&[1.0])), 0, 4).is_err());
    assert!(integrated_gradients(&lin, &v(&[3.0, 5.0]), &Baseline::Zero, 0, 0).is_err());
}

fn with_random_biases(mut net: Network<f64>, seed: u64, scale: f64) -> Network<f64> {
    for (k, t) in net.clone().params() {
        if k.ends_with("bias") {
            let mut r = rng::stream(seed, &[rng::tag(k)]);
            let data = (0..t.len()).map(|_| r.gen_range(-scale..scale)).collect();
            *net.param_mut(k).unwrap() = Tensor::new(t.shape(), data).unwrap();
        }
    }
    net
}

#[test]
fn integrated_gradients_is_complete_on_biased_nets() {
    // Kinks crossed between midpoints make single inputs with a tiny
    // F(x) - F(0) noisy, so the gap is pooled over inputs.
    let (mut gap, mut total) = (0.0, 0.0);
    for seed in 0..30 {
        let net = Network::<f64>::init(NetworkSpec::mlp(20, &[32, 32], 2, true), seed).unwrap();
        let net = with_random_biases(net, seed, 0.1);
        let x = random_input(20, seed + 10);
        let ig = integrated_gradients(&net, &x, &Baseline::Zero, 0, 128).unwrap();
        let delta = net.predict(&x).unwrap().data()[0] - net.predict(&Tensor::zeros(&[20])).unwrap().data()[0];
        gap += (ig.total() - delta).abs();
        total += delta.abs();
    }
    assert!(gap / total < 5e-3, "{}", gap / total);
}

#[test]
fn riemann_error_shrinks_with_steps() {
    let mut curve = vec![0.0; 5];
    let steps = [1, 4, 16, 64, 256];
    for seed in 0..4 {
        let net = Network::<f64>::init(NetworkSpec::mlp(4, &[16, 16], 1, true), seed).unwrap();
        let net = with_random_biases(net, seed, 0.3);
        let x = random_input(4, seed);
        let oracle = oracle_ig(&net, x.data(), 0, 10_000);
        for (c, &s) in curve.iter_mut().zip(&steps) {
            let ig = integrated_gradients(&net, &x, &Baseline::Zero, 0, s).unwrap();
            *c += ig.values.data().iter().zip(&oracle).map(|(a, b)| (a - b).abs()).sum::<f64>();
        }
    }
    for w in curve.windows(2) {
        assert!(w[1] <= w[0], "{curve:?}");
    }
}

#[test]
fn chunked_integration_matches_one_block() {
    let net = Network::<f64>::init(NetworkSpec::mlp(3, &[6], 2, false), 2).unwrap();
    let x = random_input(3, 4);
    let many = integrated_gradients(&net, &x, &Baseline::Zero, 1, 5000).unwrap();
    let oracle = oracle_ig(&net, x.data(), 1, 5000);
    for (a, b) in many.values.data().iter().zip(&oracle) {
        assert_relative_eq!(*a, *b, max_relative = 1e-9, epsilon = 1e-12);
    }
}

#[test]
fn expected_gradients_examples() {
    let net = Network::<f64>::init(NetworkSpec::mlp(4, &[8], 2, false), 5).unwrap();
    let x = random_input(4, 2);
    let eg = expected_gradients_with_alphas(&net, &x, 0, &[Tensor::zeros(&[4])], &[1.0]).unwrap();
    assert_eq!(eg.values, input_x_grad(&net, &x, 0).unwrap().values);

    let refs = vec![x.clone(); 3];
    let eg = expected_gradients(&net, &x, 0, &refs, 1).unwrap();
    assert_eq!(eg.values.data(), &[0.0; 4]);

    assert!(matches!(expected_gradients(&net, &x, 0, &[], 1), Err(Error::EmptyReferences)));

    let refs: Vec<_> = (0..6).map(|s| random_input(4, 100 + s)).collect();
    let a = expected_gradients(&net, &x, 1, &refs, 9).unwrap();
    let b = expected_gradients(&net, &x, 1, &refs, 9).unwrap();
    let c = expected_gradients(&net, &x, 1, &refs, 10).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.values, c.values);
    assert_eq!(a.steps, 6);
}

#[test]
fn expected_gradient_draws_average_to_the_attribution() {
    let net = Network::<f64>::init(NetworkSpec::mlp(3, &[5], 1, false), 8).unwrap();
    let x = random_input(3, 8);
    let refs: Vec<_> = (0..4).map(|s| random_input(3, 50 + s)).collect();
    let alphas = [0.1, 0.5, 0.7, 0.95];
    let eg = expected_gradients_with_alphas(&net, &x, 0, &refs, &alphas).unwrap();
    let draws = methods::expected_gradient_draws(&net, &x, 0, &Tensor::stack(&refs).unwrap(), &alphas).unwrap();
    for i in 0..3 {
        let mean: f64 = (0..4).map(|j| draws.data()[j * 3 + i]).sum::<f64>() / 4.0;
        assert_relative_eq!(mean, eg.values.data()[i], max_relative = 1e-12);
    }
}

#[test]
fn rrr_examples() {
    let e = FnModel::new(2, 1, Homogeneity::NonHomogeneous(vec![]), |tape, x| {
        let m = x.shape()[0];
        let zero = x.matmul(tape.constant(Tensor::zeros(&[2, 1])))?;
        zero.add(tape.constant(Tensor::filled(&[m, 1], std::f64::consts::E)))
    });
    assert_eq!(rrr_attr(&e, &v(&[1.0, 4.0]), 0, false).unwrap().values.data(), &[0.0, 0.0]);

    let lin = linear(&[2.0], None);
    let a = rrr_attr(&lin, &v(&[3.0]), 0, false).unwrap();
    assert_relative_eq!(a.values.data()[0], 1.0 / 3.0, max_relative = 1e-15);

    let net = Network::<f64>::init(NetworkSpec::mlp(3, &[6], 1, false), 4).unwrap();
    let mut x = random_input(3, 4);
    if net.predict(&x).unwrap().data()[0] < 0.0 {
        x = x.scale(-1.0);
    }
    let scaled = LinearCombination::new(vec![(7.5, &net as &dyn Model<f64>)]).unwrap();
    let a = rrr_attr(&net, &x, 0, false).unwrap();
    let b = rrr_attr(&scaled, &x, 0, false).unwrap();
    for (p, q) in a.values.data().iter().zip(b.values.data()) {
        assert_relative_eq!(*p, *q, max_relative = 1e-12);
    }
}

#[test]
fn rrr_rejects_non_positive_logits_unless_stabilized() {
    let lin = linear(&[2.0], None);
    assert!(matches!(rrr_attr(&lin, &v(&[-3.0]), 0, false), Err(Error::NonPositiveLogit(_))));
    let a = rrr_attr(&lin, &v(&[0.0]), 0, true).unwrap();
    assert_relative_eq!(a.values.data()[0], 2.0 / RRR_EPS, max_relative = 1e-12);
    assert!(rrr_attr(&lin, &v(&[-3.0]), 0, true).is_err());
}

#[test]
fn rel_diff_examples() {
    let a = x_gradient(&linear(&[2.0, -1.0], None), &v(&[3.0, 5.0]), 0).unwrap();
    let d = mean_abs_rel_diff(&[a.clone()], &[a.clone()]).unwrap();
    assert_eq!(d, RelDiff { value: 0.0, counted: 2, skipped: 0 });

    let mut b = a.clone();
    b.values = v(&[3.0, -5.0]);
    let mut z = a.clone();
    z.values = v(&[6.0, 0.0]);
    let d = mean_abs_rel_diff(&[a.clone(), z], &[b.clone(), b]).unwrap();
    // |6-3|/6 and 0 from the first pair, |6-3|/6 from the second, one skip
    assert_relative_eq!(d.value, 1.0 / 3.0, max_relative = 1e-15);
    assert_eq!((d.counted, d.skipped), (3, 1));

    assert!(mean_abs_rel_diff(&[a.clone()], &[]).is_err());
    let mut short = a.clone();
    short.values = v(&[1.0]);
    assert!(mean_abs_rel_diff(&[a], &[short]).is_err());
}

#[test]
fn method_choice_parses_and_prints() {
    let ig: MethodChoice = "ig".parse().unwrap();
    assert_eq!(ig, MethodChoice::new(Method::IntegratedGradients, 128));
    assert_eq!("IG@16".parse::<MethodChoice>().unwrap().steps, 16);
    assert_eq!("eg".parse::<MethodChoice>().unwrap().to_string(), "eg@1");
    assert_eq!("xg".parse::<MethodChoice>().unwrap().to_string(), "xg");
    assert_eq!("eg32".parse::<MethodChoice>().unwrap(), MethodChoice::new(Method::ExpectedGradients, 32));
    assert_eq!("ig64".parse::<MethodChoice>().unwrap().to_string(), "ig@64");
    for bad in ["xg@3", "ig@0", "ig@x", "lrp", "eg0", "xg2"] {
        assert!(bad.parse::<MethodChoice>().is_err(), "{bad}");
    }
}

#[test]
fn batch_matches_single_input_calls() {
    let net = Network::<f64>::init(NetworkSpec::mlp(4, &[8, 8], 3, false), 6).unwrap();
    let rows: Vec<_> = (0..5).map(|s| random_input(4, 30 + s)).collect();
    let xs = Tensor::stack(&rows).unwrap();
    let targets = [0, 2, 1, 1, 0];
    let opts = BatchOptions::default();

    let cases: [(&str, &dyn Fn(&Tensor<f64>, usize) -> Tensor<f64>); 4] = [
        ("grad", &|x, t| grad_attr(&net, x, t).unwrap().values),
        ("ixg", &|x, t| input_x_grad(&net, x, t).unwrap().values),
        ("xg", &|x, t| x_gradient(&net, x, t).unwrap().values),
        ("ig@32", &|x, t| integrated_gradients(&net, x, &Baseline::Zero, t, 32).unwrap().values),
    ];
    for (name, single) in cases {
        let batch = attribute_batch(&net, &xs, &targets, name.parse().unwrap(), &opts).unwrap();
        for (r, x) in rows.iter().enumerate() {
            let want = single(x, targets[r]);
            for (a, b) in batch.row(r).data().iter().zip(want.data()) {
                assert_relative_eq!(*a, *b, max_relative = 1e-12, epsilon = 1e-15);
            }
        }
    }

    let eg = "eg@4".parse().unwrap();
    assert!(matches!(attribute_batch(&net, &xs, &targets, eg, &opts), Err(Error::EmptyReferences)));
    let with_bg = BatchOptions { background: Some(xs.clone()), seed: 3, ..opts.clone() };
    let a = attribute_batch(&net, &xs, &targets, eg, &with_bg).unwrap();
    assert_eq!(a, attribute_batch(&net, &xs, &targets, eg, &with_bg).unwrap());

    let r = attribute_batch(&net, &xs, &targets, "random".parse().unwrap(), &opts).unwrap();
    assert_eq!(r.shape(), &[5, 4]);

    let biased = Network::<f64>::init(NetworkSpec::mlp(4, &[8], 3, true), 6).unwrap();
    assert!(attribute_batch(&biased, &xs, &targets, "xg".parse().unwrap(), &opts).is_err());
}

#[test]
fn x_gradient_graph_is_differentiable_in_parameters() {
    let net = Network::<f64>::init(NetworkSpec::mlp(3, &[4], 2, false), 12).unwrap();
    let xs = Tensor::stack(&[random_input(3, 1), random_input(3, 2)]).unwrap();
    let tape = Tape::new();
    let params = net.bind(&tape, true);
    let a = attribution_graph(
        &tape,
        |v| net.forward_with(&params, v),
        &xs,
        &[0, 1],
        &GraphMethod::XGradient,
        Order::Second,
    )
    .unwrap();
    let omega = a.abs().sum();
    for p in params.vars() {
        let g = tape.gradient(omega, &[p], Order::First).unwrap()[0].value();
        let fd = finite_difference_gradient(&tape, omega, p, 1e-6).unwrap();
        assert!(g.max_abs_diff(&fd) < 1e-6);
        assert!(g.max_abs() > 0.0);
    }
}

#[test]
fn csv_and_json_output() {
    let a = x_gradient(&linear(&[2.0, -1.0], None), &v(&[3.0, 5.0]), 0).unwrap();
    let recs = vec![AttributionRecord::new(0, &a), AttributionRecord::new(1, &a)];
    let mut buf = Vec::new();
    write_csv(&mut buf, &recs).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text, "input_id,method,target,f0,f1\n0,xg,0,6,-5\n1,xg,0,6,-5\n");

    let json = serde_json::to_string(&recs[0]).unwrap();
    let back: AttributionRecord = serde_json::from_str(&json).unwrap();
    assert_eq!(back, recs[0]);
    assert!(json.contains("\"x-gradient\""));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn x_gradient_is_nonnegatively_homogeneous(seed in 0u64..500, alpha in 0.0f64..4.0) {
        let net = Network::<f64>::init(NetworkSpec::mlp(5, &[10, 10], 2, false), seed).unwrap();
        let x = random_input(5, seed);
        let a = x_gradient(&net, &x, 0).unwrap().values;
        let b = x_gradient(&net, &x.scale(alpha), 0).unwrap().values;
        for (p, q) in a.data().iter().zip(b.data()) {
            prop_assert!((alpha * p - q).abs() <= 1e-9 * (1.0 + q.abs()));
        }
    }

    #[test]
    fn dead_features_get_zero_attribution(seed in 0u64..500, dead in 0usize..5) {
        let mut net = Network::<f64>::init(NetworkSpec::mlp(5, &[8], 2, false), seed).unwrap();
        let w = net.param_mut("layers.0.weight").unwrap();
        for r in 0..8 {
            w.data_mut()[r * 5 + dead] = 0.0;
        }
        let x = random_input(5, seed + 1);
        let xs = x.reshape(&[1, 5]).unwrap();
        let bg = Tensor::stack(&[random_input(5, 9), random_input(5, 10)]).unwrap();
        let opts = BatchOptions { background: Some(bg), seed, ..Default::default() };
        for m in ["grad", "ixg", "xg", "ig@16", "eg@4"] {
            let a = attribute_batch(&net, &xs, &[1], m.parse().unwrap(), &opts).unwrap();
            prop_assert_eq!(a.data()[dead], 0.0);
        }
    }
}

