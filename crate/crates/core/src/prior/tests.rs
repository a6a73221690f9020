use approx::assert_relative_eq;
use proptest::prelude::*;

use super::*;
use crate::attribution::{attribute_batch, attribution_graph, BatchOptions, GraphMethod, MethodChoice};
use crate::autodiff::{finite_difference_gradient, Order, Tape};
use crate::data::{generate_synthetic, Dataset, GeneratorSpec};
use crate::network::{Network, NetworkSpec};
use crate::tensor::Tensor;

fn gini_of(rows: &[Vec<f64>]) -> f64 {
    let n = rows[0].len();
    let flat: Vec<f64> = rows.concat();
    let tape = Tape::<f64>::new();
    let a = tape.var(Tensor::from_f64(&[rows.len(), n], &flat).unwrap());
    gini_prior(a).unwrap().item()
}

#[test]
fn gini_prior_examples() {
    assert_eq!(gini_of(&[vec![0.5; 4], vec![0.5; 4]]), 0.0);

    for (m, n) in [(1, 2), (3, 5), (8, 118)] {
        let mut row = vec![0.0; n];
        row[0] = 1.0;
        let got = gini_of(&vec![row; m]);
        let want = -2.0 * (n as f64 - 1.0) / m as f64;
        assert_relative_eq!(got, want, max_relative = 1e-7);
    }

    let a = vec![vec![0.3, -0.1, 2.0], vec![1.0, 0.0, 0.5]];
    let doubled: Vec<Vec<f64>> = a.iter().map(|r| r.iter().map(|v| 2.0 * v).collect()).collect();
    assert_relative_eq!(gini_of(&a), gini_of(&doubled), max_relative = 1e-7);
}

#[test]
fn gini_prior_rejects_degenerate_shapes() {
    let tape = Tape::<f64>::new();
    assert!(gini_prior(tape.var(Tensor::zeros(&[3, 1]))).is_err());
    assert!(gini_prior(tape.var(Tensor::zeros(&[3]))).is_err());
    // all-zero attributions are guarded, not a division by zero
    assert_eq!(gini_prior(tape.var(Tensor::zeros(&[2, 3]))).unwrap().item(), 0.0);
}

#[test]
fn signed_gini_prior_flips_with_a_negative_sum() {
    let a = vec![vec![-1.0, 0.0, 0.0]];
    assert_relative_eq!(gini_of(&a), 4.0, max_relative = 1e-7);
    let kind: PriorKind = serde_json::from_str(r#"{"kind": "sparsity-gini"}"#).unwrap();
    assert_eq!(kind, PriorKind::SparsityGini { signed: false });
}

#[test]
fn gini_prior_gradient_matches_finite_differences() {
    let tape = Tape::<f64>::new();
    let a = tape.var(Tensor::from_f64(&[2, 4], &[0.3, -0.2, 1.1, 0.05, 0.7, 0.4, -0.6, 0.2]).unwrap());
    let omega = gini_prior(a).unwrap();
    let g = tape.grad(omega, &[a]).unwrap().remove(0);
    let fd = finite_difference_gradient(&tape, omega, a, 1e-6).unwrap();
    assert!(g.max_abs_diff(&fd) < 1e-7);
}

#[test]
fn gini_coefficient_examples() {
    assert_eq!(gini_coefficient(&[1.0, 1.0, 1.0]), 0.0);
    assert_relative_eq!(gini_coefficient(&[0.0, 0.0, 0.0, 1.0]), 0.75);
    assert_relative_eq!(gini_coefficient(&[1.0, 3.0]), 0.25);
    assert_eq!(gini_coefficient(&[]), 0.0);
}

#[test]
fn roc_auc_examples() {
    assert_eq!(roc_auc(&[0.1, 0.4, 0.35, 0.8], &[0, 0, 1, 1]).unwrap(), 0.75);
    assert_eq!(roc_auc(&[0.1, 0.2, 0.3, 0.9], &[0, 0, 1, 1]).unwrap(), 1.0);
    assert_eq!(roc_auc(&[0.5; 6], &[0, 1, 0, 1, 1, 0]).unwrap(), 0.5);
    assert!(matches!(roc_auc(&[0.1, 0.2], &[1, 1]), Err(crate::Error::SingleClass)));
    assert!(roc_auc(&[0.1], &[0, 1]).is_err());
    assert!(roc_auc(&[0.1, 0.2], &[0, 2]).is_err());

    use rand::Rng;
    let mut r = crate::rng::stream(1, &[]);
    let n = 20_000;
    let scores: Vec<f64> = (0..n).map(|_| r.gen()).collect();
    let labels: Vec<usize> = (0..n).map(|_| r.gen_range(0..2)).collect();
    assert!((roc_auc(&scores, &labels).unwrap() - 0.5).abs() < 0.02);
}

fn pairwise_auc(scores: &[f64], labels: &[usize]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for i in 0..scores.len() {
        for j in 0..scores.len() {
            if labels[i] == 1 && labels[j] == 0 {
                pairs += 1.0;
                wins += if scores[i] > scores[j] {
                    1.0
                } else if scores[i] == scores[j] {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    wins / pairs
}

fn tiny_data(n_samples: usize, seed: u64) -> Dataset<f64> {
    let spec = GeneratorSpec {
        n_samples,
        n_features: 12,
        n_informative: 3,
        shift: 0.8,
        ..Default::default()
    };
    generate_synthetic(&spec, seed).unwrap()
}

fn quick_config() -> TrainConfig {
    TrainConfig {
        epochs: 5,
        batch_size: 16,
        learning_rate: 1e-2,
        seed: 3,
        ..Default::default()
    }
}

#[test]
fn zero_lambda_is_plain_training_bitwise() {
    let data = tiny_data(80, 1);
    let net = Network::<f64>::init(NetworkSpec::mlp(12, &[8], 1, false), 4).unwrap();
    let tc = quick_config();
    let plain = train(&net, &data, &tc, None, None).unwrap();
    for method in [PriorMethod::Xg, PriorMethod::Grad, PriorMethod::Eg { references: 2 }] {
        let zero = train(&net, &data, &tc, Some(&PriorConfig::gini(method, 0.0)), None).unwrap();
        assert_eq!(plain.network, zero.network);
        assert_eq!(plain.steps, zero.steps);
    }
    let again = train(&net, &data, &tc, None, None).unwrap();
    assert_eq!(plain.network, again.network);
    assert_ne!(plain.network, net);
}

#[test]
fn recorded_total_is_task_plus_weighted_prior() {
    let data = tiny_data(64, 2);
    let net = Network::<f64>::init(NetworkSpec::mlp(12, &[8], 1, false), 5).unwrap();
    for method in [PriorMethod::Xg, PriorMethod::Grad, PriorMethod::Rrr, PriorMethod::Eg { references: 3 }] {
        let pc = PriorConfig::gini(method, 0.7);
        let out = train(&net, &data, &quick_config(), Some(&pc), None).unwrap();
        assert_eq!(out.steps.len(), 5 * 4);
        for s in &out.steps {
            let p = s.prior.unwrap();
            assert!(p <= 0.0);
            assert!(p.is_finite());
            assert_relative_eq!(s.total, s.task + 0.7 * p, max_relative = 1e-12, epsilon = 1e-15);
        }
        let again = train(&net, &data, &quick_config(), Some(&pc), None).unwrap();
        assert_eq!(out.network, again.network, "{method}");
    }
}

#[test]
fn training_reduces_the_task_loss() {
    let data = tiny_data(200, 3);
    let val = tiny_data(200, 4);
    let net = Network::<f64>::init(NetworkSpec::mlp(12, &[16], 1, true), 1).unwrap();
    let tc = TrainConfig { epochs: 20, ..quick_config() };
    let out = train(&net, &data, &tc, None, Some(&val)).unwrap();
    let first = out.epochs.first().unwrap();
    let last = out.epochs.last().unwrap();
    assert!(last.task_loss < 0.6 * first.task_loss, "{first:?} {last:?}");
    assert!(last.val_auc.unwrap() > 0.85);
    assert!(last.prior.is_none());

    let sgd = TrainConfig { optimizer: Optimizer::Sgd, learning_rate: 0.05, ..tc };
    let out = train(&net, &data, &sgd, None, None).unwrap();
    assert!(out.epochs.last().unwrap().task_loss < out.epochs[0].task_loss);
}

#[test]
fn softmax_cross_entropy_matches_a_direct_evaluation() {
    let data = tiny_data(32, 5);
    let net = Network::<f64>::init(NetworkSpec::mlp(12, &[6], 2, false), 2).unwrap();
    let tape = Tape::new();
    let params = net.bind(&tape, true);
    let obj = batch_objective(&net, &params, &tape, data.features(), data.labels(), Loss::SoftmaxCrossEntropy, None, None)
        .unwrap();
    let logits = net.predict(data.features()).unwrap();
    let direct: f64 = logits
        .data()
        .chunks(2)
        .zip(data.labels())
        .map(|(z, &y)| (z[0].exp() + z[1].exp()).ln() - z[y])
        .sum::<f64>()
        / 32.0;
    assert_relative_eq!(obj.task.item(), direct, max_relative = 1e-12);

    let bce_net = Network::<f64>::init(NetworkSpec::mlp(12, &[6], 1, false), 2).unwrap();
    let params = bce_net.bind(&tape, true);
    let obj = batch_objective(&bce_net, &params, &tape, data.features(), data.labels(), Loss::BinaryCrossEntropy, None, None)
        .unwrap();
    let z = bce_net.predict(data.features()).unwrap();
    let direct: f64 = z
        .data()
        .iter()
        .zip(data.labels())
        .map(|(&z, &y)| {
            let p = 1.0 / (1.0 + (-z).exp());
            -(y as f64 * p.ln() + (1.0 - y as f64) * (1.0 - p).ln())
        })
        .sum::<f64>()
        / 32.0;
    assert_relative_eq!(obj.task.item(), direct, max_relative = 1e-12);

    let tc = TrainConfig { loss: Loss::SoftmaxCrossEntropy, ..quick_config() };
    let pc = PriorConfig::gini(PriorMethod::Xg, 0.5);
    let out = train(&net, &data, &tc, Some(&pc), Some(&data)).unwrap();
    assert!(out.epochs.last().unwrap().val_auc.is_some());
}

#[test]
fn objective_gradient_matches_finite_differences() {
    let data = tiny_data(6, 6);
    let x = data.features().clone();
    // 12 -> 1 -> ... keep a tiny net: 4 inputs, 4 hidden, 1 output = 20 params
    let x4 = Tensor::new(&[6, 4], x.data().chunks(12).flat_map(|r| r[..4].to_vec()).collect()).unwrap();
    let net = Network::<f64>::init(NetworkSpec::mlp(4, &[4], 1, false), 8).unwrap();
    assert_eq!(net.param_count(), 20);
    for pc in [
        PriorConfig::gini(PriorMethod::Xg, 1.0),
        PriorConfig::gini(PriorMethod::Grad, 0.3),
        PriorConfig {
            method: PriorMethod::Xg,
            kind: PriorKind::ZeroAttributionMask { features: vec![1, 3] },
            lambda: 2.0,
        },
    ] {
        let tape = Tape::new();
        let params = net.bind(&tape, true);
        let obj = batch_objective(&net, &params, &tape, &x4, data.labels(), Loss::BinaryCrossEntropy, Some(&pc), None)
            .unwrap();
        for p in params.vars() {
            let g = tape.grad(obj.total, &[p]).unwrap().remove(0);
            let fd = finite_difference_gradient(&tape, obj.total, p, 1e-6).unwrap();
            assert!(g.max_abs_diff(&fd) < 1e-6, "{pc:?}: {}", g.max_abs_diff(&fd));
        }
    }
}

#[test]
fn prior_attribution_is_the_standalone_attribution() {
    let data = tiny_data(10, 9);
    let net = Network::<f64>::init(NetworkSpec::mlp(12, &[8], 1, false), 3).unwrap();
    let targets = vec![0; 10];
    let standalone = attribute_batch(&net, data.features(), &targets, MethodChoice::new(crate::attribution::Method::XGradient, 0), &BatchOptions::default())
        .unwrap();
    let tape = Tape::new();
    let params = net.bind(&tape, true);
    let inside = attribution_graph(&tape, |v| net.forward_with(&params, v), data.features(), &targets, &GraphMethod::XGradient, Order::Second)
        .unwrap();
    assert_eq!(inside.value().as_ref(), &standalone);
}

#[test]
fn invalid_configurations_are_rejected() {
    let data = tiny_data(20, 1);
    let biased = Network::<f64>::init(NetworkSpec::mlp(12, &[4], 1, true), 0).unwrap();
    let tc = quick_config();
    assert!(matches!(
        train(&biased, &data, &tc, Some(&PriorConfig::gini(PriorMethod::Xg, 1.0)), None),
        Err(crate::Error::NotHomogeneous(_))
    ));
    assert!(train(&biased, &data, &tc, Some(&PriorConfig::gini(PriorMethod::Grad, -1.0)), None).is_err());
    assert!(train(&biased, &data, &tc, Some(&PriorConfig::gini(PriorMethod::Eg { references: 0 }, 1.0)), None).is_err());
    assert!(train(&biased, &data, &TrainConfig { batch_size: 0, ..tc.clone() }, None, None).is_err());
    let wide = Network::<f64>::init(NetworkSpec::mlp(12, &[4], 3, true), 0).unwrap();
    assert!(train(&wide, &data, &tc, None, None).is_err());
    let mask = PriorConfig {
        method: PriorMethod::Grad,
        kind: PriorKind::ZeroAttributionMask { features: vec![12] },
        lambda: 1.0,
    };
    assert!(train(&biased, &data, &tc, Some(&mask), None).is_err());
}

#[test]
fn divergence_aborts_with_the_trace() {
    let data = tiny_data(32, 1);
    let net = Network::<f64>::init(NetworkSpec::mlp(12, &[8], 1, true), 0).unwrap();
    let tc = TrainConfig {
        optimizer: Optimizer::Sgd,
        learning_rate: 1e300,
        ..quick_config()
    };
    match train(&net, &data, &tc, None, None) {
        Err(crate::Error::Divergence { trace, loss, .. }) => {
            assert!(!loss.is_finite() || trace.iter().any(|v| !v.is_finite()));
            assert!(!trace.is_empty());
        }
        other => panic!("{:?}", other.map(|o| o.epochs)),
    }
}

#[test]
fn x_gradient_prior_sparsifies_attributions() {
    let spec = GeneratorSpec {
        n_samples: 300,
        n_features: 20,
        n_informative: 3,
        shift: 0.8,
        ..Default::default()
    };
    let data: Dataset<f64> = generate_synthetic(&spec, 11).unwrap();
    let net = Network::<f64>::init(NetworkSpec::mlp(20, &[16], 1, false), 2).unwrap();
    let tc = TrainConfig {
        epochs: 20,
        batch_size: 32,
        learning_rate: 1e-2,
        seed: 1,
        ..Default::default()
    };
    let gini_after = |lambda: f64| {
        let out = train(&net, &data, &tc, Some(&PriorConfig::gini(PriorMethod::Xg, lambda)), None).unwrap();
        let a = attribute_batch(
            &out.network,
            data.features(),
            &vec![0; data.len()],
            MethodChoice::new(crate::attribution::Method::XGradient, 0),
            &BatchOptions::default(),
        )
        .unwrap();
        let mut mean_abs = vec![0.0; 20];
        for row in a.data().chunks(20) {
            for (m, v) in mean_abs.iter_mut().zip(row) {
                *m += v.abs();
            }
        }
        gini_coefficient(&mean_abs)
    };
    let (plain, sparse) = (gini_after(0.0), gini_after(1.0));
    assert!(sparse > plain, "{sparse} <= {plain}");
}

#[test]
fn subsample_experiment_is_reproducible() {
    let data = tiny_data(120, 4);
    let arms = vec![
        ExperimentArm {
            label: "unreg".into(),
            spec: NetworkSpec::mlp(12, &[8], 1, true),
            prior: None,
        },
        ExperimentArm {
            label: "xg".into(),
            spec: NetworkSpec::mlp(12, &[8], 1, false),
            prior: Some(PriorConfig::gini(PriorMethod::Xg, 0.1)),
        },
    ];
    let tc = TrainConfig { epochs: 3, ..quick_config() };
    let a = subsample_experiment(&data, 3, 40, 40, &arms, &tc, 5).unwrap();
    let b = subsample_experiment(&data, 3, 40, 40, &arms, &tc, 5).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.rows.len(), 6);
    let s = a.config("xg").unwrap();
    assert_eq!(s.runs, 3);
    assert_relative_eq!(s.two_sem, 2.0 * s.sem);
    assert!(s.lower() <= s.mean && s.mean <= s.upper());

    assert!(subsample_experiment(&data, 1, 61, 60, &arms, &tc, 5).is_err());
    let bad = vec![ExperimentArm {
        label: "bad".into(),
        spec: NetworkSpec::mlp(12, &[8], 1, true),
        prior: Some(PriorConfig::gini(PriorMethod::Xg, 0.1)),
    }];
    assert!(subsample_experiment(&data, 1, 40, 40, &bad, &tc, 5).is_err());
}

proptest! {
    #[test]
    fn auc_matches_pairwise_enumeration(
        pairs in proptest::collection::vec((0u8..6, 0usize..2), 2..40)
    ) {
        let scores: Vec<f64> = pairs.iter().map(|p| p.0 as f64 / 5.0).collect();
        let labels: Vec<usize> = pairs.iter().map(|p| p.1).collect();
        match roc_auc(&scores, &labels) {
            Ok(auc) => prop_assert!((auc - pairwise_auc(&scores, &labels)).abs() < 1e-12),
            Err(_) => prop_assert!(labels.iter().all(|&l| l == labels[0])),
        }
    }

    #[test]
    fn gini_prior_is_nonpositive_and_scale_free(
        vals in proptest::collection::vec(0.0f64..3.0, 6),
        c in 0.1f64..10.0,
    ) {
        let rows = vec![vals[..3].to_vec(), vals[3..].to_vec()];
        let g = gini_of(&rows);
        prop_assert!(g <= 0.0);
        let scaled: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|v| v * c).collect()).collect();
        let gs = gini_of(&scaled);
        prop_assert!((g - gs).abs() <= 1e-6 * g.abs().max(1e-9) + 1e-9);
    }
}
