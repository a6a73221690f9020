use super::nets::{insert_identity, permute_hidden, random_mlp};
use super::*;
use crate::attribution::{grad_attr, input_x_grad, integrated_gradients, Baseline};
use crate::data::{generate_synthetic, GeneratorSpec};
use crate::network::{Model, Network, NetworkSpec};
use crate::rng;
use crate::tensor::Tensor;

fn choice(s: &str) -> MethodChoice {
    s.parse().unwrap()
}

#[test]
fn counterexample_values() {
    let net = saturating_counterexample();
    assert_eq!(net.predict(&Tensor::vector(vec![0.0])).unwrap().data(), &[0.0]);
    assert_eq!(net.predict(&Tensor::vector(vec![2.0])).unwrap().data(), &[1.0]);
    let x = Tensor::vector(vec![2.0]);
    assert_eq!(grad_attr(&net, &x, 0).unwrap().values.data(), &[0.0]);
    assert_eq!(input_x_grad(&net, &x, 0).unwrap().values.data(), &[0.0]);
    let ig = integrated_gradients(&net, &x, &Baseline::Zero, 0, 128).unwrap();
    assert!((ig.values.data()[0] - 1.0).abs() <= 0.02);
    assert!(!net.homogeneity().is_homogeneous());
}

#[test]
fn transforms_preserve_the_function() {
    for seed in 0..6 {
        let mut r = rng::stream(seed, &[rng::tag("transform-test")]);
        let net = random_mlp(&mut r, 4, seed % 2 == 1).unwrap();
        let xs = Tensor::new(&[3, 4], (0..12).map(|i| (i as f64 * 0.37).sin() * 2.0).collect()).unwrap();
        let base = net.predict(&xs).unwrap();
        for other in [permute_hidden(&net, &mut r).unwrap(), insert_identity(&net).unwrap()] {
            assert_ne!(other.params(), net.params());
            assert!(other.predict(&xs).unwrap().max_abs_diff(&base) < 1e-12);
            assert_eq!(other.homogeneity().is_homogeneous(), seed % 2 == 0);
        }
    }
}

#[test]
fn expected_cells() {
    use Axiom::*;
    assert_eq!(expected_cell(choice("xg"), SensitivityA), Some(true));
    assert_eq!(expected_cell(choice("ig"), Completeness), Some(true));
    assert_eq!(expected_cell(choice("eg@1"), SensitivityB), Some(true));
    assert_eq!(expected_cell(choice("eg@1"), Linearity), Some(false));
    assert_eq!(expected_cell(choice("ixg"), Completeness), Some(false));
    assert_eq!(expected_cell(choice("grad"), Completeness), None);
    assert_eq!(expected_cell(choice("grad"), SymmetryPreserving), Some(true));
    assert_eq!(expected_cell(choice("ig@16"), Linearity), None);
    assert_eq!(expected_cell(choice("ig"), NonnegativeHomogeneity), None);
}

#[test]
fn reference_table_is_reproduced() {
    let suite = run_suite(&table_methods(), DEFAULT_TRIALS, DEFAULT_SEED).unwrap();
    println!("{}", suite.to_text());
    for r in suite.mismatches() {
        println!("{} {}: {:?} {:?}", r.method, r.axiom, r.verdict, r.notes);
    }
    assert!(suite.matches_table());

    // Fails carry witnesses that replay exactly.
    for r in suite.reports.iter().filter(|r| matches!(r.verdict, Verdict::Fail { .. })) {
        assert_eq!(&replay(r).unwrap(), r);
    }
    let grad = suite.cell("grad", Axiom::SensitivityA).unwrap();
    let Verdict::Fail { witness } = &grad.verdict else { panic!("gradient passes sensitivity-a") };
    assert_eq!(witness.input, vec![2.0]);
    assert_eq!(witness.observed, vec![0.0]);

    let xg = suite.cell("xg", Axiom::SensitivityA).unwrap();
    assert!(xg.notes.iter().any(|n| n.contains("not applicable")));

    let json = serde_json::to_string(&suite).unwrap();
    let back: SuiteReport = serde_json::from_str(&json).unwrap();
    assert_eq!(back, suite);
}

#[test]
fn biased_input_x_gradient_is_not_homogeneous() {
    let r = check_nonneg_homogeneity(choice("ixg"), 10, 1).unwrap();
    let Verdict::Fail { witness } = r.verdict else { panic!("expected a failure") };
    assert!(witness.networks[0].contains("bias"));
    assert_eq!(r.expected, None);
}

#[test]
fn x_gradient_completeness_is_exact() {
    let r = check_completeness(choice("xg"), 20, 3).unwrap();
    assert!(r.verdict.passed());
    assert_eq!(r.evaluated, 10);
    let gap = r.notes.iter().find_map(|n| n.strip_prefix("largest single-input relative gap ")).unwrap();
    assert!(gap.parse::<f64>().unwrap() < 1e-9, "{gap}");
}

#[test]
fn contrast_probe_is_flat_for_homogeneous_networks() {
    let data = generate_synthetic::<f64>(&GeneratorSpec { n_samples: 200, n_features: 8, n_informative: 3, ..Default::default() }, 1).unwrap();
    let free = Network::init(NetworkSpec::mlp(8, &[16, 16], 2, false), 4).unwrap();
    let alphas = [0.1, 0.3, 1.0, 2.5, 10.0];
    let points = contrast_equivariance_probe(&free, &data, &alphas).unwrap();
    assert!(points.iter().all(|p| p.accuracy == points[0].accuracy));

    let mut biased = Network::init(NetworkSpec::mlp(8, &[16, 16], 2, true), 4).unwrap();
    for (k, t) in biased.clone().params() {
        if k.ends_with("bias") {
            *biased.param_mut(k).unwrap() = t.map(|_| 0.7);
        }
    }
    let points = contrast_equivariance_probe(&biased, &data, &alphas).unwrap();
    assert_eq!(points.len(), alphas.len());

    let plain = crate::metrics::predicted_classes(&free.predict(data.features()).unwrap());
    let acc = plain.iter().zip(data.labels()).filter(|(p, l)| p == l).count() as f64 / data.len() as f64;
    assert_eq!(contrast_equivariance_probe(&free, &data, &[1.0]).unwrap()[0].accuracy, acc);

    assert!(contrast_equivariance_probe(&free, &data, &[0.0]).is_err());
    assert!(contrast_equivariance_probe(&free, &data, &[-1.0]).is_err());
}

#[test]
fn text_table_layout() {
    let suite = run_suite(&[choice("xg"), choice("grad")], 4, 7).unwrap();
    let text = suite.to_text();
    assert_eq!(text.lines().count(), 1 + Axiom::ALL.len() + 1);
    assert!(text.lines().next().unwrap().contains("xg"));
    assert!(text.contains("sensitivity-a"));
}
