use rand::seq::SliceRandom;
use rand::Rng;

use super::estimate::estimate;
use super::nets::{
    disconnect_input, insert_identity, permute_hidden, random_mlp, saturating_counterexample,
    symmetrize_inputs,
};
use super::{Axiom, Verdict, Witness};
use crate::attribution::{Method, MethodChoice};
use crate::error::Result;
use crate::metrics::batch_logits;
use crate::network::{LinearCombination, Model, Network};
use crate::rng::{self, Rng as StdRng};
use crate::tensor::Tensor;

/// Allowed deviation for deterministic equalities, relative to `max(1, |v|)`.
pub const EXACT_TOL: f64 = 1e-9;
/// Relative completeness gap allowed, pooled over trials.
pub const COMPLETENESS_TOL: f64 = 5e-3;
/// Standard errors a sampling estimator may deviate by.
pub const SE_MULTIPLIER: f64 = 5.0;
/// Output change below which two inputs count as giving the same prediction.
const DIFFERS: f64 = 1e-6;
const ZERO: f64 = 1e-12;
const BACKGROUND: usize = 8;
const COEFFICIENTS: [f64; 4] = [-2.0, 0.5, 1.0, 3.0];
pub const HOMOGENEITY_ALPHAS: [f64; 4] = [0.0, 0.3, 1.0, 2.7];

pub(crate) struct Outcome {
    pub verdict: Verdict,
    pub trials: usize,
    pub notes: Vec<String>,
}

struct Trial {
    axiom: Axiom,
    choice: MethodChoice,
    seed: u64,
    index: usize,
}

impl Trial {
    fn rng(&self, part: &str) -> StdRng {
        rng::stream(
            self.seed,
            &[
                rng::tag("axioms"),
                rng::tag(self.axiom.label()),
                rng::tag(&self.choice.to_string()),
                self.index as u64,
                rng::tag(part),
            ],
        )
    }
}

fn trial(axiom: Axiom, choice: MethodChoice, seed: u64, index: usize) -> Trial {
    Trial {
        axiom,
        choice,
        seed,
        index,
    }
}

fn output(model: &dyn Model<f64>, x: &[f64]) -> Result<f64> {
    Ok(batch_logits(model, &Tensor::new(&[1, x.len()], x.to_vec())?)?.data()[0])
}

fn uniform(rng: &mut StdRng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(lo..hi)).collect()
}

fn background(rng: &mut StdRng, n: usize) -> Vec<Vec<f64>> {
    (0..BACKGROUND).map(|_| uniform(rng, n, -1.0, 1.0)).collect()
}

fn is_xg(choice: MethodChoice) -> bool {
    choice.method == Method::XGradient
}

fn json(net: &Network<f64>) -> String {
    net.to_json().unwrap_or_else(|e| format!("<unserializable: {e}>"))
}

/// Homogeneous and biased probe networks alternate; X-Gradient only sees
/// the homogeneous ones.
fn network_kind(choice: MethodChoice, index: usize) -> Option<bool> {
    let has_bias = index % 2 == 1;
    (!(has_bias && is_xg(choice))).then_some(has_bias)
}

/// First element where `lhs` and `rhs` differ by more than the exact
/// tolerance plus `SE_MULTIPLIER` combined standard errors.
fn first_violation(lhs: &[f64], rhs: &[f64], se: impl Fn(usize) -> f64) -> Option<(usize, f64)> {
    (0..lhs.len()).find_map(|i| {
        let gap = (lhs[i] - rhs[i]).abs();
        let allowed = EXACT_TOL * lhs[i].abs().max(rhs[i].abs()).max(1.0) + SE_MULTIPLIER * se(i);
        (gap > allowed).then_some((i, gap))
    })
}

fn summary(trials: usize) -> String {
    format!("no violation found in {trials} trials")
}

fn finish(failure: Option<Witness>, trials: usize, mut notes: Vec<String>) -> Outcome {
    let verdict = match failure {
        Some(w) => Verdict::Fail { witness: Box::new(w) },
        None if trials == 0 => Verdict::NotApplicable {
            reason: "no applicable probe network".into(),
        },
        None => {
            notes.push(summary(trials));
            Verdict::Pass
        }
    };
    Outcome { verdict, trials, notes }
}

pub(crate) fn sensitivity_a(choice: MethodChoice, trials: usize, seed: u64) -> Result<Outcome> {
    let mut notes = Vec::new();
    let mut run = 0;

    let counter = saturating_counterexample();
    if is_xg(choice) {
        notes.push("counterexample: not applicable (network has biases)".into());
    } else {
        // Sampling methods get one draw per trial; deterministic ones once.
        let repeats = if choice.method == Method::ExpectedGradients { trials } else { 1 };
        for r in 0..repeats {
            let t = trial(Axiom::SensitivityA, choice, seed, r);
            let a = estimate(&counter, choice, &[2.0], &[vec![0.0]], &mut t.rng("counterexample"))?;
            run += 1;
            if a.value[0].abs() <= ZERO {
                return Ok(finish(
                    Some(Witness {
                        trial: r,
                        networks: vec![json(&counter)],
                        input: vec![2.0],
                        baseline: vec![0.0],
                        observed: a.value,
                        expected: vec![1.0],
                        detail: "F(x) - F(x') = 1 but the differing feature gets zero attribution".into(),
                    }),
                    run,
                    notes,
                ));
            }
        }
        notes.push(format!("counterexample attribution nonzero in {repeats} evaluations"));
    }

    for index in 0..trials {
        let Some(has_bias) = network_kind(choice, index) else { continue };
        let t = trial(Axiom::SensitivityA, choice, seed, index);
        let mut r = t.rng("setup");
        let n = r.gen_range(2..=5);
        let net = random_mlp(&mut r, n, has_bias)?;
        let i = r.gen_range(0..n);
        let mut x = vec![0.0; n];
        x[i] = r.gen_range(0.5..3.0) * if r.gen() { 1.0 } else { -1.0 };
        let base = vec![0.0; n];
        let change = output(&net, &x)? - output(&net, &base)?;
        run += 1;
        if change.abs() < DIFFERS {
            continue;
        }
        let a = estimate(&net, choice, &x, &[base.clone()], &mut t.rng("estimate"))?;
        if a.value[i].abs() <= ZERO {
            let mut expected = vec![0.0; n];
            expected[i] = change;
            return Ok(finish(
                Some(Witness {
                    trial: index,
                    networks: vec![json(&net)],
                    input: x,
                    baseline: base,
                    observed: a.value,
                    expected,
                    detail: format!("feature {i} alone changes the output by {change:e} but gets zero attribution"),
                }),
                run,
                notes,
            ));
        }
    }
    Ok(finish(None, run, notes))
}

pub(crate) fn sensitivity_b(choice: MethodChoice, trials: usize, seed: u64) -> Result<Outcome> {
    let mut run = 0;
    for index in 0..trials {
        let Some(has_bias) = network_kind(choice, index) else { continue };
        let t = trial(Axiom::SensitivityB, choice, seed, index);
        let mut r = t.rng("setup");
        let n = r.gen_range(2..=5);
        let mut net = random_mlp(&mut r, n, has_bias)?;
        let j = r.gen_range(0..n);
        disconnect_input(&mut net, j);
        let x = uniform(&mut r, n, -2.0, 2.0);
        let bg = background(&mut r, n);
        let a = estimate(&net, choice, &x, &bg, &mut t.rng("estimate"))?;
        run += 1;
        if a.value[j].abs() > ZERO {
            let mut expected = a.value.clone();
            expected[j] = 0.0;
            return Ok(finish(
                Some(Witness {
                    trial: index,
                    networks: vec![json(&net)],
                    input: x,
                    baseline: vec![0.0; n],
                    observed: a.value,
                    expected,
                    detail: format!("feature {j} is disconnected but gets nonzero attribution"),
                }),
                run,
                Vec::new(),
            ));
        }
    }
    Ok(finish(None, run, Vec::new()))
}

pub(crate) fn implementation_invariance(choice: MethodChoice, trials: usize, seed: u64) -> Result<Outcome> {
    let mut run = 0;
    for index in 0..trials {
        // Both transforms meet both network kinds.
        let Some(has_bias) = network_kind(choice, index / 2) else { continue };
        let t = trial(Axiom::ImplementationInvariance, choice, seed, index);
        let mut r = t.rng("setup");
        let n = r.gen_range(2..=5);
        let net = random_mlp(&mut r, n, has_bias)?;
        let (other, how) = if index % 2 == 0 {
            (permute_hidden(&net, &mut r)?, "hidden units permuted")
        } else {
            (insert_identity(&net)?, "identity layer inserted")
        };
        let x = uniform(&mut r, n, -2.0, 2.0);
        let bg = background(&mut r, n);
        // Independent sampling streams for the two evaluations.
        let a = estimate(&net, choice, &x, &bg, &mut t.rng("first"))?;
        let b = estimate(&other, choice, &x, &bg, &mut t.rng("second"))?;
        run += 1;
        if let Some((i, gap)) = first_violation(&a.value, &b.value, |i| a.se_at(i).hypot(b.se_at(i))) {
            return Ok(finish(
                Some(Witness {
                    trial: index,
                    networks: vec![json(&net), json(&other)],
                    input: x,
                    baseline: vec![0.0; n],
                    observed: b.value,
                    expected: a.value,
                    detail: format!("{how}: feature {i} differs by {gap:e}"),
                }),
                run,
                Vec::new(),
            ));
        }
    }
    Ok(finish(None, run, Vec::new()))
}

pub(crate) fn completeness(choice: MethodChoice, trials: usize, seed: u64) -> Result<Outcome> {
    let mut run = 0;
    let (mut excess_sum, mut scale_sum, mut worst_rel) = (0.0, 0.0, 0.0f64);
    let mut worst: Option<(f64, Witness)> = None;
    for index in 0..trials {
        let Some(has_bias) = network_kind(choice, index) else { continue };
        let t = trial(Axiom::Completeness, choice, seed, index);
        let mut r = t.rng("setup");
        let n = r.gen_range(2..=5);
        let net = random_mlp(&mut r, n, has_bias)?;
        let x = uniform(&mut r, n, -2.0, 2.0);
        let base = vec![0.0; n];
        let change = output(&net, &x)? - output(&net, &base)?;
        let a = estimate(&net, choice, &x, &[base.clone()], &mut t.rng("estimate"))?;
        run += 1;
        let gap = (a.total() - change).abs();
        let excess = (gap - SE_MULTIPLIER * a.se_of(&vec![1.0; n])).max(0.0);
        excess_sum += excess;
        scale_sum += change.abs();
        let rel = gap / change.abs().max(f64::MIN_POSITIVE);
        worst_rel = worst_rel.max(rel);
        if excess > 0.0 && worst.as_ref().is_none_or(|(e, _)| excess > *e) {
            let witness = Witness {
                trial: index,
                networks: vec![json(&net)],
                input: x,
                baseline: base,
                observed: vec![a.total()],
                expected: vec![change],
                detail: format!("attributions sum to {:e}, output changes by {change:e}", a.total()),
            };
            worst = Some((excess, witness));
        }
    }
    if run == 0 {
        return Ok(finish(None, 0, Vec::new()));
    }
    let pooled = excess_sum / scale_sum.max(f64::MIN_POSITIVE);
    let mut notes = vec![
        format!("pooled relative gap {pooled:.3e} (tolerance {COMPLETENESS_TOL:e})"),
        format!("largest single-input relative gap {worst_rel:.3e}"),
    ];
    if pooled <= COMPLETENESS_TOL {
        return Ok(finish(None, run, notes));
    }
    let (_, mut w) = worst.expect("a positive pooled gap has a worst trial");
    w.detail = format!("pooled relative gap {pooled:.3e}; worst input: {}", w.detail);
    notes.clear();
    Ok(finish(Some(w), run, notes))
}

pub(crate) fn linearity(choice: MethodChoice, trials: usize, seed: u64) -> Result<Outcome> {
    let mut run = 0;
    for index in 0..trials {
        let Some(has_bias) = network_kind(choice, index) else { continue };
        let t = trial(Axiom::Linearity, choice, seed, index);
        let mut r = t.rng("setup");
        let n = r.gen_range(2..=5);
        let f1 = random_mlp(&mut r, n, has_bias)?;
        let f2 = random_mlp(&mut r, n, has_bias)?;
        let a = *COEFFICIENTS.choose(&mut r).expect("non-empty");
        let b = *COEFFICIENTS.choose(&mut r).expect("non-empty");
        let combined = LinearCombination::new(vec![(a, &f1 as &dyn Model<f64>), (b, &f2)])?;
        let x = uniform(&mut r, n, -2.0, 2.0);
        let bg = background(&mut r, n);
        let ec = estimate(&combined, choice, &x, &bg, &mut t.rng("combined"))?;
        let e1 = estimate(&f1, choice, &x, &bg, &mut t.rng("first"))?;
        let e2 = estimate(&f2, choice, &x, &bg, &mut t.rng("second"))?;
        run += 1;
        let rhs: Vec<f64> = (0..n).map(|i| a * e1.value[i] + b * e2.value[i]).collect();
        let se = |i: usize| {
            (ec.se_at(i).powi(2) + (a * e1.se_at(i)).powi(2) + (b * e2.se_at(i)).powi(2)).sqrt()
        };
        if let Some((i, gap)) = first_violation(&ec.value, &rhs, se) {
            return Ok(finish(
                Some(Witness {
                    trial: index,
                    networks: vec![json(&f1), json(&f2)],
                    input: x,
                    baseline: vec![0.0; n],
                    observed: ec.value,
                    expected: rhs,
                    detail: format!("{a} F1 + {b} F2: feature {i} differs by {gap:e}"),
                }),
                run,
                Vec::new(),
            ));
        }
    }
    Ok(finish(None, run, Vec::new()))
}

pub(crate) fn symmetry(choice: MethodChoice, trials: usize, seed: u64) -> Result<Outcome> {
    let mut run = 0;
    for index in 0..trials {
        let Some(has_bias) = network_kind(choice, index) else { continue };
        let t = trial(Axiom::SymmetryPreserving, choice, seed, index);
        let mut r = t.rng("setup");
        let n = r.gen_range(2..=5);
        let mut net = random_mlp(&mut r, n, has_bias)?;
        let pair: Vec<usize> = rand::seq::index::sample(&mut r, n, 2).into_vec();
        let (i, j) = (pair[0], pair[1]);
        symmetrize_inputs(&mut net, i, j);
        let mut x = uniform(&mut r, n, -2.0, 2.0);
        x[j] = x[i];
        // Closed under swapping i and j, so the reference distribution is
        // symmetric too.
        let mut bg = background(&mut r, n);
        for k in 0..bg.len() {
            let mut swapped = bg[k].clone();
            swapped.swap(i, j);
            bg.push(swapped);
        }
        let a = estimate(&net, choice, &x, &bg, &mut t.rng("estimate"))?;
        run += 1;
        let mut w = vec![0.0; n];
        w[i] = 1.0;
        w[j] = -1.0;
        let se = a.se_of(&w);
        if first_violation(&[a.value[i]], &[a.value[j]], |_| se).is_some() {
            let mut expected = a.value.clone();
            expected[j] = a.value[i];
            return Ok(finish(
                Some(Witness {
                    trial: index,
                    networks: vec![json(&net)],
                    input: x,
                    baseline: vec![0.0; n],
                    observed: a.value,
                    expected,
                    detail: format!("symmetric features {i} and {j} get different attributions"),
                }),
                run,
                Vec::new(),
            ));
        }
    }
    Ok(finish(None, run, Vec::new()))
}

pub(crate) fn nonnegative_homogeneity(choice: MethodChoice, trials: usize, seed: u64) -> Result<Outcome> {
    let mut run = 0;
    for index in 0..trials {
        let Some(has_bias) = network_kind(choice, index) else { continue };
        let t = trial(Axiom::NonnegativeHomogeneity, choice, seed, index);
        let mut r = t.rng("setup");
        let n = r.gen_range(2..=5);
        let net = random_mlp(&mut r, n, has_bias)?;
        let x = uniform(&mut r, n, -2.0, 2.0);
        let base = vec![vec![0.0; n]];
        let unit = estimate(&net, choice, &x, &base, &mut t.rng("unit"))?;
        run += 1;
        for alpha in HOMOGENEITY_ALPHAS {
            let scaled_x: Vec<f64> = x.iter().map(|v| alpha * v).collect();
            let scaled = estimate(&net, choice, &scaled_x, &base, &mut t.rng(&format!("alpha={alpha}")))?;
            let rhs: Vec<f64> = unit.value.iter().map(|v| alpha * v).collect();
            let se = |i: usize| scaled.se_at(i).hypot(alpha * unit.se_at(i));
            if let Some((i, gap)) = first_violation(&scaled.value, &rhs, se) {
                return Ok(finish(
                    Some(Witness {
                        trial: index,
                        networks: vec![json(&net)],
                        input: scaled_x,
                        baseline: vec![0.0; n],
                        observed: scaled.value,
                        expected: rhs,
                        detail: format!("alpha {alpha}: feature {i} differs from the scaled attribution by {gap:e}"),
                    }),
                    run,
                    Vec::new(),
                ));
            }
        }
    }
    Ok(finish(None, run, Vec::new()))
}

pub(crate) fn run(axiom: Axiom, choice: MethodChoice, trials: usize, seed: u64) -> Result<Outcome> {
    match axiom {
        Axiom::SensitivityA => sensitivity_a(choice, trials, seed),
        Axiom::SensitivityB => sensitivity_b(choice, trials, seed),
        Axiom::ImplementationInvariance => implementation_invariance(choice, trials, seed),
        Axiom::Completeness => completeness(choice, trials, seed),
        Axiom::Linearity => linearity(choice, trials, seed),
        Axiom::SymmetryPreserving => symmetry(choice, trials, seed),
        Axiom::NonnegativeHomogeneity => nonnegative_homogeneity(choice, trials, seed),
    }
}
