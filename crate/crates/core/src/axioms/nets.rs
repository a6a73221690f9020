//! Probe networks for the axiom checks.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::Result;
use crate::network::{LayerSpec, Network, NetworkSpec};
use crate::rng::Rng as StdRng;
use crate::tensor::Tensor;

pub(crate) const BIAS_SCALE: f64 = 0.5;

/// `f(x) = 1 - ReLU(1 - x)`: flat for `x >= 1`, so the gradient at `x = 2`
/// vanishes although `f(2) - f(0) = 1`.
pub fn saturating_counterexample() -> Network<f64> {
    let spec = NetworkSpec {
        input_dim: 1,
        input_channels: 1,
        output_dim: 1,
        layers: vec![LayerSpec::dense(1, true), LayerSpec::relu(), LayerSpec::dense(1, true)],
    };
    let params = BTreeMap::from([
        ("layers.0.weight".to_string(), Tensor::new(&[1, 1], vec![-1.0]).unwrap()),
        ("layers.0.bias".to_string(), Tensor::vector(vec![1.0])),
        ("layers.2.weight".to_string(), Tensor::new(&[1, 1], vec![-1.0]).unwrap()),
        ("layers.2.bias".to_string(), Tensor::vector(vec![1.0])),
    ]);
    Network::from_parts(spec, params).expect("valid counterexample")
}

/// Random ReLU MLP with one output; biased networks get uniform biases.
pub(crate) fn random_mlp(rng: &mut StdRng, n: usize, has_bias: bool) -> Result<Network<f64>> {
    let depth = rng.gen_range(1..=2);
    let hidden: Vec<usize> = (0..depth).map(|_| rng.gen_range(3..=8)).collect();
    let mut net = Network::init(NetworkSpec::mlp(n, &hidden, 1, has_bias), rng.gen())?;
    if has_bias {
        randomize_biases(&mut net, rng);
    }
    Ok(net)
}

fn randomize_biases(net: &mut Network<f64>, rng: &mut StdRng) {
    let names: Vec<String> = net.params().keys().filter(|k| k.ends_with("bias")).cloned().collect();
    for name in names {
        let t = net.param_mut(&name).expect("listed parameter");
        for v in t.data_mut() {
            *v = rng.gen_range(-BIAS_SCALE..BIAS_SCALE);
        }
    }
}

/// Copies the first-layer weights of input `i` onto input `j`, making the
/// network symmetric in those two inputs.
pub(crate) fn symmetrize_inputs(net: &mut Network<f64>, i: usize, j: usize) {
    let w = net.param_mut("layers.0.weight").expect("dense first layer");
    let n = w.shape()[1];
    let data = w.data_mut();
    for row in data.chunks_mut(n) {
        row[j] = row[i];
    }
}

/// Zeroes every first-layer weight reading input `j`.
pub(crate) fn disconnect_input(net: &mut Network<f64>, j: usize) {
    let w = net.param_mut("layers.0.weight").expect("dense first layer");
    let n = w.shape()[1];
    for row in w.data_mut().chunks_mut(n) {
        row[j] = 0.0;
    }
}

/// Functionally identical network with the units of the first hidden layer
/// permuted.
pub(crate) fn permute_hidden(net: &Network<f64>, rng: &mut StdRng) -> Result<Network<f64>> {
    let mut params = net.params().clone();
    let w0 = &params["layers.0.weight"];
    let (units, fan_in) = (w0.shape()[0], w0.shape()[1]);
    let mut perm: Vec<usize> = (0..units).collect();
    perm.shuffle(rng);

    let rows: Vec<f64> = perm
        .iter()
        .flat_map(|&p| w0.data()[p * fan_in..(p + 1) * fan_in].to_vec())
        .collect();
    params.insert("layers.0.weight".into(), Tensor::new(&[units, fan_in], rows)?);
    if let Some(b) = params.get("layers.0.bias") {
        let b = Tensor::vector(perm.iter().map(|&p| b.data()[p]).collect());
        params.insert("layers.0.bias".into(), b);
    }
    // The next dense layer reads the permuted units.
    let w2 = &params["layers.2.weight"];
    let (out, inp) = (w2.shape()[0], w2.shape()[1]);
    let cols: Vec<f64> = (0..out)
        .flat_map(|r| perm.iter().map(move |&p| (r, p)))
        .map(|(r, p)| w2.data()[r * inp + p])
        .collect();
    params.insert("layers.2.weight".into(), Tensor::new(&[out, inp], cols)?);
    Network::from_parts(net.spec().clone(), params)
}

/// Functionally identical network with an identity dense layer and a ReLU
/// inserted after the first hidden activation.
pub(crate) fn insert_identity(net: &Network<f64>) -> Result<Network<f64>> {
    let spec = net.spec();
    let units = net.params()["layers.0.weight"].shape()[0];
    let mut layers = spec.layers.clone();
    layers.insert(2, LayerSpec::dense(units, false));
    layers.insert(3, LayerSpec::relu());
    let new_spec = NetworkSpec {
        layers,
        ..spec.clone()
    };

    let mut params = BTreeMap::new();
    for (name, t) in net.params() {
        let mut parts = name.splitn(3, '.');
        let (_, idx, rest) = (parts.next(), parts.next(), parts.next());
        let idx: usize = idx.and_then(|s| s.parse().ok()).expect("layer index");
        let idx = if idx >= 2 { idx + 2 } else { idx };
        params.insert(format!("layers.{idx}.{}", rest.expect("param kind")), t.clone());
    }
    params.insert("layers.2.weight".into(), Tensor::eye(units));
    Network::from_parts(new_spec, params)
}
