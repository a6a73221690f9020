use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use xgrad::attribution::{
    attribute_batch, ig_convergence, mean_call_time, write_csv, AttributionRecord, BatchOptions, MethodChoice,
    ORACLE_STEPS, SWEEP_STEPS,
};
use xgrad::axioms::{contrast_equivariance_probe, run_suite, DEFAULT_SEED, DEFAULT_TRIALS, TABLE_METHODS};
use xgrad::metrics::{benchmark_table, default_fractions, MaskFn, MetricInput};
use xgrad::network::NetworkSpec;
use xgrad::prior::{train, PriorConfig, SparsityBench, TrainConfig};
use xgrad::{rng, Error, Network, Tensor};

use crate::config::{
    head, load, load_model, parse_methods, parse_prior_method, require_file, sample_rows, targets, to_toml, usage,
    DataConfig, Failure, Outcome,
};
use crate::output::RunDir;

#[derive(Parser, Debug)]
#[command(name = "xgrad", version, about = "Attribution experiments for homogeneous networks")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train an MLP, optionally with an attribution prior
    Train(TrainArgs),
    /// Write per-sample attributions and per-method timings
    Attribute(AttributeArgs),
    /// Check the attribution axioms for each method
    Axioms(AxiomsArgs),
    /// Masking-based attribution quality metrics
    Metrics(MetricsArgs),
    /// Attribution-prior comparison on subsampled synthetic data
    SparsityBench(SparsityArgs),
    /// IG error against a fine oracle as the step count grows
    IgConvergence(ConvergenceArgs),
    /// Accuracy under input rescaling
    ContrastProbe(ContrastArgs),
}

#[derive(Args, Debug)]
struct Common {
    /// TOML config file; flags override its values
    #[arg(long)]
    config: Option<PathBuf>,
    /// Parent directory of the timestamped run directory
    #[arg(long, default_value = "runs")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct DataArgs {
    /// CSV with a label column; synthetic data when absent
    #[arg(long)]
    data_csv: Option<PathBuf>,
    #[arg(long)]
    label_column: Option<String>,
    /// Synthetic sample count
    #[arg(long)]
    samples: Option<usize>,
    /// Synthetic feature count
    #[arg(long)]
    features: Option<usize>,
    /// Synthetic informative feature count
    #[arg(long)]
    informative: Option<usize>,
}

impl DataArgs {
    fn apply(self, d: &mut DataConfig) {
        if let Some(p) = self.data_csv {
            d.csv = Some(p);
        }
        if let Some(c) = self.label_column {
            d.label_column = c;
        }
        if let Some(n) = self.samples {
            d.generator.n_samples = n;
        }
        if let Some(n) = self.features {
            d.generator.n_features = n;
        }
        if let Some(n) = self.informative {
            d.generator.n_informative = n;
        }
    }
}

pub fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Train(a) => train_cmd(a),
        Command::Attribute(a) => attribute_cmd(a),
        Command::Axioms(a) => axioms_cmd(a),
        Command::Metrics(a) => metrics_cmd(a),
        Command::SparsityBench(a) => sparsity_cmd(a),
        Command::IgConvergence(a) => convergence_cmd(a),
        Command::ContrastProbe(a) => contrast_cmd(a),
    }
}

/// Creates the run directory and records the resolved config in it.
fn start<T: Serialize>(common: &Common, command: &str, config: &T) -> Outcome<RunDir> {
    let text = to_toml(config)?;
    let dir = RunDir::create(&common.out, command)?;
    dir.write("config.toml", text)?;
    Ok(dir)
}

fn finish(dir: &RunDir) -> Outcome {
    println!("results written to {}", dir.path().display());
    Ok(())
}

fn check_width(model: &Network, n: usize) -> Outcome {
    let want = model.spec().input_dim;
    if want != n {
        return Err(Failure::Usage(format!("model expects {want} features, data has {n}")));
    }
    Ok(())
}

fn require_model(path: &std::path::Path) -> Outcome {
    if path.as_os_str().is_empty() {
        return Err(Failure::Usage("a model file is required (--model)".into()));
    }
    require_file(path, "model")
}

fn f(v: f64) -> String {
    v.to_string()
}

fn opt(v: Option<f64>) -> String {
    v.map(f).unwrap_or_default()
}

// ---- train ----

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    data: DataArgs,
    /// Hidden layer widths, comma separated
    #[arg(long, value_delimiter = ',')]
    hidden: Option<Vec<usize>>,
    /// Give dense layers biases
    #[arg(long)]
    bias: bool,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    /// Sparsity prior method: grad, rrr, xg or eg<k>
    #[arg(long)]
    prior: Option<String>,
    /// Prior strength
    #[arg(long)]
    lambda: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct TrainRun {
    seed: u64,
    hidden: Vec<usize>,
    bias: bool,
    output_dim: usize,
    /// Share of rows held out for validation.
    validation_fraction: f64,
    data: DataConfig,
    train: TrainConfig,
    prior: Option<PriorConfig>,
}

impl Default for TrainRun {
    fn default() -> Self {
        Self {
            seed: 0,
            hidden: vec![32],
            bias: false,
            output_dim: 1,
            validation_fraction: 0.2,
            data: DataConfig::default(),
            train: TrainConfig::default(),
            prior: None,
        }
    }
}

fn train_cmd(a: TrainArgs) -> Outcome {
    let mut cfg: TrainRun = load(a.common.config.as_deref())?;
    a.data.apply(&mut cfg.data);
    if let Some(s) = a.common.seed {
        cfg.seed = s;
    }
    if let Some(h) = a.hidden {
        cfg.hidden = h;
    }
    cfg.bias |= a.bias;
    if let Some(e) = a.epochs {
        cfg.train.epochs = e;
    }
    if let Some(b) = a.batch_size {
        cfg.train.batch_size = b;
    }
    if let Some(lr) = a.learning_rate {
        cfg.train.learning_rate = lr;
    }
    match (a.prior, a.lambda) {
        (Some(m), l) => {
            let lambda = l.or(cfg.prior.as_ref().map(|p| p.lambda)).unwrap_or(1.0);
            cfg.prior = Some(PriorConfig::gini(parse_prior_method(&m)?, lambda));
        }
        (None, Some(l)) => match cfg.prior.as_mut() {
            Some(p) => p.lambda = l,
            None => return Err(Failure::Usage("--lambda needs a prior (--prior)".into())),
        },
        (None, None) => {}
    }
    cfg.train.seed = cfg.seed;

    cfg.data.validate()?;
    usage(cfg.train.validate())?;
    if !(0.0..1.0).contains(&cfg.validation_fraction) {
        return Err(Failure::Usage("validation_fraction must be in [0, 1)".into()));
    }
    if cfg.hidden.contains(&0) || cfg.output_dim == 0 {
        return Err(Failure::Usage("layer widths must be positive".into()));
    }
    let dir = start(&a.common, "train", &cfg)?;

    let data = cfg.data.load(cfg.seed)?;
    let spec = NetworkSpec::mlp(data.n_features(), &cfg.hidden, cfg.output_dim, cfg.bias);
    let net = Network::init(spec, cfg.seed)?;
    if let Some(p) = &cfg.prior {
        usage(p.validate(&net.classify_homogeneity(), data.n_features()))?;
    }
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut rng::stream(cfg.seed, &[rng::tag("cli-split")]));
    let n_val = (cfg.validation_fraction * data.len() as f64).round() as usize;
    let validation = (n_val > 0).then(|| data.subset(&order[..n_val])).transpose()?;
    let train_set = data.subset(&order[n_val..])?;

    let outcome = train(&net, &train_set, &cfg.train, cfg.prior.as_ref(), validation.as_ref())?;
    outcome.network.save(&dir.file("network.json"))?;
    let rows: Vec<Vec<String>> = outcome
        .epochs
        .iter()
        .map(|e| vec![e.epoch.to_string(), f(e.train_loss), f(e.task_loss), opt(e.prior), opt(e.val_loss), opt(e.val_auc)])
        .collect();
    dir.write_csv("epochs.csv", &["epoch", "train_loss", "task_loss", "prior", "val_loss", "val_auc"], &rows)?;
    let last = outcome.epochs.last();
    dir.write_json(
        "summary.json",
        &json!({
            "seed": cfg.seed,
            "train_rows": train_set.len(),
            "validation_rows": n_val,
            "parameters": outcome.network.param_count(),
            "homogeneous": outcome.network.classify_homogeneity().is_homogeneous(),
            "final_train_loss": last.map(|e| e.train_loss),
            "final_val_auc": last.and_then(|e| e.val_auc),
        }),
    )?;
    if let Some(e) = last {
        println!("epoch {}: train loss {:.4}, validation AUC {}", e.epoch, e.train_loss, opt(e.val_auc));
    }
    finish(&dir)
}

// ---- attribute ----

#[derive(Args, Debug)]
struct AttributeArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    data: DataArgs,
    /// Network file written by `train`
    #[arg(long)]
    model: Option<PathBuf>,
    /// Methods, comma separated (grad, ixg, ig@128, eg@32, xg, rrr, random)
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<String>>,
    /// Rows to attribute
    #[arg(long)]
    rows: Option<usize>,
    /// Calls averaged per timing
    #[arg(long)]
    timing_calls: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct AttributeRun {
    seed: u64,
    model: PathBuf,
    methods: Vec<String>,
    rows: usize,
    /// Rows Expected Gradients draws references from.
    background_size: usize,
    timing_calls: usize,
    timing_rows: usize,
    data: DataConfig,
}

impl Default for AttributeRun {
    fn default() -> Self {
        Self {
            seed: 0,
            model: PathBuf::new(),
            methods: ["grad", "ixg", "ig@128", "eg@32", "xg"].map(String::from).to_vec(),
            rows: 100,
            background_size: 100,
            timing_calls: 100,
            timing_rows: 32,
            data: DataConfig::default(),
        }
    }
}

fn file_label(choice: MethodChoice) -> String {
    choice.to_string().replace('@', "-")
}

fn attribute_cmd(a: AttributeArgs) -> Outcome {
    let mut cfg: AttributeRun = load(a.common.config.as_deref())?;
    a.data.apply(&mut cfg.data);
    if let Some(s) = a.common.seed {
        cfg.seed = s;
    }
    if let Some(m) = a.model {
        cfg.model = m;
    }
    if let Some(m) = a.methods {
        cfg.methods = m;
    }
    if let Some(r) = a.rows {
        cfg.rows = r;
    }
    if let Some(c) = a.timing_calls {
        cfg.timing_calls = c;
    }
    let methods = parse_methods(&cfg.methods)?;
    require_model(&cfg.model)?;
    cfg.data.validate()?;
    if cfg.rows == 0 || cfg.timing_calls == 0 || cfg.timing_rows == 0 || cfg.background_size == 0 {
        return Err(Failure::Usage("rows, background_size and timing counts must be positive".into()));
    }
    let model = load_model(&cfg.model)?;
    let dir = start(&a.common, "attribute", &cfg)?;

    let data = cfg.data.load(cfg.seed)?;
    check_width(&model, data.n_features())?;
    let eval = head(&data, cfg.rows)?;
    let tgt = targets(&model, &eval)?;
    let opts = BatchOptions {
        background: Some(sample_rows(&data, cfg.background_size, cfg.seed)?.features().clone()),
        seed: cfg.seed,
        ..Default::default()
    };
    let timing_set = head(&eval, cfg.timing_rows)?;
    let mut skipped = Vec::new();
    let mut timings = serde_json::Map::new();
    for &choice in &methods {
        let values = match attribute_batch(&model, eval.features(), &tgt, choice, &opts) {
            Err(Error::NotHomogeneous(reasons)) => {
                skipped.push(json!({ "method": choice.to_string(), "reason": reasons.join("; ") }));
                println!("{choice}: not applicable ({})", reasons.join("; "));
                continue;
            }
            r => r?,
        };
        let n = eval.n_features();
        let records: Vec<AttributionRecord> = values
            .data()
            .chunks(n)
            .enumerate()
            .map(|(i, row)| AttributionRecord {
                input_id: i,
                method: choice.method,
                target: tgt[i],
                baseline: None,
                steps: choice.steps,
                values: row.to_vec(),
            })
            .collect();
        let file = std::fs::File::create(dir.file(&format!("attributions-{}.csv", file_label(choice))))?;
        write_csv(file, &records)?;
        let t = mean_call_time(&model, timing_set.features(), &tgt[..timing_set.len()], choice, &opts, cfg.timing_calls)?;
        println!("{choice}: mean {:.3e} s per call over {} rows", t.as_secs_f64(), timing_set.len());
        timings.insert(
            choice.to_string(),
            json!({ "mean_seconds": t.as_secs_f64(), "calls": cfg.timing_calls, "rows": timing_set.len() }),
        );
    }
    // Wall-clock timings vary between runs, so they live apart from the results.
    dir.write_json("timing.json", &timings)?;
    dir.write_json("summary.json", &json!({ "rows": eval.len(), "skipped": skipped }))?;
    finish(&dir)
}

// ---- axioms ----

#[derive(Args, Debug)]
struct AxiomsArgs {
    #[command(flatten)]
    common: Common,
    /// Methods, comma separated
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<String>>,
    /// Randomized trials per check
    #[arg(long)]
    trials: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct AxiomsRun {
    seed: u64,
    trials: usize,
    methods: Vec<String>,
}

impl Default for AxiomsRun {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            trials: DEFAULT_TRIALS,
            methods: TABLE_METHODS.map(String::from).to_vec(),
        }
    }
}

fn axioms_cmd(a: AxiomsArgs) -> Outcome {
    let mut cfg: AxiomsRun = load(a.common.config.as_deref())?;
    if let Some(s) = a.common.seed {
        cfg.seed = s;
    }
    if let Some(m) = a.methods {
        cfg.methods = m;
    }
    if let Some(t) = a.trials {
        cfg.trials = t;
    }
    let methods = parse_methods(&cfg.methods)?;
    if cfg.trials == 0 {
        return Err(Failure::Usage("trials must be at least 1".into()));
    }
    let dir = start(&a.common, "axioms", &cfg)?;
    let suite = run_suite(&methods, cfg.trials, cfg.seed)?;
    let text = suite.to_text();
    dir.write("table.txt", &text)?;
    dir.write_json("report.json", &suite)?;
    print!("{text}");
    finish(&dir)?;
    let bad: Vec<String> = suite.mismatches().iter().map(|r| format!("{} {}", r.method, r.axiom)).collect();
    if bad.is_empty() {
        Ok(())
    } else {
        Err(Failure::Check(format!("cells disagree with the reference table: {}", bad.join(", "))))
    }
}

// ---- metrics ----

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
enum MaskChoice {
    /// Replace masked features with their dataset mean
    Mean,
    /// Replace masked features with zero
    Zero,
}

#[derive(Args, Debug)]
struct MetricsArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<String>>,
    #[arg(long)]
    rows: Option<usize>,
    #[arg(long, value_enum)]
    mask: Option<MaskChoice>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct MetricsRun {
    seed: u64,
    model: PathBuf,
    methods: Vec<String>,
    rows: usize,
    mask: MaskChoice,
    fractions: Vec<f64>,
    data: DataConfig,
}

impl Default for MetricsRun {
    fn default() -> Self {
        Self {
            seed: 0,
            model: PathBuf::new(),
            methods: ["xg", "ig@128", "grad", "random"].map(String::from).to_vec(),
            rows: 200,
            mask: MaskChoice::Mean,
            fractions: default_fractions(),
            data: DataConfig::default(),
        }
    }
}

fn metrics_cmd(a: MetricsArgs) -> Outcome {
    let mut cfg: MetricsRun = load(a.common.config.as_deref())?;
    a.data.apply(&mut cfg.data);
    if let Some(s) = a.common.seed {
        cfg.seed = s;
    }
    if let Some(m) = a.model {
        cfg.model = m;
    }
    if let Some(m) = a.methods {
        cfg.methods = m;
    }
    if let Some(r) = a.rows {
        cfg.rows = r;
    }
    if let Some(m) = a.mask {
        cfg.mask = m;
    }
    let methods = parse_methods(&cfg.methods)?;
    require_model(&cfg.model)?;
    cfg.data.validate()?;
    if cfg.rows == 0 {
        return Err(Failure::Usage("rows must be positive".into()));
    }
    if cfg.fractions.is_empty() || cfg.fractions.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Failure::Usage("fractions must be nonempty and strictly increasing".into()));
    }
    let model = load_model(&cfg.model)?;
    let dir = start(&a.common, "metrics", &cfg)?;

    let data = cfg.data.load(cfg.seed)?;
    check_width(&model, data.n_features())?;
    let eval = head(&data, cfg.rows)?;
    let tgt = targets(&model, &eval)?;
    let mask = match cfg.mask {
        MaskChoice::Mean => MaskFn::mean_substitution(&data),
        MaskChoice::Zero => MaskFn::zero(data.n_features()),
    };
    let input = MetricInput {
        model: &model,
        inputs: eval.features(),
        targets: &tgt,
        labels: eval.labels(),
        mask: &mask,
    };
    let opts = BatchOptions {
        background: Some(sample_rows(&data, 100, cfg.seed)?.features().clone()),
        seed: cfg.seed,
        ..Default::default()
    };
    let table = usage(benchmark_table(&input, &methods, &opts, &cfg.fractions))?;
    table.write_csv(std::fs::File::create(dir.file("curves.csv"))?)?;
    let text = table.to_text();
    dir.write("table.txt", &text)?;
    dir.write_json("results.json", &table)?;
    print!("{text}");
    finish(&dir)
}

// ---- sparsity-bench ----

#[derive(Args, Debug)]
struct SparsityArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long)]
    train_size: Option<usize>,
    #[arg(long)]
    validation_size: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    /// Expected Gradients reference counts, comma separated
    #[arg(long, value_delimiter = ',')]
    eg_references: Option<Vec<usize>>,
    /// Also run the log-gradient prior
    #[arg(long)]
    include_rrr: bool,
    #[arg(long)]
    epochs: Option<usize>,
    /// Synthetic sample count
    #[arg(long)]
    samples: Option<usize>,
}

fn sparsity_cmd(a: SparsityArgs) -> Outcome {
    let mut cfg: SparsityBench = load(a.common.config.as_deref())?;
    if let Some(s) = a.common.seed {
        cfg.seed = s;
    }
    if let Some(r) = a.repeats {
        cfg.repeats = r;
    }
    if let Some(t) = a.train_size {
        cfg.train_size = t;
    }
    if let Some(v) = a.validation_size {
        cfg.validation_size = v;
    }
    if let Some(l) = a.lambda {
        cfg.lambda = l;
    }
    if let Some(k) = a.eg_references {
        cfg.eg_references = k;
    }
    cfg.include_rrr |= a.include_rrr;
    if let Some(e) = a.epochs {
        cfg.train.epochs = e;
    }
    if let Some(n) = a.samples {
        cfg.generator.n_samples = n;
    }
    usage(cfg.validate())?;
    if cfg.train_size + cfg.validation_size > cfg.generator.n_samples {
        return Err(Failure::Usage(format!(
            "train_size + validation_size exceeds the {} generated samples",
            cfg.generator.n_samples
        )));
    }
    let dir = start(&a.common, "sparsity-bench", &cfg)?;
    let summary = cfg.run()?;
    let rows: Vec<Vec<String>> = summary
        .rows
        .iter()
        .map(|r| vec![r.config.clone(), r.repeat.to_string(), f(r.roc_auc)])
        .collect();
    dir.write_csv("results.csv", &["config", "repeat", "roc_auc"], &rows)?;
    let rows: Vec<Vec<String>> = summary
        .configs
        .iter()
        .map(|c| vec![c.config.clone(), c.runs.to_string(), f(c.mean), f(c.sem), f(c.two_sem)])
        .collect();
    dir.write_csv("summary.csv", &["config", "runs", "mean", "sem", "two_sem"], &rows)?;
    dir.write_json("summary.json", &summary.configs)?;
    for c in &summary.configs {
        println!("{:<26} {:.4} ± {:.4}", c.config, c.mean, c.two_sem);
    }
    finish(&dir)
}

// ---- ig-convergence ----

#[derive(Args, Debug)]
struct ConvergenceArgs {
    #[command(flatten)]
    common: Common,
    /// Network file; a random biased MLP when absent
    #[arg(long)]
    model: Option<PathBuf>,
    /// Number of random inputs
    #[arg(long)]
    inputs: Option<usize>,
    #[arg(long)]
    oracle_steps: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ConvergenceRun {
    seed: u64,
    model: Option<PathBuf>,
    input_dim: usize,
    hidden: Vec<usize>,
    /// Random biases are uniform in `[-bias_scale, bias_scale]`.
    bias_scale: f64,
    inputs: usize,
    steps: Vec<usize>,
    oracle_steps: usize,
}

impl Default for ConvergenceRun {
    fn default() -> Self {
        Self {
            seed: 0,
            model: None,
            input_dim: 16,
            hidden: vec![32, 32],
            bias_scale: 0.3,
            inputs: 20,
            steps: SWEEP_STEPS.to_vec(),
            oracle_steps: ORACLE_STEPS,
        }
    }
}

fn random_biased_mlp(cfg: &ConvergenceRun) -> Outcome<Network> {
    let spec = NetworkSpec::mlp(cfg.input_dim, &cfg.hidden, 1, true);
    let mut net = Network::init(spec, cfg.seed)?;
    let mut r = rng::stream(cfg.seed, &[rng::tag("cli-biases")]);
    for (name, t) in net.clone().params() {
        if name.ends_with("bias") {
            let values = (0..t.len()).map(|_| r.gen_range(-cfg.bias_scale..=cfg.bias_scale)).collect();
            *net.param_mut(name).expect("parameter exists") = Tensor::new(t.shape(), values)?;
        }
    }
    Ok(net)
}

fn convergence_cmd(a: ConvergenceArgs) -> Outcome {
    let mut cfg: ConvergenceRun = load(a.common.config.as_deref())?;
    if let Some(s) = a.common.seed {
        cfg.seed = s;
    }
    if let Some(m) = a.model {
        cfg.model = Some(m);
    }
    if let Some(n) = a.inputs {
        cfg.inputs = n;
    }
    if let Some(o) = a.oracle_steps {
        cfg.oracle_steps = o;
    }
    if let Some(m) = &cfg.model {
        require_file(m, "model")?;
    }
    if cfg.inputs == 0 || cfg.input_dim == 0 || cfg.hidden.contains(&0) {
        return Err(Failure::Usage("inputs, input_dim and hidden widths must be positive".into()));
    }
    if cfg.steps.is_empty() || cfg.steps.contains(&0) || cfg.oracle_steps == 0 {
        return Err(Failure::Usage("step counts must be positive".into()));
    }
    if !(cfg.bias_scale >= 0.0 && cfg.bias_scale.is_finite()) {
        return Err(Failure::Usage("bias_scale must be nonnegative".into()));
    }
    let model = match &cfg.model {
        Some(p) => load_model(p)?,
        None => random_biased_mlp(&cfg)?,
    };
    let dir = start(&a.common, "ig-convergence", &cfg)?;
    if cfg.model.is_none() {
        model.save(&dir.file("network.json"))?;
    }
    let n = model.spec().input_dim;
    let mut r = rng::stream(cfg.seed, &[rng::tag("cli-inputs")]);
    let xs = Tensor::new(&[cfg.inputs, n], (0..cfg.inputs * n).map(|_| r.gen_range(-1.0..1.0)).collect())?;
    let curve = ig_convergence(&model, &xs, &vec![0; cfg.inputs], &BatchOptions::default(), &cfg.steps, cfg.oracle_steps)?;
    let rows: Vec<Vec<String>> = curve.iter().map(|p| vec![p.steps.to_string(), f(p.mean_abs_diff)]).collect();
    dir.write_csv("curve.csv", &["steps", "mean_abs_diff"], &rows)?;
    let monotone = curve.windows(2).all(|w| w[1].mean_abs_diff <= w[0].mean_abs_diff);
    dir.write_json("summary.json", &json!({ "oracle_steps": cfg.oracle_steps, "monotone_nonincreasing": monotone }))?;
    for p in &curve {
        println!("{:>5} steps  {:.3e}", p.steps, p.mean_abs_diff);
    }
    finish(&dir)
}

// ---- contrast-probe ----

#[derive(Args, Debug)]
struct ContrastArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    model: Option<PathBuf>,
    /// Contrast factors, comma separated
    #[arg(long, value_delimiter = ',')]
    alphas: Option<Vec<f64>>,
    #[arg(long)]
    rows: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ContrastRun {
    seed: u64,
    model: PathBuf,
    alphas: Vec<f64>,
    rows: usize,
    data: DataConfig,
}

impl Default for ContrastRun {
    fn default() -> Self {
        Self {
            seed: 0,
            model: PathBuf::new(),
            alphas: vec![0.1, 0.3, 1.0, 3.0, 10.0],
            rows: 1000,
            data: DataConfig::default(),
        }
    }
}

fn contrast_cmd(a: ContrastArgs) -> Outcome {
    let mut cfg: ContrastRun = load(a.common.config.as_deref())?;
    a.data.apply(&mut cfg.data);
    if let Some(s) = a.common.seed {
        cfg.seed = s;
    }
    if let Some(m) = a.model {
        cfg.model = m;
    }
    if let Some(al) = a.alphas {
        cfg.alphas = al;
    }
    if let Some(r) = a.rows {
        cfg.rows = r;
    }
    require_model(&cfg.model)?;
    cfg.data.validate()?;
    if cfg.alphas.is_empty() || cfg.alphas.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
        return Err(Failure::Usage("contrast factors must be positive".into()));
    }
    if cfg.rows == 0 {
        return Err(Failure::Usage("rows must be positive".into()));
    }
    let model = load_model(&cfg.model)?;
    let dir = start(&a.common, "contrast-probe", &cfg)?;

    let data = cfg.data.load(cfg.seed)?;
    check_width(&model, data.n_features())?;
    let eval = head(&data, cfg.rows)?;
    let points = contrast_equivariance_probe(&model, &eval, &cfg.alphas)?;
    let rows: Vec<Vec<String>> = points.iter().map(|p| vec![f(p.alpha), f(p.accuracy)]).collect();
    dir.write_csv("probe.csv", &["alpha", "accuracy"], &rows)?;
    let constant = points.iter().all(|p| p.accuracy == points[0].accuracy);
    dir.write_json(
        "summary.json",
        &json!({
            "homogeneous": model.classify_homogeneity().is_homogeneous(),
            "constant_accuracy": constant,
        }),
    )?;
    for p in &points {
        println!("alpha {:>8}  accuracy {:.4}", p.alpha, p.accuracy);
    }
    finish(&dir)
}
