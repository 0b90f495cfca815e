//! Command implementations behind the `foolshap` binary.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use foolshap::attack::{
    amplitude_reduction, brute_force_attack, fool_shap_dataset, fool_shap_dataset_cached, genetic_attack, AttackConfig, AttackResult, Budget,
    BruteForceResult, GeneticConfig, GeneticResult,
};
use foolshap::data::{fit_toy_model, generate_toy, load_dataset_csv, split_by_sensitive, Dataset, GroupSplit, Schema, TOY_TARGET};
use foolshap::detection::{Detector, DetectionOutcome, Resampling};
use foolshap::model::{load_model_json, Model, ModelSpec};
use foolshap::rng::{child, sample_with_replacement};
use foolshap::shapley::{ConfidenceInterval, Explainer};

#[derive(Debug, Parser)]
#[command(name = "foolshap", version, about = "Shapley-value audits and background-sample manipulation")]
pub struct Cli {
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the toy hiring dataset, its schema and a fitted model.
    GenToy(GenToyArgs),
    /// Run the attack, optionally with baselines.
    Attack(AttackArgs),
    /// Run the audit's detector on the samples of an attack result.
    Detect(DetectArgs),
    /// Estimate the detector's false-positive rate on honest samples.
    Calibrate(CalibrateArgs),
    /// Global Shapley values with confidence intervals on honest samples.
    Gsv(GsvArgs),
}

#[derive(Debug, Args)]
pub struct GenToyArgs {
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub n: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Append this many independent standard-normal columns; the model
    /// gives them zero weight.
    #[arg(long, default_value_t = 0)]
    pub extra_noise: usize,
}

#[derive(Debug, Args, Clone, Default)]
pub struct DataArgs {
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Schema JSON; defaults to `<dataset stem>.schema.json` next to the CSV.
    #[arg(long)]
    pub schema: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Baseline {
    Brute,
    Genetic,
}

#[derive(Debug, Args, Default)]
pub struct AttackArgs {
    /// JSON experiment config; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub data: DataArgs,
    /// Feature to attack (default: the schema's sensitive column).
    #[arg(long)]
    pub sensitive: Option<String>,
    /// Attack several features jointly (comma separated).
    #[arg(long, value_delimiter = ',')]
    pub multi_sensitive: Option<Vec<String>>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub lambda_min: Option<f64>,
    #[arg(long)]
    pub lambda_max: Option<f64>,
    /// Number of points of the geometric λ grid.
    #[arg(long)]
    pub grid: Option<usize>,
    /// Explicit λ values (comma separated).
    #[arg(long, value_delimiter = ',')]
    pub lambda_grid: Option<Vec<f64>>,
    /// Detection replicates per λ.
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub baseline: Vec<Baseline>,
    /// Fixed number of brute-force draws instead of the time-matched budget.
    #[arg(long)]
    pub brute_draws: Option<usize>,
    #[arg(long)]
    pub genetic_iters: Option<usize>,
    /// Reuse (or create) a cached local-value grid at this path.
    #[arg(long)]
    pub cache: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// An `attack_result.json` whose `s0_prime`/`s1_prime` are audited.
    #[arg(long)]
    pub result: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 200)]
    pub m: usize,
    #[arg(long, default_value_t = 1000)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub without_replacement: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GsvArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = 100)]
    pub m: usize,
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneticSettings {
    pub iters: usize,
    pub pop: usize,
    pub mutation_rate: f64,
    pub crossover_prob: f64,
    pub patience: usize,
}

impl Default for GeneticSettings {
    fn default() -> Self {
        Self {
            iters: 400,
            pop: 32,
            mutation_rate: 0.1,
            crossover_prob: 0.5,
            patience: 10,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: Option<PathBuf>,
    pub schema: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub sensitive: Option<String>,
    pub multi_sensitive: Vec<String>,
    pub out: Option<PathBuf>,
    pub attack: AttackConfig,
    pub baselines: Vec<Baseline>,
    pub brute_draws: Option<usize>,
    pub genetic: GeneticSettings,
    pub cache: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let de = &mut serde_json::Deserializer::from_str(&text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let field = e.path().to_string();
            anyhow::anyhow!("config {} at `{field}`: {}", path.display(), e.inner())
        })
    }

    /// Starts from the config file (if any) and lets flags win.
    pub fn from_args(args: &AttackArgs) -> Result<Self> {
        let mut cfg = match &args.config {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        macro_rules! set {
            ($dst:expr, $src:expr) => {
                if let Some(v) = $src.clone() {
                    $dst = v;
                }
            };
        }
        set!(cfg.dataset, args.data.dataset.clone().map(Some));
        set!(cfg.schema, args.data.schema.clone().map(Some));
        set!(cfg.model, args.data.model.clone().map(Some));
        set!(cfg.sensitive, args.sensitive.clone().map(Some));
        set!(cfg.multi_sensitive, args.multi_sensitive);
        set!(cfg.out, args.out.clone().map(Some));
        set!(cfg.attack.m, args.m);
        set!(cfg.attack.tau, args.tau);
        set!(cfg.attack.alpha, args.alpha);
        set!(cfg.attack.lambda_min, args.lambda_min.map(Some));
        set!(cfg.attack.lambda_max, args.lambda_max.map(Some));
        set!(cfg.attack.grid_size, args.grid);
        set!(cfg.attack.lambda_grid, args.lambda_grid.clone().map(Some));
        set!(cfg.attack.detection_reps, args.reps);
        set!(cfg.attack.seed, args.seed);
        set!(cfg.brute_draws, args.brute_draws.map(Some));
        set!(cfg.genetic.iters, args.genetic_iters);
        set!(cfg.cache, args.cache.clone().map(Some));
        if !args.baseline.is_empty() {
            cfg.baselines = args.baseline.clone();
        }
        Ok(cfg)
    }
}

/// A dataset with its group split and model, ready for any command.
pub struct Loaded {
    pub dataset: Dataset,
    pub split: GroupSplit,
    pub model: ModelSpec,
}

fn required<'a>(v: &'a Option<PathBuf>, name: &str) -> Result<&'a PathBuf> {
    v.as_ref().with_context(|| format!("missing `{name}` (flag --{name} or config field)"))
}

fn default_schema(dataset: &Path) -> PathBuf {
    let stem = dataset.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    dataset.with_file_name(format!("{stem}.schema.json"))
}

pub fn load_inputs(dataset: &Option<PathBuf>, schema: &Option<PathBuf>, model: &Option<PathBuf>) -> Result<Loaded> {
    let dataset_path = required(dataset, "dataset")?;
    let schema_path = schema.clone().unwrap_or_else(|| default_schema(dataset_path));
    let schema = Schema::load(&schema_path).with_context(|| format!("schema {}", schema_path.display()))?;
    let dataset = load_dataset_csv(dataset_path, &schema).with_context(|| format!("dataset {}", dataset_path.display()))?;
    let model_path = required(model, "model")?;
    let model = load_model_json(model_path).with_context(|| format!("model {}", model_path.display()))?;
    if model.min_features() > dataset.d() {
        bail!(
            "model {} reads {} features but the dataset has {}",
            model_path.display(),
            model.min_features(),
            dataset.d()
        );
    }
    let split = split_by_sensitive(&dataset)?;
    if split.d0.is_empty() || split.d1.is_empty() {
        bail!("both sensitive groups must be present in the dataset");
    }
    Ok(Loaded { dataset, split, model })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn cmd_gen_toy(n: usize, seed: u64, extra_noise: usize, out: &Path) -> Result<()> {
    if n == 0 {
        bail!("n must be positive");
    }
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let base = generate_toy(n, seed)?;
    let model = fit_toy_model(&base)?.padded(base.d() + extra_noise)?;
    let ds = if extra_noise > 0 {
        base.with_noise_columns(extra_noise, seed)
    } else {
        base
    };
    ds.write_csv(out.join("toy.csv"), TOY_TARGET)?;
    Schema {
        sensitive: ds.feature_names[ds.sensitive_index].clone(),
        categorical: vec![],
        target: TOY_TARGET.into(),
    }
    .save(out.join("toy.schema.json"))?;
    model.save(out.join("model.json"))?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct BruteReport {
    pub budget: String,
    pub draws: usize,
    pub phi: f64,
    pub amplitude_reduction: f64,
    pub s1_prime: Vec<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GeneticReport {
    pub phi: f64,
    pub amplitude_reduction: f64,
    pub detected: bool,
    pub early_stopped: bool,
    pub iterations: usize,
    pub trace: Vec<foolshap::attack::GenerationTrace>,
}

pub struct AttackOutputs {
    pub result: AttackResult,
    pub brute: Option<BruteForceResult>,
    pub genetic: Option<GeneticResult>,
}

fn feature_index(ds: &Dataset, name: &str) -> Result<usize> {
    ds.feature_index(name)
        .with_context(|| format!("unknown feature `{name}`; columns are {:?}", ds.feature_names))
}

pub fn cmd_attack(cfg: &ExperimentConfig) -> Result<AttackOutputs> {
    let loaded = load_inputs(&cfg.dataset, &cfg.schema, &cfg.model)?;
    let out = required(&cfg.out, "out")?;
    let ds = &loaded.dataset;
    let sensitive: Vec<usize> = if !cfg.multi_sensitive.is_empty() {
        cfg.multi_sensitive.iter().map(|n| feature_index(ds, n)).collect::<Result<_>>()?
    } else if let Some(name) = &cfg.sensitive {
        vec![feature_index(ds, name)?]
    } else {
        vec![ds.sensitive_index]
    };

    let result = match &cfg.cache {
        Some(path) => fool_shap_dataset_cached(&loaded.model, ds, &loaded.split, &sensitive, &cfg.attack, path)?,
        None => fool_shap_dataset(&loaded.model, ds, &loaded.split, &sensitive, &cfg.attack)?,
    };
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    fs::write(out.join("attack_result.json"), result.to_json()?)?;
    result.write_trace_csv(out.join("lambda_trace.csv"), &ds.feature_names)?;
    result.write_gsv_csv(out.join("gsv_before_after.csv"))?;
    result.weights.write_csv(out.join("weights.csv"), &result.d1_ids)?;
    write_ecdf(&out.join("ecdf.csv"), &loaded, &result)?;

    let s = sensitive[0];
    let fore = ds.select(&result.s0_prime);
    let d1 = ds.select(&loaded.split.d1);
    let mut brute = None;
    let mut genetic = None;
    for baseline in &cfg.baselines {
        match baseline {
            Baseline::Brute => {
                let budget = match cfg.brute_draws {
                    Some(n) => Budget::Draws(n),
                    None => Budget::Time(result.timing.search),
                };
                let mut rng = child(cfg.attack.seed, 0xB0);
                let br = brute_force_attack(&loaded.model, &fore, &d1, s, cfg.attack.m, budget, &mut rng)?;
                let report = BruteReport {
                    budget: match budget {
                        Budget::Draws(n) => format!("{n} draws"),
                        Budget::Time(t) => format!("{:.3} s (matched)", t.as_secs_f64()),
                    },
                    draws: br.draws,
                    phi: br.phi,
                    amplitude_reduction: amplitude_reduction(result.phi_before, br.phi),
                    s1_prime: br.s1_prime.iter().map(|&j| loaded.split.d1[j]).collect(),
                };
                write_json(&out.join("baseline_brute.json"), &report)?;
                brute = Some(br);
            }
            Baseline::Genetic => {
                let g = run_genetic(&loaded, &fore, s, cfg)?;
                let report = GeneticReport {
                    phi: g.phi,
                    amplitude_reduction: amplitude_reduction(result.phi_before, g.phi),
                    detected: g.detected,
                    early_stopped: g.early_stopped,
                    iterations: g.iterations,
                    trace: g.trace.clone(),
                };
                write_json(&out.join("baseline_genetic.json"), &report)?;
                genetic = Some(g);
            }
        }
    }
    Ok(AttackOutputs { result, brute, genetic })
}

/// The genetic baseline seeded with an honest background draw and judged
/// by the same detector as the attack.
pub fn run_genetic(
    loaded: &Loaded,
    fore: &[Vec<f64>],
    s: usize,
    cfg: &ExperimentConfig,
) -> Result<GeneticResult> {
    let ds = &loaded.dataset;
    let d1 = ds.select(&loaded.split.d1);
    let f = &loaded.model;
    let f_d0: Vec<f64> = f.predict_many(&ds.select(&loaded.split.d0));
    let f_d1: Vec<f64> = f.predict_many(&d1);
    let f_s0p: Vec<f64> = f.predict_many(fore);
    let detector = Detector::new(f_d0, f_d1, cfg.attack.alpha, cfg.attack.m)?.with_resampling(cfg.attack.resampling);

    let mut rng = child(cfg.attack.seed, 0x6E);
    let init: Vec<Vec<f64>> = sample_with_replacement(&mut rng, d1.len(), cfg.attack.m)
        .into_iter()
        .map(|j| d1[j].clone())
        .collect();
    let mut gcfg = GeneticConfig::from_reference(&d1);
    gcfg.iters = cfg.genetic.iters;
    gcfg.pop = cfg.genetic.pop;
    gcfg.mutation_rate = cfg.genetic.mutation_rate;
    gcfg.crossover_prob = cfg.genetic.crossover_prob;
    gcfg.patience = cfg.genetic.patience;

    let mut audit_rng = child(cfg.attack.seed, 0x6F);
    let check = |rows: &[Vec<f64>]| -> foolshap::Result<bool> {
        let f_s1p = f.predict_many(rows);
        detector.detect(&f_s0p, &f_s1p, &mut audit_rng)
    };
    Ok(genetic_attack(f, fore, &init, s, &gcfg, check, &mut rng)?)
}

/// Empirical CDFs of the model outputs on the groups and the submitted
/// samples, in tidy form.
fn write_ecdf(path: &Path, loaded: &Loaded, result: &AttackResult) -> Result<()> {
    let ds = &loaded.dataset;
    let f = &loaded.model;
    let sets: [(&str, &str, &[usize]); 4] = [
        ("0", "data", &loaded.split.d0),
        ("1", "data", &loaded.split.d1),
        ("0", "submitted", &result.s0_prime),
        ("1", "submitted", &result.s1_prime),
    ];
    let mut w = std::io::BufWriter::new(fs::File::create(path)?);
    use std::io::Write;
    writeln!(w, "group,source,value,ecdf")?;
    for (group, source, ids) in sets {
        let mut vals: Vec<f64> = ids.iter().map(|&i| f.predict(&ds.rows[i])).collect();
        vals.sort_by(f64::total_cmp);
        let n = vals.len() as f64;
        for (k, v) in vals.iter().enumerate() {
            writeln!(w, "{group},{source},{v},{}", (k + 1) as f64 / n)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct DetectReport {
    pub alpha: f64,
    pub m: usize,
    pub outcome: DetectionOutcome,
    pub detected: bool,
}

pub fn cmd_detect(args: &DetectArgs) -> Result<DetectReport> {
    let loaded = load_inputs(&args.data.dataset, &args.data.schema, &args.data.model)?;
    let text = fs::read_to_string(&args.result).with_context(|| format!("reading {}", args.result.display()))?;
    #[derive(Deserialize)]
    struct Samples {
        s0_prime: Vec<usize>,
        s1_prime: Vec<usize>,
    }
    let samples: Samples = serde_json::from_str(&text).with_context(|| format!("parsing {}", args.result.display()))?;
    let ds = &loaded.dataset;
    for &id in samples.s0_prime.iter().chain(&samples.s1_prime) {
        if id >= ds.len() {
            bail!("sample id {id} is out of range for {} rows", ds.len());
        }
    }
    if samples.s0_prime.len() != samples.s1_prime.len() || samples.s0_prime.is_empty() {
        bail!("submitted samples must be non-empty and of equal size");
    }
    let m = samples.s0_prime.len();
    let f = &loaded.model;
    let f_d0 = f.predict_many(&ds.select(&loaded.split.d0));
    let f_d1 = f.predict_many(&ds.select(&loaded.split.d1));
    let f_s0p = f.predict_many(&ds.select(&samples.s0_prime));
    let f_s1p = f.predict_many(&ds.select(&samples.s1_prime));
    let detector = Detector::new(f_d0, f_d1, args.alpha, m)?;
    let mut rng = child(args.seed, 0);
    let outcome = detector.evaluate(&f_s0p, &f_s1p, &mut rng)?;
    let report = DetectReport {
        alpha: args.alpha,
        m,
        detected: outcome.detected(),
        outcome,
    };
    if let Some(out) = &args.out {
        fs::create_dir_all(out)?;
        write_json(&out.join("detection.json"), &report)?;
    }
    Ok(report)
}

pub fn cmd_calibrate(args: &CalibrateArgs) -> Result<foolshap::detection::CalibrationReport> {
    let loaded = load_inputs(&args.data.dataset, &args.data.schema, &args.data.model)?;
    let ds = &loaded.dataset;
    let f = &loaded.model;
    let f_d0 = f.predict_many(&ds.select(&loaded.split.d0));
    let f_d1 = f.predict_many(&ds.select(&loaded.split.d1));
    let resampling = if args.without_replacement {
        Resampling::WithoutReplacement
    } else {
        Resampling::WithReplacement
    };
    let report = Detector::new(f_d0, f_d1, args.alpha, args.m)?
        .with_resampling(resampling)
        .calibrate(args.reps, args.seed)?;
    if let Some(out) = &args.out {
        fs::create_dir_all(out)?;
        write_json(&out.join("calibration.json"), &report)?;
    }
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct GsvRow {
    pub feature: String,
    pub gsv: f64,
    pub interval: ConfidenceInterval,
}

#[derive(Debug, Clone, Serialize)]
pub struct GsvReport {
    pub m: usize,
    pub delta: f64,
    pub demographic_parity_samples: f64,
    pub features: Vec<GsvRow>,
}

pub fn cmd_gsv(args: &GsvArgs) -> Result<GsvReport> {
    let loaded = load_inputs(&args.data.dataset, &args.data.schema, &args.data.model)?;
    let ds = &loaded.dataset;
    let m = args.m;
    if m > loaded.split.d0.len() || m > loaded.split.d1.len() {
        bail!("m = {m} exceeds a group size {:?}", loaded.split.sizes());
    }
    let mut rng = child(args.seed, 0);
    let pick = |ids: &[usize], rng: &mut foolshap::rng::SeededRng| -> Vec<Vec<f64>> {
        foolshap::rng::sample_without_replacement(rng, ids.len(), m)
            .into_iter()
            .map(|k| ds.rows[ids[k]].clone())
            .collect()
    };
    let s0 = pick(&loaded.split.d0, &mut rng);
    let s1 = pick(&loaded.split.d1, &mut rng);
    let mut explainer = Explainer::new(&loaded.model).with_feature_names(ds.feature_names.clone());
    let lsv = explainer.lsv_matrix(&s0, &s1)?;
    let gsv = lsv.global();
    let mut features = Vec::with_capacity(ds.d());
    for (k, name) in ds.feature_names.iter().enumerate() {
        let interval = explainer.confidence_interval(&s0, &s1, k, args.delta)?;
        features.push(GsvRow {
            feature: name.clone(),
            gsv: gsv[k],
            interval,
        });
    }
    let f = &loaded.model;
    let mean = |rows: &[Vec<f64>]| rows.iter().map(|r| f.predict(r)).sum::<f64>() / rows.len() as f64;
    let report = GsvReport {
        m,
        delta: args.delta,
        demographic_parity_samples: mean(&s0) - mean(&s1),
        features,
    };
    if let Some(out) = &args.out {
        fs::create_dir_all(out)?;
        write_json(&out.join("gsv.json"), &report)?;
    }
    Ok(report)
}

/// Prints to stdout; a closed pipe (`| head`) is not an error.
fn emit(text: &str) -> Result<()> {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{text}").and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

pub fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    match cli.command {
        Command::GenToy(a) => cmd_gen_toy(a.n as usize, a.seed, a.extra_noise, &a.out),
        Command::Attack(a) => {
            let cfg = ExperimentConfig::from_args(&a)?;
            let out = cmd_attack(&cfg)?;
            let r = &out.result;
            emit(&format!(
                "phi_before {:.6} phi_after {:.6} reduction {:.3} detection_rate {:.2} accepted {}",
                r.phi_before, r.phi_after, r.amplitude_reduction, r.detection_rate, r.accepted
            ))
        }
        Command::Detect(a) => {
            let report = cmd_detect(&a)?;
            emit(&serde_json::to_string_pretty(&report)?)
        }
        Command::Calibrate(a) => {
            let report = cmd_calibrate(&a)?;
            emit(&serde_json::to_string_pretty(&report)?)
        }
        Command::Gsv(a) => {
            let report = cmd_gsv(&a)?;
            emit(&serde_json::to_string_pretty(&report)?)
        }
    }
}
