//! The background-reweighting attack and the brute-force and genetic
//! baselines it is compared against.

use std::io::Write;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tracing::{debug, info};

use crate::cache::{load_lsv, save_lsv, CacheMeta};
use crate::data::{Dataset, GroupSplit};
use crate::detection::{Detector, Resampling};
use crate::error::{Error, Result};
use crate::model::{Model, ModelSpec};
use crate::rng::{child, derive_seed, sample_with_replacement, sample_without_replacement, Categorical};
use crate::shapley::{AttributionVector, CoefficientMatrix, Explainer};
use crate::transport::{aggregate_costs, weights_for_costs, BackgroundWeights, WeightOptions};

// rng streams derived from the attack seed
const STREAM_FOREGROUND: u64 = 0;
const STREAM_FINAL_DRAW: u64 = 1;
const STREAM_REMEASURE: u64 = 2;
const STREAM_LAMBDA: u64 = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AttackConfig {
    pub m: usize,
    /// Defaults to `1e-3·λ₀` with the scale heuristic `λ₀`.
    pub lambda_min: Option<f64>,
    /// Defaults to `1e3·λ₀`.
    pub lambda_max: Option<f64>,
    pub grid_size: usize,
    /// Explicit grid; overrides the geometric one.
    pub lambda_grid: Option<Vec<f64>>,
    pub tau: f64,
    pub alpha: f64,
    pub detection_reps: usize,
    pub seed: u64,
    pub weights: WeightOptions,
    pub resampling: Resampling,
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            m: 200,
            lambda_min: None,
            lambda_max: None,
            grid_size: 20,
            lambda_grid: None,
            tau: 0.1,
            alpha: 0.05,
            detection_reps: 100,
            seed: 0,
            weights: WeightOptions::default(),
            resampling: Resampling::WithReplacement,
        }
    }
}

impl AttackConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, msg: String| Err(Error::arg(format!("attack config `{field}`: {msg}")));
        if self.m == 0 {
            return bad("m", "must be positive".into());
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return bad("tau", format!("must lie in (0, 1), got {}", self.tau));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad("alpha", format!("must lie in (0, 1), got {}", self.alpha));
        }
        if self.detection_reps == 0 {
            return bad("detection_reps", "must be positive".into());
        }
        if self.grid_size == 0 {
            return bad("grid_size", "must be positive".into());
        }
        for (field, v) in [("lambda_min", self.lambda_min), ("lambda_max", self.lambda_max)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return bad(field, format!("must be positive and finite, got {v}"));
                }
            }
        }
        if let (Some(lo), Some(hi)) = (self.lambda_min, self.lambda_max) {
            if lo > hi {
                return bad("lambda_min", format!("{lo} exceeds lambda_max {hi}"));
            }
        }
        if let Some(grid) = &self.lambda_grid {
            if grid.is_empty() {
                return bad("lambda_grid", "must not be empty".into());
            }
            if let Some(v) = grid.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
                return bad("lambda_grid", format!("entries must be finite and non-negative, got {v}"));
            }
        }
        Ok(())
    }

    /// The λ values to try, largest first.
    pub fn grid(&self, lambda0: f64) -> Vec<f64> {
        let mut grid = match &self.lambda_grid {
            Some(g) => g.clone(),
            None => {
                let hi = self.lambda_max.unwrap_or(1e3 * lambda0);
                let lo = self.lambda_min.unwrap_or(1e-3 * lambda0).min(hi);
                geometric_grid(lo, hi, self.grid_size)
            }
        };
        grid.sort_by(|a, b| b.total_cmp(a));
        grid.dedup();
        grid
    }
}

/// `n` log-spaced points from `lo` to `hi` inclusive.
pub fn geometric_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 || lo == hi {
        return vec![hi];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|k| {
            if k == 0 {
                lo
            } else if k == n - 1 {
                hi
            } else {
                (a + (b - a) * k as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}

/// Mean of `|f_i − f_j|` over distinct pairs, in `O(n log n)`.
pub fn mean_pairwise_gap(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let total: f64 = v
        .iter()
        .enumerate()
        .map(|(k, x)| x * (2.0 * k as f64 - n as f64 + 1.0))
        .sum();
    total / (n * (n - 1) / 2) as f64
}

/// Scale at which the attribution term and the transport term are
/// comparable: `|mean(costs)| / mean pairwise |Δf|`, or 1 when either
/// vanishes.
pub fn lambda_scale(costs: &[f64], outputs: &[f64]) -> f64 {
    let num = (costs.iter().sum::<f64>() / costs.len().max(1) as f64).abs();
    let den = mean_pairwise_gap(outputs);
    if num > 0.0 && den > 0.0 {
        num / den
    } else {
        1.0
    }
}

pub fn amplitude_reduction(before: f64, after: f64) -> f64 {
    if before == 0.0 {
        0.0
    } else {
        1.0 - after.abs() / before.abs()
    }
}

/// One λ of the search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaTrace {
    pub lambda: f64,
    /// `Σ_s |weighted GSV_s|` over the attacked features.
    pub objective: f64,
    /// Weighted GSV of every feature.
    pub weighted_gsv: Vec<f64>,
    pub detections: usize,
    pub detection_rate: f64,
    pub wasserstein_cost: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackResult {
    pub accepted: bool,
    pub chosen_lambda: Option<f64>,
    pub sensitive: Vec<usize>,
    pub m: usize,
    pub tau: f64,
    pub alpha: f64,
    pub lambda_grid: Vec<f64>,
    pub weights: BackgroundWeights,
    /// Instance ids of the foreground and of the cherry-picked background.
    pub s0_prime: Vec<usize>,
    pub s1_prime: Vec<usize>,
    /// Ids of `D1`, aligned with `weights.omega`.
    pub d1_ids: Vec<usize>,
    /// Sensitive GSV with the uniform background, first attacked feature.
    pub phi_before: f64,
    /// Limit of the manipulated estimate, `Σ_j ω_j coeffs[j]`.
    pub phi_after: f64,
    /// The estimate the audit actually computes on `S0', S1'`.
    pub phi_after_sampled: f64,
    pub sensitive_before: Vec<f64>,
    pub sensitive_after: Vec<f64>,
    pub per_feature_gsv_before: AttributionVector,
    pub per_feature_gsv_after: AttributionVector,
    pub per_feature_gsv_after_sampled: AttributionVector,
    /// Measured on the final ω with fresh draws.
    pub detection_rate: f64,
    /// Measured when the chosen λ was accepted.
    pub acceptance_detection_rate: Option<f64>,
    pub amplitude_reduction: f64,
    pub trace: Vec<LambdaTrace>,
    #[serde(skip)]
    pub timing: AttackTiming,
}

/// Wall-clock durations, kept out of the serialized result so that it stays
/// reproducible.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AttackTiming {
    pub coefficients: Duration,
    pub search: Duration,
}

impl AttackResult {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn write_trace_csv(&self, path: impl AsRef<Path>, feature_names: &[String]) -> Result<()> {
        write_trace_csv(path, &self.trace, feature_names)
    }

    /// Per-feature GSV before, after (limit) and after (sampled).
    pub fn write_gsv_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["feature", "gsv_before", "gsv_after", "gsv_after_sampled"])?;
        let before = &self.per_feature_gsv_before;
        for k in 0..before.len() {
            w.write_record([
                before.feature_names[k].clone(),
                before.phi[k].to_string(),
                self.per_feature_gsv_after.phi[k].to_string(),
                self.per_feature_gsv_after_sampled.phi[k].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn write_trace_csv(path: impl AsRef<Path>, trace: &[LambdaTrace], feature_names: &[String]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    write!(out, "lambda,objective")?;
    for name in feature_names {
        write!(out, ",abs_gsv_{name}")?;
    }
    writeln!(out, ",detection_rate,wasserstein_cost,accepted")?;
    for t in trace {
        write!(out, "{},{}", t.lambda, t.objective)?;
        for g in &t.weighted_gsv {
            write!(out, ",{}", g.abs())?;
        }
        writeln!(out, ",{},{},{}", t.detection_rate, t.wasserstein_cost, t.accepted)?;
    }
    out.flush()?;
    Ok(())
}

fn objective(weighted: &[f64], sensitive: &[usize]) -> f64 {
    sensitive.iter().map(|&s| weighted[s].abs()).sum()
}

/// Fraction of `reps` draws `S1' ~ ω^M` that the detector flags.
/// Replicate `r` uses `child(seed, r)`.
pub fn detection_rate(detector: &Detector, f_s0p: &[f64], f_d1: &[f64], omega: &[f64], reps: usize, seed: u64) -> Result<f64> {
    Ok(detection_count(detector, f_s0p, f_d1, omega, reps, seed)? as f64 / reps as f64)
}

fn detection_count(detector: &Detector, f_s0p: &[f64], f_d1: &[f64], omega: &[f64], reps: usize, seed: u64) -> Result<usize> {
    if reps == 0 {
        return Err(Error::arg("detection rate needs at least one replicate"));
    }
    if omega.len() != f_d1.len() {
        return Err(Error::Dimension {
            expected: f_d1.len(),
            got: omega.len(),
        });
    }
    let cat = Categorical::new(omega).ok_or_else(|| Error::arg("background weights are not a distribution"))?;
    let mut hits = 0;
    for r in 0..reps {
        let mut rng = child(seed, r as u64);
        let f_s1p: Vec<f64> = cat.sample_n(&mut rng, detector.m).into_iter().map(|j| f_d1[j]).collect();
        hits += usize::from(detector.detect(f_s0p, &f_s1p, &mut rng)?);
    }
    Ok(hits)
}

/// Honest foreground draw: without replacement when `m ≤ n`.
pub fn draw_foreground<R: Rng + ?Sized>(rng: &mut R, n: usize, m: usize) -> Vec<usize> {
    if m <= n {
        sample_without_replacement(rng, n, m)
    } else {
        sample_with_replacement(rng, n, m)
    }
}

/// Everything the λ search needs, computed once.
struct Prepared {
    s0_local: Vec<usize>,
    f_s0p: Vec<f64>,
    f_d0: Vec<f64>,
    f_d1: Vec<f64>,
    coeffs: CoefficientMatrix,
    costs: Vec<f64>,
    feature_names: Option<Vec<String>>,
    coefficient_time: Duration,
}

fn check_groups(d0: &[Vec<f64>], d1: &[Vec<f64>], sensitive: &[usize]) -> Result<usize> {
    if d0.is_empty() || d1.is_empty() {
        return Err(Error::arg("both groups must be non-empty"));
    }
    let d = d0[0].len();
    for row in d0.iter().chain(d1) {
        if row.len() != d {
            return Err(Error::Dimension {
                expected: d,
                got: row.len(),
            });
        }
    }
    if sensitive.is_empty() {
        return Err(Error::arg("at least one sensitive feature is required"));
    }
    if let Some(&s) = sensitive.iter().find(|&&s| s >= d) {
        return Err(Error::Index { index: s, len: d });
    }
    Ok(d)
}

fn prepare<M, C>(
    f: &M,
    d0: &[Vec<f64>],
    d1: &[Vec<f64>],
    sensitive: &[usize],
    cfg: &AttackConfig,
    feature_names: Option<Vec<String>>,
    coefficients: C,
) -> Result<Prepared>
where
    M: Model + ?Sized,
    C: FnOnce(&[Vec<f64>], &[usize]) -> Result<CoefficientMatrix>,
{
    check_groups(d0, d1, sensitive)?;
    let mut rng = child(cfg.seed, STREAM_FOREGROUND);
    let s0_local = draw_foreground(&mut rng, d0.len(), cfg.m);
    let fore: Vec<Vec<f64>> = s0_local.iter().map(|&i| d0[i].clone()).collect();
    let f_d0 = f.predict_many(d0);
    let f_d1 = f.predict_many(d1);
    let f_s0p: Vec<f64> = s0_local.iter().map(|&i| f_d0[i]).collect();

    let start = Instant::now();
    let coeffs = coefficients(&fore, &s0_local)?;
    let coefficient_time = start.elapsed();
    debug!(seconds = coefficient_time.as_secs_f64(), "background coefficients computed");

    let slices: Vec<&[f64]> = sensitive.iter().map(|&s| coeffs.feature(s)).collect();
    let costs = aggregate_costs(&slices)?;
    Ok(Prepared {
        s0_local,
        f_s0p,
        f_d0,
        f_d1,
        coeffs,
        costs,
        feature_names,
        coefficient_time,
    })
}

/// The attack on explicit group rows. Instance ids in the result index into
/// `d0` and `d1`.
pub fn fool_shap<M: Model + ?Sized>(
    f: &M,
    d0: &[Vec<f64>],
    d1: &[Vec<f64>],
    sensitive: &[usize],
    cfg: &AttackConfig,
) -> Result<AttackResult> {
    cfg.validate()?;
    let direct = |fore: &[Vec<f64>], ids: &[usize]| Explainer::new(f).coefficient_matrix(fore, d1, ids.to_vec());
    let prep = prepare(f, d0, d1, sensitive, cfg, None, direct)?;
    search(prep, sensitive, cfg)
}

/// The attack on a dataset split; ids in the result are dataset row ids.
pub fn fool_shap_dataset<M: Model + ?Sized>(
    f: &M,
    ds: &Dataset,
    split: &GroupSplit,
    sensitive: &[usize],
    cfg: &AttackConfig,
) -> Result<AttackResult> {
    cfg.validate()?;
    let d0 = ds.select(&split.d0);
    let d1 = ds.select(&split.d1);
    let direct = |fore: &[Vec<f64>], ids: &[usize]| Explainer::new(f).coefficient_matrix(fore, &d1, ids.to_vec());
    let prep = prepare(f, &d0, &d1, sensitive, cfg, Some(ds.feature_names.clone()), direct)?;
    finish_dataset(prep, split, sensitive, cfg)
}

/// Like [`fool_shap_dataset`], but the local-value grid of `S0' × D1` is
/// read from `cache` when it was built for the same model and samples, and
/// written there otherwise.
pub fn fool_shap_dataset_cached(
    f: &ModelSpec,
    ds: &Dataset,
    split: &GroupSplit,
    sensitive: &[usize],
    cfg: &AttackConfig,
    cache: &Path,
) -> Result<AttackResult> {
    cfg.validate()?;
    let d0 = ds.select(&split.d0);
    let d1 = ds.select(&split.d1);
    let hash = f.hash();
    let cached = |fore: &[Vec<f64>], local: &[usize]| -> Result<CoefficientMatrix> {
        let fore_ids: Vec<usize> = local.iter().map(|&i| split.d0[i]).collect();
        if let Ok((lsv, meta)) = load_lsv(cache, &hash) {
            if meta.foreground_ids == fore_ids && meta.background_ids == split.d1 && meta.feature_names == ds.feature_names {
                info!(path = %cache.display(), "reusing cached local values");
                return Ok(CoefficientMatrix::from_lsv(&lsv, local.to_vec()));
            }
        }
        let lsv = Explainer::new(f).lsv_matrix(fore, &d1)?;
        let meta = CacheMeta {
            n_fore: lsv.n_fore,
            n_back: lsv.n_back,
            d: lsv.d,
            model_hash: hash.clone(),
            foreground_ids: fore_ids,
            background_ids: split.d1.clone(),
            feature_names: ds.feature_names.clone(),
        };
        save_lsv(cache, &lsv, &meta)?;
        Ok(CoefficientMatrix::from_lsv(&lsv, local.to_vec()))
    };
    let prep = prepare(f, &d0, &d1, sensitive, cfg, Some(ds.feature_names.clone()), cached)?;
    finish_dataset(prep, split, sensitive, cfg)
}

fn finish_dataset(prep: Prepared, split: &GroupSplit, sensitive: &[usize], cfg: &AttackConfig) -> Result<AttackResult> {
    let mut res = search(prep, sensitive, cfg)?;
    res.s0_prime = res.s0_prime.iter().map(|&i| split.d0[i]).collect();
    res.s1_prime = res.s1_prime.iter().map(|&j| split.d1[j]).collect();
    res.d1_ids = split.d1.clone();
    Ok(res)
}

fn search(prep: Prepared, sensitive: &[usize], cfg: &AttackConfig) -> Result<AttackResult> {
    let start = Instant::now();
    let n1 = prep.f_d1.len();
    let detector = Detector::new(prep.f_d0.clone(), prep.f_d1.clone(), cfg.alpha, cfg.m)?.with_resampling(cfg.resampling);
    let names = prep.feature_names.as_deref();

    let uniform = BackgroundWeights::uniform(&prep.f_d1);
    let before = prep.coeffs.uniform();
    let best_start = objective(&before, sensitive);

    let lambda0 = lambda_scale(&prep.costs, &prep.f_d1);
    let grid = cfg.grid(lambda0);
    info!(lambda0, points = grid.len(), n1, "searching lambda grid");

    let evaluated: Vec<Result<(BackgroundWeights, LambdaTrace)>> = grid
        .par_iter()
        .enumerate()
        .map(|(k, &lambda)| {
            let weights = weights_for_costs(&prep.f_d1, &prep.costs, lambda, &cfg.weights)?;
            let weighted = prep.coeffs.weighted(&weights.omega);
            let detections = detection_count(
                &detector,
                &prep.f_s0p,
                &prep.f_d1,
                &weights.omega,
                cfg.detection_reps,
                derive_seed(cfg.seed, STREAM_LAMBDA + k as u64),
            )?;
            let trace = LambdaTrace {
                lambda,
                objective: objective(&weighted, sensitive),
                weighted_gsv: weighted,
                detections,
                detection_rate: detections as f64 / cfg.detection_reps as f64,
                wasserstein_cost: weights.wasserstein_cost,
                accepted: false,
            };
            Ok((weights, trace))
        })
        .collect();

    // sequential reduce, largest λ first: a strict decrease is required, so
    // the first λ reaching the best objective wins
    let mut best_obj = best_start;
    let mut best: Option<usize> = None;
    let mut trace = Vec::with_capacity(grid.len());
    let mut candidates = Vec::with_capacity(grid.len());
    for (k, item) in evaluated.into_iter().enumerate() {
        let (weights, mut t) = item?;
        let undetected = (t.detections as f64) < cfg.detection_reps as f64 * cfg.tau;
        if t.objective < best_obj && undetected {
            best_obj = t.objective;
            best = Some(k);
        }
        debug!(lambda = t.lambda, objective = t.objective, rate = t.detection_rate, "lambda evaluated");
        t.accepted = false;
        trace.push(t);
        candidates.push(weights);
    }
    if let Some(k) = best {
        trace[k].accepted = true;
    }
    let search_time = start.elapsed();

    let (weights, chosen_lambda, acceptance_rate) = match best {
        Some(k) => (candidates.swap_remove(k), Some(grid[k]), Some(trace[k].detection_rate)),
        None => {
            info!("no lambda passed the guard; keeping the uniform background");
            (uniform, None, None)
        }
    };

    let cat = Categorical::new(&weights.omega).ok_or_else(|| Error::Invariant("final weights are not a distribution".into()))?;
    let mut rng = child(cfg.seed, STREAM_FINAL_DRAW);
    let s1_local = cat.sample_n(&mut rng, cfg.m);
    let remeasured = detection_rate(
        &detector,
        &prep.f_s0p,
        &prep.f_d1,
        &weights.omega,
        cfg.detection_reps,
        derive_seed(cfg.seed, STREAM_REMEASURE),
    )?;

    let after = if best.is_some() { prep.coeffs.weighted(&weights.omega) } else { before.clone() };
    let sampled = prep.coeffs.sampled(&s1_local);
    let s = sensitive[0];
    let reduction = if best.is_some() {
        amplitude_reduction(best_start, objective(&after, sensitive))
    } else {
        0.0
    };

    Ok(AttackResult {
        accepted: best.is_some(),
        chosen_lambda,
        sensitive: sensitive.to_vec(),
        m: cfg.m,
        tau: cfg.tau,
        alpha: cfg.alpha,
        lambda_grid: grid,
        s0_prime: prep.s0_local,
        s1_prime: s1_local,
        d1_ids: (0..n1).collect(),
        phi_before: before[s],
        phi_after: after[s],
        phi_after_sampled: sampled[s],
        sensitive_before: sensitive.iter().map(|&k| before[k]).collect(),
        sensitive_after: sensitive.iter().map(|&k| after[k]).collect(),
        per_feature_gsv_before: AttributionVector::new(before, names),
        per_feature_gsv_after: AttributionVector::new(after, names),
        per_feature_gsv_after_sampled: AttributionVector::new(sampled, names),
        weights,
        detection_rate: remeasured,
        acceptance_detection_rate: acceptance_rate,
        amplitude_reduction: reduction,
        trace,
        timing: AttackTiming {
            coefficients: prep.coefficient_time,
            search: search_time,
        },
    })
}

/// How long a baseline may run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Budget {
    /// Wall clock; at least one draw is always made. Not reproducible.
    Time(Duration),
    /// A fixed number of draws (at least one).
    Draws(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BruteForceResult {
    /// Background ids of the best draw, indexing `d1`.
    pub s1_prime: Vec<usize>,
    /// `Φ̂_s(f, S0', S1')` of the best draw.
    pub phi: f64,
    pub draws: usize,
    /// Best `|Φ̂_s|` after each draw.
    pub best_trace: Vec<f64>,
}

/// Honest draws `S1' ~ uniform(D1)^M`, keeping the one with the smallest
/// `|Φ̂_s(f, S0', S1')|`. Each draw is explained from scratch.
pub fn brute_force_attack<M: Model + ?Sized, R: Rng + ?Sized>(
    f: &M,
    s0_prime: &[Vec<f64>],
    d1: &[Vec<f64>],
    s: usize,
    m: usize,
    budget: Budget,
    rng: &mut R,
) -> Result<BruteForceResult> {
    if s0_prime.is_empty() || d1.is_empty() || m == 0 {
        return Err(Error::arg("brute force needs a foreground, a background and M > 0"));
    }
    if s >= d1[0].len() {
        return Err(Error::Index {
            index: s,
            len: d1[0].len(),
        });
    }
    let mut explainer = Explainer::new(f);
    let start = Instant::now();
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut best_trace = Vec::new();
    loop {
        let draws = best_trace.len();
        let done = match budget {
            Budget::Time(t) => draws >= 1 && start.elapsed() >= t,
            Budget::Draws(n) => draws >= n.max(1),
        };
        if done {
            break;
        }
        let picks = sample_with_replacement(rng, d1.len(), m);
        let back: Vec<Vec<f64>> = picks.iter().map(|&j| d1[j].clone()).collect();
        let phi = explainer.global(s0_prime, &back)?.phi[s];
        if best.as_ref().is_none_or(|(b, _)| phi.abs() < b.abs()) {
            best = Some((phi, picks));
        }
        best_trace.push(best.as_ref().unwrap().0.abs());
    }
    let (phi, s1_prime) = best.expect("at least one draw");
    Ok(BruteForceResult {
        s1_prime,
        phi,
        draws: best_trace.len(),
        best_trace,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneticConfig {
    pub iters: usize,
    pub pop: usize,
    /// Per-feature mutation standard deviations.
    pub mutation_sigma: Vec<f64>,
    /// Probability that a given cell is perturbed in a mutation.
    pub mutation_rate: f64,
    /// Probability that a column is exchanged between two parents.
    pub crossover_prob: f64,
    /// Stop after this many consecutive generations whose best individual is
    /// flagged.
    pub patience: usize,
}

impl GeneticConfig {
    /// Defaults: population 32, σ = 0.1 × per-feature std of `reference`,
    /// crossover probability 0.5, 400 generations, patience 10.
    pub fn from_reference(reference: &[Vec<f64>]) -> Self {
        let n = reference.len().max(1) as f64;
        let d = reference.first().map_or(0, Vec::len);
        let mutation_sigma = (0..d)
            .map(|k| {
                let mean = reference.iter().map(|r| r[k]).sum::<f64>() / n;
                let var = reference.iter().map(|r| (r[k] - mean).powi(2)).sum::<f64>() / n;
                0.1 * var.sqrt()
            })
            .collect();
        Self {
            iters: 400,
            pop: 32,
            mutation_sigma,
            mutation_rate: 0.1,
            crossover_prob: 0.5,
            patience: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationTrace {
    pub iteration: usize,
    pub best_amplitude: f64,
    pub detected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneticResult {
    /// Best non-detected background, or the best overall when every
    /// checked one was flagged.
    pub s1_prime: Vec<Vec<f64>>,
    pub phi: f64,
    pub detected: bool,
    pub early_stopped: bool,
    pub iterations: usize,
    pub trace: Vec<GenerationTrace>,
}

/// Evolves fake backgrounds by column crossover, Gaussian cell mutation and
/// elitist truncation on `|Φ̂_s(f, S0', S1')|`. The `detector` is asked about
/// the best individual of every generation. The sensitive column is never
/// mutated.
pub fn genetic_attack<M, R, D>(
    f: &M,
    s0_prime: &[Vec<f64>],
    s1_init: &[Vec<f64>],
    s: usize,
    cfg: &GeneticConfig,
    mut detector: D,
    rng: &mut R,
) -> Result<GeneticResult>
where
    M: Model + ?Sized,
    R: Rng + ?Sized,
    D: FnMut(&[Vec<f64>]) -> Result<bool>,
{
    if cfg.pop < 2 {
        return Err(Error::arg(format!("population must be at least 2, got {}", cfg.pop)));
    }
    if s1_init.is_empty() || s0_prime.is_empty() {
        return Err(Error::arg("genetic search needs non-empty samples"));
    }
    let d = s1_init[0].len();
    if s >= d {
        return Err(Error::Index { index: s, len: d });
    }
    if cfg.mutation_sigma.len() != d {
        return Err(Error::Dimension {
            expected: d,
            got: cfg.mutation_sigma.len(),
        });
    }
    let mut explainer = Explainer::new(f);
    let mut score = |rows: &[Vec<f64>]| -> Result<f64> { Ok(explainer.global(s0_prime, rows)?.phi[s]) };

    let init_phi = score(s1_init)?;
    if cfg.iters == 0 {
        return Ok(GeneticResult {
            s1_prime: s1_init.to_vec(),
            phi: init_phi,
            detected: false,
            early_stopped: false,
            iterations: 0,
            trace: Vec::new(),
        });
    }

    let mut population: Vec<(f64, Vec<Vec<f64>>)> = vec![(init_phi, s1_init.to_vec()); cfg.pop];
    let mut best_clean: Option<(f64, Vec<Vec<f64>>)> = None;
    let mut best_flagged: Option<(f64, Vec<Vec<f64>>)> = None;
    let mut streak = 0;
    let mut trace = Vec::new();
    let mut early_stopped = false;

    for iteration in 1..=cfg.iters {
        let mut order: Vec<usize> = (0..population.len()).collect();
        order.shuffle(rng);
        let mut children = Vec::with_capacity(cfg.pop);
        for pair in order.chunks(2) {
            let mut a = population[pair[0]].1.clone();
            let mut b = population[pair[pair.len() - 1]].1.clone();
            for k in 0..d {
                if rng.gen::<f64>() < cfg.crossover_prob {
                    for (ra, rb) in a.iter_mut().zip(b.iter_mut()) {
                        std::mem::swap(&mut ra[k], &mut rb[k]);
                    }
                }
            }
            mutate(&mut a, s, cfg, rng);
            mutate(&mut b, s, cfg, rng);
            children.push(a);
            if pair.len() == 2 {
                children.push(b);
            }
        }
        for child_rows in children {
            let phi = score(&child_rows)?;
            population.push((phi, child_rows));
        }
        // stable sort keeps earlier (older) individuals first on ties
        population.sort_by(|x, y| x.0.abs().total_cmp(&y.0.abs()));
        population.truncate(cfg.pop);

        let (phi, rows) = &population[0];
        let flagged = detector(rows)?;
        trace.push(GenerationTrace {
            iteration,
            best_amplitude: phi.abs(),
            detected: flagged,
        });
        let slot = if flagged { &mut best_flagged } else { &mut best_clean };
        if slot.as_ref().is_none_or(|(b, _)| phi.abs() < b.abs()) {
            *slot = Some((*phi, rows.clone()));
        }
        streak = if flagged { streak + 1 } else { 0 };
        if streak >= cfg.patience {
            early_stopped = true;
            debug!(iteration, "genetic search stopped after consecutive detections");
            break;
        }
    }

    let iterations = trace.len();
    let (phi, s1_prime, detected) = match (best_clean, best_flagged) {
        (Some((phi, rows)), _) => (phi, rows, false),
        (None, Some((phi, rows))) => (phi, rows, true),
        (None, None) => unreachable!("at least one generation ran"),
    };
    Ok(GeneticResult {
        s1_prime,
        phi,
        detected,
        early_stopped,
        iterations,
        trace,
    })
}

fn mutate<R: Rng + ?Sized>(rows: &mut [Vec<f64>], s: usize, cfg: &GeneticConfig, rng: &mut R) {
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    for row in rows.iter_mut() {
        for (k, v) in row.iter_mut().enumerate() {
            if k != s && cfg.mutation_sigma[k] > 0.0 && rng.gen::<f64>() < cfg.mutation_rate {
                *v += cfg.mutation_sigma[k] * unit.sample(rng);
            }
        }
    }
}
