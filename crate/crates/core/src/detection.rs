//! Audit-side tests for cherry-picked samples.
//!
//! The audit holds the model outputs over both full groups. Given the
//! company's samples `f(S'_0)`, `f(S'_1)` it draws its own honest reference
//! samples, runs a two-sample KS test against each, and a Wald test of each
//! sample mean against the group's population moments. Four tests, so each
//! is run at `α/4`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use tracing::debug;

use crate::error::{Error, Result};
use crate::rng::{child, sample_with_replacement, sample_without_replacement};

const KOLMOGOROV_TERMS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub statistic: f64,
    pub p_value: f64,
    pub test_name: String,
    pub sample_sizes: (usize, usize),
}

/// Survival function of the Kolmogorov distribution,
/// `Q(t) = 2 Σ_{k≥1} (−1)^{k−1} exp(−2k²t²)`.
pub fn kolmogorov_survival(t: f64) -> f64 {
    if t <= 0.0 {
        return 1.0;
    }
    // the alternating series is useless near zero, where Q is 1 to machine
    // precision anyway (Q(0.2) = 1 − 3e-11)
    if t < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=KOLMOGOROV_TERMS {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * t * t).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-300 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// `sup_x |F̂_a(x) − F̂_b(x)|` over the pooled sorted values.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut sup: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        sup = sup.max((i as f64 / n - j as f64 / m).abs());
    }
    // once one sample is exhausted the gap is decided by the other
    sup.max((i as f64 / n - j as f64 / m).abs())
}

pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<TestReport> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::arg("KS test needs two non-empty samples"));
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(Error::arg("KS test sample contains NaN"));
    }
    let statistic = ks_statistic(a, b);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let effective = n * m / (n + m);
    let p_value = kolmogorov_survival(statistic * effective.sqrt());
    Ok(TestReport {
        statistic,
        p_value,
        test_name: "ks".into(),
        sample_sizes: (a.len(), b.len()),
    })
}

fn normal_survival_two_sided(z: f64) -> f64 {
    let n = Normal::new(0.0, 1.0).expect("unit normal");
    (2.0 * n.sf(z.abs())).clamp(0.0, 1.0)
}

/// Wald test of the sample mean against known population moments.
pub fn wald_test(sample: &[f64], mu: f64, sigma2: f64) -> Result<TestReport> {
    if sample.is_empty() {
        return Err(Error::arg("Wald test needs a non-empty sample"));
    }
    if !(sigma2 > 0.0) || !sigma2.is_finite() {
        return Err(Error::arg(format!(
            "population variance must be positive, got {sigma2}"
        )));
    }
    let m = sample.len() as f64;
    let mean = sample.iter().sum::<f64>() / m;
    let statistic = (mean - mu) / (sigma2.sqrt() / m.sqrt());
    Ok(TestReport {
        statistic,
        p_value: normal_survival_two_sided(statistic),
        test_name: "wald".into(),
        sample_sizes: (sample.len(), 0),
    })
}

/// Mean and variance (divided by `N`) of a whole population.
pub fn population_moments(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.iter().all(|&v| v == values[0]) {
        // exact zero so a constant group is recognised as degenerate
        return (values[0], 0.0);
    }
    let mu = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / n;
    (mu, var)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Resampling {
    #[default]
    WithReplacement,
    WithoutReplacement,
}

impl Resampling {
    pub fn draw<R: Rng + ?Sized>(self, rng: &mut R, n: usize, m: usize) -> Vec<usize> {
        match self {
            Resampling::WithReplacement => sample_with_replacement(rng, n, m),
            Resampling::WithoutReplacement if m <= n => sample_without_replacement(rng, n, m),
            Resampling::WithoutReplacement => sample_with_replacement(rng, n, m),
        }
    }
}

/// Outputs of one sensitive group as seen by the audit.
#[derive(Debug, Clone)]
pub struct GroupReference {
    pub outputs: Vec<f64>,
    pub mu: f64,
    pub sigma2: f64,
}

impl GroupReference {
    pub fn new(outputs: Vec<f64>) -> Result<Self> {
        if outputs.is_empty() {
            return Err(Error::arg("group has no model outputs"));
        }
        let (mu, sigma2) = population_moments(&outputs);
        Ok(Self { outputs, mu, sigma2 })
    }
}

/// p-values of the four tests; Wald is `None` for a degenerate group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionOutcome {
    pub ks: [f64; 2],
    pub wald: [Option<f64>; 2],
    pub threshold: f64,
}

impl DetectionOutcome {
    pub fn ks_rejects(&self, group: usize) -> bool {
        self.ks[group] < self.threshold
    }

    pub fn wald_rejects(&self, group: usize) -> bool {
        self.wald[group].is_some_and(|p| p < self.threshold)
    }

    pub fn detected(&self) -> bool {
        (0..2).any(|g| self.ks_rejects(g) || self.wald_rejects(g))
    }
}

/// The audit's detector over fixed group outputs.
#[derive(Debug, Clone)]
pub struct Detector {
    pub groups: [GroupReference; 2],
    pub alpha: f64,
    pub m: usize,
    pub resampling: Resampling,
}

impl Detector {
    pub fn new(f_d0: Vec<f64>, f_d1: Vec<f64>, alpha: f64, m: usize) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::arg(format!("alpha must lie in (0, 1], got {alpha}")));
        }
        if m == 0 {
            return Err(Error::arg("sample size M must be positive"));
        }
        let groups = [GroupReference::new(f_d0)?, GroupReference::new(f_d1)?];
        for (g, grp) in groups.iter().enumerate() {
            if grp.sigma2 <= 0.0 {
                debug!(group = g, "degenerate group outputs; Wald test skipped");
            }
        }
        Ok(Self {
            groups,
            alpha,
            m,
            resampling: Resampling::WithReplacement,
        })
    }

    pub fn with_resampling(mut self, resampling: Resampling) -> Self {
        self.resampling = resampling;
        self
    }

    /// All four p-values for the company's samples.
    pub fn evaluate<R: Rng + ?Sized>(&self, f_s0p: &[f64], f_s1p: &[f64], rng: &mut R) -> Result<DetectionOutcome> {
        let provided = [f_s0p, f_s1p];
        let mut ks = [1.0; 2];
        let mut wald = [None; 2];
        for g in 0..2 {
            let grp = &self.groups[g];
            if provided[g].len() != self.m {
                return Err(Error::Dimension {
                    expected: self.m,
                    got: provided[g].len(),
                });
            }
            let picks = self.resampling.draw(rng, grp.outputs.len(), self.m);
            let reference: Vec<f64> = picks.into_iter().map(|k| grp.outputs[k]).collect();
            ks[g] = ks_two_sample(&reference, provided[g])?.p_value;
            if grp.sigma2 > 0.0 {
                wald[g] = Some(wald_test(provided[g], grp.mu, grp.sigma2)?.p_value);
            }
        }
        Ok(DetectionOutcome {
            ks,
            wald,
            threshold: self.alpha / 4.0,
        })
    }

    pub fn detect<R: Rng + ?Sized>(&self, f_s0p: &[f64], f_s1p: &[f64], rng: &mut R) -> Result<bool> {
        Ok(self.evaluate(f_s0p, f_s1p, rng)?.detected())
    }

    /// Honest samples of both groups, drawn the same way as the reference.
    pub fn honest_draw<R: Rng + ?Sized>(&self, rng: &mut R) -> [Vec<f64>; 2] {
        [0, 1].map(|g| {
            let grp = &self.groups[g];
            self.resampling
                .draw(rng, grp.outputs.len(), self.m)
                .into_iter()
                .map(|k| grp.outputs[k])
                .collect()
        })
    }

    /// False-positive rate over `reps` honest submissions. Replicate `r`
    /// uses the generator `child(seed, r)`.
    pub fn calibrate(&self, reps: usize, seed: u64) -> Result<CalibrationReport> {
        if reps == 0 {
            return Err(Error::arg("calibration needs at least one replicate"));
        }
        let outcomes: Vec<Result<DetectionOutcome>> = (0..reps)
            .into_par_iter()
            .map(|r| {
                let mut rng = child(seed, r as u64);
                let [s0, s1] = self.honest_draw(&mut rng);
                self.evaluate(&s0, &s1, &mut rng)
            })
            .collect();
        let mut counts = RejectionCounts::default();
        let mut fired = 0usize;
        for o in outcomes {
            let o = o?;
            counts.ks_group0 += usize::from(o.ks_rejects(0));
            counts.ks_group1 += usize::from(o.ks_rejects(1));
            counts.wald_group0 += usize::from(o.wald_rejects(0));
            counts.wald_group1 += usize::from(o.wald_rejects(1));
            fired += usize::from(o.detected());
        }
        Ok(CalibrationReport {
            alpha: self.alpha,
            m: self.m,
            reps,
            fpr: fired as f64 / reps as f64,
            per_test_rejection_counts: counts,
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectionCounts {
    pub ks_group0: usize,
    pub wald_group0: usize,
    pub ks_group1: usize,
    pub wald_group1: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub struct CalibrationReport {
    pub alpha: f64,
    #[serde(rename = "M")]
    pub m: usize,
    pub reps: usize,
    pub fpr: f64,
    pub per_test_rejection_counts: RejectionCounts,
}

/// Returns `true` iff any of the four p-values falls below `α/4`.
pub fn detect_fraud<R: Rng + ?Sized>(
    f_d0: &[f64],
    f_d1: &[f64],
    f_s0p: &[f64],
    f_s1p: &[f64],
    alpha: f64,
    m: usize,
    rng: &mut R,
) -> Result<bool> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::arg(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Detector::new(f_d0.to_vec(), f_d1.to_vec(), alpha, m)?.detect(f_s0p, f_s1p, rng)
}

/// Fraction of `reps` honest submissions flagged by the detector.
pub fn calibrate_detector(f_d0: &[f64], f_d1: &[f64], alpha: f64, m: usize, reps: usize, seed: u64) -> Result<f64> {
    Ok(Detector::new(f_d0.to_vec(), f_d1.to_vec(), alpha, m)?
        .calibrate(reps, seed)?
        .fpr)
}
