//! Exact interventional Shapley values.
//!
//! Local values `φ(f, x, z)` are computed by enumerating every coalition of
//! the features that can change the output, weighted by the Shapley kernel
//! `|S|!(p−|S|−1)!/p!`. Global values are the plug-in double average of local
//! values over a foreground and a background sample.
//!
//! A feature `i` with `x_i == z_i`, or one the model declares it never reads,
//! is a null player: its value is exactly zero and removing it from the game
//! leaves every other value unchanged. Only the remaining players are
//! enumerated, so the cap applies to them rather than to the raw width.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::model::Model;

pub const DEFAULT_MAX_PLAYERS: usize = 15;

/// Activates the features of `subset`: `out_i = x_i` if `i ∈ subset`, else `z_i`.
pub fn replace(z: &[f64], x: &[f64], subset: &[usize]) -> Result<Vec<f64>> {
    if z.len() != x.len() {
        return Err(Error::Dimension {
            expected: z.len(),
            got: x.len(),
        });
    }
    let mut out = z.to_vec();
    for &i in subset {
        if i >= x.len() {
            return Err(Error::Index {
                index: i,
                len: x.len(),
            });
        }
        out[i] = x[i];
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionVector {
    pub phi: Vec<f64>,
    pub feature_names: Vec<String>,
}

impl AttributionVector {
    pub fn new(phi: Vec<f64>, feature_names: Option<&[String]>) -> Self {
        let feature_names = match feature_names {
            Some(names) if names.len() == phi.len() => names.to_vec(),
            _ => default_names(phi.len()),
        };
        Self { phi, feature_names }
    }

    pub fn len(&self) -> usize {
        self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.phi.iter().sum()
    }
}

pub(crate) fn default_names(d: usize) -> Vec<String> {
    (0..d).map(|i| format!("x{i}")).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub center: f64,
    pub half_width: f64,
    pub level: f64,
}

impl ConfidenceInterval {
    pub fn contains(&self, value: f64) -> bool {
        (value - self.center).abs() <= self.half_width
    }
}

/// `φ_s(f, S0', z^(j))` for every background instance `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackgroundCoefficients {
    pub coeffs: Vec<f64>,
    pub sensitive_index: usize,
    pub foreground_ids: Vec<usize>,
}

impl BackgroundCoefficients {
    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Uniform-background estimate `Φ̂_s(f, S0', D1)`.
    pub fn mean(&self) -> f64 {
        self.coeffs.iter().sum::<f64>() / self.coeffs.len() as f64
    }
}

/// Per-feature, per-background coefficients, `d × N1`, feature-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientMatrix {
    d: usize,
    n_back: usize,
    data: Vec<f64>,
    pub foreground_ids: Vec<usize>,
}

impl CoefficientMatrix {
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n_background(&self) -> usize {
        self.n_back
    }

    pub fn feature(&self, k: usize) -> &[f64] {
        &self.data[k * self.n_back..(k + 1) * self.n_back]
    }

    pub fn get(&self, k: usize, j: usize) -> f64 {
        self.data[k * self.n_back + j]
    }

    pub fn for_feature(&self, s: usize) -> Result<BackgroundCoefficients> {
        if s >= self.d {
            return Err(Error::Index {
                index: s,
                len: self.d,
            });
        }
        Ok(BackgroundCoefficients {
            coeffs: self.feature(s).to_vec(),
            sensitive_index: s,
            foreground_ids: self.foreground_ids.clone(),
        })
    }

    /// Weighted GSV of every feature, `Σ_j ω_j · coeffs[k][j]`.
    pub fn weighted(&self, omega: &[f64]) -> Vec<f64> {
        (0..self.d)
            .map(|k| self.feature(k).iter().zip(omega).map(|(c, w)| c * w).sum())
            .collect()
    }

    /// Uniform-background GSV of every feature.
    pub fn uniform(&self) -> Vec<f64> {
        (0..self.d)
            .map(|k| self.feature(k).iter().sum::<f64>() / self.n_back as f64)
            .collect()
    }

    /// GSV when the background is the multiset `picks` of background indices.
    pub fn sampled(&self, picks: &[usize]) -> Vec<f64> {
        (0..self.d)
            .map(|k| {
                let row = self.feature(k);
                picks.iter().map(|&j| row[j]).sum::<f64>() / picks.len() as f64
            })
            .collect()
    }

    /// Restricts the matrix to a subset of background columns.
    pub fn select_background(&self, cols: &[usize]) -> CoefficientMatrix {
        let mut data = Vec::with_capacity(self.d * cols.len());
        for k in 0..self.d {
            let row = self.feature(k);
            data.extend(cols.iter().map(|&j| row[j]));
        }
        CoefficientMatrix {
            d: self.d,
            n_back: cols.len(),
            data,
            foreground_ids: self.foreground_ids.clone(),
        }
    }

    pub fn from_lsv(lsv: &LsvMatrix, foreground_ids: Vec<usize>) -> Self {
        let (n_fore, n_back, d) = (lsv.n_fore, lsv.n_back, lsv.d);
        let mut data = vec![0.0; d * n_back];
        for i in 0..n_fore {
            for j in 0..n_back {
                for k in 0..d {
                    data[k * n_back + j] += lsv.get(i, j, k);
                }
            }
        }
        for v in &mut data {
            *v /= n_fore as f64;
        }
        Self {
            d,
            n_back,
            data,
            foreground_ids,
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>, foreground_ids: Vec<usize>) -> Result<Self> {
        let d = rows.len();
        let n_back = rows.first().map_or(0, |r| r.len());
        if let Some(bad) = rows.iter().find(|r| r.len() != n_back) {
            return Err(Error::Dimension {
                expected: n_back,
                got: bad.len(),
            });
        }
        Ok(Self {
            d,
            n_back,
            data: rows.into_iter().flatten().collect(),
            foreground_ids,
        })
    }
}

/// All local values for a foreground × background grid, laid out
/// `[(i * n_back + j) * d + k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LsvMatrix {
    pub n_fore: usize,
    pub n_back: usize,
    pub d: usize,
    pub data: Vec<f64>,
}

impl LsvMatrix {
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[(i * self.n_back + j) * self.d + k]
    }

    pub fn local(&self, i: usize, j: usize) -> &[f64] {
        let start = (i * self.n_back + j) * self.d;
        &self.data[start..start + self.d]
    }

    /// Plug-in GSV: mean over the whole grid.
    pub fn global(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.d];
        for cell in self.data.chunks_exact(self.d) {
            for (a, v) in acc.iter_mut().zip(cell) {
                *a += v;
            }
        }
        let n = (self.n_fore * self.n_back) as f64;
        acc.into_iter().map(|a| a / n).collect()
    }
}

/// Exact Shapley engine bound to one model.
pub struct Explainer<'m, M: ?Sized> {
    model: &'m M,
    max_players: usize,
    feature_names: Option<Vec<String>>,
    active: Option<Vec<bool>>,
    active_source: Option<Vec<usize>>,
}

impl<'m, M: Model + ?Sized> Explainer<'m, M> {
    pub fn new(model: &'m M) -> Self {
        Self {
            model,
            max_players: DEFAULT_MAX_PLAYERS,
            feature_names: None,
            active: None,
            active_source: model.active_features(),
        }
    }

    pub fn with_max_players(mut self, cap: usize) -> Self {
        self.max_players = cap;
        self
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Self {
        self.feature_names = Some(names);
        self
    }

    pub fn model(&self) -> &M {
        self.model
    }

    fn is_active(&self, i: usize) -> bool {
        match (&self.active, &self.active_source) {
            (Some(mask), _) => mask.get(i).copied().unwrap_or(false),
            (None, Some(list)) => list.contains(&i),
            (None, None) => true,
        }
    }

    fn prepare(&mut self, d: usize) {
        if self.active.as_ref().map(|m| m.len()) != Some(d) {
            self.active = self.active_source.as_ref().map(|list| {
                let mut mask = vec![false; d];
                for &i in list {
                    if i < d {
                        mask[i] = true;
                    }
                }
                mask
            });
        }
    }

    fn names(&self, d: usize) -> Option<&[String]> {
        self.feature_names.as_deref().filter(|n| n.len() == d)
    }

    /// Local Shapley values of `x` against the baseline `z`.
    pub fn local(&mut self, x: &[f64], z: &[f64]) -> Result<AttributionVector> {
        let d = check_pair(x, z)?;
        self.prepare(d);
        let mut phi = vec![0.0; d];
        let mut scratch = Scratch::default();
        self.local_into(x, z, &mut phi, &mut scratch)?;
        Ok(AttributionVector::new(phi, self.names(d)))
    }

    fn local_into(&self, x: &[f64], z: &[f64], out: &mut [f64], scratch: &mut Scratch) -> Result<()> {
        let players = &mut scratch.players;
        players.clear();
        players.extend((0..x.len()).filter(|&i| x[i] != z[i] && self.is_active(i)));
        let p = players.len();
        out.iter_mut().for_each(|v| *v = 0.0);
        if p == 0 {
            return Ok(());
        }
        if p > self.max_players {
            return Err(Error::Capacity {
                players: p,
                cap: self.max_players,
            });
        }

        // v(S) for every coalition, visited in Gray-code order so that each
        // step toggles a single coordinate of the evaluation point
        let n_masks = 1usize << p;
        let values = &mut scratch.values;
        values.resize(n_masks, 0.0);
        let point = &mut scratch.point;
        point.clear();
        point.extend_from_slice(z);
        values[0] = self.model.predict(point);
        let mut prev = 0usize;
        for step in 1..n_masks {
            let gray = step ^ (step >> 1);
            let bit = (gray ^ prev).trailing_zeros() as usize;
            let col = players[bit];
            point[col] = if gray & (1 << bit) != 0 { x[col] } else { z[col] };
            values[gray] = self.model.predict(point);
            prev = gray;
        }

        let weights = &mut scratch.weights;
        shapley_kernel(p, weights);
        for (b, &col) in players.iter().enumerate() {
            let flag = 1usize << b;
            let mut acc = 0.0;
            for mask in 0..n_masks {
                if mask & flag == 0 {
                    acc += weights[mask.count_ones() as usize] * (values[mask | flag] - values[mask]);
                }
            }
            out[col] = acc;
        }
        Ok(())
    }

    /// Every local value of the `fore × back` grid.
    pub fn lsv_matrix(&mut self, fore: &[Vec<f64>], back: &[Vec<f64>]) -> Result<LsvMatrix> {
        let d = check_samples(fore, back)?;
        self.prepare(d);
        let this = &*self;
        let n_back = back.len();
        let rows: Vec<Result<Vec<f64>>> = fore
            .par_iter()
            .map(|x| {
                let mut scratch = Scratch::default();
                let mut row = vec![0.0; n_back * d];
                for (j, z) in back.iter().enumerate() {
                    this.local_into(x, z, &mut row[j * d..(j + 1) * d], &mut scratch)?;
                }
                Ok(row)
            })
            .collect();
        let mut data = Vec::with_capacity(fore.len() * n_back * d);
        for r in rows {
            data.extend(r?);
        }
        Ok(LsvMatrix {
            n_fore: fore.len(),
            n_back,
            d,
            data,
        })
    }

    /// Plug-in GSV `(1/|S0||S1|) Σ_i Σ_j φ(f, x^(i), z^(j))`.
    pub fn global(&mut self, s0: &[Vec<f64>], s1: &[Vec<f64>]) -> Result<AttributionVector> {
        let d = check_samples(s0, s1)?;
        self.prepare(d);
        let this = &*self;
        let partials: Vec<Result<Vec<f64>>> = s0
            .par_iter()
            .map(|x| {
                let mut scratch = Scratch::default();
                let mut acc = vec![0.0; d];
                let mut phi = vec![0.0; d];
                for z in s1 {
                    this.local_into(x, z, &mut phi, &mut scratch)?;
                    for (a, v) in acc.iter_mut().zip(&phi) {
                        *a += v;
                    }
                }
                Ok(acc)
            })
            .collect();
        let mut total = vec![0.0; d];
        for p in partials {
            for (t, v) in total.iter_mut().zip(p?) {
                *t += v;
            }
        }
        let n = (s0.len() * s1.len()) as f64;
        let phi = total.into_iter().map(|t| t / n).collect();
        Ok(AttributionVector::new(phi, self.names(d)))
    }

    /// Coefficients `(1/|S0'|) Σ_{x∈S0'} φ_k(f, x, z^(j))` for all features `k`
    /// and background instances `j`.
    pub fn coefficient_matrix(
        &mut self,
        fore: &[Vec<f64>],
        back: &[Vec<f64>],
        foreground_ids: Vec<usize>,
    ) -> Result<CoefficientMatrix> {
        let d = check_samples(fore, back)?;
        self.prepare(d);
        let this = &*self;
        let cols: Vec<Result<Vec<f64>>> = back
            .par_iter()
            .map(|z| {
                let mut scratch = Scratch::default();
                let mut acc = vec![0.0; d];
                let mut phi = vec![0.0; d];
                for x in fore {
                    this.local_into(x, z, &mut phi, &mut scratch)?;
                    for (a, v) in acc.iter_mut().zip(&phi) {
                        *a += v;
                    }
                }
                Ok(acc.into_iter().map(|a| a / fore.len() as f64).collect())
            })
            .collect();
        let n_back = back.len();
        let mut data = vec![0.0; d * n_back];
        for (j, col) in cols.into_iter().enumerate() {
            for (k, v) in col?.into_iter().enumerate() {
                data[k * n_back + j] = v;
            }
        }
        Ok(CoefficientMatrix {
            d,
            n_back,
            data,
            foreground_ids,
        })
    }

    /// Mean of `φ_k(f, x, z)` over `x ∈ fore` for a single background row.
    pub fn background_coefficient(&mut self, fore: &[Vec<f64>], z: &[f64], k: usize) -> Result<f64> {
        let d = z.len();
        if k >= d {
            return Err(Error::Index { index: k, len: d });
        }
        self.prepare(d);
        let mut scratch = Scratch::default();
        let mut phi = vec![0.0; d];
        let mut acc = 0.0;
        for x in fore {
            check_pair(x, z)?;
            self.local_into(x, z, &mut phi, &mut scratch)?;
            acc += phi[k];
        }
        Ok(acc / fore.len() as f64)
    }

    /// Asymptotic-normal interval for the plug-in GSV of feature `k`, using
    /// the empirical variances of row and column means of the local-value
    /// grid in place of the population variances.
    pub fn confidence_interval(
        &mut self,
        s0: &[Vec<f64>],
        s1: &[Vec<f64>],
        k: usize,
        delta: f64,
    ) -> Result<ConfidenceInterval> {
        if s0.len() != s1.len() {
            return Err(Error::arg(format!(
                "foreground and background must have equal size, got {} and {}",
                s0.len(),
                s1.len()
            )));
        }
        let m = s0.len();
        if m < 2 {
            return Err(Error::arg("need at least two instances per sample for a variance"));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::arg(format!("delta must lie in (0, 1), got {delta}")));
        }
        let d = check_samples(s0, s1)?;
        if k >= d {
            return Err(Error::Index { index: k, len: d });
        }
        let grid = self.lsv_matrix(s0, s1)?;
        let mut row_means = vec![0.0; m];
        let mut col_means = vec![0.0; m];
        for i in 0..m {
            for j in 0..m {
                let v = grid.get(i, j, k);
                row_means[i] += v;
                col_means[j] += v;
            }
        }
        row_means.iter_mut().for_each(|v| *v /= m as f64);
        col_means.iter_mut().for_each(|v| *v /= m as f64);
        let center = row_means.iter().sum::<f64>() / m as f64;
        let var_fore = sample_variance(&row_means);
        let var_back = sample_variance(&col_means);
        let z = standard_normal_quantile(1.0 - delta / 2.0);
        let half_width = z * ((var_fore + var_back) / m as f64).sqrt();
        Ok(ConfidenceInterval {
            center,
            half_width: half_width.max(0.0),
            level: 1.0 - delta,
        })
    }
}

#[derive(Default)]
struct Scratch {
    players: Vec<usize>,
    values: Vec<f64>,
    point: Vec<f64>,
    weights: Vec<f64>,
}

/// `w[k] = k!(p−k−1)!/p!` for `k = 0..p`.
fn shapley_kernel(p: usize, out: &mut Vec<f64>) {
    out.clear();
    // w[k] = 1 / (p * C(p-1, k))
    let mut binom = 1.0f64;
    for k in 0..p {
        out.push(1.0 / (p as f64 * binom));
        binom = binom * (p - 1 - k) as f64 / (k + 1) as f64;
    }
}

fn sample_variance(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

pub(crate) fn standard_normal_quantile(p: f64) -> f64 {
    Normal::new(0.0, 1.0).expect("unit normal").inverse_cdf(p)
}

fn check_pair(x: &[f64], z: &[f64]) -> Result<usize> {
    if x.len() != z.len() {
        return Err(Error::Dimension {
            expected: x.len(),
            got: z.len(),
        });
    }
    if let Some(i) = x.iter().chain(z).position(|v| !v.is_finite()) {
        return Err(Error::arg(format!("non-finite feature value at position {}", i % x.len().max(1))));
    }
    Ok(x.len())
}

fn check_samples(s0: &[Vec<f64>], s1: &[Vec<f64>]) -> Result<usize> {
    if s0.is_empty() || s1.is_empty() {
        return Err(Error::arg("sample sets must be non-empty"));
    }
    let d = s0[0].len();
    for row in s0.iter().chain(s1) {
        if row.len() != d {
            return Err(Error::Dimension {
                expected: d,
                got: row.len(),
            });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::arg("non-finite feature value in sample"));
        }
    }
    Ok(d)
}

pub fn local_shapley<M: Model + ?Sized>(f: &M, x: &[f64], z: &[f64]) -> Result<AttributionVector> {
    Explainer::new(f).local(x, z)
}

pub fn global_shapley_mc<M: Model + ?Sized>(
    f: &M,
    s0: &[Vec<f64>],
    s1: &[Vec<f64>],
) -> Result<AttributionVector> {
    Explainer::new(f).global(s0, s1)
}

pub fn per_background_coeffs<M: Model + ?Sized>(
    f: &M,
    s0_prime: &[Vec<f64>],
    d1: &[Vec<f64>],
    s: usize,
) -> Result<BackgroundCoefficients> {
    let d = check_samples(s0_prime, d1)?;
    if s >= d {
        return Err(Error::Index { index: s, len: d });
    }
    let ids = (0..s0_prime.len()).collect();
    Explainer::new(f)
        .coefficient_matrix(s0_prime, d1, ids)?
        .for_feature(s)
}

/// `Σ_j ω_j · coeffs[j]`, the limit of the manipulated estimate.
pub fn weighted_gsv(coeffs: &BackgroundCoefficients, omega: &[f64]) -> Result<f64> {
    if coeffs.len() != omega.len() {
        return Err(Error::Dimension {
            expected: coeffs.len(),
            got: omega.len(),
        });
    }
    check_simplex(omega)?;
    Ok(coeffs.coeffs.iter().zip(omega).map(|(c, w)| c * w).sum())
}

pub(crate) fn check_simplex(omega: &[f64]) -> Result<()> {
    if let Some(w) = omega.iter().find(|w| !(**w >= -1e-9) || !w.is_finite()) {
        return Err(Error::Invariant(format!("weight {w} is negative or not finite")));
    }
    let total: f64 = omega.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Invariant(format!("weights sum to {total}, not 1")));
    }
    Ok(())
}

pub fn gsv_confidence_interval<M: Model + ?Sized>(
    f: &M,
    s0: &[Vec<f64>],
    s1: &[Vec<f64>],
    k: usize,
    delta: f64,
) -> Result<ConfidenceInterval> {
    Explainer::new(f).confidence_interval(s0, s1, k, delta)
}
