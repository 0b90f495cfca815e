//! Brute-force oracles and random instances shared by the integration tests.
#![allow(dead_code)]

use foolshap::model::Model;
use rand::Rng;

/// Smooth random function of `d` inputs: linear terms, pairwise products
/// and a few `tanh` bumps. Features listed in `ignored` are never read.
#[derive(Debug, Clone)]
pub struct RandomModel {
    pub d: usize,
    pub linear: Vec<f64>,
    pub pairs: Vec<(usize, usize, f64)>,
    pub bumps: Vec<(usize, f64, f64)>,
    pub bias: f64,
}

impl RandomModel {
    pub fn new<R: Rng>(rng: &mut R, d: usize, ignored: &[usize]) -> Self {
        let used: Vec<usize> = (0..d).filter(|i| !ignored.contains(i)).collect();
        let mut linear = vec![0.0; d];
        for &i in &used {
            linear[i] = rng.gen_range(-1.0..1.0);
        }
        let mut pairs = Vec::new();
        let mut bumps = Vec::new();
        if !used.is_empty() {
            for _ in 0..d {
                let a = used[rng.gen_range(0..used.len())];
                let b = used[rng.gen_range(0..used.len())];
                pairs.push((a, b, rng.gen_range(-0.5..0.5)));
            }
            for _ in 0..2 {
                let a = used[rng.gen_range(0..used.len())];
                bumps.push((a, rng.gen_range(-1.0..1.0), rng.gen_range(0.5..2.0)));
            }
        }
        Self {
            d,
            linear,
            pairs,
            bumps,
            bias: rng.gen_range(-0.5..0.5),
        }
    }
}

impl Model for RandomModel {
    fn predict(&self, x: &[f64]) -> f64 {
        let mut v = self.bias;
        for (w, xi) in self.linear.iter().zip(x) {
            v += w * xi;
        }
        for &(a, b, c) in &self.pairs {
            v += c * x[a] * x[b];
        }
        for &(a, c, s) in &self.bumps {
            v += c * (s * x[a]).tanh();
        }
        v
    }
}

pub fn random_point<R: Rng>(rng: &mut R, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect()
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// Average marginal contribution over all `d!` orderings.
pub fn permutation_lsv<M: Model>(f: &M, x: &[f64], z: &[f64]) -> Vec<f64> {
    let d = x.len();
    let perms = permutations(d);
    let mut phi = vec![0.0; d];
    for perm in &perms {
        let mut point = z.to_vec();
        let mut prev = f.predict(&point);
        for &i in perm {
            point[i] = x[i];
            let now = f.predict(&point);
            phi[i] += now - prev;
            prev = now;
        }
    }
    phi.iter().map(|p| p / perms.len() as f64).collect()
}

/// `∫₀¹ |Q_a(u) − Q_b(u)| du` for two weighted point sets.
pub fn quantile_w1(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let sorted = |s: &[(f64, f64)]| {
        let mut v: Vec<(f64, f64)> = s.iter().copied().filter(|p| p.1 > 0.0).collect();
        v.sort_by(|p, q| p.0.total_cmp(&q.0));
        v
    };
    let (a, b) = (sorted(a), sorted(b));
    let (mut i, mut j) = (0, 0);
    let (mut ra, mut rb) = (a[0].1, b[0].1);
    let mut total = 0.0;
    while i < a.len() && j < b.len() {
        let step = ra.min(rb);
        total += step * (a[i].0 - b[j].0).abs();
        ra -= step;
        rb -= step;
        if ra <= 1e-15 {
            i += 1;
            if i < a.len() {
                ra = a[i].1;
            }
        }
        if rb <= 1e-15 {
            j += 1;
            if j < b.len() {
                rb = b[j].1;
            }
        }
    }
    total
}

/// Every `k ∈ ℕⁿ` with `Σ k = n`.
pub fn compositions(n: usize) -> Vec<Vec<usize>> {
    fn rec(left: usize, slots: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if slots == 1 {
            cur.push(left);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for k in 0..=left {
            cur.push(k);
            rec(left - k, slots - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, n, &mut Vec::new(), &mut out);
    out
}

/// `Σ ω_j a_j + λ W(uniform(f), (f, ω))`.
pub fn scalarized(outputs: &[f64], costs: &[f64], omega: &[f64], lambda: f64) -> f64 {
    let n = outputs.len() as f64;
    let uniform: Vec<(f64, f64)> = outputs.iter().map(|&f| (f, 1.0 / n)).collect();
    let weighted: Vec<(f64, f64)> = outputs.iter().copied().zip(omega.iter().copied()).collect();
    let linear: f64 = omega.iter().zip(costs).map(|(w, a)| w * a).sum();
    linear + lambda * quantile_w1(&uniform, &weighted)
}

/// Minimum of the scalarized objective over integral weights `k/n`.
pub fn composition_optimum(outputs: &[f64], costs: &[f64], lambda: f64) -> (f64, Vec<f64>) {
    let n = outputs.len();
    let mut best = (f64::INFINITY, Vec::new());
    for k in compositions(n) {
        let omega: Vec<f64> = k.iter().map(|&c| c as f64 / n as f64).collect();
        let v = scalarized(outputs, costs, &omega, lambda);
        if v < best.0 {
            best = (v, omega);
        }
    }
    best
}
