//! Output-space Wasserstein distance and the minimum-cost-flow computation
//! of stealthily biased background weights.
//!
//! The weight problem is
//!
//! ```text
//! min_ω  Σ_j ω_j a_j + λ W(uniform(D1), (D1, ω))      a_j = Σ_s β_s coeffs_s[j]
//! ```
//!
//! and is solved as a min-cost flow on the graph
//! `source → ℓ_j → r_i → sink` (costs `a_j`, `λ|f_i − f_j|`, `0`; only the
//! sink arcs are capacitated, at 1). Flow `ω̃_j = N1 ω_j` enters `ℓ_j` and
//! `π̃_ij = N1 π_ij` crosses `ℓ_j → r_i`.
//!
//! Two exact solvers are provided. [`solve_mcf`] runs successive shortest
//! augmenting paths with node potentials on the explicit network and is used
//! up to `dense_limit` background instances. Above that the envelope solver
//! exploits that only the sink arcs carry capacities: every `r_i` is served
//! along its own cheapest `source → ℓ_j → r_i` path, and on the real line
//! those paths come out of two sorted sweeps in `O(N1 log N1)`.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tracing::warn;

use crate::error::{Error, Result};
use crate::rng::{child, sample_without_replacement};
use crate::shapley::{check_simplex, BackgroundCoefficients};

const COST_EPS: f64 = 1e-12;

/// Optimal transport cost between two weighted point sets on the real line,
/// computed as `∫ |F_a(t) − F_b(t)| dt`.
pub fn wasserstein_1d(a: &[(f64, f64)], b: &[(f64, f64)]) -> Result<f64> {
    for (name, set) in [("first", a), ("second", b)] {
        if set.is_empty() {
            return Err(Error::arg(format!("{name} distribution is empty")));
        }
        let mut total = 0.0;
        for &(v, w) in set {
            if !v.is_finite() || !w.is_finite() {
                return Err(Error::arg(format!("{name} distribution has a non-finite entry")));
            }
            if w < 0.0 {
                return Err(Error::arg(format!("{name} distribution has negative weight {w}")));
            }
            total += w;
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::arg(format!("{name} distribution weights sum to {total}")));
        }
    }
    let mut events: Vec<(f64, f64)> = a
        .iter()
        .map(|&(v, w)| (v, w))
        .chain(b.iter().map(|&(v, w)| (v, -w)))
        .collect();
    events.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut cdf_gap = 0.0;
    let mut dist = 0.0;
    for k in 0..events.len() {
        cdf_gap += events[k].1;
        if k + 1 < events.len() {
            dist += cdf_gap.abs() * (events[k + 1].0 - events[k].0);
        }
    }
    Ok(dist)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowEdge {
    pub from: usize,
    pub to: usize,
    pub cost: f64,
    /// `None` means unbounded.
    pub capacity: Option<u64>,
}

/// A single-commodity network with `demand` units to route from `source`
/// to `sink`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowNetwork {
    pub n_nodes: usize,
    pub source: usize,
    pub sink: usize,
    pub demand: u64,
    pub edges: Vec<FlowEdge>,
}

impl FlowNetwork {
    /// The reweighting network over `n` background instances. Node layout:
    /// source `0`, `ℓ_j = 1 + j`, `r_i = 1 + n + i`, sink `1 + 2n`. Edge
    /// layout: `source → ℓ_j` at `j`, `ℓ_j → r_i` at `n + j·n + i`,
    /// `r_i → sink` at `n + n² + i`.
    pub fn background_reweighting(source_costs: &[f64], outputs: &[f64], lambda: f64) -> Result<Self> {
        let n = source_costs.len();
        if n == 0 {
            return Err(Error::arg("no background instances"));
        }
        if outputs.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: outputs.len(),
            });
        }
        let sink = 1 + 2 * n;
        let mut edges = Vec::with_capacity(n * (n + 2));
        for (j, &a) in source_costs.iter().enumerate() {
            edges.push(FlowEdge {
                from: 0,
                to: 1 + j,
                cost: a,
                capacity: None,
            });
        }
        for j in 0..n {
            for i in 0..n {
                edges.push(FlowEdge {
                    from: 1 + j,
                    to: 1 + n + i,
                    cost: lambda * (outputs[i] - outputs[j]).abs(),
                    capacity: None,
                });
            }
        }
        for i in 0..n {
            edges.push(FlowEdge {
                from: 1 + n + i,
                to: sink,
                cost: 0.0,
                capacity: Some(1),
            });
        }
        let net = FlowNetwork {
            n_nodes: 2 * n + 2,
            source: 0,
            sink,
            demand: n as u64,
            edges,
        };
        net.validate()?;
        Ok(net)
    }

    pub fn validate(&self) -> Result<()> {
        if self.source >= self.n_nodes || self.sink >= self.n_nodes {
            return Err(Error::Structural("source or sink out of range".into()));
        }
        if self.source == self.sink {
            return Err(Error::Structural("source equals sink".into()));
        }
        for (k, e) in self.edges.iter().enumerate() {
            if e.from >= self.n_nodes || e.to >= self.n_nodes {
                return Err(Error::Structural(format!("edge {k} references a missing node")));
            }
            if !e.cost.is_finite() {
                return Err(Error::Structural(format!("edge {k} has non-finite cost")));
            }
        }
        Ok(())
    }
}

/// Integral optimal flow, one entry per network edge.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowAssignment {
    pub flows: Vec<u64>,
    pub cost: f64,
}

#[derive(Clone, Copy)]
struct Arc {
    to: usize,
    rev: usize,
    cap: u64,
    cost: f64,
    edge: Option<usize>,
}

#[derive(PartialEq)]
struct Dist(f64);

impl Eq for Dist {}

impl PartialOrd for Dist {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Dist {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Successive shortest augmenting paths with Johnson potentials.
pub fn solve_mcf(net: &FlowNetwork) -> Result<FlowAssignment> {
    net.validate()?;
    let n = net.n_nodes;
    let unbounded = net.demand.max(1);
    let mut graph: Vec<Vec<Arc>> = vec![Vec::new(); n];
    for (k, e) in net.edges.iter().enumerate() {
        let cap = e.capacity.map_or(unbounded, |c| c.min(unbounded));
        let fwd = graph[e.from].len();
        let bwd = graph[e.to].len() + usize::from(e.from == e.to);
        graph[e.from].push(Arc {
            to: e.to,
            rev: bwd,
            cap,
            cost: e.cost,
            edge: Some(k),
        });
        graph[e.to].push(Arc {
            to: e.from,
            rev: fwd,
            cap: 0,
            cost: -e.cost,
            edge: None,
        });
    }

    let mut potential = initial_potentials(&graph, net.source)?;
    let mut flow = 0u64;
    let mut dist = vec![f64::INFINITY; n];
    let mut prev: Vec<Option<(usize, usize)>> = vec![None; n];
    let mut done = vec![false; n];
    while flow < net.demand {
        dist.fill(f64::INFINITY);
        prev.fill(None);
        done.fill(false);
        dist[net.source] = 0.0;
        let mut heap = BinaryHeap::new();
        heap.push(Reverse((Dist(0.0), net.source)));
        while let Some(Reverse((Dist(d), u))) = heap.pop() {
            if done[u] {
                continue;
            }
            done[u] = true;
            for (k, arc) in graph[u].iter().enumerate() {
                if arc.cap == 0 || done[arc.to] {
                    continue;
                }
                let reduced = (arc.cost + potential[u] - potential[arc.to]).max(0.0);
                let nd = d + reduced;
                if nd < dist[arc.to] - COST_EPS {
                    dist[arc.to] = nd;
                    prev[arc.to] = Some((u, k));
                    heap.push(Reverse((Dist(nd), arc.to)));
                }
            }
        }
        if !dist[net.sink].is_finite() {
            return Err(Error::Structural(format!(
                "only {flow} of {} units can reach the sink",
                net.demand
            )));
        }
        let reach = dist[net.sink];
        for v in 0..n {
            potential[v] += dist[v].min(reach);
        }

        let mut push = net.demand - flow;
        let mut v = net.sink;
        while let Some((u, k)) = prev[v] {
            push = push.min(graph[u][k].cap);
            v = u;
        }
        let mut v = net.sink;
        while let Some((u, k)) = prev[v] {
            let rev = graph[u][k].rev;
            graph[u][k].cap -= push;
            graph[v][rev].cap += push;
            v = u;
        }
        flow += push;
    }

    let mut flows = vec![0u64; net.edges.len()];
    for arcs in &graph {
        for arc in arcs {
            if let Some(k) = arc.edge {
                let e = &net.edges[k];
                let cap = e.capacity.map_or(unbounded, |c| c.min(unbounded));
                flows[k] = cap - arc.cap;
            }
        }
    }
    let cost = flows
        .iter()
        .zip(&net.edges)
        .map(|(&f, e)| f as f64 * e.cost)
        .sum();
    Ok(FlowAssignment { flows, cost })
}

/// Shortest distances from `source` over arcs with residual capacity
/// (queue-based Bellman-Ford); arbitrary-sign costs are allowed.
fn initial_potentials(graph: &[Vec<Arc>], source: usize) -> Result<Vec<f64>> {
    let n = graph.len();
    let mut dist = vec![f64::INFINITY; n];
    let mut queued = vec![false; n];
    let mut relax_count = vec![0usize; n];
    let mut queue = std::collections::VecDeque::new();
    dist[source] = 0.0;
    queue.push_back(source);
    queued[source] = true;
    while let Some(u) = queue.pop_front() {
        queued[u] = false;
        for arc in &graph[u] {
            if arc.cap == 0 {
                continue;
            }
            let nd = dist[u] + arc.cost;
            if nd < dist[arc.to] - COST_EPS {
                dist[arc.to] = nd;
                relax_count[arc.to] += 1;
                if relax_count[arc.to] > n {
                    return Err(Error::Structural("negative-cost cycle".into()));
                }
                if !queued[arc.to] {
                    queued[arc.to] = true;
                    queue.push_back(arc.to);
                }
            }
        }
    }
    // unreachable nodes never enter a shortest path; any finite value works
    let floor = dist.iter().copied().filter(|d| d.is_finite()).fold(0.0, f64::max);
    Ok(dist.into_iter().map(|d| if d.is_finite() { d } else { floor }).collect())
}

/// One nonzero entry `π_ij` of the coupling between the uniform background
/// (`i`) and the reweighted one (`j`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingEntry {
    pub i: usize,
    pub j: usize,
    pub pi: f64,
}

/// Output of the reweighting: `ω`, a coupling witnessing its transport cost,
/// and the scalarization weight used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackgroundWeights {
    pub omega: Vec<f64>,
    pub coupling: Vec<CouplingEntry>,
    pub wasserstein_cost: f64,
    pub lambda: f64,
}

impl BackgroundWeights {
    pub fn uniform(outputs: &[f64]) -> Self {
        let n = outputs.len();
        let w = 1.0 / n as f64;
        Self {
            omega: vec![w; n],
            coupling: (0..n).map(|i| CouplingEntry { i, j: i, pi: w }).collect(),
            wasserstein_cost: 0.0,
            lambda: f64::INFINITY,
        }
    }

    /// `Σ_j ω_j a_j`.
    pub fn linear_term(&self, source_costs: &[f64]) -> f64 {
        self.omega.iter().zip(source_costs).map(|(w, a)| w * a).sum()
    }

    pub fn coupling_cost(&self, outputs: &[f64]) -> f64 {
        self.coupling
            .iter()
            .map(|e| e.pi * (outputs[e.i] - outputs[e.j]).abs())
            .sum()
    }

    /// Row sums of the coupling (each should be `1/N1`) and column sums
    /// (each should be `ω_j`).
    pub fn marginals(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.omega.len();
        let mut rows = vec![0.0; n];
        let mut cols = vec![0.0; n];
        for e in &self.coupling {
            rows[e.i] += e.pi;
            cols[e.j] += e.pi;
        }
        (rows, cols)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>, instance_ids: &[usize]) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["instance_id", "omega"])?;
        for (id, om) in instance_ids.iter().zip(&self.omega) {
            w.write_record([id.to_string(), om.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_coupling_csv(&self, path: impl AsRef<Path>, instance_ids: &[usize]) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "i,j,pi")?;
        for e in &self.coupling {
            writeln!(out, "{},{},{}", instance_ids[e.i], instance_ids[e.j], e.pi)?;
        }
        out.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Solver {
    /// Network solver up to `dense_limit`, envelope above.
    #[default]
    Auto,
    Network,
    Envelope,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bootstrap {
    pub replicates: usize,
    pub size: usize,
    /// Only used when the background has more than this many instances.
    pub above: usize,
    pub seed: u64,
}

impl Default for Bootstrap {
    fn default() -> Self {
        Self {
            replicates: 5,
            size: 2000,
            above: 2000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightOptions {
    pub solver: Solver,
    pub dense_limit: usize,
    pub bootstrap: Option<Bootstrap>,
}

impl Default for WeightOptions {
    fn default() -> Self {
        Self {
            solver: Solver::Auto,
            dense_limit: 512,
            bootstrap: None,
        }
    }
}

/// `sign(Σ coeffs)`, with `+1` when the sum is exactly zero.
pub fn beta_of(coeffs: &[f64]) -> f64 {
    let total: f64 = coeffs.iter().sum();
    if total == 0.0 {
        warn!("coefficients sum to exactly zero; using beta = +1");
        1.0
    } else {
        total.signum()
    }
}

/// Per-instance source costs `Σ_s β_s coeffs_s[j]`.
pub fn aggregate_costs(coeffs_set: &[&[f64]]) -> Result<Vec<f64>> {
    let Some(first) = coeffs_set.first() else {
        return Err(Error::arg("at least one sensitive feature is required"));
    };
    let n = first.len();
    let mut costs = vec![0.0; n];
    for c in coeffs_set {
        if c.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: c.len(),
            });
        }
        let beta = beta_of(c);
        for (a, v) in costs.iter_mut().zip(c.iter()) {
            *a += beta * v;
        }
    }
    Ok(costs)
}

/// Attack weights for one sensitive feature with default options.
pub fn compute_weights(
    outputs: &[f64],
    coeffs: &BackgroundCoefficients,
    lambda: f64,
) -> Result<BackgroundWeights> {
    compute_weights_with(outputs, coeffs, lambda, &WeightOptions::default())
}

pub fn compute_weights_with(
    outputs: &[f64],
    coeffs: &BackgroundCoefficients,
    lambda: f64,
    opts: &WeightOptions,
) -> Result<BackgroundWeights> {
    let costs = aggregate_costs(&[&coeffs.coeffs])?;
    weights_for_costs(outputs, &costs, lambda, opts)
}

/// Weights minimizing the summed signed attribution of several sensitive
/// features.
pub fn compute_weights_multi(
    outputs: &[f64],
    coeffs_set: &[BackgroundCoefficients],
    lambda: f64,
) -> Result<BackgroundWeights> {
    compute_weights_multi_with(outputs, coeffs_set, lambda, &WeightOptions::default())
}

pub fn compute_weights_multi_with(
    outputs: &[f64],
    coeffs_set: &[BackgroundCoefficients],
    lambda: f64,
    opts: &WeightOptions,
) -> Result<BackgroundWeights> {
    let slices: Vec<&[f64]> = coeffs_set.iter().map(|c| c.coeffs.as_slice()).collect();
    let costs = aggregate_costs(&slices)?;
    weights_for_costs(outputs, &costs, lambda, opts)
}

/// Minimizes `Σ_j ω_j a_j + λ W` for arbitrary source costs `a`.
pub fn weights_for_costs(
    outputs: &[f64],
    costs: &[f64],
    lambda: f64,
    opts: &WeightOptions,
) -> Result<BackgroundWeights> {
    if !(lambda >= 0.0) {
        return Err(Error::arg(format!("lambda must be non-negative, got {lambda}")));
    }
    let n = costs.len();
    if n == 0 {
        return Err(Error::arg("no background instances"));
    }
    if outputs.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: outputs.len(),
        });
    }
    if outputs.iter().chain(costs).any(|v| !v.is_finite()) {
        return Err(Error::arg("outputs and coefficients must be finite"));
    }
    match &opts.bootstrap {
        Some(b) if n > b.above && b.size < n => bootstrap_weights(outputs, costs, lambda, opts, b),
        _ => single_solve(outputs, costs, lambda, opts),
    }
}

fn single_solve(outputs: &[f64], costs: &[f64], lambda: f64, opts: &WeightOptions) -> Result<BackgroundWeights> {
    let n = costs.len();
    let use_network = match opts.solver {
        Solver::Network => true,
        Solver::Envelope => false,
        Solver::Auto => n <= opts.dense_limit,
    };
    let (counts, pairs) = if use_network {
        network_solve(outputs, costs, lambda)?
    } else {
        envelope_solve(outputs, costs, lambda)
    };
    let omega: Vec<f64> = counts.iter().map(|&c| c as f64 / n as f64).collect();
    let coupling = if lambda > 0.0 {
        pairs
            .into_iter()
            .map(|(i, j, units)| CouplingEntry {
                i,
                j,
                pi: units as f64 / n as f64,
            })
            .collect()
    } else {
        // the transport term is inert at λ = 0, so the solver's plan need
        // not be optimal for its own ω
        optimal_coupling(outputs, &omega)
    };
    let wasserstein_cost = coupling
        .iter()
        .map(|e: &CouplingEntry| e.pi * (outputs[e.i] - outputs[e.j]).abs())
        .sum();
    Ok(BackgroundWeights {
        omega,
        coupling,
        wasserstein_cost,
        lambda,
    })
}

type Plan = (Vec<u64>, Vec<(usize, usize, u64)>);

fn network_solve(outputs: &[f64], costs: &[f64], lambda: f64) -> Result<Plan> {
    let n = costs.len();
    let net = FlowNetwork::background_reweighting(costs, outputs, lambda)?;
    let sol = solve_mcf(&net)?;
    let counts = sol.flows[..n].to_vec();
    let mut pairs = Vec::new();
    for j in 0..n {
        for i in 0..n {
            let units = sol.flows[n + j * n + i];
            if units > 0 {
                pairs.push((i, j, units));
            }
        }
    }
    pairs.sort_unstable();
    Ok((counts, pairs))
}

/// Serves every `r_i` from `argmin_j a_j + λ|f_i − f_j|` (lowest `j` on ties).
fn envelope_solve(outputs: &[f64], costs: &[f64], lambda: f64) -> Plan {
    let n = costs.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&p, &q| outputs[p].total_cmp(&outputs[q]).then(p.cmp(&q)));

    let better = |cand: (f64, usize), best: Option<(f64, usize)>| match best {
        None => true,
        Some(b) => cand.0 < b.0 || (cand.0 == b.0 && cand.1 < b.1),
    };

    // below[k]: best j with f_j <= f at sorted position k, keyed a_j − λ f_j
    let mut below: Vec<usize> = vec![0; n];
    let mut best: Option<(f64, usize)> = None;
    let mut k = 0;
    while k < n {
        let mut end = k;
        while end < n && outputs[order[end]] == outputs[order[k]] {
            let j = order[end];
            let key = (costs[j] - lambda * outputs[j], j);
            if better(key, best) {
                best = Some(key);
            }
            end += 1;
        }
        for slot in &mut below[k..end] {
            *slot = best.unwrap().1;
        }
        k = end;
    }
    // above[k]: best j with f_j >= f, keyed a_j + λ f_j
    let mut above: Vec<usize> = vec![0; n];
    best = None;
    let mut end = n;
    while end > 0 {
        let mut start = end;
        while start > 0 && outputs[order[start - 1]] == outputs[order[end - 1]] {
            let j = order[start - 1];
            let key = (costs[j] + lambda * outputs[j], j);
            if better(key, best) {
                best = Some(key);
            }
            start -= 1;
        }
        for slot in &mut above[start..end] {
            *slot = best.unwrap().1;
        }
        end = start;
    }

    let mut counts = vec![0u64; n];
    let mut pairs = Vec::with_capacity(n);
    for (pos, &i) in order.iter().enumerate() {
        let direct = |j: usize| costs[j] + lambda * (outputs[i] - outputs[j]).abs();
        let (l, r) = (below[pos], above[pos]);
        let (cl, cr) = (direct(l), direct(r));
        let j = if cl < cr || (cl == cr && l <= r) { l } else { r };
        counts[j] += 1;
        pairs.push((i, j, 1u64));
    }
    pairs.sort_unstable();
    (counts, pairs)
}

/// Monotone (north-west corner) coupling between `uniform(outputs)` and
/// `(outputs, omega)`, optimal for `|·|` cost on the line.
pub fn optimal_coupling(outputs: &[f64], omega: &[f64]) -> Vec<CouplingEntry> {
    let n = outputs.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&p, &q| outputs[p].total_cmp(&outputs[q]).then(p.cmp(&q)));
    // work in units of 1/n so integral weights stay integral
    let scale = n as f64;
    let mut supply: Vec<f64> = vec![1.0; n];
    let mut demand: Vec<f64> = order.iter().map(|&j| omega[j] * scale).collect();
    let mut entries = Vec::new();
    let (mut a, mut b) = (0, 0);
    while a < n && b < n {
        let moved = supply[a].min(demand[b]);
        if moved > 1e-12 {
            entries.push(CouplingEntry {
                i: order[a],
                j: order[b],
                pi: moved / scale,
            });
        }
        supply[a] -= moved;
        demand[b] -= moved;
        if supply[a] <= 1e-12 {
            a += 1;
        }
        if demand[b] <= 1e-12 {
            b += 1;
        }
    }
    entries.sort_by(|x, y| (x.i, x.j).cmp(&(y.i, y.j)));
    entries
}

fn bootstrap_weights(
    outputs: &[f64],
    costs: &[f64],
    lambda: f64,
    opts: &WeightOptions,
    boot: &Bootstrap,
) -> Result<BackgroundWeights> {
    if boot.replicates == 0 || boot.size == 0 {
        return Err(Error::arg("bootstrap needs at least one replicate of positive size"));
    }
    let n = costs.len();
    let size = boot.size.min(n);
    let replicas: Vec<Result<(Vec<usize>, Vec<f64>)>> = (0..boot.replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = child(boot.seed, r as u64);
            let idx = sample_without_replacement(&mut rng, n, size);
            let sub_out: Vec<f64> = idx.iter().map(|&k| outputs[k]).collect();
            let sub_cost: Vec<f64> = idx.iter().map(|&k| costs[k]).collect();
            let w = single_solve(&sub_out, &sub_cost, lambda, opts)?;
            Ok((idx, w.omega))
        })
        .collect();
    let mut omega = vec![0.0; n];
    for rep in replicas {
        let (idx, w) = rep?;
        for (k, v) in idx.into_iter().zip(w) {
            omega[k] += v;
        }
    }
    let total: f64 = omega.iter().sum();
    omega.iter_mut().for_each(|w| *w /= total);
    let coupling = optimal_coupling(outputs, &omega);
    let wasserstein_cost = coupling
        .iter()
        .map(|e| e.pi * (outputs[e.i] - outputs[e.j]).abs())
        .sum();
    Ok(BackgroundWeights {
        omega,
        coupling,
        wasserstein_cost,
        lambda,
    })
}

/// `W(uniform(outputs), (outputs, omega))` through [`wasserstein_1d`].
pub fn wasserstein_to_uniform(outputs: &[f64], omega: &[f64]) -> Result<f64> {
    check_simplex(omega)?;
    let n = outputs.len() as f64;
    let a: Vec<(f64, f64)> = outputs.iter().map(|&v| (v, 1.0 / n)).collect();
    let b: Vec<(f64, f64)> = outputs.iter().copied().zip(omega.iter().copied()).collect();
    wasserstein_1d(&a, &b)
}
