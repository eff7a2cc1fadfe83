//! Finite-length Monte Carlo: random Tanner graphs from the configuration
//! model, flooding sum-product and min-sum decoders, and per-iteration BER
//! estimates under all-zero transmission.

use std::collections::HashSet;
use std::fmt::{self, Write as _};
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::channels::ChannelModel;
use crate::density_evolution::boxplus_magnitude;
use crate::ensembles::{DegreePolynomial, Ensemble};
use crate::error::{Error, Result};

/// Stand-in for an infinite LLR inside the decoders.
pub const LLR_SATURATION: f64 = 1e6;
/// Trials per batch when early stopping on an error-event target.
const BATCH: usize = 32;
const Z95: f64 = 1.959_963_984_540_054;

/// Bipartite graph with `n` variables and `m` checks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TannerGraph {
    n: usize,
    m: usize,
    edges: Vec<(u32, u32)>,
    var_offsets: Vec<usize>,
    var_edges: Vec<usize>,
    check_offsets: Vec<usize>,
    check_edges: Vec<usize>,
}

fn csr(count: usize, keys: impl Iterator<Item = usize> + Clone) -> (Vec<usize>, Vec<usize>) {
    let mut offsets = vec![0usize; count + 1];
    for k in keys.clone() {
        offsets[k + 1] += 1;
    }
    for i in 0..count {
        offsets[i + 1] += offsets[i];
    }
    let mut fill = offsets.clone();
    let mut list = vec![0usize; offsets[count]];
    for (e, k) in keys.enumerate() {
        list[fill[k]] = e;
        fill[k] += 1;
    }
    (offsets, list)
}

impl TannerGraph {
    /// Builds a graph from `(variable, check)` edges, rejecting out-of-range
    /// endpoints and repeated pairs.
    pub fn from_edges(n: usize, m: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut seen = HashSet::with_capacity(edges.len());
        for &(v, c) in edges {
            if v >= n || c >= m {
                return Err(Error::Precondition(format!(
                    "edge ({v}, {c}) outside a graph with {n} variables and {m} checks"
                )));
            }
            if !seen.insert((v, c)) {
                return Err(Error::Precondition(format!("duplicate edge ({v}, {c})")));
            }
        }
        let edges: Vec<(u32, u32)> = edges.iter().map(|&(v, c)| (v as u32, c as u32)).collect();
        let (var_offsets, var_edges) = csr(n, edges.iter().map(|e| e.0 as usize));
        let (check_offsets, check_edges) = csr(m, edges.iter().map(|e| e.1 as usize));
        Ok(Self {
            n,
            m,
            edges,
            var_offsets,
            var_edges,
            check_offsets,
            check_edges,
        })
    }

    pub fn num_vars(&self) -> usize {
        self.n
    }

    pub fn num_checks(&self) -> usize {
        self.m
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// `(variable, check)` endpoints of every edge.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().map(|&(v, c)| (v as usize, c as usize))
    }

    pub fn var_degree(&self, v: usize) -> usize {
        self.var_offsets[v + 1] - self.var_offsets[v]
    }

    pub fn check_degree(&self, c: usize) -> usize {
        self.check_offsets[c + 1] - self.check_offsets[c]
    }

    fn var_edge_ids(&self, v: usize) -> &[usize] {
        &self.var_edges[self.var_offsets[v]..self.var_offsets[v + 1]]
    }

    fn check_edge_ids(&self, c: usize) -> &[usize] {
        &self.check_edges[self.check_offsets[c]..self.check_offsets[c + 1]]
    }

    /// True when no `(variable, check)` pair repeats.
    pub fn is_simple(&self) -> bool {
        let mut seen = HashSet::with_capacity(self.edges.len());
        self.edges.iter().all(|e| seen.insert(*e))
    }

    /// True when every check is satisfied by the hard decisions `bits`.
    pub fn syndrome_is_zero(&self, bits: &[bool]) -> bool {
        (0..self.m).all(|c| {
            self.check_edge_ids(c)
                .iter()
                .filter(|&&e| bits[self.edges[e].0 as usize])
                .count()
                % 2
                == 0
        })
    }
}

/// Splits `total` items across the fractions of `dist` by largest remainder.
/// Returns `(degree, count)` pairs in increasing degree order.
fn largest_remainder(total: usize, dist: &DegreePolynomial) -> Vec<(usize, usize)> {
    let terms: Vec<(usize, f64)> = dist.terms().collect();
    let exact: Vec<f64> = terms.iter().map(|&(_, f)| f * total as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..terms.len()).collect();
    // stable: ties keep degree order
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.partial_cmp(&ra).unwrap()
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    terms.iter().zip(counts).map(|(&(d, _), c)| (d, c)).collect()
}

/// Variable and check degree sequences realizing the ensemble at length `n`.
pub fn degree_sequences(ens: &Ensemble, n: usize) -> Result<(Vec<usize>, Vec<usize>)> {
    if n == 0 {
        return Err(Error::Precondition("n must be positive".into()));
    }
    let var_degrees: Vec<usize> = largest_remainder(n, &ens.lambda().node_perspective())
        .into_iter()
        .flat_map(|(d, c)| std::iter::repeat_n(d, c))
        .collect();
    let sockets: usize = var_degrees.iter().sum();

    let check_nodes = ens.rho().node_perspective();
    let mean_check_degree: f64 = check_nodes.terms().map(|(d, f)| d as f64 * f).sum();
    let m = ((sockets as f64 / mean_check_degree).round() as usize).max(1);
    let mut check_degrees: Vec<usize> = largest_remainder(m, &check_nodes)
        .into_iter()
        .flat_map(|(d, c)| std::iter::repeat_n(d, c))
        .collect();

    // Absorb the socket mismatch into one highest-degree check.
    let mismatch = sockets as isize - check_degrees.iter().sum::<usize>() as isize;
    let last = check_degrees.last_mut().unwrap();
    let adjusted = *last as isize + mismatch;
    if adjusted < 1 {
        return Err(Error::Precondition(format!(
            "cannot balance {sockets} variable sockets with {m} checks"
        )));
    }
    *last = adjusted as usize;
    Ok((var_degrees, check_degrees))
}

/// Random graph from the configuration model: sockets are matched uniformly
/// at random and duplicate edges are removed by random endpoint swaps.
pub fn build_graph<R: Rng + ?Sized>(ens: &Ensemble, n: usize, rng: &mut R) -> Result<TannerGraph> {
    let (var_degrees, check_degrees) = degree_sequences(ens, n)?;
    let m = check_degrees.len();
    let var_sockets: Vec<usize> = var_degrees
        .iter()
        .enumerate()
        .flat_map(|(v, &d)| std::iter::repeat_n(v, d))
        .collect();
    let mut check_sockets: Vec<usize> = check_degrees
        .iter()
        .enumerate()
        .flat_map(|(c, &d)| std::iter::repeat_n(c, d))
        .collect();
    check_sockets.shuffle(rng);
    let mut edges: Vec<(usize, usize)> = var_sockets.into_iter().zip(check_sockets).collect();

    let mut present: HashSet<(usize, usize)> = HashSet::with_capacity(edges.len());
    let mut duplicates = Vec::new();
    for (e, &pair) in edges.iter().enumerate() {
        if !present.insert(pair) {
            duplicates.push(e);
        }
    }

    let cap = 100 * n;
    let mut attempts = 0;
    while let Some(&e) = duplicates.last() {
        if attempts >= cap {
            return Err(Error::RepairFailed {
                attempts,
                remaining: duplicates.len(),
            });
        }
        attempts += 1;
        let f = rng.random_range(0..edges.len());
        let ((ve, ce), (vf, cf)) = (edges[e], edges[f]);
        if ce == cf || present.contains(&(ve, cf)) || present.contains(&(vf, ce)) {
            continue;
        }
        // edge e's pair stays present through its other copy
        present.remove(&(vf, cf));
        present.insert((ve, cf));
        present.insert((vf, ce));
        edges[e] = (ve, cf);
        edges[f] = (vf, ce);
        duplicates.pop();
    }
    TannerGraph::from_edges(n, m, &edges)
}

/// Hard decision from a posterior LLR.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Zero,
    One,
    /// Posterior exactly 0; counted as half an error.
    Tie,
}

impl Decision {
    fn from_llr(llr: f64) -> Self {
        if llr > 0.0 {
            Self::Zero
        } else if llr < 0.0 {
            Self::One
        } else {
            Self::Tie
        }
    }

    /// Error weight in half-bits under all-zero transmission.
    fn half_errors(self) -> u64 {
        match self {
            Self::Zero => 0,
            Self::One => 2,
            Self::Tie => 1,
        }
    }
}

/// Message-passing algorithm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, serde::Deserialize)]
pub enum DecoderKind {
    #[serde(rename = "SP")]
    SumProduct,
    #[serde(rename = "MS")]
    MinSum,
}

impl fmt::Display for DecoderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::SumProduct => "SP",
            Self::MinSum => "MS",
        })
    }
}

impl FromStr for DecoderKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sp" | "sum-product" => Ok(Self::SumProduct),
            "ms" | "min-sum" => Ok(Self::MinSum),
            other => Err(Error::Parse(format!("unknown decoder \"{other}\" (expected sp or ms)"))),
        }
    }
}

fn saturate(x: f64) -> f64 {
    x.clamp(-LLR_SATURATION, LLR_SATURATION)
}

fn signed_boxplus(a: f64, b: f64) -> f64 {
    if a.is_infinite() {
        return if a > 0.0 { b } else { -b };
    }
    if b.is_infinite() {
        return if b > 0.0 { a } else { -a };
    }
    let mag = boxplus_magnitude(a.abs(), b.abs());
    if (a < 0.0) != (b < 0.0) {
        -mag
    } else {
        mag
    }
}

/// Reusable message buffers for one graph.
struct Flooding<'g> {
    graph: &'g TannerGraph,
    kind: DecoderKind,
    channel: Vec<f64>,
    v2c: Vec<f64>,
    c2v: Vec<f64>,
    prefix: Vec<f64>,
}

impl<'g> Flooding<'g> {
    fn new(graph: &'g TannerGraph, kind: DecoderKind, llrs: &[f64]) -> Self {
        let channel: Vec<f64> = llrs.iter().map(|&l| saturate(l)).collect();
        let v2c = graph.edges.iter().map(|&(v, _)| channel[v as usize]).collect();
        Self {
            graph,
            kind,
            channel,
            v2c,
            c2v: vec![0.0; graph.edges.len()],
            prefix: Vec::new(),
        }
    }

    fn check_phase(&mut self) {
        let g = self.graph;
        for c in 0..g.m {
            let ids = g.check_edge_ids(c);
            match self.kind {
                DecoderKind::MinSum => {
                    let mut negative = false;
                    let (mut min1, mut min2, mut argmin) = (f64::INFINITY, f64::INFINITY, usize::MAX);
                    for (k, &e) in ids.iter().enumerate() {
                        let x = self.v2c[e];
                        negative ^= x < 0.0;
                        let a = x.abs();
                        if a < min1 {
                            min2 = min1;
                            min1 = a;
                            argmin = k;
                        } else if a < min2 {
                            min2 = a;
                        }
                    }
                    for (k, &e) in ids.iter().enumerate() {
                        let x = self.v2c[e];
                        let mag = if k == argmin { min2 } else { min1 };
                        let mag = if mag.is_infinite() { LLR_SATURATION } else { mag };
                        let neg = negative ^ (x < 0.0);
                        self.c2v[e] = if neg { -mag } else { mag };
                    }
                }
                DecoderKind::SumProduct => {
                    // forward prefix, then sweep backward with a running suffix
                    self.prefix.clear();
                    let mut acc = f64::INFINITY;
                    for &e in ids {
                        self.prefix.push(acc);
                        acc = signed_boxplus(acc, self.v2c[e]);
                    }
                    let mut suffix = f64::INFINITY;
                    for (k, &e) in ids.iter().enumerate().rev() {
                        let out = signed_boxplus(self.prefix[k], suffix);
                        self.c2v[e] = saturate(out);
                        suffix = signed_boxplus(suffix, self.v2c[e]);
                    }
                }
            }
        }
    }

    /// Variable phase; writes the posterior LLR of every bit into `posterior`.
    fn variable_phase(&mut self, posterior: &mut [f64]) {
        let g = self.graph;
        for v in 0..g.n {
            let ids = g.var_edge_ids(v);
            let ch = self.channel[v];
            for &e in ids {
                let extrinsic = ids
                    .iter()
                    .filter(|&&o| o != e)
                    .fold(ch, |acc, &o| acc + self.c2v[o]);
                self.v2c[e] = saturate(extrinsic);
            }
            posterior[v] = ids.iter().fold(ch, |acc, &o| acc + self.c2v[o]);
        }
    }
}

/// Runs `max_iter` flooding iterations and reports the posterior LLRs after
/// each one (iteration 0 is the channel alone) to `observe`.
///
/// With `early_termination`, decoding stops once the hard decisions satisfy
/// every check; the last posteriors are then reported for the remaining
/// iterations so per-iteration statistics stay aligned.
pub fn decode_with<F>(
    graph: &TannerGraph,
    llrs: &[f64],
    max_iter: usize,
    kind: DecoderKind,
    early_termination: bool,
    mut observe: F,
) -> Result<()>
where
    F: FnMut(usize, &[f64]),
{
    if llrs.len() != graph.n {
        return Err(Error::Precondition(format!(
            "{} channel LLRs for {} variables",
            llrs.len(),
            graph.n
        )));
    }
    let mut state = Flooding::new(graph, kind, llrs);
    let mut posterior = state.channel.clone();
    observe(0, &posterior);
    let mut frozen = false;
    for l in 1..=max_iter {
        if !frozen {
            state.check_phase();
            state.variable_phase(&mut posterior);
            if early_termination {
                let bits: Vec<bool> = posterior.iter().map(|&x| x <= 0.0).collect();
                frozen = posterior.iter().all(|&x| x != 0.0) && graph.syndrome_is_zero(&bits);
            }
        }
        observe(l, &posterior);
    }
    Ok(())
}

fn decode_decisions(graph: &TannerGraph, llrs: &[f64], max_iter: usize, kind: DecoderKind) -> Result<Vec<Vec<Decision>>> {
    let mut out = Vec::with_capacity(max_iter + 1);
    decode_with(graph, llrs, max_iter, kind, false, |_, post| {
        out.push(post.iter().map(|&x| Decision::from_llr(x)).collect());
    })?;
    Ok(out)
}

/// Flooding sum-product decoding; entry `l` holds the decisions after `l` iterations.
pub fn sp_decode(graph: &TannerGraph, llrs: &[f64], max_iter: usize) -> Result<Vec<Vec<Decision>>> {
    decode_decisions(graph, llrs, max_iter, DecoderKind::SumProduct)
}

/// Flooding min-sum decoding; entry `l` holds the decisions after `l` iterations.
pub fn ms_decode(graph: &TannerGraph, llrs: &[f64], max_iter: usize) -> Result<Vec<Vec<Decision>>> {
    decode_decisions(graph, llrs, max_iter, DecoderKind::MinSum)
}

/// Parameters of a Monte Carlo run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub master_seed: u64,
    pub trials: usize,
    pub max_iter: usize,
    /// Stop after the batch in which this many final-iteration bit errors accumulate.
    pub target_error_events: Option<u64>,
    pub channel: ChannelModel,
    pub ensemble: Ensemble,
    pub n: usize,
    pub early_termination: bool,
}

/// Per-iteration BER estimates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationResult {
    pub decoder: DecoderKind,
    pub n: usize,
    pub trials: usize,
    pub ber: Vec<f64>,
    /// Standard error of the mean from the spread of per-trial BERs.
    pub std_error: Vec<f64>,
    /// Wilson 95% half-width over all simulated bits.
    pub ci95: Vec<f64>,
    pub wall_time_secs: f64,
}

/// Wilson score interval half-width for `p_hat` over `bits` Bernoulli draws.
pub fn wilson_half_width(p_hat: f64, bits: f64) -> f64 {
    let z2 = Z95 * Z95;
    Z95 / (1.0 + z2 / bits) * (p_hat * (1.0 - p_hat) / bits + z2 / (4.0 * bits * bits)).sqrt()
}

/// The random stream owned by `trial`.
pub fn trial_rng(master_seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(trial);
    rng
}

/// Per-iteration half-bit error counts of one trial.
fn run_trial(cfg: &SimulationConfig, decoder: DecoderKind, trial: u64) -> Result<Vec<u64>> {
    let mut rng = trial_rng(cfg.master_seed, trial);
    let graph = build_graph(&cfg.ensemble, cfg.n, &mut rng)?;
    let llrs: Vec<f64> = (0..cfg.n).map(|_| cfg.channel.sample_llr(&mut rng)).collect();
    let mut counts = vec![0u64; cfg.max_iter + 1];
    decode_with(&graph, &llrs, cfg.max_iter, decoder, cfg.early_termination, |l, post| {
        counts[l] = post.iter().map(|&x| Decision::from_llr(x).half_errors()).sum();
    })?;
    Ok(counts)
}

/// Estimates per-iteration BER over independent trials, each with a fresh
/// graph and channel realization drawn from its own random stream. Results
/// depend only on the configuration, not on the rayon pool size.
pub fn monte_carlo(cfg: &SimulationConfig, decoder: DecoderKind) -> Result<SimulationResult> {
    if cfg.trials == 0 {
        return Err(Error::Precondition("trials must be at least 1".into()));
    }
    if cfg.max_iter == 0 {
        return Err(Error::Precondition("max_iter must be at least 1".into()));
    }
    let started = Instant::now();
    let iters = cfg.max_iter + 1;
    let mut sum = vec![0u64; iters];
    let mut sum_sq = vec![0u128; iters];
    let mut done = 0usize;

    let batch = if cfg.target_error_events.is_some() { BATCH } else { cfg.trials };
    while done < cfg.trials {
        let end = (done + batch).min(cfg.trials);
        let results: Vec<Vec<u64>> = (done..end)
            .into_par_iter()
            .map(|t| run_trial(cfg, decoder, t as u64))
            .collect::<Result<_>>()?;
        for counts in results {
            for (l, &c) in counts.iter().enumerate() {
                sum[l] += c;
                sum_sq[l] += (c as u128) * (c as u128);
            }
        }
        done = end;
        if let Some(target) = cfg.target_error_events {
            if sum[cfg.max_iter] / 2 >= target {
                break;
            }
        }
    }

    let half_bits = 2.0 * cfg.n as f64;
    let trials = done as f64;
    let bits = cfg.n as f64 * trials;
    let mut ber = Vec::with_capacity(iters);
    let mut std_error = Vec::with_capacity(iters);
    let mut ci95 = Vec::with_capacity(iters);
    for l in 0..iters {
        let mean = sum[l] as f64 / half_bits / trials;
        let second = sum_sq[l] as f64 / (half_bits * half_bits) / trials;
        let var = if done > 1 {
            ((second - mean * mean) * trials / (trials - 1.0)).max(0.0)
        } else {
            0.0
        };
        ber.push(mean);
        std_error.push((var / trials).sqrt());
        ci95.push(wilson_half_width(mean, bits));
    }
    Ok(SimulationResult {
        decoder,
        n: cfg.n,
        trials: done,
        ber,
        std_error,
        ci95,
        wall_time_secs: started.elapsed().as_secs_f64(),
    })
}

/// Header of the simulation CSV.
pub const SIMULATION_CSV_HEADER: &str = "iteration,ber,ci95,decoder,n,channel,seed,trials";

impl SimulationResult {
    /// Rows `iteration,ber,ci95,decoder,n,channel,seed,trials` (no header).
    pub fn write_csv_rows(&self, channel: &ChannelModel, seed: u64, out: &mut String) {
        for (l, (b, h)) in self.ber.iter().zip(&self.ci95).enumerate() {
            writeln!(out, "{l},{b},{h},{},{},{channel},{seed},{}", self.decoder, self.n, self.trials).unwrap();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reg(dv: usize, dc: usize) -> Ensemble {
        Ensemble::regular(dv, dc).unwrap()
    }

    #[test]
    fn regular_socket_counts() {
        let mut rng = trial_rng(1, 0);
        let g = build_graph(&reg(3, 6), 1000, &mut rng).unwrap();
        assert_eq!((g.num_vars(), g.num_checks(), g.num_edges()), (1000, 500, 3000));
        assert!(g.is_simple());
        assert!((0..500).all(|c| g.check_degree(c) == 6));
        let g = build_graph(&reg(3, 6), 10, &mut rng).unwrap();
        assert_eq!((g.num_checks(), g.num_edges()), (5, 30));
        assert!(g.is_simple());
    }

    #[test]
    fn same_seed_same_graph() {
        let a = build_graph(&reg(3, 6), 500, &mut trial_rng(9, 3)).unwrap();
        let b = build_graph(&reg(3, 6), 500, &mut trial_rng(9, 3)).unwrap();
        let c = build_graph(&reg(3, 6), 500, &mut trial_rng(9, 4)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn irregular_degree_realization() {
        let lambda = DegreePolynomial::from_pairs([(2, 0.3), (3, 0.4), (8, 0.3)]).unwrap();
        let rho = DegreePolynomial::from_pairs([(6, 0.5), (7, 0.5)]).unwrap();
        let ens = Ensemble::new(lambda, rho).unwrap();
        let n = 2000;
        let g = build_graph(&ens, n, &mut trial_rng(5, 0)).unwrap();
        assert!(g.is_simple());
        let target = ens.lambda().node_perspective();
        let tv: f64 = (1..=8)
            .map(|d| {
                let emp = (0..n).filter(|&v| g.var_degree(v) == d).count() as f64 / n as f64;
                (emp - target.coeff(d)).abs()
            })
            .sum::<f64>()
            * 0.5;
        assert!(tv <= 2.0 / (n as f64).sqrt(), "tv {tv}");
        let var_sockets: usize = (0..n).map(|v| g.var_degree(v)).sum();
        let check_sockets: usize = (0..g.num_checks()).map(|c| g.check_degree(c)).sum();
        assert_eq!(var_sockets, check_sockets);
    }

    #[test]
    fn largest_remainder_sums() {
        let d = DegreePolynomial::from_pairs([(2, 1.0 / 3.0), (3, 1.0 / 3.0), (4, 1.0 / 3.0)]).unwrap();
        let counts = largest_remainder(100, &d);
        assert_eq!(counts.iter().map(|c| c.1).sum::<usize>(), 100);
        assert_eq!(counts, vec![(2, 34), (3, 33), (4, 33)]);
    }

    #[test]
    fn certain_inputs_never_err() {
        let g = build_graph(&reg(3, 6), 200, &mut trial_rng(2, 0)).unwrap();
        let llrs = vec![f64::INFINITY; 200];
        for kind in [DecoderKind::SumProduct, DecoderKind::MinSum] {
            let d = decode_decisions(&g, &llrs, 5, kind).unwrap();
            assert!(d.iter().flatten().all(|&x| x == Decision::Zero));
        }
    }

    #[test]
    fn isolated_variable_keeps_channel_sign() {
        let g = TannerGraph::from_edges(1, 0, &[]).unwrap();
        for (llr, want) in [(1.5, Decision::Zero), (-0.2, Decision::One), (0.0, Decision::Tie)] {
            let d = sp_decode(&g, &[llr], 3).unwrap();
            assert!(d.iter().all(|it| it[0] == want));
        }
    }

    #[test]
    fn from_edges_validation() {
        assert!(TannerGraph::from_edges(2, 1, &[(0, 0), (0, 0)]).is_err());
        assert!(TannerGraph::from_edges(2, 1, &[(2, 0)]).is_err());
        let g = TannerGraph::from_edges(3, 1, &[(0, 0), (1, 0), (2, 0)]).unwrap();
        assert!(sp_decode(&g, &[1.0], 1).is_err());
    }

    #[test]
    fn single_check_rules() {
        // one check over three bits: extrinsic of bit 0 combines bits 1 and 2
        let g = TannerGraph::from_edges(3, 1, &[(0, 0), (1, 0), (2, 0)]).unwrap();
        let llrs = [0.5, -2.0, 3.0];
        let mut sp_post = Vec::new();
        decode_with(&g, &llrs, 1, DecoderKind::SumProduct, false, |l, p| {
            if l == 1 {
                sp_post = p.to_vec();
            }
        })
        .unwrap();
        let expect = 0.5 - 2.0 * ((1.0f64).tanh() * (1.5f64).tanh()).atanh();
        assert!((sp_post[0] - expect).abs() < 1e-12);
        let mut ms_post = Vec::new();
        decode_with(&g, &llrs, 1, DecoderKind::MinSum, false, |l, p| {
            if l == 1 {
                ms_post = p.to_vec();
            }
        })
        .unwrap();
        assert_eq!(ms_post, vec![0.5 - 2.0, -2.0 + 0.5, 3.0 - 0.5]);
    }

    #[test]
    fn erasure_decoding_is_exact() {
        // a degree-2 check chain: an erased bit next to a known one is recovered
        let g = TannerGraph::from_edges(2, 1, &[(0, 0), (1, 0)]).unwrap();
        let d = sp_decode(&g, &[0.0, f64::INFINITY], 2).unwrap();
        assert_eq!(d[0], vec![Decision::Tie, Decision::Zero]);
        assert_eq!(d[1], vec![Decision::Zero, Decision::Zero]);
        let d = ms_decode(&g, &[0.0, 0.0], 2).unwrap();
        assert_eq!(d[2], vec![Decision::Tie, Decision::Tie]);
    }

    #[test]
    fn monte_carlo_guards_and_determinism() {
        let cfg = SimulationConfig {
            master_seed: 11,
            trials: 0,
            max_iter: 3,
            target_error_events: None,
            channel: ChannelModel::bsc(0.03).unwrap(),
            ensemble: reg(3, 6),
            n: 200,
            early_termination: false,
        };
        assert!(matches!(monte_carlo(&cfg, DecoderKind::SumProduct), Err(Error::Precondition(_))));
        let cfg = SimulationConfig { trials: 8, ..cfg };
        let a = monte_carlo(&cfg, DecoderKind::SumProduct).unwrap();
        let b = monte_carlo(&cfg, DecoderKind::SumProduct).unwrap();
        assert_eq!(a.ber, b.ber);
        assert_eq!(a.ci95, b.ci95);
        assert!(a.ber.iter().all(|&x| (0.0..=1.0).contains(&x)));
        assert!(a.ci95.iter().all(|&x| x >= 0.0));
        assert!((a.ber[0] - 0.03).abs() < 0.02);
    }

    #[test]
    fn early_stop_on_error_target() {
        let cfg = SimulationConfig {
            master_seed: 3,
            trials: 1000,
            max_iter: 2,
            target_error_events: Some(10),
            channel: ChannelModel::bec(0.6).unwrap(),
            ensemble: reg(3, 6),
            n: 100,
            early_termination: false,
        };
        let r = monte_carlo(&cfg, DecoderKind::SumProduct).unwrap();
        assert_eq!(r.trials, BATCH);
    }

    #[test]
    fn wilson_width_shrinks() {
        assert!(wilson_half_width(0.1, 1e4) > wilson_half_width(0.1, 1e6));
        assert!(wilson_half_width(0.0, 100.0) > 0.0);
    }
}
