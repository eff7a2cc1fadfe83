//! Exhaustive ground truth on small regular tree codes.
//!
//! A tree code is enumerated completely, its reduced codebook extracted, and
//! the exact root-bit error probabilities of sequence-ML (min-sum) and
//! bitwise-MAP (sum-product) decoding computed by summing over every output
//! pattern of a finite-alphabet channel. Ties between root values are broken
//! by a fair coin.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::channels::ChannelModel;
use crate::error::{Error, Result};

/// Largest tree handled by exhaustive enumeration.
pub const MAX_BITS: usize = 22;
/// Largest erasure-channel tree (one output pattern per erasure mask, times the codebook).
pub const MAX_BEC_BITS: usize = 13;

/// How many child checks the root has.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Perspective {
    /// Root has `d_v − 1` child checks, like an outgoing edge message.
    Message,
    /// Root has `d_v` child checks, like a bit decision.
    Node,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeCheck {
    pub parent: usize,
    pub children: Vec<usize>,
}

/// A regular tree code with its full codebook. Bit 0 is the root; codewords
/// are bitmasks with bit `j` holding variable `j`.
#[derive(Debug, Clone)]
pub struct TreeCode {
    pub d_v: usize,
    pub d_c: usize,
    pub levels: usize,
    pub perspective: Perspective,
    pub n: usize,
    pub checks: Vec<TreeCheck>,
    pub codebook: Vec<u32>,
}

/// Builds the message-perspective tree with `levels` check levels below the root.
pub fn build_tree_code(d_v: usize, d_c: usize, levels: usize) -> Result<TreeCode> {
    build_tree_code_with(d_v, d_c, levels, Perspective::Message)
}

pub fn build_tree_code_with(d_v: usize, d_c: usize, levels: usize, perspective: Perspective) -> Result<TreeCode> {
    if !(2..=3).contains(&d_v) || !(3..=4).contains(&d_c) || levels > 2 {
        return Err(Error::SizeGuard(format!(
            "tree oracle supports 2 <= d_v <= 3, 3 <= d_c <= 4, levels <= 2; got ({d_v}, {d_c}, {levels})"
        )));
    }
    let root_checks = match perspective {
        Perspective::Message => d_v - 1,
        Perspective::Node => d_v,
    };

    let mut depth = vec![0usize];
    let mut checks = Vec::new();
    let mut v = 0;
    while v < depth.len() {
        if depth[v] < levels {
            let fan = if v == 0 { root_checks } else { d_v - 1 };
            for _ in 0..fan {
                let children: Vec<usize> = (0..d_c - 1)
                    .map(|_| {
                        depth.push(depth[v] + 1);
                        depth.len() - 1
                    })
                    .collect();
                checks.push(TreeCheck { parent: v, children });
            }
        }
        v += 1;
        if depth.len() > MAX_BITS {
            return Err(Error::SizeGuard(format!(
                "tree ({d_v}, {d_c}, {levels}) has more than {MAX_BITS} bits"
            )));
        }
    }
    let n = depth.len();

    // The last child of each check is determined by the parity constraint.
    let determined: Vec<usize> = checks.iter().map(|c| *c.children.last().unwrap()).collect();
    let free: Vec<usize> = (0..n).filter(|j| !determined.contains(j)).collect();
    let codebook = (0u32..1 << free.len())
        .map(|assign| {
            let mut word = 0u32;
            for (b, &j) in free.iter().enumerate() {
                word |= ((assign >> b) & 1) << j;
            }
            // checks are in breadth-first order, so parents are already set
            for c in &checks {
                let others = std::iter::once(c.parent)
                    .chain(c.children[..c.children.len() - 1].iter().copied())
                    .fold(0, |acc, j| acc ^ ((word >> j) & 1));
                word |= others << c.children.last().unwrap();
            }
            word
        })
        .collect();

    Ok(TreeCode {
        d_v,
        d_c,
        levels,
        perspective,
        n,
        checks,
        codebook,
    })
}

impl TreeCode {
    fn bit(word: u32, j: usize) -> u32 {
        (word >> j) & 1
    }

    /// Every check's neighborhood XORs to zero.
    pub fn satisfies_checks(&self, word: u32) -> bool {
        self.checks.iter().all(|c| {
            c.children
                .iter()
                .fold(Self::bit(word, c.parent), |acc, &j| acc ^ Self::bit(word, j))
                == 0
        })
    }

    /// `(variable, check)` pairs, for building the tree as a Tanner graph.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut edges = Vec::new();
        for (ci, c) in self.checks.iter().enumerate() {
            edges.push((c.parent, ci));
            edges.extend(c.children.iter().map(|&v| (v, ci)));
        }
        edges
    }

    /// Reduced codebook: root 1, each check under a 1 has exactly one child 1,
    /// each check under a 0 has only 0 children.
    pub fn reduced_codebook(&self) -> Vec<u32> {
        self.codebook
            .iter()
            .copied()
            .filter(|&w| {
                Self::bit(w, 0) == 1
                    && self.checks.iter().all(|c| {
                        let ones: u32 = c.children.iter().map(|&j| Self::bit(w, j)).sum();
                        if Self::bit(w, c.parent) == 1 {
                            ones == 1
                        } else {
                            ones == 0
                        }
                    })
            })
            .collect()
    }

    /// Number of reduced codewords per Hamming weight.
    pub fn weight_profile(&self) -> BTreeMap<usize, usize> {
        let mut profile = BTreeMap::new();
        for w in self.reduced_codebook() {
            *profile.entry(w.count_ones() as usize).or_insert(0) += 1;
        }
        profile
    }

    /// `Σ_{c ∈ C_r} D^{w(c)}`.
    pub fn union_bound(&self, d: f64) -> f64 {
        self.weight_profile()
            .iter()
            .map(|(&w, &count)| count as f64 * d.powi(w as i32))
            .sum()
    }
}

/// Root-bit error probabilities under all-zero transmission.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RootErrors {
    /// Sequence ML (min-sum).
    pub ms: f64,
    /// Bitwise MAP (sum-product).
    pub sp: f64,
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Root decision outcome: 0 correct, 1 wrong, ½ for a coin-flip tie.
fn outcome(root1: f64, root0: f64) -> f64 {
    let scale = root1.abs().max(root0.abs());
    if (root1 - root0).abs() <= 1e-12 * scale {
        0.5
    } else if root1 > root0 {
        1.0
    } else {
        0.0
    }
}

/// Exact MS and SP root errors by enumerating every output pattern.
pub fn exact_root_errors(t: &TreeCode, ch: &ChannelModel) -> Result<RootErrors> {
    let n = t.n;
    let (p, erasure) = match *ch {
        ChannelModel::Bsc { p } => (p, false),
        ChannelModel::Bec { eps } => {
            if n > MAX_BEC_BITS {
                return Err(Error::SizeGuard(format!(
                    "erasure enumeration limited to {MAX_BEC_BITS} bits, tree has {n}"
                )));
            }
            (eps, true)
        }
        ChannelModel::BiAwgn { .. } => {
            return Err(Error::Precondition(
                "tree oracle needs a finite-output channel (bec or bsc)".into(),
            ))
        }
    };

    let patterns = 1u64 << n;
    let chunk = (patterns / 64).max(1);
    let starts: Vec<u64> = (0..patterns).step_by(chunk as usize).collect();
    let partials: Vec<(CompensatedSum, CompensatedSum)> = starts
        .par_iter()
        .map(|&start| {
            let mut ms = CompensatedSum::default();
            let mut sp = CompensatedSum::default();
            let mut hist = [vec![0u64; n + 1], vec![0u64; n + 1]];
            for y in start..(start + chunk).min(patterns) {
                let y = y as u32;
                let flips = y.count_ones() as i32;
                let prob = p.powi(flips) * (1.0 - p).powi(n as i32 - flips);
                if prob == 0.0 {
                    continue;
                }
                let (ms_err, sp_err) = if erasure {
                    // y marks erased positions; unerased outputs are all 0.
                    let mut count = [0u64; 2];
                    for &c in &t.codebook {
                        if c & !y == 0 {
                            count[(c & 1) as usize] += 1;
                        }
                    }
                    let ms_err = if count[1] > 0 { 0.5 } else { 0.0 };
                    (ms_err, outcome(count[1] as f64, count[0] as f64))
                } else {
                    hist.iter_mut().for_each(|h| h.fill(0));
                    for &c in &t.codebook {
                        hist[(c & 1) as usize][(c ^ y).count_ones() as usize] += 1;
                    }
                    let min_d = |h: &[u64]| h.iter().position(|&k| k > 0).unwrap_or(n + 1);
                    let ms_err = if p == 0.5 {
                        0.5
                    } else {
                        match min_d(&hist[1]).cmp(&min_d(&hist[0])) {
                            std::cmp::Ordering::Less => 1.0,
                            std::cmp::Ordering::Equal => 0.5,
                            std::cmp::Ordering::Greater => 0.0,
                        }
                    };
                    let sp_err = if hist[0] == hist[1] {
                        0.5
                    } else {
                        let r = p / (1.0 - p);
                        let post = |h: &[u64]| -> f64 {
                            h.iter().rev().fold(0.0, |acc, &k| acc * r + k as f64)
                        };
                        outcome(post(&hist[1]), post(&hist[0]))
                    };
                    (ms_err, sp_err)
                };
                ms.add(prob * ms_err);
                sp.add(prob * sp_err);
            }
            (ms, sp)
        })
        .collect();

    let mut ms = CompensatedSum::default();
    let mut sp = CompensatedSum::default();
    for (a, b) in partials {
        ms.add(a.value());
        sp.add(b.value());
    }
    Ok(RootErrors {
        ms: ms.value(),
        sp: sp.value(),
    })
}

/// Probability that sequence-ML decoding gets the root bit wrong.
pub fn exact_ms_root_error(t: &TreeCode, ch: &ChannelModel) -> Result<f64> {
    Ok(exact_root_errors(t, ch)?.ms)
}

/// Probability that bitwise-MAP decoding gets the root bit wrong.
pub fn exact_sp_root_error(t: &TreeCode, ch: &ChannelModel) -> Result<f64> {
    Ok(exact_root_errors(t, ch)?.sp)
}
