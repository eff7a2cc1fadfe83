//! Scalar recursions bounding the per-iteration bit error probability.
//!
//! * [`ms_upper_bound`]: `z_0 = D`, `z_l = λ(ρ'(1) z_{l-1})`, a union bound
//!   over the reduced tree codebook that holds for min-sum and sum-product.
//! * [`sp_lower_bound`]: `b_0 = P0`, `b_l = P0 λ(1 − ρ(1 − 2 b_{l-1}))`.
//! * [`bec_de`]: erasure density evolution `x_l = ε λ(1 − ρ(1 − x_{l-1}))`.
//!
//! The weight enumerator of the reduced codebook obeys the same recursion
//! as the union bound, with polynomials in place of numbers.

use std::fmt::{self, Write as _};

use serde::Serialize;

use crate::ensembles::Ensemble;
use crate::error::{Error, Result};

/// A trajectory is treated as converged once it drops below this value.
pub const CONVERGENCE_LEVEL: f64 = 1e-10;
const START_CAP: usize = 200;
const MAX_CAP: usize = 12_800;

/// CSV header shared by every trajectory export.
pub const TRAJECTORY_CSV_HEADER: &str = "iteration,value,kind,vacuous";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum TrajectoryKind {
    #[serde(rename = "MS_UPPER")]
    MsUpper,
    #[serde(rename = "SP_LOWER")]
    SpLower,
    #[serde(rename = "BEC_DE")]
    BecDe,
    /// Density-evolution error probability of variable-to-check messages.
    #[serde(rename = "DE_EDGE")]
    DeEdge,
    /// Density-evolution bit error probability of the full posterior.
    #[serde(rename = "DE_NODE")]
    DeNode,
}

impl TrajectoryKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::MsUpper => "MS_UPPER",
            Self::SpLower => "SP_LOWER",
            Self::BecDe => "BEC_DE",
            Self::DeEdge => "DE_EDGE",
            Self::DeNode => "DE_NODE",
        }
    }
}

impl fmt::Display for TrajectoryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Per-iteration values of one tracked quantity, index 0 being the channel.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundTrajectory {
    pub kind: TrajectoryKind,
    pub values: Vec<f64>,
    pub ensemble_id: String,
    /// `D`, `P0` or `ε`, whichever seeded the recursion.
    pub channel_figure: f64,
    /// First iteration whose union-bound value exceeds 1 (upper bounds only).
    pub vacuous_after: Option<usize>,
}

impl BoundTrajectory {
    pub fn new(kind: TrajectoryKind, values: Vec<f64>, ensemble_id: String, channel_figure: f64) -> Self {
        let vacuous_after = match kind {
            TrajectoryKind::MsUpper => values.iter().position(|&v| v > 1.0),
            _ => None,
        };
        Self {
            kind,
            values,
            ensemble_id,
            channel_figure,
            vacuous_after,
        }
    }

    pub fn iterations(&self) -> usize {
        self.values.len().saturating_sub(1)
    }

    /// True when the stored value is a union bound above 1.
    pub fn is_vacuous(&self, l: usize) -> bool {
        self.kind == TrajectoryKind::MsUpper && self.values[l] > 1.0
    }

    /// Appends `iteration,value,kind,vacuous` rows (no header).
    pub fn write_csv_rows(&self, out: &mut String) {
        for (l, v) in self.values.iter().enumerate() {
            writeln!(out, "{l},{v},{},{}", self.kind, u8::from(self.is_vacuous(l))).unwrap();
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("{TRAJECTORY_CSV_HEADER}\n");
        self.write_csv_rows(&mut out);
        out
    }
}

fn check_unit(name: &str, value: f64, hi: f64) -> Result<()> {
    if (0.0..=hi).contains(&value) {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} = {value} outside [0, {hi}]")))
    }
}

/// One step of the union-bound recursion.
fn ms_step(ens: &Ensemble, d: f64, z: f64, root_inclusive: bool) -> f64 {
    let v = ens
        .lambda()
        .eval_unchecked(ens.rho().derivative_at_one() * z);
    if root_inclusive {
        d * v
    } else {
        v
    }
}

/// Union bound `z_l` on the min-sum (and hence sum-product) bit error
/// probability. Values above 1 are kept as computed and flagged vacuous.
///
/// With `root_inclusive` the root bit's own weight is counted:
/// `z_l = D λ(ρ'(1) z_{l-1})`.
pub fn ms_upper_bound(ens: &Ensemble, d: f64, iterations: usize, root_inclusive: bool) -> Result<BoundTrajectory> {
    check_unit("D", d, 1.0)?;
    let mut values = Vec::with_capacity(iterations + 1);
    values.push(d);
    for _ in 0..iterations {
        let z = *values.last().unwrap();
        values.push(ms_step(ens, d, z, root_inclusive));
    }
    Ok(BoundTrajectory::new(TrajectoryKind::MsUpper, values, ens.id(), d))
}

fn sp_step(ens: &Ensemble, p0: f64, b: f64) -> f64 {
    p0 * ens.lambda().eval_unchecked(1.0 - ens.rho().eval_unchecked(1.0 - 2.0 * b))
}

/// Recursive lower bound on the sum-product error probability:
/// `b_l = P0 λ(1 − ρ(1 − 2 b_{l-1}))`, `b_0 = P0`.
pub fn sp_lower_bound(ens: &Ensemble, p0: f64, iterations: usize) -> Result<BoundTrajectory> {
    check_unit("P0", p0, 0.5)?;
    let mut values = Vec::with_capacity(iterations + 1);
    values.push(p0);
    for _ in 0..iterations {
        let b = *values.last().unwrap();
        values.push(sp_step(ens, p0, b));
    }
    Ok(BoundTrajectory::new(TrajectoryKind::SpLower, values, ens.id(), p0))
}

fn bec_step(ens: &Ensemble, eps: f64, x: f64) -> f64 {
    eps * ens.lambda().eval_unchecked(1.0 - ens.rho().eval_unchecked(1.0 - x))
}

/// Erasure density evolution `x_l = ε λ(1 − ρ(1 − x_{l-1}))`, `x_0 = ε`.
pub fn bec_de(ens: &Ensemble, eps: f64, iterations: usize) -> Result<BoundTrajectory> {
    check_unit("eps", eps, 1.0)?;
    let mut values = Vec::with_capacity(iterations + 1);
    values.push(eps);
    for _ in 0..iterations {
        let x = *values.last().unwrap();
        let next = bec_step(ens, eps, x);
        debug_assert!(next <= x, "erasure recursion increased: {x} -> {next}");
        values.push(next);
    }
    Ok(BoundTrajectory::new(TrajectoryKind::BecDe, values, ens.id(), eps))
}

/// Outcome of iterating a monotone scalar map until it settles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvergenceCheck {
    pub converged: bool,
    pub iterations: usize,
}

/// Iterates `step` from `x0` with an adaptive cap (200, doubling to 12800).
///
/// The maps here are monotone, so their orbits are monotone: a step that
/// fails to decrease means the orbit is stuck at or above a fixed point.
pub fn iterate_to_convergence<F: FnMut(f64) -> f64>(x0: f64, mut step: F) -> ConvergenceCheck {
    let mut x = x0;
    let mut cap = START_CAP;
    let mut l = 0;
    loop {
        while l < cap {
            let next = step(x);
            l += 1;
            if next < CONVERGENCE_LEVEL && next <= x {
                return ConvergenceCheck {
                    converged: true,
                    iterations: l,
                };
            }
            if !(next < x) {
                return ConvergenceCheck {
                    converged: false,
                    iterations: l,
                };
            }
            x = next;
        }
        if cap >= MAX_CAP {
            return ConvergenceCheck {
                converged: false,
                iterations: l,
            };
        }
        cap *= 2;
    }
}

/// Bisection bracket around a threshold.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdResult {
    /// Midpoint of the final bracket.
    pub value: f64,
    /// Largest parameter observed to converge (or the initial lower end).
    pub lo: f64,
    /// Smallest parameter observed not to converge (or the initial upper end).
    pub hi: f64,
    pub bisection_steps: usize,
    /// Largest iteration count spent on a single convergence test.
    pub max_iterations: usize,
    /// Whether any tested parameter converged.
    pub converged_anywhere: bool,
}

/// Bisects `[lo, hi]` for the boundary of `converges`, assumed to hold below
/// the threshold and fail above it, until the bracket is at most `tol` wide.
pub fn bisect_threshold<F>(mut lo: f64, mut hi: f64, tol: f64, mut converges: F) -> Result<ThresholdResult>
where
    F: FnMut(f64) -> Result<ConvergenceCheck>,
{
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tolerance must be positive, got {tol}")));
    }
    let mut steps = 0;
    let mut max_iterations = 0;
    let mut converged_anywhere = false;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let check = converges(mid)?;
        max_iterations = max_iterations.max(check.iterations);
        steps += 1;
        if check.converged {
            converged_anywhere = true;
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(ThresholdResult {
        value: 0.5 * (lo + hi),
        lo,
        hi,
        bisection_steps: steps,
        max_iterations,
        converged_anywhere,
    })
}

/// Largest Bhattacharyya parameter for which the root-excluded union bound
/// is driven to zero.
pub fn bhattacharyya_threshold(ens: &Ensemble, tol: f64) -> Result<ThresholdResult> {
    bisect_threshold(0.0, 1.0, tol, |d| {
        Ok(iterate_to_convergence(d, |z| ms_step(ens, d, z, false)))
    })
}

/// Erasure threshold of the ensemble.
pub fn bec_threshold(ens: &Ensemble, tol: f64) -> Result<ThresholdResult> {
    bisect_threshold(0.0, 1.0, tol, |eps| {
        Ok(iterate_to_convergence(eps, |x| bec_step(ens, eps, x)))
    })
}

/// Expected weight enumerator `Σ A_w x^w` of the reduced tree codebook,
/// truncated at `max_weight`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightEnumerator {
    /// `coeffs[w]` is the expected number of codewords of weight `w`.
    pub coeffs: Vec<f64>,
    pub max_weight: usize,
    /// Set when some recursion step produced mass above `max_weight`.
    pub truncated: bool,
}

impl WeightEnumerator {
    pub fn evaluate(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    /// Nonzero `(weight, coefficient)` pairs.
    pub fn profile(&self) -> Vec<(usize, f64)> {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, &c)| c != 0.0)
            .map(|(w, &c)| (w, c))
            .collect()
    }

    /// Total expected number of codewords.
    pub fn cardinality(&self) -> f64 {
        self.coeffs.iter().sum()
    }
}

fn mul_truncated(a: &[f64], b: &[f64], max_weight: usize, truncated: &mut bool) -> Vec<f64> {
    let mut out = vec![0.0; max_weight + 1];
    for (i, &ai) in a.iter().enumerate().filter(|(_, &c)| c != 0.0) {
        for (j, &bj) in b.iter().enumerate().filter(|(_, &c)| c != 0.0) {
            if i + j > max_weight {
                *truncated = true;
                break;
            }
            out[i + j] += ai * bj;
        }
    }
    out
}

/// Weight enumerator of the reduced codebook at tree level `level`:
/// `N_0(x) = x`, `N_l(x) = λ(ρ'(1) N_{l-1}(x))`, optionally multiplied by
/// `x` at every level to count the root bit.
pub fn weight_enumerator(
    ens: &Ensemble,
    level: usize,
    max_weight: usize,
    root_inclusive: bool,
) -> Result<WeightEnumerator> {
    if max_weight < 1 {
        return Err(Error::Domain("max_weight must be at least 1".into()));
    }
    let mut truncated = false;
    let mut current = vec![0.0; max_weight + 1];
    current[1] = 1.0;
    let fanout = ens.rho().derivative_at_one();

    for _ in 0..level {
        let scaled: Vec<f64> = current.iter().map(|c| c * fanout).collect();
        let mut next = vec![0.0; max_weight + 1];
        let mut power = vec![0.0; max_weight + 1];
        power[0] = 1.0;
        for degree in 1..=ens.lambda().max_degree() {
            if degree > 1 {
                power = mul_truncated(&power, &scaled, max_weight, &mut truncated);
            }
            let w = ens.lambda().coeff(degree);
            if w > 0.0 {
                next.iter_mut().zip(&power).for_each(|(n, p)| *n += w * p);
            }
        }
        if root_inclusive {
            if next[max_weight] != 0.0 {
                truncated = true;
            }
            next.rotate_right(1);
            next[0] = 0.0;
        }
        current = next;
    }
    Ok(WeightEnumerator {
        coeffs: current,
        max_weight,
        truncated,
    })
}
