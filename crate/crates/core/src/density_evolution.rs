//! Quantized LLR density evolution for sum-product decoding.
//!
//! Densities live on a symmetric lattice `{-K Δ, …, 0, …, K Δ}` with two extra
//! atoms at `±∞`. The variable-node rule is a lattice convolution that
//! saturates into the boundary bins; the check-node rule applies the pairwise
//! `2 atanh(tanh(a/2) tanh(b/2))` operation and places mass on the nearest
//! lattice point. Erasure-type densities (support in `{0, +∞}`) are evolved
//! by exact atom bookkeeping so that binary-erasure runs carry no
//! quantization error at all.

use std::fmt::Write as _;

use crate::bounds::{BoundTrajectory, TrajectoryKind};
use crate::channels::ChannelModel;
use crate::ensembles::{DegreePolynomial, Ensemble};
use crate::error::{Error, Result};

/// Grid spacing and half-range of the LLR lattice.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct QuantizationParams {
    pub delta: f64,
    pub m_max: f64,
}

impl Default for QuantizationParams {
    fn default() -> Self {
        Self {
            delta: 0.02,
            m_max: 40.0,
        }
    }
}

impl QuantizationParams {
    /// Validates that `m_max / delta` is an integer of at least 16.
    pub fn new(delta: f64, m_max: f64) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite() && m_max > 0.0 && m_max.is_finite()) {
            return Err(Error::Domain(format!(
                "quantization needs positive finite delta and m_max, got {delta}, {m_max}"
            )));
        }
        let ratio = m_max / delta;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) || ratio.round() < 16.0 {
            return Err(Error::Domain(format!(
                "m_max / delta = {ratio} must be an integer >= 16"
            )));
        }
        Ok(Self { delta, m_max })
    }

    /// Number of lattice points on each side of zero.
    pub fn half_len(&self) -> usize {
        (self.m_max / self.delta).round() as usize
    }

    /// Adjusts the spacing so that `atom` (> 0) lies exactly on the lattice,
    /// keeping the spacing as close as possible to the requested one and the
    /// range at least `m_max`.
    pub fn aligned_to(&self, atom: f64) -> Self {
        let steps = (atom / self.delta).round().max(1.0);
        let delta = atom / steps;
        let half_len = (self.m_max / delta).ceil().max(16.0);
        Self {
            delta,
            m_max: half_len * delta,
        }
    }

    fn grid(&self) -> Grid {
        Grid {
            delta: self.delta,
            half_len: self.half_len(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Grid {
    delta: f64,
    half_len: usize,
}

impl Grid {
    fn len(&self) -> usize {
        2 * self.half_len + 1
    }
}

/// Probability law of an LLR message under all-zero transmission.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedDensity {
    grid: Grid,
    masses: Vec<f64>,
    pos_inf: f64,
    neg_inf: f64,
}

impl QuantizedDensity {
    /// Builds a density from lattice masses (index `K` is `m = 0`) and the
    /// two infinite atoms.
    pub fn from_parts(
        q: QuantizationParams,
        masses: Vec<f64>,
        pos_inf: f64,
        neg_inf: f64,
    ) -> Result<Self> {
        let grid = q.grid();
        if masses.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "expected {} lattice masses, got {}",
                grid.len(),
                masses.len()
            )));
        }
        if masses
            .iter()
            .chain([&pos_inf, &neg_inf])
            .any(|m| !m.is_finite() || *m < 0.0)
        {
            return Err(Error::Domain("masses must be finite and nonnegative".into()));
        }
        Ok(Self {
            grid,
            masses,
            pos_inf,
            neg_inf,
        })
    }

    /// All mass at `+∞` (a perfectly reliable message).
    pub fn certain(q: QuantizationParams) -> Self {
        Self::erasure(q, 0.0)
    }

    /// Mass `eps` at zero and `1 − eps` at `+∞`.
    pub fn erasure(q: QuantizationParams, eps: f64) -> Self {
        let grid = q.grid();
        let mut masses = vec![0.0; grid.len()];
        masses[grid.half_len] = eps;
        Self {
            grid,
            masses,
            pos_inf: 1.0 - eps,
            neg_inf: 0.0,
        }
    }

    fn zero_point(grid: Grid) -> Self {
        let mut masses = vec![0.0; grid.len()];
        masses[grid.half_len] = 1.0;
        Self {
            grid,
            masses,
            pos_inf: 0.0,
            neg_inf: 0.0,
        }
    }

    fn inf_point(grid: Grid) -> Self {
        Self {
            grid,
            masses: vec![0.0; grid.len()],
            pos_inf: 1.0,
            neg_inf: 0.0,
        }
    }

    pub fn params(&self) -> QuantizationParams {
        QuantizationParams {
            delta: self.grid.delta,
            m_max: self.grid.delta * self.grid.half_len as f64,
        }
    }

    pub fn delta(&self) -> f64 {
        self.grid.delta
    }

    pub fn half_len(&self) -> usize {
        self.grid.half_len
    }

    /// Lattice masses; index `half_len()` is `m = 0`.
    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn pos_inf(&self) -> f64 {
        self.pos_inf
    }

    pub fn neg_inf(&self) -> f64 {
        self.neg_inf
    }

    /// LLR value of lattice index `idx`.
    pub fn llr_at(&self, idx: usize) -> f64 {
        (idx as f64 - self.grid.half_len as f64) * self.grid.delta
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum::<f64>() + self.pos_inf + self.neg_inf
    }

    /// `P(M < 0) + ½ P(M = 0)`.
    pub fn error_prob(&self) -> f64 {
        let k = self.grid.half_len;
        let below: f64 = self.masses[..k].iter().sum();
        below + 0.5 * self.masses[k] + self.neg_inf
    }

    /// `E[tanh(|M| / 2)]`, with `tanh(∞) = 1`.
    pub fn expected_tanh_half(&self) -> f64 {
        let finite: f64 = self
            .masses
            .iter()
            .enumerate()
            .filter(|(_, &m)| m > 0.0)
            .map(|(i, &m)| (0.5 * self.llr_at(i).abs()).tanh() * m)
            .sum();
        finite + self.pos_inf + self.neg_inf
    }

    /// `max_m |g(−m) − e^{−m} g(m)|` over the lattice, in mass units, with
    /// the `−∞` atom compared against `e^{−∞} · g(+∞) = 0`.
    pub fn symmetry_residual(&self) -> f64 {
        let k = self.grid.half_len;
        (1..=k)
            .map(|i| {
                let m = i as f64 * self.grid.delta;
                (self.masses[k - i] - (-m).exp() * self.masses[k + i]).abs()
            })
            .fold(self.neg_inf, f64::max)
    }

    /// Mean of the finite part, normalized to the finite mass.
    pub fn finite_mean(&self) -> f64 {
        let finite: f64 = self.masses.iter().sum();
        let first: f64 = self
            .masses
            .iter()
            .enumerate()
            .map(|(i, &m)| self.llr_at(i) * m)
            .sum();
        first / finite
    }

    /// Erasure probability when the support is contained in `{0, +∞}`.
    pub fn erasure_prob(&self) -> Option<f64> {
        let k = self.grid.half_len;
        let off_zero = self
            .masses
            .iter()
            .enumerate()
            .any(|(i, &m)| i != k && m != 0.0);
        (!off_zero && self.neg_inf == 0.0).then_some(self.masses[k])
    }

    /// CSV with header `m,mass`; infinite atoms appear as `+inf` / `-inf`
    /// sentinel rows, and zero-mass lattice points are omitted.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("m,mass\n");
        writeln!(out, "-inf,{}", self.neg_inf).unwrap();
        for (i, &m) in self.masses.iter().enumerate() {
            if m != 0.0 {
                writeln!(out, "{},{}", self.llr_at(i), m).unwrap();
            }
        }
        writeln!(out, "+inf,{}", self.pos_inf).unwrap();
        out
    }

    fn check_grid(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch(format!(
                "delta {} / K {} vs delta {} / K {}",
                self.grid.delta, self.grid.half_len, other.grid.delta, other.grid.half_len
            )));
        }
        Ok(())
    }

    fn scaled_add(&mut self, other: &Self, w: f64) {
        for (a, b) in self.masses.iter_mut().zip(&other.masses) {
            *a += w * b;
        }
        self.pos_inf += w * other.pos_inf;
        self.neg_inf += w * other.neg_inf;
    }

    // Rounding deficits compound geometrically across iterations (the total
    // is raised to the node degree every step), so node updates rescale.
    fn normalized(mut self) -> Self {
        let total = self.total_mass();
        if total > 0.0 && total.is_finite() {
            self.masses.iter_mut().for_each(|m| *m /= total);
            self.pos_inf /= total;
            self.neg_inf /= total;
        }
        self
    }

    fn zeroed(&self) -> Self {
        Self {
            grid: self.grid,
            masses: vec![0.0; self.masses.len()],
            pos_inf: 0.0,
            neg_inf: 0.0,
        }
    }
}

/// Law of `M_a + M_b` for independent messages (variable-node addition).
///
/// Lattice sums saturate into the boundary bins. `±∞` absorbs finite
/// addends; `+∞ + (−∞)` lands on 0.
pub fn convolve(a: &QuantizedDensity, b: &QuantizedDensity) -> Result<QuantizedDensity> {
    a.check_grid(b)?;
    let k = a.grid.half_len;
    let n = a.grid.len();
    let mut out = a.zeroed();

    // prefix[j] = Σ_{t<j} b[t]
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    for &m in &b.masses {
        prefix.push(prefix.last().unwrap() + m);
    }
    let b_finite = prefix[n];
    let (b_lo, b_hi) = support(&b.masses);

    for (i, &ai) in a.masses.iter().enumerate() {
        if ai == 0.0 {
            continue;
        }
        // Output index i + j − K; valid without clamping for j in [K − i, 3K − i].
        let j_lo = (k as isize - i as isize).max(b_lo as isize) as usize;
        let j_hi = ((3 * k) as isize - i as isize).min(b_hi as isize);
        if k > i {
            out.masses[0] += ai * prefix[(k - i).min(n)];
        }
        if 3 * k >= i && 3 * k - i + 1 < n {
            out.masses[n - 1] += ai * (b_finite - prefix[3 * k - i + 1]);
        }
        if j_hi >= j_lo as isize {
            let j_hi = j_hi as usize;
            let base = i + j_lo - k;
            let dst = &mut out.masses[base..base + (j_hi - j_lo + 1)];
            for (d, &bj) in dst.iter_mut().zip(&b.masses[j_lo..=j_hi]) {
                *d += ai * bj;
            }
        }
    }

    let a_finite: f64 = a.masses.iter().sum();
    out.pos_inf = a.pos_inf * (b_finite + b.pos_inf) + b.pos_inf * a_finite;
    out.neg_inf = a.neg_inf * (b_finite + b.neg_inf) + b.neg_inf * a_finite;
    out.masses[k] += a.pos_inf * b.neg_inf + a.neg_inf * b.pos_inf;
    Ok(out)
}

fn support(masses: &[f64]) -> (usize, usize) {
    let lo = masses.iter().position(|&m| m != 0.0).unwrap_or(masses.len());
    let hi = masses.iter().rposition(|&m| m != 0.0).unwrap_or(0);
    (lo, hi)
}

/// `|a ⊞ b| = 2 atanh(tanh(a/2) tanh(b/2))` for `a, b ≥ 0`, evaluated in a
/// form that stays accurate when both arguments are large.
pub fn boxplus_magnitude(a: f64, b: f64) -> f64 {
    if a == 0.0 || b == 0.0 {
        return 0.0;
    }
    a.min(b) - (-(a - b).abs()).exp().ln_1p() + (-(a + b)).exp().ln_1p()
}

/// Pairwise check-node operation on a lattice.
///
/// `|a ⊞ b|` rarely lands on a lattice point. Its mass is split between the
/// two neighbouring points, each split symmetrically (`g(−m) = e^{−m} g(m)`),
/// with weights chosen so that the negative mass, and hence the error
/// probability, is carried over exactly. Symmetric inputs give symmetric
/// outputs.
#[derive(Debug, Clone)]
pub struct CheckKernel {
    grid: Grid,
    // lower triangle, row j holds i in 0..=j: floor(|iΔ ⊞ jΔ| / Δ)
    table: Vec<u32>,
    // neg_frac[o] = 1 / (1 + e^{oΔ}), the negative share of a symmetric pair
    neg_frac: Vec<f64>,
}

impl CheckKernel {
    pub fn new(q: QuantizationParams) -> Self {
        let grid = q.grid();
        let k = grid.half_len;
        let mut table = Vec::with_capacity((k + 1) * (k + 2) / 2);
        for j in 0..=k {
            let b = j as f64 * grid.delta;
            for i in 0..=j {
                let a = i as f64 * grid.delta;
                let idx = (boxplus_magnitude(a, b) / grid.delta).floor() as usize;
                table.push(idx.min(k - 1) as u32);
            }
        }
        let neg_frac = (0..=k)
            .map(|o| 1.0 / (1.0 + (o as f64 * grid.delta).exp()))
            .collect();
        Self { grid, table, neg_frac }
    }

    #[inline]
    fn index(&self, i: usize, j: usize) -> usize {
        let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
        self.table[hi * (hi + 1) / 2 + lo] as usize
    }

    /// Places `mass` (of which `neg` is negative) on `±oΔ` and `±(o+1)Δ`.
    #[inline]
    fn place(&self, out: &mut [f64], o: usize, mass: f64, neg: f64) {
        let k = self.grid.half_len;
        let (fa, fb) = (self.neg_frac[o], self.neg_frac[o + 1]);
        let w = ((neg / mass - fb) / (fa - fb)).clamp(0.0, 1.0);
        let (ma, mb) = (w * mass, (1.0 - w) * mass);
        if o == 0 {
            out[k] += ma;
        } else {
            out[k + o] += ma * (1.0 - fa);
            out[k - o] += ma * fa;
        }
        out[k + o + 1] += mb * (1.0 - fb);
        out[k - o - 1] += mb * fb;
    }

    /// Law of `M_a ⊞ M_b` (one pairwise check-node operation).
    pub fn combine(&self, a: &QuantizedDensity, b: &QuantizedDensity) -> Result<QuantizedDensity> {
        a.check_grid(b)?;
        if a.grid != self.grid {
            return Err(Error::GridMismatch("density does not match check kernel".into()));
        }
        let k = self.grid.half_len;
        let mut out = a.zeroed();
        let a_total = a.total_mass();
        let b_total = b.total_mass();
        let (a0, b0) = (a.masses[k], b.masses[k]);

        // Anything combined with an exact zero is zero.
        out.masses[k] += a0 * b_total + b0 * a_total - a0 * b0;

        // Finite nonzero magnitudes on both sides.
        let b_nz: Vec<usize> = (1..=k)
            .filter(|&j| b.masses[k + j] != 0.0 || b.masses[k - j] != 0.0)
            .collect();
        for i in 1..=k {
            let (ap, an) = (a.masses[k + i], a.masses[k - i]);
            if ap == 0.0 && an == 0.0 {
                continue;
            }
            for &j in &b_nz {
                let (bp, bn) = (b.masses[k + j], b.masses[k - j]);
                let neg = ap * bn + an * bp;
                let mass = ap * bp + an * bn + neg;
                if mass > 0.0 {
                    self.place(&mut out.masses, self.index(i, j), mass, neg);
                }
            }
        }

        // An infinite message passes the other magnitude through, flipping
        // its sign when the infinite atom is negative.
        for (inf_p, inf_n, other) in [(a.pos_inf, a.neg_inf, b), (b.pos_inf, b.neg_inf, a)] {
            if inf_p == 0.0 && inf_n == 0.0 {
                continue;
            }
            for j in 1..=k {
                let (op, on) = (other.masses[k + j], other.masses[k - j]);
                out.masses[k + j] += inf_p * op + inf_n * on;
                out.masses[k - j] += inf_p * on + inf_n * op;
            }
        }
        out.pos_inf += a.pos_inf * b.pos_inf + a.neg_inf * b.neg_inf;
        out.neg_inf += a.pos_inf * b.neg_inf + a.neg_inf * b.pos_inf;
        Ok(out)
    }

    /// Check-node update: mixture over degrees `i` (weight `ρ_i`) of the
    /// `(i − 1)`-fold pairwise combination of `incoming`.
    pub fn check_update(
        &self,
        incoming: &QuantizedDensity,
        rho: &DegreePolynomial,
    ) -> Result<QuantizedDensity> {
        if let Some(x) = incoming.erasure_prob() {
            return erasure_check(incoming.params(), x, rho);
        }
        Ok(
            mixture_of_powers(incoming, rho, QuantizedDensity::inf_point(incoming.grid), |p, q| {
                self.combine(p, q)
            })?
            .normalized(),
        )
    }
}

// The output is non-erased only when every input is.
fn erasure_check(q: QuantizationParams, x: f64, rho: &DegreePolynomial) -> Result<QuantizedDensity> {
    let y = 1.0 - rho.eval(1.0 - x)?;
    Ok(QuantizedDensity::erasure(q, y))
}

fn mixture_of_powers<F>(
    base: &QuantizedDensity,
    poly: &DegreePolynomial,
    identity: QuantizedDensity,
    mut op: F,
) -> Result<QuantizedDensity>
where
    F: FnMut(&QuantizedDensity, &QuantizedDensity) -> Result<QuantizedDensity>,
{
    let mut out = base.zeroed();
    let mut power = identity;
    for degree in 1..=poly.max_degree() {
        if degree > 1 {
            power = op(&power, base)?;
        }
        let w = poly.coeff(degree);
        if w > 0.0 {
            out.scaled_add(&power, w);
        }
    }
    Ok(out)
}

/// Check-node update with a freshly built kernel. Prefer holding a
/// [`CheckKernel`] when updating repeatedly on the same grid.
pub fn check_update(incoming: &QuantizedDensity, rho: &DegreePolynomial) -> Result<QuantizedDensity> {
    if let Some(x) = incoming.erasure_prob() {
        return erasure_check(incoming.params(), x, rho);
    }
    CheckKernel::new(incoming.params()).check_update(incoming, rho)
}

/// Variable-node update: mixture over degrees `i` (weight `λ_i`) of the
/// channel density convolved with `i − 1` copies of `incoming`.
pub fn variable_update(
    ch_density: &QuantizedDensity,
    incoming: &QuantizedDensity,
    lambda: &DegreePolynomial,
) -> Result<QuantizedDensity> {
    ch_density.check_grid(incoming)?;
    if let (Some(eps), Some(y)) = (ch_density.erasure_prob(), incoming.erasure_prob()) {
        return Ok(QuantizedDensity::erasure(
            ch_density.params(),
            eps * lambda.eval(y)?,
        ));
    }
    let mixed = mixture_of_powers(incoming, lambda, QuantizedDensity::zero_point(incoming.grid), convolve)?;
    Ok(convolve(ch_density, &mixed)?.normalized())
}

/// Bit-level readout: the channel density convolved with `i` check messages,
/// mixed over node-perspective variable degrees.
pub fn node_readout(
    ch_density: &QuantizedDensity,
    check_out: &QuantizedDensity,
    lambda: &DegreePolynomial,
) -> Result<QuantizedDensity> {
    ch_density.check_grid(check_out)?;
    let node = lambda.node_perspective();
    if let (Some(eps), Some(y)) = (ch_density.erasure_prob(), check_out.erasure_prob()) {
        return Ok(QuantizedDensity::erasure(
            ch_density.params(),
            eps * y * node.eval(y)?,
        ));
    }
    // Σ Λ_i c^{⊛i} = c ⊛ Σ Λ_i c^{⊛(i−1)}
    let mixed = mixture_of_powers(check_out, &node, QuantizedDensity::zero_point(check_out.grid), convolve)?;
    Ok(convolve(ch_density, &convolve(check_out, &mixed)?)?.normalized())
}

/// Iterative density evolution state for one ensemble and channel.
#[derive(Debug, Clone)]
pub struct DensityEvolution {
    ensemble: Ensemble,
    channel: QuantizedDensity,
    kernel: Option<CheckKernel>,
    var_to_check: QuantizedDensity,
    check_to_var: Option<QuantizedDensity>,
    iteration: usize,
}

impl DensityEvolution {
    pub fn new(ensemble: &Ensemble, channel: &ChannelModel, q: QuantizationParams) -> Result<Self> {
        let density = channel.llr_density(q)?;
        Ok(Self {
            ensemble: ensemble.clone(),
            var_to_check: density.clone(),
            channel: density,
            kernel: None,
            check_to_var: None,
            iteration: 0,
        })
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn channel_density(&self) -> &QuantizedDensity {
        &self.channel
    }

    /// Variable-to-check message density after the current iteration.
    pub fn var_to_check(&self) -> &QuantizedDensity {
        &self.var_to_check
    }

    /// Check-to-variable message density of the current iteration (none at 0).
    pub fn check_to_var(&self) -> Option<&QuantizedDensity> {
        self.check_to_var.as_ref()
    }

    /// One check-then-variable update.
    pub fn step(&mut self) -> Result<()> {
        let rho = self.ensemble.rho();
        let c = match self.var_to_check.erasure_prob() {
            Some(x) => erasure_check(self.var_to_check.params(), x, rho)?,
            None => {
                let params = self.var_to_check.params();
                self.kernel
                    .get_or_insert_with(|| CheckKernel::new(params))
                    .check_update(&self.var_to_check, rho)?
            }
        };
        self.var_to_check = variable_update(&self.channel, &c, self.ensemble.lambda())?;
        self.check_to_var = Some(c);
        self.iteration += 1;
        Ok(())
    }

    /// Bit error probability of the full posterior at the current iteration.
    pub fn node_error_prob(&self) -> Result<f64> {
        match &self.check_to_var {
            None => Ok(self.channel.error_prob()),
            Some(c) => Ok(node_readout(&self.channel, c, self.ensemble.lambda())?.error_prob()),
        }
    }
}

/// Edge- and node-perspective error trajectories of a density evolution run.
#[derive(Debug, Clone, PartialEq)]
pub struct DeRun {
    pub edge: BoundTrajectory,
    pub node: BoundTrajectory,
}

/// Runs `iterations` rounds of density evolution from the channel density.
/// `edge.values[l]` is the error probability of the variable-to-check
/// message after `l` iterations; `node.values[l]` is the bit-level readout.
pub fn run_de(
    ensemble: &Ensemble,
    channel: &ChannelModel,
    iterations: usize,
    q: QuantizationParams,
) -> Result<DeRun> {
    let mut de = DensityEvolution::new(ensemble, channel, q)?;
    let mut edge = vec![de.var_to_check().error_prob()];
    let mut node = vec![de.node_error_prob()?];
    for _ in 0..iterations {
        de.step()?;
        edge.push(de.var_to_check().error_prob());
        node.push(de.node_error_prob()?);
    }
    let figure = channel.uncoded_error_prob();
    Ok(DeRun {
        edge: BoundTrajectory::new(TrajectoryKind::DeEdge, edge, ensemble.id(), figure),
        node: BoundTrajectory::new(TrajectoryKind::DeNode, node, ensemble.id(), figure),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> QuantizationParams {
        QuantizationParams::new(0.25, 10.0).unwrap()
    }

    fn random_symmetric(q: QuantizationParams, seed: u64) -> QuantizedDensity {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let k = q.half_len();
        let mut masses = vec![0.0; 2 * k + 1];
        for i in 1..=k {
            if rng.random_bool(0.3) {
                let p: f64 = rng.random();
                masses[k + i] = p;
                masses[k - i] = p * (-(i as f64) * q.delta).exp();
            }
        }
        masses[k] = rng.random::<f64>() * 0.2;
        let pos_inf = rng.random::<f64>() * 0.2;
        let total: f64 = masses.iter().sum::<f64>() + pos_inf;
        masses.iter_mut().for_each(|m| *m /= total);
        QuantizedDensity::from_parts(q, masses, pos_inf / total, 0.0).unwrap()
    }

    #[test]
    fn params_validation() {
        assert!(QuantizationParams::new(0.02, 40.0).is_ok());
        assert!(QuantizationParams::new(0.03, 40.0).is_err());
        assert!(QuantizationParams::new(1.0, 8.0).is_err());
        assert!(QuantizationParams::new(0.0, 8.0).is_err());
        let aligned = QuantizationParams::default().aligned_to(19f64.ln());
        let steps = 19f64.ln() / aligned.delta;
        assert!((steps - steps.round()).abs() < 1e-9);
        assert!(aligned.m_max >= 40.0);
    }

    #[test]
    fn error_prob_and_tanh_on_atoms() {
        let q = small();
        let d = QuantizedDensity::erasure(q, 0.3);
        assert_eq!(d.error_prob(), 0.15);
        assert!((d.expected_tanh_half() - 0.7).abs() < 1e-15);
        assert_eq!(QuantizedDensity::certain(q).error_prob(), 0.0);
        assert_eq!(d.erasure_prob(), Some(0.3));
    }

    #[test]
    fn boxplus_matches_tanh_rule() {
        for &(a, b) in &[(0.3, 0.7), (2.0, 5.0), (1e-3, 3.0), (6.0, 6.0)] {
            let direct = 2.0 * ((a / 2.0f64).tanh() * (b / 2.0f64).tanh()).atanh();
            assert!((boxplus_magnitude(a, b) - direct).abs() < 1e-12);
        }
        assert!((boxplus_magnitude(40.0, 40.0) - (40.0 - 2f64.ln())).abs() < 1e-12);
        assert_eq!(boxplus_magnitude(0.0, 7.0), 0.0);
    }

    #[test]
    fn certainty_is_absorbing() {
        let q = small();
        let cert = QuantizedDensity::certain(q);
        let ch = random_symmetric(q, 3);
        let lambda = DegreePolynomial::regular(3).unwrap();
        let rho = DegreePolynomial::regular(6).unwrap();
        let v = variable_update(&ch, &cert, &lambda).unwrap();
        assert!((v.pos_inf() - 1.0).abs() < 1e-14);
        assert!(v.masses().iter().all(|&m| m == 0.0));
        let c = check_update(&cert, &rho).unwrap();
        assert_eq!(c.pos_inf(), 1.0);
        // a non-erasure certain density through the general path
        let mut masses = vec![0.0; 2 * q.half_len() + 1];
        masses[0] = 0.0;
        let cert_general = QuantizedDensity::from_parts(q, masses, 1.0, 0.0).unwrap();
        let kernel = CheckKernel::new(q);
        let out = kernel.combine(&cert_general, &cert_general).unwrap();
        assert_eq!(out.pos_inf(), 1.0);
    }

    #[test]
    fn erasure_bookkeeping() {
        let q = small();
        let lambda = DegreePolynomial::regular(3).unwrap();
        let rho = DegreePolynomial::regular(6).unwrap();
        let v = variable_update(&QuantizedDensity::erasure(q, 0.4), &QuantizedDensity::erasure(q, 0.5), &lambda)
            .unwrap();
        assert_eq!(v.erasure_prob(), Some(0.4 * 0.25));
        let c = check_update(&QuantizedDensity::erasure(q, 0.2), &rho).unwrap();
        assert!((c.erasure_prob().unwrap() - (1.0 - 0.8f64.powi(5))).abs() < 1e-15);
    }

    #[test]
    fn general_path_agrees_with_erasure_path() {
        // combine() and convolve() take the lattice path even for erasure densities
        let q = small();
        let kernel = CheckKernel::new(q);
        let a = QuantizedDensity::erasure(q, 0.3);
        let b = QuantizedDensity::erasure(q, 0.6);
        let out = kernel.combine(&a, &b).unwrap();
        assert!((out.erasure_prob().unwrap() - (1.0 - 0.7 * 0.4)).abs() < 1e-15);
        let sum = convolve(&a, &b).unwrap();
        assert!((sum.erasure_prob().unwrap() - 0.18).abs() < 1e-15);
    }

    #[test]
    fn convolution_saturates_and_conserves_mass() {
        let q = small();
        let k = q.half_len();
        let mut masses = vec![0.0; 2 * k + 1];
        masses[2 * k] = 0.5;
        masses[2 * k - 1] = 0.25;
        masses[1] = 0.25;
        let d = QuantizedDensity::from_parts(q, masses, 0.0, 0.0).unwrap();
        let s = convolve(&d, &d).unwrap();
        assert!((s.total_mass() - 1.0).abs() < 1e-15);
        // top + top saturates, low + low saturates
        assert!((s.masses()[2 * k] - (0.25 + 0.25 + 0.0625)).abs() < 1e-15);
        assert!((s.masses()[0] - 0.0625).abs() < 1e-15);
    }

    #[test]
    fn infinity_algebra() {
        let q = small();
        let k = q.half_len();
        let mut masses = vec![0.0; 2 * k + 1];
        masses[k + 3] = 0.5;
        let a = QuantizedDensity::from_parts(q, masses.clone(), 0.0, 0.5).unwrap();
        let b = QuantizedDensity::from_parts(q, masses, 0.5, 0.0).unwrap();
        let s = convolve(&a, &b).unwrap();
        // (−∞, +∞) collides at 0; ±∞ absorb finite addends
        assert!((s.masses()[k] - 0.25).abs() < 1e-15);
        assert!((s.pos_inf() - 0.25).abs() < 1e-15);
        assert!((s.neg_inf() - 0.25).abs() < 1e-15);
        assert!((s.masses()[k + 6] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn grid_mismatch_is_reported() {
        let a = QuantizedDensity::erasure(small(), 0.1);
        let b = QuantizedDensity::erasure(QuantizationParams::default(), 0.1);
        assert!(matches!(convolve(&a, &b), Err(Error::GridMismatch(_))));
        let lambda = DegreePolynomial::regular(3).unwrap();
        assert!(variable_update(&a, &b, &lambda).is_err());
    }

    #[test]
    fn random_densities_keep_mass_and_symmetry() {
        let q = QuantizationParams::new(0.05, 10.0).unwrap();
        let kernel = CheckKernel::new(q);
        for seed in 0..5 {
            let a = random_symmetric(q, seed);
            let b = random_symmetric(q, seed + 100);
            let s = convolve(&a, &b).unwrap();
            let c = kernel.combine(&a, &b).unwrap();
            assert!((s.total_mass() - 1.0).abs() < 1e-9);
            assert!((c.total_mass() - 1.0).abs() < 1e-9);
            // variable-node error inequality and check-node tanh product
            let lhs = 2.0 * s.error_prob();
            let rhs = 2.0 * a.error_prob() * 2.0 * b.error_prob();
            assert!(lhs - rhs >= -1e-12, "{lhs} < {rhs}");
            let prod = (1.0 - 2.0 * a.error_prob()) * (1.0 - 2.0 * b.error_prob());
            assert!((1.0 - 2.0 * c.error_prob() - prod).abs() < 2e-2);
        }
    }
}
