//! Memoryless binary-input output-symmetric channels.
//!
//! Every channel is described under all-zero transmission by the law of its
//! LLR `log f(y|0)/f(y|1)`. BEC and BSC densities are represented exactly by
//! atoms; BiAWGN is integrated bin-by-bin onto the quantization lattice.

use std::f64::consts::SQRT_2;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::density_evolution::{QuantizationParams, QuantizedDensity};
use crate::error::{Error, Result};

/// Lattice truncation beyond this mass is refused rather than folded in.
pub const MAX_TRUNCATED_MASS: f64 = 1e-12;

/// A parameterized MBIOS channel.
///
/// BiAWGN maps bit 0 to +1 and bit 1 to −1 with unit energy and noise
/// standard deviation `sigma`, so the LLR is `2y/σ²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChannelModel {
    Bec { eps: f64 },
    Bsc { p: f64 },
    BiAwgn { sigma: f64 },
}

impl ChannelModel {
    pub fn bec(eps: f64) -> Result<Self> {
        Self::Bec { eps }.validated()
    }

    pub fn bsc(p: f64) -> Result<Self> {
        Self::Bsc { p }.validated()
    }

    pub fn biawgn(sigma: f64) -> Result<Self> {
        Self::BiAwgn { sigma }.validated()
    }

    fn validated(self) -> Result<Self> {
        let ok = match self {
            Self::Bec { eps } => (0.0..=1.0).contains(&eps),
            Self::Bsc { p } => (0.0..=0.5).contains(&p),
            Self::BiAwgn { sigma } => sigma > 0.0 && sigma.is_finite(),
        };
        if ok {
            Ok(self)
        } else {
            Err(Error::Domain(format!("channel parameter out of range: {self}")))
        }
    }

    /// The scalar parameter (ε, p or σ).
    pub fn parameter(&self) -> f64 {
        match *self {
            Self::Bec { eps } => eps,
            Self::Bsc { p } => p,
            Self::BiAwgn { sigma } => sigma,
        }
    }

    /// Same family with a different parameter.
    pub fn with_parameter(&self, value: f64) -> Result<Self> {
        match self {
            Self::Bec { .. } => Self::bec(value),
            Self::Bsc { .. } => Self::bsc(value),
            Self::BiAwgn { .. } => Self::biawgn(value),
        }
    }

    /// Bhattacharyya parameter `D = ∫ √(f(y|0) f(y|1)) dy`.
    pub fn bhattacharyya(&self) -> f64 {
        match *self {
            Self::Bec { eps } => eps,
            Self::Bsc { p } => 2.0 * (p * (1.0 - p)).sqrt(),
            Self::BiAwgn { sigma } => (-0.5 / (sigma * sigma)).exp(),
        }
    }

    /// Uncoded ML error probability `P(LLR < 0) + ½ P(LLR = 0)`.
    pub fn uncoded_error_prob(&self) -> f64 {
        match *self {
            Self::Bec { eps } => eps * 0.5,
            Self::Bsc { p } => p,
            Self::BiAwgn { sigma } => gaussian_q(1.0 / sigma),
        }
    }

    /// Lattice actually used for this channel's density: BSC snaps the
    /// spacing so that its LLR atoms lie exactly on lattice points.
    pub fn effective_params(&self, q: QuantizationParams) -> QuantizationParams {
        match *self {
            Self::Bsc { p } if p > 0.0 && p < 0.5 => q.aligned_to(bsc_llr(p)),
            _ => q,
        }
    }

    /// LLR density under all-zero transmission.
    pub fn llr_density(&self, q: QuantizationParams) -> Result<QuantizedDensity> {
        match *self {
            Self::Bec { eps } => Ok(QuantizedDensity::erasure(q, eps)),
            Self::Bsc { p } if p == 0.0 => Ok(QuantizedDensity::certain(q)),
            Self::Bsc { p } if p == 0.5 => Ok(QuantizedDensity::erasure(q, 1.0)),
            Self::Bsc { p } => {
                let q = self.effective_params(q);
                let k = q.half_len();
                let steps = (bsc_llr(p) / q.delta).round() as usize;
                let mut masses = vec![0.0; 2 * k + 1];
                masses[k + steps] = 1.0 - p;
                masses[k - steps] = p;
                QuantizedDensity::from_parts(q, masses, 0.0, 0.0)
            }
            Self::BiAwgn { sigma } => biawgn_density(sigma, q),
        }
    }

    /// Draws one channel LLR for a transmitted 0. Infinite LLRs are returned
    /// as `f64::INFINITY`.
    pub fn sample_llr<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::Bec { eps } => {
                if rng.random::<f64>() < eps {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            Self::Bsc { p } => {
                if p == 0.5 {
                    return 0.0;
                }
                let l = bsc_llr(p);
                if rng.random::<f64>() < p {
                    -l
                } else {
                    l
                }
            }
            Self::BiAwgn { sigma } => {
                let noise: f64 = rng.sample(StandardNormal);
                2.0 * (1.0 + sigma * noise) / (sigma * sigma)
            }
        }
    }
}

impl fmt::Display for ChannelModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Self::Bec { eps } => write!(f, "bec:{eps}"),
            Self::Bsc { p } => write!(f, "bsc:{p}"),
            Self::BiAwgn { sigma } => write!(f, "biawgn:{sigma}"),
        }
    }
}

impl FromStr for ChannelModel {
    type Err = Error;

    /// Parses `bec:0.3`, `bsc:0.1` or `biawgn:1.0` (σ).
    fn from_str(s: &str) -> Result<Self> {
        let (kind, value) = s
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("channel spec \"{s}\" must look like kind:value")))?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("channel parameter \"{value}\" is not a number")))?;
        match kind.trim().to_ascii_lowercase().as_str() {
            "bec" => Self::bec(value),
            "bsc" => Self::bsc(value),
            "biawgn" | "awgn" => Self::biawgn(value),
            other => Err(Error::Parse(format!(
                "unknown channel \"{other}\" (expected bec, bsc or biawgn)"
            ))),
        }
    }
}

fn bsc_llr(p: f64) -> f64 {
    ((1.0 - p) / p).ln()
}

/// Upper Gaussian tail `Q(z) = P(N(0,1) > z)`.
pub fn gaussian_q(z: f64) -> f64 {
    0.5 * libm::erfc(z / SQRT_2)
}

/// `P(lo < N(mu, s²) ≤ hi)`, computed on the tail side that avoids cancellation.
fn gaussian_mass(lo: f64, hi: f64, mu: f64, s: f64) -> f64 {
    let (zl, zh) = ((lo - mu) / s, (hi - mu) / s);
    if zl >= 0.0 {
        gaussian_q(zl) - gaussian_q(zh)
    } else if zh <= 0.0 {
        gaussian_q(-zh) - gaussian_q(-zl)
    } else {
        1.0 - gaussian_q(zh) - gaussian_q(-zl)
    }
}

fn biawgn_density(sigma: f64, q: QuantizationParams) -> Result<QuantizedDensity> {
    let mu = 2.0 / (sigma * sigma);
    let s = 2.0 / sigma;
    let k = q.half_len();
    let edge = (k as f64 + 0.5) * q.delta;
    let upper_tail = gaussian_q((edge - mu) / s);
    let lower_tail = gaussian_q((edge + mu) / s);
    let truncated = upper_tail + lower_tail;
    if truncated > MAX_TRUNCATED_MASS {
        return Err(Error::RangeTooSmall {
            truncated,
            limit: MAX_TRUNCATED_MASS,
        });
    }
    let mut masses: Vec<f64> = (0..=2 * k)
        .map(|i| {
            let m = (i as f64 - k as f64) * q.delta;
            gaussian_mass(m - 0.5 * q.delta, m + 0.5 * q.delta, mu, s)
        })
        .collect();
    masses[0] += lower_tail;
    masses[2 * k] += upper_tail;
    QuantizedDensity::from_parts(q, masses, 0.0, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Composite Simpson rule on [a, b].
    fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut acc = f(a) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(a + i as f64 * h);
        }
        acc * h / 3.0
    }

    fn awgn_pdf(y: f64, x: f64, sigma: f64) -> f64 {
        let z = (y - x) / sigma;
        (-0.5 * z * z).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
    }

    #[test]
    fn bhattacharyya_examples() {
        assert_eq!(ChannelModel::bec(0.3).unwrap().bhattacharyya(), 0.3);
        assert!((ChannelModel::bsc(0.1).unwrap().bhattacharyya() - 0.6).abs() < 1e-15);
        let sigma = 1.0;
        let quad = simpson(
            |y| (awgn_pdf(y, 1.0, sigma) * awgn_pdf(y, -1.0, sigma)).sqrt(),
            -12.0,
            12.0,
            20_000,
        );
        let d = ChannelModel::biawgn(sigma).unwrap().bhattacharyya();
        assert!((d - quad).abs() < 1e-6, "{d} vs {quad}");
        assert!((d - 0.606_530_66).abs() < 1e-6);
    }

    #[test]
    fn uncoded_error_examples() {
        assert_eq!(ChannelModel::bec(0.3).unwrap().uncoded_error_prob(), 0.15);
        assert_eq!(ChannelModel::bsc(0.1).unwrap().uncoded_error_prob(), 0.1);
        let quad = simpson(|y| awgn_pdf(y, 1.0, 1.0), -14.0, 0.0, 20_000);
        let p0 = ChannelModel::biawgn(1.0).unwrap().uncoded_error_prob();
        assert!((p0 - quad).abs() < 1e-6, "{p0} vs {quad}");
        assert!((p0 - 0.158_655_25).abs() < 1e-6);
    }

    #[test]
    fn parse_and_display() {
        let ch: ChannelModel = "bsc:0.1".parse().unwrap();
        assert_eq!(ch, ChannelModel::Bsc { p: 0.1 });
        assert_eq!(ch.to_string().parse::<ChannelModel>().unwrap(), ch);
        assert!("bsc:0.7".parse::<ChannelModel>().is_err());
        assert!("biawgn:0".parse::<ChannelModel>().is_err());
        assert!("gauss:1".parse::<ChannelModel>().is_err());
        assert!("bec".parse::<ChannelModel>().is_err());
        assert!("bec:x".parse::<ChannelModel>().is_err());
    }

    #[test]
    fn atom_densities() {
        let q = QuantizationParams::default();
        let bec = ChannelModel::bec(0.3).unwrap().llr_density(q).unwrap();
        assert_eq!(bec.erasure_prob(), Some(0.3));
        assert_eq!(bec.pos_inf(), 0.7);

        let bsc = ChannelModel::bsc(0.1).unwrap().llr_density(q).unwrap();
        let k = bsc.half_len();
        let hits: Vec<(f64, f64)> = bsc
            .masses()
            .iter()
            .enumerate()
            .filter(|(_, &m)| m > 0.0)
            .map(|(i, &m)| (bsc.llr_at(i), m))
            .collect();
        assert_eq!(hits.len(), 2);
        assert!((hits[0].0 + 9f64.ln()).abs() < 1e-12 && hits[0].1 == 0.1);
        assert!((hits[1].0 - 9f64.ln()).abs() < 1e-12 && hits[1].1 == 0.9);
        assert!(bsc.symmetry_residual() < 1e-15);
        assert!(k as f64 * bsc.delta() >= 40.0);
        assert_eq!(bsc.error_prob(), 0.1);
        assert!((bsc.expected_tanh_half() - 0.8).abs() < 1e-12);
    }

    #[test]
    fn biawgn_density_properties() {
        let q = QuantizationParams::default();
        for sigma in [0.6, 0.8, 1.0, 1.5] {
            let ch = ChannelModel::biawgn(sigma).unwrap();
            let d = ch.llr_density(q).unwrap();
            assert!((d.total_mass() - 1.0).abs() < 1e-9);
            assert!(d.symmetry_residual() <= 1e-6, "sigma {sigma}: {}", d.symmetry_residual());
            assert!((d.error_prob() - ch.uncoded_error_prob()).abs() < 1e-4);
            assert!((d.expected_tanh_half() - (1.0 - 2.0 * d.error_prob())).abs() < 1e-3);
            assert!((d.finite_mean() - 2.0 / (sigma * sigma)).abs() < 1e-3);
        }
        // σ = 0.3 puts the LLR mean at 22 with spread 6.7: far tail past 40.
        let err = ChannelModel::biawgn(0.3).unwrap().llr_density(q).unwrap_err();
        assert!(matches!(err, Error::RangeTooSmall { .. }));
        let wide = QuantizationParams::new(0.05, 80.0).unwrap();
        assert!(ChannelModel::biawgn(0.3).unwrap().llr_density(wide).is_ok());
    }

    #[test]
    fn ordering_two_p0_le_d_le_one() {
        for i in 0..=50 {
            let t = i as f64 / 50.0;
            for ch in [
                ChannelModel::bec(t).unwrap(),
                ChannelModel::bsc(0.5 * t).unwrap(),
                ChannelModel::biawgn(0.1 + 3.0 * t).unwrap(),
            ] {
                let (d, p0) = (ch.bhattacharyya(), ch.uncoded_error_prob());
                assert!(2.0 * p0 <= d + 1e-15 && d <= 1.0, "{ch}: 2P0 {} D {d}", 2.0 * p0);
            }
        }
    }

    #[test]
    fn sampler_edge_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let bec0 = ChannelModel::bec(0.0).unwrap();
        let bsc_half = ChannelModel::bsc(0.5).unwrap();
        for _ in 0..1000 {
            assert_eq!(bec0.sample_llr(&mut rng), f64::INFINITY);
            assert_eq!(bsc_half.sample_llr(&mut rng), 0.0);
        }
    }

    #[test]
    fn sampler_matches_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let draws = 1_000_000;
        let bsc = ChannelModel::bsc(0.1).unwrap();
        let neg = (0..draws).filter(|_| bsc.sample_llr(&mut rng) < 0.0).count() as f64 / draws as f64;
        assert!((neg - 0.1).abs() <= 4.0 * (0.09f64 / draws as f64).sqrt(), "{neg}");

        let sigma = 0.8;
        let awgn = ChannelModel::biawgn(sigma).unwrap();
        let density = awgn.llr_density(QuantizationParams::default()).unwrap();
        let mean: f64 = (0..draws).map(|_| awgn.sample_llr(&mut rng)).sum::<f64>() / draws as f64;
        let se = (4.0 / (sigma * sigma) / draws as f64).sqrt();
        assert!((mean - density.finite_mean()).abs() <= 4.0 * se, "{mean}");
    }
}
