//! Edge-perspective degree distributions of irregular LDPC ensembles.
//!
//! A [`DegreePolynomial`] stores `λ(x) = Σ λ_i x^{i-1}` (or `ρ`) as a dense
//! coefficient vector starting at degree 1. An [`Ensemble`] pairs the
//! variable-side and check-side distributions and caches the design rate.

use std::collections::BTreeMap;
use std::fmt;

use serde_json::{Map, Value};

use crate::error::{Error, Result};

/// Sums within this distance of 1 are renormalized; anything further is rejected.
const NORMALIZE_SLACK: f64 = 1e-9;

/// Edge-perspective (or node-perspective) degree distribution.
///
/// `coeffs[k]` is the fraction attached to degree `k + 1`, so the polynomial
/// is `Σ_k coeffs[k] x^k`. There is no slot for degree 0.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreePolynomial {
    coeffs: Vec<f64>,
}

impl DegreePolynomial {
    /// Builds a polynomial from fractions listed by degree, starting at degree 1.
    pub fn from_dense(mut coeffs: Vec<f64>) -> Result<Self> {
        while coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            return Err(Error::InvalidDistribution("no nonzero coefficients".into()));
        }
        for (k, &c) in coeffs.iter().enumerate() {
            if !c.is_finite() || c < 0.0 {
                return Err(Error::InvalidDistribution(format!(
                    "coefficient of degree {} is {c}, must be a nonnegative finite number",
                    k + 1
                )));
            }
        }
        let sum: f64 = coeffs.iter().sum();
        if (sum - 1.0).abs() > NORMALIZE_SLACK {
            return Err(Error::InvalidDistribution(format!(
                "coefficients sum to {sum}, expected 1"
            )));
        }
        if sum != 1.0 {
            coeffs.iter_mut().for_each(|c| *c /= sum);
        }
        Ok(Self { coeffs })
    }

    /// Builds a polynomial from sparse `(degree, fraction)` pairs. Repeated
    /// degrees accumulate.
    pub fn from_pairs<I>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, f64)>,
    {
        let mut dense = Vec::new();
        for (degree, frac) in pairs {
            if degree == 0 {
                return Err(Error::InvalidDistribution("degree 0 is not allowed".into()));
            }
            if dense.len() < degree {
                dense.resize(degree, 0.0);
            }
            dense[degree - 1] += frac;
        }
        Self::from_dense(dense)
    }

    /// All edges (or nodes) have degree `d`.
    pub fn regular(d: usize) -> Result<Self> {
        Self::from_pairs([(d, 1.0)])
    }

    /// Largest degree with a nonzero coefficient.
    pub fn max_degree(&self) -> usize {
        self.coeffs.len()
    }

    /// Fraction attached to `degree` (zero outside the support).
    pub fn coeff(&self, degree: usize) -> f64 {
        if degree == 0 {
            return 0.0;
        }
        self.coeffs.get(degree - 1).copied().unwrap_or(0.0)
    }

    /// Dense coefficients, index `k` holding degree `k + 1`.
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Iterates `(degree, fraction)` over the support.
    pub fn terms(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0.0)
            .map(|(k, &c)| (k + 1, c))
    }

    /// The single degree of a regular distribution.
    pub fn as_regular(&self) -> Option<usize> {
        let mut terms = self.terms();
        match (terms.next(), terms.next()) {
            (Some((d, _)), None) => Some(d),
            _ => None,
        }
    }

    /// `Σ coeffs[i] x^{i-1}` for `x` in `[0, 1]`.
    pub fn eval(&self, x: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::Domain(format!(
                "polynomial argument {x} outside [0, 1]"
            )));
        }
        Ok(self.eval_unchecked(x))
    }

    /// Horner evaluation without a domain check. Arguments above 1 are
    /// meaningful for the union-bound recursion, whose values may exceed 1.
    pub fn eval_unchecked(&self, x: f64) -> f64 {
        // seeded with the leading coefficient so that x = ∞ gives ∞, not NaN
        let mut it = self.coeffs.iter().rev();
        let lead = it.next().copied().unwrap_or(0.0);
        it.fold(lead, |acc, &c| acc * x + c)
    }

    /// `p'(1) = Σ (i-1) coeffs[i]`.
    pub fn derivative_at_one(&self) -> f64 {
        self.terms().map(|(d, c)| (d - 1) as f64 * c).sum()
    }

    /// `Σ coeffs[i] / i`, the reciprocal of the average node degree.
    pub fn inverse_mean_degree(&self) -> f64 {
        self.terms().map(|(d, c)| c / d as f64).sum()
    }

    /// Converts edge fractions to node fractions `Λ_i = (λ_i/i) / Σ_j λ_j/j`.
    pub fn node_perspective(&self) -> DegreePolynomial {
        let norm = self.inverse_mean_degree();
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(k, &c)| c / (k + 1) as f64 / norm)
            .collect();
        DegreePolynomial { coeffs }
    }

    /// Inverse of [`node_perspective`](Self::node_perspective): `λ_i = iΛ_i / Σ_j jΛ_j`.
    pub fn edge_perspective(&self) -> DegreePolynomial {
        let norm: f64 = self.terms().map(|(d, c)| d as f64 * c).sum();
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(k, &c)| c * (k + 1) as f64 / norm)
            .collect();
        DegreePolynomial { coeffs }
    }

    fn to_json_map(&self) -> Value {
        let map: Map<String, Value> = self
            .terms()
            .map(|(d, c)| (d.to_string(), Value::from(c)))
            .collect();
        Value::Object(map)
    }
}

impl fmt::Display for DegreePolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.terms().map(|(d, c)| format!("{d}:{c}")).collect();
        write!(f, "{{{}}}", parts.join(","))
    }
}

/// Design rate `1 − (Σ ρ_i/i) / (Σ λ_i/i)`.
pub fn design_rate(lambda: &DegreePolynomial, rho: &DegreePolynomial) -> Result<f64> {
    let var = lambda.inverse_mean_degree();
    if var == 0.0 {
        return Err(Error::InvalidDistribution(
            "variable-side distribution has zero total weight".into(),
        ));
    }
    Ok(1.0 - rho.inverse_mean_degree() / var)
}

/// A `(λ, ρ)` irregular LDPC ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    lambda: DegreePolynomial,
    rho: DegreePolynomial,
    design_rate: f64,
}

impl Ensemble {
    pub fn new(lambda: DegreePolynomial, rho: DegreePolynomial) -> Result<Self> {
        let rate = design_rate(&lambda, &rho)?;
        if !(rate > 0.0 && rate < 1.0) {
            return Err(Error::InvalidDistribution(format!(
                "design rate {rate} is outside (0, 1)"
            )));
        }
        if lambda.coeff(1) > 0.0 {
            log::warn!(
                "ensemble has degree-1 variable nodes (lambda_1 = {}); recursions cannot converge to 0",
                lambda.coeff(1)
            );
        }
        Ok(Self {
            lambda,
            rho,
            design_rate: rate,
        })
    }

    /// The `(d_v, d_c)`-regular ensemble.
    pub fn regular(d_v: usize, d_c: usize) -> Result<Self> {
        Self::new(DegreePolynomial::regular(d_v)?, DegreePolynomial::regular(d_c)?)
    }

    pub fn lambda(&self) -> &DegreePolynomial {
        &self.lambda
    }

    pub fn rho(&self) -> &DegreePolynomial {
        &self.rho
    }

    pub fn design_rate(&self) -> f64 {
        self.design_rate
    }

    /// `(d_v, d_c)` when both sides are regular.
    pub fn as_regular(&self) -> Option<(usize, usize)> {
        Some((self.lambda.as_regular()?, self.rho.as_regular()?))
    }

    /// Short identifier used to tag trajectories.
    pub fn id(&self) -> String {
        match self.as_regular() {
            Some((dv, dc)) => format!("({dv},{dc})"),
            None => format!("lambda={} rho={}", self.lambda, self.rho),
        }
    }

    /// Parses an ensemble file: `{"lambda": {"3": 1.0}, "rho": {"6": 1.0}}`.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: Value =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("ensemble JSON: {e}")))?;
        let obj = value
            .as_object()
            .ok_or_else(|| Error::Parse("ensemble must be a JSON object".into()))?;
        if let Some(extra) = obj.keys().find(|k| *k != "lambda" && *k != "rho") {
            return Err(Error::Parse(format!("unexpected key \"{extra}\" in ensemble")));
        }
        let lambda = parse_side(obj, "lambda")?;
        let rho = parse_side(obj, "rho")?;
        Self::new(lambda, rho)
    }

    pub fn to_json(&self) -> String {
        let mut map = Map::new();
        map.insert("lambda".into(), self.lambda.to_json_map());
        map.insert("rho".into(), self.rho.to_json_map());
        Value::Object(map).to_string()
    }
}

impl fmt::Display for Ensemble {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}

fn parse_side(obj: &Map<String, Value>, side: &str) -> Result<DegreePolynomial> {
    let entries = obj
        .get(side)
        .ok_or_else(|| Error::Parse(format!("missing key \"{side}\"")))?
        .as_object()
        .ok_or_else(|| Error::Parse(format!("\"{side}\" must be an object of degree: fraction")))?;
    let mut pairs = BTreeMap::new();
    for (key, val) in entries {
        let degree: usize = key
            .trim()
            .parse()
            .ok()
            .filter(|&d| d >= 1)
            .ok_or_else(|| {
                Error::Parse(format!(
                    "\"{side}\" key \"{key}\" is not a positive integer degree"
                ))
            })?;
        let frac = val.as_f64().ok_or_else(|| {
            Error::Parse(format!("\"{side}\".\"{key}\" must be a number, got {val}"))
        })?;
        if pairs.insert(degree, frac).is_some() {
            return Err(Error::Parse(format!("\"{side}\" repeats degree {degree}")));
        }
    }
    DegreePolynomial::from_pairs(pairs).map_err(|e| match e {
        Error::InvalidDistribution(msg) => Error::InvalidDistribution(format!("\"{side}\": {msg}")),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn poly(pairs: &[(usize, f64)]) -> DegreePolynomial {
        DegreePolynomial::from_pairs(pairs.iter().copied()).unwrap()
    }

    #[test]
    fn eval_examples() {
        assert_eq!(poly(&[(3, 1.0)]).eval(0.5).unwrap(), 0.25);
        let mixed = poly(&[(2, 0.5), (3, 0.5)]);
        assert!((mixed.eval(0.4).unwrap() - 0.28).abs() < 1e-15);
        assert_eq!(mixed.eval(1.0).unwrap(), 1.0);
        assert!(matches!(mixed.eval(1.5), Err(Error::Domain(_))));
        assert!(matches!(mixed.eval(-0.1), Err(Error::Domain(_))));
    }

    #[test]
    fn derivative_examples() {
        assert_eq!(poly(&[(6, 1.0)]).derivative_at_one(), 5.0);
        assert_eq!(poly(&[(2, 1.0)]).derivative_at_one(), 1.0);
        assert_eq!(poly(&[(4, 0.5), (6, 0.5)]).derivative_at_one(), 4.0);
    }

    #[test]
    fn design_rate_examples() {
        let r = |dv, dc| design_rate(&poly(&[(dv, 1.0)]), &poly(&[(dc, 1.0)])).unwrap();
        assert!((r(3, 6) - 0.5).abs() < 1e-15);
        assert!((r(3, 4) - 0.25).abs() < 1e-15);
        let p = poly(&[(2, 0.3), (5, 0.7)]);
        assert_eq!(design_rate(&p, &p).unwrap(), 0.0);
        assert!(Ensemble::new(p.clone(), p).is_err());
    }

    #[test]
    fn node_perspective_examples() {
        let reg = poly(&[(4, 1.0)]).node_perspective();
        assert_eq!(reg.coeff(4), 1.0);
        let np = poly(&[(2, 0.5), (4, 0.5)]).node_perspective();
        assert!((np.coeff(2) - 2.0 / 3.0).abs() < 1e-15);
        assert!((np.coeff(4) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn normalization_and_rejection() {
        let p = DegreePolynomial::from_dense(vec![0.0, 0.5, 0.5 + 5e-10]).unwrap();
        assert!((p.coeffs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(DegreePolynomial::from_dense(vec![0.5, 0.4]).is_err());
        assert!(DegreePolynomial::from_dense(vec![1.2, -0.2]).is_err());
        assert!(DegreePolynomial::from_pairs([(0, 1.0)]).is_err());
    }

    #[test]
    fn ensemble_json() {
        let ens = Ensemble::from_json(r#"{"lambda": {"3": 1.0}, "rho": {"6": 1.0}}"#).unwrap();
        assert_eq!(ens.as_regular(), Some((3, 6)));
        assert_eq!(ens.design_rate(), 0.5);
        assert_eq!(Ensemble::from_json(&ens.to_json()).unwrap(), ens);

        let err = Ensemble::from_json(r#"{"lambda": {"x": 1.0}, "rho": {"6": 1.0}}"#).unwrap_err();
        assert!(err.to_string().contains("\"x\""), "{err}");
        let err = Ensemble::from_json(r#"{"lambda": {"3": 1.0}}"#).unwrap_err();
        assert!(err.to_string().contains("rho"), "{err}");
        let err = Ensemble::from_json(r#"{"lambda": {"3": 0.9}, "rho": {"6": 1.0}}"#).unwrap_err();
        assert!(err.to_string().contains("lambda"), "{err}");
    }

    fn arb_poly() -> impl Strategy<Value = DegreePolynomial> {
        prop::collection::vec(0.0f64..1.0, 1..12).prop_filter_map("all zero", |raw| {
            let sum: f64 = raw.iter().sum();
            (sum > 1e-3).then(|| {
                DegreePolynomial::from_dense(raw.iter().map(|c| c / sum).collect()).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn eval_bounded_and_monotone(p in arb_poly(), a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let (vlo, vhi) = (p.eval(lo).unwrap(), p.eval(hi).unwrap());
            prop_assert!((0.0..=1.0 + 1e-12).contains(&vlo));
            prop_assert!((0.0..=1.0 + 1e-12).contains(&vhi));
            prop_assert!(vlo <= vhi + 1e-15);
            prop_assert!((p.eval(1.0).unwrap() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn derivative_matches_finite_difference(p in arb_poly()) {
            let h = 1e-6;
            let fd = (p.eval(1.0).unwrap() - p.eval(1.0 - h).unwrap()) / h;
            let d = p.derivative_at_one();
            // second-order remainder is bounded by h * p''(1) / 2
            let max_deg = p.max_degree() as f64;
            prop_assert!((fd - d).abs() <= h * max_deg * max_deg + 1e-8, "fd {} vs {}", fd, d);
        }

        #[test]
        fn node_edge_round_trip(p in arb_poly()) {
            let back = p.node_perspective().edge_perspective().node_perspective();
            let np = p.node_perspective();
            prop_assert!((np.coeffs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for (a, b) in back.coeffs().iter().zip(np.coeffs()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
