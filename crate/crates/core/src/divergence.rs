//! Bhattacharyya coefficient and distance.
//!
//! `ρ` measures overlap between two populations and `D = −ln ρ`. Available
//! forms: discrete (`Σ √(aᵢbᵢ)`), continuous by quadrature, univariate and
//! multivariate normal closed forms, and the discrete M-population
//! coefficient `Σⱼ (Πᵢ pᵢⱼ)^{1/M}`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{
    cholesky, log_det_from_factor, quadrature, solve_with_factor, GaussianSummary, NumericsError,
};

const SIMPLEX_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DivergenceError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("probabilities must be finite, non-negative and sum to 1 (sum = {sum})")]
    NotADistribution { sum: f64 },
    #[error("variance must be positive, got {0}")]
    NonPositiveVariance(f64),
    #[error("need at least two populations, got {0}")]
    TooFewPopulations(usize),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Probability vector over `k` categories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteDistribution {
    probs: Vec<f64>,
}

impl DiscreteDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self, DivergenceError> {
        let sum: f64 = probs.iter().sum();
        if probs.is_empty()
            || probs.iter().any(|p| !p.is_finite() || *p < 0.0)
            || (sum - 1.0).abs() > SIMPLEX_TOL
        {
            return Err(DivergenceError::NotADistribution { sum });
        }
        Ok(Self { probs })
    }

    /// Normalizes non-negative counts or weights.
    pub fn from_counts(counts: &[f64]) -> Result<Self, DivergenceError> {
        let total: f64 = counts.iter().sum();
        if !(total > 0.0) {
            return Err(DivergenceError::NotADistribution { sum: total });
        }
        let probs: Vec<f64> = counts.iter().map(|c| c / total).collect();
        // renormalizing can leave the sum a few ulps off; fold the residue into the largest cell
        let residue = 1.0 - probs.iter().sum::<f64>();
        let mut probs = probs;
        if let Some(big) = probs.iter_mut().max_by(|a, b| a.total_cmp(b)) {
            *big += residue;
        }
        Self::new(probs)
    }

    pub fn uniform(k: usize) -> Self {
        Self {
            probs: vec![1.0 / k as f64; k],
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

/// Bhattacharyya coefficient with its distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Divergence {
    coefficient: f64,
    distance: Distance,
}

/// `D = −ln ρ`; `Infinite` exactly when `ρ = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Distance {
    Finite(f64),
    #[serde(with = "infinite_marker")]
    Infinite,
}

mod infinite_marker {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str("inf")
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<(), D::Error> {
        match String::deserialize(d)?.as_str() {
            "inf" => Ok(()),
            other => Err(D::Error::custom(format!(
                "expected \"inf\", found {other:?}"
            ))),
        }
    }
}

impl Distance {
    pub fn value(self) -> f64 {
        match self {
            Distance::Finite(d) => d,
            Distance::Infinite => f64::INFINITY,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Distance::Infinite)
    }
}

impl std::fmt::Display for Distance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Distance::Finite(d) => write!(f, "{d}"),
            Distance::Infinite => f.write_str("inf"),
        }
    }
}

impl Divergence {
    /// From a coefficient; values above 1 by roundoff are clamped.
    pub fn from_coefficient(rho: f64) -> Self {
        let rho = if rho.is_nan() {
            0.0
        } else {
            rho.clamp(0.0, 1.0)
        };
        let distance = if rho >= 1.0 {
            Distance::Finite(0.0)
        } else if rho > 0.0 {
            Distance::Finite(-rho.ln())
        } else {
            Distance::Infinite
        };
        Self {
            coefficient: rho,
            distance,
        }
    }

    /// From a distance computed directly (normal closed forms).
    pub fn from_distance(d: f64) -> Self {
        if d.is_infinite() {
            return Self {
                coefficient: 0.0,
                distance: Distance::Infinite,
            };
        }
        let d = if d > 0.0 { d } else { 0.0 };
        let rho = (-d).exp();
        if rho == 0.0 {
            Self {
                coefficient: 0.0,
                distance: Distance::Infinite,
            }
        } else {
            Self {
                coefficient: rho,
                distance: Distance::Finite(d),
            }
        }
    }

    pub fn coefficient(&self) -> f64 {
        self.coefficient
    }

    pub fn distance(&self) -> Distance {
        self.distance
    }

    /// The distance as f64 (`+∞` for disjoint populations).
    pub fn d(&self) -> f64 {
        self.distance.value()
    }

    /// Angle between the square-root probability vectors, `arccos ρ`.
    pub fn angle(&self) -> f64 {
        self.coefficient.acos()
    }
}

pub fn bc_discrete(
    a: &DiscreteDistribution,
    b: &DiscreteDistribution,
) -> Result<Divergence, DivergenceError> {
    if a.len() != b.len() {
        return Err(DivergenceError::DimensionMismatch(a.len(), b.len()));
    }
    let rho: f64 = a
        .probs
        .iter()
        .zip(&b.probs)
        .map(|(x, y)| (x * y).sqrt())
        .sum();
    Ok(Divergence::from_coefficient(rho))
}

/// `∫ √(pdf_a · pdf_b)` over `support` by adaptive quadrature.
pub fn bc_continuous<A, B>(
    pdf_a: A,
    pdf_b: B,
    support: (f64, f64),
) -> Result<Divergence, DivergenceError>
where
    A: Fn(f64) -> f64,
    B: Fn(f64) -> f64,
{
    let rho = quadrature(
        |x| (pdf_a(x).max(0.0) * pdf_b(x).max(0.0)).sqrt(),
        support.0,
        support.1,
        1e-10,
    )?;
    Ok(Divergence::from_coefficient(rho))
}

/// Closed form for two univariate normals given as `(mean, variance)`.
pub fn bc_normal_1d(p: (f64, f64), q: (f64, f64)) -> Result<Divergence, DivergenceError> {
    let ((mu_p, var_p), (mu_q, var_q)) = (p, q);
    for v in [var_p, var_q] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(DivergenceError::NonPositiveVariance(v));
        }
    }
    let ratio_term = 0.25 * (var_p / var_q + var_q / var_p + 2.0);
    let d = 0.25 * ratio_term.ln() + 0.25 * (mu_p - mu_q).powi(2) / (var_p + var_q);
    Ok(Divergence::from_distance(d))
}

/// Closed form for two multivariate normals:
/// `⅛ Δμᵀ Σ⁻¹ Δμ + ½ ln(det Σ / √(det Σ₁ det Σ₂))` with `Σ = (Σ₁+Σ₂)/2`.
pub fn bc_normal_mv(
    p1: &GaussianSummary,
    p2: &GaussianSummary,
) -> Result<Divergence, DivergenceError> {
    if p1.dim() != p2.dim() {
        return Err(DivergenceError::DimensionMismatch(p1.dim(), p2.dim()));
    }
    let pooled = p1.cov().average(p2.cov())?;
    let l = cholesky(&pooled)?;
    let l1 = cholesky(p1.cov())?;
    let l2 = cholesky(p2.cov())?;
    let delta: Vec<f64> = p1
        .mean()
        .iter()
        .zip(p2.mean())
        .map(|(a, b)| a - b)
        .collect();
    let x = solve_with_factor(&l, &delta);
    let mahalanobis: f64 = delta.iter().zip(&x).map(|(a, b)| a * b).sum();
    let log_ratio =
        log_det_from_factor(&l) - 0.5 * (log_det_from_factor(&l1) + log_det_from_factor(&l2));
    Ok(Divergence::from_distance(
        0.125 * mahalanobis + 0.5 * log_ratio,
    ))
}

/// Coefficient among `M ≥ 2` discrete populations, `Σⱼ (Πᵢ pᵢⱼ)^{1/M}`.
pub fn bc_multi_population(ds: &[DiscreteDistribution]) -> Result<f64, DivergenceError> {
    if ds.len() < 2 {
        return Err(DivergenceError::TooFewPopulations(ds.len()));
    }
    let k = ds[0].len();
    if let Some(bad) = ds.iter().find(|d| d.len() != k) {
        return Err(DivergenceError::DimensionMismatch(k, bad.len()));
    }
    let inv_m = 1.0 / ds.len() as f64;
    let rho: f64 = if ds.len() == 2 {
        // square root is exact where powf(0.5) may differ in the last bit
        (0..k)
            .map(|j| (ds[0].probs[j] * ds[1].probs[j]).sqrt())
            .sum()
    } else {
        (0..k)
            .map(|j| ds.iter().map(|d| d.probs[j]).product::<f64>().powf(inv_m))
            .sum()
    };
    Ok(rho.clamp(0.0, 1.0))
}
