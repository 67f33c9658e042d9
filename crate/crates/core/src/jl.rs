//! Johnson–Lindenstrauss random projection.
//!
//! For `0 < ε < 1` and `n` points, any `k ≥ 4 (ε²/2 − ε³/3)⁻¹ ln n` admits a
//! map `f(x) = A x / √k` (entries of `A` i.i.d. N(0,1)) with
//! `(1−ε)‖u−v‖² ≤ ‖f(u)−f(v)‖² ≤ (1+ε)‖u−v‖²` for all pairs. Maps are drawn,
//! checked on every pair, and redrawn with the next seed on failure.
//!
//! `A` is filled column by column from one Gaussian stream, so the map for
//! width `d` is the leading `d` columns of the map for any wider `d'` under the
//! same seed and `k`. Zero-padding a vector and projecting with the wider map
//! therefore gives the same image as the narrow map.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{gaussian_sample, RngState};

pub const DEFAULT_MAX_ATTEMPTS: u32 = 64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum JlError {
    #[error("epsilon must lie in (0, 1), got {0}")]
    InvalidEpsilon(f64),
    #[error("need at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("source dimension must be at least 1")]
    EmptyDimension,
    #[error("dimension mismatch: map expects {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("no map met the distortion bound after {0} attempts")]
    AttemptsExhausted(u32),
}

/// Target-dimension guarantee: `k` satisfies the bound for `n` points at `epsilon`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JlCertificate {
    pub epsilon: f64,
    pub n: usize,
    pub k: usize,
    pub d: usize,
}

impl JlCertificate {
    pub fn new(epsilon: f64, n: usize, d: usize) -> Result<Self, JlError> {
        if d == 0 {
            return Err(JlError::EmptyDimension);
        }
        let k = jl_min_dimension(epsilon, n)?;
        Ok(Self { epsilon, n, k, d })
    }
}

fn bound(epsilon: f64, n: usize) -> f64 {
    4.0 / (epsilon * epsilon / 2.0 - epsilon.powi(3) / 3.0) * (n as f64).ln()
}

/// Smallest integer `k ≥ 4 (ε²/2 − ε³/3)⁻¹ ln n`.
pub fn jl_min_dimension(epsilon: f64, n: usize) -> Result<usize, JlError> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(JlError::InvalidEpsilon(epsilon));
    }
    if n < 2 {
        return Err(JlError::TooFewPoints(n));
    }
    Ok(bound(epsilon, n).ceil().max(1.0) as usize)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionMap {
    /// Column-major `k × d` standard normal entries.
    columns: Vec<f64>,
    scale: f64,
    seed: u64,
    certificate: JlCertificate,
    attempts: u32,
}

/// Draws the `k × d` Gaussian map named by `certificate` under `seed`.
pub fn make_map(d: usize, certificate: JlCertificate, seed: u64) -> Result<ProjectionMap, JlError> {
    if d == 0 {
        return Err(JlError::EmptyDimension);
    }
    let k = certificate.k;
    let columns = gaussian_sample(&mut RngState::new(seed), k * d);
    Ok(ProjectionMap {
        columns,
        scale: 1.0 / (k as f64).sqrt(),
        seed,
        certificate: JlCertificate { d, ..certificate },
        attempts: 1,
    })
}

impl ProjectionMap {
    pub fn k(&self) -> usize {
        self.certificate.k
    }

    pub fn d(&self) -> usize {
        self.certificate.d
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn certificate(&self) -> &JlCertificate {
        &self.certificate
    }

    /// Draws used by `find_map` to reach this map (1 for a direct `make_map`).
    pub fn attempts(&self) -> u32 {
        self.attempts
    }

    /// Entry `A[i][j]` (unscaled).
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.columns[j * self.k() + i]
    }

    pub fn entries(&self) -> impl Iterator<Item = f64> + '_ {
        self.columns.iter().copied()
    }

    /// Projects `x`, which may be shorter than `d`; missing trailing
    /// coordinates are taken as zero.
    pub fn project_padded(&self, x: &[f64]) -> Result<Vec<f64>, JlError> {
        if x.len() > self.d() {
            return Err(JlError::DimensionMismatch {
                expected: self.d(),
                found: x.len(),
            });
        }
        let k = self.k();
        let mut out = vec![0.0; k];
        for (j, &xj) in x.iter().enumerate() {
            if xj == 0.0 {
                continue;
            }
            let col = &self.columns[j * k..(j + 1) * k];
            for (o, a) in out.iter_mut().zip(col) {
                *o += a * xj;
            }
        }
        out.iter_mut().for_each(|o| *o *= self.scale);
        Ok(out)
    }
}

/// `A x / √k`.
pub fn project(map: &ProjectionMap, x: &[f64]) -> Result<Vec<f64>, JlError> {
    if x.len() != map.d() {
        return Err(JlError::DimensionMismatch {
            expected: map.d(),
            found: x.len(),
        });
    }
    map.project_padded(x)
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Whether every pair of `points` keeps its squared distance within `1 ± ε`
/// under `map`.
pub fn preserves_pairwise(
    map: &ProjectionMap,
    points: &[Vec<f64>],
    epsilon: f64,
) -> Result<bool, JlError> {
    let images = points
        .iter()
        .map(|p| project(map, p))
        .collect::<Result<Vec<_>, _>>()?;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let before = squared_distance(&points[i], &points[j]);
            let after = squared_distance(&images[i], &images[j]);
            if after < (1.0 - epsilon) * before || after > (1.0 + epsilon) * before {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// First map under seeds `seed, seed+1, …` that preserves every pairwise
/// squared distance of `points` within `1 ± epsilon`.
pub fn find_map(
    points: &[Vec<f64>],
    epsilon: f64,
    seed: u64,
    max_attempts: u32,
) -> Result<ProjectionMap, JlError> {
    let n = points.len();
    let certificate = JlCertificate::new(epsilon, n, points.first().map_or(0, Vec::len))?;
    if let Some(bad) = points.iter().find(|p| p.len() != certificate.d) {
        return Err(JlError::DimensionMismatch {
            expected: certificate.d,
            found: bad.len(),
        });
    }
    for attempt in 0..max_attempts {
        let mut map = make_map(
            certificate.d,
            certificate,
            seed.wrapping_add(attempt as u64),
        )?;
        if preserves_pairwise(&map, points, epsilon)? {
            map.attempts = attempt + 1;
            return Ok(map);
        }
    }
    Err(JlError::AttemptsExhausted(max_attempts))
}

/// Shared map for two-point comparisons: `k = jl_min_dimension(ε, 2)`, width
/// `d`, drawn under `seed` without distortion checking.
pub fn pair_map(d: usize, epsilon: f64, seed: u64) -> Result<ProjectionMap, JlError> {
    make_map(d, JlCertificate::new(epsilon, 2, d)?, seed)
}

/// Zero-pads `a` and `b` to a common width and projects both through one
/// shared map with `k = jl_min_dimension(ε, 2)`.
///
/// The map is `find_map` over the two padded vectors starting at `seed`,
/// so their squared distance is preserved within `1 ± ε`.
pub fn align_dimensions(
    a: &[f64],
    b: &[f64],
    epsilon: f64,
    seed: u64,
) -> Result<(Vec<f64>, Vec<f64>), JlError> {
    if a.is_empty() || b.is_empty() {
        return Err(JlError::EmptyDimension);
    }
    let d = a.len().max(b.len());
    let pad = |v: &[f64]| {
        let mut p = v.to_vec();
        p.resize(d, 0.0);
        p
    };
    let map = find_map(&[pad(a), pad(b)], epsilon, seed, DEFAULT_MAX_ATTEMPTS)?;
    Ok((map.project_padded(a)?, map.project_padded(b)?))
}
