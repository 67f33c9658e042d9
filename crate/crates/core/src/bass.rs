//! Bass diffusion of information arrival.
//!
//! The installed-base fraction `F` solves `f / (1 − F) = p + q·F` with
//! `F(0) = 0`, giving
//!
//! ```text
//! F(t) = (1 − e^{−(p+q)t}) / (1 + (q/p)·e^{−(p+q)t})
//! f(t) = (p + q·F(t)) · (1 − F(t))
//! S(t) = m · (p+q)²/p · e^{−(p+q)t} / (1 + (q/p)·e^{−(p+q)t})²
//! ```
//!
//! Time is measured in simulation ticks. One adopter is one information item.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BassError {
    #[error("innovation coefficient p must be positive and finite, got {0}")]
    InvalidInnovation(f64),
    #[error("imitation coefficient q must be non-negative and finite, got {0}")]
    InvalidImitation(f64),
    #[error("market potential m must be at least 1, got {0}")]
    InvalidPotential(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBassParams")]
pub struct BassParams {
    p: f64,
    q: f64,
    m: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBassParams {
    p: f64,
    q: f64,
    m: f64,
}

impl TryFrom<RawBassParams> for BassParams {
    type Error = BassError;
    fn try_from(raw: RawBassParams) -> Result<Self, BassError> {
        Self::new(raw.p, raw.q, raw.m)
    }
}

impl BassParams {
    pub fn new(p: f64, q: f64, m: f64) -> Result<Self, BassError> {
        if !(p > 0.0) || !p.is_finite() {
            return Err(BassError::InvalidInnovation(p));
        }
        if !(q >= 0.0) || !q.is_finite() {
            return Err(BassError::InvalidImitation(q));
        }
        if !(m >= 1.0) || !m.is_finite() {
            return Err(BassError::InvalidPotential(m));
        }
        Ok(Self { p, q, m })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    /// Time of peak adoption rate, `ln(q/p)/(p+q)`, or 0 when `q ≤ p`.
    pub fn peak_time(&self) -> f64 {
        if self.q <= self.p {
            0.0
        } else {
            (self.q / self.p).ln() / (self.p + self.q)
        }
    }
}

/// Installed-base fraction `F(t)`. Negative `t` is clamped to 0.
pub fn bass_cdf(params: &BassParams, t: f64) -> f64 {
    let t = t.max(0.0);
    let decay = (-(params.p + params.q) * t).exp();
    // 1 - e^{-x} via expm1 keeps small-t accuracy.
    let num = -(-(params.p + params.q) * t).exp_m1();
    (num / (1.0 + params.q / params.p * decay)).clamp(0.0, 1.0)
}

/// Adoption rate `f(t) = (p + q·F)(1 − F)`.
pub fn bass_density(params: &BassParams, t: f64) -> f64 {
    let big_f = bass_cdf(params, t);
    (params.p + params.q * big_f) * survival(params, t)
}

/// `1 − F(t) = e^{−(p+q)t}(1 + q/p) / (1 + (q/p)e^{−(p+q)t})`, accurate where
/// `F` rounds to 1.
fn survival(params: &BassParams, t: f64) -> f64 {
    let ratio = params.q / params.p;
    let decay = (-(params.p + params.q) * t.max(0.0)).exp();
    decay * (1.0 + ratio) / (1.0 + ratio * decay)
}

/// Sales rate `S(t)` by its own closed form; equals `m · f(t)`.
pub fn bass_sales(params: &BassParams, t: f64) -> f64 {
    let t = t.max(0.0);
    let (p, q, m) = (params.p, params.q, params.m);
    let decay = (-(p + q) * t).exp();
    let denom = 1.0 + q / p * decay;
    m * (p + q) * (p + q) / p * decay / (denom * denom)
}

/// Discretizes cumulative adoption into whole information items.
///
/// The running total emitted through time `t` is always `floor(m · F(t))`,
/// so counts do not depend on how time is partitioned.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrivalState {
    params: BassParams,
    last_t: f64,
    fractional_carry: f64,
    emitted: u64,
}

impl ArrivalState {
    pub fn new(params: BassParams) -> Self {
        Self {
            params,
            last_t: 0.0,
            fractional_carry: 0.0,
            emitted: 0,
        }
    }

    pub fn params(&self) -> &BassParams {
        &self.params
    }

    pub fn last_t(&self) -> f64 {
        self.last_t
    }

    pub fn carry(&self) -> f64 {
        self.fractional_carry
    }

    /// Items emitted so far.
    pub fn emitted(&self) -> u64 {
        self.emitted
    }

    /// Whole items reachable at saturation: `floor(m)`.
    pub fn capacity(&self) -> u64 {
        self.params.m.floor() as u64
    }
}

/// New items arriving in `(state.last_t, t_next]` and the advanced state.
///
/// The carry is the fractional part of `m · F(t_next)`; the count is the
/// whole-item increment of that cumulative. This is the carry accumulator
/// written against the cumulative curve, so the partition sum telescopes to
/// `floor(m · F(T))` with no float drift. A `t_next` before `last_t` is
/// treated as `last_t`.
pub fn arrivals_between(state: &ArrivalState, t_next: f64) -> (u64, ArrivalState) {
    if !(t_next > state.last_t) {
        return (0, *state);
    }
    let cumulative = state.params.m * bass_cdf(&state.params, t_next);
    let whole = (cumulative.floor() as u64)
        .min(state.capacity())
        .max(state.emitted);
    let count = whole - state.emitted;
    let next = ArrivalState {
        params: state.params,
        last_t: t_next,
        fractional_carry: (cumulative - whole as f64).clamp(0.0, 1.0 - f64::EPSILON),
        emitted: whole,
    };
    (count, next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::quadrature;
    use proptest::prelude::*;

    fn diffusion() -> BassParams {
        BassParams::new(0.03, 0.38, 1.0).unwrap()
    }

    /// Classical RK4 on dF/dt = (p + qF)(1 − F), F(0) = 0.
    fn rk4_cdf(p: f64, q: f64, t_end: f64, steps: usize) -> f64 {
        let rhs = |f: f64| (p + q * f) * (1.0 - f);
        let h = t_end / steps as f64;
        let mut f = 0.0;
        for _ in 0..steps {
            let k1 = rhs(f);
            let k2 = rhs(f + 0.5 * h * k1);
            let k3 = rhs(f + 0.5 * h * k2);
            let k4 = rhs(f + h * k3);
            f += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        f
    }

    #[test]
    fn cdf_examples() {
        assert_eq!(bass_cdf(&diffusion(), 0.0), 0.0);
        let pure = BassParams::new(0.1, 0.0, 1.0).unwrap();
        assert!((bass_cdf(&pure, 10.0) - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
        assert!((bass_cdf(&pure, 10.0) - 0.63212).abs() < 1e-5);
        let ode = rk4_cdf(0.03, 0.38, 6.192, 20_000);
        assert!((bass_cdf(&diffusion(), 6.192) - ode).abs() < 1e-6);
    }

    #[test]
    fn density_examples() {
        assert_eq!(bass_density(&diffusion(), 0.0), 0.03);
        let integral = quadrature(|u| bass_density(&diffusion(), u), 0.0, 20.0, 1e-11).unwrap();
        assert!((integral - bass_cdf(&diffusion(), 20.0)).abs() < 1e-8);
        let pure = BassParams::new(0.2, 0.0, 1.0).unwrap();
        for t in [0.0, 0.5, 3.0, 17.0] {
            assert!((bass_density(&pure, t) - 0.2 * (-0.2 * t).exp()).abs() < 1e-15);
        }
    }

    #[test]
    fn sales_examples() {
        let params = BassParams::new(0.03, 0.38, 500.0).unwrap();
        assert!((bass_sales(&params, 0.0) - 500.0 * 0.03).abs() < 1e-12);
        // grid argmax of S
        let (mut best_t, mut best_s) = (0.0, f64::MIN);
        for i in 0..=200_000 {
            let t = i as f64 * 1e-4;
            let s = bass_sales(&params, t);
            if s > best_s {
                best_s = s;
                best_t = t;
            }
        }
        assert!((best_t - 6.192).abs() < 1e-3, "{best_t}");
        assert!((best_t - params.peak_time()).abs() < 1e-3);
        let unit = diffusion();
        for t in [0.0, 1.0, 6.0, 40.0] {
            assert!((bass_sales(&unit, t) - bass_density(&unit, t)).abs() <= 1e-12);
        }
    }

    #[test]
    fn rejects_invalid_params() {
        assert_eq!(
            BassParams::new(0.0, 0.1, 10.0),
            Err(BassError::InvalidInnovation(0.0))
        );
        assert_eq!(
            BassParams::new(0.1, -0.1, 10.0),
            Err(BassError::InvalidImitation(-0.1))
        );
        assert_eq!(
            BassParams::new(0.1, 0.1, 0.5),
            Err(BassError::InvalidPotential(0.5))
        );
        assert!(BassParams::new(0.1, 0.0, 1.0).is_ok());
    }

    #[test]
    fn arrivals_basic_contract() {
        let st = ArrivalState::new(BassParams::new(0.03, 0.38, 100.0).unwrap());
        let (n, st1) = arrivals_between(&st, 0.0);
        assert_eq!((n, st1), (0, st));
        let (_, st2) = arrivals_between(&st, 5.0);
        let (n, st3) = arrivals_between(&st2, 5.0);
        assert_eq!(n, 0);
        assert_eq!(st3.carry(), st2.carry());
        let (total, _) = arrivals_between(&st, 1e6);
        assert_eq!(total, 100);
    }

    #[test]
    fn one_step_equals_ten_steps() {
        let st = ArrivalState::new(BassParams::new(0.03, 0.38, 1234.0).unwrap());
        let (whole, _) = arrivals_between(&st, 10.0);
        let mut s = st;
        let mut parts = 0;
        for i in 1..=10 {
            let (n, next) = arrivals_between(&s, i as f64);
            parts += n;
            s = next;
        }
        assert_eq!(whole, parts);
        assert_eq!(whole, (1234.0 * bass_cdf(st.params(), 10.0)).floor() as u64);
    }

    proptest! {
        #[test]
        fn cdf_monotone_and_bounded(p in 1e-3f64..1.0, q in 0.0f64..1.0, t in 0.0f64..60.0, dt in 0.0f64..5.0) {
            let params = BassParams::new(p, q, 10.0).unwrap();
            let (a, b) = (bass_cdf(&params, t), bass_cdf(&params, t + dt));
            prop_assert!((0.0..=1.0).contains(&a));
            prop_assert!(a <= b);
            prop_assert!(bass_density(&params, t) >= 0.0);
        }

        #[test]
        fn arrivals_partition_invariant(
            p in 1e-3f64..1.0, q in 0.0f64..1.0, m in 1.0f64..1e4,
            cuts in proptest::collection::vec(0.0f64..50.0, 0..40),
        ) {
            let params = BassParams::new(p, q, m).unwrap();
            let mut cuts = cuts;
            cuts.push(50.0);
            cuts.sort_by(f64::total_cmp);
            let mut st = ArrivalState::new(params);
            let mut total = 0;
            for c in cuts {
                let (n, next) = arrivals_between(&st, c);
                total += n;
                st = next;
            }
            prop_assert_eq!(total, (m * bass_cdf(&params, 50.0)).floor() as u64);
            prop_assert!(st.carry() >= 0.0 && st.carry() < 1.0);
        }
    }
}
