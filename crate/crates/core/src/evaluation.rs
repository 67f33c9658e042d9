//! Risk metrics, trade grading and the trader Turing test.
//!
//! All ratios are per tick; nothing is annualized.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::divergence::{bc_normal_1d, Distance, Divergence, DivergenceError};
use crate::numerics::{fit_gaussian_summary, Matrix, NumericsError};

pub const MIN_VAR_RETURNS: usize = 20;
pub const MIN_TURING_RETURNS: usize = 30;
pub const VAR_LEVEL: f64 = 0.95;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvaluationError {
    #[error("returns have zero variance")]
    ZeroVariance,
    #[error("need at least {needed} returns, got {got}")]
    TooFewReturns { needed: usize, got: usize },
    #[error("level must lie in (0, 1), got {0}")]
    InvalidLevel(f64),
    #[error("equity must be positive and finite at point {0}")]
    InvalidEquity(usize),
    #[error("no answers to score")]
    NoAnswers,
    #[error(transparent)]
    Divergence(#[from] DivergenceError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Long,
    Short,
    Flat,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TradeRecord {
    pub open_t: u64,
    pub close_t: u64,
    pub direction: Direction,
    /// Loss the agent declared it could take, fixed when the trade opened.
    pub declared_loss_bound: f64,
    pub realized_pnl: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TradeGrade {
    Good,
    Bad,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TradeAssessment {
    pub grade: TradeGrade,
    /// `loss / declared bound`; 0 for profitable trades, `+∞` for any loss
    /// against a zero bound.
    pub deviation_ratio: f64,
}

/// A trade is good when it made money or lost no more than it declared.
pub fn classify_trade(t: &TradeRecord) -> TradeAssessment {
    let loss = (-t.realized_pnl).max(0.0);
    let bound = t.declared_loss_bound.max(0.0);
    let deviation_ratio = if loss == 0.0 {
        0.0
    } else if bound == 0.0 {
        f64::INFINITY
    } else {
        loss / bound
    };
    let grade = if t.realized_pnl >= 0.0 || loss <= bound {
        TradeGrade::Good
    } else {
        TradeGrade::Bad
    };
    TradeAssessment {
        grade,
        deviation_ratio,
    }
}

/// Equity curve with its simple returns and the trades that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackRecord {
    equity: Vec<f64>,
    returns: Vec<f64>,
    trades: Vec<TradeRecord>,
}

impl TrackRecord {
    pub fn from_equity(
        equity: Vec<f64>,
        trades: Vec<TradeRecord>,
    ) -> Result<Self, EvaluationError> {
        if equity.is_empty() {
            return Err(EvaluationError::InvalidEquity(0));
        }
        if let Some(i) = equity.iter().position(|e| !(*e > 0.0) || !e.is_finite()) {
            return Err(EvaluationError::InvalidEquity(i));
        }
        let returns = equity.windows(2).map(|w| w[1] / w[0] - 1.0).collect();
        Ok(Self {
            equity,
            returns,
            trades,
        })
    }

    /// Builds equity by compounding simple `returns` from `start`.
    pub fn from_returns(start: f64, returns: &[f64]) -> Result<Self, EvaluationError> {
        let mut equity = Vec::with_capacity(returns.len() + 1);
        equity.push(start);
        for r in returns {
            equity.push(equity[equity.len() - 1] * (1.0 + r));
        }
        Self::from_equity(equity, Vec::new())
    }

    /// Uses `returns` verbatim after checking them against `equity`.
    pub fn with_returns(
        equity: Vec<f64>,
        returns: Vec<f64>,
        trades: Vec<TradeRecord>,
    ) -> Result<Self, EvaluationError> {
        let mut rec = Self::from_equity(equity, trades)?;
        if returns.len() != rec.returns.len() {
            return Err(EvaluationError::TooFewReturns {
                needed: rec.returns.len(),
                got: returns.len(),
            });
        }
        if let Some(i) = returns
            .iter()
            .zip(&rec.returns)
            .position(|(a, b)| (a - b).abs() > 1e-10)
        {
            return Err(EvaluationError::InvalidEquity(i + 1));
        }
        rec.returns = returns;
        Ok(rec)
    }

    pub fn equity(&self) -> &[f64] {
        &self.equity
    }

    pub fn returns(&self) -> &[f64] {
        &self.returns
    }

    pub fn trades(&self) -> &[TradeRecord] {
        &self.trades
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Per-tick Sharpe ratio of returns in excess of `risk_free_per_tick`.
pub fn sharpe(returns: &[f64], risk_free_per_tick: f64) -> Result<f64, EvaluationError> {
    if returns.len() < 2 {
        return Err(EvaluationError::TooFewReturns {
            needed: 2,
            got: returns.len(),
        });
    }
    let excess: Vec<f64> = returns.iter().map(|r| r - risk_free_per_tick).collect();
    let m = mean(&excess);
    let var = excess.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (excess.len() - 1) as f64;
    // spread below a few ulps of the mean is roundoff, not variance
    if var.sqrt() <= 8.0 * f64::EPSILON * m.abs() || var == 0.0 {
        return Err(EvaluationError::ZeroVariance);
    }
    Ok(m / var.sqrt())
}

/// Largest peak-to-trough loss as a fraction of the peak.
pub fn max_drawdown(equity: &[f64]) -> f64 {
    let mut peak = f64::MIN;
    let mut worst = 0.0f64;
    for &e in equity {
        peak = peak.max(e);
        worst = worst.max((peak - e) / peak);
    }
    worst
}

/// Empirical quantile at probability `p` by linear interpolation between
/// order statistics at position `(n − 1)·p`.
pub fn empirical_quantile(xs: &[f64], p: f64) -> f64 {
    let mut scratch = xs.to_vec();
    let h = (scratch.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    let (_, &mut below, upper) = scratch.select_nth_unstable_by(lo, f64::total_cmp);
    let above = upper
        .iter()
        .copied()
        .min_by(f64::total_cmp)
        .unwrap_or(below);
    if frac == 0.0 {
        below
    } else {
        below + (above - below) * frac
    }
}

/// Historical value at risk: the loss at the `1 − level` return quantile,
/// floored at zero.
pub fn value_at_risk(returns: &[f64], level: f64) -> Result<f64, EvaluationError> {
    if returns.len() < MIN_VAR_RETURNS {
        return Err(EvaluationError::TooFewReturns {
            needed: MIN_VAR_RETURNS,
            got: returns.len(),
        });
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(EvaluationError::InvalidLevel(level));
    }
    Ok((-empirical_quantile(returns, 1.0 - level)).max(0.0))
}

/// Sharpe is `None` for a zero-variance series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskMetrics {
    pub sharpe: Option<f64>,
    pub max_drawdown: f64,
    pub var_95: f64,
}

pub fn risk_metrics(record: &TrackRecord) -> Result<RiskMetrics, EvaluationError> {
    let sharpe = match sharpe(record.returns(), 0.0) {
        Ok(s) => Some(s),
        Err(EvaluationError::ZeroVariance) => None,
        Err(e) => return Err(e),
    };
    Ok(RiskMetrics {
        sharpe,
        max_drawdown: max_drawdown(record.equity()),
        var_95: value_at_risk(record.returns(), VAR_LEVEL)?,
    })
}

/// `sharpe − max_drawdown − VaR₉₅`; `−∞` when any term is undefined.
pub fn composite_score(record: &TrackRecord) -> f64 {
    match risk_metrics(record) {
        Ok(RiskMetrics {
            sharpe: Some(s),
            max_drawdown,
            var_95,
        }) => s - max_drawdown - var_95,
        _ => f64::NEG_INFINITY,
    }
}

/// Indices of `records` best first: higher score, then lower VaR, then input order.
pub fn rank_records(records: &[TrackRecord]) -> Vec<usize> {
    let keyed: Vec<(f64, f64)> = records
        .iter()
        .map(|r| {
            let var = value_at_risk(r.returns(), VAR_LEVEL).unwrap_or(f64::INFINITY);
            (composite_score(r), var)
        })
        .collect();
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.sort_by(|&a, &b| {
        keyed[b]
            .0
            .total_cmp(&keyed[a].0)
            .then_with(|| keyed[a].1.total_cmp(&keyed[b].1))
            .then(a.cmp(&b))
    });
    order
}

/// How far apart two records' metrics may be before the test can tell them apart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricBands {
    pub sharpe: f64,
    pub max_drawdown: f64,
    pub var_95: f64,
}

impl Default for MetricBands {
    fn default() -> Self {
        Self {
            sharpe: 0.5,
            max_drawdown: 0.1,
            var_95: 0.02,
        }
    }
}

pub const DEFAULT_TURING_THRESHOLD: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TuringVerdict {
    Indistinguishable,
    Distinguishable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuringReport {
    pub metrics_a: RiskMetrics,
    pub metrics_b: RiskMetrics,
    pub rho: f64,
    pub distance: Distance,
    pub verdict: TuringVerdict,
    pub threshold: f64,
    pub bands: MetricBands,
}

impl TuringReport {
    pub fn pnl_distance(&self) -> Divergence {
        match self.distance {
            Distance::Infinite => Divergence::from_coefficient(0.0),
            Distance::Finite(d) => Divergence::from_distance(d),
        }
    }
}

fn within(a: Option<f64>, b: Option<f64>, band: f64) -> bool {
    match (a, b) {
        (Some(x), Some(y)) => (x - y).abs() <= band,
        (None, None) => true,
        _ => false,
    }
}

/// Compares two return distributions by Bhattacharyya distance between their
/// fitted normals, and their risk metrics against `bands`.
pub fn turing_test(
    a: &TrackRecord,
    b: &TrackRecord,
    threshold: f64,
    bands: &MetricBands,
) -> Result<TuringReport, EvaluationError> {
    for r in [a, b] {
        if r.returns().len() < MIN_TURING_RETURNS {
            return Err(EvaluationError::TooFewReturns {
                needed: MIN_TURING_RETURNS,
                got: r.returns().len(),
            });
        }
    }
    let fit = |r: &TrackRecord| -> Result<(f64, f64), EvaluationError> {
        let s = fit_gaussian_summary(&Matrix::from_row_major(
            r.returns().len(),
            1,
            r.returns().to_vec(),
        )?)?;
        Ok((s.mean()[0], s.variance()))
    };
    let pnl = bc_normal_1d(fit(a)?, fit(b)?)?;
    let (metrics_a, metrics_b) = (risk_metrics(a)?, risk_metrics(b)?);
    let close = pnl.d() <= threshold
        && within(metrics_a.sharpe, metrics_b.sharpe, bands.sharpe)
        && within(
            Some(metrics_a.max_drawdown),
            Some(metrics_b.max_drawdown),
            bands.max_drawdown,
        )
        && within(Some(metrics_a.var_95), Some(metrics_b.var_95), bands.var_95);
    Ok(TuringReport {
        metrics_a,
        metrics_b,
        rho: pnl.coefficient(),
        distance: pnl.distance(),
        verdict: if close {
            TuringVerdict::Indistinguishable
        } else {
            TuringVerdict::Distinguishable
        },
        threshold,
        bands: *bands,
    })
}

/// Closed interval `[lo, hi]` on the next-tick return.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

/// Fraction of realized returns falling inside their interval.
pub fn calibration(answers: &[(Interval, f64)]) -> Result<f64, EvaluationError> {
    if answers.is_empty() {
        return Err(EvaluationError::NoAnswers);
    }
    let hits = answers.iter().filter(|(iv, r)| iv.contains(*r)).count();
    Ok(hits as f64 / answers.len() as f64)
}
