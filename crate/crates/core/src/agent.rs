//! The curious and confident trader.
//!
//! Information items arrive on a Bass diffusion clock. Each item snapshots a
//! window of recent log returns and keeps a Gaussian summary of it. Items are
//! linked when their Bhattacharyya distance falls inside the curiosity band:
//! related, but not redundant. To answer, the agent compares the latest window
//! with every stored item, pools the forecasts of the in-band, linked items
//! (weighted by Bhattacharyya coefficient), and returns Buy, Sell, Hold, or
//! DontKnow when there is too little evidence. Taught lessons are stored as
//! items of their own.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::bass::{arrivals_between, ArrivalState, BassParams};
use crate::divergence::{bc_normal_mv, DivergenceError};
use crate::evaluation::{
    composite_score, rank_records, Direction, EvaluationError, Interval, TrackRecord, TradeRecord,
};
use crate::jl::{pair_map, JlError};
use crate::market::{to_return_series, MarketError, PriceSeries};
use crate::numerics::{fit_gaussian_summary, GaussianSummary, Matrix, NumericsError};

pub const DEFAULT_WINDOW: usize = 32;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("invalid agent parameter {field}: {message}")]
    InvalidParams {
        field: &'static str,
        message: String,
    },
    #[error("linking needs at least 2 stored elements, have {0}")]
    TooFewElements(usize),
    #[error("window needs at least 2 returns, got {0}")]
    WindowTooShort(usize),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Divergence(#[from] DivergenceError),
    #[error(transparent)]
    Jl(#[from] JlError),
    #[error(transparent)]
    Market(#[from] MarketError),
    #[error(transparent)]
    Evaluation(#[from] EvaluationError),
}

/// Distance interval `[lo, hi]` inside which two items are linked.
/// `hi` may be `+∞` (written as `null` in JSON).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Band {
    pub lo: f64,
    #[serde(serialize_with = "ser_unbounded", deserialize_with = "de_unbounded")]
    pub hi: f64,
}

fn ser_unbounded<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    if x.is_infinite() {
        s.serialize_none()
    } else {
        s.serialize_f64(*x)
    }
}

fn de_unbounded<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
}

impl Band {
    pub fn contains(&self, d: f64) -> bool {
        d.is_finite() && self.lo <= d && d <= self.hi
    }
}

impl Default for Band {
    fn default() -> Self {
        Self { lo: 0.05, hi: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentParams {
    pub bass: BassParams,
    #[serde(default)]
    pub band: Band,
    #[serde(default = "defaults::epsilon")]
    pub epsilon: f64,
    #[serde(default = "defaults::z")]
    pub buy_z: f64,
    #[serde(default = "defaults::z")]
    pub sell_z: f64,
    #[serde(default = "defaults::confidence")]
    pub confidence: f64,
    #[serde(default = "defaults::min_connected")]
    pub min_connected: usize,
    #[serde(default = "defaults::window")]
    pub window: usize,
    #[serde(default)]
    pub seed: u64,
}

mod defaults {
    pub fn epsilon() -> f64 {
        0.5
    }
    pub fn z() -> f64 {
        1.0
    }
    pub fn confidence() -> f64 {
        0.95
    }
    pub fn min_connected() -> usize {
        3
    }
    pub fn window() -> usize {
        super::DEFAULT_WINDOW
    }
}

impl Default for AgentParams {
    fn default() -> Self {
        Self {
            bass: BassParams::new(0.005, 0.05, 100.0).expect("valid default"),
            band: Band::default(),
            epsilon: defaults::epsilon(),
            buy_z: defaults::z(),
            sell_z: defaults::z(),
            confidence: defaults::confidence(),
            min_connected: defaults::min_connected(),
            window: defaults::window(),
            seed: 0,
        }
    }
}

impl AgentParams {
    pub fn validate(&self) -> Result<(), AgentError> {
        let bad = |field, message: &str| {
            Err(AgentError::InvalidParams {
                field,
                message: message.to_owned(),
            })
        };
        if !(self.band.lo >= 0.0) || !(self.band.lo < self.band.hi) {
            return bad("band", "need 0 <= lo < hi");
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return bad("epsilon", "must lie in (0, 1)");
        }
        if !(self.buy_z > 0.0) || !self.buy_z.is_finite() {
            return bad("buy_z", "must be positive");
        }
        if !(self.sell_z > 0.0) || !self.sell_z.is_finite() {
            return bad("sell_z", "must be positive");
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return bad("confidence", "must lie in (0, 1)");
        }
        if self.window < 2 {
            return bad("window", "must be at least 2");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    Buy,
    Sell,
    Hold,
    DontKnow,
}

impl Verdict {
    pub fn direction(self) -> Direction {
        match self {
            Verdict::Buy => Direction::Long,
            Verdict::Sell => Direction::Short,
            Verdict::Hold | Verdict::DontKnow => Direction::Flat,
        }
    }
}

/// What a teacher supplies for a window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Lesson {
    /// The right call for the window.
    Verdict(Verdict),
    /// The return that followed the window.
    Return(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Origin {
    Arrival,
    Taught(Lesson),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfoElement {
    pub id: u64,
    pub arrival_t: f64,
    pub features: Vec<f64>,
    pub summary: GaussianSummary,
    pub origin: Origin,
}

impl InfoElement {
    fn is_taught(&self) -> bool {
        matches!(self.origin, Origin::Taught(_))
    }

    /// Mean and variance of the next-tick return this element argues for.
    fn forecast(&self) -> (f64, f64) {
        let (mean, var) = (self.summary.mean()[0], self.summary.variance());
        match self.origin {
            Origin::Taught(Lesson::Return(r)) => (r, var),
            _ => (mean, var),
        }
    }
}

fn summarize(window: &[f64]) -> Result<GaussianSummary, AgentError> {
    if window.len() < 2 {
        return Err(AgentError::WindowTooShort(window.len()));
    }
    Ok(fit_gaussian_summary(&Matrix::from_row_major(
        window.len(),
        1,
        window.to_vec(),
    )?)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub a: u64,
    pub b: u64,
    pub distance: f64,
    /// Bhattacharyya coefficient of the pair.
    pub strength: f64,
    /// Squared distance between the two feature windows after projection.
    pub aligned_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnectionGraph {
    pub nodes: Vec<u64>,
    pub edges: Vec<Edge>,
    /// Dimension the feature windows were projected to.
    pub projected_dim: usize,
}

impl ConnectionGraph {
    pub fn empty() -> Self {
        Self {
            nodes: Vec::new(),
            edges: Vec::new(),
            projected_dim: 0,
        }
    }

    /// Ids with at least one edge.
    pub fn connected(&self) -> BTreeSet<u64> {
        self.edges.iter().flat_map(|e| [e.a, e.b]).collect()
    }

    pub fn has_edge(&self, a: u64, b: u64) -> bool {
        self.edges
            .iter()
            .any(|e| (e.a, e.b) == (a, b) || (e.a, e.b) == (b, a))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Answer {
    pub verdict: Verdict,
    /// Interval on the next-tick log return; `None` for DontKnow.
    pub confidence_interval: Option<Interval>,
    /// Ids of the stored elements the answer rests on.
    pub basis: Vec<u64>,
    /// Evidence units counted against `min_connected`.
    pub evidence: usize,
    /// Set on DontKnow: the agent asks to be taught this window.
    pub learning_request: bool,
}

impl Answer {
    fn dont_know(evidence: usize) -> Self {
        Self {
            verdict: Verdict::DontKnow,
            confidence_interval: None,
            basis: Vec::new(),
            evidence,
            learning_request: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Agent {
    params: AgentParams,
    arrivals: ArrivalState,
    pending: u64,
    store: Vec<InfoElement>,
    next_id: u64,
    last_t: f64,
    quantile: f64,
}

impl Agent {
    pub fn new(params: AgentParams) -> Result<Self, AgentError> {
        params.validate()?;
        let quantile = Normal::new(0.0, 1.0)
            .expect("standard normal")
            .inverse_cdf(0.5 + 0.5 * params.confidence);
        Ok(Self {
            params,
            arrivals: ArrivalState::new(params.bass),
            pending: 0,
            store: Vec::new(),
            next_id: 0,
            last_t: 0.0,
            quantile,
        })
    }

    pub fn params(&self) -> &AgentParams {
        &self.params
    }

    pub fn store(&self) -> &[InfoElement] {
        &self.store
    }

    /// Arrivals scheduled but not yet materialized for lack of data.
    pub fn pending(&self) -> u64 {
        self.pending
    }

    /// Advances the arrival clock to `t` and turns arrivals into elements.
    ///
    /// `observation` is the return history seen so far. The `j`-th element
    /// created in one call snapshots the `window` returns ending `j` ticks
    /// before the latest one (wrapping if the history is short). Arrivals
    /// wait while the history is shorter than `window`. Returns the new
    /// elements; a `t` before the last tick is ignored.
    pub fn tick(&mut self, t: f64, observation: &[f64]) -> Result<&[InfoElement], AgentError> {
        let before = self.store.len();
        if t < self.last_t {
            return Ok(&self.store[before..]);
        }
        let (count, next) = arrivals_between(&self.arrivals, t);
        self.arrivals = next;
        self.last_t = t;
        self.pending += count;
        let w = self.params.window;
        if self.pending > 0 && observation.len() >= w {
            let positions = observation.len() - w + 1;
            for j in 0..self.pending as usize {
                let offset = j % positions;
                let end = observation.len() - offset;
                let features = observation[end - w..end].to_vec();
                let summary = summarize(&features)?;
                self.store.push(InfoElement {
                    id: self.next_id,
                    arrival_t: t,
                    features,
                    summary,
                    origin: Origin::Arrival,
                });
                self.next_id += 1;
            }
            self.pending = 0;
        }
        Ok(&self.store[before..])
    }

    /// Pairwise comparison of every stored element.
    ///
    /// Feature windows are zero-padded to a common width and projected through
    /// one shared Gaussian map (`k` from the two-point bound at `epsilon`);
    /// the projected gap is recorded on each edge. Edges exist exactly when the
    /// Bhattacharyya distance between the two summaries lies in the band.
    pub fn link(&self) -> Result<ConnectionGraph, AgentError> {
        if self.store.len() < 2 {
            return Err(AgentError::TooFewElements(self.store.len()));
        }
        let width = self
            .store
            .iter()
            .map(|e| e.features.len())
            .max()
            .unwrap_or(1);
        let map = pair_map(width, self.params.epsilon, self.params.seed)?;
        let images = self
            .store
            .iter()
            .map(|e| map.project_padded(&e.features))
            .collect::<Result<Vec<_>, _>>()?;
        let mut edges = Vec::new();
        for i in 0..self.store.len() {
            for j in i + 1..self.store.len() {
                let div = bc_normal_mv(&self.store[i].summary, &self.store[j].summary)?;
                if self.params.band.contains(div.d()) {
                    let aligned_gap = images[i]
                        .iter()
                        .zip(&images[j])
                        .map(|(x, y)| (x - y) * (x - y))
                        .sum();
                    edges.push(Edge {
                        a: self.store[i].id,
                        b: self.store[j].id,
                        distance: div.d(),
                        strength: div.coefficient(),
                        aligned_gap,
                    });
                }
            }
        }
        Ok(ConnectionGraph {
            nodes: self.store.iter().map(|e| e.id).collect(),
            edges,
            projected_dim: map.k(),
        })
    }

    /// Answers for the situation described by `window`.
    ///
    /// Evidence: each arrived element that has an edge in `graph` and lies
    /// within `band.hi` of the window counts once (the lower edge of the band
    /// decides linking between elements, not relevance to the window); a taught element within `band.hi`
    /// counts once, and as a full `min_connected` when within `band.lo` (a
    /// lesson for this very situation). Below `min_connected` the answer is
    /// DontKnow. Otherwise the pooled forecast is the coefficient-weighted
    /// mixture of the contributing forecasts, `n_eff` is the weight sum,
    /// `z = μ̂ √n_eff / σ̂` picks the verdict, and the interval is
    /// `μ̂ ± z*(confidence)·σ̂·√(1 + 1/n_eff)`. A matching verdict lesson
    /// overrides the verdict.
    pub fn decide(&self, graph: &ConnectionGraph, window: &[f64]) -> Result<Answer, AgentError> {
        if window.len() < 2 {
            return Ok(Answer::dont_know(0));
        }
        let probe = summarize(window)?;
        let connected = graph.connected();
        let band = self.params.band;
        let mut evidence = 0usize;
        let mut weighted: Vec<(u64, f64, (f64, f64))> = Vec::new();
        let mut lesson: Option<(f64, u64, Verdict)> = None;
        for e in &self.store {
            let div = bc_normal_mv(&probe, &e.summary)?;
            let d = div.d();
            let units = if e.is_taught() {
                if d <= band.lo {
                    if let Origin::Taught(Lesson::Verdict(v)) = e.origin {
                        // nearest lesson wins; later lessons win ties
                        if lesson.is_none_or(|(best, _, _)| d <= best) {
                            lesson = Some((d, e.id, v));
                        }
                    }
                    self.params.min_connected.max(1)
                } else if d <= band.hi {
                    1
                } else {
                    0
                }
            } else if connected.contains(&e.id) && d <= band.hi {
                1
            } else {
                0
            };
            if units > 0 {
                evidence = evidence.saturating_add(units);
                weighted.push((e.id, div.coefficient(), e.forecast()));
            }
        }
        if evidence < self.params.min_connected {
            return Ok(Answer::dont_know(evidence));
        }
        let n_eff: f64 = weighted.iter().map(|(_, w, _)| w).sum();
        if !(n_eff > 0.0) {
            return Ok(Answer::dont_know(evidence));
        }
        let mu = weighted.iter().map(|(_, w, (m, _))| w * m).sum::<f64>() / n_eff;
        let var = weighted
            .iter()
            .map(|(_, w, (m, v))| w * (v + (m - mu) * (m - mu)))
            .sum::<f64>()
            / n_eff;
        let sd = var.sqrt();
        let z = mu * n_eff.sqrt() / sd;
        let verdict = match lesson {
            Some((_, _, v)) if v != Verdict::DontKnow => v,
            _ if z > self.params.buy_z => Verdict::Buy,
            _ if z < -self.params.sell_z => Verdict::Sell,
            _ => Verdict::Hold,
        };
        let half = self.quantile * sd * (1.0 + 1.0 / n_eff).sqrt();
        Ok(Answer {
            verdict,
            confidence_interval: Some(Interval {
                lo: mu - half,
                hi: mu + half,
            }),
            basis: weighted.iter().map(|(id, _, _)| *id).collect(),
            evidence,
            learning_request: false,
        })
    }

    /// Stores a lesson for `window` as a taught element, outside the Bass clock.
    pub fn teach(&mut self, window: &[f64], lesson: Lesson) -> Result<u64, AgentError> {
        let summary = summarize(window)?;
        let id = self.next_id;
        self.store.push(InfoElement {
            id,
            arrival_t: self.last_t,
            features: window.to_vec(),
            summary,
            origin: Origin::Taught(lesson),
        });
        self.next_id += 1;
        Ok(id)
    }
}

/// One tick of a simulation: the answer given and the return that followed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickAnswer {
    pub tick: u64,
    pub answer: Answer,
    pub realized: f64,
}

#[derive(Debug, Clone)]
pub struct AgentRun {
    pub record: TrackRecord,
    pub answers: Vec<TickAnswer>,
    pub store_size: usize,
    pub projected_dim: usize,
}

impl AgentRun {
    /// `(interval, realized)` for every answered (non-DontKnow) tick.
    pub fn intervals(&self) -> Vec<(Interval, f64)> {
        self.answers
            .iter()
            .filter_map(|a| a.answer.confidence_interval.map(|iv| (iv, a.realized)))
            .collect()
    }
}

/// Runs one agent over a log-return history.
///
/// At tick `t` the agent has seen `returns[..t]`, answers on the latest
/// window, and holds the implied position through `returns[t]`. Long and
/// short positions compound `exp(±r)`, so equity stays positive. Each
/// non-flat tick is one trade whose declared loss bound is the loss at the
/// adverse end of the interval.
pub fn run_on_returns(
    params: &AgentParams,
    returns: &[f64],
    start_equity: f64,
) -> Result<AgentRun, AgentError> {
    let mut agent = Agent::new(*params)?;
    let mut graph = ConnectionGraph::empty();
    let mut equity = Vec::with_capacity(returns.len() + 1);
    equity.push(start_equity);
    let mut answers = Vec::with_capacity(returns.len());
    let mut trades = Vec::new();
    for (t, &realized) in returns.iter().enumerate() {
        let seen = &returns[..t];
        let grew = !agent.tick(t as f64, seen)?.is_empty();
        if grew && agent.store().len() >= 2 {
            graph = agent.link()?;
        }
        let window = &seen[seen.len().saturating_sub(params.window)..];
        let answer = agent.decide(&graph, window)?;
        let before = equity[equity.len() - 1];
        let direction = answer.verdict.direction();
        let sign = match direction {
            Direction::Long => 1.0,
            Direction::Short => -1.0,
            Direction::Flat => 0.0,
        };
        let after = before * (sign * realized).exp();
        if direction != Direction::Flat {
            let adverse = match (direction, answer.confidence_interval) {
                (Direction::Long, Some(iv)) => (-iv.lo).max(0.0),
                (Direction::Short, Some(iv)) => iv.hi.max(0.0),
                _ => 0.0,
            };
            trades.push(TradeRecord {
                open_t: t as u64,
                close_t: t as u64 + 1,
                direction,
                declared_loss_bound: before * -(-adverse).exp_m1(),
                realized_pnl: after - before,
            });
        }
        equity.push(after);
        answers.push(TickAnswer {
            tick: t as u64,
            answer,
            realized,
        });
    }
    Ok(AgentRun {
        record: TrackRecord::from_equity(equity, trades)?,
        answers,
        store_size: agent.store().len(),
        projected_dim: graph.projected_dim,
    })
}

pub fn run_agent(params: &AgentParams, series: &PriceSeries) -> Result<AgentRun, AgentError> {
    let start = series.ticks().first().map_or(1.0, |t| t.price);
    run_on_returns(params, &to_return_series(series)?, start)
}

#[derive(Debug, Clone)]
pub struct SweepEntry {
    /// Position in the input list.
    pub index: usize,
    pub rank: usize,
    pub params: AgentParams,
    pub score: f64,
    pub run: AgentRun,
}

/// Runs every parameter set over `series` (in parallel) and ranks the track
/// records by composite score, ties broken by lower VaR then input order.
pub fn sweep(
    params_list: &[AgentParams],
    series: &PriceSeries,
) -> Result<Vec<SweepEntry>, AgentError> {
    let runs = params_list
        .par_iter()
        .map(|p| run_agent(p, series))
        .collect::<Result<Vec<_>, _>>()?;
    let records: Vec<TrackRecord> = runs.iter().map(|r| r.record.clone()).collect();
    let order = rank_records(&records);
    let mut runs: Vec<Option<AgentRun>> = runs.into_iter().map(Some).collect();
    Ok(order
        .into_iter()
        .enumerate()
        .map(|(rank, index)| {
            let run = runs[index].take().expect("each index ranked once");
            SweepEntry {
                index,
                rank: rank + 1,
                params: params_list[index],
                score: composite_score(&run.record),
                run,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bass::bass_cdf;
    use crate::divergence::bc_normal_1d;
    use crate::market::{generate_gbm, GbmParams};
    use crate::numerics::{gaussian_sample, RngState};

    fn noise(n: usize, sd: f64, seed: u64) -> Vec<f64> {
        gaussian_sample(&mut RngState::new(seed), n)
            .into_iter()
            .map(|z| sd * z)
            .collect()
    }

    fn fed_agent(params: AgentParams, returns: &[f64], upto: usize) -> Agent {
        let mut agent = Agent::new(params).unwrap();
        for t in 0..upto {
            agent.tick(t as f64, &returns[..t]).unwrap();
        }
        agent
    }

    #[test]
    fn same_time_adds_nothing() {
        let r = noise(200, 0.01, 1);
        let mut agent = fed_agent(AgentParams::default(), &r, 120);
        let n = agent.store().len();
        assert!(agent.tick(119.0, &r[..119]).unwrap().is_empty());
        assert_eq!(agent.store().len(), n);
        assert!(agent.tick(50.0, &r[..119]).unwrap().is_empty());
    }

    #[test]
    fn store_saturates_at_market_potential() {
        let params = AgentParams {
            bass: BassParams::new(0.05, 0.4, 40.0).unwrap(),
            ..Default::default()
        };
        let r = noise(400, 0.01, 2);
        let agent = fed_agent(params, &r, 400);
        assert_eq!(agent.store().len(), 40);
        assert_eq!(agent.pending(), 0);
        assert!(agent.store().windows(2).all(|w| w[0].id < w[1].id));
    }

    #[test]
    fn arrivals_wait_for_a_full_window() {
        let params = AgentParams {
            bass: BassParams::new(0.2, 0.0, 50.0).unwrap(),
            window: 16,
            ..Default::default()
        };
        let r = noise(100, 0.01, 3);
        let mut agent = Agent::new(params).unwrap();
        for t in 0..16 {
            agent.tick(t as f64, &r[..t]).unwrap();
        }
        assert!(agent.store().is_empty());
        let due = (50.0 * bass_cdf(&params.bass, 15.0)).floor() as u64;
        assert_eq!(agent.pending(), due);
        let new = agent.tick(16.0, &r[..16]).unwrap().len() as u64;
        assert_eq!(new, (50.0 * bass_cdf(&params.bass, 16.0)).floor() as u64);
        assert!(agent.store().iter().all(|e| e.features.len() == 16));
    }

    #[test]
    fn same_seed_same_store() {
        let r = noise(300, 0.01, 4);
        let a = fed_agent(AgentParams::default(), &r, 300);
        let b = fed_agent(AgentParams::default(), &r, 300);
        assert_eq!(a.store(), b.store());
    }

    #[test]
    fn link_requires_two_elements() {
        let agent = Agent::new(AgentParams::default()).unwrap();
        assert!(matches!(agent.link(), Err(AgentError::TooFewElements(0))));
    }

    #[test]
    fn identical_elements_are_not_linked() {
        let mut agent = Agent::new(AgentParams::default()).unwrap();
        let w = noise(32, 0.01, 5);
        agent.teach(&w, Lesson::Return(0.0)).unwrap();
        agent.teach(&w, Lesson::Return(0.0)).unwrap();
        let g = agent.link().unwrap();
        assert!(g.edges.is_empty());
        assert_eq!(g.projected_dim, 34);
    }

    #[test]
    fn unbounded_band_gives_complete_graph() {
        let params = AgentParams {
            band: Band {
                lo: 0.0,
                hi: f64::INFINITY,
            },
            ..Default::default()
        };
        let r = noise(300, 0.01, 6);
        let agent = fed_agent(params, &r, 300);
        let n = agent.store().len();
        assert_eq!(agent.link().unwrap().edges.len(), n * (n - 1) / 2);
    }

    #[test]
    fn hand_built_store_matches_brute_force() {
        let mut agent = Agent::new(AgentParams {
            band: Band { lo: 0.05, hi: 1.0 },
            ..Default::default()
        })
        .unwrap();
        // windows with known means and spreads
        let make = |mean: f64, spread: f64| -> Vec<f64> {
            (0..8)
                .map(|i| mean + spread * if i % 2 == 0 { 1.0 } else { -1.0 })
                .collect()
        };
        let ws = [make(0.0, 1.0), make(0.0, 1.6), make(4.0, 1.0)];
        for w in &ws {
            agent.teach(w, Lesson::Return(0.0)).unwrap();
        }
        let g = agent.link().unwrap();
        // brute force with the univariate closed form on the same fits
        let fit = |w: &[f64]| {
            let m = w.iter().sum::<f64>() / w.len() as f64;
            let v = w.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (w.len() - 1) as f64;
            (m, v + 1e-8)
        };
        let mut expected = Vec::new();
        for i in 0..3 {
            for j in i + 1..3 {
                let d = bc_normal_1d(fit(&ws[i]), fit(&ws[j])).unwrap().d();
                if (0.05..=1.0).contains(&d) {
                    expected.push((i as u64, j as u64));
                }
            }
        }
        let got: Vec<(u64, u64)> = g.edges.iter().map(|e| (e.a, e.b)).collect();
        assert_eq!(got, expected);
        assert_eq!(got, vec![(0, 1)]);
    }

    #[test]
    fn empty_graph_means_dont_know() {
        let agent = Agent::new(AgentParams::default()).unwrap();
        let ans = agent
            .decide(&ConnectionGraph::empty(), &noise(32, 0.01, 7))
            .unwrap();
        assert_eq!(ans.verdict, Verdict::DontKnow);
        assert!(ans.learning_request);
        assert!(ans.basis.is_empty());
        assert!(ans.confidence_interval.is_none());
    }

    #[test]
    fn symmetric_evidence_holds() {
        let mut agent = Agent::new(AgentParams {
            min_connected: 2,
            ..Default::default()
        })
        .unwrap();
        let base: Vec<f64> = (0..32)
            .map(|i| if i % 2 == 0 { 0.01 } else { -0.01 })
            .collect();
        let up: Vec<f64> = base.iter().map(|x| x + 0.004).collect();
        let down: Vec<f64> = base.iter().map(|x| x - 0.004).collect();
        agent.teach(&up, Lesson::Return(0.004)).unwrap();
        agent.teach(&down, Lesson::Return(-0.004)).unwrap();
        let ans = agent.decide(&ConnectionGraph::empty(), &base).unwrap();
        // both lessons sit within band.lo of the probe
        assert_eq!(ans.evidence, 4);
        assert_eq!(ans.verdict, Verdict::Hold);
        let iv = ans.confidence_interval.unwrap();
        assert!((iv.lo + iv.hi).abs() < 1e-15);
    }

    #[test]
    fn strong_positive_evidence_buys() {
        let params = AgentParams {
            band: Band { lo: 0.01, hi: 50.0 },
            ..Default::default()
        };
        let mut agent = Agent::new(params).unwrap();
        let tight = |m: f64| -> Vec<f64> {
            (0..32)
                .map(|i| m + 1e-4 * if i % 2 == 0 { 1.0 } else { -1.0 })
                .collect()
        };
        for m in [0.010, 0.011, 0.012, 0.013] {
            agent.teach(&tight(m), Lesson::Return(m)).unwrap();
        }
        let probe = tight(0.0115);
        let ans = agent.decide(&ConnectionGraph::empty(), &probe).unwrap();
        assert_eq!(ans.verdict, Verdict::Buy);

        // independent recomputation of the pooled statistics
        let fit = |w: &[f64]| {
            let m = w.iter().sum::<f64>() / w.len() as f64;
            let v = w.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (w.len() - 1) as f64;
            (m, v + 1e-8)
        };
        let p = fit(&probe);
        let mut stats = Vec::new();
        for m in [0.010, 0.011, 0.012, 0.013] {
            let e = fit(&tight(m));
            let d = bc_normal_1d(p, e).unwrap().d();
            assert!(d > 0.01 && d <= 50.0);
            stats.push(((-d).exp(), m, e.1));
        }
        let n: f64 = stats.iter().map(|s| s.0).sum();
        let mu = stats.iter().map(|s| s.0 * s.1).sum::<f64>() / n;
        let var = stats
            .iter()
            .map(|s| s.0 * (s.2 + (s.1 - mu).powi(2)))
            .sum::<f64>()
            / n;
        let half = 1.959_963_984_540_054 * var.sqrt() * (1.0 + 1.0 / n).sqrt();
        let iv = ans.confidence_interval.unwrap();
        assert!((iv.lo - (mu - half)).abs() < 1e-12);
        assert!((iv.hi - (mu + half)).abs() < 1e-12);
        assert!(mu * n.sqrt() / var.sqrt() > 1.0);
    }

    #[test]
    fn teaching_lifts_dont_know() {
        let mut agent = Agent::new(AgentParams::default()).unwrap();
        let w = noise(32, 0.01, 8);
        let g = ConnectionGraph::empty();
        assert_eq!(agent.decide(&g, &w).unwrap().verdict, Verdict::DontKnow);
        agent.teach(&w, Lesson::Return(0.002)).unwrap();
        let ans = agent.decide(&g, &w).unwrap();
        assert_ne!(ans.verdict, Verdict::DontKnow);
        assert!(!ans.learning_request);

        let w2 = noise(32, 0.02, 9);
        agent.teach(&w2, Lesson::Verdict(Verdict::Sell)).unwrap();
        assert_eq!(agent.decide(&g, &w2).unwrap().verdict, Verdict::Sell);
    }

    #[test]
    fn teaching_grows_store_by_one_each() {
        let r = noise(200, 0.01, 10);
        let mut agent = fed_agent(AgentParams::default(), &r, 200);
        let before = agent.store().len();
        for i in 0..5 {
            agent
                .teach(&r[i * 10..i * 10 + 32], Lesson::Return(r[i * 10 + 32]))
                .unwrap();
        }
        assert_eq!(agent.store().len(), before + 5);
        assert!(matches!(
            agent.teach(&[0.1], Lesson::Return(0.0)),
            Err(AgentError::WindowTooShort(1))
        ));
    }

    #[test]
    fn invalid_params_rejected() {
        let bad = AgentParams {
            band: Band { lo: 1.0, hi: 0.5 },
            ..Default::default()
        };
        assert!(matches!(
            Agent::new(bad),
            Err(AgentError::InvalidParams { field: "band", .. })
        ));
        let bad = AgentParams {
            epsilon: 1.0,
            ..Default::default()
        };
        assert!(matches!(
            Agent::new(bad),
            Err(AgentError::InvalidParams {
                field: "epsilon",
                ..
            })
        ));
        let bad = AgentParams {
            confidence: 1.0,
            ..Default::default()
        };
        assert!(matches!(
            Agent::new(bad),
            Err(AgentError::InvalidParams {
                field: "confidence",
                ..
            })
        ));
    }

    #[test]
    fn params_json_round_trip_with_unbounded_band() {
        let p = AgentParams {
            band: Band {
                lo: 0.0,
                hi: f64::INFINITY,
            },
            ..Default::default()
        };
        let json = serde_json::to_string(&p).unwrap();
        assert!(json.contains(r#""hi":null"#));
        assert_eq!(serde_json::from_str::<AgentParams>(&json).unwrap(), p);
        assert!(serde_json::from_str::<AgentParams>(
            r#"{"bass":{"p":0.1,"q":0.1,"m":5},"bogus":1}"#
        )
        .is_err());
    }

    #[test]
    fn sweep_single_and_duplicate() {
        let series = generate_gbm(
            &GbmParams {
                s0: 100.0,
                mu: 0.0,
                sigma: 0.01,
                horizon: 300,
            },
            1,
        )
        .unwrap();
        let one = sweep(&[AgentParams::default()], &series).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].rank, 1);
        let two = sweep(&[AgentParams::default(), AgentParams::default()], &series).unwrap();
        assert_eq!(two[0].run.record, two[1].run.record);
        assert_eq!((two[0].index, two[1].index), (0, 1));
    }
}
