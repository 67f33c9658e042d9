//! Price series: seeded geometric Brownian motion and CSV ingestion.
//!
//! CSV schema: header `index,price`, then one row per tick with an unsigned
//! integer index and a decimal price using `.`; UTF-8 with `\n` endings.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{gaussian_sample, RngState};

#[derive(Debug, Error)]
pub enum MarketError {
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("line {line}: price must be positive, got {price}")]
    NonPositivePrice { line: u64, price: f64 },
    #[error("line {line}: index {index} does not increase on {previous}")]
    NonMonotoneIndex {
        line: u64,
        index: u64,
        previous: u64,
    },
    #[error("need at least 2 ticks, got {0}")]
    TooFewTicks(usize),
    #[error("invalid GBM parameter {field}: {message}")]
    InvalidParams {
        field: &'static str,
        message: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tick {
    pub index: u64,
    pub price: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceSeries {
    symbol: String,
    ticks: Vec<Tick>,
}

impl PriceSeries {
    /// Validates positivity and strictly increasing indices. Errors report
    /// 1-based data-row positions offset by the header (line 2 is the first tick).
    pub fn new(symbol: impl Into<String>, ticks: Vec<Tick>) -> Result<Self, MarketError> {
        for (i, t) in ticks.iter().enumerate() {
            let line = i as u64 + 2;
            if !(t.price > 0.0) || !t.price.is_finite() {
                return Err(MarketError::NonPositivePrice {
                    line,
                    price: t.price,
                });
            }
            if i > 0 && t.index <= ticks[i - 1].index {
                return Err(MarketError::NonMonotoneIndex {
                    line,
                    index: t.index,
                    previous: ticks[i - 1].index,
                });
            }
        }
        Ok(Self {
            symbol: symbol.into(),
            ticks,
        })
    }

    /// Consecutive indices starting at 0.
    pub fn from_prices(symbol: impl Into<String>, prices: &[f64]) -> Result<Self, MarketError> {
        let ticks = prices
            .iter()
            .enumerate()
            .map(|(i, &price)| Tick {
                index: i as u64,
                price,
            })
            .collect();
        Self::new(symbol, ticks)
    }

    pub fn symbol(&self) -> &str {
        &self.symbol
    }

    pub fn ticks(&self) -> &[Tick] {
        &self.ticks
    }

    pub fn prices(&self) -> Vec<f64> {
        self.ticks.iter().map(|t| t.price).collect()
    }

    pub fn len(&self) -> usize {
        self.ticks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ticks.is_empty()
    }
}

/// Per-tick drift and volatility for `S_{t+1} = S_t · exp((μ − σ²/2) + σ Z_t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GbmParams {
    pub s0: f64,
    pub mu: f64,
    pub sigma: f64,
    pub horizon: usize,
}

impl GbmParams {
    pub fn validate(&self) -> Result<(), MarketError> {
        let bad = |field, message: &str| {
            Err(MarketError::InvalidParams {
                field,
                message: message.to_owned(),
            })
        };
        if !(self.s0 > 0.0) || !self.s0.is_finite() {
            return bad("s0", "must be positive");
        }
        if !self.mu.is_finite() {
            return bad("mu", "must be finite");
        }
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return bad("sigma", "must be non-negative");
        }
        if self.horizon < 1 {
            return bad("horizon", "must be at least 1");
        }
        Ok(())
    }
}

/// `horizon + 1` prices (index 0 is `s0`).
pub fn generate_gbm(params: &GbmParams, seed: u64) -> Result<PriceSeries, MarketError> {
    params.validate()?;
    let shocks = gaussian_sample(&mut RngState::new(seed), params.horizon);
    let drift = params.mu - 0.5 * params.sigma * params.sigma;
    let mut prices = Vec::with_capacity(params.horizon + 1);
    prices.push(params.s0);
    let mut log_price = params.s0.ln();
    for z in shocks {
        log_price += drift + params.sigma * z;
        prices.push(log_price.exp());
    }
    PriceSeries::from_prices("GBM", &prices)
}

/// Log returns `ln(S_{t+1}/S_t)`.
pub fn to_return_series(s: &PriceSeries) -> Result<Vec<f64>, MarketError> {
    if s.len() < 2 {
        return Err(MarketError::TooFewTicks(s.len()));
    }
    Ok(s.ticks
        .windows(2)
        .map(|w| (w[1].price / w[0].price).ln())
        .collect())
}

pub fn read_csv<R: Read>(reader: R, symbol: &str) -> Result<PriceSeries, MarketError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let header = rdr.headers().map_err(|e| MarketError::Parse {
        line: 1,
        message: e.to_string(),
    })?;
    if header != vec!["index", "price"] {
        return Err(MarketError::Parse {
            line: 1,
            message: format!("expected header `index,price`, found {header:?}"),
        });
    }
    let mut ticks = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let line = i as u64 + 2;
        let record = record.map_err(|e| MarketError::Parse {
            line,
            message: e.to_string(),
        })?;
        if record.len() != 2 {
            return Err(MarketError::Parse {
                line,
                message: format!("expected 2 fields, found {}", record.len()),
            });
        }
        let index: u64 = record[0].parse().map_err(|e| MarketError::Parse {
            line,
            message: format!("index {:?}: {e}", &record[0]),
        })?;
        let price: f64 = record[1].parse().map_err(|e| MarketError::Parse {
            line,
            message: format!("price {:?}: {e}", &record[1]),
        })?;
        ticks.push(Tick { index, price });
    }
    PriceSeries::new(symbol, ticks)
}

pub fn ingest_csv(path: impl AsRef<Path>) -> Result<PriceSeries, MarketError> {
    let path = path.as_ref();
    let symbol = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("series")
        .to_owned();
    read_csv(std::fs::File::open(path)?, &symbol)
}

/// Prices are written in shortest round-trip form, so reading back is exact.
pub fn write_csv<W: Write>(s: &PriceSeries, mut out: W) -> std::io::Result<()> {
    out.write_all(b"index,price\n")?;
    for t in &s.ticks {
        writeln!(out, "{},{:?}", t.index, t.price)?;
    }
    Ok(())
}
