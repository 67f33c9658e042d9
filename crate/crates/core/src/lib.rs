//! A curious and confident trading agent.
//!
//! Information items arrive on a Bass diffusion schedule, are compared by
//! Bhattacharyya distance after a Johnson–Lindenstrauss projection, and feed
//! a Buy/Sell/Hold/DontKnow decision rule. Track records are judged with
//! Sharpe ratio, drawdown, VaR, and a distributional Turing-style test.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agent;
pub mod bass;
pub mod cli;
pub mod divergence;
pub mod evaluation;
pub mod jl;
pub mod market;
pub mod numerics;
