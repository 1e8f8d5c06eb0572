//! State-conditional portfolio allocation.
//!
//! A small feed-forward network maps monthly market-state variables to
//! portfolio weights and is trained by gradient ascent on a month-averaged
//! Lagrangian of a performance ratio. The crate also carries the moment-based
//! and parametric benchmark allocators, a walk-forward backtester and the
//! interpretability procedures used to inspect trained networks.

pub mod backtest;
pub mod benchmarks;
pub mod calendar;
pub mod config;
pub mod data;
pub mod error;
pub mod interpret;
pub mod network;
pub mod ratios;
pub mod synthetic;
pub mod training;

pub use calendar::YearMonth;
pub use error::{Error, ErrorClass, Result};
pub use ratios::{RatioKind, RatioSpec, RatioValue};
