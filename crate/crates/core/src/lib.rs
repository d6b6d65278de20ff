//! Student performance prediction from clickstream logs.
//!
//! The crate covers the full path from raw logs to predictions: CSV ingestion
//! ([`data`]), a seeded synthetic generator ([`synth`]), multi-level behavioral
//! features ([`features`]), gradient-boosted trees with ordered target
//! statistics for categorical columns ([`gbdt`]), evaluation and tuning
//! ([`eval`]) and descriptive difficulty/cohort reports ([`analytics`]).

pub mod analytics;
pub mod data;
pub mod eval;
pub mod features;
pub mod gbdt;
pub mod pipeline;
pub mod rng;
pub mod synth;
