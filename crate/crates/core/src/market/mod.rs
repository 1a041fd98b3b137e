//! Option chains and the four-family domination audit.

pub mod audit;
pub mod chain;

pub use audit::{
    monotonicity_anomalies, run_domination_test, AnomalyRecord, DominationReport, Family, FamilyCounts, ViolationRecord,
    AUDIT_TOL, THREADS_ENV,
};
pub use chain::{
    black_scholes, corrupt_monotonicity, load_chain, parse_chain, strike_ladder, synth_chain, ChainRow, Corruption, Noise,
    OptionChain, CHAIN_HEADER, DAYS_PER_YEAR,
};
