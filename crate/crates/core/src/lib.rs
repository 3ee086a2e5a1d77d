//! Offline trace checking for a metric temporal logic with aggregate
//! modalities (count, average, maximum, average distance).
//!
//! Pipeline: [`formula::parse_formula`] → [`formula::desugar`] →
//! [`formula::to_pnf`] → [`cltlb::translate`], then one of three backends:
//! the counter evaluator in [`checker`], the SMT encoding in [`smt`], or the
//! direct reference evaluator in [`oracle`]. [`checker::check`] runs any of
//! them on a timed word.

pub mod checker;
pub mod cltlb;
pub mod formula;
pub mod oracle;
pub mod sample;
pub mod smt;
pub mod trace;

pub use checker::{check, Backend, CheckError, CheckReport, CheckSettings, Verdict};
pub use formula::{parse_formula, Formula};
pub use trace::{parse_trace, TimedWord};
