//! Robin Hood game with bounded historical memory.
//!
//! Each day the Sheriff drops `s(i)` bags into a cave and each night Robin
//! removes `r(i)` of them, remembering only the arrival days of bags from the
//! last `b(i)` days. This crate evaluates the schedule quantities exactly,
//! classifies instances as won by Robin or the Sheriff, computes per-bag
//! survival probabilities, simulates the oldest-first strategies with exact
//! count-based state, and builds instances showing one extra day of memory
//! turns an almost-sure loss into a sure win.

pub mod analysis;
pub mod cli;
pub mod construct;
pub mod engine;
pub mod error;
pub mod json;
pub mod rng;
pub mod schedule;

pub use error::{Error, Result};
pub use schedule::{
    DigitBudget, FunctionSpec, FunctionValues, GameInstance, RestrictionReport, ScheduleSpec,
};
