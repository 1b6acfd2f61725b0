//! Co-evolutionary quality diversity for the traveling thief problem.
//!
//! A MAP-Elites archive over (tour length, packing profit) and an
//! entropy-maximising population share offspring produced by edge assembly
//! crossover on tours and a self-adaptive (1+1) EA on packings.

pub mod eax;
pub mod edo;
pub mod engine;
pub mod error;
pub mod experiment;
pub mod generate;
pub mod instance;
pub mod kp;
pub mod packing;
pub mod qd;
pub mod stats;
pub mod tsp;

pub use engine::{run, Mode, RunConfig, RunLog, RunResult, RunSummary, ZMinMode};
pub use error::{Error, ParseError, Result};
pub use instance::{PackingList, Scores, Solution, Tour, TtpInstance};
pub use packing::PolicyKind;
