//! Deterministic simulator for contract call trees with reentrancy,
//! once-per-transaction and duration guards, replaying reentrancy attacks
//! against small DeFi fixtures across chain profiles.

// Reverts are ordinary control flow here and carry their cause inline.
#![allow(clippy::result_large_err)]

pub mod chain;
pub mod engine;
pub mod fixtures;
pub mod gas;
pub mod guards;
pub mod scenario;
pub mod trace;
pub mod types;
pub mod world;

pub use chain::{ChainProfile, UnknownProfile};
pub use engine::{CallKind, CallResult, CallStatus, Calldata, Contract, Env, Revert, RevertCause};
pub use gas::GasSchedule;
pub use guards::{GuardBinding, GuardHit, GuardKind};
pub use trace::TraceEvent;
pub use types::{Address, Amount, SignedAmount, Word, WAD};
pub use world::{BlockContext, World, WorldError};
