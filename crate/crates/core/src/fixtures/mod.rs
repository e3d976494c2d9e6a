//! Minimal DeFi contracts: tokens, a rate oracle, a weighted pool, a lending
//! market, a flash lender, an ether bank, a collateral vault, a reward farm,
//! and a scriptable attacker.

pub mod attacker;
pub mod bank;
pub mod erc20;
pub mod farm;
pub mod lender;
pub mod lending;
pub mod math;
pub mod oracle;
pub mod pool;
pub mod token;
pub mod vault;

use serde::{Deserialize, Serialize};

use crate::engine::{Calldata, Env, Revert};
use crate::types::{Address, Word};

pub use attacker::{Arg, Attacker, Step};
pub use bank::EtherBank;
pub use farm::RewardFarm;
pub use lender::FlashLender;
pub use lending::LendingMarket;
pub use oracle::RateOracle;
pub use pool::WeightedPool;
pub use token::Token;
pub use vault::CollateralVault;

/// Gas charged on entry to any fixture function.
pub const DISPATCH_COST: u64 = 700;

/// Gas charged on entry to a fixture's plain-receive fallback; fits the stipend.
pub const RECEIVE_COST: u64 = 50;

/// Order of state updates relative to the outgoing call.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ordering {
    /// Interaction before effects: the outgoing call sees stale state.
    #[default]
    Vulnerable,
    /// Checks, effects, then interactions.
    Cei,
}

pub(crate) fn word_arg(env: &Env<'_>, input: &Calldata, i: usize) -> Result<Word, Revert> {
    input.arg(i).ok_or_else(|| env.fail(format!("missing argument {i}")))
}

pub(crate) fn addr_arg(env: &Env<'_>, input: &Calldata, i: usize) -> Result<Address, Revert> {
    word_arg(env, input, i).map(Address::from_word)
}

pub(crate) fn unknown_function(env: &Env<'_>, input: &Calldata) -> Revert {
    env.fail(format!("unknown function {:?}", input.function))
}

pub(crate) fn bool_word(b: bool) -> Word {
    if b {
        Word::from(1u8)
    } else {
        Word::ZERO
    }
}
