//! Lending market that accepts pool shares as collateral and values them
//! with the pool's own `get_price`.

use serde::{Deserialize, Serialize};

use crate::engine::{Calldata, Contract, Env, Revert};
use crate::types::{mapping_slot, mul_div, Address, Word, WAD};
use crate::world::World;

use super::{addr_arg, erc20, oracle, unknown_function, word_arg, DISPATCH_COST};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LendingMarket {
    /// Pool whose share token is the collateral and whose price values it.
    pub pool: Address,
    pub oracle: Address,
    /// Loan-to-value factor (WAD).
    pub ltv: Word,
}

pub fn collateral_slot(who: Address) -> Word {
    mapping_slot("lending.collateral", &who.0)
}

pub fn debt_slot(who: Address) -> Word {
    mapping_slot("lending.debt", &who.0)
}

pub fn peek_collateral(world: &World, market: Address, who: Address) -> Word {
    world.storage(market, collateral_slot(who))
}

pub fn peek_debt(world: &World, market: Address, who: Address) -> Word {
    world.storage(market, debt_slot(who))
}

impl LendingMarket {
    fn credit_limit(&self, env: &mut Env<'_>, collateral: Word) -> Result<Word, Revert> {
        let out = env.static_call(self.pool, "get_price", vec![])?;
        let price = out.first().copied().unwrap_or_default();
        let value = mul_div(collateral, price, WAD).ok_or_else(|| env.fail("lending: overflow"))?;
        mul_div(value, self.ltv, WAD).ok_or_else(|| env.fail("lending: overflow"))
    }
}

impl Contract for LendingMarket {
    fn kind(&self) -> &str {
        "lending_market"
    }

    fn entry_cost(&self, _input: &Calldata) -> u64 {
        DISPATCH_COST
    }

    fn execute(&self, env: &mut Env<'_>, input: &Calldata) -> Result<Vec<Word>, Revert> {
        let caller = env.caller();
        let this = env.this();
        match input.function.as_str() {
            "deposit_collateral" => {
                let amount = word_arg(env, input, 0)?;
                erc20::call_transfer_from(env, self.pool, caller, this, amount)?;
                let c = env.sload(collateral_slot(caller))?;
                env.sstore(collateral_slot(caller), c + amount)?;
                Ok(vec![])
            }
            "borrow" => {
                let token = addr_arg(env, input, 0)?;
                let amount = word_arg(env, input, 1)?;
                if amount.is_zero() {
                    return Ok(vec![]);
                }
                let reserves = erc20::call_balance_of(env, token, this)?;
                env.require(reserves >= amount, "lending: empty reserves")?;
                let rate = oracle::call_rate(env, self.oracle, token)?;
                let value = mul_div(amount, rate, WAD).ok_or_else(|| env.fail("lending: overflow"))?;
                let collateral = env.sload(collateral_slot(caller))?;
                let debt = env.sload(debt_slot(caller))?;
                let limit = self.credit_limit(env, collateral)?;
                env.require(debt + value <= limit, "lending: undercollateralized")?;
                env.sstore(debt_slot(caller), debt + value)?;
                erc20::call_transfer(env, token, caller, amount)?;
                Ok(vec![])
            }
            "withdraw_collateral" => {
                let amount = word_arg(env, input, 0)?;
                let collateral = env.sload(collateral_slot(caller))?;
                env.require(collateral >= amount, "lending: not enough collateral")?;
                let debt = env.sload(debt_slot(caller))?;
                if !debt.is_zero() {
                    let limit = self.credit_limit(env, collateral - amount)?;
                    env.require(debt <= limit, "lending: undercollateralized")?;
                }
                env.sstore(collateral_slot(caller), collateral - amount)?;
                erc20::call_transfer(env, self.pool, caller, amount)?;
                Ok(vec![])
            }
            "collateral_of" => {
                let who = addr_arg(env, input, 0)?;
                Ok(vec![env.sload(collateral_slot(who))?])
            }
            "debt_of" => {
                let who = addr_arg(env, input, 0)?;
                Ok(vec![env.sload(debt_slot(who))?])
            }
            _ => Err(unknown_function(env, input)),
        }
    }

    fn is_view(&self, function: &str) -> bool {
        matches!(function, "collateral_of" | "debt_of")
    }
}
