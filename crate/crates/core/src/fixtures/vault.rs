//! Collateralized vault with an `emergency_withdraw` that returns all
//! collateral without looking at outstanding debt.

use serde::{Deserialize, Serialize};

use crate::engine::{Calldata, Contract, Env, Revert};
use crate::types::{mapping_slot, mul_div, Address, Word, WAD};

use super::{addr_arg, erc20, oracle, unknown_function, word_arg, DISPATCH_COST};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CollateralVault {
    pub collateral: Address,
    pub debt_token: Address,
    pub oracle: Address,
    pub ltv: Word,
}

pub fn collateral_slot(who: Address) -> Word {
    mapping_slot("vault.collateral", &who.0)
}

pub fn debt_slot(who: Address) -> Word {
    mapping_slot("vault.debt", &who.0)
}

impl CollateralVault {
    fn value(&self, env: &mut Env<'_>, token: Address, amount: Word) -> Result<Word, Revert> {
        let rate = oracle::call_rate(env, self.oracle, token)?;
        mul_div(amount, rate, WAD).ok_or_else(|| env.fail("vault: overflow"))
    }

    fn require_healthy(&self, env: &mut Env<'_>, collateral: Word, debt: Word) -> Result<(), Revert> {
        if debt.is_zero() {
            return Ok(());
        }
        let c = self.value(env, self.collateral, collateral)?;
        let d = self.value(env, self.debt_token, debt)?;
        let limit = mul_div(c, self.ltv, WAD).ok_or_else(|| env.fail("vault: overflow"))?;
        env.require(d <= limit, "vault: undercollateralized")
    }
}

impl Contract for CollateralVault {
    fn kind(&self) -> &str {
        "collateral_vault"
    }

    fn entry_cost(&self, _input: &Calldata) -> u64 {
        DISPATCH_COST
    }

    fn execute(&self, env: &mut Env<'_>, input: &Calldata) -> Result<Vec<Word>, Revert> {
        let caller = env.caller();
        let this = env.this();
        match input.function.as_str() {
            "deposit" => {
                let amount = word_arg(env, input, 0)?;
                erc20::call_transfer_from(env, self.collateral, caller, this, amount)?;
                let c = env.sload(collateral_slot(caller))?;
                env.sstore(collateral_slot(caller), c + amount)?;
                Ok(vec![])
            }
            "borrow" => {
                let amount = word_arg(env, input, 0)?;
                let c = env.sload(collateral_slot(caller))?;
                let d = env.sload(debt_slot(caller))?;
                self.require_healthy(env, c, d + amount)?;
                env.sstore(debt_slot(caller), d + amount)?;
                erc20::call_transfer(env, self.debt_token, caller, amount)?;
                Ok(vec![])
            }
            "repay" => {
                let amount = word_arg(env, input, 0)?;
                let d = env.sload(debt_slot(caller))?;
                env.require(amount <= d, "vault: repaying more than owed")?;
                erc20::call_transfer_from(env, self.debt_token, caller, this, amount)?;
                env.sstore(debt_slot(caller), d - amount)?;
                Ok(vec![])
            }
            "withdraw" => {
                let amount = word_arg(env, input, 0)?;
                let c = env.sload(collateral_slot(caller))?;
                env.require(c >= amount, "vault: not enough collateral")?;
                let d = env.sload(debt_slot(caller))?;
                self.require_healthy(env, c - amount, d)?;
                env.sstore(collateral_slot(caller), c - amount)?;
                erc20::call_transfer(env, self.collateral, caller, amount)?;
                Ok(vec![])
            }
            "emergency_withdraw" => {
                let c = env.sload(collateral_slot(caller))?;
                env.require(!c.is_zero(), "vault: nothing deposited")?;
                env.sstore(collateral_slot(caller), Word::ZERO)?;
                erc20::call_transfer(env, self.collateral, caller, c)?;
                Ok(vec![c])
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
