//! Fee-free flash lender. `lend(token_0, amount_0, token_1, amount_1, ...)`
//! sends every amount to the caller, calls back `on_flash_loan` with the
//! same arguments, and reverts unless every reserve is back.

use crate::engine::{Calldata, Contract, Env, Revert};
use crate::types::{Address, Word};

use super::{erc20, unknown_function, DISPATCH_COST};

#[derive(Debug, Clone, Default)]
pub struct FlashLender;

impl Contract for FlashLender {
    fn kind(&self) -> &str {
        "flash_lender"
    }

    fn entry_cost(&self, _input: &Calldata) -> u64 {
        DISPATCH_COST
    }

    fn execute(&self, env: &mut Env<'_>, input: &Calldata) -> Result<Vec<Word>, Revert> {
        if input.function != "lend" {
            return Err(unknown_function(env, input));
        }
        env.require(
            !input.args.is_empty() && input.args.len().is_multiple_of(2),
            "lender: expected token/amount pairs",
        )?;
        let borrower = env.caller();
        let this = env.this();
        let legs: Vec<(Address, Word)> = input.args.chunks(2).map(|c| (Address::from_word(c[0]), c[1])).collect();
        let mut before = Vec::with_capacity(legs.len());
        for (token, amount) in &legs {
            let reserve = erc20::call_balance_of(env, *token, this)?;
            env.require(reserve >= *amount, "lender: insufficient reserves")?;
            before.push(reserve);
        }
        for (token, amount) in &legs {
            erc20::call_transfer(env, *token, borrower, *amount)?;
        }
        env.call_checked(borrower, "on_flash_loan", input.args.clone())?;
        for ((token, _), reserve) in legs.iter().zip(before) {
            let now = erc20::call_balance_of(env, *token, this)?;
            env.require(now >= reserve, "lender: flash loan not repaid")?;
        }
        Ok(vec![])
    }
}
