//! Exchange rates, in ETH per whole token (1e18 fixed-point).

use crate::engine::{Calldata, Contract, Env, Revert};
use crate::types::{mapping_slot, Address, Word};
use crate::world::World;

use super::{addr_arg, unknown_function, word_arg, DISPATCH_COST};

#[derive(Debug, Clone, Default)]
pub struct RateOracle;

pub fn rate_slot(token: Address) -> Word {
    mapping_slot("oracle.rate", &token.0)
}

pub fn seed_rate(world: &mut World, oracle: Address, token: Address, rate: Word) {
    world.set_storage(oracle, rate_slot(token), rate);
}

pub fn peek_rate(world: &World, oracle: Address, token: Address) -> Word {
    world.storage(oracle, rate_slot(token))
}

/// Rate of `token` via a static call to `oracle`.
pub fn call_rate(env: &mut Env<'_>, oracle: Address, token: Address) -> Result<Word, Revert> {
    let out = env.static_call(oracle, "rate", vec![token.to_word()])?;
    Ok(out.first().copied().unwrap_or_default())
}

impl Contract for RateOracle {
    fn kind(&self) -> &str {
        "rate_oracle"
    }

    fn entry_cost(&self, _input: &Calldata) -> u64 {
        DISPATCH_COST
    }

    fn execute(&self, env: &mut Env<'_>, input: &Calldata) -> Result<Vec<Word>, Revert> {
        match input.function.as_str() {
            "rate" => {
                let token = addr_arg(env, input, 0)?;
                let rate = env.sload(rate_slot(token))?;
                env.require(!rate.is_zero(), "oracle: no rate for token")?;
                Ok(vec![rate])
            }
            "set_rate" => {
                let token = addr_arg(env, input, 0)?;
                let rate = word_arg(env, input, 1)?;
                env.require(!rate.is_zero(), "oracle: rate must be positive")?;
                env.sstore(rate_slot(token), rate)?;
                Ok(vec![])
            }
            _ => Err(unknown_function(env, input)),
        }
    }

    fn is_view(&self, function: &str) -> bool {
        function == "rate"
    }
}
