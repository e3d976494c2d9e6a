//! Reward farm whose `harvest` pays in proportion to the caller's current
//! balance of the staking token, with no record of how long it was held.

use serde::{Deserialize, Serialize};

use crate::engine::{Calldata, Contract, Env, Revert};
use crate::types::{mul_div, Address, Word, WAD};

use super::{erc20, unknown_function, DISPATCH_COST};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewardFarm {
    pub stake: Address,
    pub reward: Address,
    /// Reward paid per staking token held at harvest time (WAD).
    pub reward_per_token: Word,
}

impl Contract for RewardFarm {
    fn kind(&self) -> &str {
        "reward_farm"
    }

    fn entry_cost(&self, _input: &Calldata) -> u64 {
        DISPATCH_COST
    }

    fn execute(&self, env: &mut Env<'_>, input: &Calldata) -> Result<Vec<Word>, Revert> {
        match input.function.as_str() {
            "harvest" => {
                let caller = env.caller();
                let held = erc20::call_balance_of(env, self.stake, caller)?;
                let reward = mul_div(held, self.reward_per_token, WAD).ok_or_else(|| env.fail("farm: overflow"))?;
                env.require(!reward.is_zero(), "farm: nothing to harvest")?;
                let this = env.this();
                let pot = erc20::call_balance_of(env, self.reward, this)?;
                env.require(pot >= reward, "farm: reward pot exhausted")?;
                erc20::call_transfer(env, self.reward, caller, reward)?;
                Ok(vec![reward])
            }
            _ => Err(unknown_function(env, input)),
        }
    }
}
