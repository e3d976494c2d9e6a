//! Ether deposit bank: `deposit` with value, `withdraw` pays out the whole
//! balance of the caller.

use serde::{Deserialize, Serialize};

use crate::engine::{CallKind, CallStatus, Calldata, Contract, Env, Revert};
use crate::types::{mapping_slot, Address, Word};

use super::{addr_arg, unknown_function, Ordering, DISPATCH_COST};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EtherBank {
    /// How `withdraw` sends value: `call` forwards all gas, `transfer` and
    /// `send` forward only the stipend.
    pub send_kind: CallKind,
    pub ordering: Ordering,
}

pub fn balance_slot(who: Address) -> Word {
    mapping_slot("bank.balance", &who.0)
}

impl EtherBank {
    fn pay(&self, env: &mut Env<'_>, to: Address, amount: Word) -> Result<(), Revert> {
        let result = env.call(to, self.send_kind, amount, None, Calldata::fallback())?;
        match result.status {
            CallStatus::Success => Ok(()),
            CallStatus::SendFailed => Err(env.fail("bank: send failed")),
            CallStatus::Reverted => Err(result.revert.expect("failed call carries a revert")),
        }
    }
}

impl Contract for EtherBank {
    fn kind(&self) -> &str {
        "ether_bank"
    }

    fn entry_cost(&self, _input: &Calldata) -> u64 {
        DISPATCH_COST
    }

    fn execute(&self, env: &mut Env<'_>, input: &Calldata) -> Result<Vec<Word>, Revert> {
        let caller = env.caller();
        match input.function.as_str() {
            "deposit" => {
                let b = env.sload(balance_slot(caller))?;
                let v = env.value();
                env.sstore(balance_slot(caller), b + v)?;
                Ok(vec![])
            }
            "withdraw" => {
                let amount = env.sload(balance_slot(caller))?;
                env.require(!amount.is_zero(), "bank: nothing to withdraw")?;
                match self.ordering {
                    Ordering::Vulnerable => {
                        self.pay(env, caller, amount)?;
                        env.sstore(balance_slot(caller), Word::ZERO)?;
                    }
                    Ordering::Cei => {
                        env.sstore(balance_slot(caller), Word::ZERO)?;
                        self.pay(env, caller, amount)?;
                    }
                }
                Ok(vec![amount])
            }
            "balance_of" => {
                let who = addr_arg(env, input, 0)?;
                Ok(vec![env.sload(balance_slot(who))?])
            }
            _ => Err(unknown_function(env, input)),
        }
    }

    fn is_view(&self, function: &str) -> bool {
        function == "balance_of"
    }
}
