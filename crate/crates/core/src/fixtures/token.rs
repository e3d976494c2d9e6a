//! Fungible token. A wrapped-native token also accepts `deposit` (mint
//! against attached value) and `withdraw` (burn and send value back with a
//! stipend transfer).

use serde::{Deserialize, Serialize};

use crate::engine::{CallKind, Calldata, Contract, Env, Revert};
use crate::types::Word;

use super::{erc20, unknown_function, word_arg, DISPATCH_COST, RECEIVE_COST};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub symbol: String,
    #[serde(default)]
    pub wrapped_native: bool,
    /// Notify hook-enabled recipients on every transfer.
    #[serde(default)]
    pub hook: bool,
}

impl Token {
    pub fn new(symbol: &str) -> Self {
        Token { symbol: symbol.to_string(), wrapped_native: false, hook: false }
    }

    pub fn wrapped(symbol: &str) -> Self {
        Token { wrapped_native: true, ..Token::new(symbol) }
    }
}

impl Contract for Token {
    fn kind(&self) -> &str {
        "token"
    }

    fn entry_cost(&self, input: &Calldata) -> u64 {
        if input.is_fallback() {
            RECEIVE_COST
        } else {
            DISPATCH_COST
        }
    }

    fn execute(&self, env: &mut Env<'_>, input: &Calldata) -> Result<Vec<Word>, Revert> {
        if let Some(out) = erc20::handle(env, input, self.hook) {
            return out;
        }
        match (input.function.as_str(), self.wrapped_native) {
            ("deposit", true) | ("", true) => {
                let (to, value) = (env.caller(), env.value());
                erc20::mint(env, to, value)?;
                Ok(vec![])
            }
            ("withdraw", true) => {
                let amount = word_arg(env, input, 0)?;
                let to = env.caller();
                erc20::burn(env, to, amount)?;
                env.call(to, CallKind::Transfer, amount, None, Calldata::fallback())?;
                Ok(vec![])
            }
            _ => Err(unknown_function(env, input)),
        }
    }

    fn is_view(&self, function: &str) -> bool {
        erc20::VIEW_FUNCTIONS.contains(&function)
    }
}
