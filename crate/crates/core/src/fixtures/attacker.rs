//! Scriptable contract account. Each entry point runs a fixed list of calls;
//! plain value receipts run the fallback script a bounded number of times.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::engine::{CallKind, Calldata, Contract, Env, Revert};
use crate::types::{mapping_slot, slot, Address, Amount, Word};

use super::{erc20, unknown_function, DISPATCH_COST};

/// A call argument, resolved when the step runs. `A` is how contracts are
/// named: role strings in scenario files, addresses once deployed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arg<A = Address> {
    /// Fixed-point token amount, e.g. `"50"` for 50e18.
    Amount(Amount),
    /// Raw integer, e.g. a token index.
    Raw(u64),
    Bool(bool),
    Address(A),
    /// Current token balance of `holder` (default: the attacker itself).
    BalanceOf {
        token: A,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        holder: Option<A>,
    },
    NativeBalance,
    /// A value stored by an earlier step's `save_as`.
    Saved(String),
}

impl<A> Arg<A> {
    pub fn map_address<B, E>(&self, f: &impl Fn(&A) -> Result<B, E>) -> Result<Arg<B>, E> {
        Ok(match self {
            Arg::Amount(a) => Arg::Amount(*a),
            Arg::Raw(r) => Arg::Raw(*r),
            Arg::Bool(b) => Arg::Bool(*b),
            Arg::Address(a) => Arg::Address(f(a)?),
            Arg::BalanceOf { token, holder } => {
                Arg::BalanceOf { token: f(token)?, holder: holder.as_ref().map(f).transpose()? }
            }
            Arg::NativeBalance => Arg::NativeBalance,
            Arg::Saved(s) => Arg::Saved(s.clone()),
        })
    }
}

impl Arg<Address> {
    /// Value of an argument that needs no contract state.
    pub fn constant(&self) -> Option<Word> {
        match self {
            Arg::Amount(a) => Some(a.0),
            Arg::Raw(r) => Some(Word::from(*r)),
            Arg::Bool(b) => Some(super::bool_word(*b)),
            Arg::Address(a) => Some(a.to_word()),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Step<A = Address> {
    pub to: A,
    pub function: String,
    #[serde(default)]
    pub args: Vec<Arg<A>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<Arg<A>>,
    /// Store the call's first return word under this name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub save_as: Option<String>,
}

impl<A> Step<A> {
    pub fn map_address<B, E>(&self, f: &impl Fn(&A) -> Result<B, E>) -> Result<Step<B>, E> {
        Ok(Step {
            to: f(&self.to)?,
            function: self.function.clone(),
            args: self.args.iter().map(|a| a.map_address(f)).collect::<Result<_, _>>()?,
            value: self.value.as_ref().map(|v| v.map_address(f)).transpose()?,
            save_as: self.save_as.clone(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Attacker {
    pub scripts: BTreeMap<String, Vec<Step>>,
    pub fallback: Vec<Step>,
    pub max_fallback_runs: u32,
    /// Gas the fallback burns on entry; above the stipend it cannot run on a `transfer`.
    pub fallback_cost: u64,
    pub accepts_token_hook: bool,
}

pub fn saved_slot(name: &str) -> Word {
    mapping_slot("attacker.saved", name.as_bytes())
}

pub fn fallback_runs_slot() -> Word {
    slot("attacker.fallback_runs")
}

fn resolve(env: &mut Env<'_>, arg: &Arg) -> Result<Word, Revert> {
    if let Some(w) = arg.constant() {
        return Ok(w);
    }
    match arg {
        Arg::BalanceOf { token, holder } => {
            let holder = holder.unwrap_or_else(|| env.this());
            erc20::call_balance_of(env, *token, holder)
        }
        Arg::NativeBalance => env.self_balance(),
        Arg::Saved(name) => env.sload(saved_slot(name)),
        _ => unreachable!("constant arguments handled above"),
    }
}

fn run_steps(env: &mut Env<'_>, steps: &[Step]) -> Result<(), Revert> {
    for step in steps {
        let mut args = Vec::with_capacity(step.args.len());
        for a in &step.args {
            args.push(resolve(env, a)?);
        }
        let value = match &step.value {
            Some(v) => resolve(env, v)?,
            None => Word::ZERO,
        };
        let result = env.call(step.to, CallKind::Call, value, None, Calldata::new(step.function.clone(), args))?;
        let first = result.first_word();
        result.into_result()?;
        if let Some(name) = &step.save_as {
            env.sstore(saved_slot(name), first)?;
        }
    }
    Ok(())
}

impl Contract for Attacker {
    fn kind(&self) -> &str {
        "attacker"
    }

    fn entry_cost(&self, input: &Calldata) -> u64 {
        if input.is_fallback() {
            self.fallback_cost
        } else {
            DISPATCH_COST
        }
    }

    fn execute(&self, env: &mut Env<'_>, input: &Calldata) -> Result<Vec<Word>, Revert> {
        if input.is_fallback() {
            let runs = env.sload(fallback_runs_slot())?;
            if runs < Word::from(self.max_fallback_runs) {
                env.sstore(fallback_runs_slot(), runs + Word::from(1u8))?;
                run_steps(env, &self.fallback)?;
            }
            return Ok(vec![]);
        }
        match self.scripts.get(&input.function) {
            Some(steps) => {
                run_steps(env, steps)?;
                Ok(vec![])
            }
            None if input.function == "on_token_received" => Ok(vec![]),
            None => Err(unknown_function(env, input)),
        }
    }

    fn accepts_token_hook(&self) -> bool {
        self.accepts_token_hook
    }
}
