//! ERC-20 ledger kept in the token contract's own storage. Shared by plain
//! tokens and by the pool's BPT.

use crate::engine::{CallKind, Calldata, Env, Revert};
use crate::trace::TraceEvent;
use crate::types::{mapping_slot, mapping_slot2, slot, Address, Amount, Word};
use crate::world::World;

use super::{addr_arg, bool_word, word_arg};

pub fn balance_slot(holder: Address) -> Word {
    mapping_slot("erc20.balance", &holder.0)
}

pub fn allowance_slot(owner: Address, spender: Address) -> Word {
    mapping_slot2("erc20.allowance", &owner.0, &spender.0)
}

pub fn supply_slot() -> Word {
    slot("erc20.supply")
}

/// Functions answered by [`handle`] that never write.
pub const VIEW_FUNCTIONS: &[&str] = &["balance_of", "total_supply", "allowance"];

pub fn balance(env: &mut Env<'_>, holder: Address) -> Result<Word, Revert> {
    env.sload(balance_slot(holder))
}

pub fn total_supply(env: &mut Env<'_>) -> Result<Word, Revert> {
    env.sload(supply_slot())
}

/// Moves `amount` of this contract's token between ledger entries.
pub fn move_balance(env: &mut Env<'_>, from: Address, to: Address, amount: Word) -> Result<(), Revert> {
    let have = balance(env, from)?;
    env.require(have >= amount, "ERC20: transfer amount exceeds balance")?;
    env.sstore(balance_slot(from), have - amount)?;
    let to_have = balance(env, to)?;
    env.sstore(balance_slot(to), to_have + amount)?;
    let token = env.this();
    env.emit(TraceEvent::TokenTransfer { token, from, to, amount: Amount(amount) });
    Ok(())
}

pub fn mint(env: &mut Env<'_>, to: Address, amount: Word) -> Result<(), Revert> {
    let supply = total_supply(env)?;
    env.sstore(supply_slot(), supply + amount)?;
    let have = balance(env, to)?;
    env.sstore(balance_slot(to), have + amount)?;
    let token = env.this();
    env.emit(TraceEvent::TokenTransfer { token, from: Address::ZERO, to, amount: Amount(amount) });
    Ok(())
}

pub fn burn(env: &mut Env<'_>, from: Address, amount: Word) -> Result<(), Revert> {
    let have = balance(env, from)?;
    env.require(have >= amount, "ERC20: burn amount exceeds balance")?;
    env.sstore(balance_slot(from), have - amount)?;
    let supply = total_supply(env)?;
    env.sstore(supply_slot(), supply - amount)?;
    let token = env.this();
    env.emit(TraceEvent::TokenTransfer { token, from, to: Address::ZERO, amount: Amount(amount) });
    Ok(())
}

fn spend_allowance(env: &mut Env<'_>, owner: Address, spender: Address, amount: Word) -> Result<(), Revert> {
    let s = allowance_slot(owner, spender);
    let allowed = env.sload(s)?;
    if allowed == Word::MAX {
        return Ok(());
    }
    env.require(allowed >= amount, "ERC20: insufficient allowance")?;
    env.sstore(s, allowed - amount)
}

/// Notifies a hook-enabled recipient, as reentrancy-capable tokens do.
fn notify(env: &mut Env<'_>, hook: bool, from: Address, to: Address, amount: Word) -> Result<(), Revert> {
    if hook && env.accepts_token_hook(to) {
        let input = Calldata::new("on_token_received", vec![from.to_word(), amount]);
        env.call(to, CallKind::Call, Word::ZERO, None, input)?.into_result()?;
    }
    Ok(())
}

/// Dispatches the standard ERC-20 surface. `None` if `input` is not one of them.
pub fn handle(env: &mut Env<'_>, input: &Calldata, hook: bool) -> Option<Result<Vec<Word>, Revert>> {
    let result = match input.function.as_str() {
        "balance_of" => addr_arg(env, input, 0).and_then(|who| balance(env, who)).map(|b| vec![b]),
        "total_supply" => total_supply(env).map(|s| vec![s]),
        "allowance" => (|| {
            let owner = addr_arg(env, input, 0)?;
            let spender = addr_arg(env, input, 1)?;
            Ok(vec![env.sload(allowance_slot(owner, spender))?])
        })(),
        "approve" => (|| {
            let spender = addr_arg(env, input, 0)?;
            let amount = word_arg(env, input, 1)?;
            let owner = env.caller();
            env.sstore(allowance_slot(owner, spender), amount)?;
            Ok(vec![bool_word(true)])
        })(),
        "transfer" => (|| {
            let to = addr_arg(env, input, 0)?;
            let amount = word_arg(env, input, 1)?;
            let from = env.caller();
            move_balance(env, from, to, amount)?;
            notify(env, hook, from, to, amount)?;
            Ok(vec![bool_word(true)])
        })(),
        "transfer_from" => (|| {
            let from = addr_arg(env, input, 0)?;
            let to = addr_arg(env, input, 1)?;
            let amount = word_arg(env, input, 2)?;
            let spender = env.caller();
            if spender != from {
                spend_allowance(env, from, spender, amount)?;
            }
            move_balance(env, from, to, amount)?;
            notify(env, hook, from, to, amount)?;
            Ok(vec![bool_word(true)])
        })(),
        _ => return None,
    };
    Some(result)
}

/// Credits `holder` outside any transaction, for initial allocations.
pub fn seed(world: &mut World, token: Address, holder: Address, amount: Word) {
    let b = world.storage(token, balance_slot(holder));
    world.set_storage(token, balance_slot(holder), b + amount);
    let s = world.storage(token, supply_slot());
    world.set_storage(token, supply_slot(), s + amount);
}

pub fn seed_allowance(world: &mut World, token: Address, owner: Address, spender: Address, amount: Word) {
    world.set_storage(token, allowance_slot(owner, spender), amount);
}

/// Reads a balance without gas or warm-set effects.
pub fn peek_balance(world: &World, token: Address, holder: Address) -> Word {
    world.storage(token, balance_slot(holder))
}

pub fn peek_supply(world: &World, token: Address) -> Word {
    world.storage(token, supply_slot())
}

// Token-calling helpers used by other fixtures.

pub fn call_transfer(env: &mut Env<'_>, token: Address, to: Address, amount: Word) -> Result<(), Revert> {
    env.call_checked(token, "transfer", vec![to.to_word(), amount]).map(drop)
}

pub fn call_transfer_from(
    env: &mut Env<'_>,
    token: Address,
    from: Address,
    to: Address,
    amount: Word,
) -> Result<(), Revert> {
    env.call_checked(token, "transfer_from", vec![from.to_word(), to.to_word(), amount]).map(drop)
}

pub fn call_balance_of(env: &mut Env<'_>, token: Address, holder: Address) -> Result<Word, Revert> {
    let out = env.static_call(token, "balance_of", vec![holder.to_word()])?;
    Ok(out.first().copied().unwrap_or_default())
}
