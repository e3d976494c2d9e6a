//! Equal-weight liquidity pool. The pool is also the ERC-20 for its own
//! share token (BPT) and keeps its own record of token balances, which is
//! what `get_price` reads.

use serde::{Deserialize, Serialize};

use crate::engine::{CallKind, Calldata, Contract, Env, Revert};
use crate::trace::{PriceSource, TraceEvent};
use crate::types::{mapping_slot, Address, Amount, Word};
use crate::world::World;

use super::math::{join_mint, pool_price};
use super::{erc20, oracle, unknown_function, word_arg, Ordering, DISPATCH_COST, RECEIVE_COST};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeightedPool {
    pub tokens: Vec<Address>,
    pub oracle: Address,
    /// Index of the wrapped-native token, which `exit` can unwrap.
    pub weth_index: Option<usize>,
    /// Swap fee on the non-proportional part of a join (WAD).
    pub fee: Word,
    pub ordering: Ordering,
}

pub const MAX_TOKENS: usize = 4;

pub fn cached_slot(index: usize) -> Word {
    mapping_slot("pool.cached", &(index as u64).to_be_bytes())
}

/// Initial liquidity: token balances, matching records, and BPT to `lp`.
pub fn seed(world: &mut World, pool: Address, tokens: &[Address], balances: &[Word], lp: Address, supply: Word) {
    for (i, (token, amount)) in tokens.iter().zip(balances).enumerate() {
        erc20::seed(world, *token, pool, *amount);
        world.set_storage(pool, cached_slot(i), *amount);
    }
    erc20::seed(world, pool, lp, supply);
}

pub fn peek_cached(world: &World, pool: Address, index: usize) -> Word {
    world.storage(pool, cached_slot(index))
}

impl WeightedPool {
    fn cached(&self, env: &mut Env<'_>) -> Result<Vec<Word>, Revert> {
        (0..self.tokens.len()).map(|i| env.sload(cached_slot(i))).collect()
    }

    fn price(&self, env: &mut Env<'_>) -> Result<Word, Revert> {
        let balances = self.cached(env)?;
        let mut rates = Vec::with_capacity(self.tokens.len());
        for t in &self.tokens {
            rates.push(oracle::call_rate(env, self.oracle, *t)?);
        }
        let supply = erc20::total_supply(env)?;
        env.require(!supply.is_zero(), "pool: zero supply")?;
        pool_price(&balances, &rates, supply).ok_or_else(|| env.fail("pool: price overflow"))
    }

    fn emit_price(&self, env: &mut Env<'_>, source: PriceSource) -> Result<Word, Revert> {
        let price = self.price(env)?;
        let pool = env.this();
        env.emit(TraceEvent::Price { pool, price: Amount(price), source });
        Ok(price)
    }

    fn join(&self, env: &mut Env<'_>, deposits: &[Word]) -> Result<Vec<Word>, Revert> {
        let caller = env.caller();
        let this = env.this();
        let balances = self.cached(env)?;
        let supply = erc20::total_supply(env)?;
        let minted = join_mint(&balances, deposits, supply, self.fee).ok_or_else(|| env.fail("pool: join math"))?;
        for (i, d) in deposits.iter().enumerate() {
            if !d.is_zero() {
                erc20::call_transfer_from(env, self.tokens[i], caller, this, *d)?;
                env.sstore(cached_slot(i), balances[i] + *d)?;
            }
        }
        if !minted.is_zero() {
            erc20::mint(env, caller, minted)?;
        }
        self.emit_price(env, PriceSource::PostJoin)?;
        Ok(vec![minted])
    }

    fn pay_out(&self, env: &mut Env<'_>, to: Address, shares: &[Word], unwrap: bool) -> Result<(), Revert> {
        for (i, share) in shares.iter().enumerate() {
            if share.is_zero() {
                continue;
            }
            if unwrap && self.weth_index == Some(i) {
                env.call_checked(self.tokens[i], "withdraw", vec![*share])?;
                env.call(to, CallKind::Call, *share, None, Calldata::fallback())?.into_result()?;
            } else {
                erc20::call_transfer(env, self.tokens[i], to, *share)?;
            }
        }
        Ok(())
    }

    fn exit(&self, env: &mut Env<'_>, bpt: Word, unwrap: bool) -> Result<Vec<Word>, Revert> {
        let caller = env.caller();
        let supply = erc20::total_supply(env)?;
        env.require(bpt < supply, "pool: full dissolution not allowed")?;
        let balances = self.cached(env)?;
        let shares: Vec<Word> = balances.iter().map(|b| *b * bpt / supply).collect();
        erc20::burn(env, caller, bpt)?;
        let update = |env: &mut Env<'_>| -> Result<(), Revert> {
            for (i, (b, s)) in balances.iter().zip(&shares).enumerate() {
                env.sstore(cached_slot(i), *b - *s)?;
            }
            Ok(())
        };
        match self.ordering {
            Ordering::Vulnerable => {
                self.pay_out(env, caller, &shares, unwrap)?;
                update(env)?;
            }
            Ordering::Cei => {
                update(env)?;
                self.pay_out(env, caller, &shares, unwrap)?;
            }
        }
        self.emit_price(env, PriceSource::PostExit)?;
        Ok(shares)
    }
}

impl Contract for WeightedPool {
    fn kind(&self) -> &str {
        "weighted_pool"
    }

    fn entry_cost(&self, input: &Calldata) -> u64 {
        if input.is_fallback() {
            RECEIVE_COST
        } else {
            DISPATCH_COST
        }
    }

    fn execute(&self, env: &mut Env<'_>, input: &Calldata) -> Result<Vec<Word>, Revert> {
        if let Some(out) = erc20::handle(env, input, false) {
            return out;
        }
        match input.function.as_str() {
            // Plain receive, used when the wrapped-native token pays out.
            "" => Ok(vec![]),
            "get_price" => self.emit_price(env, PriceSource::Query).map(|p| vec![p]),
            "cached_balance" => {
                let i: usize = word_arg(env, input, 0)?.saturating_to();
                env.require(i < self.tokens.len(), "pool: token index out of range")?;
                Ok(vec![env.sload(cached_slot(i))?])
            }
            "join_proportional" => {
                env.require(input.args.len() == self.tokens.len(), "pool: one amount per token")?;
                self.join(env, &input.args)
            }
            "join_single" => {
                let i: usize = word_arg(env, input, 0)?.saturating_to();
                env.require(i < self.tokens.len(), "pool: token index out of range")?;
                let mut deposits = vec![Word::ZERO; self.tokens.len()];
                deposits[i] = word_arg(env, input, 1)?;
                self.join(env, &deposits)
            }
            "exit" => {
                let bpt = word_arg(env, input, 0)?;
                let unwrap = input.arg(1).is_some_and(|w| !w.is_zero());
                self.exit(env, bpt, unwrap)
            }
            _ => Err(unknown_function(env, input)),
        }
    }

    fn is_view(&self, function: &str) -> bool {
        matches!(function, "get_price" | "cached_balance") || erc20::VIEW_FUNCTIONS.contains(&function)
    }
}
