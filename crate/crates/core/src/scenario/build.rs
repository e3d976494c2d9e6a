//! Turns a scenario plus a guard configuration into a ready world.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::chain::ChainProfile;
use crate::engine::Contract;
use crate::fixtures::{self, erc20, oracle, pool, Attacker, Ordering};
use crate::guards::{GuardBinding, GuardKey, Guarded, MutexWord};
use crate::types::{mul_div, Address, Word, WAD};
use crate::world::{BlockContext, World};

use super::schema::{ContractSpec, GuardConfiguration, GuardSpec, KeyDecl, RateSource, Scenario};
use super::ScenarioError;

/// Something a beneficiary can hold.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Asset {
    pub name: String,
    /// `None` for the native currency.
    pub token: Option<Address>,
}

pub const NATIVE_SYMBOL: &str = "ETH";

/// A built world plus the role directory used to interpret it.
#[derive(Debug, Clone)]
pub struct Deployment {
    pub world: World,
    pub roles: BTreeMap<String, Address>,
    pub assets: Vec<Asset>,
}

impl Deployment {
    pub fn address(&self, role: &str) -> Result<Address, ScenarioError> {
        self.roles.get(role).copied().ok_or_else(|| ScenarioError::Setup(format!("unknown role {role:?}")))
    }

    /// Role name for an address, or its hex form.
    pub fn name_of(&self, address: Address) -> String {
        self.roles.iter().find(|(_, a)| **a == address).map(|(r, _)| r.clone()).unwrap_or_else(|| address.to_string())
    }

    /// Combined holdings of `holders` per asset.
    pub fn holdings(&self, holders: &[Address]) -> Vec<Word> {
        self.assets
            .iter()
            .map(|asset| {
                holders
                    .iter()
                    .map(|h| match asset.token {
                        None => self.world.balance(*h),
                        Some(t) => erc20::peek_balance(&self.world, t, *h),
                    })
                    .fold(Word::ZERO, |acc, x| acc + x)
            })
            .collect()
    }
}

fn setup_err(msg: impl Into<String>) -> ScenarioError {
    ScenarioError::Setup(msg.into())
}

/// Rate of every token named by an oracle, derived from pool composition where asked.
fn resolve_rates(
    scenario: &Scenario,
    rates: &[super::schema::RateEntry],
) -> Result<BTreeMap<String, Word>, ScenarioError> {
    let mut out = BTreeMap::new();
    for r in rates {
        if let RateSource::Fixed(a) = &r.rate {
            out.insert(r.token.clone(), a.0);
        }
    }
    for r in rates {
        let RateSource::PoolSplit { pool: pool_role, price } = &r.rate else { continue };
        let Some(ContractSpec::WeightedPool { tokens, balances, supply, .. }) =
            scenario.setup.contracts.iter().find(|c| c.role() == pool_role)
        else {
            return Err(setup_err(format!("rate of {:?} splits {pool_role:?}, which is not a pool", r.token)));
        };
        let total = mul_div(price.0, supply.0, WAD).ok_or_else(|| setup_err("pool value overflows"))?;
        let mut fixed_value = Word::ZERO;
        let mut split = 0u64;
        let mut own_balance = None;
        for (t, b) in tokens.iter().zip(balances) {
            let source = rates.iter().find(|e| &e.token == t).map(|e| &e.rate);
            match source {
                Some(RateSource::Fixed(rate)) => fixed_value += mul_div(b.0, rate.0, WAD).unwrap_or_default(),
                Some(RateSource::PoolSplit { pool: p, .. }) if p == pool_role => split += 1,
                _ => return Err(setup_err(format!("pool {pool_role:?} token {t:?} has no fixed or split rate"))),
            }
            if t == &r.token {
                own_balance = Some(b.0);
            }
        }
        let own = own_balance.ok_or_else(|| setup_err(format!("{:?} is not in pool {pool_role:?}", r.token)))?;
        if total <= fixed_value {
            return Err(setup_err(format!("pool {pool_role:?} price leaves no value for split tokens")));
        }
        let bucket = (total - fixed_value) / Word::from(split);
        let rate = mul_div(bucket, WAD, own).ok_or_else(|| setup_err("rate overflows"))?;
        out.insert(r.token.clone(), rate);
    }
    for r in rates {
        if let RateSource::SameAs(other) = &r.rate {
            let rate =
                *out.get(other).ok_or_else(|| setup_err(format!("{:?} copies missing rate {other:?}", r.token)))?;
            out.insert(r.token.clone(), rate);
        }
    }
    if let Some((t, _)) = out.iter().find(|(_, r)| r.is_zero()) {
        return Err(setup_err(format!("rate of {t:?} is zero")));
    }
    Ok(out)
}

fn ordering_for(guards: &GuardConfiguration, role: &str, default: Ordering) -> Ordering {
    guards.patterns.iter().rev().find(|p| p.contract == role).map(|p| p.ordering).unwrap_or(default)
}

fn make_contract(
    spec: &ContractSpec,
    guards: &GuardConfiguration,
    roles: &BTreeMap<String, Address>,
) -> Result<Arc<dyn Contract>, ScenarioError> {
    let addr = |r: &str| roles.get(r).copied().ok_or_else(|| setup_err(format!("unknown role {r:?}")));
    Ok(match spec {
        ContractSpec::RateOracle { .. } => Arc::new(fixtures::RateOracle),
        ContractSpec::WeightedPool { role, tokens, oracle, weth, fee, ordering, .. } => {
            Arc::new(fixtures::WeightedPool {
                tokens: tokens.iter().map(|t| addr(t)).collect::<Result<_, _>>()?,
                oracle: addr(oracle)?,
                weth_index: weth.as_ref().and_then(|w| tokens.iter().position(|t| t == w)),
                fee: fee.0,
                ordering: ordering_for(guards, role, *ordering),
            })
        }
        ContractSpec::LendingMarket { pool, oracle, ltv, .. } => {
            Arc::new(fixtures::LendingMarket { pool: addr(pool)?, oracle: addr(oracle)?, ltv: ltv.0 })
        }
        ContractSpec::FlashLender { .. } => Arc::new(fixtures::FlashLender),
        ContractSpec::EtherBank { role, send_kind, ordering } => {
            Arc::new(fixtures::EtherBank { send_kind: *send_kind, ordering: ordering_for(guards, role, *ordering) })
        }
        ContractSpec::CollateralVault { collateral, debt_token, oracle, ltv, .. } => {
            Arc::new(fixtures::CollateralVault {
                collateral: addr(collateral)?,
                debt_token: addr(debt_token)?,
                oracle: addr(oracle)?,
                ltv: ltv.0,
            })
        }
        ContractSpec::RewardFarm { stake, reward, reward_per_token, .. } => Arc::new(fixtures::RewardFarm {
            stake: addr(stake)?,
            reward: addr(reward)?,
            reward_per_token: reward_per_token.0,
        }),
        ContractSpec::Attacker { scripts, fallback, max_fallback_runs, fallback_cost, accepts_token_hook, .. } => {
            let mut resolved = BTreeMap::new();
            for (name, steps) in scripts {
                let steps = steps.iter().map(|s| s.map_address(&|r: &String| addr(r))).collect::<Result<_, _>>()?;
                resolved.insert(name.clone(), steps);
            }
            Arc::new(Attacker {
                scripts: resolved,
                fallback: fallback.iter().map(|s| s.map_address(&|r: &String| addr(r))).collect::<Result<_, _>>()?,
                max_fallback_runs: *max_fallback_runs,
                fallback_cost: *fallback_cost,
                accepts_token_hook: *accepts_token_hook,
            })
        }
    })
}

/// Resolves the configuration's bindings for the contracts this scenario has.
/// Bindings on absent roles are skipped.
fn resolve_bindings(
    world: &mut World,
    guards: &GuardConfiguration,
    roles: &BTreeMap<String, Address>,
    code: &BTreeMap<String, Arc<dyn Contract>>,
) -> Result<BTreeMap<String, BTreeMap<String, Vec<GuardBinding>>>, ScenarioError> {
    let invalid = |msg: String| ScenarioError::Invalid { id: guards.id.clone(), msg };
    let mut out: BTreeMap<String, BTreeMap<String, Vec<GuardBinding>>> = BTreeMap::new();
    let mut keys_used: BTreeSet<String> = BTreeSet::new();
    for b in &guards.bindings {
        let Some(contract) = code.get(&b.contract) else { continue };
        for f in &b.functions {
            let view = contract.is_view(f);
            let binding = match &b.guard {
                GuardSpec::Mutex { key } | GuardSpec::ViewCheck { key } => {
                    let decl = guards.key(key).ok_or_else(|| invalid(format!("undeclared key {key:?}")))?;
                    keys_used.insert(key.clone());
                    let gk = match decl {
                        KeyDecl::Contract { owner, .. } => GuardKey::contract(key, roles[owner]),
                        KeyDecl::System { .. } => GuardKey::system(key, key),
                    };
                    if matches!(b.guard, GuardSpec::Mutex { .. }) {
                        GuardBinding::Mutex(gk)
                    } else {
                        GuardBinding::ViewCheck(gk)
                    }
                }
                GuardSpec::OncePerTx(p) => GuardBinding::OncePerTx(p.clone()),
                GuardSpec::Duration(d) => GuardBinding::Duration(d.clone()),
            };
            match (&binding, view) {
                (GuardBinding::ViewCheck(_), false) => {
                    return Err(invalid(format!("view check on {}.{f}, which is not read-only", b.contract)))
                }
                (b2, true) if b2.writes_state() => {
                    return Err(invalid(format!(
                        "{} guard on read-only {}.{f} would write state",
                        b2.kind().label(),
                        b.contract
                    )))
                }
                _ => {}
            }
            out.entry(b.contract.clone()).or_default().entry(f.clone()).or_default().push(binding);
        }
    }
    for name in keys_used {
        let (account, slot) = match guards.key(&name).expect("checked above") {
            KeyDecl::Contract { owner, .. } => (roles[owner], GuardKey::contract(&name, roles[owner]).slot),
            KeyDecl::System { allow, .. } => {
                let allowed: Vec<Address> = allow.iter().filter_map(|r| roles.get(r).copied()).collect();
                (world.register_system_scope(&name, allowed), GuardKey::system(&name, &name).slot)
            }
        };
        world.set_storage(account, slot, MutexWord::NotEntered.word());
    }
    Ok(out)
}

/// Builds a fresh world: deploys contracts (wrapped with their guards),
/// funds accounts, seeds pools, rates and allowances.
pub fn build(
    scenario: &Scenario,
    guards: &GuardConfiguration,
    profile: &ChainProfile,
) -> Result<Deployment, ScenarioError> {
    scenario.validate()?;
    guards.validate()?;
    profile.gas_schedule.validate().map_err(|e| setup_err(e.to_string()))?;
    let roles: BTreeMap<String, Address> =
        scenario.roles().into_iter().map(|r| (r.to_string(), Address::from_label(r))).collect();
    let mut world = World::new(profile.clone(), BlockContext::default());

    let mut code: BTreeMap<String, Arc<dyn Contract>> = BTreeMap::new();
    for t in &scenario.setup.tokens {
        let token = fixtures::Token { symbol: t.symbol.clone(), wrapped_native: t.wrapped_native, hook: t.hook };
        code.insert(t.role.clone(), Arc::new(token));
    }
    for c in &scenario.setup.contracts {
        code.insert(c.role().to_string(), make_contract(c, guards, &roles)?);
    }
    let mut bindings = resolve_bindings(&mut world, guards, &roles, &code)?;
    for (role, contract) in code {
        let contract = match bindings.remove(&role) {
            Some(b) => Arc::new(Guarded::new(contract, b)) as Arc<dyn Contract>,
            None => contract,
        };
        world.deploy(roles[&role], contract);
    }

    let wrapped: BTreeSet<&str> =
        scenario.setup.tokens.iter().filter(|t| t.wrapped_native).map(|t| t.role.as_str()).collect();
    let credit = |world: &mut World, token: &str, holder: Address, amount: Word| {
        erc20::seed(world, roles[token], holder, amount);
        if wrapped.contains(token) {
            world.mint_native(roles[token], amount);
        }
    };
    for g in &scenario.setup.native {
        world.mint_native(roles[&g.holder], g.amount.0);
    }
    for c in &scenario.setup.contracts {
        match c {
            ContractSpec::WeightedPool { role, tokens, balances, supply, lp, .. } => {
                for (t, b) in tokens.iter().zip(balances) {
                    credit(&mut world, t, roles[role], b.0);
                }
                for (i, b) in balances.iter().enumerate() {
                    world.set_storage(roles[role], pool::cached_slot(i), b.0);
                }
                erc20::seed(&mut world, roles[role], roles[lp], supply.0);
            }
            ContractSpec::RateOracle { role, rates } => {
                for (token, rate) in resolve_rates(scenario, rates)? {
                    oracle::seed_rate(&mut world, roles[role], roles[&token], rate);
                }
            }
            _ => {}
        }
    }
    for h in &scenario.setup.holdings {
        credit(&mut world, &h.token, roles[&h.holder], h.amount.0);
    }
    for a in &scenario.setup.approvals {
        let amount = a.amount.map(|x| x.0).unwrap_or(Word::MAX);
        erc20::seed_allowance(&mut world, roles[&a.token], roles[&a.owner], roles[&a.spender], amount);
    }
    world.take_trace();

    let mut assets = vec![Asset { name: NATIVE_SYMBOL.to_string(), token: None }];
    for t in &scenario.setup.tokens {
        assets.push(Asset { name: t.symbol.clone(), token: Some(roles[&t.role]) });
    }
    for c in &scenario.setup.contracts {
        if let ContractSpec::WeightedPool { role, symbol, .. } = c {
            assets.push(Asset { name: symbol.clone(), token: Some(roles[role]) });
        }
    }
    let mut seen = BTreeSet::new();
    for a in &mut assets {
        if !seen.insert(a.name.clone()) {
            a.name = format!("{}:{}", a.name, a.token.map(|t| t.to_string()).unwrap_or_default());
        }
    }
    Ok(Deployment { world, roles, assets })
}
