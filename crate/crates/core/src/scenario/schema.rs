//! Scenario and guard-configuration file formats (JSON, versioned).
//!
//! Contracts, tokens and accounts are named by role; roles become addresses
//! only when a world is built. Amounts are decimal strings in whole tokens.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::engine::CallKind;
use crate::fixtures::{Arg, Ordering, Step};
use crate::guards::{DurationGuard, GuardKind, ProbeConfig};
use crate::types::Amount;

use super::ScenarioError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Attack,
    /// Ordinary use of the same contracts; must never be blocked.
    Honest,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    pub id: String,
    #[serde(default)]
    pub title: String,
    pub kind: ScenarioKind,
    /// For honest scenarios, the attack this one mirrors.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub twin_of: Option<String>,
    pub setup: Setup,
    pub transactions: Vec<TransactionSpec>,
    /// Roles whose combined holdings define profit.
    pub beneficiaries: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Setup {
    /// Externally owned accounts.
    #[serde(default)]
    pub accounts: Vec<String>,
    #[serde(default)]
    pub tokens: Vec<TokenSpec>,
    #[serde(default)]
    pub contracts: Vec<ContractSpec>,
    #[serde(default)]
    pub native: Vec<NativeGrant>,
    #[serde(default)]
    pub holdings: Vec<Holding>,
    #[serde(default)]
    pub approvals: Vec<Approval>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TokenSpec {
    pub role: String,
    pub symbol: String,
    #[serde(default)]
    pub wrapped_native: bool,
    #[serde(default)]
    pub hook: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NativeGrant {
    pub holder: String,
    pub amount: Amount,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Holding {
    pub holder: String,
    pub token: String,
    pub amount: Amount,
}

/// Allowance granted before the first transaction; unlimited by default.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Approval {
    pub owner: String,
    pub token: String,
    pub spender: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amount: Option<Amount>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateSource {
    Fixed(Amount),
    /// Derived so the pool's tokens without a fixed rate split the
    /// remaining value equally and the pool prices at exactly `price`.
    PoolSplit {
        pool: String,
        price: Amount,
    },
    SameAs(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateEntry {
    pub token: String,
    pub rate: RateSource,
}

fn default_ltv() -> Amount {
    "0.8".parse().expect("valid literal")
}

fn default_bpt_symbol() -> String {
    "BPT".to_string()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ContractSpec {
    RateOracle {
        role: String,
        rates: Vec<RateEntry>,
    },
    WeightedPool {
        role: String,
        #[serde(default = "default_bpt_symbol")]
        symbol: String,
        tokens: Vec<String>,
        oracle: String,
        /// Which of `tokens` is wrapped native and may be unwrapped on exit.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        weth: Option<String>,
        balances: Vec<Amount>,
        supply: Amount,
        /// Holder of the initial share supply.
        lp: String,
        #[serde(default)]
        fee: Amount,
        #[serde(default)]
        ordering: Ordering,
    },
    LendingMarket {
        role: String,
        pool: String,
        oracle: String,
        #[serde(default = "default_ltv")]
        ltv: Amount,
    },
    FlashLender {
        role: String,
    },
    EtherBank {
        role: String,
        #[serde(default)]
        send_kind: CallKind,
        #[serde(default)]
        ordering: Ordering,
    },
    CollateralVault {
        role: String,
        collateral: String,
        debt_token: String,
        oracle: String,
        #[serde(default = "default_ltv")]
        ltv: Amount,
    },
    RewardFarm {
        role: String,
        stake: String,
        reward: String,
        reward_per_token: Amount,
    },
    Attacker {
        role: String,
        #[serde(default)]
        scripts: BTreeMap<String, Vec<Step<String>>>,
        #[serde(default)]
        fallback: Vec<Step<String>>,
        #[serde(default)]
        max_fallback_runs: u32,
        #[serde(default)]
        fallback_cost: u64,
        #[serde(default)]
        accepts_token_hook: bool,
    },
}

impl ContractSpec {
    pub fn role(&self) -> &str {
        match self {
            ContractSpec::RateOracle { role, .. }
            | ContractSpec::WeightedPool { role, .. }
            | ContractSpec::LendingMarket { role, .. }
            | ContractSpec::FlashLender { role }
            | ContractSpec::EtherBank { role, .. }
            | ContractSpec::CollateralVault { role, .. }
            | ContractSpec::RewardFarm { role, .. }
            | ContractSpec::Attacker { role, .. } => role,
        }
    }

    /// Every role this contract refers to.
    fn references(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        match self {
            ContractSpec::RateOracle { rates, .. } => {
                for r in rates {
                    out.push(&r.token);
                    match &r.rate {
                        RateSource::PoolSplit { pool, .. } => out.push(pool),
                        RateSource::SameAs(t) => out.push(t),
                        RateSource::Fixed(_) => {}
                    }
                }
            }
            ContractSpec::WeightedPool { tokens, oracle, weth, lp, .. } => {
                out.extend(tokens.iter().map(String::as_str));
                out.push(oracle);
                out.extend(weth.as_deref());
                out.push(lp);
            }
            ContractSpec::LendingMarket { pool, oracle, .. } => out.extend([pool.as_str(), oracle.as_str()]),
            ContractSpec::FlashLender { .. } | ContractSpec::EtherBank { .. } => {}
            ContractSpec::CollateralVault { collateral, debt_token, oracle, .. } => {
                out.extend([collateral.as_str(), debt_token.as_str(), oracle.as_str()])
            }
            ContractSpec::RewardFarm { stake, reward, .. } => out.extend([stake.as_str(), reward.as_str()]),
            ContractSpec::Attacker { scripts, fallback, .. } => {
                for step in scripts.values().flatten().chain(fallback) {
                    step_refs(step, &mut out);
                }
            }
        }
        out
    }
}

fn arg_refs<'a>(arg: &'a Arg<String>, out: &mut Vec<&'a str>) {
    match arg {
        Arg::Address(a) => out.push(a),
        Arg::BalanceOf { token, holder } => {
            out.push(token);
            out.extend(holder.as_deref());
        }
        _ => {}
    }
}

fn step_refs<'a>(step: &'a Step<String>, out: &mut Vec<&'a str>) {
    out.push(&step.to);
    for a in step.args.iter().chain(step.value.as_ref()) {
        arg_refs(a, out);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Advance {
    Seconds(u64),
    Blocks(u64),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransactionSpec {
    #[serde(default)]
    pub label: String,
    pub from: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub advance_before: Option<Advance>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gas_limit: Option<u64>,
    pub calls: Vec<CallSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CallSpec {
    pub to: String,
    pub function: String,
    /// Constant arguments only: amounts, raw integers, booleans, roles.
    #[serde(default)]
    pub args: Vec<Arg<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<Amount>,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| ScenarioError::Schema(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// Every role declared in setup, in declaration order.
    pub fn roles(&self) -> Vec<&str> {
        let s = &self.setup;
        s.accounts
            .iter()
            .map(String::as_str)
            .chain(s.tokens.iter().map(|t| t.role.as_str()))
            .chain(s.contracts.iter().map(ContractSpec::role))
            .collect()
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let invalid = |msg: String| Err(ScenarioError::Invalid { id: self.id.clone(), msg });
        if self.schema_version != SCHEMA_VERSION {
            return invalid(format!("unsupported schema_version {} (expected {SCHEMA_VERSION})", self.schema_version));
        }
        if self.id.trim().is_empty() {
            return invalid("empty scenario id".into());
        }
        let mut declared = BTreeSet::new();
        for r in self.roles() {
            if !declared.insert(r) {
                return invalid(format!("role {r:?} declared twice"));
            }
        }
        let check = |r: &str, what: &str| -> Result<(), ScenarioError> {
            if declared.contains(r) {
                Ok(())
            } else {
                Err(ScenarioError::Invalid {
                    id: self.id.clone(),
                    msg: format!("{what} refers to undeclared role {r:?}"),
                })
            }
        };
        let tokens: BTreeSet<&str> = self.setup.tokens.iter().map(|t| t.role.as_str()).collect();
        let pools: BTreeSet<&str> = self
            .setup
            .contracts
            .iter()
            .filter(|c| matches!(c, ContractSpec::WeightedPool { .. }))
            .map(ContractSpec::role)
            .collect();
        let is_token = |r: &str| tokens.contains(r) || pools.contains(r);
        for c in &self.setup.contracts {
            for r in c.references() {
                check(r, &format!("contract {:?}", c.role()))?;
            }
            if let ContractSpec::WeightedPool { tokens: pt, balances, weth, supply, .. } = c {
                if pt.is_empty() || pt.len() > crate::fixtures::pool::MAX_TOKENS {
                    return invalid(format!("pool {:?} must hold 1 to 4 tokens", c.role()));
                }
                if pt.len() != balances.len() {
                    return invalid(format!("pool {:?} needs one balance per token", c.role()));
                }
                if balances.iter().any(|b| b.0.is_zero()) || supply.0.is_zero() {
                    return invalid(format!("pool {:?} needs positive balances and supply", c.role()));
                }
                if let Some(w) = weth {
                    if !pt.contains(w) {
                        return invalid(format!("pool {:?}: weth {w:?} is not one of its tokens", c.role()));
                    }
                }
            }
        }
        for g in &self.setup.native {
            check(&g.holder, "native grant")?;
        }
        for h in &self.setup.holdings {
            check(&h.holder, "holding")?;
            if !is_token(&h.token) {
                return invalid(format!("holding refers to {:?}, which is not a token", h.token));
            }
        }
        for a in &self.setup.approvals {
            check(&a.owner, "approval")?;
            check(&a.spender, "approval")?;
            if !is_token(&a.token) {
                return invalid(format!("approval refers to {:?}, which is not a token", a.token));
            }
        }
        if self.transactions.is_empty() {
            return invalid("no transactions".into());
        }
        for (i, tx) in self.transactions.iter().enumerate() {
            check(&tx.from, &format!("transaction {i}"))?;
            if !self.setup.accounts.contains(&tx.from) {
                return invalid(format!("transaction {i} is sent by {:?}, which is not an account", tx.from));
            }
            if tx.calls.is_empty() {
                return invalid(format!("transaction {i} has no calls"));
            }
            if matches!(tx.advance_before, Some(Advance::Seconds(0)) | Some(Advance::Blocks(0))) {
                return invalid(format!("transaction {i} advances by zero"));
            }
            for call in &tx.calls {
                check(&call.to, &format!("transaction {i}"))?;
                for a in &call.args {
                    match a {
                        Arg::Address(r) => check(r, &format!("transaction {i}"))?,
                        Arg::Amount(_) | Arg::Raw(_) | Arg::Bool(_) => {}
                        _ => return invalid(format!("transaction {i}: top-level arguments must be constants")),
                    }
                }
            }
        }
        if self.beneficiaries.is_empty() {
            return invalid("no beneficiaries".into());
        }
        for b in &self.beneficiaries {
            check(b, "beneficiary")?;
        }
        Ok(())
    }
}

/// Where a mutex word lives.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "scope", rename_all = "snake_case")]
pub enum KeyDecl {
    /// In the storage of `owner`, usable only by `owner`'s functions.
    Contract { name: String, owner: String },
    /// In a shared system account that only `allow` may flip.
    System { name: String, allow: Vec<String> },
}

impl KeyDecl {
    pub fn name(&self) -> &str {
        match self {
            KeyDecl::Contract { name, .. } | KeyDecl::System { name, .. } => name,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum GuardSpec {
    Mutex { key: String },
    ViewCheck { key: String },
    OncePerTx(ProbeConfig),
    Duration(DurationGuard),
}

impl GuardSpec {
    pub fn kind(&self) -> GuardKind {
        match self {
            GuardSpec::Mutex { .. } => GuardKind::Mutex,
            GuardSpec::ViewCheck { .. } => GuardKind::ViewCheck,
            GuardSpec::OncePerTx(_) => GuardKind::OncePerTx,
            GuardSpec::Duration(_) => GuardKind::Duration,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BindingDecl {
    pub contract: String,
    pub functions: Vec<String>,
    pub guard: GuardSpec,
}

/// Replaces a fixture's update ordering, for design-pattern fixes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatternOverride {
    pub contract: String,
    pub ordering: Ordering,
}

/// Restrictiveness class of a guard configuration, least restrictive first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GuardClass {
    None,
    /// Only design-pattern overrides, no runtime guards.
    Pattern,
    Mutex,
    OncePerTx,
    Duration,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GuardConfiguration {
    pub schema_version: u32,
    pub id: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub keys: Vec<KeyDecl>,
    #[serde(default)]
    pub bindings: Vec<BindingDecl>,
    #[serde(default)]
    pub patterns: Vec<PatternOverride>,
}

impl GuardConfiguration {
    pub fn none() -> Self {
        GuardConfiguration {
            schema_version: SCHEMA_VERSION,
            id: "none".into(),
            description: "no guards".into(),
            keys: vec![],
            bindings: vec![],
            patterns: vec![],
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let g: GuardConfiguration = serde_json::from_str(text).map_err(|e| ScenarioError::Schema(e.to_string()))?;
        g.validate()?;
        Ok(g)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("guard configuration serializes")
    }

    /// The most restrictive guard kind present.
    pub fn class(&self) -> GuardClass {
        let kinds: BTreeSet<GuardKind> = self.bindings.iter().map(|b| b.guard.kind()).collect();
        if kinds.contains(&GuardKind::Duration) {
            GuardClass::Duration
        } else if kinds.contains(&GuardKind::OncePerTx) {
            GuardClass::OncePerTx
        } else if !kinds.is_empty() {
            GuardClass::Mutex
        } else if !self.patterns.is_empty() {
            GuardClass::Pattern
        } else {
            GuardClass::None
        }
    }

    pub fn key(&self, name: &str) -> Option<&KeyDecl> {
        self.keys.iter().find(|k| k.name() == name)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let invalid = |msg: String| Err(ScenarioError::Invalid { id: self.id.clone(), msg });
        if self.schema_version != SCHEMA_VERSION {
            return invalid(format!("unsupported schema_version {} (expected {SCHEMA_VERSION})", self.schema_version));
        }
        let mut names = BTreeSet::new();
        for k in &self.keys {
            if !names.insert(k.name()) {
                return invalid(format!("key {:?} declared twice", k.name()));
            }
        }
        for b in &self.bindings {
            if b.functions.is_empty() {
                return invalid(format!("binding on {:?} lists no functions", b.contract));
            }
            match &b.guard {
                GuardSpec::Mutex { key } | GuardSpec::ViewCheck { key } => match self.key(key) {
                    None => return invalid(format!("binding on {:?} uses undeclared key {key:?}", b.contract)),
                    Some(KeyDecl::Contract { owner, .. }) if owner != &b.contract => {
                        return invalid(format!("key {key:?} belongs to {owner:?} and cannot guard {:?}", b.contract))
                    }
                    Some(KeyDecl::System { allow, .. })
                        if matches!(b.guard, GuardSpec::Mutex { .. }) && !allow.contains(&b.contract) =>
                    {
                        return invalid(format!("{:?} is not on the allow-list of system key {key:?}", b.contract))
                    }
                    _ => {}
                },
                GuardSpec::OncePerTx(p) => {
                    if p.max_calls_per_tx == 0 {
                        return invalid(format!("probe {:?} allows zero calls", p.probe));
                    }
                }
                GuardSpec::Duration(d) => {
                    if d.delta == 0 {
                        return invalid(format!("duration guard {:?} has zero delta", d.key));
                    }
                }
            }
        }
        Ok(())
    }
}
