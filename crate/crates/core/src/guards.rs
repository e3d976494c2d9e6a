//! Access-restriction guards: the reentrancy mutex (per function set or
//! shared system-wide), the read-only view check, the once-per-transaction
//! gas probe, and the duration guard.
//!
//! All guard state lives in world storage, so a reverted guarded call rolls
//! its guard state back along with everything else.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::engine::{Calldata, Contract, Env, Revert, RevertCause};
use crate::trace::{GuardCheck, TraceEvent};
use crate::types::{digest, mapping_slot, slot, Address, Word};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GuardKind {
    Mutex,
    OncePerTx,
    Duration,
    ViewCheck,
}

impl GuardKind {
    pub fn label(self) -> &'static str {
        match self {
            GuardKind::Mutex => "mutex",
            GuardKind::OncePerTx => "once-per-tx",
            GuardKind::Duration => "duration",
            GuardKind::ViewCheck => "view-check",
        }
    }
}

/// Which guard stopped a call, and where.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GuardHit {
    pub kind: GuardKind,
    pub key: String,
    pub contract: Address,
    pub function: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeyScope {
    /// Word lives in the guarded contract's own storage.
    Contract(Address),
    /// Word lives in a registered system scope shared by several contracts.
    System(String),
}

/// One mutex word; every function bound to the same key shares it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GuardKey {
    pub name: String,
    pub scope: KeyScope,
    pub slot: Word,
}

impl GuardKey {
    pub fn contract(name: &str, owner: Address) -> Self {
        GuardKey {
            name: name.to_string(),
            scope: KeyScope::Contract(owner),
            slot: slot(&format!("guard.mutex/{name}")),
        }
    }

    pub fn system(name: &str, system_id: &str) -> Self {
        GuardKey {
            name: name.to_string(),
            scope: KeyScope::System(system_id.to_string()),
            slot: slot(&format!("guard.mutex/{name}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[repr(u8)]
pub enum MutexWord {
    NotEntered = 1,
    Entered = 2,
}

impl MutexWord {
    pub fn word(self) -> Word {
        Word::from(self as u8)
    }

    /// Unset storage reads as zero and counts as not entered.
    pub fn from_word(w: Word) -> Self {
        if w == MutexWord::Entered.word() {
            MutexWord::Entered
        } else {
            MutexWord::NotEntered
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DurationMode {
    #[default]
    Timestamp,
    BlockNumber,
}

/// Whose entries a per-actor guard tracks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Keying {
    /// The direct caller (`msg.sender`).
    #[default]
    Sender,
    /// The transaction origin.
    Origin,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DurationGuard {
    pub key: String,
    #[serde(default)]
    pub mode: DurationMode,
    /// Seconds or blocks, depending on `mode`.
    #[serde(default = "default_delta")]
    pub delta: u64,
    #[serde(default)]
    pub keying: Keying,
}

fn default_delta() -> u64 {
    60
}

impl DurationGuard {
    pub fn new(key: &str) -> Self {
        DurationGuard {
            key: key.to_string(),
            mode: DurationMode::Timestamp,
            delta: default_delta(),
            keying: Keying::Sender,
        }
    }

    pub fn entry_slot(&self, who: Address) -> Word {
        mapping_slot(&format!("guard.latest_entry/{}", self.key), &who.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeConfig {
    /// Functions sharing a probe name share one per-transaction budget.
    pub probe: String,
    /// Per-actor mode mixes the sender (or origin) into the probe address.
    #[serde(default)]
    pub per_actor: Option<Keying>,
    #[serde(default = "default_max_calls")]
    pub max_calls_per_tx: u32,
}

fn default_max_calls() -> u32 {
    1
}

impl ProbeConfig {
    pub fn new(probe: &str) -> Self {
        ProbeConfig { probe: probe.to_string(), per_actor: None, max_calls_per_tx: 1 }
    }
}

/// Address whose balance the probe reads for call slot `k` of the current block.
pub fn probe_address(blockhash: &[u8; 32], probe: &str, actor: Option<Address>, k: u32) -> Address {
    let actor_bytes = actor.map(|a| a.0.to_vec()).unwrap_or_default();
    let h = digest(&[b"probe", blockhash, probe.as_bytes(), &actor_bytes, &k.to_be_bytes()]);
    let mut out = [0u8; 20];
    out.copy_from_slice(&h[..20]);
    Address(out)
}

fn hit(env: &Env<'_>, kind: GuardKind, key: &str) -> GuardHit {
    GuardHit { kind, key: key.to_string(), contract: env.this(), function: env.function().to_string() }
}

fn guard_revert(env: &Env<'_>, kind: GuardKind, key: &str, reason: &str) -> Revert {
    env.revert_with(RevertCause::Guard(hit(env, kind, key)), reason)
}

fn emit(env: &mut Env<'_>, kind: GuardKind, key: &str, check: GuardCheck, passed: bool) {
    let event = TraceEvent::Guard {
        depth: env.depth(),
        contract: env.this(),
        function: env.function().to_string(),
        kind,
        key: key.to_string(),
        check,
        passed,
    };
    env.emit(event);
}

/// Account holding `key`'s word. With `flip`, also enforces the system allow-list.
fn key_account(env: &Env<'_>, key: &GuardKey, kind: GuardKind, flip: bool) -> Result<Address, Revert> {
    match &key.scope {
        KeyScope::Contract(a) => Ok(*a),
        KeyScope::System(id) => {
            let scope = env.world().system_scope(id).map_err(|e| guard_revert(env, kind, &key.name, &e.to_string()))?;
            if flip && !scope.allow.contains(&env.this()) {
                return Err(guard_revert(env, kind, &key.name, "contract not allowed to flip system guard"));
            }
            Ok(scope.address)
        }
    }
}

pub fn mutex_state(env: &mut Env<'_>, key: &GuardKey) -> Result<MutexWord, Revert> {
    let account = key_account(env, key, GuardKind::Mutex, false)?;
    Ok(MutexWord::from_word(env.sload_at(account, key.slot)?))
}

pub fn mutex_enter(env: &mut Env<'_>, key: &GuardKey) -> Result<(), Revert> {
    let account = key_account(env, key, GuardKind::Mutex, true)?;
    let state = MutexWord::from_word(env.sload_at(account, key.slot)?);
    if state == MutexWord::Entered {
        emit(env, GuardKind::Mutex, &key.name, GuardCheck::MutexEnter, false);
        return Err(guard_revert(env, GuardKind::Mutex, &key.name, "ReentrancyGuard: reentrant call"));
    }
    env.sstore_at(account, key.slot, MutexWord::Entered.word())?;
    emit(env, GuardKind::Mutex, &key.name, GuardCheck::MutexEnter, true);
    Ok(())
}

pub fn mutex_exit(env: &mut Env<'_>, key: &GuardKey) -> Result<(), Revert> {
    let account = key_account(env, key, GuardKind::Mutex, true)?;
    let state = MutexWord::from_word(env.sload_at(account, key.slot)?);
    if state != MutexWord::Entered {
        emit(env, GuardKind::Mutex, &key.name, GuardCheck::MutexExit, false);
        return Err(guard_revert(env, GuardKind::Mutex, &key.name, "ReentrancyGuard: exit without enter"));
    }
    env.sstore_at(account, key.slot, MutexWord::NotEntered.word())?;
    emit(env, GuardKind::Mutex, &key.name, GuardCheck::MutexExit, true);
    Ok(())
}

/// Read-only reentrancy check: fails while `key` is held. Never writes, so it
/// is legal under a static call.
pub fn view_guard_check(env: &mut Env<'_>, key: &GuardKey) -> Result<(), Revert> {
    let account = key_account(env, key, GuardKind::ViewCheck, false)?;
    let state = MutexWord::from_word(env.sload_at(account, key.slot)?);
    let passed = state != MutexWord::Entered;
    emit(env, GuardKind::ViewCheck, &key.name, GuardCheck::ViewCheck, passed);
    if passed {
        Ok(())
    } else {
        Err(guard_revert(env, GuardKind::ViewCheck, &key.name, "ReentrancyGuard: reentrant view"))
    }
}

/// Once-per-transaction guard. Reads the balance of a pseudo-random address
/// derived from the block hash and measures the gas that read consumed: only
/// a cold (first-in-transaction) read costs `cold + overhead`. With
/// `max_calls_per_tx > 1` the guard walks a deterministic sequence of probe
/// addresses and passes on the first cold one.
pub fn once_per_tx_enter(env: &mut Env<'_>, cfg: &ProbeConfig) -> Result<(), Revert> {
    let schedule = env.gas_schedule();
    let expected = schedule.expected_probe_gas();
    let blockhash = env.blockhash(env.block_number());
    let actor = cfg.per_actor.map(|k| match k {
        Keying::Sender => env.caller(),
        Keying::Origin => env.origin(),
    });
    for k in 0..cfg.max_calls_per_tx.max(1) {
        let probe = probe_address(&blockhash, &cfg.probe, actor, k);
        let initial = env.gasleft()?;
        env.charge(schedule.probe_overhead - schedule.base_op)?;
        env.balance_of(probe)?;
        let measured = initial - env.gasleft()?;
        let passed = measured == expected;
        emit(env, GuardKind::OncePerTx, &cfg.probe, GuardCheck::Probe { probe, measured, expected }, passed);
        if passed {
            return Ok(());
        }
    }
    Err(guard_revert(env, GuardKind::OncePerTx, &cfg.probe, "already called in this transaction"))
}

/// Duration guard: each actor may enter at most once per `delta` seconds or blocks.
pub fn duration_enter(env: &mut Env<'_>, g: &DurationGuard) -> Result<(), Revert> {
    let who = match g.keying {
        Keying::Sender => env.caller(),
        Keying::Origin => env.origin(),
    };
    let now = match g.mode {
        DurationMode::Timestamp => env.timestamp(),
        DurationMode::BlockNumber => env.block_number(),
    };
    let entry_slot = g.entry_slot(who);
    let last: u64 = env.sload(entry_slot)?.saturating_to();
    let passed = last.saturating_add(g.delta) <= now;
    emit(env, GuardKind::Duration, &g.key, GuardCheck::Duration { last_entry: last, delta: g.delta, now }, passed);
    if !passed {
        return Err(guard_revert(env, GuardKind::Duration, &g.key, "Called again too soon"));
    }
    env.sstore(entry_slot, Word::from(now))
}

/// A guard attached to a function.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GuardBinding {
    Mutex(GuardKey),
    ViewCheck(GuardKey),
    OncePerTx(ProbeConfig),
    Duration(DurationGuard),
}

impl GuardBinding {
    pub fn kind(&self) -> GuardKind {
        match self {
            GuardBinding::Mutex(_) => GuardKind::Mutex,
            GuardBinding::ViewCheck(_) => GuardKind::ViewCheck,
            GuardBinding::OncePerTx(_) => GuardKind::OncePerTx,
            GuardBinding::Duration(_) => GuardKind::Duration,
        }
    }

    /// Whether entering this guard writes storage.
    pub fn writes_state(&self) -> bool {
        matches!(self, GuardBinding::Mutex(_) | GuardBinding::Duration(_))
    }

    fn enter(&self, env: &mut Env<'_>) -> Result<(), Revert> {
        match self {
            GuardBinding::Mutex(k) => mutex_enter(env, k),
            GuardBinding::ViewCheck(k) => view_guard_check(env, k),
            GuardBinding::OncePerTx(c) => once_per_tx_enter(env, c),
            GuardBinding::Duration(g) => duration_enter(env, g),
        }
    }

    fn exit(&self, env: &mut Env<'_>) -> Result<(), Revert> {
        match self {
            GuardBinding::Mutex(k) => mutex_exit(env, k),
            _ => Ok(()),
        }
    }
}

/// Wraps a contract so that the bound guards run around each function, the
/// way a modifier wraps a function body.
pub struct Guarded {
    inner: Arc<dyn Contract>,
    bindings: BTreeMap<String, Vec<GuardBinding>>,
}

impl Guarded {
    pub fn new(inner: Arc<dyn Contract>, bindings: BTreeMap<String, Vec<GuardBinding>>) -> Self {
        Guarded { inner, bindings }
    }

    pub fn bindings(&self) -> &BTreeMap<String, Vec<GuardBinding>> {
        &self.bindings
    }
}

impl Contract for Guarded {
    fn kind(&self) -> &str {
        self.inner.kind()
    }

    fn entry_cost(&self, input: &Calldata) -> u64 {
        self.inner.entry_cost(input)
    }

    fn execute(&self, env: &mut Env<'_>, input: &Calldata) -> Result<Vec<Word>, Revert> {
        let bindings = self.bindings.get(&input.function).map(Vec::as_slice).unwrap_or(&[]);
        for b in bindings {
            b.enter(env)?;
        }
        let out = self.inner.execute(env, input)?;
        for b in bindings.iter().rev() {
            b.exit(env)?;
        }
        Ok(out)
    }

    fn is_view(&self, function: &str) -> bool {
        self.inner.is_view(function)
    }

    fn accepts_token_hook(&self) -> bool {
        self.inner.accepts_token_hook()
    }
}
