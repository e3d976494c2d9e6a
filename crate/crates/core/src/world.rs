//! Chain state: accounts, storage, block and transaction context, warm-access
//! sets, and journal-backed snapshots.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::{BlockNumberMode, ChainProfile, TimestampMode};
use crate::engine::Contract;
use crate::trace::TraceEvent;
use crate::types::{digest, Address, Word};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WorldError {
    #[error("a transaction is already open")]
    TransactionOpen,
    #[error("no transaction is open")]
    NoTransaction,
    #[error("advancement must be at least 1")]
    ZeroAdvance,
    #[error("unknown or expired snapshot {0}")]
    UnknownSnapshot(u64),
    #[error("insufficient balance in {account}: have {have}, need {need}")]
    InsufficientBalance { account: Address, have: Word, need: Word },
    #[error("transaction gas limit exceeded")]
    GasLimitExceeded,
    #[error("unknown system guard scope {0:?}")]
    UnknownSystemScope(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AccessKind {
    Cold,
    Warm,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccountState {
    pub balance: Word,
    pub storage: BTreeMap<Word, Word>,
    /// Kind of the native handler deployed at this account, if any.
    pub handler: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockContext {
    pub number: u64,
    pub timestamp: u64,
}

impl Default for BlockContext {
    fn default() -> Self {
        BlockContext { number: 1_000_000, timestamp: 1_700_000_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransactionContext {
    pub origin: Address,
    pub gas_limit: u64,
    pub gas_used: u64,
    pub warm_addresses: BTreeSet<Address>,
    pub warm_slots: BTreeSet<(Address, Word)>,
    pub tx_index_in_block: u64,
}

/// Handle to a captured state version.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Snapshot {
    pub version: u64,
}

/// Contracts sharing a system-level guard key, with the contracts allowed to flip it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SystemScope {
    pub address: Address,
    pub allow: BTreeSet<Address>,
}

#[derive(Debug, Clone)]
enum JournalEntry {
    AccountCreated(Address),
    Balance { account: Address, prev: Word },
    Storage { account: Address, slot: Word, prev: Option<Word> },
    WarmAddress(Address),
    WarmSlot(Address, Word),
}

/// Serializable image of everything a snapshot must restore.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StateImage {
    pub accounts: Vec<(Address, AccountState)>,
    pub warm_addresses: Vec<Address>,
    pub warm_slots: Vec<(Address, Word)>,
}

#[derive(Clone)]
pub struct World {
    profile: ChainProfile,
    accounts: BTreeMap<Address, AccountState>,
    code: BTreeMap<Address, Arc<dyn Contract>>,
    block: BlockContext,
    txs_in_block: u64,
    txs_in_batch: u64,
    tx: Option<TransactionContext>,
    tx_serial: u64,
    journal: Vec<JournalEntry>,
    snapshots: Vec<(u64, usize)>,
    next_snapshot: u64,
    trace: Vec<TraceEvent>,
    system_scopes: BTreeMap<String, SystemScope>,
    query_mark: Option<(Snapshot, usize)>,
}

impl fmt::Debug for World {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("World")
            .field("profile", &self.profile.name)
            .field("block", &self.block)
            .field("accounts", &self.accounts.len())
            .field("tx_open", &self.tx.is_some())
            .finish()
    }
}

impl World {
    pub fn new(profile: ChainProfile, genesis: BlockContext) -> Self {
        World {
            profile,
            accounts: BTreeMap::new(),
            code: BTreeMap::new(),
            block: genesis,
            txs_in_block: 0,
            txs_in_batch: 0,
            tx: None,
            tx_serial: 0,
            journal: Vec::new(),
            snapshots: Vec::new(),
            next_snapshot: 0,
            trace: Vec::new(),
            system_scopes: BTreeMap::new(),
            query_mark: None,
        }
    }

    pub fn profile(&self) -> &ChainProfile {
        &self.profile
    }

    pub fn block(&self) -> BlockContext {
        self.block
    }

    /// Block number and timestamp as seen by contracts.
    pub fn observe(&self) -> (u64, u64) {
        self.profile.observe(&self.block)
    }

    pub fn tx(&self) -> Option<&TransactionContext> {
        self.tx.as_ref()
    }

    /// Number of transactions ever begun in this world.
    pub fn tx_serial(&self) -> u64 {
        self.tx_serial
    }

    /// Deterministic, never-zero stand-in for `blockhash(number)`.
    pub fn blockhash(&self, number: u64) -> [u8; 32] {
        let mut h = digest(&[b"blockhash", &self.profile.chain_id.to_be_bytes(), &number.to_be_bytes()]);
        if h.iter().all(|b| *b == 0) {
            h[31] = 1;
        }
        h
    }

    // ---- accounts ----------------------------------------------------------

    pub fn deploy(&mut self, address: Address, code: Arc<dyn Contract>) {
        self.ensure_account(address);
        if let Some(acct) = self.accounts.get_mut(&address) {
            acct.handler = Some(code.kind().to_string());
        }
        self.code.insert(address, code);
    }

    pub fn code_of(&self, address: Address) -> Option<Arc<dyn Contract>> {
        self.code.get(&address).cloned()
    }

    pub fn has_code(&self, address: Address) -> bool {
        self.code.contains_key(&address)
    }

    pub fn account(&self, address: Address) -> Option<&AccountState> {
        self.accounts.get(&address)
    }

    pub fn balance(&self, address: Address) -> Word {
        self.accounts.get(&address).map(|a| a.balance).unwrap_or_default()
    }

    /// Sum of every native balance.
    pub fn total_native(&self) -> Word {
        self.accounts.values().fold(Word::ZERO, |acc, a| acc + a.balance)
    }

    fn ensure_account(&mut self, address: Address) {
        if let std::collections::btree_map::Entry::Vacant(e) = self.accounts.entry(address) {
            e.insert(AccountState::default());
            self.record(JournalEntry::AccountCreated(address));
        }
    }

    fn set_balance(&mut self, address: Address, value: Word) {
        self.ensure_account(address);
        let prev = self.balance(address);
        self.record(JournalEntry::Balance { account: address, prev });
        if let Some(a) = self.accounts.get_mut(&address) {
            a.balance = value;
        }
    }

    /// Creates native currency. Fixture setup only.
    pub fn mint_native(&mut self, address: Address, amount: Word) {
        let b = self.balance(address);
        self.set_balance(address, b + amount);
    }

    pub fn burn_native(&mut self, address: Address, amount: Word) -> Result<(), WorldError> {
        let have = self.balance(address);
        if have < amount {
            return Err(WorldError::InsufficientBalance { account: address, have, need: amount });
        }
        self.set_balance(address, have - amount);
        Ok(())
    }

    pub fn transfer_native(&mut self, from: Address, to: Address, amount: Word) -> Result<(), WorldError> {
        if amount.is_zero() {
            return Ok(());
        }
        let have = self.balance(from);
        if have < amount {
            return Err(WorldError::InsufficientBalance { account: from, have, need: amount });
        }
        self.set_balance(from, have - amount);
        let to_bal = self.balance(to);
        self.set_balance(to, to_bal + amount);
        Ok(())
    }

    pub fn storage(&self, address: Address, slot: Word) -> Word {
        self.accounts.get(&address).and_then(|a| a.storage.get(&slot).copied()).unwrap_or_default()
    }

    pub fn set_storage(&mut self, address: Address, slot: Word, value: Word) {
        self.ensure_account(address);
        let prev = self.accounts.get(&address).and_then(|a| a.storage.get(&slot).copied());
        self.record(JournalEntry::Storage { account: address, slot, prev });
        if let Some(a) = self.accounts.get_mut(&address) {
            a.storage.insert(slot, value);
        }
    }

    // ---- system guard scopes ----------------------------------------------

    pub fn register_system_scope(&mut self, id: &str, allow: impl IntoIterator<Item = Address>) -> Address {
        let address = Address::from_label(&format!("system-scope/{id}"));
        self.ensure_account(address);
        self.system_scopes.insert(id.to_string(), SystemScope { address, allow: allow.into_iter().collect() });
        address
    }

    pub fn system_scope(&self, id: &str) -> Result<&SystemScope, WorldError> {
        self.system_scopes.get(id).ok_or_else(|| WorldError::UnknownSystemScope(id.to_string()))
    }

    // ---- transactions ------------------------------------------------------

    pub fn begin_transaction(&mut self, origin: Address, gas_limit: u64) -> Result<&TransactionContext, WorldError> {
        if self.tx.is_some() {
            return Err(WorldError::TransactionOpen);
        }
        self.expire_snapshots();
        let tx_index_in_block = match self.profile.block_number_mode {
            BlockNumberMode::PerBlock => {
                let i = self.txs_in_block;
                self.txs_in_block += 1;
                i
            }
            BlockNumberMode::PerTransaction => {
                if let TimestampMode::PerBatch { batch_size, spacing } = self.profile.timestamp_mode {
                    if self.txs_in_batch >= batch_size.max(1) {
                        self.block.timestamp += spacing;
                        self.txs_in_batch = 0;
                    }
                }
                self.txs_in_batch += 1;
                self.block.number += 1;
                0
            }
        };
        self.tx_serial += 1;
        let mut warm = BTreeSet::new();
        warm.insert(origin);
        self.tx = Some(TransactionContext {
            origin,
            gas_limit,
            gas_used: 0,
            warm_addresses: warm,
            warm_slots: BTreeSet::new(),
            tx_index_in_block,
        });
        let (block_number, timestamp) = self.observe();
        self.trace.push(TraceEvent::TxBegin {
            serial: self.tx_serial,
            origin,
            block_number,
            timestamp,
            tx_index: tx_index_in_block,
        });
        Ok(self.tx.as_ref().expect("just opened"))
    }

    pub fn end_transaction(&mut self) -> Result<TransactionContext, WorldError> {
        let tx = self.tx.take().ok_or(WorldError::NoTransaction)?;
        self.expire_snapshots();
        self.trace.push(TraceEvent::TxEnd { serial: self.tx_serial, gas_used: tx.gas_used });
        Ok(tx)
    }

    /// Opens a throwaway context for a read-only query.
    pub(crate) fn begin_query(&mut self, from: Address) -> Result<(), WorldError> {
        if self.tx.is_some() {
            return Err(WorldError::TransactionOpen);
        }
        self.expire_snapshots();
        let mut warm = BTreeSet::new();
        warm.insert(from);
        self.tx = Some(TransactionContext {
            origin: from,
            gas_limit: u64::MAX,
            gas_used: 0,
            warm_addresses: warm,
            warm_slots: BTreeSet::new(),
            tx_index_in_block: self.txs_in_block,
        });
        let s = self.snapshot();
        self.query_mark = Some((s, self.trace.len()));
        Ok(())
    }

    pub(crate) fn end_query(&mut self) {
        if let Some((s, trace_len)) = self.query_mark.take() {
            let _ = self.revert_to(s);
            self.trace.truncate(trace_len);
        }
        self.tx = None;
        self.expire_snapshots();
    }

    /// Marks `address` warm for the open transaction and reports what it was before.
    pub fn touch_account(&mut self, address: Address) -> Result<AccessKind, WorldError> {
        let tx = self.tx.as_mut().ok_or(WorldError::NoTransaction)?;
        if tx.warm_addresses.insert(address) {
            self.record(JournalEntry::WarmAddress(address));
            Ok(AccessKind::Cold)
        } else {
            Ok(AccessKind::Warm)
        }
    }

    pub fn touch_slot(&mut self, address: Address, slot: Word) -> Result<AccessKind, WorldError> {
        let tx = self.tx.as_mut().ok_or(WorldError::NoTransaction)?;
        if tx.warm_slots.insert((address, slot)) {
            self.record(JournalEntry::WarmSlot(address, slot));
            Ok(AccessKind::Cold)
        } else {
            Ok(AccessKind::Warm)
        }
    }

    pub fn is_warm(&self, address: Address) -> bool {
        self.tx.as_ref().is_some_and(|t| t.warm_addresses.contains(&address))
    }

    pub(crate) fn add_tx_gas(&mut self, gas: u64) -> Result<(), WorldError> {
        let tx = self.tx.as_mut().ok_or(WorldError::NoTransaction)?;
        let used = tx.gas_used.checked_add(gas).ok_or(WorldError::GasLimitExceeded)?;
        if used > tx.gas_limit {
            return Err(WorldError::GasLimitExceeded);
        }
        tx.gas_used = used;
        Ok(())
    }

    pub(crate) fn tx_gas_left(&self) -> u64 {
        self.tx.as_ref().map(|t| t.gas_limit - t.gas_used).unwrap_or(0)
    }

    // ---- time --------------------------------------------------------------

    pub fn advance_blocks(&mut self, n: u64) -> Result<BlockContext, WorldError> {
        if self.tx.is_some() {
            return Err(WorldError::TransactionOpen);
        }
        if n == 0 {
            return Err(WorldError::ZeroAdvance);
        }
        let spacing = self.profile.spacing();
        match self.profile.block_number_mode {
            BlockNumberMode::PerBlock => {
                self.block.number += n;
                self.block.timestamp += n * spacing;
                self.txs_in_block = 0;
            }
            BlockNumberMode::PerTransaction => {
                // Numbers only move with transactions; each advance opens a new batch.
                self.block.timestamp += n * spacing;
                self.txs_in_batch = 0;
            }
        }
        self.after_advance();
        Ok(self.block)
    }

    /// Moves the clock forward by at least `seconds`. On per-block profiles the
    /// clock only moves in whole blocks, so this advances `ceil(seconds / spacing)` blocks.
    pub fn advance_time(&mut self, seconds: u64) -> Result<BlockContext, WorldError> {
        if self.tx.is_some() {
            return Err(WorldError::TransactionOpen);
        }
        if seconds == 0 {
            return Err(WorldError::ZeroAdvance);
        }
        match self.profile.timestamp_mode {
            TimestampMode::PerBlock { spacing } => {
                let spacing = spacing.max(1);
                self.advance_blocks(seconds.div_ceil(spacing))
            }
            TimestampMode::PerBatch { .. } => {
                self.block.timestamp += seconds;
                self.txs_in_batch = 0;
                self.after_advance();
                Ok(self.block)
            }
        }
    }

    fn after_advance(&mut self) {
        self.expire_snapshots();
        let (block_number, timestamp) = self.observe();
        self.trace.push(TraceEvent::Advance { block_number, timestamp });
    }

    // ---- snapshots ---------------------------------------------------------

    fn record(&mut self, entry: JournalEntry) {
        if !self.snapshots.is_empty() {
            self.journal.push(entry);
        }
    }

    fn expire_snapshots(&mut self) {
        self.snapshots.clear();
        self.journal.clear();
    }

    pub fn snapshot(&mut self) -> Snapshot {
        let version = self.next_snapshot;
        self.next_snapshot += 1;
        self.snapshots.push((version, self.journal.len()));
        Snapshot { version }
    }

    /// Restores the state captured by `s`. `s` and every later snapshot become invalid.
    pub fn revert_to(&mut self, s: Snapshot) -> Result<(), WorldError> {
        let pos =
            self.snapshots.iter().position(|(v, _)| *v == s.version).ok_or(WorldError::UnknownSnapshot(s.version))?;
        let mark = self.snapshots[pos].1;
        self.snapshots.truncate(pos);
        while self.journal.len() > mark {
            match self.journal.pop().expect("len checked") {
                JournalEntry::AccountCreated(a) => {
                    self.accounts.remove(&a);
                }
                JournalEntry::Balance { account, prev } => {
                    if let Some(a) = self.accounts.get_mut(&account) {
                        a.balance = prev;
                    }
                }
                JournalEntry::Storage { account, slot, prev } => {
                    if let Some(a) = self.accounts.get_mut(&account) {
                        match prev {
                            Some(v) => a.storage.insert(slot, v),
                            None => a.storage.remove(&slot),
                        };
                    }
                }
                JournalEntry::WarmAddress(a) => {
                    if let Some(tx) = self.tx.as_mut() {
                        tx.warm_addresses.remove(&a);
                    }
                }
                JournalEntry::WarmSlot(a, slot) => {
                    if let Some(tx) = self.tx.as_mut() {
                        tx.warm_slots.remove(&(a, slot));
                    }
                }
            }
        }
        if self.snapshots.is_empty() {
            self.journal.clear();
        }
        Ok(())
    }

    /// Keeps the changes made since `s` and forgets `s` (and every later snapshot).
    pub fn commit(&mut self, s: Snapshot) -> Result<(), WorldError> {
        let pos =
            self.snapshots.iter().position(|(v, _)| *v == s.version).ok_or(WorldError::UnknownSnapshot(s.version))?;
        self.snapshots.truncate(pos);
        if self.snapshots.is_empty() {
            self.journal.clear();
        }
        Ok(())
    }

    pub fn state_image(&self) -> StateImage {
        let (warm_addresses, warm_slots) = match &self.tx {
            Some(tx) => (tx.warm_addresses.iter().copied().collect(), tx.warm_slots.iter().copied().collect()),
            None => (Vec::new(), Vec::new()),
        };
        StateImage {
            accounts: self.accounts.iter().map(|(a, s)| (*a, s.clone())).collect(),
            warm_addresses,
            warm_slots,
        }
    }

    /// Canonical byte serialization of [`World::state_image`].
    pub fn state_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(&self.state_image()).expect("state image serializes")
    }

    // ---- trace -------------------------------------------------------------

    pub fn trace(&self) -> &[TraceEvent] {
        &self.trace
    }

    pub fn take_trace(&mut self) -> Vec<TraceEvent> {
        std::mem::take(&mut self.trace)
    }

    pub(crate) fn push_trace(&mut self, event: TraceEvent) {
        self.trace.push(event);
    }
}
