//! Ordered execution log. Entries are appended as execution happens and are
//! never rolled back, so a reverted subtree stays visible between its
//! `Call` and `Return` markers.

use serde::{Deserialize, Serialize};

use crate::engine::{CallKind, CallStatus, RevertCause};
use crate::guards::GuardKind;
use crate::types::{Address, Amount};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriceSource {
    /// A `get_price` call.
    Query,
    /// Recomputed by the pool after a join or exit completed.
    PostJoin,
    PostExit,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GuardCheck {
    MutexEnter,
    MutexExit,
    ViewCheck,
    Probe { probe: Address, measured: u64, expected: u64 },
    Duration { last_entry: u64, delta: u64, now: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TraceEvent {
    TxBegin {
        serial: u64,
        origin: Address,
        block_number: u64,
        timestamp: u64,
        tx_index: u64,
    },
    TxEnd {
        serial: u64,
        gas_used: u64,
    },
    Advance {
        block_number: u64,
        timestamp: u64,
    },
    Call {
        depth: u32,
        caller: Address,
        callee: Address,
        function: String,
        value: Amount,
        kind: CallKind,
        gas: u64,
    },
    Return {
        depth: u32,
        callee: Address,
        status: CallStatus,
        gas_used: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cause: Option<RevertCause>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        reason: Option<String>,
    },
    TokenTransfer {
        token: Address,
        from: Address,
        to: Address,
        amount: Amount,
    },
    Guard {
        depth: u32,
        contract: Address,
        function: String,
        kind: GuardKind,
        key: String,
        check: GuardCheck,
        passed: bool,
    },
    Price {
        pool: Address,
        price: Amount,
        source: PriceSource,
    },
}
