//! Per-chain semantics for `block.number` and `block.timestamp`.
//!
//! The same guard code observes different markers depending on the profile:
//! on the Polygon-zkEVM-like profile every transaction is its own block, so
//! the block number is the running transaction count, while the timestamp is
//! fixed for the whole batch the transaction lands in.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gas::GasSchedule;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockNumberMode {
    /// One number per multi-transaction block.
    PerBlock,
    /// Number increments at every transaction boundary.
    PerTransaction,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimestampMode {
    PerBlock {
        spacing: u64,
    },
    /// Constant for `batch_size` transactions; each batch opens `spacing` seconds after the last.
    PerBatch {
        batch_size: u64,
        spacing: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainProfile {
    pub name: String,
    pub chain_id: u64,
    pub block_number_mode: BlockNumberMode,
    pub timestamp_mode: TimestampMode,
    pub gas_schedule: GasSchedule,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown chain profile {name:?}; known profiles: {}", known.join(", "))]
pub struct UnknownProfile {
    pub name: String,
    pub known: Vec<String>,
}

pub const DEFAULT_BATCH_SIZE: u64 = 10;

impl ChainProfile {
    pub fn ethereum() -> Self {
        ChainProfile {
            name: "ethereum".into(),
            chain_id: 1,
            block_number_mode: BlockNumberMode::PerBlock,
            timestamp_mode: TimestampMode::PerBlock { spacing: 12 },
            gas_schedule: GasSchedule::default(),
        }
    }

    pub fn optimism() -> Self {
        ChainProfile {
            name: "optimism".into(),
            chain_id: 10,
            block_number_mode: BlockNumberMode::PerBlock,
            timestamp_mode: TimestampMode::PerBlock { spacing: 2 },
            gas_schedule: GasSchedule::default(),
        }
    }

    pub fn polygon_zkevm() -> Self {
        ChainProfile {
            name: "polygon-zkevm".into(),
            chain_id: 1101,
            block_number_mode: BlockNumberMode::PerTransaction,
            timestamp_mode: TimestampMode::PerBatch { batch_size: DEFAULT_BATCH_SIZE, spacing: 12 },
            gas_schedule: GasSchedule::default(),
        }
    }

    pub fn builtin() -> Vec<ChainProfile> {
        vec![Self::ethereum(), Self::optimism(), Self::polygon_zkevm()]
    }

    pub fn known_names() -> Vec<String> {
        Self::builtin().into_iter().map(|p| p.name).collect()
    }

    pub fn by_name(name: &str) -> Result<ChainProfile, UnknownProfile> {
        let wanted = name.trim().to_ascii_lowercase();
        let wanted = match wanted.as_str() {
            "polygon" | "zkevm" | "polygon_zkevm" => "polygon-zkevm",
            "eth" | "mainnet" => "ethereum",
            "op" => "optimism",
            other => other,
        };
        Self::builtin()
            .into_iter()
            .find(|p| p.name == wanted)
            .ok_or_else(|| UnknownProfile { name: name.to_string(), known: Self::known_names() })
    }

    /// Seconds between consecutive blocks (or batches).
    pub fn spacing(&self) -> u64 {
        match self.timestamp_mode {
            TimestampMode::PerBlock { spacing } | TimestampMode::PerBatch { spacing, .. } => spacing,
        }
    }

    /// Block number and timestamp as contracts see them.
    pub fn observe(&self, block: &crate::world::BlockContext) -> (u64, u64) {
        (block.number, block.timestamp)
    }

    /// Whether a duration guard of `delta` in the given mode spans at least one
    /// block boundary on this profile.
    pub fn spans_a_block(&self, mode: crate::guards::DurationMode, delta: u64) -> bool {
        match mode {
            crate::guards::DurationMode::BlockNumber => delta >= 1,
            crate::guards::DurationMode::Timestamp => delta >= self.spacing().max(1),
        }
    }
}
