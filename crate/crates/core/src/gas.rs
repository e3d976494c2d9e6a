use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GasScheduleError {
    #[error("gas schedule field {0} must be positive")]
    NonPositive(&'static str),
    #[error("cold account access ({cold}) must cost more than warm access ({warm})")]
    ColdNotAboveWarm { cold: u64, warm: u64 },
    #[error("probe overhead ({overhead}) must cover the closing gasleft read ({base_op})")]
    OverheadBelowBaseOp { overhead: u64, base_op: u64 },
}

/// Gas prices for the services the engine meters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GasSchedule {
    pub cold_account_access: u64,
    pub warm_account_access: u64,
    /// Gas handed to the callee by `transfer()`/`send()`.
    pub stipend: u64,
    /// Bookkeeping charged by the once-per-transaction probe on top of the
    /// balance read, including its closing `gasleft()`.
    pub probe_overhead: u64,
    /// Flat charge for `gasleft()`, storage reads/writes and call setup.
    pub base_op: u64,
}

impl Default for GasSchedule {
    fn default() -> Self {
        GasSchedule {
            cold_account_access: 2600,
            warm_account_access: 100,
            stipend: 2300,
            probe_overhead: 31,
            base_op: 3,
        }
    }
}

impl GasSchedule {
    pub fn validate(&self) -> Result<(), GasScheduleError> {
        for (name, v) in [
            ("cold_account_access", self.cold_account_access),
            ("warm_account_access", self.warm_account_access),
            ("stipend", self.stipend),
            ("probe_overhead", self.probe_overhead),
            ("base_op", self.base_op),
        ] {
            if v == 0 {
                return Err(GasScheduleError::NonPositive(name));
            }
        }
        if self.cold_account_access <= self.warm_account_access {
            return Err(GasScheduleError::ColdNotAboveWarm {
                cold: self.cold_account_access,
                warm: self.warm_account_access,
            });
        }
        if self.probe_overhead < self.base_op {
            return Err(GasScheduleError::OverheadBelowBaseOp { overhead: self.probe_overhead, base_op: self.base_op });
        }
        Ok(())
    }

    /// Gas the probe measures when its address is still cold.
    pub fn expected_probe_gas(&self) -> u64 {
        self.cold_account_access + self.probe_overhead
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_schedule_probe_is_2631() {
        let g = GasSchedule::default();
        g.validate().unwrap();
        assert_eq!(g.expected_probe_gas(), 2631);
    }

    #[test]
    fn rejects_inverted_access_costs() {
        let g = GasSchedule { cold_account_access: 100, warm_account_access: 100, ..Default::default() };
        assert!(matches!(g.validate(), Err(GasScheduleError::ColdNotAboveWarm { .. })));
        let g = GasSchedule { stipend: 0, ..Default::default() };
        assert_eq!(g.validate(), Err(GasScheduleError::NonPositive("stipend")));
    }
}
