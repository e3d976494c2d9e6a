//! Executes a scenario and classifies what happened.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::chain::ChainProfile;
use crate::engine::{self, Calldata, Revert, RevertCause, TopLevelCall, DEFAULT_TX_GAS_LIMIT};
use crate::guards::GuardHit;
use crate::trace::TraceEvent;
use crate::types::{Address, SignedAmount, Word};

use super::build::{build, Deployment};
use super::schema::{Advance, GuardConfiguration, Scenario, ScenarioKind};
use super::ScenarioError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    /// A guard revert was the proximate cause of failure.
    Blocked {
        guard: GuardHit,
        /// `role.function` where the guard fired.
        step: String,
        tx_index: usize,
    },
    /// Every call went through. For attacks, also at least one asset gained
    /// and none lost.
    Succeeded { profit: BTreeMap<String, SignedAmount> },
    /// The attack did not pay off for a reason other than a guard.
    Failed {
        reason: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tx_index: Option<usize>,
    },
}

impl Verdict {
    pub fn is_blocked(&self) -> bool {
        matches!(self, Verdict::Blocked { .. })
    }

    pub fn is_succeeded(&self) -> bool {
        matches!(self, Verdict::Succeeded { .. })
    }

    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Blocked { .. } => "blocked",
            Verdict::Succeeded { .. } => "succeeded",
            Verdict::Failed { .. } => "failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Outcome {
    pub scenario: String,
    pub kind: ScenarioKind,
    pub guards: String,
    pub profile: String,
    pub verdict: Verdict,
    pub trace: Vec<TraceEvent>,
}

/// Outcome plus the final world, for callers that inspect state afterwards.
#[derive(Debug, Clone)]
pub struct Execution {
    pub outcome: Outcome,
    pub deployment: Deployment,
}

fn describe(dep: &Deployment, revert: &Revert) -> String {
    let func = if revert.function.is_empty() { "fallback" } else { &revert.function };
    format!("{} in {}.{}", revert.reason, dep.name_of(revert.contract), func)
}

fn classify_failure(dep: &Deployment, revert: &Revert, tx_index: usize) -> Verdict {
    match &revert.cause {
        RevertCause::Guard(hit) => Verdict::Blocked {
            guard: hit.clone(),
            step: format!("{}.{}", dep.name_of(hit.contract), hit.function),
            tx_index,
        },
        RevertCause::OutOfGas { stipend: true } => Verdict::Failed {
            reason: format!("stipend exhausted: {}", describe(dep, revert)),
            tx_index: Some(tx_index),
        },
        _ => Verdict::Failed { reason: format!("invariant held: {}", describe(dep, revert)), tx_index: Some(tx_index) },
    }
}

fn profit(dep: &Deployment, before: &[Word], after: &[Word]) -> BTreeMap<String, SignedAmount> {
    dep.assets
        .iter()
        .zip(before.iter().zip(after))
        .filter(|(_, (b, a))| b != a)
        .map(|(asset, (b, a))| (asset.name.clone(), SignedAmount::diff(*a, *b)))
        .collect()
}

/// Runs the scenario's transactions on an already-built deployment.
pub fn execute(scenario: &Scenario, guards_id: &str, mut dep: Deployment) -> Result<Execution, ScenarioError> {
    let beneficiaries: Vec<Address> =
        scenario.beneficiaries.iter().map(|b| dep.address(b)).collect::<Result<_, _>>()?;
    let before = dep.holdings(&beneficiaries);
    let mut verdict = None;
    for (i, tx) in scenario.transactions.iter().enumerate() {
        match tx.advance_before {
            Some(Advance::Seconds(s)) => {
                dep.world.advance_time(s)?;
            }
            Some(Advance::Blocks(n)) => {
                dep.world.advance_blocks(n)?;
            }
            None => {}
        }
        let origin = dep.address(&tx.from)?;
        let mut program = Vec::with_capacity(tx.calls.len());
        for c in &tx.calls {
            let mut args = Vec::with_capacity(c.args.len());
            for a in &c.args {
                let resolved = a.map_address(&|r: &String| dep.address(r))?;
                args.push(resolved.constant().ok_or_else(|| ScenarioError::Setup("non-constant argument".into()))?);
            }
            program.push(TopLevelCall {
                to: dep.address(&c.to)?,
                value: c.value.map(|v| v.0).unwrap_or_default(),
                gas: None,
                input: Calldata::new(c.function.clone(), args),
            });
        }
        let receipt = engine::execute_transaction(
            &mut dep.world,
            origin,
            tx.gas_limit.unwrap_or(DEFAULT_TX_GAS_LIMIT),
            &program,
        )?;
        if let Some(failed) = receipt.results.iter().find(|r| !r.is_success()) {
            let revert = failed.revert.as_ref().expect("failed call carries a revert");
            verdict = Some(classify_failure(&dep, revert, i));
            break;
        }
    }
    let verdict = verdict.unwrap_or_else(|| {
        let after = dep.holdings(&beneficiaries);
        let profit = profit(&dep, &before, &after);
        let gained = profit.values().any(SignedAmount::is_positive);
        let lost = profit.values().any(SignedAmount::is_negative);
        match scenario.kind {
            ScenarioKind::Attack if !gained || lost => Verdict::Failed { reason: "no profit".into(), tx_index: None },
            _ => Verdict::Succeeded { profit },
        }
    });
    let outcome = Outcome {
        scenario: scenario.id.clone(),
        kind: scenario.kind,
        guards: guards_id.to_string(),
        profile: dep.world.profile().name.clone(),
        verdict,
        trace: dep.world.trace().to_vec(),
    };
    Ok(Execution { outcome, deployment: dep })
}

/// Builds a fresh world for `scenario` under `guards` on `profile` and runs it.
pub fn run_scenario(
    scenario: &Scenario,
    guards: &GuardConfiguration,
    profile: &ChainProfile,
) -> Result<Outcome, ScenarioError> {
    let dep = build(scenario, guards, profile)?;
    Ok(execute(scenario, &guards.id, dep)?.outcome)
}
