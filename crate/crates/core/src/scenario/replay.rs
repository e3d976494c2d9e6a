//! Golden replay of the Sentiment read-only reentrancy exploit: runs the
//! built-in S2 scenario without guards and reads every price the attack
//! relies on out of the trace.

use serde::{Deserialize, Serialize};

use crate::chain::ChainProfile;
use crate::engine::{query, Calldata};
use crate::fixtures::erc20;
use crate::trace::{PriceSource, TraceEvent};
use crate::types::{Address, Amount, Word};
use crate::world::World;

use super::build::build;
use super::builtin;
use super::run::{execute, Verdict};
use super::schema::GuardConfiguration;
use super::ScenarioError;

pub const SENTIMENT_SCENARIO: &str = "s2";

pub const EXPECTED_P0: f64 = 0.220118561;
pub const EXPECTED_P1: f64 = 0.220127737;
pub const EXPECTED_P3: f64 = 3.55007307;
pub const EXPECTED_STEP1_SUPPLY: f64 = 8633.653333;
pub const EXPECTED_STEP2_MINTED: f64 = 130_601.0;
pub const MIN_INFLATION: f64 = 16.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayCheck {
    pub name: String,
    pub expected: f64,
    pub actual: f64,
    /// Relative tolerance; for `ratio` checks, `expected` is a lower bound.
    pub tolerance: f64,
    pub pass: bool,
}

impl ReplayCheck {
    fn relative(name: &str, expected: f64, actual: f64, tolerance: f64) -> Self {
        let pass = ((actual - expected) / expected).abs() <= tolerance;
        ReplayCheck { name: name.into(), expected, actual, tolerance, pass }
    }

    fn above(name: &str, bound: f64, actual: f64) -> Self {
        ReplayCheck { name: name.into(), expected: bound, actual, tolerance: 0.0, pass: actual > bound }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentimentReplay {
    pub profile: String,
    /// Price before the attack.
    pub p0: Amount,
    /// After the single-asset join.
    pub p1: Amount,
    /// After the proportional join.
    pub p2: Amount,
    /// Seen by the lending market from inside the exit.
    pub p3: Amount,
    /// After the transaction.
    pub after: Amount,
    pub supply_before: Amount,
    pub step1_supply: Amount,
    pub step2_minted: Amount,
    pub verdict: Verdict,
    pub checks: Vec<ReplayCheck>,
}

impl SentimentReplay {
    pub fn inflation(&self) -> f64 {
        self.p3.to_f64() / self.p1.to_f64()
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

fn price_query(world: &mut World, from: Address, pool: Address) -> Result<Word, ScenarioError> {
    let r = query(world, from, pool, Calldata::new("get_price", vec![]))?;
    match r.into_result() {
        Ok(out) => Ok(out.first().copied().unwrap_or_default()),
        Err(revert) => Err(ScenarioError::Setup(format!("get_price failed: {revert}"))),
    }
}

fn missing(what: &str) -> ScenarioError {
    ScenarioError::Setup(format!("replay trace has no {what}"))
}

pub fn replay_sentiment(profile: &ChainProfile) -> Result<SentimentReplay, ScenarioError> {
    let scenario = builtin::scenario(SENTIMENT_SCENARIO)?;
    let guards = GuardConfiguration::none();
    let mut dep = build(&scenario, &guards, profile)?;
    let pool = dep.address("pool")?;
    let attacker = dep.address("attacker")?;
    let eoa = dep.address("attacker-eoa")?;
    let p0 = price_query(&mut dep.world, eoa, pool)?;
    let supply_before = erc20::peek_supply(&dep.world, pool);

    let mut exec = execute(&scenario, &guards.id, dep)?;
    let after = price_query(&mut exec.deployment.world, eoa, pool)?;
    let trace = &exec.outcome.trace;

    let post_joins: Vec<Word> = trace
        .iter()
        .filter_map(|e| match e {
            TraceEvent::Price { pool: p, price, source: PriceSource::PostJoin } if *p == pool => Some(price.0),
            _ => None,
        })
        .collect();
    let mints: Vec<Word> = trace
        .iter()
        .filter_map(|e| match e {
            TraceEvent::TokenTransfer { token, from, to, amount }
                if *token == pool && from.0 == [0; 20] && *to == attacker =>
            {
                Some(amount.0)
            }
            _ => None,
        })
        .collect();
    let exit_at = trace
        .iter()
        .position(|e| matches!(e, TraceEvent::Call { callee, function, .. } if *callee == pool && function == "exit"))
        .ok_or_else(|| missing("exit call"))?;
    let p3 = trace[exit_at..]
        .iter()
        .find_map(|e| match e {
            TraceEvent::Price { pool: p, price, source: PriceSource::Query } if *p == pool => Some(price.0),
            _ => None,
        })
        .ok_or_else(|| missing("price query inside the exit"))?;
    let p1 = *post_joins.first().ok_or_else(|| missing("single-asset join"))?;
    let p2 = *post_joins.get(1).ok_or_else(|| missing("proportional join"))?;
    let step1_minted = *mints.first().ok_or_else(|| missing("step 1 mint"))?;
    let step2_minted = *mints.get(1).ok_or_else(|| missing("step 2 mint"))?;
    let step1_supply = supply_before + step1_minted;

    let f = |w: Word| Amount(w).to_f64();
    let checks = vec![
        ReplayCheck::relative("initial price", EXPECTED_P0, f(p0), 1e-6),
        ReplayCheck::relative("price after single-asset join", EXPECTED_P1, f(p1), 1e-3),
        ReplayCheck::relative("supply after single-asset join", EXPECTED_STEP1_SUPPLY, f(step1_supply), 2e-3),
        ReplayCheck::relative("shares minted by proportional join", EXPECTED_STEP2_MINTED, f(step2_minted), 1e-3),
        ReplayCheck::relative("price inside the exit", EXPECTED_P3, f(p3), 1e-3),
        ReplayCheck::above("inflation inside the exit", MIN_INFLATION, f(p3) / f(p1)),
        ReplayCheck::above(
            "attack succeeds without guards",
            0.0,
            if exec.outcome.verdict.is_succeeded() { 1.0 } else { 0.0 },
        ),
    ];
    Ok(SentimentReplay {
        profile: profile.name.clone(),
        p0: Amount(p0),
        p1: Amount(p1),
        p2: Amount(p2),
        p3: Amount(p3),
        after: Amount(after),
        supply_before: Amount(supply_before),
        step1_supply: Amount(step1_supply),
        step2_minted: Amount(step2_minted),
        verdict: exec.outcome.verdict,
        checks,
    })
}
