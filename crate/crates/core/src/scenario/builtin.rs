//! Scenarios and guard configurations shipped with the crate.

use super::schema::{GuardConfiguration, Scenario};
use super::ScenarioError;

const SCENARIOS: &[(&str, &str)] = &[
    ("s1", include_str!("../../data/scenarios/s1.json")),
    ("s1-honest", include_str!("../../data/scenarios/s1-honest.json")),
    ("s1b", include_str!("../../data/scenarios/s1b.json")),
    ("s1b-honest", include_str!("../../data/scenarios/s1b-honest.json")),
    ("s2", include_str!("../../data/scenarios/s2.json")),
    ("s2-honest", include_str!("../../data/scenarios/s2-honest.json")),
    ("s3", include_str!("../../data/scenarios/s3.json")),
    ("s3-honest", include_str!("../../data/scenarios/s3-honest.json")),
    ("s4", include_str!("../../data/scenarios/s4.json")),
    ("s4-honest", include_str!("../../data/scenarios/s4-honest.json")),
    ("s5", include_str!("../../data/scenarios/s5.json")),
    ("s5-honest", include_str!("../../data/scenarios/s5-honest.json")),
];

const GUARDS: &[(&str, &str)] = &[
    ("none", include_str!("../../data/guards/none.json")),
    ("mutex", include_str!("../../data/guards/mutex.json")),
    ("mutex-system", include_str!("../../data/guards/mutex-system.json")),
    ("once-per-tx", include_str!("../../data/guards/once-per-tx.json")),
    ("duration", include_str!("../../data/guards/duration.json")),
    ("duration-blocks", include_str!("../../data/guards/duration-blocks.json")),
    ("cei", include_str!("../../data/guards/cei.json")),
];

pub fn scenario_ids() -> Vec<&'static str> {
    SCENARIOS.iter().map(|(id, _)| *id).collect()
}

pub fn guard_ids() -> Vec<&'static str> {
    GUARDS.iter().map(|(id, _)| *id).collect()
}

pub fn scenario_source(id: &str) -> Option<&'static str> {
    SCENARIOS.iter().find(|(k, _)| *k == id).map(|(_, s)| *s)
}

pub fn guard_source(id: &str) -> Option<&'static str> {
    GUARDS.iter().find(|(k, _)| *k == id).map(|(_, s)| *s)
}

pub fn scenario(id: &str) -> Result<Scenario, ScenarioError> {
    let text = scenario_source(id).ok_or_else(|| ScenarioError::UnknownBuiltin {
        what: "scenario",
        id: id.to_string(),
        known: scenario_ids().join(", "),
    })?;
    Scenario::from_json(text)
}

pub fn guards(id: &str) -> Result<GuardConfiguration, ScenarioError> {
    let text = guard_source(id).ok_or_else(|| ScenarioError::UnknownBuiltin {
        what: "guard configuration",
        id: id.to_string(),
        known: guard_ids().join(", "),
    })?;
    GuardConfiguration::from_json(text)
}

pub fn scenarios() -> Vec<Scenario> {
    scenario_ids().into_iter().map(|id| scenario(id).expect("built-in scenario is valid")).collect()
}

pub fn guard_configs() -> Vec<GuardConfiguration> {
    guard_ids().into_iter().map(|id| guards(id).expect("built-in guard configuration is valid")).collect()
}
