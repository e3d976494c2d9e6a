//! The scenario × guard configuration × profile matrix, the monotonicity
//! check over it, and its rendering.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::chain::ChainProfile;
#[cfg(feature = "parallel")]
use crate::engine::CALL_STACK_BYTES;
use crate::guards::GuardKind;

use super::run::{run_scenario, Verdict};
use super::schema::{GuardClass, GuardConfiguration, GuardSpec, Scenario, ScenarioKind};
use super::ScenarioError;

/// Environment variable capping the number of matrix worker threads.
pub const MAX_THREADS_ENV: &str = "REGUARD_MAX_THREADS";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cell {
    pub scenario: String,
    pub kind: ScenarioKind,
    pub guards: String,
    pub class: GuardClass,
    /// Every duration guard in the configuration spans at least one block on this profile.
    pub spans_block: bool,
    pub profile: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<Verdict>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// SHA-256 of the JSON trace, for reproducibility checks.
    pub trace_digest: String,
}

impl Cell {
    pub fn is_blocked(&self) -> bool {
        self.verdict.as_ref().is_some_and(Verdict::is_blocked)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Matrix {
    pub cells: Vec<Cell>,
}

impl Matrix {
    pub fn cell(&self, scenario: &str, guards: &str, profile: &str) -> Option<&Cell> {
        self.cells.iter().find(|c| c.scenario == scenario && c.guards == guards && c.profile == profile)
    }

    pub fn profiles(&self) -> Vec<&str> {
        unique(self.cells.iter().map(|c| c.profile.as_str()))
    }

    pub fn scenarios(&self) -> Vec<&str> {
        unique(self.cells.iter().map(|c| c.scenario.as_str()))
    }

    pub fn guard_ids(&self) -> Vec<&str> {
        unique(self.cells.iter().map(|c| c.guards.as_str()))
    }
}

fn unique<'a>(it: impl Iterator<Item = &'a str>) -> Vec<&'a str> {
    let mut out: Vec<&str> = Vec::new();
    for s in it {
        if !out.contains(&s) {
            out.push(s);
        }
    }
    out
}

fn spans_block(guards: &GuardConfiguration, profile: &ChainProfile) -> bool {
    guards.bindings.iter().all(|b| match &b.guard {
        GuardSpec::Duration(d) => profile.spans_a_block(d.mode, d.delta),
        _ => true,
    })
}

fn run_cell(scenario: &Scenario, guards: &GuardConfiguration, profile: &ChainProfile) -> Cell {
    let (verdict, error, trace_digest) = match run_scenario(scenario, guards, profile) {
        Ok(o) => {
            let bytes = serde_json::to_vec(&o.trace).expect("trace serializes");
            let digest = Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect();
            (Some(o.verdict), None, digest)
        }
        Err(e) => (None, Some(e.to_string()), String::new()),
    };
    Cell {
        scenario: scenario.id.clone(),
        kind: scenario.kind,
        guards: guards.id.clone(),
        class: guards.class(),
        spans_block: spans_block(guards, profile),
        profile: profile.name.clone(),
        verdict,
        error,
        trace_digest,
    }
}

type Job<'a> = (&'a ChainProfile, &'a Scenario, &'a GuardConfiguration);

fn jobs<'a>(scenarios: &'a [Scenario], guards: &'a [GuardConfiguration], profiles: &'a [ChainProfile]) -> Vec<Job<'a>> {
    let mut out = Vec::with_capacity(scenarios.len() * guards.len() * profiles.len());
    for p in profiles {
        for s in scenarios {
            for g in guards {
                out.push((p, s, g));
            }
        }
    }
    out
}

/// Runs every cell on the calling thread. Cells are ordered by profile,
/// then scenario, then guard configuration, as given.
pub fn run_matrix_sequential(
    scenarios: &[Scenario],
    guards: &[GuardConfiguration],
    profiles: &[ChainProfile],
) -> Matrix {
    let cells = jobs(scenarios, guards, profiles).into_iter().map(|(p, s, g)| run_cell(s, g, p)).collect();
    Matrix { cells }
}

/// Runs cells on a thread pool. Each cell owns its world, and results are
/// collected in the same order as [`run_matrix_sequential`].
#[cfg(feature = "parallel")]
pub fn run_matrix_parallel(
    scenarios: &[Scenario],
    guards: &[GuardConfiguration],
    profiles: &[ChainProfile],
    max_threads: Option<usize>,
) -> Matrix {
    use rayon::prelude::*;
    let work = jobs(scenarios, guards, profiles);
    let run = || Matrix { cells: work.par_iter().map(|(p, s, g)| run_cell(s, g, p)).collect() };
    // Zero lets rayon pick the thread count.
    let builder =
        rayon::ThreadPoolBuilder::new().num_threads(max_threads.map_or(0, |n| n.max(1))).stack_size(CALL_STACK_BYTES);
    match builder.build() {
        Ok(pool) => pool.install(run),
        Err(_) => run(),
    }
}

/// Thread cap from the environment, if set to a positive integer.
pub fn max_threads_from_env() -> Option<usize> {
    std::env::var(MAX_THREADS_ENV).ok()?.trim().parse().ok().filter(|n| *n > 0)
}

/// Runs the matrix in parallel when the `parallel` feature is on.
pub fn run_matrix(scenarios: &[Scenario], guards: &[GuardConfiguration], profiles: &[ChainProfile]) -> Matrix {
    #[cfg(feature = "parallel")]
    {
        let cap = max_threads_from_env();
        if cap == Some(1) {
            return run_matrix_sequential(scenarios, guards, profiles);
        }
        run_matrix_parallel(scenarios, guards, profiles, cap)
    }
    #[cfg(not(feature = "parallel"))]
    {
        run_matrix_sequential(scenarios, guards, profiles)
    }
}

/// A broken implication: `premise` blocked the scenario but `missing` did not.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub scenario: String,
    pub premise: String,
    pub missing: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub profile: String,
    pub scenarios_checked: usize,
    pub violations: Vec<Violation>,
}

impl MonotonicityReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks mutex ⇒ once-per-transaction ⇒ duration (spanning at least one
/// block) on `profile`: whenever any configuration of a class blocks a
/// scenario, every configuration of the next class must block it too.
pub fn check_monotonicity_on(m: &Matrix, profile: &str) -> MonotonicityReport {
    let chain = [GuardClass::Mutex, GuardClass::OncePerTx, GuardClass::Duration];
    let mut violations = Vec::new();
    let scenarios = unique(m.cells.iter().filter(|c| c.profile == profile).map(|c| c.scenario.as_str()));
    for s in &scenarios {
        let row: Vec<&Cell> = m.cells.iter().filter(|c| c.profile == profile && c.scenario == *s).collect();
        for pair in chain.windows(2) {
            let premises = row.iter().filter(|c| c.class == pair[0] && c.is_blocked());
            let conclusions: Vec<&&Cell> = row
                .iter()
                .filter(|c| c.class == pair[1] && (c.class != GuardClass::Duration || c.spans_block))
                .collect();
            for p in premises {
                for c in conclusions.iter().filter(|c| !c.is_blocked()) {
                    violations.push(Violation {
                        scenario: s.to_string(),
                        premise: p.guards.clone(),
                        missing: c.guards.clone(),
                    });
                }
            }
        }
    }
    MonotonicityReport { profile: profile.to_string(), scenarios_checked: scenarios.len(), violations }
}

/// Monotonicity on the Ethereum profile.
pub fn check_monotonicity(m: &Matrix) -> MonotonicityReport {
    check_monotonicity_on(m, &ChainProfile::ethereum().name)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Machine,
    Human,
}

impl FromStr for Format {
    type Err = ScenarioError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "machine" | "json" => Ok(Format::Machine),
            "human" | "table" => Ok(Format::Human),
            other => Err(ScenarioError::Invalid {
                id: "format".into(),
                msg: format!("unknown format {other:?}; expected machine or human"),
            }),
        }
    }
}

/// Least restrictive blocking class for a row, ignoring pattern-only configs.
fn least_restrictive(row: &[&Cell]) -> Option<GuardClass> {
    row.iter().filter(|c| c.is_blocked() && c.class >= GuardClass::Mutex).map(|c| c.class).min()
}

fn cell_text(c: &Cell, star: Option<GuardClass>) -> String {
    match (&c.verdict, &c.error) {
        (Some(Verdict::Blocked { .. }), _) if Some(c.class) == star => "BLOCKED*".into(),
        (Some(v), _) => v.label().into(),
        (None, _) => "error".into(),
    }
}

fn render_human(m: &Matrix) -> String {
    let mut out = String::new();
    if m.cells.is_empty() {
        out.push_str("(empty matrix)\n");
        return out;
    }
    let guards = m.guard_ids();
    for profile in m.profiles() {
        let _ = writeln!(out, "profile: {profile}");
        if profile == ChainProfile::polygon_zkevm().name {
            out.push_str("  note: block.timestamp is modeled as the time the enclosing batch opened\n");
        }
        let scenarios = unique(m.cells.iter().filter(|c| c.profile == profile).map(|c| c.scenario.as_str()));
        let w0 = scenarios.iter().map(|s| s.len()).max().unwrap_or(0).max("scenario".len());
        let widths: Vec<usize> = guards.iter().map(|g| g.len().max("succeeded".len())).collect();
        let mut header = format!("  {:<w0$}", "scenario");
        for (g, w) in guards.iter().zip(&widths) {
            let _ = write!(header, "  {g:<w$}");
        }
        let _ = writeln!(out, "{}", header.trim_end());
        for s in scenarios {
            let row: Vec<&Cell> = m.cells.iter().filter(|c| c.profile == profile && c.scenario == s).collect();
            let star = least_restrictive(&row);
            let mut line = format!("  {s:<w0$}");
            for (g, w) in guards.iter().zip(&widths) {
                let text =
                    row.iter().find(|c| c.guards == *g).map(|c| cell_text(c, star)).unwrap_or_else(|| "-".into());
                let _ = write!(line, "  {text:<w$}");
            }
            let _ = writeln!(out, "{}", line.trim_end());
        }
        let errors: Vec<&Cell> = m.cells.iter().filter(|c| c.profile == profile && c.error.is_some()).collect();
        for c in errors {
            let _ = writeln!(out, "  error in {} / {}: {}", c.scenario, c.guards, c.error.as_deref().unwrap_or(""));
        }
        out.push('\n');
    }
    out.push_str("BLOCKED* marks the least restrictive guard class that blocks the scenario.\n");
    if m.profiles().contains(&ChainProfile::ethereum().name.as_str()) {
        let report = check_monotonicity(m);
        let _ = writeln!(
            out,
            "monotonicity on {}: {} violation(s) over {} scenario(s)",
            report.profile,
            report.violations.len(),
            report.scenarios_checked
        );
        for v in &report.violations {
            let _ = writeln!(out, "  {}: blocked by {} but not by {}", v.scenario, v.premise, v.missing);
        }
    }
    out
}

pub fn render_report(m: &Matrix, format: Format) -> String {
    match format {
        Format::Machine => {
            let mut s = serde_json::to_string_pretty(m).expect("matrix serializes");
            s.push('\n');
            s
        }
        Format::Human => render_human(m),
    }
}

pub fn parse_machine_report(text: &str) -> Result<Matrix, ScenarioError> {
    serde_json::from_str(text).map_err(|e| ScenarioError::Schema(e.to_string()))
}

/// Guard kinds that fire anywhere in a cell's verdict, for summaries.
pub fn blocking_kind(c: &Cell) -> Option<GuardKind> {
    match &c.verdict {
        Some(Verdict::Blocked { guard, .. }) => Some(guard.kind),
        _ => None,
    }
}
