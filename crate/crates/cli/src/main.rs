//! `reguard`: run scenarios, the guard matrix, and the Sentiment replay.
//!
//! Exit codes: 0 on success, 1 when the replay misses an expected value,
//! 2 on invalid input.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use reguard_core::chain::ChainProfile;
use reguard_core::engine::CALL_STACK_BYTES;
use reguard_core::scenario::{
    builtin, check_monotonicity, render_report, replay_sentiment, run_matrix, run_scenario, Format, GuardConfiguration,
    Outcome, Scenario, ScenarioError, SentimentReplay, Verdict,
};

#[derive(Parser)]
#[command(name = "reguard", version, about = "Replay reentrancy attacks against guarded DeFi fixtures")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario under one guard configuration.
    Run {
        /// Scenario file, or a built-in id such as s2.
        #[arg(long)]
        scenario: String,
        /// Guard configuration file, or a built-in id such as mutex.
        #[arg(long, default_value = "none")]
        guards: String,
        #[arg(long, default_value = "ethereum")]
        profile: String,
        #[arg(long, default_value = "human")]
        format: String,
        #[arg(long)]
        output: Option<PathBuf>,
        /// Include the full execution trace in human output.
        #[arg(long)]
        trace: bool,
    },
    /// Run every scenario under every guard configuration on every profile.
    Matrix {
        /// Scenario files or built-in ids (default: all built-ins).
        #[arg(long, value_delimiter = ',')]
        scenarios: Vec<String>,
        /// Guard configuration files or built-in ids (default: all built-ins).
        #[arg(long, value_delimiter = ',')]
        guards: Vec<String>,
        #[arg(long, value_delimiter = ',', default_value = "ethereum")]
        profiles: Vec<String>,
        #[arg(long, default_value = "human")]
        format: String,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Replay the Sentiment exploit and compare prices against the reference values.
    ReplaySentiment {
        #[arg(long, default_value = "ethereum")]
        profile: String,
        #[arg(long, default_value = "human")]
        format: String,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Check scenario and guard configuration files without running them.
    Validate {
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
}

enum Failure {
    /// Bad input; exit 2.
    Input(String),
    /// Replay mismatch; exit 1.
    Mismatch,
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        Failure::Input(e.to_string())
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn load_scenario(spec: &str) -> Result<Scenario, Failure> {
    let path = Path::new(spec);
    if path.is_file() {
        Scenario::from_json(&read(path)?).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
    } else {
        Ok(builtin::scenario(spec)?)
    }
}

fn load_guards(spec: &str) -> Result<GuardConfiguration, Failure> {
    let path = Path::new(spec);
    if path.is_file() {
        GuardConfiguration::from_json(&read(path)?).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
    } else {
        Ok(builtin::guards(spec)?)
    }
}

fn profile(name: &str) -> Result<ChainProfile, Failure> {
    ChainProfile::by_name(name).map_err(|e| Failure::Input(e.to_string()))
}

fn format(name: &str) -> Result<Format, Failure> {
    Ok(name.parse::<Format>()?)
}

fn emit(text: &str, output: Option<&Path>) -> Result<(), Failure> {
    match output {
        Some(p) => fs::write(p, text).map_err(|e| Failure::Input(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn describe_verdict(v: &Verdict) -> String {
    match v {
        Verdict::Blocked { guard, step, tx_index } => {
            format!("blocked by {} guard {:?} at {step} in transaction {tx_index}", guard.kind.label(), guard.key)
        }
        Verdict::Succeeded { profit } if profit.is_empty() => "succeeded (no balance change)".into(),
        Verdict::Succeeded { profit } => {
            let parts: Vec<String> = profit.iter().map(|(k, v)| format!("{v} {k}")).collect();
            format!("succeeded; beneficiaries' balance change: {}", parts.join(", "))
        }
        Verdict::Failed { reason, tx_index } => match tx_index {
            Some(i) => format!("failed in transaction {i}: {reason}"),
            None => format!("failed: {reason}"),
        },
    }
}

fn render_outcome(o: &Outcome, fmt: Format, with_trace: bool) -> String {
    match fmt {
        Format::Machine => serde_json::to_string_pretty(o).expect("outcome serializes") + "\n",
        Format::Human => {
            let mut out = String::new();
            let _ = writeln!(out, "scenario: {} ({:?})", o.scenario, o.kind);
            let _ = writeln!(out, "guards:   {}", o.guards);
            let _ = writeln!(out, "profile:  {}", o.profile);
            let _ = writeln!(out, "verdict:  {}", describe_verdict(&o.verdict));
            if with_trace {
                for e in &o.trace {
                    let _ = writeln!(out, "  {}", serde_json::to_string(e).expect("event serializes"));
                }
            }
            out
        }
    }
}

fn render_replay(r: &SentimentReplay, fmt: Format) -> String {
    match fmt {
        Format::Machine => serde_json::to_string_pretty(r).expect("replay serializes") + "\n",
        Format::Human => {
            let mut out = String::new();
            let _ = writeln!(out, "Sentiment replay on {}", r.profile);
            let _ = writeln!(out, "  price before attack      {:>16}", r.p0);
            let _ = writeln!(out, "  after single-asset join  {:>16}", r.p1);
            let _ = writeln!(out, "  after proportional join  {:>16}", r.p2);
            let _ = writeln!(out, "  during exit (borrowing)  {:>16}", r.p3);
            let _ = writeln!(out, "  after the transaction    {:>16}", r.after);
            let _ = writeln!(out, "  inflation during exit    {:>16.4}x", r.inflation());
            let _ = writeln!(out, "  verdict: {}", describe_verdict(&r.verdict));
            for c in &r.checks {
                let status = if c.pass { "PASS" } else { "FAIL" };
                let _ = writeln!(
                    out,
                    "  {status} {:<36} expected {:<14} actual {:.9}",
                    c.name,
                    if c.tolerance > 0.0 {
                        format!("{} ±{:e}", c.expected, c.tolerance)
                    } else {
                        format!("> {}", c.expected)
                    },
                    c.actual
                );
            }
            out
        }
    }
}

fn validate_file(path: &Path) -> Result<String, Failure> {
    let text = read(path)?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    let located = |e: ScenarioError| Failure::Input(format!("{}: {e}", path.display()));
    if value.get("transactions").is_some() {
        let s = Scenario::from_json(&text).map_err(located)?;
        Ok(format!("ok {} (scenario {})", path.display(), s.id))
    } else {
        let g = GuardConfiguration::from_json(&text).map_err(located)?;
        Ok(format!("ok {} (guard configuration {})", path.display(), g.id))
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run { scenario, guards, profile: p, format: f, output, trace } => {
            let fmt = format(&f)?;
            let (s, g, p) = (load_scenario(&scenario)?, load_guards(&guards)?, profile(&p)?);
            let outcome = run_scenario(&s, &g, &p)?;
            emit(&render_outcome(&outcome, fmt, trace), output.as_deref())
        }
        Command::Matrix { scenarios, guards, profiles, format: f, output } => {
            let fmt = format(&f)?;
            let scenarios = if scenarios.is_empty() {
                builtin::scenarios()
            } else {
                scenarios.iter().map(|s| load_scenario(s)).collect::<Result<_, _>>()?
            };
            let guards = if guards.is_empty() {
                builtin::guard_configs()
            } else {
                guards.iter().map(|g| load_guards(g)).collect::<Result<_, _>>()?
            };
            let profiles: Vec<ChainProfile> = profiles.iter().map(|p| profile(p)).collect::<Result<_, _>>()?;
            let m = run_matrix(&scenarios, &guards, &profiles);
            for c in m.cells.iter().filter(|c| c.error.is_some()) {
                eprintln!("cell {}/{}/{}: {}", c.profile, c.scenario, c.guards, c.error.as_deref().unwrap_or(""));
            }
            if profiles.iter().any(|p| p.name == ChainProfile::ethereum().name) {
                for v in check_monotonicity(&m).violations {
                    eprintln!("monotonicity: {} blocked by {} but not by {}", v.scenario, v.premise, v.missing);
                }
            }
            emit(&render_report(&m, fmt), output.as_deref())
        }
        Command::ReplaySentiment { profile: p, format: f, output } => {
            let fmt = format(&f)?;
            let r = replay_sentiment(&profile(&p)?)?;
            emit(&render_replay(&r, fmt), output.as_deref())?;
            if r.passed() {
                Ok(())
            } else {
                for c in r.checks.iter().filter(|c| !c.pass) {
                    eprintln!("replay mismatch: {} expected {} got {}", c.name, c.expected, c.actual);
                }
                Err(Failure::Mismatch)
            }
        }
        Command::Validate { files } => {
            let mut bad = false;
            for f in &files {
                match validate_file(f) {
                    Ok(line) => println!("{line}"),
                    Err(Failure::Input(e)) => {
                        eprintln!("{e}");
                        bad = true;
                    }
                    Err(Failure::Mismatch) => unreachable!("validation never replays"),
                }
            }
            if bad {
                Err(Failure::Input("validation failed".into()))
            } else {
                Ok(())
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    // Deeply reentrant scenarios nest one native frame per call.
    let worker = std::thread::Builder::new().stack_size(CALL_STACK_BYTES).spawn(move || run(cli));
    let result = match worker.map(|h| h.join()) {
        Ok(Ok(r)) => r,
        _ => Err(Failure::Input("execution thread failed".into())),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Mismatch) => ExitCode::from(1),
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
