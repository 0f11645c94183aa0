//! Command-line front end: compile scenarios, check a-priori feasibility,
//! run scripted executions, replay logs against the specification, and host
//! the live service for interactive event injection.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use evstl::formula::{monitor, parse, Verdict};
use evstl::sim::{
    compile_cached, content_hash, run, Artifact, CompiledSpec, RunLog, Scenario, TerminalStatus,
};

mod serve;

#[derive(Parser)]
#[command(name = "evstl", version, about = "Event-based STL runtime toolkit")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Compile a scenario to its automaton and a-priori feedback.
    ///
    /// The compiled artifact is cached beside the scenario, keyed by
    /// content hash, so later commands pick it up for free.
    Compile {
        scenario: PathBuf,
        /// Print every automaton transition.
        #[arg(long)]
        dump_buchi: bool,
        /// Also write the compiled artifact to this path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// A-priori feasibility feedback only.
    ///
    /// Exits 1 when conflicts or inadmissible environment behaviors were
    /// found, 0 on a clean report. Unchecked-pair notes alone stay clean.
    Check { scenario: PathBuf },
    /// Execute a scripted scenario to its horizon.
    ///
    /// Exits 0 when the run ends accepting, 1 on a fatal stop, 2 when the
    /// horizon passes without reaching the accepting cycle.
    Run {
        scenario: PathBuf,
        /// Write the run log as JSON lines.
        #[arg(long)]
        log: Option<PathBuf>,
        /// Write the trajectory as CSV (t,robot,dim,value).
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Replay a recorded run against the specification.
    ///
    /// Exits 0 satisfied, 1 violated, 2 inconclusive.
    Monitor { scenario: PathBuf, log: PathBuf },
    /// Host the interactive service: a WebSocket endpoint at /ws where
    /// clients inject events and watch state, feedback, and status frames.
    Serve {
        scenario: PathBuf,
        /// Port to bind on 127.0.0.1; 0 picks a free one.
        #[arg(long)]
        port: u16,
        /// Wall-clock speedup factor for the sample loop.
        #[arg(long, default_value_t = 1.0)]
        speed: f64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Compile {
            scenario,
            dump_buchi,
            out,
        } => cmd_compile(&scenario, dump_buchi, out.as_deref()),
        Cmd::Check { scenario } => cmd_check(&scenario),
        Cmd::Run { scenario, log, csv } => cmd_run(&scenario, log.as_deref(), csv.as_deref()),
        Cmd::Monitor { scenario, log } => cmd_monitor(&scenario, &log),
        Cmd::Serve {
            scenario,
            port,
            speed,
        } => serve::cmd_serve(&scenario, port, speed),
    };
    match result {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(64)
        }
    }
}

fn load(path: &std::path::Path) -> Result<(Scenario, CompiledSpec), String> {
    compile_cached(path).map_err(|e| e.to_string())
}

fn print_feedback(compiled: &CompiledSpec) {
    for event in &compiled.conflicts.conflicts {
        println!("conflict: {} @ {}", event.detail, event.location);
    }
    for note in &compiled.conflicts.unchecked {
        println!("unchecked: {note}");
    }
    for event in &compiled.inadmissible_env {
        println!("inadmissible: {} @ {}", event.detail, event.location);
    }
}

fn cmd_compile(
    path: &std::path::Path,
    dump_buchi: bool,
    out: Option<&std::path::Path>,
) -> Result<ExitCode, String> {
    let (scenario, compiled) = load(path)?;
    println!(
        "{}: {} propositions, {} automaton states, {} transitions",
        scenario.name,
        compiled.abstraction.props.len(),
        compiled.automaton.num_states,
        compiled.automaton.num_transitions()
    );
    print_feedback(&compiled);
    if dump_buchi {
        print!("{}", compiled.automaton.dump());
    }
    if let Some(out) = out {
        let text = std::fs::read_to_string(path).map_err(|e| e.to_string())?;
        let artifact = Artifact {
            scenario_hash: content_hash(&text),
            compiled,
        };
        let json = serde_json::to_string_pretty(&artifact).map_err(|e| e.to_string())?;
        std::fs::write(out, json).map_err(|e| format!("{}: {e}", out.display()))?;
        println!("wrote {}", out.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_check(path: &std::path::Path) -> Result<ExitCode, String> {
    let (_, compiled) = load(path)?;
    print_feedback(&compiled);
    let findings =
        !compiled.conflicts.conflicts.is_empty() || !compiled.inadmissible_env.is_empty();
    if findings {
        Ok(ExitCode::FAILURE)
    } else {
        println!("no a-priori findings");
        Ok(ExitCode::SUCCESS)
    }
}

fn cmd_run(
    path: &std::path::Path,
    log_path: Option<&std::path::Path>,
    csv_path: Option<&std::path::Path>,
) -> Result<ExitCode, String> {
    let (scenario, compiled) = load(path)?;
    let log = run(&compiled, &scenario).map_err(|e| e.to_string())?;
    println!(
        "{}: {} samples, status {:?}",
        scenario.name,
        log.records.len(),
        log.status
    );
    for event in log.fatal_events() {
        println!("fatal: {} @ {}", event.detail, event.location);
    }
    if let Some(p) = log_path {
        std::fs::write(p, log.to_jsonl()).map_err(|e| format!("{}: {e}", p.display()))?;
    }
    if let Some(p) = csv_path {
        std::fs::write(p, log.to_csv(&scenario)).map_err(|e| format!("{}: {e}", p.display()))?;
    }
    Ok(match log.status {
        TerminalStatus::HorizonReachedAccepting => ExitCode::SUCCESS,
        TerminalStatus::StoppedFatal => ExitCode::FAILURE,
        TerminalStatus::HorizonReachedNonaccepting => ExitCode::from(2),
    })
}

fn cmd_monitor(scenario_path: &std::path::Path, log_path: &PathBuf) -> Result<ExitCode, String> {
    let scenario = Scenario::load(scenario_path).map_err(|e| e.to_string())?;
    let spec = parse(&scenario.formula, &scenario.declarations()).map_err(|e| e.to_string())?;
    let text = std::fs::read_to_string(log_path)
        .map_err(|e| format!("{}: {e}", log_path.display()))?;
    let log = RunLog::from_jsonl(&text).map_err(|e| e.to_string())?;
    let verdict = monitor(&log.trace(), &spec);
    Ok(match verdict {
        Verdict::Satisfied => {
            println!("satisfied");
            ExitCode::SUCCESS
        }
        Verdict::Violated { time, subformula } => {
            println!("violated at t={time}: {subformula}");
            ExitCode::FAILURE
        }
        Verdict::Inconclusive { reason } => {
            println!("inconclusive: {reason}");
            ExitCode::from(2)
        }
    })
}
