//! `mhl`: batch experiment runner.
//!
//! Exit codes: 0 all checks hold, 1 a check failed, 2 invalid configuration,
//! 3 solver non-convergence (partial results are written and flagged).

mod commands;
mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mhl_core::exec::Execution;
use mhl_core::filtration::FiltrationConfig;
use serde_json::json;

use commands::Outcome;
use config::Defaults;

#[derive(Parser, Debug)]
#[command(name = "mhl", version, about = "Finite-space martingale Hardy space experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON experiment configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Seed for randomized commands; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory for `<command>.json` and `<command>.csv`.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,

    /// Worker threads (0 = all cores).
    #[arg(long, global = true, env = "MHL_JOBS")]
    jobs: Option<usize>,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Operator identities and filtration properties.
    Identities,
    /// Davis, Weisz, Doob, regularity and decoupling constants.
    Constants,
    /// Two-parameter Davis–Garsia decomposition of given or random fields.
    Decompose,
    /// Dual-norm gradient probe sweep over p.
    Probe,
    /// Moment and gradient ratio equivalence on random norm instances.
    Gradcheck,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Identities => "identities",
            Command::Constants => "constants",
            Command::Decompose => "decompose",
            Command::Probe => "probe",
            Command::Gradcheck => "gradcheck",
        }
    }

    fn defaults(self) -> Defaults {
        let (filtration, trials, p_values) = match self {
            Command::Identities => (FiltrationConfig::coin(2, 2), 20, vec![2.0, 4.0]),
            Command::Constants => (FiltrationConfig::coin(1, 1), 200, vec![2.0, 4.0]),
            Command::Decompose => (FiltrationConfig::coin(1, 1), 20, vec![2.0, 4.0]),
            Command::Probe => (FiltrationConfig::coin(1, 1), 5, vec![2.0, 4.0, 8.0]),
            Command::Gradcheck => (FiltrationConfig::coin(1, 1), 10, vec![2.0, 4.0]),
        };
        Defaults { filtration, trials, p_values, tol: 1e-6 }
    }
}

fn execution(jobs: Option<usize>) -> Result<Execution, String> {
    match jobs {
        Some(1) => Ok(Execution::Sequential),
        #[cfg(feature = "parallel")]
        Some(n) => {
            rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())?;
            Ok(Execution::Parallel)
        }
        #[cfg(not(feature = "parallel"))]
        Some(_) => Ok(Execution::Sequential),
        None => Ok(Execution::Parallel),
    }
}

fn write_outputs(dir: &Path, name: &str, resolved: &config::Resolved, out: &Outcome) -> Result<(), String> {
    fs::create_dir_all(dir).map_err(|e| format!("cannot create {}: {e}", dir.display()))?;
    let summary = json!({
        "command": name,
        "config": resolved,
        "pass": out.pass,
        "partial": !out.errors.is_empty(),
        "errors": out.errors,
        "summary": out.summary,
    });
    let text = serde_json::to_string_pretty(&summary).map_err(|e| e.to_string())? + "\n";
    let json_path = dir.join(format!("{name}.json"));
    fs::write(&json_path, text).map_err(|e| format!("cannot write {}: {e}", json_path.display()))?;
    let csv_path = dir.join(format!("{name}.csv"));
    let file = fs::File::create(&csv_path).map_err(|e| format!("cannot write {}: {e}", csv_path.display()))?;
    mhl_core::report::write_csv(file, &out.header, out.rows.iter().cloned()).map_err(|e| e.to_string())
}

fn run(cli: Cli) -> Result<ExitCode, (u8, String)> {
    let invalid = |e: String| (2u8, e);
    let name = cli.command.name();
    let (cfg, dir) = config::load(cli.config.as_deref()).map_err(invalid)?;
    let resolved = config::resolve(name, cfg, &dir, cli.seed, cli.command.defaults()).map_err(invalid)?;
    let exec = execution(cli.jobs).map_err(invalid)?;
    let outcome = match cli.command {
        Command::Identities => commands::identities(&resolved),
        Command::Constants => commands::constants(&resolved, exec),
        Command::Decompose => commands::decompose(&resolved, exec),
        Command::Probe => commands::probe(&resolved, exec),
        Command::Gradcheck => commands::gradcheck(&resolved, exec),
    }
    .map_err(invalid)?;
    write_outputs(&cli.out, name, &resolved, &outcome).map_err(|e| (1, e))?;
    for e in &outcome.errors {
        eprintln!("{name}: {e}");
    }
    let code = if outcome.non_convergence {
        3
    } else if outcome.pass {
        0
    } else {
        1
    };
    println!("{name}: {}", if code == 0 { "PASS" } else { "FAIL" });
    Ok(ExitCode::from(code))
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
