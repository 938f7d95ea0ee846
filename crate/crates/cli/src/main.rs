//! `ssr`: scenario-driven state reconstruction for LTI systems under
//! sparse sensor attacks.
//!
//! Exit codes: 0 reconstructed (or certificate found), 1 usage/config
//! error, 2 ambiguous, 3 infeasible (or no certificate).

mod expr;
mod report;
mod run;
mod scenario;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use run::{exit_code, run_attack_synth, run_audit, run_reconstruct, Artifacts, SynthTarget};
use scenario::{resolve, Scenario, ScenarioFile};

#[derive(Parser)]
#[command(
    name = "ssr",
    version,
    about = "Exact state reconstruction for LTI systems under sparse sensor attacks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Survey observability: s_max, window bounds, majority guarantees.
    Audit(CommonArgs),
    /// Simulate the scenario and run the configured reconstructor(s).
    Reconstruct(CommonArgs),
    /// Search for an attack sequence defeating a reconstructor.
    AttackSynth {
        #[command(flatten)]
        common: CommonArgs,
        /// Which reconstructor the attack must defeat.
        #[arg(long, value_enum)]
        target: TargetArg,
    },
}

#[derive(Args)]
struct CommonArgs {
    /// Scenario file (TOML).
    config: PathBuf,
    /// Override the window length r.
    #[arg(long)]
    r: Option<usize>,
    /// Override the absolute equality tolerance.
    #[arg(long)]
    eq_tol: Option<f64>,
    /// Override the dynamics-consistency residual bound (default 0.1).
    #[arg(long)]
    residual_tol: Option<f64>,
    /// Report format.
    #[arg(long, value_enum, default_value = "human")]
    format: FormatArg,
    /// Write the report to this path instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum TargetArg {
    Sesvs,
    Sesgc,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Human,
    Machine,
}

fn load_scenario(args: &CommonArgs) -> Result<Scenario, String> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| format!("cannot read {}: {e}", args.config.display()))?;
    let mut file: ScenarioFile =
        toml::from_str(&text).map_err(|e| format!("{}: {e}", args.config.display()))?;
    // Command-line overrides land in the file image so the resolved echo
    // reflects what actually ran.
    if args.r.is_some() {
        file.run.r = args.r;
    }
    if args.eq_tol.is_some() {
        file.run.eq_tol_abs = args.eq_tol;
    }
    if args.residual_tol.is_some() {
        file.run.residual_tol = args.residual_tol;
    }
    resolve(file).map_err(|e| format!("{}: {e}", args.config.display()))
}

fn emit(args: &CommonArgs, artifacts: &Artifacts, verb: &str) -> Result<(), String> {
    let text = match args.format {
        FormatArg::Human => report::human_report(artifacts, verb),
        FormatArg::Machine => report::machine_report(artifacts, verb),
    };
    match &args.out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| format!("cannot write {}: {e}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn execute() -> Result<u8, String> {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            // Help and version are not usage errors.
            return if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                Ok(0)
            } else {
                Err(e.to_string())
            };
        }
    };
    let (args, verb, artifacts) = match &cli.command {
        Command::Audit(args) => {
            let scenario = load_scenario(args)?;
            (args, "audit", run_audit(&scenario).map_err(|e| e.to_string())?)
        }
        Command::Reconstruct(args) => {
            let scenario = load_scenario(args)?;
            (
                args,
                "reconstruct",
                run_reconstruct(&scenario).map_err(|e| e.to_string())?,
            )
        }
        Command::AttackSynth { common, target } => {
            let scenario = load_scenario(common)?;
            let target = match target {
                TargetArg::Sesvs => SynthTarget::Sesvs,
                TargetArg::Sesgc => SynthTarget::Sesgc,
            };
            (
                common,
                "attack-synth",
                run_attack_synth(&scenario, target).map_err(|e| e.to_string())?,
            )
        }
    };
    emit(args, &artifacts, verb)?;
    Ok(exit_code(&artifacts) as u8)
}

fn main() -> ExitCode {
    match execute() {
        Ok(code) => ExitCode::from(code),
        Err(message) => {
            eprintln!("{message}");
            ExitCode::from(1)
        }
    }
}
