use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use riesz_cli::commands::{self, RunOutcome};
use riesz_cli::config::{load_config, Resolved};
use riesz_cli::{exit, CliError};

#[derive(Parser)]
#[command(name = "riesz", version, about = "Weight diagnostics, operator sweeps, atoms and verification checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; defaults to `output.dir` relative to the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; all cores when absent.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Weight class constants and critical indices.
    Weights {
        #[command(subcommand)]
        action: WeightsAction,
    },
    /// `T f` over a lattice, as CSV.
    Operator {
        #[command(subcommand)]
        action: OperatorAction,
    },
    /// Atom generation and validation.
    Atoms {
        #[command(subcommand)]
        action: AtomsAction,
    },
    /// Runs the checks selected in the config.
    Verify(Common),
}

#[derive(Subcommand)]
enum WeightsAction {
    Classify(Common),
}

#[derive(Subcommand)]
enum OperatorAction {
    Sweep(Common),
}

#[derive(Subcommand)]
enum AtomsAction {
    Gen(Common),
    Validate {
        #[command(flatten)]
        common: Common,
        /// Atom records to check; defaults to `atoms.jsonl` in the output directory.
        #[arg(long)]
        atoms: Option<PathBuf>,
    },
}

fn prepare(c: &Common) -> Result<(Resolved, PathBuf), CliError> {
    if let Some(j) = c.jobs {
        if j == 0 {
            return Err(CliError::Config("--jobs must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
            .map_err(|e| CliError::Config(format!("--jobs: {e}")))?;
    }
    let (mut cfg, base) = load_config(&c.config)?;
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    let r = Resolved::new(cfg, base)?;
    let out = r.output_dir(c.out.as_deref());
    Ok((r, out))
}

fn run(cli: Cli) -> Result<RunOutcome, CliError> {
    match cli.command {
        Command::Weights {
            action: WeightsAction::Classify(c),
        } => {
            let (r, out) = prepare(&c)?;
            commands::weights_classify(&r, &out)
        }
        Command::Operator {
            action: OperatorAction::Sweep(c),
        } => {
            let (r, out) = prepare(&c)?;
            commands::operator_sweep(&r, &out)
        }
        Command::Atoms {
            action: AtomsAction::Gen(c),
        } => {
            let (r, out) = prepare(&c)?;
            commands::atoms_gen(&r, &out)
        }
        Command::Atoms {
            action: AtomsAction::Validate { common, atoms },
        } => {
            let (r, out) = prepare(&common)?;
            commands::atoms_validate(&r, &out, atoms.as_deref())
        }
        Command::Verify(c) => {
            let (r, out) = prepare(&c)?;
            commands::verify(&r, &out)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { exit::CONFIG } else { exit::PASS };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(o) => {
            for f in &o.files {
                println!("{}", f.display());
            }
            ExitCode::from(o.code as u8)
        }
        Err(e) => {
            let code = e.exit_code();
            // machine-readable failure line on stderr
            eprintln!("{}", serde_json::json!({ "error": e.to_string(), "exit_code": code }));
            ExitCode::from(code as u8)
        }
    }
}
