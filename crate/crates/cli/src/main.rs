use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use synthgov_cli::config::LoadedConfig;
use synthgov_cli::error::{CliError, Result};
use synthgov_cli::pipeline::{anonymize_document, BackendKind, Pipeline, ANNOTATIONS};
use synthgov_cli::service::{serve, ServiceState};

#[derive(Parser)]
#[command(name = "synthgov", version, about = "Synthetic survey simulation with governance checks")]
struct Cli {
    /// Pipeline configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the seed in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value = "run")]
    run_dir: PathBuf,
    #[arg(long, global = true, value_enum, default_value_t = Backend::Stub)]
    backend: Backend,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Backend {
    Stub,
    Remote,
}

#[derive(Subcommand)]
enum Command {
    /// Clean the survey and derive reference distributions.
    Ingest,
    /// Anonymize the demographic codes of the run, or a standalone cluster file.
    Anonymize {
        #[arg(long, requires_all = ["constraints", "k", "m"])]
        cluster: Option<PathBuf>,
        #[arg(long)]
        constraints: Option<PathBuf>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        m: Option<usize>,
        /// Write the standalone result here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample profiles and render prompts.
    Profiles,
    /// Dispatch prompts to the backend and parse answers.
    Simulate,
    /// Score synthetic answers against the survey.
    Evaluate,
    /// Classify risk and compute the pillar scorecard.
    Govern,
    /// Write the impact assessment.
    Report,
    /// Every stage from ingest to report.
    Run,
    /// Build blind review tasks from human and synthetic answers.
    ReviewTasks,
    /// Merge an annotation file and report agreement.
    ReviewImport {
        #[arg(long)]
        file: PathBuf,
    },
    /// Serve the review endpoints.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        /// Static files for the review UI.
        #[arg(long)]
        ui_dir: Option<PathBuf>,
    },
}

fn print<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn pipeline(cli: &Cli) -> Result<Pipeline> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| CliError::Config("--config is required for this command".into()))?;
    let backend = match cli.backend {
        Backend::Stub => BackendKind::Stub,
        Backend::Remote => BackendKind::Remote,
    };
    Pipeline::new(LoadedConfig::load(path, cli.seed)?, &cli.run_dir, backend)
}

fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Anonymize {
            cluster: Some(cluster),
            constraints,
            k,
            m,
            out,
        } => {
            let missing = || CliError::Config("--cluster needs --constraints, --k and --m".into());
            let text = anonymize_document(
                cluster,
                constraints.as_deref().ok_or_else(missing)?,
                k.ok_or_else(missing)?,
                m.ok_or_else(missing)?,
            )?;
            match out {
                Some(p) => std::fs::write(p, text)?,
                None => print!("{text}"),
            }
            Ok(())
        }
        Command::Anonymize { .. } => print(&pipeline(cli)?.anonymize()?.digest),
        Command::Ingest => print(&pipeline(cli)?.ingest()?),
        Command::Profiles => print(&pipeline(cli)?.profiles()?),
        Command::Simulate => print(&pipeline(cli)?.simulate()?),
        Command::Evaluate => print(&pipeline(cli)?.evaluate()?),
        Command::Govern => {
            let summary = pipeline(cli)?.govern()?;
            print(&summary)?;
            if summary.tier.tier == synthgov_core::governance::Tier::Unacceptable {
                return Err(CliError::Veto(summary.tier.rationale.join(", ")));
            }
            Ok(())
        }
        Command::Report | Command::Run => {
            let p = pipeline(cli)?;
            let report = if matches!(cli.command, Command::Run) { p.run_all()? } else { p.report()? };
            println!("verdict: {}", report.verdict.label());
            println!("assessment: {}", p.path(synthgov_cli::pipeline::DPIA).display());
            Ok(())
        }
        Command::ReviewTasks => {
            let tasks = pipeline(cli)?.review_tasks()?;
            println!("{} review tasks written", tasks.len());
            Ok(())
        }
        Command::ReviewImport { file } => print(&pipeline(cli)?.review_import(file)?),
        Command::Serve { port, ui_dir } => {
            let store = Pipeline::load_store(&cli.run_dir)?;
            let state = ServiceState::new(store, Some(cli.run_dir.join(ANNOTATIONS)));
            serve(state, ui_dir.clone(), *port).map_err(|e| CliError::Config(format!("cannot serve: {e}")))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("synthgov: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
