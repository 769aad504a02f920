use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use rfglove_core::device::DeviceConfig;
use rfglove_core::metrics::Analysis;
use rfglove_runtime::experiment::{run_experiment, ExperimentSpec};
use rfglove_runtime::{script, server, stats};

#[derive(Parser)]
#[command(name = "rfglove", version, about = "RFID assistive glove simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a command script against a scene and write the device transcript as JSON lines.
    Sim {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        script: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Tag database directory to load and write through to.
        #[arg(long)]
        db: Option<PathBuf>,
    },
    /// Run a synthetic cohort through one of the four trials and write the report.
    Experiment {
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=4))]
        test: u8,
        #[arg(long, default_value_t = 17)]
        participants: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Override the participants' error probability.
        #[arg(long)]
        p_error: Option<f64>,
    },
    /// Run one analysis on a CSV table (header row, one subject per row).
    Stats {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long, value_parser = parse_analysis)]
        analysis: Analysis,
        #[arg(long)]
        out: PathBuf,
    },
    /// Serve live sessions over HTTP and WebSocket.
    Serve {
        #[arg(long, env = "RFGLOVE_PORT", default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
}

fn parse_analysis(s: &str) -> Result<Analysis, String> {
    s.parse().map_err(|e: rfglove_core::metrics::MetricsError| e.to_string())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Sim {
            scenario,
            script,
            out,
            db,
        } => {
            let n = script::simulate_files(&scenario, &script, &out, db.as_deref(), &DeviceConfig::default())?;
            tracing::info!(steps = n, out = %out.display(), "transcript written");
        }
        Command::Experiment {
            test,
            participants,
            seed,
            out,
            p_error,
        } => {
            let mut spec = ExperimentSpec::new(test, participants, seed);
            if let Some(p) = p_error {
                spec = spec.with_p_error(p);
            }
            let report = run_experiment(&spec)?;
            std::fs::write(&out, report.to_json()).with_context(|| format!("writing {}", out.display()))?;
            tracing::info!(test, participants, out = %out.display(), "report written");
        }
        Command::Stats { csv, analysis, out } => {
            stats::analyse_to_file(&csv, analysis, &out)?;
        }
        Command::Serve { port, host } => {
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async {
                let listener = tokio::net::TcpListener::bind((host.as_str(), port))
                    .await
                    .with_context(|| format!("binding {host}:{port}"))?;
                tracing::info!(addr = %listener.local_addr()?, "serving");
                server::serve(listener).await?;
                anyhow::Ok(())
            })?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
