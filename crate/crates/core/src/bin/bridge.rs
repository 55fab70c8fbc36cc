use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use bridge_core::daemon::{
    api, preset, Daemon, DaemonConfig, DispatchClock, ProfileRecord, ProfileStore, SessionPhase,
    SinkKind,
};
use bridge_core::engine::{Threshold, DEFAULT_REFRACTORY_SECONDS};
use bridge_core::protocol::DEFAULT_PORT;
use bridge_core::simulator::{
    evaluate_run, metrics_csv, run_mock_server, sweep_thresholds_with, EndpointConfig, MockOptions,
    Pacing, Scenario,
};

#[derive(Parser)]
#[command(name = "bridge", version, about = "Mental-command stream to keystroke bridge")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the daemon with its HTTP control API.
    Serve {
        #[arg(long, default_value_t = format!("ws://127.0.0.1:{DEFAULT_PORT}/"))]
        cortex_url: String,
        #[arg(long, default_value_t = 7070)]
        control_port: u16,
        #[arg(long, default_value = "profiles.json")]
        profiles: PathBuf,
        #[arg(long, value_enum, default_value_t = Sink::Recorded)]
        sink: Sink,
        /// Append recorded dispatches to this file.
        #[arg(long)]
        dispatch_log: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_REFRACTORY_SECONDS)]
        refractory: f64,
    },
    /// Serve a scenario as a mock headset service.
    Sim {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = DEFAULT_PORT)]
        port: u16,
        /// Push samples as fast as possible instead of at their timestamps.
        #[arg(long)]
        accelerated: bool,
        /// Seconds a training request takes before it succeeds.
        #[arg(long, default_value_t = 8.0)]
        training_delay: f64,
    },
    /// Write false-activation / miss / latency metrics for thresholds 1..=10.
    Sweep {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_REFRACTORY_SECONDS)]
        refractory: f64,
    },
    /// Headless end-to-end run against an embedded accelerated simulator.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        profile: String,
        #[arg(long)]
        threshold: i64,
        /// Profile store; the profile is synthesized from the scenario when
        /// absent.
        #[arg(long)]
        profiles: Option<PathBuf>,
        #[arg(long, default_value = "youtube")]
        activity: String,
        #[arg(long, default_value = "dispatch.tsv")]
        log: PathBuf,
        #[arg(long, default_value = "metrics.csv")]
        metrics: PathBuf,
        #[arg(long, default_value_t = DEFAULT_REFRACTORY_SECONDS)]
        refractory: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Sink {
    Recorded,
    Stdout,
    Os,
}

impl From<Sink> for SinkKind {
    fn from(s: Sink) -> Self {
        match s {
            Sink::Recorded => SinkKind::Recorded,
            Sink::Stdout => SinkKind::Stdout,
            Sink::Os => SinkKind::Os,
        }
    }
}

#[tokio::main]
async fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
        )
        .with_writer(std::io::stderr)
        .init();

    let cli = Cli::parse();
    let result = match cli.command {
        Command::Serve { cortex_url, control_port, profiles, sink, dispatch_log, refractory } => {
            serve(cortex_url, control_port, &profiles, sink.into(), dispatch_log, refractory).await
        }
        Command::Sim { scenario, port, accelerated, training_delay } => {
            sim(&scenario, port, accelerated, training_delay).await
        }
        Command::Sweep { scenario, out, refractory } => sweep(&scenario, &out, refractory),
        Command::Run { scenario, profile, threshold, profiles, activity, log, metrics, refractory } => {
            run(RunArgs {
                scenario: &scenario,
                profile: &profile,
                threshold,
                profiles: profiles.as_deref(),
                activity: &activity,
                log: &log,
                metrics: &metrics,
                refractory,
            })
            .await
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

async fn serve(
    cortex_url: String,
    control_port: u16,
    profiles: &Path,
    sink: SinkKind,
    dispatch_log_path: Option<PathBuf>,
    refractory_seconds: f64,
) -> Result<()> {
    let store = ProfileStore::open(profiles)?;
    let config = DaemonConfig {
        cortex_url,
        sink,
        dispatch_clock: DispatchClock::Monotonic,
        refractory_seconds,
        dispatch_log_path,
    };
    let daemon = Daemon::new(config, store);
    let (addr, task) = api::serve(daemon.clone(), SocketAddr::from(([127, 0, 0, 1], control_port)))
        .await
        .context("binding control port")?;
    tracing::info!("control API on http://{addr}");

    let mut status = daemon.status_subscribe();
    let logger = tokio::spawn(async move {
        while let Some(ev) = status.recv().await {
            tracing::info!(phase = %ev.phase, level = ?ev.level, "{}", ev.message);
        }
    });

    tokio::signal::ctrl_c().await?;
    if daemon.phase().is_running() {
        let _ = daemon.stop_session().await;
    }
    task.abort();
    logger.abort();
    Ok(())
}

async fn sim(path: &Path, port: u16, accelerated: bool, training_delay: f64) -> Result<()> {
    let scenario = Scenario::load(path)?;
    let options = MockOptions {
        pacing: if accelerated { Pacing::Accelerated } else { Pacing::Paced },
        training_delay: Duration::try_from_secs_f64(training_delay).context("training delay")?,
        fault: None,
    };
    let endpoint = EndpointConfig { port, ..EndpointConfig::default() };
    let server = run_mock_server(scenario, &endpoint, options).await?;
    tracing::info!("mock headset service on {}", server.url());
    tokio::signal::ctrl_c().await?;
    server.shutdown().await;
    Ok(())
}

fn sweep(path: &Path, out: &Path, refractory: f64) -> Result<()> {
    let scenario = Scenario::load(path)?;
    let reports = sweep_thresholds_with(&scenario, refractory)?;
    fs::write(out, metrics_csv(&reports)).with_context(|| format!("writing {}", out.display()))?;
    Ok(())
}

struct RunArgs<'a> {
    scenario: &'a Path,
    profile: &'a str,
    threshold: i64,
    profiles: Option<&'a Path>,
    activity: &'a str,
    log: &'a Path,
    metrics: &'a Path,
    refractory: f64,
}

async fn run(args: RunArgs<'_>) -> Result<()> {
    let scenario = Scenario::load(args.scenario)?;
    let threshold = Threshold::new(args.threshold)?;

    let mut store = match args.profiles {
        Some(path) => ProfileStore::open(path)?,
        None => ProfileStore::in_memory(),
    };
    if store.get(args.profile).is_none() {
        if args.profiles.is_some() {
            bail!("profile {:?} not found in store", args.profile);
        }
        let Some(binding) = preset(args.activity) else {
            bail!("unknown activity {:?}", args.activity);
        };
        let record = ProfileRecord {
            name: args.profile.to_string(),
            task_name: scenario.action.clone(),
            binding,
            default_threshold: threshold,
            trained: true,
        };
        store.put(record, false)?;
    }

    fs::write(args.log, "").with_context(|| format!("truncating {}", args.log.display()))?;
    let server = run_mock_server(scenario.clone(), &EndpointConfig::ephemeral(), MockOptions::accelerated())
        .await?;
    let config = DaemonConfig {
        cortex_url: server.url(),
        sink: SinkKind::Recorded,
        dispatch_clock: DispatchClock::Stream,
        refractory_seconds: args.refractory,
        dispatch_log_path: Some(args.log.to_path_buf()),
    };
    let daemon = Daemon::new(config, store);
    daemon.start_session(args.profile, args.activity, args.threshold)?;

    let budget = Duration::from_secs_f64(30.0 + scenario.duration());
    let settled = daemon
        .wait_for_phase(budget, |p| matches!(p, SessionPhase::Idle | SessionPhase::Faulted))
        .await;
    server.shutdown().await;
    match settled {
        Some(SessionPhase::Idle) => {}
        Some(_) => bail!("session faulted before the scenario finished"),
        None => bail!("session did not finish within {budget:?}"),
    }

    let records = daemon.dispatch_log().snapshot();
    let report = evaluate_run(&scenario, &records, threshold);
    fs::write(args.metrics, metrics_csv(std::slice::from_ref(&report)))
        .with_context(|| format!("writing {}", args.metrics.display()))?;
    println!(
        "{} dispatches, {} false activations, {} missed segments",
        records.len(),
        report.false_activations,
        report.missed_segments
    );
    Ok(())
}
