use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::AtomicBool;
use std::sync::Arc;
use std::time::Instant;

use clap::{Parser, Subcommand};
use seethrough::config::LiveFile;
use seethrough::hub::Hub;
use seethrough::live::{start_live, Backends, LiveOptions};
use seethrough::record::{load_session, replay};
use seethrough::server::{serve, AppState};
use seethrough::Error;
use seethrough_core::par::Parallelism;
use seethrough_core::pipeline::source::open_source;
use seethrough_core::pipeline::{Clock, MonotonicClock, SourceSpec, SteppedClock};
use seethrough_core::study::{ingest_dataset, run_study, write_outputs, BackendsConfig, StudySettings};

#[derive(Parser)]
#[command(name = "seethrough", version, about = "Camera → one sentence → generated image, live or as a study")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the live loop and stream it.
    Live {
        /// camera:N, video:PATH or dir:PATH
        #[arg(long)]
        source: SourceSpec,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Record the session into this directory.
        #[arg(long)]
        record: Option<PathBuf>,
        #[arg(long, default_value = "127.0.0.1:8080")]
        listen: SocketAddr,
        /// Fake clock advancing 10 ms per read, for reproducible logs.
        #[arg(long)]
        deterministic_clock: bool,
        /// Keep serving after the source ends, until interrupted.
        #[arg(long)]
        linger: bool,
    },
    /// Stream a recorded session without running any backend.
    Replay {
        #[arg(long)]
        session: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        listen: SocketAddr,
        /// Playback speed factor; 0 plays as fast as possible.
        #[arg(long, default_value_t = 1.0)]
        speed: f64,
        /// Start immediately instead of waiting for the first viewer.
        #[arg(long)]
        no_wait: bool,
    },
    /// Round-trip consistency study.
    Study {
        #[command(subcommand)]
        command: StudyCommand,
    },
}

#[derive(Subcommand)]
enum StudyCommand {
    Run {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value_t = 256)]
        size: u32,
        #[arg(long, default_value_t = 4)]
        steps: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Backends TOML; all-stub when omitted.
        #[arg(long)]
        backends: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Score on one thread.
        #[arg(long)]
        sequential: bool,
    },
}

async fn ctrl_c() {
    let _ = tokio::signal::ctrl_c().await;
}

async fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Live { source, config, record, listen, deterministic_clock, linger } => {
            let file = match config {
                Some(p) => LiveFile::load(&p).map_err(Error::Config)?,
                None => LiveFile::default(),
            };
            let built = file.backends.build(&file.base)?;
            let clock: Arc<dyn Clock> = if deterministic_clock {
                Arc::new(SteppedClock::new(0.01))
            } else {
                Arc::new(MonotonicClock::new())
            };
            let src = open_source(&source, clock.clone(), file.pipeline.live_resolution)?;
            let hub = Hub::new(file.service.mailbox_capacity);
            let listener = tokio::net::TcpListener::bind(listen).await?;
            log::info!("streaming on ws://{}/stream", listener.local_addr()?);
            let handle = start_live(
                src,
                Backends { captioner: built.captioner, generator: built.generator },
                LiveOptions { config: file.pipeline, max_retries: file.service.max_retries, record },
                hub.clone(),
                clock,
            )?;
            let state = AppState { hub: hub.clone(), control: Some(handle.controller()) };
            let server = tokio::spawn(serve(listener, state, ctrl_c()));
            let controller = handle.controller();
            tokio::spawn(async move {
                let _ = tokio::signal::ctrl_c().await;
                controller.stop();
            });
            let summary = tokio::task::spawn_blocking(move || handle.join()).await.expect("live loop");
            log::info!(
                "{} transforms, {} skipped frames, {:?}",
                summary.transforms,
                summary.skipped_frames,
                summary.stop_reason
            );
            if linger {
                server.await.expect("server task")?;
            }
            Ok(())
        }
        Command::Replay { session, listen, speed, no_wait } => {
            let events = load_session(&session)?;
            let hub = Hub::new(events.len().max(1));
            let listener = tokio::net::TcpListener::bind(listen).await?;
            log::info!("replaying {} events on ws://{}/stream", events.len(), listener.local_addr()?);
            let server = tokio::spawn(serve(listener, AppState { hub: hub.clone(), control: None }, ctrl_c()));
            let replay_hub = hub.clone();
            tokio::task::spawn_blocking(move || {
                if !no_wait {
                    replay_hub.wait_for_subscribers(1, None);
                }
                let sent = replay(&events, speed, &replay_hub, &AtomicBool::new(false));
                log::info!("replayed {sent} events");
                replay_hub.close();
            })
            .await
            .expect("replay thread");
            server.await.expect("server task")?;
            Ok(())
        }
        Command::Study { command: StudyCommand::Run { dataset, size, steps, seed, backends, out, sequential } } => {
            let started = Instant::now();
            let (cfg, base) = match backends {
                Some(p) => BackendsConfig::load(&p)?,
                None => (BackendsConfig::default(), PathBuf::from(".")),
            };
            let built = cfg.build(&base)?;
            let ds = ingest_dataset(&dataset, size)?;
            let mode = if sequential { Parallelism::Sequential } else { Parallelism::Parallel };
            let outcome = run_study(&ds, &StudySettings { size, steps, seed, mode }, &built)?;
            write_outputs(&outcome, &out)?;
            for row in outcome.report.text.iter().chain(&outcome.report.visual) {
                let f = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.3}"));
                println!(
                    "{:<18} P {} ± {}  R {} ± {}  t {}  p {}  d {}{}",
                    row.metric_id.as_str(),
                    f(row.ave_p),
                    f(row.std_p),
                    f(row.ave_r),
                    f(row.std_r),
                    f(row.t),
                    row.p.map_or("-".into(), |p| format!("{p:.2e}")),
                    f(row.d),
                    row.skip_reason.as_deref().map(|r| format!("  [skipped: {r}]")).unwrap_or_default()
                );
            }
            println!(
                "{} items scored, {} dropped, {} unreadable; wrote {} in {:.1?}",
                outcome.report.snapshot.items_scored,
                outcome.report.snapshot.drop_count,
                outcome.report.snapshot.images_skipped,
                out.display(),
                started.elapsed()
            );
            Ok(())
        }
    }
}

#[tokio::main]
async fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Err(e) = run(Cli::parse()).await {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
