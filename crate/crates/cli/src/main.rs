use std::path::PathBuf;

use anyhow::{Context, Result};
use asv_fallback::scenario::load_scenario;
use asv_fallback::session::SessionScene;
use asv_fallback_cli::commands;
use asv_fallback_cli::embedding::EmbeddingSpec;
use asv_fallback_cli::server::{serve, ServeConfig, ServeOptions};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "asv-fallback", version, about = "Fallback maneuver selection for autonomous surface vessels")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Embed nominal images and store the cache with its calibrated threshold.
    CalibrateMonitor {
        /// Directory of nominal PNG images.
        #[arg(long)]
        images: Option<PathBuf>,
        /// Scenario corpus; its nominal scenes are used.
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Embedding pipeline file (TOML/JSON); offline mock when omitted.
        #[arg(long)]
        embedding: Option<PathBuf>,
        #[arg(long, default_value_t = 0.95)]
        alpha: f64,
        /// Cache file; the sidecar is written next to it as `<out>.json`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Score images against a calibrated cache; prints one JSON line each.
    ScoreMonitor {
        #[arg(long)]
        cache: PathBuf,
        #[arg(long)]
        images: Option<PathBuf>,
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        embedding: Option<PathBuf>,
    },
    /// Generate candidates for one scene and write the overlay and JSON.
    GenCandidates {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the offline experiment suite described by a TOML/JSON config.
    EvalOffline {
        #[arg(long)]
        config: PathBuf,
    },
    /// Serve a live session over WebSocket at /ws.
    ServeSession {
        #[arg(long)]
        scene: PathBuf,
        /// Session config (TOML/JSON) with `[selector]` and `[session]` tables.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
        /// Static token clients must present.
        #[arg(long, env = "ASV_SESSION_TOKEN")]
        token: Option<String>,
        /// Append-only JSON-lines event log.
        #[arg(long)]
        event_log: Option<PathBuf>,
        /// Calibrated monitor cache; with `session.auto_alert` an anomalous
        /// scene raises the alert on the first tick.
        #[arg(long)]
        monitor_cache: Option<PathBuf>,
        #[arg(long)]
        embedding: Option<PathBuf>,
    },
    /// Print the markdown tables of a suite report.json.
    Report {
        #[arg(long)]
        input: PathBuf,
        /// Write to this file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn pipeline(spec: Option<PathBuf>) -> Result<asv_fallback_cli::embedding::Pipeline> {
    match spec {
        Some(p) => EmbeddingSpec::load(&p)?.build(),
        None => EmbeddingSpec::Mock.build(),
    }
}

fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .with_writer(std::io::stderr)
        .init();
    match Cli::parse().command {
        Cmd::CalibrateMonitor { images, corpus, embedding, alpha, out } => {
            let inputs = commands::calibration_inputs(images.as_deref(), corpus.as_deref())?;
            let summary = commands::calibrate_monitor(&inputs, &pipeline(embedding)?, alpha, &out)?;
            println!("{}", serde_json::to_string(&summary)?);
        }
        Cmd::ScoreMonitor { cache, images, corpus, embedding } => {
            let monitor = commands::load_monitor(&cache)?;
            let inputs = match (images.as_deref(), corpus.as_deref()) {
                (None, Some(dir)) => asv_fallback::scenario::load_corpus::<f64>(dir)?
                    .iter()
                    .map(|s| Ok((s.scene_id.clone(), commands::scene_png(s)?)))
                    .collect::<Result<Vec<_>>>()?,
                (images, _) => commands::calibration_inputs(images, None)?,
            };
            for line in commands::score_monitor(&monitor, &inputs, &pipeline(embedding)?)? {
                println!("{}", serde_json::to_string(&line)?);
            }
        }
        Cmd::GenCandidates { scene, out } => {
            println!("{}", serde_json::to_string(&commands::gen_candidates(&scene, &out)?)?);
        }
        Cmd::EvalOffline { config } => {
            let outcome = commands::eval_offline(&config)?;
            eprintln!(
                "{} selector calls, {} judge calls, {} gaps",
                outcome.selector_calls,
                outcome.judge_calls,
                outcome.report.gaps.len()
            );
            println!("{}", outcome.report_md.display());
        }
        Cmd::ServeSession { scene, config, addr, token, event_log, monitor_cache, embedding } => {
            let cfg = match config {
                Some(p) => ServeConfig::load(&p)?,
                None => ServeConfig::default(),
            };
            let scenario = load_scenario::<f64>(&scene)?;
            let anomalous = match monitor_cache {
                Some(cache) => {
                    let monitor = commands::load_monitor(&cache)?;
                    let inputs = vec![(scenario.scene_id.clone(), commands::scene_png(&scenario)?)];
                    let line = commands::score_monitor(&monitor, &inputs, &pipeline(embedding)?)?.remove(0);
                    tracing::info!(score = line.score, tau = line.tau, verdict = ?line.verdict, "monitor");
                    line.verdict == asv_fallback::monitor::Verdict::Anomalous
                }
                None => false,
            };
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(async {
                let listener = tokio::net::TcpListener::bind(&addr).await.with_context(|| format!("bind {addr}"))?;
                let opts = ServeOptions { token, event_log, max_ticks: None };
                let handle = serve(listener, SessionScene::from_scenario(&scenario)?, cfg.session.clone(), cfg.selector_backend()?, anomalous, opts).await?;
                tokio::select! {
                    r = tokio::signal::ctrl_c() => { r?; handle.shutdown() }
                }
            })?;
        }
        Cmd::Report { input, out } => {
            let md = commands::render_report(&input)?;
            match out {
                Some(p) => std::fs::write(&p, md).with_context(|| format!("write {}", p.display()))?,
                None => print!("{md}"),
            }
        }
    }
    Ok(())
}
