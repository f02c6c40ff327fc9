//! Operator CLI: `serve`, `export`, `validate`.

use std::fs::File;
use std::io::BufWriter;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tae_core::llm::LlmConfig;
use tae_core::model::{ClipPayload, TrackKind};
use tae_core::persist::{load_from, save_to, ProjectStore};
use tae_core::timeline::{self, eval};
use tae_core::{Error, ObjectId, Project, Result, Time};

use crate::{api, AppState};

/// Exit code for a document that does not validate or a command that fails.
pub const EXIT_INVALID: u8 = 1;

#[derive(Debug, Parser)]
#[command(name = "tae", version, about = "Text-animation editing engine")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the HTTP service.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value = "data")]
        data_dir: PathBuf,
        /// Rule-mode agents and no language model, whatever the environment says.
        #[arg(long)]
        offline: bool,
    },
    /// Write render states as JSON lines, one frame per line.
    Export {
        /// Project id in the data directory, or a path to a project file.
        #[arg(long)]
        project: String,
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
        fps: u32,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "data")]
        data_dir: PathBuf,
    },
    /// Parse a project file and check its invariants.
    Validate { file: PathBuf },
    /// Save a growing project to one file over and over (crash-safety drills).
    #[command(hide = true)]
    StressSave {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = u64::MAX)]
        iterations: u64,
    },
}

pub fn run(cli: Cli) -> ExitCode {
    let result = match cli.command {
        Command::Serve { port, host, data_dir, offline } => serve(&host, port, &data_dir, offline),
        Command::Export { project, fps, out, data_dir } => export(&project, fps, &out, &data_dir),
        Command::Validate { file } => validate(&file),
        Command::StressSave { out, iterations } => stress_save(&out, iterations),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}: {e}", e.code());
            ExitCode::from(EXIT_INVALID)
        }
    }
}

fn serve(host: &str, port: u16, data_dir: &Path, offline: bool) -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .init();
    let mut cfg = LlmConfig::from_env();
    cfg.offline |= offline;
    let state = AppState::from_config(data_dir, &cfg)?;
    let addr: SocketAddr = format!("{host}:{port}")
        .parse()
        .map_err(|e| Error::SchemaViolation(format!("bad listen address: {e}")))?;
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await?;
        tracing::info!(%addr, online = cfg.online(), data_dir = %data_dir.display(), "listening");
        axum::serve(listener, api::router(state))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        Ok(())
    })
}

fn load_project(project: &str, data_dir: &Path) -> Result<Project> {
    let as_path = Path::new(project);
    if as_path.is_file() {
        return load_from(as_path);
    }
    let id: ObjectId = project.parse().map_err(|_| Error::UnknownProject(project.to_string()))?;
    ProjectStore::open(data_dir)?.load(&id)
}

fn export(project: &str, fps: u32, out: &Path, data_dir: &Path) -> Result<()> {
    let p = load_project(project, data_dir)?;
    let frames = eval::render_frames(&p, fps);
    let w = BufWriter::new(File::create(out)?);
    eval::write_frames(&frames, w)?;
    eprintln!("wrote {} frames to {}", frames.len(), out.display());
    Ok(())
}

fn validate(file: &Path) -> Result<()> {
    let p = load_from(file)?;
    println!(
        "ok: {} revision {} ({} tracks, {} clips, {} animations)",
        p.id,
        p.revision,
        p.tracks.len(),
        p.clips.len(),
        p.animations.len()
    );
    Ok(())
}

fn stress_save(out: &Path, iterations: u64) -> Result<()> {
    let mut p = Project::new("stress", 7);
    let track = p.add_track(TrackKind::Text, "Text 1").id;
    for i in 0..iterations {
        let start = Time::from_millis(i as i64 * 1000);
        let text = format!("line {i} {}", "x".repeat((i % 200) as usize));
        timeline::add_clip(&mut p, &track, start, Time::from_millis(1000), ClipPayload::text(text))?;
        save_to(&p, out)?;
    }
    Ok(())
}
