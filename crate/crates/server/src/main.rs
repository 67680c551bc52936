use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use tracing_subscriber::EnvFilter;

use coach_core::career::{CareerError, CareerTree};
use coach_core::courses::{ingest_csv, DEFAULT_KEYWORDS};
use coach_core::skills::SkillsStore;
use coach_core::time::SystemClock;
use coach_server::config::{AppConfig, COLLECTION_NAME};

#[derive(Parser)]
#[command(name = "coach", version, about = "Career coaching service")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP API.
    Serve {
        #[arg(long, env = "COACH_CONFIG")]
        config: PathBuf,
        /// Overrides `server.store_dir`.
        #[arg(long, env = "COACH_STORE_DIR")]
        store_dir: Option<PathBuf>,
        /// Overrides `server.listen_addr`.
        #[arg(long, env = "COACH_LISTEN_ADDR")]
        listen_addr: Option<String>,
    },
    /// Check a career tree (and optionally a skills file against it).
    ValidateTree {
        tree: PathBuf,
        #[arg(long)]
        skills: Option<PathBuf>,
    },
    /// Filter a course CSV by keyword and generate outcomes for each kept row.
    IngestCourses {
        #[arg(long, env = "COACH_CONFIG")]
        config: PathBuf,
        #[arg(long)]
        csv: PathBuf,
        /// Output catalog (JSON array of course records).
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated keyword filter.
        #[arg(long, value_delimiter = ',')]
        keywords: Option<Vec<String>>,
    },
    /// Embed the configured catalog and write a collection snapshot.
    IndexCourses {
        #[arg(long, env = "COACH_CONFIG")]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")),
        )
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Serve {
            config,
            store_dir,
            listen_addr,
        } => {
            let config = AppConfig::load(&config)?;
            let store_dir = store_dir.unwrap_or_else(|| config.server.store_dir.clone());
            let listen_addr = listen_addr.unwrap_or_else(|| config.server.listen_addr.clone());
            let service = Arc::new(config.service(&store_dir, Arc::new(SystemClock))?);
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(async move {
                let listener = tokio::net::TcpListener::bind(&listen_addr)
                    .await
                    .with_context(|| format!("binding {listen_addr}"))?;
                tracing::info!(%listen_addr, store = %store_dir.display(), "serving");
                axum::serve(listener, coach_server::router(service))
                    .with_graceful_shutdown(async {
                        let _ = tokio::signal::ctrl_c().await;
                    })
                    .await?;
                anyhow::Ok(())
            })?;
            Ok(ExitCode::SUCCESS)
        }
        Command::ValidateTree { tree, skills } => {
            let tree = match CareerTree::load(&tree) {
                Ok(tree) => tree,
                Err(CareerError::InvalidTree(violations)) => {
                    for v in violations {
                        println!("error[{}]: {v}", v.code());
                    }
                    return Ok(ExitCode::FAILURE);
                }
                Err(e) => return Err(e.into()),
            };
            for w in tree.warnings() {
                println!("warning[{}]: {}", w.node_id, w.message);
            }
            if let Some(path) = skills {
                SkillsStore::load(&path, Some(&tree))?;
            }
            println!(
                "ok: {} nodes, roots {}",
                tree.nodes().len(),
                tree.roots().join(", ")
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::IngestCourses {
            config,
            csv,
            out,
            keywords,
        } => {
            let config = AppConfig::load(&config)?;
            let keywords = keywords
                .unwrap_or_else(|| DEFAULT_KEYWORDS.iter().map(|k| k.to_string()).collect());
            let file =
                std::fs::File::open(&csv).with_context(|| format!("opening {}", csv.display()))?;
            let ingest = ingest_csv(
                file,
                &keywords,
                &config.gateway()?,
                &config.templates()?.course_outcomes,
            )?;
            for w in &ingest.warnings {
                tracing::warn!("{w}");
            }
            std::fs::write(&out, serde_json::to_string_pretty(&ingest.records)? + "\n")?;
            println!(
                "wrote {} courses to {}",
                ingest.records.len(),
                out.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::IndexCourses { config, out } => {
            let mut config = AppConfig::load(&config)?;
            config.paths.collection = None;
            let collection = config.collection()?;
            collection.save(&out)?;
            println!(
                "wrote collection `{COLLECTION_NAME}` ({} vectors, dimension {}) to {}",
                collection.len(),
                collection.dimension(),
                out.display()
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}
