use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use physio_core::api::{router, ApiState, QueryResponse, DEFAULT_CONCURRENCY};
use physio_core::kb_store::{KnowledgeBase, ResponseCache};
use physio_core::llm_gateway::{BackendKind, CompletionBackend, LlmGateway, MockBackend, RemoteBackend};
use physio_core::pipeline::{Advisor, PipelineConfig};
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(name = "physio", version, about = "Grounded physiotherapy advisor")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP service.
    Serve {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Maximum number of queries processed at once.
        #[arg(long, default_value_t = DEFAULT_CONCURRENCY)]
        concurrency: usize,
        /// Directory with the built chat UI, served at `/`.
        #[arg(long)]
        static_dir: Option<PathBuf>,
    },
    /// Answer one query and print the response JSON.
    Ask {
        #[command(flatten)]
        common: CommonArgs,
        /// Also print the pipeline trace to stderr.
        #[arg(long)]
        trace: bool,
        query: String,
    },
    /// Load the knowledge base and print collection counts.
    Check {
        #[arg(long)]
        data_dir: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Backend {
    Remote,
    Mock,
}

#[derive(Args)]
struct CommonArgs {
    #[arg(long)]
    data_dir: PathBuf,
    #[arg(long, value_enum, default_value_t = Backend::Mock)]
    backend: Backend,
    /// Mock script (JSONL). Defaults to `<data-dir>/mock_script.jsonl`.
    #[arg(long)]
    mock_script: Option<PathBuf>,
    /// Chat-completion endpoint URL (remote backend).
    #[arg(long)]
    llm_url: Option<String>,
    #[arg(long, default_value = "gpt-4")]
    llm_model: String,
    /// Seed for exercise sampling.
    #[arg(long)]
    seed: Option<u64>,
    /// Response cache file. Defaults to `<data-dir>/cache.jsonl`.
    #[arg(long)]
    cache_file: Option<PathBuf>,
    /// Keep the response cache in memory only.
    #[arg(long)]
    no_cache_file: bool,
}

impl CommonArgs {
    fn backend(&self) -> Result<Arc<dyn CompletionBackend>> {
        match self.backend {
            Backend::Mock => {
                let path = self
                    .mock_script
                    .clone()
                    .unwrap_or_else(|| self.data_dir.join("mock_script.jsonl"));
                let mock = MockBackend::from_file(&path).context("loading mock script")?;
                Ok(Arc::new(mock))
            }
            Backend::Remote => {
                let url = self
                    .llm_url
                    .clone()
                    .ok_or_else(|| anyhow!("--llm-url is required with --backend remote"))?;
                Ok(Arc::new(RemoteBackend::from_env(
                    url,
                    self.llm_model.clone(),
                    Duration::from_secs(60),
                )))
            }
        }
    }

    fn backend_kind(&self) -> BackendKind {
        match self.backend {
            Backend::Mock => BackendKind::Mock,
            Backend::Remote => BackendKind::Remote,
        }
    }

    fn build_advisor(&self, backend: Arc<dyn CompletionBackend>) -> Result<Advisor> {
        let mut kb = KnowledgeBase::load_dir(&self.data_dir).context("loading knowledge base")?;
        if !self.no_cache_file {
            let path = self
                .cache_file
                .clone()
                .unwrap_or_else(|| self.data_dir.join("cache.jsonl"));
            kb = kb.with_cache(ResponseCache::open(&path).context("opening response cache")?);
        }
        let config = PipelineConfig {
            rng_seed: self.seed,
            ..PipelineConfig::default()
        };
        Advisor::new(Arc::new(kb), LlmGateway::new(backend), config).context("configuring pipeline")
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();

    let result = match Cli::parse().command {
        Command::Serve {
            common,
            port,
            host,
            concurrency,
            static_dir,
        } => serve(common, host, port, concurrency, static_dir),
        Command::Ask { common, trace, query } => ask(common, trace, &query),
        Command::Check { data_dir } => check(&data_dir),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn check(data_dir: &Path) -> Result<()> {
    let kb = KnowledgeBase::load_dir(data_dir).context("loading knowledge base")?;
    println!("{}", serde_json::to_string_pretty(&kb.counts()).context("encoding counts")?);
    Ok(())
}

fn ask(common: CommonArgs, trace: bool, query: &str) -> Result<()> {
    let advisor = common.build_advisor(common.backend()?)?;
    let (answer, pipeline_trace) = advisor.handle(query).context("handling query")?;
    if trace {
        eprintln!(
            "{}",
            serde_json::to_string_pretty(&pipeline_trace).context("encoding trace")?
        );
    }
    let response = QueryResponse::from_answer(&answer, pipeline_trace.cache_hit);
    println!("{}", serde_json::to_string_pretty(&response).context("encoding response")?);
    Ok(())
}

fn serve(
    common: CommonArgs,
    host: String,
    port: u16,
    concurrency: usize,
    static_dir: Option<PathBuf>,
) -> Result<()> {
    let backend = common.backend()?;
    let addr: SocketAddr = format!("{host}:{port}").parse().context("parsing listen address")?;
    let runtime = tokio::runtime::Runtime::new().context("starting runtime")?;
    runtime.block_on(async move {
        let state = ApiState::new(common.backend_kind(), concurrency);
        let app = router(state.clone(), static_dir);
        let listener = tokio::net::TcpListener::bind(addr).await.context("binding")?;
        tracing::info!(%addr, backend = common.backend_kind().as_str(), "listening");

        let loader = tokio::task::spawn_blocking(move || common.build_advisor(backend));
        tokio::spawn(async move {
            match loader.await {
                Ok(Ok(advisor)) => {
                    tracing::info!(counts = ?advisor.kb.counts(), "knowledge base loaded");
                    state.install(advisor);
                }
                Ok(Err(e)) => {
                    tracing::error!(error = %e, "startup failed");
                    std::process::exit(1);
                }
                Err(e) => {
                    tracing::error!(error = %e, "loader panicked");
                    std::process::exit(1);
                }
            }
        });

        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .context("serving")
    })
}
