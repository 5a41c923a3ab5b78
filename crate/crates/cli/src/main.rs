use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kbc::cli::{
    cmd_calibrate, cmd_complete, cmd_estimate, cmd_evaluate, cmd_sweep, CliError, ExitStatus, KbConfig,
    ProviderConfig, RunConfig,
};
use kbc::{PromptVariant, RelationConfig};
use kbc_review::{serve, ReviewConfig};

/// Knowledge-base completion with few-shot language-model prompting.
///
/// Exit codes: 0 success, 1 failure, 2 configuration error, 3 budget stop,
/// 4 partial failure, 130 interrupted.
#[derive(Parser)]
#[command(name = "kbc", version)]
struct Cli {
    #[command(flatten)]
    run: RunFlags,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Retain-all evaluation against gold facts.
    Evaluate,
    /// Pick a confidence threshold per relation and write it back.
    Calibrate,
    /// Generate, threshold and export statements for missing subjects.
    Complete,
    /// Price one query per missing subject.
    Estimate,
    /// Compare prompt variants and few-shot counts on gold subjects.
    Sweep {
        #[arg(long = "k", value_delimiter = ',', default_values_t = [1usize, 2, 4, 8])]
        k_values: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_values_t = [PromptVariant::Standard])]
        variants: Vec<PromptVariant>,
    },
    /// Run the annotation service.
    ServeReview {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        /// Review event log; defaults to <output-dir>/review.jsonl.
        #[arg(long)]
        store: Option<PathBuf>,
        /// Where `<relation>.retained.jsonl` files live; defaults to the output directory.
        #[arg(long)]
        retained_dir: Option<PathBuf>,
        /// Built review UI to serve at `/`.
        #[arg(long)]
        static_dir: Option<PathBuf>,
    },
}

/// Overrides for fields of the run config file.
#[derive(Args)]
struct RunFlags {
    /// Run config (TOML).
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    relations: Option<PathBuf>,
    /// Relation ids or names, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    only: Vec<String>,
    #[arg(long, global = true)]
    gold: Option<PathBuf>,
    #[arg(long, global = true)]
    cache_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    variant: Option<PromptVariant>,
    #[arg(long, short = 'k', global = true)]
    few_shot: Option<usize>,
    #[arg(long, global = true)]
    target_precision: Option<f64>,
    /// Calibration precision range as `lo,hi`.
    #[arg(long, global = true, value_delimiter = ',', num_args = 2)]
    precision_range: Option<Vec<f64>>,
    #[arg(long, global = true)]
    max_in_flight: Option<usize>,
    #[arg(long, global = true)]
    page_size: Option<usize>,
    #[arg(long, global = true)]
    max_subjects: Option<usize>,
    #[arg(long, global = true)]
    all_objects: bool,
    #[arg(long, global = true)]
    gap_reports: Option<PathBuf>,
    #[arg(long, global = true)]
    max_queries: Option<u64>,
    #[arg(long, global = true)]
    max_spend: Option<f64>,
    #[arg(long = "price-per-1k", global = true)]
    price_per_1k_tokens: Option<f64>,
    #[arg(long, global = true)]
    avg_prompt_tokens: Option<f64>,
    #[arg(long, global = true)]
    retention_rate: Option<f64>,
    /// Use the mock provider with this answer table.
    #[arg(long, global = true)]
    mock_table: Option<PathBuf>,
    /// Answer KB queries from a tab-separated triple file.
    #[arg(long, global = true, conflicts_with = "sparql_url")]
    kb_fixture: Option<PathBuf>,
    #[arg(long, global = true)]
    sparql_url: Option<String>,
}

impl RunFlags {
    fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut c = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(v) = &self.relations {
            c.relations = Some(v.clone());
        }
        if !self.only.is_empty() {
            c.only = self.only.clone();
        }
        if let Some(v) = &self.gold {
            c.gold = Some(v.clone());
        }
        if let Some(v) = &self.cache_dir {
            c.cache_dir = v.clone();
        }
        if let Some(v) = &self.output_dir {
            c.output_dir = v.clone();
        }
        if let Some(v) = self.variant {
            c.variant = v;
        }
        if let Some(v) = self.few_shot {
            c.few_shot = Some(v);
        }
        if let Some(v) = self.target_precision {
            c.target_precision = Some(v);
        }
        if let Some(v) = &self.precision_range {
            c.precision_range = (v[0], v[1]);
        }
        if let Some(v) = self.max_in_flight {
            c.max_in_flight = v;
        }
        if let Some(v) = self.page_size {
            c.page_size = v;
        }
        if let Some(v) = self.max_subjects {
            c.max_subjects = Some(v);
        }
        c.all_objects |= self.all_objects;
        if let Some(v) = &self.gap_reports {
            c.gap_reports = Some(v.clone());
        }
        if let Some(v) = self.max_queries {
            c.budget.max_queries = Some(v);
        }
        if let Some(v) = self.max_spend {
            c.budget.max_spend = Some(v);
        }
        if let Some(v) = &self.mock_table {
            c.provider = ProviderConfig::Mock {
                table: Some(v.clone()),
                logprobs: true,
                price_per_1k_tokens: c.provider.price_per_1k_tokens(),
            };
        }
        if let Some(v) = self.price_per_1k_tokens {
            c.provider.set_price(v);
        }
        if let Some(v) = self.avg_prompt_tokens {
            c.avg_prompt_tokens = v;
        }
        if let Some(v) = self.retention_rate {
            c.retention_rate = v;
        }
        if let Some(v) = &self.kb_fixture {
            c.kb = Some(KbConfig::Fixture { path: v.clone() });
        }
        if let Some(v) = &self.sparql_url {
            c.kb = Some(KbConfig::Sparql { url: v.clone() });
        }
        Ok(c)
    }
}

async fn run(cli: Cli) -> Result<ExitStatus, CliError> {
    let config = cli.run.resolve()?;
    let mut out = std::io::stdout();
    match cli.command {
        Command::Evaluate => cmd_evaluate(&config, &mut out).await,
        Command::Calibrate => cmd_calibrate(&config, &mut out).await,
        Command::Complete => cmd_complete(&config, &mut out).await,
        Command::Estimate => cmd_estimate(&config, &mut out).await,
        Command::Sweep { k_values, variants } => cmd_sweep(&config, &k_values, &variants, &mut out).await,
        Command::ServeReview {
            addr,
            store,
            retained_dir,
            static_dir,
        } => {
            let relations = match &config.relations {
                Some(path) => RelationConfig::load(path).map_err(|e| CliError::Config(e.to_string()))?,
                None => RelationConfig::bundled(),
            };
            let review = ReviewConfig {
                store: store.unwrap_or_else(|| config.output_dir.join("review.jsonl")),
                retained_dir: retained_dir.unwrap_or_else(|| config.output_dir.clone()),
                relations,
                static_dir,
            };
            let listener = tokio::net::TcpListener::bind(addr)
                .await
                .map_err(|e| CliError::Runtime(format!("bind {addr}: {e}")))?;
            println!("review service listening on http://{addr}/api/v1");
            let shutdown = async {
                tokio::signal::ctrl_c().await.ok();
            };
            serve(&review, listener, shutdown)
                .await
                .map_err(|e| CliError::Runtime(e.to_string()))?;
            Ok(ExitStatus::Success)
        }
    }
}

#[tokio::main]
async fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let status = tokio::select! {
        result = run(cli) => match result {
            Ok(status) => status,
            Err(e) => {
                eprintln!("error: {e}");
                e.exit_status()
            }
        },
        // Transcript records are flushed as they are written, so dropping the
        // in-flight work loses nothing already paid for.
        _ = tokio::signal::ctrl_c() => {
            eprintln!("interrupted");
            ExitStatus::Interrupted
        }
    };
    ExitCode::from(status.code() as u8)
}
