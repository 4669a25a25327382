use std::io::Write;
use std::net::SocketAddr;
use std::path::PathBuf;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use tabdisc::eval::p_key;
use tabdisc::{Engine, Pipeline, PipelineConfig, Stage};

#[derive(Parser)]
#[command(name = "tabdisc", version, about = "Question-driven table discovery")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Pipeline config file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Ingest or synthesize the table collection.
    Prepare(Common),
    /// Decompose tables into triples.
    Triples(Common),
    /// Encode triple passages.
    Encode(Common),
    /// Build the first-stage index.
    Index(Common),
    /// Sample SQL queries.
    GenSql(Common),
    /// Translate SQL into questions.
    GenQuestions(Common),
    /// Retrieve for synthetic questions and build incremental datasets.
    Collect(Common),
    /// Train the relevance model.
    Train(Common),
    /// Evaluate on held-out questions and write reports.
    Eval(Common),
    /// Serve the HTTP API.
    Serve {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
    },
    /// Answer one question from the command line.
    Query {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        question: String,
        #[arg(long)]
        k: Option<usize>,
    },
}

fn load(common: &Common) -> anyhow::Result<PipelineConfig> {
    let cfg = PipelineConfig::load(&common.config)
        .with_context(|| format!("loading {}", common.config.display()))?;
    Ok(cfg.with_seed(common.seed))
}

fn run_stage(common: &Common, stage: Stage) -> anyhow::Result<()> {
    let pipeline = Pipeline::new(load(common)?)?;
    for outcome in pipeline.run_until(stage)? {
        let state = if outcome.ran { "done" } else { "up to date" };
        println!("{:<14} {state:<10} {:.2}s", outcome.stage.name(), outcome.seconds);
    }
    if stage == Stage::Eval {
        let art = pipeline.artifacts();
        let report: tabdisc::eval::EvalReport = serde_json::from_slice(&std::fs::read(art.path(tabdisc::layout::EVAL_REPORT))?)?;
        for k in &pipeline.config().online.eval_ks {
            println!("{} = {:.4}", p_key(*k), report.p_at(*k).unwrap_or(0.0));
        }
        println!("P@Max = {:.4}", report.p_max());
        let timing: tabdisc::timing::TimingReport =
            serde_json::from_slice(&std::fs::read(art.path(tabdisc::layout::TIMING_REPORT))?)?;
        print!("{}", timing.to_table());
    }
    Ok(())
}

fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    match cli.command {
        Command::Prepare(c) => run_stage(&c, Stage::Prepare),
        Command::Triples(c) => run_stage(&c, Stage::Triples),
        Command::Encode(c) => run_stage(&c, Stage::Encode),
        Command::Index(c) => run_stage(&c, Stage::Index),
        Command::GenSql(c) => run_stage(&c, Stage::GenSql),
        Command::GenQuestions(c) => run_stage(&c, Stage::GenQuestions),
        Command::Collect(c) => run_stage(&c, Stage::Collect),
        Command::Train(c) => run_stage(&c, Stage::Train),
        Command::Eval(c) => run_stage(&c, Stage::Eval),
        Command::Serve { common, addr } => {
            let cfg = load(&common)?;
            tokio::runtime::Runtime::new()?.block_on(tabdisc::server::serve(cfg, addr))
        }
        Command::Query { common, question, k } => {
            let cfg = load(&common)?;
            let k = k.unwrap_or(cfg.online.top_k);
            let engine = Engine::load(&cfg)?;
            let results = engine.online_query(&question, k)?;
            let body = serde_json::to_string_pretty(&tabdisc::server::QueryResponse { results })?;
            match writeln!(std::io::stdout().lock(), "{body}") {
                Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
                other => Ok(other?),
            }
        }
    }
}
