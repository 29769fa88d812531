use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use clarify_core::config::BackendChoice;
use clarify_core::eval::{compare, format_delta, format_table, EvalReport, PipelineKind};
use clarify_core::model::Feedback;
use clarify_core::service::{EvidenceSummary, TurnResponse};
use clarify_core::{ClarifyService, Config};
use tracing_subscriber::EnvFilter;

/// Exit status for bad arguments or configuration.
const EXIT_USAGE: u8 = 1;
/// Exit status for failures while running.
const EXIT_RUNTIME: u8 = 2;

#[derive(Parser)]
#[command(name = "clarify", version, about = "Detect ambiguous queries and ask clarification questions")]
struct Cli {
    #[command(flatten)]
    common: CommonArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// TOML configuration file.
    #[arg(long, global = true, default_value = "clarify.toml")]
    config: PathBuf,
    /// Override the configured LLM backend.
    #[arg(long, global = true, value_enum)]
    backend: Option<Backend>,
    /// Rule file for the scripted backend.
    #[arg(long, global = true)]
    script: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Backend {
    Http,
    Scripted,
    Replay,
}

#[derive(Clone, Copy, ValueEnum)]
enum PipelineArg {
    MultiAgent,
    Baseline,
    Both,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP API.
    Serve {
        /// Override the configured bind address.
        #[arg(long)]
        bind: Option<String>,
    },
    /// Analyze one query and print the decision, question, and agent outcomes.
    Ask {
        query: String,
        /// Answer the clarification with this choice id.
        #[arg(long, conflicts_with = "free_text")]
        choose: Option<String>,
        /// Answer the clarification in free text.
        #[arg(long)]
        free_text: Option<String>,
    },
    /// Score a labeled dataset and print the metrics table.
    Eval {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, value_enum, default_value = "multi-agent")]
        pipeline: PipelineArg,
        /// Write the full JSON report(s) here.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// List registered agents.
    Agents,
}

enum Failure {
    Usage(String),
    Runtime(String),
}

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure::Usage(e.to_string())
}

fn runtime(e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(e.to_string())
}

fn load_config(common: &CommonArgs) -> Result<Config, Failure> {
    let mut config = Config::load(&common.config).map_err(usage)?;
    if let Some(b) = common.backend {
        config.llm.backend = match b {
            Backend::Http => BackendChoice::Http,
            Backend::Scripted => BackendChoice::Scripted,
            Backend::Replay => BackendChoice::Replay,
        };
    }
    if let Some(script) = &common.script {
        config.llm.script = Some(script.clone());
    }
    Ok(config)
}

fn print_evidence(evidence: &[EvidenceSummary]) {
    println!("agents:");
    for e in evidence {
        let verdict = if e.detected { "detected" } else { "not detected" };
        let status = serde_json::to_value(e.status).ok();
        let status = status.as_ref().and_then(|s| s.as_str()).unwrap_or("?");
        print!("  {:<20} {:<10} {verdict}", e.agent_id, status);
        if !e.candidates.is_empty() {
            print!(" [{}]", e.candidates.join(" | "));
        }
        println!();
    }
}

async fn ask(
    service: &ClarifyService,
    query: &str,
    choose: Option<String>,
    free_text: Option<String>,
) -> Result<(), Failure> {
    let session = service.create_session();
    let response = service.post_query(&session, query).await.map_err(runtime)?;
    match response {
        TurnResponse::Clarification {
            turn_id,
            question,
            choices,
            evidence,
            decision,
        } => {
            println!("decision: {} ({})", decision.label(), decision.rationale());
            println!("question: {question}");
            for c in &choices {
                println!("  [{}] {}", c.id, c.label);
            }
            print_evidence(&evidence);
            let feedback = match (choose, free_text) {
                (Some(id), _) => Feedback::SelectedChoice(id),
                (None, Some(text)) => Feedback::FreeText(text),
                (None, None) => return Ok(()),
            };
            let resolved = service
                .post_feedback(&session, turn_id, feedback)
                .await
                .map_err(runtime)?;
            println!("refined: {}", resolved.refined_query);
            println!("answer: {}", resolved.answer);
        }
        TurnResponse::Answer {
            answer,
            evidence,
            decision,
            ..
        } => {
            println!("decision: {} ({})", decision.label(), decision.rationale());
            print_evidence(&evidence);
            println!("answer: {answer}");
        }
    }
    Ok(())
}

async fn eval(
    service: &ClarifyService,
    dataset: &std::path::Path,
    pipeline: PipelineArg,
    report_path: Option<PathBuf>,
) -> Result<(), Failure> {
    let kinds: &[PipelineKind] = match pipeline {
        PipelineArg::MultiAgent => &[PipelineKind::MultiAgent],
        PipelineArg::Baseline => &[PipelineKind::Baseline],
        PipelineArg::Both => &[PipelineKind::MultiAgent, PipelineKind::Baseline],
    };
    let mut reports: Vec<EvalReport> = Vec::new();
    for kind in kinds {
        let report = service.run_eval(dataset, *kind).await.map_err(|e| {
            // An unreadable dataset or missing few-shot file is a usage problem.
            if e.status_code() == 400 {
                usage(e)
            } else {
                runtime(e)
            }
        })?;
        reports.push(report);
    }
    let rows: Vec<(&str, &_)> = reports.iter().map(|r| (r.pipeline.as_str(), &r.metrics)).collect();
    print!("{}", format_table(&rows));
    if let [a, b] = reports.as_slice() {
        let delta = compare(&a.metrics, &b.metrics).map_err(runtime)?;
        println!();
        print!("{}", format_delta(&delta));
    }
    if let Some(path) = report_path {
        let json = if let [only] = reports.as_slice() {
            only.to_json()
        } else {
            serde_json::to_string_pretty(&reports).map_err(runtime)?
        };
        std::fs::write(&path, json).map_err(runtime)?;
    }
    Ok(())
}

async fn run(cli: Cli) -> Result<(), Failure> {
    let config = load_config(&cli.common)?;
    let service = config.build_service().map_err(usage)?;
    match cli.command {
        Command::Serve { bind } => {
            let bind = bind.unwrap_or_else(|| config.bind.clone());
            let addr = bind.parse().map_err(|e| usage(format!("bind address `{bind}`: {e}")))?;
            clarify_server::serve(Arc::new(service), addr).await.map_err(runtime)
        }
        Command::Ask {
            query,
            choose,
            free_text,
        } => ask(&service, &query, choose, free_text).await,
        Command::Eval {
            dataset,
            pipeline,
            report,
        } => eval(&service, &dataset, pipeline, report).await,
        Command::Agents => {
            for d in service.list_agents() {
                let kind = serde_json::to_value(d.kind).ok();
                let kind = kind.as_ref().and_then(|k| k.as_str()).unwrap_or("?");
                let state = if d.enabled { "enabled" } else { "disabled" };
                println!("{:<20} {:<10} {:>6} ms  {state}", d.agent_id, kind, d.timeout_ms);
            }
            Ok(())
        }
    }
}

#[tokio::main]
async fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(std::io::stderr)
        .init();
    match run(cli).await {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}
