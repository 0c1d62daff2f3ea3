use aerocmd::corpus::{
    corpus_from_templates, expand_templates, load_corpus, load_templates, read_jsonl, save_corpus, split_by_family, write_jsonl,
};
use aerocmd::config::ServeConfig;
use aerocmd::corpus::shipped_corpus;
use aerocmd::eval::{evaluate, scoring_config};
use aerocmd::nl::{Backend, Translator, TranslatorConfig};
use aerocmd::repl::{run_session, SessionConfig};
use aerocmd::wire::{spawn, ServerOptions, SimSpeed};
use std::io::IsTerminal;
use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "aerocmd", version, about = "Natural-language drone operations")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Interactive operator console.
    Agent(AgentArgs),
    /// Run the simulator behind the TCP and WebSocket endpoints.
    Serve(ServeArgs),
    /// Score a translator over a dataset.
    Evaluate(EvaluateArgs),
    /// Corpus and dataset tooling.
    #[command(subcommand)]
    Corpus(CorpusCmd),
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendKind {
    Retrieval,
    External,
}

#[derive(Args)]
struct BackendArgs {
    #[arg(long, value_enum, default_value = "retrieval")]
    backend: BackendKind,
    /// Translation service URL for `--backend external`.
    #[arg(long)]
    backend_url: Option<String>,
    #[arg(long, default_value_t = 10_000)]
    backend_timeout_ms: u64,
}

impl BackendArgs {
    fn translator_config(&self) -> Result<TranslatorConfig> {
        let backend = match self.backend {
            BackendKind::Retrieval => Backend::Retrieval,
            BackendKind::External => Backend::External {
                url: self.backend_url.clone().context("--backend external needs --backend-url")?,
                timeout_ms: self.backend_timeout_ms,
            },
        };
        Ok(TranslatorConfig {
            backend,
            ..TranslatorConfig::default()
        })
    }
}

#[derive(Args)]
struct AgentArgs {
    #[arg(long, default_value = "127.0.0.1:41451")]
    endpoint: String,
    #[arg(long)]
    corpus: PathBuf,
    #[command(flatten)]
    backend: BackendArgs,
    /// Execute without asking for confirmation.
    #[arg(long)]
    auto_confirm: bool,
    /// Copy of everything shown and typed.
    #[arg(long)]
    transcript: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    image_dir: PathBuf,
    #[arg(long, default_value = "AirSim_client.")]
    display_prefix: String,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Simulation speed multiplier; `inf` steps as fast as possible.
    #[arg(long)]
    sim_speed: Option<String>,
    /// Append every received request (one JSON per line).
    #[arg(long)]
    request_log: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    #[command(flatten)]
    backend: BackendArgs,
    /// Write the JSON report here.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Note in the report whether AST accuracy reaches this bar; exit 1 if not.
    #[arg(long)]
    ast_bar: Option<f64>,
}

#[derive(Subcommand)]
enum CorpusCmd {
    /// Expand paraphrase families into a JSONL dataset.
    Expand {
        #[arg(long)]
        templates: PathBuf,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 50)]
        per_family: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Split a dataset by held-out paraphrase variants.
    Split {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value_t = 0.25)]
        fraction: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        heldout: PathBuf,
        /// JSON summary of held-out variants per family.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Build a retrieval corpus from paraphrase families.
    Build {
        #[arg(long)]
        templates: PathBuf,
        /// Split summary whose held-out variants are left out.
        #[arg(long)]
        exclude: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(serde::Serialize, serde::Deserialize)]
struct SplitSummary {
    heldout_variants: BTreeMap<String, BTreeSet<String>>,
    too_small: Vec<String>,
    n_train: usize,
    n_heldout: usize,
}

fn run_corpus(cmd: CorpusCmd) -> Result<()> {
    match cmd {
        CorpusCmd::Expand {
            templates,
            seed,
            per_family,
            out,
        } => {
            if per_family == 0 {
                bail!("--per-family must be at least 1");
            }
            let families = load_templates(&templates)?;
            let examples = expand_templates(&families, seed, per_family)?;
            write_jsonl(&examples, &out)?;
            eprintln!("wrote {} examples to {}", examples.len(), out.display());
        }
        CorpusCmd::Split {
            dataset,
            fraction,
            seed,
            train,
            heldout,
            report,
        } => {
            let examples = read_jsonl(&dataset)?;
            let split = split_by_family(&examples, fraction, seed)?;
            for family in &split.too_small {
                eprintln!("family `{family}` has a single variant; kept in train");
            }
            write_jsonl(&split.train, &train)?;
            write_jsonl(&split.heldout, &heldout)?;
            if let Some(path) = report {
                let summary = SplitSummary {
                    heldout_variants: split.heldout_variants,
                    too_small: split.too_small,
                    n_train: split.train.len(),
                    n_heldout: split.heldout.len(),
                };
                std::fs::write(&path, serde_json::to_string_pretty(&summary)? + "\n")
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            eprintln!("train {} / heldout {}", split.train.len(), split.heldout.len());
        }
        CorpusCmd::Build { templates, exclude, out } => {
            let families = load_templates(&templates)?;
            let exclude = match exclude {
                Some(path) => {
                    let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
                    serde_json::from_str::<SplitSummary>(&text)?.heldout_variants
                }
                None => BTreeMap::new(),
            };
            let corpus = corpus_from_templates(&families, &exclude)?;
            save_corpus(&corpus, &out)?;
            eprintln!("wrote {} entries to {}", corpus.len(), out.display());
        }
    }
    Ok(())
}

fn run_evaluate(args: EvaluateArgs) -> Result<()> {
    let dataset = read_jsonl(&args.dataset)?;
    if dataset.is_empty() {
        bail!("dataset {} is empty", args.dataset.display());
    }
    let corpus = load_corpus(&args.corpus)?;
    let translator = Translator::new(corpus, args.backend.translator_config()?);
    let mut report = evaluate(&dataset, &translator, &scoring_config());
    let met = args.ast_bar.is_none_or(|bar| report.note_ast_bar(bar));
    if let Some(path) = &args.report {
        std::fs::write(path, report.to_json()).with_context(|| format!("writing {}", path.display()))?;
    }
    print!("{}", report.to_table());
    if !met {
        bail!("ast accuracy below the requested bar");
    }
    Ok(())
}

fn run_agent(args: AgentArgs) -> Result<ExitCode> {
    let corpus = load_corpus(&args.corpus)?;
    let translator = Translator::new(corpus, args.backend.translator_config()?);
    let cfg = SessionConfig {
        endpoint: args.endpoint,
        auto_confirm: args.auto_confirm,
        display_prefix: args.display_prefix,
        image_output_dir: args.image_dir,
        echo_input: !std::io::stdin().is_terminal(),
        ..SessionConfig::default()
    };
    let mut transcript = match &args.transcript {
        Some(p) => Some(std::fs::File::create(p).with_context(|| format!("creating {}", p.display()))?),
        None => None,
    };
    let stdin = std::io::stdin();
    let mut input = stdin.lock();
    let mut stdout = std::io::stdout();
    let code = run_session(
        &cfg,
        &translator,
        &mut input,
        &mut stdout,
        transcript.as_mut().map(|f| f as &mut dyn std::io::Write),
    );
    Ok(ExitCode::from(code as u8))
}

fn run_serve(args: ServeArgs) -> Result<()> {
    let mut cfg = match &args.config {
        Some(p) => ServeConfig::load(p)?,
        None => ServeConfig::default(),
    };
    if let Some(speed) = &args.sim_speed {
        cfg.server.sim_speed = speed.parse::<SimSpeed>().map_err(anyhow::Error::msg)?;
    }
    if args.request_log.is_some() {
        cfg.server.request_log = args.request_log;
    }
    let corpus = match &cfg.server.corpus {
        Some(p) => load_corpus(p)?,
        None => shipped_corpus(),
    };
    let handle = spawn(ServerOptions {
        tcp_addr: cfg.server.tcp.clone(),
        ws_addr: Some(cfg.server.websocket.clone()).filter(|a| !a.is_empty()),
        sim: cfg.sim,
        speed: cfg.server.sim_speed,
        translator: Some(Translator::new(corpus, TranslatorConfig::default())),
        request_log_path: cfg.server.request_log,
    })
    .context("starting server")?;
    eprintln!("listening on tcp://{} (sim speed {})", handle.tcp_addr(), cfg.server.sim_speed);
    if let Some(ws) = handle.ws_addr() {
        eprintln!("listening on ws://{ws}");
    }
    handle.wait();
    Ok(())
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Cmd::Corpus(cmd) => run_corpus(cmd),
        Cmd::Evaluate(args) => run_evaluate(args),
        Cmd::Serve(args) => run_serve(args),
        Cmd::Agent(args) => match run_agent(args) {
            Ok(code) => return code,
            Err(e) => Err(e),
        },
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
