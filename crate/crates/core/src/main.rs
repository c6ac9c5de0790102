use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};

use tcls::baselines::{BaselineKind, BaselinePipeline, BaselineSpec};
use tcls::corpus::{label_distribution, write_sample, DatasetFormat, Split};
use tcls::llm::{export_finetune_data, PromptTemplate};
use tcls::metrics::{accuracy, format_metric, tally, ue_rate};
use tcls::parser::{ClassificationOutcome, Verdict};
use tcls::runner::{
    compare_reports, execute_run, load_run, load_run_config, load_run_dir, render_report, DatasetConfig, ReportFormat,
    RunError, StoredRun,
};
use tcls::service::{Service, ServiceConfig};

#[derive(Parser)]
#[command(name = "tcls", version, about = "Text classification benchmarks for LLM backends and classical baselines")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a run config and write a run directory.
    Run {
        #[arg(short, long)]
        config: PathBuf,
    },
    /// Print a stored run's report.
    Report {
        /// Run id under --runs-dir, or a run directory path.
        run: String,
        #[arg(long, default_value = "md")]
        format: String,
        #[arg(long, default_value = "runs")]
        runs_dir: PathBuf,
    },
    /// Per-model deltas from run A to run B.
    Compare {
        run_a: String,
        run_b: String,
        #[arg(long, default_value = "runs")]
        runs_dir: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Stratified sample of a dataset file, with a manifest.
    Sample {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Chat-format JSONL fine-tuning data plus a manifest.
    ExportFinetune {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        template: Option<PathBuf>,
        /// Substituted for {dataset_name}; defaults to the input file stem.
        #[arg(long)]
        dataset_name: Option<String>,
    },
    /// HTTP API and UI bundle.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value = "runs")]
        runs_dir: PathBuf,
        #[arg(long)]
        ui_dir: Option<PathBuf>,
        /// Environment variable holding an optional bearer token for /v1.
        #[arg(long, default_value = "TCLS_API_TOKEN")]
        token_env: String,
    },
    /// Fit a classical baseline and save it.
    TrainBaseline {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_enum)]
        kind: Kind,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a saved baseline on a labeled file.
    EvalBaseline {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        model: PathBuf,
    },
    /// Write a seeded synthetic corpus (covid, economic, ecommerce, sms).
    Synth {
        corpus: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Mnb,
    Lr,
    Dt,
    Rf,
    Knn,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Test,
}

#[derive(Args)]
struct DataArgs {
    #[arg(long)]
    input: PathBuf,
    /// Built-in layout id or format file.
    #[arg(long)]
    format: String,
    /// Built-in schema id or schema file.
    #[arg(long)]
    schema: String,
    #[arg(long, requires = "mapping")]
    source_schema: Option<String>,
    #[arg(long, requires = "source_schema")]
    mapping: Option<String>,
    #[arg(long)]
    cap: Option<usize>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    skip_malformed: bool,
    #[arg(long, value_enum, default_value = "train")]
    split: SplitArg,
}

impl DataArgs {
    fn load(&self) -> Result<tcls::corpus::Dataset, RunError> {
        let split = match self.split {
            SplitArg::Train => Split::Train,
            SplitArg::Test => Split::Test,
        };
        let cap = self.cap.unwrap_or(usize::MAX);
        let d = DatasetConfig {
            id: self.stem(),
            name: None,
            format: self.format.clone(),
            schema: self.schema.clone(),
            source_schema: self.source_schema.clone(),
            mapping: self.mapping.clone(),
            train: (split == Split::Train).then(|| self.input.clone()),
            test: self.input.clone(),
            train_cap: cap,
            test_cap: cap,
            seed: self.seed,
            skip_malformed: self.skip_malformed,
            reference: None,
        };
        Ok(d.load(Path::new("."), split)?.expect("input file set"))
    }

    fn stem(&self) -> String {
        self.input.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "data".into())
    }
}

enum Failure {
    Config(String),
    Other(String),
}

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Other(e.to_string())
    }
}

fn find_run(runs_dir: &Path, run: &str) -> Result<StoredRun, RunError> {
    let p = Path::new(run);
    if p.join("report.json").is_file() {
        load_run_dir(p)
    } else {
        load_run(runs_dir, run)
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn,tcls=info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    match dispatch(Cli::parse().command) {
        Ok(code) => code,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Other(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(cmd: Command) -> Result<ExitCode, Failure> {
    match cmd {
        Command::Run { config } => {
            let cfg = load_run_config(&config).map_err(|e| Failure::Config(e.to_string()))?;
            let out = execute_run(&cfg).map_err(|e| match e {
                RunError::Config(c) => Failure::Config(c.to_string()),
                other => Failure::Other(other.to_string()),
            })?;
            print!("{}", render_report(&out.report, ReportFormat::Markdown)?);
            eprintln!(
                "run {} written to {} ({} backend calls)",
                out.meta.run_id,
                out.run_dir.display(),
                out.meta.transport_calls
            );
            if out.report.partial {
                eprintln!("run is partial: some models did not finish");
                return Ok(ExitCode::from(3));
            }
        }
        Command::Report { run, format, runs_dir } => {
            let format: ReportFormat = format.parse()?;
            print!("{}", render_report(&find_run(&runs_dir, &run)?.report, format)?);
        }
        Command::Compare { run_a, run_b, runs_dir, json } => {
            let (a, b) = (find_run(&runs_dir, &run_a)?, find_run(&runs_dir, &run_b)?);
            let rows = compare_reports(&a.report, &b.report)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&rows)?);
            } else {
                println!("| Dataset | Model | ACC | F1 | U/E |\n| --- | --- | --- | --- | --- |");
                for r in rows {
                    let d = &r.delta;
                    println!(
                        "| {} | {} | {} {} | {} {} | {} {} |",
                        r.dataset,
                        r.display,
                        format_metric(d.acc.variant),
                        d.acc.display,
                        format_metric(d.f1.variant),
                        d.f1.display,
                        format_metric(d.ue.variant),
                        d.ue.display
                    );
                }
            }
        }
        Command::Sample { data, out } => {
            let ds = data.load()?;
            let format = DatasetFormat::resolve_spec(&data.format, Path::new("."))?;
            let manifest = write_sample(&ds, &format, &out)?;
            for (label, n) in label_distribution(&ds).iter() {
                println!("{label}\t{n}");
            }
            eprintln!("wrote {} and {}", out.display(), manifest.display());
        }
        Command::ExportFinetune { data, out, template, dataset_name } => {
            let ds = data.load()?;
            let template = match template {
                Some(p) => PromptTemplate::load(&p)?,
                None => PromptTemplate::default(),
            };
            let name = dataset_name.unwrap_or_else(|| data.stem());
            let manifest = export_finetune_data(&ds, &template, &name, &out)?;
            println!("{}", serde_json::to_string_pretty(&manifest)?);
        }
        Command::Serve { port, host, runs_dir, ui_dir, token_env } => {
            let mut cfg = ServiceConfig::new(runs_dir);
            cfg.ui_dir = ui_dir;
            cfg.auth_token = std::env::var(&token_env).ok().filter(|t| !t.is_empty());
            let svc = Arc::new(Service::new(cfg)?);
            let addr: SocketAddr = format!("{host}:{port}").parse()?;
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(tcls::service::serve(svc, addr))?;
        }
        Command::TrainBaseline { data, kind, out } => {
            let ds = data.load()?;
            let kind = match kind {
                Kind::Mnb => BaselineKind::Mnb,
                Kind::Lr => BaselineKind::Lr,
                Kind::Dt => BaselineKind::Dt,
                Kind::Rf => BaselineKind::Rf,
                Kind::Knn => BaselineKind::Knn,
            };
            let pipeline = BaselinePipeline::fit(&ds, &BaselineSpec::default_for(kind), &Default::default())?;
            pipeline.save(&out)?;
            eprintln!("{} trained on {} examples, saved to {}", kind.display_name(), ds.len(), out.display());
        }
        Command::EvalBaseline { data, model } => {
            let ds = data.load()?;
            let pipeline = BaselinePipeline::load(&model)?;
            let mut outcomes = Vec::with_capacity(ds.len());
            for ex in ds.examples() {
                let label = pipeline.predict_text(&ex.text)?.to_owned();
                outcomes.push(ClassificationOutcome {
                    verdict: Verdict::Label { label: label.clone() },
                    evidence: "baseline".into(),
                    raw: label,
                });
            }
            let gold: Vec<&str> = ds.examples().iter().map(|e| e.gold.as_str()).collect();
            let (cm, ue) = tally(&gold, &outcomes, ds.schema())?;
            println!(
                "n={} acc={} f1_macro={} ue={}",
                ue.n,
                format_metric(accuracy(&cm, ue.n)?),
                format_metric(tcls::metrics::f1_macro(&cm)),
                format_metric(ue_rate(&ue)?)
            );
        }
        Command::Synth { corpus, out, seed } => {
            let (train, test) = tcls::synth::write_corpus(&out, &corpus, seed)?;
            println!("{}\n{}", train.display(), test.display());
        }
    }
    Ok(ExitCode::SUCCESS)
}
