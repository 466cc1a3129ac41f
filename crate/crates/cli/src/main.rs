use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use codemill_core::pipeline::{
    dedup_file, render_file, run, stats, validate_config, PipelineConfig, RunError, RunReport, Source,
};

/// Curates raw code corpora into sentinel-token training documents.
#[derive(Parser)]
#[command(name = "codemill", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML config file layered over the defaults.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Dotted-key override, e.g. `--set render.p_fim_repo=0.25`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores). Output never depends on it.
    #[arg(long, env = "CODEMILL_WORKERS")]
    workers: Option<usize>,
}

impl ConfigArgs {
    fn load(&self, extra: &[String]) -> Result<PipelineConfig, Failure> {
        let mut overrides = self.overrides.clone();
        overrides.extend_from_slice(extra);
        if let Some(s) = self.seed {
            overrides.push(format!("seed={s}"));
        }
        let mut cfg = PipelineConfig::layered(self.config.as_deref(), &overrides).map_err(|e| Failure::config(e))?;
        if let Some(w) = self.workers {
            cfg.workers = w;
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run every configured source through its stage chain.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Check a config and print diagnostics.
    Validate {
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Summarize a run report as per-stage drop percentages.
    Stats { report: PathBuf },
    /// Near-deduplicate a source-code JSONL file.
    Dedup {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(short, long)]
        input: PathBuf,
        /// Decisions JSONL, one line per parsed record.
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Render already-curated records of one source.
    Render {
        #[command(flatten)]
        config: ConfigArgs,
        /// source_code, pull_requests, issues, jupyter, kaggle, stackexchange or ir_pairs.
        #[arg(long, value_parser = parse_source)]
        source: Source,
        #[arg(short, long)]
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Apply the repository FIM transform to code documents.
        #[arg(long)]
        fim: bool,
    },
}

fn parse_source(s: &str) -> Result<Source, String> {
    Source::ALL.into_iter().find(|k| k.as_str() == s).ok_or_else(|| format!("unknown source `{s}`"))
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(e: impl std::fmt::Display) -> Self {
        Failure { code: 1, message: e.to_string() }
    }

    fn io(e: impl std::fmt::Display) -> Self {
        Failure { code: 2, message: e.to_string() }
    }
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        Failure { code: e.exit_code() as u8, message: e.to_string() }
    }
}

fn execute(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run { config, output } => {
            let mut cfg = config.load(&[])?;
            if let Some(o) = output {
                cfg.output_dir = o;
            }
            let report = run(&cfg)?;
            print!("{}", stats(&report));
            eprintln!("wrote {} in {} ms", cfg.output_dir.display(), report.wall_time_ms);
        }
        Command::Validate { config } => {
            let cfg = config.load(&[])?;
            let diagnostics = validate_config(&cfg);
            if !diagnostics.is_empty() {
                for d in &diagnostics {
                    println!("{d}");
                }
                return Err(Failure::config(format!("{} problem(s) found", diagnostics.len())));
            }
            println!("ok {}", cfg.digest());
        }
        Command::Stats { report } => {
            let text = std::fs::read_to_string(&report)
                .map_err(|e| Failure::io(format!("reading {}: {e}", report.display())))?;
            let parsed: RunReport = serde_json::from_str(&text)
                .map_err(|e| Failure::config(format!("{} is not a run report: {e}", report.display())))?;
            print!("{}", stats(&parsed));
        }
        Command::Dedup { config, input, output } => {
            let cfg = config.load(&[])?;
            let s = dedup_file(&input, &output, &cfg.dedup, cfg.seed, cfg.workers)?;
            println!("{} files, {} clusters, {} dropped", s.files, s.clusters, s.dropped);
        }
        Command::Render { config, source, input, output, fim } => {
            let cfg = config.load(&[])?;
            let render = codemill_core::render::RenderConfig { seed: cfg.seed, ..cfg.render };
            let s = render_file(source, &input, &output, &render, fim)?;
            println!("{} records, {} documents, {} failed", s.records, s.documents, s.failed);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("codemill: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
