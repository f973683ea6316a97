use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context};
use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};
use kgvo::archive::{watch_daemon, watch_once, HttpFetcher, Outcome, WatchConfig};
use kgvo::corpus::{generate, CorpusSpec};
use kgvo::report::{run_diff, run_index, run_report};
use kgvo::{Attribution, RunConfig};

/// Vocabulary evolution and adoption analytics.
#[derive(Parser)]
#[command(name = "kgvo", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build change logs and check selection criteria.
    Diff(RunArgs),
    /// Count tracked-term usage per snapshot, term and PLD.
    Index(RunArgs),
    /// Adoption, unused, deprecated-usage, top-PLD and time series reports.
    Report(RunArgs),
    /// Fetch watched vocabularies and archive new versions.
    Watch(WatchArgs),
    /// Generate a synthetic corpus with its ground truth.
    Gen(GenArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML run configuration.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Snapshot manifest (`<date> <path>` per line).
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Vocabulary manifest CSV.
    #[arg(long)]
    vocabs: Option<PathBuf>,
    /// Public suffix list file.
    #[arg(long, env = kgvo::config::PSL_ENV)]
    psl: Option<PathBuf>,
    /// `context-first` (graph label, else subject) or `subject-only`.
    #[arg(long, value_parser = parse_attribution)]
    attribution: Option<Attribution>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// First day of the corpus window (YYYY-MM-DD).
    #[arg(long)]
    start: Option<NaiveDate>,
    /// Last day of the corpus window, inclusive.
    #[arg(long)]
    end: Option<NaiveDate>,
}

#[derive(Args)]
struct WatchArgs {
    /// TOML watch configuration.
    #[arg(long, short)]
    config: PathBuf,
    /// Run one fetch round and exit.
    #[arg(long, conflicts_with = "daemon")]
    once: bool,
    /// Keep polling until interrupted.
    #[arg(long)]
    daemon: bool,
    /// Polling interval, e.g. `1day` or `6h`; overrides the configuration.
    #[arg(long, value_parser = humantime::parse_duration)]
    interval: Option<Duration>,
}

#[derive(Args)]
struct GenArgs {
    /// JSON corpus specification.
    #[arg(long)]
    spec: PathBuf,
    /// Directory for the corpus, manifests, config and truth files.
    #[arg(long)]
    out: PathBuf,
}

fn parse_attribution(s: &str) -> Result<Attribution, String> {
    match s {
        "context-first" => Ok(Attribution::ContextFirst),
        "subject-only" => Ok(Attribution::SubjectOnly),
        _ => Err("expected context-first or subject-only".into()),
    }
}

impl RunArgs {
    fn resolve(self) -> anyhow::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig {
                output_dir: PathBuf::from("out"),
                ..Default::default()
            },
        };
        cfg.corpus_manifest = self.corpus.or(cfg.corpus_manifest);
        cfg.vocab_manifest = self.vocabs.or(cfg.vocab_manifest);
        cfg.psl = self.psl.or(cfg.psl);
        cfg.attribution = self.attribution.unwrap_or(cfg.attribution);
        cfg.output_dir = self.out.unwrap_or(cfg.output_dir);
        cfg.start = self.start.or(cfg.start);
        cfg.end = self.end.or(cfg.end);
        Ok(cfg)
    }
}

fn ineligible_note(verdicts: &[kgvo::diff::SelectionVerdict]) -> ExitCode {
    let bad: Vec<_> = verdicts.iter().filter(|v| !v.eligible).collect();
    for v in &bad {
        eprintln!("ineligible: {} ({})", v.vocab_id, v.reasons_joined());
    }
    if bad.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}

fn watch(args: WatchArgs) -> anyhow::Result<ExitCode> {
    let cfg = WatchConfig::load(&args.config)?;
    let fetcher = HttpFetcher::new(cfg.timeout_duration()?);
    if args.daemon {
        let interval = match args.interval {
            Some(d) => d,
            None => cfg.interval_duration()?,
        };
        let stop = Arc::new(AtomicBool::new(false));
        let flag = stop.clone();
        ctrlc::set_handler(move || flag.store(true, Ordering::Relaxed))?;
        watch_daemon(&cfg, &fetcher, interval, &stop);
        return Ok(ExitCode::SUCCESS);
    }
    if !args.once {
        bail!("pass --once or --daemon");
    }
    let entries = watch_once(&cfg, &fetcher, chrono::Utc::now())?;
    let mut failed = false;
    for e in &entries {
        println!("{}\t{:?}\t{}", e.vocab_id, e.outcome, e.stored_path.as_deref().map(Path::display).map(|d| d.to_string()).unwrap_or_default());
        failed |= matches!(e.outcome, Outcome::FetchFailed | Outcome::ParseFailed);
    }
    Ok(if failed { ExitCode::from(2) } else { ExitCode::SUCCESS })
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.cmd {
        Cmd::Diff(a) => {
            let cfg = a.resolve()?;
            let out = run_diff(&cfg)?;
            log::info!("{} change logs written to {}", out.logs.len(), cfg.output_dir.display());
            Ok(ineligible_note(&out.verdicts))
        }
        Cmd::Index(a) => {
            let cfg = a.resolve()?;
            let stats = run_index(&cfg)?;
            for s in &stats {
                log::info!(
                    "{}: {} lines, {} quads, {} skipped",
                    s.date, s.parse.lines_total, s.parse.quads_emitted, s.parse.lines_skipped
                );
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Report(a) => {
            let cfg = a.resolve()?;
            let r = run_report(&cfg)?;
            let bad = r.selection.iter().filter(|s| !s.eligible).count();
            for s in r.selection.iter().filter(|s| !s.eligible) {
                eprintln!("ineligible: {} ({})", s.vocab_id, s.reasons);
            }
            Ok(if bad == 0 { ExitCode::SUCCESS } else { ExitCode::from(2) })
        }
        Cmd::Watch(a) => watch(a),
        Cmd::Gen(a) => {
            let spec = CorpusSpec::load(&a.spec)?;
            let g = generate(&spec, &a.out).with_context(|| format!("generating into {}", a.out.display()))?;
            println!("{}", g.config.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
