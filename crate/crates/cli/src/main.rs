use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use polarlens_core::pipeline::{run_stages, RunConfig, RunStatus, Stage, Workspace, CONFIG_SCHEMA, MANIFEST};
use polarlens_core::synth::{generate_corpus, write_corpus, SynthConfig};

#[derive(Parser)]
#[command(name = "polarlens", version, about = "Polarization analytics over debunking discourse")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse, deduplicate and filter raw dumps into normalized records
    Ingest(StageArgs),
    /// Build interaction graphs, 2-core and affiliation classes
    Graph(StageArgs),
    /// Score toxicity, sentiment and pessimism per user
    Score(StageArgs),
    /// Per-user entropy and minimal entropy intervals
    Entropy(StageArgs),
    /// Run the statistics battery per dataset
    Stats(StageArgs),
    /// Daily aggregates, segments, event windows and engagement curves
    Temporal(StageArgs),
    /// Bubble table, density grids, violins and regression reports
    Report(StageArgs),
    /// Every stage in order
    Run(StageArgs),
    /// Check a config without doing any work
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Generate a synthetic corpus with planted ground truth and a run config for it
    Synth(SynthArgs),
    /// Print the JSON Schema of the run config
    Schema,
}

#[derive(Args)]
struct StageArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides the config's `workspace`
    #[arg(long)]
    workspace: Option<PathBuf>,
    /// Overrides the config's `seed`
    #[arg(long)]
    seed: Option<u64>,
    /// Also write SVG scatter plots
    #[arg(long)]
    svg: bool,
}

#[derive(Args)]
struct SynthArgs {
    /// Corpus config; the built-in 12-cohort benchmark when absent
    #[arg(long)]
    config: Option<PathBuf>,
    /// Total users of the benchmark corpus
    #[arg(long, default_value_t = 10_000)]
    users: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(command: Command) -> Result<ExitCode> {
    let (args, stages): (StageArgs, &[Stage]) = match command {
        Command::Ingest(a) => (a, &[Stage::Ingest]),
        Command::Graph(a) => (a, &[Stage::Graph]),
        Command::Score(a) => (a, &[Stage::Score]),
        Command::Entropy(a) => (a, &[Stage::Entropy]),
        Command::Stats(a) => (a, &[Stage::Stats]),
        Command::Temporal(a) => (a, &[Stage::Temporal]),
        Command::Report(a) => (a, &[Stage::Report]),
        Command::Run(a) => (a, &Stage::ALL),
        Command::Validate { config } => {
            RunConfig::load(&config)?.validate()?;
            println!("config ok");
            return Ok(ExitCode::SUCCESS);
        }
        Command::Synth(a) => return synth(a),
        Command::Schema => {
            print!("{CONFIG_SCHEMA}");
            return Ok(ExitCode::SUCCESS);
        }
    };
    run(args, stages)
}

fn run(args: StageArgs, stages: &[Stage]) -> Result<ExitCode> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    cfg.svg |= args.svg;
    let root = match args.workspace.or_else(|| cfg.workspace.clone()) {
        Some(r) => r,
        None => bail!("no workspace: pass --workspace or set `workspace` in the config"),
    };
    // validate before the workspace directory is even created
    cfg.validate()?;
    let ws = Workspace::open(&root)?;
    let outcome = run_stages(&cfg, &ws, stages)?;
    let m = &outcome.manifest;
    let names: Vec<&str> = stages.iter().map(|s| s.as_str()).collect();
    println!(
        "{}: {} ({} artifacts, manifest {})",
        names.join(","),
        match m.status {
            RunStatus::Success => "success",
            RunStatus::Partial => "partial",
        },
        m.artifacts.len(),
        ws.path(MANIFEST).display()
    );
    for (source, items) in &m.failures {
        eprintln!("{source}: {} failures", items.len());
    }
    Ok(ExitCode::from(m.status.exit_code() as u8))
}

fn synth(args: SynthArgs) -> Result<ExitCode> {
    let config = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str::<SynthConfig>(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => SynthConfig::benchmark(args.users, args.seed),
    };
    let corpus = generate_corpus(&config)?;
    let files = write_corpus(&corpus, &args.out)?;
    let run_cfg = RunConfig::for_corpus(&files)?;
    let run_path = args.out.join("run.json");
    write_relative_config(&run_cfg, &args.out, &run_path)?;
    println!(
        "{} records from {} users in {} datasets; run config {}",
        corpus.records.len(),
        corpus.users.len(),
        files.datasets.len(),
        run_path.display()
    );
    Ok(ExitCode::SUCCESS)
}

/// Writes the config with paths relative to its own directory so the corpus
/// directory can be moved as a whole.
fn write_relative_config(cfg: &RunConfig, dir: &Path, path: &Path) -> Result<()> {
    let mut cfg = cfg.clone();
    for d in &mut cfg.datasets {
        for i in &mut d.inputs {
            if let Ok(rel) = i.path.strip_prefix(dir) {
                i.path = rel.to_path_buf();
            }
        }
        if let Some(s) = d.seeds.as_mut() {
            if let Ok(rel) = s.strip_prefix(dir) {
                *s = rel.to_path_buf();
            }
        }
    }
    std::fs::write(path, serde_json::to_string_pretty(&cfg)? + "\n")?;
    Ok(())
}
