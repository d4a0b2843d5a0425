//! `gcca-rec`: simulations, dataset ingestion, training and cross-domain
//! evaluation driven by a TOML run config.
//!
//! Flags override the config file. The output directory comes from `--out`,
//! then `GCCA_REC_OUT`, then the config, then `./out`. Every run writes its
//! resolved config to `<out>/config.resolved.toml`.
//!
//! Exit status: 0 on success, 1 when a run or any evaluation cell fails,
//! 2 for usage and configuration errors.

mod config;
mod data;
mod error;
mod evaluate;
mod simulate;
mod train;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gcca_rec::gcca::Variant;

use crate::config::{PairConfig, RunConfig, SimPreset, Source, ViewSet};
use crate::error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "gcca-rec", version, about = "Cross-domain rating prediction with MF and generalized CCA")]
struct Cli {
    /// TOML run config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed of every random stream in the run.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, env = "GCCA_REC_OUT")]
    out: Option<PathBuf>,
    /// Worker threads; defaults to one per core.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Monte Carlo comparison of GCCA and GCCA-ISSM on synthetic views.
    Simulate(SimulateArgs),
    /// Parse a raw dataset into canonical rating dumps.
    Ingest(DataArgs),
    /// Train one cross-domain model on one fold.
    Train(TrainArgs),
    /// Cross-validated cold-start evaluation over a grid of pairs.
    Evaluate(EvaluateArgs),
    /// Rebuild the aggregate tables from per-cell reports.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    preset: Option<SimPreset>,
    #[arg(long, value_delimiter = ',')]
    domains: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    sparsity: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    rows: Vec<usize>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
}

#[derive(Debug, Args)]
struct DataArgs {
    #[arg(long, value_enum)]
    source: Option<Source>,
    /// Raw dataset root.
    #[arg(long)]
    data_dir: Option<PathBuf>,
    /// Output of a previous `ingest`.
    #[arg(long)]
    ingested: Option<PathBuf>,
    /// Keep users with at least this many ratings in every domain of a pair.
    #[arg(long)]
    min_ratings: Option<usize>,
    /// Domains to ingest (repeatable).
    #[arg(long = "domain")]
    domains: Vec<String>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    target: Option<String>,
    #[arg(long = "auxiliary")]
    auxiliaries: Vec<String>,
    #[arg(long)]
    variant: Option<Variant>,
    /// View combination such as `mf` or `lda+mf`.
    #[arg(long)]
    views: Option<ViewSet>,
    #[arg(long)]
    fold: Option<usize>,
    #[arg(long)]
    c: Option<usize>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Every pair of a dataset's cross-domain table.
    #[arg(long, value_enum)]
    preset: Option<Source>,
    /// With --auxiliary, evaluates this single pair.
    #[arg(long)]
    target: Option<String>,
    #[arg(long = "auxiliary")]
    auxiliaries: Vec<String>,
    /// Cold-start caps.
    #[arg(long, value_delimiter = ',')]
    c: Vec<usize>,
    #[arg(long = "variant", value_delimiter = ',')]
    variants: Vec<Variant>,
    #[arg(long = "views", value_delimiter = ',')]
    views: Vec<ViewSet>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    max_folds: Option<usize>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Directory holding `cells/`; defaults to the output directory.
    #[arg(long)]
    input: Option<PathBuf>,
}

fn apply_data(cfg: &mut RunConfig, a: &DataArgs) {
    let d = &mut cfg.data;
    d.source = a.source.or(d.source);
    d.dir = a.data_dir.clone().or(d.dir.take());
    d.ingested = a.ingested.clone().or(d.ingested.take());
    d.min_ratings = a.min_ratings.unwrap_or(d.min_ratings);
    replace(&mut d.domains, &a.domains);
}

fn replace<T: Clone>(slot: &mut Vec<T>, given: &[T]) {
    if !given.is_empty() {
        *slot = given.to_vec();
    }
}

fn apply(cfg: &mut RunConfig, command: &Command) -> Result<()> {
    match command {
        Command::Simulate(a) => {
            let s = &mut cfg.simulate;
            s.preset = a.preset.or(s.preset);
            replace(&mut s.domains, &a.domains);
            replace(&mut s.sparsity, &a.sparsity);
            replace(&mut s.rows, &a.rows);
            s.reps = a.reps.unwrap_or(s.reps);
            s.k = a.k.or(s.k);
        }
        Command::Ingest(a) => apply_data(cfg, a),
        Command::Train(a) => {
            apply_data(cfg, &a.data);
            let t = &mut cfg.train;
            t.target = a.target.clone().or(t.target.take());
            replace(&mut t.auxiliaries, &a.auxiliaries);
            t.views = a.views.clone().unwrap_or(t.views.clone());
            t.fold = a.fold.unwrap_or(t.fold);
            t.c = a.c.unwrap_or(t.c);
            cfg.pipeline.variant = a.variant.unwrap_or(cfg.pipeline.variant);
        }
        Command::Evaluate(a) => {
            apply_data(cfg, &a.data);
            let e = &mut cfg.evaluate;
            e.preset = a.preset.or(e.preset);
            match (&a.target, a.auxiliaries.is_empty()) {
                (Some(target), false) => e.pairs.push(PairConfig {
                    target: target.clone(),
                    auxiliaries: a.auxiliaries.clone(),
                }),
                (None, true) => {}
                _ => return Err(CliError::usage("--target and --auxiliary go together")),
            }
            replace(&mut e.c, &a.c);
            replace(&mut e.variants, &a.variants);
            replace(&mut e.views, &a.views);
            e.folds = a.folds.unwrap_or(e.folds);
            e.max_folds = a.max_folds.or(e.max_folds);
            if let Some(p) = e.preset {
                match cfg.data.source {
                    None => cfg.data.source = Some(p),
                    Some(s) if s != p => {
                        return Err(CliError::usage(format!("preset {p} conflicts with data source {s}")));
                    }
                    Some(_) => {}
                }
            }
        }
        Command::Report(_) => {}
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    cfg.seed = cli.seed.unwrap_or(cfg.seed);
    cfg.jobs = cli.jobs.or(cfg.jobs);
    let out = cli.out.or(cfg.out.take()).unwrap_or_else(|| PathBuf::from("out"));
    cfg.out = Some(out.clone());
    apply(&mut cfg, &cli.command)?;
    cfg.resolve()?;

    if let Some(jobs) = cfg.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::usage(format!("cannot start {jobs} workers: {e}")))?;
    }
    data::create_dir(&out)?;
    data::write_file(&out.join("config.resolved.toml"), cfg.to_toml()?.as_bytes())?;
    log::info!("seed {}, writing to {}", cfg.seed, out.display());

    match &cli.command {
        Command::Simulate(_) => {
            let cells = simulate::run(&cfg, &out)?;
            println!("{} cells written to {}", cells.len(), out.join("sweep.csv").display());
        }
        Command::Ingest(_) => {
            let manifest = data::ingest(&cfg.data, &out)?;
            println!("{} domains written to {}", manifest.domains.len(), out.display());
        }
        Command::Train(_) => {
            let m = train::run(&cfg, &out)?;
            println!(
                "{} <- {}: test mse {:.4}, offset {:.4}, improvement {:.2}% (best iteration {})",
                m.target,
                m.auxiliaries.join("+"),
                m.test_mse,
                m.offset_mse,
                100.0 * m.improvement_over_offset,
                m.best_iteration
            );
        }
        Command::Evaluate(_) => {
            let cells = evaluate::run(&cfg, &out)?;
            println!("{} cells written to {}", cells.len(), out.join("table.csv").display());
        }
        Command::Report(a) => {
            let input = a.input.clone().unwrap_or_else(|| out.clone());
            let cells = evaluate::read_cells(&input)?;
            if cells.is_empty() {
                return Err(CliError::usage(format!("no cell reports under {}", input.join("cells").display())));
            }
            evaluate::write_tables(&cells, &out)?;
            println!("{} cells tabulated in {}", cells.len(), out.join("table.csv").display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
