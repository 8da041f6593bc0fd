//! `crossview`: calibrate meshes, synthesize novel views, plan epochs and
//! evaluate retrieval from the command line.
//!
//! Exit codes: 0 on success, 1 for invalid input or configuration, 2 when a
//! stage fails while running.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use crossview_core::metrics::DistanceMetric;
use crossview_core::pipeline::{
    losses_check, parse_loss_inputs, run_calibrate, run_evaluate, run_plan, run_synthesize, PipelineConfig,
    PipelineError,
};
use crossview_core::synthesis::Direction;
use log::LevelFilter;

#[derive(Parser, Debug)]
#[command(name = "crossview", version = crossview_core::VERSION, about)]
struct Cli {
    /// TOML config file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Source manifest (JSONL).
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum DirectionArg {
    G2a,
    A2g,
}

impl From<DirectionArg> for Direction {
    fn from(d: DirectionArg) -> Self {
        match d {
            DirectionArg::G2a => Direction::GroundToAerial,
            DirectionArg::A2g => Direction::AerialToGround,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum DistanceArg {
    Cosine,
    Euclidean,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit an orbit camera to every real row's mask.
    Calibrate,
    /// Render, composite and color-align views for accepted rows.
    Synthesize {
        #[arg(long, value_enum)]
        direction: Option<DirectionArg>,
        /// Views per accepted source row.
        #[arg(long)]
        views: Option<usize>,
        /// Directory of background PNG plates.
        #[arg(long)]
        backgrounds: Option<PathBuf>,
    },
    /// Build the batch plan for one epoch.
    Plan {
        #[arg(long)]
        epoch: u32,
        /// Incoming pool state; defaults to the previous epoch's state file.
        #[arg(long)]
        state: Option<PathBuf>,
        /// Plan exactly this manifest instead of source + synthetic.
        #[arg(long)]
        plan_manifest: Option<PathBuf>,
    },
    /// Compute CMC / mAP for query embeddings against a gallery.
    Evaluate {
        #[arg(long)]
        query: PathBuf,
        #[arg(long)]
        query_labels: PathBuf,
        #[arg(long)]
        gallery: PathBuf,
        #[arg(long)]
        gallery_labels: PathBuf,
        #[arg(long)]
        max_rank: Option<usize>,
        #[arg(long, value_enum)]
        distance: Option<DistanceArg>,
    },
    /// Evaluate the reference losses on matrices from a text file.
    LossesCheck {
        input: PathBuf,
    },
}

fn load_config(cli: &Cli) -> Result<PipelineConfig, PipelineError> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.paths.output_dir = Some(out.clone());
    }
    if let Some(m) = &cli.manifest {
        cfg.paths.source_manifest = Some(m.clone());
    }
    if let Command::Synthesize {
        direction,
        views,
        backgrounds,
    } = &cli.command
    {
        if let Some(d) = direction {
            cfg.synthesis.direction = (*d).into();
        }
        if let Some(v) = views {
            cfg.synthesis.views = *v;
        }
        if let Some(b) = backgrounds {
            cfg.paths.background_dir = Some(b.clone());
        }
    }
    if let Command::Evaluate { max_rank, distance, .. } = &cli.command {
        if let Some(r) = max_rank {
            cfg.metrics.max_rank = *r;
        }
        if let Some(d) = distance {
            cfg.metrics.distance = match d {
                DistanceArg::Cosine => DistanceMetric::Cosine,
                DistanceArg::Euclidean => DistanceMetric::Euclidean,
            };
        }
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), PipelineError> {
    let cfg = load_config(cli)?;
    match &cli.command {
        Command::Calibrate => {
            let report = run_calibrate(&cfg)?;
            println!("{}", report.summary());
        }
        Command::Synthesize { .. } => {
            let summary = run_synthesize(&cfg)?;
            println!(
                "wrote {} synthetic views ({} rows failed, {} empty views skipped)",
                summary.manifest.len(),
                summary.failed_rows,
                summary.empty_views
            );
        }
        Command::Plan {
            epoch,
            state,
            plan_manifest,
        } => {
            let out = run_plan(&cfg, *epoch, plan_manifest.as_deref(), state.as_deref())?;
            println!(
                "epoch {epoch}: {} batches -> {}",
                out.plan.batches.len(),
                out.plan_path.display()
            );
        }
        Command::Evaluate {
            query,
            query_labels,
            gallery,
            gallery_labels,
            ..
        } => {
            cfg.validate()?;
            let result = run_evaluate(
                (query, query_labels),
                (gallery, gallery_labels),
                &cfg.metrics,
                cfg.paths.output_dir.as_deref(),
            )?;
            println!("{}", serde_json_line(&result));
        }
        Command::LossesCheck { input } => {
            let text = read(input)?;
            let report = losses_check(&parse_loss_inputs(&text)?, &cfg.losses)?;
            println!("{}", serde_json_line(&report));
        }
    }
    Ok(())
}

fn read(path: &Path) -> Result<String, PipelineError> {
    std::fs::read_to_string(path).map_err(|e| PipelineError::Validation(format!("{}: {e}", path.display())))
}

fn serde_json_line<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("serializable output")
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => LevelFilter::Warn,
        1 => LevelFilter::Info,
        _ => LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).parse_default_env().init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
