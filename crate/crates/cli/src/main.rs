use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use keyreid::SelectionKind;
use keyreid_cli::database::{cmd_db_upsert, LabelSource};
use keyreid_cli::synth::{cmd_synth, SynthProfile};
use keyreid_cli::{
    cmd_run, evaluation, extract, matching, select, with_workers, CliError, CliResult, RunConfig,
    StageReport,
};

#[derive(Parser)]
#[command(
    name = "keyreid",
    version,
    about = "Key-frame extraction and re-identification pipeline"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every selection method.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory for stage artifacts.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Dataset root (frames, manifest.json, labels.csv, detections, embeddings).
    #[arg(long, global = true)]
    dataset: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Score motion, apply detections and drop high-motion frames.
    Extract,
    /// Choose key frames per video for each method.
    Select,
    /// Match key frames against the key frames of other videos.
    Match,
    /// Decide video identities and compare methods.
    Evaluate,
    /// Run extract, select, match and evaluate.
    Run,
    /// Generate a synthetic dataset.
    Synth(SynthArgs),
    /// Embedding database maintenance.
    Db {
        #[command(subcommand)]
        command: DbCommand,
    },
}

#[derive(Args)]
struct SynthArgs {
    /// Directory to create the dataset in.
    #[arg(long)]
    root: PathBuf,
    /// JSON profile; fields not given keep their defaults.
    #[arg(long)]
    profile: Option<PathBuf>,
    #[arg(long)]
    individuals: Option<usize>,
    #[arg(long)]
    videos_per_individual: Option<usize>,
    #[arg(long)]
    frames: Option<usize>,
    #[arg(long)]
    noise_sigma: Option<f64>,
}

#[derive(Subcommand)]
enum DbCommand {
    /// Add one method's key-frame embeddings, with labels, to the gallery store.
    Upsert {
        #[arg(long, default_value = "kmeans")]
        method: SelectionKind,
        #[arg(long, value_enum, default_value_t = LabelSource::Vote)]
        labels: LabelSource,
    },
}

fn load_config(g: &Global) -> CliResult<RunConfig> {
    let mut cfg = match &g.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = g.seed {
        cfg = cfg.with_seed(seed);
    }
    if let Some(w) = g.workers {
        cfg.workers = w;
    }
    if let Some(o) = &g.output {
        cfg.output_dir = o.clone();
    }
    if let Some(d) = &g.dataset {
        cfg.dataset_root = d.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn synth_profile(args: &SynthArgs, seed: Option<u64>) -> CliResult<SynthProfile> {
    let mut p = match &args.profile {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        }
        None => SynthProfile::default(),
    };
    if let Some(v) = args.individuals {
        p.individuals = v;
    }
    if let Some(v) = args.videos_per_individual {
        p.videos_per_individual = v;
    }
    if let Some(v) = args.frames {
        p.frames_per_video = v;
    }
    if let Some(v) = args.noise_sigma {
        p.noise_sigma = v;
    }
    if let Some(s) = seed {
        p.seed = s;
    }
    Ok(p)
}

fn execute(cli: Cli) -> CliResult<Vec<StageReport>> {
    if let Command::Synth(args) = &cli.command {
        let profile = synth_profile(args, cli.global.seed)?;
        let workers = cli.global.workers.unwrap_or(0);
        let truth = with_workers(workers, || cmd_synth(&profile, &args.root))??;
        println!(
            "wrote {} videos, {} frames ({} detected) to {}",
            truth.videos.len(),
            truth.total_frames,
            truth.detected_frames,
            args.root.display()
        );
        return Ok(Vec::new());
    }
    let cfg = load_config(&cli.global)?;
    with_workers(cfg.workers, || -> CliResult<Vec<StageReport>> {
        Ok(match &cli.command {
            Command::Extract => vec![extract::cmd_extract(&cfg)?],
            Command::Select => vec![select::cmd_select(&cfg)?],
            Command::Match => vec![matching::cmd_match(&cfg)?],
            Command::Evaluate => vec![evaluation::cmd_evaluate(&cfg)?.0],
            Command::Run => {
                let (reports, report) = cmd_run(&cfg)?;
                for (name, m) in &report.per_method {
                    println!(
                        "{name:>14}  image {:.3}  t60 {:.3}  t80 {:.3}  vote {:.3}  key frames {}",
                        m.image_accuracy,
                        m.video_accuracy.t60,
                        m.video_accuracy.t80,
                        m.video_accuracy.vote,
                        m.keyframe_count
                    );
                }
                reports
            }
            Command::Db {
                command: DbCommand::Upsert { method, labels },
            } => vec![cmd_db_upsert(&cfg, *method, *labels)?],
            Command::Synth(_) => unreachable!(),
        })
    })?
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(reports) => {
            let failed: Vec<CliError> = reports
                .into_iter()
                .filter_map(StageReport::into_error)
                .collect();
            for e in &failed {
                eprintln!("error: {e}");
            }
            if failed.is_empty() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
