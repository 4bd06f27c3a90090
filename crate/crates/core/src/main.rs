use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use tonecluster::eval::NmiVariant;
use tonecluster::pipeline::{self, AudioFixture, Overrides, PipelineConfig};
use tonecluster::synth::{self, SynthConfig};
use tonecluster::Result;

#[derive(Parser)]
#[command(name = "tonecluster", version, about = "Discover lexical tone categories from pitch contours")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// TOML pipeline config
    #[arg(long, short)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, short)]
    output_dir: Option<PathBuf>,
    /// Use this word manifest as the dataset
    #[arg(long, conflicts_with = "dataset_contours")]
    manifest: Option<PathBuf>,
    /// Use this contour cache as the dataset
    #[arg(long = "dataset-contours")]
    dataset_contours: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    bandwidth: Option<f64>,
    #[arg(long)]
    min_cluster_size: Option<usize>,
    #[arg(long, value_enum)]
    nmi_variant: Option<Variant>,
    /// Remove neutral-tone syllables before clustering
    #[arg(long)]
    drop_neutral: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Variant {
    Arithmetic,
    Geometric,
    Min,
}

#[derive(Clone, Copy, ValueEnum)]
enum Templates {
    Mandarin,
    Cantonese,
}

#[derive(Subcommand)]
enum Command {
    /// Extract per-syllable contours from a manifest
    Extract(Common),
    /// Train the autoencoder
    Train {
        #[command(flatten)]
        common: Common,
        /// Contour cache (default: OUTPUT_DIR/contours.jsonl)
        #[arg(long)]
        contours: Option<PathBuf>,
    },
    /// Encode, run mean shift and decode prototypes
    Cluster {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        contours: Option<PathBuf>,
    },
    /// Score clusters and the k-means baseline against tone labels
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        clusters: Option<PathBuf>,
        #[arg(long)]
        contours: Option<PathBuf>,
    },
    /// Render SVG figures from the cluster artifacts
    Figures(Common),
    /// Run every stage
    Run(Common),
    /// Generate a synthetic fixture corpus
    Synth {
        #[arg(long, short)]
        output_dir: PathBuf,
        #[arg(long, default_value_t = 2020)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        per_class: usize,
        #[arg(long, default_value_t = 0.03)]
        jitter: f64,
        #[arg(long, default_value_t = 0.05)]
        shift: f64,
        #[arg(long, value_enum, default_value = "mandarin")]
        templates: Templates,
        /// Also write WAV files, segmentations and a manifest
        #[arg(long)]
        audio: bool,
    },
}

fn load_config(c: &Common) -> Result<PipelineConfig> {
    let mut cfg = match &c.config {
        Some(p) => PipelineConfig::from_toml_file(p)?,
        None => PipelineConfig::default(),
    };
    cfg.apply(&Overrides {
        seed: c.seed,
        output_dir: c.output_dir.clone(),
        manifest: c.manifest.clone(),
        contours: c.dataset_contours.clone(),
        epochs: c.epochs,
        bandwidth: c.bandwidth,
        min_cluster_size: c.min_cluster_size,
        nmi_variant: c.nmi_variant.map(|v| match v {
            Variant::Arithmetic => NmiVariant::Arithmetic,
            Variant::Geometric => NmiVariant::Geometric,
            Variant::Min => NmiVariant::Min,
        }),
        drop_neutral: c.drop_neutral,
    });
    Ok(cfg)
}

fn or_default(p: Option<PathBuf>, dir: &Path, name: &str) -> PathBuf {
    p.unwrap_or_else(|| dir.join(name))
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Extract(c) => {
            let cfg = load_config(&c)?;
            let s = pipeline::cmd_extract(&cfg)?;
            println!(
                "{} syllables written, {} dropped, {} words excluded",
                s.records, s.dropped, s.excluded_words
            );
        }
        Command::Train { common, contours } => {
            let cfg = load_config(&common)?;
            let contours = or_default(contours, &cfg.output_dir, pipeline::CONTOURS_FILE);
            let loss = pipeline::cmd_train(&cfg, &contours)?;
            println!("final mean MSE {:.6}", loss.last().copied().unwrap_or(f64::NAN));
        }
        Command::Cluster {
            common,
            checkpoint,
            contours,
        } => {
            let cfg = load_config(&common)?;
            let checkpoint = or_default(checkpoint, &cfg.output_dir, pipeline::CHECKPOINT_FILE);
            let contours = or_default(contours, &cfg.output_dir, pipeline::CONTOURS_FILE);
            let (a, report) = pipeline::cmd_cluster(&cfg, &checkpoint, &contours)?;
            println!("K = {}, sizes {:?}, unclustered {}", a.k, a.sizes, a.unclustered);
            print!("{}", report.to_text());
        }
        Command::Eval {
            common,
            clusters,
            contours,
        } => {
            let cfg = load_config(&common)?;
            let clusters = or_default(clusters, &cfg.output_dir, pipeline::CLUSTERS_FILE);
            let contours = or_default(contours, &cfg.output_dir, pipeline::CONTOURS_FILE);
            for r in pipeline::cmd_eval(&cfg, &clusters, &contours)? {
                println!("{}", r.to_text());
            }
        }
        Command::Figures(c) => {
            let cfg = load_config(&c)?;
            for p in pipeline::render_figures(&cfg)? {
                println!("{}", p.display());
            }
        }
        Command::Run(c) => {
            let cfg = load_config(&c)?;
            let s = pipeline::run(&cfg)?;
            println!(
                "K = {}, final MSE {:.6}",
                s.clusters.k,
                s.loss.last().copied().unwrap_or(f64::NAN)
            );
            print!("{}", s.plausibility.to_text());
            for r in &s.reports {
                println!("{:<12} {:<6} NMI {:.3} coverage {:.3}", r.method.name(), r.split.name(), r.nmi, r.coverage);
            }
        }
        Command::Synth {
            output_dir,
            seed,
            per_class,
            jitter,
            shift,
            templates,
            audio,
        } => {
            let (templates, language) = match templates {
                Templates::Mandarin => (synth::mandarin_templates(), "cmn"),
                Templates::Cantonese => (synth::cantonese_templates(), "yue"),
            };
            let cfg = SynthConfig {
                templates,
                per_class_count: per_class,
                jitter_sd: jitter,
                level_shift_sd: shift,
                seed,
                ..SynthConfig::default()
            };
            let fixture = AudioFixture {
                language: language.into(),
                ..AudioFixture::default()
            };
            let n = pipeline::synth(&output_dir, &cfg, audio.then_some(&fixture))?;
            println!("{n} contours written to {}", output_dir.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
