//! Thin CLI over the pipeline library: `run`, `features`, `cluster`, `infer`.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use omega_rater::cluster::{DbscanParams, PolarityConfig, Scaling};
use omega_rater::features::FeatureConfig;
use omega_rater::geometry::AngleMode;
use omega_rater::inference::{InferenceOptions, McmcOptions};
use omega_rater::ingest::{DatasetSpec, Format};
use omega_rater::pipeline::{
    self, RunConfig, RunManifest, SentimentProvider,
};

#[derive(Parser)]
#[command(name = "omega-rater", version, about = "Review rating-polarity analysis from sentiment proportions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline: features, clustering and inference.
    Run(RunArgs),
    /// Stop after writing features.csv.
    Features(FeaturesArgs),
    /// Cluster an existing features.csv.
    Cluster(ClusterCmdArgs),
    /// Infer rating posteriors from an existing clusters.csv.
    Infer(InferCmdArgs),
}

#[derive(Args)]
struct DatasetArgs {
    /// Input dataset path.
    #[arg(long)]
    input: PathBuf,
    /// Input format.
    #[arg(long, default_value = "csv")]
    format: Format,
    /// Column holding the review text.
    #[arg(long)]
    text_column: Option<String>,
    /// Column holding the held-out rating.
    #[arg(long)]
    rating_column: Option<String>,
    /// Comma-separated pos,neu,neg column names with precomputed proportions.
    #[arg(long, value_delimiter = ',', num_args = 1, value_name = "POS,NEU,NEG")]
    sentiment_columns: Option<Vec<String>>,
    /// Number of rating categories.
    #[arg(long, default_value_t = 5)]
    rating_scale: u32,
}

impl DatasetArgs {
    fn into_spec(self) -> Result<DatasetSpec, String> {
        let sentiment_columns = match self.sentiment_columns {
            Some(cols) => {
                let arr: [String; 3] = cols.try_into().map_err(|c: Vec<String>| {
                    format!("--sentiment-columns needs exactly 3 names, got {}", c.len())
                })?;
                Some(arr)
            }
            None => None,
        };
        Ok(DatasetSpec {
            path: self.input,
            format: self.format,
            text_column: self.text_column,
            rating_column: self.rating_column,
            sentiment_columns,
            rating_scale: self.rating_scale,
        })
    }
}

#[derive(Args)]
struct SentimentArgs {
    /// Lexicon file (token<TAB>valence per line) for the text scorer.
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// Force a provider instead of following the resolved dataset source.
    #[arg(long)]
    sentiment_provider: Option<SentimentProvider>,
}

#[derive(Args)]
struct FeatureArgs {
    /// Span-line direction scheme.
    #[arg(long, default_value = "paper")]
    angle_mode: AngleMode,
    /// Epsilon inside ln(alpha^beta + epsilon).
    #[arg(long, default_value_t = omega_rater::features::DEFAULT_EPSILON)]
    epsilon: f64,
}

#[derive(Args)]
struct DbscanArgs {
    /// Neighborhood radius.
    #[arg(long, default_value_t = 0.09)]
    eps: f64,
    /// Minimum neighborhood size (the point itself included).
    #[arg(long, default_value_t = 7)]
    min_pts: usize,
    /// Feature scaling before distances.
    #[arg(long, default_value = "none")]
    scaling: Scaling,
    /// Minimum share of points a cluster needs to compete for polarity.
    #[arg(long, default_value_t = 0.05)]
    polarity_mass_threshold: f64,
}

#[derive(Args)]
struct InferArgs {
    /// Post-burn-in MCMC draws per cluster.
    #[arg(long, default_value_t = 20_000)]
    mcmc_samples: usize,
    /// Burn-in iterations per chain.
    #[arg(long, default_value_t = 2_000)]
    burn_in: usize,
    /// Mass of the highest-density intervals.
    #[arg(long, default_value_t = 0.94)]
    hdi_mass: f64,
    /// Upper tail threshold: P(rating >= tail-hi).
    #[arg(long, default_value_t = 4)]
    tail_hi: u32,
    /// Lower tail threshold: P(rating <= tail-lo).
    #[arg(long, default_value_t = 2)]
    tail_lo: u32,
}

#[derive(Args)]
struct CommonArgs {
    /// Directory for all outputs.
    #[arg(long, default_value = "out")]
    output_dir: PathBuf,
    /// Top-level seed; all stage randomness derives from it.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Parallel map width (overrides OMEGA_RATER_THREADS).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    dataset: DatasetArgs,
    #[command(flatten)]
    sentiment: SentimentArgs,
    #[command(flatten)]
    features: FeatureArgs,
    #[command(flatten)]
    dbscan: DbscanArgs,
    #[command(flatten)]
    infer: InferArgs,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct FeaturesArgs {
    #[command(flatten)]
    dataset: DatasetArgs,
    #[command(flatten)]
    sentiment: SentimentArgs,
    #[command(flatten)]
    features: FeatureArgs,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct ClusterCmdArgs {
    /// Features CSV produced by the features stage.
    #[arg(long, default_value = "out/features.csv")]
    features: PathBuf,
    #[command(flatten)]
    dbscan: DbscanArgs,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct InferCmdArgs {
    /// Clusters CSV produced by the cluster stage.
    #[arg(long, default_value = "out/clusters.csv")]
    clusters: PathBuf,
    #[command(flatten)]
    dataset: DatasetArgs,
    #[command(flatten)]
    infer: InferArgs,
    #[command(flatten)]
    common: CommonArgs,
}

fn build_config(
    dataset: Option<DatasetArgs>,
    sentiment: Option<SentimentArgs>,
    features: Option<FeatureArgs>,
    dbscan: Option<DbscanArgs>,
    infer: Option<InferArgs>,
    common: CommonArgs,
) -> Result<RunConfig, String> {
    let dataset_spec = match dataset {
        Some(d) => d.into_spec()?,
        None => DatasetSpec {
            path: PathBuf::new(),
            format: Format::Csv,
            text_column: None,
            rating_column: None,
            sentiment_columns: None,
            rating_scale: 5,
        },
    };
    let mut cfg = RunConfig::new(dataset_spec, common.output_dir);
    cfg.seed = common.seed;
    cfg.threads = common.threads;
    if let Some(s) = sentiment {
        cfg.lexicon_path = s.lexicon;
        cfg.provider = s.sentiment_provider;
    }
    if let Some(f) = features {
        cfg.features = FeatureConfig {
            angle_mode: f.angle_mode,
            epsilon: f.epsilon,
        };
    }
    if let Some(d) = dbscan {
        cfg.dbscan = DbscanParams {
            eps: d.eps,
            min_pts: d.min_pts,
            scaling: d.scaling,
        };
        cfg.polarity = PolarityConfig {
            mass_threshold: d.polarity_mass_threshold,
        };
    }
    if let Some(i) = infer {
        cfg.inference = InferenceOptions {
            mcmc: McmcOptions {
                n_samples: i.mcmc_samples,
                burn_in: i.burn_in,
                seed: common.seed,
            },
            hdi_mass: i.hdi_mass,
            tail_hi: i.tail_hi,
            tail_lo: i.tail_lo,
        };
    }
    Ok(cfg)
}

fn print_summary(manifest: &RunManifest) {
    for stage in &manifest.stages {
        println!(
            "{}: {} rows in, {} rows out, {} skipped ({} ms)",
            stage.stage, stage.rows_in, stage.rows_out, stage.skipped, stage.wall_ms
        );
    }
    if let Some(f) = &manifest.flag_frequencies {
        println!(
            "flags: degenerate_triangle={} arccos_clamped={} zero_u_vector={} alpha_zero={}",
            f.degenerate_triangle, f.arccos_clamped, f.zero_u_vector, f.alpha_zero
        );
    }
    for w in &manifest.warnings {
        eprintln!("warning: {w}");
    }
    println!("outputs in {}", manifest.config.output_dir.display());
}

fn execute(command: Command) -> omega_rater::Result<RunManifest> {
    match command {
        Command::Run(a) => {
            let cfg = build_config(
                Some(a.dataset),
                Some(a.sentiment),
                Some(a.features),
                Some(a.dbscan),
                Some(a.infer),
                a.common,
            )
            .map_err(omega_rater::Error::Config)?;
            pipeline::run_pipeline(&cfg)
        }
        Command::Features(a) => {
            let cfg = build_config(
                Some(a.dataset),
                Some(a.sentiment),
                Some(a.features),
                None,
                None,
                a.common,
            )
            .map_err(omega_rater::Error::Config)?;
            pipeline::run_features(&cfg)
        }
        Command::Cluster(a) => {
            let features_path = a.features.clone();
            let cfg = build_config(None, None, None, Some(a.dbscan), None, a.common)
                .map_err(omega_rater::Error::Config)?;
            pipeline::run_cluster(&cfg, &features_path)
        }
        Command::Infer(a) => {
            let clusters_path = a.clusters.clone();
            let cfg = build_config(
                Some(a.dataset),
                None,
                None,
                None,
                Some(a.infer),
                a.common,
            )
            .map_err(omega_rater::Error::Config)?;
            pipeline::run_infer(&cfg, &clusters_path)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1, // bad flags are configuration errors
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command) {
        Ok(manifest) => {
            print_summary(&manifest);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
