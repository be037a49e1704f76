use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

use afp_core::fusion::{Matrix, ProjectionSpec};
use afp_core::graph::{generate_graph_fallback, HttpChatClient};
use afp_core::ingest::load_manifest;
use afp_core::pipeline::{resolve_graph, run_batch, run_pipeline_detailed, PruneConfig, DEFAULT_QUESTION};
use afp_core::selection::SelectionStrategy;
use afp_core::threshold::{BandwidthRule, KdeConfig};
use afp_core::prompt::TokenCostModel;
use afp_core::AfpError;

const EXIT_FAILURE: u8 = 1;
const EXIT_USAGE: u8 = 2;

#[derive(Parser)]
#[command(name = "afp", version, about = "Prune redundant keyframes and build a compact QA prompt")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Prune one manifest.
    Run(RunArgs),
    /// Prune every <stem>.manifest.json in a directory.
    Batch(BatchArgs),
    /// Ask a chat service for a semantic graph from question text alone.
    GraphFallback(FallbackArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    graph: Option<PathBuf>,
    #[arg(long)]
    question: Option<String>,
    #[arg(long, value_delimiter = ',')]
    options: Vec<String>,
    #[arg(long)]
    dump_distances: Option<PathBuf>,
    #[arg(long)]
    dump_dendrogram: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    tuning: Tuning,
}

#[derive(Args)]
struct BatchArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    tuning: Tuning,
}

#[derive(Args)]
struct FallbackArgs {
    #[arg(long)]
    question: String,
    #[arg(long, value_delimiter = ',')]
    options: Vec<String>,
    #[arg(long)]
    endpoint: String,
    #[arg(long, default_value_t = 30_000)]
    timeout_ms: u64,
    /// Write the graph document here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Centroid,
    HighestScore,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProjectionArg {
    Seeded,
    Identity,
    External,
}

#[derive(Clone, Copy)]
struct BandwidthArg(BandwidthRule);

impl FromStr for BandwidthArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("scott") {
            return Ok(BandwidthArg(BandwidthRule::Scott));
        }
        s.parse::<f64>()
            .map(|h| BandwidthArg(BandwidthRule::Fixed(h)))
            .map_err(|_| format!("expected `scott` or a positive number, got {s:?}"))
    }
}

#[derive(Args)]
struct Tuning {
    /// Fusion weight of the CLIP branch.
    #[arg(long, default_value_t = 0.6)]
    alpha: f64,
    /// Weight of visual distance against temporal distance.
    #[arg(long, default_value_t = 0.9)]
    beta: f64,
    #[arg(long, default_value_t = 0.15)]
    kde_offset: f64,
    #[arg(long, default_value = "scott")]
    kde_bandwidth: BandwidthArg,
    #[arg(long, default_value_t = 512)]
    kde_grid_points: usize,
    #[arg(long)]
    no_refine: bool,
    #[arg(long, value_enum, default_value = "centroid")]
    strategy: StrategyArg,
    #[arg(long, default_value_t = 255)]
    tokens_per_frame: u64,
    #[arg(long, default_value_t = 0.25)]
    tokens_per_char: f64,
    #[arg(long, value_enum, default_value = "seeded")]
    projection: ProjectionArg,
    #[arg(long, default_value_t = 0)]
    projection_seed: u64,
    /// Text matrix (d_r x 512) for --projection external.
    #[arg(long)]
    resnet_matrix: Option<PathBuf>,
    /// Text matrix (d_c x 512) for --projection external.
    #[arg(long)]
    clip_matrix: Option<PathBuf>,
    /// Chat endpoint used to generate a graph when no graph file is given.
    #[arg(long)]
    graph_endpoint: Option<String>,
    #[arg(long, default_value_t = 30_000)]
    llm_timeout_ms: u64,
}

impl Tuning {
    fn config(&self) -> Result<PruneConfig, AfpError> {
        let projection = match self.projection {
            ProjectionArg::Seeded => ProjectionSpec::SeededRandomOrthonormal {
                seed: self.projection_seed,
            },
            ProjectionArg::Identity => ProjectionSpec::IdentityTruncate,
            ProjectionArg::External => {
                let (Some(r), Some(c)) = (&self.resnet_matrix, &self.clip_matrix) else {
                    return Err(AfpError::InvalidPrompt(
                        "--projection external needs --resnet-matrix and --clip-matrix".into(),
                    ));
                };
                ProjectionSpec::ExternalMatrix {
                    resnet: Matrix::load(r)?,
                    clip: Matrix::load(c)?,
                }
            }
        };
        let cfg = PruneConfig {
            alpha: self.alpha,
            beta: self.beta,
            kde: KdeConfig {
                offset: self.kde_offset,
                grid_points: self.kde_grid_points,
                bandwidth_rule: self.kde_bandwidth.0,
            },
            refine: !self.no_refine,
            strategy: match self.strategy {
                StrategyArg::Centroid => SelectionStrategy::Centroid,
                StrategyArg::HighestScore => SelectionStrategy::HighestScore,
            },
            projection,
            cost: TokenCostModel {
                tokens_per_frame: self.tokens_per_frame,
                tokens_per_text_char: self.tokens_per_char,
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn client(&self) -> Option<HttpChatClient> {
        self.graph_endpoint
            .as_ref()
            .map(|url| HttpChatClient::from_env(url.clone(), Duration::from_millis(self.llm_timeout_ms)))
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), AfpError> {
    std::fs::write(path, contents).map_err(|source| AfpError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn run(args: RunArgs, cfg: PruneConfig) -> Result<(), AfpError> {
    let loaded = load_manifest(&args.manifest)?;
    let client = args.tuning.client();
    let (graph, graph_warnings) = resolve_graph(
        args.graph.as_deref(),
        client.as_ref().map(|c| c as _),
        args.question.as_deref(),
        &args.options,
    )?;
    let question = args.question.as_deref().unwrap_or(DEFAULT_QUESTION);
    let mut out = run_pipeline_detailed(&loaded.value, graph.as_ref(), question, &args.options, &cfg)?;
    out.bundle.warnings = loaded.warnings;
    out.bundle.warnings.extend(graph_warnings);

    if let Some(path) = &args.dump_distances {
        let text = out.tables.as_ref().map(|t| t.to_text()).unwrap_or_default();
        write_file(path, &text)?;
    }
    if let Some(path) = &args.dump_dendrogram {
        let frames = &loaded.value.frames;
        write_file(path, &out.cluster_set.dendrogram_text(|i| frames[i].frame_id.clone()))?;
    }
    write_file(&args.out, &out.bundle.to_json())?;

    let r = &out.bundle.report.cost;
    log::info!(
        "{}: {} -> {} frames ({:.1}% fewer), ~{} -> ~{} tokens",
        out.bundle.video_id,
        r.frames_in,
        r.frames_out,
        r.frame_reduction_pct,
        r.tokens_in_est,
        r.tokens_out_est
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();

    match cli.command {
        Command::Run(args) => {
            let cfg = match args.tuning.config() {
                Ok(cfg) => cfg,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(EXIT_USAGE);
                }
            };
            match run(args, cfg) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(EXIT_FAILURE)
                }
            }
        }
        Command::Batch(args) => {
            let cfg = match args.tuning.config() {
                Ok(cfg) => cfg,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(EXIT_USAGE);
                }
            };
            let client = args.tuning.client();
            match run_batch(&args.input, &cfg, &args.out, client.as_ref().map(|c| c as _)) {
                Ok(outcome) => {
                    let s = &outcome.stats;
                    eprintln!(
                        "{} videos: avg {:.2} -> {:.2} frames, avg token reduction {:.1}%, {} failed",
                        s.videos,
                        s.avg_frames_in,
                        s.avg_frames_out,
                        s.avg_token_reduction_pct,
                        outcome.failures.len()
                    );
                    if outcome.failures.is_empty() {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(EXIT_FAILURE)
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(EXIT_FAILURE)
                }
            }
        }
        Command::GraphFallback(args) => {
            let client = HttpChatClient::from_env(args.endpoint, Duration::from_millis(args.timeout_ms));
            match generate_graph_fallback(&args.question, &args.options, &client) {
                Ok(loaded) => {
                    let json = loaded.value.to_json();
                    match &args.out {
                        Some(path) => match write_file(path, &json) {
                            Ok(()) => ExitCode::SUCCESS,
                            Err(e) => {
                                eprintln!("error: {e}");
                                ExitCode::from(EXIT_FAILURE)
                            }
                        },
                        None => {
                            println!("{json}");
                            ExitCode::SUCCESS
                        }
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(EXIT_FAILURE)
                }
            }
        }
    }
}
