//! End-to-end pruning: fuse, distances, adaptive threshold, clustering,
//! refinement, selection, prompt assembly and cost report.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::{agglomerate, refine_clusters, ClusterSet};
use crate::distance::{build_tables, DistanceTables, SquareMatrix};
use crate::error::{check_unit_interval, AfpError, Result};
use crate::fusion::{fuse, Branch, FusedFeature, ProjectionSpec, Projector};
use crate::graph::{generate_graph_fallback, load_graph, textualize_g1, ChatClient, SemanticGraph};
use crate::ingest::{load_manifest, Dims, FramePayload, Manifest};
use crate::prompt::{assemble_prompt, compute_report, reduction_pct, CostReport, FrameRef, TokenCostModel};
use crate::selection::{select_representatives, PrunedSet, SelectionStrategy};
use crate::threshold::{adaptive_threshold, KdeConfig, ThresholdReport};

/// Used when no question accompanies a manifest.
pub const DEFAULT_QUESTION: &str = "What happens in this video?";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PruneConfig {
    pub alpha: f64,
    pub beta: f64,
    pub kde: KdeConfig,
    pub refine: bool,
    pub strategy: SelectionStrategy,
    pub projection: ProjectionSpec,
    pub cost: TokenCostModel,
}

impl Default for PruneConfig {
    fn default() -> Self {
        PruneConfig {
            alpha: 0.6,
            beta: 0.9,
            kde: KdeConfig::default(),
            refine: true,
            strategy: SelectionStrategy::Centroid,
            projection: ProjectionSpec::default(),
            cost: TokenCostModel::default(),
        }
    }
}

impl PruneConfig {
    pub fn validate(&self) -> Result<()> {
        check_unit_interval("alpha", self.alpha)?;
        check_unit_interval("beta", self.beta)?;
        self.kde.validate()?;
        self.cost.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BundleReport {
    #[serde(flatten)]
    pub cost: CostReport,
    pub tau: Option<f64>,
    pub strategy: SelectionStrategy,
}

/// Machine-readable result for one video.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PromptBundle {
    pub video_id: String,
    pub frames: Vec<FrameRef>,
    pub prompt_text: String,
    pub graph_text: String,
    pub question: String,
    pub options: Vec<String>,
    pub report: BundleReport,
    pub threshold_report: Option<ThresholdReport>,
    pub clusters: Vec<Vec<String>>,
    pub config: PruneConfig,
    pub warnings: Vec<String>,
}

impl PromptBundle {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("bundle serialization is infallible")
    }
}

/// Bundle plus the intermediate tables, for dumps and inspection.
#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub bundle: PromptBundle,
    pub tables: Option<DistanceTables>,
    pub cluster_set: ClusterSet,
    pub pruned: PrunedSet,
}

pub fn fuse_manifest(manifest: &Manifest, cfg: &PruneConfig) -> Result<Vec<FusedFeature>> {
    match manifest.dims {
        Dims::Prefused => manifest
            .frames
            .iter()
            .map(|f| match &f.features {
                FramePayload::PreFused(v) => FusedFeature::new(v.clone()),
                FramePayload::RawPair { .. } => unreachable!("validated manifest"),
            })
            .collect(),
        Dims::Branches { resnet, clip } => {
            let projector = Projector::new(&cfg.projection, resnet, clip)?;
            manifest
                .frames
                .iter()
                .map(|f| {
                    let FramePayload::RawPair { resnet, clip } = &f.features else {
                        unreachable!("validated manifest")
                    };
                    let with_id = |e: AfpError| match e {
                        AfpError::ZeroVector { subject } => AfpError::ZeroVector {
                            subject: format!("frame {} {subject}", f.frame_id),
                        },
                        other => other,
                    };
                    let r = projector.project_and_normalize(resnet, Branch::Resnet).map_err(with_id)?;
                    let c = projector.project_and_normalize(clip, Branch::Clip).map_err(with_id)?;
                    fuse(&r, &c, cfg.alpha)
                })
                .collect()
        }
    }
}

pub fn run_pipeline(
    manifest: &Manifest,
    graph: Option<&SemanticGraph>,
    question: &str,
    options: &[String],
    cfg: &PruneConfig,
) -> Result<PromptBundle> {
    run_pipeline_detailed(manifest, graph, question, options, cfg).map(|run| run.bundle)
}

pub fn run_pipeline_detailed(
    manifest: &Manifest,
    graph: Option<&SemanticGraph>,
    question: &str,
    options: &[String],
    cfg: &PruneConfig,
) -> Result<PipelineRun> {
    cfg.validate().map_err(|e| e.in_stage("config"))?;
    let n = manifest.len();
    let fused = fuse_manifest(manifest, cfg).map_err(|e| e.in_stage("fusion"))?;
    let timestamps = manifest.timestamps();
    let scores = manifest.scores();
    let ids: Vec<String> = manifest.frames.iter().map(|f| f.frame_id.clone()).collect();

    let (tables, threshold, cluster_set) = if n == 1 {
        (None, None, ClusterSet::singletons(1))
    } else {
        let pairs: Vec<(FusedFeature, f64)> = fused.into_iter().zip(timestamps.iter().copied()).collect();
        let tables = build_tables(&pairs, cfg.beta).map_err(|e| e.in_stage("distance"))?;
        let threshold = adaptive_threshold(&tables.d_cos.upper_triangle(), &cfg.kde)
            .map_err(|e| e.in_stage("threshold"))?;
        let clusters = agglomerate(&tables.d_comb, threshold.tau).map_err(|e| e.in_stage("clustering"))?;
        let clusters = refine_clusters(clusters, &tables.d_cos, cfg.refine);
        (Some(tables), Some(threshold), clusters)
    };

    let d_cos = tables
        .as_ref()
        .map(|t| t.d_cos.clone())
        .unwrap_or_else(|| SquareMatrix::zeros(n));
    let pruned = select_representatives(&cluster_set, cfg.strategy, &scores, &timestamps, &ids, &d_cos);

    let graph_text = graph.map(textualize_g1).unwrap_or_default();
    let frame_ref = |i: usize| FrameRef {
        frame_id: ids[i].clone(),
        timestamp_s: timestamps[i],
    };
    let kept: Vec<FrameRef> = pruned.representatives.iter().map(|r| frame_ref(r.frame_index)).collect();
    let all: Vec<FrameRef> = (0..n).map(frame_ref).collect();
    let prompt_text =
        assemble_prompt(&kept, &graph_text, question, options).map_err(|e| e.in_stage("prompt"))?;
    let baseline = assemble_prompt(&all, "", question, options).map_err(|e| e.in_stage("prompt"))?;
    let cost = compute_report(n, kept.len(), &prompt_text, &baseline, &cfg.cost);

    let bundle = PromptBundle {
        video_id: manifest.video_id.clone(),
        frames: kept,
        prompt_text,
        graph_text,
        question: question.to_string(),
        options: options.to_vec(),
        report: BundleReport {
            cost,
            tau: threshold.map(|t| t.tau),
            strategy: cfg.strategy,
        },
        threshold_report: threshold,
        clusters: cluster_set
            .clusters
            .iter()
            .map(|c| c.iter().map(|&i| ids[i].clone()).collect())
            .collect(),
        config: cfg.clone(),
        warnings: Vec::new(),
    };
    Ok(PipelineRun {
        bundle,
        tables,
        cluster_set,
        pruned,
    })
}

/// Picks the graph for one run: a graph file if given, else text-only
/// generation through `client` when a question is available. Service
/// failures degrade to no graph with a warning; a bad graph file is an error.
pub fn resolve_graph(
    graph_file: Option<&Path>,
    client: Option<&dyn ChatClient>,
    question: Option<&str>,
    options: &[String],
) -> Result<(Option<SemanticGraph>, Vec<String>)> {
    if let Some(path) = graph_file {
        let loaded = load_graph(path)?;
        return Ok((Some(loaded.value), loaded.warnings));
    }
    let Some(client) = client else {
        return Ok((None, Vec::new()));
    };
    let Some(question) = question else {
        let w = "graph fallback skipped: no question supplied".to_string();
        log::warn!("{w}");
        return Ok((None, vec![w]));
    };
    match generate_graph_fallback(question, options, client) {
        Ok(loaded) => Ok((Some(loaded.value), loaded.warnings)),
        Err(e) => {
            let w = format!("graph fallback failed, continuing without graph: {e}");
            log::warn!("{w}");
            Ok((None, vec![w]))
        }
    }
}

/// Question and options accompanying a manifest.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct QaDoc {
    pub question: String,
    #[serde(default)]
    pub options: Vec<String>,
}

pub fn load_qa(path: impl AsRef<Path>) -> Result<QaDoc> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| AfpError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| AfpError::parse(path.display().to_string(), e))
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct BatchStats {
    pub videos: usize,
    pub avg_frames_in: f64,
    pub avg_frames_out: f64,
    pub avg_token_reduction_pct: f64,
    /// Reduction of the average frame counts.
    pub frame_reduction_pct: f64,
}

impl BatchStats {
    /// Averages in the order given; callers sort for order independence.
    pub fn aggregate(reports: &[CostReport]) -> Self {
        if reports.is_empty() {
            return BatchStats::default();
        }
        let n = reports.len() as f64;
        let avg = |f: &dyn Fn(&CostReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
        let avg_frames_in = avg(&|r| r.frames_in as f64);
        let avg_frames_out = avg(&|r| r.frames_out as f64);
        BatchStats {
            videos: reports.len(),
            avg_frames_in,
            avg_frames_out,
            avg_token_reduction_pct: avg(&|r| r.token_reduction_pct),
            frame_reduction_pct: reduction_pct(avg_frames_in, avg_frames_out),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchFailure {
    pub file: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchOutcome {
    pub stats: BatchStats,
    pub failures: Vec<BatchFailure>,
    pub warnings: Vec<String>,
}

pub const MANIFEST_SUFFIX: &str = ".manifest.json";

fn stem_of(path: &Path) -> Option<&str> {
    path.file_name()?.to_str()?.strip_suffix(MANIFEST_SUFFIX)
}

/// Processes every `<stem>.manifest.json` in `manifest_dir`.
pub fn run_batch(
    manifest_dir: &Path,
    cfg: &PruneConfig,
    out_dir: &Path,
    client: Option<&(dyn ChatClient + Sync)>,
) -> Result<BatchOutcome> {
    let entries = std::fs::read_dir(manifest_dir).map_err(|source| AfpError::Io {
        path: manifest_dir.to_path_buf(),
        source,
    })?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry
            .map_err(|source| AfpError::Io {
                path: manifest_dir.to_path_buf(),
                source,
            })?
            .path();
        if path.is_file() && stem_of(&path).is_some() {
            files.push(path);
        }
    }
    run_batch_files(files, cfg, out_dir, client)
}

/// Like [`run_batch`] over an explicit file list. Results do not depend on
/// the list order.
pub fn run_batch_files(
    mut files: Vec<PathBuf>,
    cfg: &PruneConfig,
    out_dir: &Path,
    client: Option<&(dyn ChatClient + Sync)>,
) -> Result<BatchOutcome> {
    cfg.validate()?;
    std::fs::create_dir_all(out_dir).map_err(|source| AfpError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    files.sort();
    files.dedup();

    let mut warnings = Vec::new();
    if files.is_empty() {
        let w = "empty batch: no *.manifest.json files found".to_string();
        log::warn!("{w}");
        warnings.push(w);
    }

    let results: Vec<(PathBuf, Result<CostReport>)> = files
        .par_iter()
        .map(|path| (path.clone(), process_one(path, cfg, out_dir, client)))
        .collect();

    let mut reports = Vec::new();
    let mut failures = Vec::new();
    for (path, result) in results {
        let file = path
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        match result {
            Ok(r) => reports.push(r),
            Err(e) => {
                log::error!("{file}: {e}");
                failures.push(BatchFailure {
                    file,
                    error: e.to_string(),
                });
            }
        }
    }

    let outcome = BatchOutcome {
        stats: BatchStats::aggregate(&reports),
        failures,
        warnings,
    };
    let report_path = out_dir.join("batch_report.json");
    let json = serde_json::to_string_pretty(&outcome).expect("batch report serialization is infallible");
    std::fs::write(&report_path, json).map_err(|source| AfpError::Io {
        path: report_path,
        source,
    })?;
    Ok(outcome)
}

fn process_one(
    manifest_path: &Path,
    cfg: &PruneConfig,
    out_dir: &Path,
    client: Option<&(dyn ChatClient + Sync)>,
) -> Result<CostReport> {
    let stem = stem_of(manifest_path).expect("filtered by suffix");
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    let sibling = |suffix: &str| {
        let p = dir.join(format!("{stem}{suffix}"));
        p.is_file().then_some(p)
    };

    let loaded = load_manifest(manifest_path).map_err(|e| e.in_stage("ingest"))?;
    let qa = sibling(".qa.json").map(load_qa).transpose().map_err(|e| e.in_stage("qa"))?;
    let graph_file = sibling(".graph.json");
    let options = qa.as_ref().map(|q| q.options.clone()).unwrap_or_default();
    let question = qa.as_ref().map(|q| q.question.as_str());
    let (graph, graph_warnings) = resolve_graph(
        graph_file.as_deref(),
        client.map(|c| c as &dyn ChatClient),
        question,
        &options,
    )
    .map_err(|e| e.in_stage("graph"))?;

    let mut bundle = run_pipeline(
        &loaded.value,
        graph.as_ref(),
        question.unwrap_or(DEFAULT_QUESTION),
        &options,
        cfg,
    )?;
    bundle.warnings = loaded.warnings;
    bundle.warnings.extend(graph_warnings);

    let out = out_dir.join(format!("{stem}.bundle.json"));
    std::fs::write(&out, bundle.to_json()).map_err(|source| AfpError::Io { path: out, source })?;
    Ok(bundle.report.cost)
}
