//! C ABI over `afp-core`.
//!
//! Every fallible call returns an [`AfpStatus`]; on failure the message is
//! available from [`afp_last_error_message`] on the same thread. Handles are
//! opaque and owned by the caller once returned; release them with the
//! matching `_free` function. Strings returned through `out` parameters are
//! released with [`afp_string_free`].

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use libc::c_char;

use afp_core::fusion::ProjectionSpec;
use afp_core::graph::{parse_graph, SemanticGraph};
use afp_core::ingest::{load_manifest, parse_manifest, Manifest};
use afp_core::pipeline::{run_pipeline, PruneConfig, DEFAULT_QUESTION};
use afp_core::selection::SelectionStrategy;
use afp_core::threshold::{adaptive_threshold, BandwidthRule, KdeConfig};
use afp_core::AfpError;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AfpStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Parse = 4,
    Validation = 5,
    Range = 6,
    InsufficientSamples = 7,
    Prompt = 8,
    GraphService = 9,
    Internal = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AfpStrategy {
    Centroid = 0,
    HighestScore = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AfpThresholdReport {
    pub tau: f64,
    pub peak_p: f64,
    pub bandwidth: f64,
    pub sample_count: usize,
}

/// Pruning parameters; starts at the library defaults.
pub struct AfpConfig(PruneConfig);

/// A validated frame manifest.
pub struct AfpManifest {
    manifest: Manifest,
    warnings: Vec<String>,
}

/// A semantic graph to textualize into the prompt.
pub struct AfpGraph(SemanticGraph);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = c);
}

fn status_of(e: &AfpError) -> AfpStatus {
    match e.root() {
        AfpError::Io { .. } => AfpStatus::Io,
        AfpError::Parse { .. } => AfpStatus::Parse,
        AfpError::Validation { .. } | AfpError::ZeroVector { .. } | AfpError::Shape(_) => AfpStatus::Validation,
        AfpError::Range { .. } => AfpStatus::Range,
        AfpError::InsufficientSamples => AfpStatus::InsufficientSamples,
        AfpError::EmptySelection | AfpError::InvalidPrompt(_) => AfpStatus::Prompt,
        AfpError::Transport(_) | AfpError::MalformedResponse(_) => AfpStatus::GraphService,
        AfpError::Stage { .. } => AfpStatus::Internal,
    }
}

struct Failure(AfpStatus, String);

impl From<AfpError> for Failure {
    fn from(e: AfpError) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(AfpStatus::NullArgument, format!("{what} is null"))
}

/// Runs `body`, recording any failure or panic as the thread's last error.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> AfpStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => AfpStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_last_error(&message);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            AfpStatus::Internal
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(AfpStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn config_mut<'a>(cfg: *mut AfpConfig) -> Result<&'a mut PruneConfig, Failure> {
    cfg.as_mut().map(|c| &mut c.0).ok_or_else(|| null("config"))
}

/// Applies `edit` and keeps it only if the whole config stays valid.
unsafe fn edit_config(cfg: *mut AfpConfig, edit: impl FnOnce(&mut PruneConfig)) -> AfpStatus {
    guard(|| {
        let current = config_mut(cfg)?;
        let mut next = current.clone();
        edit(&mut next);
        next.validate()?;
        *current = next;
        Ok(())
    })
}

fn into_c_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Failure(AfpStatus::Internal, "output contains a NUL byte".into()))
}

/// Message for the most recent failure on this thread, or "" if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn afp_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn afp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must come from this library and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn afp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

#[no_mangle]
pub extern "C" fn afp_config_new() -> *mut AfpConfig {
    Box::into_raw(Box::new(AfpConfig(PruneConfig::default())))
}

/// # Safety
/// `cfg` must be null or a handle from [`afp_config_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn afp_config_free(cfg: *mut AfpConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// # Safety
/// `cfg` must be a live config handle.
#[no_mangle]
pub unsafe extern "C" fn afp_config_set_alpha(cfg: *mut AfpConfig, alpha: f64) -> AfpStatus {
    edit_config(cfg, |c| c.alpha = alpha)
}

/// # Safety
/// `cfg` must be a live config handle.
#[no_mangle]
pub unsafe extern "C" fn afp_config_set_beta(cfg: *mut AfpConfig, beta: f64) -> AfpStatus {
    edit_config(cfg, |c| c.beta = beta)
}

/// # Safety
/// `cfg` must be a live config handle.
#[no_mangle]
pub unsafe extern "C" fn afp_config_set_kde_offset(cfg: *mut AfpConfig, offset: f64) -> AfpStatus {
    edit_config(cfg, |c| c.kde.offset = offset)
}

/// A bandwidth of 0 selects Scott's rule; positive values are used as is.
///
/// # Safety
/// `cfg` must be a live config handle.
#[no_mangle]
pub unsafe extern "C" fn afp_config_set_kde_bandwidth(cfg: *mut AfpConfig, bandwidth: f64) -> AfpStatus {
    edit_config(cfg, |c| {
        c.kde.bandwidth_rule = if bandwidth == 0.0 {
            BandwidthRule::Scott
        } else {
            BandwidthRule::Fixed(bandwidth)
        }
    })
}

/// # Safety
/// `cfg` must be a live config handle.
#[no_mangle]
pub unsafe extern "C" fn afp_config_set_kde_grid_points(cfg: *mut AfpConfig, points: usize) -> AfpStatus {
    edit_config(cfg, |c| c.kde.grid_points = points)
}

/// # Safety
/// `cfg` must be a live config handle.
#[no_mangle]
pub unsafe extern "C" fn afp_config_set_refine(cfg: *mut AfpConfig, refine: bool) -> AfpStatus {
    edit_config(cfg, |c| c.refine = refine)
}

/// `strategy` is one of the `AFP_STRATEGY_*` values; anything else is a
/// range error.
///
/// # Safety
/// `cfg` must be a live config handle.
#[no_mangle]
pub unsafe extern "C" fn afp_config_set_strategy(cfg: *mut AfpConfig, strategy: u32) -> AfpStatus {
    let strategy = match strategy {
        s if s == AfpStrategy::Centroid as u32 => SelectionStrategy::Centroid,
        s if s == AfpStrategy::HighestScore as u32 => SelectionStrategy::HighestScore,
        other => {
            set_last_error(&format!("unknown strategy {other}"));
            return AfpStatus::Range;
        }
    };
    edit_config(cfg, |c| c.strategy = strategy)
}

/// Seeded random orthonormal projection for raw branch vectors.
///
/// # Safety
/// `cfg` must be a live config handle.
#[no_mangle]
pub unsafe extern "C" fn afp_config_set_projection_seed(cfg: *mut AfpConfig, seed: u64) -> AfpStatus {
    edit_config(cfg, |c| c.projection = ProjectionSpec::SeededRandomOrthonormal { seed })
}

/// Keep the first 512 components of each raw branch vector.
///
/// # Safety
/// `cfg` must be a live config handle.
#[no_mangle]
pub unsafe extern "C" fn afp_config_set_projection_identity(cfg: *mut AfpConfig) -> AfpStatus {
    edit_config(cfg, |c| c.projection = ProjectionSpec::IdentityTruncate)
}

/// # Safety
/// `cfg` must be a live config handle.
#[no_mangle]
pub unsafe extern "C" fn afp_config_set_token_costs(
    cfg: *mut AfpConfig,
    tokens_per_frame: u64,
    tokens_per_text_char: f64,
) -> AfpStatus {
    edit_config(cfg, |c| {
        c.cost.tokens_per_frame = tokens_per_frame;
        c.cost.tokens_per_text_char = tokens_per_text_char;
    })
}

unsafe fn store_manifest(
    loaded: afp_core::Result<afp_core::ingest::Loaded<Manifest>>,
    out: *mut *mut AfpManifest,
) -> Result<(), Failure> {
    let loaded = loaded?;
    *out = Box::into_raw(Box::new(AfpManifest {
        manifest: loaded.value,
        warnings: loaded.warnings,
    }));
    Ok(())
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn afp_manifest_load(path: *const c_char, out: *mut *mut AfpManifest) -> AfpStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let path = str_arg(path, "path")?;
        store_manifest(load_manifest(path), out)
    })
}

/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn afp_manifest_parse(json: *const c_char, out: *mut *mut AfpManifest) -> AfpStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let json = str_arg(json, "json")?;
        store_manifest(parse_manifest(json.as_bytes()), out)
    })
}

/// # Safety
/// `manifest` must be null or a live manifest handle.
#[no_mangle]
pub unsafe extern "C" fn afp_manifest_free(manifest: *mut AfpManifest) {
    if !manifest.is_null() {
        drop(Box::from_raw(manifest));
    }
}

/// Number of frames, or 0 for a null handle.
///
/// # Safety
/// `manifest` must be null or a live manifest handle.
#[no_mangle]
pub unsafe extern "C" fn afp_manifest_frame_count(manifest: *const AfpManifest) -> usize {
    manifest.as_ref().map_or(0, |m| m.manifest.len())
}

/// Number of load-time warnings (for example defaulted scores).
///
/// # Safety
/// `manifest` must be null or a live manifest handle.
#[no_mangle]
pub unsafe extern "C" fn afp_manifest_warning_count(manifest: *const AfpManifest) -> usize {
    manifest.as_ref().map_or(0, |m| m.warnings.len())
}

/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn afp_graph_parse(json: *const c_char, out: *mut *mut AfpGraph) -> AfpStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let json = str_arg(json, "json")?;
        *out = Box::into_raw(Box::new(AfpGraph(parse_graph(json)?.value)));
        Ok(())
    })
}

/// # Safety
/// `graph` must be null or a live graph handle.
#[no_mangle]
pub unsafe extern "C" fn afp_graph_free(graph: *mut AfpGraph) {
    if !graph.is_null() {
        drop(Box::from_raw(graph));
    }
}

/// Prunes `manifest` and writes the prompt bundle as JSON to `out_json`.
///
/// `graph`, `config` and `question` may be null (no graph, defaults, generic
/// question). `options` points to `option_count` strings and may be null
/// when the count is 0.
///
/// # Safety
/// Handles must be live; strings NUL-terminated; `out_json` writable.
#[no_mangle]
pub unsafe extern "C" fn afp_run(
    manifest: *const AfpManifest,
    graph: *const AfpGraph,
    config: *const AfpConfig,
    question: *const c_char,
    options: *const *const c_char,
    option_count: usize,
    out_json: *mut *mut c_char,
) -> AfpStatus {
    guard(|| {
        if out_json.is_null() {
            return Err(null("out_json"));
        }
        *out_json = ptr::null_mut();
        let m = manifest.as_ref().ok_or_else(|| null("manifest"))?;
        let question = if question.is_null() {
            DEFAULT_QUESTION
        } else {
            str_arg(question, "question")?
        };
        if options.is_null() && option_count > 0 {
            return Err(null("options"));
        }
        let options = (0..option_count)
            .map(|i| str_arg(*options.add(i), "option").map(str::to_string))
            .collect::<Result<Vec<_>, _>>()?;
        let default_cfg;
        let cfg = match config.as_ref() {
            Some(c) => &c.0,
            None => {
                default_cfg = PruneConfig::default();
                &default_cfg
            }
        };

        let mut bundle = run_pipeline(&m.manifest, graph.as_ref().map(|g| &g.0), question, &options, cfg)?;
        bundle.warnings = m.warnings.clone();
        *out_json = into_c_string(bundle.to_json())?;
        Ok(())
    })
}

/// Density-peak threshold over `count` distance samples with Scott's
/// bandwidth and the default grid.
///
/// # Safety
/// `samples` must point to `count` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn afp_adaptive_threshold(
    samples: *const f64,
    count: usize,
    offset: f64,
    out: *mut AfpThresholdReport,
) -> AfpStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if samples.is_null() && count > 0 {
            return Err(null("samples"));
        }
        let samples: &[f64] = if count == 0 {
            &[]
        } else {
            std::slice::from_raw_parts(samples, count)
        };
        let cfg = KdeConfig {
            offset,
            ..KdeConfig::default()
        };
        cfg.validate()?;
        let r = adaptive_threshold(samples, &cfg)?;
        *out = AfpThresholdReport {
            tau: r.tau,
            peak_p: r.peak_p,
            bandwidth: r.bandwidth,
            sample_count: r.sample_count,
        };
        Ok(())
    })
}
