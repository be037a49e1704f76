//! Adaptive pruning of redundant keyframes.
//!
//! Candidate keyframes from an upstream selector are embedded in a fused
//! 512-d feature space, grouped by threshold-stopped average-linkage
//! clustering (the threshold adapts to the density of pairwise visual
//! distances), and reduced to one representative per group. The survivors
//! are laid out in a compact QA prompt together with an optional textual
//! semantic graph, and a token-cost report compares the result with the
//! unpruned prompt.
//!
//! ```no_run
//! use afp_core::{ingest::load_manifest, pipeline::{run_pipeline, PruneConfig}};
//!
//! let manifest = load_manifest("video.manifest.json")?.value;
//! let bundle = run_pipeline(&manifest, None, "What moves fastest?", &[], &PruneConfig::default())?;
//! println!("{}", bundle.prompt_text);
//! # Ok::<(), afp_core::AfpError>(())
//! ```

pub mod clustering;
pub mod distance;
pub mod error;
pub mod fusion;
pub mod graph;
pub mod ingest;
pub mod pipeline;
pub mod prompt;
pub mod selection;
pub mod threshold;

pub use error::{AfpError, Result};

/// Dimension of the shared fused feature space.
pub const FUSED_DIM: usize = 512;
