//! Frame manifest parsing and validation.
//!
//! A manifest is a JSON document listing the candidate keyframes of one
//! video together with their upstream relevance scores and feature payloads:
//!
//! ```json
//! { "video_id": "v1",
//!   "dims": {"resnet": 2048, "clip": 512},
//!   "frames": [ {"frame_id": "f0", "timestamp_s": 1.5, "score": 0.7,
//!                "resnet": [...], "clip": [...]} ] }
//! ```
//!
//! With `"dims": "prefused"` every frame instead carries a 512-d `fused`
//! vector. Frames are returned sorted by timestamp, ties broken by id.

use std::cmp::Ordering;
use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{AfpError, Result};
use crate::FUSED_DIM;

/// Result of a load that may have repaired or defaulted some input.
#[derive(Debug, Clone, PartialEq)]
pub struct Loaded<T> {
    pub value: T,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dims {
    Branches { resnet: usize, clip: usize },
    Prefused,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FramePayload {
    RawPair { resnet: Vec<f64>, clip: Vec<f64> },
    PreFused(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameRecord {
    pub frame_id: String,
    pub timestamp_s: f64,
    pub score: f64,
    pub features: FramePayload,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub video_id: String,
    pub dims: Dims,
    pub frames: Vec<FrameRecord>,
}

impl Manifest {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn timestamps(&self) -> Vec<f64> {
        self.frames.iter().map(|f| f.timestamp_s).collect()
    }

    pub fn scores(&self) -> Vec<f64> {
        self.frames.iter().map(|f| f.score).collect()
    }

    /// Builds a manifest from in-memory frames, applying the same checks and
    /// ordering as [`load_manifest`].
    pub fn new(video_id: impl Into<String>, dims: Dims, frames: Vec<FrameRecord>) -> Result<Self> {
        let mut manifest = Manifest {
            video_id: video_id.into(),
            dims,
            frames,
        };
        manifest.validate()?;
        manifest.frames.sort_by(frame_order);
        Ok(manifest)
    }

    pub fn to_json(&self) -> String {
        let doc = ManifestDoc {
            video_id: self.video_id.clone(),
            dims: match self.dims {
                Dims::Branches { resnet, clip } => DimsDoc::Branches { resnet, clip },
                Dims::Prefused => DimsDoc::Marker("prefused".to_string()),
            },
            frames: self
                .frames
                .iter()
                .map(|f| {
                    let (resnet, clip, fused) = match &f.features {
                        FramePayload::RawPair { resnet, clip } => {
                            (Some(resnet.clone()), Some(clip.clone()), None)
                        }
                        FramePayload::PreFused(v) => (None, None, Some(v.clone())),
                    };
                    FrameDoc {
                        frame_id: f.frame_id.clone(),
                        timestamp_s: f.timestamp_s,
                        score: Some(f.score),
                        resnet,
                        clip,
                        fused,
                    }
                })
                .collect(),
        };
        serde_json::to_string(&doc).expect("manifest serialization is infallible")
    }

    fn validate(&self) -> Result<()> {
        if self.frames.is_empty() {
            return Err(AfpError::validation("frames", "manifest has no frames"));
        }
        if let Dims::Branches { resnet, clip } = self.dims {
            if resnet == 0 || clip == 0 {
                return Err(AfpError::validation("dims", "branch dimensions must be positive"));
            }
        }
        let mut seen = HashSet::new();
        for frame in &self.frames {
            let id = &frame.frame_id;
            if !seen.insert(id.as_str()) {
                return Err(AfpError::validation(
                    format!("frame {id}"),
                    "duplicate frame_id",
                ));
            }
            if !frame.timestamp_s.is_finite() || frame.timestamp_s < 0.0 {
                return Err(AfpError::validation(
                    format!("frame {id}"),
                    format!("timestamp_s must be finite and >= 0, got {}", frame.timestamp_s),
                ));
            }
            if !frame.score.is_finite() {
                return Err(AfpError::validation(format!("frame {id}"), "score is not finite"));
            }
            match (&frame.features, self.dims) {
                (FramePayload::RawPair { resnet, clip }, Dims::Branches { resnet: dr, clip: dc }) => {
                    check_vector(id, "resnet", resnet, dr)?;
                    check_vector(id, "clip", clip, dc)?;
                }
                (FramePayload::PreFused(v), Dims::Prefused) => check_vector(id, "fused", v, FUSED_DIM)?,
                (FramePayload::RawPair { .. }, Dims::Prefused) => {
                    return Err(AfpError::validation(
                        format!("frame {id}"),
                        "raw resnet/clip payload in a prefused manifest",
                    ))
                }
                (FramePayload::PreFused(_), Dims::Branches { .. }) => {
                    return Err(AfpError::validation(
                        format!("frame {id}"),
                        "fused payload in a manifest declaring branch dims",
                    ))
                }
            }
        }
        Ok(())
    }
}

fn check_vector(frame_id: &str, field: &str, v: &[f64], expected: usize) -> Result<()> {
    if v.len() != expected {
        return Err(AfpError::validation(
            format!("frame {frame_id}"),
            format!("{field} has dimension {}, expected {expected}", v.len()),
        ));
    }
    if let Some(pos) = v.iter().position(|x| !x.is_finite()) {
        return Err(AfpError::validation(
            format!("frame {frame_id}"),
            format!("{field}[{pos}] is not finite"),
        ));
    }
    Ok(())
}

/// Timestamp ascending, then frame id.
pub(crate) fn frame_order(a: &FrameRecord, b: &FrameRecord) -> Ordering {
    a.timestamp_s
        .total_cmp(&b.timestamp_s)
        .then_with(|| a.frame_id.cmp(&b.frame_id))
}

#[derive(Serialize, Deserialize)]
struct ManifestDoc {
    video_id: String,
    dims: DimsDoc,
    frames: Vec<FrameDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum DimsDoc {
    Branches { resnet: usize, clip: usize },
    Marker(String),
}

#[derive(Serialize, Deserialize)]
struct FrameDoc {
    frame_id: String,
    timestamp_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    resnet: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    clip: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    fused: Option<Vec<f64>>,
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Loaded<Manifest>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| AfpError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_manifest(&bytes)
}

pub fn parse_manifest(bytes: &[u8]) -> Result<Loaded<Manifest>> {
    let doc: ManifestDoc =
        serde_json::from_slice(bytes).map_err(|e| AfpError::parse("manifest", e))?;

    let dims = match doc.dims {
        DimsDoc::Branches { resnet, clip } => Dims::Branches { resnet, clip },
        DimsDoc::Marker(m) if m == "prefused" => Dims::Prefused,
        DimsDoc::Marker(m) => {
            return Err(AfpError::parse(
                "manifest.dims",
                format!("expected {{\"resnet\", \"clip\"}} or \"prefused\", got {m:?}"),
            ))
        }
    };

    let mut warnings = Vec::new();
    let mut frames = Vec::with_capacity(doc.frames.len());
    for f in doc.frames {
        let id = f.frame_id;
        let features = match (f.resnet, f.clip, f.fused) {
            (Some(resnet), Some(clip), None) => FramePayload::RawPair { resnet, clip },
            (None, None, Some(fused)) => FramePayload::PreFused(fused),
            _ => {
                return Err(AfpError::validation(
                    format!("frame {id}"),
                    "expected exactly one of (resnet + clip) or fused",
                ))
            }
        };
        let score = match f.score {
            Some(s) => s,
            None => {
                warnings.push(format!("frame {id}: missing score, defaulting to 0.0"));
                0.0
            }
        };
        frames.push(FrameRecord {
            frame_id: id,
            timestamp_s: f.timestamp_s,
            score,
            features,
        });
    }

    for w in &warnings {
        log::warn!("{w}");
    }
    let value = Manifest::new(doc.video_id, dims, frames)?;
    Ok(Loaded { value, warnings })
}
