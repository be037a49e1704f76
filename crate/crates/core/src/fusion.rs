//! Branch projection to the shared 512-d space and weighted fusion.
//!
//! The fused vector is `(1 - alpha) * resnet_n + alpha * clip_n` where both
//! branch vectors have been projected and L2-normalized. The combination is
//! not re-normalized.

use std::fmt;
use std::path::Path;

use rand::SeedableRng;
use rayon::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Serialize, Serializer};

use crate::error::{check_unit_interval, AfpError, Result};
use crate::FUSED_DIM;

const ZERO_NORM: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Branch {
    Resnet,
    Clip,
}

impl Branch {
    fn stream(self) -> u64 {
        match self {
            Branch::Resnet => 0,
            Branch::Clip => 1,
        }
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Branch::Resnet => "resnet",
            Branch::Clip => "clip",
        })
    }
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(AfpError::Shape(format!(
                "{rows}x{cols} matrix needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(AfpError::validation("matrix", "non-finite entry"));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    /// Reads the text container: a `rows cols` header followed by
    /// `rows * cols` whitespace-separated values in row-major order. Lines
    /// starting with `#` are ignored.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| AfpError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text).map_err(|e| match e {
            AfpError::Parse { message, .. } => AfpError::parse(path.display().to_string(), message),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut tokens = text
            .lines()
            .filter(|l| !l.trim_start().starts_with('#'))
            .flat_map(str::split_whitespace);
        let mut header = |what: &str| -> Result<usize> {
            tokens
                .next()
                .ok_or_else(|| AfpError::parse("matrix", format!("missing {what}")))?
                .parse::<usize>()
                .map_err(|e| AfpError::parse("matrix", format!("bad {what}: {e}")))
        };
        let rows = header("row count")?;
        let cols = header("column count")?;
        let data = tokens
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|e| AfpError::parse("matrix", format!("bad value {t:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_row_major(rows, cols, data)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.rows, self.cols);
        for row in self.data.chunks(self.cols.max(1)) {
            let line: Vec<String> = row.iter().map(|x| format!("{x:e}")).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    /// `x^T M` for a row vector `x` of length `rows`.
    fn left_multiply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (xi, row) in x.iter().zip(self.data.chunks(self.cols)) {
            if *xi == 0.0 {
                continue;
            }
            for (o, m) in out.iter_mut().zip(row) {
                *o += xi * m;
            }
        }
        out
    }
}

/// How branch vectors reach the shared 512-d space.
#[derive(Debug, Clone, PartialEq)]
pub enum ProjectionSpec {
    /// Keep the first 512 components. Requires branch dimension >= 512.
    IdentityTruncate,
    /// Gaussian matrix drawn from a seeded ChaCha8 stream, then
    /// orthonormalized (columns when d >= 512, rows otherwise).
    SeededRandomOrthonormal { seed: u64 },
    /// User-supplied `d_r x 512` and `d_c x 512` matrices.
    ExternalMatrix { resnet: Matrix, clip: Matrix },
}

impl Default for ProjectionSpec {
    fn default() -> Self {
        ProjectionSpec::SeededRandomOrthonormal { seed: 0 }
    }
}

impl Serialize for ProjectionSpec {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut map = serializer.serialize_map(None)?;
        match self {
            ProjectionSpec::IdentityTruncate => map.serialize_entry("kind", "identity_truncate")?,
            ProjectionSpec::SeededRandomOrthonormal { seed } => {
                map.serialize_entry("kind", "seeded_random_orthonormal")?;
                map.serialize_entry("seed", seed)?;
            }
            ProjectionSpec::ExternalMatrix { resnet, clip } => {
                map.serialize_entry("kind", "external_matrix")?;
                map.serialize_entry("resnet_shape", &[resnet.rows, resnet.cols])?;
                map.serialize_entry("clip_shape", &[clip.rows, clip.cols])?;
            }
        }
        map.end()
    }
}

/// Draws the seeded projection for one branch of input dimension `dim`.
pub fn seeded_orthonormal(seed: u64, branch: Branch, dim: usize) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(branch.stream());
    let data: Vec<f64> = (0..dim * FUSED_DIM)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    let mut m = Matrix {
        rows: dim,
        cols: FUSED_DIM,
        data,
    };
    // One pass loses orthogonality in proportion to the condition number.
    // Gaussian draws with at least twice as many rows as columns have
    // condition number below ~6; near-square draws can be far worse and get a
    // second pass.
    let (long, short) = (dim.max(FUSED_DIM), dim.min(FUSED_DIM));
    let passes = if long >= 2 * short { 1 } else { 2 };
    if dim >= FUSED_DIM {
        orthonormalize_columns(&mut m, passes);
    } else {
        orthonormalize_rows(&mut m, passes);
    }
    m
}

// Four independent accumulators let the compiler vectorize the reduction.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

// Modified Gram-Schmidt. Right-looking form: once q_k is final its component
// is removed from every later vector in parallel; each vector still sees the
// textbook update order.
fn gram_schmidt(vectors: &mut [Vec<f64>], passes: usize) {
    for _ in 0..passes {
        for k in 0..vectors.len() {
            let (head, rest) = vectors.split_at_mut(k + 1);
            let q = &mut head[k];
            let norm = dot(q, q).sqrt();
            q.iter_mut().for_each(|x| *x /= norm);
            let q = &*q;
            rest.par_iter_mut().for_each(|v| {
                let proj = dot(q, v);
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= proj * qi;
                }
            });
        }
    }
}

fn orthonormalize_columns(m: &mut Matrix, passes: usize) {
    let mut cols: Vec<Vec<f64>> = (0..m.cols)
        .map(|c| (0..m.rows).map(|r| m.get(r, c)).collect())
        .collect();
    gram_schmidt(&mut cols, passes);
    for (c, col) in cols.iter().enumerate() {
        for (r, v) in col.iter().enumerate() {
            m.data[r * m.cols + c] = *v;
        }
    }
}

fn orthonormalize_rows(m: &mut Matrix, passes: usize) {
    let mut rows: Vec<Vec<f64>> = m.data.chunks(m.cols).map(<[f64]>::to_vec).collect();
    gram_schmidt(&mut rows, passes);
    m.data = rows.concat();
}

/// A [`ProjectionSpec`] materialized for concrete branch dimensions.
#[derive(Debug, Clone)]
pub struct Projector {
    resnet: BranchMap,
    clip: BranchMap,
}

#[derive(Debug, Clone)]
enum BranchMap {
    Truncate { dim: usize },
    Linear(Matrix),
}

impl Projector {
    pub fn new(spec: &ProjectionSpec, resnet_dim: usize, clip_dim: usize) -> Result<Self> {
        Ok(Projector {
            resnet: BranchMap::build(spec, Branch::Resnet, resnet_dim)?,
            clip: BranchMap::build(spec, Branch::Clip, clip_dim)?,
        })
    }

    pub fn project_and_normalize(&self, v: &[f64], branch: Branch) -> Result<Vec<f64>> {
        let map = match branch {
            Branch::Resnet => &self.resnet,
            Branch::Clip => &self.clip,
        };
        let projected = match map {
            BranchMap::Truncate { dim } => {
                check_dim(branch, v.len(), *dim)?;
                v[..FUSED_DIM].to_vec()
            }
            BranchMap::Linear(m) => {
                check_dim(branch, v.len(), m.rows)?;
                m.left_multiply(v)
            }
        };
        normalize(projected, &branch.to_string())
    }
}

impl BranchMap {
    fn build(spec: &ProjectionSpec, branch: Branch, dim: usize) -> Result<Self> {
        match spec {
            ProjectionSpec::IdentityTruncate => {
                if dim < FUSED_DIM {
                    return Err(AfpError::validation(
                        format!("projection.{branch}"),
                        format!("identity_truncate needs dimension >= {FUSED_DIM}, got {dim}"),
                    ));
                }
                Ok(BranchMap::Truncate { dim })
            }
            ProjectionSpec::SeededRandomOrthonormal { seed } => {
                Ok(BranchMap::Linear(seeded_orthonormal(*seed, branch, dim)))
            }
            ProjectionSpec::ExternalMatrix { resnet, clip } => {
                let m = match branch {
                    Branch::Resnet => resnet,
                    Branch::Clip => clip,
                };
                if m.rows != dim || m.cols != FUSED_DIM {
                    return Err(AfpError::Shape(format!(
                        "{branch} projection is {}x{}, expected {dim}x{FUSED_DIM}",
                        m.rows, m.cols
                    )));
                }
                Ok(BranchMap::Linear(m.clone()))
            }
        }
    }
}

fn check_dim(branch: Branch, got: usize, expected: usize) -> Result<()> {
    if got == expected {
        Ok(())
    } else {
        Err(AfpError::Shape(format!(
            "{branch} vector has dimension {got}, projection expects {expected}"
        )))
    }
}

fn normalize(mut v: Vec<f64>, subject: &str) -> Result<Vec<f64>> {
    let norm = l2_norm(&v);
    if norm < ZERO_NORM {
        return Err(AfpError::ZeroVector {
            subject: subject.to_string(),
        });
    }
    v.iter_mut().for_each(|x| *x /= norm);
    Ok(v)
}

pub(crate) fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// One-shot projection. Builds the branch map on every call; use
/// [`Projector`] when projecting many frames.
pub fn project_and_normalize(v: &[f64], spec: &ProjectionSpec, branch: Branch) -> Result<Vec<f64>> {
    let map = BranchMap::build(spec, branch, v.len())?;
    let projector = match branch {
        Branch::Resnet => Projector {
            resnet: map,
            clip: BranchMap::Truncate { dim: FUSED_DIM },
        },
        Branch::Clip => Projector {
            resnet: BranchMap::Truncate { dim: FUSED_DIM },
            clip: map,
        },
    };
    projector.project_and_normalize(v, branch)
}

/// A 512-d fused frame feature.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedFeature(Vec<f64>);

impl FusedFeature {
    pub fn new(v: Vec<f64>) -> Result<Self> {
        if v.len() != FUSED_DIM {
            return Err(AfpError::Shape(format!(
                "fused feature has dimension {}, expected {FUSED_DIM}",
                v.len()
            )));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(AfpError::validation("fused feature", "non-finite component"));
        }
        Ok(FusedFeature(v))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

pub fn fuse(resnet_n: &[f64], clip_n: &[f64], alpha: f64) -> Result<FusedFeature> {
    check_unit_interval("alpha", alpha)?;
    for (branch, v) in [("resnet", resnet_n), ("clip", clip_n)] {
        if v.len() != FUSED_DIM {
            return Err(AfpError::Shape(format!(
                "{branch} input to fuse has dimension {}, expected {FUSED_DIM}",
                v.len()
            )));
        }
        if (l2_norm(v) - 1.0).abs() > 1e-6 {
            return Err(AfpError::validation(branch, "fuse inputs must be unit-norm"));
        }
    }
    let vec = resnet_n
        .iter()
        .zip(clip_n)
        .map(|(r, c)| (1.0 - alpha) * r + alpha * c)
        .collect();
    FusedFeature::new(vec)
}
