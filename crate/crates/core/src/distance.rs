//! Pairwise visual, temporal and combined frame distances.

use std::fmt::Write as _;

use crate::error::{check_unit_interval, AfpError, Result};
use crate::fusion::{l2_norm, FusedFeature};

const ZERO_NORM: f64 = 1e-12;

/// Dense `n x n` matrix of f64, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(n: usize) -> Self {
        SquareMatrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
            return Err(AfpError::Shape(format!(
                "row {i} has {} entries in a {n}-row matrix",
                r.len()
            )));
        }
        Ok(SquareMatrix {
            n,
            data: rows.concat(),
        })
    }

    /// Builds a symmetric matrix with zero diagonal from `f(i, j)` over `i < j`.
    pub fn symmetric_from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = SquareMatrix::zeros(n);
        for i in 0..n {
            for j in (i + 1)..n {
                m.set_pair(i, j, f(i, j));
            }
        }
        m
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn set_pair(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.n + j] = value;
        self.data[j * self.n + i] = value;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    /// Strict upper triangle, row by row.
    pub fn upper_triangle(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n * self.n.saturating_sub(1) / 2);
        for i in 0..self.n {
            out.extend_from_slice(&self.row(i)[i + 1..]);
        }
        out
    }

    /// Symmetric within `tol` and zero on the diagonal.
    pub fn check_distance_shape(&self, tol: f64) -> Result<()> {
        for i in 0..self.n {
            if self.get(i, i) != 0.0 {
                return Err(AfpError::Shape(format!("non-zero diagonal at {i}")));
            }
            for j in (i + 1)..self.n {
                let (a, b) = (self.get(i, j), self.get(j, i));
                if !a.is_finite() || !b.is_finite() {
                    return Err(AfpError::Shape(format!("non-finite entry at ({i}, {j})")));
                }
                if (a - b).abs() > tol {
                    return Err(AfpError::Shape(format!("asymmetric at ({i}, {j}): {a} vs {b}")));
                }
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for i in 0..self.n {
            let line: Vec<String> = self.row(i).iter().map(|x| format!("{x:.9}")).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }
}

pub fn cosine_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    let (na, nb) = (l2_norm(a), l2_norm(b));
    if na < ZERO_NORM || nb < ZERO_NORM {
        return Err(AfpError::ZeroVector {
            subject: "cosine distance operand".into(),
        });
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    Ok((1.0 - dot / (na * nb)).clamp(0.0, 2.0))
}

/// `|t_i - t_j|` over the span; zero for a degenerate span.
pub fn temporal_distance(t_i: f64, t_j: f64, span: (f64, f64)) -> f64 {
    let width = span.1 - span.0;
    if width <= 0.0 {
        return 0.0;
    }
    (t_i - t_j).abs() / width
}

pub fn combined_distance(d_cos: f64, d_temp: f64, beta: f64) -> Result<f64> {
    check_unit_interval("beta", beta)?;
    Ok(beta * d_cos + (1.0 - beta) * d_temp)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceTables {
    pub d_cos: SquareMatrix,
    pub d_comb: SquareMatrix,
    pub t_span: (f64, f64),
}

impl DistanceTables {
    pub fn len(&self) -> usize {
        self.d_cos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d_cos.is_empty()
    }

    /// Text dump of both matrices, one section each.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# d_cos {n}x{n}", n = self.len());
        out.push_str(&self.d_cos.to_text());
        let _ = writeln!(out, "# d_comb {n}x{n}", n = self.len());
        out.push_str(&self.d_comb.to_text());
        out
    }
}

pub fn build_tables(frames: &[(FusedFeature, f64)], beta: f64) -> Result<DistanceTables> {
    check_unit_interval("beta", beta)?;
    if frames.is_empty() {
        return Err(AfpError::validation("frames", "distance tables need at least one frame"));
    }
    if let Some(i) = frames
        .iter()
        .position(|(f, _)| l2_norm(f.as_slice()) < ZERO_NORM)
    {
        return Err(AfpError::ZeroVector {
            subject: format!("fused feature of frame index {i}"),
        });
    }

    let t_min = frames.iter().map(|(_, t)| *t).fold(f64::INFINITY, f64::min);
    let t_max = frames.iter().map(|(_, t)| *t).fold(f64::NEG_INFINITY, f64::max);
    let t_span = (t_min, t_max);

    let n = frames.len();
    let mut d_cos = SquareMatrix::zeros(n);
    let mut d_comb = SquareMatrix::zeros(n);
    for i in 0..n {
        for j in (i + 1)..n {
            let (fi, ti) = &frames[i];
            let (fj, tj) = &frames[j];
            let c = cosine_distance(fi.as_slice(), fj.as_slice())?;
            let t = temporal_distance(*ti, *tj, t_span);
            d_cos.set_pair(i, j, c);
            d_comb.set_pair(i, j, combined_distance(c, t, beta)?);
        }
    }
    Ok(DistanceTables {
        d_cos,
        d_comb,
        t_span,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::FUSED_DIM;
    use proptest::prelude::*;

    fn feat(components: &[(usize, f64)]) -> FusedFeature {
        let mut v = vec![0.0; FUSED_DIM];
        for &(i, x) in components {
            v[i] = x;
        }
        FusedFeature::new(v).unwrap()
    }

    #[test]
    fn cosine_examples() {
        let e0 = feat(&[(0, 1.0)]);
        let e1 = feat(&[(1, 1.0)]);
        let neg = feat(&[(0, -1.0)]);
        assert!(cosine_distance(e0.as_slice(), e0.as_slice()).unwrap().abs() <= 1e-9);
        assert!((cosine_distance(e0.as_slice(), e1.as_slice()).unwrap() - 1.0).abs() <= 1e-9);
        assert!((cosine_distance(e0.as_slice(), neg.as_slice()).unwrap() - 2.0).abs() <= 1e-9);
        assert!(matches!(
            cosine_distance(&[0.0; 4], &[1.0, 0.0, 0.0, 0.0]),
            Err(AfpError::ZeroVector { .. })
        ));
    }

    #[test]
    fn temporal_examples() {
        assert_eq!(temporal_distance(3.0, 3.0, (0.0, 10.0)), 0.0);
        assert!((temporal_distance(0.0, 10.0, (0.0, 10.0)) - 1.0).abs() <= 1e-9);
        assert!((temporal_distance(5.0, 0.0, (0.0, 10.0)) - 0.5).abs() <= 1e-9);
        assert_eq!(temporal_distance(4.0, 4.0, (4.0, 4.0)), 0.0);
    }

    #[test]
    fn combined_examples() {
        assert!((combined_distance(0.2, 0.5, 1.0).unwrap() - 0.2).abs() <= 1e-9);
        assert!((combined_distance(0.2, 0.5, 0.0).unwrap() - 0.5).abs() <= 1e-9);
        assert!((combined_distance(0.2, 0.5, 0.7).unwrap() - 0.29).abs() <= 1e-9);
        assert!(matches!(
            combined_distance(0.2, 0.5, 1.01),
            Err(AfpError::Range { name: "beta", .. })
        ));
    }

    #[test]
    fn single_frame_gives_one_by_one_zeros() {
        let t = build_tables(&[(feat(&[(0, 1.0)]), 2.0)], 0.9).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.d_cos.get(0, 0), 0.0);
        assert_eq!(t.d_comb.get(0, 0), 0.0);
    }

    #[test]
    fn identical_frames_at_same_time_are_all_zero() {
        let f = feat(&[(0, 0.3), (5, 0.4)]);
        let t = build_tables(&[(f.clone(), 1.0), (f, 1.0)], 0.9).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!(t.d_cos.get(i, j).abs() <= 1e-12);
                assert!(t.d_comb.get(i, j).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn three_frames_match_scalar_recomputation() {
        let frames = vec![
            (feat(&[(0, 1.0)]), 0.0),
            (feat(&[(0, 1.0), (1, 1.0)]), 4.0),
            (feat(&[(1, 2.0), (2, -1.0)]), 10.0),
        ];
        let beta = 0.7;
        let t = build_tables(&frames, beta).unwrap();

        // Oracle: entries written out from the definitions.
        let s2 = 2f64.sqrt();
        let s5 = 5f64.sqrt();
        let cos = [[0.0, 1.0 - 1.0 / s2, 1.0], [0.0, 0.0, 1.0 - 2.0 / (s2 * s5)]];
        let temp = [[0.0, 0.4, 1.0], [0.0, 0.0, 0.6]];
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            let c = cos[i][j];
            let d = beta * c + (1.0 - beta) * temp[i][j];
            assert!((t.d_cos.get(i, j) - c).abs() <= 1e-12, "cos {i},{j}");
            assert!((t.d_comb.get(i, j) - d).abs() <= 1e-12, "comb {i},{j}");
            assert_eq!(t.d_cos.get(i, j), t.d_cos.get(j, i));
            assert_eq!(t.d_comb.get(i, j), t.d_comb.get(j, i));
        }
        assert_eq!(t.t_span, (0.0, 10.0));
    }

    #[test]
    fn zero_fused_vector_is_reported_with_index() {
        let frames = vec![
            (feat(&[(0, 1.0)]), 0.0),
            (FusedFeature::new(vec![0.0; FUSED_DIM]).unwrap(), 1.0),
        ];
        let err = build_tables(&frames, 0.9).unwrap_err();
        assert!(err.to_string().contains("index 1"), "{err}");
    }

    #[test]
    fn shape_check_flags_asymmetry() {
        let m = SquareMatrix::from_rows(vec![vec![0.0, 0.5], vec![0.4, 0.0]]).unwrap();
        assert!(m.check_distance_shape(1e-12).is_err());
        assert!(matches!(
            SquareMatrix::from_rows(vec![vec![0.0, 1.0], vec![0.0]]),
            Err(AfpError::Shape(_))
        ));
    }

    fn small_frames() -> impl Strategy<Value = Vec<(Vec<f64>, f64)>> {
        prop::collection::vec(
            (prop::collection::vec(-1.0f64..1.0, 4), 0.0f64..100.0),
            1..7,
        )
        .prop_filter("non-degenerate vectors", |fs| {
            fs.iter().all(|(v, _)| l2_norm(v) > 1e-3)
        })
    }

    fn to_frames(raw: &[(Vec<f64>, f64)]) -> Vec<(FusedFeature, f64)> {
        raw.iter()
            .map(|(v, t)| {
                let mut full = vec![0.0; FUSED_DIM];
                full[..4].copy_from_slice(v);
                (FusedFeature::new(full).unwrap(), *t)
            })
            .collect()
    }

    proptest! {
        #[test]
        fn cosine_is_scale_invariant(
            u in prop::collection::vec(-1.0f64..1.0, 8),
            v in prop::collection::vec(-1.0f64..1.0, 8),
            a in 0.01f64..100.0,
            b in 0.01f64..100.0,
        ) {
            prop_assume!(l2_norm(&u) > 1e-3 && l2_norm(&v) > 1e-3);
            let su: Vec<f64> = u.iter().map(|x| a * x).collect();
            let sv: Vec<f64> = v.iter().map(|x| b * x).collect();
            let d0 = cosine_distance(&u, &v).unwrap();
            let d1 = cosine_distance(&su, &sv).unwrap();
            prop_assert!((d0 - d1).abs() <= 1e-9);
            prop_assert!((0.0..=2.0).contains(&d0));
        }

        #[test]
        fn tables_are_permutation_equivariant(raw in small_frames(), seed in any::<u64>()) {
            let frames = to_frames(&raw);
            let n = frames.len();
            let mut perm: Vec<usize> = (0..n).collect();
            // Deterministic shuffle from the seed.
            let mut s = seed;
            for i in (1..n).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                perm.swap(i, (s >> 33) as usize % (i + 1));
            }
            let permuted: Vec<_> = perm.iter().map(|&p| frames[p].clone()).collect();
            let a = build_tables(&frames, 0.9).unwrap();
            let b = build_tables(&permuted, 0.9).unwrap();
            for i in 0..n {
                for j in 0..n {
                    prop_assert_eq!(b.d_cos.get(i, j), a.d_cos.get(perm[i], perm[j]));
                    prop_assert_eq!(b.d_comb.get(i, j), a.d_comb.get(perm[i], perm[j]));
                }
            }
        }

        #[test]
        fn beta_endpoints_select_one_component(raw in small_frames()) {
            let frames = to_frames(&raw);
            let visual = build_tables(&frames, 1.0).unwrap();
            let temporal = build_tables(&frames, 0.0).unwrap();
            for i in 0..frames.len() {
                for j in 0..frames.len() {
                    prop_assert_eq!(visual.d_comb.get(i, j), visual.d_cos.get(i, j));
                    let dt = temporal_distance(frames[i].1, frames[j].1, temporal.t_span);
                    prop_assert_eq!(temporal.d_comb.get(i, j), if i == j { 0.0 } else { dt });
                }
            }
        }
    }
}
