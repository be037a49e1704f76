//! Threshold-stopped average-linkage agglomeration and singleton refinement.
//!
//! Clusters are identified by their smallest member index. Whenever several
//! candidate pairs share the minimum linkage, the pair `(a, b)` with
//! `min(a) < min(b)` that is lexicographically first by `(min(a), min(b))`
//! wins. Output clusters are ordered by smallest member.

use std::fmt::Write as _;

use serde::Serialize;

use crate::distance::SquareMatrix;
use crate::error::{AfpError, Result};

const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Merge {
    pub left: Vec<usize>,
    pub right: Vec<usize>,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ClusterSet {
    pub clusters: Vec<Vec<usize>>,
    pub merge_log: Vec<Merge>,
}

impl ClusterSet {
    pub fn singletons(n: usize) -> Self {
        ClusterSet {
            clusters: (0..n).map(|i| vec![i]).collect(),
            merge_log: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    /// True when the clusters are disjoint and cover `0..n`.
    pub fn is_partition_of(&self, n: usize) -> bool {
        let mut seen = vec![false; n];
        for &i in self.clusters.iter().flatten() {
            if i >= n || seen[i] {
                return false;
            }
            seen[i] = true;
        }
        seen.into_iter().all(|s| s)
    }

    /// Dendrogram text: one merge per line, `step<TAB>distance<TAB>left<TAB>right`,
    /// with members rendered through `label`.
    pub fn dendrogram_text(&self, label: impl Fn(usize) -> String) -> String {
        let mut out = String::from("# step\tdistance\tleft\tright\n");
        let render = |members: &[usize]| {
            let names: Vec<String> = members.iter().map(|&i| label(i)).collect();
            format!("[{}]", names.join(","))
        };
        for (step, m) in self.merge_log.iter().enumerate() {
            let _ = writeln!(
                out,
                "{step}\t{:.9}\t{}\t{}",
                m.distance,
                render(&m.left),
                render(&m.right)
            );
        }
        out
    }
}

fn merge_sorted(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    out.extend_from_slice(a);
    out.extend_from_slice(b);
    out.sort_unstable();
    out
}

/// Agglomerates singletons while the minimum average linkage is strictly
/// below `tau`.
pub fn agglomerate(d: &SquareMatrix, tau: f64) -> Result<ClusterSet> {
    d.check_distance_shape(SYMMETRY_TOL)?;
    if tau.is_nan() {
        return Err(AfpError::Range {
            name: "tau",
            value: tau,
            expected: "a number",
        });
    }
    let n = d.len();

    // Slots stay ordered by smallest member: a merge folds the later slot into
    // the earlier one, whose minimum is unchanged.
    let mut members: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    // cross[a][b]: sum of d over all cross pairs of slots a and b.
    let mut cross: Vec<Vec<f64>> = (0..n).map(|i| d.row(i).to_vec()).collect();
    let mut merge_log = Vec::new();

    while members.len() > 1 {
        let mut best: Option<(usize, usize, f64)> = None;
        for a in 0..members.len() {
            for b in (a + 1)..members.len() {
                let size = (members[a].len() * members[b].len()) as f64;
                let avg = cross[a][b] / size;
                if best.is_none_or(|(_, _, v)| avg < v) {
                    best = Some((a, b, avg));
                }
            }
        }
        let (a, b, linkage) = best.expect("at least two clusters");
        if linkage >= tau {
            break;
        }

        merge_log.push(Merge {
            left: members[a].clone(),
            right: members[b].clone(),
            distance: linkage,
        });
        let absorbed = members.remove(b);
        members[a] = merge_sorted(&members[a], &absorbed);

        let absorbed_row = cross.remove(b);
        for row in cross.iter_mut() {
            row.remove(b);
        }
        for (k, extra) in absorbed_row.iter().enumerate() {
            let k = if k > b { k - 1 } else if k == b { continue } else { k };
            if k == a {
                continue;
            }
            cross[a][k] += extra;
            cross[k][a] = cross[a][k];
        }
    }

    Ok(ClusterSet {
        clusters: members,
        merge_log,
    })
}

fn average_cross(d: &SquareMatrix, a: &[usize], b: &[usize]) -> f64 {
    let sum: f64 = a
        .iter()
        .flat_map(|&i| b.iter().map(move |&j| (i, j)))
        .map(|(i, j)| d.get(i, j))
        .sum();
    sum / (a.len() * b.len()) as f64
}

/// Folds clusters with fewer than two members into their nearest cluster by
/// average visual distance, lowest singleton first, until none remain or a
/// single cluster is left.
pub fn refine_clusters(cs: ClusterSet, d_cos: &SquareMatrix, enabled: bool) -> ClusterSet {
    if !enabled {
        return cs;
    }
    let ClusterSet {
        mut clusters,
        merge_log,
    } = cs;
    clusters.sort_by_key(|c| c[0]);

    while clusters.len() > 1 {
        let Some(s) = clusters.iter().position(|c| c.len() < 2) else {
            break;
        };
        let mut target: Option<(usize, f64)> = None;
        for (k, other) in clusters.iter().enumerate() {
            if k == s {
                continue;
            }
            let avg = average_cross(d_cos, &clusters[s], other);
            if target.is_none_or(|(_, v)| avg < v) {
                target = Some((k, avg));
            }
        }
        let (k, _) = target.expect("another cluster exists");
        let single = clusters.remove(s);
        let k = if k > s { k - 1 } else { k };
        clusters[k] = merge_sorted(&clusters[k], &single);
        clusters.sort_by_key(|c| c[0]);
    }

    ClusterSet {
        clusters,
        merge_log,
    }
}
