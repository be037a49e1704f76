//! One representative frame per cluster.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::clustering::ClusterSet;
use crate::distance::SquareMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionStrategy {
    /// Highest upstream relevance score.
    HighestScore,
    /// Member with the smallest mean visual distance to the rest.
    #[default]
    Centroid,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Representative {
    pub cluster_index: usize,
    pub frame_index: usize,
    pub frame_id: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct PrunedSet {
    /// Ordered by representative timestamp, then frame index.
    pub representatives: Vec<Representative>,
}

// Earliest timestamp, then lowest index.
fn earlier(timestamps: &[f64], a: usize, b: usize) -> Ordering {
    timestamps[a].total_cmp(&timestamps[b]).then(a.cmp(&b))
}

/// Panics on an empty cluster.
pub fn select_highest_score(cluster: &[usize], scores: &[f64], timestamps: &[f64]) -> usize {
    *cluster
        .iter()
        .min_by(|&&a, &&b| {
            scores[b]
                .total_cmp(&scores[a])
                .then_with(|| earlier(timestamps, a, b))
        })
        .expect("non-empty cluster")
}

/// Mean visual distance from `i` to the other members; 0 for a singleton.
fn mean_distance(cluster: &[usize], d_cos: &SquareMatrix, i: usize) -> f64 {
    if cluster.len() < 2 {
        return 0.0;
    }
    let sum: f64 = cluster.iter().filter(|&&j| j != i).map(|&j| d_cos.get(i, j)).sum();
    sum / (cluster.len() - 1) as f64
}

/// Panics on an empty cluster.
pub fn select_centroid(cluster: &[usize], d_cos: &SquareMatrix, timestamps: &[f64]) -> usize {
    let means: Vec<(usize, f64)> = cluster
        .iter()
        .map(|&i| (i, mean_distance(cluster, d_cos, i)))
        .collect();
    means
        .iter()
        .min_by(|(a, ma), (b, mb)| ma.total_cmp(mb).then_with(|| earlier(timestamps, *a, *b)))
        .map(|(i, _)| *i)
        .expect("non-empty cluster")
}

pub fn select_representatives(
    clusters: &ClusterSet,
    strategy: SelectionStrategy,
    scores: &[f64],
    timestamps: &[f64],
    frame_ids: &[String],
    d_cos: &SquareMatrix,
) -> PrunedSet {
    let mut representatives: Vec<Representative> = clusters
        .clusters
        .iter()
        .enumerate()
        .map(|(cluster_index, members)| {
            let frame_index = match strategy {
                SelectionStrategy::HighestScore => select_highest_score(members, scores, timestamps),
                SelectionStrategy::Centroid => select_centroid(members, d_cos, timestamps),
            };
            Representative {
                cluster_index,
                frame_index,
                frame_id: frame_ids[frame_index].clone(),
            }
        })
        .collect();
    representatives.sort_by(|a, b| earlier(timestamps, a.frame_index, b.frame_index));
    PrunedSet { representatives }
}
