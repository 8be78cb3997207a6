//! Density-based condensation of cant path points into cluster
//! centroids, one per future network neuron.
//!
//! Clustering is per lag level and purely planar: only (x, y) enter the
//! distance; weights are aggregated into the centroid, not clustered.
//! Noise points are promoted to singleton clusters so that every path
//! point maps to a neuron.

use serde::{Deserialize, Serialize};

use crate::agents::{Path, PointOrigin};
use crate::search_space::{PointId, Position};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClusterConfig {
    /// Neighborhood distance (inclusive), planar.
    pub eps: f64,
    pub min_pts: usize,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self { eps: 0.05, min_pts: 2 }
    }
}

/// A reference to one interior path point, flattened across all paths.
#[derive(Debug, Clone, Copy)]
pub struct InteriorPoint {
    pub path_idx: usize,
    /// Index into that path's points vector.
    pub point_idx: usize,
    pub pos: Position,
    /// Backing space point, present for exploration deposits.
    pub point_id: Option<PointId>,
}

#[derive(Debug, Clone)]
pub struct Cluster {
    pub centroid: Position,
    /// Indices into the flattened interior point list.
    pub members: Vec<usize>,
    pub source_level: usize,
}

/// Result of condensing a set of paths: clusters across all levels plus
/// a total map from interior point to cluster index.
#[derive(Debug, Clone)]
pub struct Condensed {
    pub clusters: Vec<Cluster>,
    pub interior: Vec<InteriorPoint>,
    /// assignment[i] = cluster index of interior point i.
    pub assignment: Vec<usize>,
}

/// Plain DBSCAN over planar points with inclusive eps, deterministic in
/// the input order. Returns per-point cluster labels; noise points get
/// their own fresh singleton label. Neighbor lists come from a
/// sort-by-x sweep so the whole pass is O(n log n) for bounded density.
pub fn dbscan(points: &[(f64, f64)], cfg: &ClusterConfig) -> Vec<usize> {
    let n = points.len();
    let neighbors = neighbor_lists(points, cfg.eps);
    const UNVISITED: usize = usize::MAX;
    let mut label = vec![UNVISITED; n];
    let mut next_cluster = 0;
    for i in 0..n {
        if label[i] != UNVISITED {
            continue;
        }
        // core point check: neighborhood includes the point itself
        if neighbors[i].len() + 1 < cfg.min_pts {
            continue; // provisional noise, may become a border point
        }
        let cluster = next_cluster;
        next_cluster += 1;
        label[i] = cluster;
        let mut queue: Vec<usize> = neighbors[i].clone();
        let mut qi = 0;
        while qi < queue.len() {
            let j = queue[qi];
            qi += 1;
            if label[j] == UNVISITED {
                label[j] = cluster;
                if neighbors[j].len() + 1 >= cfg.min_pts {
                    queue.extend(neighbors[j].iter().copied());
                }
            }
        }
    }
    // noise promotion: every remaining point becomes a singleton cluster
    for l in &mut label {
        if *l == UNVISITED {
            *l = next_cluster;
            next_cluster += 1;
        }
    }
    label
}

fn neighbor_lists(points: &[(f64, f64)], eps: f64) -> Vec<Vec<usize>> {
    let n = points.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| points[a].0.total_cmp(&points[b].0));
    let mut neighbors = vec![Vec::new(); n];
    for (rank, &i) in order.iter().enumerate() {
        for &j in order[rank + 1..].iter() {
            if points[j].0 - points[i].0 > eps {
                break;
            }
            let dx = points[i].0 - points[j].0;
            let dy = points[i].1 - points[j].1;
            if (dx * dx + dy * dy).sqrt() <= eps {
                neighbors[i].push(j);
                neighbors[j].push(i);
            }
        }
    }
    // keep expansion order deterministic
    for list in &mut neighbors {
        list.sort_unstable();
    }
    neighbors
}

/// Cluster the interior points of `paths`, per level. Input and output
/// anchors bypass clustering; they are fixed nodes.
pub fn condense_paths(paths: &[Path], cfg: &ClusterConfig) -> Condensed {
    let mut interior = Vec::new();
    for (pi, path) in paths.iter().enumerate() {
        for (qi, pt) in path.points.iter().enumerate() {
            if matches!(pt.origin, PointOrigin::Exploration | PointOrigin::Exploitation) {
                interior.push(InteriorPoint {
                    path_idx: pi,
                    point_idx: qi,
                    pos: pt.pos,
                    point_id: pt.point_id,
                });
            }
        }
    }

    let levels = interior.iter().map(|p| p.pos.level).max().map_or(0, |m| m + 1);
    let mut clusters = Vec::new();
    let mut assignment = vec![usize::MAX; interior.len()];
    for level in 0..levels {
        let idxs: Vec<usize> = (0..interior.len())
            .filter(|&i| interior[i].pos.level == level)
            .collect();
        if idxs.is_empty() {
            continue;
        }
        let pts: Vec<(f64, f64)> = idxs.iter().map(|&i| (interior[i].pos.x, interior[i].pos.y)).collect();
        let labels = dbscan(&pts, cfg);
        let n_clusters = labels.iter().max().unwrap() + 1;
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_clusters];
        for (k, &lab) in labels.iter().enumerate() {
            members[lab].push(idxs[k]);
        }
        for m in members.into_iter().filter(|m| !m.is_empty()) {
            let inv = 1.0 / m.len() as f64;
            let cx: f64 = m.iter().map(|&i| interior[i].pos.x).sum::<f64>() * inv;
            let cy: f64 = m.iter().map(|&i| interior[i].pos.y).sum::<f64>() * inv;
            let cw: f64 = m.iter().map(|&i| interior[i].pos.w).sum::<f64>() * inv;
            let cluster_idx = clusters.len();
            for &i in &m {
                assignment[i] = cluster_idx;
            }
            clusters.push(Cluster {
                centroid: Position::new(cx, cy, level, cw),
                members: m,
                source_level: level,
            });
        }
    }
    debug_assert!(assignment.iter().all(|&a| a != usize::MAX));
    Condensed { clusters, interior, assignment }
}
