//! Spatial-semantic graph and message passing.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use super::weights::GnnWeights;
use super::{ReasoningConfig, ReasoningError};
use crate::chem::fingerprint;
use crate::geometry::{center_distance_normalized, Region};
use crate::perception::ReactionDocument;

/// kind one-hot (4) + normalized box (4) + arrow axis (2) + fingerprint sketch (16)
pub const BASE_FEATURES: usize = 26;
/// offset (2) + distance (1) + size ratio (1) + kind-pair one-hot (16)
pub const EDGE_FEATURES: usize = 20;
pub const SKETCH_BINS: usize = 16;

#[derive(Debug, Clone)]
pub struct SpatialGraph {
    h: Vec<Vec<f64>>,
    edges: Vec<(usize, usize)>,
    neighbors: Vec<Vec<usize>>,
    /// Keyed by (receiver, sender).
    edge_attr: BTreeMap<(usize, usize), Vec<f64>>,
    scores: BTreeMap<(usize, usize), f64>,
    weights: Arc<GnnWeights>,
}

fn node_features(doc: &ReactionDocument, i: usize, config: &ReasoningConfig) -> Vec<f64> {
    let e = &doc.entities[i];
    let b = &doc.diagram_bounds;
    let mut f = vec![0.0; config.dim];
    f[e.kind.index()] = 1.0;
    let bb = e.region.bounding_box();
    f[4] = bb.x_min() / b.width();
    f[5] = bb.y_min() / b.height();
    f[6] = bb.x_max() / b.width();
    f[7] = bb.y_max() / b.height();
    if let Some((tail, head)) = e.arrow_axis() {
        let (dx, dy) = (head.x - tail.x, head.y - tail.y);
        let len = dx.hypot(dy);
        if len > 0.0 {
            f[8] = dx / len;
            f[9] = dy / len;
        }
    }
    if let Some(m) = e.molecule() {
        let sk = fingerprint(m, &config.fingerprint).sketch(SKETCH_BINS);
        f[10..10 + SKETCH_BINS].copy_from_slice(&sk);
    }
    f
}

/// Features of the message from `j` into `i`.
pub fn edge_features(doc: &ReactionDocument, i: usize, j: usize) -> Vec<f64> {
    let (ri, rj): (&Region, &Region) = (&doc.entities[i].region, &doc.entities[j].region);
    let diag = doc.diagram_bounds.diagonal();
    let (ci, cj) = (ri.center(), rj.center());
    let mut f = vec![0.0; EDGE_FEATURES];
    f[0] = (cj.x - ci.x) / diag;
    f[1] = (cj.y - ci.y) / diag;
    f[2] = center_distance_normalized(ri, rj, &doc.diagram_bounds);
    let (ai, aj) = (ri.area(), rj.area());
    let hi = ai.max(aj);
    f[3] = if hi > 0.0 { ai.min(aj) / hi } else { 1.0 };
    f[4 + doc.entities[i].kind.index() * 4 + doc.entities[j].kind.index()] = 1.0;
    f
}

fn check_weights(dim: usize, weights: &GnnWeights, layers: usize) -> Result<(), ReasoningError> {
    weights.validate()?;
    if weights.dim != dim || weights.edge_dim != EDGE_FEATURES {
        return Err(ReasoningError::Config(format!(
            "weights are {}x{} (node x edge), graph needs {}x{}",
            weights.dim, weights.edge_dim, dim, EDGE_FEATURES
        )));
    }
    if weights.layers.len() < layers {
        return Err(ReasoningError::Config(format!(
            "{} layers requested, weights hold {}",
            layers,
            weights.layers.len()
        )));
    }
    Ok(())
}

/// k nearest neighbors (by normalized centroid distance, ties by index) unioned with
/// every pair at most `radius` apart.
pub fn spatial_edges(doc: &ReactionDocument, k: usize, radius: f64) -> Vec<(usize, usize)> {
    let n = doc.entities.len();
    let dist = |i: usize, j: usize| {
        center_distance_normalized(
            &doc.entities[i].region,
            &doc.entities[j].region,
            &doc.diagram_bounds,
        )
    };
    let mut edges = BTreeSet::new();
    for i in 0..n {
        let mut others: Vec<(f64, usize)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| (dist(i, j), j))
            .collect();
        others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for (rank, &(d, j)) in others.iter().enumerate() {
            if rank < k || d <= radius {
                edges.insert((i.min(j), i.max(j)));
            }
        }
    }
    edges.into_iter().collect()
}

impl SpatialGraph {
    /// Graph over explicit features and edges; `edge_attr` needs both directions of every edge.
    pub fn from_parts(
        h0: Vec<Vec<f64>>,
        edges: Vec<(usize, usize)>,
        edge_attr: BTreeMap<(usize, usize), Vec<f64>>,
        weights: Arc<GnnWeights>,
        layers: usize,
    ) -> Result<Self, ReasoningError> {
        let n = h0.len();
        let dim = weights.dim;
        if h0.iter().any(|h| h.len() != dim) {
            return Err(ReasoningError::Config(format!(
                "node features must have dim {dim}"
            )));
        }
        check_weights(dim, &weights, layers)?;
        let mut norm: BTreeSet<(usize, usize)> = BTreeSet::new();
        for &(a, b) in &edges {
            if a == b || a >= n || b >= n {
                return Err(ReasoningError::Config(format!("bad edge ({a}, {b})")));
            }
            norm.insert((a.min(b), a.max(b)));
        }
        let mut neighbors = vec![Vec::new(); n];
        for &(a, b) in &norm {
            for key in [(a, b), (b, a)] {
                match edge_attr.get(&key) {
                    Some(v) if v.len() == weights.edge_dim => {}
                    _ => {
                        return Err(ReasoningError::Config(format!(
                            "edge {key:?} lacks features"
                        )))
                    }
                }
            }
            neighbors[a].push(b);
            neighbors[b].push(a);
        }
        Ok(SpatialGraph {
            h: h0,
            edges: norm.into_iter().collect(),
            neighbors,
            edge_attr,
            scores: BTreeMap::new(),
            weights,
        })
    }

    pub fn node_count(&self) -> usize {
        self.h.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn embedding(&self, i: usize) -> &[f64] {
        &self.h[i]
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.edges.binary_search(&(i.min(j), i.max(j))).is_ok()
    }

    /// Score of an edge after [`SpatialGraph::propagate`]; `None` for non-edges.
    pub fn score(&self, i: usize, j: usize) -> Option<f64> {
        self.scores.get(&(i.min(j), i.max(j))).copied()
    }

    pub fn scores(&self) -> &BTreeMap<(usize, usize), f64> {
        &self.scores
    }

    /// `layers` rounds of h_i <- ReLU(sum_j W1 h_j + W2 e_ij), then shifted-cosine edge scores.
    pub fn propagate(&self, layers: usize) -> Result<SpatialGraph, ReasoningError> {
        if layers == 0 {
            return Err(ReasoningError::Config(
                "propagation needs at least one layer".into(),
            ));
        }
        check_weights(self.weights.dim, &self.weights, layers)?;
        let dim = self.weights.dim;
        let mut h = self.h.clone();
        for lw in self.weights.layers.iter().take(layers) {
            let mut next = vec![vec![0.0; dim]; h.len()];
            for (i, out) in next.iter_mut().enumerate() {
                for &j in &self.neighbors[i] {
                    lw.w1.mul_add(&h[j], out);
                    lw.w2.mul_add(&self.edge_attr[&(i, j)], out);
                }
                for v in out.iter_mut() {
                    *v = v.max(0.0);
                }
            }
            h = next;
        }
        let scores = self
            .edges
            .iter()
            .map(|&(a, b)| ((a, b), shifted_cosine(&h[a], &h[b])))
            .collect();
        Ok(SpatialGraph {
            h,
            scores,
            ..self.clone()
        })
    }
}

/// (1 + cos) / 2, or 0.5 when either vector is zero.
pub fn shifted_cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.5;
    }
    ((1.0 + dot / (na * nb)) / 2.0).clamp(0.0, 1.0)
}

pub fn build_spatial_graph(
    doc: &ReactionDocument,
    config: &ReasoningConfig,
    weights: Arc<GnnWeights>,
) -> Result<SpatialGraph, ReasoningError> {
    if config.dim < BASE_FEATURES {
        return Err(ReasoningError::Config(format!(
            "dim {} is below the {BASE_FEATURES} base node features",
            config.dim
        )));
    }
    check_weights(config.dim, &weights, config.layers)?;
    let n = doc.entities.len();
    let h0: Vec<Vec<f64>> = (0..n).map(|i| node_features(doc, i, config)).collect();
    let edges = spatial_edges(doc, config.k_nn, config.radius);
    let mut attr = BTreeMap::new();
    for &(a, b) in &edges {
        attr.insert((a, b), edge_features(doc, a, b));
        attr.insert((b, a), edge_features(doc, b, a));
    }
    SpatialGraph::from_parts(h0, edges, attr, weights, config.layers)
}
